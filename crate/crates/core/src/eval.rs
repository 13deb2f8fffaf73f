//! Scoring of discovery output against a known ground-truth DAG: support
//! mass on true vs false causes, significance-weighted variants, per-graph
//! and majority-vote precision/recall/F1, and the grid results table.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::effects::CauseRecord;
use crate::ensemble::EnsembleResult;
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, RelativeSet};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 of a predicted cause set against the true ancestor
/// set. An empty prediction scores precision 1 (nothing wrongly claimed),
/// an empty truth scores recall 1; both empty is a perfect (1, 1, 1).
pub fn cause_prf1(predicted: &BTreeSet<String>, truth: &BTreeSet<String>) -> Prf1 {
    let tp = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() { 1.0 } else { tp / predicted.len() as f64 };
    let recall = if truth.is_empty() { 1.0 } else { tp / truth.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf1 { precision, recall, f1 }
}

/// Strict-majority cause set: variables that are ancestors of the outcome
/// in more than half of the ensemble graphs. Exactly half is excluded.
pub fn majority_vote(result: &EnsembleResult) -> BTreeSet<String> {
    result
        .cause_support()
        .into_iter()
        .filter(|&(_, s)| s > 0.5)
        .map(|(name, _)| name)
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupportMetrics {
    /// Mean cause support over the true ancestors (1 when there are none).
    pub tp_support: f64,
    /// Mean cause support over non-ancestor event variables (0 when every
    /// event variable is a true ancestor).
    pub fp_support: f64,
    /// Same means restricted to graphs where the cause is present with a
    /// significant effect; requires effect records.
    pub tp_sig_support: Option<f64>,
    pub fp_sig_support: Option<f64>,
}

fn truth_ancestor_names(truth: &MixedGraph, outcome: &str) -> Result<BTreeSet<String>> {
    if !truth.undirected_edges().is_empty() || !truth.is_acyclic() {
        return Err(Error::config("ground truth must be a DAG".to_string()));
    }
    let yi = truth.try_index(outcome)?;
    Ok(truth
        .relatives(yi, RelativeSet::Ancestors)
        .into_iter()
        .map(|v| truth.name(v).to_string())
        .collect())
}

fn check_same_nodes(result: &EnsembleResult, truth: &MixedGraph) -> Result<()> {
    let got: BTreeSet<&String> = result.graphs[0].names().iter().collect();
    let want: BTreeSet<&String> = truth.names().iter().collect();
    if got != want {
        return Err(Error::config(
            "ground truth and discovery output have different node sets".to_string(),
        ));
    }
    Ok(())
}

fn mean_over(names: &BTreeSet<String>, value: impl Fn(&str) -> f64, empty: f64) -> f64 {
    if names.is_empty() {
        return empty;
    }
    names.iter().map(|n| value(n)).sum::<f64>() / names.len() as f64
}

/// TP(S_c) and FP(S_c): cause-support mass averaged over true ancestors and
/// over the remaining event variables (the outcome is in neither set). With
/// effect records, the significance variants count only graphs where the
/// variable is present and its estimated total effect has p below the
/// records' threshold.
pub fn support_metrics(
    result: &EnsembleResult,
    truth: &MixedGraph,
    effects: Option<&[CauseRecord]>,
) -> Result<SupportMetrics> {
    if result.graphs.is_empty() {
        return Err(Error::config("ensemble has no graphs".to_string()));
    }
    check_same_nodes(result, truth)?;
    let anc = truth_ancestor_names(truth, &result.outcome)?;
    let support = result.cause_support();
    let non_anc: BTreeSet<String> = support
        .keys()
        .filter(|n| !anc.contains(*n))
        .cloned()
        .collect();
    let sup = |n: &str| support.get(n).copied().unwrap_or(0.0);
    let tp_support = mean_over(&anc, sup, 1.0);
    let fp_support = mean_over(&non_anc, sup, 0.0);

    let (tp_sig_support, fp_sig_support) = match effects {
        None => (None, None),
        Some(records) => {
            let k = result.graphs.len() as f64;
            let sig = |n: &str| {
                records
                    .iter()
                    .find(|r| r.variable == n)
                    .map(|r| r.significant.iter().filter(|&&b| b).count() as f64 / k)
                    .unwrap_or(0.0)
            };
            (
                Some(mean_over(&anc, sig, 1.0)),
                Some(mean_over(&non_anc, sig, 0.0)),
            )
        }
    };
    Ok(SupportMetrics { tp_support, fp_support, tp_sig_support, fp_sig_support })
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgorithmEval {
    pub algorithm: String,
    pub graph: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub outcome: String,
    pub n_graphs: usize,
    pub truth_ancestors: Vec<String>,
    pub support: SupportMetrics,
    pub per_algorithm: Vec<AlgorithmEval>,
    /// Majority-vote set scored against the truth.
    pub ensemble: Prf1,
    pub majority_vote: Vec<String>,
}

pub fn evaluate(
    result: &EnsembleResult,
    truth: &MixedGraph,
    effects: Option<&[CauseRecord]>,
) -> Result<EvalReport> {
    let support = support_metrics(result, truth, effects)?;
    let anc = truth_ancestor_names(truth, &result.outcome)?;
    let mut per_algorithm = Vec::with_capacity(result.graphs.len());
    for (k, name) in result.algorithm_names.iter().enumerate() {
        let predicted: BTreeSet<String> = result
            .cause_tuples
            .iter()
            .filter(|(_, g)| *g == k)
            .map(|(n, _)| n.clone())
            .collect();
        let p = cause_prf1(&predicted, &anc);
        per_algorithm.push(AlgorithmEval {
            algorithm: name.clone(),
            graph: k,
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        });
    }
    let vote = majority_vote(result);
    let ensemble = cause_prf1(&vote, &anc);
    Ok(EvalReport {
        outcome: result.outcome.clone(),
        n_graphs: result.graphs.len(),
        truth_ancestors: anc.into_iter().collect(),
        support,
        per_algorithm,
        ensemble,
        majority_vote: vote.into_iter().collect(),
    })
}

/// Mean and sample standard deviation (0 below two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One aggregated cell of the grid results table.
#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub topology: String,
    pub n: usize,
    pub sparsity: f64,
    pub generator: String,
    pub algorithm: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

impl GridCell {
    pub fn from_values(
        topology: &str,
        n: usize,
        sparsity: f64,
        generator: &str,
        algorithm: &str,
        metric: &str,
        values: &[f64],
    ) -> GridCell {
        let (mean, std) = mean_std(values);
        GridCell {
            topology: topology.to_string(),
            n,
            sparsity,
            generator: generator.to_string(),
            algorithm: algorithm.to_string(),
            metric: metric.to_string(),
            mean,
            std,
            runs: values.len(),
        }
    }
}

/// CSV with one row per (configuration, algorithm, metric) cell.
pub fn results_table_csv(cells: &[GridCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["topology", "n", "sparsity", "generator", "algorithm", "metric", "mean", "std", "runs"])
        .map_err(|e| Error::internal(e.to_string()))?;
    for c in cells {
        w.write_record([
            c.topology.clone(),
            c.n.to_string(),
            c.sparsity.to_string(),
            c.generator.clone(),
            c.algorithm.clone(),
            c.metric.clone(),
            format!("{:.6}", c.mean),
            format!("{:.6}", c.std),
            c.runs.to_string(),
        ])
        .map_err(|e| Error::internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryDataset;
    use crate::effects::analyze_causes;
    use crate::graph::StructuralConstraints;
    use crate::learn::{LearnerKind, LearnerParams, LearnerSpec};
    use crate::synth::{random_dag, sample_parametric, DagGenConfig, GenMode, Topology, OUTCOME_NODE};
    use approx::assert_abs_diff_eq;

    fn graph(names: &[&str], edges: &[(usize, usize)]) -> MixedGraph {
        let mut g = MixedGraph::new(names.iter().map(|s| s.to_string()).collect()).unwrap();
        for &(a, b) in edges {
            g.add_directed(a, b).unwrap();
        }
        g
    }

    fn ensemble_from_graphs(graphs: Vec<MixedGraph>, outcome: &str) -> EnsembleResult {
        let mut cause_tuples = BTreeSet::new();
        for (k, g) in graphs.iter().enumerate() {
            let yi = g.try_index(outcome).unwrap();
            for a in g.relatives(yi, RelativeSet::Ancestors) {
                cause_tuples.insert((g.name(a).to_string(), k));
            }
        }
        let algorithm_names = (0..graphs.len()).map(|i| format!("g{i}")).collect();
        EnsembleResult {
            graphs,
            cause_tuples,
            algorithm_names,
            outcome: outcome.to_string(),
        }
    }

    /// anc(y) = {a, b} in truth; memberships a:4, b:2, c:1 across K=4.
    fn worked_example() -> (EnsembleResult, MixedGraph) {
        let names = ["a", "b", "c", "y"];
        let truth = graph(&names, &[(1, 0), (0, 3)]);
        let graphs = vec![
            graph(&names, &[(1, 0), (0, 3)]),
            graph(&names, &[(1, 0), (0, 3)]),
            graph(&names, &[(0, 3)]),
            graph(&names, &[(0, 3), (2, 3)]),
        ];
        (ensemble_from_graphs(graphs, "y"), truth)
    }

    #[test]
    fn support_metrics_match_the_worked_example() {
        let (result, truth) = worked_example();
        let m = support_metrics(&result, &truth, None).unwrap();
        assert_abs_diff_eq!(m.tp_support, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(m.fp_support, 0.25, epsilon = 1e-12);
        assert!(m.tp_sig_support.is_none() && m.fp_sig_support.is_none());
    }

    #[test]
    fn no_false_positives_means_zero_fp_support() {
        let names = ["a", "b", "y"];
        let truth = graph(&names, &[(0, 2), (1, 2)]);
        let graphs = vec![graph(&names, &[(0, 2)]), graph(&names, &[(1, 2)])];
        let m = support_metrics(&ensemble_from_graphs(graphs, "y"), &truth, None).unwrap();
        assert_eq!(m.fp_support, 0.0);
        assert_abs_diff_eq!(m.tp_support, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn node_set_mismatch_is_rejected() {
        let (result, _) = worked_example();
        let other = graph(&["a", "b", "y"], &[(0, 2)]);
        assert!(support_metrics(&result, &other, None).is_err());
        // and a truth with undirected edges is not a DAG
        let mut bad = graph(&["a", "b", "c", "y"], &[(0, 3)]);
        bad.add_undirected(1, 2).unwrap();
        assert!(support_metrics(&result, &bad, None).is_err());
    }

    #[test]
    fn significance_variants_count_present_and_significant_graphs() {
        let (result, truth) = worked_example();
        // a: significant in 2 of its 4 appearances; b: both; c: none
        let data = BinaryDataset::new(
            vec!["a".into(), "b".into(), "c".into(), "y".into()],
            vec![
                vec![0, 1, 0, 1, 1, 0],
                vec![0, 0, 1, 1, 0, 1],
                vec![1, 0, 0, 1, 0, 0],
                vec![0, 1, 0, 1, 1, 0],
            ],
            "y",
        )
        .unwrap();
        let mut records = analyze_causes(&data, &result, 0.05).unwrap();
        for r in &mut records {
            r.significant = match r.variable.as_str() {
                "a" => vec![true, false, true, false],
                "b" => vec![true, true, false, false],
                _ => vec![false; 4],
            };
        }
        let m = support_metrics(&result, &truth, Some(&records)).unwrap();
        // a: 2/4, b: 2/4 -> mean 0.5; c: 0
        assert_abs_diff_eq!(m.tp_sig_support.unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(m.fp_sig_support.unwrap(), 0.0);
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn prf1_definitions_and_conventions() {
        let p = cause_prf1(&set(&["a", "b"]), &set(&["a", "b"]));
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let p = cause_prf1(&set(&["a", "c"]), &set(&["a", "b"]));
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        let p = cause_prf1(&set(&[]), &set(&[]));
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let p = cause_prf1(&set(&[]), &set(&["a"]));
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 0.0, 0.0));
        let p = cause_prf1(&set(&["a"]), &set(&[]));
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 1.0, 0.0));
    }

    #[test]
    fn f1_satisfies_the_harmonic_identity() {
        for (pred, truth) in [
            (set(&["a", "b", "c"]), set(&["b", "c", "d"])),
            (set(&["a"]), set(&["a", "b", "c", "d"])),
            (set(&["a", "b"]), set(&["c"])),
        ] {
            let p = cause_prf1(&pred, &truth);
            assert_abs_diff_eq!(
                p.f1 * (p.precision + p.recall),
                2.0 * p.precision * p.recall,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn majority_vote_is_strict() {
        let names = ["a", "b", "y"];
        // a in 3/5 graphs, b in 2/5
        let graphs = vec![
            graph(&names, &[(0, 2), (1, 2)]),
            graph(&names, &[(0, 2), (1, 2)]),
            graph(&names, &[(0, 2)]),
            graph(&names, &[]),
            graph(&names, &[]),
        ];
        let vote = majority_vote(&ensemble_from_graphs(graphs, "y"));
        assert_eq!(vote, set(&["a"]));
        // exactly half is excluded
        let graphs = vec![
            graph(&names, &[(0, 2)]),
            graph(&names, &[(0, 2)]),
            graph(&names, &[]),
            graph(&names, &[]),
        ];
        let vote = majority_vote(&ensemble_from_graphs(graphs, "y"));
        assert!(vote.is_empty());
        // a single graph votes its own ancestor set
        let graphs = vec![graph(&names, &[(1, 2)])];
        let vote = majority_vote(&ensemble_from_graphs(graphs, "y"));
        assert_eq!(vote, set(&["b"]));
    }

    #[test]
    fn vote_set_is_contained_in_the_prediction_union() {
        let (result, _) = worked_example();
        let union: BTreeSet<String> =
            result.cause_tuples.iter().map(|(n, _)| n.clone()).collect();
        for v in majority_vote(&result) {
            assert!(union.contains(&v));
        }
    }

    #[test]
    fn evaluate_assembles_per_algorithm_and_ensemble_rows() {
        let (result, truth) = worked_example();
        let report = evaluate(&result, &truth, None).unwrap();
        assert_eq!(report.truth_ancestors, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(report.per_algorithm.len(), 4);
        // graph 0 predicts {a, b} exactly
        assert_eq!(report.per_algorithm[0].f1, 1.0);
        // graph 3 predicts {a, c}
        assert_eq!(report.per_algorithm[3].precision, 0.5);
        // vote set is {a}: precision 1, recall 0.5
        assert_eq!(report.majority_vote, vec!["a".to_string()]);
        assert_abs_diff_eq!(report.ensemble.recall, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(report.ensemble.f1, 2.0 / 3.0, epsilon = 1e-12);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("tp_support"));
    }

    #[test]
    fn metrics_stay_in_unit_range_on_a_real_run() {
        let dag = random_dag(&DagGenConfig {
            topology: Topology::Er,
            n: 6,
            sparsity: 1.0,
            seed: 3,
        })
        .unwrap();
        let (data, _) = sample_parametric(&dag, OUTCOME_NODE, GenMode::Logistic, 3000, 4).unwrap();
        let cons = StructuralConstraints::outcome_sink(OUTCOME_NODE, data.names());
        let specs = vec![
            LearnerSpec { kind: LearnerKind::Pc, bootstrap: false },
            LearnerSpec { kind: LearnerKind::Hc, bootstrap: false },
        ];
        let result = crate::ensemble::run_ensemble(
            &data,
            None,
            &specs,
            &cons,
            &LearnerParams::default(),
        )
        .unwrap();
        let report = evaluate(&result, &dag, None).unwrap();
        for v in [
            report.support.tp_support,
            report.support.fp_support,
            report.ensemble.precision,
            report.ensemble.recall,
            report.ensemble.f1,
        ] {
            assert!((0.0..=1.0).contains(&v), "metric {v} out of range");
        }
        assert!(
            report.support.tp_support > report.support.fp_support,
            "tp {} fp {}",
            report.support.tp_support,
            report.support.fp_support
        );
    }

    #[test]
    fn mean_std_handles_small_inputs() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn results_table_round_trips_through_csv() {
        let cells = vec![
            GridCell::from_values("er", 10, 0.8, "l", "ensemble", "f1", &[0.9, 0.8]),
            GridCell::from_values("ba", 20, 2.0, "ll", "pc", "tp_support", &[0.5]),
        ];
        let text = results_table_csv(&cells).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "topology,n,sparsity,generator,algorithm,metric,mean,std,runs"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "er");
        assert_eq!(row[5], "f1");
        assert!((row[6].parse::<f64>().unwrap() - 0.85).abs() < 1e-9);
        assert_eq!(row[8], "2");
        assert_eq!(text.lines().count(), 3);
    }
}
