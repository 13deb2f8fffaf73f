//! Runs a committee of structure learners over one dataset, resolves leftover
//! undirected edges with event-order evidence, and tallies how often each
//! variable is an ancestor of the outcome.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::graph::{MixedGraph, RelativeSet, StructuralConstraints};
use crate::learn::{bootstrap_aggregate, run_learner, LearnerParams, LearnerSpec};

/// Temporal precedence evidence for one ordered event pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientationSupport {
    pub value: f64,
    /// Units where both events occur. Zero means `value` is the
    /// uninformative 0.5 placeholder.
    pub eligible_units: usize,
}

/// Fraction of units, among those observing both events, whose earliest `j`
/// strictly precedes their earliest `k`. A tie in first-occurrence times
/// counts against j-before-k.
pub fn orientation_support(log: &EventLog, j: &str, k: &str) -> Result<OrientationSupport> {
    for e in [j, k] {
        if e != log.outcome_event && !log.vocabulary.iter().any(|v| v == e) {
            return Err(Error::data(format!("unknown event {e}")));
        }
    }
    let mut eligible = 0usize;
    let mut j_first = 0usize;
    for unit in &log.units {
        let (Some(tj), Some(tk)) = (
            unit.min_occurrence_time(j),
            unit.min_occurrence_time(k),
        ) else {
            continue;
        };
        eligible += 1;
        if tj < tk {
            j_first += 1;
        }
    }
    if eligible == 0 {
        return Ok(OrientationSupport { value: 0.5, eligible_units: 0 });
    }
    Ok(OrientationSupport {
        value: j_first as f64 / eligible as f64,
        eligible_units: eligible,
    })
}

/// Precomputed orientation support for every ordered event pair that shares
/// at least one unit. Pairs with no shared unit (and names that are not
/// events at all, like covariate columns) fall back to 0.5.
#[derive(Clone, Debug, Default)]
pub struct OrientationSupportTable {
    pub entries: BTreeMap<(String, String), f64>,
    pub eligible_unit_counts: BTreeMap<(String, String), usize>,
}

impl OrientationSupportTable {
    pub fn from_log(log: &EventLog) -> Self {
        let mut eligible: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut first: BTreeMap<(String, String), usize> = BTreeMap::new();
        for unit in &log.units {
            let mut min_time: BTreeMap<&str, u32> = BTreeMap::new();
            for (name, t) in &unit.events {
                min_time
                    .entry(name.as_str())
                    .and_modify(|m| *m = (*m).min(*t))
                    .or_insert(*t);
            }
            for (&a, &ta) in &min_time {
                for (&b, &tb) in &min_time {
                    if a == b {
                        continue;
                    }
                    *eligible.entry((a.to_string(), b.to_string())).or_default() += 1;
                    if ta < tb {
                        *first.entry((a.to_string(), b.to_string())).or_default() += 1;
                    }
                }
            }
        }
        let entries = eligible
            .iter()
            .map(|(pair, &n)| {
                let f = first.get(pair).copied().unwrap_or(0);
                (pair.clone(), f as f64 / n as f64)
            })
            .collect();
        OrientationSupportTable { entries, eligible_unit_counts: eligible }
    }

    pub fn support(&self, parent: &str, child: &str) -> f64 {
        self.entries
            .get(&(parent.to_string(), child.to_string()))
            .copied()
            .unwrap_or(0.5)
    }

    pub fn eligible_units(&self, a: &str, b: &str) -> usize {
        self.eligible_unit_counts
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(0)
    }
}

/// Greedy resolution of undirected edges by temporal precedence: candidate
/// orientations in descending support order (ties by parent then child name),
/// each committed only if it neither reverses an already-directed edge nor
/// creates a cycle or a new unshielded collider, with rule-based closure
/// after every commit. Conflict-marked edges are left alone. An edge whose
/// both orientations are blocked stays undirected.
pub fn orient_pdag(g: &MixedGraph, table: &OrientationSupportTable) -> MixedGraph {
    let mut out = g.clone();
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (a, b) in g.undirected_edges() {
        if g.is_locked(a, b) {
            continue;
        }
        for (u, v) in [(a, b), (b, a)] {
            cands.push((table.support(g.name(u), g.name(v)), u, v));
        }
    }
    cands.sort_by(|l, r| {
        r.0.partial_cmp(&l.0)
            .unwrap()
            .then_with(|| (g.name(l.1), g.name(l.2)).cmp(&(g.name(r.1), g.name(r.2))))
    });
    for (_, u, v) in cands {
        if !out.has_undirected(u, v) || out.is_locked(u, v) {
            continue;
        }
        if !out.validate_edge_addition(u, v).ok() {
            continue;
        }
        out.orient(u, v).expect("validated orientation");
        out.apply_meek_rules(None);
    }
    out
}

/// Exhaustive counterpart of `orient_pdag`: among all consistent extensions,
/// the one with the largest summed support over its newly directed edges.
/// Ties go to the lexicographically smallest sorted list of newly directed
/// (parent, child) name pairs.
pub fn orient_pdag_exhaustive(
    g: &MixedGraph,
    table: &OrientationSupportTable,
    budget: usize,
) -> Result<MixedGraph> {
    if g.undirected_edges().is_empty() {
        return Ok(g.clone());
    }
    let exts = g.enumerate_consistent_extensions(budget)?;
    let base: HashSet<(usize, usize)> = g.directed_edges().into_iter().collect();
    let mut best: Option<(f64, Vec<(String, String)>, MixedGraph)> = None;
    for ext in exts {
        let mut newly: Vec<(String, String)> = ext
            .directed_edges()
            .into_iter()
            .filter(|e| !base.contains(e))
            .map(|(a, b)| (g.name(a).to_string(), g.name(b).to_string()))
            .collect();
        newly.sort();
        let total: f64 = newly.iter().map(|(p, c)| table.support(p, c)).sum();
        let better = match &best {
            None => true,
            Some((bt, bn, _)) => total > *bt || (total == *bt && newly < *bn),
        };
        if better {
            best = Some((total, newly, ext));
        }
    }
    best.map(|(_, _, ext)| ext)
        .ok_or_else(|| Error::data("graph admits no consistent extension".to_string()))
}

/// Output of one committee run: the per-learner graphs (after aggregation and
/// orientation) and the set of (variable, graph-index) ancestor findings.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub graphs: Vec<MixedGraph>,
    pub cause_tuples: BTreeSet<(String, usize)>,
    pub algorithm_names: Vec<String>,
    pub outcome: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VariableReport {
    pub cause_support: f64,
    pub per_graph_presence: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub outcome: String,
    pub algorithms: Vec<String>,
    pub variables: BTreeMap<String, VariableReport>,
}

impl EnsembleResult {
    /// Rebuilds a result from already-materialized graphs, recomputing the
    /// ancestor tuples. Every graph must contain the outcome.
    pub fn from_graphs(
        graphs: Vec<MixedGraph>,
        algorithm_names: Vec<String>,
        outcome: &str,
    ) -> Result<EnsembleResult> {
        if graphs.is_empty() {
            return Err(Error::config("ensemble needs at least one graph".to_string()));
        }
        if graphs.len() != algorithm_names.len() {
            return Err(Error::config("one algorithm name per graph required".to_string()));
        }
        let mut cause_tuples = BTreeSet::new();
        for (k, g) in graphs.iter().enumerate() {
            let yi = g.try_index(outcome)?;
            for a in g.relatives(yi, RelativeSet::Ancestors) {
                cause_tuples.insert((g.name(a).to_string(), k));
            }
        }
        Ok(EnsembleResult {
            graphs,
            cause_tuples,
            algorithm_names,
            outcome: outcome.to_string(),
        })
    }
    /// S_c: fraction of graphs in which the variable is an ancestor of the
    /// outcome. Every non-outcome variable is present, absentees at 0.
    pub fn cause_support(&self) -> BTreeMap<String, f64> {
        let k = self.graphs.len();
        let mut counts: BTreeMap<String, usize> = self
            .graphs[0]
            .names()
            .iter()
            .filter(|n| **n != self.outcome)
            .map(|n| (n.clone(), 0))
            .collect();
        for (name, _) in &self.cause_tuples {
            *counts.get_mut(name).expect("cause tuple names a known variable") += 1;
        }
        counts
            .into_iter()
            .map(|(n, c)| (n, c as f64 / k as f64))
            .collect()
    }

    pub fn per_graph_presence(&self, variable: &str) -> Vec<bool> {
        (0..self.graphs.len())
            .map(|k| self.cause_tuples.contains(&(variable.to_string(), k)))
            .collect()
    }

    pub fn report(&self) -> EnsembleReport {
        let variables = self
            .cause_support()
            .into_iter()
            .map(|(name, s)| {
                let presence = self.per_graph_presence(&name);
                (name, VariableReport { cause_support: s, per_graph_presence: presence })
            })
            .collect();
        EnsembleReport {
            outcome: self.outcome.clone(),
            algorithms: self.algorithm_names.clone(),
            variables,
        }
    }
}

/// Runs every learner (bootstrap-aggregated where its spec asks for it),
/// orients leftover undirected edges from the event log when one is given,
/// and collects the ancestor tuples of the outcome.
pub fn run_ensemble(
    data: &BinaryDataset,
    log: Option<&EventLog>,
    learners: &[LearnerSpec],
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<EnsembleResult> {
    if learners.is_empty() {
        return Err(Error::config("ensemble needs at least one learner".to_string()));
    }
    params.validate()?;
    let mut graphs: Vec<MixedGraph> = learners
        .par_iter()
        .map(|spec| {
            if spec.bootstrap {
                bootstrap_aggregate(spec.kind, data, constraints, params)
            } else {
                run_learner(spec.kind, data, constraints, params)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(log) = log {
        let table = OrientationSupportTable::from_log(log);
        for g in &mut graphs {
            if !g.undirected_edges().is_empty() {
                *g = orient_pdag(g, &table);
            }
        }
    }
    let names = learners.iter().map(|s| s.kind.name().to_string()).collect();
    EnsembleResult::from_graphs(graphs, names, data.outcome_name())
}
