//! Effect estimation on top of discovered graphs: backdoor-adjusted average
//! treatment effects (nonparametric plug-in and linear-probability OLS),
//! interaction-based heterogeneity tests, candidate effect modifiers read off
//! the graph, and the two-key cause ranking.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::BinaryDataset;
use crate::ensemble::EnsembleResult;
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, RelativeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    Plugin,
    Regression,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub treatment: String,
    /// (modifier, level) when this is a CATE; absent for the plain ATE.
    pub conditioning: Option<(String, u8)>,
    pub effect: f64,
    pub std_err: f64,
    /// The plug-in estimator carries no analytic p-value.
    pub p_value: Option<f64>,
    pub adjustment_set: Vec<String>,
    pub method: EstimationMethod,
    /// Columns removed to restore full rank (regression only).
    pub dropped_columns: Vec<String>,
}

fn check_distinct(
    data: &BinaryDataset,
    x: &str,
    y: &str,
    w: &[String],
    z: Option<&str>,
) -> Result<Vec<String>> {
    data.try_index(x)?;
    data.try_index(y)?;
    if x == y {
        return Err(Error::config("treatment and outcome must differ".to_string()));
    }
    let mut wset: BTreeSet<String> = BTreeSet::new();
    for name in w {
        data.try_index(name)?;
        if name == x || name == y {
            return Err(Error::config(format!(
                "adjustment set must exclude treatment and outcome, got {name}"
            )));
        }
        wset.insert(name.clone());
    }
    if let Some(z) = z {
        data.try_index(z)?;
        if z == x || z == y {
            return Err(Error::config(
                "conditioning variable must differ from treatment and outcome".to_string(),
            ));
        }
    }
    Ok(wset.into_iter().collect())
}

fn stratum_label(w: &[String], key: u64, z: Option<(&str, u8)>) -> String {
    let mut parts: Vec<String> = w
        .iter()
        .enumerate()
        .map(|(i, name)| format!("{name}={}", key >> i & 1))
        .collect();
    if let Some((zn, lv)) = z {
        parts.push(format!("{zn}={lv}"));
    }
    if parts.is_empty() {
        "(none)".to_string()
    } else {
        parts.join(", ")
    }
}

/// Nonparametric backdoor plug-in: sum over observed adjustment strata of the
/// within-stratum outcome-mean contrast, weighted by the stratum frequency.
/// With `z`, everything is computed on the rows at that modifier level.
pub fn ate_backdoor_plugin(
    data: &BinaryDataset,
    x: &str,
    y: &str,
    w: &[String],
    z: Option<(&str, u8)>,
) -> Result<EffectEstimate> {
    let w = check_distinct(data, x, y, w, z.map(|(n, _)| n))?;
    if w.len() > 63 {
        return Err(Error::config("adjustment set too large to stratify".to_string()));
    }
    let xi = data.try_index(x)?;
    let yi = data.try_index(y)?;
    let wi: Vec<usize> = w.iter().map(|n| data.try_index(n)).collect::<Result<_>>()?;
    let zcol = match z {
        Some((zn, lv)) => Some((data.try_index(zn)?, lv)),
        None => None,
    };

    // per stratum: [rows, rows(x=1), sum y(x=1), rows(x=0), sum y(x=0)]
    let mut strata: std::collections::BTreeMap<u64, [u64; 5]> = std::collections::BTreeMap::new();
    let mut slice_rows = 0u64;
    for r in 0..data.n_rows() {
        if let Some((zi, lv)) = zcol {
            if data.column(zi)[r] != lv {
                continue;
            }
        }
        slice_rows += 1;
        let mut key = 0u64;
        for (i, &c) in wi.iter().enumerate() {
            key |= u64::from(data.column(c)[r]) << i;
        }
        let e = strata.entry(key).or_insert([0; 5]);
        e[0] += 1;
        let yv = u64::from(data.column(yi)[r]);
        if data.column(xi)[r] == 1 {
            e[1] += 1;
            e[2] += yv;
        } else {
            e[3] += 1;
            e[4] += yv;
        }
    }
    if slice_rows == 0 {
        return Err(Error::data(match z {
            Some((zn, lv)) => format!("no rows with {zn}={lv}"),
            None => "dataset has no rows".to_string(),
        }));
    }
    let mut effect = 0.0;
    for (&key, e) in &strata {
        let [n_w, n1, s1, n0, s0] = *e;
        if n1 == 0 || n0 == 0 {
            return Err(Error::Positivity { stratum: stratum_label(&w, key, z) });
        }
        let contrast = s1 as f64 / n1 as f64 - s0 as f64 / n0 as f64;
        effect += contrast * (n_w as f64 / slice_rows as f64);
    }
    Ok(EffectEstimate {
        treatment: x.to_string(),
        conditioning: z.map(|(n, lv)| (n.to_string(), lv)),
        effect,
        std_err: 0.0,
        p_value: None,
        adjustment_set: w,
        method: EstimationMethod::Plugin,
        dropped_columns: Vec::new(),
    })
}

struct OlsFit {
    /// Kept design columns, in input order.
    names: Vec<String>,
    coef: Vec<f64>,
    std_err: Vec<f64>,
    p_value: Vec<f64>,
    dropped: Vec<String>,
}

impl OlsFit {
    fn by_name(&self, name: &str) -> Option<(f64, f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.coef[i], self.std_err[i], self.p_value[i]))
    }
}

/// Least squares via the normal equations, with greedy column selection:
/// columns are admitted in order and a column that would make the Gram
/// matrix (numerically) singular is dropped instead of failing.
fn ols(columns: &[(String, Vec<f64>)], response: &[f64]) -> Result<OlsFit> {
    let n = response.len();
    if n == 0 {
        return Err(Error::data("regression needs rows".to_string()));
    }
    for (name, col) in columns {
        if col.len() != n {
            return Err(Error::internal(format!("column {name} length mismatch")));
        }
    }
    let p = columns.len();
    let gram = DMatrix::from_fn(p, p, |i, j| {
        columns[i].1.iter().zip(&columns[j].1).map(|(a, b)| a * b).sum::<f64>()
    });
    let xty = DVector::from_fn(p, |i, _| {
        columns[i].1.iter().zip(response).map(|(a, b)| a * b).sum::<f64>()
    });

    let mut active: Vec<usize> = Vec::new();
    let mut dropped: Vec<String> = Vec::new();
    let mut chol: Option<Cholesky<f64, nalgebra::Dyn>> = None;
    for j in 0..p {
        let mut trial = active.clone();
        trial.push(j);
        let sub = DMatrix::from_fn(trial.len(), trial.len(), |a, b| gram[(trial[a], trial[b])]);
        match Cholesky::new(sub) {
            Some(c) => {
                let d = c.l_dirty().diagonal();
                let dmax = d.iter().cloned().fold(1.0f64, f64::max);
                if d.iter().all(|&v| v > 1e-7 * dmax) {
                    active = trial;
                    chol = Some(c);
                } else {
                    dropped.push(columns[j].0.clone());
                }
            }
            None => dropped.push(columns[j].0.clone()),
        }
    }
    let chol = chol.ok_or_else(|| Error::data("design matrix has no usable column".to_string()))?;
    let k = active.len();
    if n <= k {
        return Err(Error::data("more coefficients than rows".to_string()));
    }
    let c_sub = DVector::from_fn(k, |i, _| xty[active[i]]);
    let beta = chol.solve(&c_sub);

    let mut rss = 0.0;
    for r in 0..n {
        let pred: f64 = active
            .iter()
            .enumerate()
            .map(|(i, &j)| beta[i] * columns[j].1[r])
            .sum();
        let e = response[r] - pred;
        rss += e * e;
    }
    let df = (n - k) as f64;
    let sigma2 = (rss / df).max(0.0);
    let cov = chol.inverse() * sigma2;
    let tdist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::internal(format!("t distribution: {e}")))?;

    let mut names = Vec::with_capacity(k);
    let mut coef = Vec::with_capacity(k);
    let mut std_err = Vec::with_capacity(k);
    let mut p_value = Vec::with_capacity(k);
    for (i, &j) in active.iter().enumerate() {
        let se = cov[(i, i)].max(0.0).sqrt();
        let b = beta[i];
        let pv = if se > 0.0 {
            (2.0 * (1.0 - tdist.cdf((b / se).abs()))).clamp(0.0, 1.0)
        } else if b.abs() > 1e-12 {
            // zero residual variance: the coefficient is exact
            0.0
        } else {
            1.0
        };
        names.push(columns[j].0.clone());
        coef.push(b);
        std_err.push(se);
        p_value.push(pv);
    }
    Ok(OlsFit { names, coef, std_err, p_value, dropped })
}

const INTERCEPT: &str = "(intercept)";

fn f64_column(data: &BinaryDataset, idx: usize) -> Vec<f64> {
    data.column(idx).iter().map(|&v| f64::from(v)).collect()
}

/// Linear-probability OLS of the outcome on treatment plus adjustment set,
/// with intercept. Effect is the treatment coefficient; p from its t test.
pub fn ate_regression(
    data: &BinaryDataset,
    x: &str,
    y: &str,
    w: &[String],
) -> Result<EffectEstimate> {
    let w = check_distinct(data, x, y, w, None)?;
    let n = data.n_rows();
    let mut cols: Vec<(String, Vec<f64>)> = vec![
        (INTERCEPT.to_string(), vec![1.0; n]),
        (x.to_string(), f64_column(data, data.try_index(x)?)),
    ];
    for name in &w {
        cols.push((name.clone(), f64_column(data, data.try_index(name)?)));
    }
    let response = f64_column(data, data.try_index(y)?);
    let fit = ols(&cols, &response)?;
    let (effect, std_err, p) = fit.by_name(x).ok_or_else(|| {
        Error::data(format!("treatment {x} is constant or collinear"))
    })?;
    Ok(EffectEstimate {
        treatment: x.to_string(),
        conditioning: None,
        effect,
        std_err,
        p_value: Some(p),
        adjustment_set: w,
        method: EstimationMethod::Regression,
        dropped_columns: fit.dropped,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HteEstimate {
    pub treatment: String,
    pub modifier: String,
    pub cate_z1: f64,
    pub cate_z0: f64,
    /// Interaction coefficient; equals cate_z1 - cate_z0 by construction.
    pub delta: f64,
    pub p_interaction: f64,
    pub dropped_columns: Vec<String>,
}

/// Interaction regression of the outcome on
/// {1, x, z, x*z} ∪ W ∪ {W*z}. CATE(z=0) is the treatment coefficient,
/// the interaction coefficient is the CATE difference.
pub fn hte_regression(
    data: &BinaryDataset,
    x: &str,
    y: &str,
    z: &str,
    w: &[String],
) -> Result<HteEstimate> {
    let w = check_distinct(data, x, y, w, Some(z))?;
    let n = data.n_rows();
    let xv = f64_column(data, data.try_index(x)?);
    let zv = f64_column(data, data.try_index(z)?);
    let inter_name = format!("{x}:{z}");
    let mut cols: Vec<(String, Vec<f64>)> = vec![
        (INTERCEPT.to_string(), vec![1.0; n]),
        (x.to_string(), xv.clone()),
        (z.to_string(), zv.clone()),
        (
            inter_name.clone(),
            xv.iter().zip(&zv).map(|(a, b)| a * b).collect(),
        ),
    ];
    for name in &w {
        if name == z {
            continue;
        }
        let wv = f64_column(data, data.try_index(name)?);
        cols.push((name.clone(), wv.clone()));
        cols.push((
            format!("{name}:{z}"),
            wv.iter().zip(&zv).map(|(a, b)| a * b).collect(),
        ));
    }
    let response = f64_column(data, data.try_index(y)?);
    let fit = ols(&cols, &response)?;
    let (cate_z0, _, _) = fit
        .by_name(x)
        .ok_or_else(|| Error::data(format!("treatment {x} is constant or collinear")))?;
    if fit.by_name(z).is_none() {
        return Err(Error::data(format!("modifier {z} is constant or collinear")));
    }
    let (delta, _, p_interaction) = fit.by_name(&inter_name).ok_or_else(|| {
        Error::data(format!("interaction {inter_name} is constant or collinear"))
    })?;
    Ok(HteEstimate {
        treatment: x.to_string(),
        modifier: z.to_string(),
        cate_z1: cate_z0 + delta,
        cate_z0,
        delta,
        p_interaction,
        dropped_columns: fit.dropped,
    })
}

/// Candidate effect modifiers of `x` on `y` in a directed (ancestral)
/// graph: variables outside x's strict descendants that parent at least one
/// strict descendant of x. Returns the empty set when x is absent or not an
/// ancestor of y; x and y never qualify themselves.
pub fn candidate_effect_modifiers(
    g: &MixedGraph,
    x: &str,
    y: &str,
) -> Result<BTreeSet<String>> {
    let yi = g.try_index(y)?;
    let Some(xi) = g.index_of(x) else {
        return Ok(BTreeSet::new());
    };
    if xi == yi || !g.directed_path_exists(xi, yi) {
        return Ok(BTreeSet::new());
    }
    let des = g.relatives(xi, RelativeSet::Descendants);
    let mut out = BTreeSet::new();
    for &d in &des {
        for &p in g.parents(d) {
            if p != xi && p != yi && !des.contains(&p) {
                out.insert(g.name(p).to_string());
            }
        }
    }
    Ok(out)
}

/// One graph's contribution to a cause's effect multi-set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphEffect {
    pub graph: usize,
    /// Whether the variable is an ancestor of the outcome in this graph.
    pub present: bool,
    /// Whether the effect could actually be estimated (present and no
    /// estimation failure). The multi-set entry is 0 otherwise.
    pub identifiable: bool,
    pub ate: f64,
    pub std_err: f64,
    pub p_value: Option<f64>,
    pub adjustment_set: Vec<String>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModifierFinding {
    pub modifier: String,
    pub graph: usize,
    pub cate_z1: f64,
    pub cate_z0: f64,
    pub delta: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CauseRecord {
    pub variable: String,
    pub support: f64,
    /// One entry per ensemble graph, in graph order.
    pub effects: Vec<GraphEffect>,
    /// Per graph: present with a significant effect estimate.
    pub significant: Vec<bool>,
    /// Deduplicated by modifier (smallest interaction p kept).
    pub modifiers: Vec<ModifierFinding>,
    pub notes: Vec<String>,
}

impl CauseRecord {
    pub fn effect_multiset(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.ate).collect()
    }

    /// Largest nonzero effect, 0 if every entry is zero.
    pub fn max_effect(&self) -> f64 {
        self.effects
            .iter()
            .map(|e| e.ate)
            .filter(|&v| v != 0.0)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
            .min(f64::INFINITY)
    }

    /// Smallest nonzero effect, 0 if every entry is zero.
    pub fn min_effect(&self) -> f64 {
        let m = self
            .effects
            .iter()
            .map(|e| e.ate)
            .filter(|&v| v != 0.0)
            .fold(f64::INFINITY, f64::min);
        if m == f64::INFINITY {
            0.0
        } else {
            m
        }
    }
}

/// Per-variable effect analysis across the whole ensemble: for every graph
/// in which the variable is an ancestor of the outcome, a backdoor-adjusted
/// regression ATE with the variable's parents as adjustment set, plus
/// interaction tests for every candidate modifier found in that graph's
/// ancestral subgraph. Estimation failures are recorded, never fatal.
pub fn analyze_causes(
    data: &BinaryDataset,
    result: &EnsembleResult,
    alpha: f64,
) -> Result<Vec<CauseRecord>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must be in (0,1), got {alpha}")));
    }
    let outcome = &result.outcome;
    let support = result.cause_support();
    let k_total = result.graphs.len();
    let mut records = Vec::with_capacity(support.len());
    for (variable, &s) in &support {
        let mut effects = Vec::with_capacity(k_total);
        let mut significant = vec![false; k_total];
        let mut modifiers: Vec<ModifierFinding> = Vec::new();
        let mut notes = Vec::new();
        for (k, g) in result.graphs.iter().enumerate() {
            let present = result.cause_tuples.contains(&(variable.clone(), k));
            if !present {
                effects.push(GraphEffect {
                    graph: k,
                    present: false,
                    identifiable: false,
                    ate: 0.0,
                    std_err: 0.0,
                    p_value: None,
                    adjustment_set: Vec::new(),
                    note: None,
                });
                continue;
            }
            let vi = g.try_index(variable)?;
            let mut wnames: Vec<String> = g
                .parents(vi)
                .iter()
                .map(|&p| g.name(p).to_string())
                .collect();
            if wnames.iter().any(|n| n == outcome) {
                wnames.retain(|n| n != outcome);
                notes.push(format!(
                    "graph {k}: outcome removed from adjustment set of {variable}"
                ));
            }
            let entry = match ate_regression(data, variable, outcome, &wnames) {
                Ok(est) => {
                    let p = est.p_value.expect("regression always has a p-value");
                    significant[k] = p < alpha;
                    GraphEffect {
                        graph: k,
                        present: true,
                        identifiable: true,
                        ate: est.effect,
                        std_err: est.std_err,
                        p_value: Some(p),
                        adjustment_set: est.adjustment_set,
                        note: if est.dropped_columns.is_empty() {
                            None
                        } else {
                            Some(format!("dropped: {}", est.dropped_columns.join(", ")))
                        },
                    }
                }
                Err(e) => GraphEffect {
                    graph: k,
                    present: true,
                    identifiable: false,
                    ate: 0.0,
                    std_err: 0.0,
                    p_value: None,
                    adjustment_set: wnames.clone(),
                    note: Some(e.to_string()),
                },
            };
            let usable = entry.identifiable;
            effects.push(entry);
            if !usable {
                continue;
            }
            let yi = g.try_index(outcome)?;
            let g_anc = g.ancestral_subgraph(yi)?;
            for z in candidate_effect_modifiers(&g_anc, variable, outcome)? {
                match hte_regression(data, variable, outcome, &z, &wnames) {
                    Ok(h) => modifiers.push(ModifierFinding {
                        modifier: z,
                        graph: k,
                        cate_z1: h.cate_z1,
                        cate_z0: h.cate_z0,
                        delta: h.delta,
                        p_value: h.p_interaction,
                        significant: h.p_interaction < alpha,
                    }),
                    Err(e) => notes.push(format!(
                        "graph {k}: modifier {z} for {variable}: {e}"
                    )),
                }
            }
        }
        modifiers.sort_by(|a, b| {
            a.modifier
                .cmp(&b.modifier)
                .then(a.p_value.partial_cmp(&b.p_value).unwrap())
                .then(a.graph.cmp(&b.graph))
        });
        modifiers.dedup_by(|later, first| later.modifier == first.modifier);
        records.push(CauseRecord {
            variable: variable.clone(),
            support: s,
            effects,
            significant,
            modifiers,
            notes,
        });
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankMode {
    /// Order by largest positive effect: harmful exposures first.
    Risk,
    /// Order by smallest (most negative) effect: protective exposures first.
    Preventive,
}

impl RankMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "risk" => Ok(RankMode::Risk),
            "preventive" => Ok(RankMode::Preventive),
            other => Err(Error::config(format!("unknown rank mode {other}"))),
        }
    }
}

/// Two-stage ranking: select top_n by (support desc, effect key, name asc),
/// then reorder the selection by the effect key alone for display. The
/// effect key is the max multi-set entry (descending) in risk mode and the
/// min entry (ascending) in preventive mode, zeros excluded when any
/// nonzero entry exists.
pub fn rank_causes(records: &[CauseRecord], mode: RankMode, top_n: usize) -> Vec<CauseRecord> {
    let mut sorted: Vec<&CauseRecord> = records.iter().collect();
    let effect_cmp = |a: &CauseRecord, b: &CauseRecord| match mode {
        RankMode::Risk => b.max_effect().partial_cmp(&a.max_effect()).unwrap(),
        RankMode::Preventive => a.min_effect().partial_cmp(&b.min_effect()).unwrap(),
    };
    sorted.sort_by(|a, b| {
        b.support
            .partial_cmp(&a.support)
            .unwrap()
            .then_with(|| effect_cmp(a, b))
            .then_with(|| a.variable.cmp(&b.variable))
    });
    let mut top: Vec<CauseRecord> = sorted.into_iter().take(top_n).cloned().collect();
    top.sort_by(|a, b| effect_cmp(a, b).then_with(|| a.variable.cmp(&b.variable)));
    top
}
