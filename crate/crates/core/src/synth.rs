//! Ground-truth generation for benchmarking: random DAGs with a designated
//! sink outcome (Erdos-Renyi or preferential attachment), three parametric
//! binary data generators, and CPT fitting/resampling for semi-synthetic
//! data anchored to a real dataset.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::MixedGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Er,
    Ba,
}

impl Topology {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(Topology::Er),
            "ba" => Ok(Topology::Ba),
            other => Err(Error::config(format!("unknown topology {other}, expected er|ba"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Topology::Er => "er",
            Topology::Ba => "ba",
        }
    }
}

/// Configuration for one random ground-truth DAG. `n` counts the event
/// nodes; the sink outcome is added on top. For ER graphs `sparsity` is the
/// target edges-per-node ratio, for BA it is the (integer) attachment count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DagGenConfig {
    pub topology: Topology,
    pub n: usize,
    pub sparsity: f64,
    pub seed: u64,
}

impl DagGenConfig {
    /// Pair-wise edge probability 2*n*sp / (n*(n-1)) for the ER model.
    pub fn er_edge_probability(&self) -> f64 {
        2.0 * self.n as f64 * self.sparsity / (self.n as f64 * (self.n as f64 - 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("need at least 2 event nodes, got {}", self.n)));
        }
        if !(self.sparsity > 0.0) {
            return Err(Error::config(format!("sparsity must be positive, got {}", self.sparsity)));
        }
        match self.topology {
            Topology::Er => {
                let p = self.er_edge_probability();
                if p > 1.0 {
                    return Err(Error::config(format!(
                        "sparsity {} gives edge probability {p:.3} > 1 for n={}",
                        self.sparsity, self.n
                    )));
                }
            }
            Topology::Ba => {
                if self.sparsity.fract() != 0.0 {
                    return Err(Error::config(format!(
                        "ba attachment count must be an integer, got {}",
                        self.sparsity
                    )));
                }
                let m = self.sparsity as usize;
                if m >= self.n {
                    return Err(Error::config(format!(
                        "ba attachment count {m} must be below the node count {}",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

pub const OUTCOME_NODE: &str = "y";

fn node_names(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i:0width$}")).collect();
    names.push(OUTCOME_NODE.to_string());
    names
}

/// Random DAG with a sink outcome node appended last. Undirected edges are
/// generated per the topology, oriented along a random node order, and the
/// outcome is hooked up so it keeps the graph's edge density: ER picks
/// round(sparsity) uniform parents, BA links each node independently with
/// the realized edge probability (at least one parent forced).
pub fn random_dag(cfg: &DagGenConfig) -> Result<MixedGraph> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    match cfg.topology {
        Topology::Er => {
            let p = cfg.er_edge_probability();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(p) {
                        pairs.push((i, j));
                    }
                }
            }
        }
        Topology::Ba => {
            // preferential attachment: each new node picks m distinct
            // targets with probability proportional to current degree
            let m = cfg.sparsity as usize;
            let mut repeated: Vec<usize> = Vec::new();
            let mut targets: Vec<usize> = (0..m).collect();
            for source in m..n {
                for &t in &targets {
                    pairs.push((t.min(source), t.max(source)));
                }
                repeated.extend(&targets);
                repeated.extend(std::iter::repeat(source).take(m));
                let mut picked = BTreeSet::new();
                while picked.len() < m {
                    picked.insert(repeated[rng.gen_range(0..repeated.len())]);
                }
                targets = picked.into_iter().collect();
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0usize; n];
    for (pos, &v) in order.iter().enumerate() {
        rank[v] = pos;
    }

    let mut g = MixedGraph::new(node_names(n))?;
    for (i, j) in pairs.iter().copied() {
        let (from, to) = if rank[i] < rank[j] { (i, j) } else { (j, i) };
        g.add_directed(from, to)?;
    }

    let yi = n;
    match cfg.topology {
        Topology::Er => {
            let k = (cfg.sparsity.round() as usize).clamp(1, n);
            for idx in index_sample(&mut rng, n, k) {
                g.add_directed(idx, yi)?;
            }
        }
        Topology::Ba => {
            let p = (2.0 * pairs.len() as f64 / (n as f64 * (n as f64 - 1.0))).min(1.0);
            let mut chosen = false;
            for v in 0..n {
                if rng.gen_bool(p) {
                    g.add_directed(v, yi)?;
                    chosen = true;
                }
            }
            if !chosen {
                g.add_directed(rng.gen_range(0..n), yi)?;
            }
        }
    }
    debug_assert!(g.is_acyclic());
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    Logistic,
    LogisticInteraction,
    BernoulliLinear,
}

impl GenMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l" | "logistic" => Ok(GenMode::Logistic),
            "ll" | "logistic-interaction" => Ok(GenMode::LogisticInteraction),
            "bl" | "bernoulli-linear" => Ok(GenMode::BernoulliLinear),
            other => Err(Error::config(format!("unknown generation mode {other}, expected l|ll|bl"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GenMode::Logistic => "l",
            GenMode::LogisticInteraction => "ll",
            GenMode::BernoulliLinear => "bl",
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Per-node mechanism. Weight vectors follow the node's parents in
/// ascending index order; interaction weights follow the (i, j), i < j
/// pairs of that order. CPT rows are indexed by the parent bitmask with
/// bit i = value of the i-th parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeParams {
    Cpt { probs: Vec<f64> },
    Logistic { bias: f64, weights: Vec<f64>, interactions: Vec<f64> },
    Linear { bias: f64, weights: Vec<f64> },
}

impl NodeParams {
    /// P(node = 1 | parent assignment encoded as bitmask).
    pub fn probability(&self, mask: u64) -> f64 {
        match self {
            NodeParams::Cpt { probs } => probs[mask as usize],
            NodeParams::Logistic { bias, weights, interactions } => {
                let mut t = *bias;
                let l = weights.len();
                for (i, w) in weights.iter().enumerate() {
                    t += w * f64::from(mask >> i & 1 == 1);
                }
                let mut idx = 0;
                for i in 0..l {
                    for j in i + 1..l {
                        t += interactions[idx]
                            * f64::from(mask >> i & 1 == 1 && mask >> j & 1 == 1);
                        idx += 1;
                    }
                }
                sigmoid(t)
            }
            NodeParams::Linear { bias, weights } => {
                let mut t = *bias;
                for (i, w) in weights.iter().enumerate() {
                    t += w * f64::from(mask >> i & 1 == 1);
                }
                t.clamp(0.0, 1.0)
            }
        }
    }

    fn arity_ok(&self, l: usize) -> bool {
        match self {
            NodeParams::Cpt { probs } => probs.len() == 1usize << l,
            NodeParams::Logistic { weights, interactions, .. } => {
                weights.len() == l && interactions.len() == l * l.saturating_sub(1) / 2
            }
            NodeParams::Linear { weights, .. } => weights.len() == l,
        }
    }
}

/// A fully specified discrete structural model: a DAG plus one mechanism
/// per node, with a designated outcome column for the datasets it emits.
#[derive(Clone, Debug)]
pub struct DiscreteSCM {
    pub dag: MixedGraph,
    pub outcome: String,
    pub node_params: Vec<NodeParams>,
}

#[derive(Serialize, Deserialize)]
struct ScmJson {
    nodes: Vec<String>,
    outcome: String,
    edges: Vec<(String, String)>,
    params: Vec<NodeParams>,
}

impl DiscreteSCM {
    pub fn validate(&self) -> Result<()> {
        if self.node_params.len() != self.dag.n() {
            return Err(Error::config("one mechanism per node required".to_string()));
        }
        self.dag.try_index(&self.outcome)?;
        if !self.dag.undirected_edges().is_empty() {
            return Err(Error::config("model graph must be fully directed".to_string()));
        }
        self.dag.topological_order()?;
        for v in 0..self.dag.n() {
            let l = self.dag.parents(v).len();
            if !self.node_params[v].arity_ok(l) {
                return Err(Error::config(format!(
                    "mechanism arity mismatch at node {}",
                    self.dag.name(v)
                )));
            }
            for mask in 0..(1u64 << l) {
                let p = self.node_params[v].probability(mask);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "probability {p} out of range at node {}",
                        self.dag.name(v)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sorted parent indices, matching the weight/CPT layout.
    pub fn parent_list(&self, v: usize) -> Vec<usize> {
        self.dag.parents(v).iter().copied().collect()
    }

    /// P(v = 1 | parents at `mask`), exact from the mechanism.
    pub fn conditional_probability(&self, v: usize, mask: u64) -> f64 {
        self.node_params[v].probability(mask)
    }

    /// Ancestral sampling in topological order, column by column.
    pub fn sample(&self, n_samples: usize, seed: u64) -> Result<BinaryDataset> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with_rng(n_samples, &mut rng)
    }

    pub fn to_json(&self) -> Result<String> {
        let edges = self
            .dag
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (self.dag.name(a).to_string(), self.dag.name(b).to_string()))
            .collect();
        let json = ScmJson {
            nodes: self.dag.names().to_vec(),
            outcome: self.outcome.clone(),
            edges,
            params: self.node_params.clone(),
        };
        serde_json::to_string_pretty(&json).map_err(|e| Error::internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<DiscreteSCM> {
        let json: ScmJson =
            serde_json::from_str(text).map_err(|e| Error::data(format!("bad model json: {e}")))?;
        let mut dag = MixedGraph::new(json.nodes)?;
        for (a, b) in &json.edges {
            dag.add_directed(dag.try_index(a)?, dag.try_index(b)?)?;
        }
        let scm = DiscreteSCM { dag, outcome: json.outcome, node_params: json.params };
        scm.validate()?;
        Ok(scm)
    }
}

const BL_MAX_ATTEMPTS: usize = 1000;

fn draw_params(dag: &MixedGraph, mode: GenMode, rng: &mut ChaCha8Rng) -> Result<Vec<NodeParams>> {
    let mut out = Vec::with_capacity(dag.n());
    for v in 0..dag.n() {
        let l = dag.parents(v).len();
        let params = match mode {
            GenMode::Logistic | GenMode::LogisticInteraction => {
                let bias = rng.gen_range(-1.0..=1.0);
                let weights: Vec<f64> = (0..l)
                    .map(|_| {
                        let w = rng.gen_range(0.5..=2.0);
                        if rng.gen_bool(0.5) {
                            w
                        } else {
                            -w
                        }
                    })
                    .collect();
                let n_pairs = l * l.saturating_sub(1) / 2;
                let interactions: Vec<f64> = if mode == GenMode::LogisticInteraction {
                    (0..n_pairs)
                        .map(|_| {
                            let i = rng.gen_range(0.3..=1.0);
                            if rng.gen_bool(0.5) {
                                i
                            } else {
                                -i
                            }
                        })
                        .collect()
                } else {
                    vec![0.0; n_pairs]
                };
                NodeParams::Logistic { bias, weights, interactions }
            }
            GenMode::BernoulliLinear => {
                // rejection-sample weights until 0 <= b + W*pa <= 1 holds
                // for every parent assignment; drawing b uniformly on the
                // feasible interval gives the same joint law as rejecting
                // (b, W) pairs, with far fewer rejections
                let mut found = None;
                for _ in 0..BL_MAX_ATTEMPTS {
                    let weights: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let lo: f64 = weights.iter().filter(|&&w| w < 0.0).map(|w| -w).sum();
                    let hi: f64 = 1.0 - weights.iter().filter(|&&w| w > 0.0).sum::<f64>();
                    if lo > hi {
                        continue;
                    }
                    let bias = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                    found = Some(NodeParams::Linear { bias, weights });
                    break;
                }
                found.ok_or_else(|| {
                    Error::config(format!(
                        "could not satisfy linear probability bounds for node {} with {l} parents",
                        dag.name(v)
                    ))
                })?
            }
        };
        out.push(params);
    }
    Ok(out)
}

/// Draw a random mechanism for every node of `dag` and sample a dataset
/// from it. The realized model is returned for oracle use. A single RNG
/// stream covers weight drawing (node order) then sampling, so everything
/// is reproducible from the seed.
pub fn sample_parametric(
    dag: &MixedGraph,
    outcome: &str,
    mode: GenMode,
    n_samples: usize,
    seed: u64,
) -> Result<(BinaryDataset, DiscreteSCM)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_params = draw_params(dag, mode, &mut rng)?;
    let scm = DiscreteSCM {
        dag: dag.clone(),
        outcome: outcome.to_string(),
        node_params,
    };
    scm.validate()?;
    let data = scm.sample_with_rng(n_samples, &mut rng)?;
    Ok((data, scm))
}

impl DiscreteSCM {
    /// Internal sampler continuing an existing stream so parameter drawing
    /// and data sampling share one seed.
    fn sample_with_rng(&self, n_samples: usize, rng: &mut ChaCha8Rng) -> Result<BinaryDataset> {
        if n_samples == 0 {
            return Err(Error::config("need at least one sample".to_string()));
        }
        let order = self.dag.topological_order()?;
        let n = self.dag.n();
        let mut cols: Vec<Vec<u8>> = vec![vec![0; n_samples]; n];
        for &v in &order {
            let parents = self.parent_list(v);
            for r in 0..n_samples {
                let mut mask = 0u64;
                for (i, &p) in parents.iter().enumerate() {
                    mask |= u64::from(cols[p][r]) << i;
                }
                cols[v][r] = u8::from(rng.gen_bool(self.node_params[v].probability(mask)));
            }
        }
        BinaryDataset::new(self.dag.names().to_vec(), cols, &self.outcome)
    }
}

const MAX_CPT_PARENTS: usize = 16;

/// Laplace-smoothed conditional probability tables for every node of `dag`
/// from matching columns of `data`: (count(v=1, pa) + s) / (count(pa) + 2s).
/// Parent assignments never observed get probability 1/2.
pub fn fit_cpts(data: &BinaryDataset, dag: &MixedGraph, smoothing: f64) -> Result<DiscreteSCM> {
    if !(smoothing >= 0.0) {
        return Err(Error::config(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    if !dag.undirected_edges().is_empty() {
        return Err(Error::config("cpt fitting needs a fully directed DAG".to_string()));
    }
    dag.topological_order()?;
    let mut node_params = Vec::with_capacity(dag.n());
    for v in 0..dag.n() {
        let col = data.try_index(dag.name(v))?;
        let parents: Vec<usize> = dag
            .parents(v)
            .iter()
            .map(|&p| data.try_index(dag.name(p)))
            .collect::<Result<_>>()?;
        let l = parents.len();
        if l > MAX_CPT_PARENTS {
            return Err(Error::config(format!(
                "node {} has {l} parents, too many to tabulate",
                dag.name(v)
            )));
        }
        let mut counts = vec![(0u64, 0u64); 1 << l];
        for r in 0..data.n_rows() {
            let mut mask = 0usize;
            for (i, &p) in parents.iter().enumerate() {
                mask |= usize::from(data.column(p)[r]) << i;
            }
            counts[mask].0 += 1;
            counts[mask].1 += u64::from(data.column(col)[r]);
        }
        let probs = counts
            .iter()
            .map(|&(total, ones)| {
                if total == 0 && smoothing == 0.0 {
                    0.5
                } else {
                    (ones as f64 + smoothing) / (total as f64 + 2.0 * smoothing)
                }
            })
            .collect();
        node_params.push(NodeParams::Cpt { probs });
    }
    let scm = DiscreteSCM {
        dag: dag.clone(),
        outcome: data.outcome_name().to_string(),
        node_params,
    };
    scm.validate()?;
    Ok(scm)
}

/// IID ancestral sampling from a fitted (or constructed) model.
pub fn sample_from_cpts(scm: &DiscreteSCM, n_samples: usize, seed: u64) -> Result<BinaryDataset> {
    scm.sample(n_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::ate_backdoor_plugin;
    use approx::assert_abs_diff_eq;

    fn cfg(topology: Topology, n: usize, sparsity: f64, seed: u64) -> DagGenConfig {
        DagGenConfig { topology, n, sparsity, seed }
    }

    #[test]
    fn er_edge_probability_formula() {
        let c = cfg(Topology::Er, 10, 0.8, 0);
        assert_abs_diff_eq!(c.er_edge_probability(), 16.0 / 90.0, epsilon = 1e-12);
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        assert!(cfg(Topology::Er, 1, 0.8, 0).validate().is_err());
        assert!(cfg(Topology::Er, 10, 0.0, 0).validate().is_err());
        // p = 2*10*5/90 > 1
        assert!(cfg(Topology::Er, 10, 5.0, 0).validate().is_err());
        assert!(cfg(Topology::Ba, 10, 1.5, 0).validate().is_err());
        assert!(cfg(Topology::Ba, 10, 10.0, 0).validate().is_err());
        assert!(cfg(Topology::Ba, 10, 2.0, 0).validate().is_ok());
    }

    #[test]
    fn generated_dags_are_acyclic_with_a_sink_outcome() {
        for seed in 0..20 {
            for c in [cfg(Topology::Er, 10, 1.0, seed), cfg(Topology::Ba, 10, 2.0, seed)] {
                let g = random_dag(&c).unwrap();
                assert_eq!(g.n(), 11);
                assert!(g.is_acyclic());
                assert!(g.undirected_edges().is_empty());
                let yi = g.try_index(OUTCOME_NODE).unwrap();
                assert!(g.children(yi).is_empty());
                assert!(!g.parents(yi).is_empty());
            }
        }
    }

    #[test]
    fn er_keeps_the_requested_edge_density() {
        // edges-per-node among event nodes should track the sparsity target
        let n = 30;
        let mut total_ratio = 0.0;
        let seeds = 100;
        for seed in 0..seeds {
            let g = random_dag(&cfg(Topology::Er, n, 2.0, seed)).unwrap();
            let yi = g.try_index(OUTCOME_NODE).unwrap();
            let edges = g
                .directed_edges()
                .iter()
                .filter(|&&(_, b)| b != yi)
                .count();
            total_ratio += edges as f64 / n as f64;
        }
        let mean = total_ratio / seeds as f64;
        assert!((1.6..=2.4).contains(&mean), "mean edges per node {mean}");
    }

    #[test]
    fn ba_adds_exactly_m_edges_per_new_node() {
        for seed in 0..10 {
            let g = random_dag(&cfg(Topology::Ba, 10, 2.0, seed)).unwrap();
            let yi = g.try_index(OUTCOME_NODE).unwrap();
            let event_edges = g
                .directed_edges()
                .iter()
                .filter(|&&(_, b)| b != yi)
                .count();
            assert_eq!(event_edges, 2 * (10 - 2));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let c = cfg(Topology::Ba, 12, 2.0, 42);
        let a = random_dag(&c).unwrap();
        let b = random_dag(&c).unwrap();
        assert_eq!(a, b);
        let g = random_dag(&cfg(Topology::Er, 8, 1.0, 7)).unwrap();
        let (d1, s1) = sample_parametric(&g, OUTCOME_NODE, GenMode::Logistic, 500, 9).unwrap();
        let (d2, s2) = sample_parametric(&g, OUTCOME_NODE, GenMode::Logistic, 500, 9).unwrap();
        assert_eq!(s1.node_params, s2.node_params);
        for v in 0..d1.n_cols() {
            assert_eq!(d1.column(v), d2.column(v));
        }
    }

    #[test]
    fn parentless_logistic_node_with_zero_bias_is_a_fair_coin() {
        let p = NodeParams::Logistic { bias: 0.0, weights: vec![], interactions: vec![] };
        assert_eq!(p.probability(0), 0.5);
    }

    #[test]
    fn linear_mode_roots_match_their_bias() {
        let mut g = MixedGraph::new(vec!["x".into(), "y".into()]).unwrap();
        g.add_directed(0, 1).unwrap();
        let n = 50_000;
        let (data, scm) =
            sample_parametric(&g, "y", GenMode::BernoulliLinear, n, 3).unwrap();
        let NodeParams::Linear { bias, .. } = &scm.node_params[0] else {
            panic!("expected linear mechanism");
        };
        let mean = data.column(0).iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let sigma = (bias * (1.0 - bias) / n as f64).sqrt();
        assert!((mean - bias).abs() <= 3.0 * sigma, "mean {mean} bias {bias}");
    }

    fn empirical_conditional(
        data: &BinaryDataset,
        scm: &DiscreteSCM,
        v: usize,
        mask: u64,
    ) -> Option<f64> {
        let col = data.try_index(scm.dag.name(v)).unwrap();
        let parents: Vec<usize> = scm
            .parent_list(v)
            .iter()
            .map(|&p| data.try_index(scm.dag.name(p)).unwrap())
            .collect();
        let (mut total, mut ones) = (0u64, 0u64);
        for r in 0..data.n_rows() {
            let mut m = 0u64;
            for (i, &p) in parents.iter().enumerate() {
                m |= u64::from(data.column(p)[r]) << i;
            }
            if m == mask {
                total += 1;
                ones += u64::from(data.column(col)[r]);
            }
        }
        (total >= 500).then(|| ones as f64 / total as f64)
    }

    #[test]
    fn empirical_conditionals_match_the_drawn_mechanisms() {
        // w -> z <- x -> y, z -> y: every mode, every well-populated cell
        let mut g = MixedGraph::new(
            vec!["w".into(), "x".into(), "z".into(), "y".into()],
        )
        .unwrap();
        g.add_directed(0, 2).unwrap();
        g.add_directed(1, 2).unwrap();
        g.add_directed(1, 3).unwrap();
        g.add_directed(2, 3).unwrap();
        for (mode, seed) in [
            (GenMode::Logistic, 11),
            (GenMode::LogisticInteraction, 12),
            (GenMode::BernoulliLinear, 13),
        ] {
            let (data, scm) = sample_parametric(&g, "y", mode, 200_000, seed).unwrap();
            for v in 0..g.n() {
                let l = scm.parent_list(v).len();
                for mask in 0..(1u64 << l) {
                    if let Some(emp) = empirical_conditional(&data, &scm, v, mask) {
                        let exact = scm.conditional_probability(v, mask);
                        assert!(
                            (emp - exact).abs() <= 0.02,
                            "{:?} node {v} mask {mask}: emp {emp} exact {exact}",
                            mode
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn interaction_cancellation_hides_the_marginal_effect() {
        // collider y with weights 2, 2 and interaction -4 around bias -1:
        // P(y|x) is exactly 0.5 for both x levels, while the z-conditional
        // contrasts are +/- (sigmoid(1) - sigmoid(-1))
        let mut g = MixedGraph::new(vec!["x".into(), "z".into(), "y".into()]).unwrap();
        g.add_directed(0, 2).unwrap();
        g.add_directed(1, 2).unwrap();
        let scm = DiscreteSCM {
            dag: g,
            outcome: "y".to_string(),
            node_params: vec![
                NodeParams::Cpt { probs: vec![0.5] },
                NodeParams::Cpt { probs: vec![0.5] },
                NodeParams::Logistic {
                    bias: -1.0,
                    weights: vec![2.0, 2.0],
                    interactions: vec![-4.0],
                },
            ],
        };
        let data = scm.sample(200_000, 21).unwrap();
        let contrast = sigmoid(1.0) - sigmoid(-1.0);
        let ate = ate_backdoor_plugin(&data, "x", "y", &[], None).unwrap();
        assert!(ate.effect.abs() <= 0.02, "ate {}", ate.effect);
        let c0 = ate_backdoor_plugin(&data, "x", "y", &[], Some(("z", 0))).unwrap();
        let c1 = ate_backdoor_plugin(&data, "x", "y", &[], Some(("z", 1))).unwrap();
        assert_abs_diff_eq!(c0.effect, contrast, epsilon = 0.02);
        assert_abs_diff_eq!(c1.effect, -contrast, epsilon = 0.02);
    }

    #[test]
    fn bl_rejection_gives_up_on_crowded_nodes() {
        // 12 parents: the weight-sum constraint is essentially unsatisfiable
        let names: Vec<String> =
            (0..12).map(|i| format!("p{i:02}")).chain(["y".to_string()]).collect();
        let mut g = MixedGraph::new(names).unwrap();
        for i in 0..12 {
            g.add_directed(i, 12).unwrap();
        }
        let err = sample_parametric(&g, "y", GenMode::BernoulliLinear, 10, 0).unwrap_err();
        assert!(err.to_string().contains("y"), "{err}");
    }

    fn tiny_fit_dataset() -> (BinaryDataset, MixedGraph) {
        // pa=1 rows: 8 ones, 2 zeros; pa=0 never observed for the child
        let pa = vec![1u8; 10];
        let child = vec![1, 1, 1, 1, 1, 1, 1, 1, 0, 0];
        let data = BinaryDataset::new(
            vec!["pa".into(), "child".into()],
            vec![pa, child],
            "child",
        )
        .unwrap();
        let mut g = MixedGraph::new(vec!["pa".into(), "child".into()]).unwrap();
        g.add_directed(0, 1).unwrap();
        (data, g)
    }

    #[test]
    fn cpt_fitting_applies_laplace_smoothing() {
        let (data, g) = tiny_fit_dataset();
        let smoothed = fit_cpts(&data, &g, 1.0).unwrap();
        // (8 + 1) / (10 + 2)
        assert_abs_diff_eq!(smoothed.conditional_probability(1, 1), 0.75, epsilon = 1e-12);
        // unseen pa=0 assignment
        assert_abs_diff_eq!(smoothed.conditional_probability(1, 0), 0.5, epsilon = 1e-12);
        let mle = fit_cpts(&data, &g, 0.0).unwrap();
        assert_abs_diff_eq!(mle.conditional_probability(1, 1), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(mle.conditional_probability(1, 0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cpt_round_trip_is_consistent() {
        let g = random_dag(&cfg(Topology::Er, 5, 1.0, 31)).unwrap();
        let (data, _) = sample_parametric(&g, OUTCOME_NODE, GenMode::Logistic, 50_000, 32).unwrap();
        let fitted = fit_cpts(&data, &g, 1.0).unwrap();
        let resampled = sample_from_cpts(&fitted, 200_000, 33).unwrap();
        let refit = fit_cpts(&resampled, &g, 1.0).unwrap();
        for v in 0..g.n() {
            let l = fitted.parent_list(v).len();
            for mask in 0..(1u64 << l) {
                if empirical_conditional(&resampled, &refit, v, mask).is_none() {
                    continue;
                }
                let a = fitted.conditional_probability(v, mask);
                let b = refit.conditional_probability(v, mask);
                assert!((a - b).abs() <= 0.02, "node {v} mask {mask}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cpt_sampling_is_deterministic_and_respects_degenerate_tables() {
        let mut g = MixedGraph::new(vec!["a".into(), "b".into()]).unwrap();
        g.add_directed(0, 1).unwrap();
        let scm = DiscreteSCM {
            dag: g,
            outcome: "b".to_string(),
            node_params: vec![
                NodeParams::Cpt { probs: vec![1.0] },
                NodeParams::Cpt { probs: vec![0.0, 1.0] },
            ],
        };
        let d = scm.sample(100, 5).unwrap();
        assert!(d.column(0).iter().all(|&v| v == 1));
        assert!(d.column(1).iter().all(|&v| v == 1));
        let d2 = scm.sample(100, 5).unwrap();
        assert_eq!(d.column(0), d2.column(0));
        assert_eq!(d.column(1), d2.column(1));
    }

    #[test]
    fn single_node_cpt_matches_its_probability() {
        let g = MixedGraph::new(vec!["a".into()]).unwrap();
        let scm = DiscreteSCM {
            dag: g,
            outcome: "a".to_string(),
            node_params: vec![NodeParams::Cpt { probs: vec![0.3] }],
        };
        let n = 100_000;
        let d = scm.sample(n, 8).unwrap();
        let mean = d.column(0).iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let sigma = (0.3 * 0.7 / n as f64).sqrt();
        assert!((mean - 0.3).abs() <= 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn model_json_round_trip() {
        let g = random_dag(&cfg(Topology::Er, 6, 1.0, 51)).unwrap();
        let (_, scm) =
            sample_parametric(&g, OUTCOME_NODE, GenMode::LogisticInteraction, 100, 52).unwrap();
        let text = scm.to_json().unwrap();
        let back = DiscreteSCM::from_json(&text).unwrap();
        assert_eq!(back.dag, scm.dag);
        assert_eq!(back.outcome, scm.outcome);
        assert_eq!(back.node_params, scm.node_params);
        assert!(DiscreteSCM::from_json("{").is_err());
    }
}
