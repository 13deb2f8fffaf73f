//! Structure learners. Every learner is a deterministic function of
//! (data, constraints, params); randomness only enters through the seed.
//!
//! All learners share one hard rule: the outcome (or any node with a
//! forbidden out-direction) is never made a parent against the constraints.

mod ges;
mod hc;
mod mmpc;
mod noisy;
mod pc;

pub use ges::ges;
pub use hc::hill_climb;
pub use mmpc::{mmhc, mmpc_skeleton};
pub use noisy::noisy_baseline;
pub use pc::pc_stable;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, StructuralConstraints};
use crate::scores::ScoreConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerParams {
    /// CI test level shared by pc and mmpc/mmhc.
    pub alpha: f64,
    /// Largest conditioning set size.
    pub max_cond_size: usize,
    /// Score for hill_climb and mmhc; ges always scores with BDeu using the
    /// same ess (it needs a score-equivalent criterion).
    pub score_cfg: ScoreConfig,
    pub bootstrap_runs: usize,
    pub seed: u64,
    /// Absolute correlation cutoff of the noisy baseline skeleton.
    pub noisy_threshold: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            alpha: 0.05,
            max_cond_size: 5,
            score_cfg: ScoreConfig::bic(),
            bootstrap_runs: 20,
            seed: 0,
            noisy_threshold: 0.2,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.bootstrap_runs == 0 {
            return Err(Error::config("bootstrap_runs must be at least 1".to_string()));
        }
        if !(self.noisy_threshold >= 0.0 && self.noisy_threshold <= 1.0) {
            return Err(Error::config(format!(
                "noisy_threshold must be in [0,1], got {}",
                self.noisy_threshold
            )));
        }
        if !(self.score_cfg.ess > 0.0) {
            return Err(Error::config(format!("ess must be positive, got {}", self.score_cfg.ess)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    Pc,
    Hc,
    Mmhc,
    Ges,
    NoisyBaseline,
}

impl LearnerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pc" => Ok(LearnerKind::Pc),
            "hc" => Ok(LearnerKind::Hc),
            "mmhc" => Ok(LearnerKind::Mmhc),
            "ges" => Ok(LearnerKind::Ges),
            "noisy_baseline" | "noisy" => Ok(LearnerKind::NoisyBaseline),
            other => Err(Error::config(format!(
                "unknown learner {other}; expected pc, hc, mmhc, ges or noisy_baseline"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Pc => "pc",
            LearnerKind::Hc => "hc",
            LearnerKind::Mmhc => "mmhc",
            LearnerKind::Ges => "ges",
            LearnerKind::NoisyBaseline => "noisy_baseline",
        }
    }
}

/// One ensemble member: a learner plus whether its output is aggregated over
/// bootstrap resamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub bootstrap: bool,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        // score-based searches get resampled by default, mirroring how the
        // reference ensemble was run
        let bootstrap = matches!(kind, LearnerKind::Hc | LearnerKind::Mmhc);
        LearnerSpec { kind, bootstrap }
    }
}

pub fn default_ensemble() -> Vec<LearnerSpec> {
    [
        LearnerKind::Pc,
        LearnerKind::Hc,
        LearnerKind::Mmhc,
        LearnerKind::Ges,
        LearnerKind::NoisyBaseline,
    ]
    .into_iter()
    .map(LearnerSpec::new)
    .collect()
}

pub fn run_learner(
    kind: LearnerKind,
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    params.validate()?;
    match kind {
        LearnerKind::Pc => pc_stable(data, constraints, params),
        LearnerKind::Hc => hill_climb(data, constraints, params),
        LearnerKind::Mmhc => mmhc(data, constraints, params),
        LearnerKind::Ges => ges(data, constraints, params),
        LearnerKind::NoisyBaseline => noisy_baseline(data, constraints, params),
    }
}

/// Majority aggregation of graphs over one node set: an adjacency survives
/// iff present in strictly more than half the graphs; it gets a direction iff
/// strictly more than half of the graphs containing it agree on that
/// direction, otherwise it stays undirected.
pub fn aggregate_graphs(graphs: &[MixedGraph]) -> Result<MixedGraph> {
    let first = graphs.first().ok_or_else(|| Error::config("no graphs to aggregate"))?;
    let names = first.names().to_vec();
    for g in graphs {
        if g.names() != names.as_slice() {
            return Err(Error::config("aggregated graphs must share one node set"));
        }
    }
    let n = names.len();
    let runs = graphs.len();
    let mut out = MixedGraph::new(names)?;
    for a in 0..n {
        for b in (a + 1)..n {
            let mut present = 0usize;
            let mut ab = 0usize;
            let mut ba = 0usize;
            for g in graphs {
                if g.has_directed(a, b) {
                    present += 1;
                    ab += 1;
                } else if g.has_directed(b, a) {
                    present += 1;
                    ba += 1;
                } else if g.has_undirected(a, b) {
                    present += 1;
                }
            }
            if 2 * present > runs {
                if 2 * ab > present {
                    out.add_directed(a, b)?;
                } else if 2 * ba > present {
                    out.add_directed(b, a)?;
                } else {
                    out.add_undirected(a, b)?;
                }
            }
        }
    }
    Ok(out)
}

/// Runs the learner on `bootstrap_runs` row-resamples of the data and
/// majority-aggregates the results. Resample draws are generated sequentially
/// from the seed, so the output is independent of scheduling.
pub fn bootstrap_aggregate(
    kind: LearnerKind,
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    params.validate()?;
    let mut seeder = ChaCha8Rng::seed_from_u64(params.seed);
    let run_inputs: Vec<(BinaryDataset, u64)> = (0..params.bootstrap_runs)
        .map(|_| {
            let run_seed: u64 = seeder.gen();
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            (data.bootstrap_sample(&mut rng), run_seed)
        })
        .collect();
    let graphs: Vec<MixedGraph> = run_inputs
        .par_iter()
        .map(|(sample, run_seed)| {
            let mut p = params.clone();
            p.seed = *run_seed;
            run_learner(kind, sample, constraints, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_graphs(&graphs)
}
