//! Decomposable network scores on binary data: BIC (penalized maximum
//! log-likelihood) and BDeu (Dirichlet marginal likelihood with an equivalent
//! sample size). Larger is better for both. Local scores are memoized per
//! (child, parent-set) behind a lock so search loops and parallel callers
//! share work; identical keys always produce identical values, so concurrent
//! double-insertion is harmless.

use std::collections::HashMap;
use std::sync::RwLock;

use statrs::function::gamma::ln_gamma;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::MixedGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreKind {
    Bic,
    Bdeu,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    /// Equivalent sample size; only BDeu reads it.
    pub ess: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { kind: ScoreKind::Bic, ess: 1.0 }
    }
}

impl ScoreConfig {
    pub fn bic() -> Self {
        ScoreConfig { kind: ScoreKind::Bic, ess: 1.0 }
    }
    pub fn bdeu(ess: f64) -> Self {
        ScoreConfig { kind: ScoreKind::Bdeu, ess }
    }
}

/// Parent sets are keyed as column bitmasks, which caps scored datasets at
/// 128 columns. Wider event data is expected to pass through vocabulary
/// filtering before score-based learning.
const MAX_SCORED_COLUMNS: usize = 128;
const MAX_PARENTS: usize = 20;

pub struct ScoreCache<'a> {
    data: &'a BinaryDataset,
    cfg: ScoreConfig,
    memo: RwLock<HashMap<(u32, u128), f64>>,
}

impl<'a> ScoreCache<'a> {
    pub fn new(data: &'a BinaryDataset, cfg: ScoreConfig) -> Result<Self> {
        if data.n_cols() > MAX_SCORED_COLUMNS {
            return Err(Error::config(format!(
                "{} columns exceed the scored-learner cap of {MAX_SCORED_COLUMNS}",
                data.n_cols()
            )));
        }
        if !(cfg.ess > 0.0) {
            return Err(Error::config(format!("ess must be positive, got {}", cfg.ess)));
        }
        Ok(ScoreCache { data, cfg, memo: RwLock::new(HashMap::new()) })
    }

    pub fn data(&self) -> &BinaryDataset {
        self.data
    }

    pub fn config(&self) -> ScoreConfig {
        self.cfg
    }

    /// Memoized local score of `child` given `parents` (duplicates ignored).
    pub fn local_score(&self, child: usize, parents: &[usize]) -> Result<f64> {
        let mut mask: u128 = 0;
        for &p in parents {
            if p == child {
                return Err(Error::config("child cannot be its own parent".to_string()));
            }
            mask |= 1u128 << p;
        }
        let key = (child as u32, mask);
        if let Some(&v) = self.memo.read().expect("memo poisoned").get(&key) {
            return Ok(v);
        }
        let v = self.compute(child, mask)?;
        self.memo.write().expect("memo poisoned").insert(key, v);
        Ok(v)
    }

    /// Same value as `local_score`, never touching the memo.
    pub fn local_score_uncached(&self, child: usize, parents: &[usize]) -> Result<f64> {
        let mut mask: u128 = 0;
        for &p in parents {
            if p == child {
                return Err(Error::config("child cannot be its own parent".to_string()));
            }
            mask |= 1u128 << p;
        }
        self.compute(child, mask)
    }

    fn compute(&self, child: usize, mask: u128) -> Result<f64> {
        let parents: Vec<usize> = (0..self.data.n_cols()).filter(|&i| mask >> i & 1 == 1).collect();
        let k = parents.len();
        if k > MAX_PARENTS {
            return Err(Error::config(format!("parent set of size {k} exceeds cap {MAX_PARENTS}")));
        }
        let counts = self.counts(child, &parents);
        let n = self.data.n_rows() as f64;
        let q = (1u64 << k) as f64;
        let score = match self.cfg.kind {
            ScoreKind::Bic => {
                let mut ll = 0.0;
                for &(n0, n1) in &counts {
                    let nj = (n0 + n1) as f64;
                    if n0 > 0 {
                        ll += n0 as f64 * (n0 as f64 / nj).ln();
                    }
                    if n1 > 0 {
                        ll += n1 as f64 * (n1 as f64 / nj).ln();
                    }
                }
                // q * (r - 1) free parameters, r = 2
                ll - q / 2.0 * n.ln()
            }
            ScoreKind::Bdeu => {
                let a_j = self.cfg.ess / q;
                let a_jk = a_j / 2.0;
                let lg_aj = ln_gamma(a_j);
                let lg_ajk = ln_gamma(a_jk);
                let mut s = 0.0;
                for &(n0, n1) in &counts {
                    if n0 + n1 == 0 {
                        continue;
                    }
                    s += lg_aj - ln_gamma(a_j + (n0 + n1) as f64);
                    s += ln_gamma(a_jk + n0 as f64) - lg_ajk;
                    s += ln_gamma(a_jk + n1 as f64) - lg_ajk;
                }
                s
            }
        };
        Ok(score)
    }

    /// (child=0, child=1) counts per parent assignment, dense over all 2^k
    /// assignments in sorted-parent bit order.
    fn counts(&self, child: usize, parents: &[usize]) -> Vec<(u64, u64)> {
        let k = parents.len();
        let mut counts = vec![(0u64, 0u64); 1 << k];
        let child_col = self.data.column(child);
        let parent_cols: Vec<&[u8]> = parents.iter().map(|&p| self.data.column(p)).collect();
        for r in 0..self.data.n_rows() {
            let mut idx = 0usize;
            for (j, col) in parent_cols.iter().enumerate() {
                idx |= (col[r] as usize) << j;
            }
            if child_col[r] == 1 {
                counts[idx].1 += 1;
            } else {
                counts[idx].0 += 1;
            }
        }
        counts
    }

    /// Sum of local scores over a fully directed acyclic graph whose node
    /// names are dataset columns.
    pub fn graph_score(&self, g: &MixedGraph) -> Result<f64> {
        if !g.is_fully_directed() {
            return Err(Error::config("graph_score requires a fully directed graph".to_string()));
        }
        if !g.is_acyclic() {
            return Err(Error::config("graph_score requires an acyclic graph".to_string()));
        }
        let col_of: Vec<usize> = g
            .names()
            .iter()
            .map(|n| self.data.try_index(n))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..g.n()).collect();
        order.sort_by_key(|&v| col_of[v]);
        let mut total = 0.0;
        for v in order {
            let parents: Vec<usize> = g.parents(v).iter().map(|&p| col_of[p]).collect();
            total += self.local_score(col_of[v], &parents)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rayon::prelude::*;

    fn sixty_forty() -> BinaryDataset {
        let col: Vec<u8> = (0..100).map(|i| u8::from(i < 60)).collect();
        let other: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        BinaryDataset::new(vec!["x".into(), "y".into()], vec![col, other], "y").unwrap()
    }

    #[test]
    fn bic_matches_hand_computation() {
        // 60/40 split, no parents: 60 ln .6 + 40 ln .4 - (1/2) ln 100
        let data = sixty_forty();
        let cache = ScoreCache::new(&data, ScoreConfig::bic()).unwrap();
        let s = cache.local_score(0, &[]).unwrap();
        assert_relative_eq!(s, -69.6037517939197, max_relative = 1e-12);
    }

    #[test]
    fn bdeu_matches_hand_computation() {
        let data = sixty_forty();
        let cache = ScoreCache::new(&data, ScoreConfig::bdeu(1.0)).unwrap();
        let s = cache.local_score(0, &[]).unwrap();
        assert_relative_eq!(s, -69.83211253900964, max_relative = 1e-12);
    }

    #[test]
    fn bdeu_with_parent_matches_hand_computation() {
        // pa=0: 30 zeros/10 ones; pa=1: 10 zeros/50 ones
        let mut pa = Vec::new();
        let mut ch = Vec::new();
        for (p, c, reps) in [(0, 0, 30), (0, 1, 10), (1, 0, 10), (1, 1, 50)] {
            for _ in 0..reps {
                pa.push(p);
                ch.push(c);
            }
        }
        let data = BinaryDataset::new(vec!["p".into(), "c".into()], vec![pa, ch], "c").unwrap();
        let cache = ScoreCache::new(&data, ScoreConfig::bdeu(1.0)).unwrap();
        let s = cache.local_score(1, &[0]).unwrap();
        assert_relative_eq!(s, -54.6772294340539, max_relative = 1e-12);
    }

    #[test]
    fn zero_count_cells_contribute_zero_not_nan() {
        let data = BinaryDataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![0, 0, 0, 0], vec![0, 1, 0, 1]],
            "b",
        )
        .unwrap();
        let cache = ScoreCache::new(&data, ScoreConfig::bic()).unwrap();
        // child b given parent a: assignment a=1 never observed
        let s = cache.local_score(1, &[0]).unwrap();
        assert!(s.is_finite());
        let bdeu = ScoreCache::new(&data, ScoreConfig::bdeu(1.0)).unwrap();
        assert!(bdeu.local_score(1, &[0]).unwrap().is_finite());
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BinaryDataset {
        let names: Vec<String> = (0..m).map(|i| format!("v{i}")).collect();
        // mild dependence so scores differ across structures
        let base: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let cols: Vec<Vec<u8>> = (0..m)
            .map(|_| {
                base.iter()
                    .map(|&b| {
                        let p = if b == 1 { 0.7 } else { 0.3 };
                        u8::from(rng.gen_bool(p))
                    })
                    .collect()
            })
            .collect();
        let last = names.last().unwrap().clone();
        BinaryDataset::new(names, cols, &last).unwrap()
    }

    fn dag(names: &[&str], edges: &[(usize, usize)]) -> MixedGraph {
        let mut g = MixedGraph::new(names.iter().map(|s| s.to_string()).collect()).unwrap();
        for &(a, b) in edges {
            g.add_directed(a, b).unwrap();
        }
        g
    }

    #[test]
    fn score_equivalence_across_markov_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let data = random_data(&mut rng, 200, 3);
            for cfg in [ScoreConfig::bic(), ScoreConfig::bdeu(1.0), ScoreConfig::bdeu(5.0)] {
                let cache = ScoreCache::new(&data, cfg).unwrap();
                let names = ["v0", "v1", "v2"];
                // chain, reversed chain and fork are one equivalence class
                let chain = cache.graph_score(&dag(&names, &[(0, 1), (1, 2)])).unwrap();
                let rev = cache.graph_score(&dag(&names, &[(2, 1), (1, 0)])).unwrap();
                let fork = cache.graph_score(&dag(&names, &[(1, 0), (1, 2)])).unwrap();
                assert_relative_eq!(chain, rev, max_relative = 1e-9);
                assert_relative_eq!(chain, fork, max_relative = 1e-9);
                // the collider is its own class
                let collider = cache.graph_score(&dag(&names, &[(0, 1), (2, 1)])).unwrap();
                assert_relative_eq!(
                    cache.graph_score(&dag(&names, &[(0, 1), (2, 1)])).unwrap(),
                    collider,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn memo_is_transparent_and_safe_under_parallel_fill() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_data(&mut rng, 300, 6);
        let cache = ScoreCache::new(&data, ScoreConfig::bdeu(1.0)).unwrap();
        let keys: Vec<(usize, Vec<usize>)> = (0..200)
            .map(|i| {
                let child = i % 6;
                let parents: Vec<usize> = (0..6).filter(|&p| p != child && (i >> p) & 1 == 1).collect();
                (child, parents)
            })
            .collect();
        let par: Vec<f64> = keys
            .par_iter()
            .map(|(c, ps)| cache.local_score(*c, ps).unwrap())
            .collect();
        for ((c, ps), v) in keys.iter().zip(par) {
            let fresh = cache.local_score_uncached(*c, ps).unwrap();
            assert_eq!(v.to_bits(), fresh.to_bits());
        }
    }

    #[test]
    fn graph_score_rejects_partially_directed() {
        let data = sixty_forty();
        let cache = ScoreCache::new(&data, ScoreConfig::bic()).unwrap();
        let mut g = MixedGraph::new(vec!["x".into(), "y".into()]).unwrap();
        g.add_undirected(0, 1).unwrap();
        assert!(cache.graph_score(&g).is_err());
    }

    #[test]
    fn invalid_ess_rejected() {
        let data = sixty_forty();
        assert!(ScoreCache::new(&data, ScoreConfig::bdeu(0.0)).is_err());
        assert!(ScoreCache::new(&data, ScoreConfig::bdeu(-1.0)).is_err());
    }
}
