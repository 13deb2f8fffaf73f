//! Greedy hill climbing over DAGs with add/delete/reverse moves, guided by a
//! decomposable score. Starts from the empty graph (plus required edges) and
//! stops at the first iteration without a strictly improving move.

use std::collections::HashSet;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, StructuralConstraints};
use crate::learn::LearnerParams;
use crate::scores::ScoreCache;

const IMPROVEMENT_EPS: f64 = 1e-9;
const MAX_ITERS: usize = 100_000;

#[derive(Clone, Copy, PartialEq)]
enum MoveKind {
    Add,
    Delete,
    Reverse,
}

/// Directed path a -> ... -> b that does not use the edge a -> b itself.
fn path_avoiding_direct(g: &MixedGraph, a: usize, b: usize) -> bool {
    let mut stack: Vec<usize> = g.children(a).iter().copied().filter(|&c| c != b).collect();
    let mut seen: Vec<bool> = vec![false; g.n()];
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(v) = stack.pop() {
        if v == b {
            return true;
        }
        for &c in g.children(v) {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    false
}

pub fn hill_climb(
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    hill_climb_restricted(data, constraints, params, None)
}

/// `allowed`: optional whitelist of unordered pairs permitted to carry an
/// edge (the restriction mmhc applies from its skeleton phase).
pub(crate) fn hill_climb_restricted(
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
    allowed: Option<&HashSet<(usize, usize)>>,
) -> Result<MixedGraph> {
    params.validate()?;
    let names = data.names().to_vec();
    let cons = constraints.resolve(&names)?;
    let cache = ScoreCache::new(data, params.score_cfg)?;
    let m = data.n_cols();

    let mut g = MixedGraph::new(names)?;
    for &(a, b) in &cons.required {
        if let Some(allowed) = allowed {
            if !allowed.contains(&(a.min(b), a.max(b))) {
                return Err(Error::config(
                    "required edge outside the allowed skeleton".to_string(),
                ));
            }
        }
        g.add_directed(a, b)?;
    }
    if !g.is_acyclic() {
        return Err(Error::config("required edges contain a cycle".to_string()));
    }

    let pair_ok = |a: usize, b: usize| -> bool {
        match allowed {
            Some(set) => set.contains(&(a.min(b), a.max(b))),
            None => true,
        }
    };

    let mut cur_ls: Vec<f64> = (0..m)
        .map(|v| {
            let pa: Vec<usize> = g.parents(v).iter().copied().collect();
            cache.local_score(v, &pa)
        })
        .collect::<Result<Vec<_>>>()?;

    let ls_with = |v: usize, extra: Option<usize>, drop: Option<usize>, g: &MixedGraph| -> Result<f64> {
        let mut pa: Vec<usize> = g.parents(v).iter().copied().collect();
        if let Some(d) = drop {
            pa.retain(|&p| p != d);
        }
        if let Some(e) = extra {
            pa.push(e);
        }
        cache.local_score(v, &pa)
    };

    for _iter in 0..MAX_ITERS {
        // best = (delta, kind, a, b) where the move concerns edge a -> b;
        // ties prefer adds, then deletes, then reverses, then name order
        let mut best: Option<(f64, MoveKind, usize, usize)> = None;
        let rank = |k: MoveKind| match k {
            MoveKind::Add => 0u8,
            MoveKind::Delete => 1,
            MoveKind::Reverse => 2,
        };
        let mut consider = |delta: f64, kind: MoveKind, a: usize, b: usize, g: &MixedGraph| {
            let replace = match &best {
                None => true,
                Some((d, k, pa, pb)) => {
                    delta > *d
                        || (delta == *d
                            && (rank(kind), g.name(b), g.name(a))
                                < (rank(*k), g.name(*pb), g.name(*pa)))
                }
            };
            if replace {
                best = Some((delta, kind, a, b));
            }
        };

        for b in 0..m {
            for a in 0..m {
                if a == b {
                    continue;
                }
                if g.has_directed(a, b) {
                    // delete
                    if !cons.required.contains(&(a, b)) {
                        let delta = ls_with(b, None, Some(a), &g)? - cur_ls[b];
                        consider(delta, MoveKind::Delete, a, b, &g);
                    }
                    // reverse
                    if !cons.required.contains(&(a, b))
                        && !cons.is_forbidden(b, a)
                        && !path_avoiding_direct(&g, a, b)
                    {
                        let delta = (ls_with(a, Some(b), None, &g)? - cur_ls[a])
                            + (ls_with(b, None, Some(a), &g)? - cur_ls[b]);
                        consider(delta, MoveKind::Reverse, a, b, &g);
                    }
                } else if !g.adjacent(a, b)
                    && pair_ok(a, b)
                    && !cons.is_forbidden(a, b)
                    && !g.directed_path_exists(b, a)
                {
                    let delta = ls_with(b, Some(a), None, &g)? - cur_ls[b];
                    consider(delta, MoveKind::Add, a, b, &g);
                }
            }
        }

        match best {
            Some((delta, kind, a, b)) if delta > IMPROVEMENT_EPS => match kind {
                MoveKind::Add => {
                    g.add_directed(a, b)?;
                    cur_ls[b] = ls_with(b, None, None, &g)?;
                }
                MoveKind::Delete => {
                    g.remove_edge(a, b)?;
                    cur_ls[b] = ls_with(b, None, None, &g)?;
                }
                MoveKind::Reverse => {
                    g.remove_edge(a, b)?;
                    g.add_directed(b, a)?;
                    cur_ls[a] = ls_with(a, None, None, &g)?;
                    cur_ls[b] = ls_with(b, None, None, &g)?;
                }
            },
            _ => {
                debug_assert!(g.is_acyclic());
                return Ok(g);
            }
        }
    }
    Err(Error::internal("hill climb failed to converge".to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::cpdag_of_dag;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    fn chain_data(seed: u64, n: usize) -> BinaryDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<u8>> = vec![Vec::new(); 3];
        for _ in 0..n {
            let x = u8::from(rng.gen_bool(0.5));
            let m = u8::from(rng.gen_bool(sigmoid(-1.0 + 2.0 * x as f64)));
            let y = u8::from(rng.gen_bool(sigmoid(-1.0 + 2.0 * m as f64)));
            cols[0].push(x);
            cols[1].push(m);
            cols[2].push(y);
        }
        BinaryDataset::new(vec!["x".into(), "m".into(), "y".into()], cols, "y").unwrap()
    }

    #[test]
    fn recovers_chain_up_to_equivalence() {
        let data = chain_data(11, 20_000);
        let g = hill_climb(&data, &StructuralConstraints::none(), &LearnerParams::default()).unwrap();
        assert!(g.is_fully_directed());
        let mut truth = MixedGraph::new(vec!["x".into(), "m".into(), "y".into()]).unwrap();
        truth.add_directed(0, 1).unwrap();
        truth.add_directed(1, 2).unwrap();
        assert_eq!(
            cpdag_of_dag(&g, None).unwrap(),
            cpdag_of_dag(&truth, None).unwrap(),
            "{}",
            g.to_text()
        );
    }

    #[test]
    fn empty_on_independent_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 4000;
        let cols: Vec<Vec<u8>> = (0..3)
            .map(|_| (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect())
            .collect();
        let data =
            BinaryDataset::new(vec!["a".into(), "b".into(), "Y".into()], cols, "Y").unwrap();
        let g = hill_climb(&data, &StructuralConstraints::none(), &LearnerParams::default()).unwrap();
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn forbidden_directions_never_appear() {
        let data = chain_data(13, 10_000);
        let cons = StructuralConstraints::outcome_sink("y", data.names());
        let g = hill_climb(&data, &cons, &LearnerParams::default()).unwrap();
        let y = g.try_index("y").unwrap();
        assert!(g.children(y).is_empty());
        assert!(!g.parents(y).is_empty());
    }

    #[test]
    fn required_edges_survive() {
        let data = chain_data(14, 5000);
        let mut cons = StructuralConstraints::none();
        cons.required.insert(("y".to_string(), "x".to_string()));
        let g = hill_climb(&data, &cons, &LearnerParams::default()).unwrap();
        let (x, y) = (g.try_index("x").unwrap(), g.try_index("y").unwrap());
        assert!(g.has_directed(y, x));
    }

    #[test]
    fn bdeu_variant_matches_chain_class_too() {
        let data = chain_data(15, 20_000);
        let params = LearnerParams {
            score_cfg: crate::scores::ScoreConfig::bdeu(1.0),
            ..Default::default()
        };
        let g = hill_climb(&data, &StructuralConstraints::none(), &params).unwrap();
        let mut truth = MixedGraph::new(vec!["x".into(), "m".into(), "y".into()]).unwrap();
        truth.add_directed(0, 1).unwrap();
        truth.add_directed(1, 2).unwrap();
        assert_eq!(cpdag_of_dag(&g, None).unwrap(), cpdag_of_dag(&truth, None).unwrap());
    }
}
