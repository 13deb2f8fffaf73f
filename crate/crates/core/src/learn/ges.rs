//! Greedy equivalence search: forward insert sweep followed by a backward
//! delete sweep, both over completed partially directed graphs. Scoring is
//! always the equivalence-invariant Bayesian-Dirichlet score so that moves
//! between equivalence classes are well defined.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::{cpdag_of_dag, MixedGraph, ResolvedConstraints, StructuralConstraints};
use crate::learn::LearnerParams;
use crate::scores::{ScoreCache, ScoreConfig};

const IMPROVEMENT_EPS: f64 = 1e-9;
const MAX_MOVES: usize = 100_000;

/// Semi-directed path from `from` to `to` (following v -> w and v - w steps)
/// that avoids every node in `block`.
fn semi_directed_path_avoiding(
    g: &MixedGraph,
    from: usize,
    to: usize,
    block: &BTreeSet<usize>,
) -> bool {
    let mut seen = vec![false; g.n()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        for &w in g.children(v).iter().chain(g.undirected_neighbors(v)) {
            if !seen[w] && !block.contains(&w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

fn is_clique(g: &MixedGraph, nodes: &BTreeSet<usize>) -> bool {
    nodes
        .iter()
        .tuple_combinations()
        .all(|(&a, &b)| g.adjacent(a, b))
}

/// Undirected neighbors of y that are adjacent to x.
fn na_set(g: &MixedGraph, y: usize, x: usize) -> BTreeSet<usize> {
    g.undirected_neighbors(y)
        .iter()
        .copied()
        .filter(|&w| g.adjacent(w, x))
        .collect()
}

/// Re-complete a partially directed graph after an operator application:
/// extend to some consistent member, recompute its completed pattern under
/// the constraints, then check the constraints actually hold. `None` means
/// the operator has to be skipped.
fn recomplete(g: &MixedGraph, cons: &ResolvedConstraints) -> Option<MixedGraph> {
    let dag = g.extend_to_dag().ok()?;
    let done = cpdag_of_dag(&dag, Some(cons)).ok()?;
    for (a, b) in done.directed_edges() {
        if cons.is_forbidden(a, b) {
            return None;
        }
    }
    for &(a, b) in &cons.required {
        if !done.has_directed(a, b) {
            return None;
        }
    }
    Some(done)
}

struct Move {
    delta: f64,
    seq: usize,
    x: usize,
    y: usize,
    set: Vec<usize>,
}

fn sort_moves(mut moves: Vec<Move>) -> Vec<Move> {
    moves.sort_by(|l, r| r.delta.partial_cmp(&l.delta).unwrap().then(l.seq.cmp(&r.seq)));
    moves
}

fn insert_candidates(
    g: &MixedGraph,
    cache: &ScoreCache<'_>,
    cons: &ResolvedConstraints,
) -> Result<Vec<Move>> {
    let m = g.n();
    let mut out = Vec::new();
    let mut seq = 0;
    for y in 0..m {
        let pa_y: BTreeSet<usize> = g.parents(y).iter().copied().collect();
        for x in 0..m {
            if x == y || g.adjacent(x, y) || cons.is_forbidden(x, y) {
                continue;
            }
            let na = na_set(g, y, x);
            let t0: Vec<usize> = g
                .undirected_neighbors(y)
                .iter()
                .copied()
                .filter(|&w| !g.adjacent(w, x))
                .collect();
            for size in 0..=t0.len() {
                for t in t0.iter().copied().combinations(size) {
                    let mut block: BTreeSet<usize> = na.clone();
                    block.extend(t.iter().copied());
                    if !is_clique(g, &block) {
                        continue;
                    }
                    if semi_directed_path_avoiding(g, y, x, &block) {
                        continue;
                    }
                    let mut old: BTreeSet<usize> = pa_y.clone();
                    old.extend(block.iter().copied());
                    let mut new = old.clone();
                    new.insert(x);
                    let old_v: Vec<usize> = old.into_iter().collect();
                    let new_v: Vec<usize> = new.into_iter().collect();
                    let delta = cache.local_score(y, &new_v)? - cache.local_score(y, &old_v)?;
                    seq += 1;
                    if delta > IMPROVEMENT_EPS {
                        out.push(Move { delta, seq, x, y, set: t });
                    }
                }
            }
        }
    }
    Ok(sort_moves(out))
}

fn delete_candidates(
    g: &MixedGraph,
    cache: &ScoreCache<'_>,
    cons: &ResolvedConstraints,
) -> Result<Vec<Move>> {
    let m = g.n();
    let mut out = Vec::new();
    let mut seq = 0;
    for y in 0..m {
        let pa_y: BTreeSet<usize> = g.parents(y).iter().copied().collect();
        for x in 0..m {
            if x == y || !(g.has_directed(x, y) || g.has_undirected(x, y)) {
                continue;
            }
            if cons.required.contains(&(x, y)) || cons.required.contains(&(y, x)) {
                continue;
            }
            let na: Vec<usize> = na_set(g, y, x).into_iter().collect();
            for size in 0..=na.len() {
                for h in na.iter().copied().combinations(size) {
                    let keep: BTreeSet<usize> = na
                        .iter()
                        .copied()
                        .filter(|w| !h.contains(w))
                        .collect();
                    if !is_clique(g, &keep) {
                        continue;
                    }
                    let mut base: BTreeSet<usize> = pa_y.clone();
                    base.extend(keep.iter().copied());
                    let mut old = base.clone();
                    old.insert(x);
                    let mut new = base;
                    new.remove(&x);
                    let old_v: Vec<usize> = old.into_iter().collect();
                    let new_v: Vec<usize> = new.into_iter().collect();
                    let delta = cache.local_score(y, &new_v)? - cache.local_score(y, &old_v)?;
                    seq += 1;
                    if delta > IMPROVEMENT_EPS {
                        out.push(Move { delta, seq, x, y, set: h });
                    }
                }
            }
        }
    }
    Ok(sort_moves(out))
}

fn apply_insert(g: &MixedGraph, mv: &Move, cons: &ResolvedConstraints) -> Option<MixedGraph> {
    let mut h = g.clone();
    h.add_directed(mv.x, mv.y).ok()?;
    for &t in &mv.set {
        h.orient(t, mv.y).ok()?;
    }
    recomplete(&h, cons)
}

fn apply_delete(g: &MixedGraph, mv: &Move, cons: &ResolvedConstraints) -> Option<MixedGraph> {
    let mut h = g.clone();
    h.remove_edge(mv.x, mv.y).ok()?;
    for &w in &mv.set {
        if h.has_undirected(mv.y, w) {
            h.orient(mv.y, w).ok()?;
        }
        if h.has_undirected(mv.x, w) {
            h.orient(mv.x, w).ok()?;
        }
    }
    recomplete(&h, cons)
}

pub fn ges(
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    params.validate()?;
    let names = data.names().to_vec();
    let cons = constraints.resolve(&names)?;
    let cache = ScoreCache::new(data, ScoreConfig::bdeu(params.score_cfg.ess))?;

    let mut start = MixedGraph::new(names)?;
    for &(a, b) in &cons.required {
        start.add_directed(a, b)?;
    }
    if !start.is_acyclic() {
        return Err(Error::config("required edges contain a cycle".to_string()));
    }
    let mut g = recomplete(&start, &cons)
        .ok_or_else(|| Error::config("constraints admit no starting graph".to_string()))?;

    let mut moves_done = 0;
    loop {
        let mut applied = None;
        for mv in insert_candidates(&g, &cache, &cons)? {
            if let Some(next) = apply_insert(&g, &mv, &cons) {
                applied = Some(next);
                break;
            }
        }
        match applied {
            Some(next) => {
                g = next;
                moves_done += 1;
                if moves_done > MAX_MOVES {
                    return Err(Error::internal("forward sweep failed to converge".to_string()));
                }
            }
            None => break,
        }
    }
    loop {
        let mut applied = None;
        for mv in delete_candidates(&g, &cache, &cons)? {
            if let Some(next) = apply_delete(&g, &mv, &cons) {
                applied = Some(next);
                break;
            }
        }
        match applied {
            Some(next) => {
                g = next;
                moves_done += 1;
                if moves_done > MAX_MOVES {
                    return Err(Error::internal("backward sweep failed to converge".to_string()));
                }
            }
            None => break,
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
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
            let m = u8::from(rng.gen_bool(sigmoid(-1.5 + 3.0 * x as f64)));
            let y = u8::from(rng.gen_bool(sigmoid(-1.5 + 3.0 * m as f64)));
            cols[0].push(x);
            cols[1].push(m);
            cols[2].push(y);
        }
        BinaryDataset::new(vec!["x".into(), "m".into(), "y".into()], cols, "y").unwrap()
    }

    #[test]
    fn chain_without_constraints_stays_undirected() {
        let data = chain_data(31, 20_000);
        let g = ges(&data, &StructuralConstraints::none(), &LearnerParams::default()).unwrap();
        let (x, m, y) = (0, 1, 2);
        assert!(g.has_undirected(x, m), "{}", g.to_text());
        assert!(g.has_undirected(m, y), "{}", g.to_text());
        assert!(!g.adjacent(x, y));
        assert_eq!(g.n_edges(), 2);
    }

    #[test]
    fn collider_is_oriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let n = 20_000;
        let mut cols: Vec<Vec<u8>> = vec![Vec::new(); 3];
        for _ in 0..n {
            let a = u8::from(rng.gen_bool(0.5));
            let b = u8::from(rng.gen_bool(0.5));
            let c = u8::from(rng.gen_bool(sigmoid(-2.0 + 2.0 * (a + b) as f64)));
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push(c);
        }
        let data =
            BinaryDataset::new(vec!["a".into(), "b".into(), "c".into()], cols, "c").unwrap();
        let g = ges(&data, &StructuralConstraints::none(), &LearnerParams::default()).unwrap();
        assert!(g.has_directed(0, 2), "{}", g.to_text());
        assert!(g.has_directed(1, 2), "{}", g.to_text());
        assert!(!g.adjacent(0, 1));
    }

    #[test]
    fn sink_constraint_orients_the_tail_edge() {
        let data = chain_data(33, 20_000);
        let cons = StructuralConstraints::outcome_sink("y", data.names());
        let g = ges(&data, &cons, &LearnerParams::default()).unwrap();
        assert!(g.has_directed(1, 2), "{}", g.to_text());
        assert!(g.has_undirected(0, 1), "{}", g.to_text());
    }

    #[test]
    fn required_edge_is_kept_directed() {
        let data = chain_data(34, 10_000);
        let mut cons = StructuralConstraints::none();
        cons.required.insert(("x".to_string(), "m".to_string()));
        let g = ges(&data, &cons, &LearnerParams::default()).unwrap();
        assert!(g.has_directed(0, 1), "{}", g.to_text());
    }

    #[test]
    fn independent_data_gives_empty_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let n = 5000;
        let cols: Vec<Vec<u8>> = (0..3)
            .map(|_| (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect())
            .collect();
        let data =
            BinaryDataset::new(vec!["a".into(), "b".into(), "Y".into()], cols, "Y").unwrap();
        let g = ges(&data, &StructuralConstraints::none(), &LearnerParams::default()).unwrap();
        assert_eq!(g.n_edges(), 0);
    }
}
