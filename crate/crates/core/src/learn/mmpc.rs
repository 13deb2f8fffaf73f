//! Max-min parents-and-children skeleton discovery, plus the hybrid learner
//! that feeds the symmetrized skeleton into score-based hill climbing.

use std::collections::HashSet;

use itertools::Itertools;

use crate::dataset::BinaryDataset;
use crate::error::Result;
use crate::graph::{MixedGraph, StructuralConstraints};
use crate::learn::hc::hill_climb_restricted;
use crate::learn::LearnerParams;
use crate::stats::{ci_test, CiStatistic};

/// Candidate parent-children set of one target variable.
///
/// Grow phase: each remaining candidate carries the largest p-value seen over
/// all conditioning subsets tested so far; a candidate whose running maximum
/// crosses `alpha` is rejected for good. The candidate with the smallest
/// running maximum joins the set, and only subsets containing that newest
/// member need testing afterwards. Shrink phase: members rendered
/// conditionally independent by some subset of the other members are removed.
fn parents_children_of(
    data: &BinaryDataset,
    target: usize,
    params: &LearnerParams,
) -> Result<Vec<usize>> {
    let m = data.n_cols();
    let alpha = params.alpha;

    // running max p per candidate; rejected candidates are dropped entirely
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for x in 0..m {
        if x == target {
            continue;
        }
        let res = ci_test(data, x, target, &[], alpha, CiStatistic::ChiSquare)?;
        if !res.independent {
            candidates.push((x, res.p_value));
        }
    }

    let mut cpc: Vec<usize> = Vec::new();
    while !candidates.is_empty() {
        let (pick_pos, _) = candidates
            .iter()
            .enumerate()
            .min_by(|(i, (xi, pi)), (j, (xj, pj))| {
                pi.partial_cmp(pj)
                    .unwrap()
                    .then(xi.cmp(xj))
                    .then(i.cmp(j))
            })
            .unwrap();
        let (newest, maxp) = candidates.remove(pick_pos);
        if maxp >= alpha {
            break;
        }
        cpc.push(newest);

        let mut keep: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
        'cand: for (x, mut maxp) in candidates {
            let others: Vec<usize> = cpc.iter().copied().filter(|&c| c != newest).collect();
            let max_total = params.max_cond_size.min(others.len() + 1);
            for total in 1..=max_total {
                for rest in others.iter().copied().combinations(total - 1) {
                    let mut cond = rest;
                    cond.push(newest);
                    cond.sort_unstable();
                    let res = ci_test(data, x, target, &cond, alpha, CiStatistic::ChiSquare)?;
                    if res.p_value > maxp {
                        maxp = res.p_value;
                    }
                    if res.independent {
                        continue 'cand;
                    }
                }
            }
            keep.push((x, maxp));
        }
        candidates = keep;
    }

    // shrink
    let mut i = 0;
    while i < cpc.len() {
        let x = cpc[i];
        let others: Vec<usize> = cpc.iter().copied().filter(|&c| c != x).collect();
        let mut removed = false;
        'subsets: for size in 0..=params.max_cond_size.min(others.len()) {
            for cond in others.iter().copied().combinations(size) {
                let res = ci_test(data, x, target, &cond, alpha, CiStatistic::ChiSquare)?;
                if res.independent {
                    cpc.remove(i);
                    removed = true;
                    break 'subsets;
                }
            }
        }
        if !removed {
            i += 1;
        }
    }
    Ok(cpc)
}

/// Undirected skeleton: pair {a, b} is kept only when each endpoint appears
/// in the other's parents-children set.
pub fn mmpc_skeleton(
    data: &BinaryDataset,
    params: &LearnerParams,
) -> Result<HashSet<(usize, usize)>> {
    params.validate()?;
    let m = data.n_cols();
    let mut pc_sets: Vec<HashSet<usize>> = Vec::with_capacity(m);
    for t in 0..m {
        pc_sets.push(parents_children_of(data, t, params)?.into_iter().collect());
    }
    let mut skeleton = HashSet::new();
    for a in 0..m {
        for b in (a + 1)..m {
            if pc_sets[a].contains(&b) && pc_sets[b].contains(&a) {
                skeleton.insert((a, b));
            }
        }
    }
    Ok(skeleton)
}

/// Hybrid learner: constraint-based skeleton, then hill climbing restricted
/// to skeleton pairs. Required edges are admitted even when the skeleton
/// missed them.
pub fn mmhc(
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    let mut allowed = mmpc_skeleton(data, params)?;
    let cons = constraints.resolve(data.names())?;
    for &(a, b) in &cons.required {
        allowed.insert((a.min(b), a.max(b)));
    }
    hill_climb_restricted(data, constraints, params, Some(&allowed))
}
