//! PC-stable: order-independent skeleton discovery by conditional
//! independence testing, collider orientation from maximum-p separating
//! sets, conflict downgrading, then Meek closure under the constraints.

use std::collections::{BTreeSet, HashMap, HashSet};

use itertools::Itertools;

use crate::dataset::BinaryDataset;
use crate::error::Result;
use crate::graph::{MixedGraph, ResolvedConstraints, StructuralConstraints};
use crate::learn::LearnerParams;
use crate::stats::{ci_test, CiStatistic};

fn ukey(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Shared constraint repair: forbidden directions are downgraded to
/// undirected, required directions and single-legal directions are forced,
/// then Meek rules close the orientation.
pub(crate) fn finalize_pdag_with_constraints(
    g: &mut MixedGraph,
    cons: &ResolvedConstraints,
) -> Result<()> {
    for (a, b) in g.directed_edges() {
        if cons.is_forbidden(a, b) {
            g.unorient(a, b)?;
        }
    }
    for &(a, b) in &cons.required {
        if g.has_undirected(a, b) {
            g.clear_conflict(a, b);
            g.orient(a, b)?;
        }
    }
    for (a, b) in g.undirected_edges() {
        if g.is_locked(a, b) {
            continue;
        }
        let fab = cons.is_forbidden(a, b);
        let fba = cons.is_forbidden(b, a);
        if fab && !fba {
            g.orient(b, a)?;
        } else if fba && !fab {
            g.orient(a, b)?;
        }
    }
    g.apply_meek_rules(Some(cons));
    Ok(())
}

pub fn pc_stable(
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    params.validate()?;
    let names = data.names().to_vec();
    let cons = constraints.resolve(&names)?;
    let required_pairs: HashSet<(usize, usize)> =
        cons.required.iter().map(|&(a, b)| ukey(a, b)).collect();
    let m = data.n_cols();

    let mut adj: Vec<BTreeSet<usize>> =
        (0..m).map(|i| (0..m).filter(|&j| j != i).collect()).collect();
    // per removed pair: separating set of maximum p among the level where
    // independence was first found
    let mut sepsets: HashMap<(usize, usize), (Vec<usize>, f64)> = HashMap::new();

    for level in 0..=params.max_cond_size {
        let snapshot = adj.clone();
        if !(0..m).any(|v| snapshot[v].len() > level) {
            break;
        }
        for x in 0..m {
            let nbrs: Vec<usize> = snapshot[x].iter().copied().filter(|&y| y > x).collect();
            for y in nbrs {
                if !adj[x].contains(&y) || required_pairs.contains(&ukey(x, y)) {
                    continue;
                }
                let mut best: Option<(f64, Vec<usize>)> = None;
                let mut tried: BTreeSet<Vec<usize>> = BTreeSet::new();
                for (side, other) in [(x, y), (y, x)] {
                    let pool: Vec<usize> =
                        snapshot[side].iter().copied().filter(|&v| v != other).collect();
                    if pool.len() < level {
                        continue;
                    }
                    for combo in pool.into_iter().combinations(level) {
                        if !tried.insert(combo.clone()) {
                            continue;
                        }
                        let res = ci_test(data, x, y, &combo, params.alpha, CiStatistic::ChiSquare)?;
                        if res.independent {
                            let better = match &best {
                                Some((p, _)) => res.p_value > *p,
                                None => true,
                            };
                            if better {
                                best = Some((res.p_value, combo));
                            }
                        }
                    }
                }
                if let Some((p, sep)) = best {
                    adj[x].remove(&y);
                    adj[y].remove(&x);
                    sepsets.insert((x, y), (sep, p));
                }
            }
        }
    }

    let mut g = MixedGraph::new(names)?;
    for x in 0..m {
        for &y in adj[x].iter().filter(|&&y| y > x) {
            g.add_undirected(x, y)?;
        }
    }

    // collider phase: unshielded x - z - y with z outside sepset(x, y)
    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    for z in 0..m {
        let nb: Vec<usize> = adj[z].iter().copied().collect();
        for i in 0..nb.len() {
            for j in (i + 1)..nb.len() {
                let (x, y) = (nb[i], nb[j]);
                if adj[x].contains(&y) {
                    continue;
                }
                if let Some((sep, _)) = sepsets.get(&ukey(x, y)) {
                    if !sep.contains(&z) {
                        triples.push((x, z, y));
                    }
                }
            }
        }
    }
    triples.sort_unstable();
    for (x, z, y) in triples {
        for from in [x, y] {
            if cons.is_forbidden(from, z) {
                continue;
            }
            if g.has_undirected(from, z) && !g.is_locked(from, z) {
                g.orient(from, z)?;
            } else if g.has_directed(z, from) {
                // an earlier collider claimed the opposite direction
                g.unorient(z, from)?;
                g.set_conflict(z, from)?;
            }
        }
    }

    finalize_pdag_with_constraints(&mut g, &cons)?;
    Ok(g)
}
