//! Deliberately crude baseline: connect strongly phi-correlated pairs and
//! orient everything along a seeded random node order. Exists to give the
//! ensemble a low-quality member, not to be a good learner.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::BinaryDataset;
use crate::error::Result;
use crate::graph::{MixedGraph, StructuralConstraints};
use crate::learn::LearnerParams;

/// Phi coefficient of two binary columns; 0.0 when either is constant.
pub(crate) fn phi_coefficient(data: &BinaryDataset, a: usize, b: usize) -> f64 {
    let (ca, cb) = (data.column(a), data.column(b));
    let mut n = [[0f64; 2]; 2];
    for (&x, &y) in ca.iter().zip(cb) {
        n[x as usize][y as usize] += 1.0;
    }
    let r0 = n[0][0] + n[0][1];
    let r1 = n[1][0] + n[1][1];
    let c0 = n[0][0] + n[1][0];
    let c1 = n[0][1] + n[1][1];
    let denom = (r0 * r1 * c0 * c1).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (n[1][1] * n[0][0] - n[1][0] * n[0][1]) / denom
}

pub fn noisy_baseline(
    data: &BinaryDataset,
    constraints: &StructuralConstraints,
    params: &LearnerParams,
) -> Result<MixedGraph> {
    params.validate()?;
    let names = data.names().to_vec();
    let cons = constraints.resolve(&names)?;
    let m = data.n_cols();

    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    order.shuffle(&mut rng);
    // nodes banned from having any outgoing edge sort to the back so the
    // order cannot contradict a sink constraint
    let all_out_banned =
        |v: usize| (0..m).filter(|&w| w != v).all(|w| cons.is_forbidden(v, w));
    order.sort_by_key(|&v| all_out_banned(v));
    let mut pos = vec![0usize; m];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }

    let mut g = MixedGraph::new(names)?;
    for a in 0..m {
        for b in (a + 1)..m {
            if phi_coefficient(data, a, b).abs() < params.noisy_threshold {
                continue;
            }
            let (from, to) = if pos[a] < pos[b] { (a, b) } else { (b, a) };
            if cons.is_forbidden(from, to) {
                continue;
            }
            g.add_directed(from, to)?;
        }
    }
    for &(a, b) in &cons.required {
        if g.has_directed(a, b) {
            continue;
        }
        if g.has_directed(b, a) {
            g.remove_edge(b, a)?;
        }
        if !g.directed_path_exists(b, a) {
            g.add_directed(a, b)?;
        }
    }
    debug_assert!(g.is_acyclic());
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn paired_data(seed: u64, n: usize) -> BinaryDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<u8>> = vec![Vec::new(); 3];
        for _ in 0..n {
            let a = u8::from(rng.gen_bool(0.5));
            let b = if rng.gen_bool(0.9) { a } else { 1 - a };
            let z = u8::from(rng.gen_bool(0.5));
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push(z);
        }
        BinaryDataset::new(vec!["a".into(), "b".into(), "z".into()], cols, "z").unwrap()
    }

    #[test]
    fn keeps_strong_pairs_and_drops_independent_ones() {
        let data = paired_data(41, 4000);
        let g = noisy_baseline(&data, &StructuralConstraints::none(), &LearnerParams::default())
            .unwrap();
        assert!(g.adjacent(0, 1));
        assert!(!g.adjacent(0, 2));
        assert!(!g.adjacent(1, 2));
        assert!(g.is_fully_directed());
    }

    #[test]
    fn sink_constraint_holds_for_every_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 2000;
        let mut cols: Vec<Vec<u8>> = vec![Vec::new(); 3];
        for _ in 0..n {
            let a = u8::from(rng.gen_bool(0.5));
            let y = if rng.gen_bool(0.85) { a } else { 1 - a };
            let b = if rng.gen_bool(0.85) { y } else { 1 - y };
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push(y);
        }
        let data =
            BinaryDataset::new(vec!["a".into(), "b".into(), "y".into()], cols, "y").unwrap();
        let cons = StructuralConstraints::outcome_sink("y", data.names());
        for seed in 0..20 {
            let params = LearnerParams { seed, ..Default::default() };
            let g = noisy_baseline(&data, &cons, &params).unwrap();
            let yi = g.try_index("y").unwrap();
            assert!(g.children(yi).is_empty(), "seed {seed}: {}", g.to_text());
            assert!(!g.parents(yi).is_empty(), "seed {seed}");
            assert!(g.is_acyclic());
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let data = paired_data(43, 3000);
        let params = LearnerParams { seed: 7, ..Default::default() };
        let g1 = noisy_baseline(&data, &StructuralConstraints::none(), &params).unwrap();
        let g2 = noisy_baseline(&data, &StructuralConstraints::none(), &params).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn phi_matches_hand_computation() {
        // counts: n11=30, n00=40, n10=10, n01=20
        let mut cols = vec![Vec::new(), Vec::new()];
        for (a, b, reps) in [(1u8, 1u8, 30), (0, 0, 40), (1, 0, 10), (0, 1, 20)] {
            for _ in 0..reps {
                cols[0].push(a);
                cols[1].push(b);
            }
        }
        let data = BinaryDataset::new(vec!["a".into(), "Y".into()], cols, "Y").unwrap();
        let phi = phi_coefficient(&data, 0, 1);
        let expect = (30.0 * 40.0 - 10.0 * 20.0) / (60.0f64 * 40.0 * 50.0 * 50.0).sqrt();
        assert!((phi - expect).abs() < 1e-12);
    }

    #[test]
    fn required_edge_is_added() {
        let data = paired_data(44, 3000);
        let mut cons = StructuralConstraints::none();
        cons.required.insert(("z".to_string(), "a".to_string()));
        let params = LearnerParams { seed: 3, ..Default::default() };
        let g = noisy_baseline(&data, &cons, &params).unwrap();
        let (z, a) = (g.try_index("z").unwrap(), g.try_index("a").unwrap());
        assert!(g.has_directed(z, a));
    }
}
