//! Stratified independence tests on binary data.
//!
//! A test of x and y given a conditioning set builds one 2x2 table per
//! observed conditioning assignment, sums the per-stratum statistic, and sums
//! per-stratum degrees of freedom with zero-marginal rows and columns
//! dropped. Degenerate situations (no usable cell structure, or too few rows
//! for the table size) report independence explicitly rather than guessing.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CiStatistic {
    ChiSquare,
    GSquare,
}

/// Per-assignment 2x2 counts for (x, y) under a conditioning set. Keys are
/// the conditioning assignments packed as bits in conditioning-set order.
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyTable {
    pub cond: Vec<usize>,
    pub strata: Vec<(u64, [[u64; 2]; 2])>,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CiTestResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub independent: bool,
    /// Set when dof collapsed to zero or the minimum-data heuristic fired;
    /// such results are declared independent by convention.
    pub degenerate: bool,
}

fn check_vars(data: &BinaryDataset, x: usize, y: usize, cond: &[usize]) -> Result<Vec<usize>> {
    let ncol = data.n_cols();
    for &v in [x, y].iter().chain(cond) {
        if v >= ncol {
            return Err(Error::config(format!("column index {v} out of range")));
        }
    }
    if x == y {
        return Err(Error::config("x and y overlap".to_string()));
    }
    let mut c: Vec<usize> = cond.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.contains(&x) || c.contains(&y) {
        return Err(Error::config("conditioning set overlaps x or y".to_string()));
    }
    if c.len() > 63 {
        return Err(Error::config("conditioning set too large".to_string()));
    }
    Ok(c)
}

/// Counts are symmetric in x and y up to transposing each stratum.
pub fn contingency_counts(
    data: &BinaryDataset,
    x: usize,
    y: usize,
    cond: &[usize],
) -> Result<ContingencyTable> {
    let cond = check_vars(data, x, y, cond)?;
    let xs = data.column(x);
    let ys = data.column(y);
    let conds: Vec<&[u8]> = cond.iter().map(|&c| data.column(c)).collect();
    let n = data.n_rows();

    // dense table when the stratum space is small, hashed otherwise
    let k = cond.len();
    let mut strata: Vec<(u64, [[u64; 2]; 2])>;
    if k <= 16 {
        let mut dense = vec![[[0u64; 2]; 2]; 1usize << k];
        for r in 0..n {
            let mut key = 0usize;
            for (j, col) in conds.iter().enumerate() {
                key |= (col[r] as usize) << j;
            }
            dense[key][xs[r] as usize][ys[r] as usize] += 1;
        }
        strata = dense
            .into_iter()
            .enumerate()
            .filter(|(_, t)| t[0][0] + t[0][1] + t[1][0] + t[1][1] > 0)
            .map(|(key, t)| (key as u64, t))
            .collect();
    } else {
        let mut map = std::collections::BTreeMap::<u64, [[u64; 2]; 2]>::new();
        for r in 0..n {
            let mut key = 0u64;
            for (j, col) in conds.iter().enumerate() {
                key |= (col[r] as u64) << j;
            }
            let t = map.entry(key).or_insert([[0; 2]; 2]);
            t[xs[r] as usize][ys[r] as usize] += 1;
        }
        strata = map.into_iter().collect();
    }
    strata.sort_by_key(|&(key, _)| key);
    Ok(ContingencyTable { cond, strata, n: n as u64 })
}

/// Statistic and degrees of freedom of one stratum. Rows/columns with zero
/// marginals contribute neither cells nor dof.
fn stratum_stat(table: &[[u64; 2]; 2], kind: CiStatistic) -> (f64, u64) {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let total = rows[0] + rows[1];
    let live_rows = rows.iter().filter(|&&r| r > 0).count() as u64;
    let live_cols = cols.iter().filter(|&&c| c > 0).count() as u64;
    if live_rows < 2 || live_cols < 2 {
        return (0.0, 0);
    }
    let dof = (live_rows - 1) * (live_cols - 1);
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            if rows[i] == 0 || cols[j] == 0 {
                continue;
            }
            let expected = rows[i] as f64 * cols[j] as f64 / total as f64;
            let observed = table[i][j] as f64;
            match kind {
                CiStatistic::ChiSquare => {
                    let d = observed - expected;
                    stat += d * d / expected;
                }
                CiStatistic::GSquare => {
                    if observed > 0.0 {
                        stat += 2.0 * observed * (observed / expected).ln();
                    }
                }
            }
        }
    }
    (stat, dof)
}

/// Conditional independence test. Symmetric in x and y bit-exactly (the pair
/// is canonicalized by column index before counting).
pub fn ci_test(
    data: &BinaryDataset,
    x: usize,
    y: usize,
    cond: &[usize],
    alpha: f64,
    kind: CiStatistic,
) -> Result<CiTestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must be in (0,1), got {alpha}")));
    }
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    let table = contingency_counts(data, lo, hi, cond)?;
    let mut statistic = 0.0;
    let mut dof = 0u64;
    for (_, t) in &table.strata {
        let (s, d) = stratum_stat(t, kind);
        statistic += s;
        dof += d;
    }
    if dof == 0 {
        return Ok(CiTestResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
            independent: true,
            degenerate: true,
        });
    }
    // minimum-data heuristic: fewer than 5 rows per degree of freedom
    if (table.n as f64) < 5.0 * dof as f64 {
        return Ok(CiTestResult { statistic, dof, p_value: 1.0, independent: true, degenerate: true });
    }
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::internal(format!("chi-squared dof {dof}: {e}")))?;
    let p_value = (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0);
    Ok(CiTestResult {
        statistic,
        dof,
        p_value,
        independent: p_value >= alpha,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dataset(cols: Vec<(&str, Vec<u8>)>) -> BinaryDataset {
        let names: Vec<String> = cols.iter().map(|(n, _)| n.to_string()).collect();
        let outcome = names.last().unwrap().clone();
        BinaryDataset::new(names, cols.into_iter().map(|(_, c)| c).collect(), &outcome).unwrap()
    }

    /// Hash-count oracle over row tuples.
    fn count_oracle(
        data: &BinaryDataset,
        x: usize,
        y: usize,
        cond: &[usize],
    ) -> std::collections::BTreeMap<u64, [[u64; 2]; 2]> {
        let mut map = std::collections::BTreeMap::new();
        for r in 0..data.n_rows() {
            let mut key = 0u64;
            for (j, &c) in cond.iter().enumerate() {
                key |= (data.column(c)[r] as u64) << j;
            }
            let t: &mut [[u64; 2]; 2] = map.entry(key).or_insert([[0; 2]; 2]);
            t[data.column(x)[r] as usize][data.column(y)[r] as usize] += 1;
        }
        map
    }

    fn bern_cols(rng: &mut ChaCha8Rng, n: usize, ps: &[f64]) -> Vec<Vec<u8>> {
        ps.iter()
            .map(|&p| (0..n).map(|_| u8::from(rng.gen_bool(p))).collect())
            .collect()
    }

    #[test]
    fn counts_match_hash_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cols = bern_cols(&mut rng, 500, &[0.5, 0.3, 0.6, 0.4]);
        let data = BinaryDataset::new(
            vec!["a".into(), "b".into(), "c".into(), "Y".into()],
            cols,
            "Y",
        )
        .unwrap();
        let table = contingency_counts(&data, 0, 3, &[1, 2]).unwrap();
        let oracle = count_oracle(&data, 0, 3, &[1, 2]);
        assert_eq!(table.strata.len(), oracle.len());
        for (key, t) in &table.strata {
            assert_eq!(t, &oracle[key]);
        }
        assert_eq!(table.n, 500);
    }

    #[test]
    fn chi_square_hand_value() {
        // [[30,10],[10,30]]: all expected counts 20, statistic 4 * 100/20 = 20
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, y, c) in [(0, 0, 30), (0, 1, 10), (1, 0, 10), (1, 1, 30)] {
            for _ in 0..c {
                xs.push(x);
                ys.push(y);
            }
        }
        let data = dataset(vec![("x", xs), ("y", ys)]);
        let res = ci_test(&data, 0, 1, &[], 0.05, CiStatistic::ChiSquare).unwrap();
        assert_relative_eq!(res.statistic, 20.0, max_relative = 1e-12);
        assert_eq!(res.dof, 1);
        assert!(res.p_value < 1e-4);
        assert!(!res.independent);
        assert!(!res.degenerate);

        let g = ci_test(&data, 0, 1, &[], 0.05, CiStatistic::GSquare).unwrap();
        // 2*(60*ln 1.5 - 20*ln 2) frozen
        assert_relative_eq!(g.statistic, 20.929925750581916, max_relative = 1e-12);
    }

    #[test]
    fn symmetry_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cols = bern_cols(&mut rng, 300, &[0.5, 0.4, 0.5]);
        let data = BinaryDataset::new(vec!["a".into(), "b".into(), "Y".into()], cols, "Y").unwrap();
        for kind in [CiStatistic::ChiSquare, CiStatistic::GSquare] {
            let r1 = ci_test(&data, 0, 1, &[2], 0.05, kind).unwrap();
            let r2 = ci_test(&data, 1, 0, &[2], 0.05, kind).unwrap();
            assert_eq!(r1.statistic.to_bits(), r2.statistic.to_bits());
            assert_eq!(r1.p_value.to_bits(), r2.p_value.to_bits());
        }
    }

    #[test]
    fn relabeling_conditioning_assignments_preserves_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut cols = bern_cols(&mut rng, 400, &[0.5, 0.5, 0.3, 0.6]);
        let flipped: Vec<u8> = cols[2].iter().map(|&v| 1 - v).collect();
        cols.push(flipped);
        let data = BinaryDataset::new(
            vec!["a".into(), "b".into(), "z".into(), "Y".into(), "zf".into()],
            cols,
            "Y",
        )
        .unwrap();
        let r1 = ci_test(&data, 0, 1, &[2], 0.05, CiStatistic::ChiSquare).unwrap();
        let r2 = ci_test(&data, 0, 1, &[4], 0.05, CiStatistic::ChiSquare).unwrap();
        assert_relative_eq!(r1.statistic, r2.statistic, max_relative = 1e-9);
        assert_eq!(r1.dof, r2.dof);
    }

    #[test]
    fn dof_zero_is_degenerate_independent() {
        // constant x collapses every stratum row marginal
        let data = dataset(vec![("x", vec![1; 50]), ("y", (0..50).map(|i| (i % 2) as u8).collect())]);
        let res = ci_test(&data, 0, 1, &[], 0.05, CiStatistic::ChiSquare).unwrap();
        assert_eq!(res.dof, 0);
        assert_eq!(res.p_value, 1.0);
        assert!(res.independent && res.degenerate);
    }

    #[test]
    fn minimum_data_heuristic_fires() {
        // 4 rows, dof 1 -> 4 < 5 declared independent
        let data = dataset(vec![("x", vec![0, 0, 1, 1]), ("y", vec![0, 0, 1, 1])]);
        let res = ci_test(&data, 0, 1, &[], 0.05, CiStatistic::ChiSquare).unwrap();
        assert!(res.independent && res.degenerate);
        assert_eq!(res.dof, 1);
    }

    #[test]
    fn conditioning_on_common_cause_separates() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 20000;
        let z: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let mk = |rng: &mut ChaCha8Rng, z: &[u8]| -> Vec<u8> {
            z.iter()
                .map(|&zv| {
                    let p = if zv == 1 { 0.8 } else { 0.2 };
                    u8::from(rng.gen_bool(p))
                })
                .collect()
        };
        let x = mk(&mut rng, &z);
        let y = mk(&mut rng, &z);
        let data = dataset(vec![("x", x), ("z", z), ("y", y)]);
        let marg = ci_test(&data, 0, 2, &[], 0.05, CiStatistic::ChiSquare).unwrap();
        assert!(!marg.independent);
        let cond = ci_test(&data, 0, 2, &[1], 0.05, CiStatistic::ChiSquare).unwrap();
        assert!(cond.independent);
    }

    /// Unfaithful collider: X and Z marginally independent of Y by
    /// cancellation, dependent once the other parent is conditioned on.
    /// Y = Bernoulli(0.4 + 0.2 X + 0.24 Z - 0.4 X Z), X = B(0.6), Z = B(0.5).
    #[test]
    fn unfaithful_collider_marginal_independence() {
        let n = 100_000;
        let mut marg_indep = 0;
        let mut cond_dep = 0;
        let seeds = 20;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut xs = Vec::with_capacity(n);
            let mut zs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let x = u8::from(rng.gen_bool(0.6));
                let z = u8::from(rng.gen_bool(0.5));
                let p = 0.4 + 0.2 * x as f64 + 0.24 * z as f64 - 0.4 * (x * z) as f64;
                xs.push(x);
                zs.push(z);
                ys.push(u8::from(rng.gen_bool(p)));
            }
            let data = dataset(vec![("x", xs), ("z", zs), ("y", ys)]);
            if ci_test(&data, 0, 2, &[], 0.05, CiStatistic::ChiSquare).unwrap().independent {
                marg_indep += 1;
            }
            if !ci_test(&data, 0, 2, &[1], 0.05, CiStatistic::ChiSquare).unwrap().independent {
                cond_dep += 1;
            }
        }
        // marginal X,Y dependence is exactly cancelled, so rejections happen
        // at roughly the alpha rate; conditional dependence is strong
        assert!(marg_indep >= seeds * 8 / 10, "marginally independent in {marg_indep}/{seeds}");
        assert_eq!(cond_dep, seeds);
    }

    /// Type-I error calibration at alpha = 0.05 on truly independent columns.
    #[test]
    fn calibration_on_independent_data() {
        let n = 10_000;
        let reps = 200;
        let mut rejections = 0;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
            let x: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
            let y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
            let data = dataset(vec![("x", x), ("y", y)]);
            let res = ci_test(&data, 0, 1, &[], 0.05, CiStatistic::ChiSquare).unwrap();
            if !res.independent {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.02..=0.09).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn overlapping_variables_rejected() {
        let data = dataset(vec![("x", vec![0, 1]), ("y", vec![1, 0])]);
        assert!(ci_test(&data, 0, 0, &[], 0.05, CiStatistic::ChiSquare).is_err());
        assert!(ci_test(&data, 0, 1, &[1], 0.05, CiStatistic::ChiSquare).is_err());
        assert!(ci_test(&data, 0, 1, &[], 1.5, CiStatistic::ChiSquare).is_err());
    }
}
