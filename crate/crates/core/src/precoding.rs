//! Zero-forcing beamforming and downlink power allocation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::CVector;
use crate::{Error, Result, TransmissionMode};

pub type CMatrix = DMatrix<Complex64>;

/// Relative threshold on the triangular factor's diagonal below which a
/// column is treated as linearly dependent on its predecessors.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Unit-norm zero-forcing beamformers for the columns of `h_est`.
///
/// Column `k` of the result is orthogonal to every column `j != k` of
/// `h_est` and has a positive projection on column `k`. It is the normalised
/// `k`-th column of the right pseudo-inverse `H (H^H H)^-1`, obtained from a
/// thin QR factorisation `H = Q R` as `Q R^-H`.
pub fn zf_beamformers(h_est: &CMatrix) -> Result<CMatrix> {
    let (dim, users) = h_est.shape();
    if users == 0 {
        return Ok(CMatrix::zeros(dim, 0));
    }
    if users > dim {
        return Err(Error::TooManyUsers {
            users,
            dimension: dim,
        });
    }
    let qr = h_est.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..users).map(|i| r[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let dependent: Vec<usize> = diag
        .iter()
        .enumerate()
        .filter(|(_, &d)| !(d > RANK_TOLERANCE * max))
        .map(|(i, _)| i)
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let q = qr.q();
    let rh = r.adjoint();
    let x = rh
        .solve_lower_triangular(&CMatrix::identity(users, users))
        .ok_or_else(|| Error::RankDeficient {
            columns: (0..users).collect(),
        })?;
    let mut w = q * x;
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        col /= Complex64::new(n, 0.0);
    }
    Ok(w)
}

/// Largest normalised leakage `|h_j^H w_k| / ||h_j||` over `j != k`.
pub fn zf_leakage(h_est: &CMatrix, w: &CMatrix) -> f64 {
    let g = h_est.adjoint() * w;
    let mut worst: f64 = 0.0;
    for j in 0..g.nrows() {
        let hn = h_est.column(j).norm();
        for k in 0..g.ncols() {
            if j != k {
                worst = worst.max(g[(j, k)].norm() / hn);
            }
        }
    }
    worst
}

/// Equal split of `budget` over `n` users.
pub fn allocate_equal(n: usize, budget: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Empty("power allocation group"));
    }
    Ok(vec![budget / n as f64; n])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waterfilling {
    pub powers: Vec<f64>,
    /// Water level `mu`: `p_k = max(0, mu - 1/g_k)`.
    pub level: f64,
}

/// Spatial waterfilling over decoupled streams with gains `g_k` and unit
/// noise: maximise `sum log2(1 + g_k p_k)` subject to `sum p_k = budget`.
///
/// `g_k = +inf` is allowed and treated as a noiseless stream.
pub fn allocate_waterfilling(gains: &[f64], budget: f64) -> Result<Waterfilling> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::param("budget", format!("must be positive and finite, got {budget}")));
    }
    if gains.is_empty() {
        return Err(Error::Empty("waterfilling gains"));
    }
    if gains.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::param("gains", "all stream gains must be positive"));
    }
    let mut inv: Vec<(f64, usize)> = gains.iter().map(|&g| (1.0 / g, 0)).collect();
    for (i, e) in inv.iter_mut().enumerate() {
        e.1 = i;
    }
    inv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // Grow the active set from the strongest stream while the next stream's
    // floor lies below the water level of the current set.
    let mut sum_inv = 0.0;
    let mut level = 0.0;
    for (n, &(floor, _)) in inv.iter().enumerate() {
        if n > 0 && floor >= level {
            break;
        }
        sum_inv += floor;
        level = (budget + sum_inv) / (n + 1) as f64;
    }
    let powers = gains
        .iter()
        .map(|&g| (level - 1.0 / g).max(0.0))
        .collect();
    Ok(Waterfilling { powers, level })
}

/// Beamformers and powers for one zero-forcing group.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub mode: TransmissionMode,
    /// Unit-norm beamformers as columns.
    pub w: CMatrix,
    pub powers: Vec<f64>,
}

impl BeamformerSet {
    /// ZF with equal power. CST groups share a per-BS budget `P`, the NMT
    /// group shares the sum budget `B * P`; pass the matching `budget`.
    pub fn zf_equal(mode: TransmissionMode, h_est: &CMatrix, budget: f64) -> Result<Self> {
        let w = zf_beamformers(h_est)?;
        let powers = allocate_equal(h_est.ncols(), budget)?;
        Ok(Self { mode, w, powers })
    }

    /// ZF with spatial waterfilling on the estimated effective gains
    /// `|h_est_k^H w_k|^2`.
    pub fn zf_waterfilling(mode: TransmissionMode, h_est: &CMatrix, budget: f64) -> Result<Self> {
        let w = zf_beamformers(h_est)?;
        let gains: Vec<f64> = (0..w.ncols())
            .map(|k| h_est.column(k).dotc(&w.column(k)).norm_sqr())
            .collect();
        let powers = allocate_waterfilling(&gains, budget)?.powers;
        Ok(Self { mode, w, powers })
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Stack channel vectors as the columns of a matrix.
pub fn columns_to_matrix(cols: &[&CVector]) -> Result<CMatrix> {
    let dim = cols.first().map_or(0, |c| c.len());
    if let Some(bad) = cols.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok(CMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_is_matched_filter() {
        let h = CMatrix::from_column_slice(3, 1, &[c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5)]);
        let w = zf_beamformers(&h).unwrap();
        let n = h.column(0).norm();
        for i in 0..3 {
            assert_relative_eq!(w[(i, 0)].re, h[(i, 0)].re / n, epsilon = 1e-14);
            assert_relative_eq!(w[(i, 0)].im, h[(i, 0)].im / n, epsilon = 1e-14);
        }
    }

    #[test]
    fn orthogonal_columns_keep_direction() {
        let h = CMatrix::from_column_slice(3, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let w = zf_beamformers(&h).unwrap();
        assert_relative_eq!(w[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(w[(1, 1)].im, 1.0, epsilon = 1e-14);
        assert!(w[(1, 0)].norm() < 1e-14 && w[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn random_8x6_nulls_interference() {
        let mut r = rng::stream(1, &[]);
        let cols: Vec<CVector> = (0..6).map(|_| complex_gaussian(&mut r, 8, 1.0)).collect();
        let h = columns_to_matrix(&cols.iter().collect::<Vec<_>>()).unwrap();
        let w = zf_beamformers(&h).unwrap();
        assert!(zf_leakage(&h, &w) < 1e-10);
        for k in 0..6 {
            assert_relative_eq!(w.column(k).norm(), 1.0, epsilon = 1e-12);
            assert!(h.column(k).dotc(&w.column(k)).re > 0.0);
        }
    }

    #[test]
    fn rank_deficiency_reported() {
        let mut r = rng::stream(2, &[]);
        let a = complex_gaussian(&mut r, 4, 1.0);
        let b = complex_gaussian(&mut r, 4, 1.0);
        let dup = &a * c(0.5, -2.0);
        let h = columns_to_matrix(&[&a, &b, &dup]).unwrap();
        match zf_beamformers(&h) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("expected rank error, got {other:?}"),
        }
        let too_many = CMatrix::zeros(2, 3);
        assert!(matches!(zf_beamformers(&too_many), Err(Error::TooManyUsers { .. })));
    }

    #[test]
    fn isotropic_cst_beamformers() {
        // Mean outer product of ZF directions from i.i.d. channels is I/N.
        let mut r = rng::stream(3, &[]);
        let n = 4;
        let trials = 20_000;
        let mut acc = CMatrix::zeros(n, n);
        for _ in 0..trials {
            let cols: Vec<CVector> = (0..3).map(|_| complex_gaussian(&mut r, n, 1.0)).collect();
            let h = columns_to_matrix(&cols.iter().collect::<Vec<_>>()).unwrap();
            let w = zf_beamformers(&h).unwrap();
            let v = w.column(0);
            acc += v * v.adjoint();
        }
        acc /= c(trials as f64, 0.0);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 / n as f64 } else { 0.0 };
                assert!((acc[(i, j)] - c(target, 0.0)).norm() < 0.01, "entry ({i},{j}) = {}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn equal_allocation() {
        let p = allocate_equal(6, 12.0).unwrap();
        assert_eq!(p, vec![2.0; 6]);
        assert_eq!(allocate_equal(1, 3.0 * 5.0).unwrap(), vec![15.0]);
        assert!(allocate_equal(0, 1.0).is_err());
        let p = allocate_equal(7, 1.0).unwrap();
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn waterfilling_cases() {
        let wf = allocate_waterfilling(&[2.0, 2.0, 2.0], 3.0).unwrap();
        for p in &wf.powers {
            assert_relative_eq!(*p, 1.0, epsilon = 1e-14);
        }
        let wf = allocate_waterfilling(&[1.0, 0.5], 3.0).unwrap();
        assert_relative_eq!(wf.level, 3.0, epsilon = 1e-14);
        assert_relative_eq!(wf.powers[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(wf.powers[1], 1.0, epsilon = 1e-14);
        let wf = allocate_waterfilling(&[f64::INFINITY, 1e-12], 5.0).unwrap();
        assert_eq!(wf.powers, vec![5.0, 0.0]);
        assert!(allocate_waterfilling(&[1.0], 0.0).is_err());
        assert!(allocate_waterfilling(&[1.0, 0.0], 1.0).is_err());
        assert!(allocate_waterfilling(&[], 1.0).is_err());
    }

    /// Bisection on the water level, independent of the sorted active-set
    /// search.
    fn level_by_bisection(gains: &[f64], budget: f64) -> f64 {
        let used = |mu: f64| gains.iter().map(|g| (mu - 1.0 / g).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, budget + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if used(mid) > budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    proptest! {
        #[test]
        fn waterfilling_kkt(gains in proptest::collection::vec(1e-3..1e3f64, 1..12), budget in 1e-3..1e3f64) {
            let wf = allocate_waterfilling(&gains, budget).unwrap();
            let total: f64 = wf.powers.iter().sum();
            prop_assert!((total - budget).abs() <= 1e-9 * budget.max(1.0));
            for (p, g) in wf.powers.iter().zip(&gains) {
                prop_assert!(*p >= 0.0);
                if *p > 0.0 {
                    prop_assert!((wf.level - 1.0 / g - p).abs() <= 1e-9 * wf.level.max(1.0));
                } else {
                    prop_assert!(wf.level <= 1.0 / g + 1e-9 * wf.level.max(1.0));
                }
            }
            let mu = level_by_bisection(&gains, budget);
            prop_assert!((mu - wf.level).abs() <= 1e-8 * mu.max(1.0));
        }

        #[test]
        fn zf_residual_random(dim in 2usize..12, seed in any::<u64>()) {
            let mut r = rng::stream(seed, &[]);
            let users = 1 + (seed as usize % dim);
            let cols: Vec<CVector> = (0..users).map(|_| complex_gaussian(&mut r, dim, 1.0)).collect();
            let h = columns_to_matrix(&cols.iter().collect::<Vec<_>>()).unwrap();
            let w = zf_beamformers(&h).unwrap();
            prop_assert!(zf_leakage(&h, &w) < 1e-10);
            for k in 0..users {
                prop_assert!((w.column(k).norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
