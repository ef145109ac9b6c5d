//! Large-scale path gain, Rayleigh fading and the MMSE estimate/error split.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::antenna::BsAntenna;
use crate::geometry::{spherical_angles, NetworkLayout, UserLocation};
use crate::{Error, Result};

pub type CVector = DVector<Complex64>;

static CLAMPED_DISTANCES: AtomicU64 = AtomicU64::new(0);

/// Number of path-loss evaluations so far (process-wide) whose distance was
/// below the reference distance and got clamped.
pub fn clamped_distance_count() -> u64 {
    CLAMPED_DISTANCES.load(Ordering::Relaxed)
}

/// Distance-dependent path loss `(d / d0)^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pathloss {
    pub exponent: f64,
    pub reference_distance: f64,
}

impl Default for Pathloss {
    fn default() -> Self {
        Self {
            exponent: 3.76,
            reference_distance: 1.0,
        }
    }
}

impl Pathloss {
    /// Linear gain at 3D distance `d3` (metres). Distances below the
    /// reference distance are clamped to it and counted.
    pub fn gain(&self, d3: f64) -> f64 {
        let d = if d3 < self.reference_distance {
            CLAMPED_DISTANCES.fetch_add(1, Ordering::Relaxed);
            self.reference_distance
        } else {
            d3
        };
        (d / self.reference_distance).powf(-self.exponent)
    }
}

/// Everything needed to turn a user position and a tilt vector into path
/// gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub layout: NetworkLayout,
    pub antenna: BsAntenna,
    pub pathloss: Pathloss,
}

impl Propagation {
    pub fn new(layout: NetworkLayout, antenna: BsAntenna, pathloss: Pathloss) -> Self {
        Self {
            layout,
            antenna,
            pathloss,
        }
    }

    pub fn num_bs(&self) -> usize {
        self.layout.num_cells
    }

    /// `alpha = L * G(tilt)` between `user` and BS `bs`.
    pub fn path_gain(&self, user: &UserLocation, bs: usize, tilt: f64) -> Result<f64> {
        let a = spherical_angles(user, bs, &self.layout)?;
        let g = self
            .antenna
            .gain_linear(a.azimuth, self.layout.bs_orientations[bs], a.elevation, tilt);
        Ok(self.pathloss.gain(a.distance_3d) * g)
    }

    /// Path gains from every BS; `tilts[b]` is BS `b`'s tilt.
    pub fn path_gain_row(&self, user: &UserLocation, tilts: &[f64]) -> Result<Vec<f64>> {
        if tilts.len() != self.num_bs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_bs(),
                got: tilts.len(),
            });
        }
        tilts
            .iter()
            .enumerate()
            .map(|(b, &t)| self.path_gain(user, b, t))
            .collect()
    }

    /// Same tilt at every BS.
    pub fn path_gain_row_common(&self, user: &UserLocation, tilt: f64) -> Result<Vec<f64>> {
        self.path_gain_row(user, &vec![tilt; self.num_bs()])
    }

    /// Per-BS transmit power giving `target_snr_db` at the far edge of an
    /// isolated cell with peak antenna gain and unit noise power.
    pub fn power_from_edge_snr(&self, target_snr_db: f64) -> f64 {
        let l = &self.layout;
        let d_edge = l.cell_radius.hypot(l.height_difference());
        10f64.powf(target_snr_db / 10.0) / self.pathloss.gain(d_edge)
    }
}

/// Path gains `alpha[k][b]` for a set of users under a tilt vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainTable {
    num_users: usize,
    num_bs: usize,
    alpha: Vec<f64>,
}

impl PathGainTable {
    pub fn compute(prop: &Propagation, users: &[UserLocation], tilts: &[f64]) -> Result<Self> {
        let mut alpha = Vec::with_capacity(users.len() * prop.num_bs());
        for u in users {
            alpha.extend(prop.path_gain_row(u, tilts)?);
        }
        Ok(Self {
            num_users: users.len(),
            num_bs: prop.num_bs(),
            alpha,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_bs = rows.first().map_or(0, Vec::len);
        let mut alpha = Vec::with_capacity(rows.len() * num_bs);
        for r in rows {
            if r.len() != num_bs {
                return Err(Error::DimensionMismatch {
                    expected: num_bs,
                    got: r.len(),
                });
            }
            if r.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
                return Err(Error::param("alpha", "path gains must be finite and non-negative"));
            }
            alpha.extend_from_slice(r);
        }
        Ok(Self {
            num_users: rows.len(),
            num_bs,
            alpha,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn get(&self, k: usize, b: usize) -> f64 {
        self.alpha[k * self.num_bs + b]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.alpha[k * self.num_bs..(k + 1) * self.num_bs]
    }
}

/// `(kappa^2, sigma^2)` of the MMSE estimate and error per antenna for a link
/// with path gain `alpha`, pilot reuse `num_bs` and per-BS power `power`.
pub fn mmse_variances(alpha: f64, num_bs: usize, power: f64) -> (f64, f64) {
    let sigma2 = 1.0 / (1.0 + alpha * num_bs as f64 * power);
    (1.0 - sigma2, sigma2)
}

/// Small-scale fading of one user-BS link, split as `h = h_est + err`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub h: CVector,
    pub h_est: CVector,
    pub err: CVector,
    pub kappa2: f64,
    pub sigma2: f64,
}

/// Fading for all `K x B` links, row-major in the user index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub num_users: usize,
    pub num_bs: usize,
    pub num_antennas: usize,
    pub links: Vec<LinkChannel>,
}

impl ChannelRealization {
    pub fn link(&self, k: usize, b: usize) -> &LinkChannel {
        &self.links[k * self.num_bs + b]
    }

    /// Draw the estimate and error of every link of `table` directly from
    /// their MMSE variances.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, table: &PathGainTable, power: f64, num_antennas: usize) -> Self {
        let links = (0..table.num_users())
            .flat_map(|k| (0..table.num_bs()).map(move |b| (k, b)))
            .map(|(k, b)| decompose_mmse(table.get(k, b), table.num_bs(), power, num_antennas, rng))
            .collect();
        Self {
            num_users: table.num_users(),
            num_bs: table.num_bs(),
            num_antennas,
            links,
        }
    }
}

/// i.i.d. `CN(0, variance)` vector.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVector {
    let s = (variance / 2.0).sqrt();
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Unit-variance fading on every link with a perfect estimate.
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R, num_users: usize, num_bs: usize, num_antennas: usize) -> ChannelRealization {
    let links = (0..num_users * num_bs)
        .map(|_| {
            let h = complex_gaussian(rng, num_antennas, 1.0);
            LinkChannel {
                h_est: h.clone(),
                err: CVector::zeros(num_antennas),
                h,
                kappa2: 1.0,
                sigma2: 0.0,
            }
        })
        .collect();
    ChannelRealization {
        num_users,
        num_bs,
        num_antennas,
        links,
    }
}

/// Draw one link as independent estimate `CN(0, kappa^2)` and error
/// `CN(0, sigma^2)` and return it with `h = h_est + err`.
pub fn decompose_mmse<R: Rng + ?Sized>(alpha: f64, num_bs: usize, power: f64, num_antennas: usize, rng: &mut R) -> LinkChannel {
    let (kappa2, sigma2) = mmse_variances(alpha, num_bs, power);
    let h_est = complex_gaussian(rng, num_antennas, kappa2);
    let err = complex_gaussian(rng, num_antennas, sigma2);
    LinkChannel {
        h: &h_est + &err,
        h_est,
        err,
        kappa2,
        sigma2,
    }
}

/// Aggregate channel of one user towards all BSs, length `B * N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkChannel {
    pub h: CVector,
    pub h_est: CVector,
    pub err: CVector,
}

/// Stack `sqrt(alpha_b) * h_b` over BSs for user `k`.
pub fn assemble_network_channel(real: &ChannelRealization, k: usize, alpha_row: &[f64]) -> Result<NetworkChannel> {
    if alpha_row.len() != real.num_bs {
        return Err(Error::DimensionMismatch {
            expected: real.num_bs,
            got: alpha_row.len(),
        });
    }
    if k >= real.num_users {
        return Err(Error::DimensionMismatch {
            expected: real.num_users,
            got: k,
        });
    }
    let nt = real.num_antennas;
    let n = nt * real.num_bs;
    let mut h = CVector::zeros(n);
    let mut h_est = CVector::zeros(n);
    let mut err = CVector::zeros(n);
    for (b, &a) in alpha_row.iter().enumerate() {
        let link = real.link(k, b);
        if link.h.len() != nt {
            return Err(Error::DimensionMismatch {
                expected: nt,
                got: link.h.len(),
            });
        }
        let s = Complex64::from(a.sqrt());
        h.rows_mut(b * nt, nt).copy_from(&(&link.h * s));
        h_est.rows_mut(b * nt, nt).copy_from(&(&link.h_est * s));
        err.rows_mut(b * nt, nt).copy_from(&(&link.err * s));
    }
    Ok(NetworkChannel { h, h_est, err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::AntennaPattern;
    use crate::geometry::Point2;
    use crate::rng;
    use approx::assert_relative_eq;

    fn prop() -> Propagation {
        Propagation::new(NetworkLayout::default(), BsAntenna::default(), Pathloss::default())
    }

    #[test]
    fn pathloss_values() {
        let pl = Pathloss::default();
        assert_eq!(pl.gain(1.0), 1.0);
        // 150^-3.76 = exp(-3.76 ln 150)
        let expected = (-3.76 * 150f64.ln()).exp();
        assert_relative_eq!(pl.gain(150.0), expected, max_relative = 1e-14);
        assert_relative_eq!(pl.gain(150.0), 6.5737e-9, max_relative = 1e-3);
        for d in [1.0, 3.3, 47.0, 512.0] {
            assert_relative_eq!(pl.gain(2.0 * d) / pl.gain(d), 2f64.powf(-3.76), max_relative = 1e-12);
        }
    }

    #[test]
    fn pathloss_clamps_and_counts() {
        let pl = Pathloss::default();
        let before = clamped_distance_count();
        assert_eq!(pl.gain(0.25), 1.0);
        assert!(clamped_distance_count() > before);
    }

    #[test]
    fn boresight_peak_gain() {
        let p = prop();
        let l = &p.layout;
        // 100 m along BS 0's boresight; point the beam exactly at the user.
        let u = l.user_at(Point2::new(l.bs_positions[0].x - 100.0, 0.0)).unwrap();
        let theta = l.height_difference().atan2(100.0).to_degrees();
        let a = p.path_gain(&u, 0, theta).unwrap();
        let d3 = 100f64.hypot(l.height_difference());
        assert_relative_eq!(a, p.pathloss.gain(d3), max_relative = 1e-12);
    }

    #[test]
    fn floor_gain_composition() {
        let p = prop();
        let l = &p.layout;
        // Behind BS 0 horizontally (180 deg off boresight) and far off in elevation.
        let u = UserLocation {
            position: Point2::new(l.bs_positions[0].x + 10.0, 0.0),
            height: l.user_height,
            home_cell: 0,
        };
        let a = p.path_gain(&u, 0, 0.0).unwrap();
        let d3 = 10f64.hypot(l.height_difference());
        assert_relative_eq!(a, p.pathloss.gain(d3) * 10f64.powf(-4.5), max_relative = 1e-12);
    }

    #[test]
    fn edge_user_with_edge_tilt() {
        let p = prop();
        let u = p.layout.user_at(Point2::new(0.0, 0.0)).unwrap();
        let a = p.path_gain(&u, 0, 11.48).unwrap();
        let pl = p.pathloss.gain(150f64.hypot(30.5));
        assert!((a / pl - 1.0).abs() < 1e-3);
    }

    #[test]
    fn edge_snr_power() {
        let mut p = prop();
        let d = 150f64.hypot(30.5);
        assert_relative_eq!(d, 153.0695, max_relative = 1e-6);
        assert_relative_eq!(p.power_from_edge_snr(10.0), 10.0 * d.powf(3.76), max_relative = 1e-12);
        assert_relative_eq!(p.power_from_edge_snr(20.0) / p.power_from_edge_snr(10.0), 10.0, max_relative = 1e-12);
        // Reference-distance pathloss: P is the SNR itself.
        p.pathloss.exponent = 0.0;
        assert_relative_eq!(p.power_from_edge_snr(0.0), 1.0);
    }

    #[test]
    fn mmse_variance_cases() {
        let (k, s) = mmse_variances(3.0, 3, 1.0);
        assert_relative_eq!(s, 0.1, epsilon = 1e-15);
        assert_relative_eq!(k, 0.9, epsilon = 1e-15);
        assert_eq!(mmse_variances(0.0, 3, 1.0), (0.0, 1.0));
        let (k, s) = mmse_variances(1e30, 3, 1.0);
        assert!(s < 1e-29 && k == 1.0);
        let mut prev = 1.0;
        for a in [0.01, 0.1, 1.0, 10.0] {
            let s = mmse_variances(a, 3, 2.0).1;
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn fading_moments() {
        let mut r = rng::stream(3, &[1]);
        let n = 100_000;
        let real = draw_fading(&mut r, n, 1, 2);
        let var = real.links.iter().map(|l| l.h[0].norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        let cross = real.links.iter().map(|l| l.h[0] * l.h[1].conj()).sum::<Complex64>() / n as f64;
        // Each component of the sample cross-correlation has std 1/sqrt(2n).
        let band = 3.0 / (2.0 * n as f64).sqrt();
        assert!(cross.re.abs() < band && cross.im.abs() < band, "cross {cross}");
        let again = draw_fading(&mut rng::stream(3, &[1]), 4, 3, 8);
        let first = draw_fading(&mut rng::stream(3, &[1]), 4, 3, 8);
        assert_eq!(again, first);
    }

    #[test]
    fn decomposition_is_additive_and_has_right_variance() {
        let mut r = rng::stream(5, &[]);
        let alpha = 2.0;
        let (_, sigma2) = mmse_variances(alpha, 3, 1.5);
        let n = 40_000;
        let mut err_power = 0.0;
        for _ in 0..n {
            let l = decompose_mmse(alpha, 3, 1.5, 4, &mut r);
            assert_eq!(l.h, &l.h_est + &l.err);
            err_power += l.err.norm_squared() / 4.0;
        }
        let est = err_power / n as f64;
        assert!((est / sigma2 - 1.0).abs() < 0.02, "{est} vs {sigma2}");
    }

    #[test]
    fn network_channel_blocks() {
        let mut r = rng::stream(9, &[]);
        let table = PathGainTable::from_rows(&[vec![4.0, 0.0, 1.0]]).unwrap();
        let real = ChannelRealization::draw(&mut r, &table, 1.0, 2);
        let nc = assemble_network_channel(&real, 0, table.row(0)).unwrap();
        assert_eq!(nc.h.len(), 6);
        for i in 0..2 {
            assert_relative_eq!(nc.h[i].re, 2.0 * real.link(0, 0).h[i].re, epsilon = 1e-15);
            assert_eq!(nc.h[2 + i], Complex64::new(0.0, 0.0));
            assert_eq!(nc.h[4 + i], real.link(0, 2).h[i]);
        }
        assert_eq!(nc.h, &nc.h_est + &nc.err);
        assert!(assemble_network_channel(&real, 0, &[1.0, 1.0]).is_err());

        // Single BS.
        let t1 = PathGainTable::from_rows(&[vec![9.0]]).unwrap();
        let r1 = ChannelRealization::draw(&mut r, &t1, 1.0, 3);
        let n1 = assemble_network_channel(&r1, 0, t1.row(0)).unwrap();
        assert_eq!(n1.h, &r1.link(0, 0).h * Complex64::from(3.0));
    }

    #[test]
    fn network_channel_energy() {
        let mut r = rng::stream(10, &[]);
        let row = vec![0.5, 2.0, 1.0];
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let real = draw_fading(&mut r, 1, 3, 8);
            acc += assemble_network_channel(&real, 0, &row).unwrap().h.norm_squared();
        }
        let expected = 8.0 * row.iter().sum::<f64>();
        assert!((acc / n as f64 / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn table_rows() {
        let p = prop();
        let users = crate::geometry::sample_users(&p.layout, &[2, 2, 2], 1).unwrap();
        let t = PathGainTable::compute(&p, &users, &[10.0, 12.0, 14.0]).unwrap();
        assert_eq!(t.num_users(), 6);
        assert_relative_eq!(t.get(3, 1), p.path_gain(&users[3], 1, 12.0).unwrap());
        assert!(PathGainTable::compute(&p, &users, &[10.0]).is_err());
        let _ = AntennaPattern::default();
    }
}
