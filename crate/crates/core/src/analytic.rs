//! Gamma-approximation conditional ergodic rates.
//!
//! Every received power term is approximated by a Gamma random variable and
//! the rate is evaluated as
//!
//! ```text
//! R = E[log2(1 + S + I)] - E[log2(1 + I)]
//! ```
//!
//! with `S + I` and `I` each collapsed to a single Gamma by two-moment
//! matching.
//!
//! For network MIMO the non-identically distributed aggregate channel of a
//! user is replaced by an i.i.d. channel with a common per-antenna gain
//! `theta_a` and an *effective DoF per spatial dimension* `mu_a / (B N_t)`,
//! which scales the Gamma shapes of the desired and residual terms.

use statrs::function::gamma::ln_gamma;

use crate::channel::mmse_variances;
use crate::quadrature::Quadrature;
use crate::{Error, Result};

/// `Gamma(shape, scale)`; shape or scale zero means a point mass at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDist {
    shape: f64,
    scale: f64,
}

impl GammaDist {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::param("shape", format!("must be positive and finite, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param("scale", format!("must be positive and finite, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    /// The degenerate distribution concentrated at zero.
    pub const fn zero() -> Self {
        Self { shape: 0.0, scale: 0.0 }
    }

    /// Like [`GammaDist::new`], but a zero shape or scale yields
    /// [`GammaDist::zero`] instead of an error.
    pub fn new_or_zero(shape: f64, scale: f64) -> Result<Self> {
        if shape == 0.0 || scale == 0.0 {
            Ok(Self::zero())
        } else {
            Self::new(shape, scale)
        }
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.shape == 0.0 || self.scale == 0.0
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }
}

/// `b * X ~ Gamma(shape, b * scale)`.
pub fn gamma_scale(g: GammaDist, b: f64) -> Result<GammaDist> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::param("b", format!("scale factor must be positive, got {b}")));
    }
    Ok(GammaDist {
        shape: g.shape,
        scale: g.scale * b,
    })
}

/// Exact sum of independent Gammas sharing one scale.
pub fn gamma_sum_same_scale(gs: &[GammaDist]) -> Result<GammaDist> {
    let first = gs.first().ok_or(Error::Empty("gamma sum"))?;
    let scale = first.scale;
    for g in &gs[1..] {
        if (g.scale - scale).abs() > 1e-12 * scale.abs().max(g.scale.abs()) {
            return Err(Error::ScaleMismatch(scale, g.scale));
        }
    }
    Ok(GammaDist {
        shape: gs.iter().map(|g| g.shape).sum(),
        scale,
    })
}

/// The Gamma with the same mean and variance as the sum of independent
/// `gs`. Point masses at zero contribute nothing.
pub fn moment_match(gs: &[GammaDist]) -> Result<GammaDist> {
    if gs.is_empty() {
        return Err(Error::Empty("moment matching input"));
    }
    let (m1, m2) = gs
        .iter()
        .filter(|g| !g.is_zero())
        .fold((0.0, 0.0), |(m1, m2), g| (m1 + g.mean(), m2 + g.variance()));
    if m1 == 0.0 {
        return Ok(GammaDist::zero());
    }
    if !m1.is_finite() || !m2.is_finite() {
        return Err(Error::NonFinite("moment matching input"));
    }
    GammaDist::new(m1 * m1 / m2, m2 / m1)
}

/// `E[log2(1 + X)]` for `X ~ g`, by adaptive quadrature.
pub fn exp_log1p_gamma(g: GammaDist) -> Result<f64> {
    exp_log1p_gamma_with(g, &Quadrature::default())
}

pub fn exp_log1p_gamma_with(g: GammaDist, quad: &Quadrature) -> Result<f64> {
    if !g.shape.is_finite() || !g.scale.is_finite() {
        return Err(Error::NonFinite("Gamma parameters"));
    }
    if g.is_zero() {
        return Ok(0.0);
    }
    let (mu, theta) = (g.shape, g.scale);
    // Substituting x = theta e^v turns the Gamma density into the smooth,
    // unimodal weight exp(mu v - e^v) / Gamma(mu) peaked at v = ln mu.
    let lg = ln_gamma(mu);
    let f = |v: f64| {
        let t = v.exp();
        (theta * t).ln_1p() * (mu * v - t - lg).exp()
    };
    let peak = mu.ln();
    let width = 1.0 / mu.max(1.0).sqrt();
    let v_hi = (mu + 15.0 * mu.sqrt() + 60.0).ln();
    // Below v_lo, ln(1 + theta t) <= theta t bounds the remainder by
    // theta e^{(mu+1) v_lo} / ((mu+1) Gamma(mu)).
    let v_lo = ((1e-18f64).ln() + lg + (mu + 1.0).ln() - theta.ln()) / (mu + 1.0);
    let v_lo = v_lo.min(peak - 10.0 * width);
    let mut points: Vec<f64> = (-10..=6)
        .map(|j| peak + j as f64 * width)
        .filter(|&v| v > v_lo && v < v_hi)
        .collect();
    points.insert(0, v_lo);
    points.push(v_hi);
    let r = quad.integrate(f, &points);
    Ok(r.value / std::f64::consts::LN_2)
}

/// Equivalent i.i.d. channel parameters of one user's network MIMO channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EiidParams {
    /// Aggregate Gamma shape `mu_a = N_t (sum alpha)^2 / sum alpha^2`.
    pub shape: f64,
    /// Equivalent per-antenna path gain `theta_a = sum alpha^2 / sum alpha`.
    pub scale: f64,
    /// `mu_a / (B N_t)`, in `[1/B, 1]`.
    pub eff_dof: f64,
    pub kappa2: f64,
    pub sigma2: f64,
}

pub fn eiid_params(alpha_row: &[f64], num_antennas: usize, power: f64) -> Result<EiidParams> {
    if alpha_row.is_empty() {
        return Err(Error::Empty("path gain row"));
    }
    if alpha_row.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::param("alpha", "path gains must be finite and non-negative"));
    }
    let s1: f64 = alpha_row.iter().sum();
    let s2: f64 = alpha_row.iter().map(|a| a * a).sum();
    if !(s1 > 0.0) {
        return Err(Error::param("alpha", "at least one path gain must be positive"));
    }
    let nt = num_antennas as f64;
    let b = alpha_row.len() as f64;
    let shape = nt * s1 * s1 / s2;
    let scale = s2 / s1;
    let sigma2 = scale / (1.0 + b * power * scale);
    Ok(EiidParams {
        shape,
        scale,
        eff_dof: shape / (b * nt),
        kappa2: scale - sigma2,
        sigma2,
    })
}

fn check_group(num_users: usize, num_bs: usize, num_antennas: usize) -> Result<()> {
    if num_users == 0 {
        return Err(Error::Empty("co-scheduled user set"));
    }
    if num_users > num_bs * num_antennas {
        return Err(Error::TooManyUsers {
            users: num_users,
            dimension: num_bs * num_antennas,
        });
    }
    Ok(())
}

/// Desired-signal power of an NMT user with equal power `B P / |K|`.
pub fn nmt_signal_params(e: &EiidParams, num_users: usize, num_bs: usize, num_antennas: usize, power: f64) -> Result<GammaDist> {
    check_group(num_users, num_bs, num_antennas)?;
    let dims = (num_bs * num_antennas) as f64;
    let k = num_users as f64;
    GammaDist::new_or_zero(
        (dims - k + 1.0) * e.eff_dof,
        e.kappa2 * num_bs as f64 * power / k,
    )
}

/// Multiuser residual interference leaking through imperfect CSI in NMT.
pub fn nmt_interference_params(e: &EiidParams, num_users: usize, num_bs: usize, num_antennas: usize, power: f64) -> Result<GammaDist> {
    check_group(num_users, num_bs, num_antennas)?;
    let k = num_users as f64;
    GammaDist::new_or_zero((k - 1.0) * e.eff_dof, e.sigma2 * num_bs as f64 * power / k)
}

/// Approximate NMT conditional ergodic rate of a user with path gains
/// `alpha_row` among `num_users` co-scheduled users.
pub fn nmt_conditional_rate(alpha_row: &[f64], num_users: usize, num_antennas: usize, power: f64) -> Result<f64> {
    AnalyticModel::new(num_antennas, power).nmt_rate(alpha_row, num_users)
}

/// Approximate CST conditional ergodic rate of a user served by BS
/// `serving` while every BS `b` zero-forces `group_sizes[b]` users.
pub fn cst_conditional_rate(alpha_row: &[f64], group_sizes: &[usize], serving: usize, num_antennas: usize, power: f64) -> Result<f64> {
    AnalyticModel::new(num_antennas, power).cst_rate(alpha_row, group_sizes, serving)
}

/// Power leaked by `streams` unit-norm ZF beamformers of a group of
/// `group_size` users on `num_antennas` antennas onto an independent
/// `CN(0, scale I)` channel, as a moment-matched Gamma.
///
/// Each projection is `Gamma(1, scale)`, but ZF beams of one group are
/// correlated: `E|w_i^H w_j|^2 = 1 / (N_t - K + 2)`, which adds to the
/// variance of the sum.
pub fn zf_stream_sum(streams: usize, group_size: usize, num_antennas: usize, scale: f64) -> Result<GammaDist> {
    if streams == 0 || scale == 0.0 {
        return Ok(GammaDist::zero());
    }
    if streams > group_size || group_size > num_antennas {
        return Err(Error::TooManyUsers {
            users: group_size,
            dimension: num_antennas,
        });
    }
    let n = streams as f64;
    let cross = n * (n - 1.0) / (num_antennas - group_size + 2) as f64;
    let mean = n * scale;
    let var = (n + cross) * scale * scale;
    GammaDist::new(mean * mean / var, var / mean)
}

/// Fixed system constants for analytic rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticModel {
    pub num_antennas: usize,
    /// Per-BS transmit power `P` (noise-normalised).
    pub power: f64,
    pub quadrature: Quadrature,
}

impl AnalyticModel {
    pub fn new(num_antennas: usize, power: f64) -> Self {
        Self {
            num_antennas,
            power,
            quadrature: Quadrature::default(),
        }
    }

    fn difference_rate(&self, signal: GammaDist, interference: &[GammaDist]) -> Result<f64> {
        if signal.is_zero() {
            return Ok(0.0);
        }
        let mut all = Vec::with_capacity(interference.len() + 1);
        all.push(signal);
        all.extend_from_slice(interference);
        let total = moment_match(&all)?;
        let with_signal = exp_log1p_gamma_with(total, &self.quadrature)?;
        let interference_only = if interference.is_empty() {
            0.0
        } else {
            exp_log1p_gamma_with(moment_match(interference)?, &self.quadrature)?
        };
        // Moment matching can push the difference a hair below zero when the
        // signal is negligible against the interference.
        Ok((with_signal - interference_only).max(0.0))
    }

    pub fn nmt_rate(&self, alpha_row: &[f64], num_users: usize) -> Result<f64> {
        let b = alpha_row.len();
        let e = eiid_params(alpha_row, self.num_antennas, self.power)?;
        let s = nmt_signal_params(&e, num_users, b, self.num_antennas, self.power)?;
        let i = nmt_interference_params(&e, num_users, b, self.num_antennas, self.power)?;
        self.difference_rate(s, &[i])
    }

    /// The Gamma terms of a CST user: desired signal, intracell residual and
    /// one intercell term per interfering BS.
    ///
    /// Beamformers computed from i.i.d. estimated channels are isotropic, so
    /// each stream projects an independent channel onto one dimension and
    /// contributes `Gamma(1, .)`; streams of the same BS share their scale.
    pub fn cst_terms(&self, alpha_row: &[f64], group_sizes: &[usize], serving: usize) -> Result<(GammaDist, Vec<GammaDist>)> {
        let b_count = alpha_row.len();
        if group_sizes.len() != b_count {
            return Err(Error::DimensionMismatch {
                expected: b_count,
                got: group_sizes.len(),
            });
        }
        if serving >= b_count {
            return Err(Error::DimensionMismatch {
                expected: b_count,
                got: serving,
            });
        }
        if alpha_row.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::param("alpha", "path gains must be finite and non-negative"));
        }
        let nt = self.num_antennas;
        if let Some(&k) = group_sizes.iter().find(|&&k| k > nt) {
            return Err(Error::TooManyUsers { users: k, dimension: nt });
        }
        let kb = group_sizes[serving];
        if kb == 0 {
            return Err(Error::Empty("serving cell group"));
        }
        let p = self.power;
        let a = alpha_row[serving];
        let (kappa2, sigma2) = mmse_variances(a, b_count, p);
        let kbf = kb as f64;
        let signal = GammaDist::new_or_zero((nt - kb + 1) as f64, a * kappa2 * p / kbf)?;
        let mut interference = vec![zf_stream_sum(kb - 1, kb, nt, a * sigma2 * p / kbf)?];
        for (bp, (&ap, &kp)) in alpha_row.iter().zip(group_sizes).enumerate() {
            if bp == serving || kp == 0 {
                continue;
            }
            interference.push(zf_stream_sum(kp, kp, nt, ap * p / kp as f64)?);
        }
        Ok((signal, interference))
    }

    pub fn cst_rate(&self, alpha_row: &[f64], group_sizes: &[usize], serving: usize) -> Result<f64> {
        let (signal, interference) = self.cst_terms(alpha_row, group_sizes, serving)?;
        let interference: Vec<GammaDist> = interference.into_iter().filter(|g| !g.is_zero()).collect();
        self.difference_rate(signal, &interference)
    }
}
