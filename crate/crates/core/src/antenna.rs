//! 3D directional BS antenna pattern with an adjustable electrical tilt.
//!
//! All `N_t` antennas of a BS share one pattern and one tilt, so the gain is
//! a property of the (user, BS) pair only.

use crate::geometry::wrap_degrees;

/// Horizontal/vertical half-power beamwidths and side-lobe levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub phi_3db: f64,
    pub theta_3db: f64,
    pub sll_az: f64,
    pub sll_el: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self {
            phi_3db: 65.0,
            theta_3db: 6.0,
            sll_az: 25.0,
            sll_el: 20.0,
        }
    }
}

impl AntennaPattern {
    /// Gain in dBi for a user at azimuth `phi` and elevation `theta`, seen by
    /// a BS with boresight `psi` and tilt `beta`. All angles in degrees.
    ///
    /// Peak gain is 0 dBi; each plane's attenuation saturates at its
    /// side-lobe level.
    pub fn gain_dbi(&self, phi: f64, psi: f64, theta: f64, beta: f64) -> f64 {
        let daz = wrap_degrees(phi - psi) / self.phi_3db;
        let del = (theta - beta) / self.theta_3db;
        let horizontal = (12.0 * daz * daz).min(self.sll_az);
        let vertical = (12.0 * del * del).min(self.sll_el);
        -(horizontal + vertical)
    }

    pub fn gain_linear(&self, phi: f64, psi: f64, theta: f64, beta: f64) -> f64 {
        db_to_linear(self.gain_dbi(phi, psi, theta, beta))
    }
}

/// Which radiation model the BSs use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BsAntenna {
    /// Unit gain in every direction; tilt has no effect.
    Isotropic,
    Directional(AntennaPattern),
}

impl Default for BsAntenna {
    fn default() -> Self {
        BsAntenna::Directional(AntennaPattern::default())
    }
}

impl BsAntenna {
    pub fn gain_linear(&self, phi: f64, psi: f64, theta: f64, beta: f64) -> f64 {
        match self {
            BsAntenna::Isotropic => 1.0,
            BsAntenna::Directional(p) => p.gain_linear(phi, psi, theta, beta),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn peak_and_half_power() {
        let p = AntennaPattern::default();
        assert_eq!(p.gain_dbi(40.0, 40.0, 12.0, 12.0), 0.0);
        assert_relative_eq!(p.gain_dbi(32.5, 0.0, 5.0, 5.0), -3.0, epsilon = 1e-12);
        assert_relative_eq!(p.gain_dbi(0.0, 0.0, 8.0, 5.0), -3.0, epsilon = 1e-12);
        assert_relative_eq!(p.gain_dbi(120.0, 0.0, 40.0, 10.0), -45.0, epsilon = 1e-12);
    }

    #[test]
    fn azimuth_wraps() {
        let p = AntennaPattern::default();
        assert_relative_eq!(p.gain_dbi(350.0, 10.0, 0.0, 0.0), p.gain_dbi(-20.0, 0.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(p.gain_dbi(-170.0, 170.0, 0.0, 0.0), p.gain_dbi(20.0, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn linear_values() {
        assert_relative_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(db_to_linear(-3.0), 0.501_187_233_627_272_2, epsilon = 1e-15);
        assert_relative_eq!(db_to_linear(-45.0), 3.162_277_660_168_379e-5, epsilon = 1e-18);
        assert_eq!(BsAntenna::Isotropic.gain_linear(1.0, 2.0, 3.0, 4.0), 1.0);
    }

    proptest! {
        #[test]
        fn gain_bounded_and_symmetric(daz in -180.0..180.0f64, del in -90.0..90.0f64, psi in -180.0..180.0f64, beta in 0.0..90.0f64) {
            let p = AntennaPattern::default();
            let g = p.gain_dbi(psi + daz, psi, beta + del, beta);
            prop_assert!((-45.0..=0.0).contains(&g));
            let mirrored = p.gain_dbi(psi - daz, psi, beta - del, beta);
            prop_assert!((g - mirrored).abs() < 1e-9);
            let lin = p.gain_linear(psi + daz, psi, beta + del, beta);
            prop_assert!(lin > 0.0 && lin <= 1.0);
        }

        #[test]
        fn gain_monotone_in_offsets(a in 0.0..179.0f64, da in 0.0..1.0f64, e in 0.0..89.0f64, de in 0.0..1.0f64) {
            let p = AntennaPattern::default();
            prop_assert!(p.gain_dbi(a + da, 0.0, 0.0, 0.0) <= p.gain_dbi(a, 0.0, 0.0, 0.0) + 1e-12);
            prop_assert!(p.gain_dbi(0.0, 0.0, e + de, 0.0) <= p.gain_dbi(0.0, 0.0, e, 0.0) + 1e-12);
        }
    }
}
