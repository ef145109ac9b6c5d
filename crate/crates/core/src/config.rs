//! Run configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys are errors. Every key has a default, so an empty file is a
//! valid configuration.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::analytic::AnalyticModel;
use crate::antenna::{AntennaPattern, BsAntenna};
use crate::channel::{Pathloss, Propagation};
use crate::geometry::NetworkLayout;
use crate::quadrature::Quadrature;
use crate::scheduler::{SchedulerConfig, SystemVariant};
use crate::tilt::{RegionSearch, TiltRange};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cell_radius: f64,
    pub bs_height: f64,
    pub user_height: f64,
    pub pattern: AntennaPattern,
    pub pathloss: Pathloss,
    pub num_antennas: usize,
    pub edge_snr_db: f64,
    pub quadrature_tol: f64,
    pub seed: u64,
    pub output_dir: PathBuf,

    /// The rate validation uses an isotropic antenna unless disabled.
    pub validate_isotropic: bool,
    pub validate_tilt: f64,
    pub validate_users_per_cell: usize,
    pub validate_points: usize,
    pub validate_fading: usize,
    pub validate_drops: usize,

    pub analysis_users_per_cell: usize,
    pub grid_resolution: f64,
    pub tilts: TiltRange,
    pub region: RegionSearch,

    pub system_users_per_cell: usize,
    pub system_drops: usize,
    pub pf_window: f64,
    pub nmt_margin: usize,
    pub min_slots: usize,
    pub max_slots: usize,
    pub convergence_tol: f64,
    pub cst_edge_tilt: f64,
    pub cst_average_tilt: f64,
    pub nmt_edge_tilt: f64,
    pub nmt_average_tilt: f64,
    /// Interior radius of the adaptive scheme as a fraction of the cell
    /// radius.
    pub am_d_int: f64,
    pub am_beta_cst: f64,
    pub am_beta_nmt: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cell_radius: 150.0,
            bs_height: 32.0,
            user_height: 1.5,
            pattern: AntennaPattern::default(),
            pathloss: Pathloss::default(),
            num_antennas: 8,
            edge_snr_db: 10.0,
            quadrature_tol: Quadrature::default().abs_tol,
            seed: 1,
            output_dir: PathBuf::from("out"),
            validate_isotropic: true,
            validate_tilt: 0.0,
            validate_users_per_cell: 6,
            validate_points: 15,
            validate_fading: 1000,
            validate_drops: 100,
            analysis_users_per_cell: 6,
            grid_resolution: 3.0,
            tilts: TiltRange::default(),
            region: RegionSearch::default(),
            system_users_per_cell: 8,
            system_drops: 200,
            pf_window: 100.0,
            nmt_margin: 6,
            min_slots: 500,
            max_slots: 5000,
            convergence_tol: 0.005,
            cst_edge_tilt: 16.0,
            cst_average_tilt: 18.0,
            nmt_edge_tilt: 10.0,
            nmt_average_tilt: 16.0,
            am_d_int: 0.6,
            am_beta_cst: 21.0,
            am_beta_nmt: 14.0,
        }
    }
}

fn parse<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("cannot parse `{value}` for `{key}`"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config {
            line,
            reason: format!("expected true/false for `{key}`, got `{value}`"),
        }),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Parse configuration text on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            c.set(line, key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "cell_radius" => self.cell_radius = parse(line, key, v)?,
            "bs_height" => self.bs_height = parse(line, key, v)?,
            "user_height" => self.user_height = parse(line, key, v)?,
            "phi_3db" => self.pattern.phi_3db = parse(line, key, v)?,
            "theta_3db" => self.pattern.theta_3db = parse(line, key, v)?,
            "sll_az" => self.pattern.sll_az = parse(line, key, v)?,
            "sll_el" => self.pattern.sll_el = parse(line, key, v)?,
            "pathloss_exponent" => self.pathloss.exponent = parse(line, key, v)?,
            "reference_distance" => self.pathloss.reference_distance = parse(line, key, v)?,
            "num_antennas" => self.num_antennas = parse(line, key, v)?,
            "edge_snr_db" => self.edge_snr_db = parse(line, key, v)?,
            "quadrature_tol" => self.quadrature_tol = parse(line, key, v)?,
            "seed" => self.seed = parse(line, key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "validate_isotropic" => self.validate_isotropic = parse_bool(line, key, v)?,
            "validate_tilt" => self.validate_tilt = parse(line, key, v)?,
            "validate_users_per_cell" => self.validate_users_per_cell = parse(line, key, v)?,
            "validate_points" => self.validate_points = parse(line, key, v)?,
            "validate_fading" => self.validate_fading = parse(line, key, v)?,
            "validate_drops" => self.validate_drops = parse(line, key, v)?,
            "analysis_users_per_cell" => self.analysis_users_per_cell = parse(line, key, v)?,
            "grid_resolution" => self.grid_resolution = parse(line, key, v)?,
            "tilt_start" => self.tilts.start = parse(line, key, v)?,
            "tilt_end" => self.tilts.end = parse(line, key, v)?,
            "tilt_step" => self.tilts.step = parse(line, key, v)?,
            "d_int_start" => self.region.d_int_start = parse(line, key, v)?,
            "d_int_end" => self.region.d_int_end = parse(line, key, v)?,
            "d_int_step" => self.region.d_int_step = parse(line, key, v)?,
            "system_users_per_cell" => self.system_users_per_cell = parse(line, key, v)?,
            "system_drops" => self.system_drops = parse(line, key, v)?,
            "pf_window" => self.pf_window = parse(line, key, v)?,
            "nmt_margin" => self.nmt_margin = parse(line, key, v)?,
            "min_slots" => self.min_slots = parse(line, key, v)?,
            "max_slots" => self.max_slots = parse(line, key, v)?,
            "convergence_tol" => self.convergence_tol = parse(line, key, v)?,
            "cst_edge_tilt" => self.cst_edge_tilt = parse(line, key, v)?,
            "cst_average_tilt" => self.cst_average_tilt = parse(line, key, v)?,
            "nmt_edge_tilt" => self.nmt_edge_tilt = parse(line, key, v)?,
            "nmt_average_tilt" => self.nmt_average_tilt = parse(line, key, v)?,
            "am_d_int" => self.am_d_int = parse(line, key, v)?,
            "am_beta_cst" => self.am_beta_cst = parse(line, key, v)?,
            "am_beta_nmt" => self.am_beta_nmt = parse(line, key, v)?,
            _ => {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()?;
        if self.num_antennas == 0 {
            return Err(Error::param("num_antennas", "must be at least 1"));
        }
        for (name, k) in [
            ("validate_users_per_cell", self.validate_users_per_cell),
            ("analysis_users_per_cell", self.analysis_users_per_cell),
            ("system_users_per_cell", self.system_users_per_cell),
        ] {
            if k == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
            if name != "system_users_per_cell" && k > self.num_antennas {
                // Equal-power ZF needs a spatial dimension per co-scheduled user.
                return Err(Error::TooManyUsers {
                    users: k,
                    dimension: self.num_antennas,
                });
            }
        }
        if self.validate_points == 0 || self.validate_fading == 0 || self.validate_drops == 0 || self.system_drops == 0 {
            return Err(Error::param("counts", "sample, fading and drop counts must be at least 1"));
        }
        if !(self.grid_resolution > 0.0) || self.grid_resolution > self.cell_radius {
            return Err(Error::DegenerateGrid {
                resolution: self.grid_resolution,
                radius: self.cell_radius,
            });
        }
        if !(self.quadrature_tol > 0.0) {
            return Err(Error::param("quadrature_tol", "must be positive"));
        }
        if self.min_slots > self.max_slots || self.max_slots == 0 {
            return Err(Error::param("max_slots", "must be positive and at least min_slots"));
        }
        if !(self.pattern.phi_3db > 0.0 && self.pattern.theta_3db > 0.0) {
            return Err(Error::param("hpbw", "beamwidths must be positive"));
        }
        if !(self.pathloss.reference_distance > 0.0) {
            return Err(Error::param("reference_distance", "must be positive"));
        }
        self.tilts.values()?;
        self.region.d_int_values(self.cell_radius)?;
        Ok(())
    }

    pub fn layout(&self) -> Result<NetworkLayout> {
        NetworkLayout::three_cell(self.cell_radius, self.bs_height, self.user_height)
    }

    pub fn propagation(&self, antenna: BsAntenna) -> Result<Propagation> {
        Ok(Propagation::new(self.layout()?, antenna, self.pathloss))
    }

    pub fn directional(&self) -> Result<Propagation> {
        self.propagation(BsAntenna::Directional(self.pattern))
    }

    /// Per-BS transmit power for the configured cell-edge SNR.
    pub fn power(&self) -> Result<f64> {
        Ok(self.directional()?.power_from_edge_snr(self.edge_snr_db))
    }

    pub fn analytic_model(&self) -> Result<AnalyticModel> {
        let mut m = AnalyticModel::new(self.num_antennas, self.power()?);
        m.quadrature.abs_tol = self.quadrature_tol;
        Ok(m)
    }

    pub fn scheduler(&self) -> Result<SchedulerConfig> {
        let mut s = SchedulerConfig::new(self.directional()?, self.num_antennas, self.power()?);
        s.users_per_cell = self.system_users_per_cell;
        s.pf_window = self.pf_window;
        s.nmt_margin = self.nmt_margin;
        s.min_slots = self.min_slots;
        s.max_slots = self.max_slots;
        s.convergence_tol = self.convergence_tol;
        Ok(s)
    }

    pub fn variants(&self) -> Vec<SystemVariant> {
        vec![
            SystemVariant::cst("Uncoord-CST-E", self.cst_edge_tilt),
            SystemVariant::cst("Uncoord-CST-A", self.cst_average_tilt),
            SystemVariant::nmt("NMT-E", self.nmt_edge_tilt),
            SystemVariant::nmt("NMT-A", self.nmt_average_tilt),
            SystemVariant::adaptive("AM-3D-BF", self.am_d_int * self.cell_radius, self.am_beta_cst, self.am_beta_nmt),
        ]
    }
}
