//! Throughput-vs-tilt analysis over a grid of user locations, and the joint
//! search for region-specific parameters.

use rayon::prelude::*;

use crate::analytic::AnalyticModel;
use crate::channel::Propagation;
use crate::geometry::{region_of, Region, UserLocation};
use crate::{Error, Result, TransmissionMode};

pub const EDGE_PERCENTILE: f64 = 0.05;
pub const AVERAGE_PERCENTILE: f64 = 0.50;
pub const PEAK_PERCENTILE: f64 = 0.95;

/// Sorted per-location (or per-user) throughput samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputCdf {
    samples: Vec<f64>,
}

impl ThroughputCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("throughput samples"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("throughput samples"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Nearest-rank percentile: the `ceil(p n)`-th smallest sample.
    pub fn percentile(&self, p: f64) -> f64 {
        self.samples[nearest_rank(p, self.samples.len())]
    }

    pub fn edge(&self) -> f64 {
        self.percentile(EDGE_PERCENTILE)
    }

    pub fn average(&self) -> f64 {
        self.percentile(AVERAGE_PERCENTILE)
    }

    pub fn peak(&self) -> f64 {
        self.percentile(PEAK_PERCENTILE)
    }
}

/// Zero-based index of the nearest-rank `p` percentile among `n` samples.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let rank = (p * n as f64).ceil() as usize;
    rank.clamp(1, n) - 1
}

/// Edge, average and peak throughput at one tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltPoint {
    pub tilt: f64,
    pub edge: f64,
    pub average: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltSweep {
    pub mode: TransmissionMode,
    pub points: Vec<TiltPoint>,
}

impl TiltSweep {
    fn argmax_by(&self, f: impl Fn(&TiltPoint) -> f64) -> f64 {
        // First maximum wins so ties resolve to the smaller tilt.
        let mut best = &self.points[0];
        for p in &self.points[1..] {
            if f(p) > f(best) {
                best = p;
            }
        }
        best.tilt
    }

    pub fn best_edge_tilt(&self) -> f64 {
        self.argmax_by(|p| p.edge)
    }

    pub fn best_average_tilt(&self) -> f64 {
        self.argmax_by(|p| p.average)
    }

    pub fn best_peak_tilt(&self) -> f64 {
        self.argmax_by(|p| p.peak)
    }

    pub fn at(&self, tilt: f64) -> Option<&TiltPoint> {
        self.points.iter().find(|p| (p.tilt - tilt).abs() < 1e-9)
    }
}

/// Indices of strict interior local maxima of `values` (plateaus count once,
/// at their left end).
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Grid-based throughput analysis with analytic conditional rates.
///
/// Every cell is assumed to co-schedule `users_per_cell` users; CST is
/// uncoordinated, so all other BSs interfere at full power.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputAnalysis {
    pub propagation: Propagation,
    pub model: AnalyticModel,
    pub users_per_cell: usize,
}

impl ThroughputAnalysis {
    pub fn new(propagation: Propagation, model: AnalyticModel, users_per_cell: usize) -> Result<Self> {
        if users_per_cell == 0 {
            return Err(Error::param("users_per_cell", "must be at least 1"));
        }
        if users_per_cell > model.num_antennas {
            return Err(Error::TooManyUsers {
                users: users_per_cell,
                dimension: model.num_antennas,
            });
        }
        Ok(Self {
            propagation,
            model,
            users_per_cell,
        })
    }

    /// Conditional rate of a user at `user` when every BS uses `tilt`.
    pub fn location_rate(&self, mode: TransmissionMode, user: &UserLocation, tilt: f64) -> Result<f64> {
        let row = self.propagation.path_gain_row_common(user, tilt)?;
        let b = row.len();
        match mode {
            TransmissionMode::Cst => self
                .model
                .cst_rate(&row, &vec![self.users_per_cell; b], user.home_cell),
            TransmissionMode::Nmt => self.model.nmt_rate(&row, self.users_per_cell * b),
        }
    }

    /// Rates of every grid point, in grid order.
    pub fn location_rates(&self, mode: TransmissionMode, tilt: f64, grid: &[UserLocation]) -> Result<Vec<f64>> {
        if grid.is_empty() {
            return Err(Error::Empty("location grid"));
        }
        grid.par_iter()
            .map(|u| self.location_rate(mode, u, tilt))
            .collect()
    }

    pub fn throughput_cdf(&self, mode: TransmissionMode, tilt: f64, grid: &[UserLocation]) -> Result<ThroughputCdf> {
        ThroughputCdf::from_samples(self.location_rates(mode, tilt, grid)?)
    }

    pub fn sweep_tilts(&self, mode: TransmissionMode, tilts: &TiltRange, grid: &[UserLocation]) -> Result<TiltSweep> {
        let points = tilts
            .values()?
            .into_iter()
            .map(|tilt| {
                let cdf = self.throughput_cdf(mode, tilt, grid)?;
                Ok(TiltPoint {
                    tilt,
                    edge: cdf.edge(),
                    average: cdf.average(),
                    peak: cdf.peak(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TiltSweep { mode, points })
    }

    /// Exhaustive search of `(d_int, beta_cst, beta_nmt)` maximising the
    /// median throughput when interior points get CST rates and edge points
    /// NMT rates.
    pub fn optimize_region_params(&self, search: &RegionSearch, grid: &[UserLocation]) -> Result<RegionSearchResult> {
        if grid.is_empty() {
            return Err(Error::Empty("location grid"));
        }
        let layout = &self.propagation.layout;
        let radius = layout.cell_radius;
        let dints = search.d_int_values(radius)?;
        let tilts = search.tilts.values()?;
        let cst_rates = tilts
            .iter()
            .map(|&t| self.location_rates(TransmissionMode::Cst, t, grid))
            .collect::<Result<Vec<_>>>()?;
        let nmt_rates = tilts
            .iter()
            .map(|&t| self.location_rates(TransmissionMode::Nmt, t, grid))
            .collect::<Result<Vec<_>>>()?;
        let dh = layout.height_difference();

        let mut surface = Vec::new();
        for &d_int in &dints {
            let interior: Vec<bool> = grid
                .iter()
                .map(|u| matches!(region_of(u, layout, d_int), Region::Interior(_)))
                .collect();
            let split = (dh / d_int).atan().to_degrees();
            let pairs: Vec<(usize, usize)> = tilts
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= split)
                .flat_map(|(i, _)| {
                    tilts
                        .iter()
                        .enumerate()
                        .filter(|(_, &t)| t <= split)
                        .map(move |(j, _)| (i, j))
                })
                .collect();
            let rows: Vec<RegionPoint> = pairs
                .par_iter()
                .map(|&(i, j)| {
                    let mut mixed: Vec<f64> = interior
                        .iter()
                        .enumerate()
                        .map(|(k, &inside)| if inside { cst_rates[i][k] } else { nmt_rates[j][k] })
                        .collect();
                    let idx = nearest_rank(AVERAGE_PERCENTILE, mixed.len());
                    let (_, median, _) = mixed.select_nth_unstable_by(idx, f64::total_cmp);
                    RegionPoint {
                        params: RegionParams {
                            d_int,
                            beta_cst: tilts[i],
                            beta_nmt: tilts[j],
                        },
                        average: *median,
                    }
                })
                .collect();
            surface.extend(rows);
        }
        let best = surface
            .iter()
            .copied()
            .reduce(|a, b| if b.average > a.average { b } else { a })
            .ok_or(Error::Empty("region search space"))?;
        Ok(RegionSearchResult { best, surface })
    }
}

/// Inclusive tilt range in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for TiltRange {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: 90.0,
            step: 1.0,
        }
    }
}

impl TiltRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step >= 1.0) || !self.step.is_finite() {
            return Err(Error::param("tilt_step", format!("must be at least 1 degree, got {}", self.step)));
        }
        if !(self.end >= self.start) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::param("tilt range", format!("empty range [{}, {}]", self.start, self.end)));
        }
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Interior radius, CST tilt and NMT tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    pub d_int: f64,
    pub beta_cst: f64,
    pub beta_nmt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    pub params: RegionParams,
    /// Median throughput of the mixed CST/NMT distribution.
    pub average: f64,
}

/// Search space of the region optimiser; `d_int` bounds are fractions of the
/// cell radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSearch {
    pub d_int_start: f64,
    pub d_int_end: f64,
    pub d_int_step: f64,
    pub tilts: TiltRange,
}

impl Default for RegionSearch {
    fn default() -> Self {
        Self {
            d_int_start: 0.15,
            d_int_end: 0.95,
            d_int_step: 0.05,
            tilts: TiltRange::default(),
        }
    }
}

impl RegionSearch {
    pub fn d_int_values(&self, radius: f64) -> Result<Vec<f64>> {
        let ok = self.d_int_start > 0.0 && self.d_int_end <= 1.0 && self.d_int_end >= self.d_int_start && self.d_int_step > 0.0;
        if !ok {
            return Err(Error::param(
                "d_int range",
                format!("need 0 < start <= end <= 1 and step > 0, got [{}, {}] step {}", self.d_int_start, self.d_int_end, self.d_int_step),
            ));
        }
        let n = ((self.d_int_end - self.d_int_start) / self.d_int_step + 1e-9).floor() as usize;
        Ok((0..=n)
            .map(|i| (self.d_int_start + i as f64 * self.d_int_step) * radius)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSearchResult {
    pub best: RegionPoint,
    pub surface: Vec<RegionPoint>,
}

impl RegionSearchResult {
    /// Best point for each `d_int`, in increasing `d_int`.
    pub fn best_by_d_int(&self) -> Vec<RegionPoint> {
        let mut out: Vec<RegionPoint> = Vec::new();
        for p in &self.surface {
            match out.last_mut() {
                Some(last) if (last.params.d_int - p.params.d_int).abs() < 1e-9 => {
                    if p.average > last.average {
                        *last = *p;
                    }
                }
                _ => out.push(*p),
            }
        }
        out
    }
}
