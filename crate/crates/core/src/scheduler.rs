//! Drop-based system simulation with proportional-fair scheduling and
//! region-specific transmission.
//!
//! Each drop places users in every cell, splits them into interior (CST)
//! and edge (NMT) users, shares time slots between the two regions in
//! proportion to their user counts and runs a proportional-fair scheduler
//! inside each region. Per-user throughput is the average rate over all
//! slots of the drop.

use rayon::prelude::*;

use crate::channel::{ChannelRealization, PathGainTable, Propagation};
use crate::geometry::{sample_users, Region, UserLocation};
use crate::montecarlo::{network_channels, sinr_cst, sinr_nmt, CellGroup};
use crate::precoding::{columns_to_matrix, BeamformerSet};
use crate::rng::{self, tag};
use crate::tilt::ThroughputCdf;
use crate::{Error, Result, TransmissionMode};

/// Slot shares `(nu_cst, nu_nmt)` under proportional fairness: each region
/// gets the fraction of time equal to its fraction of users.
pub fn activity_factors(num_cst: usize, num_nmt: usize) -> Result<(f64, f64)> {
    let total = num_cst + num_nmt;
    if total == 0 {
        return Err(Error::Empty("user set"));
    }
    let t = total as f64;
    Ok((num_cst as f64 / t, num_nmt as f64 / t))
}

/// Whether slot `slot` belongs to the interior region when `num_cst` of
/// every `num_cst + num_nmt` slots do. Spreads the interior slots evenly and
/// gives exactly `num_cst` of them in each period.
pub fn is_cst_slot(slot: usize, num_cst: usize, num_nmt: usize) -> bool {
    let period = num_cst + num_nmt;
    if period == 0 {
        return false;
    }
    let i = slot % period;
    (i + 1) * num_cst / period > i * num_cst / period
}

/// Exponentially averaged throughput per user.
#[derive(Debug, Clone, PartialEq)]
pub struct PfState {
    pub averages: Vec<f64>,
    pub window: f64,
}

impl PfState {
    pub const INITIAL_AVERAGE: f64 = 1e-6;

    pub fn new(num_users: usize, window: f64) -> Result<Self> {
        if !(window >= 1.0) {
            return Err(Error::param("pf_window", format!("must be at least 1 slot, got {window}")));
        }
        Ok(Self {
            averages: vec![Self::INITIAL_AVERAGE; num_users],
            window,
        })
    }

    /// Fold one slot into the averages of `users`; `rates[k]` is user `k`'s
    /// delivered rate (zero if not scheduled).
    pub fn update(&mut self, users: &[usize], rates: &[f64]) {
        let a = 1.0 / self.window;
        for &k in users {
            self.averages[k] = (1.0 - a) * self.averages[k] + a * rates[k];
        }
    }
}

/// Up to `capacity` users of `eligible` with the largest ratio of
/// instantaneous rate to average throughput; ties go to the lower index.
/// The result is sorted by user index.
pub fn pf_select(eligible: &[usize], instantaneous: &[f64], state: &PfState, capacity: usize) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = eligible
        .iter()
        .map(|&k| (instantaneous[k] / state.averages[k], k))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = ranked.into_iter().take(capacity).map(|(_, k)| k).collect();
    chosen.sort_unstable();
    chosen
}

/// Transmission strategy of a simulated system.
///
/// Users within `d_int` of their home BS are interior users served by CST
/// at `beta_cst`; the others are edge users served jointly at `beta_nmt`.
/// `d_int = 0` gives pure NMT and `d_int = inf` pure CST.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemVariant {
    pub name: String,
    pub d_int: f64,
    pub beta_cst: f64,
    pub beta_nmt: f64,
}

impl SystemVariant {
    pub fn cst(name: &str, tilt: f64) -> Self {
        Self {
            name: name.to_string(),
            d_int: f64::INFINITY,
            beta_cst: tilt,
            beta_nmt: tilt,
        }
    }

    pub fn nmt(name: &str, tilt: f64) -> Self {
        Self {
            name: name.to_string(),
            d_int: 0.0,
            beta_cst: tilt,
            beta_nmt: tilt,
        }
    }

    pub fn adaptive(name: &str, d_int: f64, beta_cst: f64, beta_nmt: f64) -> Self {
        Self {
            name: name.to_string(),
            d_int,
            beta_cst,
            beta_nmt,
        }
    }

    pub fn region_of(&self, user: &UserLocation, prop: &Propagation) -> Region {
        let b = user.home_cell;
        let d = user.position.distance(prop.layout.bs_positions[b]);
        if self.d_int > 0.0 && d <= self.d_int {
            Region::Interior(b)
        } else {
            Region::Edge
        }
    }
}

/// Scheduler constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub propagation: Propagation,
    pub num_antennas: usize,
    pub power: f64,
    pub users_per_cell: usize,
    pub pf_window: f64,
    /// Spatial dimensions left unused in NMT slots.
    pub nmt_margin: usize,
    pub min_slots: usize,
    pub max_slots: usize,
    /// Relative change of every user's throughput over the last
    /// `convergence_fraction` of slots below which a drop stops.
    pub convergence_tol: f64,
    pub convergence_fraction: f64,
    pub check_every: usize,
}

impl SchedulerConfig {
    pub fn new(propagation: Propagation, num_antennas: usize, power: f64) -> Self {
        Self {
            propagation,
            num_antennas,
            power,
            users_per_cell: 8,
            pf_window: 100.0,
            nmt_margin: 6,
            min_slots: 500,
            max_slots: 5000,
            convergence_tol: 0.005,
            convergence_fraction: 0.2,
            check_every: 100,
        }
    }

    fn nmt_capacity(&self) -> usize {
        (self.propagation.num_bs() * self.num_antennas).saturating_sub(self.nmt_margin).max(1)
    }
}

/// Outcome of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub users: Vec<UserLocation>,
    pub regions: Vec<Region>,
    /// Average rate over all slots of the drop, per user.
    pub throughputs: Vec<f64>,
    pub nu_cst: f64,
    pub nu_nmt: f64,
    pub slots: usize,
    pub cst_slots: usize,
}

struct SlotOutcome {
    rates: Vec<f64>,
    eligible: Vec<usize>,
}

fn cst_slot(cfg: &SchedulerConfig, table: &PathGainTable, real: &ChannelRealization, cells: &[Vec<usize>], pf: &PfState) -> Result<SlotOutcome> {
    let n = table.num_users();
    let mut inst = vec![0.0; n];
    for (b, users) in cells.iter().enumerate() {
        for &k in users {
            let g = table.get(k, b) * real.link(k, b).h_est.norm_squared();
            inst[k] = (1.0 + cfg.power * g).log2();
        }
    }
    let mut groups = Vec::with_capacity(cells.len());
    for (b, users) in cells.iter().enumerate() {
        let chosen = pf_select(users, &inst, pf, cfg.num_antennas.min(users.len()));
        let beams = if chosen.is_empty() {
            BeamformerSet {
                mode: TransmissionMode::Cst,
                w: columns_to_matrix(&[])?,
                powers: Vec::new(),
            }
        } else {
            // Scale by the path gain so waterfilling sees the received
            // stream gains; the ZF directions are unaffected.
            let cols: Vec<_> = chosen
                .iter()
                .map(|&k| &real.link(k, b).h_est * num_complex::Complex64::from(table.get(k, b).sqrt()))
                .collect();
            let refs: Vec<_> = cols.iter().collect();
            BeamformerSet::zf_waterfilling(TransmissionMode::Cst, &columns_to_matrix(&refs)?, cfg.power)?
        };
        groups.push(CellGroup { users: chosen, beams });
    }
    let mut rates = vec![0.0; n];
    for (b, g) in groups.iter().enumerate() {
        for &k in &g.users {
            rates[k] = (1.0 + sinr_cst(real, table, &groups, b, k)?).log2();
        }
    }
    Ok(SlotOutcome {
        rates,
        eligible: cells.concat(),
    })
}

fn nmt_slot(cfg: &SchedulerConfig, table: &PathGainTable, real: &ChannelRealization, edge: &[usize], pf: &PfState) -> Result<SlotOutcome> {
    let n = table.num_users();
    let mut rates = vec![0.0; n];
    if edge.is_empty() {
        return Ok(SlotOutcome { rates, eligible: Vec::new() });
    }
    let budget = table.num_bs() as f64 * cfg.power;
    let channels = network_channels(real, table)?;
    let mut inst = vec![0.0; n];
    for &k in edge {
        inst[k] = (1.0 + budget * channels[k].h_est.norm_squared()).log2();
    }
    let chosen = pf_select(edge, &inst, pf, cfg.nmt_capacity().min(edge.len()));
    let chosen_channels: Vec<_> = chosen.iter().map(|&k| channels[k].clone()).collect();
    let cols: Vec<_> = chosen_channels.iter().map(|c| &c.h_est).collect();
    let beams = BeamformerSet::zf_waterfilling(TransmissionMode::Nmt, &columns_to_matrix(&cols)?, budget)?;
    for (i, &k) in chosen.iter().enumerate() {
        rates[k] = (1.0 + sinr_nmt(&chosen_channels, &beams, i)).log2();
    }
    Ok(SlotOutcome {
        rates,
        eligible: edge.to_vec(),
    })
}

/// Whether every user's running throughput moved by at most `tol`
/// (relative) between `earlier` and `now` cumulative sums.
fn converged(earlier: &[f64], earlier_slots: usize, now: &[f64], now_slots: usize, tol: f64) -> bool {
    earlier.iter().zip(now).all(|(&e, &c)| {
        let t_now = c / now_slots as f64;
        let t_then = e / earlier_slots as f64;
        (t_now - t_then).abs() <= tol * t_now.abs().max(1e-12) || (t_now == 0.0 && t_then == 0.0)
    })
}

/// Run drop `drop` of `variant`. Fading in slot `s` is keyed by
/// `(seed, drop, s)` only, so variants that pick the same tilt and mode for
/// a slot see the same channel.
pub fn simulate_drop(cfg: &SchedulerConfig, variant: &SystemVariant, seed: u64, drop: usize) -> Result<DropResult> {
    let prop = &cfg.propagation;
    let b_count = prop.num_bs();
    if cfg.users_per_cell == 0 {
        return Err(Error::param("users_per_cell", "must be at least 1"));
    }
    let drop_seed = rng::stream_seed(seed, &[tag::SCHEDULE, drop as u64]);
    let users = sample_users(&prop.layout, &vec![cfg.users_per_cell; b_count], drop_seed)?;
    let regions: Vec<Region> = users.iter().map(|u| variant.region_of(u, prop)).collect();
    let mut cells = vec![Vec::new(); b_count];
    let mut edge = Vec::new();
    for (k, r) in regions.iter().enumerate() {
        match r {
            Region::Interior(b) => cells[*b].push(k),
            Region::Edge => edge.push(k),
        }
    }
    let num_cst: usize = cells.iter().map(Vec::len).sum();
    let num_nmt = edge.len();
    let (nu_cst, nu_nmt) = activity_factors(num_cst, num_nmt)?;

    let cst_table = PathGainTable::compute(prop, &users, &vec![variant.beta_cst; b_count])?;
    let nmt_table = PathGainTable::compute(prop, &users, &vec![variant.beta_nmt; b_count])?;

    let n = users.len();
    let mut pf = PfState::new(n, cfg.pf_window)?;
    let mut cumulative = vec![0.0; n];
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut slots = 0;
    let mut cst_slots = 0;
    while slots < cfg.max_slots {
        let cst = is_cst_slot(slots, num_cst, num_nmt);
        let table = if cst { &cst_table } else { &nmt_table };
        let mut rng = rng::stream(seed, &[tag::FADING, drop as u64, slots as u64]);
        let real = ChannelRealization::draw(&mut rng, table, cfg.power, cfg.num_antennas);
        let out = if cst {
            cst_slots += 1;
            cst_slot(cfg, table, &real, &cells, &pf)?
        } else {
            nmt_slot(cfg, table, &real, &edge, &pf)?
        };
        pf.update(&out.eligible, &out.rates);
        for (c, r) in cumulative.iter_mut().zip(&out.rates) {
            *c += r;
        }
        slots += 1;
        if slots % cfg.check_every == 0 {
            history.push(cumulative.clone());
            let back = ((slots as f64) * (1.0 - cfg.convergence_fraction) / cfg.check_every as f64).round() as usize;
            if slots >= cfg.min_slots && back >= 1 {
                let earlier_slots = back * cfg.check_every;
                if converged(&history[back - 1], earlier_slots, &cumulative, slots, cfg.convergence_tol) {
                    break;
                }
            }
        }
    }
    let throughputs = cumulative.iter().map(|c| c / slots as f64).collect();
    Ok(DropResult {
        users,
        regions,
        throughputs,
        nu_cst,
        nu_nmt,
        slots,
        cst_slots,
    })
}

/// Results of `drops` drops of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub variant: SystemVariant,
    pub drops: Vec<DropResult>,
}

impl VariantResult {
    /// Per-user throughputs stacked over all drops.
    pub fn cdf(&self) -> Result<ThroughputCdf> {
        ThroughputCdf::from_samples(self.drops.iter().flat_map(|d| d.throughputs.iter().copied()).collect())
    }
}

pub fn simulate_variant(cfg: &SchedulerConfig, variant: &SystemVariant, drops: usize, seed: u64) -> Result<VariantResult> {
    if drops == 0 {
        return Err(Error::param("drops", "must be at least 1"));
    }
    let results = (0..drops)
        .into_par_iter()
        .map(|d| simulate_drop(cfg, variant, seed, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(VariantResult {
        variant: variant.clone(),
        drops: results,
    })
}
