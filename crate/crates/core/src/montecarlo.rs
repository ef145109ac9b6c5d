//! Monte-Carlo SINR sampling and ergodic rate estimation.
//!
//! The estimates here make no distributional approximation and act as the
//! reference for the analytic rates.

use rayon::prelude::*;

use crate::channel::{assemble_network_channel, ChannelRealization, NetworkChannel, PathGainTable, Propagation};
use crate::geometry::{sample_users, UserLocation};
use crate::precoding::{columns_to_matrix, BeamformerSet};
use crate::rng::{self, tag};
use crate::{Error, Result, TransmissionMode};

/// Sample mean of the instantaneous rate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicRateEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(samples)`; absent for a single
    /// sample.
    pub std_error: Option<f64>,
    pub fading_realizations: usize,
    pub drops: usize,
}

impl ErgodicRateEstimate {
    pub fn from_samples(samples: &[f64], fading_realizations: usize, drops: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("rate samples"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = (samples.len() > 1).then(|| {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Ok(Self {
            mean,
            std_error,
            fading_realizations,
            drops,
        })
    }
}

/// Users of one CST cell: their global indices and the BS's beamformers, in
/// the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGroup {
    pub users: Vec<usize>,
    pub beams: BeamformerSet,
}

/// CST SINR of user `k`, a member of `groups[serving]`.
///
/// Desired signal and ICI use the true channel; the intracell residual uses
/// the estimation error. Noise power is one.
pub fn sinr_cst(real: &ChannelRealization, table: &PathGainTable, groups: &[CellGroup], serving: usize, k: usize) -> Result<f64> {
    let own = groups.get(serving).ok_or(Error::DimensionMismatch {
        expected: groups.len(),
        got: serving,
    })?;
    let pos = own
        .users
        .iter()
        .position(|&u| u == k)
        .ok_or_else(|| Error::param("k", format!("user {k} is not served by BS {serving}")))?;
    let link = real.link(k, serving);
    let a = table.get(k, serving);
    let signal = a * link.h.dotc(&own.beams.w.column(pos)).norm_sqr() * own.beams.powers[pos];
    let mut interference = 0.0;
    for (j, w) in own.beams.w.column_iter().enumerate() {
        if j != pos {
            interference += a * link.err.dotc(&w).norm_sqr() * own.beams.powers[j];
        }
    }
    for (b, g) in groups.iter().enumerate() {
        if b == serving {
            continue;
        }
        let h = &real.link(k, b).h;
        let ab = table.get(k, b);
        for (l, w) in g.beams.w.column_iter().enumerate() {
            interference += ab * h.dotc(&w).norm_sqr() * g.beams.powers[l];
        }
    }
    Ok(signal / (1.0 + interference))
}

/// NMT SINR of the user at position `k` of the jointly served set.
pub fn sinr_nmt(channels: &[NetworkChannel], beams: &BeamformerSet, k: usize) -> f64 {
    let ch = &channels[k];
    let signal = ch.h.dotc(&beams.w.column(k)).norm_sqr() * beams.powers[k];
    let interference: f64 = beams
        .w
        .column_iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(j, w)| ch.err.dotc(&w).norm_sqr() * beams.powers[j])
        .sum();
    signal / (1.0 + interference)
}

/// Zero-forcing with equal power in every cell; `cells[b]` lists the users
/// served by BS `b`.
pub fn cst_groups_equal(real: &ChannelRealization, cells: &[Vec<usize>], power: f64) -> Result<Vec<CellGroup>> {
    cells
        .iter()
        .enumerate()
        .map(|(b, users)| {
            let cols: Vec<_> = users.iter().map(|&k| &real.link(k, b).h_est).collect();
            let h = columns_to_matrix(&cols)?;
            let beams = if users.is_empty() {
                BeamformerSet {
                    mode: TransmissionMode::Cst,
                    w: h,
                    powers: Vec::new(),
                }
            } else {
                BeamformerSet::zf_equal(TransmissionMode::Cst, &h, power)?
            };
            Ok(CellGroup {
                users: users.clone(),
                beams,
            })
        })
        .collect()
}

/// Network channels of every user in `table`.
pub fn network_channels(real: &ChannelRealization, table: &PathGainTable) -> Result<Vec<NetworkChannel>> {
    (0..table.num_users())
        .map(|k| assemble_network_channel(real, k, table.row(k)))
        .collect()
}

/// Monte-Carlo protocol for the conditional ergodic rate of one sample user.
///
/// The sample user shares its cell with `users_per_cell - 1` other users;
/// every other cell holds `users_per_cell` users. CST averages over fading
/// for a single drop of the other users, NMT over `drops` drops.
#[derive(Debug, Clone, PartialEq)]
pub struct McSetup {
    pub propagation: Propagation,
    pub num_antennas: usize,
    pub power: f64,
    pub users_per_cell: usize,
    pub fading_realizations: usize,
    pub drops: usize,
    pub seed: u64,
}

impl McSetup {
    fn check(&self, drops: usize) -> Result<()> {
        if self.fading_realizations == 0 || drops == 0 {
            return Err(Error::param("counts", "fading and drop counts must be at least 1"));
        }
        if self.users_per_cell == 0 {
            return Err(Error::param("users_per_cell", "must be at least 1"));
        }
        if self.users_per_cell > self.num_antennas {
            return Err(Error::TooManyUsers {
                users: self.users_per_cell,
                dimension: self.num_antennas,
            });
        }
        Ok(())
    }

    /// Sample user first, then the drop's other users cell by cell.
    pub fn drop_users(&self, sample: &UserLocation, drop: usize) -> Result<Vec<UserLocation>> {
        let b = self.propagation.num_bs();
        let mut counts = vec![self.users_per_cell; b];
        counts[sample.home_cell] -= 1;
        let seed = rng::stream_seed(self.seed, &[tag::VALIDATE, drop as u64]);
        let mut users = vec![*sample];
        users.extend(sample_users(&self.propagation.layout, &counts, seed)?);
        Ok(users)
    }

    fn instantaneous_rate(&self, mode: TransmissionMode, users: &[UserLocation], table: &PathGainTable, drop: usize, fading: usize) -> Result<f64> {
        let nt = self.num_antennas;
        let mut rng = rng::stream(self.seed, &[tag::FADING, drop as u64, fading as u64]);
        let real = ChannelRealization::draw(&mut rng, table, self.power, nt);
        let sinr = match mode {
            TransmissionMode::Cst => {
                let mut cells = vec![Vec::new(); table.num_bs()];
                for (k, u) in users.iter().enumerate() {
                    cells[u.home_cell].push(k);
                }
                let groups = cst_groups_equal(&real, &cells, self.power)?;
                sinr_cst(&real, table, &groups, users[0].home_cell, 0)?
            }
            TransmissionMode::Nmt => {
                let channels = network_channels(&real, table)?;
                let cols: Vec<_> = channels.iter().map(|c| &c.h_est).collect();
                let h = columns_to_matrix(&cols)?;
                let budget = table.num_bs() as f64 * self.power;
                let beams = BeamformerSet::zf_equal(TransmissionMode::Nmt, &h, budget)?;
                sinr_nmt(&channels, &beams, 0)
            }
        };
        Ok((1.0 + sinr).log2())
    }

    /// Conditional ergodic rate of `sample` when every BS uses its entry of
    /// `tilts`.
    pub fn ergodic_rate(&self, mode: TransmissionMode, sample: &UserLocation, tilts: &[f64]) -> Result<ErgodicRateEstimate> {
        let drops = match mode {
            TransmissionMode::Cst => 1,
            TransmissionMode::Nmt => self.drops,
        };
        self.check(drops)?;
        let tables = (0..drops)
            .map(|d| {
                let users = self.drop_users(sample, d)?;
                let table = PathGainTable::compute(&self.propagation, &users, tilts)?;
                Ok((users, table))
            })
            .collect::<Result<Vec<_>>>()?;
        let nf = self.fading_realizations;
        let samples = (0..drops * nf)
            .into_par_iter()
            .map(|i| {
                let (d, f) = (i / nf, i % nf);
                let (users, table) = &tables[d];
                self.instantaneous_rate(mode, users, table, d, f)
            })
            .collect::<Result<Vec<f64>>>()?;
        ErgodicRateEstimate::from_samples(&samples, nf, drops)
    }
}
