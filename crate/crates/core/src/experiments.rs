//! Experiment drivers behind the command-line subcommands.
//!
//! Each experiment has a compute function returning plain data and a `run_`
//! wrapper that writes one CSV per figure into the output directory.

use std::path::{Path, PathBuf};

use log::info;

use crate::antenna::BsAntenna;
use crate::config::RunConfig;
use crate::geometry::{grid_over_coverage, interior_area_fraction, NetworkLayout, Point2, UserLocation};
use crate::montecarlo::{ErgodicRateEstimate, McSetup};
use crate::scheduler::{simulate_variant, VariantResult};
use crate::tilt::{RegionSearchResult, ThroughputAnalysis, ThroughputCdf, TiltSweep};
use crate::{Result, TransmissionMode};

fn num(x: f64) -> String {
    format!("{x}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// `n` points on the segment from BS `b` to the hexagon centre, at the
/// midpoints of `n` equal sub-segments, with their horizontal distance to
/// the BS.
pub fn segment_points(layout: &NetworkLayout, b: usize, n: usize) -> Result<Vec<(f64, UserLocation)>> {
    let bs = layout.bs_positions[b];
    let c = layout.center();
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            let p = Point2::new(bs.x + t * (c.x - bs.x), bs.y + t * (c.y - bs.y));
            let mut u = layout.user_at(p)?;
            u.home_cell = b;
            Ok((t * bs.distance(c), u))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub distance: f64,
    pub analytic_cst: f64,
    pub mc_cst: ErgodicRateEstimate,
    pub analytic_nmt: f64,
    pub mc_nmt: ErgodicRateEstimate,
}

impl ValidationRow {
    pub fn cst_deviation(&self) -> f64 {
        (self.analytic_cst - self.mc_cst.mean).abs() / self.mc_cst.mean
    }

    pub fn nmt_deviation(&self) -> f64 {
        (self.analytic_nmt - self.mc_nmt.mean).abs() / self.mc_nmt.mean
    }
}

/// Analytic and Monte-Carlo conditional rates of a sample user moving from
/// BS 0 towards the hexagon centre.
pub fn validate_rates(cfg: &RunConfig) -> Result<Vec<ValidationRow>> {
    let antenna = if cfg.validate_isotropic {
        BsAntenna::Isotropic
    } else {
        BsAntenna::Directional(cfg.pattern)
    };
    let prop = cfg.propagation(antenna)?;
    let model = cfg.analytic_model()?;
    let b = prop.num_bs();
    let tilts = vec![cfg.validate_tilt; b];
    let k = cfg.validate_users_per_cell;
    let mc = McSetup {
        propagation: prop.clone(),
        num_antennas: cfg.num_antennas,
        power: model.power,
        users_per_cell: k,
        fading_realizations: cfg.validate_fading,
        drops: cfg.validate_drops,
        seed: cfg.seed,
    };
    segment_points(&prop.layout, 0, cfg.validate_points)?
        .into_iter()
        .map(|(distance, u)| {
            let row = prop.path_gain_row(&u, &tilts)?;
            let r = ValidationRow {
                distance,
                analytic_cst: model.cst_rate(&row, &vec![k; b], u.home_cell)?,
                mc_cst: mc.ergodic_rate(TransmissionMode::Cst, &u, &tilts)?,
                analytic_nmt: model.nmt_rate(&row, k * b)?,
                mc_nmt: mc.ergodic_rate(TransmissionMode::Nmt, &u, &tilts)?,
            };
            info!("validate d={distance:.1}: cst {:.4}/{:.4} nmt {:.4}/{:.4}", r.analytic_cst, r.mc_cst.mean, r.analytic_nmt, r.mc_nmt.mean);
            Ok(r)
        })
        .collect()
}

pub fn run_validate_rates(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = validate_rates(cfg)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("validate_rates.csv");
    let se = |e: &ErgodicRateEstimate| e.std_error.map(num).unwrap_or_default();
    write_csv(
        &path,
        &["distance", "analytic_cst", "mc_cst", "analytic_nmt", "mc_nmt", "mc_cst_std_error", "mc_nmt_std_error"],
        rows.iter().map(|r| {
            vec![
                num(r.distance),
                num(r.analytic_cst),
                num(r.mc_cst.mean),
                num(r.analytic_nmt),
                num(r.mc_nmt.mean),
                se(&r.mc_cst),
                se(&r.mc_nmt),
            ]
        }),
    )?;
    Ok(vec![path])
}

pub fn throughput_analysis(cfg: &RunConfig) -> Result<(ThroughputAnalysis, Vec<UserLocation>)> {
    let prop = cfg.directional()?;
    let grid = grid_over_coverage(&prop.layout, cfg.grid_resolution)?;
    let a = ThroughputAnalysis::new(prop, cfg.analytic_model()?, cfg.analysis_users_per_cell)?;
    Ok((a, grid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltSweepResult {
    pub cst: TiltSweep,
    pub nmt: TiltSweep,
}

pub fn tilt_sweep(cfg: &RunConfig) -> Result<TiltSweepResult> {
    let (a, grid) = throughput_analysis(cfg)?;
    info!("tilt sweep over {} grid points", grid.len());
    Ok(TiltSweepResult {
        cst: a.sweep_tilts(TransmissionMode::Cst, &cfg.tilts, &grid)?,
        nmt: a.sweep_tilts(TransmissionMode::Nmt, &cfg.tilts, &grid)?,
    })
}

pub fn run_tilt_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let r = tilt_sweep(cfg)?;
    std::fs::create_dir_all(out)?;
    let sweep = out.join("tilt_sweep.csv");
    write_csv(
        &sweep,
        &["tilt", "cst_edge", "cst_average", "cst_peak", "nmt_edge", "nmt_average", "nmt_peak"],
        r.cst.points.iter().zip(&r.nmt.points).map(|(c, n)| {
            vec![num(c.tilt), num(c.edge), num(c.average), num(c.peak), num(n.edge), num(n.average), num(n.peak)]
        }),
    )?;
    let optima = out.join("tilt_optima.csv");
    let mut rows = Vec::new();
    for s in [&r.cst, &r.nmt] {
        for (metric, tilt) in [("edge", s.best_edge_tilt()), ("average", s.best_average_tilt()), ("peak", s.best_peak_tilt())] {
            let p = s.at(tilt).expect("argmax tilt is a sweep point");
            let value = match metric {
                "edge" => p.edge,
                "average" => p.average,
                _ => p.peak,
            };
            rows.push(vec![s.mode.label().to_string(), metric.to_string(), num(tilt), num(value)]);
        }
    }
    write_csv(&optima, &["mode", "metric", "tilt", "throughput"], rows)?;
    Ok(vec![sweep, optima])
}

pub fn optimize_regions(cfg: &RunConfig) -> Result<RegionSearchResult> {
    let (a, grid) = throughput_analysis(cfg)?;
    a.optimize_region_params(&cfg.region, &grid)
}

pub fn run_optimize_regions(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let r = optimize_regions(cfg)?;
    let layout = cfg.layout()?;
    let radius = cfg.cell_radius;
    std::fs::create_dir_all(out)?;
    let surface = out.join("region_surface.csv");
    let header = ["d_int", "d_int_ratio", "beta_cst", "beta_nmt", "average"];
    let row = |p: &crate::tilt::RegionPoint| {
        vec![
            num(p.params.d_int),
            num(p.params.d_int / radius),
            num(p.params.beta_cst),
            num(p.params.beta_nmt),
            num(p.average),
        ]
    };
    write_csv(&surface, &header, r.surface.iter().map(row))?;
    let by_dint = out.join("region_by_dint.csv");
    write_csv(&by_dint, &header, r.best_by_d_int().iter().map(row))?;
    let best = out.join("region_optimum.csv");
    let mut b = row(&r.best);
    b.push(num(interior_area_fraction(&layout, r.best.params.d_int)));
    write_csv(
        &best,
        &["d_int", "d_int_ratio", "beta_cst", "beta_nmt", "average", "interior_area_fraction"],
        [b],
    )?;
    Ok(vec![surface, by_dint, best])
}

pub fn compare_systems(cfg: &RunConfig) -> Result<Vec<VariantResult>> {
    let s = cfg.scheduler()?;
    cfg.variants()
        .iter()
        .map(|v| {
            info!("simulating {} over {} drops", v.name, cfg.system_drops);
            simulate_variant(&s, v, cfg.system_drops, cfg.seed)
        })
        .collect()
}

/// Relative gain of `a` over `b` at percentile `p`.
pub fn percentile_gain(a: &ThroughputCdf, b: &ThroughputCdf, p: f64) -> f64 {
    a.percentile(p) / b.percentile(p) - 1.0
}

fn slug(name: &str) -> String {
    name.to_ascii_lowercase().replace(|c: char| !c.is_ascii_alphanumeric(), "_")
}

pub fn run_compare_systems(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let results = compare_systems(cfg)?;
    std::fs::create_dir_all(out)?;
    let cdfs = results.iter().map(VariantResult::cdf).collect::<Result<Vec<_>>>()?;
    let mut paths = Vec::new();
    for (r, cdf) in results.iter().zip(&cdfs) {
        let path = out.join(format!("cdf_{}.csv", slug(&r.variant.name)));
        let n = cdf.len() as f64;
        write_csv(
            &path,
            &["rank", "cdf", "throughput"],
            cdf.samples()
                .iter()
                .enumerate()
                .map(|(i, x)| vec![(i + 1).to_string(), num((i + 1) as f64 / n), num(*x)]),
        )?;
        paths.push(path);
    }
    let summary = out.join("system_summary.csv");
    write_csv(
        &summary,
        &["variant", "users", "edge", "average", "peak"],
        results.iter().zip(&cdfs).map(|(r, c)| {
            vec![r.variant.name.clone(), c.len().to_string(), num(c.edge()), num(c.average()), num(c.peak())]
        }),
    )?;
    paths.push(summary);
    // The last variant is the adaptive scheme; compare it against the rest.
    let gains = out.join("system_gains.csv");
    let (am, baselines) = cdfs.split_last().expect("five variants");
    let mut rows = Vec::new();
    for (r, c) in results.iter().zip(baselines) {
        for i in 1..=19 {
            let p = i as f64 * 0.05;
            rows.push(vec![r.variant.name.clone(), num(p), num(percentile_gain(am, c, p))]);
        }
    }
    write_csv(&gains, &["baseline", "percentile", "gain"], rows)?;
    paths.push(gains);
    Ok(paths)
}
