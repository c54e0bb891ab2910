//! Sweep orchestration: grid expansion, CSV emission and the S2 bin-count fit.
//!
//! Every grid point uses the same master seed. User counts are
//! `m = round(G n)`.

use std::io::Write;

use rayon::prelude::*;

use crate::analytics::{
    fit_bin_count, plr_error_floor, plr_s1_only, BinCountFit, FitSample, StoppingSet,
};
use crate::census::{census, expected_counts, find_occurrences, CensusReport};
use crate::error::{Error, Result};
use crate::model::{build_power_ladder, parse_degree_distribution, DegreeDistribution, SystemConfig};
use crate::montecarlo::{estimate_plr, estimate_plr_with, frame_rng, PlrEstimate, StoppingRule};
use crate::sim::FrameInstance;

/// Column order of the sweep CSV.
pub const SWEEP_HEADER: [&str; 14] = [
    "G",
    "m",
    "n",
    "L",
    "gamma_db",
    "dist",
    "plr_sim",
    "ci_low",
    "ci_high",
    "plr_analytic",
    "plr_s1only",
    "frames",
    "losses",
    "seed",
];

/// Column order of the census CSV.
pub const CENSUS_HEADER: [&str; 13] = [
    "G",
    "m",
    "n",
    "L",
    "dist",
    "set",
    "frames",
    "structural_mean",
    "structural_std_error",
    "structural_expected",
    "blocking_mean",
    "blocking_expected",
    "seed",
];

/// Which axis a sweep walks.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Channel loads at the spec's fixed frame length.
    Loads(Vec<f64>),
    /// Frame lengths at one fixed load.
    Slots { slots: Vec<usize>, load: f64 },
}

/// Full description of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Frame length for load grids; ignored for slot grids.
    pub slots: usize,
    pub levels: usize,
    pub gamma_db: f64,
    pub dist: String,
    pub grid: Grid,
    pub stop: StoppingRule,
    pub seed: u64,
    /// Worker threads, `0` for rayon's default pool.
    pub workers: usize,
    pub s1_baseline: bool,
    pub census: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            slots: 200,
            levels: 3,
            gamma_db: 3.0,
            dist: "2:0.5,3:0.5".to_string(),
            grid: Grid::Loads(vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4]),
            stop: StoppingRule::default(),
            seed: 1,
            workers: 0,
            s1_baseline: false,
            census: false,
        }
    }
}

/// One resolved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub load: f64,
    pub config: SystemConfig,
}

impl SweepSpec {
    pub fn distribution(&self) -> Result<DegreeDistribution> {
        parse_degree_distribution(&self.dist)
    }

    /// Validates the spec and expands it into concrete configurations.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        self.points_with_levels(self.levels)
    }

    fn points_with_levels(&self, levels: usize) -> Result<Vec<GridPoint>> {
        let dist = self.distribution()?;
        let ladder = build_power_ladder(self.gamma_db, levels)?;
        let pairs: Vec<(f64, usize)> = match &self.grid {
            Grid::Loads(loads) => loads.iter().map(|&g| (g, self.slots)).collect(),
            Grid::Slots { slots, load } => slots.iter().map(|&n| (*load, n)).collect(),
        };
        if pairs.is_empty() {
            return Err(Error::InvalidSweep("grid is empty".into()));
        }
        pairs
            .into_iter()
            .map(|(load, n)| {
                if !(load > 0.0 && load.is_finite()) {
                    return Err(Error::InvalidSweep(format!("load {load} must be positive")));
                }
                let m = (load * n as f64).round();
                if m < 1.0 {
                    return Err(Error::InvalidSweep(format!(
                        "load {load} on {n} slots rounds to no users"
                    )));
                }
                let config = SystemConfig::new(n, m as usize, dist.clone(), ladder.clone())?;
                Ok(GridPoint { load, config })
            })
            .collect()
    }
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub load: f64,
    pub users: usize,
    pub slots: usize,
    pub levels: usize,
    pub gamma_db: f64,
    pub dist: String,
    pub estimate: PlrEstimate,
    pub analytic: f64,
    pub s1_only: Option<f64>,
}

/// Formats like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn sig9(x: f64) -> String {
    format_sig(x, 9)
}

/// Simulates every grid point and pairs it with the analytic predictions.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for point in spec.points()? {
        let cfg = &point.config;
        let estimate = estimate_plr(cfg, spec.stop, spec.seed, spec.workers)?;
        let (n, m, l) = (cfg.slots(), cfg.users(), cfg.ladder().len());
        let analytic = plr_error_floor(n, m, l, cfg.dist())?;
        let s1_only = if spec.s1_baseline {
            Some(plr_s1_only(n, m, l, cfg.dist())?)
        } else {
            None
        };
        log::info!(
            "G={} n={n} m={m}: plr_sim={} plr_analytic={} ({} frames)",
            point.load,
            sig9(estimate.plr),
            sig9(analytic),
            estimate.frames
        );
        rows.push(SweepRow {
            load: point.load,
            users: m,
            slots: n,
            levels: l,
            gamma_db: spec.gamma_db,
            dist: spec.dist.clone(),
            estimate,
            analytic,
            s1_only,
        });
    }
    Ok(rows)
}

/// Writes sweep rows in the fixed CSV schema. The S1-only column is left
/// empty for rows computed without the baseline.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            sig9(r.load),
            r.users.to_string(),
            r.slots.to_string(),
            r.levels.to_string(),
            sig9(r.gamma_db),
            r.dist.clone(),
            sig9(r.estimate.plr),
            sig9(r.estimate.ci_low),
            sig9(r.estimate.ci_high),
            sig9(r.analytic),
            r.s1_only.map(sig9).unwrap_or_default(),
            r.estimate.frames.to_string(),
            r.estimate.losses.to_string(),
            r.estimate.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Census of one grid point next to its Poisson predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub load: f64,
    pub config: SystemConfig,
    pub report: CensusReport,
    pub seed: u64,
}

/// Counts stopping sets over `frames` frames of `config`. Frame `i` uses the
/// same stream as in the PLR estimator.
pub fn census_frames(config: &SystemConfig, frames: u64, seed: u64, workers: usize) -> Result<CensusReport> {
    if frames == 0 {
        return Err(Error::NoFrames);
    }
    let work = || {
        (0..frames)
            .into_par_iter()
            .fold(
                || (FrameInstance::default(), CensusReport::default()),
                |(mut frame, mut report), i| {
                    frame.regenerate(config, &mut frame_rng(seed, i));
                    report.add(&census(&frame));
                    (frame, report)
                },
            )
            .map(|(_, report)| report)
            .reduce(CensusReport::default, |a, b| a.merge(&b))
    };
    Ok(if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(work)
    } else {
        work()
    })
}

/// Runs the census over every grid point, `spec.stop.max_frames` frames each.
pub fn run_census(spec: &SweepSpec) -> Result<Vec<CensusRow>> {
    spec.points()?
        .into_iter()
        .map(|point| {
            let report = census_frames(&point.config, spec.stop.max_frames, spec.seed, spec.workers)?;
            Ok(CensusRow {
                load: point.load,
                config: point.config,
                report,
                seed: spec.seed,
            })
        })
        .collect()
}

/// Writes census rows, one line per grid point and stopping set.
pub fn write_census_csv<W: Write>(rows: &[CensusRow], dist: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CENSUS_HEADER)?;
    for row in rows {
        let cfg = &row.config;
        for expected in expected_counts(cfg)? {
            let set = expected.set;
            w.write_record([
                sig9(row.load),
                cfg.users().to_string(),
                cfg.slots().to_string(),
                cfg.ladder().len().to_string(),
                dist.to_string(),
                set.to_string(),
                row.report.frames.to_string(),
                sig9(row.report.structural_mean(set)),
                sig9(row.report.structural_std_error(set)),
                sig9(expected.structural),
                sig9(row.report.blocking_mean(set)),
                sig9(expected.blocking),
                row.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One frame length of the bin-count fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitPoint {
    pub sample: FitSample,
    pub users: usize,
    pub estimate: PlrEstimate,
}

/// Fitted S2 bin-count model with the measurements behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub points: Vec<FitPoint>,
    pub fit: BinCountFit,
}

impl FitReport {
    /// Human-readable summary.
    pub fn render(&self) -> String {
        let mut s = String::from("n,m,frames,losses,plr_s2,bins,g,residual\n");
        for (p, r) in self.points.iter().zip(&self.fit.residuals) {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.sample.slots,
                p.users,
                p.estimate.frames,
                p.estimate.losses,
                sig9(p.sample.plr),
                sig9(p.sample.bins()),
                sig9(p.sample.shape()),
                sig9(*r),
            ));
        }
        s.push_str(&format!("a0 = {}\na1 = {}\n", sig9(self.fit.a0), sig9(self.fit.a1)));
        s
    }
}

/// Measures, on a single power level, the loss rate of users caught in a
/// blocking S2 triangle, converts it to an effective bin count per frame
/// length and fits `C(n,2)² / b̄² = a0 + a1 n`.
pub fn run_fit(spec: &SweepSpec) -> Result<FitReport> {
    if !matches!(spec.grid, Grid::Slots { .. }) {
        return Err(Error::InvalidSweep("the fit needs a slot grid".into()));
    }
    let dist = spec.distribution()?;
    if dist.lambda(2) <= 0.0 {
        return Err(Error::InvalidSweep(
            "the fit needs degree-2 users (lambda_2 > 0)".into(),
        ));
    }
    let points = spec.points_with_levels(1)?;
    let mut distinct: Vec<usize> = points.iter().map(|p| p.config.slots()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(distinct.len()));
    }

    let mut measured = Vec::new();
    for point in points {
        let cfg = &point.config;
        let estimate = estimate_plr_with(cfg, spec.stop, spec.seed, spec.workers, |frame, summary, dec| {
            if summary.residual == 0 {
                return 0;
            }
            let flags = dec.decoded_flags();
            let mut lost: Vec<usize> = find_occurrences(frame)
                .into_iter()
                .filter(|o| o.set == StoppingSet::S2 && o.blocking)
                .flat_map(|o| o.members)
                .filter(|&u| !flags[u])
                .collect();
            lost.sort_unstable();
            lost.dedup();
            lost.len() as u64
        })?;
        log::info!(
            "fit n={} m={}: {} S2 losses in {} frames",
            cfg.slots(),
            cfg.users(),
            estimate.losses,
            estimate.frames
        );
        if estimate.losses == 0 {
            return Err(Error::NonPositivePlr(0.0));
        }
        measured.push(FitPoint {
            sample: FitSample {
                slots: cfg.slots(),
                balls: dist.lambda(2) * cfg.users() as f64,
                plr: estimate.plr,
            },
            users: cfg.users(),
            estimate,
        });
    }
    let samples: Vec<FitSample> = measured.iter().map(|p| p.sample).collect();
    let fit = fit_bin_count(&samples)?;
    Ok(FitReport {
        points: measured,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.2, 9), "0.2");
        assert_eq!(format_sig(3.0, 9), "3");
        assert_eq!(format_sig(200.0, 9), "200");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(1.2345678912e-5, 9), "1.23456789e-05");
        assert_eq!(format_sig(0.0001, 9), "0.0001");
        assert_eq!(format_sig(123456789012.0, 9), "1.23456789e+11");
        assert_eq!(format_sig(-2.5, 9), "-2.5");
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(17.90072, 6), "17.9007");
    }

    #[test]
    fn rounds_user_counts() {
        let spec = SweepSpec {
            grid: Grid::Loads(vec![0.2, 0.333]),
            ..SweepSpec::default()
        };
        let pts = spec.points().unwrap();
        assert_eq!(pts[0].config.users(), 40);
        assert_eq!(pts[1].config.users(), 67);
    }

    #[test]
    fn invalid_grids() {
        let empty = SweepSpec {
            grid: Grid::Loads(vec![]),
            ..SweepSpec::default()
        };
        assert!(matches!(run_sweep(&empty), Err(Error::InvalidSweep(_))));
        let negative = SweepSpec {
            grid: Grid::Loads(vec![-0.1]),
            ..SweepSpec::default()
        };
        assert!(negative.points().is_err());
        let tiny = SweepSpec {
            grid: Grid::Loads(vec![0.001]),
            ..SweepSpec::default()
        };
        assert!(tiny.points().is_err());
    }

    #[test]
    fn fit_rejects_single_point_grid() {
        let spec = SweepSpec {
            dist: "2:1".into(),
            grid: Grid::Slots {
                slots: vec![100],
                load: 0.4,
            },
            ..SweepSpec::default()
        };
        assert_eq!(run_fit(&spec), Err(Error::DegenerateFit(1)));
    }
}
