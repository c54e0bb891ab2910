use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use noma_irsa::harness::{
    run_census, run_fit, run_sweep, write_census_csv, write_sweep_csv, Grid, SweepSpec,
};
use noma_irsa::StoppingRule;

#[derive(Parser, Debug)]
#[command(name = "noma-irsa", version, about = "NOMA-IRSA packet loss simulator and error-floor analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulated vs analytic packet loss rate over a load or frame-length grid.
    Sweep(Opts),
    /// Stopping-set counts vs their Poisson predictions.
    Census(Opts),
    /// Fit of the S2 effective bin count over a frame-length grid.
    Fit(Opts),
}

#[derive(Args, Debug, Default, Clone)]
struct Opts {
    /// Line-oriented key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Slots per frame for load grids.
    #[arg(long)]
    slots: Option<usize>,
    /// Number of power levels L.
    #[arg(long)]
    levels: Option<usize>,
    /// SINR threshold in dB.
    #[arg(long, allow_hyphen_values = true)]
    gamma_db: Option<f64>,
    /// Degree distribution as r:prob pairs, e.g. 2:0.5,3:0.5.
    #[arg(long)]
    dist: Option<String>,
    /// Comma-separated channel loads.
    #[arg(long, conflicts_with = "slot_grid")]
    loads: Option<String>,
    /// Comma-separated frame lengths, used with --load.
    #[arg(long)]
    slot_grid: Option<String>,
    /// Fixed load for --slot-grid.
    #[arg(long)]
    load: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_frames: Option<u64>,
    #[arg(long)]
    min_losses: Option<u64>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the S1-only baseline column.
    #[arg(long)]
    s1_baseline: bool,
    /// Also write a census CSV next to the sweep output.
    #[arg(long)]
    census: bool,
    /// Worker threads (0 = all cores). Does not change results.
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} entry `{}`: {e}", s.trim()))
        })
        .collect()
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => bail!("expected a boolean, got `{other}`"),
    }
}

/// Reads a `key=value` config file. Keys match the long flag names, with or
/// without leading dashes; `#` starts a comment.
fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", lineno + 1);
        };
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Fills unset options from the config file.
fn merge_config(mut opts: Opts, file: &BTreeMap<String, String>) -> Result<Opts> {
    for (key, value) in file {
        let ctx = || format!("config key `{key}`");
        match key.as_str() {
            "slots" => { opts.slots.get_or_insert(value.parse().with_context(ctx)?); }
            "levels" => { opts.levels.get_or_insert(value.parse().with_context(ctx)?); }
            "gamma-db" => { opts.gamma_db.get_or_insert(value.parse().with_context(ctx)?); }
            "dist" => { opts.dist.get_or_insert(value.clone()); }
            "loads" => {
                if opts.slot_grid.is_none() {
                    opts.loads.get_or_insert(value.clone());
                }
            }
            "slot-grid" => {
                if opts.loads.is_none() {
                    opts.slot_grid.get_or_insert(value.clone());
                }
            }
            "load" => { opts.load.get_or_insert(value.parse().with_context(ctx)?); }
            "seed" => { opts.seed.get_or_insert(value.parse().with_context(ctx)?); }
            "max-frames" => { opts.max_frames.get_or_insert(value.parse().with_context(ctx)?); }
            "min-losses" => { opts.min_losses.get_or_insert(value.parse().with_context(ctx)?); }
            "out" => { opts.out.get_or_insert(PathBuf::from(value)); }
            "workers" => { opts.workers.get_or_insert(value.parse().with_context(ctx)?); }
            "s1-baseline" => opts.s1_baseline |= parse_bool(value).with_context(ctx)?,
            "census" => opts.census |= parse_bool(value).with_context(ctx)?,
            other => bail!("unknown config key `{other}`"),
        }
    }
    Ok(opts)
}

fn build_spec(opts: &Opts) -> Result<SweepSpec> {
    let defaults = SweepSpec::default();
    let grid = match (&opts.loads, &opts.slot_grid) {
        (Some(_), Some(_)) => bail!("--loads and --slot-grid are mutually exclusive"),
        (_, Some(slots)) => {
            let Some(load) = opts.load else {
                bail!("--slot-grid needs --load");
            };
            Grid::Slots {
                slots: parse_list(slots, "slot grid")?,
                load,
            }
        }
        (Some(loads), None) => Grid::Loads(parse_list(loads, "load")?),
        (None, None) => defaults.grid.clone(),
    };
    let stop = StoppingRule {
        max_frames: opts.max_frames.unwrap_or(defaults.stop.max_frames),
        min_loss_events: opts.min_losses.unwrap_or(defaults.stop.min_loss_events),
    };
    Ok(SweepSpec {
        slots: opts.slots.unwrap_or(defaults.slots),
        levels: opts.levels.unwrap_or(defaults.levels),
        gamma_db: opts.gamma_db.unwrap_or(defaults.gamma_db),
        dist: opts.dist.clone().unwrap_or(defaults.dist),
        grid,
        stop,
        seed: opts.seed.unwrap_or(defaults.seed),
        workers: opts.workers.unwrap_or(defaults.workers),
        s1_baseline: opts.s1_baseline,
        census: opts.census,
    })
}

fn resolve(opts: Opts) -> Result<(SweepSpec, Option<PathBuf>)> {
    let opts = match &opts.config {
        Some(path) => {
            let file = read_config(path)?;
            merge_config(opts, &file)?
        }
        None => opts,
    };
    Ok((build_spec(&opts)?, opts.out))
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn census_path(out: &Option<PathBuf>) -> Option<PathBuf> {
    out.as_ref().map(|p| {
        let mut name = p.file_stem().unwrap_or_default().to_os_string();
        name.push(".census.csv");
        p.with_file_name(name)
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(opts) => {
            let (spec, out) = resolve(opts)?;
            // fail on unwritable paths before spending minutes simulating
            let writer = open_out(&out)?;
            let rows = run_sweep(&spec)?;
            write_sweep_csv(&rows, writer)?;
            if spec.census {
                let rows = run_census(&spec)?;
                match census_path(&out) {
                    Some(path) => write_census_csv(&rows, &spec.dist, open_out(&Some(path))?)?,
                    None => write_census_csv(&rows, &spec.dist, io::stdout().lock())?,
                }
            }
        }
        Command::Census(opts) => {
            let (spec, out) = resolve(opts)?;
            let writer = open_out(&out)?;
            let rows = run_census(&spec)?;
            write_census_csv(&rows, &spec.dist, writer)?;
        }
        Command::Fit(mut opts) => {
            if opts.levels.is_some_and(|l| l != 1) {
                log::warn!("the fit always runs on a single power level; ignoring --levels");
            }
            opts.levels = Some(1);
            if opts.dist.is_none() {
                opts.dist = Some("2:1".to_string());
            }
            let (spec, out) = resolve(opts)?;
            let report = run_fit(&spec)?;
            let text = report.render();
            match out {
                Some(path) => std::fs::write(&path, &text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            eprintln!("a0 = {:.6}, a1 = {:.6}", report.fit.a0, report.fit.a1);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
