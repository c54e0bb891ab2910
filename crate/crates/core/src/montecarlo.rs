//! Monte-Carlo estimation of the packet loss rate.
//!
//! Frame `i` draws from its own ChaCha stream keyed by `(master_seed, i)`,
//! and frames are processed in fixed-size batches whose per-frame loss counts
//! are scanned in frame order. The estimate is therefore bit-identical for any
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::sim::{DecodeSummary, FrameInstance, SicDecoder};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Frames handed to the thread pool at a time. Fixed so that results do not
/// depend on the worker count.
const BATCH_FRAMES: u64 = 2048;

/// When to stop simulating frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoppingRule {
    pub max_frames: u64,
    pub min_loss_events: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            max_frames: 10_000_000,
            min_loss_events: 200,
        }
    }
}

/// Simulated packet loss rate with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrEstimate {
    pub frames: u64,
    pub users_total: u64,
    pub losses: u64,
    pub plr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

/// Wilson score interval for `successes` out of `trials` at normal quantile
/// `z`. Returns `(0, 1)` when there are no trials.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // clamp so rounding never pushes the point estimate outside its interval
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// The RNG stream used for frame `frame_index` under `master_seed`.
pub fn frame_rng(master_seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(frame_index);
    rng
}

/// Scratch state for one worker.
#[derive(Debug, Default)]
pub struct FrameScratch {
    pub frame: FrameInstance,
    pub decoder: SicDecoder,
}

/// Estimates the PLR, counting every undecoded user as a loss.
pub fn estimate_plr(
    config: &SystemConfig,
    stop: StoppingRule,
    master_seed: u64,
    workers: usize,
) -> Result<PlrEstimate> {
    estimate_plr_with(config, stop, master_seed, workers, |_, summary, _| {
        summary.residual as u64
    })
}

/// Estimates a loss proportion where `count_losses` decides how many users of
/// a decoded frame count as lost. It sees the frame, the decoder summary and
/// the decoder itself (for per-user flags).
///
/// `workers == 0` uses rayon's global pool.
pub fn estimate_plr_with<F>(
    config: &SystemConfig,
    stop: StoppingRule,
    master_seed: u64,
    workers: usize,
    count_losses: F,
) -> Result<PlrEstimate>
where
    F: Fn(&FrameInstance, DecodeSummary, &SicDecoder) -> u64 + Sync,
{
    if stop.max_frames == 0 {
        return Err(Error::NoFrames);
    }
    let simulate = |scratch: &mut FrameScratch, index: u64| -> u64 {
        let mut rng = frame_rng(master_seed, index);
        scratch.frame.regenerate(config, &mut rng);
        let summary = scratch.decoder.run(&scratch.frame, config.ladder());
        count_losses(&scratch.frame, summary, &scratch.decoder)
    };

    let pool = if workers > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Io(e.to_string()))?,
        )
    } else {
        None
    };

    let mut frames = 0u64;
    let mut losses = 0u64;
    let mut batch = Vec::with_capacity(BATCH_FRAMES as usize);
    'outer: while frames < stop.max_frames {
        let end = (frames + BATCH_FRAMES).min(stop.max_frames);
        let mut run_batch = || {
            (frames as usize..end as usize)
                .into_par_iter()
                .map_init(FrameScratch::default, |scratch, i| simulate(scratch, i as u64))
                .collect_into_vec(&mut batch)
        };
        match &pool {
            Some(pool) => pool.install(run_batch),
            None => run_batch(),
        }
        for &lost in &batch {
            frames += 1;
            losses += lost;
            if losses >= stop.min_loss_events {
                break 'outer;
            }
        }
    }

    let users_total = frames * config.users() as u64;
    let plr = if users_total == 0 {
        0.0
    } else {
        losses as f64 / users_total as f64
    };
    let (ci_low, ci_high) = wilson_interval(losses, users_total, Z_95);
    log::debug!(
        "G={:.3} n={} L={}: {losses} losses in {frames} frames",
        config.load(),
        config.slots(),
        config.ladder().len()
    );
    Ok(PlrEstimate {
        frames,
        users_total,
        losses,
        plr,
        ci_low,
        ci_high,
        seed: master_seed,
    })
}
