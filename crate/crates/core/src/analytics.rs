//! Closed-form error-floor machinery.
//!
//! Users of a fixed degree are mapped to balls and the slot combinations they
//! can occupy to bins. A stopping set of `ν` users on `μ` slots occurs once for
//! every bin holding exactly `ν` balls, and it blocks SIC only when every one
//! of its slots carries member replicas at a common power, which happens with
//! probability `1 / L^μ`. The number of such bins is approximated as Poisson,
//! which collapses the expected loss to a one-shot sum over three catalogued
//! sets.
//!
//! The approximation only describes the error-floor region. It diverges once
//! the load enters the waterfall region, where SIC stalls for reasons other
//! than small stopping sets.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::DegreeDistribution;

/// Largest ball count accepted by [`exact_occupancy_pmf`].
pub const MAX_EXACT_BALLS: usize = 200;
/// Largest bin count accepted by [`exact_occupancy_pmf`].
pub const MAX_EXACT_BINS: usize = 20_000;
/// Largest `bins^balls` accepted by [`occupancy_pmf_exhaustive`].
pub const MAX_ENUMERATION: u64 = 1 << 26;

/// The three stopping-set shapes accounted for by the error-floor formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StoppingSet {
    /// Two degree-2 users on the same two slots.
    S1,
    /// Three degree-2 users whose slot pairs form a triangle on three slots.
    S2,
    /// Two degree-3 users on the same three slots.
    S3,
}

impl StoppingSet {
    pub const ALL: [StoppingSet; 3] = [StoppingSet::S1, StoppingSet::S2, StoppingSet::S3];

    /// Slots involved, `μ`.
    pub const fn slots(self) -> usize {
        match self {
            StoppingSet::S1 => 2,
            StoppingSet::S2 | StoppingSet::S3 => 3,
        }
    }

    /// Users involved, `ν`.
    pub const fn users(self) -> usize {
        match self {
            StoppingSet::S1 => 2,
            StoppingSet::S2 => 3,
            StoppingSet::S3 => 2,
        }
    }

    /// Degree `r` whose probability `λ_r` scales the ball count.
    pub const fn member_degree(self) -> usize {
        match self {
            StoppingSet::S1 | StoppingSet::S2 => 2,
            StoppingSet::S3 => 3,
        }
    }

    /// Probability that every slot of the set is power matched, `1 / L^μ`.
    pub fn power_match_probability(self, levels: usize) -> f64 {
        (levels as f64).powi(self.slots() as i32).recip()
    }
}

impl fmt::Display for StoppingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StoppingSet::S1 => "S1",
            StoppingSet::S2 => "S2",
            StoppingSet::S3 => "S3",
        };
        f.write_str(name)
    }
}

/// A balls-into-bins instance. Ball counts may be fractional because they are
/// population averages `λ_r · m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BibInstance {
    pub balls: f64,
    pub bins: f64,
}

impl BibInstance {
    pub fn new(balls: f64, bins: f64) -> Result<Self> {
        if bins.is_nan() || balls.is_nan() || bins <= 0.0 || balls < 0.0 {
            return Err(Error::InvalidSweep(format!(
                "balls-into-bins needs balls >= 0 and bins > 0, got {balls} and {bins}"
            )));
        }
        Ok(BibInstance { balls, bins })
    }

    /// Instance associated with a stopping set: `m̄ = λ_r m` balls and the
    /// set's effective bin count.
    pub fn for_set(
        set: StoppingSet,
        slots: usize,
        users: usize,
        dist: &DegreeDistribution,
    ) -> Result<Self> {
        let balls = dist.lambda(set.member_degree()) * users as f64;
        Self::new(balls, effective_bins(set, slots)?)
    }
}

fn factorial(t: usize) -> f64 {
    (1..=t).map(|k| k as f64).product()
}

/// `C(n, k)` in floating point.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Poisson parameter `β_t = (b̄ / t!) (m̄ / b̄)^t` of the number of bins holding
/// exactly `t` balls.
pub fn poisson_bin_parameter(inst: BibInstance, t: usize) -> f64 {
    inst.bins / factorial(t) * (inst.balls / inst.bins).powi(t as i32)
}

/// Exact `E[Y_t] = b C(m, t) b^-t (1 - 1/b)^(m - t)` for integer balls `m` and
/// bins `b`.
pub fn exact_occupancy_mean(balls: usize, bins: usize, t: usize) -> f64 {
    if t > balls || bins == 0 {
        return 0.0;
    }
    let q = 1.0 / bins as f64;
    bins as f64 * choose(balls, t) * q.powi(t as i32) * (1.0 - q).powi((balls - t) as i32)
}

/// Exact distribution of `Y_t`, the number of bins that receive exactly `t`
/// of `balls` uniformly and independently thrown balls. Entry `y` of the
/// result is `Pr{Y_t = y}`.
///
/// Bins are filled one at a time: with `j` balls left and `i` bins left, the
/// next bin receives a Binomial(`j`, `1/i`) number of balls.
pub fn exact_occupancy_pmf(balls: usize, bins: usize, t: usize) -> Result<Vec<f64>> {
    if t == 0 || bins == 0 {
        return Err(Error::InvalidSweep(
            "occupancy needs t >= 1 and at least one bin".into(),
        ));
    }
    if balls > MAX_EXACT_BALLS || bins > MAX_EXACT_BINS {
        return Err(Error::InstanceTooLarge { balls, bins });
    }
    let max_y = (balls / t).min(bins);
    let width = max_y + 1;
    // dp[j * width + y]: probability of j balls left with y bins at exactly t
    let mut dp = vec![0.0; (balls + 1) * width];
    let mut next = vec![0.0; (balls + 1) * width];
    dp[balls * width] = 1.0;
    let mut binom = vec![0.0; balls + 1];
    for remaining_bins in (2..=bins).rev() {
        next.iter_mut().for_each(|v| *v = 0.0);
        let q = 1.0 / remaining_bins as f64;
        let ratio = q / (1.0 - q);
        for j in 0..=balls {
            let row = &dp[j * width..(j + 1) * width];
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            binom[0] = (1.0 - q).powi(j as i32);
            for k in 0..j {
                binom[k + 1] = binom[k] * (j - k) as f64 / (k + 1) as f64 * ratio;
            }
            for (y, &mass) in row.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for (k, &pk) in binom[..=j].iter().enumerate() {
                    let y2 = if k == t { y + 1 } else { y };
                    if y2 <= max_y {
                        next[(j - k) * width + y2] += mass * pk;
                    }
                }
            }
        }
        std::mem::swap(&mut dp, &mut next);
    }
    // the last bin takes whatever is left
    let mut pmf = vec![0.0; width];
    for j in 0..=balls {
        for y in 0..width {
            let mass = dp[j * width + y];
            if mass == 0.0 {
                continue;
            }
            let y2 = if j == t { y + 1 } else { y };
            pmf[y2.min(max_y)] += mass;
        }
    }
    Ok(pmf)
}

/// Brute-force occupancy law: enumerates all `bins^balls` assignments and
/// returns the count of assignments yielding each `y`, plus the total.
pub fn occupancy_pmf_exhaustive(balls: usize, bins: usize, t: usize) -> Result<(Vec<u64>, u64)> {
    let total = (bins as u64)
        .checked_pow(balls as u32)
        .filter(|&c| c <= MAX_ENUMERATION)
        .ok_or(Error::InstanceTooLarge { balls, bins })?;
    if bins == 0 {
        return Err(Error::InstanceTooLarge { balls, bins });
    }
    let mut counts = vec![0u64; bins + 1];
    let mut assignment = vec![0usize; balls];
    let mut load = vec![0usize; bins];
    for _ in 0..total {
        load.iter_mut().for_each(|l| *l = 0);
        for &b in &assignment {
            load[b] += 1;
        }
        counts[load.iter().filter(|&&l| l == t).count()] += 1;
        // odometer increment
        for digit in assignment.iter_mut() {
            *digit += 1;
            if *digit < bins {
                break;
            }
            *digit = 0;
        }
    }
    while counts.len() > 1 && *counts.last().unwrap() == 0 {
        counts.pop();
    }
    Ok((counts, total))
}

/// Effective bin count `b̄` of a stopping set in a frame of `n` slots.
///
/// S1 and S3 count the slot pairs and triples a user can choose. S2 uses the
/// empirically fitted `C(n,2) / sqrt(2 (n - 2))`, applied at every `n` even
/// though it was calibrated on a finite grid.
pub fn effective_bins(set: StoppingSet, n: usize) -> Result<f64> {
    if n < set.slots() {
        return Err(Error::FrameTooShort {
            n,
            min: set.slots(),
        });
    }
    Ok(match set {
        StoppingSet::S1 => choose(n, 2),
        StoppingSet::S2 => choose(n, 2) / (2.0 * (n as f64 - 2.0)).sqrt(),
        StoppingSet::S3 => choose(n, 3),
    })
}

/// Contribution of one stopping set to the expected loss, assembled from its
/// Poisson parameter: `(1/L^μ) (ν/m) β_ν`.
pub fn catalog_term(
    set: StoppingSet,
    n: usize,
    m: usize,
    levels: usize,
    dist: &DegreeDistribution,
) -> Result<f64> {
    check_floor_inputs(n, levels)?;
    if m == 0 {
        return Ok(0.0);
    }
    let inst = BibInstance::for_set(set, n, m, dist)?;
    let beta = poisson_bin_parameter(inst, set.users());
    Ok(set.power_match_probability(levels) * set.users() as f64 / m as f64 * beta)
}

/// Sum of [`catalog_term`] over the three catalogued sets.
pub fn plr_from_catalog(n: usize, m: usize, levels: usize, dist: &DegreeDistribution) -> Result<f64> {
    StoppingSet::ALL
        .iter()
        .map(|&set| catalog_term(set, n, m, levels, dist))
        .sum()
}

/// The three terms of the one-shot error-floor formula, S1 first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorFloorTerms {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl ErrorFloorTerms {
    pub fn total(&self) -> f64 {
        self.s1 + self.s2 + self.s3
    }
}

fn check_floor_inputs(n: usize, levels: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::FrameTooShort { n, min: 4 });
    }
    if levels == 0 {
        return Err(Error::NoLevels);
    }
    Ok(())
}

/// Terms of the one-shot error-floor approximation:
///
/// ```text
/// 2 λ2² m / (L² n (n-1))
///   + 2 (n-2) (λ2 m)² / (L³ n² (n-1)²)
///   + 6 λ3² m / (L³ n (n-1) (n-2))
/// ```
pub fn error_floor_terms(
    n: usize,
    m: usize,
    levels: usize,
    dist: &DegreeDistribution,
) -> Result<ErrorFloorTerms> {
    check_floor_inputs(n, levels)?;
    let (n, m, l) = (n as f64, m as f64, levels as f64);
    let (l2, l3) = (dist.lambda(2), dist.lambda(3));
    Ok(ErrorFloorTerms {
        s1: 2.0 * l2 * l2 * m / (l * l * n * (n - 1.0)),
        s2: 2.0 * (n - 2.0) * (l2 * m).powi(2) / (l.powi(3) * n * n * (n - 1.0).powi(2)),
        s3: 6.0 * l3 * l3 * m / (l.powi(3) * n * (n - 1.0) * (n - 2.0)),
    })
}

/// Error-floor PLR approximation. Distributions without degree-2 or degree-3
/// users evaluate to zero since none of the catalogued sets can form.
pub fn plr_error_floor(n: usize, m: usize, levels: usize, dist: &DegreeDistribution) -> Result<f64> {
    error_floor_terms(n, m, levels, dist).map(|t| t.total())
}

/// Baseline that only accounts for S1.
pub fn plr_s1_only(n: usize, m: usize, levels: usize, dist: &DegreeDistribution) -> Result<f64> {
    error_floor_terms(n, m, levels, dist).map(|t| t.s1)
}

/// One measurement for the S2 bin-count fit: frame length, ball count `m̄`
/// and the PLR attributable to S2 on a single power level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    pub slots: usize,
    pub balls: f64,
    pub plr: f64,
}

impl FitSample {
    /// `b̄ = m̄ / sqrt(2 PLR)`.
    pub fn bins(&self) -> f64 {
        self.balls / (2.0 * self.plr).sqrt()
    }

    /// `g(n) = C(n,2)² / b̄²`, linear in `n` under the fitted model.
    pub fn shape(&self) -> f64 {
        (choose(self.slots, 2) / self.bins()).powi(2)
    }
}

/// Least-squares line `g(n) ≈ a0 + a1 n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCountFit {
    pub a0: f64,
    pub a1: f64,
    /// `g(n) - (a0 + a1 n)` per sample.
    pub residuals: Vec<f64>,
}

/// Fits the S2 bin-count model `b̄² = C(n,2)² / g(n)` with `g` linear.
pub fn fit_bin_count(samples: &[FitSample]) -> Result<BinCountFit> {
    for s in samples {
        if s.plr.is_nan() || s.plr <= 0.0 {
            return Err(Error::NonPositivePlr(s.plr));
        }
    }
    let mut distinct: Vec<usize> = samples.iter().map(|s| s.slots).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(distinct.len()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.slots as f64).collect();
    let ys: Vec<f64> = samples.iter().map(FitSample::shape).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let a1 = sxy / sxx;
    let a0 = my - a1 * mx;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (a0 + a1 * x)).collect();
    Ok(BinCountFit { a0, a1, residuals })
}
