//! Domain types shared by the simulator and the analytics: the replica degree
//! distribution, the NOMA power ladder and SINR arithmetic.
//!
//! Powers are expressed as linear received powers normalised to unit noise,
//! so an interference-free replica at power `p` has SINR `p`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ λ_r = 1`.
const NORMALIZATION_TOL: f64 = 1e-9;

/// Relative slack applied to the `Γ ≥ γ` decoding test.
///
/// The ladder is built so that the resolvable cases hit the threshold with
/// equality; rounding in the power sums must not flip those to failures.
pub const DECODE_TOLERANCE: f64 = 1e-9;

/// Probability mass over the number of replicas a user transmits.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    // sorted by degree, all probabilities > 0
    entries: Vec<(usize, f64)>,
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from `(r, λ_r)` pairs. Fails loudly instead of
    /// renormalising.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        entries.sort_by_key(|&(r, _)| r);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateDegree(pair[0].0));
            }
        }
        for &(degree, prob) in &entries {
            if degree < 2 {
                return Err(Error::DegreeTooSmall(degree));
            }
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(Error::InvalidProbability { degree, prob });
            }
        }
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(total));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = entries
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        // the last bucket must catch every uniform draw in [0, 1)
        *cumulative.last_mut().unwrap() = f64::INFINITY;
        Ok(DegreeDistribution { entries, cumulative })
    }

    /// The degenerate distribution `Λ(x) = x^r`.
    pub fn regular(degree: usize) -> Result<Self> {
        Self::new(vec![(degree, 1.0)])
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// `λ_r`, zero when `r` is not in the support.
    pub fn lambda(&self, degree: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(r, _)| r == degree)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn max_degree(&self) -> usize {
        self.entries.last().map_or(0, |&(r, _)| r)
    }

    /// Average number of replicas per user.
    pub fn mean_degree(&self) -> f64 {
        self.entries.iter().map(|&(r, p)| r as f64 * p).sum()
    }

    /// Draws a replica count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_degree(self, rng)
    }
}

/// Draws `r` with probability `λ_r`. Consumes exactly one `f64` from `rng`.
pub fn sample_degree<R: Rng + ?Sized>(dist: &DegreeDistribution, rng: &mut R) -> usize {
    if dist.entries.len() == 1 {
        return dist.entries[0].0;
    }
    let u: f64 = rng.gen();
    let idx = dist.cumulative.partition_point(|&c| c <= u);
    dist.entries[idx].0
}

/// Parses the `"r:prob,r:prob,..."` text form, e.g. `"2:0.5,3:0.5"`.
pub fn parse_degree_distribution(spec: &str) -> Result<DegreeDistribution> {
    let mut entries = Vec::new();
    for raw in spec.split(',') {
        let pair = raw.trim();
        let (r, p) = pair
            .split_once(':')
            .ok_or_else(|| Error::MalformedPair(pair.to_string()))?;
        let degree: usize = r
            .trim()
            .parse()
            .map_err(|_| Error::MalformedPair(pair.to_string()))?;
        let prob: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::MalformedPair(pair.to_string()))?;
        entries.push((degree, prob));
    }
    DegreeDistribution::new(entries)
}

impl FromStr for DegreeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_degree_distribution(s)
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(r, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}:{p}")?;
        }
        Ok(())
    }
}

/// The `L` received power levels `p_1 > ... > p_L` of a NOMA receiver with
/// SINR threshold `γ`.
///
/// Each level equals `γ` times one plus the sum of all weaker levels, so a
/// slot holding one replica per level can be peeled from the top, every step
/// landing exactly on the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLadder {
    gamma: f64,
    levels: Vec<f64>,
}

impl PowerLadder {
    /// Ladder for a linear threshold `gamma`: `p_k = γ (γ + 1)^(L - k)`.
    pub fn from_linear(gamma: f64, level_count: usize) -> Result<Self> {
        if level_count == 0 {
            return Err(Error::NoLevels);
        }
        if level_count > u8::MAX as usize {
            return Err(Error::TooManyLevels(level_count));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::NonFiniteThreshold(gamma));
        }
        let levels = (1..=level_count)
            .map(|k| gamma * (gamma + 1.0).powi((level_count - k) as i32))
            .collect();
        Ok(PowerLadder { gamma, levels })
    }

    /// Linear SINR threshold.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_db(&self) -> f64 {
        10.0 * self.gamma.log10()
    }

    /// Number of levels `L`.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `p_1..p_L`, strongest first.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Power of the 1-based level index `k`.
    #[inline]
    pub fn power(&self, level: u8) -> f64 {
        self.levels[level as usize - 1]
    }

    /// Whether an SINR value passes the `Γ ≥ γ` test.
    #[inline]
    pub fn decodable(&self, sinr: f64) -> bool {
        sinr >= self.gamma * (1.0 - DECODE_TOLERANCE)
    }
}

/// Builds the ladder from a threshold in dB. `L = 1` is allowed and reduces
/// to a collision channel with a single power.
pub fn build_power_ladder(gamma_db: f64, level_count: usize) -> Result<PowerLadder> {
    if level_count == 0 {
        return Err(Error::NoLevels);
    }
    if !gamma_db.is_finite() {
        return Err(Error::NonFiniteThreshold(gamma_db));
    }
    PowerLadder::from_linear(10f64.powf(gamma_db / 10.0), level_count)
}

/// SINR of a replica at `target_power` against the given interferers, with
/// unit noise power.
pub fn sinr<I>(target_power: f64, interferer_powers: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let interference: f64 = interferer_powers.into_iter().sum();
    target_power / (1.0 + interference)
}

/// Frame length, user population, degree distribution and power ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    slots: usize,
    users: usize,
    dist: DegreeDistribution,
    ladder: PowerLadder,
}

impl SystemConfig {
    pub fn new(
        slots: usize,
        users: usize,
        dist: DegreeDistribution,
        ladder: PowerLadder,
    ) -> Result<Self> {
        if slots == 0 {
            return Err(Error::NoSlots);
        }
        if dist.max_degree() > slots {
            return Err(Error::DegreeExceedsSlots {
                degree: dist.max_degree(),
                slots,
            });
        }
        Ok(SystemConfig {
            slots,
            users,
            dist,
            ladder,
        })
    }

    /// Slots per frame, `n`.
    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Active users per frame, `m`.
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn dist(&self) -> &DegreeDistribution {
        &self.dist
    }

    pub fn ladder(&self) -> &PowerLadder {
        &self.ladder
    }

    /// Channel load `G = m / n` in packets per slot.
    pub fn load(&self) -> f64 {
        self.users as f64 / self.slots as f64
    }
}
