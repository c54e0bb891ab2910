//! Structural detection of the catalogued stopping sets in transmitted frames.
//!
//! Counting is purely combinatorial over the frame as sent. Replicas of users
//! outside a set that share its slots are ignored, even though in the decoder
//! they can only make the set harder to break.

use std::collections::HashMap;

use crate::analytics::{poisson_bin_parameter, BibInstance, StoppingSet};
use crate::error::Result;
use crate::model::SystemConfig;
use crate::sim::FrameInstance;

/// One occurrence of a stopping-set shape among a frame's users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub set: StoppingSet,
    /// Member user ids, ascending.
    pub members: Vec<usize>,
    /// Whether every slot of the set holds its members' replicas at one
    /// common power level.
    pub blocking: bool,
}

/// Per-set structural and blocking counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CensusCounts {
    pub structural: [u64; 3],
    pub blocking: [u64; 3],
}

fn set_index(set: StoppingSet) -> usize {
    match set {
        StoppingSet::S1 => 0,
        StoppingSet::S2 => 1,
        StoppingSet::S3 => 2,
    }
}

impl CensusCounts {
    pub fn structural(&self, set: StoppingSet) -> u64 {
        self.structural[set_index(set)]
    }

    pub fn blocking(&self, set: StoppingSet) -> u64 {
        self.blocking[set_index(set)]
    }

    fn record(&mut self, occ: &Occurrence) {
        let i = set_index(occ.set);
        self.structural[i] += 1;
        if occ.blocking {
            self.blocking[i] += 1;
        }
    }
}

/// Key of a sorted slot pair or triple.
type SlotKey = (u32, u32, u32);

fn sorted_slots(frame: &FrameInstance, user: usize) -> SlotKey {
    let mut s: Vec<u32> = frame.replicas_of(user).iter().map(|r| r.slot).collect();
    s.sort_unstable();
    (s[0], s[1], s.get(2).copied().unwrap_or(u32::MAX))
}

fn level(frame: &FrameInstance, user: usize, slot: u32) -> u8 {
    frame
        .replicas_of(user)
        .iter()
        .find(|r| r.slot == slot)
        .map(|r| r.level)
        .expect("member transmits in the slot")
}

/// Lists every S1, S2 and S3 occurrence in `frame`.
///
/// S1 and S3 are pairs of degree-2 (degree-3) users with identical slot sets.
/// S2 is a triple of degree-2 users whose slot pairs close a triangle on
/// three distinct slots.
pub fn find_occurrences(frame: &FrameInstance) -> Vec<Occurrence> {
    let mut by_slots: HashMap<SlotKey, Vec<usize>> = HashMap::new();
    for user in 0..frame.user_count() {
        let degree = frame.replicas_of(user).len();
        if degree == 2 || degree == 3 {
            by_slots.entry(sorted_slots(frame, user)).or_default().push(user);
        }
    }

    let mut found = Vec::new();
    for (key, users) in &by_slots {
        let (set, slots): (StoppingSet, &[u32]) = if key.2 == u32::MAX {
            (StoppingSet::S1, &[key.0, key.1])
        } else {
            (StoppingSet::S3, &[key.0, key.1, key.2])
        };
        for (i, &a) in users.iter().enumerate() {
            for &b in &users[i + 1..] {
                let blocking = slots.iter().all(|&s| level(frame, a, s) == level(frame, b, s));
                found.push(Occurrence {
                    set,
                    members: vec![a.min(b), a.max(b)],
                    blocking,
                });
            }
        }
    }

    // triangles a < b < c over the multigraph whose edges are degree-2 users
    let mut upper: HashMap<u32, Vec<(u32, usize)>> = HashMap::new();
    for (key, users) in &by_slots {
        if key.2 == u32::MAX {
            for &u in users {
                upper.entry(key.0).or_default().push((key.1, u));
            }
        }
    }
    for (&a, from_a) in &upper {
        for &(b, ab) in from_a {
            let Some(from_b) = upper.get(&b) else { continue };
            for &(c, bc) in from_b {
                let Some(acs) = by_slots.get(&(a, c, u32::MAX)) else { continue };
                for &ac in acs {
                    let blocking = level(frame, ab, a) == level(frame, ac, a)
                        && level(frame, ab, b) == level(frame, bc, b)
                        && level(frame, bc, c) == level(frame, ac, c);
                    let mut members = vec![ab, bc, ac];
                    members.sort_unstable();
                    found.push(Occurrence {
                        set: StoppingSet::S2,
                        members,
                        blocking,
                    });
                }
            }
        }
    }
    found.sort_by(|x, y| (x.set, &x.members).cmp(&(y.set, &y.members)));
    found
}

/// Structural and blocking counts of one frame.
pub fn census(frame: &FrameInstance) -> CensusCounts {
    let mut counts = CensusCounts::default();
    for occ in find_occurrences(frame) {
        counts.record(&occ);
    }
    counts
}

/// Census totals over many frames, with the moments needed for standard
/// errors of the per-frame means. Integer-only, so merging is exact in any
/// order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CensusReport {
    pub frames: u64,
    pub totals: CensusCounts,
    /// Sum over frames of the squared per-frame structural counts.
    pub structural_sq: [u64; 3],
}

impl CensusReport {
    pub fn add(&mut self, counts: &CensusCounts) {
        self.frames += 1;
        for i in 0..3 {
            self.totals.structural[i] += counts.structural[i];
            self.totals.blocking[i] += counts.blocking[i];
            self.structural_sq[i] += counts.structural[i] * counts.structural[i];
        }
    }

    pub fn merge(mut self, other: &CensusReport) -> CensusReport {
        self.frames += other.frames;
        for i in 0..3 {
            self.totals.structural[i] += other.totals.structural[i];
            self.totals.blocking[i] += other.totals.blocking[i];
            self.structural_sq[i] += other.structural_sq[i];
        }
        self
    }

    pub fn structural_mean(&self, set: StoppingSet) -> f64 {
        self.totals.structural(set) as f64 / self.frames.max(1) as f64
    }

    pub fn blocking_mean(&self, set: StoppingSet) -> f64 {
        self.totals.blocking(set) as f64 / self.frames.max(1) as f64
    }

    /// Standard error of [`CensusReport::structural_mean`].
    pub fn structural_std_error(&self, set: StoppingSet) -> f64 {
        if self.frames < 2 {
            return f64::INFINITY;
        }
        let n = self.frames as f64;
        let mean = self.structural_mean(set);
        let var = (self.structural_sq[set_index(set)] as f64 / n - mean * mean) * n / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }

    /// Fraction of structural occurrences that were also blocking.
    pub fn blocking_fraction(&self, set: StoppingSet) -> Option<f64> {
        let s = self.totals.structural(set);
        (s > 0).then(|| self.totals.blocking(set) as f64 / s as f64)
    }
}

/// Poisson prediction for one stopping set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCount {
    pub set: StoppingSet,
    /// Expected structural occurrences per frame, `β_ν`.
    pub structural: f64,
    /// Expected blocking occurrences per frame, `β_ν / L^μ`.
    pub blocking: f64,
}

/// Expected per-frame counts of each catalogued set under `config`.
pub fn expected_counts(config: &SystemConfig) -> Result<Vec<ExpectedCount>> {
    StoppingSet::ALL
        .iter()
        .map(|&set| {
            let inst = BibInstance::for_set(set, config.slots(), config.users(), config.dist())?;
            let beta = poisson_bin_parameter(inst, set.users());
            Ok(ExpectedCount {
                set,
                structural: beta,
                blocking: beta * set.power_match_probability(config.ladder().len()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_power_ladder, parse_degree_distribution, DegreeDistribution};

    #[test]
    fn empty_frame_has_no_sets() {
        assert_eq!(census(&FrameInstance::empty(10)), CensusCounts::default());
    }

    #[test]
    fn power_matched_pair() {
        let frame = FrameInstance::from_users(
            6,
            [vec![(1, 2), (4, 1)], vec![(4, 1), (1, 2)], vec![(0, 1), (2, 1)]],
        )
        .unwrap();
        let c = census(&frame);
        assert_eq!(c.structural(StoppingSet::S1), 1);
        assert_eq!(c.blocking(StoppingSet::S1), 1);
        assert_eq!(c.structural(StoppingSet::S2), 0);
        let occ = find_occurrences(&frame);
        assert_eq!(occ[0].members, vec![0, 1]);
    }

    #[test]
    fn triangle_with_mismatched_slot() {
        let frame = FrameInstance::from_users(
            5,
            [
                vec![(0, 1), (1, 2)],
                vec![(1, 2), (2, 3)],
                vec![(2, 1), (0, 2)],
            ],
        )
        .unwrap();
        let c = census(&frame);
        assert_eq!(c.structural(StoppingSet::S2), 1);
        assert_eq!(c.blocking(StoppingSet::S2), 0);
        assert_eq!(c.structural(StoppingSet::S1), 0);
    }

    #[test]
    fn blocking_triangle_and_triple_pair() {
        let frame = FrameInstance::from_users(
            8,
            [
                vec![(3, 1), (5, 2)],
                vec![(5, 2), (7, 3)],
                vec![(7, 3), (3, 1)],
                vec![(0, 1), (1, 1), (2, 2)],
                vec![(2, 2), (0, 1), (1, 1)],
                vec![(0, 1), (1, 1), (2, 3)],
            ],
        )
        .unwrap();
        let c = census(&frame);
        assert_eq!(c.structural(StoppingSet::S2), 1);
        assert_eq!(c.blocking(StoppingSet::S2), 1);
        assert_eq!(c.structural(StoppingSet::S3), 3);
        assert_eq!(c.blocking(StoppingSet::S3), 1);
    }

    #[test]
    fn parallel_edges_multiply_triangles() {
        let frame = FrameInstance::from_users(
            3,
            [
                vec![(0, 1), (1, 1)],
                vec![(0, 1), (1, 1)],
                vec![(1, 1), (2, 1)],
                vec![(0, 1), (2, 1)],
            ],
        )
        .unwrap();
        let c = census(&frame);
        assert_eq!(c.structural(StoppingSet::S2), 2);
        assert_eq!(c.structural(StoppingSet::S1), 1);
    }

    #[test]
    fn expected_counts_examples() {
        let cfg = SystemConfig::new(
            200,
            80,
            parse_degree_distribution("2:0.5,3:0.5").unwrap(),
            build_power_ladder(3.0, 3).unwrap(),
        )
        .unwrap();
        let e = expected_counts(&cfg).unwrap();
        let want = 19900.0 * (40.0f64 / 19900.0).powi(2) / 2.0;
        assert!((e[0].structural - want).abs() < 1e-15);
        assert!((e[0].blocking - want / 9.0).abs() < 1e-15);

        let single = SystemConfig::new(
            200,
            80,
            parse_degree_distribution("2:0.5,3:0.5").unwrap(),
            build_power_ladder(3.0, 1).unwrap(),
        )
        .unwrap();
        for e in expected_counts(&single).unwrap() {
            assert_eq!(e.structural, e.blocking);
        }

        let x3 = SystemConfig::new(
            200,
            80,
            DegreeDistribution::regular(3).unwrap(),
            build_power_ladder(3.0, 3).unwrap(),
        )
        .unwrap();
        let e = expected_counts(&x3).unwrap();
        assert_eq!(e[0].structural, 0.0);
        assert_eq!(e[1].structural, 0.0);
        assert!(e[2].structural > 0.0);
    }
}
