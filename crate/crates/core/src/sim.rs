//! MAC frame generation and the SIC peeling decoder.
//!
//! Every user draws a replica count from the degree distribution, places the
//! replicas in distinct uniformly chosen slots and picks an independent
//! uniform power level for *each replica* (not one level per user).
//!
//! The decoder visits slots and, within a slot, only ever tests the strongest
//! replica still present. That loses nothing: a weaker replica has a smaller
//! numerator and a larger interference term (the stronger one now counts as
//! interference), so its SINR is strictly lower. A decoded user has all of its
//! replicas removed frame-wide and the affected slots are revisited. Since a
//! cancellation can only lower interference, decodability is monotone and the
//! fixed point does not depend on the visiting order.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{sample_degree, PowerLadder, SystemConfig};

/// One transmitted copy of a user's packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replica {
    pub slot: u32,
    /// 1-based index into the power ladder, `1` being the strongest level.
    pub level: u8,
}

/// Read-only view of one user's transmissions within a frame.
#[derive(Debug, Clone, Copy)]
pub struct UserTransmission<'a> {
    pub user_id: usize,
    pub replicas: &'a [Replica],
}

impl<'a> UserTransmission<'a> {
    pub fn degree(&self) -> usize {
        self.replicas.len()
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + 'a {
        self.replicas.iter().map(|r| r.slot as usize)
    }

    /// Power level used in `slot`, if the user transmits there.
    pub fn level_at(&self, slot: usize) -> Option<u8> {
        self.replicas
            .iter()
            .find(|r| r.slot as usize == slot)
            .map(|r| r.level)
    }
}

/// Replica placement and power choices of every user in one MAC frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameInstance {
    slots: usize,
    // replicas of user u live in replicas[offsets[u]..offsets[u + 1]]
    offsets: Vec<u32>,
    replicas: Vec<Replica>,
}

impl FrameInstance {
    pub fn empty(slots: usize) -> Self {
        FrameInstance {
            slots,
            offsets: vec![0],
            replicas: Vec::new(),
        }
    }

    /// Builds a frame from explicit `(slot, level)` lists, one per user.
    pub fn from_users<I, U>(slots: usize, users: I) -> Result<Self>
    where
        I: IntoIterator<Item = U>,
        U: IntoIterator<Item = (usize, u8)>,
    {
        let mut frame = FrameInstance::empty(slots);
        for user in users {
            let start = frame.replicas.len();
            for (slot, level) in user {
                if slot >= slots {
                    return Err(Error::InvalidSweep(format!(
                        "slot {slot} outside a frame of {slots} slots"
                    )));
                }
                if level == 0 {
                    return Err(Error::InvalidSweep("power levels are 1-based".into()));
                }
                if frame.replicas[start..].iter().any(|r| r.slot as usize == slot) {
                    return Err(Error::InvalidSweep(format!(
                        "user {} uses slot {slot} twice",
                        frame.offsets.len() - 1
                    )));
                }
                frame.replicas.push(Replica {
                    slot: slot as u32,
                    level,
                });
            }
            frame.offsets.push(frame.replicas.len() as u32);
        }
        Ok(frame)
    }

    /// Slot count `n`.
    pub fn slot_count(&self) -> usize {
        self.slots
    }

    pub fn user_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn replica_count(&self) -> usize {
        self.replicas.len()
    }

    #[inline]
    pub fn replicas_of(&self, user: usize) -> &[Replica] {
        &self.replicas[self.offsets[user] as usize..self.offsets[user + 1] as usize]
    }

    pub fn user(&self, user: usize) -> UserTransmission<'_> {
        UserTransmission {
            user_id: user,
            replicas: self.replicas_of(user),
        }
    }

    pub fn users(&self) -> impl Iterator<Item = UserTransmission<'_>> {
        (0..self.user_count()).map(move |u| self.user(u))
    }

    /// Refills this frame with a fresh random draw, reusing its buffers.
    pub fn regenerate<R: Rng + ?Sized>(&mut self, config: &SystemConfig, rng: &mut R) {
        let n = config.slots();
        let levels = config.ladder().len() as u8;
        self.slots = n;
        self.offsets.clear();
        self.offsets.push(0);
        self.replicas.clear();
        for _ in 0..config.users() {
            let degree = sample_degree(config.dist(), rng);
            let start = self.replicas.len();
            if 2 * degree <= n {
                while self.replicas.len() - start < degree {
                    let slot = rng.gen_range(0..n) as u32;
                    if self.replicas[start..].iter().all(|r| r.slot != slot) {
                        self.replicas.push(Replica { slot, level: 0 });
                    }
                }
            } else {
                for slot in index::sample(rng, n, degree) {
                    self.replicas.push(Replica {
                        slot: slot as u32,
                        level: 0,
                    });
                }
            }
            for replica in &mut self.replicas[start..] {
                replica.level = rng.gen_range(1..=levels);
            }
            self.offsets.push(self.replicas.len() as u32);
        }
    }
}

/// Draws one frame: per-user degree, distinct uniform slots, and an
/// independent uniform power level per replica.
pub fn generate_frame<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> FrameInstance {
    let mut frame = FrameInstance::empty(config.slots());
    frame.regenerate(config, rng);
    frame
}

/// Result of running SIC on a frame to its fixed point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// Sorted ids of decoded users.
    pub decoded: Vec<usize>,
    /// Sorted ids of users left undecoded.
    pub residual_users: Vec<usize>,
    /// Decoding rounds that recovered at least one user.
    pub iterations: usize,
}

/// Counts from a decoder run, without materialising the user sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeSummary {
    pub decoded: usize,
    pub residual: usize,
    pub iterations: usize,
}

/// Reusable SIC decoder. Holds scratch buffers so the Monte-Carlo loop does
/// not allocate per frame.
#[derive(Debug, Default, Clone)]
pub struct SicDecoder {
    slot_start: Vec<u32>,
    slot_users: Vec<u32>,
    slot_levels: Vec<u8>,
    decoded: Vec<bool>,
    pending: Vec<bool>,
    current: Vec<u32>,
    next: Vec<u32>,
    rank: Vec<u32>,
}

impl SicDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes `frame`, visiting slots in index order.
    ///
    /// # Panics
    /// If a replica's level index exceeds the ladder length.
    pub fn run(&mut self, frame: &FrameInstance, ladder: &PowerLadder) -> DecodeSummary {
        self.run_inner(frame, ladder, false)
    }

    /// Decodes `frame`, visiting slots by their position in `order` (a
    /// permutation of `0..n`) in every round.
    pub fn run_in_order(
        &mut self,
        frame: &FrameInstance,
        ladder: &PowerLadder,
        order: &[usize],
    ) -> DecodeSummary {
        assert_eq!(order.len(), frame.slot_count(), "order must cover every slot");
        self.rank.clear();
        self.rank.resize(frame.slot_count(), 0);
        for (pos, &slot) in order.iter().enumerate() {
            self.rank[slot] = pos as u32;
        }
        self.run_inner(frame, ladder, true)
    }

    /// Per-user decoded flags from the last run.
    pub fn decoded_flags(&self) -> &[bool] {
        &self.decoded
    }

    /// Materialises the last run as a [`DecodeOutcome`].
    pub fn outcome(&self, summary: DecodeSummary) -> DecodeOutcome {
        let (decoded, residual_users) = (0..self.decoded.len()).partition(|&u| self.decoded[u]);
        DecodeOutcome {
            decoded,
            residual_users,
            iterations: summary.iterations,
        }
    }

    fn index_slots(&mut self, frame: &FrameInstance) {
        let n = frame.slot_count();
        self.slot_start.clear();
        self.slot_start.resize(n + 1, 0);
        for r in &frame.replicas {
            self.slot_start[r.slot as usize + 1] += 1;
        }
        for s in 0..n {
            self.slot_start[s + 1] += self.slot_start[s];
        }
        let total = frame.replicas.len();
        self.slot_users.clear();
        self.slot_users.resize(total, 0);
        self.slot_levels.clear();
        self.slot_levels.resize(total, 0);
        // fill cursor reuses `next` as a per-slot write position
        self.next.clear();
        self.next.extend_from_slice(&self.slot_start[..n]);
        for user in 0..frame.user_count() {
            for r in frame.replicas_of(user) {
                let at = self.next[r.slot as usize] as usize;
                self.slot_users[at] = user as u32;
                self.slot_levels[at] = r.level;
                self.next[r.slot as usize] += 1;
            }
        }
        self.next.clear();
    }

    fn run_inner(
        &mut self,
        frame: &FrameInstance,
        ladder: &PowerLadder,
        ordered: bool,
    ) -> DecodeSummary {
        self.index_slots(frame);
        let n = frame.slot_count();
        let users = frame.user_count();
        self.decoded.clear();
        self.decoded.resize(users, false);
        self.pending.clear();
        self.pending.resize(n, false);
        self.current.clear();
        for s in 0..n {
            if self.slot_start[s + 1] > self.slot_start[s] {
                self.current.push(s as u32);
                self.pending[s] = true;
            }
        }
        if ordered {
            let rank = &self.rank;
            self.current.sort_unstable_by_key(|&s| rank[s as usize]);
        }

        let mut decoded_total = 0;
        let mut iterations = 0;
        while !self.current.is_empty() {
            let mut progress = false;
            for i in 0..self.current.len() {
                let slot = self.current[i] as usize;
                self.pending[slot] = false;
                let range = self.slot_start[slot] as usize..self.slot_start[slot + 1] as usize;
                loop {
                    let mut total = 0.0;
                    let mut best: Option<(usize, u8)> = None;
                    for e in range.clone() {
                        let user = self.slot_users[e] as usize;
                        if self.decoded[user] {
                            continue;
                        }
                        let level = self.slot_levels[e];
                        total += ladder.power(level);
                        if best.is_none_or(|(_, l)| level < l) {
                            best = Some((user, level));
                        }
                    }
                    let Some((user, level)) = best else { break };
                    let power = ladder.power(level);
                    if !ladder.decodable(power / (1.0 + (total - power))) {
                        break;
                    }
                    self.decoded[user] = true;
                    decoded_total += 1;
                    progress = true;
                    for r in frame.replicas_of(user) {
                        let other = r.slot as usize;
                        if other != slot && !self.pending[other] {
                            self.pending[other] = true;
                            self.next.push(other as u32);
                        }
                    }
                }
            }
            if progress {
                iterations += 1;
            }
            std::mem::swap(&mut self.current, &mut self.next);
            self.next.clear();
            if ordered {
                let rank = &self.rank;
                self.current.sort_unstable_by_key(|&s| rank[s as usize]);
            }
        }
        DecodeSummary {
            decoded: decoded_total,
            residual: users - decoded_total,
            iterations,
        }
    }
}

/// Runs SIC on `frame` to its fixed point.
pub fn sic_decode(frame: &FrameInstance, ladder: &PowerLadder) -> DecodeOutcome {
    let mut decoder = SicDecoder::new();
    let summary = decoder.run(frame, ladder);
    decoder.outcome(summary)
}

/// As [`sic_decode`] but visiting slots in the given order.
pub fn sic_decode_in_order(
    frame: &FrameInstance,
    ladder: &PowerLadder,
    order: &[usize],
) -> DecodeOutcome {
    let mut decoder = SicDecoder::new();
    let summary = decoder.run_in_order(frame, ladder, order);
    decoder.outcome(summary)
}
