//! Reference decoders shared by the integration tests.

use noma_irsa::model::{parse_degree_distribution, build_power_ladder, PowerLadder, SystemConfig};
use noma_irsa::sim::FrameInstance;
use noma_irsa::sinr;
use rand::seq::SliceRandom;
use rand::Rng;

/// Full passes over the slots in `order`, scanning every user for replicas in
/// the visited slot, until a pass decodes nobody.
pub fn naive_decode(frame: &FrameInstance, ladder: &PowerLadder, order: &[usize]) -> Vec<usize> {
    let mut decoded = vec![false; frame.user_count()];
    loop {
        let mut progress = false;
        for &slot in order {
            loop {
                let present: Vec<(usize, f64)> = frame
                    .users()
                    .filter(|u| !decoded[u.user_id])
                    .filter_map(|u| u.level_at(slot).map(|l| (u.user_id, ladder.power(l))))
                    .collect();
                let Some(&(top, power)) = present
                    .iter()
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                else {
                    break;
                };
                let others = present.iter().filter(|&&(u, _)| u != top).map(|&(_, p)| p);
                if !ladder.decodable(sinr(power, others)) {
                    break;
                }
                decoded[top] = true;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    (0..decoded.len()).filter(|&u| decoded[u]).collect()
}

/// Classic collision-channel peeling: repeatedly resolve any slot holding a
/// single undecoded replica.
pub fn peeling_decode(frame: &FrameInstance) -> Vec<usize> {
    let mut decoded = vec![false; frame.user_count()];
    loop {
        let mut found = None;
        for slot in 0..frame.slot_count() {
            let occupants: Vec<usize> = frame
                .users()
                .filter(|u| !decoded[u.user_id] && u.level_at(slot).is_some())
                .map(|u| u.user_id)
                .collect();
            if occupants.len() == 1 {
                found = Some(occupants[0]);
                break;
            }
        }
        match found {
            Some(u) => decoded[u] = true,
            None => break,
        }
    }
    (0..decoded.len()).filter(|&u| decoded[u]).collect()
}

/// Random small frame configuration: n ≤ 10, m ≤ 8, L ≤ 3.
pub fn small_config<R: Rng>(rng: &mut R) -> SystemConfig {
    let n = rng.gen_range(3..=10);
    let m = rng.gen_range(0..=8);
    let levels = rng.gen_range(1..=3);
    let dists = ["2:1", "3:1", "2:0.5,3:0.5", "2:0.3,3:0.4,4:0.3"];
    let usable: Vec<_> = dists
        .iter()
        .map(|d| parse_degree_distribution(d).unwrap())
        .filter(|d| d.max_degree() <= n)
        .collect();
    let dist = usable.choose(rng).unwrap().clone();
    SystemConfig::new(n, m, dist, build_power_ladder(3.0, levels).unwrap()).unwrap()
}
