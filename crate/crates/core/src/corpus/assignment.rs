use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, RobotManifest};

const MAX_ATTEMPTS: usize = 64;
const REPAIR_STEPS_PER_SLOT: usize = 200;

/// Ordered robot lists, one per participant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub hands: Vec<Vec<String>>,
    pub seed: u64,
}

impl Assignment {
    /// How many participants see each robot, in manifest order.
    pub fn view_counts(&self, manifest: &RobotManifest) -> Vec<(String, usize)> {
        manifest
            .robot_ids()
            .map(|id| {
                let n = self.hands.iter().filter(|h| h.iter().any(|r| r == id)).count();
                (id.to_string(), n)
            })
            .collect()
    }
}

/// Deals robots to participants so that every robot is viewed equally often.
///
/// A multiset holding each robot `n_participants * per_participant / n_robots`
/// times is shuffled and dealt into hands. Hands that received the same robot
/// twice are repaired by swapping cards with other hands, which keeps the
/// per-robot totals intact. When the total is not divisible by the robot
/// count, a seeded subset of robots receives one extra copy.
pub fn generate_assignment(
    n_participants: usize,
    manifest: &RobotManifest,
    per_participant: usize,
    seed: u64,
) -> Result<Assignment, CorpusError> {
    let n_robots = manifest.len();
    if per_participant > n_robots {
        return Err(CorpusError::TooManyPerParticipant {
            per_participant,
            n_robots,
        });
    }
    let ids: Vec<&str> = manifest.robot_ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n_participants == 0 || per_participant == 0 {
        return Ok(Assignment {
            hands: vec![Vec::new(); n_participants],
            seed,
        });
    }

    let total = n_participants * per_participant;
    let base = total / n_robots;
    let extra = total % n_robots;
    let mut order: Vec<usize> = (0..n_robots).collect();
    order.shuffle(&mut rng);
    let mut deck: Vec<usize> = Vec::with_capacity(total);
    for (rank, &robot) in order.iter().enumerate() {
        let copies = base + usize::from(rank < extra);
        deck.extend(std::iter::repeat_n(robot, copies));
    }

    for _ in 0..MAX_ATTEMPTS {
        deck.shuffle(&mut rng);
        let mut hands: Vec<Vec<usize>> = deck.chunks(per_participant).map(<[usize]>::to_vec).collect();
        if !repair(&mut hands, &mut rng) {
            continue;
        }
        for hand in &mut hands {
            hand.shuffle(&mut rng);
        }
        if n_participants > 1 && has_identical_hands(&hands) && !identical_forced(n_robots, per_participant, n_participants) {
            continue;
        }
        let hands = hands
            .into_iter()
            .map(|h| h.into_iter().map(|i| ids[i].to_string()).collect())
            .collect();
        return Ok(Assignment { hands, seed });
    }
    Err(CorpusError::AssignmentExhausted(MAX_ATTEMPTS))
}

fn repair(hands: &mut [Vec<usize>], rng: &mut ChaCha8Rng) -> bool {
    let n_hands = hands.len();
    let per = hands[0].len();
    let budget = REPAIR_STEPS_PER_SLOT * n_hands * per;
    for _ in 0..budget {
        let Some((h, pos)) = find_duplicate(hands) else {
            return true;
        };
        if n_hands == 1 {
            return false;
        }
        let card = hands[h][pos];
        let g = loop {
            let g = rng.random_range(0..n_hands);
            if g != h {
                break g;
            }
        };
        let q = rng.random_range(0..per);
        let other = hands[g][q];
        if hands[h].contains(&other) || hands[g].contains(&card) {
            continue;
        }
        hands[h][pos] = other;
        hands[g][q] = card;
    }
    find_duplicate(hands).is_none()
}

fn find_duplicate(hands: &[Vec<usize>]) -> Option<(usize, usize)> {
    for (h, hand) in hands.iter().enumerate() {
        for (i, card) in hand.iter().enumerate() {
            if hand[..i].contains(card) {
                return Some((h, i));
            }
        }
    }
    None
}

fn has_identical_hands(hands: &[Vec<usize>]) -> bool {
    let mut seen = BTreeSet::new();
    hands.iter().any(|h| !seen.insert(h.clone()))
}

/// True when there are more participants than distinct ordered lists.
fn identical_forced(n_robots: usize, per: usize, n_participants: usize) -> bool {
    let mut distinct: u128 = 1;
    for k in 0..per {
        distinct = distinct.saturating_mul((n_robots - k) as u128);
        if distinct >= n_participants as u128 {
            return false;
        }
    }
    distinct < n_participants as u128
}
