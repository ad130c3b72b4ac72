//! Frame assembly and successive-interference-cancellation decoding.
//!
//! A frame is the bipartite graph between users and the `K` data slots of
//! one time frame. The base station repeatedly picks a slot holding exactly
//! one undecoded packet, decodes that user and cancels all of its replicas.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harvest::Battery;
use crate::scalar::Real;

/// User-by-slot allocation of one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAlloc {
    slots_per_frame: usize,
    /// Sorted, duplicate-free slot list per user.
    user_slots: Vec<Vec<usize>>,
}

impl FrameAlloc {
    pub fn new(slots_per_frame: usize, users: usize) -> Self {
        Self {
            slots_per_frame,
            user_slots: vec![Vec::new(); users],
        }
    }

    /// Builds a frame from explicit per-user slot lists.
    pub fn from_slots(slots_per_frame: usize, user_slots: Vec<Vec<usize>>) -> Result<Self> {
        let mut frame = Self::new(slots_per_frame, user_slots.len());
        for (user, slots) in user_slots.into_iter().enumerate() {
            frame.assign(user, slots)?;
        }
        Ok(frame)
    }

    /// Reads a frame written as `slots = K` followed by one `user = s1 s2 ...`
    /// line per user, slots counted from zero. `#` starts a comment.
    pub fn parse_graph(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            what: "frame graph",
            reason,
        };
        let mut slots = None;
        let mut users = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", i + 1)))?;
            match key.trim() {
                "slots" if slots.is_none() => {
                    slots = Some(value.trim().parse::<usize>().map_err(|_| {
                        bad(format!("line {}: bad slot count `{}`", i + 1, value.trim()))
                    })?)
                }
                "user" => users.push(
                    value
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| bad(format!("line {}: bad slot `{t}`", i + 1)))
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                other => return Err(bad(format!("line {}: unexpected key `{other}`", i + 1))),
            }
        }
        let slots = slots.ok_or_else(|| bad("missing `slots`".into()))?;
        Self::from_slots(slots, users)
    }

    /// Replaces the slot set of `user`.
    pub fn assign(&mut self, user: usize, mut slots: Vec<usize>) -> Result<()> {
        if user >= self.user_slots.len() {
            return Err(Error::InvalidRequest(format!("user {user} out of range")));
        }
        slots.sort_unstable();
        if let Some(&bad) = slots.iter().find(|&&s| s >= self.slots_per_frame) {
            return Err(Error::InvalidRequest(format!(
                "slot {bad} outside frame of {} slots",
                self.slots_per_frame
            )));
        }
        if slots.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRequest(format!(
                "duplicate slot for user {user}"
            )));
        }
        self.user_slots[user] = slots;
        Ok(())
    }

    pub fn slots_per_frame(&self) -> usize {
        self.slots_per_frame
    }

    pub fn users(&self) -> usize {
        self.user_slots.len()
    }

    pub fn slots_of(&self, user: usize) -> &[usize] {
        &self.user_slots[user]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_slots
            .iter()
            .enumerate()
            .flat_map(|(u, slots)| slots.iter().map(move |&s| (u, s)))
    }

    /// Users present in each slot.
    pub fn slot_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.slots_per_frame];
        for (u, s) in self.edges() {
            members[s].push(u);
        }
        members
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Decoded users, ascending.
    pub decoded_users: Vec<usize>,
    pub iterations: usize,
    /// User decoded at each iteration, in order.
    pub per_iteration_decodes: Vec<usize>,
}

impl DecodeResult {
    pub fn is_decoded(&self, user: usize) -> bool {
        self.decoded_users.binary_search(&user).is_ok()
    }
}

/// Peels the frame to its fixpoint, visiting the lowest-index singleton slot first.
pub fn sic_decode(frame: &FrameAlloc) -> DecodeResult {
    let members = frame.slot_members();
    let mut load: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut decoded = vec![false; frame.users()];
    let mut order = Vec::new();
    while let Some(slot) = load.iter().position(|&n| n == 1) {
        let user = members[slot]
            .iter()
            .copied()
            .find(|&u| !decoded[u])
            .expect("singleton slot holds one undecoded user");
        decoded[user] = true;
        order.push(user);
        for &s in frame.slots_of(user) {
            load[s] -= 1;
        }
    }
    let mut decoded_users = order.clone();
    decoded_users.sort_unstable();
    DecodeResult {
        decoded_users,
        iterations: order.len(),
        per_iteration_decodes: order,
    }
}

/// Uniformly random set of `copies` distinct slots out of `slots_per_frame`, ascending.
pub fn select_slots<R: Rng + ?Sized>(
    copies: usize,
    slots_per_frame: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if copies > slots_per_frame {
        return Err(Error::InvalidRequest(format!(
            "{copies} replicas do not fit in {slots_per_frame} slots"
        )));
    }
    let mut slots = index::sample(rng, slots_per_frame, copies).into_vec();
    slots.sort_unstable();
    Ok(slots)
}

/// Fixed-repetition baseline: two copies when affordable, else the main packet, else silence.
pub fn crdsa_policy<T: Real>(battery: &Battery<T>) -> u32 {
    battery.level().min(2)
}

/// Distribution of copies per frame; index is the copy count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPmf {
    pub probabilities: Vec<f64>,
}

impl ReplicaPmf {
    /// Coefficient of `x^copies`.
    pub fn get(&self, copies: usize) -> f64 {
        self.probabilities.get(copies).copied().unwrap_or(0.0)
    }

    /// Evaluates the generating polynomial at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.probabilities
            .iter()
            .rev()
            .fold(0.0, |acc, p| acc * x + p)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

/// Empirical copy-count distribution over `0..=max_count`.
pub fn empirical_pmf(history: &[u32], max_count: usize) -> Result<ReplicaPmf> {
    if history.is_empty() {
        return Err(Error::UndefinedPmf);
    }
    let mut counts = vec![0usize; max_count + 1];
    for &c in history {
        let slot = counts.get_mut(c as usize).ok_or_else(|| {
            Error::InvalidRequest(format!("copy count {c} exceeds maximum {max_count}"))
        })?;
        *slot += 1;
    }
    let n = history.len() as f64;
    Ok(ReplicaPmf {
        probabilities: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}
