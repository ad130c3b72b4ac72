#![allow(dead_code)]

use std::collections::BTreeSet;

use eh_irsa::FrameAlloc;
use rand::Rng;

/// Frame whose edges are the set bits of `mask`, bit `u * slots + k` meaning
/// user `u` transmits in slot `k`.
pub fn frame_from_mask(users: usize, slots: usize, mask: u64) -> FrameAlloc {
    let lists = (0..users)
        .map(|u| {
            (0..slots)
                .filter(|k| mask >> (u * slots + k) & 1 == 1)
                .collect()
        })
        .collect();
    FrameAlloc::from_slots(slots, lists).unwrap()
}

pub fn random_frame<R: Rng>(rng: &mut R, max_users: usize, max_slots: usize) -> FrameAlloc {
    let users = rng.random_range(1..=max_users);
    let slots = rng.random_range(1..=max_slots);
    let lists = (0..users)
        .map(|_| (0..slots).filter(|_| rng.random_bool(0.35)).collect())
        .collect();
    FrameAlloc::from_slots(slots, lists).unwrap()
}

fn singletons(members: &[Vec<usize>], decoded: &BTreeSet<usize>) -> Vec<usize> {
    members
        .iter()
        .filter_map(|m| {
            let live: Vec<usize> = m.iter().copied().filter(|u| !decoded.contains(u)).collect();
            (live.len() == 1).then(|| live[0])
        })
        .collect()
}

/// Peels by decoding a uniformly chosen clean slot at every step.
pub fn peel_random<R: Rng>(frame: &FrameAlloc, rng: &mut R) -> BTreeSet<usize> {
    let members = frame.slot_members();
    let mut decoded = BTreeSet::new();
    loop {
        let ready = singletons(&members, &decoded);
        if ready.is_empty() {
            return decoded;
        }
        decoded.insert(ready[rng.random_range(0..ready.len())]);
    }
}

/// Every terminal decoded set reachable by some peeling order.
pub fn peel_all_orders(frame: &FrameAlloc) -> BTreeSet<BTreeSet<usize>> {
    fn go(members: &[Vec<usize>], decoded: BTreeSet<usize>, out: &mut BTreeSet<BTreeSet<usize>>) {
        let ready: BTreeSet<usize> = singletons(members, &decoded).into_iter().collect();
        if ready.is_empty() {
            out.insert(decoded);
            return;
        }
        for u in ready {
            let mut next = decoded.clone();
            next.insert(u);
            go(members, next, out);
        }
    }
    let mut out = BTreeSet::new();
    go(&frame.slot_members(), BTreeSet::new(), &mut out);
    out
}

/// Checks that `order` is a legal peeling sequence of `frame`.
pub fn is_valid_order(frame: &FrameAlloc, order: &[usize]) -> bool {
    let members = frame.slot_members();
    let mut decoded = BTreeSet::new();
    for &u in order {
        if !singletons(&members, &decoded).contains(&u) || !decoded.insert(u) {
            return false;
        }
    }
    singletons(&members, &decoded).is_empty()
}
