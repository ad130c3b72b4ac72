//! Tabular Q-learning over (battery level, extra replicas).
//!
//! Action `a` means "send `1 + a` copies" whenever the battery holds at least
//! one quantum; an empty battery forces action 0 with zero copies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harvest::Battery;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    states: usize,
    actions: usize,
    values: Vec<T>,
}

impl<T: Real> QTable<T> {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            values: vec![T::zero(); states * actions],
        }
    }

    /// Entries drawn uniformly from `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(states: usize, actions: usize, rng: &mut R) -> Self {
        Self {
            states,
            actions,
            values: (0..states * actions)
                .map(|_| T::unit_uniform(rng))
                .collect(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn get(&self, state: usize, action: usize) -> T {
        self.values[state * self.actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: T) {
        self.values[state * self.actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn max_value(&self, state: usize) -> T {
        self.row(state)
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max)
    }

    /// Highest-valued action among `candidates`; ties go to the lowest index.
    pub fn argmax_over(&self, state: usize, candidates: &[usize]) -> Option<usize> {
        let row = self.row(state);
        let mut best: Option<usize> = None;
        for &a in candidates {
            best = match best {
                Some(b) if row[a] > row[b] || (row[a] == row[b] && a < b) => Some(a),
                Some(b) => Some(b),
                None => Some(a),
            };
        }
        best
    }

    /// Bellman update of one cell: `Q <- (1 - mu) Q + mu (r + delta max Q(s', .))`.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: T,
        next_state: usize,
        learning_rate: T,
        discount: T,
    ) {
        let target = reward + discount * self.max_value(next_state);
        let old = self.get(state, action);
        self.set(
            state,
            action,
            (T::one() - learning_rate) * old + learning_rate * target,
        );
    }

    /// Flat `(state, action, value)` export.
    pub fn snapshot(&self) -> Vec<QEntry> {
        (0..self.states)
            .flat_map(|s| {
                (0..self.actions).map(move |a| QEntry {
                    state: s,
                    action: a,
                    value: self.get(s, a).as_f64(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

/// Renders a snapshot as `state,action,value` CSV.
pub fn snapshot_csv(entries: &[QEntry]) -> String {
    let mut out = String::from("state,action,value\n");
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.state, e.action, e.value));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams<T> {
    pub learning_rate: T,
    pub discount: T,
    pub epsilon0: T,
    pub epsilon_min: T,
    /// Per-frame geometric decay factor of epsilon.
    pub decay_rate: T,
    /// Planning horizon in frames.
    pub horizon: usize,
}

impl<T: Real> LearningParams<T> {
    /// Picks the decay factor so that epsilon reaches `epsilon_min` after `horizon` frames.
    pub fn with_horizon(
        learning_rate: T,
        discount: T,
        epsilon0: T,
        epsilon_min: T,
        horizon: usize,
    ) -> Self {
        let decay_rate = if epsilon0 > epsilon_min && epsilon_min > T::zero() && horizon > 0 {
            (epsilon_min / epsilon0).powf(T::one() / T::from_usize(horizon).unwrap())
        } else {
            T::one()
        };
        Self {
            learning_rate,
            discount,
            epsilon0,
            epsilon_min,
            decay_rate,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !(self.learning_rate > T::zero() && self.learning_rate <= T::one()) {
            return Err(invalid("learning_rate", "must lie in (0, 1]"));
        }
        if !(self.discount >= T::zero() && self.discount < T::one()) {
            return Err(invalid("discount", "must lie in [0, 1)"));
        }
        if !unit(self.epsilon0) {
            return Err(invalid("epsilon0", "must lie in [0, 1]"));
        }
        if !unit(self.epsilon_min) {
            return Err(invalid("epsilon_min", "must lie in [0, 1]"));
        }
        if !(self.decay_rate > T::zero() && self.decay_rate <= T::one()) {
            return Err(invalid("epsilon_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Exploration probability at frame `t`.
    pub fn epsilon_at(&self, t: usize) -> T {
        let floor = self.epsilon_min.min(self.epsilon0);
        let exponent = T::from_usize(t).unwrap_or_else(T::max_value);
        (self.epsilon0 * self.decay_rate.powf(exponent)).max(floor)
    }
}

/// Actions affordable with one quantum per copy.
pub fn feasible_actions<T: Real>(battery: &Battery<T>, max_packets: usize) -> Vec<usize> {
    feasible_actions_with_cost(battery, max_packets, battery.quantum())
}

/// As [`feasible_actions`], additionally requiring `(1 + a) * per_copy <= E`.
pub fn feasible_actions_with_cost<T: Real>(
    battery: &Battery<T>,
    max_packets: usize,
    per_copy: T,
) -> Vec<usize> {
    let level = battery.level() as usize;
    if level == 0 {
        return vec![0];
    }
    let slack = battery.quantum() * T::level_slack();
    let by_level = level.min(max_packets + 1);
    let mut actions = vec![0];
    actions.extend(
        (1..by_level)
            .filter(|&a| T::from_usize(a + 1).unwrap() * per_copy <= battery.stored() + slack),
    );
    actions
}

/// Copies transmitted for `action` given the battery level.
pub fn copies_for(level: u32, action: usize) -> u32 {
    if level == 0 {
        0
    } else {
        1 + action as u32
    }
}

/// Epsilon-greedy choice over `feasible`. One uniform draw decides between
/// exploring and exploiting; exploring draws a second index.
pub fn select_action<T: Real, R: Rng + ?Sized>(
    q: &QTable<T>,
    state: usize,
    epsilon: T,
    feasible: &[usize],
    rng: &mut R,
) -> Result<usize> {
    if feasible.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let x = T::unit_uniform(rng);
    if x < epsilon {
        Ok(feasible[rng.random_range(0..feasible.len())])
    } else {
        Ok(q.argmax_over(state, feasible).expect("non-empty"))
    }
}

/// One independent learner: its table plus the transition awaiting its next state.
#[derive(Debug, Clone)]
pub struct Learner<T> {
    pub table: QTable<T>,
    pub params: LearningParams<T>,
    pending: Option<(usize, usize, T)>,
}

impl<T: Real> Learner<T> {
    pub fn new(table: QTable<T>, params: LearningParams<T>) -> Self {
        Self {
            table,
            params,
            pending: None,
        }
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        state: usize,
        frame: usize,
        feasible: &[usize],
        rng: &mut R,
    ) -> Result<usize> {
        select_action(
            &self.table,
            state,
            self.params.epsilon_at(frame),
            feasible,
            rng,
        )
    }

    /// Stores `(s, a, r)` until the next state is observed.
    pub fn record(&mut self, state: usize, action: usize, reward: T) {
        self.pending = Some((state, action, reward));
    }

    /// Completes the pending transition with `next_state`.
    pub fn observe(&mut self, next_state: usize) {
        if let Some((s, a, r)) = self.pending.take() {
            self.table.update(
                s,
                a,
                r,
                next_state,
                self.params.learning_rate,
                self.params.discount,
            );
        }
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }
}
