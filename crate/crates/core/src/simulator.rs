//! Frame loop: charge, observe, act, allocate, decode, reward, learn.
//!
//! Each frame is one charging slot followed by `K` data slots. Users are
//! processed in index order; the frame is decoded once all users have placed
//! their replicas. A learner's transition `(s, a, r)` is completed with the
//! level it observes after the next frame's charge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{copies_for, feasible_actions_with_cost, Learner, QEntry, QTable};
use crate::channel::{sample_data_gain, sample_eh_channel, ChannelParams};
use crate::config::{QInit, RewardMode, ScenarioConfig, Scheme};
use crate::error::{Error, Result};
use crate::harvest::{incident_power, Battery, CostModel, CsiMode, EhCurve};
use crate::protocol::{
    crdsa_policy, empirical_pmf, select_slots, sic_decode, FrameAlloc, ReplicaPmf,
};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct UserState<T> {
    pub battery: Battery<T>,
    pub learner: Option<Learner<T>>,
    pub copies_history: Vec<u32>,
}

/// Decisions of one user for the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPlan {
    pub state: u32,
    pub action: usize,
    pub copies: u32,
    pub harvested_j: f64,
    pub discarded_j: f64,
    pub spent_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub actions: Vec<usize>,
    pub copies: Vec<u32>,
    /// Battery level observed before acting.
    pub levels: Vec<u32>,
    pub decoded: usize,
    pub rewards: Vec<f64>,
    pub harvested_j: Vec<f64>,
    /// Harvest lost to the capacity clip.
    pub discarded_j: Vec<f64>,
    pub spent_j: Vec<f64>,
    /// Stored energy after spending.
    pub stored_j: Vec<f64>,
}

/// Simulation state of one run.
#[derive(Debug, Clone)]
pub struct World<T> {
    channel: ChannelParams<T>,
    curve: EhCurve<T>,
    pb_power_w: T,
    csi_mode: CsiMode,
    cost_model: CostModel,
    charging_slot_s: T,
    charge_efficiency: T,
    slots_per_frame: usize,
    max_extra: usize,
    scheme: Scheme,
    reward: RewardMode,
    users: Vec<UserState<T>>,
    frame: usize,
}

impl<T: Real> World<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let channel = cfg.channel_params::<T>()?;
        let quantum = T::lit(cfg.quantum_joules());
        let initial = quantum * T::lit(cfg.initial_energy_packets);
        let states = cfg.battery_capacity_packets as usize + 1;
        let actions = cfg.max_packets + 1;
        let params = cfg.learning_params::<T>();
        let users = (0..cfg.users)
            .map(|_| {
                let battery = Battery::new(
                    initial.min(quantum * T::from_u32(cfg.battery_capacity_packets).unwrap()),
                    quantum,
                    cfg.battery_capacity_packets,
                )?;
                let learner = match cfg.scheme {
                    Scheme::QLearning => {
                        let table = match cfg.q_init {
                            QInit::Zero => QTable::zeros(states, actions),
                            QInit::Uniform => QTable::random(states, actions, rng),
                        };
                        Some(Learner::new(table, params))
                    }
                    Scheme::Crdsa => None,
                };
                Ok(UserState {
                    battery,
                    learner,
                    copies_history: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channel,
            curve: cfg.eh_curve(),
            pb_power_w: T::lit(cfg.pb_power_w),
            csi_mode: cfg.csi_mode,
            cost_model: cfg.cost_model,
            charging_slot_s: T::lit(cfg.charging_slot_s()),
            charge_efficiency: T::lit(cfg.charge_efficiency),
            slots_per_frame: cfg.slots_per_frame,
            max_extra: cfg.max_extra_replicas(),
            scheme: cfg.scheme,
            reward: cfg.reward,
            users,
            frame: 0,
        })
    }

    pub fn users(&self) -> &[UserState<T>] {
        &self.users
    }

    pub fn users_mut(&mut self) -> &mut [UserState<T>] {
        &mut self.users
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    /// Charging and per-user decisions of the current frame, plus the slot
    /// allocation they imply.
    pub fn plan_frame<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<(Vec<UserPlan>, FrameAlloc)> {
        let mut alloc = FrameAlloc::new(self.slots_per_frame, self.users.len());
        let mut plans = Vec::with_capacity(self.users.len());
        for (idx, user) in self.users.iter_mut().enumerate() {
            let ch = sample_eh_channel(&self.channel, rng)?;
            let gain = sample_data_gain(&self.channel, rng)?;

            let p_inc = incident_power(&ch, self.pb_power_w, self.csi_mode)?;
            let rate = self.curve.harvest_rate(p_inc)? * self.charge_efficiency;
            let before = user.battery.stored();
            let harvested = rate * self.charging_slot_s * T::lit(1e-3);
            user.battery = user.battery.charge(rate, self.charging_slot_s);
            let discarded = before + harvested - user.battery.stored();

            let state = user.battery.level();
            if let Some(learner) = user.learner.as_mut() {
                learner.observe(state as usize);
            }

            let per_copy = self.cost_model.per_copy(
                user.battery.quantum(),
                &gain,
                self.channel.bs_user_distance_m,
                self.channel.pathloss_exponent,
            );
            let (action, copies) = match &user.learner {
                Some(learner) => {
                    let feasible =
                        feasible_actions_with_cost(&user.battery, self.max_extra, per_copy);
                    let action = learner.act(state as usize, self.frame, &feasible, rng)?;
                    (action, copies_for(state, action))
                }
                None => {
                    let mut copies = crdsa_policy(&user.battery);
                    while copies > 0
                        && T::from_u32(copies).unwrap() * per_copy
                            > user.battery.stored() + user.battery.quantum() * T::level_slack()
                    {
                        copies -= 1;
                    }
                    (copies.saturating_sub(1) as usize, copies)
                }
            };

            let stored = user.battery.stored();
            user.battery = user
                .battery
                .spend_joules(per_copy * T::from_u32(copies).unwrap())?;
            let spent = stored - user.battery.stored();

            alloc.assign(
                idx,
                select_slots(copies as usize, self.slots_per_frame, rng)?,
            )?;
            plans.push(UserPlan {
                state,
                action,
                copies,
                harvested_j: harvested.as_f64(),
                discarded_j: discarded.as_f64(),
                spent_j: spent.as_f64(),
            });
        }
        Ok((plans, alloc))
    }

    /// Decodes `alloc`, hands out rewards and closes the frame.
    pub fn settle(&mut self, plans: &[UserPlan], alloc: &FrameAlloc) -> Result<FrameMetrics> {
        if plans.len() != self.users.len() || alloc.users() != self.users.len() {
            return Err(Error::InvalidRequest(
                "plan and allocation must cover every user".into(),
            ));
        }
        let result = sic_decode(alloc);
        let decoded = result.decoded_users.len();
        let rewards: Vec<f64> = (0..self.users.len())
            .map(|u| match self.reward {
                RewardMode::PerUser => {
                    if result.is_decoded(u) {
                        1.0
                    } else {
                        0.0
                    }
                }
                RewardMode::Shared => decoded as f64,
            })
            .collect();
        for ((user, plan), &r) in self.users.iter_mut().zip(plans).zip(&rewards) {
            if let Some(learner) = user.learner.as_mut() {
                learner.record(plan.state as usize, plan.action, T::lit(r));
            }
            user.copies_history.push(plan.copies);
        }
        let metrics = FrameMetrics {
            frame: self.frame,
            actions: plans.iter().map(|p| p.action).collect(),
            copies: plans.iter().map(|p| p.copies).collect(),
            levels: plans.iter().map(|p| p.state).collect(),
            decoded,
            rewards,
            harvested_j: plans.iter().map(|p| p.harvested_j).collect(),
            discarded_j: plans.iter().map(|p| p.discarded_j).collect(),
            spent_j: plans.iter().map(|p| p.spent_j).collect(),
            stored_j: self
                .users
                .iter()
                .map(|u| u.battery.stored().as_f64())
                .collect(),
        };
        self.frame += 1;
        Ok(metrics)
    }

    pub fn step_frame<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<FrameMetrics> {
        let (plans, alloc) = self.plan_frame(rng)?;
        self.settle(&plans, &alloc)
    }

    /// Completes outstanding transitions with the current (post-spend) level.
    pub fn flush(&mut self) {
        for user in &mut self.users {
            let level = user.battery.level() as usize;
            if let Some(learner) = user.learner.as_mut() {
                learner.observe(level);
            }
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_index: usize,
    pub frames: usize,
    /// Mean decoded packets per frame.
    pub mean_success: f64,
    pub success_series: Vec<u32>,
    /// Per-user distribution of copies per frame.
    pub replica_pmf: Vec<ReplicaPmf>,
    /// Mean stored energy across users after each frame, in quanta.
    pub energy_trace: Vec<f64>,
    pub q_tables: Vec<Vec<QEntry>>,
}

/// Random stream of run `run_index` under `master_seed`.
pub fn run_rng(master_seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index as u64);
    rng
}

/// Runs `cfg.frames` frames, passing every frame's metrics to `observer`.
pub fn run_observed<T: Real>(
    cfg: &ScenarioConfig,
    run_index: usize,
    mut observer: impl FnMut(&FrameMetrics),
) -> Result<RunSummary> {
    let mut rng = run_rng(cfg.seed, run_index);
    let mut world = World::<T>::new(cfg, &mut rng)?;
    let quantum = cfg.quantum_joules();
    let mut success_series = Vec::with_capacity(cfg.frames);
    let mut energy_trace = Vec::with_capacity(cfg.frames);
    for _ in 0..cfg.frames {
        let m = world.step_frame(&mut rng)?;
        success_series.push(m.decoded as u32);
        energy_trace.push(m.stored_j.iter().sum::<f64>() / (m.stored_j.len() as f64 * quantum));
        observer(&m);
    }
    world.flush();
    let max_copies = cfg.max_extra_replicas() + 1;
    let replica_pmf = world
        .users()
        .iter()
        .map(|u| empirical_pmf(&u.copies_history, max_copies))
        .collect::<Result<Vec<_>>>()?;
    let q_tables = world
        .users()
        .iter()
        .filter_map(|u| u.learner.as_ref().map(|l| l.table.snapshot()))
        .collect();
    let mean_success =
        success_series.iter().map(|&s| s as f64).sum::<f64>() / success_series.len() as f64;
    Ok(RunSummary {
        run_index,
        frames: cfg.frames,
        mean_success,
        success_series,
        replica_pmf,
        energy_trace,
        q_tables,
    })
}

pub fn run<T: Real>(cfg: &ScenarioConfig, run_index: usize) -> Result<RunSummary> {
    run_observed::<T>(cfg, run_index, |_| {})
}

/// All `cfg.runs` runs, in run order. Runs execute in parallel.
pub fn run_all<T: Real>(cfg: &ScenarioConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    (0..cfg.runs)
        .into_par_iter()
        .map(|i| run::<T>(cfg, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }

    /// Standard error of the mean for `n` samples.
    pub fn sem(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_success: Stat,
    pub success_series: Vec<Stat>,
    pub energy_trace: Vec<Stat>,
}

/// Mean and spread across runs of every scalar series.
pub fn aggregate(summaries: &[RunSummary]) -> Result<Aggregate> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::UndefinedAggregate("no runs".into()))?;
    if summaries.iter().any(|s| {
        s.success_series.len() != first.success_series.len()
            || s.energy_trace.len() != first.energy_trace.len()
    }) {
        return Err(Error::UndefinedAggregate("runs differ in length".into()));
    }
    let column = |f: &dyn Fn(&RunSummary) -> f64| -> Stat {
        Stat::of(&summaries.iter().map(f).collect::<Vec<_>>())
    };
    Ok(Aggregate {
        runs: summaries.len(),
        mean_success: column(&|s| s.mean_success),
        success_series: (0..first.success_series.len())
            .map(|t| column(&|s| s.success_series[t] as f64))
            .collect(),
        energy_trace: (0..first.energy_trace.len())
            .map(|t| column(&|s| s.energy_trace[t]))
            .collect(),
    })
}

/// Monte-Carlo mean of the per-frame harvest, in quanta, before the capacity clip.
pub fn mean_harvest_quanta(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<f64> {
    cfg.validate()?;
    let channel = cfg.channel_params::<f64>()?;
    let curve = cfg.eh_curve::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let ch = sample_eh_channel(&channel, &mut rng)?;
        let p = incident_power(&ch, cfg.pb_power_w, cfg.csi_mode)?;
        total += curve.harvest_rate(p)?;
    }
    let mean_rate_mw = total / samples as f64;
    Ok(mean_rate_mw * 1e-3 * cfg.charging_slot_s() * cfg.charge_efficiency / cfg.quantum_joules())
}

/// Charge efficiency that puts the mean per-frame harvest at `target_quanta`.
pub fn calibrate_efficiency(
    cfg: &ScenarioConfig,
    target_quanta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let unit = ScenarioConfig {
        charge_efficiency: 1.0,
        ..cfg.clone()
    };
    let base = mean_harvest_quanta(&unit, samples, seed)?;
    if !(base > 0.0) {
        return Err(Error::InvalidRequest(
            "harvest is zero; cannot calibrate".into(),
        ));
    }
    Ok(target_quanta / base)
}
