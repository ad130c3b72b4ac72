//! Incident power under MRT energy beamforming, the non-linear harvester
//! curve and the quantized battery.
//!
//! Energies are stored in joules. The harvester works in milliwatts, so a
//! charge of `rate_mw` for `t_c` seconds adds `rate_mw * 1e-3 * t_c` joules.

use serde::{Deserialize, Serialize};

use crate::channel::{DataGain, EhChannel};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Precoder knowledge at the power beacon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsiMode {
    /// Instantaneous channel known: MRT on `los + scatter`.
    #[serde(rename = "fcsi")]
    Full,
    /// Only the mean (LOS) channel known: MRT on `los`.
    #[serde(rename = "acsi")]
    Average,
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Full => "fcsi",
            CsiMode::Average => "acsi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "fcsi" | "full" => Some(CsiMode::Full),
            "acsi" | "average" => Some(CsiMode::Average),
            _ => None,
        }
    }
}

/// Transmit energy charged per replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostModel {
    /// `copies * xi`.
    Fixed,
    /// `copies * xi * |g|^2 / d_bs^alpha`.
    ChannelScaled,
}

impl CostModel {
    pub fn as_str(self) -> &'static str {
        match self {
            CostModel::Fixed => "fixed",
            CostModel::ChannelScaled => "channel_scaled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(CostModel::Fixed),
            "channel_scaled" => Some(CostModel::ChannelScaled),
            _ => None,
        }
    }

    /// Energy of one replica given the quantum and the uplink realization.
    pub fn per_copy<T: Real>(self, quantum: T, gain: &DataGain<T>, d_bs: T, alpha: T) -> T {
        match self {
            CostModel::Fixed => quantum,
            CostModel::ChannelScaled => quantum * gain.g.norm_sqr() / d_bs.powf(alpha),
        }
    }
}

/// Received RF power at the user, in mW.
pub fn incident_power<T: Real>(ch: &EhChannel<T>, pb_power_w: T, mode: CsiMode) -> Result<T> {
    if !(pb_power_w > T::zero()) {
        return Err(invalid(
            "pb_power_w",
            format!("must be positive, got {pb_power_w}"),
        ));
    }
    let gain = match mode {
        CsiMode::Full => ch
            .combined()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b),
        CsiMode::Average => {
            let los_norm = ch
                .los
                .iter()
                .map(|z| z.norm_sqr())
                .fold(T::zero(), |a, b| a + b)
                .sqrt();
            if !(los_norm > T::zero()) {
                return Err(Error::DegenerateChannel);
            }
            let projection = ch
                .los
                .iter()
                .zip(&ch.scatter)
                .map(|(l, s)| l.conj() * s)
                .fold(num_complex::Complex::new(T::zero(), T::zero()), |a, b| {
                    a + b
                });
            (projection / los_norm + los_norm).norm_sqr()
        }
    };
    Ok(ch.beta * pb_power_w * gain * T::lit(1e3))
}

/// Logistic saturation curve of the rectifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhCurve<T> {
    pub saturation_mw: T,
    /// Per-mW steepness.
    pub c0: T,
    /// Inflection offset, mW.
    pub c1: T,
}

impl<T: Real> EhCurve<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.saturation_mw > T::zero()) {
            return Err(invalid("eh_saturation_mw", "must be positive"));
        }
        if !(self.c0 > T::zero()) {
            return Err(invalid("eh_c0", "must be positive"));
        }
        if !self.c1.is_finite() {
            return Err(invalid("eh_c1", "must be finite"));
        }
        Ok(())
    }

    /// Harvested DC power for an incident power `p_inc_mw`.
    pub fn harvest_rate(&self, p_inc_mw: T) -> Result<T> {
        if !(p_inc_mw >= T::zero()) {
            return Err(invalid(
                "p_inc_mw",
                format!("must be non-negative, got {p_inc_mw}"),
            ));
        }
        let num = -(-self.c0 * p_inc_mw).exp_m1();
        let den = T::one() + (-self.c0 * (p_inc_mw - self.c1)).exp();
        Ok(self.saturation_mw * num / den)
    }
}

/// Stored energy with a packet-sized quantum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery<T> {
    stored: T,
    quantum: T,
    capacity: u32,
}

impl<T: Real> Battery<T> {
    pub fn new(stored_joules: T, quantum_joules: T, capacity_packets: u32) -> Result<Self> {
        if !(quantum_joules > T::zero()) || !quantum_joules.is_finite() {
            return Err(invalid("quantum_joules", "must be positive and finite"));
        }
        if capacity_packets == 0 {
            return Err(invalid("battery_capacity_packets", "must be at least 1"));
        }
        let cap = quantum_joules * T::from_u32(capacity_packets).unwrap();
        if !(stored_joules >= T::zero()) || stored_joules > cap {
            return Err(invalid(
                "stored_joules",
                format!("must lie in [0, {cap}], got {stored_joules}"),
            ));
        }
        Ok(Self {
            stored: stored_joules,
            quantum: quantum_joules,
            capacity: capacity_packets,
        })
    }

    pub fn stored(&self) -> T {
        self.stored
    }

    pub fn quantum(&self) -> T {
        self.quantum
    }

    pub fn capacity_packets(&self) -> u32 {
        self.capacity
    }

    pub fn capacity_joules(&self) -> T {
        self.quantum * T::from_u32(self.capacity).unwrap()
    }

    /// Adds `rate_mw * t_c` (converted to joules), clipped at capacity.
    pub fn charge(self, rate_mw: T, t_c: T) -> Self {
        let added = (rate_mw * t_c * T::lit(1e-3)).max(T::zero());
        Self {
            stored: (self.stored + added).min(self.capacity_joules()),
            ..self
        }
    }

    /// Removes the energy of `copies` replicas.
    pub fn spend(
        self,
        copies: u32,
        model: CostModel,
        gain: &DataGain<T>,
        d_bs: T,
        alpha: T,
    ) -> Result<Self> {
        let per_copy = model.per_copy(self.quantum, gain, d_bs, alpha);
        self.spend_joules(per_copy * T::from_u32(copies).unwrap())
    }

    pub(crate) fn spend_joules(self, cost: T) -> Result<Self> {
        if cost <= T::zero() {
            return Ok(self);
        }
        let slack = self.quantum * T::level_slack();
        if cost > self.stored + slack {
            return Err(Error::InsufficientEnergy {
                required: cost.as_f64(),
                available: self.stored.as_f64(),
            });
        }
        Ok(Self {
            stored: (self.stored - cost).max(T::zero()),
            ..self
        })
    }

    /// `floor(E / xi)`, the state observed by the agent.
    pub fn level(&self) -> u32 {
        let ratio = self.stored / self.quantum + T::level_slack();
        ratio.floor().to_u32().unwrap_or(0).min(self.capacity)
    }

    /// Total replicas the stored energy pays for under the fixed cost.
    pub fn max_copies(&self) -> u32 {
        self.level()
    }

    /// Replicas beyond the mandatory first copy; `None` when nothing can be sent.
    pub fn extra_replica_bound(&self) -> Option<u32> {
        self.level().checked_sub(1)
    }
}

/// `xi = P_u * t_T * L` with the transmit power in mW and the slot in seconds.
pub fn packet_quantum<T: Real>(tx_power_mw: T, data_slot_s: T, packet_size: T) -> T {
    tx_power_mw * T::lit(1e-3) * data_slot_s * packet_size
}
