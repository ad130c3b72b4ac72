//! Scenario configuration and its `key = value` text format.
//!
//! Every key is optional; missing keys take the defaults below. Lines starting
//! with `#` (and trailing `# ...` comments) are ignored.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::agent::LearningParams;
use crate::channel::{ChannelParams, Covariance, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::harvest::{packet_quantum, CostModel, CsiMode, EhCurve};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    QLearning,
    Crdsa,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::QLearning => "qlearning",
            Scheme::Crdsa => "crdsa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "qlearning" | "q" => Some(Scheme::QLearning),
            "crdsa" => Some(Scheme::Crdsa),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QInit {
    Zero,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// 1 when the user's own packet was decoded.
    PerUser,
    /// Number of packets decoded in the frame, given to every user.
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub users: usize,
    pub antennas: usize,
    pub csi_mode: CsiMode,
    pub cost_model: CostModel,
    pub scheme: Scheme,

    pub carrier_frequency_hz: f64,
    pub speed_of_light_m_s: f64,
    pub pathloss_exponent: f64,
    pub kappa_db: f64,
    pub pb_user_distance_m: f64,
    pub bs_user_distance_m: f64,
    pub azimuth_rad: f64,
    /// Row-major; `None` is the identity.
    pub scattering_covariance: Option<Vec<Complex64>>,
    pub pb_power_w: f64,

    pub eh_saturation_mw: f64,
    pub eh_c0: f64,
    pub eh_c1: f64,
    pub charge_efficiency: f64,

    pub battery_capacity_packets: u32,
    pub initial_energy_packets: f64,
    pub tx_power_mw: f64,
    pub data_slot_ms: f64,
    pub packet_size: f64,
    pub charging_slot_ms: f64,

    pub slots_per_frame: usize,
    pub max_packets: usize,

    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon0: f64,
    pub epsilon_min: f64,
    /// `None` derives the decay from the horizon.
    pub epsilon_decay: Option<f64>,
    /// `None` uses `frames`.
    pub horizon: Option<usize>,
    pub q_init: QInit,
    pub reward: RewardMode,

    pub frames: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: 4,
            antennas: 4,
            csi_mode: CsiMode::Full,
            cost_model: CostModel::Fixed,
            scheme: Scheme::QLearning,
            carrier_frequency_hz: 2.5e9,
            speed_of_light_m_s: SPEED_OF_LIGHT,
            pathloss_exponent: 2.7,
            kappa_db: 2.0,
            pb_user_distance_m: 3.0,
            bs_user_distance_m: 70.0,
            azimuth_rad: 0.0,
            scattering_covariance: None,
            pb_power_w: 1.0,
            eh_saturation_mw: 10.73,
            eh_c0: 0.2308,
            eh_c1: 5.365,
            charge_efficiency: 1.0,
            battery_capacity_packets: 6,
            initial_energy_packets: 0.0,
            tx_power_mw: 10.0,
            data_slot_ms: 1.0,
            packet_size: 21.0,
            charging_slot_ms: 1.0,
            slots_per_frame: 5,
            max_packets: 5,
            learning_rate: 0.1,
            discount: 0.1,
            epsilon0: 0.5,
            epsilon_min: 0.01,
            epsilon_decay: None,
            horizon: None,
            q_init: QInit::Zero,
            reward: RewardMode::PerUser,
            frames: 5000,
            runs: 10,
            seed: 1,
        }
    }
}

/// Keys accepted by [`ScenarioConfig::apply`], in emission order.
pub const CONFIG_KEYS: &[&str] = &[
    "users",
    "antennas",
    "csi_mode",
    "cost_model",
    "scheme",
    "carrier_frequency_hz",
    "speed_of_light_m_s",
    "pathloss_exponent",
    "kappa_db",
    "pb_user_distance_m",
    "bs_user_distance_m",
    "azimuth_rad",
    "scattering_covariance",
    "pb_power_w",
    "eh_saturation_mw",
    "eh_c0",
    "eh_c1",
    "charge_efficiency",
    "battery_capacity_packets",
    "initial_energy_packets",
    "tx_power_mw",
    "data_slot_ms",
    "packet_size",
    "charging_slot_ms",
    "slots_per_frame",
    "max_packets",
    "learning_rate",
    "discount",
    "epsilon0",
    "epsilon_min",
    "epsilon_decay",
    "horizon",
    "q_init",
    "reward",
    "frames",
    "runs",
    "seed",
];

fn num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("cannot parse `{value}` as {}", std::any::type_name::<T>()))
}

fn auto<T: FromStr>(value: &str) -> std::result::Result<Option<T>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        num(value).map(Some)
    }
}

fn parse_matrix(value: &str) -> std::result::Result<Option<Vec<Complex64>>, String> {
    if value == "identity" {
        return Ok(None);
    }
    let rows: Vec<Vec<Complex64>> = value
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|e| {
                    Complex64::from_str(e.trim())
                        .map_err(|_| format!("cannot parse matrix entry `{}`", e.trim()))
                })
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(format!(
            "matrix must be square, got {n} rows of unequal length"
        ));
    }
    Ok(Some(rows.into_iter().flatten().collect()))
}

impl ScenarioConfig {
    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "users" => self.users = num(value)?,
            "antennas" => self.antennas = num(value)?,
            "csi_mode" => {
                self.csi_mode =
                    CsiMode::parse(value).ok_or_else(|| format!("unknown csi mode `{value}`"))?
            }
            "cost_model" => {
                self.cost_model = CostModel::parse(value)
                    .ok_or_else(|| format!("unknown cost model `{value}`"))?
            }
            "scheme" => {
                self.scheme =
                    Scheme::parse(value).ok_or_else(|| format!("unknown scheme `{value}`"))?
            }
            "carrier_frequency_hz" => self.carrier_frequency_hz = num(value)?,
            "speed_of_light_m_s" => self.speed_of_light_m_s = num(value)?,
            "pathloss_exponent" => self.pathloss_exponent = num(value)?,
            "kappa_db" => self.kappa_db = num(value)?,
            "pb_user_distance_m" => self.pb_user_distance_m = num(value)?,
            "bs_user_distance_m" => self.bs_user_distance_m = num(value)?,
            "azimuth_rad" => self.azimuth_rad = num(value)?,
            "scattering_covariance" => self.scattering_covariance = parse_matrix(value)?,
            "pb_power_w" => self.pb_power_w = num(value)?,
            "eh_saturation_mw" => self.eh_saturation_mw = num(value)?,
            "eh_c0" => self.eh_c0 = num(value)?,
            "eh_c1" => self.eh_c1 = num(value)?,
            "charge_efficiency" => self.charge_efficiency = num(value)?,
            "battery_capacity_packets" => self.battery_capacity_packets = num(value)?,
            "initial_energy_packets" => self.initial_energy_packets = num(value)?,
            "tx_power_mw" => self.tx_power_mw = num(value)?,
            "data_slot_ms" => self.data_slot_ms = num(value)?,
            "packet_size" => self.packet_size = num(value)?,
            "charging_slot_ms" => self.charging_slot_ms = num(value)?,
            "slots_per_frame" => self.slots_per_frame = num(value)?,
            "max_packets" => self.max_packets = num(value)?,
            "learning_rate" => self.learning_rate = num(value)?,
            "discount" => self.discount = num(value)?,
            "epsilon0" => self.epsilon0 = num(value)?,
            "epsilon_min" => self.epsilon_min = num(value)?,
            "epsilon_decay" => self.epsilon_decay = auto(value)?,
            "horizon" => self.horizon = auto(value)?,
            "q_init" => {
                self.q_init = match value {
                    "zero" => QInit::Zero,
                    "uniform" => QInit::Uniform,
                    _ => return Err(format!("unknown q_init `{value}`")),
                }
            }
            "reward" => {
                self.reward = match value {
                    "per_user" => RewardMode::PerUser,
                    "shared" => RewardMode::Shared,
                    _ => return Err(format!("unknown reward mode `{value}`")),
                }
            }
            "frames" => self.frames = num(value)?,
            "runs" => self.runs = num(value)?,
            "seed" => self.seed = num(value)?,
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    /// Textual value of one key, in the form [`apply`](Self::apply) accepts.
    pub fn value_of(&self, key: &str) -> Option<String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        Some(match key {
            "users" => self.users.to_string(),
            "antennas" => self.antennas.to_string(),
            "csi_mode" => self.csi_mode.as_str().to_string(),
            "cost_model" => self.cost_model.as_str().to_string(),
            "scheme" => self.scheme.as_str().to_string(),
            "carrier_frequency_hz" => self.carrier_frequency_hz.to_string(),
            "speed_of_light_m_s" => self.speed_of_light_m_s.to_string(),
            "pathloss_exponent" => self.pathloss_exponent.to_string(),
            "kappa_db" => self.kappa_db.to_string(),
            "pb_user_distance_m" => self.pb_user_distance_m.to_string(),
            "bs_user_distance_m" => self.bs_user_distance_m.to_string(),
            "azimuth_rad" => self.azimuth_rad.to_string(),
            "scattering_covariance" => match &self.scattering_covariance {
                None => "identity".to_string(),
                Some(entries) => {
                    let n = (entries.len() as f64).sqrt().round() as usize;
                    entries
                        .chunks(n.max(1))
                        .map(|row| {
                            row.iter()
                                .map(|z| z.to_string())
                                .collect::<Vec<_>>()
                                .join(",")
                        })
                        .collect::<Vec<_>>()
                        .join(";")
                }
            },
            "pb_power_w" => self.pb_power_w.to_string(),
            "eh_saturation_mw" => self.eh_saturation_mw.to_string(),
            "eh_c0" => self.eh_c0.to_string(),
            "eh_c1" => self.eh_c1.to_string(),
            "charge_efficiency" => self.charge_efficiency.to_string(),
            "battery_capacity_packets" => self.battery_capacity_packets.to_string(),
            "initial_energy_packets" => self.initial_energy_packets.to_string(),
            "tx_power_mw" => self.tx_power_mw.to_string(),
            "data_slot_ms" => self.data_slot_ms.to_string(),
            "packet_size" => self.packet_size.to_string(),
            "charging_slot_ms" => self.charging_slot_ms.to_string(),
            "slots_per_frame" => self.slots_per_frame.to_string(),
            "max_packets" => self.max_packets.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "discount" => self.discount.to_string(),
            "epsilon0" => self.epsilon0.to_string(),
            "epsilon_min" => self.epsilon_min.to_string(),
            "epsilon_decay" => opt(self.epsilon_decay.map(|v| v.to_string())),
            "horizon" => opt(self.horizon.map(|v| v.to_string())),
            "q_init" => match self.q_init {
                QInit::Zero => "zero",
                QInit::Uniform => "uniform",
            }
            .to_string(),
            "reward" => match self.reward {
                RewardMode::PerUser => "per_user",
                RewardMode::Shared => "shared",
            }
            .to_string(),
            "frames" => self.frames.to_string(),
            "runs" => self.runs.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Parses config text; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, key, value) in key_values(text)? {
            if !seen.insert(key.clone()) {
                return Err(Error::Config {
                    line: idx,
                    key,
                    reason: "duplicate key".into(),
                });
            }
            cfg.apply(&key, &value).map_err(|reason| Error::Config {
                line: idx,
                key: key.clone(),
                reason,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Full config text with every key spelled out.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Error::Config {
            line: 0,
            key: key.to_string(),
            reason: reason.to_string(),
        };
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(key, "must be positive and finite"))
            }
        };
        if self.users == 0 {
            return Err(bad("users", "must be at least 1"));
        }
        if self.antennas == 0 {
            return Err(bad("antennas", "must be at least 1"));
        }
        if self.slots_per_frame == 0 {
            return Err(bad("slots_per_frame", "must be at least 1"));
        }
        if self.battery_capacity_packets == 0 {
            return Err(bad("battery_capacity_packets", "must be at least 1"));
        }
        if self.frames == 0 {
            return Err(bad("frames", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(bad("runs", "must be at least 1"));
        }
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        positive("speed_of_light_m_s", self.speed_of_light_m_s)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        positive("pb_user_distance_m", self.pb_user_distance_m)?;
        positive("bs_user_distance_m", self.bs_user_distance_m)?;
        positive("pb_power_w", self.pb_power_w)?;
        positive("eh_saturation_mw", self.eh_saturation_mw)?;
        positive("eh_c0", self.eh_c0)?;
        positive("charge_efficiency", self.charge_efficiency)?;
        positive("tx_power_mw", self.tx_power_mw)?;
        positive("data_slot_ms", self.data_slot_ms)?;
        positive("packet_size", self.packet_size)?;
        if !(self.charging_slot_ms >= 0.0 && self.charging_slot_ms.is_finite()) {
            return Err(bad("charging_slot_ms", "must be non-negative and finite"));
        }
        if !self.kappa_db.is_finite() {
            return Err(bad("kappa_db", "must be finite"));
        }
        if !self.eh_c1.is_finite() {
            return Err(bad("eh_c1", "must be finite"));
        }
        if !self.azimuth_rad.is_finite() {
            return Err(bad("azimuth_rad", "must be finite"));
        }
        if !(self.initial_energy_packets >= 0.0
            && self.initial_energy_packets <= self.battery_capacity_packets as f64)
        {
            return Err(bad(
                "initial_energy_packets",
                "must lie in [0, battery_capacity_packets]",
            ));
        }
        if let Some(entries) = &self.scattering_covariance {
            if entries.len() != self.antennas * self.antennas {
                return Err(bad(
                    "scattering_covariance",
                    "dimension must match the number of antennas",
                ));
            }
        }
        self.channel_params::<f64>()
            .map_err(|e| bad("scattering_covariance", &e.to_string()))?;
        self.learning_params::<f64>()
            .validate()
            .map_err(|e| match e {
                Error::InvalidParameter { name, reason } => bad(name, &reason),
                other => bad("learning", &other.to_string()),
            })?;
        Ok(())
    }

    pub fn kappa_linear(&self) -> f64 {
        10f64.powf(self.kappa_db / 10.0)
    }

    pub fn charging_slot_s(&self) -> f64 {
        self.charging_slot_ms * 1e-3
    }

    /// Energy of one replica, joules.
    pub fn quantum_joules(&self) -> f64 {
        packet_quantum(self.tx_power_mw, self.data_slot_ms * 1e-3, self.packet_size)
    }

    /// Largest action index usable in a frame of `slots_per_frame` slots.
    pub fn max_extra_replicas(&self) -> usize {
        self.max_packets.min(self.slots_per_frame - 1)
    }

    pub fn effective_horizon(&self) -> usize {
        self.horizon.unwrap_or(self.frames)
    }

    pub fn channel_params<T: Real>(&self) -> Result<ChannelParams<T>> {
        let covariance = match &self.scattering_covariance {
            None => Covariance::identity(self.antennas),
            Some(entries) => Covariance::new(
                self.antennas,
                entries
                    .iter()
                    .map(|z| num_complex::Complex::new(T::lit(z.re), T::lit(z.im)))
                    .collect(),
            )?,
        };
        Ok(ChannelParams {
            carrier_frequency_hz: T::lit(self.carrier_frequency_hz),
            speed_of_light_m_s: T::lit(self.speed_of_light_m_s),
            pathloss_exponent: T::lit(self.pathloss_exponent),
            rician_kappa: T::lit(self.kappa_linear()),
            antennas: self.antennas,
            pb_user_distance_m: T::lit(self.pb_user_distance_m),
            bs_user_distance_m: T::lit(self.bs_user_distance_m),
            azimuth_rad: T::lit(self.azimuth_rad),
            scattering_covariance: covariance,
        })
    }

    pub fn eh_curve<T: Real>(&self) -> EhCurve<T> {
        EhCurve {
            saturation_mw: T::lit(self.eh_saturation_mw),
            c0: T::lit(self.eh_c0),
            c1: T::lit(self.eh_c1),
        }
    }

    pub fn learning_params<T: Real>(&self) -> LearningParams<T> {
        let mut p = LearningParams::with_horizon(
            T::lit(self.learning_rate),
            T::lit(self.discount),
            T::lit(self.epsilon0),
            T::lit(self.epsilon_min),
            self.effective_horizon(),
        );
        if let Some(decay) = self.epsilon_decay {
            p.decay_rate = T::lit(decay);
        }
        p
    }
}

/// Splits `key = value` text into `(line number, key, value)` triples.
pub fn key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: idx + 1,
            key: line.to_string(),
            reason: "expected `key = value`".into(),
        })?;
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_table_defaults() {
        let cfg = ScenarioConfig::parse("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.eh_saturation_mw, 10.73);
        assert_eq!(cfg.eh_c0, 0.2308);
        assert_eq!(cfg.eh_c1, 5.365);
        assert_eq!(
            (cfg.pb_user_distance_m, cfg.bs_user_distance_m),
            (3.0, 70.0)
        );
        assert_eq!((cfg.antennas, cfg.users), (4, 4));
        assert_eq!((cfg.kappa_db, cfg.pathloss_exponent), (2.0, 2.7));
        assert_eq!(cfg.carrier_frequency_hz, 2.5e9);
        assert_eq!((cfg.charging_slot_ms, cfg.data_slot_ms), (1.0, 1.0));
        assert_eq!(
            (cfg.max_packets, cfg.packet_size, cfg.tx_power_mw),
            (5, 21.0, 10.0)
        );
        assert_eq!(cfg.pb_power_w, 1.0);
        assert_eq!(
            (cfg.learning_rate, cfg.discount, cfg.epsilon0),
            (0.1, 0.1, 0.5)
        );
        assert_eq!((cfg.runs, cfg.frames), (10, 5000));
    }

    #[test]
    fn kappa_db_converted() {
        let cfg = ScenarioConfig::parse("kappa_db = 2\n").unwrap();
        assert!((cfg.kappa_linear() - 1.584_893_192_461_113_6).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let err = ScenarioConfig::parse("users = 0").unwrap_err().to_string();
        assert!(err.contains("users"), "{err}");
        let err = ScenarioConfig::parse("bogus = 1").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = ScenarioConfig::parse("antennas = four")
            .unwrap_err()
            .to_string();
        assert!(err.contains("antennas"), "{err}");
        assert!(ScenarioConfig::parse("users = 2\nusers = 3").is_err());
        assert!(ScenarioConfig::parse("learning_rate = 0").is_err());
        assert!(ScenarioConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn comments_and_matrix() {
        let text =
            "# header\nantennas = 2 # trailing\nscattering_covariance = 1,0.5+0.1i; 0.5-0.1i,1\n";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.antennas, 2);
        let m = cfg.scattering_covariance.clone().unwrap();
        assert_eq!(m[1], Complex64::new(0.5, 0.1));
        assert_eq!(ScenarioConfig::parse(&cfg.emit()).unwrap(), cfg);
        assert!(ScenarioConfig::parse("antennas = 2\nscattering_covariance = 1,2;2,1").is_err());
    }
}
