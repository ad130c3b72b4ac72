//! Frame-level simulator of an RF-powered IoT uplink.
//!
//! Each user is charged by its own multi-antenna power beacon (MRT under full
//! or average CSI), stores energy in a quantized battery and sends packet
//! replicas to a base station over irregular repetition slotted Aloha. The
//! base station decodes frames by successive interference cancellation, and
//! every user learns how many replicas to send with its own Q-table.
//!
//! The numeric core is generic over [`Real`]; the aliases below fix it to
//! `f64`, which is what the simulator runs and the CLI reports with.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod channel;
pub mod config;
pub mod error;
pub mod harvest;
pub mod protocol;
pub mod report;
pub mod scalar;
pub mod simulator;
pub mod sweep;

pub use config::{QInit, RewardMode, ScenarioConfig, Scheme};
pub use error::{Error, Result};
pub use harvest::{CostModel, CsiMode};
pub use protocol::{sic_decode, DecodeResult, FrameAlloc, ReplicaPmf};
pub use scalar::Real;
pub use simulator::{aggregate, Aggregate, FrameMetrics, RunSummary, Stat};

pub type ChannelParams = channel::ChannelParams<f64>;
pub type Covariance = channel::Covariance<f64>;
pub type EhChannel = channel::EhChannel<f64>;
pub type DataGain = channel::DataGain<f64>;
pub type EhCurve = harvest::EhCurve<f64>;
pub type Battery = harvest::Battery<f64>;
pub type QTable = agent::QTable<f64>;
pub type LearningParams = agent::LearningParams<f64>;
pub type Learner = agent::Learner<f64>;
pub type World = simulator::World<f64>;

pub type EhChannel32 = channel::EhChannel<f32>;
pub type Battery32 = harvest::Battery<f32>;
pub type QTable32 = agent::QTable<f32>;
pub type World32 = simulator::World<f32>;
