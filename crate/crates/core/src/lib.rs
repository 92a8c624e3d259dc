//! Policy-gradient learning of daily irrigation decision rules.
//!
//! A stochastic neural policy chooses one of a few irrigation amounts every day of
//! a cropping season; the season is simulated by a soil water balance and crop
//! growth surrogate and pays grain revenue minus water cost. The policy is trained
//! with Monte Carlo policy gradient (REINFORCE) over a pool of historical seasons.

pub mod baseline;
pub mod cropsim;
pub mod env;
pub mod episode;
pub mod error;
pub mod learner;
pub mod policy;
pub mod rng;
pub mod synthetic;
pub mod weather;

pub use cropsim::{CropEnv, EnvConfig};
pub use env::{Environment, Transition};
pub use episode::{ActionSet, EconomicConfig, EpisodeTrace, StateVector, StepRecord, Termination};
pub use error::{Error, Result};
pub use learner::{TrainConfig, TrainLog};
pub use policy::{Architecture, InputScaling, PolicyParameters};
pub use weather::{WeatherDay, WeatherPool, WeatherYear};
