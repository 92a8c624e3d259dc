//! Shared domain types and the return arithmetic of an irrigation episode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of monitored soil layers exposed to the decision rule.
pub const MONITORED_LAYERS: usize = 5;

/// Length of the flattened state vector.
pub const STATE_DIM: usize = 4 + MONITORED_LAYERS;

/// Column names of the flattened state, in order.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "Stage", "LAI", "ESW1", "ESW2", "ESW3", "ESW4", "ESW5", "CuIrrig", "CuRain",
];

/// The nine quantities observed each day.
///
/// Flattened order is fixed: stage, lai, esw1..esw5, cu_irrig, cu_rain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub stage: f64,
    pub lai: f64,
    /// Extractable soil water (mm) in the 0-15, 15-30, 30-60, 60-90 and 90-120 cm layers.
    pub esw: [f64; MONITORED_LAYERS],
    /// Irrigation applied since sowing (mm).
    pub cu_irrig: f64,
    /// Rain received since sowing (mm).
    pub cu_rain: f64,
}

impl StateVector {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        let e = &self.esw;
        [
            self.stage,
            self.lai,
            e[0],
            e[1],
            e[2],
            e[3],
            e[4],
            self.cu_irrig,
            self.cu_rain,
        ]
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != STATE_DIM {
            return Err(Error::domain(format!(
                "state vector needs {STATE_DIM} components, got {}",
                values.len()
            )));
        }
        let state = StateVector {
            stage: values[0],
            lai: values[1],
            esw: [values[2], values[3], values[4], values[5], values[6]],
            cu_irrig: values[7],
            cu_rain: values[8],
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let arr = self.to_array();
        if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("{} is not finite", STATE_NAMES[i])));
        }
        if let Some(i) = arr[1..].iter().position(|v| *v < 0.0) {
            return Err(Error::domain(format!("{} is negative", STATE_NAMES[i + 1])));
        }
        Ok(())
    }
}

/// Candidate irrigation depths (mm), strictly increasing and starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionSet(Vec<f64>);

impl ActionSet {
    pub fn new(amounts: Vec<f64>) -> Result<Self> {
        if amounts.first() != Some(&0.0) {
            return Err(Error::domain("action set must start with 0 mm"));
        }
        if amounts.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::domain("action amounts must be finite and non-negative"));
        }
        if amounts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("action amounts must be strictly increasing"));
        }
        Ok(ActionSet(amounts))
    }

    pub fn amounts(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn amount(&self, index: usize) -> Result<f64> {
        self.0.get(index).copied().ok_or_else(|| {
            Error::domain(format!(
                "action index {index} out of range for {} actions",
                self.0.len()
            ))
        })
    }

    /// Index of an exact amount, used when replaying recorded schedules.
    pub fn index_of(&self, amount_mm: f64) -> Option<usize> {
        self.0.iter().position(|a| *a == amount_mm)
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        ActionSet(vec![0.0, 10.0, 20.0, 30.0, 40.0])
    }
}

impl TryFrom<Vec<f64>> for ActionSet {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ActionSet::new(v)
    }
}

impl From<ActionSet> for Vec<f64> {
    fn from(a: ActionSet) -> Self {
        a.0
    }
}

/// Unit water cost and grain price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicConfig {
    /// $/mm of irrigation.
    pub water_cost_c: f64,
    /// $/kg of grain.
    pub grain_price_p: f64,
}

impl Default for EconomicConfig {
    fn default() -> Self {
        EconomicConfig {
            water_cost_c: 0.6,
            grain_price_p: 0.25,
        }
    }
}

impl EconomicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.water_cost_c >= 0.0 && self.grain_price_p >= 0.0) {
            return Err(Error::domain("water cost and grain price must be >= 0"));
        }
        Ok(())
    }
}

/// One decision: the observed state, the distribution it induced, the choice and its reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub day_of_year: u32,
    pub state: StateVector,
    pub action_probs: Vec<f64>,
    pub action_index: usize,
    pub reward: f64,
}

/// Why an episode stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StageReached,
    MaxDays,
    WeatherExhausted,
    /// Single-step or otherwise externally terminated environments.
    Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub yield_kg_ha: f64,
    pub profit: f64,
    pub weather_year_id: i32,
    pub termination: Termination,
    /// State after the last step.
    pub final_state: StateVector,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn action_indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action_index).collect()
    }

    /// Total irrigation applied over the episode (mm).
    pub fn total_irrigation(&self, actions: &ActionSet) -> f64 {
        self.steps
            .iter()
            .map(|s| actions.amounts()[s.action_index])
            .sum()
    }
}

/// Undiscounted sum of rewards, accumulated in step order.
pub fn total_return(trace: &EpisodeTrace) -> Result<f64> {
    if trace.steps.is_empty() {
        return Err(Error::domain("total return of an empty trace"));
    }
    Ok(trace.steps.iter().map(|s| s.reward).sum())
}

/// Suffix sums `out[t] = rewards[t] + rewards[t+1] + ...`, built backwards as in REINFORCE.
pub fn returns_to_go(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::domain("returns-to-go of an empty reward sequence"));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for t in (0..rewards.len()).rev() {
        g += rewards[t];
        out[t] = g;
    }
    Ok(out)
}

/// Reward for applying `action_mm`: the water cost, plus grain revenue on the final step.
pub fn step_reward(
    action_mm: f64,
    terminal_yield_kg_ha: Option<f64>,
    econ: &EconomicConfig,
) -> Result<f64> {
    let cost = -econ.water_cost_c * action_mm;
    match terminal_yield_kg_ha {
        None => Ok(cost),
        Some(y) if y >= 0.0 && y.is_finite() => Ok(cost + econ.grain_price_p * y),
        Some(y) => Err(Error::domain(format!("yield must be non-negative, got {y}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace_from(rewards: &[f64]) -> EpisodeTrace {
        EpisodeTrace {
            steps: rewards
                .iter()
                .enumerate()
                .map(|(t, r)| StepRecord {
                    day_of_year: 122 + t as u32,
                    state: StateVector::default(),
                    action_probs: vec![0.2; 5],
                    action_index: 0,
                    reward: *r,
                })
                .collect(),
            yield_kg_ha: 0.0,
            profit: rewards.iter().sum(),
            weather_year_id: 2020,
            termination: Termination::StageReached,
            final_state: StateVector::default(),
        }
    }

    #[test]
    fn total_return_examples() {
        assert_eq!(total_return(&trace_from(&[-12.0, 0.0, 1879.0])).unwrap(), 1867.0);
        assert_eq!(total_return(&trace_from(&[0.0])).unwrap(), 0.0);
        assert!(total_return(&trace_from(&[])).is_err());
    }

    #[test]
    fn table_trace_profit() {
        // 35 irrigation events of 10 mm (350 mm) and a terminal yield of 7,516 kg/ha.
        let econ = EconomicConfig::default();
        let mut rewards: Vec<f64> = (0..35)
            .map(|_| step_reward(10.0, None, &econ).unwrap())
            .collect();
        rewards.extend((0..125).map(|_| step_reward(0.0, None, &econ).unwrap()));
        rewards.push(step_reward(0.0, Some(7516.0), &econ).unwrap());
        let total = total_return(&trace_from(&rewards)).unwrap();
        assert!((total - 1669.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn returns_to_go_examples() {
        assert_eq!(
            returns_to_go(&[-12.0, -6.0, 1669.0]).unwrap(),
            vec![1651.0, 1663.0, 1669.0]
        );
        assert_eq!(returns_to_go(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(returns_to_go(&[]).is_err());
    }

    #[test]
    fn step_reward_examples() {
        let econ = EconomicConfig::default();
        assert_eq!(step_reward(20.0, None, &econ).unwrap(), -12.0);
        assert_eq!(step_reward(0.0, None, &econ).unwrap(), 0.0);
        assert_eq!(step_reward(0.0, Some(7516.0), &econ).unwrap(), 1879.0);
        assert_eq!(step_reward(40.0, None, &econ).unwrap(), -24.0);
        assert!(step_reward(0.0, Some(-1.0), &econ).is_err());
    }

    #[test]
    fn action_set_validation() {
        assert!(ActionSet::new(vec![0.0, 10.0, 10.0]).is_err());
        assert!(ActionSet::new(vec![5.0, 10.0]).is_err());
        assert!(ActionSet::new(vec![]).is_err());
        let a = ActionSet::default();
        assert_eq!(a.amounts(), &[0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(a.index_of(30.0), Some(3));
        assert!(a.amount(5).is_err());
    }

    #[test]
    fn state_round_trip_and_validation() {
        let s = StateVector {
            stage: 30.1,
            lai: 3.46,
            esw: [33.0, 27.0, 48.0, 30.0, 6.0],
            cu_irrig: 60.0,
            cu_rain: 74.0,
        };
        assert_eq!(StateVector::from_slice(&s.to_array()).unwrap(), s);
        let mut bad = s.to_array();
        bad[3] = -1.0;
        assert!(StateVector::from_slice(&bad).is_err());
        bad[3] = f64::NAN;
        assert!(StateVector::from_slice(&bad).is_err());
    }

    proptest! {
        #[test]
        fn suffix_sums_match_forward_oracle(rewards in prop::collection::vec(-100.0f64..100.0, 1..200)) {
            let g = returns_to_go(&rewards).unwrap();
            for t in 0..rewards.len() {
                let direct: f64 = rewards[t..].iter().sum();
                prop_assert!((g[t] - direct).abs() < 1e-9);
            }
            prop_assert_eq!(*g.last().unwrap(), *rewards.last().unwrap());
        }

        #[test]
        fn suffix_differences_exact_on_whole_dollars(rewards in prop::collection::vec(-24i32..2500, 1..200)) {
            let rewards: Vec<f64> = rewards.into_iter().map(f64::from).collect();
            let g = returns_to_go(&rewards).unwrap();
            for t in 0..rewards.len() - 1 {
                prop_assert_eq!(g[t] - g[t + 1], rewards[t]);
            }
        }

        #[test]
        fn step_reward_linear_in_amount(a1 in 0.0f64..40.0, a2 in 0.0f64..40.0) {
            let econ = EconomicConfig::default();
            let lhs = step_reward(a1, None, &econ).unwrap() + step_reward(a2, None, &econ).unwrap();
            let rhs = step_reward(a1 + a2, None, &econ).unwrap() + step_reward(0.0, None, &econ).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
