//! Surrogate wheat: thermal-time phenology, logistic canopy, radiation-use biomass.
//!
//! None of these equations come from a validated crop model. They exist to give the
//! learning problem the right shape (water matters, timing matters, seasons differ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Crop parameters. All values are surrogate calibration and may be overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropParams {
    /// Base temperature for thermal time, °C.
    pub t_base: f64,
    /// Water stress hastens development: daily thermal time is scaled by
    /// `1 + stress_acceleration * (1 - stress)`.
    pub stress_acceleration: f64,
    /// (thermal time °C·d, stage) anchors, strictly increasing in both.
    pub stage_anchors: Vec<(f64, f64)>,
    pub root_depth_sowing_mm: f64,
    pub root_growth_mm_per_day: f64,
    pub root_depth_max_mm: f64,
    /// Stage at which the canopy appears with `lai_emergence`.
    pub emergence_stage: f64,
    pub lai_emergence: f64,
    pub lai_growth_rate: f64,
    pub lai_max: f64,
    /// Canopy expansion stops and senescence starts at this stage.
    pub senescence_stage: f64,
    pub senescence_rate: f64,
    /// Radiation-use efficiency, kg/ha per MJ/m².
    pub rue: f64,
    pub light_extinction: f64,
    pub hi_max: f64,
    /// Stress is averaged into the yield penalty from this stage on.
    pub grain_fill_stage: f64,
    pub soil_evap_coeff: f64,
    pub soil_evap_extinction: f64,
}

impl Default for CropParams {
    fn default() -> Self {
        CropParams {
            t_base: 0.0,
            stress_acceleration: 0.3,
            stage_anchors: vec![
                (0.0, 5.0),
                (120.0, 10.0),
                (450.0, 15.0),
                (700.0, 30.0),
                (1000.0, 39.0),
                (1200.0, 65.0),
                (1350.0, 71.0),
                (1650.0, 85.0),
            ],
            root_depth_sowing_mm: 100.0,
            root_growth_mm_per_day: 12.0,
            root_depth_max_mm: 1200.0,
            emergence_stage: 10.0,
            lai_emergence: 0.02,
            lai_growth_rate: 0.12,
            lai_max: 6.5,
            senescence_stage: 65.0,
            senescence_rate: 0.03,
            rue: 11.0,
            light_extinction: 0.45,
            hi_max: 0.42,
            grain_fill_stage: 65.0,
            soil_evap_coeff: 0.4,
            soil_evap_extinction: 0.5,
        }
    }
}

impl CropParams {
    pub fn validate(&self) -> Result<()> {
        let a = &self.stage_anchors;
        if a.len() < 2 {
            return Err(Error::domain("need at least two phenology anchors"));
        }
        if a.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 >= w[0].1)) {
            return Err(Error::domain(
                "phenology anchors must increase in thermal time and not decrease in stage",
            ));
        }
        if !(self.lai_max > 0.0 && self.hi_max >= 0.0 && self.rue >= 0.0) {
            return Err(Error::domain("lai_max must be > 0, hi_max and rue >= 0"));
        }
        Ok(())
    }

    /// Piecewise-linear stage for a thermal time; the last segment is extended.
    pub fn stage_at(&self, thermal_time: f64) -> f64 {
        let a = &self.stage_anchors;
        if thermal_time <= a[0].0 {
            return a[0].1;
        }
        for w in a.windows(2) {
            let (t0, s0) = w[0];
            let (t1, s1) = w[1];
            if thermal_time <= t1 {
                return s0 + (s1 - s0) * (thermal_time - t0) / (t1 - t0);
            }
        }
        let n = a.len();
        let (t0, s0) = a[n - 2];
        let (t1, s1) = a[n - 1];
        s1 + (s1 - s0) * (thermal_time - t1) / (t1 - t0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropState {
    pub thermal_time: f64,
    pub stage: f64,
    pub lai: f64,
    /// kg/ha
    pub biomass: f64,
    pub root_depth_mm: f64,
    /// Mean daily stress factor since `grain_fill_stage`; 1 until the window opens.
    pub stress_history: f64,
    pub grain_fill_days: u32,
}

impl CropState {
    pub fn at_sowing(params: &CropParams) -> Self {
        CropState {
            thermal_time: 0.0,
            stage: params.stage_at(0.0),
            lai: 0.0,
            biomass: 0.0,
            root_depth_mm: params.root_depth_sowing_mm,
            stress_history: 1.0,
            grain_fill_days: 0,
        }
    }
}

/// Accumulates thermal time above `t_base` and maps it to a stage. An unstressed
/// crop (`stress == 1`) accrues exactly `max(0, tmean - t_base)`.
pub fn advance_phenology(crop: &CropState, tmean: f64, stress: f64, params: &CropParams) -> CropState {
    let mut next = crop.clone();
    let hasten = 1.0 + params.stress_acceleration * (1.0 - stress.clamp(0.0, 1.0));
    next.thermal_time += (tmean - params.t_base).max(0.0) * hasten;
    next.stage = params.stage_at(next.thermal_time).max(crop.stage);
    next
}

/// Canopy expansion (stress-limited, logistic) before senescence, decline after.
pub fn update_lai(crop: &mut CropState, stress: f64, params: &CropParams) {
    if crop.stage < params.emergence_stage {
        crop.lai = 0.0;
        return;
    }
    if crop.lai <= 0.0 {
        crop.lai = params.lai_emergence;
        return;
    }
    if crop.stage < params.senescence_stage {
        let growth = params.lai_growth_rate * crop.lai * (1.0 - crop.lai / params.lai_max) * stress;
        crop.lai += growth.max(0.0);
    } else {
        let frac = (params.senescence_rate * (crop.stage - params.senescence_stage) / 20.0).clamp(0.0, 1.0);
        crop.lai -= crop.lai * frac;
    }
    crop.lai = crop.lai.max(0.0);
}

/// Daily biomass gain from intercepted radiation, scaled by water stress.
pub fn accrue_biomass(crop: &mut CropState, lai: f64, radn: f64, stress: f64, params: &CropParams) {
    let interception = 1.0 - (-params.light_extinction * lai).exp();
    crop.biomass += (params.rue * radn.max(0.0) * interception * stress).max(0.0);
}

/// Folds today's stress into the grain-fill running mean once the window is open.
pub fn record_stress(crop: &mut CropState, stress: f64, params: &CropParams) {
    if crop.stage >= params.grain_fill_stage {
        let n = crop.grain_fill_days as f64;
        crop.stress_history = if crop.grain_fill_days == 0 {
            stress
        } else {
            (crop.stress_history * n + stress) / (n + 1.0)
        };
        crop.grain_fill_days += 1;
    }
}

pub fn grow_roots(crop: &mut CropState, params: &CropParams) {
    crop.root_depth_mm = (crop.root_depth_mm + params.root_growth_mm_per_day).min(params.root_depth_max_mm);
}

/// Grain yield, kg/ha.
pub fn compute_yield(crop: &CropState, params: &CropParams) -> f64 {
    (params.hi_max * crop.biomass * (0.5 + 0.5 * crop.stress_history.clamp(0.0, 1.0))).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn base_temperature_leaves_stage_unchanged() {
        let p = CropParams::default();
        let c = CropState::at_sowing(&p);
        let next = advance_phenology(&c, p.t_base, 0.0, &p);
        assert_eq!(next.stage, c.stage);
        assert_eq!(next.thermal_time, 0.0);
    }

    #[test]
    fn stress_hastens_development() {
        let p = CropParams::default();
        let c = CropState::at_sowing(&p);
        let calm = advance_phenology(&c, 15.0, 1.0, &p);
        let dry = advance_phenology(&c, 15.0, 0.0, &p);
        assert_eq!(calm.thermal_time, 15.0);
        assert!((dry.thermal_time - 15.0 * 1.3).abs() < 1e-12);
    }

    #[test]
    fn anchors_hit_exactly() {
        let p = CropParams::default();
        for &(tt, stage) in &p.stage_anchors {
            assert_eq!(p.stage_at(tt), stage);
        }
        let mut c = CropState::at_sowing(&p);
        c.thermal_time = 1640.0;
        let c = advance_phenology(&c, 10.0, 1.0, &p);
        assert_eq!(c.stage, 85.0);
        assert!(p.stage_at(1700.0) > 85.0);
    }

    #[test]
    fn yield_edges() {
        let p = CropParams::default();
        let mut c = CropState::at_sowing(&p);
        assert_eq!(compute_yield(&c, &p), 0.0);
        c.biomass = 10_000.0;
        c.stress_history = 1.0;
        assert!((compute_yield(&c, &p) - 4200.0).abs() < 1e-9);
        c.stress_history = 0.0;
        assert!((compute_yield(&c, &p) - 2100.0).abs() < 1e-9);
    }

    #[test]
    fn stress_history_is_a_running_mean() {
        let p = CropParams::default();
        let mut c = CropState::at_sowing(&p);
        record_stress(&mut c, 0.2, &p);
        assert_eq!(c.stress_history, 1.0);
        c.stage = 70.0;
        for s in [1.0, 0.5, 0.0] {
            record_stress(&mut c, s, &p);
        }
        assert!((c.stress_history - 0.5).abs() < 1e-12);
        assert_eq!(c.grain_fill_days, 3);
    }

    #[test]
    fn canopy_emerges_grows_and_senesces() {
        let p = CropParams::default();
        let mut c = CropState::at_sowing(&p);
        update_lai(&mut c, 1.0, &p);
        assert_eq!(c.lai, 0.0);
        c.stage = 11.0;
        update_lai(&mut c, 1.0, &p);
        assert_eq!(c.lai, p.lai_emergence);
        update_lai(&mut c, 1.0, &p);
        assert!(c.lai > p.lai_emergence);
        let before = c.lai;
        update_lai(&mut c, 0.0, &p);
        assert_eq!(c.lai, before);
        c.stage = 80.0;
        update_lai(&mut c, 1.0, &p);
        assert!(c.lai < before);
    }

    proptest! {
        #[test]
        fn stage_never_decreases(days in prop::collection::vec((-5.0f64..35.0, 0.0f64..=1.0), 1..200)) {
            let p = CropParams::default();
            let mut c = CropState::at_sowing(&p);
            for (t, stress) in days {
                let next = advance_phenology(&c, t, stress, &p);
                prop_assert!(next.stage >= c.stage);
                prop_assert!(next.thermal_time >= c.thermal_time);
                c = next;
            }
        }
    }
}
