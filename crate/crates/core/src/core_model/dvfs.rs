//! Voltage/frequency scaling and the dynamic power model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("frequency {frequency} Hz outside (0, {max}]")]
    FrequencyOutOfRange { frequency: f64, max: f64 },
}

/// Power-model parameters for one core.
///
/// The activity factor and switched capacitance only matter up to a
/// constant, so the model is calibrated instead: power at
/// `(f_base, v_dd)` equals `tdp_watts`. `activity_alpha` and
/// `capacitance_c` are carried for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvfsParams {
    pub f_base: f64,
    pub f_turbo: f64,
    pub v_dd: f64,
    pub v_min: f64,
    pub tdp_watts: f64,
    #[serde(default = "unit")]
    pub activity_alpha: f64,
    #[serde(default)]
    pub capacitance_c: Option<f64>,
    /// Constant leakage added on top of the dynamic term.
    #[serde(default)]
    pub static_watts: f64,
    /// Selectable frequencies, ascending. Empty means
    /// `[f_base/2, 3*f_base/4, f_base, f_turbo]`.
    #[serde(default)]
    pub steps: Vec<f64>,
}

fn unit() -> f64 {
    1.0
}

impl Default for DvfsParams {
    /// 4.0 GHz base, 4.4 GHz turbo, 1.2 V nominal, 1.0 V floor, 88 W TDP.
    fn default() -> Self {
        DvfsParams {
            f_base: 4.0e9,
            f_turbo: 4.4e9,
            v_dd: 1.2,
            v_min: 1.0,
            tdp_watts: 88.0,
            activity_alpha: 1.0,
            capacitance_c: None,
            static_watts: 0.0,
            steps: Vec::new(),
        }
    }
}

impl DvfsParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_min > 0.0 && self.v_min <= self.v_dd) {
            return Err("need 0 < v_min <= v_dd".into());
        }
        if !(self.f_base > 0.0 && self.f_base <= self.f_turbo) {
            return Err("need 0 < f_base <= f_turbo".into());
        }
        if self.tdp_watts.is_nan() || self.tdp_watts <= 0.0 {
            return Err("tdp_watts must be > 0".into());
        }
        if self.static_watts < 0.0 {
            return Err("static_watts must be >= 0".into());
        }
        FrequencySteps::new(self.frequency_steps()).map(|_| ())
    }

    /// Below this frequency the voltage is pinned at `v_min`.
    pub fn knee_frequency(&self) -> f64 {
        self.f_base * (self.v_min / self.v_dd)
    }

    /// Supply voltage chosen for `frequency`: linear in f, floored at v_min.
    /// Above `f_base` this extrapolates past `v_dd`.
    pub fn voltage(&self, frequency: f64) -> f64 {
        if frequency >= self.knee_frequency() {
            self.v_dd * frequency / self.f_base
        } else {
            self.v_min
        }
    }

    pub fn frequency_steps(&self) -> Vec<f64> {
        if !self.steps.is_empty() {
            return self.steps.clone();
        }
        let mut steps = vec![0.5 * self.f_base, 0.75 * self.f_base, self.f_base];
        if self.f_turbo > self.f_base {
            steps.push(self.f_turbo);
        }
        steps
    }
}

/// Dynamic power at `frequency`, in watts.
///
/// Above the knee, V tracks f so power grows with f³; below it V is held
/// at `v_min` and power is linear in f. `dynamic_power(p, p.f_base)` is
/// exactly `p.tdp_watts`.
pub fn dynamic_power(params: &DvfsParams, frequency: f64) -> Result<f64, PowerError> {
    if !(frequency > 0.0 && frequency <= params.f_turbo) {
        return Err(PowerError::FrequencyOutOfRange {
            frequency,
            max: params.f_turbo,
        });
    }
    let v = params.voltage(frequency);
    let v_ratio = v / params.v_dd;
    Ok(params.tdp_watts * v_ratio * v_ratio * (frequency / params.f_base))
}

/// A validated ascending list of frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySteps(Vec<f64>);

impl FrequencySteps {
    pub fn new(steps: Vec<f64>) -> Result<Self, String> {
        if steps.is_empty() {
            return Err("frequency step list is empty".into());
        }
        if steps.iter().any(|f| f.is_nan() || *f <= 0.0) {
            return Err("frequency steps must be positive".into());
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err("frequency steps must be strictly ascending".into());
        }
        Ok(FrequencySteps(steps))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn max_index(&self) -> usize {
        self.0.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GovernorPolicy {
    Performance,
    Powersave,
    Ondemand,
}

/// Utilization above which ondemand steps up.
pub const ONDEMAND_UP: f64 = 0.8;
/// Utilization below which ondemand steps down.
pub const ONDEMAND_DOWN: f64 = 0.3;

/// Picks the next frequency step index.
pub fn governor_select(policy: GovernorPolicy, utilization: f64, current: usize, steps: &FrequencySteps) -> usize {
    let current = current.min(steps.max_index());
    match policy {
        GovernorPolicy::Performance => steps.max_index(),
        GovernorPolicy::Powersave => 0,
        GovernorPolicy::Ondemand => {
            if utilization > ONDEMAND_UP {
                (current + 1).min(steps.max_index())
            } else if utilization < ONDEMAND_DOWN {
                current.saturating_sub(1)
            } else {
                current
            }
        }
    }
}
