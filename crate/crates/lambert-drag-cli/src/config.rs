//! Run configuration: JSON schema, validation and flag overrides.

use serde::{Deserialize, Serialize};

use lambert_drag::friction::FieldSpec;
use lambert_drag::integrator::IntegratorConfig;
use lambert_drag::lambert::Direction;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Compute only the rectilinear continuation seed.
    #[serde(default)]
    pub seed_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub t: f64,
    #[serde(default)]
    pub direction: DirectionSpec,
    pub field: FieldSpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum DirectionSpec {
    Cw,
    Ccw,
    #[default]
    Auto,
}

impl DirectionSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "cw" => Ok(DirectionSpec::Cw),
            "ccw" => Ok(DirectionSpec::Ccw),
            "auto" => Ok(DirectionSpec::Auto),
            other => Err(format!("unknown direction '{}' (cw|ccw|auto)", other)),
        }
    }
}

impl From<DirectionSpec> for Direction {
    fn from(d: DirectionSpec) -> Self {
        match d {
            DirectionSpec::Cw => Direction::Cw,
            DirectionSpec::Ccw => Direction::Ccw,
            DirectionSpec::Auto => Direction::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub h_init: Option<f64>,
    pub h_min: Option<f64>,
    pub max_steps: Option<usize>,
    pub r_collision: Option<f64>,
}

impl IntegratorSpec {
    pub fn build(&self) -> IntegratorConfig<f64> {
        let base = IntegratorConfig::default();
        IntegratorConfig {
            rtol: self.rtol.unwrap_or(base.rtol),
            atol: self.atol.unwrap_or(base.atol),
            h_init: self.h_init.or(base.h_init),
            h_min: self.h_min.unwrap_or(base.h_min),
            max_steps: self.max_steps.unwrap_or(base.max_steps),
            r_collision: self.r_collision.unwrap_or(base.r_collision),
        }
    }
}

fn default_samples() -> usize {
    201
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Write a dense trajectory CSV per arc.
    #[serde(default)]
    pub trajectory_csv: bool,
    /// Number of uniform samples in exported trajectories.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trajectory_csv: false,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Grid over the flight time T.
    FlightTime,
    /// Grid over the angle from B to A (radians), keeping |A|.
    EndpointAngle,
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {}", path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config: {}", e))
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.problem.t > 0.0) {
            return Err("T must be positive".into());
        }
        let norm = |p: [f64; 2]| (p[0] * p[0] + p[1] * p[1]).sqrt();
        if norm(self.problem.a) == 0.0 || norm(self.problem.b) == 0.0 {
            return Err("endpoints A and B must be away from the origin".into());
        }
        if let Some(rtol) = self.integrator.rtol {
            if !(rtol > 0.0) {
                return Err("rtol must be positive".into());
            }
        }
        if let Some(atol) = self.integrator.atol {
            if !(atol > 0.0) {
                return Err("atol must be positive".into());
            }
        }
        if self.output.samples < 2 {
            return Err("output.samples must be at least 2".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.count == 0 {
                return Err("sweep grid is empty".into());
            }
            if !sweep.start.is_finite() || !sweep.stop.is_finite() {
                return Err("sweep bounds must be finite".into());
            }
        }
        // the field spec must build
        self.problem
            .field
            .build::<f64>()
            .map_err(|e| format!("invalid field: {}", e))?;
        Ok(())
    }
}
