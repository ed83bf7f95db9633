use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretisation request. Time levels are graded toward `T - delta_stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    /// Interior node count.
    pub nx: usize,
    /// Number of time steps `K`.
    pub levels: usize,
    /// Grading exponent; `1` gives uniform steps, smaller values cluster toward the stop time.
    #[serde(default = "default_grading")]
    pub grading: f64,
    /// Stop distance from the blow-up time, as a fraction of `T`.
    #[serde(default = "default_delta_stop")]
    pub delta_stop: f64,
}

fn default_grading() -> f64 {
    0.5
}

fn default_delta_stop() -> f64 {
    1e-3
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { nx: 2000, levels: 5000, grading: default_grading(), delta_stop: default_delta_stop() }
    }
}

impl MeshSpec {
    /// Both spacings halved.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx + 1, levels: 2 * self.levels, ..*self }
    }
}

/// Uniform nodes on `[0, 1]` and a strictly increasing list of time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub hx: f64,
    pub times: Vec<f64>,
}

impl Mesh {
    pub fn graded(spec: &MeshSpec, t_blow: f64) -> Result<Self> {
        if spec.nx < 2 || spec.levels < 1 {
            return Err(Error::InvalidParams(format!("mesh too small: {spec:?}")));
        }
        if !(spec.grading > 0.0) || !(spec.delta_stop > 0.0 && spec.delta_stop < 1.0) {
            return Err(Error::InvalidParams(format!("bad grading or stop distance: {spec:?}")));
        }
        let t_stop = t_blow * (1.0 - spec.delta_stop);
        let k = spec.levels as f64;
        let inv = 1.0 / spec.grading;
        let mut times: Vec<f64> = (0..=spec.levels)
            .map(|i| t_stop * (1.0 - (1.0 - i as f64 / k).powf(inv)))
            .collect();
        times[spec.levels] = t_stop;
        Self::from_times(spec.nx, times)
    }

    pub fn uniform(nx: usize, t_end: f64, steps: usize) -> Result<Self> {
        let times = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
        Self::from_times(nx, times)
    }

    pub fn from_times(nx: usize, times: Vec<f64>) -> Result<Self> {
        if nx < 1 {
            return Err(Error::InvalidParams("need at least one interior node".into()));
        }
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("time levels must be strictly increasing".into()));
        }
        Ok(Self { nx, hx: 1.0 / (nx as f64 + 1.0), times })
    }

    /// Total node count including the two boundary nodes.
    pub fn nodes(&self) -> usize {
        self.nx + 2
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.x(i)).collect()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}
