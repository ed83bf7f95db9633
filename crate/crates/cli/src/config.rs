//! Scenario configuration. One TOML file per scenario, one section per module.

use std::path::{Path, PathBuf};

use blowup_core::energy::SGridSpec;
use blowup_core::exponents::{compute_exponents, ProblemParams};
use blowup_core::regime::{BoundaryRegime, Sides};
use blowup_core::solver::{CheckpointFormat, MeshSpec, NewtonOptions, SolveOptions};
use blowup_core::verify::Tolerances;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    /// Defaults to `out/<scenario>`.
    pub output_dir: Option<PathBuf>,
    /// Base seed for the random eps sequences of the lemma sweeps.
    pub seed: u64,
    pub exponents: ProblemParams,
    pub regime: RegimeConfig,
    pub solver: SolverConfig,
    pub energy: SGridSpec,
    pub verify: Tolerances,
    pub lemmas: LemmaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            output_dir: None,
            seed: 0,
            exponents: ProblemParams::default(),
            regime: RegimeConfig::default(),
            solver: SolverConfig::default(),
            energy: SGridSpec::default(),
            verify: Tolerances::default(),
            lemmas: LemmaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeConfig {
    /// Trace exponent; defaults to `alpha / (q + 1)`.
    pub kappa: Option<f64>,
    pub f0: f64,
    pub width: f64,
    pub sides: Sides,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self { kappa: None, f0: 1e-4, width: 0.1, sides: Sides::Both }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nx: usize,
    pub levels: usize,
    pub grading: f64,
    pub delta_stop: f64,
    /// Flux regularisation; defaults to the spacing.
    pub eps: Option<f64>,
    pub store_stride: usize,
    pub checkpoint: CheckpointFormat,
    pub newton: NewtonOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let m = MeshSpec::default();
        Self {
            nx: m.nx,
            levels: m.levels,
            grading: m.grading,
            delta_stop: m.delta_stop,
            eps: None,
            store_stride: 50,
            checkpoint: CheckpointFormat::Binary,
            newton: NewtonOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn mesh(&self) -> MeshSpec {
        MeshSpec { nx: self.nx, levels: self.levels, grading: self.grading, delta_stop: self.delta_stop }
    }

    pub fn options(&self) -> SolveOptions {
        SolveOptions { eps: self.eps, newton: self.newton, store_stride: self.store_stride }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub stampacchia: Vec<StampacchiaFixture>,
    pub sweeps: Vec<SweepConfig>,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        let fixture = |name: &str, power: f64, expect| StampacchiaFixture {
            name: name.into(),
            a: 1.0,
            rho: 1.0,
            lambda: 0.5,
            s0: 1.0,
            s_min: 1e-4,
            per_decade: 32,
            scale: 1.0,
            power,
            expect,
        };
        Self {
            stampacchia: vec![
                fixture("inverse_square", 2.0, Expect::Pass),
                fixture("inverse_cube", 3.0, Expect::PremiseFail),
            ],
            sweeps: vec![SweepConfig::default()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Pass,
    PremiseFail,
}

/// `f(s) = scale s^-power` tabulated on a geometric grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StampacchiaFixture {
    pub name: String,
    pub a: f64,
    pub rho: f64,
    pub lambda: f64,
    pub s0: f64,
    pub s_min: f64,
    pub per_decade: usize,
    #[serde(default = "one")]
    pub scale: f64,
    pub power: f64,
    pub expect: Expect,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda: f64,
    /// Offsets added to the base seed.
    pub seeds: Vec<u64>,
    pub j0: Vec<usize>,
    pub s_min: f64,
    pub s0: f64,
    pub per_decade: usize,
    pub tol_slope: f64,
    pub tol_drift: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            name: "gamma1_1".into(),
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            delta: 0.5,
            gamma1: 1.0,
            gamma2: 2.0,
            lambda: 0.5,
            seeds: vec![1, 2, 3],
            j0: vec![15, 30, 60],
            s_min: 1e-10,
            s0: 1.0,
            per_decade: 100,
            tol_slope: 0.05,
            tol_drift: 0.10,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn output_dir(&self, base: Option<&Path>) -> PathBuf {
        match base {
            Some(b) => b.join(&self.scenario),
            None => self.output_dir.clone().unwrap_or_else(|| Path::new("out").join(&self.scenario)),
        }
    }

    /// The boundary regime; needs valid exponents when `kappa` is left to default.
    pub fn boundary_regime(&self) -> Result<BoundaryRegime, CliError> {
        let kappa = match self.regime.kappa {
            Some(k) => k,
            None => {
                let exps = compute_exponents(&self.exponents).map_err(|e| CliError::Validation(e.to_string()))?;
                BoundaryRegime::default_kappa(&self.exponents, &exps)
            }
        };
        let mut r = BoundaryRegime::new(kappa, self.regime.f0, self.regime.width, self.exponents.t_blow)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        r.sides = self.regime.sides;
        Ok(r)
    }
}
