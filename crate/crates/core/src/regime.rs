//! Blow-up Dirichlet traces and the energy budget of their cutoff extension.
//!
//! The trace is `f(t) = f0 (T - t)^(-kappa)` on the boundary of `(0, 1)`. It is
//! extended inward as `f(t) phi(x)`, where `phi` is 1 within `w/2` of a carrying
//! boundary point, decays linearly to 0 at distance `w`, and vanishes beyond.
//! All budget integrals are then closed-form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{ExponentSet, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    /// Same trace at `x = 0` and `x = 1`.
    #[default]
    Both,
    /// Trace at `x = 0`, homogeneous data at `x = 1`.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRegime {
    pub kappa: f64,
    pub f0: f64,
    pub width: f64,
    pub t_blow: f64,
    pub sides: Sides,
}

impl BoundaryRegime {
    /// Trace exponent matching the target growth `(T-t)^(-alpha)` of the mass term.
    pub fn default_kappa(params: &ProblemParams, exps: &ExponentSet) -> f64 {
        exps.alpha / (params.q + 1.0)
    }

    pub fn new(kappa: f64, f0: f64, width: f64, t_blow: f64) -> Result<Self> {
        let r = Self { kappa, f0, width, t_blow, sides: Sides::Both };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width < 0.5) {
            return Err(Error::InvalidParams(format!(
                "cutoff width must lie in (0, 1/2), got {}",
                self.width
            )));
        }
        if !(self.f0 >= 0.0) || !(self.kappa >= 0.0) || !(self.t_blow > 0.0) {
            return Err(Error::InvalidParams(format!("bad regime {self:?}")));
        }
        Ok(())
    }

    /// Number of boundary points carrying the trace.
    pub fn carrying_sides(&self) -> f64 {
        match self.sides {
            Sides::Both => 2.0,
            Sides::Left => 1.0,
        }
    }

    /// Regime exponent `beta` realised by this trace: `kappa (q+1) = alpha`.
    pub fn effective_beta(&self, params: &ProblemParams) -> f64 {
        (params.q + 1.0) / (params.p - params.q) - self.kappa * (params.q + 1.0)
    }

    /// Cutoff profile as a function of the distance `d` to a carrying boundary point.
    pub fn cutoff(&self, d: f64) -> f64 {
        let w = self.width;
        if d <= 0.5 * w {
            1.0
        } else if d < w {
            2.0 - 2.0 * d / w
        } else {
            0.0
        }
    }

    /// Extension `f(t) phi(x)` on `[0, 1]`.
    pub fn extension(&self, t: f64, x: f64) -> Result<f64> {
        let f = dirichlet_trace(self, t)?;
        let left = self.cutoff(x);
        let right = match self.sides {
            Sides::Both => self.cutoff(1.0 - x),
            Sides::Left => 0.0,
        };
        Ok(f * left.max(right))
    }

    /// Boundary values `(x = 0, x = 1)` at time `t`.
    pub fn boundary_values(&self, t: f64) -> Result<(f64, f64)> {
        let f = dirichlet_trace(self, t)?;
        Ok(match self.sides {
            Sides::Both => (f, f),
            Sides::Left => (f, 0.0),
        })
    }
}

pub fn dirichlet_trace(regime: &BoundaryRegime, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t < regime.t_blow) {
        return Err(Error::OutOfDomain(format!(
            "trace evaluated at t = {t}, outside [0, {})",
            regime.t_blow
        )));
    }
    Ok(regime.f0 * (regime.t_blow - t).powf(-regime.kappa))
}

/// The three budget terms at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetTerms {
    pub t: f64,
    /// `sup_{tau<t} int |fbar|^(q+1) dx`
    pub mass: f64,
    /// `int_0^t int |grad fbar|^(p+1) dx dtau`
    pub gradient: f64,
    /// `( int_0^t (int |fbar|^(q+1) dx)^(1/(q+1)) dtau )^(q+1)`
    pub transport: f64,
}

impl BudgetTerms {
    pub fn total(&self) -> f64 {
        self.mass + self.gradient + self.transport
    }
}

/// Which budget terms diverge as `t -> T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub mass: bool,
    pub gradient: bool,
    pub transport: bool,
}

/// Budget summary: effective amplitude and term-wise divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    /// `sup_t F(t) (T - t)^alpha`; infinite when the regime leaves the window.
    pub omega0_eff: f64,
    pub diverges: Divergence,
}

/// `int phi^(q+1) dx` over all carrying collars.
pub fn cutoff_mass(regime: &BoundaryRegime, q: f64) -> f64 {
    regime.carrying_sides() * 0.5 * regime.width * (1.0 + 1.0 / (q + 2.0))
}

/// `int |phi'|^(p+1) dx` over all carrying collars.
pub fn cutoff_gradient(regime: &BoundaryRegime, p: f64) -> f64 {
    regime.carrying_sides() * (2.0 / regime.width).powf(p)
}

/// `int_0^t (T - tau)^(-g) dtau`
fn power_integral(t_blow: f64, g: f64, t: f64) -> f64 {
    if g == 1.0 {
        (t_blow / (t_blow - t)).ln()
    } else {
        ((t_blow - t).powf(1.0 - g) - t_blow.powf(1.0 - g)) / (g - 1.0)
    }
}

pub fn energy_budget(regime: &BoundaryRegime, params: &ProblemParams, t: f64) -> Result<BudgetTerms> {
    dirichlet_trace(regime, t)?;
    let ProblemParams { p, q, .. } = *params;
    let (f0, kappa, tb) = (regime.f0, regime.kappa, regime.t_blow);
    let m_q = cutoff_mass(regime, q);
    let m_p = cutoff_gradient(regime, p);

    // f is nondecreasing, so the sup over (0, t) is the value at t.
    let mass = m_q * dirichlet_trace(regime, t)?.powf(q + 1.0);
    let gradient = m_p * f0.powf(p + 1.0) * power_integral(tb, kappa * (p + 1.0), t);
    let transport = m_q * (f0 * power_integral(tb, kappa, t)).powf(q + 1.0);
    Ok(BudgetTerms { t, mass, gradient, transport })
}

/// Effective amplitude and divergence flags of the budget.
///
/// The supremum is taken over a geometric sample of `T - t` down to `1e-14 T`
/// together with the analytic `t -> T` limits of each scaled term.
pub fn budget_summary(regime: &BoundaryRegime, params: &ProblemParams, alpha: f64) -> BudgetSummary {
    let ProblemParams { p, q, .. } = *params;
    let kappa = regime.kappa;
    let active = regime.f0 > 0.0;
    let diverges = Divergence {
        mass: active && kappa > 0.0,
        gradient: active && kappa * (p + 1.0) >= 1.0,
        transport: active && kappa >= 1.0,
    };

    // Exponent of (T - t) in each term near T, after scaling by (T - t)^alpha.
    // A negative exponent means the scaled term is unbounded.
    let unbounded = active
        && (alpha - kappa * (q + 1.0) < 0.0
            || (diverges.gradient && alpha + 1.0 - kappa * (p + 1.0) < 0.0)
            || (kappa * (p + 1.0) == 1.0 && alpha == 0.0)
            || (kappa > 1.0 && alpha + (1.0 - kappa) * (q + 1.0) < 0.0)
            || (kappa == 1.0 && alpha == 0.0));
    if unbounded {
        return BudgetSummary { omega0_eff: f64::INFINITY, diverges };
    }

    let tb = regime.t_blow;
    let samples = 2000;
    let mut sup = 0.0_f64;
    for i in 0..=samples {
        let gap = tb * 10f64.powf(-14.0 * i as f64 / samples as f64);
        let t = (tb - gap).max(0.0);
        if let Ok(terms) = energy_budget(regime, params, t) {
            sup = sup.max(terms.total() * (tb - t).powf(alpha));
        }
    }
    // Limit of the mass term when its scaled exponent is exactly zero.
    if active && alpha == kappa * (q + 1.0) {
        sup = sup.max(cutoff_mass(regime, q) * regime.f0.powf(q + 1.0));
    }
    BudgetSummary { omega0_eff: sup, diverges }
}
