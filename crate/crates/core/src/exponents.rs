//! Exponents and admissibility conditions for the blow-up estimates.
//!
//! Every quantity here is a closed-form rational expression in `(p, q, n, beta)`,
//! so evaluation is a handful of flops and fully deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters defining one experiment.
///
/// `p` is the flux exponent, `q` the time-term exponent, `t_blow` the blow-up
/// time `T` and `(omega0, beta)` the regime `omega(t) = omega0 (T - t)^beta`.
/// `xi`, `gamma` and `alpha1` are the free constants of the layered-energy
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemParams {
    pub p: f64,
    pub q: f64,
    pub n: u32,
    pub t_blow: f64,
    pub omega0: f64,
    pub beta: f64,
    pub xi: f64,
    pub gamma: f64,
    pub alpha1: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            p: 1.5,
            q: 0.8,
            n: 1,
            t_blow: 1.0,
            omega0: 1.0,
            beta: 1.0,
            xi: 0.3,
            gamma: 0.1,
            alpha1: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub alpha: f64,
    pub beta0: f64,
    pub nu: f64,
    pub mu: f64,
    pub theta: f64,
    pub nu1: f64,
    pub mu1: f64,
    pub nu2: f64,
    pub mu2: f64,
    /// `0 < p - 1 < q < 1`: the final-profile bound applies.
    pub corollary_applicable: bool,
    /// `0 < beta < beta0`. Out-of-range values are still evaluated.
    pub beta_in_range: bool,
}

impl ExponentSet {
    /// Flat key/value listing in a fixed order.
    pub fn table(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("alpha", self.alpha),
            ("beta0", self.beta0),
            ("nu", self.nu),
            ("mu", self.mu),
            ("theta", self.theta),
            ("nu1", self.nu1),
            ("mu1", self.mu1),
            ("nu2", self.nu2),
            ("mu2", self.mu2),
        ]
    }

    /// Exponent of `omega0` in the interior energy bound, `(q+1)/(beta (p-q))`.
    pub fn energy_amplitude_power(params: &ProblemParams) -> f64 {
        (params.q + 1.0) / (params.beta * (params.p - params.q))
    }
}

pub fn compute_exponents(params: &ProblemParams) -> Result<ExponentSet> {
    let ProblemParams { p, q, beta, .. } = *params;
    if !(q > 0.0) {
        return Err(Error::InvalidParams(format!("q must be positive, got {q}")));
    }
    if !(p > q) {
        return Err(Error::InvalidParams(format!("p > q required, got p = {p}, q = {q}")));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParams(format!("beta must be positive, got {beta}")));
    }
    if params.n < 1 {
        return Err(Error::InvalidParams("dimension n must be at least 1".into()));
    }
    let n = f64::from(params.n);
    let pq = p - q;
    let q1 = q + 1.0;
    let p1 = p + 1.0;

    let beta0 = q1 / pq - 1.0 / p;
    let alpha = q1 / pq - beta;
    let nu = (n * pq + q1 * p1) * (q1 - beta * pq) / (beta * pq * pq);
    let mu = (n * pq + p1 * q1 - beta * pq * p1) / (beta * pq * pq);

    let theta = (n * pq + q1) / (n * pq + q1 * p1);
    let denom = q * p1 + theta * pq;
    let nu1 = (1.0 - theta) * q1 / denom;
    let mu1 = (1.0 - theta) * pq / denom;
    let nu2 = q1 / (q * p1);
    let mu2 = pq / (q * p1);

    Ok(ExponentSet {
        alpha,
        beta0,
        nu,
        mu,
        theta,
        nu1,
        mu1,
        nu2,
        mu2,
        corollary_applicable: 0.0 < p - 1.0 && p - 1.0 < q && q < 1.0,
        beta_in_range: beta < beta0,
    })
}

/// One admissibility condition and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub condition: String,
    pub passed: bool,
    pub detail: String,
}

/// Largest admissible `xi` per contraction constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiLimits {
    /// `(1+gamma) xi^alpha1 < 1`
    pub lambda: f64,
    /// `theta1 < 1`
    pub theta1: f64,
    /// `theta2 < 1`
    pub theta2: f64,
}

impl XiLimits {
    /// Name and value of the tightest limit.
    pub fn binding(&self) -> (&'static str, f64) {
        [("lambda", self.lambda), ("theta1", self.theta1), ("theta2", self.theta2)]
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<Condition>,
    pub xi_limits: Option<XiLimits>,
    pub binding_xi_constraint: Option<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

/// Contraction factors of the weighted-energy recursion for a given `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contractions {
    pub lambda: f64,
    pub theta1: f64,
    pub theta2: f64,
}

pub fn contractions(params: &ProblemParams, exps: &ExponentSet) -> Contractions {
    let ProblemParams { xi, gamma, alpha1, .. } = *params;
    let g = 1.0 + gamma;
    Contractions {
        lambda: g * xi.powf(alpha1),
        theta1: g.powf(1.0 / (1.0 + exps.mu1)) * xi.powf(alpha1 - exps.nu1 / (1.0 + exps.mu1)),
        theta2: g.powf(1.0 / (1.0 + exps.mu2)) * xi.powf(alpha1 - exps.nu2 / (1.0 + exps.mu2)),
    }
}

pub fn xi_limits(params: &ProblemParams, exps: &ExponentSet) -> XiLimits {
    let g = 1.0 + params.gamma;
    // xi < (1+gamma)^(-1/e); a non-positive e admits no xi in (0,1).
    let limit = |e: f64| if e > 0.0 { g.powf(-1.0 / e) } else { 0.0 };
    XiLimits {
        lambda: limit(params.alpha1),
        theta1: limit((1.0 + exps.mu1) * params.alpha1 - exps.nu1),
        theta2: limit((1.0 + exps.mu2) * params.alpha1 - exps.nu2),
    }
}

pub fn validate_params(params: &ProblemParams) -> ValidationReport {
    let ProblemParams { p, q, t_blow, omega0, beta, xi, gamma, alpha1, n } = *params;
    let mut conditions = Vec::new();
    let mut push = |name: &str, condition: &str, passed: bool, detail: String| {
        conditions.push(Condition {
            name: name.to_string(),
            condition: condition.to_string(),
            passed,
            detail,
        });
    };

    push("q_positive", "q > 0", q > 0.0, format!("q = {q}"));
    push("p_gt_q", "p > q", p > q, format!("p = {p}, q = {q}"));
    push("n_positive", "n >= 1", n >= 1, format!("n = {n}"));
    push("t_blow", "1 <= T < inf", (1.0..f64::INFINITY).contains(&t_blow), format!("T = {t_blow}"));
    push("omega0_positive", "omega0 > 0", omega0 > 0.0, format!("omega0 = {omega0}"));
    push("xi_unit", "0 < xi < 1", xi > 0.0 && xi < 1.0, format!("xi = {xi}"));
    push("gamma_positive", "gamma > 0", gamma > 0.0, format!("gamma = {gamma}"));

    let exps = if q > 0.0 && p > q && n >= 1 {
        // beta is checked separately; evaluate with beta as given when positive
        compute_exponents(&ProblemParams { beta: beta.max(f64::MIN_POSITIVE), ..*params }).ok()
    } else {
        None
    };

    let Some(exps) = exps else {
        for (name, cond) in [
            ("beta_range", "0 < beta < beta0"),
            ("alpha1_range", "1/p < alpha1 < alpha"),
            ("lambda_contraction", "(1+gamma) xi^alpha1 < 1"),
            ("theta1_contraction", "theta1 < 1"),
            ("theta2_contraction", "theta2 < 1"),
        ] {
            push(name, cond, false, "not evaluable: exponent ordering violated".into());
        }
        return ValidationReport { conditions, xi_limits: None, binding_xi_constraint: None };
    };

    push(
        "beta_range",
        "0 < beta < beta0",
        beta > 0.0 && beta < exps.beta0,
        format!("beta = {beta}, beta0 = {}", exps.beta0),
    );
    let alpha = exps.alpha;
    push(
        "alpha1_range",
        "1/p < alpha1 < alpha",
        alpha1 > 1.0 / p && alpha1 < alpha,
        format!("1/p = {}, alpha1 = {alpha1}, alpha = {alpha}", 1.0 / p),
    );

    let c = contractions(params, &exps);
    push(
        "lambda_contraction",
        "(1+gamma) xi^alpha1 < 1",
        c.lambda < 1.0,
        format!("lambda = {}", c.lambda),
    );
    push("theta1_contraction", "theta1 < 1", c.theta1 < 1.0, format!("theta1 = {}", c.theta1));
    push("theta2_contraction", "theta2 < 1", c.theta2 < 1.0, format!("theta2 = {}", c.theta2));

    let limits = xi_limits(params, &exps);
    let (name, value) = limits.binding();
    ValidationReport {
        conditions,
        xi_limits: Some(limits),
        binding_xi_constraint: Some(format!("{name}: xi < {value}")),
    }
}
