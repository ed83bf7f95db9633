//! Two generic iteration lemmas behind the energy estimate, in checkable form.
//!
//! The Stampacchia-type lemma turns `f(s + d) <= a d^-rho f(s)^lambda` into the
//! explicit bound `f(s) <= C s^-e`. The layered differential-inequality lemma is
//! probed through its extremal family: the equality version of
//! `M_j <= lambda M_(j-1) + (1 - lambda) max{k1 (-M_j')^(1+g1), k2 (-M_j')^(1+g2)}`
//! integrated from `M_j = K_j` at the left end of the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StampacchiaBound {
    pub coefficient: f64,
    pub exponent: f64,
}

/// `C = 2^(rho / (lambda (1-lambda)^2)) a^(1/(1-lambda))`, `e = rho / (1 - lambda)`.
pub fn stampacchia_bound(a: f64, rho: f64, lambda: f64) -> Result<StampacchiaBound> {
    if !(a > 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidParams(format!("need a > 0 and rho > 0, got a = {a}, rho = {rho}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParams(format!("lambda = {lambda} not in (0, 1)")));
    }
    let one_minus = 1.0 - lambda;
    Ok(StampacchiaBound {
        coefficient: 2f64.powf(rho / (lambda * one_minus * one_minus)) * a.powf(1.0 / one_minus),
        exponent: rho / one_minus,
    })
}

/// A tabulated function on `(0, s0)` with the constants of its premise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StampacchiaInput {
    pub a: f64,
    pub rho: f64,
    pub lambda: f64,
    pub s0: f64,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
}

impl StampacchiaInput {
    /// Tabulate `f` on a geometric grid `[s_min, s0)`.
    pub fn tabulate(
        a: f64,
        rho: f64,
        lambda: f64,
        s0: f64,
        s_min: f64,
        per_decade: usize,
        f: impl Fn(f64) -> f64,
    ) -> Self {
        let n = ((s0 / s_min).log10() * per_decade as f64).ceil() as usize;
        let s: Vec<f64> = (0..n).map(|k| s_min * 10f64.powf(k as f64 / per_decade as f64)).collect();
        let f = s.iter().map(|&x| f(x)).collect();
        Self { a, rho, lambda, s0, s, f }
    }

    /// Fewest grid points found in any full decade of the table.
    pub fn points_per_decade(&self) -> f64 {
        let (lo, hi) = (self.s[0], *self.s.last().unwrap());
        let decades = (hi / lo).log10();
        if decades <= 0.0 {
            return 0.0;
        }
        (self.s.len() - 1) as f64 / decades
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StampacchiaReport {
    pub bound: StampacchiaBound,
    /// Table is nonnegative, nonincreasing and inside `(0, s0)`.
    pub table_valid: bool,
    pub dense_enough: bool,
    pub premise_holds: bool,
    pub premise_violations: usize,
    /// `(s, delta, lhs / rhs)` at the worst violated pair.
    pub worst_premise: Option<(f64, f64, f64)>,
    pub bound_holds: bool,
    /// `max f(s) s^e / C` over the table.
    pub max_bound_ratio: f64,
}

const PREMISE_SLACK: f64 = 1e-12;

pub fn stampacchia_check(input: &StampacchiaInput) -> Result<StampacchiaReport> {
    let bound = stampacchia_bound(input.a, input.rho, input.lambda)?;
    let (s, f) = (&input.s, &input.f);
    if s.len() != f.len() || s.len() < 2 {
        return Err(Error::InvalidParams("table needs matching s and f columns of length >= 2".into()));
    }
    let table_valid = s.windows(2).all(|w| w[1] > w[0])
        && s[0] > 0.0
        && *s.last().unwrap() < input.s0
        && f.iter().all(|&x| x >= 0.0 && x.is_finite())
        && f.windows(2).all(|w| w[1] <= w[0]);

    let mut violations = 0;
    let mut worst: Option<(f64, f64, f64)> = None;
    for i in 0..s.len() {
        let base = input.a * f[i].powf(input.lambda);
        for k in i + 1..s.len() {
            let d = s[k] - s[i];
            let rhs = base * d.powf(-input.rho);
            if f[k] > rhs * (1.0 + PREMISE_SLACK) {
                violations += 1;
                let ratio = f[k] / rhs;
                if worst.map_or(true, |w| ratio > w.2) {
                    worst = Some((s[i], d, ratio));
                }
            }
        }
    }
    let max_bound_ratio = s
        .iter()
        .zip(f)
        .map(|(&x, &v)| v * x.powf(bound.exponent) / bound.coefficient)
        .fold(0.0, f64::max);
    Ok(StampacchiaReport {
        bound,
        table_valid,
        dense_enough: input.points_per_decade() >= 32.0,
        premise_holds: violations == 0,
        premise_violations: violations,
        worst_premise: worst,
        bound_holds: max_bound_ratio <= 1.0 + PREMISE_SLACK,
        max_bound_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma926Input {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda: f64,
    /// Strictly decreasing positive `eps_j`; its length is `j0`.
    pub eps: Vec<f64>,
}

impl Lemma926Input {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0) {
            return bad(format!("constants must be positive: {}, {}, {}", self.c1, self.c2, self.c3));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) || !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("delta = {} and lambda = {} must lie in (0, 1)", self.delta, self.lambda));
        }
        if !(self.gamma2 > self.gamma1 && self.gamma1 > 0.0) {
            return bad(format!("need gamma2 > gamma1 > 0, got {} and {}", self.gamma2, self.gamma1));
        }
        if self.eps.is_empty() || self.eps[0] <= 0.0 || self.eps.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
            return bad("eps must be a nonempty strictly decreasing positive sequence".into());
        }
        Ok(())
    }

    /// `K_j = c3 eps_j^-(1 - delta)`.
    pub fn initial_values(&self) -> Vec<f64> {
        self.eps.iter().map(|e| self.c3 * e.powf(-(1.0 - self.delta))).collect()
    }
}

/// `(1 + g1)(1 - delta) / (delta g1)`.
pub fn envelope_exponent(delta: f64, gamma1: f64) -> f64 {
    (1.0 + gamma1) * (1.0 - delta) / (delta * gamma1)
}

/// `eps_j = 2^-j`.
pub fn dyadic_eps(j0: usize) -> Vec<f64> {
    (1..=j0).map(|j| 2f64.powi(-(j as i32))).collect()
}

/// Decreasing sequence from `1/2` with step ratios drawn uniformly from `[0.3, 0.7)`.
pub fn random_eps(j0: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = 0.5;
    (0..j0)
        .map(|_| {
            let cur = e;
            e *= rng.gen_range(0.3..0.7);
            cur
        })
        .collect()
}

/// Geometric grid on `[s_min, s0]`.
pub fn geometric_grid(s_min: f64, s0: f64, per_decade: usize) -> Vec<f64> {
    let n = ((s0 / s_min).log10() * per_decade as f64).ceil() as usize;
    (0..=n).map(|k| s_min * (s0 / s_min).powf(k as f64 / n as f64)).collect()
}

/// Extremal trajectories `M_j(s)`, indexed `[j][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub s: Vec<f64>,
    pub m: Vec<Vec<f64>>,
    pub k: Vec<f64>,
}

fn bisect_increasing(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn lemma926_propagate(input: &Lemma926Input, s: &[f64]) -> Result<Family> {
    input.check()?;
    if s.len() < 2 || s[0] < 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("s grid must be increasing and nonnegative".into()));
    }
    let lam = input.lambda;
    let (e1, e2) = (1.0 / (1.0 + input.gamma1), 1.0 / (1.0 + input.gamma2));
    let ks = input.initial_values();
    let mut m: Vec<Vec<f64>> = Vec::with_capacity(ks.len());
    for (j, (&eps, &kj)) in input.eps.iter().zip(&ks).enumerate() {
        let k1 = input.c1 * eps.powf(input.gamma1);
        let k2 = input.c2 * eps.powf(input.gamma2);
        let prev = m.last();
        let floor = |i: usize| prev.map_or(0.0, |p| lam * p[i]);
        // -M' from the binding (smaller) branch of the max.
        let rate = |v: f64, i: usize| {
            let d = (v - floor(i)) / (1.0 - lam);
            if d <= 0.0 {
                0.0
            } else {
                (d / k1).powf(e1).min((d / k2).powf(e2))
            }
        };
        let mut row = Vec::with_capacity(s.len());
        row.push(kj);
        for i in 0..s.len() - 1 {
            let h = s[i + 1] - s[i];
            let mn = row[i];
            let yn = rate(mn, i);
            let next = if mn == 0.0 {
                0.0
            } else if -mn + 0.5 * h * yn <= 0.0 {
                bisect_increasing(0.0, mn, |v| v - mn + 0.5 * h * (yn + rate(v, i + 1)))
            } else {
                // trapezoid would overshoot below zero: fall back to backward Euler
                bisect_increasing(0.0, mn, |v| v - mn + h * rate(v, i + 1))
            };
            if !next.is_finite() {
                return Err(Error::StiffStep { s: s[i + 1] });
            }
            row.push(next.clamp(0.0, mn));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::StiffStep { s: s[j.min(s.len() - 1)] });
        }
        m.push(row);
    }
    Ok(Family { s: s.to_vec(), m, k: ks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub exponent: f64,
    /// Least-squares log-log slope of `max_j M_j(s)` over its decaying range.
    pub slope: f64,
    /// `B1 = sup M_j(s) s^exponent`; `B2` is the largest value still above `B1 s^-exponent`.
    pub b1: f64,
    pub b2: f64,
    pub fit_points: usize,
}

/// Envelope points kept for the slope fit lie in `(min K_j, max K_j / ENVELOPE_MARGIN)`,
/// clear of both the flat cap near `s = 0` and the crash of the first layer.
const ENVELOPE_MARGIN: f64 = 10.0;

pub fn lemma926_fit(family: &Family, input: &Lemma926Input) -> EnvelopeFit {
    let exponent = envelope_exponent(input.delta, input.gamma1);
    let n = family.s.len();
    let env: Vec<f64> = (0..n).map(|i| family.m.iter().map(|r| r[i]).fold(0.0, f64::max)).collect();
    let b1 = family.s.iter().zip(&env).map(|(&s, &v)| v * s.powf(exponent)).fold(0.0, f64::max);
    // plateau left over above the power law (zero when every layer decays to zero)
    let b2 = family
        .s
        .iter()
        .zip(&env)
        .filter(|(&s, &v)| v * s.powf(exponent) > b1 * (1.0 + 1e-12))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let k_min = family.k.iter().copied().fold(f64::INFINITY, f64::min);
    let k_max = family.k.iter().copied().fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = family
        .s
        .iter()
        .zip(&env)
        .filter(|(&s, &v)| s > 0.0 && v > k_min && v < k_max / ENVELOPE_MARGIN)
        .map(|(&s, &v)| (s.ln(), v.ln()))
        .unzip();
    let slope = if xs.len() >= 2 { crate::fit::least_squares(&xs, &ys).slope } else { 0.0 };
    EnvelopeFit { exponent, slope, b1, b2, fit_points: xs.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma926Report {
    pub exponent: f64,
    pub tol_slope: f64,
    pub tol_drift: f64,
    pub labels: Vec<String>,
    pub fits: Vec<EnvelopeFit>,
    /// `(max - min) / min` of the fitted constants across runs.
    pub b1_drift: f64,
    pub b2_drift: f64,
    pub slope_ok: bool,
    pub stable: bool,
    pub passed: bool,
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let lo = v.clone().fold(f64::INFINITY, f64::min);
    let hi = v.fold(0.0, f64::max);
    if hi == 0.0 {
        0.0
    } else {
        (hi - lo) / lo
    }
}

/// Fit each family and compare the constants across them.
pub fn lemma926_bound_check(
    runs: &[(String, &Lemma926Input, &Family)],
    tol_slope: f64,
    tol_drift: f64,
) -> Result<Lemma926Report> {
    let first = runs.first().ok_or_else(|| Error::InvalidParams("no families to check".into()))?;
    let exponent = envelope_exponent(first.1.delta, first.1.gamma1);
    let fits: Vec<EnvelopeFit> = runs.iter().map(|(_, inp, fam)| lemma926_fit(fam, inp)).collect();
    let slope_ok = fits.iter().all(|f| f.slope.abs() <= f.exponent * (1.0 + tol_slope));
    let b1_drift = spread(fits.iter().map(|f| f.b1));
    let b2_drift = spread(fits.iter().map(|f| f.b2));
    let stable = b1_drift < tol_drift && b2_drift < tol_drift;
    Ok(Lemma926Report {
        exponent,
        tol_slope,
        tol_drift,
        labels: runs.iter().map(|r| r.0.clone()).collect(),
        fits,
        b1_drift,
        b2_drift,
        slope_ok,
        stable,
        passed: slope_ok && stable,
    })
}

/// One family per `(seed, j0)` with [`random_eps`], checked together.
pub fn lemma926_suite(
    template: &Lemma926Input,
    seeds: &[u64],
    j0s: &[usize],
    s: &[f64],
    tol_slope: f64,
    tol_drift: f64,
) -> Result<(Lemma926Report, Vec<(String, Lemma926Input, Family)>)> {
    let mut runs = Vec::new();
    for &seed in seeds {
        for &j0 in j0s {
            let inp = Lemma926Input { eps: random_eps(j0, seed), ..template.clone() };
            let fam = lemma926_propagate(&inp, s)?;
            runs.push((format!("seed{seed}_j{j0}"), inp, fam));
        }
    }
    let refs: Vec<(String, &Lemma926Input, &Family)> = runs.iter().map(|(l, i, f)| (l.clone(), i, f)).collect();
    let report = lemma926_bound_check(&refs, tol_slope, tol_drift)?;
    Ok((report, runs))
}
