//! Interior energy functionals and the layered (Gamma) time sequence.
//!
//! `E(t, s)` is the space-time integral of `|u_x|^(p+1)` over `(0, t) x (s, 1 - s)`
//! and `h(t, s)` the instantaneous `(q+1)`-mass over `(s, 1 - s)`. Spatial
//! integrals use the piecewise linear interpolant of nodal densities, time
//! integrals the trapezoid rule over the observed levels.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{compute_exponents, contractions, ProblemParams};
use crate::solver::SolutionTrajectory;

/// Geometric grid of collar depths `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGridSpec {
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    /// Smallest depth in units of the spacing.
    #[serde(default = "default_floor")]
    pub floor_factor: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    /// Anchor depth for the layered sequence; defaults to the smallest grid depth.
    #[serde(default)]
    pub anchor: Option<f64>,
}

fn default_ppd() -> usize {
    24
}

fn default_floor() -> f64 {
    4.0
}

fn default_s_max() -> f64 {
    0.4
}

impl Default for SGridSpec {
    fn default() -> Self {
        Self { points_per_decade: default_ppd(), floor_factor: default_floor(), s_max: default_s_max(), anchor: None }
    }
}

pub fn s_grid(spec: &SGridSpec, hx: f64) -> Result<Vec<f64>> {
    let lo = spec.floor_factor * hx;
    if spec.points_per_decade == 0 || !(lo > 0.0) || !(spec.s_max > lo) || spec.s_max >= 0.5 {
        return Err(Error::InvalidParams(format!("bad s grid {spec:?} for hx = {hx}")));
    }
    let ppd = spec.points_per_decade as f64;
    let count = ((spec.s_max / lo).log10() * ppd * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=count).map(|k| lo * 10f64.powf(k as f64 / ppd)).collect())
}

fn check_depth(s: f64) -> Result<()> {
    if s > 0.0 && s < 0.5 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("collar depth s = {s} not in (0, 1/2)")))
    }
}

/// Nodal `|u_x|^(p+1)`: central differences inside, one-sided at the ends.
fn gradient_density(u: &[f64], hx: f64, p: f64) -> Vec<f64> {
    let n = u.len() - 1;
    (0..=n)
        .map(|i| {
            let g = match i {
                0 => (u[1] - u[0]) / hx,
                i if i == n => (u[n] - u[n - 1]) / hx,
                i => (u[i + 1] - u[i - 1]) / (2.0 * hx),
            };
            g.abs().powf(p + 1.0)
        })
        .collect()
}

fn mass_density(u: &[f64], q: f64) -> Vec<f64> {
    u.iter().map(|x| x.abs().powf(q + 1.0)).collect()
}

/// Running integral of a piecewise linear nodal function.
struct Primitive<'a> {
    g: &'a [f64],
    c: Vec<f64>,
    hx: f64,
}

impl<'a> Primitive<'a> {
    fn new(g: &'a [f64], hx: f64) -> Self {
        let mut c = Vec::with_capacity(g.len());
        c.push(0.0);
        for w in g.windows(2) {
            c.push(c.last().unwrap() + 0.5 * hx * (w[0] + w[1]));
        }
        Self { g, c, hx }
    }

    fn at(&self, x: f64) -> f64 {
        let n = self.g.len() - 1;
        let i = ((x / self.hx).floor().max(0.0) as usize).min(n - 1);
        let d = x - i as f64 * self.hx;
        self.c[i] + d * self.g[i] + d * d / (2.0 * self.hx) * (self.g[i + 1] - self.g[i])
    }

    fn total(&self) -> f64 {
        *self.c.last().unwrap()
    }

    /// Integral over `(s, 1 - s)`.
    fn interior(&self, s: f64) -> f64 {
        (self.at(1.0 - s) - self.at(s)).max(0.0)
    }
}

/// Gradient and mass integrals of one level at each depth, then globally.
fn level_integrals(u: &[f64], hx: f64, p: f64, q: f64, depths: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let gd = gradient_density(u, hx, p);
    let md = mass_density(u, q);
    let g = Primitive::new(&gd, hx);
    let m = Primitive::new(&md, hx);
    let gi = depths.iter().map(|&s| g.interior(s)).collect();
    let mi = depths.iter().map(|&s| m.interior(s)).collect();
    (gi, mi, g.total(), m.total())
}

/// Tabulated `E`, `h` and running `sup h` on an s-grid, indexed `[s][level]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub hsup: Vec<Vec<f64>>,
    /// Whole-domain values (`s = 0`).
    pub global_e: Vec<f64>,
    pub global_h: Vec<f64>,
    pub global_hsup: Vec<f64>,
}

/// Builds an [`EnergyProfile`] level by level, so a run need not store its levels.
#[derive(Debug, Clone)]
pub struct EnergyAccumulator {
    p: f64,
    q: f64,
    hx: f64,
    prev_grad: Vec<f64>,
    prev_global: f64,
    profile: EnergyProfile,
}

impl EnergyAccumulator {
    pub fn new(s: Vec<f64>, p: f64, q: f64, hx: f64) -> Result<Self> {
        for &x in &s {
            check_depth(x)?;
        }
        let ns = s.len();
        Ok(Self {
            p,
            q,
            hx,
            prev_grad: vec![0.0; ns],
            prev_global: 0.0,
            profile: EnergyProfile {
                s,
                t: Vec::new(),
                e: vec![Vec::new(); ns],
                h: vec![Vec::new(); ns],
                hsup: vec![Vec::new(); ns],
                global_e: Vec::new(),
                global_h: Vec::new(),
                global_hsup: Vec::new(),
            },
        })
    }

    pub fn observe(&mut self, t: f64, u: &[f64]) {
        let (grad, mass, grad_all, mass_all) = level_integrals(u, self.hx, self.p, self.q, &self.profile.s);
        let pr = &mut self.profile;
        let dt = pr.t.last().map(|&t0| t - t0);
        for i in 0..pr.s.len() {
            let e = match dt {
                Some(dt) => pr.e[i].last().unwrap() + 0.5 * dt * (self.prev_grad[i] + grad[i]),
                None => 0.0,
            };
            let hs = pr.hsup[i].last().map_or(mass[i], |&m: &f64| m.max(mass[i]));
            pr.e[i].push(e);
            pr.h[i].push(mass[i]);
            pr.hsup[i].push(hs);
        }
        let ge = match dt {
            Some(dt) => pr.global_e.last().unwrap() + 0.5 * dt * (self.prev_global + grad_all),
            None => 0.0,
        };
        let gs = pr.global_hsup.last().map_or(mass_all, |&m: &f64| m.max(mass_all));
        pr.global_e.push(ge);
        pr.global_h.push(mass_all);
        pr.global_hsup.push(gs);
        pr.t.push(t);
        self.prev_grad = grad;
        self.prev_global = grad_all;
    }

    pub fn finish(self) -> EnergyProfile {
        self.profile
    }
}

/// Profile over the stored levels of a trajectory.
pub fn profile_from_trajectory(traj: &SolutionTrajectory, s: Vec<f64>) -> Result<EnergyProfile> {
    let mut acc = EnergyAccumulator::new(s, traj.p, traj.q, traj.mesh.hx)?;
    for (t, u) in traj.times.iter().zip(&traj.u) {
        acc.observe(*t, u);
    }
    Ok(acc.finish())
}

fn check_time(traj: &SolutionTrajectory, t: f64) -> Result<()> {
    let (t0, t1) = (traj.times[0], traj.t_final());
    if t >= t0 && t <= t1 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("t = {t} outside stored range [{t0}, {t1}]")))
    }
}

/// `E(t, s)` over the stored levels; `t` between levels uses a linear integrand.
pub fn energy_e(traj: &SolutionTrajectory, t: f64, s: f64) -> Result<f64> {
    check_depth(s)?;
    check_time(traj, t)?;
    let hx = traj.mesh.hx;
    let dens = |u: &[f64]| Primitive::new(&gradient_density(u, hx, traj.p), hx).interior(s);
    let mut e = 0.0;
    let mut prev = dens(&traj.u[0]);
    for k in 1..traj.times.len() {
        let (ta, tb) = (traj.times[k - 1], traj.times[k]);
        if ta >= t {
            break;
        }
        let cur = dens(&traj.u[k]);
        if tb > t {
            let mid = prev + (t - ta) / (tb - ta) * (cur - prev);
            e += 0.5 * (t - ta) * (prev + mid);
            break;
        }
        e += 0.5 * (tb - ta) * (prev + cur);
        prev = cur;
    }
    Ok(e)
}

/// Running maximum of the interior mass over stored levels up to `t`.
pub fn energy_h_sup(traj: &SolutionTrajectory, t: f64, s: f64) -> Result<f64> {
    check_depth(s)?;
    check_time(traj, t)?;
    let hx = traj.mesh.hx;
    let mass = |u: &[f64]| Primitive::new(&mass_density(u, traj.q), hx).interior(s);
    Ok(traj
        .times
        .iter()
        .zip(&traj.u)
        .take_while(|(tk, _)| **tk <= t)
        .map(|(_, u)| mass(u))
        .fold(0.0, f64::max))
}

/// Piecewise linear value of `(ts, vs)` at `t`, clamped to the ends.
fn interp(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let k = ts.partition_point(|&x| x <= t);
    if k == 0 {
        return vs[0];
    }
    if k == ts.len() {
        return vs[k - 1];
    }
    let (ta, tb) = (ts[k - 1], ts[k]);
    vs[k - 1] + (t - ta) / (tb - ta) * (vs[k] - vs[k - 1])
}

/// Maximum over `[a, b]` of the piecewise linear interpolant.
fn range_max(ts: &[f64], vs: &[f64], a: f64, b: f64) -> f64 {
    let mut m = interp(ts, vs, a).max(interp(ts, vs, b));
    let lo = ts.partition_point(|&x| x <= a);
    let hi = ts.partition_point(|&x| x < b);
    for v in &vs[lo..hi.max(lo)] {
        m = m.max(*v);
    }
    m
}

/// `E(., s)` and `h(., s)` for one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub s: f64,
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
}

impl Column {
    pub fn e_at(&self, t: f64) -> f64 {
        interp(&self.t, &self.e, t)
    }

    pub fn h_max(&self, a: f64, b: f64) -> f64 {
        range_max(&self.t, &self.h, a, b)
    }

    /// `E(t_b) - E(t_a) + sup_(t_a, t_b) h`.
    pub fn increment(&self, a: f64, b: f64) -> f64 {
        (self.e_at(b) - self.e_at(a)).max(0.0) + self.h_max(a, b)
    }
}

impl EnergyProfile {
    pub fn horizon(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Column at depth `s`, linear in `s` between grid depths.
    pub fn column(&self, s: f64) -> Result<Column> {
        let (first, last) = (self.s[0], *self.s.last().unwrap());
        if !(s >= first * (1.0 - 1e-12) && s <= last * (1.0 + 1e-12)) {
            return Err(Error::OutOfDomain(format!("s = {s} outside tabulated [{first}, {last}]")));
        }
        let k = self.s.partition_point(|&x| x <= s).clamp(1, self.s.len());
        let i = k - 1;
        if i + 1 == self.s.len() || (s - self.s[i]).abs() <= 1e-12 * s {
            return Ok(Column { s, t: self.t.clone(), e: self.e[i].clone(), h: self.h[i].clone() });
        }
        let w = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect();
        Ok(Column { s, t: self.t.clone(), e: mix(&self.e[i], &self.e[i + 1]), h: mix(&self.h[i], &self.h[i + 1]) })
    }

    /// Largest violation of monotonicity in `s` (positive means `E` or `sup h` grew with `s`),
    /// relative to the whole-domain value at the same level.
    pub fn domain_monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.t.len() {
            for (vals, scale) in [(&self.e, self.global_e[k]), (&self.hsup, self.global_hsup[k])] {
                if scale <= 0.0 {
                    continue;
                }
                for i in 1..self.s.len() {
                    worst = worst.max((vals[i][k] - vals[i - 1][k]) / scale);
                }
            }
        }
        worst
    }

    /// `sup_t (E(t) + sup h(t)) (T - t)^alpha` over the whole domain: the smallest
    /// amplitude for which the global growth bound holds at every level.
    pub fn measured_amplitude(&self, alpha: f64, t_blow: f64) -> f64 {
        self.t
            .iter()
            .enumerate()
            .map(|(k, &t)| (self.global_e[k] + self.global_hsup[k]) * (t_blow - t).powf(alpha))
            .fold(0.0, f64::max)
    }

    /// Copy with every energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let sc = |v: &Vec<Vec<f64>>| v.iter().map(|c| c.iter().map(|x| x * factor).collect()).collect();
        let sv = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect();
        Self {
            s: self.s.clone(),
            t: self.t.clone(),
            e: sc(&self.e),
            h: sc(&self.h),
            hsup: sc(&self.hsup),
            global_e: sv(&self.global_e),
            global_h: sv(&self.global_h),
            global_hsup: sv(&self.global_hsup),
        }
    }
}

/// Layer times `t_0 = 0 < t_1 < ... < t_j0` built from one anchor depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSequence {
    pub anchor: f64,
    pub omega0: f64,
    /// Last tabulated time; stands in for `T` as the end of the time range.
    pub horizon: f64,
    /// `E + sup h` at the anchor over the whole run, and the threshold it is compared with.
    pub anchor_total: f64,
    pub threshold: f64,
    /// Below threshold: no layers are generated.
    pub alternative: bool,
    pub t_prime: Option<f64>,
    pub times: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl LayerSequence {
    pub fn layers(&self) -> usize {
        self.deltas.len()
    }
}

const MAX_LAYERS: usize = 100_000;

/// Bisection down to adjacent floats for a decreasing function with `f(lo) > 0 >= f(hi)`.
fn bisect_decreasing(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Scale `xi^alpha / (omega0 T^(alpha - alpha1))` of the layer identity.
fn layer_scale(params: &ProblemParams, alpha: f64) -> f64 {
    params.xi.powf(alpha) / (params.omega0 * params.t_blow.powf(alpha - params.alpha1))
}

/// Generate the layer sequence at anchor depth `anchor` with amplitude `params.omega0`.
pub fn gamma_sequence(profile: &EnergyProfile, anchor: f64, params: &ProblemParams) -> Result<LayerSequence> {
    let alpha = compute_exponents(params)?.alpha;
    if !(params.omega0 > 0.0) {
        return Err(Error::InvalidParams(format!("omega0 = {} must be positive", params.omega0)));
    }
    let col = profile.column(anchor)?;
    let t0 = col.t[0];
    let horizon = profile.horizon();
    let c = layer_scale(params, alpha);
    let anchor_total = col.increment(t0, horizon);
    let threshold = 2.0 * params.omega0 * params.t_blow.powf(-params.alpha1) * params.xi.powf(-alpha);
    let mut seq = LayerSequence {
        anchor,
        omega0: params.omega0,
        horizon,
        anchor_total,
        threshold,
        alternative: anchor_total <= threshold,
        t_prime: None,
        times: vec![t0],
        deltas: Vec::new(),
    };
    if seq.alternative {
        return Ok(seq);
    }

    // t' closes the last layer exactly at the horizon; the residual increases in t.
    let closing = |t: f64| (horizon - t).powf(-alpha) - c * col.increment(t, horizon);
    let t_prime = if closing(t0) >= 0.0 { t0 } else { bisect_decreasing(t0, horizon, |t| -closing(t)) };
    seq.t_prime = Some(t_prime);

    let mut t = t0;
    while t <= t_prime {
        let resid = |g: f64| (g - t).powf(-alpha) - c * col.increment(t, g);
        let end = resid(horizon);
        let next = if end <= 0.0 {
            bisect_decreasing(t, horizon, resid)
        } else if end <= 1e-9 * (horizon - t).powf(-alpha) {
            horizon
        } else {
            return Err(Error::UnresolvedRoot(format!("no layer end after t = {t} within the tabulated range")));
        };
        if !(next > t) || seq.deltas.len() >= MAX_LAYERS {
            return Err(Error::UnresolvedRoot(format!("layer sequence stalled at t = {t}")));
        }
        seq.deltas.push(next - t);
        seq.times.push(next);
        t = next;
    }
    Ok(seq)
}

/// Relative residual of `Delta_j^(-alpha) = c (E_j + h_j)` for each generated layer.
pub fn identity_residuals(profile: &EnergyProfile, seq: &LayerSequence, params: &ProblemParams) -> Result<Vec<f64>> {
    let alpha = compute_exponents(params)?.alpha;
    let col = profile.column(seq.anchor)?;
    let p = ProblemParams { omega0: seq.omega0, ..*params };
    let c = layer_scale(&p, alpha);
    Ok(seq
        .times
        .windows(2)
        .map(|w| {
            let lhs = (w[1] - w[0]).powf(-alpha);
            (lhs - c * col.increment(w[0], w[1])).abs() / lhs
        })
        .collect())
}

/// The global growth bound `E(t) + sup h(t) <= omega0 (T - t)^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub omega0: f64,
    pub measured_amplitude: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `Delta_(j+1) / Delta_j` over consecutive generated layers.
    pub ratios: Vec<f64>,
    pub ok: Vec<bool>,
    pub max_ratio: f64,
    /// `(horizon - t_j0) / Delta_j0`, reported but not part of the verdict.
    pub tail_ratio: Option<f64>,
    pub xi: f64,
    pub tol_ratio: f64,
    pub precondition: GrowthBound,
    /// False when the growth bound fails: the ratios then carry no weight.
    pub probative: bool,
    pub passed: bool,
}

pub fn check_qualified_monotonicity(
    profile: &EnergyProfile,
    seq: &LayerSequence,
    params: &ProblemParams,
    tol_ratio: f64,
) -> Result<MonotonicityReport> {
    let alpha = compute_exponents(params)?.alpha;
    let measured = profile.measured_amplitude(alpha, params.t_blow);
    let precondition =
        GrowthBound { omega0: seq.omega0, measured_amplitude: measured, holds: measured <= seq.omega0 * (1.0 + 1e-9) };
    let ratios: Vec<f64> = seq.deltas.windows(2).map(|w| w[1] / w[0]).collect();
    let limit = params.xi * (1.0 + tol_ratio);
    let ok: Vec<bool> = ratios.iter().map(|&r| r <= limit).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let tail_ratio = seq.deltas.last().map(|d| (seq.horizon - seq.times.last().unwrap()) / d);
    Ok(MonotonicityReport {
        passed: ok.iter().all(|&b| b),
        ratios,
        ok,
        max_ratio,
        tail_ratio,
        xi: params.xi,
        tol_ratio,
        precondition,
        probative: precondition.holds,
    })
}

/// Layer energies `E_j(s)` and `h_j(s)`, indexed `[j][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTables {
    pub e: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

pub fn layered_energies(profile: &EnergyProfile, seq: &LayerSequence) -> LayerTables {
    let mut e = Vec::with_capacity(seq.layers());
    let mut h = Vec::with_capacity(seq.layers());
    for w in seq.times.windows(2) {
        let (a, b) = (w[0], w[1]);
        e.push(
            (0..profile.s.len())
                .map(|i| (interp(&profile.t, &profile.e[i], b) - interp(&profile.t, &profile.e[i], a)).max(0.0))
                .collect(),
        );
        h.push((0..profile.s.len()).map(|i| range_max(&profile.t, &profile.h[i], a, b)).collect());
    }
    LayerTables { e, h }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDiagnostic {
    /// `U_j^(1)` and `U_j^(2)` at the anchor.
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// `(U_j^(1) + U_j^(2)) Delta_j^(alpha - alpha1) / omega0`.
    pub scaled: Vec<f64>,
    /// Running maximum of `scaled`.
    pub running_sup: Vec<f64>,
    pub sup: f64,
    /// Structural constant `G2` of the same bound, for comparison only.
    pub g2: f64,
    pub finite: bool,
}

pub fn weighted_energy_diagnostic(
    profile: &EnergyProfile,
    seq: &LayerSequence,
    params: &ProblemParams,
) -> Result<WeightedDiagnostic> {
    let exps = compute_exponents(params)?;
    let th = contractions(params, &exps);
    let (alpha, a1, g) = (exps.alpha, params.alpha1, 1.0 + params.gamma);
    let xi = params.xi;
    let g1 = xi.powf(-alpha) * params.t_blow.powf(alpha - a1);
    let g2 = g1 * (1.0 / (1.0 - th.theta1 * xi.powf(alpha - a1)) + 1.0 / (1.0 - th.theta2 * xi.powf(alpha - a1)));

    let col = profile.column(seq.anchor)?;
    let d = &seq.deltas;
    let weights: Vec<f64> =
        seq.times.windows(2).zip(d).map(|(w, dj)| dj.powf(a1) * col.increment(w[0], w[1])).collect();
    let sum = |j: usize, nu: f64, mu: f64| -> f64 {
        let e = a1 - nu / (1.0 + mu);
        (0..=j).map(|i| g.powf((j - i) as f64 / (1.0 + mu)) * (d[j] / d[i]).powf(e) * weights[i]).sum()
    };
    let u1: Vec<f64> = (0..d.len()).map(|j| sum(j, exps.nu1, exps.mu1)).collect();
    let u2: Vec<f64> = (0..d.len()).map(|j| sum(j, exps.nu2, exps.mu2)).collect();
    let scaled: Vec<f64> =
        (0..d.len()).map(|j| (u1[j] + u2[j]) * d[j].powf(alpha - a1) / seq.omega0).collect();
    let mut running_sup = Vec::with_capacity(scaled.len());
    let mut sup: f64 = 0.0;
    for &x in &scaled {
        sup = sup.max(x);
        running_sup.push(sup);
    }
    Ok(WeightedDiagnostic { u1, u2, finite: sup.is_finite(), scaled, running_sup, sup, g2 })
}

/// Long-format `s,t,E,h,hsup` rows; the whole-domain values come first with `s = 0`.
pub fn write_profile_csv<W: Write>(profile: &EnergyProfile, mut out: W) -> Result<()> {
    writeln!(out, "s,t,E,h,hsup")?;
    for (k, t) in profile.t.iter().enumerate() {
        writeln!(out, "0,{t},{},{},{}", profile.global_e[k], profile.global_h[k], profile.global_hsup[k])?;
    }
    for (i, s) in profile.s.iter().enumerate() {
        for (k, t) in profile.t.iter().enumerate() {
            writeln!(out, "{s},{t},{},{},{}", profile.e[i][k], profile.h[i][k], profile.hsup[i][k])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_profile_csv`].
pub fn read_profile_csv<R: BufRead>(input: R) -> Result<EnergyProfile> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "s,t,E,h,hsup" {
        return Err(Error::Format(format!("unexpected profile header {header:?}")));
    }
    let mut blocks: Vec<(f64, Vec<[f64; 4]>)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("profile row {}: {e}", n + 2)))?;
        if v.len() != 5 {
            return Err(Error::Format(format!("profile row {} has {} fields", n + 2, v.len())));
        }
        match blocks.last_mut() {
            Some((s, rows)) if *s == v[0] => rows.push([v[1], v[2], v[3], v[4]]),
            _ => blocks.push((v[0], vec![[v[1], v[2], v[3], v[4]]])),
        }
    }
    let (global, rest) = match blocks.split_first() {
        Some((g, rest)) if g.0 == 0.0 => (g, rest),
        _ => return Err(Error::Format("profile lacks the whole-domain block".into())),
    };
    let t: Vec<f64> = global.1.iter().map(|r| r[0]).collect();
    let col = |rows: &[[f64; 4]], c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    for (s, rows) in rest {
        if col(rows, 0) != t {
            return Err(Error::Format(format!("time column at s = {s} differs from the whole-domain block")));
        }
    }
    Ok(EnergyProfile {
        s: rest.iter().map(|b| b.0).collect(),
        e: rest.iter().map(|b| col(&b.1, 1)).collect(),
        h: rest.iter().map(|b| col(&b.1, 2)).collect(),
        hsup: rest.iter().map(|b| col(&b.1, 3)).collect(),
        global_e: col(&global.1, 1),
        global_h: col(&global.1, 2),
        global_hsup: col(&global.1, 3),
        t,
    })
}

/// `j,t_j,delta_j` rows.
pub fn write_sequence_csv<W: Write>(seq: &LayerSequence, mut out: W) -> Result<()> {
    writeln!(out, "j,t_j,delta_j")?;
    for (j, (t, d)) in seq.times[1..].iter().zip(&seq.deltas).enumerate() {
        writeln!(out, "{},{t},{d}", j + 1)?;
    }
    out.flush()?;
    Ok(())
}
