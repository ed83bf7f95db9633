//! Implicit finite-difference scheme for `(|u|^(q-1) u)_t = (|u_x|^(p-1) u_x)_x + S`
//! on `(0, 1)` with time-dependent Dirichlet data.
//!
//! Each step is backward Euler in the variable `v = |u|^(q-1) u`; the unknowns
//! are the interior values of `v` and `u = |v|^(1/q - 1) v` is recovered
//! pointwise. The flux is regularised as `(g^2 + eps^2)^((p-1)/2) g` and
//! evaluated on cell faces, so the discrete operator is conservative and its
//! Jacobian is a column-diagonally-dominant tridiagonal M-matrix.

mod io;
mod mesh;

pub use io::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointFormat};
pub use mesh::{Mesh, MeshSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{validate_params, ProblemParams};
use crate::regime::BoundaryRegime;

/// Regularised p-Laplacian flux `(g^2 + eps^2)^((p-1)/2) g`.
pub fn flux(g: f64, p: f64, eps: f64) -> f64 {
    (g * g + eps * eps).powf(0.5 * (p - 1.0)) * g
}

/// Derivative of [`flux`] with respect to `g`.
pub fn flux_derivative(g: f64, p: f64, eps: f64) -> f64 {
    let r2 = g * g + eps * eps;
    if r2 == 0.0 {
        // only reachable for eps = 0; p > 1 makes the flux flat at the origin
        return if p > 1.0 { 0.0 } else if p == 1.0 { 1.0 } else { f64::INFINITY };
    }
    r2.powf(0.5 * (p - 3.0)) * (p * g * g + eps * eps)
}

/// `v = |u|^(q-1) u`
pub fn to_time_variable(u: f64, q: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(q - 1.0) * u
    }
}

/// `u = |v|^(1/q - 1) v`
pub fn from_time_variable(v: f64, q: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(1.0 / q - 1.0) * v
    }
}

fn from_time_variable_derivative(v: f64, q: f64, floor: f64) -> f64 {
    let e = 1.0 / q - 1.0;
    if e >= 0.0 {
        v.abs().powf(e) / q
    } else {
        v.abs().max(floor).powf(e) / q
    }
}

/// Boundary data and forcing for one run.
pub trait Forcing {
    /// Dirichlet values at `x = 0` and `x = 1`.
    fn boundary(&self, t: f64) -> (f64, f64);

    fn source(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }

    fn has_source(&self) -> bool {
        false
    }
}

/// Homogeneous equation driven by a blow-up regime.
#[derive(Debug, Clone, Copy)]
pub struct RegimeForcing(pub BoundaryRegime);

impl Forcing for RegimeForcing {
    fn boundary(&self, t: f64) -> (f64, f64) {
        let f = self.0.f0 * (self.0.t_blow - t).powf(-self.0.kappa);
        match self.0.sides {
            crate::regime::Sides::Both => (f, f),
            crate::regime::Sides::Left => (f, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Residual tolerance, relative to `max(1, |v|_inf)`.
    pub tol: f64,
    pub max_iter: usize,
    pub min_damping: f64,
    /// Modified-Picard sweeps tried when the line search stalls.
    pub picard_sweeps: usize,
    /// Smallest substep before a run is aborted, relative to the mesh step.
    pub dt_min_ratio: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, min_damping: 1.0 / 1024.0, picard_sweeps: 20, dt_min_ratio: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub newton_iters: usize,
    pub picard_sweeps: usize,
    pub residual: f64,
}

/// Per-mesh-step record of the nonlinear solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub t: f64,
    pub dt: f64,
    pub substeps: usize,
    pub newton_iters: usize,
    pub picard_sweeps: usize,
    pub residual: f64,
}

/// Discrete operator for fixed `(p, q, eps, hx)`.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub hx: f64,
    pub opts: NewtonOptions,
}

struct Work {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }
}

/// Thomas algorithm; overwrites `rhs` with the solution.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], c: &mut [f64]) {
    let n = diag.len();
    c[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

impl Scheme {
    pub fn new(p: f64, q: f64, eps: f64, hx: f64) -> Self {
        Self { p, q, eps, hx, opts: NewtonOptions::default() }
    }

    /// Full-node `u` from interior `v` and boundary values.
    fn fill_u(&self, v: &[f64], bc: (f64, f64), u: &mut [f64]) {
        let n = v.len();
        u[0] = bc.0;
        u[n + 1] = bc.1;
        for i in 0..n {
            u[i + 1] = from_time_variable(v[i], self.q);
        }
    }

    /// Residual of the discrete step, returns its sup-norm.
    fn residual(&self, v: &[f64], v_old: &[f64], u: &[f64], dt: f64, src: &[f64], r: &mut [f64]) -> f64 {
        let h = self.hx;
        let c = dt / h;
        let mut face_left = flux((u[1] - u[0]) / h, self.p, self.eps);
        let mut norm = 0.0_f64;
        for i in 0..v.len() {
            let face_right = flux((u[i + 2] - u[i + 1]) / h, self.p, self.eps);
            let ri = v[i] - v_old[i] - c * (face_right - face_left) - dt * src[i];
            r[i] = ri;
            norm = norm.max(ri.abs());
            face_left = face_right;
        }
        norm
    }

    fn scale(&self, v: &[f64], v_old: &[f64]) -> f64 {
        1f64.max(sup_norm(v)).max(sup_norm(v_old))
    }

    /// Newton (`frozen = false`) or modified Picard (`frozen = true`) matrix.
    fn assemble(&self, v: &[f64], u: &[f64], dt: f64, frozen: bool, w: &mut Work) {
        let h = self.hx;
        let c = dt / (h * h);
        let floor = 1e-12 * self.scale(v, v);
        let n = v.len();
        for i in 0..n {
            let gl = (u[i + 1] - u[i]) / h;
            let gr = (u[i + 2] - u[i + 1]) / h;
            let (kl, kr) = if frozen {
                let k = |g: f64| (g * g + self.eps * self.eps).powf(0.5 * (self.p - 1.0));
                (k(gl), k(gr))
            } else {
                (flux_derivative(gl, self.p, self.eps), flux_derivative(gr, self.p, self.eps))
            };
            let d = |j: usize| from_time_variable_derivative(v[j], self.q, floor);
            w.diag[i] = 1.0 + c * (kl + kr) * d(i);
            w.lower[i] = if i > 0 { -c * kl * d(i - 1) } else { 0.0 };
            w.upper[i] = if i + 1 < n { -c * kr * d(i + 1) } else { 0.0 };
        }
    }

    /// One backward-Euler step. `u_prev` holds all nodes; the returned vector too.
    pub fn step(&self, u_prev: &[f64], dt: f64, bc: (f64, f64), source: &[f64]) -> Result<(Vec<f64>, StepStats)> {
        let n = u_prev.len() - 2;
        if !(dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        if source.len() != n {
            return Err(Error::InvalidParams("source length must equal interior node count".into()));
        }
        let v_old: Vec<f64> = u_prev[1..=n].iter().map(|&x| to_time_variable(x, self.q)).collect();
        let mut v = v_old.clone();
        let mut u = vec![0.0; n + 2];
        let mut trial_v = vec![0.0; n];
        let mut trial_u = vec![0.0; n + 2];
        let mut r = vec![0.0; n];
        let mut trial_r = vec![0.0; n];
        let mut w = Work::new(n);
        let mut stats = StepStats::default();

        self.fill_u(&v, bc, &mut u);
        let mut res = self.residual(&v, &v_old, &u, dt, source, &mut r);
        let mut picard_left = self.opts.picard_sweeps;

        for _ in 0..self.opts.max_iter {
            if res <= self.opts.tol * self.scale(&v, &v_old) {
                stats.residual = res;
                u[0] = bc.0;
                u[n + 1] = bc.1;
                return Ok((u, stats));
            }
            stats.newton_iters += 1;
            self.assemble(&v, &u, dt, false, &mut w);
            for i in 0..n {
                w.rhs[i] = -r[i];
            }
            solve_tridiagonal(&w.lower, &w.diag, &w.upper, &mut w.rhs, &mut w.scratch);

            let mut damping = 1.0;
            let mut accepted = false;
            while damping >= self.opts.min_damping {
                for i in 0..n {
                    trial_v[i] = v[i] + damping * w.rhs[i];
                }
                self.fill_u(&trial_v, bc, &mut trial_u);
                let trial_res = self.residual(&trial_v, &v_old, &trial_u, dt, source, &mut trial_r);
                if trial_res.is_finite() && trial_res < (1.0 - 1e-4 * damping) * res {
                    std::mem::swap(&mut v, &mut trial_v);
                    std::mem::swap(&mut u, &mut trial_u);
                    std::mem::swap(&mut r, &mut trial_r);
                    res = trial_res;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
            if accepted {
                continue;
            }
            // Line search stalled: modified-Picard sweep, accepted unconditionally.
            if picard_left == 0 {
                break;
            }
            picard_left -= 1;
            stats.picard_sweeps += 1;
            self.assemble(&v, &u, dt, true, &mut w);
            for i in 0..n {
                w.rhs[i] = -r[i];
            }
            solve_tridiagonal(&w.lower, &w.diag, &w.upper, &mut w.rhs, &mut w.scratch);
            for i in 0..n {
                v[i] += w.rhs[i];
            }
            self.fill_u(&v, bc, &mut u);
            res = self.residual(&v, &v_old, &u, dt, source, &mut r);
            if !res.is_finite() {
                break;
            }
        }
        if res <= self.opts.tol * self.scale(&v, &v_old) {
            stats.residual = res;
            return Ok((u, stats));
        }
        Err(Error::NonConvergence { iterations: stats.newton_iters + stats.picard_sweeps, residual: res, dt })
    }

    /// March over the mesh levels, halving the step locally on non-convergence.
    ///
    /// `observer` sees every mesh level (index, time, all nodal values),
    /// including the initial one.
    pub fn solve<F, O>(&self, forcing: &F, mesh: &Mesh, u0: &[f64], mut observer: O) -> Result<Vec<LevelStats>>
    where
        F: Forcing + ?Sized,
        O: FnMut(usize, f64, &[f64]),
    {
        if u0.len() != mesh.nodes() {
            return Err(Error::InvalidParams(format!(
                "initial data has {} values, mesh has {} nodes",
                u0.len(),
                mesh.nodes()
            )));
        }
        let xs = mesh.xs();
        let mut u = u0.to_vec();
        let bc0 = forcing.boundary(mesh.times[0]);
        u[0] = bc0.0;
        *u.last_mut().unwrap() = bc0.1;
        observer(0, mesh.times[0], &u);

        let mut src = vec![0.0; mesh.nx];
        let mut stats = Vec::with_capacity(mesh.steps());
        for k in 0..mesh.steps() {
            let (t0, t1) = (mesh.times[k], mesh.times[k + 1]);
            let dt_mesh = t1 - t0;
            let dt_min = dt_mesh * self.opts.dt_min_ratio;
            let mut t = t0;
            let mut dt = dt_mesh;
            let mut rec = LevelStats { t: t1, dt: dt_mesh, substeps: 0, newton_iters: 0, picard_sweeps: 0, residual: 0.0 };
            while t < t1 {
                let t_new = if t + dt >= t1 - 1e-14 * t1.abs() { t1 } else { t + dt };
                let h = t_new - t;
                if forcing.has_source() {
                    for (i, s) in src.iter_mut().enumerate() {
                        *s = forcing.source(t_new, xs[i + 1]);
                    }
                }
                match self.step(&u, h, forcing.boundary(t_new), &src) {
                    Ok((next, st)) => {
                        u = next;
                        t = t_new;
                        rec.substeps += 1;
                        rec.newton_iters += st.newton_iters;
                        rec.picard_sweeps += st.picard_sweeps;
                        rec.residual = rec.residual.max(st.residual);
                    }
                    Err(Error::NonConvergence { .. }) => {
                        dt = 0.5 * h;
                        if dt < dt_min {
                            return Err(Error::AbortedRun { level: k, t_last: t, dt_min });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            stats.push(rec);
            observer(k + 1, t1, &u);
        }
        Ok(stats)
    }
}

/// Stored levels of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrajectory {
    pub mesh: Mesh,
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    /// Indices into `mesh.times` of the stored levels.
    pub level_index: Vec<usize>,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub stats: Vec<LevelStats>,
}

impl SolutionTrajectory {
    pub fn last(&self) -> &[f64] {
        self.u.last().unwrap()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Run settings beyond the mesh itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    /// Flux regularisation; `None` ties it to the spacing (`eps = hx`).
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub newton: NewtonOptions,
    /// Keep every `store_stride`-th level (the last level is always kept).
    #[serde(default = "default_stride")]
    pub store_stride: usize,
}

fn default_stride() -> usize {
    1
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps: None, newton: NewtonOptions::default(), store_stride: 1 }
    }
}

/// Initial data `f(0) phi(x)` consistent with the regime extension.
pub fn regime_initial_data(regime: &BoundaryRegime, mesh: &Mesh) -> Result<Vec<f64>> {
    (0..mesh.nodes()).map(|i| regime.extension(0.0, mesh.x(i))).collect()
}

/// Solve the homogeneous equation driven by `regime` up to `T - delta_stop`.
///
/// `observer` sees every mesh level; storage follows `opts.store_stride`.
pub fn solve_regime<O>(
    params: &ProblemParams,
    regime: &BoundaryRegime,
    spec: &MeshSpec,
    opts: &SolveOptions,
    mut observer: O,
) -> Result<SolutionTrajectory>
where
    O: FnMut(usize, f64, &[f64]),
{
    let report = validate_params(params);
    if !report.passed() {
        let names: Vec<_> = report.failures().map(|c| c.condition.clone()).collect();
        return Err(Error::InvalidParams(format!("violated: {}", names.join("; "))));
    }
    regime.check()?;
    let mesh = Mesh::graded(spec, regime.t_blow)?;
    let u0 = regime_initial_data(regime, &mesh)?;
    let eps = opts.eps.unwrap_or(mesh.hx);
    let mut scheme = Scheme::new(params.p, params.q, eps, mesh.hx);
    scheme.opts = opts.newton;

    let stride = opts.store_stride.max(1);
    let last = mesh.steps();
    let mut level_index = Vec::new();
    let mut times = Vec::new();
    let mut stored = Vec::new();
    let stats = scheme.solve(&RegimeForcing(*regime), &mesh, &u0, |k, t, u| {
        observer(k, t, u);
        if k % stride == 0 || k == last {
            level_index.push(k);
            times.push(t);
            stored.push(u.to_vec());
        }
    })?;
    Ok(SolutionTrajectory { mesh, p: params.p, q: params.q, eps, level_index, times, u: stored, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn flux_values() {
        assert_eq!(flux(0.0, 1.7, 0.0), 0.0);
        assert_eq!(flux(1.0, 2.0, 0.0), 1.0);
        assert_eq!(flux(-2.0, 2.0, 0.0), -4.0);
        assert_relative_eq!(flux(1.0, 3.0, 1.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn flux_derivative_matches_difference() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            for &g in &[-2.0, -0.3, 0.0, 0.01, 0.7, 5.0] {
                let eps = 0.05;
                let h = 1e-6;
                let fd = (flux(g + h, p, eps) - flux(g - h, p, eps)) / (2.0 * h);
                assert_relative_eq!(flux_derivative(g, p, eps), fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn time_variable_round_trip() {
        for &q in &[0.5, 0.8, 1.0, 2.0] {
            for &u in &[-3.0, -0.1, 0.0, 0.25, 7.0] {
                assert_relative_eq!(from_time_variable(to_time_variable(u, q), q), u, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn tridiagonal_solve() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i] + if i > 0 { lower[i] * x[i - 1] } else { 0.0 } + if i < 3 { upper[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        let mut c = [0.0; 4];
        solve_tridiagonal(&lower, &diag, &upper, &mut b, &mut c);
        for i in 0..4 {
            assert_relative_eq!(b[i], x[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_state_is_fixed() {
        let s = Scheme::new(1.5, 0.8, 0.01, 0.05);
        let u = vec![2.5; 21];
        let (next, _) = s.step(&u, 0.1, (2.5, 2.5), &vec![0.0; 19]).unwrap();
        for x in next {
            assert_relative_eq!(x, 2.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn linear_state_is_fixed() {
        for &p in &[1.5, 2.0, 3.0] {
            let n = 39;
            let h = 1.0 / (n as f64 + 1.0);
            let s = Scheme::new(p, 0.8, h, h);
            let u: Vec<f64> = (0..n + 2).map(|i| i as f64 * h).collect();
            let (next, _) = s.step(&u, 0.01, (0.0, 1.0), &vec![0.0; n]).unwrap();
            for (a, b) in next.iter().zip(&u) {
                assert!((a - b).abs() < 1e-9, "p = {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn heat_step_from_exact_data() {
        // p = q = 1: u = sin(pi x) exp(-pi^2 t); local error O(dt^2 + dt hx^2).
        let n = 99;
        let h = 1.0 / (n as f64 + 1.0);
        let s = Scheme::new(1.0, 1.0, 0.0, h);
        let dt = 1e-4;
        let exact = |t: f64, x: f64| (PI * x).sin() * (-PI * PI * t).exp();
        let u0: Vec<f64> = (0..n + 2).map(|i| exact(0.0, i as f64 * h)).collect();
        let (u1, _) = s.step(&u0, dt, (0.0, 0.0), &vec![0.0; n]).unwrap();
        let err = (0..n + 2).map(|i| (u1[i] - exact(dt, i as f64 * h)).abs()).fold(0.0, f64::max);
        let bound = 10.0 * (dt * dt * PI.powi(4) + dt * h * h * PI.powi(4) / 12.0);
        assert!(err < bound, "err {err} bound {bound}");
    }

    #[test]
    fn nonconvergence_is_reported() {
        let mut s = Scheme::new(3.0, 0.5, 1e-3, 0.01);
        s.opts.max_iter = 1;
        s.opts.picard_sweeps = 0;
        let mut u = vec![0.0; 101];
        u[0] = 50.0;
        let err = s.step(&u, 10.0, (50.0, 0.0), &vec![0.0; 99]).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn zero_regime_stays_zero() {
        let params = ProblemParams::default();
        let regime = BoundaryRegime::new(0.873, 0.0, 0.1, 1.0).unwrap();
        let spec = MeshSpec { nx: 50, levels: 40, ..Default::default() };
        let traj = solve_regime(&params, &regime, &spec, &SolveOptions::default(), |_, _, _| {}).unwrap();
        assert!(traj.u.iter().all(|level| level.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn boundary_nodes_follow_trace() {
        let params = ProblemParams::default();
        let regime = BoundaryRegime::new(0.873, 1.0, 0.1, 1.0).unwrap();
        let spec = MeshSpec { nx: 60, levels: 80, ..Default::default() };
        let traj = solve_regime(&params, &regime, &spec, &SolveOptions::default(), |_, _, _| {}).unwrap();
        for (t, u) in traj.times.iter().zip(&traj.u) {
            let f = crate::regime::dirichlet_trace(&regime, *t).unwrap();
            assert_eq!(u[0], f);
            assert_eq!(*u.last().unwrap(), f);
        }
        assert_eq!(traj.stats.len(), 80);
    }

    #[test]
    fn rejects_invalid_params() {
        let params = ProblemParams { p: 0.5, ..Default::default() };
        let regime = BoundaryRegime::new(0.5, 1.0, 0.1, 1.0).unwrap();
        let spec = MeshSpec { nx: 10, levels: 10, ..Default::default() };
        assert!(solve_regime(&params, &regime, &spec, &SolveOptions::default(), |_, _, _| {}).is_err());
    }
}
