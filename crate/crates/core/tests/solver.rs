use std::f64::consts::PI;

use blowup_core::exponents::*;
use blowup_core::regime::*;
use blowup_core::solver::*;

/// `u = exp(t) sin(pi x)` for `u_t = u_xx + g`.
struct Manufactured;

impl Forcing for Manufactured {
    fn boundary(&self, _t: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn source(&self, t: f64, x: f64) -> f64 {
        (1.0 + PI * PI) * t.exp() * (PI * x).sin()
    }
    fn has_source(&self) -> bool {
        true
    }
}

fn mms_error(nx: usize, steps: usize, t_end: f64) -> f64 {
    let mesh = Mesh::uniform(nx, t_end, steps).unwrap();
    let scheme = Scheme::new(1.0, 1.0, 0.0, mesh.hx);
    let u0: Vec<f64> = mesh.xs().iter().map(|x| (PI * x).sin()).collect();
    let mut last = Vec::new();
    scheme.solve(&Manufactured, &mesh, &u0, |_, _, u| last = u.to_vec()).unwrap();
    mesh.xs()
        .iter()
        .zip(&last)
        .map(|(x, u)| (u - t_end.exp() * (PI * x).sin()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn mms_spatial_order() {
    let errs: Vec<f64> = [9, 19, 39].iter().map(|&nx| mms_error(nx, 4000, 0.1)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "{errs:?}");
    }
}

#[test]
fn mms_temporal_order() {
    let errs: Vec<f64> = [10, 20, 40].iter().map(|&k| mms_error(399, k, 1.0)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.9, "{errs:?}");
    }
}

#[test]
fn steady_states_hold_for_several_p() {
    struct Fixed(f64, f64);
    impl Forcing for Fixed {
        fn boundary(&self, _t: f64) -> (f64, f64) {
            (self.0, self.1)
        }
    }
    for p in [1.5, 2.0, 3.0] {
        for (a, b) in [(0.7, 0.7), (0.2, 1.3)] {
            let mesh = Mesh::uniform(49, 1.0, 10).unwrap();
            let scheme = Scheme::new(p, 0.8, mesh.hx, mesh.hx);
            let u0: Vec<f64> = mesh.xs().iter().map(|x| a + (b - a) * x).collect();
            let mut last = Vec::new();
            scheme.solve(&Fixed(a, b), &mesh, &u0, |_, _, u| last = u.to_vec()).unwrap();
            for (got, want) in last.iter().zip(&u0) {
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "p = {p}");
            }
        }
    }
}

#[test]
fn regime_run_is_nonnegative_and_monotone_at_the_boundary() {
    let params = ProblemParams::default();
    let exps = compute_exponents(&params).unwrap();
    let regime = BoundaryRegime::new(BoundaryRegime::default_kappa(&params, &exps), 1e-2, 0.1, 1.0).unwrap();
    let spec = MeshSpec { nx: 199, levels: 400, ..Default::default() };
    let traj = solve_regime(&params, &regime, &spec, &SolveOptions { store_stride: 20, ..Default::default() }, |_, _, u| {
        assert!(u.iter().all(|&v| v >= -1e-12));
    })
    .unwrap();
    assert!(traj.u.windows(2).all(|w| w[1][0] >= w[0][0]));
    assert!((traj.t_final() - (1.0 - 1e-3)).abs() < 1e-12);
    assert_eq!(*traj.level_index.last().unwrap(), 400);
}

#[test]
fn refinement_changes_final_energy_little() {
    use blowup_core::energy::*;
    let params = ProblemParams::default();
    let exps = compute_exponents(&params).unwrap();
    let regime = BoundaryRegime::new(BoundaryRegime::default_kappa(&params, &exps), 1e-4, 0.1, 1.0).unwrap();
    let s = 0.05;
    let total = |spec: MeshSpec| {
        let traj = solve_regime(&params, &regime, &spec, &SolveOptions { store_stride: spec.levels, ..Default::default() }, |_, _, _| {})
            .unwrap();
        energy_e(&traj, traj.t_final(), s).unwrap()
    };
    let coarse = MeshSpec { nx: 400, levels: 1000, ..Default::default() };
    let a = total(coarse);
    let b = total(coarse.refined());
    assert!(((b - a) / b).abs() < 0.05, "{a} vs {b}");
}
