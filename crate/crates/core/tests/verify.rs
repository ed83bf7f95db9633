use blowup_core::energy::*;
use blowup_core::exponents::*;
use blowup_core::regime::*;
use blowup_core::solver::*;
use blowup_core::verify::*;
use blowup_core::Error;

struct Run {
    params: ProblemParams,
    regime: BoundaryRegime,
    spec: MeshSpec,
    sgrid: SGridSpec,
    traj: SolutionTrajectory,
    profile: EnergyProfile,
}

impl Run {
    fn new(params: ProblemParams, kappa: Option<f64>, f0: f64, nx: usize, levels: usize) -> Self {
        let exps = compute_exponents(&params).unwrap();
        let kappa = kappa.unwrap_or(BoundaryRegime::default_kappa(&params, &exps));
        let regime = BoundaryRegime::new(kappa, f0, 0.1, params.t_blow).unwrap();
        let spec = MeshSpec { nx, levels, ..Default::default() };
        let sgrid = SGridSpec::default();
        let hx = 1.0 / (nx as f64 + 1.0);
        let mut acc = EnergyAccumulator::new(s_grid(&sgrid, hx).unwrap(), params.p, params.q, hx).unwrap();
        let opts = SolveOptions { store_stride: levels / 100, ..Default::default() };
        let traj = solve_regime(&params, &regime, &spec, &opts, |_, t, u| acc.observe(t, u)).unwrap();
        Self { params, regime, spec, sgrid, traj, profile: acc.finish() }
    }

    fn verify(&self, tol: &Tolerances) -> VerificationReport {
        verify_run(
            &RunArtifacts {
                scenario: "test",
                params: &self.params,
                regime: &self.regime,
                mesh: &self.spec,
                s_grid: &self.sgrid,
                traj: &self.traj,
                profile: &self.profile,
            },
            tol,
        )
        .unwrap()
    }
}

#[test]
fn zero_regime_is_flagged_insufficient() {
    let run = Run::new(ProblemParams::default(), None, 0.0, 100, 50);
    let exps = compute_exponents(&run.params).unwrap();
    let r = theorem1_check(&run.profile, &exps, run.traj.t_final(), 0.05);
    assert!(matches!(r, Err(Error::InsufficientDecay)));
    let entry = theorem1_entry(&run.profile, &exps, run.traj.t_final(), 0.05).unwrap();
    assert_eq!(entry.status, Status::Skipped);
}

#[test]
fn zero_profile_is_a_vacuous_corollary_pass() {
    let run = Run::new(ProblemParams::default(), None, 0.0, 100, 50);
    let exps = compute_exponents(&run.params).unwrap();
    let c = corollary_profile_check(&run.traj, &exps, 0.05);
    assert_eq!(c.status, Status::Pass);
    assert!(!c.probative);
}

#[test]
fn corollary_skipped_outside_its_range() {
    let params = ProblemParams { p: 2.0, q: 1.0, ..ProblemParams::default() };
    let run = Run::new(params, None, 1e-2, 100, 50);
    let c = corollary_profile_check(&run.traj, &compute_exponents(&params).unwrap(), 0.05);
    assert_eq!(c.status, Status::Skipped);
    assert!(c.detail.contains("q < 1"));
}

#[test]
fn bounded_heat_run_localizes_trivially() {
    let mesh = Mesh::uniform(99, 0.999, 200).unwrap();
    let scheme = Scheme::new(1.0, 1.0, 0.0, mesh.hx);
    struct One;
    impl Forcing for One {
        fn boundary(&self, _t: f64) -> (f64, f64) {
            (1.0, 1.0)
        }
    }
    let u0 = vec![0.0; mesh.nodes()];
    let (mut times, mut u) = (Vec::new(), Vec::new());
    scheme
        .solve(&One, &mesh, &u0, |_, t, v| {
            times.push(t);
            u.push(v.to_vec());
        })
        .unwrap();
    let traj = SolutionTrajectory {
        level_index: (0..times.len()).collect(),
        mesh,
        p: 1.0,
        q: 1.0,
        eps: 0.0,
        times,
        u,
        stats: Vec::new(),
    };
    let c = localization_check(&traj, 1.0, &Tolerances::default()).unwrap();
    assert_eq!(c.status, Status::Pass);
    assert!(!c.probative, "boundary data never grew");
}

#[test]
fn localization_rejects_bad_probe() {
    let run = Run::new(ProblemParams::default(), None, 1e-4, 50, 20);
    let tol = Tolerances { s_probe: 0.5, ..Tolerances::default() };
    assert!(localization_check(&run.traj, 1.0, &tol).is_err());
}

#[test]
fn ls_run_passes_every_check() {
    let run = Run::new(ProblemParams::default(), None, 1e-4, 400, 1000);
    let rep = run.verify(&Tolerances::default());
    assert!(rep.passed, "{:?}", rep.failing());
    assert!(rep.provenance.in_range);
    for c in &rep.checks {
        assert!(c.probative, "{c:?}");
        if let (Some(m), Some(l)) = (c.measured, c.limit) {
            assert!(m <= l);
        }
    }
    assert!(rep.monotonicity.precondition.holds);
    assert!(rep.sequence.layers() >= 1);
}

#[test]
fn out_of_range_control_fails_localization() {
    let params = ProblemParams::default();
    let exps = compute_exponents(&params).unwrap();
    // kappa realising beta = -1
    let kappa = ((params.q + 1.0) / (params.p - params.q) + 1.0) / (params.q + 1.0);
    let run = Run::new(params, Some(kappa), 1e-4, 400, 1000);
    assert!((run.regime.effective_beta(&params) + 1.0).abs() < 1e-12);
    assert!(budget_summary(&run.regime, &params, exps.alpha).omega0_eff.is_infinite());
    let rep = run.verify(&Tolerances::default());
    assert!(!rep.passed);
    assert!(!rep.provenance.in_range);
    assert_eq!(rep.failing(), vec!["localization_interior_growth"]);
    assert!(rep.check("localization_interior_growth").unwrap().detail.contains("out of theorem range"));
}

#[test]
fn scaling_check_against_exactly_scaled_profiles() {
    let run = Run::new(ProblemParams::default(), None, 1e-4, 400, 1000);
    let power = ExponentSet::energy_amplitude_power(&run.params);
    let s = (run.profile.s[0] * run.profile.s[run.profile.s.len() - 1]).sqrt();
    let t = run.traj.t_final();
    let check = |k: f64| {
        omega0_scaling_check(&run.profile, &run.profile.scaled(k), 2.0, s, t, &run.params, 0.25).unwrap()
    };
    let at = check(2f64.powf(power));
    assert_eq!(at.status, Status::Pass);
    assert!((at.measured.unwrap() / at.theory.unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(check(2f64.powf(power) * 1.249).status, Status::Pass);
    assert_eq!(check(2f64.powf(power) * 1.251).status, Status::Fail);
    let zero = run.profile.scaled(0.0);
    assert!(!omega0_scaling_check(&zero, &run.profile, 2.0, s, t, &run.params, 0.25).unwrap().probative);
}

#[test]
fn report_round_trips_through_json() {
    let run = Run::new(ProblemParams::default(), None, 1e-4, 100, 200);
    let rep = run.verify(&Tolerances::default());
    for c in &rep.checks {
        if c.limit.is_some() {
            assert!(c.tolerance.is_some(), "{c:?}");
        }
    }
    assert_eq!(rep.tolerances, Tolerances::default());
}
