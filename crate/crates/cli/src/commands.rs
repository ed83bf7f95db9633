use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use blowup_core::energy::{
    gamma_sequence, read_profile_csv, s_grid, write_profile_csv, write_sequence_csv, EnergyAccumulator, EnergyProfile,
};
use blowup_core::exponents::{compute_exponents, validate_params, xi_limits};
use blowup_core::lemmas::{
    geometric_grid, lemma926_suite, stampacchia_bound, stampacchia_check, Lemma926Input,
    Lemma926Report, StampacchiaBound, StampacchiaInput, StampacchiaReport,
};
use blowup_core::solver::{read_checkpoint, solve_regime, write_checkpoint, CheckpointFormat, Mesh, SolutionTrajectory};
use blowup_core::verify::{
    calibrate, corollary_fit_input, localization_series, theorem1_fit_input, verify_run, RunArtifacts,
    VerificationReport,
};
use blowup_core::Error;
use serde::Serialize;

use crate::config::{Expect, RunConfig};
use crate::manifest::write_manifest;
use crate::CliError;

pub const EXPONENTS: &str = "exponents.csv";
pub const PROFILE: &str = "energy_profile.csv";
pub const SEQUENCE: &str = "gamma_sequence.csv";
pub const FINAL: &str = "final_profile.csv";
pub const SUMMARY: &str = "run_summary.json";
pub const CONFIG_ECHO: &str = "config.toml";
pub const REPORT: &str = "verification.json";
pub const THEOREM_FIT: &str = "theorem1_fit.csv";
pub const COROLLARY_FIT: &str = "corollary1_fit.csv";
pub const LOCALIZATION: &str = "localization.csv";
pub const LEMMAS: &str = "lemmas.json";

fn checkpoint_name(format: CheckpointFormat) -> Option<&'static str> {
    match format {
        CheckpointFormat::Binary => Some("trajectory.bin"),
        CheckpointFormat::Csv => Some("trajectory.csv"),
        CheckpointFormat::None => None,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>, CliError> {
    let path = dir.join(name);
    File::open(&path).map(BufReader::new).map_err(|_| CliError::MissingArtifact(path.display().to_string()))
}

/// Conditions that only concern the iteration and fail together once `beta >= beta0`.
const ITERATION_CONDITIONS: [&str; 5] =
    ["beta_range", "alpha1_range", "lambda_contraction", "theta1_contraction", "theta2_contraction"];

/// Key/value table of exponents and xi limits. A `beta >= beta0` input is
/// reported with `beta_in_range = false` and a warning instead of an error;
/// `alpha < 1/p` then empties the `alpha1` window as well.
pub fn cmd_exponents(cfg: &RunConfig, dir: &Path) -> Result<PathBuf, CliError> {
    let params = &cfg.exponents;
    let report = validate_params(params);
    let above = compute_exponents(params).map(|e| !e.beta_in_range).unwrap_or(false);
    let (soft, hard): (Vec<_>, Vec<_>) =
        report.failures().partition(|c| above && ITERATION_CONDITIONS.contains(&c.name.as_str()));
    let describe = |c: &&blowup_core::exponents::Condition| format!("{} ({}: {})", c.condition, c.name, c.detail);
    if !hard.is_empty() {
        return Err(CliError::Validation(hard.iter().map(describe).collect::<Vec<_>>().join("; ")));
    }
    for c in &soft {
        eprintln!("warning [{}]: {}", cfg.scenario, describe(c));
    }
    let exps = compute_exponents(params)?;
    let limits = xi_limits(params, &exps);
    let mut out = create(dir, EXPONENTS)?;
    writeln!(out, "key,value")?;
    for (k, v) in exps.table() {
        writeln!(out, "{k},{v}")?;
    }
    writeln!(out, "corollary_applicable,{}", exps.corollary_applicable)?;
    writeln!(out, "beta_in_range,{}", exps.beta_in_range)?;
    writeln!(out, "xi_limit_lambda,{}", limits.lambda)?;
    writeln!(out, "xi_limit_theta1,{}", limits.theta1)?;
    writeln!(out, "xi_limit_theta2,{}", limits.theta2)?;
    out.flush()?;
    if !exps.beta_in_range {
        eprintln!("warning [{}]: beta = {} is not below beta0 = {}", cfg.scenario, params.beta, exps.beta0);
    }
    write_manifest(dir)?;
    Ok(dir.join(EXPONENTS))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub completed: bool,
    pub levels: usize,
    pub stored_levels: usize,
    pub t_final: f64,
    pub substeps: usize,
    pub newton_iters: usize,
    pub picard_sweeps: usize,
    pub max_residual: f64,
    pub hx: f64,
    pub eps: f64,
    pub kappa: f64,
    pub effective_beta: f64,
    pub omega0_budget: f64,
    pub measured_amplitude: f64,
    pub omega0: f64,
    pub layers: usize,
    pub error: Option<String>,
}

/// Solved run with its energy profile.
pub struct Simulation {
    pub traj: SolutionTrajectory,
    pub profile: EnergyProfile,
}

/// Solve and tabulate energies. On an aborted run the levels reached so far
/// are returned together with the error.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, (CliError, Option<Simulation>)> {
    let params = &cfg.exponents;
    let regime = cfg.boundary_regime().map_err(|e| (e, None))?;
    let spec = cfg.solver.mesh();
    let opts = cfg.solver.options();
    let mesh = Mesh::graded(&spec, params.t_blow).map_err(|e| (e.into(), None))?;
    let sg = s_grid(&cfg.energy, mesh.hx).map_err(|e| (e.into(), None))?;
    let mut acc = EnergyAccumulator::new(sg, params.p, params.q, mesh.hx).map_err(|e| (e.into(), None))?;
    let stride = opts.store_stride.max(1);
    let (mut idx, mut times, mut levels) = (Vec::new(), Vec::new(), Vec::new());
    let result = solve_regime(params, &regime, &spec, &opts, |k, t, u| {
        acc.observe(t, u);
        if k % stride == 0 {
            idx.push(k);
            times.push(t);
            levels.push(u.to_vec());
        }
    });
    let profile = acc.finish();
    match result {
        Ok(traj) => Ok(Simulation { traj, profile }),
        Err(e @ Error::AbortedRun { .. }) if !times.is_empty() => {
            let traj = SolutionTrajectory {
                eps: opts.eps.unwrap_or(mesh.hx),
                mesh,
                p: params.p,
                q: params.q,
                level_index: idx,
                times,
                u: levels,
                stats: Vec::new(),
            };
            Err((e.into(), Some(Simulation { traj, profile })))
        }
        Err(e) => Err((e.into(), None)),
    }
}

fn write_final_profile(traj: &SolutionTrajectory, dir: &Path) -> Result<(), CliError> {
    let mut out = create(dir, FINAL)?;
    writeln!(out, "x,u")?;
    for (i, u) in traj.last().iter().enumerate() {
        writeln!(out, "{},{u}", traj.mesh.x(i))?;
    }
    out.flush()?;
    Ok(())
}

fn write_run_artifacts(cfg: &RunConfig, sim: &Simulation, dir: &Path, error: Option<String>) -> Result<RunSummary, CliError> {
    let params = &cfg.exponents;
    let regime = cfg.boundary_regime()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_ECHO), cfg.to_toml())?;
    if let Some(name) = checkpoint_name(cfg.solver.checkpoint) {
        let mut out = create(dir, name)?;
        write_checkpoint(&sim.traj, cfg.solver.checkpoint, &mut out)?;
        out.flush()?;
    }
    write_profile_csv(&sim.profile, create(dir, PROFILE)?)?;
    write_final_profile(&sim.traj, dir)?;

    let cal = calibrate(&sim.profile, &regime, params)?;
    let anchor = cfg.energy.anchor.unwrap_or(sim.profile.s[0]);
    let layers = if error.is_none() {
        let seq = gamma_sequence(&sim.profile, anchor, &cal.params)?;
        write_sequence_csv(&seq, create(dir, SEQUENCE)?)?;
        seq.layers()
    } else {
        0
    };
    let stats = &sim.traj.stats;
    let summary = RunSummary {
        scenario: cfg.scenario.clone(),
        completed: error.is_none(),
        levels: stats.len(),
        stored_levels: sim.traj.times.len(),
        t_final: sim.traj.t_final(),
        substeps: stats.iter().map(|s| s.substeps).sum(),
        newton_iters: stats.iter().map(|s| s.newton_iters).sum(),
        picard_sweeps: stats.iter().map(|s| s.picard_sweeps).sum(),
        max_residual: stats.iter().map(|s| s.residual).fold(0.0, f64::max),
        hx: sim.traj.mesh.hx,
        eps: sim.traj.eps,
        kappa: regime.kappa,
        effective_beta: cal.effective_beta,
        omega0_budget: cal.omega0_budget,
        measured_amplitude: cal.measured_amplitude,
        omega0: cal.params.omega0,
        layers,
        error,
    };
    write_json(dir, SUMMARY, &summary)?;
    write_manifest(dir)?;
    Ok(summary)
}

/// Solve, tabulate energies, build the layer sequence and write every artifact.
pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, CliError> {
    let report = validate_params(&cfg.exponents);
    if !report.passed() {
        let names: Vec<String> = report.failures().map(|c| format!("{} ({})", c.condition, c.detail)).collect();
        return Err(CliError::Validation(names.join("; ")));
    }
    match simulate(cfg) {
        Ok(sim) => write_run_artifacts(cfg, &sim, dir, None),
        Err((e, Some(partial))) => {
            write_run_artifacts(cfg, &partial, dir, Some(e.to_string()))?;
            Err(e)
        }
        Err((e, None)) => Err(e),
    }
}

fn load_artifacts(cfg: &RunConfig, dir: &Path) -> Result<Simulation, CliError> {
    let format = cfg.solver.checkpoint;
    let name = checkpoint_name(format)
        .ok_or_else(|| CliError::Config("verify needs a checkpoint; set solver.checkpoint to binary or csv".into()))?;
    let traj = read_checkpoint(format, open(dir, name)?)?.into_trajectory()?;
    let profile = read_profile_csv(open(dir, PROFILE)?)?;
    Ok(Simulation { traj, profile })
}

fn write_pairs(dir: &Path, name: &str, header: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut out = create(dir, name)?;
    writeln!(out, "{header}")?;
    for (a, b) in rows {
        writeln!(out, "{a},{b}")?;
    }
    out.flush()?;
    Ok(())
}

/// Verify a finished run from its artifacts in `dir`.
pub fn cmd_verify(cfg: &RunConfig, dir: &Path) -> Result<VerificationReport, CliError> {
    let sim = load_artifacts(cfg, dir)?;
    let report = verify_sim(cfg, &sim)?;
    write_json(dir, REPORT, &report)?;
    let t_final = sim.traj.t_final();
    write_pairs(dir, THEOREM_FIT, "s,energy", &theorem1_fit_input(&sim.profile, t_final))?;
    let mut collar = corollary_fit_input(&sim.traj);
    collar.sort_by(|a, b| a.0.total_cmp(&b.0));
    write_pairs(dir, COROLLARY_FIT, "d,abs_u", &collar)?;
    let mut out = create(dir, LOCALIZATION)?;
    writeln!(out, "t,interior_max,boundary")?;
    for s in localization_series(&sim.traj, cfg.verify.s_probe)? {
        writeln!(out, "{},{},{}", s.t, s.interior, s.boundary)?;
    }
    out.flush()?;
    write_manifest(dir)?;
    Ok(report)
}

/// Report for an in-memory simulation; writes nothing.
pub fn verify_sim(cfg: &RunConfig, sim: &Simulation) -> Result<VerificationReport, CliError> {
    let regime = cfg.boundary_regime()?;
    let mesh = cfg.solver.mesh();
    let run = RunArtifacts {
        scenario: &cfg.scenario,
        params: &cfg.exponents,
        regime: &regime,
        mesh: &mesh,
        s_grid: &cfg.energy,
        traj: &sim.traj,
        profile: &sim.profile,
    };
    Ok(verify_run(&run, &cfg.verify)?)
}

/// Failing check names of a report, as an error when there are any.
pub fn judge(report: &VerificationReport) -> Result<(), CliError> {
    let failing: Vec<String> = report.failing().into_iter().map(String::from).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failing))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureOutcome {
    pub name: String,
    pub expect: Expect,
    pub report: StampacchiaReport,
    pub as_expected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub name: String,
    pub seeds: Vec<u64>,
    pub j0: Vec<usize>,
    pub report: Lemma926Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub scenario: String,
    pub seed: u64,
    /// Constant for `(a, rho, lambda) = (1, 1, 1/2)`.
    pub reference_bound: StampacchiaBound,
    pub fixtures: Vec<FixtureOutcome>,
    pub sweeps: Vec<SweepOutcome>,
    pub passed: bool,
}

pub fn lemma_report(cfg: &RunConfig) -> Result<LemmaReport, CliError> {
    let mut fixtures = Vec::new();
    for fx in &cfg.lemmas.stampacchia {
        let (scale, power) = (fx.scale, fx.power);
        let input =
            StampacchiaInput::tabulate(fx.a, fx.rho, fx.lambda, fx.s0, fx.s_min, fx.per_decade, |s| scale * s.powf(-power));
        let report = stampacchia_check(&input)?;
        let as_expected = match fx.expect {
            Expect::Pass => report.table_valid && report.dense_enough && report.premise_holds && report.bound_holds,
            Expect::PremiseFail => !report.premise_holds,
        };
        fixtures.push(FixtureOutcome { name: fx.name.clone(), expect: fx.expect, report, as_expected });
    }
    let mut sweeps = Vec::new();
    for sw in &cfg.lemmas.sweeps {
        let template = Lemma926Input {
            c1: sw.c1,
            c2: sw.c2,
            c3: sw.c3,
            delta: sw.delta,
            gamma1: sw.gamma1,
            gamma2: sw.gamma2,
            lambda: sw.lambda,
            eps: Vec::new(),
        };
        let seeds: Vec<u64> = sw.seeds.iter().map(|s| cfg.seed + s).collect();
        let grid = geometric_grid(sw.s_min, sw.s0, sw.per_decade);
        let (report, _) = lemma926_suite(&template, &seeds, &sw.j0, &grid, sw.tol_slope, sw.tol_drift)?;
        sweeps.push(SweepOutcome { name: sw.name.clone(), seeds, j0: sw.j0.clone(), report });
    }
    let passed = fixtures.iter().all(|f| f.as_expected) && sweeps.iter().all(|s| s.report.passed);
    Ok(LemmaReport {
        scenario: cfg.scenario.clone(),
        seed: cfg.seed,
        reference_bound: stampacchia_bound(1.0, 1.0, 0.5)?,
        fixtures,
        sweeps,
        passed,
    })
}

pub fn cmd_lemmas(cfg: &RunConfig, dir: &Path) -> Result<LemmaReport, CliError> {
    let report = lemma_report(cfg)?;
    write_json(dir, LEMMAS, &report)?;
    write_manifest(dir)?;
    Ok(report)
}

/// Exponents, run, verify and lemmas in sequence; stops at the first error.
pub fn cmd_all(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    cmd_exponents(cfg, dir)?;
    cmd_run(cfg, dir)?;
    let report = cmd_verify(cfg, dir)?;
    let lemmas = cmd_lemmas(cfg, dir)?;
    judge(&report)?;
    if !lemmas.passed {
        return Err(CliError::ChecksFailed(vec!["lemmas".into()]));
    }
    Ok(())
}
