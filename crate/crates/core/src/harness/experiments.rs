//! End-to-end pipelines: map, transport, solve, identity, certificate.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{AnalyticField, ExperimentConfig, GridConfig, ProblemConfig, SweepConfig, SweepParameter, Tolerances};
use super::report::{emit_report, Format};
use crate::certificates::{
    general_certificate, henon_certificate, liouville_certificate, system_certificate, validate_general_conditions,
    ConditionConstants, MassCertificate,
};
use crate::conformal::{compute_map, transform_potential, transform_weight, ConformalMap, Direction, PotentialField};
use crate::disk::{
    build_grid, continuation_at, solve_newton, solve_system, BranchFamily, DiskSolution, Fold, NewtonOptions,
    Nonlinearity, PolarGrid, ProblemSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{build_domain, DomainKind};
use crate::pohozaev::{pohozaev_report, system_pohozaev_report, SystemPohozaevReport};

/// One solved (or certified) configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub label: String,
    /// Centre value `v(0)` (mean over the innermost ring).
    pub s: f64,
    /// `λ` for exponential problems, `p` for Hénon.
    pub lambda: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub newton_residual: f64,
    /// Pohozaev identity residual relative to its left-hand side.
    pub identity_residual: f64,
    pub holder_gap: f64,
    pub rho0: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapSummary {
    pub nodes: usize,
    pub residual: f64,
    pub accuracy: f64,
    pub derivative_at_origin: f64,
    pub distortion: f64,
    /// `max |Φ(Φ⁻¹(y)) − y|` over seeded sample points.
    pub round_trip_error: f64,
    pub validation_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub map: Option<MapSummary>,
    pub records: Vec<RunRecord>,
    pub certificate: Option<MassCertificate>,
    pub fold: Option<Fold>,
    pub system: Option<SystemPohozaevReport>,
    pub conditions: Option<ConditionConstants>,
    /// Hénon: the sup-norm bound fed to the certificate.
    pub measured_c0: Option<f64>,
    pub partial: bool,
    pub failure: Option<String>,
    pub environment: Environment,
    #[serde(skip)]
    pub timings: Vec<Timing>,
    #[serde(skip)]
    pub solutions: Vec<DiskSolution>,
    #[serde(skip)]
    pub potential: Option<Arc<PotentialField>>,
}

impl ExperimentReport {
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            name: config.name.clone(),
            config,
            map: None,
            records: Vec::new(),
            certificate: None,
            fold: None,
            system: None,
            conditions: None,
            measured_c0: None,
            partial: false,
            failure: None,
            environment: Environment::current(),
            timings: Vec::new(),
            solutions: Vec::new(),
            potential: None,
        }
    }

    /// Every record passes and nothing failed along the way.
    pub fn all_pass(&self) -> bool {
        !self.partial && !self.records.is_empty() && self.records.iter().all(|r| r.pass)
    }

    pub fn max_mass(&self) -> f64 {
        self.records.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.mass))
    }

    fn time(&mut self, stage: &str, start: Instant) {
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

fn round_trip_error(map: &ConformalMap, seed: u64, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let rho: f64 = rng.gen_range(0.0..0.95);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let y = Complex64::from_polar(rho, phi);
        let x = map.map_point([y.re, y.im], Direction::Inverse)?;
        let back = map.map_point(x, Direction::Forward)?;
        worst = worst.max(Complex64::new(back[0] - y.re, back[1] - y.im).norm());
    }
    Ok(worst)
}

fn holder_gap_of(sol: &DiskSolution) -> f64 {
    let dth = sol.grid.dtheta();
    let lhs = 0.5 * sol.boundary_derivative.iter().map(|d| d * d).sum::<f64>() * dth;
    let flux = sol.boundary_derivative.iter().sum::<f64>() * dth;
    lhs - flux * flux / (4.0 * PI)
}

fn scalar_record(label: String, sol: &DiskSolution, lambda: f64, cert_rho0: f64, tol: &Tolerances) -> Result<RunRecord> {
    let rep = pohozaev_report(sol)?;
    Ok(RunRecord {
        label,
        s: sol.center_value(),
        lambda,
        mass: rep.mass,
        sup_norm: sol.sup_norm,
        newton_residual: sol.residual,
        identity_residual: rep.relative_residual(),
        holder_gap: rep.holder_gap,
        rho0: cert_rho0,
        pass: sol.converged && rep.mass <= cert_rho0 * (1.0 + tol.mass_allowance),
    })
}

fn transport(map: &ConformalMap, alpha: f64, k: &AnalyticField, grid: &PolarGrid) -> Result<Arc<PotentialField>> {
    Ok(Arc::new(transform_potential(map, alpha, |x| k.eval(x), grid)?))
}

/// Runs one configuration. Failures before the first solve are returned as
/// errors; later failures produce a partial report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut report = ExperimentReport::empty(config.clone());

    let t = Instant::now();
    let domain = build_domain(config.domain.clone()).map_err(|e| e.in_stage("domain"))?;
    let map = compute_map(&domain, config.map_nodes).map_err(|e| e.in_stage("conformal map"))?;
    report.map = Some(MapSummary {
        nodes: config.map_nodes,
        residual: map.residual,
        accuracy: map.accuracy,
        derivative_at_origin: map.derivative_at_origin(),
        distortion: map.distortion(),
        round_trip_error: round_trip_error(&map, config.seed, config.validation_points)
            .map_err(|e| e.in_stage("map validation"))?,
        validation_points: config.validation_points,
    });
    report.time("map", t);

    let GridConfig { n_r, n_theta, grading } = config.grid;
    let grid = Arc::new(build_grid(n_r, n_theta, config.problem.grid_alpha(), grading).map_err(|e| e.in_stage("grid"))?);
    let opts = NewtonOptions::with_tol(config.tolerances.newton);

    let t = Instant::now();
    let outcome = match &config.problem {
        ProblemConfig::Liouville { lambda, alpha, k } => {
            let kt = transport(&map, *alpha, k, &grid).map_err(|e| e.in_stage("transport"))?;
            report.time("transport", t);
            report.potential = Some(kt.clone());
            run_liouville(&mut report, config, grid.clone(), *lambda, *alpha, kt, &opts)
        }
        ProblemConfig::Henon { p, alpha, k } => {
            let kt = transport(&map, *alpha, k, &grid).map_err(|e| e.in_stage("transport"))?;
            report.time("transport", t);
            report.potential = Some(kt.clone());
            run_henon(&mut report, config, grid.clone(), *p, *alpha, kt, &opts)
        }
        ProblemConfig::System { a, lambdas, alphas, ks } => {
            let kts = alphas
                .iter()
                .zip(ks)
                .map(|(al, k)| transport(&map, *al, k, &grid))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.in_stage("transport"))?;
            report.time("transport", t);
            report.potential = kts.first().cloned();
            run_system(&mut report, config, grid.clone(), a, lambdas, alphas, kts, &opts)
        }
        ProblemConfig::General { w, f } => {
            let wt = Arc::new(transform_weight(&map, |x| w.eval(x), &grid).map_err(|e| e.in_stage("transport"))?);
            report.time("transport", t);
            report.potential = Some(wt.clone());
            run_general(&mut report, config, grid.clone(), wt, *f, &opts)
        }
    };
    if let Err(e) = outcome {
        report.partial = true;
        report.failure = Some(e.to_string());
    }
    if let Some(cert) = report.certificate.take() {
        let masses: Vec<f64> = report.records.iter().map(|r| r.mass).filter(|m| m.is_finite()).collect();
        report.certificate = Some(cert.with_observed(&masses));
    }

    if let Some(dir) = &config.output {
        write_outputs(&report, &map, dir)?;
    }
    Ok(report)
}

/// Reloads a scalar solution written by [`DiskSolution::export_csv`] for the
/// problem in `config`, rebuilding map, grid and transported field.
pub fn load_solution(config: &ExperimentConfig, path: &Path) -> Result<DiskSolution> {
    config.validate()?;
    let domain = build_domain(config.domain.clone())?;
    let map = compute_map(&domain, config.map_nodes)?;
    let GridConfig { n_r, n_theta, grading } = config.grid;
    let grid = Arc::new(build_grid(n_r, n_theta, config.problem.grid_alpha(), grading)?);
    let problem = match &config.problem {
        ProblemConfig::Liouville { lambda, alpha, k } => ProblemSpec::Liouville {
            lambda: *lambda,
            alpha: *alpha,
            k: transport(&map, *alpha, k, &grid)?,
        },
        ProblemConfig::Henon { p, alpha, k } => ProblemSpec::Henon {
            p: *p,
            alpha: *alpha,
            k: transport(&map, *alpha, k, &grid)?,
        },
        ProblemConfig::General { w, f } => ProblemSpec::General {
            w: Arc::new(transform_weight(&map, |x| w.eval(x), &grid)?),
            f: *f,
        },
        ProblemConfig::System { .. } => return Err(Error::UnsupportedProblem("stored solutions are scalar".into())),
    };
    let mut reader = csv::Reader::from_path(path)?;
    let mut values = Vec::with_capacity(grid.n_cells());
    for (n, row) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        let (r, theta, v) = row?;
        let (i, j) = (n / n_theta, n % n_theta);
        if i >= n_r || (r - grid.radii[i]).abs() > 1e-12 || (theta - grid.theta(j)).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!("row {} at (r, theta) = ({r}, {theta}) is not a grid node", n + 1)));
        }
        values.push(v);
    }
    DiskSolution::from_values(grid, Arc::new(problem), values, config.tolerances.newton)
}

fn certify_only_record(cert: &MassCertificate) -> RunRecord {
    RunRecord {
        label: "certificate".into(),
        s: f64::NAN,
        lambda: f64::NAN,
        mass: f64::NAN,
        sup_norm: f64::NAN,
        newton_residual: f64::NAN,
        identity_residual: f64::NAN,
        holder_gap: f64::NAN,
        rho0: cert.rho0,
        pass: cert.rho0.is_finite() && cert.rho0 > 0.0,
    }
}

fn run_liouville(
    report: &mut ExperimentReport,
    config: &ExperimentConfig,
    grid: Arc<PolarGrid>,
    lambda: f64,
    alpha: f64,
    k: Arc<PotentialField>,
    opts: &NewtonOptions,
) -> Result<()> {
    let t = Instant::now();
    let cert = liouville_certificate(alpha, &k)?;
    let rho0 = cert.rho0;
    report.certificate = Some(cert.clone());
    report.time("certificate", t);
    if config.certify_only {
        report.records.push(certify_only_record(&cert));
        return Ok(());
    }
    let t = Instant::now();
    let tol = &config.tolerances;
    match config.sweep.as_ref().map(|s| (s.parameter, s)) {
        Some((SweepParameter::S, sweep)) => {
            let branch = continuation_at(BranchFamily::Liouville { alpha, k }, &sweep.values()?, grid, opts)?;
            for (e, sol) in branch.entries.iter().zip(&branch.solutions) {
                report.records.push(scalar_record(format!("s={:.6}", e.s), sol, e.lambda_or_p, rho0, tol)?);
            }
            report.fold = branch.fold;
            report.solutions = branch.solutions;
            report.time("solve", t);
            if branch.truncated {
                return Err(Error::NotConverged.in_stage(branch.failure.unwrap_or_else(|| "continuation".into())));
            }
        }
        Some((SweepParameter::Lambda, sweep)) => {
            let mut guess: Option<Vec<f64>> = None;
            for l in sweep.values()? {
                let problem = Arc::new(ProblemSpec::Liouville { lambda: l, alpha, k: k.clone() });
                let sol = solve_newton(problem, grid.clone(), guess.as_deref(), opts)
                    .map_err(|e| e.in_stage(format!("lambda = {l}")))?;
                report.records.push(scalar_record(format!("lambda={l:.6}"), &sol, l, rho0, tol)?);
                guess = Some(sol.values.clone());
                report.solutions.push(sol);
            }
            report.time("solve", t);
        }
        _ => {
            let problem = Arc::new(ProblemSpec::Liouville { lambda, alpha, k });
            let sol = solve_newton(problem, grid, None, opts)?;
            report.records.push(scalar_record(format!("lambda={lambda:.6}"), &sol, lambda, rho0, tol)?);
            report.solutions.push(sol);
            report.time("solve", t);
        }
    }
    Ok(())
}

fn run_henon(
    report: &mut ExperimentReport,
    config: &ExperimentConfig,
    grid: Arc<PolarGrid>,
    p: f64,
    alpha: f64,
    k: Arc<PotentialField>,
    opts: &NewtonOptions,
) -> Result<()> {
    if config.certify_only {
        return Err(Error::Config("the Hénon certificate needs computed solutions for C0".into()));
    }
    let t = Instant::now();
    let values = match &config.sweep {
        Some(SweepConfig { parameter: SweepParameter::P, .. }) => config.sweep.as_ref().unwrap().values()?,
        _ => vec![p],
    };
    let branch = continuation_at(BranchFamily::Henon { alpha, k: k.clone() }, &values, grid, opts)?;
    report.time("solve", t);
    if branch.entries.is_empty() {
        return Err(Error::NotConverged.in_stage(branch.failure.unwrap_or_else(|| "henon".into())));
    }
    let c0 = branch.entries.iter().fold(0.0f64, |m, e| m.max(e.sup_norm));
    let p0 = branch.entries[0].lambda_or_p;
    let cert = henon_certificate(alpha, &k, c0, p0)?;
    report.measured_c0 = Some(c0);
    for (e, sol) in branch.entries.iter().zip(&branch.solutions) {
        report
            .records
            .push(scalar_record(format!("p={:.4}", e.lambda_or_p), sol, e.lambda_or_p, cert.rho0, &config.tolerances)?);
    }
    report.certificate = Some(cert);
    report.solutions = branch.solutions;
    if branch.truncated {
        return Err(Error::NotConverged.in_stage(branch.failure.unwrap_or_else(|| "henon".into())));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_system(
    report: &mut ExperimentReport,
    config: &ExperimentConfig,
    grid: Arc<PolarGrid>,
    a: &[Vec<f64>],
    lambdas: &[f64],
    alphas: &[f64],
    ks: Vec<Arc<PotentialField>>,
    opts: &NewtonOptions,
) -> Result<()> {
    let t = Instant::now();
    let refs: Vec<&PotentialField> = ks.iter().map(|k| k.as_ref()).collect();
    let cert = system_certificate(a, alphas, &refs)?;
    report.certificate = Some(cert.clone());
    report.time("certificate", t);
    if config.certify_only {
        report.records.push(certify_only_record(&cert));
        return Ok(());
    }
    let t = Instant::now();
    let problem = Arc::new(ProblemSpec::System {
        a: a.to_vec(),
        lambdas: lambdas.to_vec(),
        alphas: alphas.to_vec(),
        ks,
    });
    let sols = solve_system(problem, grid, None, opts)?;
    let sys = system_pohozaev_report(&sols, a)?;
    for (i, sol) in sols.iter().enumerate() {
        let mass = sys.masses[i];
        report.records.push(RunRecord {
            label: format!("component {}", i + 1),
            s: sol.center_value(),
            lambda: lambdas[i],
            mass,
            sup_norm: sol.sup_norm,
            newton_residual: sol.residual,
            identity_residual: sys.relative_residual(),
            holder_gap: holder_gap_of(sol),
            rho0: cert.rho0,
            pass: sol.converged && mass <= cert.rho0 * (1.0 + config.tolerances.mass_allowance),
        });
    }
    report.system = Some(sys);
    report.solutions = sols;
    report.time("solve", t);
    Ok(())
}

fn run_general(
    report: &mut ExperimentReport,
    config: &ExperimentConfig,
    grid: Arc<PolarGrid>,
    w: Arc<PotentialField>,
    f: Nonlinearity,
    opts: &NewtonOptions,
) -> Result<()> {
    let t = Instant::now();
    let (sol, u_max) = if config.certify_only {
        (None, 10.0)
    } else {
        let problem = Arc::new(ProblemSpec::General { w: w.clone(), f });
        let sol = solve_newton(problem, grid.clone(), None, opts)?;
        let u_max = (2.0 * sol.sup_norm).max(10.0);
        (Some(sol), u_max)
    };
    report.time("solve", t);
    let cc = validate_general_conditions(&w, |u| f.f(u), |u| f.df(u), [0.0, u_max])?;
    let cert = general_certificate(&w, &grid, &cc)?;
    report.conditions = Some(cc);
    report.certificate = Some(cert.clone());
    let lambda = match f {
        Nonlinearity::Exponential { lambda } | Nonlinearity::ExpPower { lambda, .. } | Nonlinearity::Linear { lambda } => lambda,
    };
    match sol {
        None => report.records.push(certify_only_record(&cert)),
        Some(sol) => {
            let mut rec = scalar_record("general".into(), &sol, lambda, cert.rho0, &config.tolerances)?;
            rec.pass &= !cert.degenerate;
            report.records.push(rec);
            report.solutions.push(sol);
        }
    }
    Ok(())
}

fn write_outputs(report: &ExperimentReport, map: &ConformalMap, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    emit_report(report, Format::Json, dir)?;
    emit_report(report, Format::Csv, dir)?;
    map.export_csv(&dir.join("map.csv"))?;
    if let Some(k) = &report.potential {
        k.export_csv(&dir.join("potential.csv"))?;
    }
    if let Some(sol) = report.solutions.last() {
        sol.export_csv(&dir.join("solution.csv"))?;
    }
    if let Some(cert) = &report.certificate {
        cert.write_json(&dir.join("certificate.json"))?;
    }
    Ok(())
}

/// Names of the builtin experiments.
pub const BUILTIN: [&str; 7] = ["E1", "E2", "E3", "E4", "E5", "E6", "E7"];

fn constant(value: f64) -> AnalyticField {
    AnalyticField::Constant { value }
}

fn liouville_sweep(name: String, domain: DomainKind, alpha: f64, k: AnalyticField, grid: GridConfig, range: [f64; 2], steps: usize) -> ExperimentConfig {
    ExperimentConfig {
        name,
        domain,
        problem: ProblemConfig::Liouville { lambda: 1.0, alpha, k },
        grid,
        sweep: Some(SweepConfig {
            parameter: SweepParameter::S,
            range: Some(range),
            steps: Some(steps),
            values: None,
        }),
        tolerances: Tolerances::default(),
        map_nodes: 512,
        certify_only: false,
        output: None,
        seed: 0,
        validation_points: 32,
    }
}

/// Upper end of the centre-value sweeps, `s = 2 log(1 + b)` at `b = 100`.
pub fn s_max() -> f64 {
    2.0 * 101f64.ln()
}

/// Configurations of a builtin experiment.
pub fn builtin(name: &str) -> Result<Vec<ExperimentConfig>> {
    let disk = DomainKind::UnitDisk {};
    let grid = |n_r, n_theta, grading| GridConfig { n_r, n_theta, grading };
    let affine = AnalyticField::Affine { c0: 1.0, cx: 0.3, cy: 0.1 };
    let configs = match name.to_ascii_uppercase().as_str() {
        "E1" => vec![liouville_sweep("E1".into(), disk, 0.0, constant(1.0), grid(256, 64, 1.0), [0.1, s_max()], 80)],
        "E2" => [(-0.5, 2.0), (0.5, 1.0), (1.0, 1.0)]
            .iter()
            .map(|&(alpha, g)| {
                liouville_sweep(format!("E2_alpha{alpha}"), disk.clone(), alpha, constant(1.0), grid(256, 32, g), [0.1, s_max()], 60)
            })
            .collect(),
        "E3" => vec![
            liouville_sweep("E3_ellipse".into(), DomainKind::Ellipse { a: 1.5, b: 1.0 }, 0.0, affine.clone(), grid(128, 64, 1.0), [0.25, 4.0], 16),
            liouville_sweep(
                "E3_blob".into(),
                DomainKind::FourierBlob {
                    cos: vec![1.0, 0.0, 0.0, 0.2],
                    sin: vec![0.0, 0.1],
                },
                0.0,
                affine,
                grid(128, 64, 1.0),
                [0.25, 4.0],
                16,
            ),
        ],
        "E4" => [0.5, 0.25, 0.125]
            .iter()
            .map(|&eps| {
                let mut c = liouville_sweep(format!("E4_eps{eps}"), DomainKind::Dumbbell { neck_width: eps }, 0.0, constant(1.0), grid(128, 64, 1.0), [0.1, 1.0], 2);
                c.sweep = None;
                c.certify_only = true;
                c.map_nodes = 1024;
                c
            })
            .collect(),
        "E5" => {
            let mut c = liouville_sweep("E5".into(), disk, 0.0, constant(1.0), grid(256, 64, 3.0), [0.1, 1.0], 2);
            c.problem = ProblemConfig::Henon { p: 2.0, alpha: 0.0, k: constant(1.0) };
            c.sweep = Some(SweepConfig {
                parameter: SweepParameter::P,
                range: None,
                steps: None,
                values: Some(vec![2.0, 5.0, 10.0, 20.0]),
            });
            vec![c]
        }
        "E6" => {
            let mut c = liouville_sweep("E6".into(), disk, 0.0, constant(1.0), grid(256, 64, 1.0), [0.1, 1.0], 2);
            c.problem = ProblemConfig::System {
                a: vec![vec![2.0, -1.0], vec![-1.0, 2.0]],
                lambdas: vec![0.5, 1.0],
                alphas: vec![0.0, 0.0],
                ks: vec![constant(1.0), constant(1.0)],
            };
            c.sweep = None;
            vec![c]
        }
        "E7" => {
            let mut c = liouville_sweep("E7".into(), DomainKind::Ellipse { a: 1.5, b: 1.0 }, 0.0, constant(1.0), grid(128, 64, 1.0), [0.1, 1.0], 2);
            c.problem = ProblemConfig::General {
                w: constant(1.0),
                f: Nonlinearity::ExpPower { lambda: 1.0, p: 1.5 },
            };
            c.sweep = None;
            vec![c]
        }
        other => return Err(Error::Config(format!("unknown builtin experiment {other}"))),
    };
    Ok(configs)
}
