use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use massbound::conformal::compute_map;
use massbound::geometry::build_domain;
use massbound::harness::report::CSV_HEADER;
use massbound::harness::{builtin, load_solution, run_experiment, write_csv, ExperimentConfig, ExperimentReport, Format, BUILTIN};
use massbound::pohozaev::pohozaev_report;
use massbound::{Error, Result};

#[derive(Parser)]
#[command(name = "massbound", version, about = "Mass bounds for planar Liouville-type problems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Grid size as NRxNT, e.g. 256x64.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Newton tolerance.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Output directory; each run writes its artifacts to a subdirectory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `json` prints a summary per run, `csv` prints the report rows.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a conformal map and print its summary.
    Map { config: PathBuf },
    /// Single solve; any sweep in the config is ignored.
    Solve { config: PathBuf },
    /// Continuation along the sweep of the config.
    Sweep { config: PathBuf },
    /// Certificate only.
    Certify { config: PathBuf },
    /// Pohozaev identity on a stored solution CSV.
    Pohozaev { config: PathBuf, solution: PathBuf },
    /// Run a builtin experiment (E1..E7) or a config file.
    Experiment { name: String },
    /// Summarize report CSVs in a directory.
    Report { dir: PathBuf },
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NRxNT, got {s}"))?;
    let n_r = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let n_t = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((n_r, n_t))
}

impl Common {
    fn apply(&self, mut c: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some((n_r, n_theta)) = self.grid {
            c.grid.n_r = n_r;
            c.grid.n_theta = n_theta;
        }
        if let Some(tol) = self.tol {
            c.tolerances.newton = tol;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(out) = &self.out {
            c.output = Some(out.join(&c.name));
        }
        c.validate()?;
        Ok(c)
    }
}

fn summarize(r: &ExperimentReport) {
    let cert = r.certificate.as_ref().map_or(f64::NAN, |c| c.rho0);
    println!(
        "{}: {} records, max mass {:.6}, rho0 {:.6}, {}",
        r.name,
        r.records.len(),
        r.max_mass(),
        cert,
        if r.all_pass() { "pass" } else { "FAIL" }
    );
    if let Some(f) = &r.failure {
        println!("  failure: {f}");
    }
    for rec in r.records.iter().filter(|x| !x.pass) {
        println!("  failed: {} mass {:.6} rho0 {:.6}", rec.label, rec.mass, rec.rho0);
    }
}

fn run_all(configs: Vec<ExperimentConfig>, common: &Common) -> Result<bool> {
    let mut ok = true;
    for c in configs {
        let report = run_experiment(&common.apply(c)?)?;
        match common.format {
            Format::Json => summarize(&report),
            Format::Csv => write_csv(&report, std::io::stdout().lock())?,
        }
        ok &= report.all_pass();
    }
    Ok(ok)
}

fn report_dir(dir: &Path) -> Result<bool> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut ok = true;
    let mut seen = 0;
    for path in paths {
        let mut reader = csv::Reader::from_path(&path)?;
        if reader.headers()?.iter().ne(CSV_HEADER) {
            continue;
        }
        seen += 1;
        let (mut n, mut passed) = (0, 0);
        for row in reader.records() {
            let row = row?;
            n += 1;
            passed += usize::from(&row[7] == "true");
        }
        println!("{}: {passed}/{n} pass", path.display());
        ok &= n > 0 && passed == n;
    }
    if seen == 0 {
        return Err(Error::Config(format!("no report CSVs in {}", dir.display())));
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    match cli.command {
        Command::Map { config } => {
            let c = common.apply(ExperimentConfig::from_file(&config)?)?;
            let map = compute_map(&build_domain(c.domain.clone())?, c.map_nodes)?;
            map.write_summary(std::io::stdout())?;
            if let Some(dir) = &c.output {
                std::fs::create_dir_all(dir)?;
                map.export_csv(&dir.join("map.csv"))?;
            }
            Ok(true)
        }
        Command::Solve { config } => {
            let mut c = ExperimentConfig::from_file(&config)?;
            c.sweep = None;
            run_all(vec![c], common)
        }
        Command::Sweep { config } => {
            let c = ExperimentConfig::from_file(&config)?;
            if c.sweep.is_none() {
                return Err(Error::Config("config has no sweep".into()));
            }
            run_all(vec![c], common)
        }
        Command::Certify { config } => {
            let mut c = ExperimentConfig::from_file(&config)?;
            c.certify_only = true;
            run_all(vec![c], common)
        }
        Command::Pohozaev { config, solution } => {
            let c = common.apply(ExperimentConfig::from_file(&config)?)?;
            let sol = load_solution(&c, &solution)?;
            let rep = pohozaev_report(&sol)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(rep.relative_residual().abs() < 1e-3)
        }
        Command::Experiment { name } => {
            let configs = if BUILTIN.iter().any(|b| b.eq_ignore_ascii_case(&name)) {
                builtin(&name)?
            } else if Path::new(&name).is_file() {
                vec![ExperimentConfig::from_file(Path::new(&name))?]
            } else {
                return Err(Error::Config(format!("{name} is neither a builtin ({}) nor a config file", BUILTIN.join(", "))));
            };
            run_all(configs, common)
        }
        Command::Report { dir } => report_dir(&dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
