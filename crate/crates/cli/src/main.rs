mod settings;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use stofv::config::RunConfig;
use stofv::diagnostics::{diagnose, format_f64, write_ledger_csv};
use stofv::harness::{coupled_refinement_study, deterministic_convergence, mc_ensemble, ConvergenceTable};
use stofv::rng::WienerIncrements;

use settings::{config_hash, ConfigError};

/// Finite-volume solver and diagnostics for stochastically forced scalar
/// conservation laws on the torus.
#[derive(Parser)]
#[command(name = "stofv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write state snapshots.
    Run(Common),
    /// Run one trajectory with the full diagnostics report and energy ledger.
    Diagnose(Common),
    /// Deterministic convergence against the exact solution over `refinement.levels`.
    Converge(Common),
    /// Monte Carlo ensemble of `ensemble.paths` trajectories.
    Mc(Common),
    /// Coupled-path self-convergence over `refinement.levels`.
    Couple(Common),
    /// Check the numerical flux axioms on the flux range.
    ValidateFlux(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML or JSON); defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid.m=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "STOFV_THREADS")]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Core(stofv::Error),
    Checks(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<stofv::Error> for Failure {
    fn from(e: stofv::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Core(e) => e.kind(),
            Failure::Checks(_) => "validation",
            Failure::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "cfl" | "validation" => 3,
            "blowup" => 4,
            "io" => 1,
            _ => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) | Failure::Checks(m) | Failure::Io(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

/// Writes result files tagged with the configuration hash and master seed.
struct Output {
    dir: PathBuf,
    hash: String,
    seed: u64,
    config: RunConfig,
}

impl Output {
    fn new(cfg: &RunConfig, out: Option<&Path>) -> Result<Self, Failure> {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir, hash: config_hash(cfg), seed: cfg.noise.seed, config: cfg.clone() })
    }

    fn csv(&self, name: &str, body: &str) -> Result<(), Failure> {
        let text = format!("# config_hash={},master_seed={}\n{body}", self.hash, self.seed);
        self.write(name, &text)
    }

    fn json(&self, name: &str, payload: Value) -> Result<(), Failure> {
        let mut doc = json!({
            "config_hash": self.hash,
            "master_seed": self.seed,
            "config": self.config,
        });
        if let (Value::Object(d), Value::Object(p)) = (&mut doc, payload) {
            d.extend(p);
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("json serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        log::info!("writing {}", path.display());
        std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}

fn table_csv(t: &ConvergenceTable) -> String {
    let mut buf = Vec::new();
    t.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

fn cmd_run(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let scheme = cfg.scheme()?;
    let time = cfg.time_grid(&scheme)?;
    let v0 = cfg.initial_state(scheme.grid())?;
    let traj = scheme.run(&v0, &time, &WienerIncrements::new(cfg.noise.seed))?;
    let mut times = cfg.output.snapshot_times.clone();
    times.push(time.t_final());
    times.sort_by(f64::total_cmp);
    times.dedup();

    let grid = scheme.grid();
    let mut files = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let v = traj.value_at(t);
        let mut body = String::from(if grid.dim() == 1 { "i,value\n" } else { "i,j,value\n" });
        for (cell, x) in v.iter().enumerate() {
            let idx = grid.multi_index(cell).0;
            if grid.dim() == 1 {
                writeln!(body, "{},{}", idx[0], format_f64(*x)).unwrap();
            } else {
                writeln!(body, "{},{},{}", idx[0], idx[1], format_f64(*x)).unwrap();
            }
        }
        let name = format!("snapshot_{k:03}.csv");
        out.csv(&name, &body)?;
        files.push(json!({ "file": name, "t": t }));
    }
    out.json(
        "manifest.json",
        json!({
            "grid": { "dim": grid.dim(), "m": grid.m(), "h": grid.h(), "cell_volume": grid.cell_volume() },
            "steps": time.num_steps(),
            "max_dt": time.max_dt(),
            "snapshots": files,
            "units": { "x": "torus coordinate, period 1", "t": "time", "value": "cell average of u" },
        }),
    )
}

fn cmd_diagnose(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let scheme = cfg.scheme()?;
    let time = cfg.time_grid(&scheme)?;
    let v0 = cfg.initial_state(scheme.grid())?;
    let report = diagnose(&scheme, &v0, &time, &WienerIncrements::new(cfg.noise.seed), cfg.diagnostics_options())?;
    let mut buf = Vec::new();
    write_ledger_csv(&mut buf, &report.ledger)?;
    out.csv("ledger.csv", &String::from_utf8(buf).expect("utf-8"))?;
    out.json("report.json", json!({ "report": report }))?;
    if !report.checks.all_pass() {
        return Err(Failure::Checks(format!(
            "diagnostic checks failed: {}",
            serde_json::to_string(&report.checks).unwrap()
        )));
    }
    Ok(())
}

fn cmd_converge(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let table = deterministic_convergence(cfg, &cfg.refinement.levels)?;
    out.csv("convergence.csv", &table_csv(&table))?;
    out.json("convergence.json", json!({ "table": table, "fitted_order": table.fitted_order() }))
}

fn cmd_mc(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let e = mc_ensemble(cfg, cfg.ensemble.paths)?;
    let mut body = String::from("path,seed,energy_final,dissipation_total,noise_input_total\n");
    for (i, (seed, r)) in e.seeds.iter().zip(&e.reports).enumerate() {
        writeln!(
            body,
            "{i},{seed},{},{},{}",
            format_f64(r.energy_final),
            format_f64(r.dissipation_total),
            format_f64(r.noise_input_total)
        )
        .unwrap();
    }
    out.csv("paths.csv", &body)?;
    out.json("ensemble.json", json!({ "seeds": e.seeds, "summary": e.summary }))
}

fn cmd_couple(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let s = coupled_refinement_study(cfg, cfg.ensemble.paths)?;
    out.csv("coupled.csv", &table_csv(&s.table))?;
    out.json(
        "coupled.json",
        json!({ "table": s.table, "decrements": s.decrements(), "decreasing_within_3se": s.decreasing_within(3.0) }),
    )
}

fn cmd_validate_flux(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let nf = cfg.numerical_flux()?;
    let (lo, hi) = nf.flux().range();
    let report = nf.validate(lo, hi, 201);
    out.json("flux_validation.json", json!({ "axioms": report, "all_ok": report.all_ok() }))?;
    if !report.all_ok() {
        return Err(Failure::Checks(format!(
            "flux axioms violated: monotony={} lipschitz={} consistency={} symmetry={}",
            report.monotony_ok, report.lipschitz_ok, report.consistency_ok, report.symmetry_ok
        )));
    }
    Ok(())
}

type Handler = fn(&RunConfig, &Output) -> Result<(), Failure>;

fn execute(cli: Cli) -> Result<(), Failure> {
    let (common, run): (&Common, Handler) = match &cli.command {
        Command::Run(c) => (c, cmd_run),
        Command::Diagnose(c) => (c, cmd_diagnose),
        Command::Converge(c) => (c, cmd_converge),
        Command::Mc(c) => (c, cmd_mc),
        Command::Couple(c) => (c, cmd_couple),
        Command::ValidateFlux(c) => (c, cmd_validate_flux),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }
    let cfg = settings::load(common.config.as_deref(), &common.overrides)?;
    let out = Output::new(&cfg, common.out.as_deref())?;
    run(&cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error kind={}: {}", f.kind(), f.message().replace('\n', " "));
            ExitCode::from(f.exit_code())
        }
    }
}
