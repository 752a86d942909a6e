use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lagrange_sync::analysis::{summarize, write_summary_csv, SummaryRow};
use lagrange_sync::config::{verify, ExperimentConfig};
use lagrange_sync::presets;
use lagrange_sync::simulator::{run_concurrent, Scenario, SimConfig, TrajectoryLog};
use lagrange_sync::topology::{ring_tracking_margin, ConditionReport, GraphKind};
use lagrange_sync::Error;

const EXIT_REGIME: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_BLOW_UP: u8 = 3;
const EXIT_CRITERIA: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "lagsync", version, about = "Synchronization experiments for networks of Lagrangian robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the gain conditions of every group and check a regime.
    VerifyGains {
        #[command(flatten)]
        source: Source,
        /// Regime that must hold for exit status 0.
        #[arg(long, value_enum, default_value_t = Regime::Sync)]
        expect: Regime,
    },
    /// Run an experiment and write the trajectory log and summary.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
        /// Torque disturbance, `sinusoid:A[:freq]` or `noise:A`.
        #[arg(long)]
        disturbance: Option<String>,
        /// Run N seeds starting at the configured one, in parallel.
        #[arg(long, value_name = "N")]
        sweep: Option<usize>,
        /// Run even when the sync condition fails.
        #[arg(long)]
        force: bool,
    },
    /// Run a built-in experiment and check its expected behaviour.
    Reproduce {
        #[arg(long, value_parser = preset_name)]
        preset: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct Source {
    /// Experiment config file.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment to use as the config.
    #[arg(long, value_parser = preset_name)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Output directory; defaults to the config's `output_dir` or `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Validate and print the plan without running or writing anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Regime {
    /// Tracking and synchronization.
    Stable,
    Tracking,
    Sync,
    /// Synchronization with zero tracking gain.
    Indifferent,
}

fn preset_name(s: &str) -> Result<String, String> {
    match presets::source(s) {
        Some(_) => Ok(s.to_string()),
        None => Err(format!(
            "unknown preset; available: {}",
            presets::names().collect::<Vec<_>>().join(", ")
        )),
    }
}

/// Error carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BlowUp { .. } => EXIT_BLOW_UP,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_SCHEMA,
        };
        let message = match &e {
            Error::BlowUp { .. } => format!("{e}"),
            _ => format!("error: {e}"),
        };
        Failure { code, message }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::VerifyGains { source, expect } => cmd_verify_gains(&source, expect),
        Command::Simulate {
            source,
            run,
            disturbance,
            sweep,
            force,
        } => cmd_simulate(&source, &run, disturbance.as_deref(), sweep, force),
        Command::Reproduce { preset, run } => cmd_reproduce(&preset, &run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(source: &Source) -> Result<(ExperimentConfig, String), Failure> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let cfg = ExperimentConfig::load(path)?;
            let name = cfg.name.clone().unwrap_or_else(|| {
                path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned())
            });
            Ok((cfg, name))
        }
        (None, Some(p)) => Ok((presets::load(p)?, p.clone())),
        (None, None) => Err(Failure {
            code: EXIT_SCHEMA,
            message: "error: pass --config or --preset".into(),
        }),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, run: &RunArgs, disturbance: Option<&str>) {
    if let Some(seed) = run.seed {
        cfg.sim.seed = Some(seed);
    }
    if let Some(dt) = run.dt {
        cfg.sim.dt = Some(dt);
    }
    if let Some(t) = run.t_final {
        cfg.sim.t_final = Some(t);
    }
    if let Some(d) = disturbance {
        cfg.sim.disturbance = Some(d.to_string());
    }
}

fn out_dir(cfg: &ExperimentConfig, run: &RunArgs) -> PathBuf {
    run.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn print_conditions(scenario: &Scenario, reports: &[(String, ConditionReport)]) {
    for (group, (name, report)) in scenario.groups.iter().zip(reports) {
        let graph = group.graph.initial();
        println!("group {name}: {:?} graph, p = {}", graph.kind(), graph.size());
        println!("{report}");
        if graph.kind() == GraphKind::Ring {
            let (label, margin) = ring_tracking_margin(&group.gains, graph.size());
            let ok = margin.iter().all(|&m| m > 0.0);
            let values: Vec<String> = margin.iter().map(|m| format!("{m:.6}")).collect();
            println!("{label} = [{}] > 0: {ok}", values.join(", "));
        }
        println!();
    }
}

fn regime_holds(report: &ConditionReport, regime: Regime) -> bool {
    match regime {
        Regime::Stable => report.tracking_ok && report.sync_ok,
        Regime::Tracking => report.tracking_ok,
        Regime::Sync => report.sync_ok,
        Regime::Indifferent => report.indifferent && report.sync_ok,
    }
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::Stable => "stable",
        Regime::Tracking => "tracking",
        Regime::Sync => "sync",
        Regime::Indifferent => "indifferent",
    }
}

fn check_regime(reports: &[(String, ConditionReport)], regime: Regime) -> Result<(), Failure> {
    let failing: Vec<&str> = reports
        .iter()
        .filter(|(_, r)| !regime_holds(r, regime))
        .map(|(n, _)| n.as_str())
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_REGIME,
            message: format!(
                "regime '{}' does not hold for group(s): {}",
                regime_name(regime),
                failing.join(", ")
            ),
        })
    }
}

fn cmd_verify_gains(source: &Source, expect: Regime) -> Result<(), Failure> {
    let (cfg, _) = load(source)?;
    let scenario = cfg.scenario()?;
    let reports = verify(&scenario)?;
    print_conditions(&scenario, &reports);
    check_regime(&reports, expect)?;
    println!("regime '{}' holds", regime_name(expect));
    Ok(())
}

fn print_plan(name: &str, scenario: &Scenario, sims: &[SimConfig], out: &Path, files: &[PathBuf]) {
    println!("experiment {name}");
    for g in &scenario.groups {
        println!(
            "  group {}: {} robots, {} joints, law {}",
            g.name,
            g.size(),
            g.dof(),
            g.law.name()
        );
    }
    for sim in sims {
        println!(
            "  run seed {}: dt {} t_final {} ({} steps, log every {}){}",
            sim.seed,
            sim.dt,
            sim.t_final,
            sim.steps(),
            sim.decimation,
            sim.disturbance.map_or(String::new(), |d| format!(", disturbance {d:?}"))
        );
    }
    println!("  output directory {}", out.display());
    for f in files {
        println!("    {}", f.display());
    }
}

fn write_log(log: &TrajectoryLog, path: &Path) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(Error::from)?;
    log.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(Error::from)?;
    write_summary_csv(rows, std::io::BufWriter::new(file))?;
    Ok(())
}

fn cmd_simulate(
    source: &Source,
    run: &RunArgs,
    disturbance: Option<&str>,
    sweep: Option<usize>,
    force: bool,
) -> Result<(), Failure> {
    let (mut cfg, name) = load(source)?;
    apply_overrides(&mut cfg, run, disturbance);
    let (scenario, sim) = cfg.build()?;
    let reports = verify(&scenario)?;
    if let Err(f) = check_regime(&reports, Regime::Sync) {
        if !force {
            print_conditions(&scenario, &reports);
            return Err(Failure {
                message: format!("{}; pass --force to run anyway", f.message),
                ..f
            });
        }
        eprintln!("warning: {}", f.message);
    }

    let count = sweep.unwrap_or(1);
    if count == 0 {
        return Err(Failure {
            code: EXIT_SCHEMA,
            message: "error: --sweep needs at least one run".into(),
        });
    }
    let sims: Vec<SimConfig> = (0..count as u64)
        .map(|i| SimConfig {
            seed: sim.seed + i,
            ..sim.clone()
        })
        .collect();
    let log_name = |s: &SimConfig| {
        if sweep.is_some() {
            format!("log_seed{}.csv", s.seed)
        } else {
            "log.csv".to_string()
        }
    };
    let out = out_dir(&cfg, run);
    let mut files: Vec<PathBuf> = sims.iter().map(|s| out.join(log_name(s))).collect();
    files.push(out.join("summary.csv"));
    if run.dry_run {
        print_plan(&name, &scenario, &sims, &out, &files);
        return Ok(());
    }

    let results: Vec<Result<TrajectoryLog, Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sims
            .iter()
            .map(|s| {
                let scenario = &scenario;
                scope.spawn(move || run_concurrent(scenario, s))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Scenario("run thread panicked".into()))))
            .collect()
    });

    fs::create_dir_all(&out).map_err(Error::from)?;
    let mut rows = Vec::new();
    let mut first_failure = None;
    for (s, result) in sims.iter().zip(results) {
        match result {
            Ok(log) => {
                write_log(&log, &out.join(log_name(s)))?;
                for flag in &log.flags {
                    eprintln!("note (seed {}): {flag}", s.seed);
                }
                let run_id = format!("{name}-seed{}", s.seed);
                rows.push(summarize(&run_id, &log, &scenario, s.disturbance.is_some())?);
            }
            Err(e) => {
                let f = Failure::from(e);
                eprintln!("seed {}: {}", s.seed, f.message);
                first_failure.get_or_insert(f.code);
            }
        }
    }
    write_summary(&rows, &out.join("summary.csv"))?;
    for row in &rows {
        println!(
            "{}: final sync error {:.3e}, final tracking error {:.3e}",
            row.run_id, row.final_sync_err, row.final_track_err
        );
    }
    println!("wrote {}", out.display());
    match first_failure {
        Some(code) => Err(Failure {
            code,
            message: format!("{} of {} runs failed", sims.len() - rows.len(), sims.len()),
        }),
        None => Ok(()),
    }
}

fn cmd_reproduce(preset: &str, run: &RunArgs) -> Result<(), Failure> {
    let mut cfg = presets::load(preset)?;
    apply_overrides(&mut cfg, run, None);
    let (scenario, sim) = cfg.build()?;
    let out = out_dir(&cfg, run).join(preset);
    let files = ["log.csv", "summary.csv", "report.txt"].map(|f| out.join(f));
    if run.dry_run {
        print_plan(preset, &scenario, std::slice::from_ref(&sim), &out, &files);
        return Ok(());
    }
    let log = run_concurrent(&scenario, &sim)?;
    let checks = presets::evaluate(preset, &log)?;
    let row = summarize(preset, &log, &scenario, sim.disturbance.is_some())?;

    let mut report = String::new();
    for c in &checks {
        report.push_str(&format!("{c}\n"));
    }
    fs::create_dir_all(&out).map_err(Error::from)?;
    write_log(&log, &files[0])?;
    write_summary(std::slice::from_ref(&row), &files[1])?;
    fs::write(&files[2], &report).map_err(Error::from)?;
    print!("{report}");

    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("{preset}: all {} checks passed", checks.len());
        return Ok(());
    }
    let dump = format!(
        "{preset}: {failed} of {} checks failed\nlambda_sync {:.6e} (r2 {:.6})\nlambda_track {:.6e} (r2 {:.6})\n\
         max_residual {:.6e}\nfinal_sync_err {:.6e}\nfinal_track_err {:.6e}",
        checks.len(),
        row.lambda_sync,
        row.r2_sync,
        row.lambda_track,
        row.r2_track,
        row.max_residual,
        row.final_sync_err,
        row.final_track_err
    );
    Err(Failure {
        code: EXIT_CRITERIA,
        message: dump,
    })
}
