use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ofdm_dbp::config::{ConfigError, SystemConfig, Violation};
use ofdm_dbp::export::{self, Format, Row};
use ofdm_dbp::policies::PolicyConfig;
use ofdm_dbp::sim::{self, TradeoffPoint};
use ofdm_dbp::vcts::VctsBounds;
use ofdm_dbp::{selftest, Error};

#[derive(Parser)]
#[command(name = "ofdm-dbp", version, about = "Power-delay-CSIT tradeoff simulator and bound calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured policy at one operating point.
    Simulate(RunArgs),
    /// Simulate the configured policy family over `sweep.values`.
    Sweep(RunArgs),
    /// Analytical delay and power bounds for DBP.
    Bounds(BoundsArgs),
    /// Parse and validate a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Accuracy checks for the special functions.
    SpecfunSelftest {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output table; a `.plot.dat` companion is written next to it.
    /// Without it the table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Evaluate every `sweep.values` entry instead of `policy.v`.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Config(ConfigError::Invalid(vec![Violation {
        key: key.into(),
        message: message.into(),
    }]))
}

fn load(path: &Path, args: Option<&RunArgs>) -> Result<SystemConfig, Error> {
    let mut cfg = SystemConfig::load(path)?;
    if let Some(a) = args {
        if let Some(s) = a.seed {
            cfg.mc.seed = s;
        }
        if let Some(n) = a.slots {
            cfg.mc.slots = n;
        }
        if let Some(p) = a.parallel {
            if p == 0 {
                return Err(invalid("--parallel", "must be at least 1"));
            }
            cfg.mc.parallel = p;
        }
        let warmup = cfg.scenario().warmup_slots(cfg.mc.slots);
        if cfg.mc.slots <= warmup {
            return Err(invalid("--slots", format!("must exceed the {warmup}-slot warm-up")));
        }
    }
    Ok(cfg)
}

fn emit(rows: &mut [Row], out: Option<&Path>, format: Format) -> Result<(), Error> {
    match out {
        Some(path) => {
            let plot = export::write_table(path, rows, format)?;
            log::info!("wrote {} and {}", path.display(), plot.display());
        }
        None => {
            export::sort_rows(rows);
            let stdout = io::stdout().lock();
            match format {
                Format::Csv => export::write_csv(stdout, rows)?,
                Format::Json => export::write_json(stdout, rows)?,
            }
        }
    }
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<(), Error> {
    let cfg = load(&args.config, Some(args))?;
    let point = sim::run_point(&cfg.scenario(), cfg.policy, cfg.mc.slots, cfg.mc.seed)?;
    warn_trend(&point);
    emit(&mut export::rows_from_point(&point), args.out.as_deref(), args.format.into())
}

fn warn_trend(p: &TradeoffPoint) {
    if p.stats.trend_warning {
        log::warn!(
            "{} at {}: backlog still trending upward after warm-up; averages may not be stationary",
            p.policy,
            p.sweep_param
        );
    }
}

fn sweep(args: &RunArgs) -> Result<(), Error> {
    let cfg = load(&args.config, Some(args))?;
    let results = sim::sweep(&cfg.scenario(), cfg.policy, &cfg.sweep_values, cfg.mc.slots, cfg.mc.seed, cfg.mc.parallel)?;
    let mut rows = Vec::new();
    let mut first_failure = None;
    for r in results {
        match r {
            Ok(p) => {
                warn_trend(&p);
                rows.extend(export::rows_from_point(&p));
            }
            Err(f) => {
                eprintln!("error: {} at {}: {}", cfg.policy.name(), f.sweep_param, f.error);
                first_failure.get_or_insert(f.error);
            }
        }
    }
    if !rows.is_empty() {
        emit(&mut rows, args.out.as_deref(), args.format.into())?;
    }
    match first_failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn print_bounds(out: &mut impl Write, b: &VctsBounds) -> io::Result<()> {
    let fp = b.leftover_fixed_point;
    writeln!(out, "V                 {}", b.v)?;
    writeln!(out, "arrivals          {}", b.arrivals)?;
    writeln!(out, "E[f]              {:.6} ± {:.1e}", b.mean_f, b.mean_f_se)?;
    writeln!(out, "beta              {:.6} ± {:.1e}", b.beta, b.beta_se)?;
    writeln!(out, "beta'             {:.6} ± {:.1e}", b.beta_prime, b.beta_prime_se)?;
    writeln!(out, "L*                {fp:.6} nats (residual {:.1e})", b.fixed_point_residual)?;
    if let Some(a) = &b.asymptotic {
        writeln!(out, "t_d               {:.6} s", a.t_d)?;
        writeln!(out, "t_p               {:.6} s", a.t_p)?;
    }
    writeln!(out, "delay bound       {:.6} s", b.delay_upper)?;
    writeln!(out, "power bound       {:.6}", b.power_lower)?;
    for n in &b.notes {
        writeln!(out, "note: {n}")?;
    }
    Ok(())
}

fn bounds(args: &BoundsArgs) -> Result<(), Error> {
    let cfg = load(&args.config, None)?;
    let v_values = match (cfg.policy, args.sweep) {
        (_, true) => cfg.sweep_values.clone(),
        (PolicyConfig::Dbp { v }, false) => vec![v],
        (p, false) => {
            return Err(invalid("policy.kind", format!("bounds are defined for dbp, not {}", p.name())));
        }
    };
    let sc = cfg.scenario();
    let reports = v_values.iter().map(|&v| sc.bounds(v)).collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &args.out {
        let mut rows: Vec<Row> = reports
            .iter()
            .map(|b| Row::analytical("dbp", b.v, cfg.csit_error.sigma_e2(), cfg.circuit_power, b))
            .collect();
        emit(&mut rows, Some(path), args.format.into())?;
    }
    let mut stdout = io::stdout().lock();
    let written = if args.json {
        let value = if reports.len() == 1 {
            serde_json::to_value(&reports[0])
        } else {
            serde_json::to_value(&reports)
        };
        value
            .and_then(|v| serde_json::to_writer_pretty(&mut stdout, &v))
            .map_err(io::Error::other)
            .and_then(|_| writeln!(stdout))
    } else {
        reports.iter().enumerate().try_for_each(|(i, b)| {
            if i > 0 {
                writeln!(stdout)?;
            }
            print_bounds(&mut stdout, b)
        })
    };
    written.map_err(|e| Error::Export(export::ExportError::Io { path: "<stdout>".into(), source: e }))
}

fn validate(path: &Path) -> Result<(), Error> {
    let cfg = load(path, None)?;
    println!(
        "ok: n_F={} N_d={} slots/frame={} arrival={:.6} nats/s policy={:?}",
        cfg.n_subcarriers,
        cfg.n_taps,
        cfg.slots_per_frame,
        cfg.arrival_rate(),
        cfg.policy
    );
    Ok(())
}

fn specfun_selftest(json: bool) -> Result<ExitCode, Error> {
    let report = selftest::run()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    } else {
        for c in &report.checks {
            println!(
                "{} {:<48} cases={:<3} max_err={:.3e} tol={:.0e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.cases,
                c.max_error,
                c.tolerance
            );
        }
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else if e.is_numerical_regime() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a).map(|_| ExitCode::SUCCESS),
        Command::Sweep(a) => sweep(a).map(|_| ExitCode::SUCCESS),
        Command::Bounds(a) => bounds(a).map(|_| ExitCode::SUCCESS),
        Command::Validate { config } => validate(config).map(|_| ExitCode::SUCCESS),
        Command::SpecfunSelftest { json } => specfun_selftest(*json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
