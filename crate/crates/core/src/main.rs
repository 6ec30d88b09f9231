//! Command-line harness: synthesize fields, select support sets, run
//! localization experiments, compare methods, and benchmark per-step timing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use gp_localize::config::{ExperimentConfig, Method};
use gp_localize::error::{Error, Result};
use gp_localize::experiment::{benchmark_timing, prepare, run_experiment, run_method_replicate};
use gp_localize::field::synthesize_field;
use gp_localize::gp::Hyperparams;
use gp_localize::report::{save_report_csv, save_timing_csv};
use gp_localize::support::select_support_set;

const USAGE: &str = "\
gp-localize: persistent localization in spatial fields with an online sparse GP

USAGE:
    gp-localize <COMMAND> [--config <file>] [--seed <n>] [--method <m>] [--out <path>]

COMMANDS:
    synth           synthesize a field grid and write it as CSV
    select-support  pick a support set over the field's cell centers
    localize        run one localization method, write a per-step report CSV
    compare         run every method on shared seeds, write one report each
    bench           record per-step wall time per method, write a timing CSV

FLAGS:
    --config <file>   flat key = value configuration (defaults apply per key)
    --seed <n>        override the configured seed list with a single seed
    --method <m>      override the configured method (gp-localize, sod-truncate,
                      sod-even, full-gp, offline-pitc, dead-reckoning)
    --out <path>      output file (required for synth/localize/bench);
                      for compare, a prefix for per-method reports

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
";

struct CliArgs {
    command: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    method: Option<Method>,
    out: Option<PathBuf>,
}

fn parse_args(args: &[String]) -> Result<CliArgs> {
    if args.is_empty() {
        return Err(Error::Config("missing command (try --help)".into()));
    }
    if args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        std::process::exit(0);
    }
    let mut cli = CliArgs {
        command: args[0].clone(),
        config: None,
        seed: None,
        method: None,
        out: None,
    };
    let mut i = 1;
    while i < args.len() {
        let flag = args[i].as_str();
        let value = args
            .get(i + 1)
            .ok_or_else(|| Error::Config(format!("flag {flag} expects a value")))?;
        match flag {
            "--config" => cli.config = Some(PathBuf::from(value)),
            "--seed" => {
                cli.seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::Config(format!("--seed expects an integer, got '{value}'"))
                })?)
            }
            "--method" => cli.method = Some(Method::parse(value)?),
            "--out" => cli.out = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown flag '{other}'"))),
        }
        i += 2;
    }
    Ok(cli)
}

fn load_config(cli: &CliArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(method) = cli.method {
        cfg.method = method;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_out(cli: &CliArgs) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn cmd_synth(cli: &CliArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = require_out(cli)?;
    let h = Hyperparams::new(
        cfg.signal_var,
        0.0,
        vec![cfg.length_scale_x, cfg.length_scale_y],
        cfg.prior_mean,
    )?;
    let grid = synthesize_field(
        cfg.rows,
        cfg.cols,
        &h,
        cfg.seeds[0],
        (cfg.origin_x, cfg.origin_y),
        (cfg.cell_w, cfg.cell_h),
        cfg.measurement_noise_sd,
        cfg.grid_cap,
    )?;
    grid.save_csv(out)?;
    println!(
        "wrote {}x{} field (seed {}) to {}",
        cfg.rows,
        cfg.cols,
        cfg.seeds[0],
        out.display()
    );
    Ok(())
}

fn cmd_select_support(cli: &CliArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = require_out(cli)?;
    let prepared = prepare(&cfg, cfg.seeds[0])?;
    let support = select_support_set(
        &prepared.fields[0].cell_centers(),
        cfg.support_size,
        &prepared.h,
    )?;
    let mut text = String::from("x,y\n");
    for loc in support.locations() {
        let _ = writeln!(text, "{},{}", loc.coords()[0], loc.coords()[1]);
    }
    std::fs::write(out, text)?;
    println!(
        "wrote {} support locations to {}",
        support.len(),
        out.display()
    );
    Ok(())
}

fn seeded_out_path(base: &Path, seed: u64, replicate: usize, multi: bool) -> PathBuf {
    if !multi {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_seed{seed}_run{replicate}.{ext}"))
}

fn cmd_localize(cli: &CliArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = require_out(cli)?;
    let report = run_experiment(&cfg)?;
    let multi = report.runs.len() > 1;
    for run in &report.runs {
        let path = seeded_out_path(out, run.seed, run.replicate, multi);
        save_report_csv(&run.records, &path)?;
        println!(
            "{} seed {} run {}: mean error {:.4} over {} steps -> {}",
            report.method.name(),
            run.seed,
            run.replicate,
            run.mean_error,
            run.records.len(),
            path.display()
        );
    }
    println!(
        "{}: mean error {:.4} across {} run(s)",
        report.method.name(),
        report.mean_error,
        report.runs.len()
    );
    Ok(())
}

fn cmd_compare(cli: &CliArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let methods = [
        Method::GpLocalize,
        Method::SodTruncate,
        Method::SodEven,
        Method::FullGp,
        Method::OfflinePitc,
    ];
    println!("method,seed,mean_error");
    let mut summary: Vec<(Method, f64)> = Vec::new();
    for method in methods {
        let mut total = 0.0;
        for &seed in &cfg.seeds {
            let prepared = prepare(&cfg, seed)?;
            let mut seed_total = 0.0;
            for replicate in 0..cfg.runs_per_seed {
                let run = run_method_replicate(&prepared, &cfg, seed, replicate, method)?;
                seed_total += run.mean_error;
                if let Some(out) = &cli.out {
                    let stem = out.to_string_lossy();
                    let path = PathBuf::from(format!(
                        "{stem}{}_seed{seed}_run{replicate}.csv",
                        method.name()
                    ));
                    save_report_csv(&run.records, &path)?;
                }
            }
            let seed_mean = seed_total / cfg.runs_per_seed as f64;
            println!("{},{},{:.6}", method.name(), seed, seed_mean);
            total += seed_mean;
        }
        summary.push((method, total / cfg.seeds.len() as f64));
    }
    println!("--- mean over seeds ---");
    for (method, err) in summary {
        println!("{},{:.6}", method.name(), err);
    }
    Ok(())
}

fn cmd_bench(cli: &CliArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = require_out(cli)?;
    let series = benchmark_timing(&cfg)?;
    save_timing_csv(&series, out)?;
    for ts in &series {
        let n = ts.series.len().max(1);
        let mean: f64 = ts.series.iter().map(|(_, ms)| ms).sum::<f64>() / n as f64;
        println!(
            "{}: {} timed steps, mean {:.3} ms/step",
            ts.method.name(),
            ts.series.len(),
            mean
        );
    }
    println!("wrote timing series to {}", out.display());
    Ok(())
}

fn run(args: &[String]) -> Result<()> {
    let cli = parse_args(args)?;
    match cli.command.as_str() {
        "synth" => cmd_synth(&cli),
        "select-support" => cmd_select_support(&cli),
        "localize" => cmd_localize(&cli),
        "compare" => cmd_compare(&cli),
        "bench" => cmd_bench(&cli),
        other => Err(Error::Config(format!(
            "unknown command '{other}' (try --help)"
        ))),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
