//! Batch front-end: parse an experiment config, run ensembles and oracles,
//! emit CSV and text reports.
//!
//! Exit codes: 0 success, 1 validation error, 2 numeric blowup,
//! 3 acceptance FAIL (when `--check` is passed). `TTSA_THREADS` caps worker
//! parallelism.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use ttsa::analysis::{
    check_bound_domination, fit_rate, log_spaced_indices, oracle_aux_lemma,
    oracle_noise_variance, oracle_xstar_lipschitz, run_ensemble, trial_seed, EnsembleStats,
};
use ttsa::config::{CheckConfig, ExperimentConfig, OracleKind, SeriesKind};
use ttsa::engine::run_trajectory_at;
use ttsa::schedule::Regime;
use ttsa::{BoundConstants, Schedule, TtsaError};

#[derive(Parser)]
#[command(name = "ttsa", about = "Two-time-scale stochastic approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML)
    config: PathBuf,
    /// Output directory (overrides config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides config)
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count (overrides config)
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble and write CSVs, constants, fits, and bound reports
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluate the config's [check] section; FAIL exits with code 3
        #[arg(long)]
        check: bool,
    },
    /// Run the inequality oracles and write the oracle report
    Oracles {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the bound-constants manifest for the configured problem/schedule
    Constants {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn exit_code_for(err: &TtsaError) -> u8 {
    fn is_blowup(e: &TtsaError) -> bool {
        match e {
            TtsaError::NumericBlowup { .. } => true,
            TtsaError::TrialFailed { source, .. } => is_blowup(source),
            _ => false,
        }
    }
    if is_blowup(err) {
        2
    } else {
        1
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("TTSA_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

struct Loaded {
    cfg: ExperimentConfig,
    config_sha256: String,
    out_dir: PathBuf,
}

fn load(common: &CommonArgs) -> Result<Loaded, TtsaError> {
    let bytes = std::fs::read(&common.config)?;
    let config_sha256 = format!("{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|e| TtsaError::Config(format!("config is not UTF-8: {e}")))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = common.seed {
        cfg.run.base_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.run.trials = trials;
    }
    let out_dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir));
    Ok(Loaded {
        cfg,
        config_sha256,
        out_dir,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), TtsaError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn constants_text(
    constants: &BoundConstants,
    schedule: &Schedule,
    config_sha256: &str,
    base_seed: u64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config_sha256 = {config_sha256}");
    let _ = writeln!(out, "base_seed = {base_seed}");
    let _ = writeln!(out, "alpha = {}", schedule.alpha_coef);
    let _ = writeln!(out, "beta = {}", schedule.beta_coef);
    let _ = writeln!(out, "offset = {}", schedule.offset);
    let _ = writeln!(out, "strict = {}", schedule.strict);
    for (key, value) in constants.to_key_values() {
        let _ = writeln!(out, "{key} = {value}");
    }
    for w in &schedule.warnings {
        let _ = writeln!(out, "warning = {w}");
    }
    out
}

fn series<'a>(stats: &'a EnsembleStats, kind: SeriesKind) -> &'a [f64] {
    match kind {
        SeriesKind::ErrXy => &stats.mean_err_xy,
        SeriesKind::ErrX => &stats.mean_err_x,
        SeriesKind::NormU2 => &stats.mean_norm_u2,
    }
}

fn cmd_run(common: &CommonArgs, check: bool) -> Result<u8, TtsaError> {
    let loaded = load(common)?;
    let cfg = &loaded.cfg;
    let (problem, schedule, constants, x0, y0) = cfg.instantiate()?;
    let indices = log_spaced_indices(cfg.run.horizon, cfg.run.log_points);

    let stats = run_ensemble(
        &problem,
        &schedule,
        &x0,
        &y0,
        cfg.run.horizon,
        &indices,
        cfg.run.trials,
        cfg.run.base_seed,
    )?;
    let traj = run_trajectory_at(
        &problem,
        &schedule,
        &x0,
        &y0,
        cfg.run.horizon,
        &indices,
        trial_seed(cfg.run.base_seed, 0),
        false,
    )?;

    let dir = &loaded.out_dir;
    write_file(dir, "ensemble.csv", &stats.to_csv())?;
    write_file(dir, "trajectory.csv", &traj.to_csv())?;
    let manifest = constants_text(
        &constants,
        &schedule,
        &loaded.config_sha256,
        cfg.run.base_seed,
    );
    write_file(dir, "constants.txt", &manifest)?;
    write_file(dir, "manifest.txt", &manifest)?;

    // Default fit window trims the first percent of the horizon.
    let fit_lo = cfg.run.horizon / 100;
    let mut fits = String::new();
    for (name, kind) in [
        ("err_xy", SeriesKind::ErrXy),
        ("err_x", SeriesKind::ErrX),
        ("normU2", SeriesKind::NormU2),
    ] {
        match fit_rate(
            &indices,
            series(&stats, kind),
            schedule.offset,
            fit_lo,
            cfg.run.horizon,
        ) {
            Ok(fit) => {
                let _ = writeln!(
                    fits,
                    "{name}: slope = {} intercept = {} r2 = {} window = [{}, {}]",
                    fit.slope, fit.intercept, fit.r2, fit.window.0, fit.window.1
                );
            }
            Err(e) => {
                let _ = writeln!(fits, "{name}: not fitted ({e})");
            }
        }
    }
    write_file(dir, "rate_fit.txt", &fits)?;

    let report = check_bound_domination(&stats, &constants, &schedule)?;
    let mut bounds = String::new();
    let _ = writeln!(
        bounds,
        "strict = {}\nchecked = {}\nviolations = {}",
        report.strict,
        report.checked,
        report.violations.len()
    );
    for v in &report.violations {
        let _ = writeln!(
            bounds,
            "violation k = {} series = {} lhs = {} bound = {}",
            v.k,
            if v.fast_iterate { "err_x" } else { "err_xy" },
            v.lhs,
            v.bound
        );
    }
    write_file(dir, "bounds.txt", &bounds)?;

    let mut code = 0u8;
    if check {
        let check_cfg = cfg.check.as_ref().ok_or_else(|| {
            TtsaError::Config("--check requires a [check] section in the config".into())
        })?;
        let (verdict, text) = evaluate_check(check_cfg, &stats, &indices, &schedule, &report)?;
        write_file(dir, "check.txt", &text)?;
        print!("{text}");
        if !verdict {
            code = 3;
        }
    }
    println!("wrote {}", dir.display());
    Ok(code)
}

fn evaluate_check(
    check: &CheckConfig,
    stats: &EnsembleStats,
    indices: &[u64],
    schedule: &Schedule,
    bound_report: &ttsa::analysis::BoundReport,
) -> Result<(bool, String), TtsaError> {
    let mut out = String::new();
    let mut pass = true;
    let fit = fit_rate(
        indices,
        series(stats, check.series),
        schedule.offset,
        check.fit_lo,
        check.fit_hi,
    )?;
    let slope_ok = fit.slope >= check.slope_min && fit.slope <= check.slope_max;
    pass &= slope_ok;
    let _ = writeln!(
        out,
        "{}: slope {} in [{}, {}]: slope = {}",
        if slope_ok { "PASS" } else { "FAIL" },
        match check.series {
            SeriesKind::ErrXy => "err_xy",
            SeriesKind::ErrX => "err_x",
            SeriesKind::NormU2 => "normU2",
        },
        check.slope_min,
        check.slope_max,
        fit.slope
    );
    if check.require_bound_domination {
        let ok = bound_report.ok();
        pass &= ok;
        let _ = writeln!(
            out,
            "{}: bound domination: {} violations over {} indices",
            if ok { "PASS" } else { "FAIL" },
            bound_report.violations.len(),
            bound_report.checked
        );
    }
    Ok((pass, out))
}

fn cmd_oracles(common: &CommonArgs) -> Result<u8, TtsaError> {
    let loaded = load(common)?;
    let cfg = &loaded.cfg;
    let (problem, schedule, constants, x0, y0) = cfg.instantiate()?;
    let mut out = String::new();

    for oracle in &cfg.outputs.oracles {
        match oracle {
            OracleKind::AuxLemma => {
                let k_max = 100_000u64;
                for q in [1.25, 1.5, 1.75, 2.0] {
                    for p in [0.25f64, 0.5, 1.0] {
                        for extra in [0.0, 1.0] {
                            let beta = 2.0 * (q - 1.0) / p + extra;
                            if beta == 0.0 {
                                continue;
                            }
                            let big_k = (p * beta).max(1.0);
                            match oracle_aux_lemma(1.0, q, p, beta, big_k, k_max) {
                                Ok((holds, ratio)) => {
                                    let _ = writeln!(
                                        out,
                                        "{}: aux_lemma q={q} p={p} beta={beta} K={big_k} max_ratio={ratio}",
                                        if holds { "PASS" } else { "FAIL" }
                                    );
                                }
                                Err(e) => {
                                    let _ = writeln!(
                                        out,
                                        "SKIP (inadmissible): aux_lemma q={q} p={p} beta={beta}: {e}"
                                    );
                                }
                            }
                        }
                    }
                }
                // quoted parameterization eps = beta^2, q = 2, p = 1
                let (holds, ratio) = oracle_aux_lemma(4.0, 2.0, 1.0, 2.0, 8.0, k_max)?;
                let _ = writeln!(
                    out,
                    "{}: aux_lemma eps=beta^2 q=2 p=1 beta=2 K=8 max_ratio={ratio}",
                    if holds { "PASS" } else { "FAIL" }
                );
                // eps = alpha beta, q = 1 + a, p = mu' for the separated regime
                if schedule.regime == Regime::FastOneOverKa {
                    let a = schedule.exponent_a.unwrap();
                    let mu_prime = 1.0 - problem.mu;
                    let res = oracle_aux_lemma(
                        schedule.alpha_coef * schedule.beta_coef,
                        1.0 + a,
                        mu_prime,
                        schedule.beta_coef,
                        schedule.offset,
                        k_max,
                    );
                    match res {
                        Ok((holds, ratio)) => {
                            let _ = writeln!(
                                out,
                                "{}: aux_lemma eps=alpha*beta q={} p={mu_prime} max_ratio={ratio}",
                                if holds { "PASS" } else { "FAIL" },
                                1.0 + a
                            );
                        }
                        Err(e) => {
                            let _ = writeln!(out, "SKIP (inadmissible): aux_lemma eps=alpha*beta: {e}");
                        }
                    }
                }
            }
            OracleKind::XstarLipschitz => {
                let (ratio, l0) = oracle_xstar_lipschitz(&problem, 1000, cfg.run.base_seed)?;
                let ok = ratio <= l0 + 1e-6;
                let _ = writeln!(
                    out,
                    "{}: xstar_lipschitz max_ratio={ratio} L0={l0}",
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            OracleKind::NoiseVariance => {
                let gamma = match constants {
                    BoundConstants::Regime1 { gamma2, .. } => gamma2,
                    BoundConstants::Regime2 { gamma3, .. } => gamma3,
                };
                let indices = log_spaced_indices(cfg.run.horizon, cfg.run.log_points);
                let violations = oracle_noise_variance(
                    &problem,
                    &schedule,
                    gamma,
                    &x0,
                    &y0,
                    cfg.run.horizon,
                    &indices,
                    cfg.run.trials,
                    cfg.run.base_seed,
                )?;
                let _ = writeln!(
                    out,
                    "{}: noise_variance gamma={gamma} violations={}",
                    if violations.is_empty() { "PASS" } else { "FAIL" },
                    violations.len()
                );
                for v in violations {
                    let _ = writeln!(
                        out,
                        "  violation m={} estimate={} halfwidth={} bound={}",
                        v.k, v.estimate, v.halfwidth, v.bound
                    );
                }
            }
        }
    }

    write_file(&loaded.out_dir, "oracle_report.txt", &out)?;
    print!("{out}");
    let failed = out.lines().any(|l| l.starts_with("FAIL"));
    Ok(if failed { 3 } else { 0 })
}

fn cmd_constants(common: &CommonArgs) -> Result<u8, TtsaError> {
    let loaded = load(common)?;
    let cfg = &loaded.cfg;
    let (_problem, schedule, constants, _x0, _y0) = cfg.instantiate()?;
    let text = constants_text(
        &constants,
        &schedule,
        &loaded.config_sha256,
        cfg.run.base_seed,
    );
    write_file(&loaded.out_dir, "constants.txt", &text)?;
    print!("{text}");
    Ok(0)
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, check } => cmd_run(common, *check),
        Command::Oracles { common } => cmd_oracles(common),
        Command::Constants { common } => cmd_constants(common),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
