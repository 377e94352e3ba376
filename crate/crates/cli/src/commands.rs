use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ddsc_core::bench::report::{fmt_sig, summary_text, write_curves_csv};
use ddsc_core::bench::run_benchmark;
use ddsc_core::checkpoint::Checkpoint;
use ddsc_core::invariance::l2_norm;
use ddsc_core::schedule::lambda_at;
use ddsc_core::stats::Quantiles;
use thiserror::Error;

use crate::config::{ConfigError, Overrides, RunConfig};

pub const OUTPUT_ROOT_ENV: &str = "DDSC_OUTPUT_ROOT";
pub const CONFIG_FILE: &str = "config.toml";
pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn header_line() -> String {
    format!("generated by ddsc {} at unix time {}", env!("CARGO_PKG_VERSION"), unix_seconds())
}

fn default_out_dir() -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("run-{}", unix_seconds()))
}

/// Runs the benchmark and writes the output directory. Returns the directory.
pub fn cmd_run(config_path: Option<&Path>, overrides: &Overrides) -> Result<PathBuf, CliError> {
    let config = RunConfig::load(config_path, overrides)?;
    let out = config.out_dir.clone().unwrap_or_else(default_out_dir);
    if out.exists() && fs::read_dir(&out).map_err(|e| io_err(&out, e))?.next().is_some() {
        return Err(ConfigError::new("--out", format!("{} is not empty", out.display())).into());
    }
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let bench = &config.bench;
    log::info!(
        "running {} strategies x {} seeds for {} epochs",
        bench.strategies.len(),
        bench.seeds.len(),
        bench.schedule.epochs
    );
    let report = run_benchmark(bench).map_err(|e| CliError::Runtime(e.to_string()))?;

    let header = header_line();
    let config_path = out.join(CONFIG_FILE);
    fs::write(&config_path, format!("# {header}\n{}", config.to_text())).map_err(|e| io_err(&config_path, e))?;

    let curves_path = out.join(CURVES_FILE);
    let file = fs::File::create(&curves_path).map_err(|e| io_err(&curves_path, e))?;
    write_curves_csv(&report, &header, &mut BufWriter::new(file)).map_err(|e| io_err(&curves_path, e))?;

    let summary_path = out.join(SUMMARY_FILE);
    fs::write(&summary_path, summary_text(&report, &header)).map_err(|e| io_err(&summary_path, e))?;

    if bench.checkpoints {
        let dir = out.join(CHECKPOINT_DIR);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        for run in &report.runs {
            for ckpt in &run.checkpoints {
                let path = dir.join(format!("{}_seed{}_epoch{:03}.json", run.strategy, run.seed, ckpt.state.epoch));
                ckpt.save(&path).map_err(|e| CliError::Runtime(e.to_string()))?;
            }
        }
    }

    for s in &report.summaries {
        println!(
            "{:<15} overall {}  seen {}  unseen {}",
            s.strategy.name(),
            ms(s.acc_overall.mean, s.acc_overall.std),
            ms(s.acc_seen.mean, s.acc_seen.std),
            ms(s.acc_unseen.mean, s.acc_unseen.std),
        );
    }
    println!("wrote {}", out.display());
    Ok(out)
}

fn ms(mean: f64, std: f64) -> String {
    format!("{} ± {}", fmt_sig(mean), fmt_sig(std))
}

/// Validates a configuration and returns the resolved text.
pub fn cmd_validate(config_path: Option<&Path>, overrides: &Overrides) -> Result<String, CliError> {
    let config = RunConfig::load(config_path, overrides)?;
    Ok(config.to_text())
}

fn quantile_line(label: &str, q: &Quantiles) -> String {
    format!(
        "{label}: min {}  q25 {}  median {}  q75 {}  max {}",
        fmt_sig(q.min),
        fmt_sig(q.q25),
        fmt_sig(q.median),
        fmt_sig(q.q75),
        fmt_sig(q.max)
    )
}

/// Human-readable summary of a checkpoint.
pub fn inspect_text(ckpt: &Checkpoint) -> String {
    let state = &ckpt.state;
    let cfg = &state.config;
    let mut s = String::new();
    let _ = writeln!(s, "strategy: {}", ckpt.strategy);
    let _ = writeln!(s, "epoch: {} of {}", state.epoch, cfg.epochs);
    if state.epoch >= 1 {
        let lambda = cfg.fixed_lambda.map(Ok).unwrap_or_else(|| lambda_at(state.epoch, cfg.epochs, cfg.lambda_min));
        let next = cfg
            .fixed_lambda
            .map(Ok)
            .unwrap_or_else(|| lambda_at((state.epoch + 1).min(cfg.epochs), cfg.epochs, cfg.lambda_min));
        if let (Ok(l), Ok(n)) = (lambda, next) {
            let _ = writeln!(s, "lambda: {}  (next epoch {})", fmt_sig(l), fmt_sig(n));
        }
    }
    let _ = writeln!(
        s,
        "schedule: lambda_min {}  tau {}  beta {}  gamma {}  eta_h {}  epsilon {}",
        fmt_sig(cfg.lambda_min),
        fmt_sig(cfg.tau),
        fmt_sig(cfg.beta),
        fmt_sig(cfg.gamma),
        fmt_sig(cfg.eta_h),
        fmt_sig(cfg.epsilon)
    );
    let _ = writeln!(s, "prototypes:");
    for m in 0..state.bank.num_devices() {
        match state.bank.prototype(m) {
            Some(p) => {
                let _ = writeln!(s, "  device {m}: norm {:.12}", l2_norm(p));
            }
            None => {
                let _ = writeln!(s, "  device {m}: unseen");
            }
        }
    }

    let applied = state.ledger.applied_weights();
    let next = state.ledger.weights();
    let n = applied.len();
    let uniform = applied.iter().all(|w| (w - 1.0 / n as f64).abs() < 1e-15);
    let _ = writeln!(s, "samples: {n}");
    let _ = writeln!(
        s,
        "{}{}",
        quantile_line("applied weights", &Quantiles::of(&applied)),
        if uniform { "  (uniform)" } else { "" }
    );
    let _ = writeln!(s, "{}", quantile_line("next weights", &Quantiles::of(&next)));
    let _ = writeln!(s, "{}", quantile_line("invariance", &Quantiles::of(&state.ledger.invariance())));
    let _ = writeln!(s, "{}", quantile_line("progress", &Quantiles::of(&state.ledger.progress_norm())));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| next[b].total_cmp(&next[a]).then(a.cmp(&b)));
    let k = n.min(5);
    let row = |i: usize| {
        let r = state.ledger.record(i);
        format!(
            "  sample {i}: weight {}  invariance {}  progress {}",
            fmt_sig(r.weight),
            r.invariance.map(fmt_sig).unwrap_or_else(|| "-".into()),
            fmt_sig(r.progress_norm)
        )
    };
    let _ = writeln!(s, "top weighted (next epoch):");
    for &i in &order[..k] {
        let _ = writeln!(s, "{}", row(i));
    }
    let _ = writeln!(s, "bottom weighted (next epoch):");
    for &i in order[n - k..].iter().rev() {
        let _ = writeln!(s, "{}", row(i));
    }
    s
}

pub fn cmd_inspect(path: &Path) -> Result<String, CliError> {
    let ckpt = Checkpoint::load(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(inspect_text(&ckpt))
}
