//! Text output for benchmark results.
//!
//! Curves CSV columns, stable within a major version:
//! `strategy,seed,epoch,lambda,train_loss,acc_overall,acc_seen,acc_unseen,weight_entropy`.
//! `lambda` is empty for strategies without a mixing coefficient. The first
//! line is a `#` comment carrying the generation timestamp; everything after
//! it is deterministic for a fixed configuration.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::bench::benchmark::{BenchmarkReport, CurveRow, MeanStd};
use crate::bench::strategies::Strategy;

pub const CSV_COLUMNS: [&str; 9] =
    ["strategy", "seed", "epoch", "lambda", "train_loss", "acc_overall", "acc_seen", "acc_unseen", "weight_entropy"];

/// Formats a float with 6 significant digits, `%g` style.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can bump the exponent (9.999995 -> 10.0000)
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa =
            if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{mantissa}e{e}")
    }
}

fn csv_row(row: &CurveRow) -> String {
    [
        row.strategy.name().to_string(),
        row.seed.to_string(),
        row.epoch.to_string(),
        row.lambda.map(fmt_sig).unwrap_or_default(),
        fmt_sig(row.train_loss),
        fmt_sig(row.acc_overall),
        fmt_sig(row.acc_seen),
        fmt_sig(row.acc_unseen),
        fmt_sig(row.weight_entropy),
    ]
    .join(",")
}

pub fn write_curves_csv<W: Write>(report: &BenchmarkReport, header_comment: &str, out: &mut W) -> io::Result<()> {
    writeln!(out, "# {header_comment}")?;
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for row in report.rows() {
        writeln!(out, "{}", csv_row(row))?;
    }
    Ok(())
}

fn mean_std(m: &MeanStd) -> String {
    format!("{} ± {}", fmt_sig(m.mean), fmt_sig(m.std))
}

/// Per-strategy summary as TOML.
pub fn summary_text(report: &BenchmarkReport, header_comment: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {header_comment}");
    for sum in &report.summaries {
        let _ = writeln!(s, "\n[{}]", sum.strategy.name());
        let _ = writeln!(s, "runs = {}", sum.runs);
        for (key, m) in [
            ("acc_overall", &sum.acc_overall),
            ("acc_seen", &sum.acc_seen),
            ("acc_unseen", &sum.acc_unseen),
            ("final_train_loss", &sum.final_train_loss),
        ] {
            let _ = writeln!(s, "{key} = \"{}\"", mean_std(m));
            let _ = writeln!(s, "{key}_mean = {}", fmt_sig(m.mean));
            let _ = writeln!(s, "{key}_std = {}", fmt_sig(m.std));
        }
    }
    let mut deltas = Vec::new();
    for baseline in [Strategy::Uniform, Strategy::StaticEntropy, Strategy::SelfPaced] {
        if let Some(d) = report.unseen_delta(Strategy::Ddsc, baseline) {
            deltas.push(format!("ddsc_minus_{} = {}", baseline.name(), fmt_sig(d)));
        }
    }
    if !deltas.is_empty() {
        let _ = writeln!(s, "\n[unseen_accuracy_delta]");
        for d in deltas {
            let _ = writeln!(s, "{d}");
        }
    }
    s
}
