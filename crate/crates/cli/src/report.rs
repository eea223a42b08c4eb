//! Plain-text renderings printed by the subcommands.

use std::fmt::Write as _;

use cpdnes_core::harness::{bits_to_threshold, crossing};
use cpdnes_core::{Experiment, ExperimentConfig, Metric, NeSolution, PrivacyLedger};

pub fn equilibrium(sol: &NeSolution) -> String {
    let coords: Vec<String> = sol.x_star.as_slice().iter().map(|v| format!("{v:.4}")).collect();
    let mut out = format!("x* = [{}]\n", coords.join(", "));
    let _ = writeln!(out, "residual = {:e}", sol.residual);
    let _ = writeln!(
        out,
        "method = {}{}",
        match sol.method {
            cpdnes_core::NeMethod::Linear => "linear",
            cpdnes_core::NeMethod::FixedPoint => "fixed-point",
        },
        if sol.fell_back { " (fallback)" } else { "" }
    );
    out
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Mse => "mse",
        Metric::RmseNorm => "rmse-norm",
    }
}

/// One line per (variant, threshold): crossing iteration and cumulative bits.
pub fn thresholds(cfg: &ExperimentConfig, experiment: &Experiment) -> String {
    let mut out = String::new();
    for s in &experiment.series {
        let last = s.mse_mean.len() - 1;
        let _ = writeln!(out, "{}: final mse {:.4e}, {} bits", s.variant, s.mse_mean[last], s.bits_cum[last]);
        for t in &cfg.thresholds {
            let name = metric_name(t.metric);
            match (crossing(s, t.metric, t.level), bits_to_threshold(s, t.metric, t.level)) {
                (Some(k), Some(bits)) => {
                    let _ = writeln!(out, "  {name} <= {}: k = {k}, bits = {bits}", t.level);
                }
                _ => {
                    let _ = writeln!(out, "  {name} <= {}: not reached", t.level);
                }
            }
        }
        if s.saturated > 0 {
            let _ = writeln!(out, "  saturated coordinates: {}", s.saturated);
        }
    }
    out
}

/// `δ_k = min{1, a ln(c5 k + 1)}` with the coefficient to two decimals.
pub fn closed_form_formula(coefficient: f64, c5: f64) -> String {
    if c5 == 1.0 {
        format!("δ_k = min{{1, {coefficient:.2} ln(k+1)}}")
    } else {
        format!("δ_k = min{{1, {coefficient:.2} ln({c5}k+1)}}")
    }
}

const TABLE_POINTS: [usize; 6] = [1, 10, 100, 1000, 5000, 20000];

pub fn ledger_rows(ledger: &PrivacyLedger, partial: &dyn Fn(usize) -> f64) -> String {
    let horizon = ledger.delta_series.len() - 1;
    let mut ks: Vec<usize> = TABLE_POINTS.iter().copied().filter(|&k| k < horizon).collect();
    ks.push(horizon);
    let mut out = String::from("  k        delta_k      partial-sum\n");
    for k in ks {
        let _ = writeln!(out, "  {k:<8} {:<12.6} {:.6}", ledger.delta_series[k], partial(k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_text() {
        assert_eq!(closed_form_formula(0.48, 1.0), "δ_k = min{1, 0.48 ln(k+1)}");
        assert_eq!(closed_form_formula(0.12, 2.0), "δ_k = min{1, 0.12 ln(2k+1)}");
    }
}
