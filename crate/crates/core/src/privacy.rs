//! Per-iteration `(0, δ_k)` differential-privacy accounting.
//!
//! Two runs on adjacent games (differing only in player `i0`'s objective) can
//! be coupled so that every observation coincides. Player `i0`'s estimates then
//! drift apart by at most `2C Σ_{s<k} α_s β_s` in `ℓ1`, and one stochastic
//! quantization of inputs that far apart changes the output distribution by at
//! most that distance over `θ`. The ledger evaluates this bound, analytically:
//!
//! * closed form for hyperbolic products `α_kβ_k = c4/(c5 k + 1)`,
//! * direct partial sums for any schedule,
//! * the same with dynamic scaling `r_k = r^k`, which divides by `r_k`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compress::Compressor;
use crate::engines::{apply_round, cpdnes_messages, EngineConfig, InitialRule, PlayerState, Variant};
use crate::error::{check_len, Error, Result};
use crate::game::{AggregativeGame, EnergyGame, EnergyGameParams};
use crate::network::Topology;
use crate::schedule::StepSchedule;

fn clip(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `2 C c4 √n / (c5 θ)`, the multiplier of `ln(c5 k + 1)`.
pub fn closed_form_coefficient(c4: f64, c5: f64, c: f64, n: usize, theta: f64) -> f64 {
    2.0 * c * c4 * (n as f64).sqrt() / (c5 * theta)
}

/// `δ_k = min{1, (2 C c4 √n)/(c5 θ) ln(c5 k + 1)}`.
pub fn delta_closed_form(k: usize, c4: f64, c5: f64, c: f64, n: usize, theta: f64) -> f64 {
    clip(closed_form_coefficient(c4, c5, c, n, theta) * (c5 * k as f64).ln_1p())
}

/// `δ_k = min{1, (2 C √n / θ) Σ_{s<k} α_s β_s}`.
pub fn delta_partial_sum(schedule: &StepSchedule, k: usize, c: f64, n: usize, theta: f64) -> f64 {
    clip(2.0 * c * (n as f64).sqrt() / theta * schedule.product_partial_sum(k))
}

/// Largest change in output distribution of one stochastic quantization when
/// the input moves from `y` to `y_prime`: `min{1, Σ_j min{1, |y_j - y'_j|/θ}}`.
pub fn single_step_gap(y: &[f64], y_prime: &[f64], theta: f64) -> Result<f64> {
    check_len("single-step gap inputs", y.len(), y_prime.len())?;
    if !(theta > 0.0) {
        return Err(Error::config("theta", "must be positive"));
    }
    let total: f64 = y
        .iter()
        .zip(y_prime)
        .map(|(a, b)| ((a - b).abs() / theta).min(1.0))
        .sum();
    Ok(total.min(1.0))
}

/// Budget under dynamic scaling: the partial-sum sensitivity divided by `r_k θ`.
pub fn dsc_budget(k: usize, r_base: f64, schedule: &StepSchedule, c: f64, n: usize, theta: f64) -> Result<f64> {
    if !(r_base > 0.0 && r_base < 1.0) {
        return Err(Error::config("scale_decay", "must lie in (0, 1)"));
    }
    let sensitivity = 2.0 * c * (n as f64).sqrt() * schedule.product_partial_sum(k);
    Ok(clip(sensitivity / (r_base.powi(k as i32) * theta)))
}

/// Accounting rule used to fill a ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LedgerMode {
    ClosedForm { c4: f64, c5: f64 },
    PartialSum,
    Dsc { r_base: f64 },
}

impl LedgerMode {
    pub fn name(&self) -> &'static str {
        match self {
            LedgerMode::ClosedForm { .. } => "closed-form",
            LedgerMode::PartialSum => "partial-sum",
            LedgerMode::Dsc { .. } => "dsc",
        }
    }
}

/// `δ_k` for `k = 0..=T`, with the `ℓ1` sensitivity each value derives from.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyLedger {
    pub mode: LedgerMode,
    pub theta: f64,
    pub delta_series: Vec<f64>,
    /// Bound on `‖y_{i0,k} - y'_{i0,k}‖₁`, already divided by `r_k` in DSC mode.
    pub sensitivity_series: Vec<f64>,
}

impl PrivacyLedger {
    /// Evaluates `mode` at every `k ≤ horizon`. `c` bounds the gradients and `n`
    /// is the decision dimension.
    pub fn new(
        mode: LedgerMode,
        schedule: &StepSchedule,
        c: f64,
        n: usize,
        theta: f64,
        horizon: usize,
    ) -> Result<Self> {
        if !(theta > 0.0) || !(c > 0.0) {
            return Err(Error::config("privacy", "theta and C must be positive"));
        }
        let scale = 2.0 * c * (n as f64).sqrt();
        let mut sensitivity_series = Vec::with_capacity(horizon + 1);
        match mode {
            LedgerMode::ClosedForm { c4, c5 } => {
                if !(c4 > 0.0 && c5 > 0.0) {
                    return Err(Error::config("privacy.c4", "c4 and c5 must be positive"));
                }
                sensitivity_series.extend((0..=horizon).map(|k| scale * c4 / c5 * (c5 * k as f64).ln_1p()));
            }
            LedgerMode::PartialSum | LedgerMode::Dsc { .. } => {
                if let LedgerMode::Dsc { r_base } = mode {
                    if !(r_base > 0.0 && r_base < 1.0) {
                        return Err(Error::config("scale_decay", "must lie in (0, 1)"));
                    }
                }
                let mut sum = 0.0;
                for k in 0..=horizon {
                    let r = match mode {
                        LedgerMode::Dsc { r_base } => r_base.powi(k as i32),
                        _ => 1.0,
                    };
                    sensitivity_series.push(scale * sum / r);
                    sum += schedule.product(k);
                }
            }
        }
        let delta_series = sensitivity_series.iter().map(|s| clip(s / theta)).collect();
        Ok(Self {
            mode,
            theta,
            delta_series,
            sensitivity_series,
        })
    }

    pub fn delta(&self, k: usize) -> Option<f64> {
        self.delta_series.get(k).copied()
    }

    /// First iteration at which `δ_k = 1`.
    pub fn saturation(&self) -> Option<usize> {
        self.delta_series.iter().position(|&d| d >= 1.0)
    }
}

/// Two energy games that differ only in one player's comfort target.
#[derive(Debug, Clone)]
pub struct AdjacentPair {
    pub first: EnergyGame,
    pub second: EnergyGame,
    pub player: usize,
}

impl AdjacentPair {
    /// Replaces `s_player` by `shifted` in the second game.
    pub fn energy(params: EnergyGameParams, player: usize, shifted: f64) -> Result<Self> {
        if player >= params.players() {
            return Err(Error::Structure(format!("player {player} out of range")));
        }
        let mut other = params.clone();
        other.s[player] = shifted;
        Ok(Self {
            first: EnergyGame::new(params)?,
            second: EnergyGame::new(other)?,
            player,
        })
    }

    /// Players whose cost differs between the two games at a probe point.
    pub fn differing_players(&self) -> Vec<usize> {
        let [lo, hi] = self.first.params().bounds;
        let probes = [lo, 0.5 * (lo + hi), hi];
        (0..self.first.players())
            .filter(|&i| {
                probes.iter().any(|&x| {
                    probes.iter().any(|&v| self.first.cost(i, &[x], &[v]) != self.second.cost(i, &[x], &[v]))
                })
            })
            .collect()
    }
}

/// Trajectory comparison of two CP-DNES runs on an adjacent pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    /// Largest `|x_i - x'_i|` or `|y_i - y'_i|` over all `k` and `i ≠ i0`.
    pub max_other_gap: f64,
    /// `‖y_{i0,k} - y'_{i0,k}‖₁` per iteration.
    pub sensitivity: Vec<f64>,
    /// `2 C_k Σ_{s<k} α_s β_s` with `C_k` the largest gradient norm seen so far.
    pub bound: Vec<f64>,
}

/// Runs CP-DNES on both games of `pair` with the second run forced to observe
/// exactly the messages of the first.
pub fn coupled_run(
    pair: &AdjacentPair,
    topology: Arc<Topology>,
    schedule: StepSchedule,
    compressor: Compressor,
    iterations: usize,
    seed: u64,
) -> Result<CoupledRun> {
    let make = |game: &EnergyGame| EngineConfig {
        game: Arc::new(game.clone()),
        topology: topology.clone(),
        schedule,
        variant: Variant::CpDnes { compressor },
        iterations,
        initial: InitialRule::Midpoint,
    };
    let (cfg_a, cfg_b) = (make(&pair.first), make(&pair.second));
    cfg_a.validate()?;
    let mut a = cfg_a.initial_states()?;
    let mut b = cfg_b.initial_states()?;
    let i0 = pair.player;

    let mut max_other_gap = 0.0_f64;
    let mut sensitivity = vec![0.0];
    let mut bound = vec![0.0];
    let mut grad_max = 0.0_f64;
    let mut sum = 0.0;
    let mut g = [0.0];
    for k in 0..iterations {
        for (game, states) in [(&pair.first, &a), (&pair.second, &b)] {
            game.pseudo_gradient_into(i0, &states[i0].x, &states[i0].y, &mut g);
            grad_max = grad_max.max(g[0].abs());
        }
        let messages = cpdnes_messages(&a, k, &compressor, seed)?;
        let (step, mix) = (schedule.product(k), schedule.beta(k));
        a = apply_round(&a, k, &cfg_a, &messages, step, mix)?;
        b = apply_round(&b, k, &cfg_b, &messages, step, mix)?;
        sum += step;

        for i in (0..a.len()).filter(|&i| i != i0) {
            max_other_gap = max_other_gap.max(gap(&a[i], &b[i]));
        }
        sensitivity.push(a[i0].y.iter().zip(&b[i0].y).map(|(p, q)| (p - q).abs()).sum());
        bound.push(2.0 * grad_max * sum);
    }
    Ok(CoupledRun {
        max_other_gap,
        sensitivity,
        bound,
    })
}

fn gap(a: &PlayerState, b: &PlayerState) -> f64 {
    a.x.iter()
        .zip(&b.x)
        .chain(a.y.iter().zip(&b.y))
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}
