//! Synchronous NE-seeking engines over a simulated network.
//!
//! Every engine shares the same round structure. Each player first broadcasts
//! a message derived from its aggregate estimate `y_i`. Then every player
//! takes a projected pseudo-gradient step on `x_i` and updates
//!
//! ```text
//! y_i <- y_i + w_k Σ_j w_ij (recv_j - own_i) + (x_i_new - x_i)
//! ```
//!
//! `recv_j` is what player `i` hears from `j` and `own_i` is the value it uses
//! for itself. The engines differ only in those two values:
//!
//! | engine        | `recv_j`                 | `own_i`          | step / mix weight |
//! |---------------|--------------------------|------------------|-------------------|
//! | CP-DNES       | `C(y_j)`                 | `C(y_i)`         | `α_kβ_k` / `β_k`  |
//! | conventional  | `y_j`                    | `y_i`            | `α_kβ_k` / `β_k`, or `η` / 1 |
//! | NP-DNES       | `y_j + ζ_j`, `ζ ~ N(0, ρ^k)` | `y_i`        | `α_kβ_k` / `β_k`  |
//! | DSC-DNES      | `r_k C(y_j / r_k)`       | `r_k C(y_i / r_k)` | `α_kβ_k` / `β_k` |
//!
//! When `own_i` is the same value the neighbors receive, the network average of
//! `y` tracks the average of `x` exactly; the NP-DNES perturbation breaks that.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::compress::{round_stochastic, Compressor, QuantizerParams, FLOAT_BITS};
use crate::error::{check_len, Error, Result};
use crate::game::{block_mean, sq_distance, AggregativeGame};
use crate::network::Topology;
use crate::schedule::StepSchedule;
use crate::stream::substream;

/// Decision and aggregate estimate held by one player.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PlayerState {
    /// Starts with `y_0 = x_0`.
    pub fn new(x: Vec<f64>) -> Self {
        let y = x.clone();
        Self { x, y }
    }
}

/// Step rule of the uncompressed baseline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConventionalStep {
    /// Gradient step `α_kβ_k`, consensus weight `β_k`.
    #[default]
    Schedule,
    /// Gradient step `eta`, unit consensus weight.
    Constant { eta: f64 },
}

/// What happens when the scaled DSC input leaves the quantizer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverflowPolicy {
    /// Abort the run with a numeric fault.
    #[default]
    Fault,
    /// Clamp to the outermost grid point and count the event.
    Saturate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DscParams {
    /// `r` in `r_k = r^k`.
    pub scale_decay: f64,
    pub quantizer: QuantizerParams,
    pub overflow: OverflowPolicy,
}

impl DscParams {
    pub fn scale(&self, k: usize) -> f64 {
        self.scale_decay.powi(k as i32)
    }
}

/// Engine variant together with the parameters only that variant uses.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    CpDnes { compressor: Compressor },
    Conventional { step: ConventionalStep },
    NpDnes { noise_decay: f64 },
    DscDnes(DscParams),
}

impl Variant {
    /// Tag used in configs.
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::CpDnes { .. } => "cp-dnes",
            Variant::Conventional { .. } => "conventional",
            Variant::NpDnes { .. } => "np-dnes",
            Variant::DscDnes(_) => "dsc-dnes",
        }
    }

    /// Whether the network average of `y` equals that of `x` at every round.
    pub fn preserves_average(&self) -> bool {
        !matches!(self, Variant::NpDnes { .. })
    }
}

/// How `x_0` is chosen.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialRule {
    /// Center of each player's box.
    #[default]
    Midpoint,
    /// Stacked profile `col(x_1,0, ..., x_N,0)`.
    Explicit { values: Vec<f64> },
}

#[derive(Clone)]
pub struct EngineConfig {
    pub game: Arc<dyn AggregativeGame>,
    pub topology: Arc<Topology>,
    pub schedule: StepSchedule,
    pub variant: Variant,
    pub iterations: usize,
    pub initial: InitialRule,
}

impl std::fmt::Debug for EngineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EngineConfig")
            .field("players", &self.game.players())
            .field("dim", &self.game.dim())
            .field("schedule", &self.schedule)
            .field("variant", &self.variant)
            .field("iterations", &self.iterations)
            .field("initial", &self.initial)
            .finish()
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        check_len("topology nodes vs players", self.game.players(), self.topology.nodes())?;
        match &self.variant {
            Variant::NpDnes { noise_decay } if !(*noise_decay > 0.0 && *noise_decay < 1.0) => {
                Err(Error::config("noise_decay", "must lie in (0, 1)"))
            }
            Variant::DscDnes(p) if !(p.scale_decay > 0.0 && p.scale_decay < 1.0) => {
                Err(Error::config("scale_decay", "must lie in (0, 1)"))
            }
            Variant::Conventional {
                step: ConventionalStep::Constant { eta },
            } if !(*eta > 0.0) => Err(Error::config("eta", "must be positive")),
            _ => Ok(()),
        }
    }

    pub fn initial_states(&self) -> Result<Vec<PlayerState>> {
        let (n, d) = (self.game.players(), self.game.dim());
        match &self.initial {
            InitialRule::Midpoint => Ok((0..n).map(|i| PlayerState::new(self.game.constraint(i).midpoint())).collect()),
            InitialRule::Explicit { values } => {
                if values.len() != n * d {
                    return Err(Error::config(
                        "initial.values",
                        format!("expected {} values, got {}", n * d, values.len()),
                    ));
                }
                values
                    .chunks_exact(d)
                    .enumerate()
                    .map(|(i, x)| {
                        if self.game.constraint(i).contains(x) {
                            Ok(PlayerState::new(x.to_vec()))
                        } else {
                            Err(Error::config("initial.values", format!("player {i} starts outside its box")))
                        }
                    })
                    .collect()
            }
        }
    }
}

/// What every player broadcast in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    /// `recv` values, stacked by sender.
    pub sent: Vec<f64>,
    /// `own` values, stacked by player.
    pub own: Vec<f64>,
    pub bits: u64,
    /// DSC coordinates clamped under [`OverflowPolicy::Saturate`].
    pub saturated: u64,
}

/// Result of one synchronous round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub states: Vec<PlayerState>,
    pub bits: u64,
    pub saturated: u64,
}

fn estimates(states: &[PlayerState]) -> Vec<f64> {
    states.iter().flat_map(|s| s.y.iter().copied()).collect()
}

fn check_states(cfg: &EngineConfig, states: &[PlayerState]) -> Result<()> {
    check_len("player states", cfg.game.players(), states.len())?;
    for s in states {
        check_len("player decision", cfg.game.dim(), s.x.len())?;
        check_len("player estimate", cfg.game.dim(), s.y.len())?;
    }
    Ok(())
}

/// Each player's compressed estimate, drawn once and shared with all neighbors.
pub fn cpdnes_messages(
    states: &[PlayerState],
    k: usize,
    compressor: &Compressor,
    seed: u64,
) -> Result<Messages> {
    let dim = states.first().map_or(0, |s| s.y.len());
    let mut sent = vec![0.0; states.len() * dim];
    let mut bits = 0;
    for (i, (s, out)) in states.iter().zip(sent.chunks_exact_mut(dim)).enumerate() {
        let mut rng = substream(seed, i, k);
        bits += compressor.compress_into(&s.y, &mut rng, out)?;
    }
    Ok(Messages {
        own: sent.clone(),
        sent,
        bits,
        saturated: 0,
    })
}

fn plain_messages(states: &[PlayerState]) -> Messages {
    let sent = estimates(states);
    Messages {
        own: sent.clone(),
        bits: sent.len() as u64 * FLOAT_BITS as u64,
        sent,
        saturated: 0,
    }
}

/// Noisy broadcasts of NP-DNES; players keep their own noiseless estimate.
pub fn npdnes_messages(states: &[PlayerState], k: usize, noise_decay: f64, seed: u64) -> Messages {
    let own = estimates(states);
    let std = noise_decay.powi(k as i32).sqrt();
    let dim = states.first().map_or(0, |s| s.y.len());
    let mut sent = own.clone();
    for (i, block) in sent.chunks_exact_mut(dim).enumerate() {
        let mut rng = substream(seed, i, k);
        for v in block {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += std * z;
        }
    }
    Messages {
        bits: own.len() as u64 * FLOAT_BITS as u64,
        own,
        sent,
        saturated: 0,
    }
}

/// Scaled quantized broadcasts `r_k C(y / r_k)` of DSC-DNES.
pub fn dscdnes_messages(states: &[PlayerState], k: usize, p: &DscParams, seed: u64) -> Result<Messages> {
    let r = p.scale(k);
    let q = &p.quantizer;
    let limit = q.limit();
    let edge = limit - q.theta();
    let mut sent = estimates(states);
    let dim = states.first().map_or(0, |s| s.y.len());
    let mut saturated = 0;
    for (i, block) in sent.chunks_exact_mut(dim).enumerate() {
        let mut rng = substream(seed, i, k);
        for (j, v) in block.iter_mut().enumerate() {
            let mut scaled = *v / r;
            if !(scaled.abs() < limit) {
                match p.overflow {
                    OverflowPolicy::Fault => {
                        return Err(Error::NumericFault {
                            iteration: k,
                            reason: format!(
                                "player {i} coordinate {j}: scaled input {scaled} exceeds the {}-bit range {limit}",
                                q.bits()
                            ),
                        })
                    }
                    OverflowPolicy::Saturate => {
                        saturated += 1;
                        scaled = scaled.clamp(-edge, edge);
                    }
                }
            }
            *v = r * round_stochastic(scaled, q.theta(), rand::Rng::random(&mut rng));
        }
    }
    Ok(Messages {
        own: sent.clone(),
        bits: sent.len() as u64 * q.bits() as u64,
        sent,
        saturated,
    })
}

/// Applies the decision and estimate updates given this round's messages.
pub fn apply_round(
    states: &[PlayerState],
    k: usize,
    cfg: &EngineConfig,
    messages: &Messages,
    step: f64,
    mix: f64,
) -> Result<Vec<PlayerState>> {
    let dim = cfg.game.dim();
    let mut grad = vec![0.0; dim];
    let mut next = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        cfg.game.pseudo_gradient_into(i, &s.x, &s.y, &mut grad);
        let mut x: Vec<f64> = s.x.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        cfg.game.constraint(i).project_in_place(&mut x);

        let own = &messages.own[i * dim..(i + 1) * dim];
        let mut y = s.y.clone();
        for &(j, w) in cfg.topology.neighbors(i) {
            let recv = &messages.sent[j * dim..(j + 1) * dim];
            for c in 0..dim {
                y[c] += mix * w * (recv[c] - own[c]);
            }
        }
        for c in 0..dim {
            y[c] += x[c] - s.x[c];
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NumericFault {
                iteration: k,
                reason: format!("player {i} state became non-finite"),
            });
        }
        next.push(PlayerState { x, y });
    }
    Ok(next)
}

fn scheduled(states: &[PlayerState], k: usize, cfg: &EngineConfig, messages: Messages) -> Result<StepOutcome> {
    let states = apply_round(states, k, cfg, &messages, cfg.schedule.product(k), cfg.schedule.beta(k))?;
    Ok(StepOutcome {
        states,
        bits: messages.bits,
        saturated: messages.saturated,
    })
}

/// One CP-DNES round: compressed estimates, step `α_kβ_k`, mixing weight `β_k`.
pub fn cpdnes_step(
    states: &[PlayerState],
    k: usize,
    cfg: &EngineConfig,
    compressor: &Compressor,
    seed: u64,
) -> Result<StepOutcome> {
    check_states(cfg, states)?;
    let messages = cpdnes_messages(states, k, compressor, seed)?;
    scheduled(states, k, cfg, messages)
}

/// One round of uncompressed dynamic-average-consensus NE seeking.
pub fn conventional_step(
    states: &[PlayerState],
    k: usize,
    cfg: &EngineConfig,
    step: ConventionalStep,
) -> Result<StepOutcome> {
    check_states(cfg, states)?;
    let messages = plain_messages(states);
    match step {
        ConventionalStep::Schedule => scheduled(states, k, cfg, messages),
        ConventionalStep::Constant { eta } => Ok(StepOutcome {
            states: apply_round(states, k, cfg, &messages, eta, 1.0)?,
            bits: messages.bits,
            saturated: 0,
        }),
    }
}

/// Conventional round in which every transmitted estimate carries Gaussian
/// noise of per-coordinate variance `noise_decay^k`.
pub fn npdnes_step(
    states: &[PlayerState],
    k: usize,
    cfg: &EngineConfig,
    noise_decay: f64,
    seed: u64,
) -> Result<StepOutcome> {
    check_states(cfg, states)?;
    scheduled(states, k, cfg, npdnes_messages(states, k, noise_decay, seed))
}

/// CP-DNES round with dynamically scaled compression `r_k C(y / r_k)`.
pub fn dscdnes_step(
    states: &[PlayerState],
    k: usize,
    cfg: &EngineConfig,
    params: &DscParams,
    seed: u64,
) -> Result<StepOutcome> {
    check_states(cfg, states)?;
    let messages = dscdnes_messages(states, k, params, seed)?;
    scheduled(states, k, cfg, messages)
}

/// Dispatches one round to the configured variant.
pub fn step(states: &[PlayerState], k: usize, cfg: &EngineConfig, seed: u64) -> Result<StepOutcome> {
    match &cfg.variant {
        Variant::CpDnes { compressor } => cpdnes_step(states, k, cfg, compressor, seed),
        Variant::Conventional { step } => conventional_step(states, k, cfg, *step),
        Variant::NpDnes { noise_decay } => npdnes_step(states, k, cfg, *noise_decay, seed),
        Variant::DscDnes(p) => dscdnes_step(states, k, cfg, p, seed),
    }
}

/// Per-iteration decision record.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Stacked profile at every iteration.
    Profiles(Vec<Vec<f64>>),
    /// `‖x_k - x*‖²` at every iteration.
    SquaredError(Vec<f64>),
}

impl Trajectory {
    pub fn len(&self) -> usize {
        match self {
            Trajectory::Profiles(v) => v.len(),
            Trajectory::SquaredError(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn squared_errors(&self) -> Option<&[f64]> {
        match self {
            Trajectory::SquaredError(v) => Some(v),
            Trajectory::Profiles(_) => None,
        }
    }
}

/// Everything recorded during one run; all series have `iterations + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub iterations: usize,
    pub trajectory: Trajectory,
    /// Total bits sent by all players up to iteration `k`.
    pub bits_cum: Vec<u64>,
    /// `‖mean(y_k) - mean(x_k)‖∞`.
    pub average_residual: Vec<f64>,
    /// `‖y_k - 1 ⊗ mean(x_k)‖²`.
    pub disagreement: Vec<f64>,
    pub saturated: u64,
    pub final_states: Vec<PlayerState>,
}

impl RunRecord {
    pub fn max_average_residual(&self) -> f64 {
        self.average_residual.iter().copied().fold(0.0, f64::max)
    }
}

struct Recorder {
    players: usize,
    dim: usize,
    reference: Option<Vec<f64>>,
    trajectory: Trajectory,
    average_residual: Vec<f64>,
    disagreement: Vec<f64>,
}

impl Recorder {
    fn record(&mut self, states: &[PlayerState]) {
        let xs: Vec<f64> = states.iter().flat_map(|s| s.x.iter().copied()).collect();
        let ys = estimates(states);
        let mx = block_mean(&xs, self.players, self.dim);
        let my = block_mean(&ys, self.players, self.dim);
        self.average_residual
            .push(mx.iter().zip(&my).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        self.disagreement.push(
            ys.chunks_exact(self.dim)
                .map(|y| sq_distance(y, &mx))
                .sum(),
        );
        match (&mut self.trajectory, &self.reference) {
            (Trajectory::SquaredError(v), Some(r)) => v.push(sq_distance(&xs, r)),
            (Trajectory::Profiles(v), _) => v.push(xs),
            (Trajectory::SquaredError(_), None) => unreachable!("squared errors need a reference"),
        }
    }
}

/// Executes `cfg.iterations` rounds from the configured initial profile.
///
/// With a `reference` profile the trajectory stores `‖x_k - x*‖²`, otherwise
/// full profiles. Deterministic in `(cfg, seed)`.
pub fn run(cfg: &EngineConfig, seed: u64, reference: Option<&[f64]>) -> Result<RunRecord> {
    cfg.validate()?;
    let (players, dim) = (cfg.game.players(), cfg.game.dim());
    if let Some(r) = reference {
        check_len("reference profile", players * dim, r.len())?;
    }
    let mut states = cfg.initial_states()?;
    let capacity = cfg.iterations + 1;
    let mut rec = Recorder {
        players,
        dim,
        reference: reference.map(<[f64]>::to_vec),
        trajectory: match reference {
            Some(_) => Trajectory::SquaredError(Vec::with_capacity(capacity)),
            None => Trajectory::Profiles(Vec::with_capacity(capacity)),
        },
        average_residual: Vec::with_capacity(capacity),
        disagreement: Vec::with_capacity(capacity),
    };
    rec.record(&states);

    let mut bits_cum = Vec::with_capacity(capacity);
    bits_cum.push(0u64);
    let mut total_bits = 0u64;
    let mut saturated = 0u64;
    for k in 0..cfg.iterations {
        let out = step(&states, k, cfg, seed).map_err(|e| match e {
            Error::NumericFault { .. } => e,
            other => Error::NumericFault {
                iteration: k,
                reason: other.to_string(),
            },
        })?;
        states = out.states;
        total_bits += out.bits;
        saturated += out.saturated;
        bits_cum.push(total_bits);
        rec.record(&states);
    }

    Ok(RunRecord {
        seed,
        iterations: cfg.iterations,
        trajectory: rec.trajectory,
        bits_cum,
        average_residual: rec.average_residual,
        disagreement: rec.disagreement,
        saturated,
        final_states: states,
    })
}
