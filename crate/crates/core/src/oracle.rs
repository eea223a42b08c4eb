//! Centralized Nash equilibrium solvers used as ground truth.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{phi, AggregativeGame, DecisionProfile, EnergyGame, EnergyGameParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeMethod {
    Linear,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeSolution {
    pub x_star: DecisionProfile,
    /// `max_i ‖x_i - P_i(x_i - η φ_i(x))‖`.
    pub residual: f64,
    pub method: NeMethod,
    /// Set when the linear solve left the box interior and the fixed-point
    /// iteration produced the answer instead.
    pub fell_back: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Defaults to `m / L_φ²` from the game bounds.
    pub eta: Option<f64>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 100_000,
            eta: None,
        }
    }
}

fn default_eta<G: AggregativeGame + ?Sized>(game: &G) -> f64 {
    let b = game.bounds();
    b.m / (b.l_phi * b.l_phi)
}

/// Projected-gradient step `x - P(x - η Φ(x))`, stacked.
fn natural_map<G: AggregativeGame + ?Sized>(game: &G, x: &DecisionProfile, eta: f64) -> Result<Vec<f64>> {
    let grad = phi(game, x)?;
    let d = x.dim();
    let mut out = vec![0.0; x.len()];
    for i in 0..x.players() {
        let block = x.block(i);
        let mut stepped: Vec<f64> = block.iter().zip(&grad[i * d..(i + 1) * d]).map(|(v, g)| v - eta * g).collect();
        game.constraint(i).project_in_place(&mut stepped);
        for (c, (v, p)) in block.iter().zip(&stepped).enumerate() {
            out[i * d + c] = v - p;
        }
    }
    Ok(out)
}

fn block_residual(diff: &[f64], dim: usize) -> f64 {
    diff.chunks_exact(dim)
        .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Natural-map residual of `x` with step `eta` (zero exactly at the NE).
pub fn residual<G: AggregativeGame + ?Sized>(game: &G, x: &DecisionProfile, eta: f64) -> Result<f64> {
    Ok(block_residual(&natural_map(game, x, eta)?, x.dim()))
}

/// Iterates `x <- P(x - η Φ(x))` from the box midpoints.
pub fn ne_fixed_point<G: AggregativeGame + ?Sized>(game: &G, opts: &FixedPointOptions) -> Result<NeSolution> {
    let start: Vec<Vec<f64>> = (0..game.players()).map(|i| game.constraint(i).midpoint()).collect();
    ne_fixed_point_from(game, DecisionProfile::from_blocks(&start)?, opts)
}

/// [`ne_fixed_point`] from a given feasible start.
pub fn ne_fixed_point_from<G: AggregativeGame + ?Sized>(
    game: &G,
    start: DecisionProfile,
    opts: &FixedPointOptions,
) -> Result<NeSolution> {
    let eta = opts.eta.unwrap_or_else(|| default_eta(game));
    if !(eta > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::config("oracle", "eta and tol must be positive"));
    }
    let dim = start.dim();
    let mut x = start;
    for iterations in 0..=opts.max_iters {
        let diff = natural_map(game, &x, eta)?;
        let res = block_residual(&diff, dim);
        if res <= opts.tol {
            return Ok(NeSolution {
                x_star: x,
                residual: res,
                method: NeMethod::FixedPoint,
                fell_back: false,
                iterations,
            });
        }
        if iterations == opts.max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        let next: Vec<f64> = x.as_slice().iter().zip(&diff).map(|(v, d)| v - d).collect();
        x = DecisionProfile::new(x.players(), dim, next)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Solves `(2 + p0) x_i + p0 Σ_j x_j = 2 s_i - h` and checks the solution is
/// strictly inside the box; otherwise falls back to [`ne_fixed_point`].
pub fn ne_linear(params: &EnergyGameParams) -> Result<NeSolution> {
    let game = EnergyGame::new(params.clone())?;
    let n = params.players();
    let a = DMatrix::from_fn(n, n, |i, j| params.p0 + if i == j { 2.0 + params.p0 } else { 0.0 });
    let b = DVector::from_iterator(n, params.s.iter().map(|s| 2.0 * s - params.h_price));
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Structure("stationarity system is singular".into()))?;
    let [lo, hi] = params.bounds;
    if x.iter().all(|&v| lo < v && v < hi) {
        let x_star = DecisionProfile::scalar(x.iter().copied().collect())?;
        let residual = residual(&game, &x_star, default_eta(&game))?;
        return Ok(NeSolution {
            x_star,
            residual,
            method: NeMethod::Linear,
            fell_back: false,
            iterations: 0,
        });
    }
    log::info!("linear NE candidate leaves the box interior, using fixed-point iteration");
    let mut sol = ne_fixed_point(&game, &FixedPointOptions::default())?;
    sol.fell_back = true;
    Ok(sol)
}
