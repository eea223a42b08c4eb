//! Aggregative games: each player's cost depends on its own decision and on the
//! network average of all decisions.
//!
//! A game exposes the two partial gradients of `f_i(x_i, v)` separately, and
//! [`AggregativeGame::pseudo_gradient_into`] assembles
//! `g_i(x_i, z_i) = ∇_x f_i + (1/N) ∇_v f_i` at `v = z_i`. Evaluated at
//! `z_i = h(x)` this is the gradient of the player's cost through both of its
//! arguments, `φ_i(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Per-coordinate interval constraint `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxConstraint {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_len("box bounds", lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::Structure("box constraint needs at least one coordinate".into()));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l < h) {
                return Err(Error::Structure(format!(
                    "box coordinate {j}: lower bound {l} must be below upper bound {h}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval on every coordinate.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Euclidean projection onto the box, in place. For a box this is a clamp.
    pub fn project_in_place(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// Projects `x` onto `bounds`.
pub fn project(x: &[f64], bounds: &BoxConstraint) -> Result<Vec<f64>> {
    check_len("projection input", bounds.dim(), x.len())?;
    let mut out = x.to_vec();
    bounds.project_in_place(&mut out);
    Ok(out)
}

/// Stacked decisions `col(x_1, ..., x_N)`, each block of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProfile {
    players: usize,
    dim: usize,
    values: Vec<f64>,
}

impl DecisionProfile {
    pub fn new(players: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if players == 0 || dim == 0 {
            return Err(Error::Structure("profile needs at least one player and one coordinate".into()));
        }
        check_len("decision profile", players * dim, values.len())?;
        Ok(Self { players, dim, values })
    }

    /// Builds a profile from one vector per player.
    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let dim = blocks.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(blocks.len() * dim);
        for b in blocks {
            check_len("profile block", dim, b.len())?;
            values.extend_from_slice(b);
        }
        Self::new(blocks.len(), dim, values)
    }

    /// Scalar decisions, one per player.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(values.len(), 1, values)
    }

    /// Every player holds the same vector `z`.
    pub fn replicate(players: usize, z: &[f64]) -> Result<Self> {
        let values = z.iter().copied().cycle().take(players * z.len()).collect();
        Self::new(players, z.len(), values)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Squared Euclidean distance to another profile of the same shape.
    pub fn sq_distance(&self, other: &DecisionProfile) -> Result<f64> {
        check_len("profile distance", self.len(), other.len())?;
        Ok(sq_distance(&self.values, &other.values))
    }
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `h(x) = (1/N) Σ x_i`.
pub fn aggregate(x: &DecisionProfile) -> Vec<f64> {
    block_mean(x.as_slice(), x.players(), x.dim())
}

pub(crate) fn block_mean(values: &[f64], players: usize, dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for block in values.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(block) {
            *m += v;
        }
    }
    let inv = 1.0 / players as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    mean
}

/// Constants for strong monotonicity and the Lipschitz/gradient bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameBounds {
    /// Strong monotonicity constant of the pseudo-gradient map.
    pub m: f64,
    /// Lipschitz constant of `φ`.
    pub l_phi: f64,
    /// Lipschitz constant of `g_i` in its aggregate argument.
    pub l_g: f64,
    /// Bound on `‖g_i‖` and `‖φ_i‖`.
    pub c: f64,
}

/// An N-player aggregative game over box-constrained decisions.
pub trait AggregativeGame: Send + Sync {
    fn players(&self) -> usize;

    fn dim(&self) -> usize;

    fn constraint(&self, i: usize) -> &BoxConstraint;

    /// `f_i(x_i, v)`.
    fn cost(&self, i: usize, x_i: &[f64], v: &[f64]) -> f64;

    /// `∇_{x_i} f_i(x_i, v)` written into `out`.
    fn grad_own(&self, i: usize, x_i: &[f64], v: &[f64], out: &mut [f64]);

    /// `∇_v f_i(x_i, v)` written into `out`.
    fn grad_aggregate(&self, i: usize, x_i: &[f64], v: &[f64], out: &mut [f64]);

    fn bounds(&self) -> GameBounds;

    /// `g_i(x_i, z_i)`, assembled from the two partials.
    fn pseudo_gradient_into(&self, i: usize, x_i: &[f64], z_i: &[f64], out: &mut [f64]) {
        let mut dv = vec![0.0; out.len()];
        self.grad_own(i, x_i, z_i, out);
        self.grad_aggregate(i, x_i, z_i, &mut dv);
        let inv_n = 1.0 / self.players() as f64;
        for (o, d) in out.iter_mut().zip(&dv) {
            *o += inv_n * d;
        }
    }
}

/// `g_i(x_i, z_i)` with shape checks.
pub fn pseudo_gradient<G: AggregativeGame + ?Sized>(
    game: &G,
    i: usize,
    x_i: &[f64],
    z_i: &[f64],
) -> Result<Vec<f64>> {
    if i >= game.players() {
        return Err(Error::Structure(format!(
            "player index {i} out of range for {} players",
            game.players()
        )));
    }
    check_len("pseudo-gradient decision", game.dim(), x_i.len())?;
    check_len("pseudo-gradient aggregate", game.dim(), z_i.len())?;
    let mut out = vec![0.0; game.dim()];
    game.pseudo_gradient_into(i, x_i, z_i, &mut out);
    Ok(out)
}

/// `G(x, z) = col(g_i(x_i, z_i))`.
pub fn game_map<G: AggregativeGame + ?Sized>(
    game: &G,
    x: &DecisionProfile,
    z: &DecisionProfile,
) -> Result<Vec<f64>> {
    check_len("game map players", game.players(), x.players())?;
    check_len("game map dimension", game.dim(), x.dim())?;
    check_len("game map estimates", x.len(), z.len())?;
    let mut out = vec![0.0; x.len()];
    for (i, chunk) in out.chunks_exact_mut(x.dim()).enumerate() {
        game.pseudo_gradient_into(i, x.block(i), z.block(i), chunk);
    }
    Ok(out)
}

/// `Φ(x) = G(x, 1 ⊗ h(x))`.
pub fn phi<G: AggregativeGame + ?Sized>(game: &G, x: &DecisionProfile) -> Result<Vec<f64>> {
    let z = DecisionProfile::replicate(x.players(), &aggregate(x))?;
    game_map(game, x, &z)
}

/// Player `i`'s cost as a function of the whole profile, `f_i(x_i, h(x))`.
pub fn profile_cost<G: AggregativeGame + ?Sized>(game: &G, i: usize, x: &DecisionProfile) -> f64 {
    game.cost(i, x.block(i), &aggregate(x))
}

/// Parameters of the HVAC energy-consumption game with linear pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGameParams {
    /// Comfort targets, one per user.
    pub s: Vec<f64>,
    /// Price slope.
    pub p0: f64,
    /// Price offset.
    pub h_price: f64,
    /// Consumption interval shared by all users.
    #[serde(rename = "box", default = "default_box")]
    pub bounds: [f64; 2],
}

fn default_box() -> [f64; 2] {
    [30.0, 50.0]
}

impl Default for EnergyGameParams {
    fn default() -> Self {
        Self {
            s: vec![56.0, 40.0, 43.0, 60.0, 50.0],
            p0: 0.05,
            h_price: 8.0,
            bounds: default_box(),
        }
    }
}

impl EnergyGameParams {
    pub fn players(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.s.is_empty() {
            return Err(Error::config("game.s", "needs at least one user"));
        }
        if !(self.p0 >= 0.0) || !self.p0.is_finite() {
            return Err(Error::config("game.p0", "must be a finite non-negative number"));
        }
        if !self.h_price.is_finite() || self.s.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("game", "targets and price offset must be finite"));
        }
        if !(self.bounds[0] < self.bounds[1]) {
            return Err(Error::config("game.box", "lower bound must be below upper bound"));
        }
        Ok(())
    }
}

/// Default gradient bound used for privacy accounting in the energy game.
pub const ENERGY_GRADIENT_BOUND: f64 = 15.0;

/// Monotonicity and Lipschitz constants of the energy game.
///
/// The Jacobian of `Φ` is `(2 + p0) I + p0 11ᵀ`, so `m = 2 + p0` and
/// `L_φ = 2 + p0 + N p0`; `g_i` depends on `z` through `N p0 z`, so `L_g = N p0`.
/// `c` is a configured constant, not derived.
pub fn energy_game_bounds(params: &EnergyGameParams, gradient_bound: f64) -> GameBounds {
    let n = params.players() as f64;
    GameBounds {
        m: 2.0 + params.p0,
        l_phi: 2.0 + params.p0 + n * params.p0,
        l_g: n * params.p0,
        c: gradient_bound,
    }
}

/// `f_i(x) = (x_i - s_i)^2 + (p0 Σ_j x_j + h) x_i`, written in aggregative form
/// `f_i(x_i, v) = (x_i - s_i)^2 + (p0 N v + h) x_i` with scalar decisions.
#[derive(Debug, Clone)]
pub struct EnergyGame {
    params: EnergyGameParams,
    constraint: BoxConstraint,
    gradient_bound: f64,
}

impl EnergyGame {
    pub fn new(params: EnergyGameParams) -> Result<Self> {
        Self::with_gradient_bound(params, ENERGY_GRADIENT_BOUND)
    }

    pub fn with_gradient_bound(params: EnergyGameParams, gradient_bound: f64) -> Result<Self> {
        params.validate()?;
        if !(gradient_bound > 0.0) {
            return Err(Error::config("game.gradient_bound", "must be positive"));
        }
        let constraint = BoxConstraint::uniform(1, params.bounds[0], params.bounds[1])?;
        Ok(Self {
            params,
            constraint,
            gradient_bound,
        })
    }

    pub fn params(&self) -> &EnergyGameParams {
        &self.params
    }

    fn n(&self) -> f64 {
        self.params.players() as f64
    }
}

impl AggregativeGame for EnergyGame {
    fn players(&self) -> usize {
        self.params.players()
    }

    fn dim(&self) -> usize {
        1
    }

    fn constraint(&self, _i: usize) -> &BoxConstraint {
        &self.constraint
    }

    fn cost(&self, i: usize, x_i: &[f64], v: &[f64]) -> f64 {
        let p = &self.params;
        let x = x_i[0];
        (x - p.s[i]).powi(2) + (p.p0 * self.n() * v[0] + p.h_price) * x
    }

    fn grad_own(&self, i: usize, x_i: &[f64], v: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = 2.0 * (x_i[0] - p.s[i]) + p.p0 * self.n() * v[0] + p.h_price;
    }

    fn grad_aggregate(&self, _i: usize, x_i: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = self.params.p0 * self.n() * x_i[0];
    }

    fn bounds(&self) -> GameBounds {
        energy_game_bounds(&self.params, self.gradient_bound)
    }

    /// Closed form `2(x_i - s_i) + N p0 z_i + h + p0 x_i`.
    fn pseudo_gradient_into(&self, i: usize, x_i: &[f64], z_i: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = 2.0 * (x_i[0] - p.s[i]) + self.n() * p.p0 * z_i[0] + p.h_price + p.p0 * x_i[0];
    }
}

/// Wraps a game so that every pseudo-gradient is rescaled to norm at most `c`.
#[derive(Debug, Clone)]
pub struct ClippedGame<G> {
    inner: G,
    c: f64,
}

impl<G: AggregativeGame> ClippedGame<G> {
    pub fn new(inner: G, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::config("game.gradient_clip", "must be positive"));
        }
        Ok(Self { inner, c })
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<G: AggregativeGame> AggregativeGame for ClippedGame<G> {
    fn players(&self) -> usize {
        self.inner.players()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn constraint(&self, i: usize) -> &BoxConstraint {
        self.inner.constraint(i)
    }

    fn cost(&self, i: usize, x_i: &[f64], v: &[f64]) -> f64 {
        self.inner.cost(i, x_i, v)
    }

    fn grad_own(&self, i: usize, x_i: &[f64], v: &[f64], out: &mut [f64]) {
        self.inner.grad_own(i, x_i, v, out)
    }

    fn grad_aggregate(&self, i: usize, x_i: &[f64], v: &[f64], out: &mut [f64]) {
        self.inner.grad_aggregate(i, x_i, v, out)
    }

    fn bounds(&self) -> GameBounds {
        GameBounds {
            c: self.c,
            ..self.inner.bounds()
        }
    }

    fn pseudo_gradient_into(&self, i: usize, x_i: &[f64], z_i: &[f64], out: &mut [f64]) {
        self.inner.pseudo_gradient_into(i, x_i, z_i, out);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.c {
            let scale = self.c / norm;
            out.iter_mut().for_each(|v| *v *= scale);
        }
    }
}
