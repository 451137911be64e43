//! Grid geometry, actions, deterministic transitions, and the stochastic
//! hit-observation model derived from odor dispersion in turbulence.
//!
//! The searcher lives on a finite `n_x x n_y` grid with the wind (when any)
//! blowing along +x. Each step it moves to an adjacent cell and then senses
//! a number of "hits" (odor detections). The mean number of hits depends on
//! the searcher's position relative to the source; the count itself is
//! Poisson with the tail above `h_max` absorbed into `h_max`.

use crate::bessel::k0;
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Absolute grid cell, `x` along the wind axis, `y` across it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

/// Finite search grid plus the searcher's fixed starting cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub agent_start: Cell,
}

impl GridSpec {
    pub fn new(n_x: usize, n_y: usize, agent_start: Cell) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::InvalidParameter(
                "grid must have at least one cell per axis".into(),
            ));
        }
        if n_x * n_y < 2 {
            return Err(Error::InvalidParameter(
                "1x1 grid leaves the searcher no valid move".into(),
            ));
        }
        if agent_start.x >= n_x || agent_start.y >= n_y {
            return Err(Error::InvalidParameter(format!(
                "agent start ({}, {}) outside {}x{} grid",
                agent_start.x, agent_start.y, n_x, n_y
            )));
        }
        Ok(GridSpec {
            n_x,
            n_y,
            agent_start,
        })
    }

    pub fn contains(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.n_x && (y as usize) < self.n_y
    }

    /// Number of relative states `(2 n_x - 1)(2 n_y - 1)`.
    pub fn state_count(&self) -> usize {
        (2 * self.n_x - 1) * (2 * self.n_y - 1)
    }
}

/// One of the four moves. East is the positive x (downwind) direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North,
    South,
    East,
    West,
}

/// Fixed action order used for iteration and deterministic tie-breaking.
pub const ACTIONS: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

impl Action {
    /// Unit displacement `(dx, dy)` of the move.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::North => (0, 1),
            Action::South => (0, -1),
            Action::East => (1, 0),
            Action::West => (-1, 0),
        }
    }

    pub fn reverse(self) -> Action {
        match self {
            Action::North => Action::South,
            Action::South => Action::North,
            Action::East => Action::West,
            Action::West => Action::East,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::North => "north",
            Action::South => "south",
            Action::East => "east",
            Action::West => "west",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        match name {
            "north" => Some(Action::North),
            "south" => Some(Action::South),
            "east" => Some(Action::East),
            "west" => Some(Action::West),
            _ => None,
        }
    }

    /// Index in the fixed action order.
    pub fn index(self) -> usize {
        match self {
            Action::North => 0,
            Action::South => 1,
            Action::East => 2,
            Action::West => 3,
        }
    }
}

/// Position of the searcher relative to the source, in cell units.
/// `(0, 0)` is the terminal state (searcher in the source cell).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RelState {
    pub dx: isize,
    pub dy: isize,
}

impl RelState {
    pub fn new(dx: isize, dy: isize) -> Self {
        RelState { dx, dy }
    }

    pub fn is_terminal(self) -> bool {
        self.dx == 0 && self.dy == 0
    }

    /// Euclidean distance to the source in cell units.
    pub fn radius(self) -> f64 {
        ((self.dx * self.dx + self.dy * self.dy) as f64).sqrt()
    }

    /// Manhattan distance to the source.
    pub fn manhattan(self) -> usize {
        (self.dx.unsigned_abs()) + (self.dy.unsigned_abs())
    }
}

/// What the searcher senses after a move: the terminal signal when it has
/// entered the source cell, otherwise a hit count in `[0, h_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observation {
    Terminal,
    Hits(u32),
}

/// Dimensionless parameterization of the hit model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelVariant {
    /// No wind; mean hits follow the two-dimensional dispersion formula
    /// `mu = R dt / ln(2 lambda/dx) * K0(|r| / (lambda/dx))`.
    Isotropic { lambda_over_dx: f64, r_dt: f64 },
    /// Mean wind along +x; mean hits follow the three-dimensional formula
    /// `mu = R_bar / |r| * exp(V_bar x / 2 - |r| / (lambda/dx))`.
    Windy {
        r_bar: f64,
        v_bar: f64,
        tau_bar: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModelParams {
    pub variant: ModelVariant,
    /// Largest reportable hit count; the Poisson tail is absorbed into it.
    pub h_max: u32,
}

impl ObservationModelParams {
    pub fn isotropic(lambda_over_dx: f64, r_dt: f64, h_max: u32) -> Result<Self> {
        if lambda_over_dx.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || r_dt.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return Err(Error::InvalidParameter(
                "isotropic model requires lambda/dx > 0 and R dt > 0".into(),
            ));
        }
        if lambda_over_dx <= 0.5 {
            // ln(2 lambda/dx) must be positive for the mean to be positive.
            return Err(Error::InvalidParameter(
                "isotropic model requires lambda/dx > 1/2".into(),
            ));
        }
        if h_max == 0 {
            return Err(Error::InvalidParameter("h_max must be >= 1".into()));
        }
        Ok(ObservationModelParams {
            variant: ModelVariant::Isotropic {
                lambda_over_dx,
                r_dt,
            },
            h_max,
        })
    }

    pub fn windy(r_bar: f64, v_bar: f64, tau_bar: f64, h_max: u32) -> Result<Self> {
        if r_bar.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || v_bar.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || tau_bar.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return Err(Error::InvalidParameter(
                "windy model requires R_bar, V_bar, tau_bar > 0".into(),
            ));
        }
        if h_max == 0 {
            return Err(Error::InvalidParameter("h_max must be >= 1".into()));
        }
        Ok(ObservationModelParams {
            variant: ModelVariant::Windy {
                r_bar,
                v_bar,
                tau_bar,
            },
            h_max,
        })
    }

    /// Dispersion length in cell units. For the windy variant this is
    /// `sqrt(tau_bar) / (V_bar sqrt(1 + tau_bar/4))`.
    pub fn lambda_over_dx(&self) -> f64 {
        match self.variant {
            ModelVariant::Isotropic { lambda_over_dx, .. } => lambda_over_dx,
            ModelVariant::Windy { v_bar, tau_bar, .. } => {
                tau_bar.sqrt() / (v_bar * (1.0 + 0.25 * tau_bar).sqrt())
            }
        }
    }
}

/// Mean number of hits sensed at relative position `state`.
///
/// Singular at the origin, which is never sensed (the search terminates
/// there), so the terminal state is rejected.
pub fn mean_hits(state: RelState, params: &ObservationModelParams) -> Result<f64> {
    if state.is_terminal() {
        return Err(Error::InvalidParameter(
            "mean hit rate is undefined at the source cell".into(),
        ));
    }
    let r = state.radius();
    let mu = match params.variant {
        ModelVariant::Isotropic {
            lambda_over_dx,
            r_dt,
        } => r_dt / (2.0 * lambda_over_dx).ln() * k0(r / lambda_over_dx),
        ModelVariant::Windy { r_bar, v_bar, .. } => {
            let lambda = params.lambda_over_dx();
            // lambda <= 2/V_bar always holds, so the exponent is <= 0 and
            // the mean stays bounded along the plume axis.
            r_bar / r * (0.5 * v_bar * state.dx as f64 - r / lambda).exp()
        }
    };
    debug_assert!(mu.is_finite() && mu >= 0.0);
    Ok(mu)
}

/// Truncated-Poisson hit probabilities `[Pr(0), ..., Pr(h_max)]`.
///
/// Mass above `h_max` is absorbed into the top bin so the vector always
/// sums to one.
pub fn hit_distribution(state: RelState, params: &ObservationModelParams) -> Result<Vec<f64>> {
    let mu = mean_hits(state, params)?;
    Ok(truncated_poisson(mu, params.h_max))
}

/// `[Pr(0), ..., Pr(h_max)]` for a Poisson of mean `mu` with the tail
/// absorbed at `h_max`.
pub fn truncated_poisson(mu: f64, h_max: u32) -> Vec<f64> {
    let mut probs = Vec::with_capacity(h_max as usize + 1);
    let mut term = (-mu).exp();
    let mut below = 0.0;
    for h in 0..h_max {
        probs.push(term);
        below += term;
        term *= mu / (h + 1) as f64;
    }
    probs.push((1.0 - below).max(0.0));
    probs
}

/// Deterministic move; errors when the move would leave the grid.
pub fn transition(agent_pos: Cell, action: Action, grid: &GridSpec) -> Result<Cell> {
    let (dx, dy) = action.delta();
    let nx = agent_pos.x as isize + dx;
    let ny = agent_pos.y as isize + dy;
    if !grid.contains(nx, ny) {
        return Err(Error::InvalidAction {
            action: action.name(),
            x: agent_pos.x,
            y: agent_pos.y,
        });
    }
    Ok(Cell::new(nx as usize, ny as usize))
}

/// Actions whose target cell stays inside the grid. Never empty for grids
/// with more than one cell.
pub fn valid_actions(agent_pos: Cell, grid: &GridSpec) -> Vec<Action> {
    ACTIONS
        .iter()
        .copied()
        .filter(|a| {
            let (dx, dy) = a.delta();
            grid.contains(agent_pos.x as isize + dx, agent_pos.y as isize + dy)
        })
        .collect()
}

/// Draws the observation sensed at `state`: the terminal signal at the
/// source cell, otherwise a hit count from the truncated Poisson.
pub fn sample_observation<R: Rng>(
    state: RelState,
    params: &ObservationModelParams,
    rng: &mut R,
) -> Observation {
    if state.is_terminal() {
        return Observation::Terminal;
    }
    let probs = hit_distribution(state, params).expect("non-terminal state");
    Observation::Hits(sample_index(&probs, rng) as u32)
}

/// Draws an index proportionally to `weights` (assumed to sum to ~1).
pub(crate) fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
