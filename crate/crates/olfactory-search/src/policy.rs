//! Heuristic policies: the infotaxis baseline and a greedy tracker.

use crate::belief::{successors, Belief, LikelihoodTables};
use crate::cases::CaseSpec;
use crate::env::{valid_actions, Action, ACTIONS};
use crate::error::{Error, Result};

/// Actions whose scores are within this absolute margin of the best are
/// treated as tied and resolved by the fixed order north, south, east, west.
/// This keeps symmetric situations deterministic despite floating-point
/// summation-order noise.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// A deterministic mapping from beliefs to valid moves.
pub trait Policy: Send + Sync {
    fn act(&self, b: &Belief) -> Result<Action>;
    fn name(&self) -> &str;
}

/// Picks the first action (in the fixed order) whose score is within
/// [`TIE_TOLERANCE`] of the best score. `better` says whether we minimize
/// or maximize.
pub(crate) fn argbest_with_ties(scored: &[(Action, f64)], minimize: bool) -> Action {
    debug_assert!(!scored.is_empty());
    let best = scored.iter().map(|&(_, v)| v).fold(
        if minimize {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        },
        |acc, v| {
            if minimize {
                acc.min(v)
            } else {
                acc.max(v)
            }
        },
    );
    for &(a, v) in scored {
        if (minimize && v <= best + TIE_TOLERANCE) || (!minimize && v >= best - TIE_TOLERANCE) {
            return a;
        }
    }
    scored[0].0
}

/// Infotaxis: move to minimize the expected entropy of the posterior belief,
/// counting the "source found" branch as zero entropy.
pub struct Infotaxis {
    tables: LikelihoodTables,
}

impl Infotaxis {
    pub fn new(case: &CaseSpec) -> Result<Self> {
        Ok(Infotaxis {
            tables: LikelihoodTables::new(&case.grid, &case.params)?,
        })
    }

    pub fn from_tables(tables: LikelihoodTables) -> Self {
        Infotaxis { tables }
    }

    /// Expected posterior entropy of taking `a` from `b`.
    pub fn expected_entropy(&self, b: &Belief, a: Action) -> Result<f64> {
        let set = successors(b, a, &self.tables)?;
        Ok(set
            .branches
            .iter()
            .map(|br| br.probability * br.belief.entropy())
            .sum())
    }
}

impl Policy for Infotaxis {
    fn act(&self, b: &Belief) -> Result<Action> {
        if b.is_terminal() {
            return Err(Error::InvalidParameter(
                "policy queried on terminal belief".into(),
            ));
        }
        // Minimize expected posterior entropy. A delta belief makes every
        // posterior a delta, so entropies can genuinely tie; ties resolve
        // first toward the larger chance of entering the source, then by
        // the fixed action order.
        let actions = valid_actions(b.agent_pos(), b.grid());
        let mut scored = Vec::with_capacity(actions.len());
        for a in actions {
            scored.push((a, self.expected_entropy(b, a)?, b.shift(a)?.origin_mass()));
        }
        let best_h = scored
            .iter()
            .map(|&(_, h, _)| h)
            .fold(f64::INFINITY, f64::min);
        let tied: Vec<(Action, f64)> = scored
            .iter()
            .filter(|&&(_, h, _)| h <= best_h + TIE_TOLERANCE)
            .map(|&(a, _, omega)| (a, omega))
            .collect();
        Ok(argbest_with_ties(&tied, false))
    }

    fn name(&self) -> &str {
        "infotaxis"
    }
}

/// Moves one step toward the belief's most likely source cell, breaking
/// ties by the fixed action order.
pub struct GreedyMap;

impl GreedyMap {
    fn argmax_offsets(b: &Belief) -> Vec<(isize, isize)> {
        let mut best = f64::NEG_INFINITY;
        for &p in b.probs() {
            if p > best {
                best = p;
            }
        }
        let w = b.width() as isize;
        let (hx, hy) = (b.grid().n_x as isize - 1, b.grid().n_y as isize - 1);
        b.probs()
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p == best)
            .map(|(i, _)| (i as isize % w - hx, i as isize / w - hy))
            .collect()
    }
}

impl Policy for GreedyMap {
    fn act(&self, b: &Belief) -> Result<Action> {
        if b.is_terminal() {
            return Err(Error::InvalidParameter(
                "policy queried on terminal belief".into(),
            ));
        }
        let targets = Self::argmax_offsets(b);
        let valid = valid_actions(b.agent_pos(), b.grid());
        for a in ACTIONS {
            if !valid.contains(&a) {
                continue;
            }
            let (dx, dy) = a.delta();
            let closes_in = targets
                .iter()
                .any(|&(ux, uy)| (ux - dx).abs() + (uy - dy).abs() < ux.abs() + uy.abs());
            if closes_in {
                return Ok(a);
            }
        }
        Ok(valid[0])
    }

    fn name(&self) -> &str {
        "greedy-map"
    }
}

/// Names accepted by [`heuristic_by_name`].
pub const HEURISTIC_NAMES: [&str; 2] = ["infotaxis", "greedy-map"];

/// Looks up a heuristic policy by its registered name.
pub fn heuristic_by_name(name: &str, case: &CaseSpec) -> Result<Box<dyn Policy>> {
    match name {
        "infotaxis" => Ok(Box::new(Infotaxis::new(case)?)),
        "greedy-map" => Ok(Box::new(GreedyMap)),
        other => Err(Error::UnknownPolicy(other.into())),
    }
}

/// A fixed-action stub useful in tests (circles between two moves).
pub struct TwoCycle;

impl Policy for TwoCycle {
    fn act(&self, b: &Belief) -> Result<Action> {
        let valid = valid_actions(b.agent_pos(), b.grid());
        let preferred = if (b.agent_pos().x + b.agent_pos().y).is_multiple_of(2) {
            Action::East
        } else {
            Action::West
        };
        Ok(if valid.contains(&preferred) {
            preferred
        } else {
            valid[0]
        })
    }

    fn name(&self) -> &str {
        "two-cycle"
    }
}
