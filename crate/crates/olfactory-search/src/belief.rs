//! Exact Bayesian belief filtering over source locations.
//!
//! The belief is a dense probability array over the source's possible
//! position relative to the searcher. For an `n_x x n_y` grid the array has
//! `(2 n_x - 1) x (2 n_y - 1)` entries indexed by the offset
//! `u = source - agent`, with the center `(0, 0)` meaning "source under the
//! searcher" (the terminal situation). Offsets pointing outside the grid for
//! the current searcher position carry zero probability, so roughly three
//! quarters of the entries are structural zeros.
//!
//! All operations return fresh beliefs; nothing here mutates shared state.

use crate::cases::CaseSpec;
use crate::env::{
    hit_distribution, transition, valid_actions, Action, Cell, GridSpec, Observation,
    ObservationModelParams, RelState,
};
use crate::error::{Error, Result};
use rand::Rng;

/// Tolerance on belief normalization; drift beyond this is a bug, not
/// something to be silently fixed.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Precomputed hit likelihoods `Pr(h | source offset u)` for one
/// observation model, laid out like the belief array.
#[derive(Debug, Clone)]
pub struct LikelihoodTables {
    h_max: u32,
    /// `tables[h][idx]`; the origin entry is zero and never read.
    tables: Vec<Vec<f64>>,
}

impl LikelihoodTables {
    pub fn new(grid: &GridSpec, params: &ObservationModelParams) -> Result<Self> {
        let (w, h) = (2 * grid.n_x - 1, 2 * grid.n_y - 1);
        let mut tables = vec![vec![0.0; w * h]; params.h_max as usize + 1];
        for uy in -(grid.n_y as isize - 1)..=(grid.n_y as isize - 1) {
            for ux in -(grid.n_x as isize - 1)..=(grid.n_x as isize - 1) {
                if ux == 0 && uy == 0 {
                    continue;
                }
                // The searcher sits at -u relative to a source at offset u.
                let probs = hit_distribution(RelState::new(-ux, -uy), params)?;
                let idx = (uy + grid.n_y as isize - 1) as usize * w
                    + (ux + grid.n_x as isize - 1) as usize;
                for (hh, p) in probs.iter().enumerate() {
                    tables[hh][idx] = *p;
                }
            }
        }
        Ok(LikelihoodTables {
            h_max: params.h_max,
            tables,
        })
    }

    pub fn h_max(&self) -> u32 {
        self.h_max
    }

    pub fn likelihood(&self, h: u32) -> &[f64] {
        &self.tables[h as usize]
    }
}

/// Posterior over source offsets, tied to the searcher's current cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    grid: GridSpec,
    agent_pos: Cell,
    probs: Vec<f64>,
}

impl Belief {
    /// Array width `(2 n_x - 1)`.
    pub fn width(&self) -> usize {
        2 * self.grid.n_x - 1
    }

    /// Array height `(2 n_y - 1)`.
    pub fn height(&self) -> usize {
        2 * self.grid.n_y - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn agent_pos(&self) -> Cell {
        self.agent_pos
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn index_of(&self, ux: isize, uy: isize) -> usize {
        debug_assert!(ux.unsigned_abs() < self.grid.n_x && uy.unsigned_abs() < self.grid.n_y);
        (uy + self.grid.n_y as isize - 1) as usize * self.width()
            + (ux + self.grid.n_x as isize - 1) as usize
    }

    /// Probability that the source sits at offset `(ux, uy)` from the searcher.
    pub fn prob(&self, ux: isize, uy: isize) -> f64 {
        self.probs[self.index_of(ux, uy)]
    }

    /// Mass at the center cell, i.e. the probability that the searcher is
    /// already on the source.
    pub fn origin_mass(&self) -> f64 {
        self.prob(0, 0)
    }

    /// Whether offset `(ux, uy)` is consistent with an in-grid source.
    pub fn in_support(&self, ux: isize, uy: isize) -> bool {
        self.grid.contains(
            self.agent_pos.x as isize + ux,
            self.agent_pos.y as isize + uy,
        )
    }

    /// The terminal belief: all mass at the center.
    pub fn terminal(grid: GridSpec, agent_pos: Cell) -> Belief {
        let mut b = Belief {
            grid,
            agent_pos,
            probs: vec![0.0; grid.state_count()],
        };
        let idx = b.index_of(0, 0);
        b.probs[idx] = 1.0;
        b
    }

    pub fn is_terminal(&self) -> bool {
        self.origin_mass() == 1.0
    }

    /// Uniform belief over all in-grid source positions except the
    /// searcher's own cell.
    pub fn uniform_excluding_origin(grid: GridSpec, agent_pos: Cell) -> Belief {
        let mut b = Belief {
            grid,
            agent_pos,
            probs: vec![0.0; grid.state_count()],
        };
        let mut count = 0usize;
        for sy in 0..grid.n_y {
            for sx in 0..grid.n_x {
                if sx == agent_pos.x && sy == agent_pos.y {
                    continue;
                }
                count += 1;
            }
        }
        let p = 1.0 / count as f64;
        for sy in 0..grid.n_y {
            for sx in 0..grid.n_x {
                if sx == agent_pos.x && sy == agent_pos.y {
                    continue;
                }
                let idx = b.index_of(
                    sx as isize - agent_pos.x as isize,
                    sy as isize - agent_pos.y as isize,
                );
                b.probs[idx] = p;
            }
        }
        b
    }

    /// Builds a belief from raw parts, validating support and normalization.
    pub fn from_parts(grid: GridSpec, agent_pos: Cell, probs: Vec<f64>) -> Result<Belief> {
        if probs.len() != grid.state_count() {
            return Err(Error::ShapeMismatch {
                expected: grid.state_count(),
                got: probs.len(),
            });
        }
        let b = Belief {
            grid,
            agent_pos,
            probs,
        };
        b.check_mass()?;
        Ok(b)
    }

    /// Total probability mass (should always be 1 within [`MASS_TOLERANCE`]).
    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn check_mass(&self) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "belief mass {mass} drifted beyond tolerance"
            )));
        }
        if self.probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::NonFinite("belief entries".into()));
        }
        Ok(())
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for &p in &self.probs {
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        h
    }

    /// Expected Manhattan distance between searcher and source.
    pub fn expected_manhattan(&self) -> f64 {
        let mut d = 0.0;
        let w = self.width() as isize;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                let ux = i as isize % w - (self.grid.n_x as isize - 1);
                let uy = i as isize / w - (self.grid.n_y as isize - 1);
                d += p * (ux.abs() + uy.abs()) as f64;
            }
        }
        d
    }

    /// Moves the searcher one cell and translates the array so offsets stay
    /// relative to the new position. No mass is created or destroyed.
    pub fn shift(&self, action: Action) -> Result<Belief> {
        let new_pos = transition(self.agent_pos, action, &self.grid)?;
        let (dx, dy) = action.delta();
        let w = self.width();
        let h = self.height();
        let mut probs = vec![0.0; self.probs.len()];
        // u' = u - delta: entry at (ix, iy) moves to (ix - dx, iy - dy).
        for iy in 0..h {
            let ty = iy as isize - dy;
            if ty < 0 || ty >= h as isize {
                debug_assert!((0..w).all(|ix| self.probs[iy * w + ix] == 0.0));
                continue;
            }
            for ix in 0..w {
                let tx = ix as isize - dx;
                let p = self.probs[iy * w + ix];
                if tx < 0 || tx >= w as isize {
                    debug_assert!(p == 0.0, "support mass would exit the array");
                    continue;
                }
                probs[ty as usize * w + tx as usize] = p;
            }
        }
        Ok(Belief {
            grid: self.grid,
            agent_pos: new_pos,
            probs,
        })
    }

    /// Bayes update for observation `o`.
    ///
    /// The terminal observation collapses the belief; a hit count reweights
    /// by its likelihood, zeroes the center, and renormalizes. An
    /// observation with zero marginal likelihood is an error.
    pub fn bayes_update(&self, o: Observation, tables: &LikelihoodTables) -> Result<Belief> {
        match o {
            Observation::Terminal => Ok(Belief::terminal(self.grid, self.agent_pos)),
            Observation::Hits(h) => {
                if h > tables.h_max {
                    return Err(Error::InvalidParameter(format!(
                        "hit count {h} exceeds h_max {}",
                        tables.h_max
                    )));
                }
                let like = tables.likelihood(h);
                let mut probs: Vec<f64> =
                    self.probs.iter().zip(like).map(|(&p, &l)| p * l).collect();
                let center = self.index_of(0, 0);
                probs[center] = 0.0;
                let marginal: f64 = probs.iter().sum();
                if marginal <= 0.0 {
                    return Err(Error::ImpossibleObservation);
                }
                let inv = 1.0 / marginal;
                for p in &mut probs {
                    *p *= inv;
                }
                Ok(Belief {
                    grid: self.grid,
                    agent_pos: self.agent_pos,
                    probs,
                })
            }
        }
    }

    /// Key for near-duplicate detection: probabilities rounded on a 1e-9
    /// grid plus the searcher's valid-action mask.
    pub fn dedup_key(&self) -> u64 {
        let mut hash = crate::util::FNV_OFFSET;
        for &p in &self.probs {
            let q = (p * 1e9).round() as i64;
            hash = crate::util::fnv1a64_push(hash, &q.to_le_bytes());
        }
        let mask: u8 = valid_actions(self.agent_pos, &self.grid)
            .iter()
            .fold(0, |m, a| m | 1 << a.index());
        crate::util::fnv1a64_push(hash, &[mask])
    }

    /// Serializes to a header `(n_x, n_y, agent_x, agent_y)` followed by the
    /// row-major probability block. Round-trips bit-exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.probs.len());
        for v in [
            self.grid.n_x as u32,
            self.grid.n_y as u32,
            self.agent_pos.x as u32,
            self.agent_pos.y as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &p in &self.probs {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], agent_start: Cell) -> Result<Belief> {
        if bytes.len() < 16 {
            return Err(Error::Artifact("belief block too short".into()));
        }
        let mut u32s = [0u32; 4];
        for (i, v) in u32s.iter_mut().enumerate() {
            *v = u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        }
        let grid = GridSpec::new(u32s[0] as usize, u32s[1] as usize, agent_start)?;
        let agent_pos = Cell::new(u32s[2] as usize, u32s[3] as usize);
        let n = grid.state_count();
        if bytes.len() != 16 + 8 * n {
            return Err(Error::Artifact("belief block length mismatch".into()));
        }
        let probs: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Belief {
            grid,
            agent_pos,
            probs,
        })
    }
}

/// One successor branch of a belief under an action.
#[derive(Debug, Clone)]
pub struct SuccessorBranch {
    pub observation: Observation,
    pub probability: f64,
    pub belief: Belief,
}

/// All successor beliefs of one `(belief, action)` pair with their
/// transition probabilities. Zero-probability branches are omitted.
#[derive(Debug, Clone)]
pub struct SuccessorSet {
    pub action: Action,
    pub branches: Vec<SuccessorBranch>,
}

impl SuccessorSet {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Draws a successor according to the branch probabilities.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> &SuccessorBranch {
        let weights: Vec<f64> = self.branches.iter().map(|b| b.probability).collect();
        &self.branches[crate::env::sample_index(&weights, rng)]
    }
}

/// Enumerates the successor beliefs of `b` under `action`.
///
/// The terminal branch has probability equal to the shifted belief's center
/// mass; each hit branch `h` has probability `sum_u Pr(h|u) b~(u)` over
/// non-center offsets and successor `bayes_update(b~, h)`.
pub fn successors(b: &Belief, action: Action, tables: &LikelihoodTables) -> Result<SuccessorSet> {
    let shifted = b.shift(action)?;
    let mut branches = Vec::with_capacity(tables.h_max as usize + 2);
    let omega_p = shifted.origin_mass();
    if omega_p > 0.0 {
        branches.push(SuccessorBranch {
            observation: Observation::Terminal,
            probability: omega_p,
            belief: Belief::terminal(shifted.grid, shifted.agent_pos),
        });
    }
    let center = shifted.index_of(0, 0);
    for h in 0..=tables.h_max {
        let like = tables.likelihood(h);
        let mut probs: Vec<f64> = shifted
            .probs
            .iter()
            .zip(like)
            .map(|(&p, &l)| p * l)
            .collect();
        probs[center] = 0.0;
        let marginal: f64 = probs.iter().sum();
        if marginal <= 0.0 {
            continue;
        }
        let inv = 1.0 / marginal;
        for p in &mut probs {
            *p *= inv;
        }
        branches.push(SuccessorBranch {
            observation: Observation::Hits(h),
            probability: marginal,
            belief: Belief {
                grid: shifted.grid,
                agent_pos: shifted.agent_pos,
                probs,
            },
        });
    }
    let set = SuccessorSet { action, branches };
    debug_assert!((set.total_probability() - 1.0).abs() < MASS_TOLERANCE);
    Ok(set)
}

/// A weighted set of initial beliefs.
#[derive(Debug, Clone)]
pub struct PriorSet {
    pub beliefs: Vec<Belief>,
    pub weights: Vec<f64>,
}

impl PriorSet {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (usize, &Belief) {
        let i = crate::env::sample_index(&self.weights, rng);
        (i, &self.beliefs[i])
    }
}

/// Builds the initial belief set for a case.
///
/// The search is triggered by a first nonzero hit `h0`. For each
/// `h0 in [1, h_max]` the prior is the Bayes update of a uniform in-grid
/// belief by `h0`; its weight is the probability of observing `h0`
/// conditioned on `h0 > 0` for a source distributed uniformly over a large
/// embedding domain (approximating an unbounded one).
pub fn initial_priors(case: &CaseSpec) -> Result<PriorSet> {
    let tables = LikelihoodTables::new(&case.grid, &case.params)?;
    let flat = Belief::uniform_excluding_origin(case.grid, case.grid.agent_start);
    let mut beliefs = Vec::new();
    for h0 in 1..=case.params.h_max {
        beliefs.push(flat.bayes_update(Observation::Hits(h0), &tables)?);
    }
    let weights = prior_hit_weights(case, case.prior_embedding_factor)?;
    Ok(PriorSet { beliefs, weights })
}

/// `Pr(h0 | h0 > 0)` for `h0 in [1, h_max]` under a uniform source
/// distribution over an embedding domain `factor` times the grid size.
pub fn prior_hit_weights(case: &CaseSpec, factor: usize) -> Result<Vec<f64>> {
    let params = &case.params;
    let ex = (factor * case.grid.n_x) as isize;
    let ey = (factor * case.grid.n_y) as isize;
    let mut sums = vec![0.0f64; params.h_max as usize];
    for uy in -(ey - 1)..=(ey - 1) {
        for ux in -(ex - 1)..=(ex - 1) {
            if ux == 0 && uy == 0 {
                continue;
            }
            let probs = hit_distribution(RelState::new(-ux, -uy), params)?;
            for h in 1..=params.h_max {
                sums[h as usize - 1] += probs[h as usize];
            }
        }
    }
    let total: f64 = sums.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter(
            "observation model yields no detections anywhere".into(),
        ));
    }
    Ok(sums.iter().map(|s| s / total).collect())
}
