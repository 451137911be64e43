//! Independent oracles for the acceptance suite. Everything here reimplements
//! the quantity under test from first principles (scalar loops, absolute
//! coordinates, direct recursions) so agreement with the library is a real
//! two-route check.

use olfactory_search::belief::{Belief, SuccessorSet};
use olfactory_search::cases::CaseSpec;
use olfactory_search::env::{
    hit_distribution, valid_actions, Action, Cell, Observation, RelState, ACTIONS,
};
use std::collections::HashMap;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Power-series evaluation of K0 (with the I0 series inside), compensated
/// summation. Accurate to ~1e-10 relative for `x <= 6`; cancellation between
/// the log term and the sum degrades it beyond that.
pub fn k0_series(x: f64) -> f64 {
    let z = 0.25 * x * x;
    let mut i0 = 1.0;
    let mut i0_term = 1.0;
    let mut sum = 0.0;
    let mut sum_c = 0.0; // Kahan compensation
    let mut term = 1.0;
    let mut harmonic = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= z / (kf * kf);
        harmonic += 1.0 / kf;
        let add = term * harmonic;
        let y = add - sum_c;
        let t = sum + y;
        sum_c = (t - sum) - y;
        sum = t;
        i0_term *= z / (kf * kf);
        i0 += i0_term;
        if add < 1e-20 * (sum + 1.0) && i0_term < 1e-20 * i0 {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + sum
}

/// Optimally truncated asymptotic expansion
/// `K0(x) ~ sqrt(pi/2x) e^-x sum_k (-1)^k prod (2j-1)^2 / (k! (8x)^k)`.
/// Truncation error is about the first omitted term: below 1e-10 for
/// `x >= 13`.
pub fn k0_asymptotic(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        term *= -((2.0 * kf - 1.0) * (2.0 * kf - 1.0)) / (8.0 * kf * x);
        if term.abs() >= prev {
            break; // divergence point of the asymptotic series
        }
        prev = term.abs();
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// Trapezoidal quadrature of `K0(x) = integral_0^inf exp(-x cosh t) dt`.
/// The integrand is even and analytic, so the trapezoid rule converges
/// geometrically; with `h = 0.125` the result is rounding-limited. Used to
/// bridge the seam where neither the series (cancellation) nor the
/// asymptotic expansion (truncation) reaches 1e-10.
pub fn k0_quadrature(x: f64) -> f64 {
    let h: f64 = 0.125;
    let mut sum = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let term = (-x * t.cosh()).exp();
        sum += term;
        if term < 1e-24 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

/// Composite oracle covering `[0.01, 50]` with relative error well below
/// 1e-9 everywhere.
pub fn k0_oracle(x: f64) -> f64 {
    if x <= 6.0 {
        k0_series(x)
    } else if x < 13.0 {
        k0_quadrature(x)
    } else {
        k0_asymptotic(x)
    }
}

/// One enumerated successor branch in absolute coordinates.
pub struct EnumBranch {
    pub observation: Observation,
    pub probability: f64,
    /// Posterior over absolute source cells, row-major y-major; zero row for
    /// the terminal branch.
    pub posterior: Vec<f64>,
}

/// Probability that the source sits at `source` under `b` (absolute cells).
pub fn belief_at(b: &Belief, source: Cell) -> f64 {
    let agent = b.agent_pos();
    b.prob(
        source.x as isize - agent.x as isize,
        source.y as isize - agent.y as isize,
    )
}

/// Brute-force successor enumeration: tracks every possible source cell
/// separately, in absolute coordinates, with its own Bayes arithmetic.
pub fn enumerate_successors(case: &CaseSpec, b: &Belief, action: Action) -> Vec<EnumBranch> {
    let grid = case.grid;
    let moved = olfactory_search::env::transition(b.agent_pos(), action, &grid).unwrap();
    let mut branches = Vec::new();
    let p_term = belief_at(b, moved);
    if p_term > 0.0 {
        branches.push(EnumBranch {
            observation: Observation::Terminal,
            probability: p_term,
            posterior: vec![0.0; grid.n_x * grid.n_y],
        });
    }
    for h in 0..=case.params.h_max {
        let mut post = vec![0.0; grid.n_x * grid.n_y];
        let mut marginal = 0.0;
        for sy in 0..grid.n_y {
            for sx in 0..grid.n_x {
                if (sx, sy) == (moved.x, moved.y) {
                    continue;
                }
                let prior = belief_at(b, Cell::new(sx, sy));
                if prior == 0.0 {
                    continue;
                }
                let rel = RelState::new(
                    moved.x as isize - sx as isize,
                    moved.y as isize - sy as isize,
                );
                let like = hit_distribution(rel, &case.params).unwrap()[h as usize];
                post[sy * grid.n_x + sx] = prior * like;
                marginal += prior * like;
            }
        }
        if marginal > 0.0 {
            for p in &mut post {
                *p /= marginal;
            }
            branches.push(EnumBranch {
                observation: Observation::Hits(h),
                probability: marginal,
                posterior: post,
            });
        }
    }
    branches
}

/// Asserts that the library's successor set matches the enumeration
/// elementwise within `tol`.
pub fn assert_successors_match(
    case: &CaseSpec,
    b: &Belief,
    action: Action,
    set: &SuccessorSet,
    tol: f64,
) {
    let expected = enumerate_successors(case, b, action);
    assert_eq!(
        set.branches.len(),
        expected.len(),
        "branch count mismatch for action {action:?}"
    );
    let grid = case.grid;
    for (got, want) in set.branches.iter().zip(&expected) {
        assert_eq!(got.observation, want.observation);
        assert!(
            (got.probability - want.probability).abs() <= tol,
            "branch probability mismatch: {} vs {}",
            got.probability,
            want.probability
        );
        if want.observation == Observation::Terminal {
            assert!(got.belief.is_terminal());
            continue;
        }
        for sy in 0..grid.n_y {
            for sx in 0..grid.n_x {
                let lib = belief_at(&got.belief, Cell::new(sx, sy));
                let oracle = want.posterior[sy * grid.n_x + sx];
                assert!(
                    (lib - oracle).abs() <= tol,
                    "posterior mismatch at source ({sx},{sy}): {lib} vs {oracle}"
                );
            }
        }
    }
}

/// Depth-limited expectimax over the full observation tree, memoized on the
/// quantized (belief, agent, depth) triple. Values are discounted returns
/// with unit step costs and zero value at the depth horizon.
pub struct Expectimax<'a> {
    case: &'a CaseSpec,
    gamma: f64,
    /// Likelihood vectors indexed by relative offset, computed on demand.
    likelihoods: HashMap<(isize, isize), Vec<f64>>,
    memo: HashMap<u64, f64>,
}

impl<'a> Expectimax<'a> {
    pub fn new(case: &'a CaseSpec, gamma: f64) -> Self {
        Expectimax {
            case,
            gamma,
            likelihoods: HashMap::new(),
            memo: HashMap::new(),
        }
    }

    fn likelihood(&mut self, rel: (isize, isize)) -> &[f64] {
        let params = self.case.params;
        self.likelihoods
            .entry(rel)
            .or_insert_with(|| hit_distribution(RelState::new(rel.0, rel.1), &params).unwrap())
    }

    fn key(belief: &[f64], agent: Cell, depth: usize) -> u64 {
        let mut h = olfactory_search::util::FNV_OFFSET;
        for &p in belief {
            let q = (p * 1e12).round() as i64;
            h = olfactory_search::util::fnv1a64_push(h, &q.to_le_bytes());
        }
        h = olfactory_search::util::fnv1a64_push(h, &(agent.x as u64).to_le_bytes());
        h = olfactory_search::util::fnv1a64_push(h, &(agent.y as u64).to_le_bytes());
        olfactory_search::util::fnv1a64_push(h, &(depth as u64).to_le_bytes())
    }

    /// `belief` is over absolute source cells, row-major y-major.
    pub fn value(&mut self, belief: &[f64], agent: Cell, depth: usize) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let key = Self::key(belief, agent, depth);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let grid = self.case.grid;
        let mut best = f64::NEG_INFINITY;
        for action in valid_actions(agent, &grid) {
            let moved = olfactory_search::env::transition(agent, action, &grid).unwrap();
            let mut q = -1.0;
            // Terminal branch contributes zero future value.
            for h in 0..=self.case.params.h_max {
                let mut post = vec![0.0; belief.len()];
                let mut marginal = 0.0;
                for sy in 0..grid.n_y {
                    for sx in 0..grid.n_x {
                        if (sx, sy) == (moved.x, moved.y) {
                            continue;
                        }
                        let prior = belief[sy * grid.n_x + sx];
                        if prior == 0.0 {
                            continue;
                        }
                        let rel = (
                            moved.x as isize - sx as isize,
                            moved.y as isize - sy as isize,
                        );
                        let like = self.likelihood(rel)[h as usize];
                        post[sy * grid.n_x + sx] = prior * like;
                        marginal += prior * like;
                    }
                }
                if marginal > 0.0 {
                    for p in &mut post {
                        *p /= marginal;
                    }
                    q += self.gamma * marginal * self.value(&post, moved, depth - 1);
                }
            }
            best = best.max(q);
        }
        self.memo.insert(key, best);
        best
    }

    /// Convenience: evaluate a library belief.
    pub fn value_of_belief(&mut self, b: &Belief, depth: usize) -> f64 {
        let grid = self.case.grid;
        let mut flat = vec![0.0; grid.n_x * grid.n_y];
        for sy in 0..grid.n_y {
            for sx in 0..grid.n_x {
                flat[sy * grid.n_x + sx] = belief_at(b, Cell::new(sx, sy));
            }
        }
        self.value(&flat, b.agent_pos(), depth)
    }
}

/// All agent positions worth probing on small grids: corners, edges, center.
pub fn probe_positions(case: &CaseSpec) -> Vec<Cell> {
    let grid = case.grid;
    let mut cells = vec![
        Cell::new(0, 0),
        Cell::new(grid.n_x - 1, grid.n_y - 1),
        Cell::new(grid.n_x / 2, grid.n_y / 2),
    ];
    if grid.n_x > 1 {
        cells.push(Cell::new(grid.n_x - 1, 0));
    }
    if grid.n_y > 2 {
        cells.push(Cell::new(0, grid.n_y / 2));
    }
    cells.dedup();
    cells
}

/// Exercises every action valid at the belief's position.
pub fn each_valid_action(b: &Belief) -> Vec<Action> {
    ACTIONS
        .iter()
        .copied()
        .filter(|a| valid_actions(b.agent_pos(), b.grid()).contains(a))
        .collect()
}
