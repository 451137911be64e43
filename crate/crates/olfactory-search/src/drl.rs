//! Model-based deep value learning on beliefs.
//!
//! A feedforward network approximates the optimal value function over
//! beliefs. Training minimizes the squared residual of the Bellman
//! optimality equation with full backups (the model gives exact successor
//! distributions), stabilized by an experience replay memory and a delayed
//! target network. Behavior is epsilon-greedy with an exponentially decaying
//! schedule; collected beliefs are augmented by a random problem symmetry
//! before storage.
//!
//! Training is deterministic given the seed: randomness flows through one
//! ChaCha stream, minibatch gradients accumulate in item order, and the
//! parallel pieces (target evaluation, layer matvecs) reduce in fixed order.

use crate::belief::{initial_priors, successors, Belief, LikelihoodTables, SuccessorSet};
use crate::cases::CaseSpec;
use crate::env::{valid_actions, Action, Observation};
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::net::{NetworkSpec, WeightBundle};
use crate::policy::Policy;
use crate::symmetry::group_for;
use crate::util::stream_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::VecDeque;

/// Hyperparameters of the training loop.
#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub lr: f64,
    pub epsilon_init: f64,
    pub epsilon_floor: f64,
    pub epsilon_decay: f64,
    pub memory_size: usize,
    pub minibatch_size: usize,
    pub new_transitions_per_it: usize,
    pub gd_steps_per_it: usize,
    pub update_target_network_it: usize,
    pub hidden_units: usize,
    pub max_iterations: usize,
    /// Evaluate the greedy policy every this many iterations (0 disables).
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            lr: 0.001,
            epsilon_init: 1.0,
            epsilon_floor: 0.1,
            epsilon_decay: 20_000.0,
            memory_size: 1000,
            minibatch_size: 64,
            new_transitions_per_it: 192,
            gd_steps_per_it: 12,
            update_target_network_it: 1,
            hidden_units: 512,
            max_iterations: 40_000,
            eval_every: 500,
            eval_episodes: 1000,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0
            || self.epsilon_init <= 0.0
            || self.epsilon_floor <= 0.0
            || self.epsilon_decay <= 0.0
            || self.memory_size == 0
            || self.minibatch_size == 0
            || self.new_transitions_per_it == 0
            || self.gd_steps_per_it == 0
            || self.update_target_network_it == 0
            || self.hidden_units == 0
            || self.max_iterations == 0
        {
            return Err(Error::InvalidParameter(
                "trainer hyperparameters must be positive".into(),
            ));
        }
        if self.epsilon_floor > self.epsilon_init {
            return Err(Error::InvalidParameter(
                "epsilon floor cannot exceed its initial value".into(),
            ));
        }
        Ok(())
    }
}

/// Exploration rate at iteration `it`:
/// `max(epsilon_init * exp(-it / epsilon_decay), epsilon_floor)`.
pub fn epsilon_at(cfg: &TrainerConfig, it: usize) -> f64 {
    (cfg.epsilon_init * (-(it as f64) / cfg.epsilon_decay).exp()).max(cfg.epsilon_floor)
}

/// A stored transition: one belief plus the full successor set of every
/// valid action (probabilities and successor beliefs precomputed).
#[derive(Debug, Clone)]
pub struct ReplayItem {
    pub belief: Belief,
    pub successors: Vec<SuccessorSet>,
}

impl ReplayItem {
    fn new(belief: Belief, tables: &LikelihoodTables) -> Result<ReplayItem> {
        let sets = valid_actions(belief.agent_pos(), belief.grid())
            .into_iter()
            .map(|a| successors(&belief, a, tables))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReplayItem {
            belief,
            successors: sets,
        })
    }
}

/// Expected successor values of several actions under `net`, with terminal
/// branches contributing zero. All non-terminal successors go through one
/// batched forward pass (a single weight stream).
fn action_values(sets: &[SuccessorSet], net: &WeightBundle) -> Result<Vec<f64>> {
    let mut inputs: Vec<&[f64]> = Vec::new();
    for set in sets {
        for branch in &set.branches {
            if branch.observation != Observation::Terminal {
                inputs.push(branch.belief.probs());
            }
        }
    }
    let values = net.forward_batch(&inputs)?;
    let mut cursor = values.iter();
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        let mut q = 0.0;
        for branch in &set.branches {
            if branch.observation != Observation::Terminal {
                q += branch.probability * cursor.next().expect("one value per input");
            }
        }
        out.push(q);
    }
    Ok(out)
}

/// Greedy action over precomputed successor sets. Ties within a
/// spread-relative margin resolve by the fixed action order, which makes the
/// choice invariant under positive rescaling of the value function.
fn greedy_from_sets(sets: &[SuccessorSet], net: &WeightBundle) -> Result<Action> {
    debug_assert!(!sets.is_empty());
    let values = action_values(sets, net)?;
    let scored: Vec<(Action, f64)> = sets.iter().map(|s| s.action).zip(values).collect();
    let max = scored
        .iter()
        .map(|&(_, q)| q)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = scored.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
    let margin = 1e-9 * (max - min);
    for &(a, q) in &scored {
        if q >= max - margin {
            return Ok(a);
        }
    }
    Ok(scored[0].0)
}

/// Greedy policy of a value network: the action maximizing the expected
/// successor value.
pub fn greedy_action(b: &Belief, net: &WeightBundle, tables: &LikelihoodTables) -> Result<Action> {
    let sets = valid_actions(b.agent_pos(), b.grid())
        .into_iter()
        .map(|a| successors(b, a, tables))
        .collect::<Result<Vec<_>>>()?;
    greedy_from_sets(&sets, net)
}

/// Full-backup bootstrap target
/// `y = -1 + max_a sum_{b'} Pr(b'|b,a) v(b'; target)`.
pub fn bellman_target(item: &ReplayItem, target: &WeightBundle) -> Result<f64> {
    let values = action_values(&item.successors, target)?;
    Ok(-1.0 + values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Bellman targets for a whole minibatch through one batched forward pass.
fn bellman_targets(items: &[&ReplayItem], target: &WeightBundle) -> Result<Vec<f64>> {
    let mut inputs: Vec<&[f64]> = Vec::new();
    for item in items {
        for set in &item.successors {
            for branch in &set.branches {
                if branch.observation != Observation::Terminal {
                    inputs.push(branch.belief.probs());
                }
            }
        }
    }
    let values = target.forward_batch(&inputs)?;
    let mut cursor = values.iter();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let mut best = f64::NEG_INFINITY;
        for set in &item.successors {
            let mut q = 0.0;
            for branch in &set.branches {
                if branch.observation != Observation::Terminal {
                    q += branch.probability * cursor.next().expect("one value per input");
                }
            }
            best = best.max(q);
        }
        out.push(-1.0 + best);
    }
    Ok(out)
}

/// Applies a uniformly drawn element of the case's symmetry group to the
/// belief (the eight square symmetries for isotropic cases, the wind-axis
/// mirror pair for windy ones).
pub fn apply_random_symmetry<R: Rng>(b: &Belief, case: &CaseSpec, rng: &mut R) -> Belief {
    let group = group_for(case);
    group[rng.gen_range(0..group.len())].apply_belief(b)
}

/// A value network executed greedily as a policy.
pub struct NetPolicy<'a> {
    pub net: &'a WeightBundle,
    pub tables: &'a LikelihoodTables,
}

impl Policy for NetPolicy<'_> {
    fn act(&self, b: &Belief) -> Result<Action> {
        greedy_action(b, self.net, self.tables)
    }

    fn name(&self) -> &str {
        "drl"
    }
}

/// One row of the training curve.
#[derive(Debug, Clone)]
pub struct TrainingCurvePoint {
    pub iteration: usize,
    pub loss: f64,
    pub epsilon: f64,
    pub eval_mean_t: Option<f64>,
    pub eval_pr_failure: Option<f64>,
}

pub const CURVE_CSV_HEADER: &str = "iteration,loss,epsilon,eval_mean_T,eval_pr_failure";

pub fn training_curve_csv(points: &[TrainingCurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{:.8},{:.6},{},{}\n",
            p.iteration,
            p.loss,
            p.epsilon,
            p.eval_mean_t.map_or("NA".into(), |v| format!("{v:.6}")),
            p.eval_pr_failure.map_or("NA".into(), |v| format!("{v:.6}")),
        ));
    }
    out
}

/// Trains a value network on `case` and returns the best-evaluated weights
/// plus the training curve.
pub fn train(
    case: &CaseSpec,
    spec: &NetworkSpec,
    cfg: &TrainerConfig,
    seed: u64,
) -> Result<(WeightBundle, Vec<TrainingCurvePoint>)> {
    cfg.validate()?;
    if spec.input != case.state_count() {
        return Err(Error::ShapeMismatch {
            expected: case.state_count(),
            got: spec.input,
        });
    }
    let tables = LikelihoodTables::new(&case.grid, &case.params)?;
    let priors = initial_priors(case)?;
    let evaluator = Evaluator::new(case)?;
    let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, 0));

    let mut memory: VecDeque<ReplayItem> = VecDeque::with_capacity(cfg.memory_size);
    let mut memory_ids: VecDeque<u64> = VecDeque::with_capacity(cfg.memory_size);
    let mut next_item_id = 0u64;
    // Bootstrap targets are a pure function of (item, target weights); they
    // are cached until the target network refreshes.
    let mut target_cache: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    let mut weights = WeightBundle::init(spec, &mut rng);
    let mut target = weights.clone();
    let mut curve = Vec::new();
    let mut best: Option<(f64, WeightBundle)> = None;

    for it in 0..cfg.max_iterations {
        let epsilon = epsilon_at(cfg, it);

        // Generate new experience. Each iteration abandons any unfinished
        // episode and starts fresh.
        let mut episode_belief: Option<Belief> = None;
        let mut episode_steps = 0usize;
        let mut added = 0usize;
        while added < cfg.new_transitions_per_it {
            let current = match episode_belief.take() {
                Some(b) => b,
                None => {
                    episode_steps = 0;
                    priors.sample(&mut rng).1.clone()
                }
            };
            let augmented = apply_random_symmetry(&current, case, &mut rng);
            let item = ReplayItem::new(augmented, &tables)?;
            let action = if rng.gen::<f64>() < epsilon {
                let valid = valid_actions(item.belief.agent_pos(), item.belief.grid());
                valid[rng.gen_range(0..valid.len())]
            } else {
                greedy_from_sets(&item.successors, &weights)?
            };
            let set = item
                .successors
                .iter()
                .find(|s| s.action == action)
                .expect("chosen action has successors");
            let branch = set.sample(&mut rng);
            let terminal = branch.observation == Observation::Terminal;
            let next = branch.belief.clone();
            if memory.len() == cfg.memory_size {
                memory.pop_front();
                memory_ids.pop_front();
            }
            memory.push_back(item);
            memory_ids.push_back(next_item_id);
            next_item_id += 1;
            added += 1;
            episode_steps += 1;
            // Truncate stuck collection episodes at the case's step cap.
            if !terminal && episode_steps < case.t_max {
                episode_belief = Some(next);
            }
        }

        // Gradient descent on the Bellman optimality error.
        let mut loss_sum = 0.0;
        for _ in 0..cfg.gd_steps_per_it {
            let batch = cfg.minibatch_size.min(memory.len());
            let indices = rand::seq::index::sample(&mut rng, memory.len(), batch);
            let items: Vec<&ReplayItem> = indices.iter().map(|i| &memory[i]).collect();
            let ids: Vec<u64> = indices.iter().map(|i| memory_ids[i]).collect();
            let missing: Vec<usize> = (0..batch)
                .filter(|&j| !target_cache.contains_key(&ids[j]))
                .collect();
            if !missing.is_empty() {
                let fresh_items: Vec<&ReplayItem> = missing.iter().map(|&j| items[j]).collect();
                let fresh = bellman_targets(&fresh_items, &target)?;
                for (&j, y) in missing.iter().zip(fresh) {
                    target_cache.insert(ids[j], y);
                }
            }
            let targets: Vec<f64> = ids.iter().map(|id| target_cache[id]).collect();
            let inv = 1.0 / batch as f64;
            let mut grads = WeightBundle::zeros(spec);
            let inputs: Vec<&[f64]> = items.iter().map(|i| i.belief.probs()).collect();
            let predictions =
                weights.batch_gradient(&inputs, |i, v| 2.0 * (v - targets[i]) * inv, &mut grads)?;
            let loss: f64 = predictions
                .iter()
                .zip(&targets)
                .map(|(v, y)| (v - y) * (v - y) * inv)
                .sum();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at iteration {it} (epsilon {epsilon:.4})"
                )));
            }
            loss_sum += loss;
            weights.sgd_step(&grads, cfg.lr)?;
        }
        let mean_loss = loss_sum / cfg.gd_steps_per_it as f64;

        if (it + 1) % cfg.update_target_network_it == 0 {
            target = weights.clone();
            target_cache.clear();
        }

        let mut point = TrainingCurvePoint {
            iteration: it + 1,
            loss: mean_loss,
            epsilon,
            eval_mean_t: None,
            eval_pr_failure: None,
        };
        if cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0 {
            let policy = NetPolicy {
                net: &weights,
                tables: &tables,
            };
            let report = evaluator.benchmark(&policy, cfg.eval_episodes, stream_seed(seed, 1))?;
            point.eval_mean_t = report.mean_t;
            point.eval_pr_failure = Some(report.pr_failure);
            let score = report.pr_failure * 10.0 * case.t_max as f64
                + report.mean_t.unwrap_or(case.t_max as f64);
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, weights.clone()));
            }
        }
        curve.push(point);
    }

    let final_weights = best.map(|(_, w)| w).unwrap_or(weights);
    Ok((final_weights, curve))
}
