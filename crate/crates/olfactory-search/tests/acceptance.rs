//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `--nocapture`). Run with `--release`; the two
//! overnight-scale reproductions are `#[ignore]`d and run on demand via
//! `cargo test --release --test acceptance -- --ignored`.

mod support;

use olfactory_search::belief::{
    initial_priors, prior_hit_weights, successors, Belief, LikelihoodTables,
};
use olfactory_search::bessel::k0;
use olfactory_search::cases::CaseSpec;
use olfactory_search::drl::{train, NetPolicy, TrainerConfig};
use olfactory_search::env::{valid_actions, Cell, Observation};
use olfactory_search::eval::{BenchmarkReport, Evaluator};
use olfactory_search::net::{NetworkSpec, WeightBundle};
use olfactory_search::pbvi::{
    perseus_iteration, perseus_solve, shaped_backup_identity_check, AlphaVector, BackupContext,
    BeliefBank, BeliefValueTable, PerseusConfig,
};
use olfactory_search::policy::Infotaxis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

/// Criterion 1: belief updates and successor sets match brute-force
/// enumeration over every (source, action, observation) combination on all
/// grids up to 5x5, elementwise 1e-12, in under a minute.
#[test]
fn criterion_01_bayes_oracle() {
    let started = Instant::now();
    let mut combos = 0usize;
    for n_x in 1..=5usize {
        for n_y in 1..=5usize {
            if n_x * n_y < 2 {
                continue;
            }
            let case = CaseSpec::synthetic(n_x, n_y, Cell::new(n_x / 2, n_y / 2), 1.0, 1.0, 2, 50);
            let tables = LikelihoodTables::new(&case.grid, &case.params).unwrap();
            for agent in support::probe_positions(&case) {
                let uniform = Belief::uniform_excluding_origin(case.grid, agent);
                let informed = uniform
                    .bayes_update(Observation::Hits(1), &tables)
                    .expect("a hit is always possible under the uniform prior");
                for belief in [&uniform, &informed] {
                    for action in support::each_valid_action(belief) {
                        let set = successors(belief, action, &tables).unwrap();
                        support::assert_successors_match(&case, belief, action, &set, 1e-12);
                        combos += set.branches.len();
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "oracle sweep took {elapsed:?}");
    println!(
        "criterion 01 (Bayes oracle, {combos} branches on grids up to 5x5, {elapsed:?}): PASS"
    );
}

/// Criterion 2: 1e5 randomized belief updates on isotropic-small keep the
/// mass within 1e-10 of one with no negative entries.
#[test]
fn criterion_02_normalization_suite() {
    let case = CaseSpec::preset("isotropic-small").unwrap();
    let tables = LikelihoodTables::new(&case.grid, &case.params).unwrap();
    let priors = initial_priors(&case).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(20_240);
    let mut updates = 0usize;
    while updates < 100_000 {
        let (_, prior) = priors.sample(&mut rng);
        let mut b = prior.clone();
        for _ in 0..case.t_max {
            let valid = valid_actions(b.agent_pos(), b.grid());
            let action = valid[rng.gen_range(0..valid.len())];
            let set = successors(&b, action, &tables).unwrap();
            let branch = set.sample(&mut rng);
            if branch.observation == Observation::Terminal {
                break;
            }
            b = branch.belief.clone();
            updates += 1;
            let mass = b.mass();
            assert!(
                (mass - 1.0).abs() < 1e-10,
                "mass {mass} drifted after {updates} updates"
            );
            assert!(b.probs().iter().all(|&p| p >= 0.0), "negative entry");
            if updates >= 100_000 {
                break;
            }
        }
    }
    println!("criterion 02 (normalization over {updates} randomized updates): PASS");
}

/// Criterion 3: K0 relative error < 1e-8 against the independent
/// series/asymptotic oracle on [0.01, 50] (quadrature bridging the seam,
/// cross-checked at the junctions and at K0(1)); truncated hit
/// distributions sum to one within 1e-12 for every state of all four
/// presets.
#[test]
fn criterion_03_bessel_poisson_numerics() {
    // Oracle self-consistency at the piece junctions and at the reference
    // point K0(1) = 0.42102443824070833.
    for x in [5.5, 6.0, 6.5] {
        let s = support::k0_series(x);
        let q = support::k0_quadrature(x);
        assert!(
            ((s - q) / q).abs() < 1e-10,
            "series/quadrature junction at {x}"
        );
    }
    for x in [12.5, 13.0, 14.0] {
        let a = support::k0_asymptotic(x);
        let q = support::k0_quadrature(x);
        assert!(
            ((a - q) / q).abs() < 1e-10,
            "asymptotic/quadrature junction at {x}"
        );
    }
    let reference = 0.421_024_438_240_708_33;
    assert!((support::k0_oracle(1.0) - reference).abs() / reference < 1e-12);

    let mut x = 0.01f64;
    let mut worst: f64 = 0.0;
    let mut points = 0usize;
    while x <= 50.0 {
        let oracle = support::k0_oracle(x);
        let rel = ((k0(x) - oracle) / oracle).abs();
        worst = worst.max(rel);
        points += 1;
        x *= 1.003;
    }
    assert!(worst < 1e-8, "worst K0 relative error {worst:.3e}");

    let mut states = 0usize;
    for name in olfactory_search::cases::PRESET_NAMES {
        let case = CaseSpec::preset(name).unwrap();
        let grid = case.grid;
        for uy in -(grid.n_y as isize - 1)..=(grid.n_y as isize - 1) {
            for ux in -(grid.n_x as isize - 1)..=(grid.n_x as isize - 1) {
                if ux == 0 && uy == 0 {
                    continue;
                }
                let probs = olfactory_search::env::hit_distribution(
                    olfactory_search::env::RelState::new(ux, uy),
                    &case.params,
                )
                .unwrap();
                let sum: f64 = probs.iter().sum();
                assert!(
                    (sum - 1.0).abs() < 1e-12,
                    "{name}: distribution at ({ux},{uy}) sums to {sum}"
                );
                assert!(probs.iter().all(|&p| p >= 0.0));
                states += 1;
            }
        }
    }
    println!(
        "criterion 03 (K0 worst rel err {worst:.2e} over {points} points; \
         {states} preset states normalized): PASS"
    );
}

/// Criterion 4: prior hit weights reproduce the benchmark table within
/// 0.02 for both isotropic cases, in under five minutes, and are stable
/// under embedding doubling.
#[test]
fn criterion_04_prior_weights() {
    let started = Instant::now();
    let small = CaseSpec::preset("isotropic-small").unwrap();
    let w_small = prior_hit_weights(&small, 4).unwrap();
    assert!(
        (w_small[0] - 0.85).abs() <= 0.02,
        "Pr(h0=1) = {}",
        w_small[0]
    );
    assert!(
        (w_small[1] - 0.15).abs() <= 0.02,
        "Pr(h0=2) = {}",
        w_small[1]
    );

    let large = CaseSpec::preset("isotropic-large").unwrap();
    let w_large = prior_hit_weights(&large, 4).unwrap();
    for (got, want) in w_large.iter().zip([0.83, 0.13, 0.04]) {
        assert!(
            (got - want).abs() <= 0.02,
            "large-case weight {got} vs {want}"
        );
    }

    // Embedding convergence: doubling the domain moves no weight by 0.005.
    let w_small_8 = prior_hit_weights(&small, 8).unwrap();
    let w_large_8 = prior_hit_weights(&large, 8).unwrap();
    for (a, b) in w_small
        .iter()
        .zip(&w_small_8)
        .chain(w_large.iter().zip(&w_large_8))
    {
        assert!((a - b).abs() < 0.005, "embedding not converged: {a} vs {b}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "prior weights took {elapsed:?}");
    println!(
        "criterion 04 (prior weights {:.3}/{:.3} and {:.3}/{:.3}/{:.3}, {elapsed:?}): PASS",
        w_small[0], w_small[1], w_large[0], w_large[1], w_large[2]
    );
}

/// Criterion 5: analytic gradients match central finite differences
/// (double precision, step 1e-5) within 1e-5 max relative error over 100
/// random small networks, in under a minute.
#[test]
fn criterion_05_gradient_check() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let input = rng.gen_range(2..7usize);
        let layers = rng.gen_range(1..3usize);
        let hidden: Vec<usize> = (0..layers).map(|_| rng.gen_range(2..6)).collect();
        let spec = NetworkSpec { input, hidden };
        let w = WeightBundle::init(&spec, &mut rng);
        // The rectifier is not differentiable at zero, so a central
        // difference straddling a kink is meaningless; probe at inputs whose
        // hidden pre-activations are all bounded away from zero.
        let x = loop {
            let candidate: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if min_preactivation_magnitude(&w, &candidate) > 1e-3 {
                break candidate;
            }
        };
        let (_, grads) = w.backward(&x, 1.0).unwrap();
        let step = 1e-5;
        for li in 0..w.layers.len() {
            for (entries, grad_entries, is_bias) in [
                (w.layers[li].w.len(), &grads.layers[li].w, false),
                (w.layers[li].b.len(), &grads.layers[li].b, true),
            ] {
                #[allow(clippy::needless_range_loop)]
                for idx in 0..entries {
                    let mut plus = w.clone();
                    let mut minus = w.clone();
                    if is_bias {
                        plus.layers[li].b[idx] += step;
                        minus.layers[li].b[idx] -= step;
                    } else {
                        plus.layers[li].w[idx] += step;
                        minus.layers[li].w[idx] -= step;
                    }
                    let numeric =
                        (plus.forward(&x).unwrap() - minus.forward(&x).unwrap()) / (2.0 * step);
                    let analytic = grad_entries[idx];
                    let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                    worst = worst.max((numeric - analytic).abs() / denom);
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(worst < 1e-5, "worst gradient relative error {worst:.3e}");
    assert!(elapsed.as_secs() < 60, "gradient check took {elapsed:?}");
    println!(
        "criterion 05 (gradient check, worst rel err {worst:.2e} over 100 nets, {elapsed:?}): PASS"
    );
}

/// Smallest hidden-layer pre-activation magnitude of a forward pass.
fn min_preactivation_magnitude(w: &WeightBundle, x: &[f64]) -> f64 {
    let mut activ = x.to_vec();
    let mut min_mag = f64::INFINITY;
    let last = w.layers.len() - 1;
    for (i, layer) in w.layers.iter().enumerate() {
        let mut out = Vec::with_capacity(layer.rows);
        for r in 0..layer.rows {
            let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
            let acc = layer.b[r] + row.iter().zip(&activ).map(|(w, v)| w * v).sum::<f64>();
            if i < last {
                min_mag = min_mag.min(acc.abs());
            }
            out.push(if i < last { acc.max(0.0) } else { acc });
        }
        activ = out;
    }
    min_mag
}

/// Criterion 6: the potential-shaping identity and argmax invariance hold
/// on 1000 randomized (v, b, phi) instances on a 3x3 case within 1e-10.
#[test]
fn criterion_06_shaping_argmax_invariance() {
    let case = CaseSpec::synthetic(3, 3, Cell::new(1, 1), 1.0, 1.0, 2, 30);
    let tables = LikelihoodTables::new(&case.grid, &case.params).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let grid = case.grid;
    let width = 2 * grid.n_x - 1;
    for instance in 0..1000 {
        // Random belief over in-grid source offsets for a random agent cell.
        let agent = Cell::new(rng.gen_range(0..grid.n_x), rng.gen_range(0..grid.n_y));
        let mut probs = vec![0.0; case.state_count()];
        let mut total = 0.0;
        for sy in 0..grid.n_y {
            for sx in 0..grid.n_x {
                if (sx, sy) == (agent.x, agent.y) {
                    continue;
                }
                let idx = (sy as isize - agent.y as isize + grid.n_y as isize - 1) as usize * width
                    + (sx as isize - agent.x as isize + grid.n_x as isize - 1) as usize;
                let p: f64 = rng.gen_range(0.0..1.0);
                probs[idx] = p;
                total += p;
            }
        }
        for p in &mut probs {
            *p /= total;
        }
        let belief = Belief::from_parts(grid, agent, probs).unwrap();

        let mut table = BeliefValueTable::new();
        table.insert(&belief, rng.gen_range(-20.0..0.0));
        for action in valid_actions(agent, &grid) {
            for branch in successors(&belief, action, &tables).unwrap().branches {
                table.insert(&branch.belief, rng.gen_range(-20.0..0.0));
            }
        }
        let c: f64 = rng.gen_range(0.05..2.0);
        let phi = move |b: &Belief| -c * b.expected_manhattan();
        let ok = shaped_backup_identity_check(
            std::slice::from_ref(&belief),
            &table,
            &phi,
            0.98,
            &tables,
            1e-10,
        )
        .unwrap();
        assert!(
            ok,
            "shaping identity failed on instance {instance} (c = {c})"
        );
    }
    println!("criterion 06 (shaping identity + argmax invariance, 1000 instances): PASS");
}

/// Builds the breadth-first successor closure of a case's priors up to
/// `depth` non-terminal expansions.
fn successor_closure(case: &CaseSpec, tables: &LikelihoodTables, depth: usize) -> Vec<Belief> {
    let priors = initial_priors(case).unwrap();
    let mut bank: Vec<Belief> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut frontier: Vec<Belief> = priors.beliefs.clone();
    for b in &frontier {
        seen.insert(b.dedup_key());
    }
    for _ in 0..depth {
        let mut next_frontier = Vec::new();
        for b in &frontier {
            for action in valid_actions(b.agent_pos(), b.grid()) {
                for branch in successors(b, action, tables).unwrap().branches {
                    if branch.observation == Observation::Terminal {
                        continue;
                    }
                    if seen.insert(branch.belief.dedup_key()) {
                        next_frontier.push(branch.belief);
                    }
                }
            }
        }
        bank.append(&mut frontier);
        frontier = next_frontier;
        assert!(
            bank.len() + frontier.len() < 120_000,
            "belief closure exploded"
        );
    }
    bank.append(&mut frontier);
    bank
}

/// Runs Perseus stages (asserting per-stage monotonicity) followed by full
/// backup sweeps to convergence, then compares values against the
/// expectimax oracle at every `stride`-th bank belief. Returns
/// `(bank size, checked count, worst gap)`.
fn pbvi_vs_expectimax(
    case: &CaseSpec,
    gamma: f64,
    depth: usize,
    stride: usize,
    tol: f64,
) -> (usize, usize, f64) {
    assert!(
        gamma.powi(depth as i32) < 1e-6,
        "depth too shallow for gamma"
    );
    let ctx = BackupContext::new(case, gamma, 0.0).unwrap();
    let tables = LikelihoodTables::new(&case.grid, &case.params).unwrap();
    let bank_beliefs = successor_closure(case, &tables, depth);

    // Genuine Perseus stages first: accepted backups never decrease the
    // backed-up belief's value.
    let mut bank = BeliefBank {
        cached_bellman_error: vec![f64::INFINITY; bank_beliefs.len()],
        beliefs: bank_beliefs,
    };
    let mut gamma_set = vec![ctx.initial_alpha()];
    for _ in 0..5 {
        let before: Vec<f64> = bank
            .beliefs
            .iter()
            .map(|b| {
                gamma_set
                    .iter()
                    .map(|a| a.dot(b.probs()))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let (next, _) = perseus_iteration(&ctx, &mut bank, &gamma_set).unwrap();
        for (b, v0) in bank.beliefs.iter().zip(&before) {
            let v1 = next
                .iter()
                .map(|a| a.dot(b.probs()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                v1 >= v0 - 1e-9,
                "Perseus stage decreased a value: {v0} -> {v1}"
            );
        }
        gamma_set = next;
    }

    // Full sweeps to convergence: every belief backed up each sweep, the
    // previous maximizing vector retained whenever the fresh backup would
    // fall short, vector set deduplicated. Values then never decrease at
    // bank beliefs and climb to the optimum on the closed set.
    let vector_key = |alpha: &AlphaVector| {
        let mut key = olfactory_search::util::FNV_OFFSET;
        for &v in &alpha.values {
            let q = (v * 1e12).round() as i64;
            key = olfactory_search::util::fnv1a64_push(key, &q.to_le_bytes());
        }
        olfactory_search::util::fnv1a64_push(key, &[alpha.action.index() as u8])
    };
    // Sweeps contract at rate gamma, so 14 of them land far below the
    // comparison tolerance.
    for _ in 0..14 {
        let mut next: Vec<AlphaVector> = Vec::new();
        let mut keys = std::collections::HashSet::new();
        let mut keep = |alpha: AlphaVector, next: &mut Vec<AlphaVector>| {
            if keys.insert(vector_key(&alpha)) {
                next.push(alpha);
            }
        };
        let values_before: Vec<f64> = bank
            .beliefs
            .iter()
            .map(|b| {
                gamma_set
                    .iter()
                    .map(|a| a.dot(b.probs()))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for (b, &v0) in bank.beliefs.iter().zip(&values_before) {
            let candidate = ctx.backup(b, &gamma_set).unwrap();
            if candidate.dot(b.probs()) < v0 {
                let old = gamma_set
                    .iter()
                    .max_by(|x, y| x.dot(b.probs()).partial_cmp(&y.dot(b.probs())).unwrap())
                    .unwrap()
                    .clone();
                keep(old, &mut next);
            }
            keep(candidate, &mut next);
        }
        for (b, &v0) in bank.beliefs.iter().zip(&values_before) {
            let v1 = next
                .iter()
                .map(|a| a.dot(b.probs()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                v1 >= v0 - 1e-9,
                "sweep decreased a bank value: {v0} -> {v1}"
            );
        }
        gamma_set = next;
    }

    let mut oracle = support::Expectimax::new(case, gamma);
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    let n = bank.beliefs.len();
    for (i, b) in bank.beliefs.iter().enumerate() {
        if i % stride != 0 && i != 0 {
            continue;
        }
        let pbvi_value = gamma_set
            .iter()
            .map(|a| a.dot(b.probs()))
            .fold(f64::NEG_INFINITY, f64::max);
        let reference = oracle.value_of_belief(b, depth);
        worst = worst.max((pbvi_value - reference).abs());
        assert!(
            (pbvi_value - reference).abs() < tol,
            "value mismatch at bank belief {i}: {pbvi_value} vs {reference}"
        );
        checked += 1;
    }
    (n, checked, worst)
}

/// Criterion 7: Perseus backup stages never decrease a backed-up belief's
/// value, and converged point-based values match depth-truncated expectimax
/// (gamma^d < 1e-6) within 1e-6 on a three-cell corridor, plus a richer
/// two-dimensional case as a harder instance of the same oracle.
#[test]
fn criterion_07_perseus_monotonicity_and_corridor_oracle() {
    // The corridor named by the criterion; its reachable belief set is tiny
    // because each visited cell is excluded on non-termination.
    let corridor = CaseSpec::synthetic(3, 1, Cell::new(1, 0), 1.0, 1.0, 1, 50);
    let (corridor_bank, corridor_checked, corridor_worst) =
        pbvi_vs_expectimax(&corridor, 0.15, 9, 1, 1e-6);

    // Same oracle on a 3x3 case where beliefs stay genuinely partial.
    let square = CaseSpec::synthetic(3, 3, Cell::new(1, 1), 1.0, 1.0, 1, 50);
    let (square_bank, square_checked, square_worst) =
        pbvi_vs_expectimax(&square, 0.12, 7, 23, 1e-6);

    println!(
        "criterion 07 (Perseus monotonicity; corridor oracle {corridor_checked}/{corridor_bank} \
         beliefs, gap {corridor_worst:.2e}; 3x3 oracle {square_checked}/{square_bank} beliefs, \
         gap {square_worst:.2e}): PASS"
    );
}

/// Criterion 8: infotaxis on isotropic-small over 1e4 episodes reaches
/// Pr(failure) < 1e-3 and Mean(T) within 20% of the benchmark value 13.2,
/// in under ten minutes.
#[test]
fn criterion_08_benchmark_reproduction_desk_scale() {
    let started = Instant::now();
    let case = CaseSpec::preset("isotropic-small").unwrap();
    let evaluator = Evaluator::new(&case).unwrap();
    let policy = Infotaxis::new(&case).unwrap();
    let report = evaluator.benchmark(&policy, 10_000, 42).unwrap();
    let elapsed = started.elapsed();
    let mean = report.mean_t.expect("successes exist");
    assert!(
        report.pr_failure < 1e-3,
        "Pr(failure) = {} too high",
        report.pr_failure
    );
    assert!(
        (mean - 13.2).abs() / 13.2 <= 0.20,
        "Mean(T) = {mean} outside 20% of 13.2"
    );
    assert!(elapsed.as_secs() < 600, "benchmark took {elapsed:?}");
    println!(
        "criterion 08 (infotaxis on isotropic-small: Mean(T) {mean:.2}, PrF {}, \
         P99 {:?}, {elapsed:?}): PASS",
        report.pr_failure, report.p99_t
    );
}

/// Criterion 9 (overnight scale, not CI): training with the benchmark
/// hyperparameters on isotropic-small reaches Mean(T) <= 14.5 and
/// Pr(failure) < 1e-3 over 1e4 evaluation episodes.
#[test]
#[ignore = "overnight-scale training run; execute with --ignored"]
fn criterion_09_drl_reproduction_overnight() {
    let case = CaseSpec::preset("isotropic-small").unwrap();
    let cfg = TrainerConfig {
        max_iterations: 60_000,
        ..TrainerConfig::default()
    };
    let spec = NetworkSpec::three_layer(case.state_count(), cfg.hidden_units);
    let (weights, _) = train(&case, &spec, &cfg, 20_240).unwrap();
    let tables = LikelihoodTables::new(&case.grid, &case.params).unwrap();
    let evaluator = Evaluator::new(&case).unwrap();
    let policy = NetPolicy {
        net: &weights,
        tables: &tables,
    };
    let report = evaluator.benchmark(&policy, 10_000, 777).unwrap();
    let mean = report.mean_t.expect("successes exist");
    assert!(
        report.pr_failure < 1e-3,
        "Pr(failure) = {}",
        report.pr_failure
    );
    assert!(mean <= 14.5, "Mean(T) = {mean} above 14.5");
    println!(
        "criterion 09 (value-learning reproduction: Mean(T) {mean:.2}, PrF {}): PASS",
        report.pr_failure
    );
}

/// Companion overnight check: the Perseus solver at benchmark scale reaches
/// Mean(T) within 15% of 13.2 on isotropic-small.
#[test]
#[ignore = "multi-hour solve; execute with --ignored"]
fn perseus_benchmark_scale_isotropic_small() {
    let case = CaseSpec::preset("isotropic-small").unwrap();
    let heuristic = Infotaxis::new(&case).unwrap();
    let config = PerseusConfig {
        gamma: 0.98,
        shaping_c: 0.2,
        bank_size: 2000,
        stop_patience: 5,
        eval_every: 5,
        eval_episodes: 1000,
        max_iterations: 400,
    };
    let (policy, _) = perseus_solve(&case, &heuristic, &config, 7).unwrap();
    let evaluator = Evaluator::new(&case).unwrap();
    let report = evaluator.benchmark(&policy, 10_000, 99).unwrap();
    let mean = report.mean_t.expect("successes exist");
    assert!(
        (mean - 13.2).abs() / 13.2 <= 0.15,
        "Perseus Mean(T) = {mean} outside 15% of 13.2"
    );
    println!(
        "perseus benchmark-scale (Mean(T) {mean:.2}, PrF {}, {} vectors): PASS",
        report.pr_failure,
        policy.alphas.len()
    );
}

/// Criterion 10: identical seeds reproduce byte-identical CSV artifacts
/// (the command-level check lives in the CLI crate's tests; this covers the
/// report and trajectory layers).
#[test]
fn criterion_10_determinism() {
    let case = CaseSpec::synthetic(7, 7, Cell::new(3, 3), 1.0, 1.0, 2, 100);
    let evaluator = Evaluator::new(&case).unwrap();
    let policy = Infotaxis::new(&case).unwrap();
    let a = evaluator.benchmark(&policy, 400, 5).unwrap();
    let b = evaluator.benchmark(&policy, 400, 5).unwrap();
    let csv_a = BenchmarkReport::csv_document(std::slice::from_ref(&a));
    let csv_b = BenchmarkReport::csv_document(std::slice::from_ref(&b));
    assert_eq!(csv_a.as_bytes(), csv_b.as_bytes());
    let t_a = olfactory_search::eval::trajectory_export(&evaluator.episode(&policy, 5, 3).unwrap());
    let t_b = olfactory_search::eval::trajectory_export(&evaluator.episode(&policy, 5, 3).unwrap());
    assert_eq!(t_a.as_bytes(), t_b.as_bytes());
    let c = evaluator.benchmark(&policy, 400, 6).unwrap();
    assert_ne!(
        csv_a,
        BenchmarkReport::csv_document(std::slice::from_ref(&c)),
        "different seeds must differ"
    );
    println!("criterion 10 (determinism of report and trajectory artifacts): PASS");
}
