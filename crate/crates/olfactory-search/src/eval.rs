//! Episode simulation, benchmark aggregation, and trajectory logs.
//!
//! Episodes are independent and reproducible in isolation: episode `i` of a
//! benchmark uses a generator seeded from `(master_seed, i)`, so any single
//! trajectory can be regenerated without running the others. Aggregation
//! walks episodes in index order, which keeps results independent of worker
//! scheduling.

use crate::belief::{initial_priors, Belief, LikelihoodTables, PriorSet};
use crate::cases::CaseSpec;
use crate::env::{sample_observation, transition, Action, Cell, Observation, RelState};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::util::stream_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// One executed step: position after the move, the move, and what was sensed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub pos: Cell,
    pub action: Action,
    pub observation: Observation,
}

/// One full search trajectory plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub case: String,
    pub policy: String,
    pub seed: u64,
    pub episode_index: u64,
    pub prior_index: usize,
    pub source: Cell,
    pub start: Cell,
    pub steps: Vec<StepRecord>,
    pub t: usize,
    pub failed: bool,
    pub cumulative_hits: u64,
}

impl EpisodeRecord {
    /// Undiscounted return; each step costs one.
    pub fn cumulative_reward(&self) -> f64 {
        -(self.t as f64)
    }

    /// Discounted return `sum_t gamma^(t-1) * (-1)`.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        if (gamma - 1.0).abs() < f64::EPSILON {
            return -(self.t as f64);
        }
        -(1.0 - gamma.powi(self.t as i32)) / (1.0 - gamma)
    }
}

/// Aggregate metrics for one `(case, policy)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub case: String,
    pub policy: String,
    pub episodes: usize,
    /// Mean search time over successful episodes; `None` when every episode
    /// failed.
    pub mean_t: Option<f64>,
    pub se_mean_t: Option<f64>,
    /// Empirical 99th percentile of successful search times.
    pub p99_t: Option<usize>,
    pub pr_failure: f64,
    pub mean_cum_hits: Option<f64>,
}

/// Fixed CSV header for benchmark reports.
pub const REPORT_CSV_HEADER: &str =
    "case,policy,episodes,mean_T,se_mean_T,p99_T,pr_failure,mean_cum_hits";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".into(),
    }
}

impl BenchmarkReport {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{}",
            self.case,
            self.policy,
            self.episodes,
            fmt_opt(self.mean_t),
            fmt_opt(self.se_mean_t),
            self.p99_t.map_or("NA".into(), |v| v.to_string()),
            self.pr_failure,
            fmt_opt(self.mean_cum_hits),
        )
    }

    pub fn csv_document(reports: &[BenchmarkReport]) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in reports {
            out.push_str(&r.to_csv_row());
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<BenchmarkReport>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == REPORT_CSV_HEADER => {}
            _ => return Err(Error::Artifact("missing report CSV header".into())),
        }
        let mut out = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Artifact(format!("report row {} malformed", ln + 2)));
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s == "NA" {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Artifact(format!("bad number '{s}': {e}")))
                }
            };
            out.push(BenchmarkReport {
                case: f[0].into(),
                policy: f[1].into(),
                episodes: f[2]
                    .parse()
                    .map_err(|e| Error::Artifact(format!("bad episode count: {e}")))?,
                mean_t: opt(f[3])?,
                se_mean_t: opt(f[4])?,
                p99_t: if f[5] == "NA" {
                    None
                } else {
                    Some(
                        f[5].parse()
                            .map_err(|e| Error::Artifact(format!("bad p99: {e}")))?,
                    )
                },
                pr_failure: f[6]
                    .parse()
                    .map_err(|e| Error::Artifact(format!("bad pr_failure: {e}")))?,
                mean_cum_hits: opt(f[7])?,
            });
        }
        Ok(out)
    }
}

/// Prepared evaluation context for one case: likelihood tables and priors
/// are computed once and shared across episodes.
pub struct Evaluator {
    case: CaseSpec,
    tables: LikelihoodTables,
    priors: PriorSet,
}

impl Evaluator {
    pub fn new(case: &CaseSpec) -> Result<Evaluator> {
        Ok(Evaluator {
            case: case.clone(),
            tables: LikelihoodTables::new(&case.grid, &case.params)?,
            priors: initial_priors(case)?,
        })
    }

    pub fn case(&self) -> &CaseSpec {
        &self.case
    }

    pub fn tables(&self) -> &LikelihoodTables {
        &self.tables
    }

    pub fn priors(&self) -> &PriorSet {
        &self.priors
    }

    /// Runs one episode with the supplied generator.
    ///
    /// Protocol: draw the prior by weight, draw the source from it, then
    /// repeat action -> move (reward -1) -> observe -> Bayes update until
    /// the source is entered or `t_max` steps have elapsed.
    pub fn run_episode<R: Rng>(
        &self,
        policy: &dyn Policy,
        rng: &mut R,
        seed: u64,
        episode_index: u64,
    ) -> Result<EpisodeRecord> {
        let grid = self.case.grid;
        let start = grid.agent_start;
        let (prior_index, prior) = self.priors.sample(rng);
        let source = sample_source(prior, rng);
        let mut belief = prior.clone();
        let mut agent = start;
        let mut steps = Vec::new();
        let mut cumulative_hits = 0u64;
        let mut failed = true;
        let mut t = 0;
        while t < self.case.t_max {
            t += 1;
            let action = policy.act(&belief)?;
            agent = transition(agent, action, &grid)?;
            let rel = RelState::new(
                agent.x as isize - source.x as isize,
                agent.y as isize - source.y as isize,
            );
            let obs = sample_observation(rel, &self.case.params, rng);
            steps.push(StepRecord {
                t,
                pos: agent,
                action,
                observation: obs,
            });
            match obs {
                Observation::Terminal => {
                    failed = false;
                    break;
                }
                Observation::Hits(h) => {
                    cumulative_hits += h as u64;
                    belief = belief.shift(action)?.bayes_update(obs, &self.tables)?;
                }
            }
        }
        Ok(EpisodeRecord {
            case: self.case.name.clone(),
            policy: policy.name().into(),
            seed,
            episode_index,
            prior_index,
            source,
            start,
            steps,
            t,
            failed,
            cumulative_hits,
        })
    }

    /// Regenerates episode `index` of the benchmark seeded by `master_seed`.
    pub fn episode(
        &self,
        policy: &dyn Policy,
        master_seed: u64,
        index: u64,
    ) -> Result<EpisodeRecord> {
        let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(master_seed, index));
        self.run_episode(policy, &mut rng, master_seed, index)
    }

    /// Runs `n_episodes` independent episodes on a worker pool and
    /// aggregates the benchmark metrics.
    pub fn benchmark(
        &self,
        policy: &dyn Policy,
        n_episodes: usize,
        master_seed: u64,
    ) -> Result<BenchmarkReport> {
        if n_episodes == 0 {
            return Err(Error::Empty(
                "benchmark requires at least one episode".into(),
            ));
        }
        let summaries: Vec<Result<(usize, bool, u64)>> = (0..n_episodes as u64)
            .into_par_iter()
            .map(|i| {
                let rec = self.episode(policy, master_seed, i)?;
                Ok((rec.t, rec.failed, rec.cumulative_hits))
            })
            .collect();
        let mut times = Vec::new();
        let mut hits = Vec::new();
        let mut failures = 0usize;
        for s in summaries {
            let (t, failed, h) = s?;
            if failed {
                failures += 1;
            } else {
                times.push(t);
                hits.push(h);
            }
        }
        Ok(aggregate(
            &self.case.name,
            policy.name(),
            n_episodes,
            failures,
            &times,
            &hits,
        ))
    }
}

fn sample_source<R: Rng>(prior: &Belief, rng: &mut R) -> Cell {
    let idx = crate::env::sample_index(prior.probs(), rng);
    let w = prior.width() as isize;
    let grid = prior.grid();
    let ux = idx as isize % w - (grid.n_x as isize - 1);
    let uy = idx as isize / w - (grid.n_y as isize - 1);
    let agent = prior.agent_pos();
    Cell::new(
        (agent.x as isize + ux) as usize,
        (agent.y as isize + uy) as usize,
    )
}

fn aggregate(
    case: &str,
    policy: &str,
    episodes: usize,
    failures: usize,
    times: &[usize],
    hits: &[u64],
) -> BenchmarkReport {
    let pr_failure = failures as f64 / episodes as f64;
    if times.is_empty() {
        return BenchmarkReport {
            case: case.into(),
            policy: policy.into(),
            episodes,
            mean_t: None,
            se_mean_t: None,
            p99_t: None,
            pr_failure,
            mean_cum_hits: None,
        };
    }
    let n = times.len() as f64;
    let mean = times.iter().map(|&t| t as f64).sum::<f64>() / n;
    let var = if times.len() > 1 {
        times
            .iter()
            .map(|&t| (t as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    // Smallest T such that at least 99% of successful searches are done.
    let rank = ((0.99 * n).ceil() as usize).clamp(1, sorted.len());
    let p99 = sorted[rank - 1];
    let mean_hits = hits.iter().map(|&h| h as f64).sum::<f64>() / n;
    BenchmarkReport {
        case: case.into(),
        policy: policy.into(),
        episodes,
        mean_t: Some(mean),
        se_mean_t: Some((var / n).sqrt()),
        p99_t: Some(p99),
        pr_failure,
        mean_cum_hits: Some(mean_hits),
    }
}

/// Serializes a trajectory to the line-oriented text format consumed by the
/// replay and plot commands.
pub fn trajectory_export(record: &EpisodeRecord) -> String {
    let mut out = String::new();
    out.push_str("# trajectory v1\n");
    out.push_str(&format!("case {}\n", record.case));
    out.push_str(&format!("policy {}\n", record.policy));
    out.push_str(&format!("seed {}\n", record.seed));
    out.push_str(&format!("episode {}\n", record.episode_index));
    out.push_str(&format!("prior {}\n", record.prior_index));
    out.push_str(&format!("source {} {}\n", record.source.x, record.source.y));
    out.push_str(&format!("start {} {}\n", record.start.x, record.start.y));
    out.push_str(&format!("failed {}\n", record.failed));
    out.push_str("t x y action h\n");
    for s in &record.steps {
        let h = match s.observation {
            Observation::Terminal => "omega".to_string(),
            Observation::Hits(h) => h.to_string(),
        };
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            s.t,
            s.pos.x,
            s.pos.y,
            s.action.name(),
            h
        ));
    }
    out
}

/// Parses the trajectory text format back into a record.
pub fn trajectory_import(text: &str) -> Result<EpisodeRecord> {
    let mut lines = text.lines();
    match lines.next() {
        Some("# trajectory v1") => {}
        _ => return Err(Error::Artifact("missing trajectory header".into())),
    }
    let mut case = String::new();
    let mut policy = String::new();
    let mut seed = 0u64;
    let mut episode_index = 0u64;
    let mut prior_index = 0usize;
    let mut source = Cell::new(0, 0);
    let mut start = Cell::new(0, 0);
    let mut failed = false;
    for line in lines.by_ref() {
        if line == "t x y action h" {
            break;
        }
        let mut parts = line.split_whitespace();
        let key = parts
            .next()
            .ok_or_else(|| Error::Artifact("empty header line".into()))?;
        let rest: Vec<&str> = parts.collect();
        let bad = || Error::Artifact(format!("malformed trajectory header line '{line}'"));
        match key {
            "case" => case = rest.first().ok_or_else(bad)?.to_string(),
            "policy" => policy = rest.first().ok_or_else(bad)?.to_string(),
            "seed" => seed = rest.first().ok_or_else(bad)?.parse().map_err(|_| bad())?,
            "episode" => {
                episode_index = rest.first().ok_or_else(bad)?.parse().map_err(|_| bad())?
            }
            "prior" => prior_index = rest.first().ok_or_else(bad)?.parse().map_err(|_| bad())?,
            "source" => {
                source = Cell::new(
                    rest.first().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                    rest.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?,
                )
            }
            "start" => {
                start = Cell::new(
                    rest.first().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                    rest.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?,
                )
            }
            "failed" => failed = rest.first().ok_or_else(bad)? == &"true",
            _ => return Err(Error::Artifact(format!("unknown trajectory key '{key}'"))),
        }
    }
    let mut steps = Vec::new();
    let mut cumulative_hits = 0u64;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let p: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Artifact(format!("malformed trajectory step '{line}'"));
        if p.len() != 5 {
            return Err(bad());
        }
        let observation = if p[4] == "omega" {
            Observation::Terminal
        } else {
            let h: u32 = p[4].parse().map_err(|_| bad())?;
            cumulative_hits += h as u64;
            Observation::Hits(h)
        };
        steps.push(StepRecord {
            t: p[0].parse().map_err(|_| bad())?,
            pos: Cell::new(
                p[1].parse().map_err(|_| bad())?,
                p[2].parse().map_err(|_| bad())?,
            ),
            action: Action::from_name(p[3]).ok_or_else(bad)?,
            observation,
        });
    }
    let t = steps.last().map_or(0, |s| s.t);
    Ok(EpisodeRecord {
        case,
        policy,
        seed,
        episode_index,
        prior_index,
        source,
        start,
        steps,
        t,
        failed,
        cumulative_hits,
    })
}

/// Re-walks a recorded trajectory against the case dynamics and belief
/// filter, verifying internal consistency. Returns the number of verified
/// steps.
pub fn replay_trajectory(case: &CaseSpec, record: &EpisodeRecord) -> Result<usize> {
    let tables = LikelihoodTables::new(&case.grid, &case.params)?;
    let priors = initial_priors(case)?;
    if record.prior_index >= priors.beliefs.len() {
        return Err(Error::Artifact(format!(
            "prior index {} out of range",
            record.prior_index
        )));
    }
    let mut belief = priors.beliefs[record.prior_index].clone();
    let mut agent = record.start;
    for (i, step) in record.steps.iter().enumerate() {
        if step.t != i + 1 {
            return Err(Error::Artifact(format!(
                "step {} has time {}",
                i + 1,
                step.t
            )));
        }
        agent = transition(agent, step.action, &case.grid)?;
        if agent != step.pos {
            return Err(Error::Artifact(format!(
                "recorded position ({}, {}) does not match transition at t={}",
                step.pos.x, step.pos.y, step.t
            )));
        }
        let at_source = agent == record.source;
        match step.observation {
            Observation::Terminal => {
                if !at_source {
                    return Err(Error::Artifact(format!(
                        "terminal observation away from the source at t={}",
                        step.t
                    )));
                }
                if i + 1 != record.steps.len() {
                    return Err(Error::Artifact(
                        "terminal observation mid-trajectory".into(),
                    ));
                }
            }
            Observation::Hits(h) => {
                if at_source {
                    return Err(Error::Artifact(format!(
                        "hit observation on the source cell at t={}",
                        step.t
                    )));
                }
                if h > case.params.h_max {
                    return Err(Error::Artifact(format!("hit count {h} exceeds h_max")));
                }
                belief = belief
                    .shift(step.action)?
                    .bayes_update(step.observation, &tables)?;
            }
        }
    }
    let ends_terminal = matches!(
        record.steps.last().map(|s| s.observation),
        Some(Observation::Terminal)
    );
    if record.failed == ends_terminal {
        return Err(Error::Artifact(
            "failure flag inconsistent with final observation".into(),
        ));
    }
    Ok(record.steps.len())
}
