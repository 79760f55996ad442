//! Parameterized synthetic generation world.
//!
//! Stands in for a generator LLM and a process reward model: queries carry a
//! latent difficulty, candidates are correct with a difficulty-dependent
//! probability, reward scores are noisy indicators of correctness, and token
//! and latency costs are charged analytically (never read from the host clock).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnswerId, Method, QueryId, Strategy};
use crate::strategy::BeamState;

/// Random source used throughout the simulation.
pub type SimRng = ChaCha8Rng;

/// Steps after which a partial solution is certain to have terminated.
pub const SOFT_DEPTH: u32 = 8;

/// Standard deviation of the per-step quality increment.
pub const STEP_QUALITY_SD: f64 = 0.25;

const EMBEDDING_NOISE_SD: f64 = 0.1;
const BUMP_COUNT: usize = 8;
const BUMP_WIDTH: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyParams {
    /// Per-call overhead in seconds.
    pub setup_s: f64,
    /// Seconds per decoded token on the longest sequence of a call.
    pub per_token_s: f64,
    /// Marginal batching cost per concurrently generated sequence.
    pub parallel_n_s: f64,
    /// Reward-model call overhead.
    pub score_call_s: f64,
    pub score_per_candidate_s: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams {
            setup_s: 0.20,
            per_token_s: 0.004,
            parallel_n_s: 0.01,
            score_call_s: 0.05,
            score_per_candidate_s: 0.002,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("world.latency.setup_s", self.setup_s),
            ("world.latency.per_token_s", self.per_token_s),
            ("world.latency.parallel_n_s", self.parallel_n_s),
            ("world.latency.score_call_s", self.score_call_s),
            (
                "world.latency.score_per_candidate_s",
                self.score_per_candidate_s,
            ),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if self.per_token_s <= 0.0 {
            return Err(Error::config("world.latency.per_token_s", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    pub answer_space: u32,
    pub embedding_dim: usize,
    pub difficulty_alpha: f64,
    pub difficulty_beta: f64,
    /// Single-sample logit at difficulty 0.
    pub base_skill: f64,
    /// Logit drop per unit of difficulty.
    pub skill_slope: f64,
    /// Scale of the difficulty-dependent per-step quality drift.
    pub step_gain: f64,
    pub reward_noise: f64,
    pub prm_noise: f64,
    pub tokens_per_candidate_mean: f64,
    pub tokens_per_step_mean: f64,
    /// When false, every sequence has exactly the (rounded) mean length.
    pub token_noise: bool,
    pub latency: LatencyParams,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 7,
            answer_space: 10,
            embedding_dim: 32,
            difficulty_alpha: 2.0,
            difficulty_beta: 2.0,
            base_skill: 0.0,
            skill_slope: 4.0,
            step_gain: 0.6,
            reward_noise: 0.5,
            prm_noise: 0.35,
            tokens_per_candidate_mean: 220.0,
            tokens_per_step_mean: 28.0,
            token_noise: true,
            latency: LatencyParams::default(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.answer_space < 2 {
            return Err(Error::config("world.answer_space", "must be >= 2"));
        }
        if self.embedding_dim < 1 {
            return Err(Error::config("world.embedding_dim", "must be >= 1"));
        }
        let positive = [
            ("world.difficulty_alpha", self.difficulty_alpha),
            ("world.difficulty_beta", self.difficulty_beta),
            ("world.skill_slope", self.skill_slope),
            (
                "world.tokens_per_candidate_mean",
                self.tokens_per_candidate_mean,
            ),
            ("world.tokens_per_step_mean", self.tokens_per_step_mean),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::config(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !self.base_skill.is_finite() {
            return Err(Error::config("world.base_skill", "must be finite"));
        }
        if !(self.step_gain > 0.0 && self.step_gain <= 1.0) && self.step_gain != 0.0 {
            return Err(Error::config("world.step_gain", "must lie in [0, 1]"));
        }
        for (name, v) in [
            ("world.reward_noise", self.reward_noise),
            ("world.prm_noise", self.prm_noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        self.latency.validate()
    }
}

/// One simulated query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInstance {
    pub query_id: QueryId,
    pub difficulty: f64,
    pub embedding: Vec<f64>,
    pub query_len: u32,
    pub truth: AnswerId,
}

impl QueryInstance {
    /// Single-sample success probability of this query under `world`.
    pub fn single_sample_accuracy(&self, world: &WorldConfig) -> f64 {
        sigmoid(world.base_skill - world.skill_slope * self.difficulty)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable mixing of a base seed with a sequence of words.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

fn strategy_key(s: &Strategy) -> u64 {
    let method = match s.method() {
        Method::MajorityVote => 1u64,
        Method::BestOfNNaive => 2,
        Method::BestOfNWeighted => 3,
        Method::BeamSearch => 4,
    };
    (method << 56)
        ^ (u64::from(s.n()) << 32)
        ^ (u64::from(s.width().unwrap_or(0)) << 16)
        ^ u64::from(s.depth().unwrap_or(0))
}

/// Seed-domain separators, so trace collection and evaluation never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedDomain {
    Queries,
    Traces,
    Evaluation,
}

impl SeedDomain {
    fn tag(self) -> u64 {
        match self {
            SeedDomain::Queries => 0x5155_4552,
            SeedDomain::Traces => 0x5452_4143,
            SeedDomain::Evaluation => 0x4556_414c,
        }
    }
}

/// Independent rng for one (query, strategy, repeat) cell.
pub fn cell_rng(
    seed: u64,
    domain: SeedDomain,
    query: QueryId,
    strategy: &Strategy,
    repeat: u32,
) -> SimRng {
    SimRng::seed_from_u64(derive_seed(
        seed,
        &[
            domain.tag(),
            query.0,
            strategy_key(strategy),
            u64::from(repeat),
        ],
    ))
}

fn difficulty_features(d: f64, dim: usize) -> Vec<f64> {
    let bumps: Vec<f64> = (0..BUMP_COUNT)
        .map(|k| {
            let c = k as f64 / (BUMP_COUNT - 1) as f64;
            (-(d - c).powi(2) / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp()
        })
        .collect();
    (0..dim).map(|i| bumps[i % BUMP_COUNT]).collect()
}

/// Samples `count` queries with ids `0..count`. Each query draws from its own
/// rng derived from `(seed, query_id)`, so a query is reproducible on its own.
pub fn sample_queries(config: &WorldConfig, count: usize) -> Result<Vec<QueryInstance>> {
    config.validate()?;
    if count == 0 {
        return Err(Error::invalid("query count must be >= 1"));
    }
    let beta = Beta::new(config.difficulty_alpha, config.difficulty_beta)
        .map_err(|e| Error::config("world.difficulty_alpha", e.to_string()))?;
    Ok((0..count as u64)
        .map(|id| {
            let mut rng =
                SimRng::seed_from_u64(derive_seed(config.seed, &[SeedDomain::Queries.tag(), id]));
            let difficulty: f64 = beta.sample(&mut rng);
            let truth = rng.random_range(0..config.answer_space);
            let embedding = difficulty_features(difficulty, config.embedding_dim)
                .into_iter()
                .map(|v| v + EMBEDDING_NOISE_SD * rng.sample::<f64, _>(StandardNormal))
                .collect();
            QueryInstance {
                query_id: QueryId(id),
                difficulty,
                embedding,
                query_len: (32.0 + 96.0 * difficulty).round() as u32,
                truth,
            }
        })
        .collect())
}

fn draw_answer<R: Rng + ?Sized>(
    world: &WorldConfig,
    truth: AnswerId,
    correct: bool,
    rng: &mut R,
) -> AnswerId {
    if correct {
        truth
    } else {
        let k = rng.random_range(0..world.answer_space - 1);
        if k >= truth {
            k + 1
        } else {
            k
        }
    }
}

fn draw_length<R: Rng + ?Sized>(mean: f64, noisy: bool, rng: &mut R) -> u64 {
    if !noisy || mean <= 1.0 {
        return mean.round().max(1.0) as u64;
    }
    let extra: f64 = Poisson::new(mean - 1.0)
        .expect("mean validated > 1")
        .sample(rng);
    1 + extra as u64
}

/// One independent full solution: `(answer, tokens)`.
pub fn generate_candidate<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    rng: &mut R,
) -> (AnswerId, u64) {
    let correct = rng.random::<f64>() < query.single_sample_accuracy(world);
    let answer = draw_answer(world, query.truth, correct, rng);
    let tokens = draw_length(world.tokens_per_candidate_mean, world.token_noise, rng);
    (answer, tokens)
}

/// Result of extending a partial solution by one reasoning step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDraw {
    pub state: BeamState,
    pub step_tokens: u64,
    pub step_quality: f64,
}

/// Mean change of accumulated quality per step at difficulty `d`.
/// Positive below the difficulty midpoint, negative above it.
pub fn step_drift(step_gain: f64, d: f64) -> f64 {
    step_gain * (1.0 - d) - 0.5 * step_gain
}

fn final_logit(world: &WorldConfig, query: &QueryInstance, quality: f64) -> f64 {
    world.base_skill - world.skill_slope * query.difficulty + quality
}

/// Extends a non-terminal partial solution by one step.
///
/// The new partial terminates with probability `min(1, steps_before / SOFT_DEPTH)`;
/// on termination its answer is correct with probability
/// `sigmoid(base_skill - skill_slope * d + accumulated_quality)`.
pub fn generate_step<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    parent: &BeamState,
    rng: &mut R,
) -> Result<StepDraw> {
    if parent.terminal {
        return Err(Error::State(
            "cannot extend a terminal partial solution".into(),
        ));
    }
    let z: f64 = rng.sample(StandardNormal);
    let quality = parent.partial_quality
        + step_drift(world.step_gain, query.difficulty)
        + STEP_QUALITY_SD * z;
    let stop_p = (f64::from(parent.steps_taken) / f64::from(SOFT_DEPTH)).min(1.0);
    let terminal = rng.random::<f64>() < stop_p;
    let final_answer = if terminal {
        let correct = rng.random::<f64>() < sigmoid(final_logit(world, query, quality));
        Some(draw_answer(world, query.truth, correct, rng))
    } else {
        None
    };
    let step_tokens = draw_length(world.tokens_per_step_mean, world.token_noise, rng);
    Ok(StepDraw {
        state: BeamState {
            partial_quality: quality,
            steps_taken: parent.steps_taken + 1,
            terminal,
            tokens_so_far: parent.tokens_so_far + step_tokens,
            final_answer,
        },
        step_tokens,
        step_quality: quality,
    })
}

/// Finishes a partial solution in one generate-to-completion call, charged as
/// one candidate-length draw. Returns the terminal state and the tokens spent.
pub fn complete_partial<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    partial: &BeamState,
    rng: &mut R,
) -> Result<(BeamState, u64)> {
    if partial.terminal {
        return Err(Error::State("partial solution already terminal".into()));
    }
    let correct = rng.random::<f64>() < sigmoid(final_logit(world, query, partial.partial_quality));
    let answer = draw_answer(world, query.truth, correct, rng);
    let tokens = draw_length(world.tokens_per_candidate_mean, world.token_noise, rng);
    Ok((
        BeamState {
            terminal: true,
            final_answer: Some(answer),
            tokens_so_far: partial.tokens_so_far + tokens,
            ..*partial
        },
        tokens,
    ))
}

/// Outcome-reward score of a complete answer: correctness indicator plus noise.
pub fn score_final<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    answer: AnswerId,
    rng: &mut R,
) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let hit = if answer == query.truth { 1.0 } else { 0.0 };
    hit + world.reward_noise * z
}

/// Process-reward score of a partial solution.
pub fn score_step<R: Rng + ?Sized>(world: &WorldConfig, step_quality: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    step_quality + world.prm_noise * z
}

/// Counts for one synchronized beam-search step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCharge {
    pub active_partials: u64,
    pub max_step_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatencyMode {
    /// One batched generation call followed by at most one scoring call.
    Parallel {
        n: u64,
        max_tokens: u64,
        score_candidates: u64,
    },
    /// One generation call and one scoring call per step.
    Sequential(Vec<StepCharge>),
}

pub fn charge_latency(params: &LatencyParams, mode: &LatencyMode) -> f64 {
    match mode {
        LatencyMode::Parallel {
            n,
            max_tokens,
            score_candidates,
        } => charge_parallel(params, *n, *max_tokens, *score_candidates),
        LatencyMode::Sequential(steps) => charge_sequential(params, steps),
    }
}

pub fn charge_parallel(p: &LatencyParams, n: u64, max_tokens: u64, score_candidates: u64) -> f64 {
    p.setup_s
        + p.per_token_s * max_tokens as f64
        + p.parallel_n_s * n as f64
        + p.score_call_s
        + p.score_per_candidate_s * score_candidates as f64
}

pub fn charge_sequential(p: &LatencyParams, steps: &[StepCharge]) -> f64 {
    steps
        .iter()
        .map(|s| charge_parallel(p, s.active_partials, s.max_step_tokens, s.active_partials))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_ne, proptest};

    fn query_at(d: f64, truth: AnswerId) -> QueryInstance {
        QueryInstance {
            query_id: QueryId(0),
            difficulty: d,
            embedding: vec![0.0; 4],
            query_len: 64,
            truth,
        }
    }

    #[test]
    fn sample_queries_is_reproducible() {
        let cfg = WorldConfig {
            difficulty_alpha: 1.0,
            difficulty_beta: 1.0,
            ..Default::default()
        };
        let a = sample_queries(&cfg, 3).unwrap();
        let b = sample_queries(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        for q in &a {
            assert!((0.0..=1.0).contains(&q.difficulty));
            assert_eq!(q.embedding.len(), cfg.embedding_dim);
            assert_eq!(q.query_len, (32.0 + 96.0 * q.difficulty).round() as u32);
            assert!(q.truth < cfg.answer_space);
        }
        // A query does not depend on how many others were sampled.
        assert_eq!(sample_queries(&cfg, 10).unwrap()[..3], a[..]);
    }

    #[test]
    fn sample_queries_rejects_zero_and_bad_config() {
        assert!(sample_queries(&WorldConfig::default(), 0).is_err());
        let bad = WorldConfig {
            answer_space: 1,
            ..Default::default()
        };
        assert!(matches!(sample_queries(&bad, 3), Err(Error::Config { .. })));
    }

    #[test]
    fn difficulty_mean_matches_beta_closed_form() {
        let cfg = WorldConfig {
            difficulty_alpha: 2.0,
            difficulty_beta: 5.0,
            ..Default::default()
        };
        let qs = sample_queries(&cfg, 10_000).unwrap();
        let mean = qs.iter().map(|q| q.difficulty).sum::<f64>() / qs.len() as f64;
        assert!((mean - 2.0 / 7.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn candidate_accuracy_matches_sigmoid() {
        let world = WorldConfig {
            base_skill: 2.0,
            skill_slope: 4.0,
            ..Default::default()
        };
        let q = query_at(0.0, 3);
        let mut rng = SimRng::seed_from_u64(11);
        let draws = 200_000;
        let hits = (0..draws)
            .filter(|_| generate_candidate(&world, &q, &mut rng).0 == q.truth)
            .count();
        let rate = hits as f64 / draws as f64;
        assert!((rate - sigmoid(2.0)).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn binary_answer_space_wrong_answer_is_complement() {
        let world = WorldConfig {
            answer_space: 2,
            base_skill: -40.0,
            ..Default::default()
        };
        let mut rng = SimRng::seed_from_u64(5);
        for truth in 0..2 {
            let q = query_at(0.5, truth);
            for _ in 0..100 {
                assert_eq!(generate_candidate(&world, &q, &mut rng).0, 1 - truth);
            }
        }
    }

    #[test]
    fn candidate_tokens_are_at_least_one_and_mean_matches() {
        let world = WorldConfig::default();
        let q = query_at(0.3, 0);
        let mut rng = SimRng::seed_from_u64(3);
        let n = 20_000;
        let mut total = 0;
        for _ in 0..n {
            let (_, t) = generate_candidate(&world, &q, &mut rng);
            assert!(t >= 1);
            total += t;
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 220.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn same_seed_same_draws() {
        let world = WorldConfig::default();
        let q = query_at(0.4, 2);
        let a = generate_candidate(&world, &q, &mut SimRng::seed_from_u64(99));
        let b = generate_candidate(&world, &q, &mut SimRng::seed_from_u64(99));
        assert_eq!(a, b);
        let s1 = score_final(&world, &q, 2, &mut SimRng::seed_from_u64(4));
        let s2 = score_final(&world, &q, 2, &mut SimRng::seed_from_u64(4));
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    #[test]
    fn stepping_terminal_state_fails() {
        let world = WorldConfig::default();
        let q = query_at(0.4, 2);
        let done = BeamState {
            terminal: true,
            final_answer: Some(1),
            ..BeamState::initial()
        };
        let mut rng = SimRng::seed_from_u64(1);
        assert!(matches!(
            generate_step(&world, &q, &done, &mut rng),
            Err(Error::State(_))
        ));
        assert!(complete_partial(&world, &q, &done, &mut rng).is_err());
    }

    #[test]
    fn first_step_never_terminates_and_eighth_always_does() {
        let world = WorldConfig::default();
        let q = query_at(0.4, 2);
        let mut rng = SimRng::seed_from_u64(8);
        for _ in 0..1000 {
            let d = generate_step(&world, &q, &BeamState::initial(), &mut rng).unwrap();
            assert!(!d.state.terminal);
            assert_eq!(d.state.steps_taken, 1);
            assert!(d.step_tokens >= 1);
        }
        let deep = BeamState {
            steps_taken: SOFT_DEPTH,
            ..BeamState::initial()
        };
        for _ in 0..100 {
            let d = generate_step(&world, &q, &deep, &mut rng).unwrap();
            assert!(d.state.terminal);
            assert!(d.state.final_answer.is_some());
        }
    }

    #[test]
    fn noiseless_final_score_is_indicator() {
        let world = WorldConfig {
            reward_noise: 0.0,
            ..Default::default()
        };
        let q = query_at(0.5, 4);
        let mut rng = SimRng::seed_from_u64(2);
        assert_eq!(score_final(&world, &q, 4, &mut rng), 1.0);
        assert_eq!(score_final(&world, &q, 5, &mut rng), 0.0);
        let w0 = WorldConfig {
            prm_noise: 0.0,
            ..Default::default()
        };
        assert_eq!(score_step(&w0, 0.37, &mut rng), 0.37);
    }

    #[test]
    fn single_sample_accuracy_is_monotone_in_difficulty() {
        let world = WorldConfig::default();
        let mut rng = SimRng::seed_from_u64(21);
        let mut prev = 1.0;
        for k in 0..10 {
            let q = query_at(k as f64 / 9.0, 0);
            let draws = 10_000;
            let hits = (0..draws)
                .filter(|_| generate_candidate(&world, &q, &mut rng).0 == 0)
                .count();
            let rate = hits as f64 / draws as f64;
            assert!(rate <= prev + 0.01, "rate rose at grid point {k}");
            prev = rate;
        }
    }

    #[test]
    fn latency_examples() {
        let p = LatencyParams::default();
        let floor = charge_latency(
            &p,
            &LatencyMode::Parallel {
                n: 1,
                max_tokens: 0,
                score_candidates: 0,
            },
        );
        assert!((floor - (p.setup_s + p.score_call_s + p.parallel_n_s)).abs() < 1e-15);
        let zero_batch = LatencyParams {
            parallel_n_s: 0.0,
            ..p
        };
        assert_eq!(
            charge_parallel(&zero_batch, 1, 0, 0),
            zero_batch.setup_s + zero_batch.score_call_s
        );

        let one = StepCharge {
            active_partials: 16,
            max_step_tokens: 40,
        };
        assert_eq!(
            charge_sequential(&p, &[one]),
            charge_parallel(&p, 16, 40, 16)
        );
    }

    #[test]
    fn sequential_costs_more_than_parallel_at_equal_tokens() {
        let p = LatencyParams::default();
        // 40 steps of 25 tokens vs one call producing the same 1000 tokens.
        let steps = vec![
            StepCharge {
                active_partials: 4,
                max_step_tokens: 25,
            };
            40
        ];
        let seq = charge_sequential(&p, &steps);
        let par = charge_parallel(&p, 4, 1000, 4);
        assert!(seq > par, "{seq} vs {par}");
        let expected_gap = 39.0 * (p.setup_s + p.score_call_s)
            + 39.0 * 4.0 * (p.parallel_n_s + p.score_per_candidate_s);
        assert!((seq - par - expected_gap).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn sequential_latency_is_additive(
            a in proptest::collection::vec((0u64..64, 0u64..200), 0..10),
            b in proptest::collection::vec((0u64..64, 0u64..200), 0..10),
        ) {
            let p = LatencyParams::default();
            let to_steps = |v: &[(u64, u64)]| -> Vec<StepCharge> {
                v.iter().map(|&(a, t)| StepCharge { active_partials: a, max_step_tokens: t }).collect()
            };
            let (sa, sb) = (to_steps(&a), to_steps(&b));
            let joined: Vec<StepCharge> = sa.iter().chain(sb.iter()).copied().collect();
            let lhs = charge_sequential(&p, &joined);
            let rhs = charge_sequential(&p, &sa) + charge_sequential(&p, &sb);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn derived_seeds_differ_by_repeat(seed in any::<u64>(), q in any::<u64>(), r in 0u32..1000) {
            let s = Strategy::majority(4).unwrap();
            let a = derive_seed(seed, &[SeedDomain::Traces.tag(), q, strategy_key(&s), u64::from(r)]);
            let b = derive_seed(seed, &[SeedDomain::Traces.tag(), q, strategy_key(&s), u64::from(r) + 1]);
            prop_assert_ne!(a, b);
        }
    }
}
