//! Inference-time scaling methods executed against the simulated world.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnswerId, Method, RunOutcome, Strategy};
use crate::simworld::{
    self, charge_parallel, charge_sequential, QueryInstance, StepCharge, WorldConfig,
};

/// A partial (or finished) solution tracked by beam search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub partial_quality: f64,
    pub steps_taken: u32,
    pub terminal: bool,
    pub tokens_so_far: u64,
    pub final_answer: Option<AnswerId>,
}

impl BeamState {
    pub fn initial() -> Self {
        BeamState {
            partial_quality: 0.0,
            steps_taken: 0,
            terminal: false,
            tokens_so_far: 0,
            final_answer: None,
        }
    }
}

/// Most frequent answer; ties go to the smallest answer id.
pub fn majority_vote(answers: &[AnswerId]) -> Result<AnswerId> {
    let mut counts: BTreeMap<AnswerId, usize> = BTreeMap::new();
    for &a in answers {
        *counts.entry(a).or_default() += 1;
    }
    let mut best: Option<(AnswerId, usize)> = None;
    for (a, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((a, c));
        }
    }
    best.map(|(a, _)| a)
        .ok_or_else(|| Error::invalid("majority_vote needs at least one answer"))
}

/// Answer of the highest-scoring candidate; ties go to the earliest candidate.
pub fn best_of_n_naive(candidates: &[(AnswerId, f64)]) -> Result<AnswerId> {
    let mut best: Option<(AnswerId, f64)> = None;
    for &(a, s) in candidates {
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((a, s));
        }
    }
    best.map(|(a, _)| a)
        .ok_or_else(|| Error::invalid("best_of_n_naive needs at least one candidate"))
}

/// Answer with the largest summed score; ties go to the smallest answer id.
pub fn best_of_n_weighted(candidates: &[(AnswerId, f64)]) -> Result<AnswerId> {
    let mut sums: BTreeMap<AnswerId, f64> = BTreeMap::new();
    for &(a, s) in candidates {
        *sums.entry(a).or_insert(0.0) += s;
    }
    let mut best: Option<(AnswerId, f64)> = None;
    for (a, s) in sums {
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((a, s));
        }
    }
    best.map(|(a, _)| a)
        .ok_or_else(|| Error::invalid("best_of_n_weighted needs at least one candidate"))
}

/// Output of one beam-search run.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    /// Final answers of the `n` retained beams, in retention order.
    pub answers: Vec<AnswerId>,
    /// Every generated token, pruned continuations included.
    pub tokens: u64,
    /// Per synchronized step, for sequential latency charging.
    pub latency_trace: Vec<StepCharge>,
}

/// One candidate in a step's selection pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEntry {
    pub state: BeamState,
    pub score: f64,
    /// True for a terminal beam carried over from the previous step.
    pub carried: bool,
    /// Tokens generated for this entry in this step (0 when carried).
    pub step_tokens: u64,
}

/// Full record of one step, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub pool: Vec<PoolEntry>,
    /// Pool indices kept, best first.
    pub retained: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamLog {
    pub steps: Vec<StepLog>,
    /// Tokens spent on forced completion at the depth limit.
    pub completion_tokens: Vec<u64>,
}

#[derive(Clone, Copy)]
struct Beam {
    state: BeamState,
    score: f64,
}

/// PRM-guided beam search with `n` active beams, `width` continuations per
/// active beam and at most `depth` steps.
///
/// Terminal beams keep competing in later selections with their last score.
/// Beams still open after `depth` steps are finished by one completion call.
pub fn beam_search<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    n: u32,
    width: u32,
    depth: u32,
    rng: &mut R,
) -> Result<BeamResult> {
    run_beam(world, query, n, width, depth, rng, None)
}

/// [`beam_search`] that also records every pool and selection.
pub fn beam_search_logged<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    n: u32,
    width: u32,
    depth: u32,
    rng: &mut R,
) -> Result<(BeamResult, BeamLog)> {
    let mut log = BeamLog::default();
    let res = run_beam(world, query, n, width, depth, rng, Some(&mut log))?;
    Ok((res, log))
}

fn run_beam<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    n: u32,
    width: u32,
    depth: u32,
    rng: &mut R,
    mut log: Option<&mut BeamLog>,
) -> Result<BeamResult> {
    if n == 0 || width == 0 || depth == 0 {
        return Err(Error::invalid("beam search needs n, width, depth >= 1"));
    }
    let n = n as usize;
    let mut beams = vec![
        Beam {
            state: BeamState::initial(),
            score: 0.0,
        };
        n
    ];
    let mut tokens = 0u64;
    let mut trace = Vec::new();
    let mut pool: Vec<PoolEntry> = Vec::with_capacity(n * width as usize);
    let mut order: Vec<usize> = Vec::with_capacity(n * width as usize);

    for _ in 0..depth {
        if beams.iter().all(|b| b.state.terminal) {
            break;
        }
        pool.clear();
        let mut active = 0u64;
        let mut max_step_tokens = 0u64;
        for b in &beams {
            if b.state.terminal {
                pool.push(PoolEntry {
                    state: b.state,
                    score: b.score,
                    carried: true,
                    step_tokens: 0,
                });
                continue;
            }
            for _ in 0..width {
                let draw = simworld::generate_step(world, query, &b.state, rng)?;
                let score = simworld::score_step(world, draw.step_quality, rng);
                tokens += draw.step_tokens;
                max_step_tokens = max_step_tokens.max(draw.step_tokens);
                active += 1;
                pool.push(PoolEntry {
                    state: draw.state,
                    score,
                    carried: false,
                    step_tokens: draw.step_tokens,
                });
            }
        }
        trace.push(StepCharge {
            active_partials: active,
            max_step_tokens,
        });

        order.clear();
        order.extend(0..pool.len());
        // Stable sort keeps expansion order among equal scores.
        order.sort_by(|&a, &b| pool[b].score.total_cmp(&pool[a].score));
        order.truncate(n);
        beams.clear();
        beams.extend(order.iter().map(|&i| Beam {
            state: pool[i].state,
            score: pool[i].score,
        }));
        if let Some(log) = log.as_deref_mut() {
            log.steps.push(StepLog {
                pool: pool.clone(),
                retained: order.clone(),
            });
        }
    }

    let mut forced = 0u64;
    let mut forced_max = 0u64;
    for b in beams.iter_mut().filter(|b| !b.state.terminal) {
        let (state, t) = simworld::complete_partial(world, query, &b.state, rng)?;
        b.state = state;
        tokens += t;
        forced += 1;
        forced_max = forced_max.max(t);
        if let Some(log) = log.as_deref_mut() {
            log.completion_tokens.push(t);
        }
    }
    if forced > 0 {
        trace.push(StepCharge {
            active_partials: forced,
            max_step_tokens: forced_max,
        });
    }

    let answers = beams
        .iter()
        .map(|b| b.state.final_answer.expect("all beams terminal"))
        .collect();
    Ok(BeamResult {
        answers,
        tokens,
        latency_trace: trace,
    })
}

/// Executes `strategy` once on `query`.
pub fn run_strategy<R: Rng + ?Sized>(
    world: &WorldConfig,
    query: &QueryInstance,
    strategy: &Strategy,
    rng: &mut R,
) -> Result<RunOutcome> {
    let lat = &world.latency;
    let (answer, tokens, latency) = match strategy.method() {
        Method::BeamSearch => {
            let (w, d) = strategy
                .width()
                .zip(strategy.depth())
                .ok_or_else(|| Error::invalid("beam strategy without width/depth"))?;
            let res = beam_search(world, query, strategy.n(), w, d, rng)?;
            let answer = majority_vote(&res.answers)?;
            (
                answer,
                res.tokens,
                charge_sequential(lat, &res.latency_trace),
            )
        }
        method => {
            let n = strategy.n() as usize;
            let candidates: Vec<(AnswerId, u64)> = (0..n)
                .map(|_| simworld::generate_candidate(world, query, rng))
                .collect();
            let tokens: u64 = candidates.iter().map(|c| c.1).sum();
            let max_tokens = candidates.iter().map(|c| c.1).max().unwrap_or(0);
            let n = n as u64;
            if method == Method::MajorityVote {
                let answers: Vec<AnswerId> = candidates.iter().map(|c| c.0).collect();
                let answer = majority_vote(&answers)?;
                (answer, tokens, charge_parallel(lat, n, max_tokens, 0))
            } else {
                let scored: Vec<(AnswerId, f64)> = candidates
                    .iter()
                    .map(|&(a, _)| (a, simworld::score_final(world, query, a, rng)))
                    .collect();
                let answer = if method == Method::BestOfNNaive {
                    best_of_n_naive(&scored)?
                } else {
                    best_of_n_weighted(&scored)?
                };
                (answer, tokens, charge_parallel(lat, n, max_tokens, n))
            }
        }
    };
    Ok(RunOutcome {
        answer,
        correct: answer == query.truth,
        tokens,
        latency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QueryId;
    use crate::simworld::{sigmoid, SimRng};
    use proptest::prelude::{any, prop_assert_eq, proptest};
    use rand::SeedableRng;

    fn query_at(d: f64) -> QueryInstance {
        QueryInstance {
            query_id: QueryId(1),
            difficulty: d,
            embedding: vec![0.0; 4],
            query_len: 64,
            truth: 0,
        }
    }

    // Exhaustive oracles over every list of length <= 6 drawn from answers 0..4.
    fn all_lists(max_len: usize, alphabet: u32) -> Vec<Vec<AnswerId>> {
        let mut out = Vec::new();
        let mut frontier: Vec<Vec<AnswerId>> = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for l in &frontier {
                for a in 0..alphabet {
                    let mut v = l.clone();
                    v.push(a);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    fn oracle_mode(v: &[AnswerId]) -> AnswerId {
        let count = |a: AnswerId| v.iter().filter(|&&x| x == a).count();
        let top = v.iter().map(|&a| count(a)).max().unwrap();
        *v.iter().filter(|&&a| count(a) == top).min().unwrap()
    }

    #[test]
    fn majority_vote_examples() {
        assert_eq!(majority_vote(&[3, 3, 7]).unwrap(), 3);
        assert_eq!(majority_vote(&[5, 2, 5, 2]).unwrap(), 2);
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn majority_vote_matches_frequency_oracle() {
        for v in all_lists(6, 4) {
            assert_eq!(majority_vote(&v).unwrap(), oracle_mode(&v), "{v:?}");
        }
    }

    #[test]
    fn best_of_n_examples() {
        assert_eq!(best_of_n_naive(&[(4, 0.1), (9, 0.9)]).unwrap(), 9);
        assert_eq!(best_of_n_naive(&[(4, 0.5), (9, 0.5)]).unwrap(), 4);
        assert!(best_of_n_naive(&[]).is_err());
        assert_eq!(
            best_of_n_weighted(&[(1, 0.6), (2, 0.4), (2, 0.4)]).unwrap(),
            2
        );
        assert!(best_of_n_weighted(&[]).is_err());
        let distinct = [(3, 0.2), (1, 0.7), (0, 0.1)];
        assert_eq!(
            best_of_n_weighted(&distinct).unwrap(),
            best_of_n_naive(&distinct).unwrap()
        );
    }

    #[test]
    fn beam_search_rejects_zero_hyperparameters() {
        let world = WorldConfig::default();
        let q = query_at(0.5);
        let mut rng = SimRng::seed_from_u64(0);
        assert!(beam_search(&world, &q, 0, 2, 2, &mut rng).is_err());
        assert!(beam_search(&world, &q, 2, 0, 2, &mut rng).is_err());
        assert!(beam_search(&world, &q, 2, 2, 0, &mut rng).is_err());
    }

    #[test]
    fn single_beam_single_width_is_one_rollout() {
        let world = WorldConfig::default();
        let q = query_at(0.5);
        let mut rng = SimRng::seed_from_u64(17);
        for _ in 0..200 {
            let (res, log) = beam_search_logged(&world, &q, 1, 1, 40, &mut rng).unwrap();
            assert_eq!(res.answers.len(), 1);
            for (k, step) in log.steps.iter().enumerate() {
                assert_eq!(step.pool.len(), 1);
                assert_eq!(step.retained, vec![0]);
                assert_eq!(step.pool[0].state.steps_taken as usize, k + 1);
            }
        }
    }

    #[test]
    fn zero_gain_rollout_matches_single_sample_accuracy() {
        // At d = 0.5 the base logit is 0 and the quality walk is symmetric,
        // so an unselected rollout succeeds with probability exactly 1/2.
        let world = WorldConfig {
            step_gain: 0.0,
            base_skill: 2.0,
            skill_slope: 4.0,
            ..Default::default()
        };
        let q = query_at(0.5);
        let mut rng = SimRng::seed_from_u64(23);
        let runs = 40_000;
        let hits = (0..runs)
            .filter(|_| beam_search(&world, &q, 1, 1, 40, &mut rng).unwrap().answers[0] == 0)
            .count();
        let rate = hits as f64 / runs as f64;
        assert!((rate - sigmoid(0.0)).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn noiseless_prm_retains_top_n_by_true_quality() {
        let world = WorldConfig {
            prm_noise: 0.0,
            ..Default::default()
        };
        let q = query_at(0.6);
        for seed in 0..300 {
            let mut rng = SimRng::seed_from_u64(seed);
            let (res, log) = beam_search_logged(&world, &q, 2, 2, 3, &mut rng).unwrap();
            assert!(log.steps.len() <= 3);
            for step in &log.steps {
                // Brute force: sort the full pool by true quality, stable on index.
                let mut idx: Vec<usize> = (0..step.pool.len()).collect();
                idx.sort_by(|&a, &b| {
                    step.pool[b]
                        .state
                        .partial_quality
                        .total_cmp(&step.pool[a].state.partial_quality)
                });
                idx.truncate(2);
                assert_eq!(step.retained, idx);
                for e in &step.pool {
                    if !e.carried {
                        assert_eq!(e.score, e.state.partial_quality);
                    }
                }
            }
            assert_eq!(res.answers.len(), 2);
        }
    }

    #[test]
    fn unit_width_noiseless_prm_keeps_every_rollout() {
        let world = WorldConfig {
            prm_noise: 0.0,
            ..Default::default()
        };
        let q = query_at(0.3);
        let mut rng = SimRng::seed_from_u64(5);
        let (_, log) = beam_search_logged(&world, &q, 4, 1, 40, &mut rng).unwrap();
        for step in &log.steps {
            assert_eq!(step.pool.len(), 4);
            let mut kept = step.retained.clone();
            kept.sort_unstable();
            assert_eq!(kept, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn beam_tokens_equal_sum_over_all_expansions() {
        let world = WorldConfig::default();
        for (seed, d) in [(1u64, 0.2), (2, 0.5), (3, 0.9)] {
            let q = query_at(d);
            let mut rng = SimRng::seed_from_u64(seed);
            // Depth 3 forces completions on most runs.
            for depth in [3, 40] {
                let (res, log) = beam_search_logged(&world, &q, 4, 4, depth, &mut rng).unwrap();
                let recount: u64 = log
                    .steps
                    .iter()
                    .flat_map(|s| s.pool.iter().map(|e| e.step_tokens))
                    .sum::<u64>()
                    + log.completion_tokens.iter().sum::<u64>();
                assert_eq!(res.tokens, recount);
                assert!(log
                    .steps
                    .iter()
                    .all(|s| s.pool.iter().all(|e| e.state.steps_taken <= depth)));
                let steps_charged =
                    log.steps.len() + usize::from(!log.completion_tokens.is_empty());
                assert_eq!(res.latency_trace.len(), steps_charged);
            }
        }
    }

    #[test]
    fn single_candidate_methods_agree() {
        let world = WorldConfig::default();
        let q = query_at(0.4);
        for seed in 0..50 {
            let outcomes: Vec<RunOutcome> = [
                Strategy::majority(1).unwrap(),
                Strategy::best_of_n(1).unwrap(),
                Strategy::weighted_best_of_n(1).unwrap(),
            ]
            .iter()
            .map(|s| run_strategy(&world, &q, s, &mut SimRng::seed_from_u64(seed)).unwrap())
            .collect();
            assert_eq!(outcomes[0].answer, outcomes[1].answer);
            assert_eq!(outcomes[1].answer, outcomes[2].answer);
            assert_eq!(outcomes[0].tokens, outcomes[1].tokens);
            assert_eq!(outcomes[1].tokens, outcomes[2].tokens);
            let scoring = world.latency.score_per_candidate_s;
            assert!((outcomes[1].latency - outcomes[0].latency - scoring).abs() < 1e-12);
            assert_eq!(outcomes[1].latency, outcomes[2].latency);
        }
    }

    #[test]
    fn run_outcome_invariants_hold() {
        let world = WorldConfig::default();
        let q = query_at(0.7);
        let mut rng = SimRng::seed_from_u64(77);
        for s in ["mv@4", "bon@8", "wbon@2", "beam@2x4x40", "beam@4x2x3"] {
            let s: Strategy = s.parse().unwrap();
            let out = run_strategy(&world, &q, &s, &mut rng).unwrap();
            assert!(out.tokens >= u64::from(s.n()));
            assert!(out.latency > 0.0);
            assert_eq!(out.correct, out.answer == q.truth);
        }
    }

    /// Probability that the correct answer wins a plurality vote of `n` draws
    /// (ties resolved towards the smaller id, as `majority_vote` does), where
    /// each draw is correct with probability `p` and otherwise uniform over the
    /// `a - 1` wrong answers. Computed by exact enumeration over count vectors.
    fn plurality_win_probability(n: usize, p: f64, a: usize, truth: usize) -> f64 {
        let q = (1.0 - p) / (a - 1) as f64;
        let probs: Vec<f64> = (0..a).map(|i| if i == truth { p } else { q }).collect();
        let mut total = 0.0;
        let mut counts = vec![0usize; a];
        fn rec(
            i: usize,
            left: usize,
            counts: &mut Vec<usize>,
            probs: &[f64],
            truth: usize,
            total: &mut f64,
            n: usize,
        ) {
            if i == counts.len() - 1 {
                counts[i] = left;
                let mut coef = 1.0;
                let mut rem = n;
                let mut prob = 1.0;
                for (k, &c) in counts.iter().enumerate() {
                    coef *= binom(rem, c);
                    rem -= c;
                    prob *= probs[k].powi(c as i32);
                }
                let tc = counts[truth];
                let wins = counts
                    .iter()
                    .enumerate()
                    .all(|(k, &c)| k == truth || c < tc || (c == tc && truth < k));
                if wins {
                    *total += coef * prob;
                }
                return;
            }
            for c in 0..=left {
                counts[i] = c;
                rec(i + 1, left - c, counts, probs, truth, total, n);
            }
        }
        fn binom(n: usize, k: usize) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        rec(0, n, &mut counts, &probs, truth, &mut total, n);
        total
    }

    #[test]
    fn majority_of_five_matches_exact_plurality_probability() {
        let world = WorldConfig {
            base_skill: 2.0,
            ..Default::default()
        };
        let mut q = query_at(0.0);
        let s = Strategy::majority(5).unwrap();
        let p1 = sigmoid(2.0);
        let runs = 20_000;
        let mut expected = 0.0;
        let mut hits = 0usize;
        // Average over truths so the id tie-break is exercised symmetrically.
        for truth in 0..10u32 {
            q.truth = truth;
            expected += plurality_win_probability(5, p1, 10, truth as usize) / 10.0;
            let mut rng = SimRng::seed_from_u64(1000 + u64::from(truth));
            hits += (0..runs / 10)
                .filter(|_| run_strategy(&world, &q, &s, &mut rng).unwrap().correct)
                .count();
        }
        let rate = hits as f64 / runs as f64;
        assert!(rate > p1);
        assert!(
            (rate - expected).abs() < 0.01,
            "rate {rate} expected {expected}"
        );
    }

    #[test]
    fn noiseless_reward_best_of_n_finds_any_correct_candidate() {
        let world = WorldConfig {
            reward_noise: 0.0,
            ..Default::default()
        };
        let q = query_at(0.8);
        let s = Strategy::best_of_n(8).unwrap();
        let p1 = q.single_sample_accuracy(&world);
        let runs = 20_000;
        let mut rng = SimRng::seed_from_u64(31);
        let hits = (0..runs)
            .filter(|_| run_strategy(&world, &q, &s, &mut rng).unwrap().correct)
            .count();
        let expected = 1.0 - (1.0 - p1).powi(8);
        assert!((hits as f64 / runs as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn uninformative_reward_reduces_best_of_n_to_one_sample() {
        let world = WorldConfig {
            reward_noise: 1e6,
            ..Default::default()
        };
        let q = query_at(0.5);
        let s = Strategy::best_of_n(8).unwrap();
        let runs = 40_000;
        let mut rng = SimRng::seed_from_u64(37);
        let hits = (0..runs)
            .filter(|_| run_strategy(&world, &q, &s, &mut rng).unwrap().correct)
            .count();
        let rate = hits as f64 / runs as f64;
        assert!(
            (rate - q.single_sample_accuracy(&world)).abs() < 0.01,
            "rate {rate}"
        );
    }

    /// Success rate and mean tokens of `strategy` at difficulty `d`.
    fn rate_and_tokens(world: &WorldConfig, d: f64, strategy: &Strategy, seed: u64) -> (f64, f64) {
        let q = query_at(d);
        let runs = 3000;
        let mut rng = SimRng::seed_from_u64(seed);
        let (mut hits, mut tokens) = (0usize, 0u64);
        for _ in 0..runs {
            let o = run_strategy(world, &q, strategy, &mut rng).unwrap();
            hits += usize::from(o.correct);
            tokens += o.tokens;
        }
        (hits as f64 / runs as f64, tokens as f64 / runs as f64)
    }

    #[test]
    fn method_preference_reverses_with_difficulty() {
        // At a matched token budget, PRM-pruned search wins on easy queries
        // (positive quality drift) and best-of-N wins on hard ones.
        let world = WorldConfig::default();
        let beam = Strategy::beam(4, 4, 40).unwrap();
        for (d, beam_should_win) in [(0.2, true), (0.9, false)] {
            let (beam_rate, beam_tokens) = rate_and_tokens(&world, d, &beam, 41);
            let n = (beam_tokens / world.tokens_per_candidate_mean)
                .floor()
                .max(1.0) as u32;
            let (bon_rate, _) = rate_and_tokens(&world, d, &Strategy::best_of_n(n).unwrap(), 43);
            assert_eq!(
                beam_rate > bon_rate,
                beam_should_win,
                "d={d}: beam {beam_rate} vs bon@{n} {bon_rate}"
            );
        }
    }

    #[test]
    fn beam_search_is_slower_than_parallel_best_of_n() {
        let world = WorldConfig::default();
        let q = query_at(0.5);
        let mut rng = SimRng::seed_from_u64(59);
        let mean = |s: &Strategy, rng: &mut SimRng| {
            let runs = 2000;
            let (mut t, mut l) = (0.0, 0.0);
            for _ in 0..runs {
                let o = run_strategy(&world, &q, s, rng).unwrap();
                t += o.tokens as f64;
                l += o.latency;
            }
            (t / runs as f64, l / runs as f64)
        };
        let (beam_t, beam_l) = mean(&Strategy::beam(4, 4, 40).unwrap(), &mut rng);
        let (bon_t, bon_l) = mean(&Strategy::best_of_n(16).unwrap(), &mut rng);
        assert!(beam_l > bon_l, "latency {beam_l} vs {bon_l}");
        assert!(beam_t.max(bon_t) / beam_t.min(bon_t) <= 2.0);
    }

    proptest! {
        #[test]
        fn weighted_equals_naive_for_distinct_answers(
            scores in proptest::collection::vec(-3.0f64..3.0, 1..8),
            perm_seed in any::<u64>(),
        ) {
            let mut ids: Vec<AnswerId> = (0..scores.len() as u32).collect();
            let mut rng = SimRng::seed_from_u64(perm_seed);
            rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
            let cands: Vec<(AnswerId, f64)> = ids.into_iter().zip(scores).collect();
            prop_assert_eq!(best_of_n_weighted(&cands).unwrap(), best_of_n_naive(&cands).unwrap());
        }
    }
}
