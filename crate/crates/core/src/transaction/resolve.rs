use std::ops::Range;

use rayon::prelude::*;

use crate::amplitude::Ket;
use crate::network::Network;
use crate::rng::TrialRng;

use super::{
    detector_candidates, EngineError, MeasurementContext, Outcome, OutcomeDistribution, PhotonOutcome, Provenance,
    TransactionCandidate,
};

/// Inverse-CDF sampler over a distribution's candidates in canonical order.
#[derive(Debug, Clone)]
pub struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(weights: impl IntoIterator<Item = f64>) -> Result<Self, EngineError> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(EngineError::EmptyDistribution);
        }
        Ok(Sampler { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Index of the candidate selected by one uniform draw.
    pub fn pick(&self, rng: &mut TrialRng) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.uniform() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive())
    }

    fn last_positive(&self) -> usize {
        let mut prev = 0.0;
        let mut last = 0;
        for (i, &c) in self.cumulative.iter().enumerate() {
            if c > prev {
                last = i;
            }
            prev = c;
        }
        last
    }
}

impl OutcomeDistribution {
    pub fn sampler(&self) -> Result<Sampler, EngineError> {
        Sampler::new(self.candidates.iter().map(|c| c.weight))
    }
}

/// Picks one candidate with probability proportional to its weight.
pub fn resolve_flat<'a>(d: &'a OutcomeDistribution, rng: &mut TrialRng) -> Result<&'a Outcome, EngineError> {
    let i = d.sampler()?.pick(rng);
    Ok(&d.candidates[i].outcome)
}

/// Counts outcome indices over `trials` independent trials. Trial `t` draws
/// from its own stream, so the counts do not depend on `workers`.
pub fn parallel_counts<F>(trials: u64, seed: u64, workers: usize, outcomes: usize, draw: F) -> Vec<u64>
where
    F: Fn(&mut TrialRng, u64) -> Option<usize> + Sync,
{
    counts_in_range(0..trials, seed, workers, outcomes, draw)
}

pub(crate) fn counts_in_range<F>(range: Range<u64>, seed: u64, workers: usize, outcomes: usize, draw: F) -> Vec<u64>
where
    F: Fn(&mut TrialRng, u64) -> Option<usize> + Sync,
{
    const BLOCK: u64 = 1 << 14;
    let blocks = (range.end - range.start).div_ceil(BLOCK);
    let count_block = |b: u64| {
        let mut counts = vec![0u64; outcomes];
        let lo = range.start + b * BLOCK;
        for t in lo..(lo + BLOCK).min(range.end) {
            let mut rng = TrialRng::new(seed, t);
            if let Some(i) = draw(&mut rng, t) {
                counts[i] += 1;
            }
        }
        counts
    };
    let merge = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    if workers <= 1 {
        return (0..blocks).map(count_block).fold(vec![0; outcomes], merge);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| {
        (0..blocks)
            .into_par_iter()
            .map(count_block)
            .reduce(|| vec![0; outcomes], merge)
    })
}

#[derive(Debug, Clone)]
struct Stage {
    rank: u32,
    fire: f64,
    /// Candidate indices with conditional weights.
    picks: Vec<(usize, f64)>,
}

/// Rank-by-rank resolution: at each rank carrying absorbers the transaction
/// completes there with the absorbed weight of the remaining offer wave,
/// otherwise the wave is renormalized and continues.
#[derive(Debug, Clone)]
pub struct HierarchyPlan {
    outcomes: Vec<Outcome>,
    stages: Vec<Stage>,
    final_picks: Vec<(usize, f64)>,
}

impl HierarchyPlan {
    pub fn new(n: &Network, ctx: &MeasurementContext) -> Result<Self, EngineError> {
        ctx.check(n)?;
        let diags = n.validate();
        if !diags.is_empty() {
            return Err(crate::NetworkError::Invalid(diags).into());
        }
        let mut state: Ket = n.initial_ket()?;
        let mut outcomes = Vec::new();
        let mut stages = Vec::new();
        for rank in n.ranks() {
            let step = n.propagate_rank(rank, &state)?;
            let absorbed: f64 = step.absorbed.iter().map(|a| a.ket.norm_sq()).sum();
            if absorbed > 0.0 {
                let remaining = absorbed + step.continuing.norm_sq();
                if ctx.include_absorption {
                    let mut picks = Vec::new();
                    for a in &step.absorbed {
                        for (s, amp) in a.ket.iter() {
                            picks.push((outcomes.len(), amp.norm_sqr() / absorbed));
                            outcomes.push(Outcome::new(n, s.clone(), PhotonOutcome::Absorbed(a.box_id.clone())));
                        }
                    }
                    stages.push(Stage { rank, fire: absorbed / remaining, picks });
                }
                if step.continuing.is_empty() {
                    state = step.continuing;
                    break;
                }
                state = step.continuing.normalized()?;
            } else {
                state = step.continuing;
            }
        }
        let detector_state = ctx.rebase(&state)?;
        let mut final_picks = Vec::new();
        let mut last = detector_candidates(n, &detector_state)?;
        last.sort_by(|a, b| a.outcome.canonical_cmp(&b.outcome));
        for c in last {
            final_picks.push((outcomes.len(), c.weight));
            outcomes.push(c.outcome);
        }
        if final_picks.is_empty() && stages.is_empty() {
            return Err(EngineError::EmptyDistribution);
        }
        Ok(HierarchyPlan { outcomes, stages, final_picks })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Ranks at which the transaction may complete early, with the
    /// conditional probability of completing there.
    pub fn stages(&self) -> Vec<(u32, f64)> {
        self.stages.iter().map(|s| (s.rank, s.fire)).collect()
    }

    /// Exact outcome probabilities implied by the plan.
    pub fn distribution(&self) -> OutcomeDistribution {
        let mut weights = vec![0.0; self.outcomes.len()];
        let mut survive = 1.0;
        for s in &self.stages {
            for &(i, w) in &s.picks {
                weights[i] += survive * s.fire * w;
            }
            survive *= 1.0 - s.fire;
        }
        let final_total: f64 = self.final_picks.iter().map(|p| p.1).sum();
        for &(i, w) in &self.final_picks {
            weights[i] += survive * w / final_total;
        }
        let candidates = self
            .outcomes
            .iter()
            .zip(weights)
            .map(|(o, weight)| TransactionCandidate { outcome: o.clone(), weight, amplitude: None })
            .collect();
        OutcomeDistribution::new(candidates, Provenance::Hierarchical, None)
    }

    /// Index into `outcomes` of one resolved trial.
    pub fn sample(&self, rng: &mut TrialRng) -> usize {
        for s in &self.stages {
            if rng.uniform() < s.fire {
                let sampler = Sampler::new(s.picks.iter().map(|p| p.1)).expect("stage has weight");
                return s.picks[sampler.pick(rng)].0;
            }
        }
        let sampler = Sampler::new(self.final_picks.iter().map(|p| p.1)).expect("final weight");
        self.final_picks[sampler.pick(rng)].0
    }
}

/// Resolves one trial hierarchically.
pub fn resolve_hierarchical<'a>(plan: &'a HierarchyPlan, rng: &mut TrialRng) -> &'a Outcome {
    &plan.outcomes[plan.sample(rng)]
}
