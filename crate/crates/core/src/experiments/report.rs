use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::transaction::{
    chsh, chsh_grid_search, chsh_monte_carlo, detected_at, enumerate_transactions, parallel_counts, post_select,
    spin_correlation, ChshSettings, OutcomeDistribution, SamplingInfo,
};

use super::{basis_name, usage, ChshPlan, ExperimentError, Scenario};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: String,
    pub count: Option<u64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextReport {
    pub atoms: BTreeMap<String, String>,
    pub include_absorption: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSelectionStats {
    pub detector: String,
    /// Fraction of all trials (or probability mass) that was kept.
    pub acceptance: f64,
    pub conditional: Vec<OutcomeRow>,
    /// Spin-product correlation of the kept pairs, for two-atom networks.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshStats {
    /// a, a′, b, b′ in degrees from +z in the x-z plane.
    pub settings_deg: [f64; 4],
    pub grid_step_deg: Option<f64>,
    pub s: f64,
    /// E(a,b), E(a,b′), E(a′,b), E(a′,b′).
    pub correlations: Option<[f64; 4]>,
    pub std_error: Option<f64>,
    pub pairs: Option<u64>,
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_selection: Option<PostSelectionStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chsh: Option<ChshStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema: u32,
    pub scenario: String,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub params: BTreeMap<String, String>,
    pub context: ContextReport,
    pub outcomes: Vec<OutcomeRow>,
    /// Totals per photon outcome.
    pub marginals: Vec<OutcomeRow>,
    pub statistics: Statistics,
    pub wall_time_ms: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let r: RunReport = serde_json::from_str(text).map_err(|e| ExperimentError::Usage(format!("bad report: {e}")))?;
        if r.schema != REPORT_SCHEMA {
            return usage(format!("unsupported report schema {}", r.schema));
        }
        Ok(r)
    }

    /// `outcome,count,probability`, one row per outcome; count is empty in
    /// exact mode.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["outcome", "count", "probability"]).expect("in-memory write");
        for row in &self.outcomes {
            let count = row.count.map(|c| c.to_string()).unwrap_or_default();
            w.write_record([row.outcome.as_str(), count.as_str(), row.probability.to_string().as_str()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Same report with the wall time zeroed, for comparing runs.
    pub fn untimed(&self) -> Self {
        RunReport { wall_time_ms: 0.0, ..self.clone() }
    }

    pub fn probability(&self, outcome: &str) -> f64 {
        self.outcomes.iter().chain(&self.marginals).find(|r| r.outcome == outcome).map_or(0.0, |r| r.probability)
    }
}

fn context_report(s: &Scenario) -> ContextReport {
    ContextReport {
        atoms: s.context.atom_basis.iter().map(|(a, b)| (a.clone(), basis_name(*b))).collect(),
        include_absorption: s.context.include_absorption,
    }
}

fn rows(d: &OutcomeDistribution) -> Vec<OutcomeRow> {
    let counts = d.sampling.as_ref().map(|s| &s.counts);
    d.candidates
        .iter()
        .enumerate()
        .map(|(i, c)| OutcomeRow { outcome: c.outcome.label(), count: counts.map(|v| v[i]), probability: c.weight })
        .collect()
}

fn marginals(d: &OutcomeDistribution) -> Vec<OutcomeRow> {
    let mut out: Vec<OutcomeRow> = Vec::new();
    for (i, c) in d.candidates.iter().enumerate() {
        let label = c.outcome.photon.to_string();
        let count = d.sampling.as_ref().map(|s| s.counts[i]);
        match out.iter_mut().find(|r| r.outcome == label) {
            Some(r) => {
                r.probability += c.weight;
                r.count = r.count.zip(count).map(|(a, b)| a + b);
            }
            None => out.push(OutcomeRow { outcome: label, count, probability: c.weight }),
        }
    }
    out
}

fn post_selection_stats(s: &Scenario, d: &OutcomeDistribution) -> Result<Option<PostSelectionStats>, ExperimentError> {
    let Some(det) = &s.post_selection else { return Ok(None) };
    let p = post_select(d, detected_at(det))?;
    let two_atoms = p.distribution.candidates.first().is_some_and(|c| c.outcome.atoms.len() == 2);
    Ok(Some(PostSelectionStats {
        detector: det.clone(),
        acceptance: p.acceptance,
        correlation: two_atoms.then(|| spin_correlation(&p.distribution)),
        conditional: rows(&p.distribution),
    }))
}

/// Settings for the CHSH statistics: fixed, or the grid optimum for the
/// pair state kept at the post-selection detector.
fn chsh_settings(s: &Scenario, plan: &ChshPlan) -> Result<(ChshSettings, [f64; 4], Option<f64>), ExperimentError> {
    match plan {
        ChshPlan::Fixed(settings, deg) => Ok((*settings, *deg, None)),
        ChshPlan::Grid(step) => {
            let det = s.post_selection.as_deref().unwrap_or("D");
            let z = crate::transaction::MeasurementContext::uniform(&s.network, crate::transaction::AtomBasis::Z);
            let kept = post_select(&enumerate_transactions(&s.network, &z)?, detected_at(det))?;
            let state = kept.state.ok_or_else(|| ExperimentError::Usage("post-selected pair has no state".into()))?;
            let atoms: Vec<String> = state.space().subsystems().iter().map(|x| x.id().to_string()).collect();
            let [a1, a2] = atoms.as_slice() else {
                return usage("CHSH needs exactly two atoms after post-selection");
            };
            let steps = (360.0 / step).round() as usize;
            let best = chsh_grid_search(&state, a1, a2, steps)?;
            let [a, a2d, b, b2] = best.degrees;
            Ok((ChshSettings::xz_degrees(a, a2d, b, b2), best.degrees, Some(*step)))
        }
    }
}

/// Analytic distribution of the scenario's measurement context.
pub fn run_exact(s: &Scenario) -> Result<RunReport, ExperimentError> {
    let start = Instant::now();
    let d = enumerate_transactions(&s.network, &s.context)?;
    let mut statistics = Statistics { post_selection: post_selection_stats(s, &d)?, chsh: None };
    if let Some(plan) = &s.chsh {
        let (settings, deg, grid) = chsh_settings(s, plan)?;
        let det = s.post_selection.as_deref().unwrap_or("D");
        statistics.chsh = Some(ChshStats {
            settings_deg: deg,
            grid_step_deg: grid,
            s: chsh(&s.network, det, &settings)?,
            correlations: None,
            std_error: None,
            pairs: None,
            trials: None,
        });
    }
    Ok(RunReport {
        schema: REPORT_SCHEMA,
        scenario: s.name.clone(),
        mode: Mode::Exact,
        seed: None,
        trials: None,
        params: s.params.clone(),
        context: context_report(s),
        outcomes: rows(&d),
        marginals: marginals(&d),
        statistics,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Samples `trials` transactions. Trial `t` uses its own stream of `seed`,
/// so the report does not depend on `workers`.
pub fn run_mc(s: &Scenario, trials: u64, seed: u64, workers: usize) -> Result<RunReport, ExperimentError> {
    if trials == 0 {
        return usage("trials must be at least 1");
    }
    if workers == 0 {
        return usage("workers must be at least 1");
    }
    let start = Instant::now();
    let exact = enumerate_transactions(&s.network, &s.context)?;
    let sampler = exact.sampler()?;
    let counts = parallel_counts(trials, seed, workers, sampler.len(), |rng, _| Some(sampler.pick(rng)));
    let mut d = exact.clone();
    for (c, n) in d.candidates.iter_mut().zip(&counts) {
        c.weight = *n as f64 / trials as f64;
    }
    d.sampling = Some(SamplingInfo { seed, trials, counts });
    let mut statistics = Statistics { post_selection: None, chsh: None };
    if s.post_selection.is_some() {
        statistics.post_selection = match post_selection_stats(s, &d) {
            Ok(p) => p,
            Err(ExperimentError::Engine(crate::transaction::EngineError::ImpossibleSelection)) => None,
            Err(e) => return Err(e),
        };
    }
    if let Some(plan) = &s.chsh {
        let (settings, deg, grid) = chsh_settings(s, plan)?;
        let det = s.post_selection.as_deref().unwrap_or("D");
        let est = chsh_monte_carlo(&s.network, det, &settings, s.pairs(), seed, workers)?;
        statistics.chsh = Some(ChshStats {
            settings_deg: deg,
            grid_step_deg: grid,
            s: est.s,
            correlations: Some(est.correlations),
            std_error: Some(est.std_error),
            pairs: Some(est.pairs.iter().sum()),
            trials: Some(est.trials),
        });
    }
    Ok(RunReport {
        schema: REPORT_SCHEMA,
        scenario: s.name.clone(),
        mode: Mode::MonteCarlo,
        seed: Some(seed),
        trials: Some(trials),
        params: s.params.clone(),
        context: context_report(s),
        outcomes: rows(&d),
        marginals: marginals(&d),
        statistics,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
