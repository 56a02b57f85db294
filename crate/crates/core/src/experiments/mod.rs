//! Scenario library, exact and Monte Carlo runners, and the reference
//! checklist.

mod report;
mod verify;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::builtin;
use crate::network::{Network, NetworkError};
use crate::path::PathError;
use crate::transaction::{AtomBasis, ChshSettings, EngineError, MeasurementContext};

pub use report::{
    run_exact, run_mc, ChshStats, ContextReport, Mode, OutcomeRow, PostSelectionStats, RunReport, Statistics,
    REPORT_SCHEMA,
};
pub use verify::{verify_reference, Check};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    State(#[from] crate::StateError),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::Usage(msg.into()))
}

pub const SCENARIOS: [(&str, &str); 5] = [
    ("ev-bomb", "bomb tester; param bomb=present|absent"),
    ("hardy-ifm", "one atom whose z-up box blocks arm v"),
    ("qle", "two atoms, boxes on both arms"),
    ("qle-two-laser", "two atoms, two coherent sources instead of the first splitter"),
    ("qle-chsh", "CHSH test on dark-port pairs; params a,a2,b,b2 (degrees) or grid=STEP, pairs=N"),
];

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub network: Network,
    pub context: MeasurementContext,
    /// Detector whose clicks are kept for the derived statistics.
    pub post_selection: Option<String>,
    pub params: BTreeMap<String, String>,
    pub chsh: Option<ChshPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChshPlan {
    Fixed(ChshSettings, [f64; 4]),
    /// Grid search over x-z plane settings with this step in degrees.
    Grid(f64),
}

/// Parses `z`, `y` or `bloch:θ,φ` with angles in degrees.
pub fn parse_basis(text: &str) -> Result<AtomBasis, ExperimentError> {
    match text {
        "z" => Ok(AtomBasis::Z),
        "y" => Ok(AtomBasis::Y),
        _ => {
            let Some(rest) = text.strip_prefix("bloch:") else {
                return usage(format!("unknown atom basis `{text}`"));
            };
            let parts: Vec<&str> = rest.split(',').collect();
            let [t, p] = parts.as_slice() else {
                return usage("bloch basis takes two angles: bloch:THETA,PHI");
            };
            let deg = |s: &str| s.trim().parse::<f64>().map_err(|_| ExperimentError::Usage(format!("bad angle `{s}`")));
            Ok(AtomBasis::Bloch { theta: deg(t)?.to_radians(), phi: deg(p)?.to_radians() })
        }
    }
}

pub fn basis_name(b: AtomBasis) -> String {
    match b {
        AtomBasis::Z => "z".into(),
        AtomBasis::Y => "y".into(),
        AtomBasis::Bloch { theta, phi } => format!("bloch:{},{}", theta.to_degrees(), phi.to_degrees()),
    }
}

fn take_bool(params: &BTreeMap<String, String>, key: &str, default: bool) -> Result<bool, ExperimentError> {
    match params.get(key).map(String::as_str) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => usage(format!("{key} must be true or false, not `{v}`")),
    }
}

fn take_f64(params: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, ExperimentError> {
    params
        .get(key)
        .map(|v| v.parse::<f64>().map_err(|_| ExperimentError::Usage(format!("{key} must be a number, not `{v}`"))))
        .transpose()
}

/// Builds a named scenario. Parameters not understood by the scenario are
/// rejected.
pub fn build_scenario(name: &str, params: &BTreeMap<String, String>) -> Result<Scenario, ExperimentError> {
    let mut allowed = vec!["include-absorption"];
    let mut post_selection = None;
    let mut chsh = None;
    let network = match name {
        "ev-bomb" => {
            allowed.push("bomb");
            match params.get("bomb").map(String::as_str) {
                None | Some("present") => builtin::bomb_tester(true),
                Some("absent") => builtin::bomb_tester(false),
                Some(v) => return usage(format!("bomb must be present or absent, not `{v}`")),
            }
        }
        "hardy-ifm" => builtin::hardy(),
        "qle" => builtin::liar(),
        "qle-two-laser" => builtin::liar_two_laser()?,
        "qle-chsh" => {
            allowed.extend(["a", "a2", "b", "b2", "grid", "pairs"]);
            post_selection = Some("D".to_string());
            let angles: Vec<Option<f64>> =
                ["a", "a2", "b", "b2"].iter().map(|k| take_f64(params, k)).collect::<Result<_, _>>()?;
            chsh = Some(match angles.as_slice() {
                [Some(a), Some(a2), Some(b), Some(b2)] => {
                    ChshPlan::Fixed(ChshSettings::xz_degrees(*a, *a2, *b, *b2), [*a, *a2, *b, *b2])
                }
                [None, None, None, None] => {
                    let step = take_f64(params, "grid")?.unwrap_or(1.0);
                    let steps = 360.0 / step;
                    if !(step > 0.0) || (steps - steps.round()).abs() > 1e-9 {
                        return usage("grid step must divide 360 degrees");
                    }
                    ChshPlan::Grid(step)
                }
                _ => return usage("give all four CHSH angles a, a2, b, b2 or none"),
            });
            if let Some(p) = params.get("pairs") {
                if p.parse::<u64>().map_or(true, |n| n == 0) {
                    return usage("pairs must be a positive integer");
                }
            }
            builtin::liar()
        }
        _ => return usage(format!("unknown scenario `{name}`; try `tisim list`")),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return usage(format!("scenario `{name}` has no parameter `{k}`"));
    }
    let mut context = MeasurementContext::uniform(&network, AtomBasis::Z);
    context.include_absorption = take_bool(params, "include-absorption", true)?;
    Ok(Scenario { name: name.to_string(), network, context, post_selection, params: params.clone(), chsh })
}

impl Scenario {
    /// Measures every two-level atom in `basis`.
    pub fn with_basis(mut self, basis: AtomBasis) -> Self {
        let include = self.context.include_absorption;
        self.context = MeasurementContext::uniform(&self.network, basis);
        self.context.include_absorption = include;
        self
    }

    pub fn with_post_selection(mut self, detector: Option<&str>) -> Result<Self, ExperimentError> {
        if let Some(d) = detector {
            if !self.network.detectors().any(|(id, _)| id == d) {
                return usage(format!("no detector `{d}` in this network"));
            }
        }
        self.post_selection = detector.map(str::to_string);
        Ok(self)
    }

    /// Runs the scenario on a different network, keeping the basis choice.
    pub fn with_network(mut self, network: Network) -> Result<Self, ExperimentError> {
        let basis = self.context.atom_basis.iter().map(|(_, b)| *b).find(|b| *b != AtomBasis::Z).unwrap_or(AtomBasis::Z);
        self.network = network.validated()?;
        let post = self.post_selection.take();
        self = self.with_basis(basis);
        self.with_post_selection(post.as_deref())
    }

    pub(crate) fn pairs(&self) -> u64 {
        self.params.get("pairs").and_then(|p| p.parse().ok()).unwrap_or(1_000_000)
    }
}
