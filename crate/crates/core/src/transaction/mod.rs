//! Transaction candidates: enumeration in the joint space, confirmation-wave
//! echo weights, flat and hierarchical resolution, and post-selection.

mod bell;
mod resolve;

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::amplitude::{bloch_basis, y_basis, BasisState, Bra, Complex, Ket, StateError, SubsystemKind, ONE};
use crate::network::{backward_propagate, forward_propagate, Confirmation, ElementKind, Network, NetworkError};

pub use bell::{
    chsh, chsh_for_state, chsh_grid_search, chsh_monte_carlo, contextuality, correlation, spin_correlation, AssignmentCheck,
    ChshEstimate, ChshOptimum, ChshSettings, ContextualityReport,
};
pub use resolve::{parallel_counts, resolve_flat, resolve_hierarchical, HierarchyPlan, Sampler};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("post-selection matches no outcome with nonzero weight")]
    ImpossibleSelection,
    #[error("distribution has no outcomes")]
    EmptyDistribution,
}

/// Measurement basis for one atom's spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AtomBasis {
    /// Open the box: read the spin along z.
    Z,
    /// Recombine the boxes and measure along y.
    Y,
    /// Recombine and measure along the Bloch direction (θ, φ) in radians.
    Bloch { theta: f64, phi: f64 },
}

impl AtomBasis {
    fn change(&self) -> Option<([[Complex; 2]; 2], [&'static str; 2])> {
        match *self {
            AtomBasis::Z => None,
            AtomBasis::Y => Some((y_basis(), ["y↑", "y↓"])),
            AtomBasis::Bloch { theta, phi } => Some((bloch_basis(theta, phi), ["n↑", "n↓"])),
        }
    }

    /// Bra of the outcome `symbol` written in the z basis of `spec`.
    fn outcome_bra(&self, spec: &crate::SubsystemSpec, symbol: &str) -> Result<Bra, EngineError> {
        match self.change() {
            None => Ok(Bra::on(spec, &[(symbol, ONE)])?),
            Some((m, names)) => {
                let j = names
                    .iter()
                    .position(|n| *n == symbol)
                    .ok_or_else(|| EngineError::Contract(format!("`{symbol}` is not an outcome of this basis")))?;
                let b = spec.basis();
                Ok(Bra::on(spec, &[(b[0].as_str(), m[j][0]), (b[1].as_str(), m[j][1])])?)
            }
        }
    }
}

/// Spin measurement per atom plus whether absorption by an atom counts as
/// a terminal transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementContext {
    pub atom_basis: Vec<(String, AtomBasis)>,
    /// When false, absorption outcomes are discarded and the detector
    /// outcomes renormalized.
    pub include_absorption: bool,
}

impl MeasurementContext {
    /// Same basis for every two-level atom; one-symbol (classical)
    /// obstructions are always read in their only state.
    pub fn uniform(n: &Network, basis: AtomBasis) -> Self {
        let atom_basis = n
            .atoms()
            .into_iter()
            .map(|a| {
                let two_level = n.space().get(&a.spin).is_some_and(|s| s.basis().len() == 2);
                (a.spin, if two_level { basis } else { AtomBasis::Z })
            })
            .collect();
        MeasurementContext { atom_basis, include_absorption: true }
    }

    pub fn with_basis(mut self, atom: &str, basis: AtomBasis) -> Self {
        for (a, b) in &mut self.atom_basis {
            if a == atom {
                *b = basis;
            }
        }
        self
    }

    pub fn basis_of(&self, atom: &str) -> Option<AtomBasis> {
        self.atom_basis.iter().find(|(a, _)| a == atom).map(|(_, b)| *b)
    }

    fn check(&self, n: &Network) -> Result<(), EngineError> {
        let atoms = n.atoms();
        for a in &atoms {
            let count = self.atom_basis.iter().filter(|(id, _)| *id == a.spin).count();
            if count != 1 {
                return Err(EngineError::Contract(format!("atom `{}` needs exactly one basis", a.spin)));
            }
            let basis = self.basis_of(&a.spin).expect("counted");
            let levels = n.space().get(&a.spin).map_or(0, |s| s.basis().len());
            if basis != AtomBasis::Z && levels != 2 {
                return Err(EngineError::Contract(format!("atom `{}` is not two-level", a.spin)));
            }
        }
        if self.atom_basis.len() != atoms.len() {
            return Err(EngineError::Contract("context names an atom the network lacks".into()));
        }
        Ok(())
    }

    /// Rewrites the detector-region state in the context's bases.
    pub fn rebase(&self, ket: &Ket) -> Result<Ket, EngineError> {
        let mut out = ket.clone();
        for (atom, basis) in &self.atom_basis {
            if let Some((m, names)) = basis.change() {
                out = out.rebase(atom, &m, names)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhotonOutcome {
    /// Detector element id.
    Detected(String),
    /// Atom box element id.
    Absorbed(String),
    /// Photon-path symbol left open.
    Escaped(String),
}

impl fmt::Display for PhotonOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhotonOutcome::Detected(d) => f.write_str(d),
            PhotonOutcome::Absorbed(b) => write!(f, "absorbed@{b}"),
            PhotonOutcome::Escaped(s) => write!(f, "escaped@{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub state: BasisState,
    pub photon: PhotonOutcome,
    /// Spin symbols of the two-level atoms, in network order.
    pub atoms: Vec<(String, String)>,
    photon_symbol: String,
}

impl Outcome {
    fn new(n: &Network, state: BasisState, photon: PhotonOutcome) -> Self {
        let pid = n.photon().map(|p| p.id().to_string()).unwrap_or_default();
        let atoms = n
            .space()
            .subsystems()
            .iter()
            .filter(|s| s.kind() == SubsystemKind::AtomSpin && s.basis().len() > 1)
            .filter_map(|s| state.symbol(s.id()).map(|v| (s.id().to_string(), v.to_string())))
            .collect();
        let photon_symbol = state.symbol(&pid).unwrap_or_default().to_string();
        Outcome { state, photon, atoms, photon_symbol }
    }

    /// `D[z↑,z↓]`, `absorbed@box1[z↑,z↑]`, or just `C` without atoms.
    pub fn label(&self) -> String {
        if self.atoms.is_empty() {
            self.photon.to_string()
        } else {
            let spins: Vec<&str> = self.atoms.iter().map(|(_, s)| s.as_str()).collect();
            format!("{}[{}]", self.photon, spins.join(","))
        }
    }

    /// Photon symbol first, then the remaining assignment lexicographically.
    fn canonical_cmp(&self, other: &Outcome) -> Ordering {
        (&self.photon_symbol, self.state.assignment()).cmp(&(&other.photon_symbol, other.state.assignment()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionCandidate {
    pub outcome: Outcome,
    pub weight: f64,
    /// Offer-wave amplitude in exact mode.
    pub amplitude: Option<Complex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Flat,
    Hierarchical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingInfo {
    pub seed: u64,
    pub trials: u64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    pub candidates: Vec<TransactionCandidate>,
    pub provenance: Provenance,
    pub sampling: Option<SamplingInfo>,
    /// Detector-region offer wave in the context's bases, as propagated.
    pub detector_state: Option<Ket>,
}

impl OutcomeDistribution {
    pub(crate) fn new(mut candidates: Vec<TransactionCandidate>, provenance: Provenance, detector_state: Option<Ket>) -> Self {
        candidates.sort_by(|a, b| a.outcome.canonical_cmp(&b.outcome));
        OutcomeDistribution { candidates, provenance, sampling: None, detector_state }
    }

    pub fn total_weight(&self) -> f64 {
        self.candidates.iter().map(|c| c.weight).sum()
    }

    pub fn weight_of(&self, label: &str) -> f64 {
        self.candidates.iter().filter(|c| c.outcome.label() == label).map(|c| c.weight).sum()
    }

    /// Total weight per photon outcome, in first-seen canonical order.
    pub fn photon_marginals(&self) -> Vec<(PhotonOutcome, f64)> {
        let mut out: Vec<(PhotonOutcome, f64)> = Vec::new();
        for c in &self.candidates {
            match out.iter_mut().find(|(p, _)| *p == c.outcome.photon) {
                Some((_, w)) => *w += c.weight,
                None => out.push((c.outcome.photon.clone(), c.weight)),
            }
        }
        out
    }

    pub fn marginal(&self, photon: &PhotonOutcome) -> f64 {
        self.candidates.iter().filter(|c| c.outcome.photon == *photon).map(|c| c.weight).sum()
    }

    /// Largest weight difference between two distributions over the union of
    /// their outcomes.
    pub fn max_difference(&self, other: &OutcomeDistribution) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.candidates {
            let w = other.candidates.iter().filter(|o| o.outcome == c.outcome).map(|o| o.weight).sum::<f64>();
            worst = worst.max((c.weight - w).abs());
        }
        for o in &other.candidates {
            if !self.candidates.iter().any(|c| c.outcome == o.outcome) {
                worst = worst.max(o.weight.abs());
            }
        }
        worst
    }
}

/// Forward-propagates the network, rewrites the atoms in the context's bases
/// and lists every outcome with nonzero Born weight.
pub fn enumerate_transactions(n: &Network, ctx: &MeasurementContext) -> Result<OutcomeDistribution, EngineError> {
    ctx.check(n)?;
    let trace = forward_propagate(n, &n.initial_ket()?)?;
    let detector_state = ctx.rebase(&trace.continuing)?;
    let mut candidates = detector_candidates(n, &detector_state)?;
    if ctx.include_absorption {
        for a in &trace.absorbed {
            for (s, amp) in a.ket.iter() {
                candidates.push(TransactionCandidate {
                    outcome: Outcome::new(n, s.clone(), PhotonOutcome::Absorbed(a.box_id.clone())),
                    weight: amp.norm_sqr(),
                    amplitude: Some(*amp),
                });
            }
        }
    } else {
        renormalize(&mut candidates)?;
    }
    Ok(OutcomeDistribution::new(candidates, Provenance::Flat, Some(detector_state)))
}

pub(crate) fn photon_outcome(n: &Network, symbol: &str) -> PhotonOutcome {
    match n.detector_for(symbol) {
        Some(d) => PhotonOutcome::Detected(d.to_string()),
        None => PhotonOutcome::Escaped(symbol.to_string()),
    }
}

pub(crate) fn detector_candidates(n: &Network, state: &Ket) -> Result<Vec<TransactionCandidate>, EngineError> {
    let pid = n.photon().map(|p| p.id().to_string()).ok_or_else(|| EngineError::Contract("no photon".into()))?;
    Ok(state
        .iter()
        .map(|(s, amp)| {
            let symbol = s.symbol(&pid).unwrap_or_default();
            TransactionCandidate {
                outcome: Outcome::new(n, s.clone(), photon_outcome(n, symbol)),
                weight: amp.norm_sqr(),
                amplitude: Some(*amp),
            }
        })
        .collect())
}

pub(crate) fn renormalize(candidates: &mut [TransactionCandidate]) -> Result<(), EngineError> {
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    if total <= 0.0 {
        return Err(EngineError::EmptyDistribution);
    }
    for c in candidates {
        c.weight /= total;
        c.amplitude = c.amplitude.map(|a| a / total.sqrt());
    }
    Ok(())
}

/// Weight of an outcome computed only from the confirmation wave: the CW
/// launched at the outcome's absorber returns to the sources with amplitude
/// `A`; the offer wave it answers had amplitude `A` too, so the completed
/// echo carries `A*·A`.
pub fn echo_weight(n: &Network, outcome: &BasisState, ctx: &MeasurementContext) -> Result<f64, EngineError> {
    ctx.check(n)?;
    let amp = echo_amplitude(n, outcome, ctx)?;
    let mut weight = (amp.conj() * amp).re;
    if !ctx.include_absorption {
        weight /= 1.0 - absorbed_mass_by_echo(n)?;
    }
    Ok(weight)
}

fn echo_amplitude(n: &Network, outcome: &BasisState, ctx: &MeasurementContext) -> Result<Complex, EngineError> {
    let photon = n.photon().cloned().ok_or_else(|| EngineError::Contract("no photon".into()))?;
    let p = outcome
        .symbol(photon.id())
        .ok_or_else(|| EngineError::Contract("outcome has no photon symbol".into()))?;

    let mut excited_box = None;
    for el in n.elements() {
        if let ElementKind::AtomBox { level, .. } = &el.kind {
            let ground = n.space().get(level).map(|s| s.basis()[0].as_str());
            if outcome.symbol(level).is_some() && outcome.symbol(level) != ground {
                if excited_box.is_some() {
                    return Err(EngineError::Contract("outcome has more than one excited atom".into()));
                }
                excited_box = Some(el.id.clone());
            }
        }
    }
    let anchor = match &excited_box {
        Some(b) if ctx.include_absorption => b.clone(),
        Some(_) => return Err(EngineError::Contract("absorption is not a transaction in this context".into())),
        None => n
            .detector_for(p)
            .ok_or_else(|| EngineError::Contract(format!("photon symbol `{p}` is not terminal")))?
            .to_string(),
    };

    let mut bras = Vec::new();
    for atom in n.atoms() {
        let spec = n.space().get(&atom.spin).expect("atom in space");
        let sym = outcome
            .symbol(&atom.spin)
            .ok_or_else(|| EngineError::Contract(format!("outcome lacks atom `{}`", atom.spin)))?;
        // Absorption happens at the box, where the spin is still resolved along z.
        let basis = if excited_box.is_some() {
            AtomBasis::Z
        } else {
            ctx.basis_of(&atom.spin).unwrap_or(AtomBasis::Z)
        };
        bras.push(basis.outcome_bra(spec, sym)?);
    }
    let cw = Confirmation { anchor, photon: Bra::on(&photon, &[(p, ONE)])? };
    Ok(backward_propagate(n, &cw, &bras)?.joint)
}

/// Total absorption weight, found by echoing every absorption basis state.
fn absorbed_mass_by_echo(n: &Network) -> Result<f64, EngineError> {
    let photon = n.photon().cloned().ok_or_else(|| EngineError::Contract("no photon".into()))?;
    let atoms = n.atoms();
    let mut total = 0.0;
    for el in n.elements() {
        let ElementKind::AtomBox { path, .. } = &el.kind else { continue };
        let mut combos: Vec<Vec<Bra>> = vec![Vec::new()];
        for atom in &atoms {
            let spec = n.space().get(&atom.spin).expect("atom in space");
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    spec.basis().iter().map(move |sym| {
                        let mut v = prefix.clone();
                        v.push(Bra::on(spec, &[(sym.as_str(), ONE)]).expect("basis symbol"));
                        v
                    })
                })
                .collect();
        }
        for bras in combos {
            let cw = Confirmation { anchor: el.id.clone(), photon: Bra::on(&photon, &[(path.as_str(), ONE)])? };
            total += backward_propagate(n, &cw, &bras)?.joint.norm_sqr();
        }
    }
    Ok(total)
}

/// Result of conditioning on a subset of outcomes.
#[derive(Debug, Clone)]
pub struct PostSelection {
    pub distribution: OutcomeDistribution,
    /// Selected weight before renormalization.
    pub acceptance: f64,
    /// Normalized selected detector-region state with definite subsystems
    /// (photon, unexcited levels) factored out. `None` when the selection
    /// includes absorption outcomes or the distribution carries no state.
    pub state: Option<Ket>,
}

pub fn post_select<P>(d: &OutcomeDistribution, predicate: P) -> Result<PostSelection, EngineError>
where
    P: Fn(&Outcome) -> bool,
{
    let selected: Vec<&TransactionCandidate> = d.candidates.iter().filter(|c| predicate(&c.outcome)).collect();
    let acceptance: f64 = selected.iter().map(|c| c.weight).sum();
    if selected.is_empty() || acceptance <= 0.0 {
        return Err(EngineError::ImpossibleSelection);
    }
    let mut candidates: Vec<TransactionCandidate> = selected.iter().map(|c| (*c).clone()).collect();
    renormalize(&mut candidates)?;
    let only_detector = selected.iter().all(|c| !matches!(c.outcome.photon, PhotonOutcome::Absorbed(_)));
    let state = match (&d.detector_state, only_detector) {
        (Some(ket), true) => {
            let (hit, _) = ket.split(|s| selected.iter().any(|c| c.outcome.state == *s));
            let mut k = hit.normalized()?;
            let ids: Vec<String> = k.space().subsystems().iter().map(|s| s.id().to_string()).collect();
            for id in ids {
                if k.space().subsystems().len() == 1 {
                    break;
                }
                let kind = k.space().get(&id).map(|s| s.kind());
                if matches!(kind, Some(SubsystemKind::PhotonPath | SubsystemKind::AtomLevel)) {
                    if let Ok(reduced) = k.remove_definite(&id) {
                        k = reduced;
                    }
                }
            }
            Some(k)
        }
        _ => None,
    };
    let mut distribution = OutcomeDistribution::new(candidates, d.provenance, None);
    if let Some(s) = &d.sampling {
        let kept: Vec<u64> = d
            .candidates
            .iter()
            .zip(&s.counts)
            .filter(|(c, _)| predicate(&c.outcome))
            .map(|(_, n)| *n)
            .collect();
        distribution.sampling = Some(SamplingInfo { seed: s.seed, trials: kept.iter().sum(), counts: kept });
    }
    Ok(PostSelection { distribution, acceptance, state })
}

/// Predicate selecting outcomes whose photon was caught by `detector`.
pub fn detected_at(detector: &str) -> impl Fn(&Outcome) -> bool + '_ {
    move |o| matches!(&o.photon, PhotonOutcome::Detected(d) if d == detector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    #[test]
    fn context_rejects_rebasing_a_classical_obstruction() {
        let n = builtin::bomb_tester(true);
        let ctx = MeasurementContext { atom_basis: vec![("bomb".into(), AtomBasis::Y)], include_absorption: true };
        assert!(enumerate_transactions(&n, &ctx).is_err());
        let ok = MeasurementContext::uniform(&n, AtomBasis::Y);
        assert_eq!(ok.basis_of("bomb"), Some(AtomBasis::Z));
    }

    #[test]
    fn context_must_cover_every_atom() {
        let n = builtin::liar();
        let ctx = MeasurementContext { atom_basis: vec![("atom1".into(), AtomBasis::Z)], include_absorption: true };
        assert!(matches!(enumerate_transactions(&n, &ctx), Err(EngineError::Contract(_))));
    }

    #[test]
    fn labels_are_readable() {
        let n = builtin::hardy();
        let d = enumerate_transactions(&n, &MeasurementContext::uniform(&n, AtomBasis::Z)).unwrap();
        let labels: Vec<String> = d.candidates.iter().map(|c| c.outcome.label()).collect();
        assert_eq!(labels, ["C[z↑]", "C[z↓]", "D[z↑]", "absorbed@box[z↑]"]);
    }

    #[test]
    fn impossible_selection_is_an_error() {
        let n = builtin::open_interferometer();
        let d = enumerate_transactions(&n, &MeasurementContext::uniform(&n, AtomBasis::Z)).unwrap();
        assert!(matches!(post_select(&d, detected_at("D")), Err(EngineError::ImpossibleSelection)));
    }
}
