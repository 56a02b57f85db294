use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::amplitude::{inner, Bra, Complex, Ket, SubsystemSpec, ONE};

use super::{Element, ElementKind, Network, NetworkError};

/// Component moved out of the offer wave by an atom box.
#[derive(Debug, Clone)]
pub struct Absorption {
    pub box_id: String,
    pub rank: u32,
    pub ket: Ket,
}

/// Result of applying every element of one rank.
#[derive(Debug, Clone)]
pub struct RankStep {
    pub continuing: Ket,
    pub absorbed: Vec<Absorption>,
}

#[derive(Debug, Clone)]
pub struct PropagationTrace {
    /// Components still in flight after the last rank (the detector region).
    pub continuing: Ket,
    pub absorbed: Vec<Absorption>,
    /// Continuing state after each rank, in rank order.
    pub snapshots: Vec<(u32, Ket)>,
}

impl PropagationTrace {
    pub fn absorbed_norm_sq(&self) -> f64 {
        self.absorbed.iter().map(|a| a.ket.norm_sq()).sum()
    }

    /// Continuing state right after `rank` was applied.
    pub fn snapshot(&self, rank: u32) -> Option<&Ket> {
        self.snapshots.iter().find(|(r, _)| *r == rank).map(|(_, k)| k)
    }
}

const T: Complex = Complex::new(FRAC_1_SQRT_2, 0.0);
const R: Complex = Complex::new(0.0, FRAC_1_SQRT_2);

fn beam_splitter_image(inputs: &[Option<String>; 2], outputs: &[String; 2], sym: &str) -> Option<Vec<(String, Complex)>> {
    let port = inputs.iter().position(|i| i.as_deref() == Some(sym))?;
    Some(vec![(outputs[port].clone(), T), (outputs[1 - port].clone(), R)])
}

impl Network {
    /// Applies a single element to the offer wave.
    fn apply(&self, el: &Element, ket: &Ket, absorbed: &mut Vec<Absorption>) -> Result<Ket, NetworkError> {
        let photon = self.photon_id()?;
        Ok(match &el.kind {
            ElementKind::Emitter { .. } | ElementKind::Detector { .. } => ket.clone(),
            ElementKind::BeamSplitter { inputs, outputs } => {
                ket.map_local(photon, |s| beam_splitter_image(inputs, outputs, s))?
            }
            ElementKind::Mirror { input, output, phase } => {
                ket.map_local(photon, |s| (s == input).then(|| vec![(output.clone(), *phase)]))?
            }
            ElementKind::AtomBox { atom, blocking, path, level, excited } => {
                let ground = self.ground(level)?;
                let (hit, rest) = ket.split(|b| {
                    b.symbol(photon) == Some(path)
                        && b.symbol(atom) == Some(blocking)
                        && b.symbol(level) == Some(ground)
                });
                if !hit.is_empty() {
                    absorbed.push(Absorption {
                        box_id: el.id.clone(),
                        rank: el.rank,
                        ket: hit.relabel(level, ground, excited)?,
                    });
                }
                rest
            }
        })
    }

    /// Applies every element of `rank` in id order.
    pub fn propagate_rank(&self, rank: u32, ket: &Ket) -> Result<RankStep, NetworkError> {
        let mut absorbed = Vec::new();
        let mut state = ket.clone();
        for el in self.ordered().into_iter().filter(|e| e.rank == rank) {
            state = self.apply(el, &state, &mut absorbed)?;
        }
        Ok(RankStep { continuing: state, absorbed })
    }

    pub(crate) fn check_initial(&self, initial: &Ket) -> Result<(), NetworkError> {
        if initial.space() != self.space() {
            return Err(NetworkError::Contract("initial state is not over the network's subsystems".into()));
        }
        let photon = self.photon_id()?;
        let sources: BTreeSet<String> = self
            .emitters()
            .filter(|(_, k, _)| k.space().position(photon).is_some())
            .flat_map(|(e, _, _)| e.produces(Some(photon)))
            .collect();
        for (s, _) in initial.iter() {
            let sym = s.symbol(photon).unwrap_or_default();
            if !sources.contains(sym) {
                return Err(NetworkError::Contract(format!(
                    "initial state has photon on `{sym}`, which no emitter produces"
                )));
            }
        }
        Ok(())
    }
}

/// Pushes an offer wave through the network in rank order, splitting off
/// absorbed components at atom boxes.
pub fn forward_propagate(n: &Network, initial: &Ket) -> Result<PropagationTrace, NetworkError> {
    let diags = n.validate();
    if !diags.is_empty() {
        return Err(NetworkError::Invalid(diags));
    }
    n.check_initial(initial)?;
    let mut state = initial.clone();
    let mut absorbed = Vec::new();
    let mut snapshots = Vec::new();
    for rank in n.ranks() {
        let step = n.propagate_rank(rank, &state)?;
        state = step.continuing;
        absorbed.extend(step.absorbed);
        snapshots.push((rank, state.clone()));
    }
    Ok(PropagationTrace { continuing: state, absorbed, snapshots })
}

/// Confirmation wave launched from a detector or atom box. `photon` is a bra
/// over the photon subsystem alone, supported on the anchor's path symbol.
#[derive(Debug, Clone)]
pub struct Confirmation {
    pub anchor: String,
    pub photon: Bra,
}

/// Surviving confirmation-wave amplitudes at the sources.
#[derive(Debug, Clone)]
pub struct CwEcho {
    /// Joint amplitude after every emitter filter has been applied.
    pub joint: Complex,
    /// Per-emitter surviving amplitudes, when the confirmation factorizes
    /// into one definite basis symbol per atom. Photon emitters add up and
    /// atom emitters multiply to give `joint`.
    pub emitters: Option<Vec<(String, Complex)>>,
    /// The confirmation wave as it arrives at the sources, before filtering.
    pub at_source: Bra,
}

impl CwEcho {
    /// Sum over photon emitters times product over atom emitters.
    pub fn factor_product(&self, n: &Network) -> Option<Complex> {
        let photon = n.photon()?.id();
        let list = self.emitters.as_ref()?;
        let mut photon_sum = Complex::new(0.0, 0.0);
        let mut atoms = ONE;
        for (id, a) in list {
            match n.element(id)?.kind {
                ElementKind::Emitter { ref emitted, .. } if emitted.space().position(photon).is_some() => {
                    photon_sum += a
                }
                _ => atoms *= a,
            }
        }
        Some(photon_sum * atoms)
    }
}

/// ⟨y| U for one element, where U is the element's forward map.
fn pull_back(n: &Network, el: &Element, bra: &Bra) -> Result<Bra, NetworkError> {
    let photon = n.photon_id()?;
    Ok(match &el.kind {
        ElementKind::Emitter { .. } | ElementKind::Detector { .. } => bra.clone(),
        ElementKind::BeamSplitter { inputs, outputs } => bra.map_local(photon, |y| {
            if let Some(out_port) = outputs.iter().position(|o| o == y) {
                // Input on port k reaches output k by transmission, the other by reflection.
                let v = inputs
                    .iter()
                    .enumerate()
                    .filter_map(|(k, i)| {
                        let i = i.as_ref()?;
                        let coeff = if k == out_port { T } else { R };
                        Some((i.clone(), coeff))
                    })
                    .collect();
                Some(v)
            } else if inputs.iter().any(|i| i.as_deref() == Some(y)) {
                Some(Vec::new())
            } else {
                None
            }
        })?,
        ElementKind::Mirror { input, output, phase } => bra.map_local(photon, |y| {
            if y == output {
                Some(vec![(input.clone(), *phase)])
            } else if y == input {
                Some(Vec::new())
            } else {
                None
            }
        })?,
        ElementKind::AtomBox { atom, blocking, path, level, .. } => {
            let ground = n.ground(level)?;
            let (_, kept) = bra.split(|b| {
                b.symbol(photon) == Some(path)
                    && b.symbol(atom) == Some(blocking)
                    && b.symbol(level) == Some(ground)
            });
            kept
        }
    })
}

/// Propagates a confirmation wave backwards through the conjugate-transposed
/// element maps and evaluates it against each source's emitted-state filter.
///
/// `atom_bras` holds one bra per atom-spin subsystem. Level subsystems are
/// confirmed in their ground symbol, except for the anchoring box's atom,
/// which is confirmed excited.
pub fn backward_propagate(n: &Network, confirmation: &Confirmation, atom_bras: &[Bra]) -> Result<CwEcho, NetworkError> {
    let diags = n.validate();
    if !diags.is_empty() {
        return Err(NetworkError::Invalid(diags));
    }
    let photon_spec = n.photon().cloned().expect("validated network has a photon");
    let photon = photon_spec.id().to_string();
    let anchor = n
        .element(&confirmation.anchor)
        .ok_or_else(|| NetworkError::UnknownElement(confirmation.anchor.clone()))?;

    let cw = &confirmation.photon;
    if cw.space().subsystems() != [photon_spec.clone()] {
        return Err(NetworkError::Contract("confirmation must be a bra over the photon subsystem alone".into()));
    }
    let anchor_path = match &anchor.kind {
        ElementKind::Detector { path } | ElementKind::AtomBox { path, .. } => path,
        _ => {
            return Err(NetworkError::Contract(format!(
                "`{}` is not a detector or atom box",
                anchor.id
            )))
        }
    };
    if cw.is_empty() || cw.iter().any(|(s, _)| s.symbol(&photon) != Some(anchor_path)) {
        return Err(NetworkError::Contract(format!(
            "confirmation must be supported on `{anchor_path}`, the terminal symbol of `{}`",
            anchor.id
        )));
    }

    let atoms = n.atoms();
    let mut joint = cw.clone();
    let mut atom_coeff = ONE;
    let mut definite = true;
    for atom in &atoms {
        let bra = atom_bras
            .iter()
            .find(|b| b.space().position(&atom.spin).is_some())
            .ok_or_else(|| NetworkError::Contract(format!("no confirmation for atom `{}`", atom.spin)))?;
        if bra.space().subsystems().len() != 1 {
            return Err(NetworkError::Contract("atom confirmations must each span one subsystem".into()));
        }
        if bra.len() == 1 {
            atom_coeff *= bra.iter().next().map(|(_, a)| *a).unwrap_or(ONE);
        } else {
            definite = false;
        }
        joint = joint.tensor(bra)?;
    }
    if atom_bras.len() != atoms.len() {
        return Err(NetworkError::Contract("one confirmation per atom expected".into()));
    }
    let excited_level = match &anchor.kind {
        ElementKind::AtomBox { level, excited, .. } => Some((level.as_str(), excited.as_str())),
        _ => None,
    };
    for spec in n.space().subsystems() {
        if joint.space().position(spec.id()).is_none() {
            let sym = match excited_level {
                Some((level, excited)) if level == spec.id() => excited,
                _ => spec.basis()[0].as_str(),
            };
            joint = joint.tensor(&Bra::on(spec, &[(sym, ONE)])?)?;
        }
    }
    let order: Vec<&str> = n.space().subsystems().iter().map(SubsystemSpec::id).collect();
    let mut bra = joint.reorder(&order)?;

    if let ElementKind::AtomBox { atom, blocking, level, excited, .. } = &anchor.kind {
        let ground = n.ground(level)?;
        let (hit, _) = bra.split(|b| b.symbol(atom) == Some(blocking) && b.symbol(level) == Some(excited));
        bra = hit.relabel(level, excited, ground)?;
    }

    let mut earlier: Vec<&Element> = n.ordered().into_iter().filter(|e| e.rank < anchor.rank).collect();
    earlier.reverse();
    for el in earlier {
        bra = pull_back(n, el, &bra)?;
    }

    let source = n.initial_source_from_filters()?;
    let joint_amp = inner(&bra, &source)?;

    let emitters = if definite {
        let mut photon_bra = bra.clone();
        for spec in n.space().subsystems() {
            if spec.id() != photon {
                photon_bra = photon_bra.remove_definite(spec.id())?;
            }
        }
        let photon_bra = photon_bra.scale(ONE / atom_coeff);
        let mut list = Vec::new();
        for (el, emitted, filter) in n.emitters() {
            let amp = if emitted.space().position(&photon).is_some() {
                if photon_bra.is_empty() {
                    Complex::new(0.0, 0.0)
                } else {
                    inner(&photon_bra, &filter.dual())?
                }
            } else {
                let spin = emitted.space().subsystems()[0].id();
                let cw = atom_bras.iter().find(|b| b.space().position(spin).is_some()).expect("checked above");
                inner(cw, &filter.dual())?
            };
            list.push((el.id.clone(), amp));
        }
        Some(list)
    } else {
        None
    };

    Ok(CwEcho { joint: joint_amp, emitters, at_source: bra })
}

impl Network {
    /// The joint state the sources accept: like [`Network::initial_ket`] but
    /// built from each emitter's filter.
    fn initial_source_from_filters(&self) -> Result<Ket, NetworkError> {
        let mut copy = self.clone();
        for el in &mut copy.elements {
            if let ElementKind::Emitter { emitted, filter } = &mut el.kind {
                *emitted = filter.dual();
            }
        }
        copy.initial_ket()
    }
}

/// Replaces a single emitter feeding a first beam splitter by two emitters
/// that feed the beam splitter's outputs directly with the amplitudes it
/// would have produced. Each new emitter filters only its own component.
pub fn two_laser_variant(n: &Network) -> Result<Network, NetworkError> {
    let photon = n.photon_id()?;
    let mut photon_emitters = n.emitters().filter(|(_, k, _)| k.space().position(photon).is_some());
    let (source, emitted, _) = photon_emitters
        .next()
        .ok_or_else(|| NetworkError::Contract("no photon emitter".into()))?;
    if photon_emitters.next().is_some() {
        return Err(NetworkError::Contract("network already has more than one photon emitter".into()));
    }
    if emitted.len() != 1 {
        return Err(NetworkError::Contract("photon emitter must emit a single path".into()));
    }
    let (state, amp) = emitted.iter().next().map(|(s, a)| (s.clone(), *a)).expect("one term");
    let start = state.symbol(photon).expect("photon symbol").to_string();
    let splitter = n
        .elements()
        .iter()
        .find(|e| matches!(&e.kind, ElementKind::BeamSplitter { inputs, .. }
            if inputs.iter().flatten().any(|i| *i == start) && inputs.iter().filter(|i| i.is_some()).count() == 1))
        .ok_or_else(|| NetworkError::Contract(format!("no single-input beam splitter fed by `{start}`")))?;
    let ElementKind::BeamSplitter { inputs, outputs } = &splitter.kind else { unreachable!() };
    let port = inputs.iter().position(|i| i.as_deref() == Some(start.as_str())).expect("found above");
    let photon_spec = n.photon().expect("photon").clone();

    let mut elements: Vec<Element> = n
        .elements()
        .iter()
        .filter(|e| e.id != source.id && e.id != splitter.id)
        .cloned()
        .collect();
    for (out, coeff) in [(&outputs[port], T), (&outputs[1 - port], R)] {
        let ket = Ket::on(&photon_spec, &[(out.as_str(), amp * coeff)])?;
        elements.push(Element::emitter(&format!("{}{}", source.id, out), splitter.rank, ket));
    }
    Ok(Network::new(n.space().subsystems().to_vec(), elements)?.with_aliases(n.aliases().clone()))
}
