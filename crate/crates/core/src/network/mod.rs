//! Optical networks: a DAG of emitters, beam splitters, mirrors, atom boxes
//! and detectors, ordered by explicit pseudotime ranks.

mod file;
mod propagate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::amplitude::{Bra, Complex, Ket, Space, StateError, SubsystemKind, SubsystemSpec, TOLERANCE};

pub use file::{from_json, to_json};
pub use propagate::{
    backward_propagate, forward_propagate, two_laser_variant, Absorption, Confirmation, CwEcho,
    PropagationTrace, RankStep,
};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("network failed validation:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("network file: {0}")]
    File(String),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone)]
pub enum ElementKind {
    /// Source of an offer wave. `filter` is the state a returning
    /// confirmation wave must match to interact with the source.
    Emitter { emitted: Ket, filter: Bra },
    /// Input on port `k` transmits to `outputs[k]` with amplitude 1/√2 and
    /// reflects to `outputs[1 - k]` with amplitude i/√2.
    BeamSplitter { inputs: [Option<String>; 2], outputs: [String; 2] },
    Mirror { input: String, output: String, phase: Complex },
    /// Photon on `path` meeting atom `atom` in spin `blocking` is absorbed,
    /// moving `level` from its ground symbol to `excited`.
    AtomBox { atom: String, blocking: String, path: String, level: String, excited: String },
    Detector { path: String },
}

impl ElementKind {
    pub fn name(&self) -> &'static str {
        match self {
            ElementKind::Emitter { .. } => "emitter",
            ElementKind::BeamSplitter { .. } => "beam-splitter",
            ElementKind::Mirror { .. } => "mirror",
            ElementKind::AtomBox { .. } => "atom-box",
            ElementKind::Detector { .. } => "detector",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Element {
    pub id: String,
    pub rank: u32,
    pub kind: ElementKind,
}

impl Element {
    pub fn new(id: impl Into<String>, rank: u32, kind: ElementKind) -> Self {
        Element { id: id.into(), rank, kind }
    }

    pub fn emitter(id: &str, rank: u32, emitted: Ket) -> Self {
        let filter = emitted.dual();
        Element::new(id, rank, ElementKind::Emitter { emitted, filter })
    }

    pub fn beam_splitter(id: &str, rank: u32, inputs: [Option<&str>; 2], outputs: [&str; 2]) -> Self {
        Element::new(
            id,
            rank,
            ElementKind::BeamSplitter {
                inputs: inputs.map(|s| s.map(str::to_string)),
                outputs: outputs.map(str::to_string),
            },
        )
    }

    pub fn mirror(id: &str, rank: u32, input: &str, output: &str, phase: Complex) -> Self {
        Element::new(
            id,
            rank,
            ElementKind::Mirror { input: input.into(), output: output.into(), phase },
        )
    }

    pub fn atom_box(id: &str, rank: u32, atom: &str, blocking: &str, path: &str, level: &str, excited: &str) -> Self {
        Element::new(
            id,
            rank,
            ElementKind::AtomBox {
                atom: atom.into(),
                blocking: blocking.into(),
                path: path.into(),
                level: level.into(),
                excited: excited.into(),
            },
        )
    }

    pub fn detector(id: &str, rank: u32, path: &str) -> Self {
        Element::new(id, rank, ElementKind::Detector { path: path.into() })
    }

    /// Photon-path symbols this element hands to downstream elements.
    fn produces(&self, photon: Option<&str>) -> Vec<String> {
        match &self.kind {
            ElementKind::Emitter { emitted, .. } => match photon {
                Some(p) if emitted.space().position(p).is_some() => emitted
                    .iter()
                    .filter_map(|(s, _)| s.symbol(p).map(str::to_string))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
                _ => Vec::new(),
            },
            ElementKind::BeamSplitter { outputs, .. } => outputs.to_vec(),
            ElementKind::Mirror { output, .. } => vec![output.clone()],
            _ => Vec::new(),
        }
    }

    /// Photon-path symbols this element takes in (atom boxes excluded).
    fn consumes(&self) -> Vec<String> {
        match &self.kind {
            ElementKind::BeamSplitter { inputs, .. } => inputs.iter().flatten().cloned().collect(),
            ElementKind::Mirror { input, .. } => vec![input.clone()],
            ElementKind::Detector { path } => vec![path.clone()],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    DuplicateId,
    PhotonSubsystem,
    UnknownSubsystem,
    UnknownSymbol,
    EmitterCount,
    EmitterState,
    NotNormalized,
    ProducedTwice,
    ConsumedTwice,
    NeverProduced,
    DuplicateDetector,
    PortConflict,
    RankOrder,
    Acyclicity,
    EdgeMismatch,
}

/// A violated network invariant, attributed to one element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub element: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:?}: {}", self.element, self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub symbol: String,
}

/// A two-level (or classical one-symbol) atom taking part in the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomInfo {
    pub spin: String,
    pub level: Option<String>,
    pub box_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Network {
    space: Space,
    elements: Vec<Element>,
    aliases: BTreeMap<String, String>,
    declared_edges: Option<Vec<Edge>>,
}

impl Network {
    pub fn new(subsystems: Vec<SubsystemSpec>, elements: Vec<Element>) -> Result<Self, NetworkError> {
        Ok(Network {
            space: Space::new(subsystems)?,
            elements,
            aliases: BTreeMap::new(),
            declared_edges: None,
        })
    }

    /// Path-notation labels (e.g. arm names) mapped to photon-path symbols.
    pub fn with_aliases<I, K, V>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        self.aliases = aliases.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        self
    }

    pub(crate) fn with_declared_edges(mut self, edges: Vec<Edge>) -> Self {
        self.declared_edges = Some(edges);
        self
    }

    /// Returns the network if it has no diagnostics.
    pub fn validated(self) -> Result<Self, NetworkError> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(self)
        } else {
            Err(NetworkError::Invalid(diags))
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn photon(&self) -> Option<&SubsystemSpec> {
        let mut it = self.space.subsystems().iter().filter(|s| s.kind() == SubsystemKind::PhotonPath);
        let first = it.next();
        if it.next().is_some() {
            None
        } else {
            first
        }
    }

    pub(crate) fn photon_id(&self) -> Result<&str, NetworkError> {
        self.photon()
            .map(SubsystemSpec::id)
            .ok_or_else(|| NetworkError::Contract("network needs exactly one photon subsystem".into()))
    }

    /// Atom spin subsystems with their level subsystem and box, in space order.
    pub fn atoms(&self) -> Vec<AtomInfo> {
        self.space
            .subsystems()
            .iter()
            .filter(|s| s.kind() == SubsystemKind::AtomSpin)
            .map(|s| {
                let boxed = self.elements.iter().find_map(|e| match &e.kind {
                    ElementKind::AtomBox { atom, level, .. } if atom == s.id() => {
                        Some((e.id.clone(), level.clone()))
                    }
                    _ => None,
                });
                AtomInfo {
                    spin: s.id().to_string(),
                    level: boxed.as_ref().map(|b| b.1.clone()),
                    box_id: boxed.map(|b| b.0),
                }
            })
            .collect()
    }

    pub fn detectors(&self) -> impl Iterator<Item = (&str, &str)> {
        self.elements.iter().filter_map(|e| match &e.kind {
            ElementKind::Detector { path } => Some((e.id.as_str(), path.as_str())),
            _ => None,
        })
    }

    pub fn detector_for(&self, symbol: &str) -> Option<&str> {
        self.detectors().find(|(_, p)| *p == symbol).map(|(id, _)| id)
    }

    pub fn emitters(&self) -> impl Iterator<Item = (&Element, &Ket, &Bra)> {
        self.elements.iter().filter_map(|e| match &e.kind {
            ElementKind::Emitter { emitted, filter } => Some((e, emitted, filter)),
            _ => None,
        })
    }

    fn emits_photon(&self, emitted: &Ket) -> bool {
        self.photon().is_some_and(|p| emitted.space().position(p.id()).is_some())
    }

    /// Elements sorted by (rank, id): the forward application order.
    pub fn ordered(&self) -> Vec<&Element> {
        let mut v: Vec<&Element> = self.elements.iter().collect();
        v.sort_by(|a, b| (a.rank, &a.id).cmp(&(b.rank, &b.id)));
        v
    }

    pub fn ranks(&self) -> Vec<u32> {
        self.elements.iter().map(|e| e.rank).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// First basis symbol of a level subsystem.
    pub(crate) fn ground(&self, level: &str) -> Result<&str, NetworkError> {
        self.space
            .get(level)
            .map(|s| s.basis()[0].as_str())
            .ok_or_else(|| StateError::UnknownSubsystem(level.into()).into())
    }

    /// Edges implied by element ports: producer → atom box(es) → consumer.
    pub fn edges(&self) -> Vec<Edge> {
        let photon = self.photon().map(SubsystemSpec::id);
        let mut by_symbol: BTreeMap<String, (Vec<&str>, Vec<&str>, Vec<&str>)> = BTreeMap::new();
        for e in self.ordered() {
            for s in e.produces(photon) {
                by_symbol.entry(s).or_default().0.push(&e.id);
            }
            for s in e.consumes() {
                by_symbol.entry(s).or_default().2.push(&e.id);
            }
            if let ElementKind::AtomBox { path, .. } = &e.kind {
                by_symbol.entry(path.clone()).or_default().1.push(&e.id);
            }
        }
        let mut edges = Vec::new();
        for (symbol, (producers, taps, consumers)) in &by_symbol {
            for p in producers {
                let mut prev = *p;
                for t in taps {
                    edges.push(Edge { from: prev.into(), to: (*t).into(), symbol: symbol.clone() });
                    prev = t;
                }
                for c in consumers {
                    edges.push(Edge { from: prev.into(), to: (*c).into(), symbol: symbol.clone() });
                }
            }
        }
        edges.sort();
        edges
    }

    /// Tensor product of every emitter's state, with the photon emitters
    /// summed into one photon state and level subsystems in their ground symbol.
    pub fn initial_ket(&self) -> Result<Ket, NetworkError> {
        let photon = self.photon_id()?;
        let mut photon_state: Option<Ket> = None;
        let mut parts: Vec<Ket> = Vec::new();
        for (_, emitted, _) in self.emitters() {
            if emitted.space().position(photon).is_some() {
                photon_state = Some(match photon_state {
                    None => emitted.clone(),
                    Some(p) => p.add(emitted)?,
                });
            } else {
                parts.push(emitted.clone());
            }
        }
        let mut state =
            photon_state.ok_or_else(|| NetworkError::Contract("network has no photon emitter".into()))?;
        for p in &parts {
            state = state.tensor(p)?;
        }
        for spec in self.space.subsystems() {
            if state.space().position(spec.id()).is_none() {
                let ground = Ket::on(spec, &[(spec.basis()[0].as_str(), crate::amplitude::ONE)])?;
                state = state.tensor(&ground)?;
            }
        }
        let order: Vec<&str> = self.space.subsystems().iter().map(SubsystemSpec::id).collect();
        Ok(state.reorder(&order)?)
    }

    /// Checks every structural invariant and reports each violation.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |element: &str, rule: Rule, message: String| {
            out.push(Diagnostic { element: element.to_string(), rule, message });
        };

        let mut seen = BTreeSet::new();
        for e in &self.elements {
            if !seen.insert(e.id.as_str()) {
                diag(&e.id, Rule::DuplicateId, "element id used more than once".into());
            }
        }

        let photon = match self.photon() {
            Some(p) => p,
            None => {
                diag("network", Rule::PhotonSubsystem, "need exactly one photon-path subsystem".into());
                return out;
            }
        };
        let pid = photon.id();
        let check_symbol = |diag: &mut dyn FnMut(&str, Rule, String), el: &str, sym: &str| {
            if !photon.contains(sym) {
                diag(el, Rule::UnknownSymbol, format!("photon-path symbol `{sym}` not in photon basis"));
            }
        };

        let mut photon_emitters = Vec::new();
        let mut source_norm_parts: Vec<&Ket> = Vec::new();
        let mut covered: BTreeMap<&str, &str> = BTreeMap::new();
        for e in &self.elements {
            match &e.kind {
                ElementKind::Emitter { emitted, filter } => {
                    let mut subsystems_ok = true;
                    for spec in emitted.space().subsystems() {
                        if self.space.get(spec.id()) != Some(spec) {
                            subsystems_ok = false;
                            diag(
                                &e.id,
                                Rule::UnknownSubsystem,
                                format!("emitted state uses undeclared subsystem `{}`", spec.id()),
                            );
                        }
                    }
                    if emitted.is_empty() {
                        diag(&e.id, Rule::EmitterState, "emitted state is empty".into());
                    }
                    if filter.space() != emitted.space() {
                        diag(&e.id, Rule::EmitterState, "filter and emitted state span different subsystems".into());
                    }
                    if self.emits_photon(emitted) {
                        if emitted.space().subsystems().len() != 1 {
                            diag(&e.id, Rule::EmitterState, "photon emitter must emit the photon alone".into());
                        }
                        photon_emitters.push(e.id.as_str());
                        source_norm_parts.push(emitted);
                    } else {
                        let specs = emitted.space().subsystems();
                        if specs.len() != 1 || specs[0].kind() != SubsystemKind::AtomSpin {
                            diag(&e.id, Rule::EmitterState, "atom emitter must emit exactly one atom-spin subsystem".into());
                        }
                        if subsystems_ok && (emitted.norm_sq() - 1.0).abs() > TOLERANCE {
                            diag(&e.id, Rule::NotNormalized, format!("emitted norm² {}", emitted.norm_sq()));
                        }
                        for spec in specs {
                            if let Some(prev) = covered.insert(spec.id(), &e.id) {
                                diag(
                                    &e.id,
                                    Rule::EmitterCount,
                                    format!("subsystem `{}` already emitted by `{prev}`", spec.id()),
                                );
                            }
                        }
                    }
                }
                ElementKind::BeamSplitter { inputs, outputs } => {
                    for s in inputs.iter().flatten().chain(outputs.iter()) {
                        check_symbol(&mut diag, &e.id, s);
                    }
                    if inputs.iter().all(Option::is_none) {
                        diag(&e.id, Rule::PortConflict, "beam splitter has no input".into());
                    }
                    if inputs[0].is_some() && inputs[0] == inputs[1] || outputs[0] == outputs[1] {
                        diag(&e.id, Rule::PortConflict, "beam splitter ports must be distinct".into());
                    }
                    if inputs.iter().flatten().any(|i| outputs.contains(i)) {
                        diag(&e.id, Rule::PortConflict, "symbol is both input and output".into());
                    }
                }
                ElementKind::Mirror { input, output, phase } => {
                    check_symbol(&mut diag, &e.id, input);
                    check_symbol(&mut diag, &e.id, output);
                    if input == output {
                        diag(&e.id, Rule::PortConflict, "mirror input equals output".into());
                    }
                    if (phase.norm() - 1.0).abs() > TOLERANCE {
                        diag(&e.id, Rule::NotNormalized, "mirror phase must have unit modulus".into());
                    }
                }
                ElementKind::AtomBox { atom, blocking, path, level, excited } => {
                    check_symbol(&mut diag, &e.id, path);
                    match self.space.get(atom) {
                        Some(s) if s.kind() == SubsystemKind::AtomSpin => {
                            if !s.contains(blocking) {
                                diag(&e.id, Rule::UnknownSymbol, format!("`{blocking}` not a spin of `{atom}`"));
                            }
                        }
                        _ => diag(&e.id, Rule::UnknownSubsystem, format!("`{atom}` is not an atom-spin subsystem")),
                    }
                    match self.space.get(level) {
                        Some(s) if s.kind() == SubsystemKind::AtomLevel => {
                            if !s.contains(excited) || s.basis()[0] == *excited {
                                diag(
                                    &e.id,
                                    Rule::UnknownSymbol,
                                    format!("`{excited}` is not an excited symbol of `{level}`"),
                                );
                            }
                        }
                        _ => diag(&e.id, Rule::UnknownSubsystem, format!("`{level}` is not an atom-level subsystem")),
                    }
                }
                ElementKind::Detector { path } => check_symbol(&mut diag, &e.id, path),
            }
        }

        match photon_emitters.len() {
            1 | 2 => {
                let mut total: Option<Ket> = None;
                for k in &source_norm_parts {
                    total = Some(match total {
                        None => (*k).clone(),
                        Some(t) => t.add(k).unwrap_or(t),
                    });
                }
                let n = total.map(|t| t.norm_sq()).unwrap_or(0.0);
                if (n - 1.0).abs() > TOLERANCE {
                    diag(photon_emitters[0], Rule::NotNormalized, format!("photon source norm² {n}"));
                }
            }
            n => diag("network", Rule::EmitterCount, format!("{n} photon emitters (expected 1, or 2 for a split source)")),
        }
        for spec in self.space.subsystems() {
            if spec.kind() == SubsystemKind::AtomSpin && !covered.contains_key(spec.id()) {
                diag("network", Rule::EmitterCount, format!("atom `{}` has no emitter", spec.id()));
            }
        }

        let mut producers: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        let mut consumers: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        let mut taps: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for e in &self.elements {
            for s in e.produces(Some(pid)) {
                producers.entry(s).or_default().push(&e.id);
            }
            for s in e.consumes() {
                consumers.entry(s).or_default().push(&e.id);
            }
            if let ElementKind::AtomBox { path, .. } = &e.kind {
                taps.entry(path.clone()).or_default().push(&e.id);
            }
        }
        for (sym, who) in &producers {
            if who.len() > 1 {
                diag(who[1], Rule::ProducedTwice, format!("photon-path symbol `{sym}` produced twice"));
            }
        }
        for (sym, who) in &consumers {
            if who.len() > 1 {
                let rule = if self.detectors().filter(|(_, p)| p == sym).count() > 1 {
                    Rule::DuplicateDetector
                } else {
                    Rule::ConsumedTwice
                };
                diag(who[1], rule, format!("photon-path symbol `{sym}` consumed twice"));
            }
        }
        for (sym, who) in &taps {
            if who.len() > 1 {
                diag(who[1], Rule::ConsumedTwice, format!("photon-path symbol `{sym}` consumed twice"));
            }
        }
        for (sym, who) in consumers.iter().chain(taps.iter()) {
            if !producers.contains_key(sym) {
                diag(who[0], Rule::NeverProduced, format!("photon-path symbol `{sym}` is never produced"));
            }
        }

        let edges = self.edges();
        let rank_of: BTreeMap<&str, u32> = self.elements.iter().map(|e| (e.id.as_str(), e.rank)).collect();
        for edge in &edges {
            if rank_of[edge.from.as_str()] >= rank_of[edge.to.as_str()] {
                diag(
                    &edge.to,
                    Rule::RankOrder,
                    format!("rank must exceed that of `{}` along `{}`", edge.from, edge.symbol),
                );
            }
        }
        let mut graph = DiGraph::<&str, ()>::new();
        let nodes: BTreeMap<&str, _> = self.elements.iter().map(|e| (e.id.as_str(), graph.add_node(e.id.as_str()))).collect();
        for edge in &edges {
            graph.add_edge(nodes[edge.from.as_str()], nodes[edge.to.as_str()], ());
        }
        if let Err(cycle) = toposort(&graph, None) {
            diag(graph[cycle.node_id()], Rule::Acyclicity, "element lies on a cycle".into());
        }

        if let Some(declared) = &self.declared_edges {
            let mut declared = declared.clone();
            declared.sort();
            if declared != edges {
                diag("network", Rule::EdgeMismatch, "declared edges disagree with element ports".into());
            }
        }
        out
    }
}
