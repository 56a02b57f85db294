//! JSON network description.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "subsystems": [{"id": "photon", "kind": "photon-path", "basis": ["s", "u", "v", "c", "d"]}],
//!   "elements": [
//!     {"id": "L", "rank": 0, "variant": "emitter",
//!      "params": {"emitted": [{"state": {"photon": "s"}, "amplitude": [1.0, 0.0]}]}},
//!     {"id": "S1", "rank": 1, "variant": "beam-splitter",
//!      "params": {"inputs": ["s", null], "outputs": ["v", "u"]}},
//!     {"id": "D", "rank": 3, "variant": "detector", "params": {"path": "d"}}
//!   ],
//!   "edges": [{"from": "L", "to": "S1", "symbol": "s"}],
//!   "aliases": {"A": "u"}
//! }
//! ```
//!
//! Emitters may carry an explicit `filter` in the same term format (bra
//! coefficients); it defaults to the dual of `emitted`. Mirrors take
//! `input`, `output` and an optional unit-modulus `phase`. Atom boxes take
//! `atom`, `blocking`, `path`, `level` and `excited`. `edges` may be omitted;
//! when present it must equal the edges implied by the element ports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amplitude::{Bra, Complex, Ket, Space, SubsystemKind, SubsystemSpec};

use super::{Edge, Element, ElementKind, Network, NetworkError};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default = "default_schema")]
    schema: u32,
    subsystems: Vec<SubsystemFile>,
    elements: Vec<ElementFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeFile>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    aliases: BTreeMap<String, String>,
}

fn default_schema() -> u32 {
    SCHEMA
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsystemFile {
    id: String,
    kind: String,
    basis: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ElementFile {
    id: String,
    rank: u32,
    #[serde(flatten)]
    kind: KindFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "kebab-case")]
enum KindFile {
    Emitter {
        emitted: Vec<TermFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        filter: Option<Vec<TermFile>>,
    },
    BeamSplitter {
        inputs: [Option<String>; 2],
        outputs: [String; 2],
    },
    Mirror {
        input: String,
        output: String,
        #[serde(default = "unit_phase")]
        phase: [f64; 2],
    },
    AtomBox {
        atom: String,
        blocking: String,
        path: String,
        level: String,
        excited: String,
    },
    Detector {
        path: String,
    },
}

fn unit_phase() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    state: BTreeMap<String, String>,
    amplitude: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    from: String,
    to: String,
    symbol: String,
}

fn terms_space(all: &Space, terms: &[TermFile]) -> Result<Space, NetworkError> {
    let first = terms
        .first()
        .ok_or_else(|| NetworkError::File("emitter term list is empty".into()))?;
    let mut specs = Vec::new();
    for spec in all.subsystems() {
        if first.state.contains_key(spec.id()) {
            specs.push(spec.clone());
        }
    }
    if specs.len() != first.state.len() {
        return Err(NetworkError::File("emitter term names an undeclared subsystem".into()));
    }
    Ok(Space::new(specs)?)
}

fn parse_terms(space: &Space, terms: &[TermFile]) -> Result<Vec<(crate::amplitude::BasisState, Complex)>, NetworkError> {
    terms
        .iter()
        .map(|t| {
            let pairs: Vec<(&str, &str)> = t.state.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            Ok((space.state(&pairs)?, Complex::new(t.amplitude[0], t.amplitude[1])))
        })
        .collect()
}

fn write_terms<'a>(it: impl Iterator<Item = (&'a crate::amplitude::BasisState, &'a Complex)>) -> Vec<TermFile> {
    it.map(|(s, a)| TermFile {
        state: s.assignment().iter().cloned().collect(),
        amplitude: [a.re, a.im],
    })
    .collect()
}

/// Parses a network description and rejects it unless it validates.
pub fn from_json(text: &str) -> Result<Network, NetworkError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetworkError::File(e.to_string()))?;
    if file.schema != SCHEMA {
        return Err(NetworkError::File(format!("unsupported schema {}", file.schema)));
    }
    let mut specs = Vec::new();
    for s in file.subsystems {
        let kind = SubsystemKind::parse(&s.kind)
            .ok_or_else(|| NetworkError::File(format!("unknown subsystem kind `{}`", s.kind)))?;
        specs.push(SubsystemSpec::new(s.id, kind, s.basis)?);
    }
    let space = Space::new(specs.clone())?;
    let mut elements = Vec::new();
    for e in file.elements {
        let kind = match e.kind {
            KindFile::Emitter { emitted, filter } => {
                let sub = terms_space(&space, &emitted)?;
                let emitted = Ket::from_terms(sub.clone(), parse_terms(&sub, &emitted)?)?;
                let filter = match filter {
                    Some(f) => Bra::from_terms(sub.clone(), parse_terms(&sub, &f)?)?,
                    None => emitted.dual(),
                };
                ElementKind::Emitter { emitted, filter }
            }
            KindFile::BeamSplitter { inputs, outputs } => ElementKind::BeamSplitter { inputs, outputs },
            KindFile::Mirror { input, output, phase } => ElementKind::Mirror {
                input,
                output,
                phase: Complex::new(phase[0], phase[1]),
            },
            KindFile::AtomBox { atom, blocking, path, level, excited } => {
                ElementKind::AtomBox { atom, blocking, path, level, excited }
            }
            KindFile::Detector { path } => ElementKind::Detector { path },
        };
        elements.push(Element { id: e.id, rank: e.rank, kind });
    }
    let mut network = Network::new(specs, elements)?.with_aliases(file.aliases);
    if let Some(edges) = file.edges {
        network = network.with_declared_edges(
            edges.into_iter().map(|e| Edge { from: e.from, to: e.to, symbol: e.symbol }).collect(),
        );
    }
    network.validated()
}

/// Serializes a network, including its derived edge list.
pub fn to_json(n: &Network) -> String {
    let file = NetworkFile {
        schema: SCHEMA,
        subsystems: n
            .space()
            .subsystems()
            .iter()
            .map(|s| SubsystemFile { id: s.id().into(), kind: s.kind().as_str().into(), basis: s.basis().to_vec() })
            .collect(),
        elements: n
            .elements()
            .iter()
            .map(|e| ElementFile {
                id: e.id.clone(),
                rank: e.rank,
                kind: match &e.kind {
                    ElementKind::Emitter { emitted, filter } => KindFile::Emitter {
                        emitted: write_terms(emitted.iter()),
                        filter: (*filter != emitted.dual()).then(|| write_terms(filter.iter())),
                    },
                    ElementKind::BeamSplitter { inputs, outputs } => KindFile::BeamSplitter {
                        inputs: inputs.clone(),
                        outputs: outputs.clone(),
                    },
                    ElementKind::Mirror { input, output, phase } => KindFile::Mirror {
                        input: input.clone(),
                        output: output.clone(),
                        phase: [phase.re, phase.im],
                    },
                    ElementKind::AtomBox { atom, blocking, path, level, excited } => KindFile::AtomBox {
                        atom: atom.clone(),
                        blocking: blocking.clone(),
                        path: path.clone(),
                        level: level.clone(),
                        excited: excited.clone(),
                    },
                    ElementKind::Detector { path } => KindFile::Detector { path: path.clone() },
                },
            })
            .collect(),
        edges: Some(
            n.edges()
                .into_iter()
                .map(|e| EdgeFile { from: e.from, to: e.to, symbol: e.symbol })
                .collect(),
        ),
        aliases: n.aliases().clone(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}
