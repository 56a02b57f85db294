//! Path-ket notation for single-photon amplitude bookkeeping.
//!
//! ```text
//! EXPR    := ['+'|'-'] TERM (('+'|'-') TERM)*
//! TERM    := [COEFF] '|' SEG ('-' SEG)* '>' [ATOMKET]
//! SEG     := IDENT | '_' IDENT '_'
//! ATOMKET := '|' ('+'|'-') ('+'|'-') '>'
//! COEFF   := 'i' | DECIMAL | 'i' DECIMAL
//! ```
//!
//! `_S1_` marks a reflection at beam splitter S1. `−` is accepted for `-`,
//! `⟩` for `>`, and whitespace may separate any two tokens.

mod eval;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::amplitude::{Complex, ZERO};
use crate::network::{ElementKind, Network};

pub use eval::{evaluate, routes, survivors, Survivor};
pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("invalid path: {0}")]
    Invalid(String),
    #[error("path disagrees with the network geometry: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub label: String,
    pub reflected: bool,
}

impl Segment {
    pub fn new(label: &str, reflected: bool) -> Self {
        Segment { label: label.to_string(), reflected }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn sign(self) -> char {
        match self {
            Spin::Up => '+',
            Spin::Down => '-',
        }
    }
}

/// Term prefactor `±[i][magnitude]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub negative: bool,
    pub imaginary: bool,
    pub magnitude: Option<f64>,
}

impl Coefficient {
    pub const ONE: Coefficient = Coefficient { negative: false, imaginary: false, magnitude: None };

    pub fn value(&self) -> Complex {
        let mut c = Complex::new(self.magnitude.unwrap_or(1.0), 0.0);
        if self.imaginary {
            c *= crate::amplitude::I;
        }
        if self.negative {
            c = -c;
        }
        c
    }

    fn negated(self) -> Self {
        Coefficient { negative: !self.negative, ..self }
    }
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::ONE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathKet {
    pub coefficient: Coefficient,
    pub segments: Vec<Segment>,
    /// Trailing two-atom label such as `|++>`.
    pub atoms: Option<[Spin; 2]>,
}

impl PathKet {
    pub fn new(segments: Vec<Segment>) -> Self {
        PathKet { coefficient: Coefficient::ONE, segments, atoms: None }
    }

    pub fn with_atoms(mut self, atoms: [Spin; 2]) -> Self {
        self.atoms = Some(atoms);
        self
    }

    pub fn prefactor(&self) -> Complex {
        self.coefficient.value()
    }

    /// Ket text without the sign, e.g. `i0.5|L-_S1_-A>`.
    fn write_unsigned(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.coefficient;
        if c.imaginary {
            f.write_str("i")?;
        }
        if let Some(m) = c.magnitude {
            write!(f, "{m}")?;
        }
        f.write_str("|")?;
        for (k, s) in self.segments.iter().enumerate() {
            if k > 0 {
                f.write_str("-")?;
            }
            if s.reflected {
                write!(f, "_{}_", s.label)?;
            } else {
                f.write_str(&s.label)?;
            }
        }
        f.write_str(">")?;
        if let Some([a, b]) = self.atoms {
            write!(f, " |{}{}>", a.sign(), b.sign())?;
        }
        Ok(())
    }
}

impl fmt::Display for PathKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coefficient.negative {
            f.write_str("-")?;
        }
        self.write_unsigned(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathExpression {
    pub terms: Vec<PathKet>,
}

impl PathExpression {
    pub fn negated(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| PathKet { coefficient: t.coefficient.negated(), ..t.clone() })
            .collect();
        PathExpression { terms }
    }

    pub fn concat(&self, other: &PathExpression) -> Self {
        PathExpression { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }
}

impl fmt::Display for PathExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            match (k, t.coefficient.negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            t.write_unsigned(f)?;
        }
        Ok(())
    }
}

/// What a segment label names in a network.
#[derive(Debug, Clone)]
pub(crate) enum Resolved<'a> {
    Element(&'a crate::network::Element),
    /// Photon-path symbol, reached directly or through the alias table.
    Arm(String),
}

pub(crate) fn resolve<'a>(n: &'a Network, label: &str) -> Result<Resolved<'a>, PathError> {
    if let Some(el) = n.element(label) {
        return Ok(Resolved::Element(el));
    }
    if let Some(sym) = n.aliases().get(label) {
        return Ok(Resolved::Arm(sym.clone()));
    }
    if n.photon().is_some_and(|p| p.contains(label)) {
        return Ok(Resolved::Arm(label.to_string()));
    }
    Err(PathError::UnknownLabel(label.to_string()))
}

/// Checks endpoints and reflection markers of a single path.
pub(crate) fn check_shape<'a>(n: &'a Network, p: &PathKet) -> Result<Vec<Resolved<'a>>, PathError> {
    let resolved = p.segments.iter().map(|s| resolve(n, &s.label)).collect::<Result<Vec<_>, _>>()?;
    for (s, r) in p.segments.iter().zip(&resolved) {
        let splitter = matches!(r, Resolved::Element(e) if matches!(e.kind, ElementKind::BeamSplitter { .. }));
        if s.reflected && !splitter {
            return Err(PathError::Invalid(format!("`{}` is not a beam splitter and cannot reflect", s.label)));
        }
    }
    match resolved.first() {
        Some(Resolved::Element(e)) if matches!(e.kind, ElementKind::Emitter { .. }) => {}
        _ => return Err(PathError::Invalid("a path starts at an emitter".into())),
    }
    if resolved.len() > 1 && !matches!(resolved.last(), Some(Resolved::Element(e)) if matches!(e.kind, ElementKind::Detector { .. }))
    {
        return Err(PathError::Invalid("a path ends at a detector".into()));
    }
    Ok(resolved)
}

const T: Complex = Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
const R: Complex = Complex::new(0.0, std::f64::consts::FRAC_1_SQRT_2);

/// Path amplitude: (1/√2)·(i if reflected) per beam splitter, times mirror
/// phases and the prefactor. Atom labels are ignored.
pub fn amplitude(p: &PathKet, n: &Network) -> Result<Complex, PathError> {
    let resolved = check_shape(n, p)?;
    let mut a = p.prefactor();
    for (s, r) in p.segments.iter().zip(resolved) {
        if let Resolved::Element(e) = r {
            match &e.kind {
                ElementKind::BeamSplitter { .. } => a *= if s.reflected { R } else { T },
                ElementKind::Mirror { phase, .. } => a *= phase,
                _ => {}
            }
        }
    }
    Ok(a)
}

pub fn sum_amplitudes(e: &PathExpression, n: &Network) -> Result<Complex, PathError> {
    e.terms.iter().try_fold(ZERO, |acc, t| Ok(acc + amplitude(t, n)?))
}

/// Sums below this modulus count as exact cancellation.
pub const CANCELLATION: f64 = 1e-12;

pub fn cancels(sum: Complex) -> bool {
    sum.norm() < CANCELLATION
}
