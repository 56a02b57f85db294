//! Sparse complex amplitudes over labeled tensor-product basis states.
//!
//! A [`Ket`] is an offer wave and a [`Bra`] a confirmation wave. Both are
//! sparse maps from [`BasisState`] to a complex amplitude, tied to an ordered
//! list of [`SubsystemSpec`]s (the [`Space`]). Basis symbols are opaque
//! strings; their physical meaning lives in the network layer.
//!
//! Bras store their coefficients as they appear on the bra, i.e. already
//! conjugated: `inner(b, k) = Σ b[x] · k[x]` and `Ket::dual` conjugates.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

pub type Complex = Complex64;

/// Equality tolerance for amplitudes and probabilities.
pub const TOLERANCE: f64 = 1e-12;

/// Terms whose modulus falls below this are dropped from sparse vectors.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);
pub const I: Complex = Complex::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("subsystem specifications differ between operands")]
    SpaceMismatch,
    #[error("subsystem `{0}` appears on both sides of a tensor product")]
    OverlappingSubsystem(String),
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("symbol `{symbol}` is not in the basis of subsystem `{subsystem}`")]
    UnknownSymbol { subsystem: String, symbol: String },
    #[error("basis assignment must cover every subsystem exactly once")]
    IncompleteAssignment,
    #[error("invalid subsystem specification: {0}")]
    InvalidSpec(String),
    #[error("subsystem `{0}` is not two-level")]
    NotTwoLevel(String),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("amplitude is not finite")]
    NonFinite,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("subsystem `{0}` does not have a definite value across all terms")]
    NotDefinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubsystemKind {
    PhotonPath,
    AtomSpin,
    AtomLevel,
}

impl SubsystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubsystemKind::PhotonPath => "photon-path",
            SubsystemKind::AtomSpin => "atom-spin",
            SubsystemKind::AtomLevel => "atom-level",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "photon-path" => Some(SubsystemKind::PhotonPath),
            "atom-spin" => Some(SubsystemKind::AtomSpin),
            "atom-level" => Some(SubsystemKind::AtomLevel),
            _ => None,
        }
    }
}

/// A named subsystem with an ordered basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsystemSpec {
    id: String,
    kind: SubsystemKind,
    basis: Vec<String>,
}

impl SubsystemSpec {
    pub fn new<I, S>(id: impl Into<String>, kind: SubsystemKind, basis: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        let basis: Vec<String> = basis.into_iter().map(Into::into).collect();
        if id.is_empty() {
            return Err(StateError::InvalidSpec("empty subsystem id".into()));
        }
        if basis.is_empty() {
            return Err(StateError::InvalidSpec(format!("subsystem `{id}` has no basis symbols")));
        }
        for (i, s) in basis.iter().enumerate() {
            if basis[..i].contains(s) {
                return Err(StateError::InvalidSpec(format!(
                    "symbol `{s}` repeated in subsystem `{id}`"
                )));
            }
        }
        Ok(Self { id, kind, basis })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> SubsystemKind {
        self.kind
    }

    pub fn basis(&self) -> &[String] {
        &self.basis
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.basis.iter().any(|s| s == symbol)
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.basis.iter().position(|s| s == symbol)
    }

    fn with_basis(&self, basis: Vec<String>) -> Result<Self, StateError> {
        Self::new(self.id.clone(), self.kind, basis)
    }
}

/// Ordered list of subsystems shared by every term of a state.
#[derive(Debug, Clone)]
pub struct Space(Arc<[SubsystemSpec]>);

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0[..] == other.0[..]
    }
}

impl Eq for Space {}

impl Space {
    pub fn new(subsystems: Vec<SubsystemSpec>) -> Result<Self, StateError> {
        for (i, s) in subsystems.iter().enumerate() {
            if subsystems[..i].iter().any(|o| o.id == s.id) {
                return Err(StateError::InvalidSpec(format!("duplicate subsystem `{}`", s.id)));
            }
        }
        Ok(Space(subsystems.into()))
    }

    pub fn single(spec: SubsystemSpec) -> Self {
        Space(vec![spec].into())
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.0
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.0.iter().position(|s| s.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&SubsystemSpec> {
        self.0.iter().find(|s| s.id == id)
    }

    fn require(&self, id: &str) -> Result<usize, StateError> {
        self.position(id).ok_or_else(|| StateError::UnknownSubsystem(id.to_string()))
    }

    fn require_symbol(&self, id: &str, symbol: &str) -> Result<usize, StateError> {
        let pos = self.require(id)?;
        if !self.0[pos].contains(symbol) {
            return Err(StateError::UnknownSymbol { subsystem: id.into(), symbol: symbol.into() });
        }
        Ok(pos)
    }

    /// Builds a basis state from `(subsystem, symbol)` pairs given in any order.
    pub fn state(&self, assignment: &[(&str, &str)]) -> Result<BasisState, StateError> {
        if assignment.len() != self.0.len() {
            return Err(StateError::IncompleteAssignment);
        }
        let mut out = Vec::with_capacity(self.0.len());
        for spec in self.0.iter() {
            let mut hits = assignment.iter().filter(|(id, _)| *id == spec.id);
            let (_, sym) = hits.next().ok_or(StateError::IncompleteAssignment)?;
            if hits.next().is_some() {
                return Err(StateError::IncompleteAssignment);
            }
            if !spec.contains(sym) {
                return Err(StateError::UnknownSymbol {
                    subsystem: spec.id.clone(),
                    symbol: sym.to_string(),
                });
            }
            out.push((spec.id.clone(), sym.to_string()));
        }
        Ok(BasisState(out))
    }

    fn check_state(&self, state: &BasisState) -> Result<(), StateError> {
        if state.0.len() != self.0.len() {
            return Err(StateError::IncompleteAssignment);
        }
        for (spec, (id, sym)) in self.0.iter().zip(&state.0) {
            if &spec.id != id {
                return Err(StateError::IncompleteAssignment);
            }
            if !spec.contains(sym) {
                return Err(StateError::UnknownSymbol { subsystem: id.clone(), symbol: sym.clone() });
            }
        }
        Ok(())
    }

    fn replace(&self, pos: usize, spec: SubsystemSpec) -> Space {
        let mut v = self.0.to_vec();
        v[pos] = spec;
        Space(v.into())
    }
}

/// One entry per subsystem, in the owning space's order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState(Vec<(String, String)>);

impl BasisState {
    pub fn assignment(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn symbol(&self, subsystem: &str) -> Option<&str> {
        self.0.iter().find(|(id, _)| id == subsystem).map(|(_, s)| s.as_str())
    }

    fn with_symbol(&self, pos: usize, symbol: &str) -> BasisState {
        let mut v = self.0.clone();
        v[pos].1 = symbol.to_string();
        BasisState(v)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for (i, (_, s)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s)?;
        }
        f.write_str("⟩")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Sparse {
    space: Space,
    terms: BTreeMap<BasisState, Complex>,
}

impl Sparse {
    fn zero(space: Space) -> Self {
        Sparse { space, terms: BTreeMap::new() }
    }

    fn accumulate(&mut self, state: BasisState, amp: Complex) {
        let entry = self.terms.entry(state).or_insert(ZERO);
        *entry += amp;
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        self
    }

    fn from_terms<It>(space: Space, terms: It) -> Result<Self, StateError>
    where
        It: IntoIterator<Item = (BasisState, Complex)>,
    {
        let mut out = Sparse::zero(space);
        for (s, a) in terms {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(StateError::NonFinite);
            }
            out.space.check_state(&s)?;
            out.accumulate(s, a);
        }
        Ok(out.prune())
    }

    fn same_space(&self, other: &Sparse) -> Result<(), StateError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(StateError::SpaceMismatch)
        }
    }

    fn add(&self, other: &Sparse) -> Result<Sparse, StateError> {
        self.same_space(other)?;
        let mut out = self.clone();
        for (s, a) in &other.terms {
            out.accumulate(s.clone(), *a);
        }
        Ok(out.prune())
    }

    fn scale(&self, c: Complex) -> Sparse {
        Sparse {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(s, a)| (s.clone(), a * c)).collect(),
        }
        .prune()
    }

    fn conj(&self) -> Sparse {
        Sparse {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(s, a)| (s.clone(), a.conj())).collect(),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    fn tensor(&self, other: &Sparse) -> Result<Sparse, StateError> {
        for spec in other.space.subsystems() {
            if self.space.position(&spec.id).is_some() {
                return Err(StateError::OverlappingSubsystem(spec.id.clone()));
            }
        }
        let mut specs = self.space.subsystems().to_vec();
        specs.extend(other.space.subsystems().iter().cloned());
        let mut out = Sparse::zero(Space(specs.into()));
        for (sa, aa) in &self.terms {
            for (sb, ab) in &other.terms {
                let mut v = sa.0.clone();
                v.extend(sb.0.iter().cloned());
                out.accumulate(BasisState(v), aa * ab);
            }
        }
        Ok(out.prune())
    }

    fn project(&self, subsystem: &str, symbol: &str) -> Result<Sparse, StateError> {
        let pos = self.space.require_symbol(subsystem, symbol)?;
        Ok(Sparse {
            space: self.space.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(s, _)| s.0[pos].1 == symbol)
                .map(|(s, a)| (s.clone(), *a))
                .collect(),
        })
    }

    fn map_local<F>(&self, subsystem: &str, mut f: F) -> Result<Sparse, StateError>
    where
        F: FnMut(&str) -> Option<Vec<(String, Complex)>>,
    {
        let pos = self.space.require(subsystem)?;
        let mut out = Sparse::zero(self.space.clone());
        for (s, a) in &self.terms {
            match f(&s.0[pos].1) {
                None => out.accumulate(s.clone(), *a),
                Some(images) => {
                    for (sym, c) in images {
                        if !self.space.0[pos].contains(&sym) {
                            return Err(StateError::UnknownSymbol {
                                subsystem: subsystem.into(),
                                symbol: sym,
                            });
                        }
                        out.accumulate(s.with_symbol(pos, &sym), a * c);
                    }
                }
            }
        }
        Ok(out.prune())
    }

    fn split<P: FnMut(&BasisState) -> bool>(&self, mut pred: P) -> (Sparse, Sparse) {
        let mut hit = Sparse::zero(self.space.clone());
        let mut rest = Sparse::zero(self.space.clone());
        for (s, a) in &self.terms {
            if pred(s) {
                hit.terms.insert(s.clone(), *a);
            } else {
                rest.terms.insert(s.clone(), *a);
            }
        }
        (hit, rest)
    }

    fn rebase(
        &self,
        subsystem: &str,
        matrix: &[[Complex; 2]; 2],
        new_symbols: [&str; 2],
    ) -> Result<Sparse, StateError> {
        let pos = self.space.require(subsystem)?;
        let old = &self.space.0[pos];
        if old.basis.len() != 2 {
            return Err(StateError::NotTwoLevel(subsystem.into()));
        }
        let deviation = unitarity_deviation(matrix);
        if deviation > TOLERANCE {
            return Err(StateError::NotUnitary(deviation));
        }
        let spec = old.with_basis(new_symbols.iter().map(|s| s.to_string()).collect())?;
        let space = self.space.replace(pos, spec);
        let mut out = Sparse::zero(space);
        for (s, a) in &self.terms {
            // Basis membership was checked on construction.
            let i = old.index_of(&s.0[pos].1).unwrap();
            for (j, sym) in new_symbols.iter().enumerate() {
                out.accumulate(s.with_symbol(pos, sym), matrix[j][i] * a);
            }
        }
        Ok(out.prune())
    }

    fn reorder(&self, order: &[&str]) -> Result<Sparse, StateError> {
        if order.len() != self.space.0.len() {
            return Err(StateError::IncompleteAssignment);
        }
        let perm = order
            .iter()
            .map(|id| self.space.require(id))
            .collect::<Result<Vec<_>, _>>()?;
        let specs: Vec<SubsystemSpec> = perm.iter().map(|&p| self.space.0[p].clone()).collect();
        let space = Space::new(specs)?;
        let terms = self
            .terms
            .iter()
            .map(|(s, a)| (BasisState(perm.iter().map(|&p| s.0[p].clone()).collect()), *a))
            .collect();
        Ok(Sparse { space, terms })
    }

    fn remove_definite(&self, subsystem: &str) -> Result<Sparse, StateError> {
        let pos = self.space.require(subsystem)?;
        let mut value: Option<&str> = None;
        for s in self.terms.keys() {
            match value {
                None => value = Some(&s.0[pos].1),
                Some(v) if v != s.0[pos].1 => {
                    return Err(StateError::NotDefinite(subsystem.to_string()))
                }
                _ => {}
            }
        }
        let mut specs = self.space.0.to_vec();
        specs.remove(pos);
        let mut out = Sparse::zero(Space(specs.into()));
        for (s, a) in &self.terms {
            let mut v = s.0.clone();
            v.remove(pos);
            out.terms.insert(BasisState(v), *a);
        }
        Ok(out)
    }

    fn approx_eq(&self, other: &Sparse, tol: f64) -> bool {
        if self.space != other.space {
            return false;
        }
        let lhs = self.terms.iter().all(|(s, a)| {
            (a - other.terms.get(s).copied().unwrap_or(ZERO)).norm() <= tol
        });
        lhs && other
            .terms
            .iter()
            .all(|(s, a)| self.terms.contains_key(s) || a.norm() <= tol)
    }
}

/// Largest entry of `|M†M − 1|`.
pub fn unitarity_deviation(m: &[[Complex; 2]; 2]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for k in 0..2 {
                acc += m[k][i].conj() * m[k][j];
            }
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((acc - target).norm());
        }
    }
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}

/// Conjugate transpose of a 2×2 matrix.
pub fn adjoint(m: &[[Complex; 2]; 2]) -> [[Complex; 2]; 2] {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

/// Basis-change matrix onto the spin-1/2 eigenbasis along the Bloch direction
/// `(theta, phi)` (radians), for use with [`Ket::rebase`].
///
/// Row `j` holds the bra of the `j`-th new basis state in the old `(z↑, z↓)`
/// coordinates: `|n↑⟩ = cos(θ/2)|z↑⟩ + e^{iφ} sin(θ/2)|z↓⟩` and
/// `|n↓⟩ = sin(θ/2)|z↑⟩ − e^{iφ} cos(θ/2)|z↓⟩`.
pub fn bloch_basis(theta: f64, phi: f64) -> [[Complex; 2]; 2] {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = Complex::from_polar(1.0, -phi);
    [[Complex::new(c, 0.0), e * s], [Complex::new(s, 0.0), -e * c]]
}

/// `|y±⟩ = (|z↑⟩ ± i|z↓⟩)/√2`.
pub fn y_basis() -> [[Complex; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[Complex::new(h, 0.0), Complex::new(0.0, -h)], [Complex::new(h, 0.0), Complex::new(0.0, h)]]
}

/// Offer wave: a sparse ket.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(Sparse);

/// Confirmation wave: a sparse bra with already-conjugated coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Bra(Sparse);

macro_rules! shared_vector_api {
    ($ty:ident) => {
        impl $ty {
            pub fn zero(space: Space) -> Self {
                $ty(Sparse::zero(space))
            }

            pub fn from_terms<It>(space: Space, terms: It) -> Result<Self, StateError>
            where
                It: IntoIterator<Item = (BasisState, Complex)>,
            {
                Sparse::from_terms(space, terms).map($ty)
            }

            /// Unit-amplitude basis vector from `(subsystem, symbol)` pairs.
            pub fn basis(space: &Space, assignment: &[(&str, &str)]) -> Result<Self, StateError> {
                let s = space.state(assignment)?;
                Ok($ty(Sparse::from_terms(space.clone(), [(s, ONE)])?))
            }

            /// Vector over a single subsystem from `(symbol, amplitude)` pairs.
            pub fn on(spec: &SubsystemSpec, amps: &[(&str, Complex)]) -> Result<Self, StateError> {
                let space = Space::single(spec.clone());
                let mut terms = Vec::with_capacity(amps.len());
                for (sym, a) in amps {
                    terms.push((space.state(&[(spec.id(), sym)])?, *a));
                }
                Self::from_terms(space, terms)
            }

            pub fn space(&self) -> &Space {
                &self.0.space
            }

            pub fn len(&self) -> usize {
                self.0.terms.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.terms.is_empty()
            }

            /// Terms in canonical (sorted) order.
            pub fn iter(&self) -> impl Iterator<Item = (&BasisState, &Complex)> {
                self.0.terms.iter()
            }

            pub fn amplitude(&self, state: &BasisState) -> Complex {
                self.0.terms.get(state).copied().unwrap_or(ZERO)
            }

            /// Amplitude of the basis state given as `(subsystem, symbol)` pairs.
            pub fn amplitude_of(&self, assignment: &[(&str, &str)]) -> Result<Complex, StateError> {
                let s = self.0.space.state(assignment)?;
                Ok(self.amplitude(&s))
            }

            pub fn tensor(&self, other: &$ty) -> Result<$ty, StateError> {
                self.0.tensor(&other.0).map($ty)
            }

            pub fn add(&self, other: &$ty) -> Result<$ty, StateError> {
                self.0.add(&other.0).map($ty)
            }

            pub fn sub(&self, other: &$ty) -> Result<$ty, StateError> {
                self.0.add(&other.0.scale(-ONE)).map($ty)
            }

            pub fn scale(&self, c: Complex) -> $ty {
                $ty(self.0.scale(c))
            }

            pub fn norm_sq(&self) -> f64 {
                self.0.norm_sq()
            }

            /// Keeps the terms whose `subsystem` holds `symbol`; amplitudes unchanged.
            pub fn project(&self, subsystem: &str, symbol: &str) -> Result<$ty, StateError> {
                self.0.project(subsystem, symbol).map($ty)
            }

            /// Applies a linear map acting on one subsystem. `f` returns the image
            /// of a basis symbol as `(symbol, coefficient)` pairs, or `None` to
            /// leave that symbol untouched.
            pub fn map_local<F>(&self, subsystem: &str, f: F) -> Result<$ty, StateError>
            where
                F: FnMut(&str) -> Option<Vec<(String, Complex)>>,
            {
                self.0.map_local(subsystem, f).map($ty)
            }

            /// Splits into (terms matching `pred`, remaining terms).
            pub fn split<P: FnMut(&BasisState) -> bool>(&self, pred: P) -> ($ty, $ty) {
                let (a, b) = self.0.split(pred);
                ($ty(a), $ty(b))
            }

            /// Replaces `from` by `to` in `subsystem` wherever it occurs.
            pub fn relabel(&self, subsystem: &str, from: &str, to: &str) -> Result<$ty, StateError> {
                self.0.space.require_symbol(subsystem, from)?;
                self.0.space.require_symbol(subsystem, to)?;
                self.map_local(subsystem, |s| (s == from).then(|| vec![(to.to_string(), ONE)]))
            }

            /// Permutes subsystems into `order`.
            pub fn reorder(&self, order: &[&str]) -> Result<$ty, StateError> {
                self.0.reorder(order).map($ty)
            }

            /// Drops a subsystem that holds the same symbol in every term.
            pub fn remove_definite(&self, subsystem: &str) -> Result<$ty, StateError> {
                self.0.remove_definite(subsystem).map($ty)
            }

            pub fn approx_eq(&self, other: &$ty, tol: f64) -> bool {
                self.0.approx_eq(&other.0, tol)
            }
        }
    };
}

shared_vector_api!(Ket);
shared_vector_api!(Bra);

impl Ket {
    pub fn dual(&self) -> Bra {
        Bra(self.0.conj())
    }

    pub fn normalized(&self) -> Result<Ket, StateError> {
        let n = self.norm_sq();
        if n <= PRUNE_THRESHOLD * PRUNE_THRESHOLD {
            return Err(StateError::ZeroNorm);
        }
        Ok(self.scale(Complex::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Changes the basis of a two-level subsystem. Row `j` of `matrix` is the
    /// bra of new basis state `new_symbols[j]` in the old basis coordinates.
    pub fn rebase(
        &self,
        subsystem: &str,
        matrix: &[[Complex; 2]; 2],
        new_symbols: [&str; 2],
    ) -> Result<Ket, StateError> {
        self.0.rebase(subsystem, matrix, new_symbols).map(Ket)
    }
}

impl Bra {
    pub fn dual(&self) -> Ket {
        Ket(self.0.conj())
    }
}

/// `⟨b|k⟩`.
pub fn inner(b: &Bra, k: &Ket) -> Result<Complex, StateError> {
    b.0.same_space(&k.0)?;
    let (small, large) = if b.0.terms.len() <= k.0.terms.len() {
        (&b.0.terms, &k.0.terms)
    } else {
        (&k.0.terms, &b.0.terms)
    };
    Ok(small
        .iter()
        .filter_map(|(s, a)| large.get(s).map(|c| a * c))
        .sum())
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0");
        }
        for (i, (s, a)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    fn photon() -> SubsystemSpec {
        SubsystemSpec::new("photon", SubsystemKind::PhotonPath, ["s", "u", "v", "c", "d"]).unwrap()
    }

    fn spin(id: &str) -> SubsystemSpec {
        SubsystemSpec::new(id, SubsystemKind::AtomSpin, ["z↑", "z↓"]).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn spec_rejects_duplicates_and_empty() {
        assert!(SubsystemSpec::new("a", SubsystemKind::AtomSpin, ["x", "x"]).is_err());
        assert!(SubsystemSpec::new("a", SubsystemKind::AtomSpin, Vec::<String>::new()).is_err());
    }

    #[test]
    fn tensor_photon_with_atom_superposition() {
        let s = Ket::on(&photon(), &[("s", ONE)]).unwrap();
        let atom = Ket::on(&spin("atom"), &[("z↑", c(H, 0.0)), ("z↓", c(H, 0.0))]).unwrap();
        let k = s.tensor(&atom).unwrap();
        assert_eq!(k.len(), 2);
        let up = k.amplitude_of(&[("photon", "s"), ("atom", "z↑")]).unwrap();
        let down = k.amplitude_of(&[("photon", "s"), ("atom", "z↓")]).unwrap();
        assert!((up - c(H, 0.0)).norm() < TOLERANCE);
        assert!((down - c(H, 0.0)).norm() < TOLERANCE);
    }

    #[test]
    fn tensor_overlap_is_an_error() {
        let a = Ket::on(&spin("atom"), &[("z↑", ONE)]).unwrap();
        assert_eq!(a.tensor(&a), Err(StateError::OverlappingSubsystem("atom".into())));
    }

    #[test]
    fn add_cancels_to_empty() {
        let u = Ket::on(&photon(), &[("u", ONE)]).unwrap();
        let z = u.add(&u.scale(-ONE)).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn add_mismatched_spaces_fails() {
        let u = Ket::on(&photon(), &[("u", ONE)]).unwrap();
        let a = Ket::on(&spin("atom"), &[("z↑", ONE)]).unwrap();
        assert_eq!(u.add(&a), Err(StateError::SpaceMismatch));
        assert_eq!(inner(&a.dual(), &u), Err(StateError::SpaceMismatch));
    }

    #[test]
    fn project_unknown_symbol_fails() {
        let u = Ket::on(&photon(), &[("u", ONE)]).unwrap();
        assert!(matches!(u.project("photon", "q"), Err(StateError::UnknownSymbol { .. })));
        assert!(matches!(u.project("nope", "u"), Err(StateError::UnknownSubsystem(_))));
        let empty = Ket::zero(u.space().clone());
        assert!(empty.project("photon", "u").unwrap().is_empty());
    }

    #[test]
    fn rebase_z_up_into_y() {
        let up = Ket::on(&spin("atom"), &[("z↑", ONE)]).unwrap();
        let y = up.rebase("atom", &y_basis(), ["y↑", "y↓"]).unwrap();
        assert!((y.amplitude_of(&[("atom", "y↑")]).unwrap() - c(H, 0.0)).norm() < TOLERANCE);
        assert!((y.amplitude_of(&[("atom", "y↓")]).unwrap() - c(H, 0.0)).norm() < TOLERANCE);
        let back = y.rebase("atom", &adjoint(&y_basis()), ["z↑", "z↓"]).unwrap();
        assert!(back.approx_eq(&up, TOLERANCE));
    }

    #[test]
    fn y_basis_matches_bloch_equator() {
        let b = bloch_basis(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let y = y_basis();
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[i][j] - y[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn rebase_rejects_non_unitary() {
        let up = Ket::on(&spin("atom"), &[("z↑", ONE)]).unwrap();
        let m = [[ONE, ONE], [ZERO, ONE]];
        assert!(matches!(up.rebase("atom", &m, ["a", "b"]), Err(StateError::NotUnitary(_))));
        let p = Ket::on(&photon(), &[("u", ONE)]).unwrap();
        assert!(matches!(
            p.rebase("photon", &y_basis(), ["a", "b"]),
            Err(StateError::NotTwoLevel(_))
        ));
    }

    #[test]
    fn remove_definite_requires_common_value() {
        let k = Ket::on(&photon(), &[("d", ONE)])
            .unwrap()
            .tensor(&Ket::on(&spin("a"), &[("z↑", ONE), ("z↓", ONE)]).unwrap())
            .unwrap();
        let atoms = k.remove_definite("photon").unwrap();
        assert_eq!(atoms.space().subsystems().len(), 1);
        assert_eq!(k.remove_definite("a"), Err(StateError::NotDefinite("a".into())));
    }

    #[test]
    fn reorder_permutes_labels() {
        let k = Ket::on(&photon(), &[("u", I)])
            .unwrap()
            .tensor(&Ket::on(&spin("a"), &[("z↓", ONE)]).unwrap())
            .unwrap();
        let r = k.reorder(&["a", "photon"]).unwrap();
        assert_eq!(r.amplitude_of(&[("photon", "u"), ("a", "z↓")]).unwrap(), I);
        assert_eq!(r.space().subsystems()[0].id(), "a");
    }
}
