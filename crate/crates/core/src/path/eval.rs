//! Evaluation of path kets against a network: arm labels must agree with
//! where the beam splitters actually send the photon, atom labels select the
//! atom-sector coefficient, and boxes on the route absorb blocking spins.

use crate::amplitude::{Complex, SubsystemSpec, ZERO};
use crate::network::{ElementKind, Network};

use super::{check_shape, PathError, PathExpression, PathKet, Resolved, Segment, Spin, R, T};

fn two_atoms(n: &Network) -> Result<[SubsystemSpec; 2], PathError> {
    let specs: Vec<SubsystemSpec> = n
        .atoms()
        .into_iter()
        .filter_map(|a| n.space().get(&a.spin).cloned())
        .filter(|s| s.basis().len() == 2)
        .collect();
    <[SubsystemSpec; 2]>::try_from(specs)
        .map_err(|_| PathError::Invalid("an atom label needs a network with two two-level atoms".into()))
}

struct Walk<'a> {
    n: &'a Network,
    photon: String,
    /// Tagged spin symbol per atom id.
    spins: Vec<(String, String)>,
}

impl Walk<'_> {
    /// False when a box on `symbol` absorbs the tagged spin.
    fn passes(&self, symbol: &str) -> bool {
        self.n.elements().iter().all(|e| match &e.kind {
            ElementKind::AtomBox { atom, blocking, path, .. } if path == symbol => {
                !self.spins.iter().any(|(a, s)| a == atom && s == blocking)
            }
            _ => true,
        })
    }

    fn start(&self, p: &PathKet) -> Result<(String, Complex), PathError> {
        let emitter = self.n.element(&p.segments[0].label).expect("shape checked");
        let ElementKind::Emitter { emitted, .. } = &emitter.kind else { unreachable!("shape checked") };
        let symbols: Vec<&str> = emitted.iter().filter_map(|(s, _)| s.symbol(&self.photon)).collect();
        let [start] = symbols.as_slice() else {
            return Err(PathError::Invalid(format!("`{}` does not emit the photon on a single path", emitter.id)));
        };
        let coeff = if self.spins.is_empty() {
            emitted.iter().map(|(_, a)| *a).sum()
        } else {
            let ket = self.n.initial_ket().map_err(|e| PathError::Invalid(e.to_string()))?;
            let mut assignment: Vec<(&str, &str)> = vec![(self.photon.as_str(), start)];
            for (a, s) in &self.spins {
                assignment.push((a, s));
            }
            let levels: Vec<(String, String)> = self
                .n
                .space()
                .subsystems()
                .iter()
                .filter(|s| s.kind() == crate::SubsystemKind::AtomLevel)
                .map(|s| (s.id().to_string(), s.basis()[0].clone()))
                .collect();
            for (l, g) in &levels {
                assignment.push((l, g));
            }
            ket.amplitude_of(&assignment).map_err(|e| PathError::Invalid(e.to_string()))?
        };
        Ok((start.to_string(), coeff))
    }

    fn term(&self, p: &PathKet) -> Result<Complex, PathError> {
        let resolved = check_shape(self.n, p)?;
        if resolved.len() < 2 {
            return Err(PathError::Invalid("evaluation needs a route that ends at a detector".into()));
        }
        let (mut cur, coeff) = self.start(p)?;
        let mut a = coeff * p.prefactor();
        let mut blocked = !self.passes(&cur);
        let last = resolved.len() - 1;
        for (k, (seg, r)) in p.segments.iter().zip(&resolved).enumerate().skip(1) {
            let el = match r {
                Resolved::Arm(sym) => {
                    if *sym != cur {
                        return Err(PathError::Geometry(format!(
                            "`{}` is path `{sym}` but the photon is on `{cur}`",
                            seg.label
                        )));
                    }
                    continue;
                }
                Resolved::Element(el) => el,
            };
            let mismatch = || PathError::Geometry(format!("`{}` does not take the photon from `{cur}`", el.id));
            match &el.kind {
                ElementKind::BeamSplitter { inputs, outputs } => {
                    let port = inputs.iter().position(|i| i.as_deref() == Some(cur.as_str())).ok_or_else(mismatch)?;
                    let (out, factor) = if seg.reflected { (&outputs[1 - port], R) } else { (&outputs[port], T) };
                    a *= factor;
                    cur = out.clone();
                    blocked |= !self.passes(&cur);
                }
                ElementKind::Mirror { input, output, phase } => {
                    if *input != cur {
                        return Err(mismatch());
                    }
                    a *= phase;
                    cur = output.clone();
                    blocked |= !self.passes(&cur);
                }
                ElementKind::AtomBox { path, .. } => {
                    if *path != cur {
                        return Err(mismatch());
                    }
                }
                ElementKind::Detector { path } => {
                    if *path != cur || k != last {
                        return Err(mismatch());
                    }
                }
                ElementKind::Emitter { .. } => {
                    return Err(PathError::Invalid(format!("emitter `{}` inside a route", el.id)));
                }
            }
        }
        Ok(if blocked { ZERO } else { a })
    }
}

fn walk<'a>(n: &'a Network, atoms: Option<[Spin; 2]>) -> Result<Walk<'a>, PathError> {
    let photon = n
        .photon()
        .map(|p| p.id().to_string())
        .ok_or_else(|| PathError::Invalid("network has no single photon subsystem".into()))?;
    let spins = match atoms {
        None => Vec::new(),
        Some(tag) => {
            let specs = two_atoms(n)?;
            specs
                .iter()
                .zip(tag)
                .map(|(s, spin)| {
                    let sym = match spin {
                        Spin::Up => &s.basis()[0],
                        Spin::Down => &s.basis()[1],
                    };
                    (s.id().to_string(), sym.clone())
                })
                .collect()
        }
    };
    Ok(Walk { n, photon, spins })
}

/// Amplitude of the expression inside network `n`: the source amplitude
/// of each term's atom label, times the path factors, with terms whose
/// route crosses a box holding the labelled spin set to zero.
pub fn evaluate(e: &PathExpression, n: &Network) -> Result<Complex, PathError> {
    e.terms.iter().try_fold(ZERO, |acc, t| Ok(acc + walk(n, t.atoms)?.term(t)?))
}

/// Every single-photon route from a photon emitter to `detector`, with arm
/// aliases inserted where the photon passes an aliased symbol.
pub fn routes(n: &Network, detector: &str) -> Result<Vec<PathKet>, PathError> {
    let photon = n
        .photon()
        .map(|p| p.id().to_string())
        .ok_or_else(|| PathError::Invalid("network has no single photon subsystem".into()))?;
    let alias_of = |sym: &str| n.aliases().iter().find(|(_, v)| *v == sym).map(|(k, _)| k.clone());
    let mut out = Vec::new();
    let mut stack: Vec<(String, Vec<Segment>)> = Vec::new();
    for el in n.ordered() {
        if let ElementKind::Emitter { emitted, .. } = &el.kind {
            let syms: Vec<&str> = emitted.iter().filter_map(|(s, _)| s.symbol(&photon)).collect();
            if let [sym] = syms.as_slice() {
                stack.push((sym.to_string(), vec![Segment::new(&el.id, false)]));
            }
        }
    }
    while let Some((cur, mut segs)) = stack.pop() {
        if let Some(a) = alias_of(&cur) {
            segs.push(Segment::new(&a, false));
        }
        for el in n.ordered() {
            match &el.kind {
                ElementKind::BeamSplitter { inputs, outputs } => {
                    if let Some(port) = inputs.iter().position(|i| i.as_deref() == Some(cur.as_str())) {
                        for (reflected, out_sym) in [(true, &outputs[1 - port]), (false, &outputs[port])] {
                            let mut next = segs.clone();
                            next.push(Segment::new(&el.id, reflected));
                            stack.push((out_sym.clone(), next));
                        }
                    }
                }
                ElementKind::Mirror { input, output, .. } if *input == cur => {
                    let mut next = segs.clone();
                    next.push(Segment::new(&el.id, false));
                    stack.push((output.clone(), next));
                }
                ElementKind::Detector { path } if *path == cur && el.id == detector => {
                    let mut done = segs.clone();
                    done.push(Segment::new(&el.id, false));
                    out.push(PathKet::new(done));
                }
                _ => {}
            }
        }
    }
    out.sort_by_key(|p| p.to_string());
    Ok(out)
}

/// A route and atom label whose amplitude survives once every route with
/// the same atom label is summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Survivor {
    pub ket: PathKet,
    pub amplitude: Complex,
}

/// Routes to `detector` paired with each two-atom label, keeping only the
/// labels whose summed amplitude does not cancel.
pub fn survivors(n: &Network, detector: &str) -> Result<Vec<Survivor>, PathError> {
    let all = routes(n, detector)?;
    let mut out = Vec::new();
    for tag in [[Spin::Up, Spin::Up], [Spin::Up, Spin::Down], [Spin::Down, Spin::Up], [Spin::Down, Spin::Down]] {
        let w = walk(n, Some(tag))?;
        let mut group = Vec::new();
        for r in &all {
            let ket = r.clone().with_atoms(tag);
            let amplitude = w.term(&ket)?;
            group.push(Survivor { ket, amplitude });
        }
        let total: Complex = group.iter().map(|s| s.amplitude).sum();
        if !super::cancels(total) {
            out.extend(group.into_iter().filter(|s| !super::cancels(s.amplitude)));
        }
    }
    Ok(out)
}
