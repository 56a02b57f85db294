//! Spin correlations between the two atoms of a photon-post-selected pair.

use crate::amplitude::{bloch_basis, Ket, SubsystemSpec, ONE};
use crate::network::{ElementKind, Network};

use super::resolve::counts_in_range;
use super::{
    detected_at, enumerate_transactions, post_select, AtomBasis, EngineError, MeasurementContext, OutcomeDistribution,
    PhotonOutcome,
};

/// Bloch directions `(θ, φ)` in radians for the four CHSH settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub a: (f64, f64),
    pub a2: (f64, f64),
    pub b: (f64, f64),
    pub b2: (f64, f64),
}

impl ChshSettings {
    /// Directions in the x-z plane, angles in degrees from +z.
    pub fn xz_degrees(a: f64, a2: f64, b: f64, b2: f64) -> Self {
        let r = |d: f64| (d.to_radians(), 0.0);
        ChshSettings { a: r(a), a2: r(a2), b: r(b), b2: r(b2) }
    }

    /// The four context pairs, in the order the S combination uses them.
    pub fn pairs(&self) -> [((f64, f64), (f64, f64)); 4] {
        [(self.a, self.b), (self.a, self.b2), (self.a2, self.b), (self.a2, self.b2)]
    }
}

const SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// S = E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′).
fn combine(e: &[f64; 4]) -> f64 {
    e.iter().zip(SIGNS).map(|(x, s)| x * s).sum()
}

fn bloch(angles: (f64, f64)) -> AtomBasis {
    AtomBasis::Bloch { theta: angles.0, phi: angles.1 }
}

fn two_level_atoms(n: &Network) -> Result<[String; 2], EngineError> {
    let atoms: Vec<String> = n
        .atoms()
        .into_iter()
        .filter(|a| n.space().get(&a.spin).is_some_and(|s| s.basis().len() == 2))
        .map(|a| a.spin)
        .collect();
    match <[String; 2]>::try_from(atoms) {
        Ok(pair) => Ok(pair),
        Err(v) => Err(EngineError::Contract(format!("need exactly two two-level atoms, found {}", v.len()))),
    }
}

/// Spin correlation ⟨σ_a ⊗ σ_b⟩ of a (possibly unnormalized) state.
pub fn correlation(atoms: &Ket, first: &str, a: AtomBasis, second: &str, b: AtomBasis) -> Result<f64, EngineError> {
    let mut k = atoms.clone();
    let mut up = Vec::new();
    for (id, basis) in [(first, a), (second, b)] {
        match basis.change() {
            Some((m, names)) => {
                k = k.rebase(id, &m, names)?;
                up.push(names[0].to_string());
            }
            None => {
                let spec = k.space().get(id).ok_or_else(|| EngineError::Contract(format!("no atom `{id}`")))?;
                up.push(spec.basis()[0].clone());
            }
        }
    }
    let norm = k.norm_sq();
    if norm <= 0.0 {
        return Err(EngineError::EmptyDistribution);
    }
    let mut e = 0.0;
    for (s, amp) in k.iter() {
        let sa = if s.symbol(first) == Some(up[0].as_str()) { 1.0 } else { -1.0 };
        let sb = if s.symbol(second) == Some(up[1].as_str()) { 1.0 } else { -1.0 };
        e += sa * sb * amp.norm_sqr();
    }
    Ok(e / norm)
}

pub fn chsh_for_state(atoms: &Ket, first: &str, second: &str, s: &ChshSettings) -> Result<f64, EngineError> {
    let mut e = [0.0; 4];
    for (slot, (x, y)) in e.iter_mut().zip(s.pairs()) {
        *slot = correlation(atoms, first, bloch(x), second, bloch(y))?;
    }
    Ok(combine(&e))
}

fn context_for(n: &Network, atoms: &[String; 2], x: (f64, f64), y: (f64, f64)) -> MeasurementContext {
    MeasurementContext::uniform(n, AtomBasis::Z)
        .with_basis(&atoms[0], bloch(x))
        .with_basis(&atoms[1], bloch(y))
}

/// Spin-product average read off an outcome distribution, counting `↑`
/// outcomes as +1.
pub fn spin_correlation(d: &OutcomeDistribution) -> f64 {
    d.candidates
        .iter()
        .map(|c| {
            let sign: f64 = c.outcome.atoms.iter().map(|(_, s)| if s.ends_with('↑') { 1.0 } else { -1.0 }).product();
            sign * c.weight
        })
        .sum::<f64>()
        / d.total_weight()
}

/// CHSH value of the pair conditioned on the photon reaching `detector`,
/// from the exact conditional distributions of the four contexts.
pub fn chsh(n: &Network, detector: &str, s: &ChshSettings) -> Result<f64, EngineError> {
    let atoms = two_level_atoms(n)?;
    let mut e = [0.0; 4];
    for (slot, (x, y)) in e.iter_mut().zip(s.pairs()) {
        let d = enumerate_transactions(n, &context_for(n, &atoms, x, y))?;
        *slot = spin_correlation(&post_select(&d, detected_at(detector))?.distribution);
    }
    Ok(combine(&e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshOptimum {
    pub s: f64,
    /// Settings in degrees from +z in the x-z plane.
    pub degrees: [f64; 4],
}

/// Maximizes |S| over x-z plane settings on a grid of `steps` angles per
/// full turn.
pub fn chsh_grid_search(atoms: &Ket, first: &str, second: &str, steps: usize) -> Result<ChshOptimum, EngineError> {
    let angle = |i: usize| 360.0 * i as f64 / steps as f64;
    let mut table = vec![0.0; steps * steps];
    for i in 0..steps {
        let ka = atoms.rebase(first, &bloch_basis(angle(i).to_radians(), 0.0), ["n↑", "n↓"])?;
        for j in 0..steps {
            let b = AtomBasis::Bloch { theta: angle(j).to_radians(), phi: 0.0 };
            table[i * steps + j] = correlation_prebased(&ka, first, second, b)?;
        }
    }
    let e = |i: usize, j: usize| table[i * steps + j];
    let mut best = ChshOptimum { s: 0.0, degrees: [0.0; 4] };
    for i in 0..steps {
        for i2 in 0..steps {
            for sign in [1.0, -1.0] {
                let (mut bx, mut jb) = (f64::NEG_INFINITY, 0);
                let (mut by, mut jb2) = (f64::NEG_INFINITY, 0);
                for j in 0..steps {
                    let x = sign * (e(i, j) + e(i2, j));
                    if x > bx {
                        bx = x;
                        jb = j;
                    }
                    let y = sign * (e(i, j) - e(i2, j));
                    if y > by {
                        by = y;
                        jb2 = j;
                    }
                }
                // x pairs a and a′ with b; y pairs them with b′.
                let s = bx + by;
                if s > best.s.abs() {
                    best = ChshOptimum { s: sign * s, degrees: [angle(i), angle(i2), angle(jb), angle(jb2)] };
                }
            }
        }
    }
    Ok(best)
}

/// `correlation` where the first atom has already been rebased to n↑/n↓.
fn correlation_prebased(k: &Ket, first: &str, second: &str, b: AtomBasis) -> Result<f64, EngineError> {
    let mut total = 0.0;
    let mut norm = 0.0;
    let (m, names) = b.change().expect("bloch basis");
    let k = k.rebase(second, &m, names)?;
    for (s, amp) in k.iter() {
        let sa = if s.symbol(first) == Some("n↑") { 1.0 } else { -1.0 };
        let sb = if s.symbol(second) == Some(names[0]) { 1.0 } else { -1.0 };
        total += sa * sb * amp.norm_sqr();
        norm += amp.norm_sqr();
    }
    Ok(total / norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshEstimate {
    pub s: f64,
    pub std_error: f64,
    pub correlations: [f64; 4],
    /// Post-selected pairs per context.
    pub pairs: [u64; 4],
    pub trials: u64,
}

/// Monte Carlo CHSH estimate: trial `t` measures context `t mod 4`, and only
/// trials whose photon reaches `detector` count. Trials run in fixed rounds
/// until at least `min_pairs` pairs are kept, so the estimate is a function
/// of `seed` alone.
pub fn chsh_monte_carlo(
    n: &Network,
    detector: &str,
    s: &ChshSettings,
    min_pairs: u64,
    seed: u64,
    workers: usize,
) -> Result<ChshEstimate, EngineError> {
    const ROUND: u64 = 1 << 20;
    let atoms = two_level_atoms(n)?;
    let mut samplers = Vec::new();
    let mut slot = Vec::new();
    for (k, (x, y)) in s.pairs().into_iter().enumerate() {
        let d = enumerate_transactions(n, &context_for(n, &atoms, x, y))?;
        samplers.push(d.sampler()?);
        // Counter index 2k for a +1 product and 2k+1 for −1.
        slot.push(
            d.candidates
                .iter()
                .map(|c| match &c.outcome.photon {
                    PhotonOutcome::Detected(id) if id == detector => {
                        let plus = c.outcome.atoms.iter().filter(|(_, v)| v.ends_with('↓')).count() % 2 == 0;
                        Some(2 * k + usize::from(!plus))
                    }
                    _ => None,
                })
                .collect::<Vec<_>>(),
        );
    }
    let mut counts = [0u64; 8];
    let mut trials = 0;
    while counts.iter().sum::<u64>() < min_pairs {
        let round = counts_in_range(trials..trials + ROUND, seed, workers, 8, |rng, t| {
            let k = (t % 4) as usize;
            slot[k][samplers[k].pick(rng)]
        });
        for (c, r) in counts.iter_mut().zip(round) {
            *c += r;
        }
        trials += ROUND;
        if trials >= ROUND * 4096 && counts.iter().sum::<u64>() == 0 {
            return Err(EngineError::ImpossibleSelection);
        }
    }
    let mut correlations = [0.0; 4];
    let mut pairs = [0; 4];
    let mut var = 0.0;
    for k in 0..4 {
        let (p, m) = (counts[2 * k], counts[2 * k + 1]);
        pairs[k] = p + m;
        if pairs[k] == 0 {
            return Err(EngineError::ImpossibleSelection);
        }
        let e = (p as f64 - m as f64) / pairs[k] as f64;
        correlations[k] = e;
        var += (1.0 - e * e) / pairs[k] as f64;
    }
    Ok(ChshEstimate { s: combine(&correlations), std_error: var.sqrt(), correlations, pairs, trials })
}

/// One local hidden-variable assignment: which atoms sit in their box and
/// which arm the photon takes.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentCheck {
    pub occupied: [bool; 2],
    pub path: String,
    /// z outcome the assignment fixes, `None` when the photon would hit an
    /// occupied box and never reach the detector.
    pub z_outcome: Option<[String; 2]>,
    /// The fixed z outcome occurs in the z-context table.
    pub reproduces_z: bool,
    /// Predicted y-context table, in `y_table` order.
    pub y_prediction: Vec<([String; 2], f64)>,
    pub reproduces_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualityReport {
    pub atoms: [String; 2],
    pub z_table: Vec<([String; 2], f64)>,
    pub y_table: Vec<([String; 2], f64)>,
    pub assignments: Vec<AssignmentCheck>,
}

impl ContextualityReport {
    pub fn consistent_assignments(&self) -> Vec<&AssignmentCheck> {
        self.assignments.iter().filter(|a| a.reproduces_z && a.reproduces_y).collect()
    }
}

fn table(d: &OutcomeDistribution) -> Vec<([String; 2], f64)> {
    d.candidates
        .iter()
        .map(|c| ([c.outcome.atoms[0].1.clone(), c.outcome.atoms[1].1.clone()], c.weight))
        .collect()
}

fn complete_table(t: &[([String; 2], f64)], names: [&str; 2]) -> Vec<([String; 2], f64)> {
    let mut out = Vec::new();
    for x in names {
        for y in names {
            let key = [x.to_string(), y.to_string()];
            let w = t.iter().filter(|(k, _)| *k == key).map(|(_, w)| w).sum();
            out.push((key, w));
        }
    }
    out
}

/// Tests the eight definite (occupancy, occupancy, arm) assignments against
/// the z- and y-context tables of photons detected at `detector`.
pub fn contextuality(n: &Network, detector: &str) -> Result<ContextualityReport, EngineError> {
    let atoms = two_level_atoms(n)?;
    let mut boxes = Vec::new();
    for id in &atoms {
        let b = n
            .elements()
            .iter()
            .find_map(|e| match &e.kind {
                ElementKind::AtomBox { atom, blocking, path, .. } if atom == id => Some((blocking.clone(), path.clone())),
                _ => None,
            })
            .ok_or_else(|| EngineError::Contract(format!("atom `{id}` has no box")))?;
        boxes.push(b);
    }
    let specs: Vec<SubsystemSpec> = atoms.iter().map(|a| n.space().get(a).expect("atom").clone()).collect();
    let z_names = [specs[0].basis()[0].as_str(), specs[0].basis()[1].as_str()];

    let z = post_select(&enumerate_transactions(n, &MeasurementContext::uniform(n, AtomBasis::Z))?, detected_at(detector))?;
    let y = post_select(&enumerate_transactions(n, &MeasurementContext::uniform(n, AtomBasis::Y))?, detected_at(detector))?;
    let z_table = complete_table(&table(&z.distribution), z_names);
    let y_table = complete_table(&table(&y.distribution), ["y↑", "y↓"]);

    let mut assignments = Vec::new();
    for occ0 in [true, false] {
        for occ1 in [true, false] {
            for path in [&boxes[0].1, &boxes[1].1] {
                let occupied = [occ0, occ1];
                let spins: Vec<String> = (0..2)
                    .map(|k| {
                        let blocking = &boxes[k].0;
                        if occupied[k] {
                            blocking.clone()
                        } else {
                            specs[k].basis().iter().find(|s| *s != blocking).expect("two-level").clone()
                        }
                    })
                    .collect();
                let blocked = (0..2).any(|k| occupied[k] && boxes[k].1 == *path);
                let z_outcome = (!blocked).then(|| [spins[0].clone(), spins[1].clone()]);
                let reproduces_z =
                    z_outcome.as_ref().is_some_and(|o| z_table.iter().any(|(k, w)| k == o && *w > 1e-12));

                let product = Ket::on(&specs[0], &[(spins[0].as_str(), ONE)])?
                    .tensor(&Ket::on(&specs[1], &[(spins[1].as_str(), ONE)])?)?;
                let mut predicted = product;
                for a in &atoms {
                    predicted = predicted.rebase(a, &crate::amplitude::y_basis(), ["y↑", "y↓"])?;
                }
                let y_prediction: Vec<([String; 2], f64)> = y_table
                    .iter()
                    .map(|(k, _)| {
                        let w = predicted
                            .amplitude_of(&[(&atoms[0], &k[0]), (&atoms[1], &k[1])])
                            .map(|a| a.norm_sqr())
                            .unwrap_or(0.0);
                        (k.clone(), w)
                    })
                    .collect();
                let reproduces_y =
                    y_prediction.iter().zip(&y_table).all(|((_, p), (_, q))| (p - q).abs() <= 1e-9);
                assignments.push(AssignmentCheck {
                    occupied,
                    path: path.clone(),
                    z_outcome,
                    reproduces_z,
                    y_prediction,
                    reproduces_y,
                });
            }
        }
    }
    Ok(ContextualityReport { atoms, z_table, y_table, assignments })
}
