//! Reference apparatus: the bomb tester, the single-atom interaction-free
//! measurement and the two-atom liar experiment.
//!
//! Every network uses the photon path basis `s, u, v, c, d`: source `L`
//! emits on `s`, beam splitter `S1` sends `s` to `v` (transmitted) and `u`
//! (reflected), `S2` recombines `v, u` onto `d, c`, and detectors `D`, `C`
//! close the dark and bright ports.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::amplitude::{Complex, Ket, SubsystemKind, SubsystemSpec, I, ONE};
use crate::network::{Element, Network, NetworkError};

pub const PHOTON: &str = "photon";
pub const UP: &str = "z↑";
pub const DOWN: &str = "z↓";
pub const GROUND: &str = "0";
pub const EXCITED: &str = "1";

pub fn photon_spec() -> SubsystemSpec {
    SubsystemSpec::new(PHOTON, SubsystemKind::PhotonPath, ["s", "u", "v", "c", "d"]).expect("static spec")
}

pub fn spin_spec(id: &str) -> SubsystemSpec {
    SubsystemSpec::new(id, SubsystemKind::AtomSpin, [UP, DOWN]).expect("static spec")
}

pub fn level_spec(id: &str) -> SubsystemSpec {
    SubsystemSpec::new(id, SubsystemKind::AtomLevel, [GROUND, EXCITED]).expect("static spec")
}

fn interferometer(rank_s2: u32) -> Vec<Element> {
    let source = Ket::on(&photon_spec(), &[("s", ONE)]).expect("static state");
    vec![
        Element::emitter("L", 0, source),
        Element::beam_splitter("S1", 1, [Some("s"), None], ["v", "u"]),
        Element::beam_splitter("S2", rank_s2, [Some("v"), Some("u")], ["d", "c"]),
        Element::detector("D", rank_s2 + 1, "d"),
        Element::detector("C", rank_s2 + 1, "c"),
    ]
}

/// Balanced interferometer with nothing in either arm.
pub fn open_interferometer() -> Network {
    Network::new(vec![photon_spec()], interferometer(2))
        .expect("static network")
        .with_aliases([("A", "u"), ("B", "v")])
}

/// Bomb tester; when `present`, a classical obstruction sits in arm `v`.
pub fn bomb_tester(present: bool) -> Network {
    if !present {
        return open_interferometer();
    }
    let bomb = SubsystemSpec::new("bomb", SubsystemKind::AtomSpin, ["armed"]).expect("static spec");
    let bomb_level = SubsystemSpec::new("bomb-level", SubsystemKind::AtomLevel, ["intact", "exploded"])
        .expect("static spec");
    let mut elements = interferometer(3);
    elements.push(Element::emitter("bomb-src", 0, Ket::on(&bomb, &[("armed", ONE)]).expect("static state")));
    elements.push(Element::atom_box("bomb", 2, "bomb", "armed", "v", "bomb-level", "exploded"));
    Network::new(vec![photon_spec(), bomb, bomb_level], elements)
        .expect("static network")
        .with_aliases([("A", "u"), ("B", "v")])
}

/// Single atom prepared in `(|z↑⟩ + |z↓⟩)/√2`, its `z↑` box intersecting arm `v`.
pub fn hardy() -> Network {
    let h = Complex::new(FRAC_1_SQRT_2, 0.0);
    let atom = spin_spec("atom");
    let mut elements = interferometer(3);
    elements.push(Element::emitter("atom-src", 0, Ket::on(&atom, &[(UP, h), (DOWN, h)]).expect("static state")));
    elements.push(Element::atom_box("box", 2, "atom", UP, "v", "atom-level", EXCITED));
    Network::new(vec![photon_spec(), atom, level_spec("atom-level")], elements)
        .expect("static network")
        .with_aliases([("A", "u"), ("B", "v")])
}

/// Two atoms prepared in `(i|z↑⟩ + |z↓⟩)/√2`: atom 1's `z↑` box intersects
/// arm `v`, atom 2's `z↓` box intersects arm `u`.
pub fn liar() -> Network {
    let h = Complex::new(FRAC_1_SQRT_2, 0.0);
    let prepared = [(UP, I * h), (DOWN, h)];
    let a1 = spin_spec("atom1");
    let a2 = spin_spec("atom2");
    let mut elements = interferometer(3);
    elements.push(Element::emitter("atom1-src", 0, Ket::on(&a1, &prepared).expect("static state")));
    elements.push(Element::emitter("atom2-src", 0, Ket::on(&a2, &prepared).expect("static state")));
    elements.push(Element::atom_box("box1", 2, "atom1", UP, "v", "level1", EXCITED));
    elements.push(Element::atom_box("box2", 2, "atom2", DOWN, "u", "level2", EXCITED));
    Network::new(
        vec![photon_spec(), a1, a2, level_spec("level1"), level_spec("level2")],
        elements,
    )
    .expect("static network")
    .with_aliases([("A", "u"), ("B", "v")])
}

/// The liar experiment with the source and first beam splitter replaced by
/// two coherent sources feeding the arms.
pub fn liar_two_laser() -> Result<Network, NetworkError> {
    crate::network::two_laser_variant(&liar())
}
