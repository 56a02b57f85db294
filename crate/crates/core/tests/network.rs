use std::f64::consts::{FRAC_1_SQRT_2 as H, SQRT_2};

use proptest::prelude::*;
use tisim_core::amplitude::{inner, Bra, Complex, Ket, SubsystemKind, SubsystemSpec, ONE, TOLERANCE};
use tisim_core::builtin;
use tisim_core::network::{
    backward_propagate, forward_propagate, from_json, to_json, two_laser_variant, Confirmation, Element,
    Network, Rule,
};

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn close(a: Complex, b: Complex) -> bool {
    (a - b).norm() < TOLERANCE
}

#[test]
fn builtin_networks_validate() {
    for n in [builtin::hardy(), builtin::liar(), builtin::bomb_tester(true), builtin::open_interferometer()] {
        assert!(n.validate().is_empty(), "{:?}", n.validate());
    }
    let two = builtin::liar_two_laser().unwrap();
    assert!(two.validate().is_empty(), "{:?}", two.validate());
}

#[test]
fn hardy_detector_region_and_absorption() {
    let n = builtin::hardy();
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let k = &trace.continuing;
    let amp = |p: &str, z: &str| k.amplitude_of(&[("photon", p), ("atom", z), ("atom-level", "0")]).unwrap();
    assert!(close(amp("d", "z↑"), c(-1.0 / (2.0 * SQRT_2), 0.0)));
    assert!(close(amp("c", "z↑"), c(0.0, 1.0 / (2.0 * SQRT_2))));
    assert!(close(amp("c", "z↓"), c(0.0, H)));
    assert!(close(amp("d", "z↓"), c(0.0, 0.0)));
    assert_eq!(k.len(), 3);
    assert!((k.norm_sq() - 0.75).abs() < TOLERANCE);
    assert_eq!(trace.absorbed.len(), 1);
    let abs = &trace.absorbed[0];
    assert_eq!(abs.box_id, "box");
    let a = abs.ket.amplitude_of(&[("photon", "v"), ("atom", "z↑"), ("atom-level", "1")]).unwrap();
    assert!(close(a, c(0.5, 0.0)));
    assert_eq!(abs.ket.len(), 1);
}

#[test]
fn hardy_after_first_splitter() {
    let n = builtin::hardy();
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let k = trace.snapshot(1).unwrap();
    let amp = |p: &str, z: &str| k.amplitude_of(&[("photon", p), ("atom", z), ("atom-level", "0")]).unwrap();
    for z in ["z↑", "z↓"] {
        assert!(close(amp("u", z), c(0.0, 0.5)));
        assert!(close(amp("v", z), c(0.5, 0.0)));
    }
}

fn qle_amp(k: &Ket, p: &str, a1: &str, a2: &str) -> Complex {
    k.amplitude_of(&[("photon", p), ("atom1", a1), ("atom2", a2), ("level1", "0"), ("level2", "0")]).unwrap()
}

#[test]
fn liar_detector_region() {
    let n = builtin::liar();
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let k = &trace.continuing;
    let (up, dn) = ("z↑", "z↓");
    assert!(close(qle_amp(k, "d", up, up), c(0.25, 0.0)));
    assert!(close(qle_amp(k, "d", dn, dn), c(0.25, 0.0)));
    assert!(close(qle_amp(k, "c", dn, dn), c(0.0, 0.25)));
    assert!(close(qle_amp(k, "c", up, up), c(0.0, -0.25)));
    assert!(close(qle_amp(k, "c", dn, up), c(-0.5, 0.0)));
    assert_eq!(k.len(), 5);
    assert!((k.norm_sq() - 0.5).abs() < TOLERANCE);

    // before S2: (1/2√2)[-i u++ - u-+ + i v-+ + v--]
    let before = trace.snapshot(2).unwrap();
    let f = 1.0 / (2.0 * SQRT_2);
    assert!(close(qle_amp(before, "u", up, up), c(0.0, -f)));
    assert!(close(qle_amp(before, "u", dn, up), c(-f, 0.0)));
    assert!(close(qle_amp(before, "v", dn, up), c(0.0, f)));
    assert!(close(qle_amp(before, "v", dn, dn), c(f, 0.0)));
    assert_eq!(before.len(), 4);
}

#[test]
fn liar_absorbed_mass_is_split_evenly() {
    let n = builtin::liar();
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let mut weights = Vec::new();
    for a in &trace.absorbed {
        for (s, amp) in a.ket.iter() {
            weights.push((s.symbol("photon").unwrap().to_string(), s.symbol("atom1").unwrap().to_string(),
                s.symbol("atom2").unwrap().to_string(), amp.norm_sqr()));
        }
    }
    assert_eq!(weights.len(), 4);
    for (_, _, _, w) in &weights {
        assert!((w - 0.125).abs() < TOLERANCE);
    }
    let mut combos: Vec<String> = weights.iter().map(|(p, a, b, _)| format!("{p}{a}{b}")).collect();
    combos.sort();
    let mut expected = vec!["vz↑z↑", "vz↑z↓", "uz↑z↓", "uz↓z↓"];
    expected.sort();
    assert_eq!(combos, expected);
    assert!((trace.absorbed_norm_sq() - 0.5).abs() < TOLERANCE);
}

#[test]
fn dark_port_without_obstruction() {
    let n = builtin::open_interferometer();
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let d = trace.continuing.amplitude_of(&[("photon", "d")]).unwrap();
    let cc = trace.continuing.amplitude_of(&[("photon", "c")]).unwrap();
    assert!(d.norm_sqr() < TOLERANCE);
    assert!((cc.norm_sqr() - 1.0).abs() < TOLERANCE);
}

#[test]
fn hardy_confirmation_echo_factors() {
    let n = builtin::hardy();
    let photon = builtin::photon_spec();
    let atom = builtin::spin_spec("atom");
    // Confirmation is the dual of the photon component -1/2|d⟩ and the atom component (1/√2)|z↑⟩.
    let cw = Confirmation { anchor: "D".into(), photon: Bra::on(&photon, &[("d", c(-0.5, 0.0))]).unwrap() };
    let atom_cw = Bra::on(&atom, &[("z↑", c(H, 0.0))]).unwrap();
    let echo = backward_propagate(&n, &cw, &[atom_cw]).unwrap();
    let list = echo.emitters.clone().unwrap();
    let get = |id: &str| list.iter().find(|(e, _)| e == id).unwrap().1;
    assert!(close(get("L"), c(0.25, 0.0)));
    assert!(close(get("atom-src"), c(0.5, 0.0)));
    assert!(close(get("L") * get("atom-src"), c(0.125, 0.0)));
    assert!(close(echo.factor_product(&n).unwrap(), echo.joint));
}

#[test]
fn echo_matches_born_weight_for_every_outcome() {
    for n in [builtin::hardy(), builtin::liar(), builtin::bomb_tester(true), builtin::liar_two_laser().unwrap()] {
        let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
        let photon = n.photon().unwrap().clone();
        let atoms = n.atoms();
        // amp is ⟨o|Ψ⟩ read off the forward state; the echo never sees it.
        let check = |state: &tisim_core::BasisState, amp: Complex, anchor: String| {
            let p = state.symbol("photon").unwrap();
            let cw = Confirmation { anchor, photon: Bra::on(&photon, &[(p, ONE)]).unwrap() };
            let bras: Vec<Bra> = atoms
                .iter()
                .map(|a| {
                    let spec = n.space().get(&a.spin).unwrap();
                    Bra::on(spec, &[(state.symbol(&a.spin).unwrap(), ONE)]).unwrap()
                })
                .collect();
            let echo = backward_propagate(&n, &cw, &bras).unwrap();
            assert!((echo.joint.norm_sqr() - amp.norm_sqr()).abs() < TOLERANCE, "{state}");
            assert!(close(echo.joint, amp), "{state}: {} vs {}", echo.joint, amp);
            if let Some(product) = echo.factor_product(&n) {
                assert!(close(product, echo.joint));
            }
        };
        for (s, _) in trace.continuing.iter() {
            let o = Ket::from_terms(n.space().clone(), [(s.clone(), ONE)]).unwrap();
            let a = inner(&o.dual(), &trace.continuing).unwrap();
            let det = n.detector_for(s.symbol("photon").unwrap()).unwrap().to_string();
            check(s, a, det);
        }
        for ab in &trace.absorbed {
            for (s, a) in ab.ket.iter() {
                check(s, *a, ab.box_id.clone());
            }
        }
    }
}

#[test]
fn zero_amplitude_outcome_echoes_zero() {
    let n = builtin::open_interferometer();
    let cw = Confirmation { anchor: "D".into(), photon: Bra::on(&builtin::photon_spec(), &[("d", ONE)]).unwrap() };
    let echo = backward_propagate(&n, &cw, &[]).unwrap();
    assert!(echo.joint.norm() < TOLERANCE);
    let list = echo.emitters.unwrap();
    assert!(list[0].1.norm() < TOLERANCE);
}

#[test]
fn confirmation_must_sit_on_terminal_symbol() {
    let n = builtin::open_interferometer();
    let cw = Confirmation { anchor: "D".into(), photon: Bra::on(&builtin::photon_spec(), &[("u", ONE)]).unwrap() };
    assert!(backward_propagate(&n, &cw, &[]).is_err());
    let cw = Confirmation { anchor: "S1".into(), photon: Bra::on(&builtin::photon_spec(), &[("u", ONE)]).unwrap() };
    assert!(backward_propagate(&n, &cw, &[]).is_err());
}

#[test]
fn two_laser_matches_single_source() {
    let one = builtin::liar();
    let two = two_laser_variant(&one).unwrap();
    assert!(two.validate().is_empty());
    let a = forward_propagate(&one, &one.initial_ket().unwrap()).unwrap();
    let b = forward_propagate(&two, &two.initial_ket().unwrap()).unwrap();
    assert!(a.continuing.approx_eq(&b.continuing, TOLERANCE));
    assert!(two_laser_variant(&two).is_err());
}

#[test]
fn initial_state_off_the_sources_is_rejected() {
    let n = builtin::open_interferometer();
    let bad = Ket::basis(n.space(), &[("photon", "u")]).unwrap();
    assert!(forward_propagate(&n, &bad).is_err());
}

#[test]
fn cycle_is_diagnosed_once() {
    let photon = SubsystemSpec::new("photon", SubsystemKind::PhotonPath, ["s", "x", "y", "z", "w"]).unwrap();
    let source = Ket::on(&photon, &[("s", ONE)]).unwrap();
    let n = Network::new(
        vec![photon],
        vec![
            Element::emitter("L", 0, source),
            Element::beam_splitter("S1", 1, [Some("s"), Some("y")], ["x", "w"]),
            Element::beam_splitter("S2", 2, [Some("x"), None], ["y", "z"]),
            Element::detector("D", 3, "z"),
        ],
    )
    .unwrap();
    let diags = n.validate();
    assert_eq!(diags.iter().filter(|d| d.rule == Rule::Acyclicity).count(), 1, "{diags:?}");
}

#[test]
fn two_boxes_on_one_arm_are_diagnosed() {
    let mut elements: Vec<Element> = builtin::liar().elements().to_vec();
    for e in &mut elements {
        if e.id == "box2" {
            *e = Element::atom_box("box2", 2, "atom2", "z↓", "v", "level2", "1");
        }
    }
    let n = Network::new(builtin::liar().space().subsystems().to_vec(), elements).unwrap();
    let diags = n.validate();
    assert!(diags.iter().any(|d| d.rule == Rule::ConsumedTwice
        && d.message.contains("photon-path symbol `v` consumed twice")), "{diags:?}");
}

#[test]
fn json_round_trip_and_rejection() {
    for n in [builtin::hardy(), builtin::liar(), builtin::liar_two_laser().unwrap()] {
        let text = to_json(&n);
        let back = from_json(&text).unwrap();
        assert_eq!(to_json(&back), text);
        let a = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
        let b = forward_propagate(&back, &back.initial_ket().unwrap()).unwrap();
        assert!(a.continuing.approx_eq(&b.continuing, TOLERANCE));
    }
    let text = to_json(&builtin::hardy()).replace("\"rank\": 3", "\"rank\": 1");
    assert!(from_json(&text).is_err());
    assert!(from_json("{\"subsystems\": []}").is_err());
}

#[test]
fn no_boxes_sends_everything_to_c() {
    // Strip the boxes from the liar network: atoms become spectators.
    let liar = builtin::liar();
    let elements: Vec<Element> = liar.elements().iter().filter(|e| !e.id.starts_with("box")).cloned().collect();
    let n = Network::new(liar.space().subsystems().to_vec(), elements).unwrap();
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let d = trace.continuing.project("photon", "d").unwrap();
    assert!(d.norm_sq() < TOLERANCE);
    assert!((trace.continuing.project("photon", "c").unwrap().norm_sq() - 1.0).abs() < TOLERANCE);
}

/// Random layered interferometers: splitters, mirrors with random phases
/// and atom boxes over a handful of paths.
fn random_network(ops: &[(u8, u8, u8, f64)], n_atoms: usize) -> Network {
    let symbols: Vec<String> = (0..64).map(|i| format!("p{i}")).collect();
    let photon = SubsystemSpec::new("photon", SubsystemKind::PhotonPath, symbols.clone()).unwrap();
    let mut specs = vec![photon.clone()];
    let mut elements = vec![Element::emitter("L", 0, Ket::on(&photon, &[("p0", ONE)]).unwrap())];
    for a in 0..n_atoms {
        let spin = builtin::spin_spec(&format!("a{a}"));
        let th = 0.3 + a as f64;
        let k = Ket::on(&spin, &[("z↑", c(th.cos(), 0.0)), ("z↓", Complex::from_polar(th.sin(), 1.1 * a as f64))]).unwrap();
        elements.push(Element::emitter(&format!("src{a}"), 0, k));
        specs.push(spin);
        specs.push(builtin::level_spec(&format!("l{a}")));
    }
    let mut live = vec![0usize];
    let mut next = 1usize;
    let mut boxed = vec![false; n_atoms];
    for (step, (kind, x, y, phase)) in ops.iter().enumerate() {
        let rank = step as u32 + 1;
        let id = format!("e{step}");
        let i = *x as usize % live.len();
        match kind % 3 {
            0 if next + 2 < symbols.len() => {
                let j = *y as usize % live.len();
                let a = live[i];
                let second = if j != i { Some(live[j]) } else { None };
                let (o1, o2) = (next, next + 1);
                next += 2;
                elements.push(Element::beam_splitter(
                    &id, rank, [Some(&symbols[a]), second.map(|b| symbols[b].as_str())], [&symbols[o1], &symbols[o2]]));
                live.retain(|&s| s != a && Some(s) != second);
                live.push(o1);
                live.push(o2);
            }
            1 if next + 1 < symbols.len() => {
                let a = live[i];
                elements.push(Element::mirror(&id, rank, &symbols[a], &symbols[next], Complex::from_polar(1.0, *phase)));
                live[i] = next;
                next += 1;
            }
            _ => {
                let free: Vec<usize> = (0..n_atoms).filter(|&k| !boxed[k]).collect();
                if let Some(&atom) = free.get(*y as usize % free.len().max(1)) {
                    boxed[atom] = true;
                    let a = live[i];
                    let blocking = if phase.is_sign_positive() { "z↑" } else { "z↓" };
                    elements.push(Element::atom_box(&id, rank, &format!("a{atom}"), blocking, &symbols[a],
                        &format!("l{atom}"), "1"));
                    // boxes tap the symbol; move it on with a mirror so nothing else taps it
                    let m = format!("m{step}");
                    elements.push(Element::mirror(&m, rank + 1000, &symbols[a], &symbols[next], ONE));
                    live[i] = next;
                    next += 1;
                }
            }
        }
    }
    for (k, &s) in live.iter().enumerate() {
        elements.push(Element::detector(&format!("D{k}"), 5000, &symbols[s]));
    }
    Network::new(specs, elements).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn propagation_conserves_norm(ops in prop::collection::vec((any::<u8>(), any::<u8>(), any::<u8>(), -3.0f64..3.0), 1..12), atoms in 0usize..3) {
        let n = random_network(&ops, atoms);
        prop_assume!(n.validate().is_empty());
        let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
        let total = trace.continuing.norm_sq() + trace.absorbed_norm_sq();
        prop_assert!((total - 1.0).abs() < TOLERANCE, "total {}", total);
    }
}
