use proptest::prelude::*;
use tisim_core::builtin;
use tisim_core::network::{forward_propagate, ElementKind};
use tisim_core::path::*;
use tisim_core::{Complex, Network};

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn close(a: Complex, b: Complex) -> bool {
    (a - b).norm() < TOL
}

fn one(text: &str) -> PathKet {
    parse(text).unwrap().terms.remove(0)
}

#[test]
fn golden_parses() {
    let p = one("|L-_S1_-A-_S2_-D>");
    assert_eq!(p.segments.len(), 5);
    assert!(p.segments[1].reflected && p.segments[3].reflected);
    assert!(!p.segments[0].reflected && !p.segments[2].reflected && !p.segments[4].reflected);

    let p = one("|L>");
    assert_eq!(p.segments, [Segment::new("L", false)]);

    let p = one("|L-S1-B-S2-D> |++>");
    assert_eq!(p.atoms, Some([Spin::Up, Spin::Up]));
    assert_eq!(p.segments.len(), 5);
}

#[test]
fn printing_is_canonical() {
    let cases = [
        ("|L-_S1_-A-_S2_-D>+|L-S1-B-S2-D>", "|L-_S1_-A-_S2_-D> + |L-S1-B-S2-D>"),
        ("  | L - S1 - B - S2 - D ⟩  | − − ⟩ ", "|L-S1-B-S2-D> |-->"),
        ("− i 0.25|L>", "-i0.25|L>"),
        ("+2.50|L>-i|L>", "2.5|L> - i|L>"),
    ];
    for (text, canon) in cases {
        let e = parse(text).unwrap();
        assert_eq!(e.to_string(), canon);
        assert_eq!(parse(canon).unwrap(), e);
    }
}

#[test]
fn path_amplitudes() {
    let n = builtin::liar();
    assert!(close(amplitude(&one("|L-_S1_-A-_S2_-D>"), &n).unwrap(), c(-0.5, 0.0)));
    assert!(close(amplitude(&one("|L-S1-B-S2-D>"), &n).unwrap(), c(0.5, 0.0)));
    assert!(close(amplitude(&one("-i0.5|L>"), &n).unwrap(), c(0.0, -0.5)));
}

#[test]
fn cancellation_sums() {
    let n = builtin::liar();
    let mixed_pair = parse("|L-_S1_-A-_S2_-D> + |L-S1-B-S2-D>").unwrap();
    let sum = sum_amplitudes(&mixed_pair, &n).unwrap();
    assert!(sum.norm() < TOL && cancels(sum));

    let reflected_b = parse("|L-_S1_-B-_S2_-D> |++>").unwrap();
    assert!((sum_amplitudes(&reflected_b, &n).unwrap().norm() - 0.5).abs() < TOL);

    let e = parse("i0.3|L-S1-B-S2-D> - |L-_S1_-A-S2-D>").unwrap();
    assert!(sum_amplitudes(&e.concat(&e.negated()), &n).unwrap().norm() < TOL);
}

#[test]
fn labels_must_resolve() {
    let n = builtin::liar();
    assert_eq!(amplitude(&one("|L-S9-D>"), &n), Err(PathError::UnknownLabel("S9".into())));
    assert!(matches!(amplitude(&one("|L-_A_-D>"), &n), Err(PathError::Invalid(_))));
    assert!(matches!(amplitude(&one("|S1-D>"), &n), Err(PathError::Invalid(_))));
    assert!(matches!(amplitude(&one("|L-S1>"), &n), Err(PathError::Invalid(_))));
}

#[test]
fn in_context_cancellation_matches_propagation() {
    let n = builtin::liar();
    let mixed = parse("|L-_S1_-A-_S2_-D> |-+> + |L-S1-B-S2-D> |-+>").unwrap();
    assert!(evaluate(&mixed, &n).unwrap().norm() < TOL);
    let trace = forward_propagate(&n, &n.initial_ket().unwrap()).unwrap();
    let d = trace
        .continuing
        .amplitude_of(&[("photon", "d"), ("atom1", "z↓"), ("atom2", "z↑"), ("level1", "0"), ("level2", "0")])
        .unwrap();
    assert!(d.norm() < TOL);
}

#[test]
fn arm_labels_are_checked_against_the_geometry() {
    let builtin_aliases = builtin::liar();
    let reflected_b = parse("|L-_S1_-B-_S2_-D> |++>").unwrap();
    assert!(matches!(evaluate(&reflected_b, &builtin_aliases), Err(PathError::Geometry(_))));
    let swapped = builtin::liar().with_aliases([("A", "v"), ("B", "u")]);
    assert!(close(evaluate(&reflected_b, &swapped).unwrap(), c(0.25, 0.0)));
}

/// Symbol the photon occupies right after each element of the route.
fn trajectory(n: &Network, p: &PathKet) -> Vec<(u32, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for seg in &p.segments {
        let Some(el) = n.element(&seg.label) else { continue };
        match &el.kind {
            ElementKind::Emitter { emitted, .. } => {
                cur = emitted.iter().next().unwrap().0.symbol("photon").unwrap().to_string();
            }
            ElementKind::BeamSplitter { inputs, outputs } => {
                let k = inputs.iter().position(|i| i.as_deref() == Some(cur.as_str())).unwrap();
                cur = if seg.reflected { outputs[1 - k].clone() } else { outputs[k].clone() };
            }
            ElementKind::Mirror { output, .. } => cur = output.clone(),
            _ => {}
        }
        out.push((el.rank, cur.clone()));
    }
    out
}

/// Forward propagation with the photon projected onto the route after every
/// rank, read out at the route's detector.
fn propagated_component(n: &Network, p: &PathKet, atoms: &[(&str, &str)]) -> Complex {
    let traj = trajectory(n, p);
    let mut state = n.initial_ket().unwrap();
    for rank in n.ranks() {
        state = n.propagate_rank(rank, &state).unwrap().continuing;
        let Some((_, sym)) = traj.iter().rev().find(|(r, _)| *r <= rank) else { continue };
        state = state.project("photon", sym).unwrap();
    }
    let last = traj.last().unwrap().1.clone();
    let mut assignment = vec![("photon", last.as_str())];
    assignment.extend_from_slice(atoms);
    let ids: Vec<String> = n.space().subsystems().iter().map(|s| s.id().to_string()).collect();
    if ids.iter().any(|i| i == "level1") {
        assignment.extend([("level1", "0"), ("level2", "0")]);
    }
    state.amplitude_of(&assignment).unwrap()
}

#[test]
fn every_route_agrees_with_propagation() {
    for n in [builtin::open_interferometer(), builtin::bomb_tester(false)] {
        for det in ["C", "D"] {
            for r in routes(&n, det).unwrap() {
                let want = propagated_component(&n, &r, &[]);
                assert!(close(amplitude(&r, &n).unwrap(), want), "{r}");
                assert!(close(evaluate(&PathExpression { terms: vec![r.clone()] }, &n).unwrap(), want), "{r}");
            }
        }
    }
    let tags = [([Spin::Up, Spin::Up], ["z↑", "z↑"]), ([Spin::Up, Spin::Down], ["z↑", "z↓"]), ([Spin::Down, Spin::Up], ["z↓", "z↑"]), ([Spin::Down, Spin::Down], ["z↓", "z↓"])];
    for n in [builtin::liar(), builtin::liar_two_laser().unwrap()] {
        for det in ["C", "D"] {
            let rs = routes(&n, det).unwrap();
            assert_eq!(rs.len(), 2);
            for r in rs {
                for (tag, syms) in tags {
                    let t = r.clone().with_atoms(tag);
                    let want = propagated_component(&n, &t, &[("atom1", syms[0]), ("atom2", syms[1])]);
                    let got = evaluate(&PathExpression { terms: vec![t.clone()] }, &n).unwrap();
                    assert!(close(got, want), "{t}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn only_two_labelled_routes_reach_the_dark_detector() {
    let s = survivors(&builtin::liar(), "D").unwrap();
    let text: Vec<String> = s.iter().map(|x| x.ket.to_string()).collect();
    assert_eq!(text, ["|L-_S1_-A-_S2_-D> |++>", "|L-S1-B-S2-D> |-->"]);
    for x in &s {
        assert!(close(x.amplitude, c(0.25, 0.0)));
    }
    let two = survivors(&builtin::liar_two_laser().unwrap(), "D").unwrap();
    let text: Vec<String> = two.iter().map(|x| x.ket.to_string()).collect();
    assert_eq!(text, ["|Lu-A-_S2_-D> |++>", "|Lv-B-S2-D> |-->"]);
}

#[derive(Debug, Clone)]
struct Rendered {
    expr: PathExpression,
    text: String,
}

fn ws() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec![" ", "\t", "\n", "  "]), 0..2).prop_map(|v| v.concat())
}

fn label() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9]{0,3}"
}

fn term() -> impl Strategy<Value = (PathKet, Vec<String>)> {
    let seg = (label(), any::<bool>(), ws(), ws());
    let spin = prop::sample::select(vec![Spin::Up, Spin::Down]);
    (
        any::<bool>(),
        any::<bool>(),
        prop::option::of(0u32..100_000),
        prop::collection::vec(seg, 1..6),
        prop::option::of((spin.clone(), spin, any::<bool>())),
        prop::collection::vec(ws(), 8),
    )
        .prop_map(|(negative, imaginary, mag, segs, atoms, gaps)| {
            let magnitude = mag.map(|m| m as f64 / 1000.0);
            let mut tokens = Vec::new();
            if imaginary {
                tokens.push("i".to_string());
            }
            if let Some(m) = magnitude {
                tokens.push(format!("{m}"));
            }
            tokens.push(format!("{}|", gaps[0]));
            let mut segments = Vec::new();
            for (k, (l, reflected, w1, w2)) in segs.into_iter().enumerate() {
                if k > 0 {
                    tokens.push(format!("{w1}{}{w2}", if reflected { "-" } else { "−" }));
                }
                tokens.push(if reflected { format!("_{w1}{l}{w2}_") } else { l.clone() });
                segments.push(Segment { label: l, reflected });
            }
            tokens.push(format!("{}{}", gaps[1], if negative { ">" } else { "⟩" }));
            let atoms = atoms.map(|(a, b, unicode)| {
                let s = |x: Spin| match x {
                    Spin::Up => "+",
                    Spin::Down if unicode => "−",
                    Spin::Down => "-",
                };
                tokens.push(format!("{}|{}{}{}{}>", gaps[2], gaps[3], s(a), gaps[4], s(b)));
                [a, b]
            });
            let ket = PathKet { coefficient: Coefficient { negative, imaginary, magnitude }, segments, atoms };
            (ket, tokens)
        })
}

fn expression() -> impl Strategy<Value = Rendered> {
    (prop::collection::vec(term(), 1..4), ws(), any::<bool>()).prop_map(|(terms, pad, explicit_plus)| {
        let mut text = pad.clone();
        let mut expr = PathExpression { terms: Vec::new() };
        for (k, (ket, tokens)) in terms.into_iter().enumerate() {
            if ket.coefficient.negative {
                text.push_str(" - ");
            } else if k > 0 || explicit_plus {
                text.push_str("+ ");
            }
            text.push_str(&tokens.join(&pad));
            expr.terms.push(ket);
        }
        text.push_str(&pad);
        Rendered { expr, text }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fuzzed_round_trip(r in expression()) {
        let parsed = parse(&r.text).map_err(|e| TestCaseError::fail(format!("{e}: {:?}", r.text)))?;
        prop_assert_eq!(&parsed, &r.expr);
        let canon = r.expr.to_string();
        prop_assert_eq!(parsed.to_string(), canon.clone());
        prop_assert_eq!(parse(&canon).unwrap(), r.expr);
    }
}
