use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use tisim_core::experiments::*;
use tisim_core::network::ElementKind;
use tisim_core::transaction::AtomBasis;

const TOL: f64 = 1e-12;

fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn scenario(name: &str) -> Scenario {
    build_scenario(name, &BTreeMap::new()).unwrap()
}

fn boxes(s: &Scenario) -> Vec<(String, String, String)> {
    s.network
        .elements()
        .iter()
        .filter_map(|e| match &e.kind {
            ElementKind::AtomBox { atom, blocking, path, .. } => Some((atom.clone(), blocking.clone(), path.clone())),
            _ => None,
        })
        .collect()
}

#[test]
fn scenario_geometry() {
    assert_eq!(boxes(&scenario("hardy-ifm")), [("atom".into(), "z↑".into(), "v".into())]);
    assert_eq!(
        boxes(&scenario("qle")),
        [("atom1".into(), "z↑".into(), "v".into()), ("atom2".into(), "z↓".into(), "u".into())]
    );
    for (name, _) in SCENARIOS {
        assert!(scenario(name).network.validate().is_empty(), "{name}");
    }
}

#[test]
fn usage_errors() {
    assert!(matches!(build_scenario("nope", &BTreeMap::new()), Err(ExperimentError::Usage(_))));
    assert!(matches!(build_scenario("qle", &params(&[("bomb", "absent")])), Err(ExperimentError::Usage(_))));
    assert!(matches!(build_scenario("ev-bomb", &params(&[("bomb", "maybe")])), Err(ExperimentError::Usage(_))));
    assert!(matches!(build_scenario("qle-chsh", &params(&[("a", "1")])), Err(ExperimentError::Usage(_))));
    assert!(matches!(build_scenario("qle-chsh", &params(&[("grid", "7")])), Err(ExperimentError::Usage(_))));
    assert!(matches!(run_mc(&scenario("qle"), 0, 1, 1), Err(ExperimentError::Usage(_))));
    assert!(matches!(scenario("qle").with_post_selection(Some("X")), Err(ExperimentError::Usage(_))));
    assert!(parse_basis("bloch:90,0").is_ok());
    assert!(parse_basis("x").is_err() && parse_basis("bloch:1").is_err());
}

#[test]
fn bomb_reports() {
    let absent = run_exact(&build_scenario("ev-bomb", &params(&[("bomb", "absent")])).unwrap()).unwrap();
    assert!((absent.probability("C") - 1.0).abs() < TOL);
    assert!(absent.probability("D").abs() < TOL);
    let present = run_exact(&scenario("ev-bomb")).unwrap();
    assert!((present.probability("C") - 0.25).abs() < TOL);
    assert!((present.probability("D") - 0.25).abs() < TOL);
    assert!((present.probability("absorbed@bomb") - 0.5).abs() < TOL);
}

#[test]
fn qle_exact_marginals() {
    let r = run_exact(&scenario("qle")).unwrap();
    assert!((r.probability("D") - 0.125).abs() < TOL);
    assert!((r.probability("C") - 0.375).abs() < TOL);
    let absorbed: f64 = r.marginals.iter().filter(|m| m.outcome.starts_with("absorbed@")).map(|m| m.probability).sum();
    assert!((absorbed - 0.5).abs() < TOL);
}

#[test]
fn exact_reports_are_normalized() {
    for (name, _) in SCENARIOS {
        for basis in [AtomBasis::Z, AtomBasis::Y] {
            let r = run_exact(&scenario(name).with_basis(basis)).unwrap();
            let total: f64 = r.outcomes.iter().map(|o| o.probability).sum();
            assert!((total - 1.0).abs() < TOL, "{name}");
        }
    }
}

#[test]
fn y_context_post_selection() {
    let s = scenario("qle").with_basis(AtomBasis::Y).with_post_selection(Some("D")).unwrap();
    let r = run_exact(&s).unwrap();
    let ps = r.statistics.post_selection.unwrap();
    assert!((ps.acceptance - 0.125).abs() < TOL);
    let rows: Vec<(&str, f64)> = ps.conditional.iter().map(|c| (c.outcome.as_str(), c.probability)).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].0, "D[y↑,y↓]");
    assert_eq!(rows[1].0, "D[y↓,y↑]");
    assert!(rows.iter().all(|(_, p)| (p - 0.5).abs() < TOL));
    assert!((ps.correlation.unwrap() + 1.0).abs() < TOL);
}

#[test]
fn monte_carlo_is_worker_independent() {
    let s = scenario("qle").with_post_selection(Some("D")).unwrap();
    let a = run_mc(&s, 100_000, 7, 1).unwrap();
    let b = run_mc(&s, 100_000, 7, 8).unwrap();
    assert_eq!(a.untimed(), b.untimed());
    let total: u64 = a.outcomes.iter().map(|o| o.count.unwrap()).sum();
    assert_eq!(total, 100_000);
    let ps = a.statistics.post_selection.unwrap();
    assert_eq!(ps.conditional.iter().map(|c| c.count.unwrap()).sum::<u64>(), a.marginals[1].count.unwrap());
}

#[test]
fn monte_carlo_converges() {
    let s = scenario("qle");
    let exact = run_exact(&s).unwrap();
    let n = 100_000u64;
    let mut within = 0;
    let mut total = 0;
    for seed in 0..100 {
        let r = run_mc(&s, n, seed, 4).unwrap();
        for (e, m) in exact.outcomes.iter().zip(&r.outcomes) {
            assert_eq!(e.outcome, m.outcome);
            let p = e.probability;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            total += 1;
            if (m.probability - p).abs() < 4.0 * sigma {
                within += 1;
            }
        }
    }
    assert!(within as f64 >= 0.99 * total as f64, "{within}/{total}");
}

#[test]
fn reports_round_trip_byte_identical() {
    let chsh = build_scenario("qle-chsh", &params(&[("a", "0"), ("a2", "90"), ("b", "45"), ("b2", "-45"), ("pairs", "5000")])).unwrap();
    let reports = [
        run_exact(&scenario("hardy-ifm")).unwrap(),
        run_mc(&scenario("qle").with_post_selection(Some("D")).unwrap(), 5000, 3, 2).unwrap(),
        run_exact(&chsh).unwrap(),
        run_mc(&chsh, 1000, 3, 2).unwrap(),
    ];
    for r in reports {
        let text = r.to_json();
        assert!(text.contains("\"schema\": 1"));
        let back = RunReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
    }
    assert!(RunReport::from_json("{\"schema\": 2}").is_err());
}

#[test]
fn csv_layout() {
    let exact = run_exact(&scenario("qle")).unwrap().to_csv();
    let mut lines = exact.lines();
    assert_eq!(lines.next(), Some("outcome,count,probability"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[..2], ["\"C[z↑", "z↑]\""]);
    assert_eq!(first[2], "");
    assert!((first[3].parse::<f64>().unwrap() - 0.0625).abs() < TOL);
    let mc = run_mc(&scenario("ev-bomb"), 1000, 1, 1).unwrap().to_csv();
    let rows: Vec<&str> = mc.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    let counts: u64 = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(counts, 1000);
}

#[test]
fn chsh_scenario_on_a_coarse_grid() {
    let s = build_scenario("qle-chsh", &params(&[("grid", "5")])).unwrap();
    let r = run_exact(&s).unwrap();
    let c = r.statistics.chsh.unwrap();
    assert!((c.s.abs() - 2.0 * SQRT_2).abs() < 1e-9);
    assert_eq!(c.grid_step_deg, Some(5.0));
}

#[test]
fn reference_checklist_passes() {
    let checks = verify_reference().unwrap();
    assert!(checks.len() >= 15);
    for c in &checks {
        assert!(c.pass, "{c}");
    }
}
