//! Acceptance suite: one line per criterion on stdout. Items that cannot be
//! attained are listed in `UNATTAINABLE` and reported red; any other failing
//! item makes the target exit non-zero. `ACCEPTANCE_VERBOSE=1` also prints
//! the passing items.

use std::f64::consts::PI;
use std::time::Instant;

use finslercomp::comparison::{bishop_profile, radial_data, radial_laplacian};
use finslercomp::curvature::{flag_curvature, matrix_lemma_check, ricci_scalar};
use finslercomp::lorentz::{classify, legendre, legendre_check, legendre_preimages_2d, CausalKind};
use finslercomp::report::{CheckReport, Verdict};
use finslercomp::runner::{run, RunOptions, RunOutcome};
use finslercomp::scenario::{load_scenario, parse_scenario};
use finslercomp::tensor::{fundamental_tensor, sample_admissible, validate_homogeneity};
use finslercomp::weighted::{epsilon_bound, ComparisonParams, NValue};
use finslercomp::zoo::{self, Warp};
use finslercomp::{Signature, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-items known to be out of reach, with the reason printed alongside.
const UNATTAINABLE: [(&str, &str); 2] = [
    ("4/flrw_cos_t0", "the cos-warped chart ends at t = pi/2, so a conjugate time pi is never reached"),
    ("6/flrw_cos_bound", "same chart limit: the timelike bound pi cannot be attained inside the chart"),
];

struct Item {
    key: String,
    ok: bool,
    detail: String,
}

fn item(key: &str, ok: bool, detail: impl Into<String>) -> Item {
    Item { key: key.into(), ok, detail: detail.into() }
}

fn run_json(text: &str) -> RunOutcome {
    let sc = parse_scenario(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    run(&sc, &RunOptions::default()).unwrap()
}

fn check<'a>(o: &'a RunOutcome, name: &str) -> &'a CheckReport {
    o.full.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no {name} report"))
}

fn max_abs(r: &CheckReport) -> f64 {
    r.residuals.iter().fold(0.0_f64, |a, x| a.max(x.0.abs()))
}

fn scenarios_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn n_json(n: NValue) -> String {
    match n {
        NValue::Finite(x) => format!("{x}"),
        NValue::PlusInfinity => "\"inf\"".into(),
        NValue::MinusInfinity => "\"-inf\"".into(),
    }
}

/// Five in-range `ε` for each of five admissible `N`.
fn grid_25(dim: usize, sig: Signature, ns: [f64; 5]) -> Vec<(NValue, f64)> {
    let mut out = Vec::new();
    for n in ns {
        let nv = NValue::from_f64(n);
        let bound = epsilon_bound(dim, sig, nv).unwrap();
        let span = if bound.is_infinite() { 2.0 } else { 0.8 * bound };
        for f in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            out.push((nv, f * span));
        }
    }
    out
}

fn criterion_1() -> Vec<Item> {
    let mut items = Vec::new();
    for space in zoo::all_default() {
        let r = validate_homogeneity(&space, 200, 11);
        items.push(item(&format!("{}/homogeneity", space.name), r.passed(), format!("max {:.1e}", r.max_violation.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bad = (0..200)
            .filter(|_| {
                let (x, v) = sample_admissible(&space, &mut rng, 0.5);
                fundamental_tensor(&space, &x, &v).is_err()
            })
            .count();
        items.push(item(&format!("{}/signature", space.name), bad == 0, format!("{bad} bad")));
    }
    items
}

fn criterion_2() -> Vec<Item> {
    let mut items = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = |space: &Space, target: f64| {
        let mut w = 0.0_f64;
        for _ in 0..50 {
            let (x, v) = sample_admissible(space, &mut rng, 0.5);
            let f2 = 2.0 * space.lagrangian_at(&x, &v).abs();
            let ric = ricci_scalar(space, &x, &v).unwrap();
            w = w.max(if target == 0.0 { ric.abs() / f2.max(1.0) } else { (ric / (target * f2) - 1.0).abs() });
        }
        w
    };
    for (space, tol) in [(zoo::euclidean(3), 1e-6), (zoo::minkowski(3), 1e-6), (zoo::randers(3, 0.4).unwrap(), 1e-6)] {
        let w = worst(&space, 0.0);
        items.push(item(&format!("{}/ric=0", space.name), w <= tol, format!("{w:.1e}")));
    }
    for n in [2, 3] {
        let w = worst(&zoo::sphere(n), (n - 1) as f64);
        items.push(item(&format!("sphere{n}/ric"), w <= 1e-5, format!("{w:.1e}")));
        let w = worst(&zoo::poincare_ball(n), -((n - 1) as f64));
        items.push(item(&format!("poincare{n}/ric"), w <= 1e-5, format!("{w:.1e}")));
    }
    let f = zoo::flrw(1, Warp::Cos);
    let k = flag_curvature(&f, &[0.2, 0.3], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    items.push(item("flrw/flag", (k - 1.0).abs() <= 1e-5, format!("{k}")));
    items
}

fn criterion_3() -> Vec<Item> {
    let spaces: Vec<(Space, Vec<f64>)> = vec![
        (zoo::euclidean(3), vec![0.0; 3]),
        (zoo::sphere(3), vec![0.6, 0.8, 0.0]),
        (zoo::poincare_ball(2), vec![0.1, 0.0]),
        (zoo::randers(3, 0.4).unwrap(), vec![0.0; 3]),
        (zoo::gaussian_weighted_euclidean(2, 1.0), vec![0.0; 2]),
    ];
    let mut items = Vec::new();
    let mut count = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (space, origin) in &spaces {
        let mut worst = 0.0_f64;
        let mut ok = true;
        for _ in 0..4 {
            let dir: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let horizon = if space.name.starts_with("poincare") { 0.8 } else { 2.0 };
            let td = radial_data(space, origin, &dir, horizon).unwrap();
            let r = matrix_lemma_check(space, &td);
            ok &= r.passed();
            worst = worst.max(r.max_violation.0);
            count += 1;
        }
        items.push(item(&space.name, ok, format!("max {worst:.1e}")));
    }
    items.push(item("geodesics>=20", count >= 20, format!("{count}")));
    items
}

fn flrw_t0() -> Option<f64> {
    let f = zoo::flrw(2, Warp::Cos);
    // longest admissible proper time along d/dt from t = 0 is just under pi/2
    radial_data(&f, &[0.0; 3], &[1.0, 0.0, 0.0], 1.55).ok().and_then(|td| td.singular_at)
}

fn criterion_4() -> Vec<Item> {
    let mut items = Vec::new();
    let o = run_json(&std::fs::read_to_string(scenarios_dir().join("sphere_bonnet_myers.json")).unwrap());
    let c = check(&o, "conjugate");
    items.push(item("sphere_t0", c.passed(), format!("max |t0 - pi| {:.1e}", c.max_violation.0)));
    let t0 = flrw_t0();
    items.push(item("flrw_cos_t0", t0.is_some_and(|t| (t - PI).abs() <= 1e-3), format!("{t0:?}")));
    for name in ["euclidean_flat", "minkowski_no_conjugate"] {
        let o = run_json(&std::fs::read_to_string(scenarios_dir().join(format!("{name}.json"))).unwrap());
        let c = check(&o, "conjugate");
        items.push(item(name, c.passed(), format!("{}", c.verdict == Verdict::Pass)));
    }
    items
}

fn criterion_5() -> Vec<Item> {
    let mut items = Vec::new();
    let cases = [
        ("gaussian_weighted_euclidean", 2usize, 2usize, Signature::Positive, [-1.0, 0.0, 0.5, 4.0, f64::INFINITY], "[0, 0]", "3"),
        ("weighted_minkowski", 2, 3, Signature::Lorentzian, [-1.0, -2.0, 4.0, 6.0, f64::INFINITY], "[0, 0.1, 0]", "2"),
    ];
    for (zoo_name, n, dim, sig, ns, origin, horizon) in cases {
        let mut worst = f64::NEG_INFINITY;
        let mut bad = Vec::new();
        for (nv, eps) in grid_25(dim, sig, ns) {
            let text = format!(
                r#"{{"id": "grid", "space": {{"zoo": "{zoo_name}", "params": {{"n": {n}, "lambda": 0.5}}}},
                   "params": {{"N": {}, "eps": {eps}}},
                   "bundle": {{"origin": {origin}, "directions": {{"grid": 3}}, "horizon": {horizon}}},
                   "checks": ["bishop"]}}"#,
                n_json(nv)
            );
            let c = check(&run_json(&text), "bishop").clone();
            worst = worst.max(c.max_violation.0);
            if !c.passed() {
                bad.push(format!("N={nv:?} eps={eps}: {:?}", c.verdict));
            }
        }
        items.push(item(zoo_name, bad.is_empty(), format!("25 runs, max {worst:.1e} {bad:?}")));
    }
    let o = run_json(&std::fs::read_to_string(scenarios_dir().join("sphere_bonnet_myers.json")).unwrap());
    let m = max_abs(check(&o, "bishop"));
    items.push(item("sphere_equality", m <= 1e-3, format!("|res| {m:.1e}")));
    let o = run_json(
        r#"{"id": "flrw_bishop", "space": {"zoo": "flrw", "params": {"n": 2, "warp": "cos"}}, "params": {"N": 2},
            "bundle": {"origin": [0, 0, 0], "directions": {"explicit": [[1, 0, 0]]}, "horizon": 1.5}, "checks": ["bishop"]}"#,
    );
    let c = check(&o, "bishop");
    let m = max_abs(c);
    items.push(item("flrw_equality", c.passed() && m <= 1e-3, format!("|res| {m:.1e}")));
    items
}

fn criterion_6() -> Vec<Item> {
    let mut items = Vec::new();
    let o = run_json(&std::fs::read_to_string(scenarios_dir().join("sphere_bonnet_myers.json")).unwrap());
    let c = check(&o, "bonnet_myers");
    let worst = (0..6).filter_map(|k| c.get(&format!("t0[{k}]"))).fold(0.0_f64, |a, t| a.max((t - PI).abs()));
    items.push(item("sphere_attained", c.passed() && worst <= 1e-3, format!("|t0 - pi| {worst:.1e}")));
    let t0 = flrw_t0();
    items.push(item("flrw_cos_bound", t0.is_some_and(|t| (t - PI).abs() <= 1e-3), format!("{t0:?}")));
    let o = run_json(&std::fs::read_to_string(scenarios_dir().join("sphere3_comparison.json")).unwrap().replace("\"bishop\",", "\"bonnet_myers\","));
    items.push(item("sphere3_K2", check(&o, "bonnet_myers").passed(), ""));
    for n_eff in [1.0, 0.0, -1.0] {
        let text = format!(
            r#"{{"id": "g", "space": {{"zoo": "gaussian_weighted_euclidean", "params": {{"n": 2, "lambda": 1}}}},
               "params": {{"N": {n_eff}, "eps": 0, "K": 1}},
               "bundle": {{"origin": [0, 0], "directions": {{"grid": 4}}, "horizon": 4}}, "checks": ["bonnet_myers"]}}"#
        );
        let c = check(&run_json(&text), "bonnet_myers").clone();
        items.push(item(&format!("gaussian_N{n_eff}"), c.passed(), format!("max {:.1e}", c.max_violation.0)));
    }
    for n_eff in [0.0, -1.0] {
        let text = format!(
            r#"{{"id": "w", "space": {{"zoo": "weighted_minkowski", "params": {{"n": 2, "lambda": 1}}}},
               "params": {{"N": {n_eff}, "eps": 0, "K": 1}},
               "bundle": {{"origin": [0, 0, 0], "directions": {{"grid": 3}}, "horizon": 4}}, "checks": ["spacetime_bonnet_myers"]}}"#
        );
        let c = check(&run_json(&text), "spacetime_bonnet_myers").clone();
        items.push(item(&format!("weighted_minkowski_N{n_eff}"), c.passed(), format!("{:?} max {:.1e} {:?}", c.verdict, c.max_violation.0, c.notes.first())));
    }
    items
}

fn equality_gap(space: &Space, origin: &[f64], dir: &[f64], horizon: f64, model: impl Fn(f64) -> f64) -> f64 {
    let params = ComparisonParams::new(space.dim(), space.signature(), NValue::Finite(space.ricci_n() as f64), 1.0, 0.0, 1.0, None).unwrap();
    let p = bishop_profile(space, origin, dir, horizon, &params).unwrap();
    let mut worst = 0.0_f64;
    for &t in &p.t {
        if t < 0.1 || t > horizon - 0.1 {
            continue;
        }
        let lap = radial_laplacian(space, &p.td, &p.weight, t).unwrap();
        worst = worst.max((lap - model(t)).abs() / model(t).abs().max(1.0));
    }
    worst
}

fn criterion_7() -> Vec<Item> {
    let mut items = Vec::new();
    let flat = [
        ("euclidean", "laplacian", r#"{"zoo": "euclidean", "params": {"n": 3}}"#, "[0, 0, 0]", 3),
        ("minkowski", "lorentz_laplacian", r#"{"zoo": "minkowski", "params": {"n": 2}}"#, "[0, 0, 0]", 2),
    ];
    for (label, name, space, origin, n) in flat {
        let text = format!(
            r#"{{"id": "flat", "space": {space}, "params": {{"N": {n}, "a": 1, "b": 1}},
               "bundle": {{"origin": {origin}, "directions": {{"grid": 5}}, "horizon": 5}},
               "checks": [{{"name": "{name}", "tol": 1e-6}}]}}"#
        );
        let o = run_json(&text);
        let c = check(&o, name);
        let slack = (0..5).filter_map(|k| c.get(&format!("min_slack[{k}]"))).fold(f64::INFINITY, f64::min);
        items.push(item(label, c.passed() && slack.abs() <= 1e-6, format!("max {:.1e}, slack {slack:.1e}", c.max_violation.0)));
    }
    let g = equality_gap(&zoo::sphere(2), &[0.6, 0.8], &[1.0, 0.3], 3.0, |t| 1.0 / t.tan());
    items.push(item("sphere_cot", g <= 1e-3, format!("{g:.1e}")));
    let g = equality_gap(&zoo::flrw(2, Warp::Cos), &[0.0; 3], &[1.0, 0.0, 0.0], 1.5, |t| 2.0 / t.tan());
    items.push(item("flrw_cot", g <= 1e-3, format!("{g:.1e}")));
    let weighted = [
        // [a, b] brackets the weight factor over the horizon
        ("gaussian", "laplacian", r#"{"zoo": "gaussian_weighted_euclidean", "params": {"n": 2, "lambda": 1}}"#, "[0, 0]", "1", 1.0, 60.0),
        ("weighted_minkowski", "lorentz_laplacian", r#"{"zoo": "weighted_minkowski", "params": {"n": 2, "lambda": 1}}"#, "[0, 0, 0]", "0", 0.01, 12.0),
    ];
    for (label, name, space, origin, n_eff, a, b) in weighted {
        let text = format!(
            r#"{{"id": "w", "space": {space}, "params": {{"N": {n_eff}, "eps": 0, "K": 1, "a": {a}, "b": {b}}},
               "bundle": {{"origin": {origin}, "directions": {{"grid": 4}}, "horizon": 2}},
               "checks": ["{name}"]}}"#
        );
        let o = run_json(&text);
        let c = check(&o, name);
        let slack = |key: &str| (0..4).filter_map(|i| c.get(&format!("{key}[{i}]"))).fold(f64::INFINITY, f64::min);
        let (s1, s2) = (slack("min_slack"), slack("min_slack_deformed"));
        items.push(item(label, c.passed() && s1 >= -1e-3 && s2 >= -1e-3, format!("{:?} slack {s1:.1e}, deformed {s2:.1e}", c.verdict)));
    }
    items
}

fn criterion_8() -> Vec<Item> {
    let mut items = Vec::new();
    for n in [2usize, 3] {
        let origin = format!("{:?}", vec![0.0; n]);
        let text = format!(
            r#"{{"id": "e", "space": {{"zoo": "euclidean", "params": {{"n": {n}}}}}, "params": {{"N": {n}, "a": 1, "b": 1}},
               "bundle": {{"origin": {origin}, "directions": {{"grid": 3}}, "horizon": 1}},
               "checks": [{{"name": "bishop_gromov", "r": 0.5, "R": 1}}]}}"#
        );
        let o = run_json(&text);
        let c = check(&o, "bishop_gromov");
        let (ratio, bound) = (c.get("ratio").unwrap(), c.get("bound").unwrap());
        let want = 2f64.powi(n as i32);
        items.push(item(&format!("euclidean{n}"), (ratio - want).abs() <= 1e-3 && (bound - want).abs() <= 1e-3, format!("{ratio} vs {bound}")));
        let origin = format!("{:?}", vec![0.0; n + 1]);
        let text = format!(
            r#"{{"id": "m", "space": {{"zoo": "minkowski", "params": {{"n": {n}}}}}, "params": {{"N": {n}, "a": 1, "b": 1}},
               "checks": [{{"name": "sclv_bishop_gromov", "r": 0.5, "R": 1,
                            "sector": {{"origin": {origin}, "radius": 0.5, "cut": {{"constant": 1}}}}}}]}}"#
        );
        let o = run_json(&text);
        let c = check(&o, "sclv_bishop_gromov");
        let (ratio, bound) = (c.get("ratio").unwrap_or(f64::NAN), c.get("bound").unwrap_or(f64::NAN));
        let want = 2f64.powi(n as i32 + 1);
        items.push(item(&format!("minkowski{n}_sector"), (ratio - want).abs() <= 1e-3 && (bound - want).abs() <= 1e-3, format!("{ratio} vs {bound}")));
    }
    let o = run_json(&std::fs::read_to_string(scenarios_dir().join("sphere3_comparison.json")).unwrap());
    let c = check(&o, "bishop_gromov");
    let (ratio, bound) = (c.get("ratio").unwrap(), c.get("bound").unwrap());
    items.push(item("sphere3_model", (ratio - bound).abs() <= 1e-3, format!("{ratio} vs {bound}")));
    let o = run_json(
        r#"{"id": "g", "space": {"zoo": "gaussian_weighted_euclidean", "params": {"n": 2, "lambda": 1}},
            "params": {"N": 1, "eps": 0, "K": 1, "a": 1, "b": 10},
            "bundle": {"origin": [0, 0], "directions": {"grid": 4}, "horizon": 1.5},
            "checks": [{"name": "bishop_gromov", "r": 0.5, "R": 1.5}]}"#,
    );
    let c = check(&o, "bishop_gromov");
    items.push(item("gaussian", c.passed(), format!("{:?} {:?} vs {:?}", c.verdict, c.get("ratio"), c.get("bound"))));
    let o = run_json(&std::fs::read_to_string(scenarios_dir().join("minkowski3_sclv.json")).unwrap());
    items.push(item("minkowski3_tabulated", check(&o, "sclv_bishop_gromov").passed(), ""));
    items
}

fn criterion_9() -> Vec<Item> {
    let mut items = Vec::new();
    let m = zoo::minkowski(3);
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let (x, v) = sample_admissible(&m, &mut rng, 0.5);
        let omega = legendre(&m, &x, &v).unwrap();
        let closed = [-v[0], v[1], v[2], v[3]];
        worst = worst.max(omega.iter().zip(closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    items.push(item("minkowski_closed_form", worst <= 1e-12, format!("{worst:.1e}")));
    for space in [zoo::minkowski(3), zoo::beem(4).unwrap()] {
        let r = legendre_check(&space, 1000, 92);
        let (rt, cs) = (r.get("roundtrip_residual").unwrap(), r.get("cauchy_schwarz_excess").unwrap());
        items.push(item(&format!("{}/roundtrip", space.name), r.passed() && rt <= 1e-8, format!("{rt:.1e}")));
        items.push(item(&format!("{}/cauchy_schwarz", space.name), r.passed() && cs <= 1e-10, format!("{cs:.1e}")));
    }
    let beem = zoo::beem(4).unwrap();
    let t1 = 8f64.powf(-0.25).asin();
    let x = [0.0, 0.0];
    let omega = legendre(&beem, &x, &[t1.cos(), t1.sin()]).unwrap();
    let pre = legendre_preimages_2d(&beem, &x, &omega).unwrap();
    let axis = beem.time_orientation();
    let timelike: Vec<&Vec<f64>> = pre.iter().filter(|p| classify(&beem, &axis, &x, p).kind == CausalKind::Timelike).collect();
    let mut worst = 0.0_f64;
    for p in &timelike {
        let back = legendre(&beem, &x, p).unwrap();
        worst = worst.max(back.iter().zip(&omega).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let angles: Vec<f64> = timelike.iter().map(|p| p[1].atan2(p[0])).collect();
    let hit = |want: f64| angles.iter().any(|a| (a - want).abs() <= 1e-8);
    items.push(item(
        "beem_two_preimages",
        timelike.len() == 2 && hit(t1) && hit(PI - t1) && worst <= 1e-8,
        format!("angles {angles:?}, residual {worst:.1e}"),
    ));
    items
}

fn criterion_10() -> Vec<Item> {
    let mut items = Vec::new();
    for name in ["minkowski_spacetime", "flrw_raychaudhuri"] {
        let o = run_json(&std::fs::read_to_string(scenarios_dir().join(format!("{name}.json"))).unwrap());
        let c = check(&o, "raychaudhuri");
        let m = max_abs(c);
        items.push(item(name, c.passed() && m <= 1e-3, format!("|res| {m:.1e}")));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut riccati = 0.0_f64;
    let mut bad = Vec::new();
    for (nv, eps) in grid_25(3, Signature::Lorentzian, [-1.0, -2.0, 4.0, 6.0, f64::INFINITY]) {
        let text = format!(
            r#"{{"id": "w", "space": {{"zoo": "weighted_minkowski", "params": {{"n": 2, "lambda": 0.5}}}},
               "params": {{"N": {}, "eps": {eps}}},
               "bundle": {{"origin": [0, 0.1, 0], "directions": {{"random": {{"seed": 7, "count": 3}}}}, "horizon": 2}},
               "checks": ["raychaudhuri"]}}"#,
            n_json(nv)
        );
        let c = check(&run_json(&text), "raychaudhuri").clone();
        worst = worst.max(c.max_violation.0);
        riccati = (0..3).filter_map(|k| c.get(&format!("riccati_residual[{k}]"))).fold(riccati, f64::max);
        if !c.passed() {
            bad.push(format!("N={nv:?} eps={eps}"));
        }
    }
    items.push(item("weighted_minkowski_grid", bad.is_empty(), format!("max {worst:.1e} {bad:?}")));
    items.push(item("weighted_riccati", riccati <= 1e-4, format!("{riccati:.1e}")));
    items
}

fn criterion_11() -> Vec<Item> {
    let mut items = Vec::new();
    for (n, list) in [(2usize, "[2, 4, \"inf\", 0, 1]"), (3, "[3, 5, \"inf\", 0, 1]")] {
        let text = format!(
            r#"{{"id": "m", "space": {{"zoo": "gaussian_weighted_euclidean", "params": {{"n": {n}, "lambda": 1}}}},
               "params": {{"N": {n}}}, "checks": [{{"name": "monotonicity", "samples": 500, "n_list": {list}}}]}}"#
        );
        let o = run_json(&text);
        let c = check(&o, "monotonicity");
        let violations = c.residuals.iter().filter(|r| r.0 > 0.0).count();
        items.push(item(&format!("gaussian{n}"), c.passed() && c.residuals.len() == 500 && violations == 0, format!("{violations} violations")));
    }
    items
}

fn criterion_12() -> Vec<Item> {
    let start = Instant::now();
    let mut paths: Vec<_> = std::fs::read_dir(scenarios_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let mut differing = Vec::new();
    for p in &paths {
        let sc = load_scenario(p).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run(&sc, &RunOptions::default()).unwrap().json);
        let b = four.install(|| run(&sc, &RunOptions::default()).unwrap().json);
        let c = four.install(|| run(&sc, &RunOptions::default()).unwrap().json);
        if a != b || b != c {
            differing.push(sc.id.clone());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![
        item("byte_identical", differing.is_empty(), format!("{} scenarios x3, differing {differing:?}", paths.len())),
        // three passes above, so one pass is a third of the time
        item("wall_time", secs / 3.0 <= 600.0, format!("{:.1}s per pass", secs / 3.0)),
    ]
}

fn main() {
    let criteria: [(&str, fn() -> Vec<Item>); 12] = [
        ("structure validation", criterion_1),
        ("flatness and curvature oracles", criterion_2),
        ("matrix lemma", criterion_3),
        ("conjugate points", criterion_4),
        ("Bishop inequality", criterion_5),
        ("Bonnet-Myers", criterion_6),
        ("Laplacian comparison", criterion_7),
        ("Bishop-Gromov", criterion_8),
        ("Legendre suite", criterion_9),
        ("Raychaudhuri", criterion_10),
        ("monotonicity chain", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (i, (title, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        let started = Instant::now();
        let items = f();
        let failed: Vec<&Item> = items.iter().filter(|it| !it.ok).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {title} ({} items, {:.1}s)", items.len(), started.elapsed().as_secs_f64());
        for it in &items {
            let key = format!("{id}/{}", it.key);
            let known = UNATTAINABLE.iter().find(|(k, _)| *k == key);
            if !it.ok {
                match known {
                    Some((_, why)) => println!("    red  {key}: {} ({why})", it.detail),
                    None => {
                        println!("    FAIL {key}: {}", it.detail);
                        unexpected.push(key);
                    }
                }
            } else if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
                println!("    ok   {key}: {}", it.detail);
            }
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
