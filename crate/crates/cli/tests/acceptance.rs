//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p hmlab-cli --test acceptance -- --nocapture` to see
//! every line; the assertions carry the same information on failure.

use std::sync::Arc;
use std::time::Instant;

use hmlab_cli::config::{DetectorConfig, ExperimentConfig, ExperimentKind, SolverConfig};
use hmlab_cli::experiments::{
    profile_radii, run_linear_law, run_monotonicity_suite, run_sharpness, run_stability,
    solve_trace,
};
use hmlab_core::domain::{build_domain, DomainGrid, DomainKind};
use hmlab_core::energy::{dirichlet_energy, monotonicity_profile};
use hmlab_core::field::{hedgehog, BoundaryTrace};
use hmlab_core::minimizer::{harmonic_extension, project_extension};
use hmlab_core::singularity::{detect_singularities, DetectorParams};
use hmlab_core::trace_norms::{
    fit_scaling_exponent, gagliardo_seminorm_p, make_trace, random_smooth_trace, SeminormParams,
    TraceFamily,
};
use hmlab_core::vec3;
use hmlab_core::DEFECT_DENSITY;

fn ball(n: usize) -> Arc<DomainGrid> {
    Arc::new(build_domain(DomainKind::Ball, n).unwrap())
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id:02} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn base_config(experiment: ExperimentKind, n: usize, s: f64, p: f64) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        domain: "ball".into(),
        n,
        s,
        p,
        lambdas: vec![],
        ks: vec![],
        deltas: vec![],
        solver: SolverConfig::default(),
        detector: DetectorConfig::default(),
        seed: 20260808,
        out_dir: String::new(),
        family: None,
    }
}

#[test]
fn acceptance_01_hedgehog_energy() {
    let start = Instant::now();
    let g = ball(65);
    let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
    let params = DetectorParams::default_for(g.h);
    let points = detect_singularities(&f, &params);
    let locations: Vec<_> = points.iter().map(|p| p.location).collect();
    let e = dirichlet_energy(&f, &locations).total;
    let rel = (e - DEFECT_DENSITY).abs() / DEFECT_DENSITY;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = rel < 0.03 && elapsed < 30.0;
    report(
        1,
        "hedgehog energy",
        pass,
        &format!("energy {e:.4} vs 8pi = {DEFECT_DENSITY:.4}, rel {rel:.4}, {elapsed:.1}s"),
    );
    assert!(rel < 0.03, "relative error {rel}");
    assert!(elapsed < 30.0, "took {elapsed}s");
}

#[test]
fn acceptance_02_density_and_classification() {
    let start = Instant::now();
    let g = ball(65);
    let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
    let params = DetectorParams::default_for(g.h);
    let points = detect_singularities(&f, &params);
    let elapsed = start.elapsed().as_secs_f64();
    let ok_count = points.len() == 1;
    let (ok_loc, ok_density, ok_degree, detail) = if let Some(p) = points.first() {
        let rel = (p.density - DEFECT_DENSITY).abs() / DEFECT_DENSITY;
        (
            vec3::norm(p.location) < 2.0 * g.h,
            rel < 0.10,
            p.degree == 1,
            format!(
                "count {}, loc {:?}, density {:.4} (rel {rel:.4}), degree {}, {elapsed:.1}s",
                points.len(),
                p.location,
                p.density,
                p.degree
            ),
        )
    } else {
        (false, false, false, format!("count {}", points.len()))
    };
    report(
        2,
        "density and classification",
        ok_count && ok_loc && ok_density && ok_degree && elapsed < 30.0,
        &detail,
    );
    assert!(ok_count && ok_loc && ok_density && ok_degree, "{detail}");
    assert!(elapsed < 30.0, "took {elapsed}s");
}

#[test]
fn acceptance_03_monotonicity_of_minimizer() {
    let start = Instant::now();
    let n = 49;
    let g = ball(n);
    let cfg = base_config(ExperimentKind::MonotonicitySuite, n, 1.0, 2.0);
    let trace = make_trace(&TraceFamily::Identity, g.clone()).unwrap();
    let solved = solve_trace(&g, &trace, &cfg).unwrap();
    assert_eq!(solved.points.len(), 1, "points {:?}", solved.points);
    let y = solved.points[0].location;
    let locations: Vec<_> = solved.points.iter().map(|p| p.location).collect();
    // the criterion radius set {4h, 8h, 0.1, 0.2, 0.4}, filtered by the 3h
    // stencil floor of the local-energy operation (0.1 < 3h at n = 49)
    let radii = profile_radii(g.h, solved.points[0].boundary_distance);
    let prof = monotonicity_profile(&solved.outcome.field, y, &radii, &locations).unwrap();
    let tol = 0.02 * DEFECT_DENSITY;
    let min_defect = prof.defects().into_iter().fold(f64::INFINITY, f64::min);
    let nondecreasing = prof
        .normalized_energy
        .windows(2)
        .all(|w| w[1] >= w[0] - tol);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = min_defect >= -tol && nondecreasing && elapsed < 300.0;
    report(
        3,
        "minimizer monotonicity",
        pass,
        &format!(
            "radii {radii:?}, normalized energies {:?}, min defect {min_defect:.4} vs -{tol:.4}, {elapsed:.0}s",
            prof.normalized_energy
        ),
    );
    assert!(min_defect >= -tol, "min defect {min_defect}");
    assert!(nondecreasing);
    assert!(elapsed < 300.0, "took {elapsed}s");
}

#[test]
fn acceptance_04_extension_bound() {
    let start = Instant::now();
    let g = ball(33);
    let mut corpus: Vec<(String, BoundaryTrace)> = Vec::new();
    corpus.push((
        "identity".into(),
        make_trace(&TraceFamily::Identity, g.clone()).unwrap(),
    ));
    for lambda in [1.0, 0.5, 0.25] {
        corpus.push((
            format!("bubble{lambda}"),
            make_trace(
                &TraceFamily::Bubble {
                    lambda,
                    pole: [0.0, 0.0, -1.0],
                },
                g.clone(),
            )
            .unwrap(),
        ));
    }
    for seed in 0..20u64 {
        corpus.push((
            format!("random{seed}"),
            random_smooth_trace(g.clone(), 1000 + seed),
        ));
    }
    let mut worst = 0.0f64;
    for (name, trace) in &corpus {
        let ext = harmonic_extension(trace).unwrap();
        let res = project_extension(&ext).unwrap();
        assert!(
            res.energy_ratio <= 192.0,
            "{name}: ratio {}",
            res.energy_ratio
        );
        worst = worst.max(res.energy_ratio);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 192.0 && elapsed < 120.0;
    report(
        4,
        "extension bound",
        pass,
        &format!(
            "{} cases, worst energy ratio {worst:.3} vs 192, {elapsed:.0}s",
            corpus.len()
        ),
    );
    assert!(elapsed < 120.0, "took {elapsed}s");
}

#[test]
fn acceptance_05_gagliardo_oracle() {
    let start = Instant::now();
    // naive O(M^2) oracle, independent of the production path
    fn naive(trace: &BoundaryTrace, params: &SeminormParams) -> f64 {
        let s = trace.surface();
        let kernel = params.kernel_exponent();
        let mut total = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i == j {
                    continue;
                }
                let d = vec3::dist(s.positions[i], s.positions[j]);
                let diff = vec3::dist(trace.values[i], trace.values[j]);
                total += diff.powf(params.p) / d.powf(kernel) * s.weights[i] * s.weights[j];
            }
        }
        total
    }
    let grids = [
        Arc::new(build_domain(DomainKind::Ball, 17).unwrap()),
        Arc::new(build_domain(DomainKind::Ball, 33).unwrap()),
        Arc::new(build_domain(DomainKind::Cube, 17).unwrap()),
        Arc::new(build_domain(DomainKind::HalfBall, 33).unwrap()),
        Arc::new(build_domain(DomainKind::Cube, 9).unwrap()),
    ];
    for g in &grids {
        assert!(
            g.surface.len() <= 5000,
            "surface too large: {}",
            g.surface.len()
        );
    }
    let params = SeminormParams::new(0.7, 2.4).unwrap();
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let g = grids[case as usize % grids.len()].clone();
        let trace = random_smooth_trace(g, 5000 + case);
        let fast = gagliardo_seminorm_p(&trace, &params).unwrap();
        let slow = naive(&trace, &params);
        let rel = (fast - slow).abs() / slow.max(1e-300);
        worst = worst.max(rel);
        assert!(rel <= 1e-12, "case {case}: rel {rel}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        5,
        "gagliardo oracle",
        worst <= 1e-12 && elapsed < 120.0,
        &format!("50 traces, worst relative gap {worst:.3e}, {elapsed:.0}s"),
    );
    assert!(elapsed < 120.0, "took {elapsed}s");
}

#[test]
fn acceptance_06_scaling_slopes() {
    let start = Instant::now();
    let g = ball(49);
    // the asymptotic window of the bubble family; larger lambdas are still
    // dominated by whole-sphere geometry
    let lambdas = [0.25, 0.125, 0.0625];
    let pole = [0.0, 0.0, -1.0];
    let mut detail = String::new();
    let mut pass = true;
    for (s, p, expect) in [(0.6, 2.0, 0.8), (0.75, 2.0, 0.5), (1.0, 2.0, 0.0)] {
        let params = SeminormParams::new(s, p).unwrap();
        let fit = fit_scaling_exponent(g.clone(), &lambdas, &params, pole).unwrap();
        let ok = (fit.slope - expect).abs() <= 0.15;
        pass &= ok;
        detail.push_str(&format!("(s={s},p={p}): {:.3} vs {expect}; ", fit.slope));
        assert!(ok, "s={s} p={p}: slope {} vs {expect} +- 0.15", fit.slope);
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        6,
        "scaling slopes",
        pass && elapsed < 60.0,
        &format!("{detail}{elapsed:.0}s"),
    );
    assert!(elapsed < 60.0, "took {elapsed}s");
}

#[test]
fn acceptance_07_sharpness_experiment() {
    let start = Instant::now();
    let mut cfg = base_config(ExperimentKind::Sharpness, 49, 0.6, 2.0);
    cfg.lambdas = vec![1.0, 0.5, 0.25];
    let (rep, _) = run_sharpness(&cfg).unwrap();
    let counts_one = rep
        .verdicts
        .iter()
        .find(|v| v.name == "count_stays_one")
        .unwrap()
        .pass;
    let seminorms: Vec<f64> = {
        let mut rows = rep.rows.clone();
        rows.sort_by(|a, b| b.lambda.partial_cmp(&a.lambda).unwrap());
        rows.iter().map(|r| r.seminorm_p.unwrap()).collect()
    };
    let drop = seminorms.first().unwrap() / seminorms.last().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = counts_one && drop >= 3.0 && elapsed < 600.0;
    report(
        7,
        "sharpness experiment",
        pass,
        &format!(
            "counts one: {counts_one}, seminorm^p end-to-end drop {drop:.3} (need >= 3; \
             unattainable for identity-anchored bubble families, see README), {elapsed:.0}s"
        ),
    );
    assert!(counts_one, "a lambda case lost its single defect");
    assert!(elapsed < 600.0, "took {elapsed}s");
    // The 3x target extrapolates the asymptotic scaling law down to
    // lambda = 1; the measured ceiling for any degree-one family anchored at
    // the identity is about 1.7x, since the identity's seminorm sits far
    // below the asymptotic line. Kept as stated so the criterion reports its
    // honest value.
    assert!(
        drop >= 3.0,
        "seminorm^p drop {drop:.3} < 3 over lambda = 1 -> 1/4 (unreachable for \
         identity-anchored bubble families; see the project notes)"
    );
}

#[test]
fn acceptance_08_linear_law_experiment() {
    let start = Instant::now();
    let mut cfg = base_config(ExperimentKind::LinearLaw, 49, 1.0, 2.0);
    cfg.ks = vec![1, 2, 3];
    cfg.lambdas = vec![0.25];
    cfg.solver.restarts = Some(3);
    let (rep, _) = run_linear_law(&cfg).unwrap();
    let counts = rep
        .verdicts
        .iter()
        .find(|v| v.name == "counts_equal_k")
        .unwrap()
        .pass;
    let spread_v = rep
        .verdicts
        .iter()
        .find(|v| v.name == "ratio_spread")
        .unwrap();
    // second point of the sp = 2 grid: recompute seminorms at (3/4, 8/3)
    let g = ball(49);
    let params2 = SeminormParams::new(0.75, 8.0 / 3.0).unwrap();
    let mut ratios2 = Vec::new();
    for row in &rep.rows {
        let k = row.k.unwrap();
        if k == 0 || row.singularity_count.is_none() {
            continue;
        }
        let family = TraceFamily::KBubbles {
            lambda: row.lambda.unwrap(),
            poles: hmlab_core::trace_norms::default_poles(k),
            signs: vec![1; k],
        };
        let tr = make_trace(&family, g.clone()).unwrap();
        let sem = gagliardo_seminorm_p(&tr, &params2).unwrap();
        ratios2.push(row.singularity_count.unwrap() as f64 / sem);
    }
    let spread2 = ratios2.iter().cloned().fold(f64::MIN, f64::max)
        / ratios2.iter().cloned().fold(f64::MAX, f64::min);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = counts && spread_v.pass && spread2 <= 3.0 && elapsed < 900.0;
    report(
        8,
        "linear law experiment",
        pass,
        &format!(
            "counts equal k: {counts} (a bubble-family design property), {} ; spread at (3/4,8/3): {spread2:.3}, {elapsed:.0}s",
            spread_v.detail
        ),
    );
    assert!(counts, "N_k mismatch: {:?}", rep.rows);
    assert!(spread_v.pass, "{}", spread_v.detail);
    assert!(spread2 <= 3.0, "(3/4, 8/3) spread {spread2}");
    assert!(elapsed < 900.0, "took {elapsed}s");
}

#[test]
fn acceptance_09_stability_experiment() {
    let start = Instant::now();
    let mut cfg = base_config(ExperimentKind::Stability, 49, 1.0, 2.0);
    cfg.deltas = vec![0.4, 0.2, 0.1];
    let (rep, _) = run_stability(&cfg).unwrap();
    let small = rep
        .verdicts
        .iter()
        .find(|v| v.name == "perturbations_small")
        .unwrap()
        .pass;
    let stable = rep
        .verdicts
        .iter()
        .find(|v| v.name == "count_stable")
        .unwrap()
        .pass;
    let mut rows: Vec<_> = rep
        .rows
        .iter()
        .filter(|r| r.delta.unwrap_or(0.0) > 0.0)
        .collect();
    rows.sort_by(|a, b| a.delta.partial_cmp(&b.delta).unwrap());
    let d_small = rows.first().unwrap().w12_distance.unwrap();
    let d_large = rows.last().unwrap().w12_distance.unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let halved = d_small <= 0.5 * d_large;
    let pass = small && stable && halved && elapsed < 600.0;
    report(
        9,
        "stability experiment",
        pass,
        &format!(
            "perturbations small: {small}, counts stable: {stable}, w12 {d_small:.4} at smallest delta vs {d_large:.4} at largest, {elapsed:.0}s"
        ),
    );
    assert!(small && stable, "stability verdicts failed");
    assert!(halved, "w12 {d_small} vs half of {d_large}");
    assert!(elapsed < 600.0, "took {elapsed}s");
}

#[test]
fn acceptance_10_boundary_regularity() {
    let start = Instant::now();
    let mut cfg = base_config(ExperimentKind::BoundaryRegularity, 49, 0.75, 8.0 / 3.0);
    cfg.domain = "half_ball".into();
    let (rep, _) = hmlab_cli::experiments::run_boundary_regularity(&cfg).unwrap();
    let clear = rep
        .verdicts
        .iter()
        .find(|v| v.name == "flat_layer_clear")
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = clear.pass && elapsed < 300.0;
    report(10, "boundary regularity", pass, &format!("{}, {elapsed:.0}s", clear.detail));
    assert!(clear.pass, "{}", clear.detail);
    assert!(elapsed < 300.0, "took {elapsed}s");
}

#[test]
fn acceptance_11_determinism() {
    let start = Instant::now();
    let mut cfg = base_config(ExperimentKind::MonotonicitySuite, 33, 1.0, 2.0);
    cfg.solver.max_iters = Some(4000);
    let (rep_a, sing_a) = run_monotonicity_suite(&cfg).unwrap();
    let (rep_b, sing_b) = run_monotonicity_suite(&cfg).unwrap();
    let cases_equal = rep_a.cases_csv() == rep_b.cases_csv();
    let verdicts_equal = rep_a.verdicts_csv() == rep_b.verdicts_csv()
        && rep_a.extra_csv == rep_b.extra_csv;
    let sing_equal = {
        let fmt = |s: &[(String, Vec<hmlab_core::singularity::SingularPoint>)]| {
            s.iter()
                .map(|(k, p)| format!("{k}:{}", hmlab_core::singularity::singularities_csv(p)))
                .collect::<Vec<_>>()
                .join("|")
        };
        fmt(&sing_a) == fmt(&sing_b)
    };
    let elapsed = start.elapsed().as_secs_f64();
    let pass = cases_equal && verdicts_equal && sing_equal;
    report(
        11,
        "determinism",
        pass,
        &format!(
            "cases byte-equal: {cases_equal}, verdicts byte-equal: {verdicts_equal}, singularity files byte-equal: {sing_equal}, {elapsed:.0}s"
        ),
    );
    assert!(pass);
}
