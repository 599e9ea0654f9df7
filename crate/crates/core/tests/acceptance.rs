//! Acceptance suite: one PASS/FAIL line per criterion.
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use apcones::cone::{make_exponent, ParabolaCone, SymmetricCone};
use apcones::experiment::{cmd_concentrate, cmd_verify_inequality, VerifyOptions};
use apcones::inequality::{
    dimension_reduction_check, equivalence_grid, q_direct_estimate, random_parabola_from, rng_for, Family, QCurve,
    QReport, ERROR_MULTIPLIER,
};
use apcones::quadrature::{wallis, RuleKind, RulePair};
use apcones::solver::{
    default_threshold, el_residual, green_identity_estimate, linf_distance_to_cone, minimize, transform_field,
    transformed_residual, BoundarySpec, Grid, GridField, SolverConfig,
};

type Outcome = (bool, String);

fn graded(d: usize, level: usize) -> RulePair {
    RulePair::new(d, level, RuleKind::Graded).expect("supported rule")
}

fn interior_cones(d: usize, seed: u64, count: u64) -> Vec<ParabolaCone> {
    (0..count)
        .map(|i| random_parabola_from(d, &mut rng_for(seed, i), Family::Interior).expect("valid cone"))
        .collect()
}

fn inequality_suite() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in 2..=4 {
        let mut fails = 0;
        let mut anomalies = 0;
        for (family, samples, seed) in [(Family::Interior, 1000, 11), (Family::Boundary, 200, 12)] {
            let report = cmd_verify_inequality(&VerifyOptions {
                dim: d,
                samples,
                level: 32,
                seed,
                family,
            })
            .expect("suite runs");
            fails += report.summary.fail_count;
            anomalies += report.summary.anomaly_count;
        }
        ok &= fails == 0 && anomalies == 0;
        parts.push(format!("d={d}: {fails} violations, {anomalies} anomalies"));
    }
    (ok, parts.join("; "))
}

fn equality_cases() -> Outcome {
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_radial: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    for d in 2..=5 {
        let pair = graded(d, if d == 5 { 8 } else { 16 });
        for k in 1..=d {
            let q = q_direct_estimate(&ParabolaCone::symmetric(d, k).expect("valid"), 1.0, &pair).expect("integrates");
            ok &= q.value.abs() <= ERROR_MULTIPLIER * q.error;
            worst_value = worst_value.max(q.value.abs());
            if q.error > 0.0 {
                worst_ratio = worst_ratio.max(q.value.abs() / q.error);
            }
            if k == d {
                ok &= q.value.abs() <= 1e-12;
                worst_radial = worst_radial.max(q.value.abs());
            }
        }
    }
    (
        ok,
        format!(
            "max |Q1| = {worst_value:.3e}, max |Q1|/quad_error = {worst_ratio:.3}, max |Q1(P_d)| = {worst_radial:.3e}"
        ),
    )
}

fn formula_equivalence() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for d in 2..=3 {
        let pair = graded(d, 16);
        for cone in interior_cones(d, 21, 100) {
            for t in equivalence_grid(cone.t_bar(), 33) {
                let r = QReport::compute(&cone, t, &pair).expect("t in range");
                ok &= r.agrees();
                if r.quad_error > 0.0 {
                    worst = worst.max((r.q_direct - r.q_expanded).abs() / r.quad_error);
                }
                checked += 1;
            }
        }
    }
    (ok, format!("{checked} evaluations, max |difference|/quad_error = {worst:.3}"))
}

fn concavity() -> Outcome {
    let mut ok = true;
    let mut worst_sign: f64 = f64::NEG_INFINITY;
    let mut worst_match: f64 = 0.0;
    for d in 2..=3 {
        let pair = graded(d, 16);
        for cone in interior_cones(d, 31, 100) {
            let curve = QCurve::compute(&cone, &pair, 33).expect("curve");
            ok &= curve.is_concave() && curve.curvature_matches();
            for p in &curve.points {
                worst_sign = worst_sign.max(p.q_dd_formula.value / (ERROR_MULTIPLIER * p.q_dd_formula.error).max(1e-300));
            }
            let end = curve.t_bar.finite().unwrap_or(4.0);
            for p in curve.points.iter().filter(|p| p.t / end >= 0.05 && p.t / end <= 0.95) {
                let f = p.q_dd_formula.value;
                worst_match = worst_match.max((f - p.q_dd_finite_diff).abs() / f.abs().max(1.0));
            }
        }
    }
    (
        ok,
        format!("max q''/(10 quad_error) = {worst_sign:.3e}, max mixed mismatch = {worst_match:.3e}"),
    )
}

fn dimension_reduction() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in 2..=4 {
        let pair_d = graded(d, 16);
        let pair_dm1 = graded(d - 1, 16);
        let bases = if d == 2 {
            vec![ParabolaCone::symmetric(1, 1).expect("valid")]
        } else {
            interior_cones(d - 1, 41 + d as u64, 20)
        };
        let mut measured = Vec::new();
        let mut predicted = 0.0;
        for base in &bases {
            let r = dimension_reduction_check(base, &pair_d, &pair_dm1).expect("integrates");
            predicted = r.alpha_predicted;
            match r.alpha_measured {
                Some(a) => measured.push(a),
                None => {
                    // both sides vanish: the lifted integral must vanish too
                    ok &= r.lifted.value.abs() <= ERROR_MULTIPLIER * r.lifted.error.max(1e-15);
                }
            }
        }
        if d == 2 {
            ok &= measured.is_empty();
            parts.push(format!("d=2: both sides vanish, predicted {predicted:.6}"));
            continue;
        }
        ok &= measured.len() == bases.len();
        let lo = measured.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = measured.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = (hi - lo) / predicted;
        let offset = measured.iter().map(|a| (a - predicted).abs() / predicted).fold(0.0, f64::max);
        ok &= spread <= 1e-4 && offset <= 1e-4;
        parts.push(format!(
            "d={d}: predicted {predicted:.8}, spread {spread:.2e}, max offset {offset:.2e}"
        ));
    }
    (ok, parts.join("; "))
}

fn wallis_recursion() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in 2..=12 {
        let rhs = (m as f64 - 1.0) / m as f64 * wallis(m - 2).expect("m >= 0");
        worst = worst.max((wallis(m).expect("m >= 0") - rhs).abs() / rhs);
    }
    let w0 = (wallis(0).expect("m = 0") - PI).abs();
    let w2 = (wallis(2).expect("m = 2") - PI / 2.0).abs();
    (
        worst <= 1e-14 && w0 <= 1e-15 && w2 <= 1e-15,
        format!("max relative defect {worst:.2e}, |W_0 - pi| = {w0:.1e}, |W_2 - pi/2| = {w2:.1e}"),
    )
}

fn solver_recovery() -> Outcome {
    let one = make_exponent(1.0).expect("valid");
    let grid = Grid::new(2, 201).expect("grid");
    let radial = BoundarySpec::Symmetric(2).resolve(2).expect("valid");
    let sol = minimize(&grid, |x| radial.data(&one, x), &SolverConfig::new(one)).expect("solves");
    let k2 = SymmetricCone::standard(2, 2).expect("valid");
    let err_a = linf_distance_to_cone(&sol.field, &k2).expect("dims");
    let res_a = el_residual(&sol.field, &one, default_threshold(grid.h()));
    let ok_a = sol.diagnostics.converged && err_a <= 1e-8 && res_a <= 1e-8;

    let exp = make_exponent(0.9).expect("valid");
    let flat = BoundarySpec::Flat(vec![]).resolve(1).expect("valid");
    let cone = flat.flat_cone(&exp).expect("flat data");
    let mut errors = Vec::new();
    for n in [101, 201, 401] {
        let g = Grid::new(1, n).expect("grid");
        let s = minimize(&g, |x| flat.data(&exp, x), &SolverConfig::new(exp)).expect("solves");
        errors.push((g.h(), linf_distance_to_cone(&s.field, &cone).expect("dims")));
    }
    let orders: Vec<f64> = errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect();
    let ok_b = errors.windows(2).all(|w| w[1].1 < w[0].1) && orders.iter().all(|&p| p >= 1.0);
    (
        ok_a && ok_b,
        format!(
            "(a) error {err_a:.2e}, el_residual {res_a:.2e}; (b) errors {:.2e}, {:.2e}, {:.2e}, orders {:.2}, {:.2}",
            errors[0].1, errors[1].1, errors[2].1, orders[0], orders[1]
        ),
    )
}

fn transformed_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for gamma in [0.6, 0.8, 1.2, 1.4] {
        let exp = make_exponent(gamma).expect("valid");
        for (d, n) in [(1, 401), (2, 201)] {
            let grid = Grid::new(d, n).expect("grid");
            let v = GridField::sample(grid.clone(), |x| exp.c_gamma() * x[0].max(0.0).powf(exp.beta())).expect("sample");
            let u = transform_field(&v, &exp);
            worst = worst.max(transformed_residual(&u, &exp, default_threshold(grid.h())));
        }
    }
    (worst <= 1e-10, format!("max residual {worst:.2e}"))
}

fn green_identity() -> Outcome {
    let pair = RulePair::new(2, 64, RuleKind::Uniform).expect("rule");
    let grid = Grid::new(2, 201).expect("grid");
    let h = grid.h();
    let mut ok = true;
    let mut parts = Vec::new();
    for (gamma, spec, vanishing) in [
        (0.9, "parabola:0.75,0.25", false),
        (1.1, "parabola:0.75,0.25", false),
        (1.1, "parabola:0.52,0.48", true),
    ] {
        let exp = make_exponent(gamma).expect("valid");
        let boundary = spec.parse::<BoundarySpec>().expect("spec").resolve(2).expect("valid");
        let sol = minimize(&grid, |x| boundary.data(&exp, x), &SolverConfig::new(exp)).expect("solves");
        let u = transform_field(&sol.field, &exp);
        let id = green_identity_estimate(&u, &boundary.reference_parabola(), &exp, &pair).expect("identity");
        let bound = 5.0 * (h + id.quad_error());
        let measured = if vanishing { id.lhs.value.abs() } else { id.gap() };
        ok &= sol.diagnostics.converged && measured <= bound;
        parts.push(format!(
            "gamma={gamma} {spec}: lhs {:.3e}, rhs {:.3e}, {} {measured:.3e} <= {bound:.3e}",
            id.lhs.value,
            id.rhs.value,
            if vanishing { "|lhs|" } else { "gap" }
        ));
    }
    (ok, parts.join("; "))
}

fn concentration() -> Outcome {
    let boundary: BoundarySpec = "parabola:0.75,0.25".parse().expect("spec");
    let mut ok = true;
    let mut parts = Vec::new();
    for gammas in [[0.7, 0.85, 0.95], [1.3, 1.15, 1.05]] {
        let report = cmd_concentrate(2, &gammas, 201, &boundary).expect("runs");
        ok &= report.summary.fail_count == 0 && !report.unconverged && report.summary.pass_count == 1;
        for c in &report.checks {
            parts.push(c.detail.clone());
        }
    }
    (ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_apcones");
    let run = || {
        Command::new(bin)
            .args(["verify-inequality", "--dim", "3", "--samples", "100", "--seed", "7"])
            .output()
            .expect("binary runs")
    };
    let a = run();
    let b = run();
    let same = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    (same, format!("{} bytes, identical = {}", a.stdout.len(), a.stdout == b.stdout))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("inequality suite", inequality_suite),
        ("equality cases", equality_cases),
        ("formula equivalence", formula_equivalence),
        ("concavity", concavity),
        ("dimension reduction", dimension_reduction),
        ("wallis recursion", wallis_recursion),
        ("solver recovery", solver_recovery),
        ("transformed equation", transformed_identity),
        ("green identity", green_identity),
        ("concentration", concentration),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        if !ok {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
