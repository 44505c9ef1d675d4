//! Acceptance battery: one test per criterion, each printing a single
//! pass/fail line (visible with --nocapture; the harness line carries the
//! same verdict). Oracles are closed forms derived independently of the
//! solver path under test.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use homog::cell::{
    effective_operator_table, effective_potential, solve_cell, verify_hat_a_properties,
    EffectivePotential, EffectiveTable,
};
use homog::dirichlet::{convergence_study, solve_eps_problem, ConvergenceReport};
use homog::nfunction::{
    check_delta2, check_m3_cube_condition, check_m4_log_holder, delta0, radial_reduction_check,
    NFunction, SampleSpec,
};
use homog::operator::{make_operator, MonotoneOperator};
use homog::pgrid::{integrate_box, BoxField, BoxGrid, PeriodicGrid, Vector};
use homog::scalar::ScalarNFunction;
use homog::spatial::SpatialFn;
use homog::tabulated::{
    biconjugate, conjugate, ConjugateSource, GridSpec, TabulatedConvexFunction,
};
use homog::twoscale::{
    corrector_diagnostic, decomposition_identity_check, integrate_unfolded, unfold,
    CorrectorReport,
};

fn report(criterion: usize, desc: &str) {
    // write to the stdout file descriptor directly so the verdict line is
    // visible even under the harness's per-test output capture
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion}: pass - {desc}").unwrap();
}

fn step(lo: f64, hi: f64) -> SpatialFn {
    SpatialFn::Step { lo, hi, split: 0.5 }
}

fn linear_op() -> MonotoneOperator {
    make_operator("linear", None, Some(step(1.0, 3.0)), None).unwrap()
}

#[test]
fn criterion_01_effective_coefficient_linear_oracle() {
    // harmonic mean of {1, 3} is 1.5
    let op = linear_op();
    let grid = PeriodicGrid::new(1, 1024);
    for xi in [-2.0, -1.0, 1.0, 2.0] {
        let start = Instant::now();
        let sol = solve_cell(&op, [xi, 0.0], &grid, 1e-10).unwrap();
        let elapsed = start.elapsed();
        let want = 1.5 * xi;
        assert!(
            (sol.hat_a[0] - want).abs() <= 1e-6 * want.abs(),
            "xi={xi}: {} vs {want}",
            sol.hat_a[0]
        );
        assert!(elapsed < Duration::from_secs(1), "xi={xi} took {elapsed:?}");
    }
    report(1, "linear 1D hat A = 1.5 xi within 1e-6 at K = 1024, < 1 s per xi");
}

#[test]
fn criterion_02_effective_coefficient_p3_oracle() {
    // constant-flux closed form for p = 3, a in {1, 8}
    let op = make_operator("p-weighted", Some(3.0), Some(step(1.0, 8.0)), None).unwrap();
    let grid = PeriodicGrid::new(1, 2048);
    let start = Instant::now();
    let sol = solve_cell(&op, [1.0, 0.0], &grid, 1e-10).unwrap();
    let elapsed = start.elapsed();
    let want = (0.5 + 0.5 / 8.0_f64.sqrt()).powi(-2);
    assert!((want - 2.183278).abs() < 1e-5, "oracle arithmetic");
    assert!(
        (sol.hat_a[0] - want).abs() <= 1e-3 * want,
        "{} vs {want}",
        sol.hat_a[0]
    );
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
    report(2, "p = 3 hat A(1) = 2.18328 within 1e-3 at K = 2048, < 5 s");
}

#[test]
fn criterion_03_conjugation_suite() {
    // power-family closed forms: (t^p/p)* = s^q/q with 1/p + 1/q = 1
    for p in [2.0, 4.0, 1.5] {
        let m = ScalarNFunction::power(p);
        let q = p / (p - 1.0);
        let spec = GridSpec::new(4.0, 96);
        let dual_radius = 0.9 * 4.0_f64.powf(p - 1.0);
        let dual = GridSpec::new(dual_radius, 48).nonnegative();
        let conj = conjugate(&ConjugateSource::Scalar(&m, spec), vec![dual.clone()]).unwrap();
        for (s, v) in dual.iter().zip(conj.values()) {
            let want = s.abs().powf(q) / q;
            assert!(
                (v - want).abs() <= 1e-6 * (1.0 + want),
                "p={p} s={s}: {v} vs {want}"
            );
        }
        // Fenchel-Young over the full product lattice
        for t in spec.uniform_symmetric() {
            for (s, v) in dual.iter().zip(conj.values()) {
                assert!(m.eval(t.abs()) + v - t * s >= -1e-6, "t={t} s={s}");
            }
        }
    }
    // exponential family: (e^t - t - 1)* = (1+s) ln(1+s) - s
    let m = ScalarNFunction::exp_type();
    let spec = GridSpec::new(5.0, 80);
    let dual = GridSpec::new(0.9 * (5.0_f64.exp() - 1.0), 40).nonnegative();
    let conj = conjugate(&ConjugateSource::Scalar(&m, spec), vec![dual.clone()]).unwrap();
    for (s, v) in dual.iter().zip(conj.values()) {
        let a = s.abs();
        let want = (1.0 + a) * (1.0 + a).ln() - a;
        assert!((v - want).abs() <= 1e-6 * (1.0 + want), "s={s}: {v} vs {want}");
    }
    // biconjugation fixes convex tables
    let axis = GridSpec::new(3.0, 24).uniform_symmetric();
    let vals: Vec<f64> = axis.iter().map(|t| 0.5 * t * t + t.abs()).collect();
    let tab = TabulatedConvexFunction::new(vec![axis.clone()], vals.clone());
    let bi = biconjugate(&tab).unwrap();
    for (t, v) in axis.iter().zip(&vals) {
        assert!((bi.eval(&[*t]).unwrap() - v).abs() <= 1e-6, "t={t}");
    }
    report(3, "power/exp conjugates match closed forms; biconjugate fixes convex tables; Fenchel-Young >= -1e-6");
}

fn quadratic_gauge_13() -> NFunction {
    NFunction::Radial { weight: step(1.0, 3.0), base: ScalarNFunction::power(2.0) }
}

#[test]
fn criterion_04_effective_potential_properties() {
    // sandwich, f(0) = 0, midpoint convexity for a genuinely varying gauge
    let m = NFunction::WeightedSum {
        terms: vec![(
            SpatialFn::Cos { base: 2.0, amp: 1.0 },
            ScalarNFunction::power(2.0),
        )],
    };
    let grid = PeriodicGrid::new(1, 64);
    let axis = GridSpec::new(2.0, 8).uniform_symmetric();
    let op = MonotoneOperator::GradientOfGauge { m: m.clone() };
    let table = effective_operator_table(&op, vec![axis.clone()], &grid, 1e-11);
    assert!(table.failures.is_empty());
    let (m1, m2) = (m.m1(), m.m2());
    for (i, &xi) in axis.iter().enumerate() {
        let f = table.f_vals[i];
        assert!(m1.eval(xi.abs()) - 1e-9 <= f, "xi={xi}: below m1");
        assert!(f <= m2.eval(xi.abs()) + 1e-9, "xi={xi}: above m2");
    }
    assert!(table.f_vals[axis.len() / 2].abs() < 1e-12, "f(0) = 0");
    for i in 0..axis.len() - 2 {
        assert!(table.f_vals[i + 1] <= 0.5 * (table.f_vals[i] + table.f_vals[i + 2]) + 1e-10);
    }
    // spatially constant M: the corrector vanishes and f = M at every node
    let mc = NFunction::Constant { base: ScalarNFunction::power(2.0) };
    let opc = MonotoneOperator::GradientOfGauge { m: mc.clone() };
    let tc = effective_operator_table(&opc, vec![axis.clone()], &grid, 1e-11);
    for (i, &xi) in axis.iter().enumerate() {
        assert!(
            (tc.f_vals[i] - mc.eval(&[0.0, 0.0], &[xi, 0.0])).abs() <= 1e-8,
            "xi={xi}"
        );
    }
    report(4, "f sandwiched by m1/m2, vanishes at 0, midpoint-convex; constant M reproduced within 1e-8");
}

fn quadratic_potential() -> (EffectiveTable, EffectivePotential) {
    let m = quadratic_gauge_13();
    let grid = PeriodicGrid::new(1, 128);
    // dual spacing = 1.5x primal spacing: transform maximizers land on
    // lattice nodes, making route (i) exact for the quadratic family
    let axis = GridSpec::new(2.0, 16).uniform_symmetric();
    let dual = GridSpec::new(2.25, 12).uniform_symmetric();
    let pot = effective_potential(&m, vec![axis.clone()], vec![dual], &grid, 1e-11, 1e-4).unwrap();
    let op = MonotoneOperator::GradientOfGauge { m };
    let table = effective_operator_table(&op, vec![axis], &grid, 1e-11);
    (table, pot)
}

#[test]
fn criterion_05_f_star_cross_check() {
    let (_, pot) = quadratic_potential();
    assert!(pot.cross_checks.len() >= 11, "{} eta samples", pot.cross_checks.len());
    for (eta, route_i, route_ii) in &pot.cross_checks {
        let scale = route_i.abs().max(route_ii.abs()).max(1e-12);
        assert!(
            (route_i - route_ii).abs() <= 1e-4 * scale,
            "eta={eta:?}: {route_i} vs {route_ii}"
        );
    }
    assert!(pot.flagged.is_empty());
    // quadratic oracle: f*(eta) = eta^2 / 3 for the {1, 3} family
    for (k, &eta) in pot.f_star.axes()[0].iter().enumerate() {
        let want = eta * eta / 3.0;
        assert!(
            (pot.f_star.values()[k] - want).abs() <= 1e-6 * (1.0 + want),
            "eta={eta}: {} vs {want}",
            pot.f_star.values()[k]
        );
    }
    report(5, "f* routes agree within 1e-4 at 11+ eta; quadratic f* = eta^2/3 within 1e-6");
}

#[test]
fn criterion_06_effective_operator_battery() {
    // quadratic family: fitted coercivity constant is exactly 1
    let grid = PeriodicGrid::new(1, 64);
    let op = linear_op();
    let coarse_axis = GridSpec::new(2.0, 8).uniform_symmetric();
    let fine_axis = GridSpec::new(2.0, 16).uniform_symmetric();
    let coarse = effective_operator_table(&op, vec![coarse_axis], &grid, 1e-11);
    let fine = effective_operator_table(&op, vec![fine_axis], &grid, 1e-11);
    let m = quadratic_gauge_13();
    let f_axis = GridSpec::new(2.5, 20).uniform_symmetric();
    let dual = GridSpec::new(3.1875, 17).uniform_symmetric();
    let pot = effective_potential(&m, vec![f_axis], vec![dual], &grid, 1e-11, 1e-4).unwrap();
    let rep = verify_hat_a_properties(&coarse, &fine, &pot).unwrap();
    assert!(rep.fitted_c >= 0.5, "quadratic fitted c = {}", rep.fitted_c);
    assert!((rep.fitted_c - 1.0).abs() < 0.05, "analytic value 1: {}", rep.fitted_c);
    assert!(rep.monotonicity_min > 0.0);
    assert!((1.7..=2.5).contains(&rep.jump_ratio), "{}", rep.jump_ratio);

    // p = 3 family: positive, refinement-stable fitted constant
    let op3 = make_operator("p-weighted", Some(3.0), Some(step(1.0, 8.0)), None).unwrap();
    let grid3 = PeriodicGrid::new(1, 128);
    let coarse3 =
        effective_operator_table(&op3, vec![GridSpec::new(2.0, 10).uniform_symmetric()], &grid3, 1e-10);
    let fine3 =
        effective_operator_table(&op3, vec![GridSpec::new(2.0, 20).uniform_symmetric()], &grid3, 1e-10);
    let m3 = op3.gauge();
    let pot3 = effective_potential(
        &m3,
        vec![GridSpec::new(2.5, 20).uniform_symmetric()],
        vec![GridSpec::new(9.0, 36).uniform_symmetric()],
        &grid3,
        1e-10,
        1e-2,
    )
    .unwrap();
    let rep3 = verify_hat_a_properties(&coarse3, &fine3, &pot3).unwrap();
    assert!(rep3.fitted_c > 0.0, "{}", rep3.fitted_c);
    assert!(rep3.monotonicity_min > 0.0);
    assert!((1.7..=2.5).contains(&rep3.jump_ratio), "{}", rep3.jump_ratio);
    // refinement stability: same xi lattice, doubled cell resolution
    let coarse3_refined = effective_operator_table(
        &op3,
        vec![GridSpec::new(2.0, 10).uniform_symmetric()],
        &PeriodicGrid::new(1, 256),
        1e-10,
    );
    let stability = verify_hat_a_properties(&coarse3_refined, &fine3, &pot3).unwrap();
    assert!(
        (stability.fitted_c - rep3.fitted_c).abs() <= 0.1 * rep3.fitted_c,
        "refinement stability: {} vs {}",
        stability.fitted_c,
        rep3.fitted_c
    );
    report(6, "coercivity fitted c >= 0.5 (quadratic, ~1), > 0 and stable (p = 3); monotone; jump ratio in [1.7, 2.5]");
}

struct Study {
    report: ConvergenceReport,
    elapsed: Duration,
    diag_first: CorrectorReport,
    diag_last: CorrectorReport,
}

fn linear_study() -> &'static Study {
    static STUDY: OnceLock<Study> = OnceLock::new();
    STUDY.get_or_init(|| {
        let op = linear_op();
        let cell_grid = PeriodicGrid::new(1, 64);
        let table = effective_operator_table(
            &op,
            vec![GridSpec::new(1.0, 8).uniform_symmetric()],
            &cell_grid,
            1e-12,
        );
        let grid = BoxGrid::new(1, 1024, 1.0);
        let eps_list = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
        let start = Instant::now();
        let report = convergence_study(
            &op,
            &table,
            &|x: &Vector| [x[0], 0.0],
            &eps_list,
            &grid,
            1e-12,
            16,
        )
        .unwrap();
        let elapsed = start.elapsed();
        let diag_first =
            corrector_diagnostic(&op, &report.eps_solutions[0], &report.homog, 1e-12).unwrap();
        let diag_last =
            corrector_diagnostic(&op, &report.eps_solutions[4], &report.homog, 1e-12).unwrap();
        Study { report, elapsed, diag_first, diag_last }
    })
}

#[test]
fn criterion_07_homogenization_convergence() {
    let study = linear_study();
    let errs: Vec<f64> = study.report.entries.iter().map(|e| e.l1_error).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "monotone decrease: {errs:?}");
    assert!(errs[4] <= errs[0] / 4.0, "error(1/64) = {} vs error(1/4)/4 = {}", errs[4], errs[0] / 4.0);
    let gaps: Vec<f64> = study
        .report
        .entries
        .iter()
        .map(|e| (e.energy - study.report.homog_energy).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "energy gaps: {gaps:?}");
    assert!(study.elapsed < Duration::from_secs(60), "{:?}", study.elapsed);
    report(7, "L1 error monotone, 4x+ reduction at eps = 1/64; energy gap decreasing; < 60 s");
}

#[test]
fn criterion_08_uniform_bound_mirror() {
    let study = linear_study();
    let sums: Vec<f64> = study
        .report
        .entries
        .iter()
        .map(|e| e.grad_modular + e.flux_modular)
        .collect();
    // lower half of the eps list (the three smallest eps)
    let lower = &sums[2..];
    let lo = lower.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lower.iter().cloned().fold(0.0_f64, f64::max);
    assert!(hi <= 1.2 * lo, "modular sum varies by {}%: {sums:?}", 100.0 * (hi / lo - 1.0));
    report(8, "m1-modular + m2*-flux-modular varies < 20% over the lower half of the eps list");
}

#[test]
fn criterion_09_unfolding_exactness() {
    let tau = 2.0 * std::f64::consts::PI;
    let grid = BoxGrid::new(1, 256, 1.0);
    // five aligned (g, eps) pairs, including solver-output integrands
    let gap = decomposition_identity_check(&|_x, _y| 1.0, 0.125, &grid).unwrap();
    assert!(gap <= 1e-12, "constant: {gap}");
    let gap =
        decomposition_identity_check(&|x, y| x[0] * (tau * y[0]).sin(), 0.125, &grid).unwrap();
    assert!(gap <= 1e-12, "x sin: {gap}");
    let gap = decomposition_identity_check(
        &|x, y| (x[0] * x[0] + 1.0) * (tau * y[0]).cos().exp(),
        0.25,
        &grid,
    )
    .unwrap();
    assert!(gap <= 1e-12, "exp cos: {gap}");
    let grid2 = BoxGrid::new(2, 32, 1.0);
    let gap = decomposition_identity_check(
        &|x, y| x[0] * (tau * y[1]).sin() + x[1] * (tau * y[0]).cos(),
        0.25,
        &grid2,
    )
    .unwrap();
    assert!(gap <= 1e-12, "2D: {gap}");
    // solver-output integrand
    let op = linear_op();
    let eps = 0.125;
    let sol = solve_eps_problem(&op, eps, &|x: &Vector| [x[0], 0.0], &grid, 1e-12, 16).unwrap();
    let h = grid.h();
    let grads = sol.element_grads.clone();
    let a = step(1.0, 3.0);
    let g = move |x: &Vector, y: &Vector| {
        let e = ((x[0] / h) as usize).min(grads.len() - 1);
        a.eval(y) * grads[e][0] * grads[e][0]
    };
    let gap = decomposition_identity_check(&g, eps, &grid).unwrap();
    assert!(gap <= 1e-10, "solver output: {gap}");
    // integral isometry to machine precision
    let v = BoxField::from_fn(grid, |x| (3.0 * x[0]).cos() + x[0] * x[0]);
    let direct = integrate_box(&v);
    let unfolded = integrate_unfolded(&unfold(&v, 0.125).unwrap());
    assert!((direct - unfolded).abs() <= 1e-14 * (1.0 + direct.abs()), "{direct} vs {unfolded}");
    report(9, "5 aligned decomposition gaps <= 1e-12 (solver output 1e-10); unfolding isometry exact");
}

#[test]
fn criterion_10_corrector_diagnostic() {
    let study = linear_study();
    let d64 = &study.diag_last;
    let d4 = &study.diag_first;
    assert!(d64.l1_distance < 1e-2, "{}", d64.l1_distance);
    assert!(
        d64.l1_distance <= d4.l1_distance / 4.0,
        "{} vs {}",
        d64.l1_distance,
        d4.l1_distance
    );
    assert!(d64.orthogonality_gap <= 1e-3, "{}", d64.orthogonality_gap);
    assert!(d64.lsc_gap >= -1e-10, "lower semicontinuity: {}", d64.lsc_gap);
    report(10, "corrector L1 < 1e-2 at eps = 1/64, 4x+ below eps = 1/4; orthogonality <= 1e-3");
}

#[test]
fn criterion_11_condition_checkers() {
    // spatially constant M: every comparison ratio is exactly 1
    let constant = NFunction::Constant { base: ScalarNFunction::power(2.0) };
    let spec = SampleSpec::new(1);
    let d0 = delta0(1);
    let deltas = [d0, d0 / 2.0, d0 / 4.0];
    let m4c = check_m4_log_holder(&constant, &spec);
    assert!(m4c.passes && (m4c.max_ratio - 1.0).abs() <= 1e-12, "{:?}", m4c.max_ratio);
    let m3c = check_m3_cube_condition(&constant, 1, &deltas, &spec).unwrap();
    assert!(m3c.passes);
    for fit in &m3c.per_delta {
        assert!((fit.max_ratio - 1.0).abs() <= 1e-9, "{}", fit.max_ratio);
    }
    assert!(check_delta2(&constant, &spec).passes);

    // Lipschitz variable exponent passes with a refinement-stable fit
    let lipschitz = NFunction::VariableExponent {
        p: SpatialFn::Sin { base: 2.25, amp: 0.25 },
    };
    let m4l = check_m4_log_holder(&lipschitz, &spec);
    assert!(m4l.passes, "fitted {} vs coarse {}", m4l.fitted_a, m4l.coarse_a);

    // step exponent fails with an explicit witness straddling the jump
    let stepped = NFunction::VariableExponent { p: step(2.0, 3.0) };
    let m4s = check_m4_log_holder(&stepped, &spec);
    assert!(!m4s.passes);
    let w = m4s.witness.expect("witness triple");
    assert!((w.y1[0] - 0.5).abs() < 0.05 || (w.y2[0] - 0.5).abs() < 0.05, "{w:?}");
    assert!(w.ratio > 50.0, "{}", w.ratio);

    // radial families passing M4 also pass M3 with at most doubled exponent
    let radial = NFunction::Radial {
        weight: SpatialFn::Cos { base: 2.0, amp: 1.0 },
        base: ScalarNFunction::power(2.5),
    };
    let rep = radial_reduction_check(&radial, 1, &deltas, &spec).unwrap();
    assert!(rep.m4.passes && rep.m3.passes && rep.lemma_consistent);
    let worst_d = rep
        .m3
        .per_delta
        .iter()
        .map(|f| f.fitted_d)
        .fold(0.0_f64, f64::max);
    assert!(
        worst_d <= 2.0 * rep.m4.fitted_a * 1.2 + 0.2,
        "M3 exponent {worst_d} vs 2x M4 {} + 20%",
        rep.m4.fitted_a
    );
    report(11, "constant M ratios = 1; Lipschitz p passes M4; step p fails with witness; radial M3 <= 2x M4 + margin");
}

#[test]
fn criterion_12_two_dimensional_property_run() {
    let start = Instant::now();
    // smooth p(y1, y2) in [2, 2.5]
    let p = SpatialFn::SinSqProd { base: 2.0, amp: 0.5 };
    let (p_lo, p_hi) = p.range();
    assert!(p_lo >= 2.0 && p_hi <= 2.5);
    let op = make_operator("variable-exponent", None, Some(p), None).unwrap();
    let grid = PeriodicGrid::new(2, 64);
    // 13 x 13 lattice on [-1, 1]^2; dense enough that table interpolation
    // stays below the homogenization error being measured
    let axis: Vec<f64> = (0..13).map(|i| -1.0 + i as f64 / 6.0).collect();
    let table = effective_operator_table(&op, vec![axis.clone(), axis], &grid, 1e-9);
    assert!(table.failures.is_empty(), "{:?}", table.failures);
    let worst = table.residuals.iter().cloned().fold(0.0_f64, f64::max);
    assert!(worst <= 1e-8, "worst residual {worst}");
    // hat A monotonicity over all node pairs
    for i in 0..table.node_count() {
        for j in i + 1..table.node_count() {
            let (xi, eta) = (table.node_xi(i), table.node_xi(j));
            let d = [xi[0] - eta[0], xi[1] - eta[1]];
            if d[0] * d[0] + d[1] * d[1] < 1e-20 {
                continue;
            }
            let da = [
                table.hat_a[i][0] - table.hat_a[j][0],
                table.hat_a[i][1] - table.hat_a[j][1],
            ];
            assert!(da[0] * d[0] + da[1] * d[1] > 0.0, "pair {i},{j}");
        }
    }
    // f sandwich
    let gauge = op.gauge();
    let (m1, m2) = (gauge.m1(), gauge.m2());
    for idx in 0..table.node_count() {
        let xi = table.node_xi(idx);
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        assert!(m1.eval(r) - 1e-9 <= table.f_vals[idx]);
        assert!(table.f_vals[idx] <= m2.eval(r) + 1e-9);
    }
    // convergence study on the 64 x 64 box
    let box_grid = BoxGrid::new(2, 64, 1.0);
    let study = convergence_study(
        &op,
        &table,
        &|x: &Vector| [0.6 * x[0], 0.6 * x[1]],
        &[0.25, 0.125, 0.0625],
        &box_grid,
        1e-9,
        4,
    )
    .unwrap();
    let errs: Vec<f64> = study.entries.iter().map(|e| e.l1_error).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(600), "{elapsed:?}");
    report(12, "2D p(y)-Laplacian at K = 64^2: residuals <= 1e-8, monotone hat A, f sandwich, decreasing L1 error, < 10 min");
}
