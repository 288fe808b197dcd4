//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.
//!
//! Run with `cargo test -p circlestate --test acceptance`.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circlestate::experiments::FringeObserver;
use circlestate::fidelity::{pure_fidelity, single_mode_fidelity, CatFidelityObserver, CircleFidelityObserver};
use circlestate::integrator::{auto_step, evolve, EvolveControls, Observer, StepMode, Trajectory};
use circlestate::measurement::{condition_on_idler, fringe_visibility, signal_distribution, QuadratureGrid};
use circlestate::oracle::{coherent_decay_reference, DenseGeneratorParts, DenseOperator};
use circlestate::states::{
    cat_state, circle_state, coherent_coefficients, pure_to_density, CatParity, CircleParams, RadiusMapping,
};
use circlestate::{Cutoff, Mode, OscillatorParams, SingleModeDensityMatrix, SuperOperator, TwoModeDensityMatrix};

// criterion 1
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_DRAWS: usize = 100;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
// criterion 2
const PHYS_TRACE_TOL: f64 = 1e-6;
const PHYS_HERMITICITY_TOL: f64 = 1e-10;
const PHYS_MIN_EIGENVALUE: f64 = -1e-8;
const PHYS_LEAKAGE_TOL: f64 = 1e-6;
const PHYS_BUDGET: Duration = Duration::from_secs(300);
// criterion 3
const DECAY_FIDELITY_TOL: f64 = 1e-6;
// criteria 4 and 5
const FIGURE_TOL: f64 = 0.05;
const FIG5_BUDGET: Duration = Duration::from_secs(600);
// criterion 7
const NORM_TOL: f64 = 1e-12;
const VACUUM_OVERLAP_TOL: f64 = 1e-10;
const PEAK_POSITION: f64 = 2.12;
const PEAK_TOL: f64 = 0.05;
const FRINGE_VISIBILITY_MIN: f64 = 0.5;
// criterion 8
const CONVERGENCE_REL_TOL: f64 = 1e-5;
// criterion 9
const ORDER_RATIO_MIN: f64 = 12.0;
const ORDER_RATIO_MAX: f64 = 20.0;

const NMAX: usize = 20;
const TIME_MATCH: f64 = 1e-9;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
}

fn report(outcomes: &mut Vec<Outcome>, id: u8, name: &'static str, pass: bool, detail: String) {
    println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    outcomes.push(Outcome { id, name, pass });
}

fn cut(n: usize) -> Cutoff {
    Cutoff::new(n).unwrap()
}

fn sparse_as_dense(l: &SuperOperator) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(l.dim(), l.dim());
    for (r, c, v) in l.triplets() {
        m[(r, c)] += v;
    }
    m
}

fn oracle_equivalence() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // below any deviation so the first comparison fixes a location
    let mut worst = -1.0f64;
    let mut worst_at = (0.0, 0.0, 0);
    let mut comparisons = 0;
    let parts: Vec<_> = (1..=5).map(|n| DenseGeneratorParts::new(cut(n)).unwrap()).collect();
    for _ in 0..ORACLE_DRAWS {
        let lambda = rng.gen_range(0.0..=500.0);
        // g^2 in (0, 500]
        let g2 = 500.0 - rng.gen_range(0.0..500.0);
        let p = OscillatorParams::new(lambda, g2).unwrap();
        for part in &parts {
            let n = part.cutoff().n_max();
            let DenseOperator(d) = part.assemble(p);
            let dev = (d - sparse_as_dense(&SuperOperator::build(p, cut(n)))).abs().max();
            comparisons += 1;
            if dev > worst {
                worst = dev;
                worst_at = (lambda, g2, n);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= ORACLE_TOL && elapsed < ORACLE_BUDGET;
    (
        pass,
        format!(
            "max |sparse - dense| = {worst:.3e} (limit {ORACLE_TOL:e}) over {comparisons} operators, worst at \
             lambda={:.3} g2={:.3} n_max={}; {:.1} s (limit {} s)",
            worst_at.0,
            worst_at.1,
            worst_at.2,
            elapsed.as_secs_f64(),
            ORACLE_BUDGET.as_secs()
        ),
    )
}

fn single_trace_product(a: &SingleModeDensityMatrix, b: &SingleModeDensityMatrix) -> f64 {
    let n = a.cutoff().levels();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a.get(i, j) * b.get(j, i);
        }
    }
    acc.re
}

fn analytic_decay() -> (bool, String) {
    let c = cut(NMAX);
    let alpha = C64::new(1.0, 0.0);
    let signal = SingleModeDensityMatrix::from_pure(c, &coherent_coefficients(alpha, c).value).unwrap();
    let idler = SingleModeDensityMatrix::from_pure(c, &coherent_coefficients(C64::new(0.0, 0.0), c).value).unwrap();
    let rho0 = TwoModeDensityMatrix::product(&signal, &idler).unwrap();
    let l = SuperOperator::build(OscillatorParams::linear_loss_only(), c);
    let controls = EvolveControls::new(1.0, StepMode::Auto, 0.1).unwrap();
    let evo = evolve(&l, &rho0, &controls, &mut []).unwrap();
    let sigma = evo.final_state.partial_trace(Mode::Signal);
    let reference = coherent_decay_reference(alpha, 1.0, c);
    let f = single_trace_product(&reference, &sigma);
    let pass = f >= 1.0 - DECAY_FIDELITY_TOL;
    (pass, format!("fidelity at tau=1 = {f:.12} (need >= 1 - {DECAY_FIDELITY_TOL:e})"))
}

fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (x / 2.0) * (x / 2.0) / (k * k) as f64;
        sum += term;
    }
    sum
}

/// Peak position refined by a parabola through the sample and its neighbours.
fn refine(points: &[f64], values: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 == points.len() {
        return points[i];
    }
    let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return points[i];
    }
    points[i] + 0.5 * (a - c) / denom * (points[i + 1] - points[i])
}

fn ideal_state_suite() -> (bool, String) {
    let c = cut(NMAX);
    let mut worst_norm = 0.0f64;
    for k in 0..=40 {
        let r0 = 0.05 * k as f64;
        let s = circle_state(CircleParams::new(r0).unwrap(), c);
        worst_norm = worst_norm.max((s.norm_sqr() - 1.0).abs());
    }
    let norm_ok = worst_norm <= NORM_TOL;

    let s = circle_state(CircleParams::new(1.12).unwrap(), c);
    let vac = pure_fidelity(&s, &TwoModeDensityMatrix::vacuum(c)).unwrap().f_overlap;
    let expected = 1.0 / bessel_i0(2.5088);
    let vac_ok = (vac - expected).abs() <= VACUUM_OVERLAP_TOL;

    let rho = pure_to_density(&circle_state(CircleParams::new(1.5).unwrap(), c));
    let cond = condition_on_idler(&rho, 0.0, 0.0).unwrap();
    let grid = QuadratureGrid::default_grid();
    let mut quadratures = Vec::new();
    for (label, theta) in [("X_0", 0.0), ("X_pi/2", FRAC_PI_2)] {
        let p = signal_distribution(&cond.normalized, theta, &grid);
        let peaks: Vec<f64> = p.local_maxima().iter().map(|&i| refine(&p.points, &p.values, i)).collect();
        quadratures.push((label, peaks, fringe_visibility(&p)));
    }
    let twin = |peaks: &[f64]| peaks.len() == 2 && peaks.iter().all(|x| (x.abs() - PEAK_POSITION).abs() <= PEAK_TOL);
    let cat_ok = (twin(&quadratures[0].1) && quadratures[1].2 > FRINGE_VISIBILITY_MIN)
        || (twin(&quadratures[1].1) && quadratures[0].2 > FRINGE_VISIBILITY_MIN);
    let describe: Vec<String> = quadratures
        .iter()
        .map(|(l, peaks, v)| {
            let p: Vec<String> = peaks.iter().map(|x| format!("{x:.3}")).collect();
            format!("{l} peaks [{}] V={v:.4}", p.join(", "))
        })
        .collect();
    (
        norm_ok && vac_ok && cat_ok,
        format!(
            "normalization max dev {worst_norm:.1e} ({}), vacuum overlap {vac:.12} vs 1/I0(2.5088) = {expected:.12} \
             ({}), conditioned r0=1.5: {} ({}: want twin peaks at +-{PEAK_POSITION}+-{PEAK_TOL} and V > \
             {FRINGE_VISIBILITY_MIN} in the conjugate)",
            ok(norm_ok),
            ok(vac_ok),
            describe.join("; "),
            ok(cat_ok)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "not met"
    }
}

fn fixed_run(l: &SuperOperator, t: f64, dt: f64) -> TwoModeDensityMatrix {
    let controls = EvolveControls::new(t, StepMode::Fixed { dt }, t).unwrap();
    evolve(l, &TwoModeDensityMatrix::vacuum(l.cutoff()), &controls, &mut []).unwrap().final_state
}

fn integrator_order() -> (bool, String) {
    let c = cut(NMAX);
    let l = SuperOperator::build(OscillatorParams::from_ratio(1.5, 10.0).unwrap(), c);
    let (t, dt) = (0.1, 2e-4);
    let reference = fixed_run(&l, t, dt / 16.0);
    let e1 = fixed_run(&l, t, dt).max_abs_diff(&reference).unwrap();
    let e2 = fixed_run(&l, t, dt / 2.0).max_abs_diff(&reference).unwrap();
    let ratio = e1 / e2;
    let pass = (ORDER_RATIO_MIN..=ORDER_RATIO_MAX).contains(&ratio);
    (
        pass,
        format!(
            "g2=10 ratio=1.5 tau={t}: err(dt={dt:e}) = {e1:.3e}, err(dt/2) = {e2:.3e}, ratio {ratio:.3} (want \
             [{ORDER_RATIO_MIN}, {ORDER_RATIO_MAX}])"
        ),
    )
}

/// One evolution from the vacuum with every observable the criteria need.
struct Case {
    g2: f64,
    ratio: f64,
    nmax: usize,
    trajectory: Trajectory,
    elapsed: Duration,
}

fn run_case(g2: f64, ratio: f64, nmax: usize, t_end: f64, record_every: f64, physicality: bool) -> Case {
    let c = cut(nmax);
    let params = OscillatorParams::from_ratio(ratio, g2).unwrap();
    // shared step: the one the larger basis would pick, so n_max 20 and 21 differ only by truncation
    let wide = SuperOperator::build(params, cut(NMAX + 1));
    let dt = auto_step(&wide, wide.max_row_abs_sum());
    drop(wide);

    let start = Instant::now();
    let l = SuperOperator::build(params, c);
    let r0 = RadiusMapping::Sqrt.radius(ratio);
    let r_lin = RadiusMapping::Linear.radius(ratio);
    let mut circle = CircleFidelityObserver::new(CircleParams::new(r0).unwrap(), c);
    let mut cat = CatFidelityObserver::new(r0, c).unwrap();
    let circle_lin = circle_state(CircleParams::new(r_lin).unwrap(), c);
    let cat_lin = cat_state(C64::new(0.0, r_lin), CatParity::Even, c).unwrap();
    let mut linear = |_t: f64, rho: &TwoModeDensityMatrix| {
        let fc = pure_fidelity(&circle_lin, rho)?;
        let cond = condition_on_idler(rho, 0.0, 0.0)?;
        let fk = single_mode_fidelity(&cat_lin, &cond.normalized)?;
        Ok(vec![("circle_lin_f_overlap".to_string(), fc.f_overlap), ("cat_lin_f_overlap".to_string(), fk.f_overlap)])
    };
    let mut fringes = FringeObserver::new(QuadratureGrid::default_grid(), false);
    let mut eig = |_t: f64, rho: &TwoModeDensityMatrix| Ok(vec![("min_eigenvalue".to_string(), rho.min_eigenvalue()?)]);
    let mut observers: Vec<&mut dyn Observer> = vec![&mut circle, &mut cat, &mut linear, &mut fringes];
    if physicality {
        observers.push(&mut eig);
    }
    let controls = EvolveControls::new(t_end, StepMode::Fixed { dt }, record_every).unwrap();
    let evo = evolve(&l, &TwoModeDensityMatrix::vacuum(c), &controls, &mut observers).unwrap();
    Case { g2, ratio, nmax, trajectory: evo.trajectory, elapsed: start.elapsed() }
}

#[derive(Clone, Copy, Debug)]
struct Peak {
    tau: f64,
    value: f64,
}

fn series_peak(t: &Trajectory, name: &str) -> Peak {
    t.records
        .iter()
        .filter_map(|r| r.observable(name).filter(|v| v.is_finite()).map(|v| Peak { tau: r.tau, value: v }))
        .fold(Peak { tau: f64::NAN, value: f64::NEG_INFINITY }, |best, p| if p.value > best.value { p } else { best })
}

fn value_at(t: &Trajectory, name: &str, tau: f64) -> f64 {
    t.records
        .iter()
        .find(|r| (r.tau - tau).abs() < TIME_MATCH)
        .and_then(|r| r.observable(name))
        .unwrap_or_else(|| panic!("no record of {name} at tau = {tau}"))
}

/// Checks a fidelity maximum against a figure value under either convention.
fn figure_check(case: &Case, prefix: &str, target: f64) -> (bool, String) {
    let p = series_peak(&case.trajectory, &format!("{prefix}_f_overlap"));
    let sqrt = p.value.sqrt();
    let lin = series_peak(&case.trajectory, &format!("{prefix}_lin_f_overlap"));
    let overlap_ok = (p.value - target).abs() <= FIGURE_TOL;
    let sqrt_ok = (sqrt - target).abs() <= FIGURE_TOL;
    let convention = match (overlap_ok, sqrt_ok) {
        (true, true) => "both conventions",
        (true, false) => "f_overlap",
        (false, true) => "f_sqrt",
        (false, false) => "neither convention",
    };
    (
        overlap_ok || sqrt_ok,
        format!(
            "g2={} ratio={}: max f_overlap={:.4} f_sqrt={:.4} at tau={:.4} vs {target} -> {convention} \
             [r0=lambda/g2 reference, not scored: f_overlap={:.4} f_sqrt={:.4} at tau={:.4}]",
            case.g2,
            case.ratio,
            p.value,
            sqrt,
            p.tau,
            lin.value,
            lin.value.sqrt(),
            lin.tau
        ),
    )
}

fn physicality(case: &Case) -> (bool, String) {
    let t = &case.trajectory;
    let worst = |name: &str| t.series(name).into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let drift = worst("trace_drift");
    let herm = worst("hermiticity_defect");
    let leak = worst("leakage");
    let min_eig = t.series("min_eigenvalue").into_iter().fold(f64::INFINITY, f64::min);
    let pass = drift < PHYS_TRACE_TOL
        && herm < PHYS_HERMITICITY_TOL
        && min_eig > PHYS_MIN_EIGENVALUE
        && leak < PHYS_LEAKAGE_TOL
        && case.elapsed < PHYS_BUDGET
        && t.records.last().map(|r| r.tau) >= Some(0.2 - TIME_MATCH);
    (
        pass,
        format!(
            "g2={} ratio={} n_max={} tau in [0, 0.2], {} records: max |trace-1| {drift:.2e} (<{PHYS_TRACE_TOL:e}), \
             hermiticity {herm:.2e} (<{PHYS_HERMITICITY_TOL:e}), min eigenvalue {min_eig:.2e} (>{PHYS_MIN_EIGENVALUE:e}), \
             leakage {leak:.2e} (<{PHYS_LEAKAGE_TOL:e}); {:.1} s (limit {} s)",
            case.g2,
            case.ratio,
            case.nmax,
            t.records.len(),
            case.elapsed.as_secs_f64(),
            PHYS_BUDGET.as_secs()
        ),
    )
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    // criterion ids given as arguments restrict the run; none means all
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: u32| only.is_empty() || only.contains(&id);

    if want(1) {
        let (pass, detail) = oracle_equivalence();
        report(&mut outcomes, 1, "oracle equivalence", pass, detail);
    }
    if want(3) {
        let (pass, detail) = analytic_decay();
        report(&mut outcomes, 3, "analytic decay", pass, detail);
    }
    if want(7) {
        let (pass, detail) = ideal_state_suite();
        report(&mut outcomes, 7, "ideal-state suite", pass, detail);
    }
    if want(9) {
        let (pass, detail) = integrator_order();
        report(&mut outcomes, 9, "integrator order", pass, detail);
    }
    if [2, 4, 5, 6, 8].into_iter().any(want) {
        simulation_criteria(&mut outcomes);
    }
    summarize(outcomes)
}

fn simulation_criteria(outcomes: &mut Vec<Outcome>) {
    // (g2, ratio, t_end, record_every)
    let strong_cat = (300.0, 1.5, 0.2, 0.0005);
    let strong_circle = (300.0, 1.12, 0.1, 0.0005);
    let weak_circle = (10.0, 1.12, 0.4, 0.001);
    let weak_cat = (10.0, 1.5, 0.4, 0.001);

    let run = |(g2, ratio, t_end, every): (f64, f64, f64, f64), nmax: usize, phys: bool| {
        run_case(g2, ratio, nmax, t_end, every, phys)
    };
    let a20 = run(strong_cat, NMAX, true);
    let (pass, detail) = physicality(&a20);
    report(outcomes, 2, "physicality", pass, detail);

    let b20 = run(strong_circle, NMAX, false);
    let c20 = run(weak_circle, NMAX, false);
    let (p300, d300) = figure_check(&b20, "circle", 0.78);
    let (p10, d10) = figure_check(&c20, "circle", 0.76);
    let fig5_time = b20.elapsed + c20.elapsed;
    let in_budget = fig5_time < FIG5_BUDGET;
    report(
        outcomes,
        4,
        "circle fidelity maxima",
        p300 && p10 && in_budget,
        format!("{d300}; {d10}; runtime {:.1} s (limit {} s)", fig5_time.as_secs_f64(), FIG5_BUDGET.as_secs()),
    );

    let d20 = run(weak_cat, NMAX, false);
    let (p300, d300) = figure_check(&a20, "cat", 0.94);
    let (p10, d10) = figure_check(&d20, "cat", 0.78);
    report(outcomes, 5, "conditional cat fidelity maxima", p300 && p10, format!("{d300}; {d10}"));

    let e20 = run_case(3.0, 1.5, NMAX, 0.25, 0.001, false);
    let v = |case: &Case, tau: f64| {
        (value_at(&case.trajectory, "visibility_x0", tau), value_at(&case.trajectory, "visibility_p", tau))
    };
    let (v300, v300p) = v(&a20, 0.014);
    let (v10, v10p) = v(&d20, 0.059);
    let (v3, v3p) = v(&e20, 0.19);
    let (v300_late, v300p_late) = v(&a20, 0.1);
    let increasing = v3 < v10 && v10 < v300;
    let washout = v300_late < 0.5 * v300;
    report(
        outcomes,
        6,
        "fringe phenomenology",
        increasing && washout,
        format!(
            "fringe quadrature X_0 visibility: g2=3@0.19 {v3:.4} < g2=10@0.059 {v10:.4} < g2=300@0.014 {v300:.4} \
             ({}); g2=300@0.1 {v300_late:.4} < half of {v300:.4} ({}) [X_pi/2 for reference: {v3p:.4}, {v10p:.4}, \
             {v300p:.4}, late {v300p_late:.4}]",
            ok(increasing),
            ok(washout)
        ),
    );

    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (small, spec, prefix) in [
        (&b20, strong_circle, "circle"),
        (&c20, weak_circle, "circle"),
        (&a20, strong_cat, "cat"),
        (&d20, weak_cat, "cat"),
    ] {
        let large = run(spec, NMAX + 1, false);
        for suffix in ["f_overlap", "lin_f_overlap"] {
            let name = format!("{prefix}_{suffix}");
            let (p, q) = (series_peak(&small.trajectory, &name), series_peak(&large.trajectory, &name));
            let rel = ((q.value - p.value) / p.value).abs();
            worst = worst.max(rel);
            lines.push(format!("{name} g2={} ratio={}: {:.3e}", small.g2, small.ratio, rel));
        }
    }
    // f_sqrt changes by half the relative amount of f_overlap
    report(
        outcomes,
        8,
        "basis convergence",
        worst < CONVERGENCE_REL_TOL,
        format!("max relative change n_max 20 -> 21 {worst:.3e} (limit {CONVERGENCE_REL_TOL:e}): {}", lines.join(", ")),
    );
}

fn summarize(mut outcomes: Vec<Outcome>) -> ExitCode {
    outcomes.sort_by_key(|o| o.id);
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.pass).collect();
    println!();
    println!("acceptance summary: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    for o in &outcomes {
        println!("  {} [{}] {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
