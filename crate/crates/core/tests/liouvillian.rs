use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circlestate::oracle::{dense_liouvillian, DenseGeneratorParts, DenseOperator};
use circlestate::states::{circle_state, pure_to_density, CircleParams, RadiusMapping};
use circlestate::{Cutoff, OscillatorParams, SuperOperator, TwoModeDensityMatrix};

fn cut(n: usize) -> Cutoff {
    Cutoff::new(n).unwrap()
}

/// Unit-trace positive matrix `A A^+ / Tr`, optionally kept off the top shell.
fn random_state(cutoff: Cutoff, seed: u64, below_top: bool) -> TwoModeDensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cutoff.pair_dim();
    let levels = cutoff.levels();
    let allowed = |k: usize| !below_top || (k / levels < cutoff.n_max() && k % levels < cutoff.n_max());
    let a = DMatrix::from_fn(dim, dim, |r, _| {
        if allowed(r) {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    let flat = (0..dim * dim).map(|k| rho[(k / dim, k % dim)] / tr).collect();
    TwoModeDensityMatrix::from_flat(cutoff, flat).unwrap()
}

fn random_hermitian(cutoff: Cutoff, seed: u64) -> TwoModeDensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cutoff.pair_dim();
    let mut rho = TwoModeDensityMatrix::zeros(cutoff);
    let data = rho.as_mut_slice();
    for r in 0..dim {
        data[r * dim + r] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        for c in r + 1..dim {
            let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            data[r * dim + c] = v;
            data[c * dim + r] = v.conj();
        }
    }
    rho
}

fn dense_apply(d: &DMatrix<f64>, rho: &TwoModeDensityMatrix) -> Vec<C64> {
    let v = DVector::from_iterator(d.ncols(), rho.as_slice().iter().copied());
    let out = d.map(|x| C64::new(x, 0.0)) * v;
    out.iter().copied().collect()
}

#[test]
fn apply_matches_dense_oracle_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for n in 1..=5 {
        let parts = DenseGeneratorParts::new(cut(n)).unwrap();
        for draw in 0..20u64 {
            let p = OscillatorParams::new(rng.gen_range(0.0..=500.0), 500.0 - rng.gen_range(0.0..500.0)).unwrap();
            let DenseOperator(d) = parts.assemble(p);
            let rho = random_state(cut(n), 1000 * n as u64 + draw, false);
            let sparse = SuperOperator::build(p, cut(n)).apply(&rho).unwrap();
            let dense = dense_apply(&d, &rho);
            for (a, b) in sparse.as_slice().iter().zip(&dense) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    assert!(worst <= 1e-12, "max deviation {worst:e}");
}

#[test]
fn dense_oracle_entry_point_matches_parts() {
    let p = OscillatorParams::new(12.5, 3.0).unwrap();
    let DenseOperator(direct) = dense_liouvillian(p, cut(3)).unwrap();
    let DenseOperator(parts) = DenseGeneratorParts::new(cut(3)).unwrap().assemble(p);
    assert_eq!(direct, parts);
}

#[test]
fn stored_entries_stay_sparse() {
    for n in [1, 5, 10, 20] {
        let l = SuperOperator::build(OscillatorParams::new(1.0, 1.0).unwrap(), cut(n));
        assert!(l.nnz() <= 10 * (n + 1).pow(4), "n_max {n}: {} entries", l.nnz());
    }
}

/// With `lambda = alpha g^2` the pump and two-photon terms combine into a
/// pure dissipator with jump `a1 a2 - alpha`, so the circle state with
/// `r0^2 = alpha` is dark for them.
#[test]
fn circle_state_is_dark_for_pump_and_pair_loss() {
    let cutoff = cut(20);
    let (g2, ratio) = (300.0, 2.25);
    let r0 = RadiusMapping::Sqrt.radius(ratio);
    assert!((r0 - 1.5).abs() < 1e-15);
    let rho = pure_to_density(&circle_state(CircleParams::new(r0).unwrap(), cutoff));
    let full = SuperOperator::build(OscillatorParams::from_ratio(ratio, g2).unwrap(), cutoff).apply(&rho).unwrap();
    let loss = SuperOperator::build(OscillatorParams::linear_loss_only(), cutoff).apply(&rho).unwrap();
    let residual = full.add_scaled(C64::new(-1.0, 0.0), &loss).unwrap();
    let worst = residual.as_slice().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    // only the truncated top shell contributes
    assert!(worst < 1e-9 * g2, "residual {worst:e}");

    // the linear radius is not dark
    let wrong = pure_to_density(&circle_state(CircleParams::new(ratio).unwrap(), cutoff));
    let full = SuperOperator::build(OscillatorParams::from_ratio(ratio, g2).unwrap(), cutoff).apply(&wrong).unwrap();
    let loss = SuperOperator::build(OscillatorParams::linear_loss_only(), cutoff).apply(&wrong).unwrap();
    let residual = full.add_scaled(C64::new(-1.0, 0.0), &loss).unwrap();
    assert!(residual.as_slice().iter().fold(0.0f64, |m, v| m.max(v.norm())) > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_annihilated_below_top_shell(
        n in 1usize..=6, lambda in 0.0f64..=500.0, g2 in 1e-3f64..=500.0, seed in any::<u64>()
    ) {
        let rho = random_state(cut(n), seed, true);
        let out = SuperOperator::build(OscillatorParams::new(lambda, g2).unwrap(), cut(n)).apply(&rho).unwrap();
        let scale = 1.0 + lambda + g2 * (n * n) as f64;
        prop_assert!(out.trace().norm() <= 1e-13 * scale, "trace {}", out.trace());
    }

    #[test]
    fn hermiticity_is_preserved(
        n in 1usize..=6, lambda in 0.0f64..=500.0, g2 in 1e-3f64..=500.0, seed in any::<u64>()
    ) {
        let rho = random_hermitian(cut(n), seed);
        let out = SuperOperator::build(OscillatorParams::new(lambda, g2).unwrap(), cut(n)).apply(&rho).unwrap();
        let size = out.as_slice().iter().fold(0.0f64, |m, v| m.max(v.norm()));
        prop_assert!(out.hermiticity_defect() <= 1e-13 * size.max(1.0));
    }

    #[test]
    fn adjoint_input_gives_adjoint_output(
        n in 1usize..=5, lambda in 0.0f64..=50.0, g2 in 1e-3f64..=50.0, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = cut(n).pair_dim();
        let flat = (0..dim * dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let rho = TwoModeDensityMatrix::from_flat(cut(n), flat).unwrap();
        let l = SuperOperator::build(OscillatorParams::new(lambda, g2).unwrap(), cut(n));
        let a = l.apply(&rho).unwrap().adjoint();
        let b = l.apply(&rho.adjoint()).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);
    }

    #[test]
    fn apply_is_linear(
        n in 1usize..=5, lambda in 0.0f64..=500.0, g2 in 1e-3f64..=500.0,
        s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0
    ) {
        let l = SuperOperator::build(OscillatorParams::new(lambda, g2).unwrap(), cut(n));
        let r1 = random_hermitian(cut(n), s1);
        let r2 = random_hermitian(cut(n), s2);
        let (ca, cb) = (C64::new(a, 0.0), C64::new(b, 0.0));
        let combined = l.apply(&r1.scaled(ca).add_scaled(cb, &r2).unwrap()).unwrap();
        let separate = l.apply(&r1).unwrap().scaled(ca).add_scaled(cb, &l.apply(&r2).unwrap()).unwrap();
        let scale = 1.0 + lambda + g2 * (n * n) as f64;
        prop_assert!(combined.max_abs_diff(&separate).unwrap() <= 1e-12 * scale);
    }
}
