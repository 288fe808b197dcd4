use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circlestate::measurement::{
    condition_on_idler, joint_distribution, quad_wavefunctions, signal_distribution, trapezoid, QuadratureGrid,
};
use circlestate::states::{circle_state, coherent_coefficients, product_state, pure_to_density, CircleParams};
use circlestate::{Cutoff, Error, TwoModeDensityMatrix};

fn cut(n: usize) -> Cutoff {
    Cutoff::new(n).unwrap()
}

fn random_mixed(cutoff: Cutoff, seed: u64, rank: usize) -> TwoModeDensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cutoff.pair_dim();
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    let mut total = 0.0;
    for _ in 0..rank {
        // weight toward low photon numbers so the grid holds the state
        let v: Vec<C64> = (0..dim)
            .map(|k| {
                let (n1, n2) = (k / cutoff.levels(), k % cutoff.levels());
                let damp = (-0.5 * (n1 + n2) as f64).exp();
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * damp
            })
            .collect();
        let w: f64 = rng.gen_range(0.1..1.0);
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] += v[r] * v[c].conj() * w;
            }
        }
        total += w * v.iter().map(|a| a.norm_sqr()).sum::<f64>();
    }
    for x in &mut data {
        *x /= total;
    }
    TwoModeDensityMatrix::from_flat(cutoff, data).unwrap()
}

#[test]
fn wavefunctions_are_orthonormal_to_level_twenty() {
    let grid = QuadratureGrid::uniform(-8.0, 8.0, 801).unwrap();
    let x = grid.points();
    let table: Vec<Vec<C64>> = x.iter().map(|&v| quad_wavefunctions(21, v, 0.7)).collect();
    for n in 0..21 {
        for m in 0..21 {
            let re: Vec<f64> = table.iter().map(|row| (row[n].conj() * row[m]).re).collect();
            let im: Vec<f64> = table.iter().map(|row| (row[n].conj() * row[m]).im).collect();
            let expected = if n == m { 1.0 } else { 0.0 };
            assert!((trapezoid(x, &re) - expected).abs() < 1e-6, "<{n}|{m}>");
            assert!(trapezoid(x, &im).abs() < 1e-6);
        }
    }
}

#[test]
fn conditioning_weight_is_the_idler_marginal() {
    let grid = QuadratureGrid::uniform(-8.0, 8.0, 641).unwrap();
    for (seed, theta2) in [(1u64, 0.0), (2, PI / 2.0), (3, 1.1)] {
        let rho = random_mixed(cut(6), seed, 3);
        // far in the tails the slice is null and the error carries its weight
        let weights: Vec<f64> = grid
            .points()
            .iter()
            .map(|&x2| match condition_on_idler(&rho, theta2, x2) {
                Ok(c) => c.weight,
                Err(Error::NullConditioning(w)) => w,
                Err(e) => panic!("{e}"),
            })
            .collect();
        let total = trapezoid(grid.points(), &weights);
        assert!((total - 1.0).abs() < 1e-6, "seed {seed}: {total}");
    }
}

#[test]
fn joint_distribution_of_circle_state() {
    let grid = QuadratureGrid::uniform(-7.0, 7.0, 201).unwrap().with_phases(0.0, 0.0);
    let rho = pure_to_density(&circle_state(CircleParams::new(1.5).unwrap(), cut(20)));
    let p = joint_distribution(&rho, &grid);
    let x = grid.points();
    let rows: Vec<f64> = (0..x.len()).map(|i| trapezoid(x, &p.row(i).iter().copied().collect::<Vec<_>>())).collect();
    assert!((trapezoid(x, &rows) - 1.0).abs() < 1e-6);
    let asymmetry = (0..x.len())
        .flat_map(|i| (0..x.len()).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max((p[(i, j)] - p[(j, i)]).abs()));
    assert!(asymmetry < 1e-12, "{asymmetry:e}");
    assert!(p.min() >= -1e-12);
}

#[test]
fn product_state_joint_distribution_factorizes() {
    let cutoff = cut(12);
    let a = coherent_coefficients(C64::new(0.8, -0.3), cutoff).value;
    let b = coherent_coefficients(C64::new(-0.5, 0.6), cutoff).value;
    let rho = pure_to_density(&product_state(&a, &b, cutoff).unwrap());
    let grid = QuadratureGrid::uniform(-4.0, 4.0, 41).unwrap().with_phases(0.3, -1.2);
    let p = joint_distribution(&rho, &grid);
    let marginal = |psi: &[C64], x: f64, theta: f64| {
        let w = quad_wavefunctions(psi.len(), x, theta);
        w.iter().zip(psi).map(|(w, c)| w * c).sum::<C64>().norm_sqr()
    };
    for (i, &x1) in grid.points().iter().enumerate() {
        for (j, &x2) in grid.points().iter().enumerate() {
            let expected = marginal(&a, x1, 0.3) * marginal(&b, x2, -1.2);
            assert!((p[(i, j)] - expected).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shifting_phase_by_pi_mirrors_distribution(seed in any::<u64>(), theta in 0.0f64..(2.0 * PI)) {
        let rho = random_mixed(cut(5), seed, 2);
        let sigma = condition_on_idler(&rho, 0.4, 0.3).unwrap().normalized;
        let grid = QuadratureGrid::uniform(-5.0, 5.0, 101).unwrap();
        let p = signal_distribution(&sigma, theta, &grid);
        let q = signal_distribution(&sigma, theta + PI, &grid);
        let n = p.values.len();
        for i in 0..n {
            prop_assert!((p.values[i] - q.values[n - 1 - i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_conditional_state_ignores_global_scale(
        seed in any::<u64>(), scale in 1e-3f64..1e3, theta2 in 0.0f64..PI, x2 in -1.5f64..1.5
    ) {
        let rho = random_mixed(cut(4), seed, 2);
        let a = condition_on_idler(&rho, theta2, x2).unwrap();
        let b = condition_on_idler(&rho.scaled(C64::new(scale, 0.0)), theta2, x2).unwrap();
        prop_assert!(a.normalized.max_abs_diff(&b.normalized).unwrap() <= 1e-13);
        prop_assert!((b.weight / a.weight - scale).abs() <= 1e-12 * scale);
    }

    #[test]
    fn joint_distribution_is_nonnegative(seed in any::<u64>(), t1 in 0.0f64..PI, t2 in 0.0f64..PI) {
        let rho = random_mixed(cut(4), seed, 3);
        let grid = QuadratureGrid::uniform(-5.0, 5.0, 51).unwrap().with_phases(t1, t2);
        prop_assert!(joint_distribution(&rho, &grid).min() >= -1e-12);
    }
}
