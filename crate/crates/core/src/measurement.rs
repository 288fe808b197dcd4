//! Homodyne quadrature distributions.
//!
//! Quadratures are `X_theta = (a e^{-i theta} + a^+ e^{i theta}) / sqrt(2)`
//! with `hbar = 1`, so the vacuum has `P(x) = e^{-x^2} / sqrt(pi)` and a
//! coherent state `|alpha>` is centred at `sqrt(2) Re(alpha e^{-i theta})`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{SingleModeDensityMatrix, TwoModeDensityMatrix};

/// Conditioning weights below this are treated as a null slice.
pub const NULL_WEIGHT: f64 = 1e-12;

/// Local maxima smaller than this fraction of the global maximum are ignored
/// by [`fringe_visibility`]; they are rounding noise in the Gaussian tails.
pub const PEAK_FLOOR: f64 = 1e-6;

/// `<x_theta|n>` for `n = 0..levels`, by the normalized Hermite-function
/// recurrence `psi_{n+1} = x sqrt(2/(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1}`.
pub fn quad_wavefunctions(levels: usize, x: f64, theta: f64) -> Vec<C64> {
    let mut real = Vec::with_capacity(levels);
    if levels == 0 {
        return Vec::new();
    }
    real.push(std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp());
    if levels > 1 {
        real.push(std::f64::consts::SQRT_2 * x * real[0]);
    }
    for n in 1..levels.saturating_sub(1) {
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * real[n] - (nf / (nf + 1.0)).sqrt() * real[n - 1];
        real.push(next);
    }
    real.iter().enumerate().map(|(n, v)| C64::from_polar(1.0, -(n as f64) * theta) * v).collect()
}

/// `<x_theta|n>`.
pub fn quad_wavefunction(n: usize, x: f64, theta: f64) -> C64 {
    quad_wavefunctions(n + 1, x, theta)[n]
}

/// Sample points plus the local-oscillator phases of both modes.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    pub theta1: f64,
    pub theta2: f64,
}

impl QuadratureGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("quadrature grid is empty".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("quadrature grid must be strictly increasing".into()));
        }
        Ok(Self { points, theta1: 0.0, theta2: 0.0 })
    }

    /// `count` evenly spaced points on `[min, max]`.
    pub fn uniform(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(max > min) {
            return Err(Error::InvalidParameter(format!("bad grid [{min}, {max}] x {count}")));
        }
        let step = (max - min) / (count - 1) as f64;
        Self::new((0..count).map(|k| min + k as f64 * step).collect())
    }

    /// `[-6, 6]` with 241 points.
    pub fn default_grid() -> Self {
        Self::uniform(-6.0, 6.0, 241).expect("default grid is valid")
    }

    pub fn with_phases(mut self, theta1: f64, theta2: f64) -> Self {
        self.theta1 = theta1;
        self.theta2 = theta2;
        self
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sampled single-mode quadrature distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSeries {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub theta: f64,
    /// Weight of the conditioning slice that produced the state, 1 if none.
    pub normalization: f64,
    pub time: Option<f64>,
    /// Extra `key=value` header lines for the CSV output.
    pub metadata: Vec<(String, String)>,
}

impl DistributionSeries {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.points, &self.values)
    }

    /// `#`-prefixed metadata header followed by `x,P` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# theta1={}", self.theta)?;
        writeln!(w, "# normalization={}", self.normalization)?;
        if let Some(t) = self.time {
            writeln!(w, "# tau={t}")?;
        }
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "x,P")?;
        for (x, p) in self.points.iter().zip(&self.values) {
            writeln!(w, "{x},{p:e}")?;
        }
        Ok(())
    }

    /// Indices of the local maxima above [`PEAK_FLOOR`].
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        let global = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let floor = PEAK_FLOOR * global;
        let n = v.len();
        let mut peaks = Vec::new();
        for i in 0..n {
            let left_ok = i == 0 || v[i] > v[i - 1];
            let right_ok = i + 1 == n || v[i] >= v[i + 1];
            // endpoints only count when the grid cuts a peak off
            let interior = i > 0 && i + 1 < n;
            if left_ok && right_ok && v[i] >= floor && (interior || v[i] == global) {
                peaks.push(i);
            }
        }
        peaks
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// Joint homodyne density `P(x1, x2)` on `grid x grid`, indexed `(i1, i2)`.
pub fn joint_distribution(rho: &TwoModeDensityMatrix, grid: &QuadratureGrid) -> DMatrix<f64> {
    let levels = rho.cutoff().levels();
    let n = grid.len();
    let signal: Vec<Vec<C64>> = grid.points.iter().map(|&x| quad_wavefunctions(levels, x, grid.theta1)).collect();
    let columns: Vec<Vec<f64>> = grid
        .points
        .par_iter()
        .map(|&x2| {
            let idler = quad_wavefunctions(levels, x2, grid.theta2);
            let sigma = contract_idler(rho, &idler);
            signal.iter().map(|psi| quadratic_form(&sigma, psi)).collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i1, i2| columns[i2][i1])
}

/// Signal state after projecting the idler on `x_theta2 = x2`.
#[derive(Clone, Debug)]
pub struct ConditionedState {
    pub unnormalized: SingleModeDensityMatrix,
    /// `Tr sigma`, a probability density in `x2`.
    pub weight: f64,
    pub normalized: SingleModeDensityMatrix,
}

/// `sigma[n1, m1] = sum rho[n1 n2; m1 m2] <x2|n2> <m2|x2>`.
pub fn condition_on_idler(rho: &TwoModeDensityMatrix, theta2: f64, x2: f64) -> Result<ConditionedState> {
    let idler = quad_wavefunctions(rho.cutoff().levels(), x2, theta2);
    let sigma = contract_idler(rho, &idler);
    let weight = sigma.trace().re;
    if !(weight >= NULL_WEIGHT) {
        return Err(Error::NullConditioning(weight));
    }
    let normalized = sigma.scaled(1.0 / weight);
    Ok(ConditionedState { unnormalized: sigma, weight, normalized })
}

fn contract_idler(rho: &TwoModeDensityMatrix, idler: &[C64]) -> SingleModeDensityMatrix {
    let cutoff = rho.cutoff();
    let l = cutoff.levels();
    let dim = cutoff.pair_dim();
    let flat = rho.as_slice();
    let mut out = vec![C64::new(0.0, 0.0); l * l];
    for n1 in 0..l {
        for m1 in 0..l {
            let mut acc = C64::new(0.0, 0.0);
            for n2 in 0..l {
                let row = (n1 * l + n2) * dim + m1 * l;
                let mut inner = C64::new(0.0, 0.0);
                for m2 in 0..l {
                    inner += flat[row + m2] * idler[m2].conj();
                }
                acc += idler[n2] * inner;
            }
            out[n1 * l + m1] = acc;
        }
    }
    SingleModeDensityMatrix::from_flat(cutoff, out).expect("levels^2 entries")
}

/// `Re sum sigma[n, m] psi_n conj(psi_m)`.
fn quadratic_form(sigma: &SingleModeDensityMatrix, psi: &[C64]) -> f64 {
    let l = psi.len();
    let s = sigma.as_slice();
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..l {
        let mut row = C64::new(0.0, 0.0);
        for m in 0..l {
            row += s[n * l + m] * psi[m].conj();
        }
        acc += psi[n] * row;
    }
    acc.re
}

/// Quadrature distribution of a single-mode state at phase `theta1`.
pub fn signal_distribution(sigma: &SingleModeDensityMatrix, theta1: f64, grid: &QuadratureGrid) -> DistributionSeries {
    let levels = sigma.cutoff().levels();
    let values = grid.points.iter().map(|&x| quadratic_form(sigma, &quad_wavefunctions(levels, x, theta1))).collect();
    DistributionSeries {
        points: grid.points.clone(),
        values,
        theta: theta1,
        normalization: 1.0,
        time: None,
        metadata: Vec::new(),
    }
}

/// `(P_max - P_min) / (P_max + P_min)` with `P_max` the global maximum and
/// `P_min` the smallest local minimum between the two outermost local maxima;
/// zero with fewer than two local maxima.
pub fn fringe_visibility(p: &DistributionSeries) -> f64 {
    let peaks = p.local_maxima();
    if peaks.len() < 2 {
        return 0.0;
    }
    let (first, last) = (peaks[0], peaks[peaks.len() - 1]);
    let v = &p.values;
    let p_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_min =
        (first + 1..last).filter(|&i| v[i] <= v[i - 1] && v[i] <= v[i + 1]).map(|i| v[i]).fold(f64::INFINITY, f64::min);
    if !p_min.is_finite() {
        return 0.0;
    }
    let p_min = p_min.max(0.0);
    (p_max - p_min) / (p_max + p_min)
}
