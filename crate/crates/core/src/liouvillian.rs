//! Number-basis supermatrix of the adiabatically eliminated oscillator.
//!
//! In scaled time `tau = gamma t` the generator is
//!
//! ```text
//! d rho / d tau = lambda [a1^+ a2^+ - a1 a2, rho]
//!               + g^2 (2 a1 a2 rho a1^+ a2^+ - n1 n2 rho - rho n1 n2)
//!               + sum_j (2 a_j rho a_j^+ - n_j rho - rho n_j)
//! ```
//!
//! Every coefficient is real, so the operator is stored as a real CSR matrix
//! acting on the complex flattened density matrix. Ladder operators are
//! truncated at `n_max`; terms that would reach `n_max + 1` are dropped, which
//! is exactly the truncated-matrix generator and therefore trace preserving.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{Cutoff, TwoModeDensityMatrix};

/// Row count above which `apply` splits work across threads.
const PARALLEL_ROWS: usize = 1 << 14;

/// Scaled pump `lambda = eps kappa / (gamma3 gamma)` and nonlinearity
/// `g^2 = kappa^2 / (gamma3 gamma)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorParams {
    lambda: f64,
    g2: f64,
}

impl OscillatorParams {
    pub fn new(lambda: f64, g2: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(g2 > 0.0) || !g2.is_finite() {
            return Err(Error::InvalidParameter(format!("g^2 must be > 0, got {g2}")));
        }
        Ok(Self { lambda, g2 })
    }

    /// Parameters from the ratio `lambda / g^2` and `g^2`.
    pub fn from_ratio(ratio: f64, g2: f64) -> Result<Self> {
        Self::new(ratio * g2, g2)
    }

    /// Parameters from the unscaled rates: nonlinear coupling `kappa`,
    /// signal/idler damping `gamma`, pump damping `gamma3` and drive `epsilon`.
    pub fn from_physical(kappa: f64, gamma: f64, gamma3: f64, epsilon: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma3 > 0.0) {
            return Err(Error::InvalidParameter("damping rates must be positive".into()));
        }
        Self::new(epsilon * kappa / (gamma3 * gamma), kappa * kappa / (gamma3 * gamma))
    }

    /// Loss-only generator (no pump, no two-photon loss). Not reachable
    /// through [`OscillatorParams::new`] because `g^2 = 0` is rejected there.
    pub fn linear_loss_only() -> Self {
        Self { lambda: 0.0, g2: 0.0 }
    }

    pub fn lambda(self) -> f64 {
        self.lambda
    }

    pub fn g2(self) -> f64 {
        self.g2
    }

    pub fn ratio(self) -> f64 {
        self.lambda / self.g2
    }
}

/// `c * sqrt(n)` with a single final rounding. The root's residual is
/// carried separately so large coefficients land on the nearest double.
fn scaled_sqrt(c: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let s = n.sqrt();
    let s_lo = (-s).mul_add(s, n) / (2.0 * s);
    let p = c * s;
    p + (c.mul_add(s, -p) + c * s_lo)
}

/// Sparse real generator over the flattened two-mode density matrix.
#[derive(Clone, Debug)]
pub struct SuperOperator {
    cutoff: Cutoff,
    params: OscillatorParams,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SuperOperator {
    pub fn build(params: OscillatorParams, cutoff: Cutoff) -> Self {
        let l = cutoff.levels();
        let dim = cutoff.pair_dim();
        let n_max = cutoff.n_max();
        let lam = params.lambda;
        let g2 = params.g2;
        let index = |n1: usize, n2: usize, m1: usize, m2: usize| ((n1 * l + n2) * dim + m1 * l + m2) as u32;

        let mut row_ptr = Vec::with_capacity(cutoff.super_dim() + 1);
        let mut cols = Vec::with_capacity(8 * cutoff.super_dim());
        let mut vals = Vec::with_capacity(8 * cutoff.super_dim());
        row_ptr.push(0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(8);
        for i1 in 0..l {
            for i2 in 0..l {
                for j1 in 0..l {
                    for j2 in 0..l {
                        // lambda a1^+ a2^+ rho
                        if i1 >= 1 && i2 >= 1 {
                            entries.push((index(i1 - 1, i2 - 1, j1, j2), scaled_sqrt(lam, i1 * i2)));
                        }
                        // -lambda a1 a2 rho
                        if i1 < n_max && i2 < n_max {
                            entries.push((index(i1 + 1, i2 + 1, j1, j2), scaled_sqrt(-lam, (i1 + 1) * (i2 + 1))));
                        }
                        // lambda rho a1 a2
                        if j1 >= 1 && j2 >= 1 {
                            entries.push((index(i1, i2, j1 - 1, j2 - 1), scaled_sqrt(lam, j1 * j2)));
                        }
                        // -lambda rho a1^+ a2^+
                        if j1 < n_max && j2 < n_max {
                            entries.push((index(i1, i2, j1 + 1, j2 + 1), scaled_sqrt(-lam, (j1 + 1) * (j2 + 1))));
                        }
                        // 2 g^2 a1 a2 rho a1^+ a2^+
                        if i1 < n_max && i2 < n_max && j1 < n_max && j2 < n_max {
                            entries.push((
                                index(i1 + 1, i2 + 1, j1 + 1, j2 + 1),
                                scaled_sqrt(2.0 * g2, (i1 + 1) * (i2 + 1) * (j1 + 1) * (j2 + 1)),
                            ));
                        }
                        // 2 a1 rho a1^+
                        if i1 < n_max && j1 < n_max {
                            entries.push((index(i1 + 1, i2, j1 + 1, j2), scaled_sqrt(2.0, (i1 + 1) * (j1 + 1))));
                        }
                        // 2 a2 rho a2^+
                        if i2 < n_max && j2 < n_max {
                            entries.push((index(i1, i2 + 1, j1, j2 + 1), scaled_sqrt(2.0, (i2 + 1) * (j2 + 1))));
                        }
                        let diag = (-g2).mul_add((i1 * i2 + j1 * j2) as f64, -((i1 + j1 + i2 + j2) as f64));
                        entries.push((index(i1, i2, j1, j2), diag));
                        for (c, v) in entries.drain(..) {
                            if v != 0.0 {
                                cols.push(c);
                                vals.push(v);
                            }
                        }
                        row_ptr.push(cols.len());
                    }
                }
            }
        }
        Self { cutoff, params, row_ptr, cols, vals }
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn params(&self) -> OscillatorParams {
        self.params
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Stored entries of one output row as `(column, value)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[span.clone()].iter().map(|&c| c as usize).zip(self.vals[span].iter().copied())
    }

    /// Coordinate triples `(row, col, value)` in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Largest absolute row sum, a Gershgorin bound on the spectral radius.
    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.dim()).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `d rho / d tau` for the given state.
    pub fn apply(&self, rho: &TwoModeDensityMatrix) -> Result<TwoModeDensityMatrix> {
        self.cutoff.ensure_same(rho.cutoff())?;
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        csr_apply(&self.row_ptr, &self.cols, &self.vals, rho.as_slice(), &mut out);
        TwoModeDensityMatrix::from_flat(self.cutoff, out)
    }

    /// Writes `row col value` lines.
    pub fn write_coordinates<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n_max={} lambda={} g2={}", self.cutoff.n_max(), self.params.lambda, self.params.g2)?;
        writeln!(w, "# rows={} nnz={}", self.dim(), self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }

    /// Restriction to the set of flattened indices reachable from `seed`
    /// through the nonzero pattern.
    ///
    /// That set is invariant under the dynamics: any element outside it has a
    /// derivative that only involves elements outside it, so states supported
    /// on the seed stay supported on the reachable set for all time.
    pub fn restrict_to_reachable(&self, seed: impl IntoIterator<Item = usize>) -> ReducedOperator {
        let dim = self.dim();
        // column -> rows adjacency
        let mut counts = vec![0usize; dim + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for k in 0..dim {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut rows_of = vec![0u32; self.cols.len()];
        for r in 0..dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                rows_of[fill[c]] = r as u32;
                fill[c] += 1;
            }
        }

        let mut local = vec![u32::MAX; dim];
        let mut support: Vec<u32> = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for s in seed {
            if local[s] == u32::MAX {
                local[s] = 0;
                stack.push(s);
            }
        }
        while let Some(c) = stack.pop() {
            support.push(c as u32);
            for &r in &rows_of[counts[c]..counts[c + 1]] {
                if local[r as usize] == u32::MAX {
                    local[r as usize] = 0;
                    stack.push(r as usize);
                }
            }
        }
        support.sort_unstable();
        for (k, &s) in support.iter().enumerate() {
            local[s as usize] = k as u32;
        }

        let mut row_ptr = Vec::with_capacity(support.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &r in &support {
            for (c, v) in self.row(r as usize) {
                // closure guarantees every column feeding a reachable row from
                // inside the set is itself in the set; columns outside carry zeros
                if local[c] != u32::MAX {
                    cols.push(local[c]);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        ReducedOperator { cutoff: self.cutoff, support: Arc::new(support), row_ptr, cols, vals }
    }
}

/// A [`SuperOperator`] restricted to an invariant subset of flattened
/// indices. States are carried as compressed vectors over `support`.
#[derive(Clone, Debug)]
pub struct ReducedOperator {
    cutoff: Cutoff,
    support: Arc<Vec<u32>>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl ReducedOperator {
    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.support.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn support(&self) -> &Arc<Vec<u32>> {
        &self.support
    }

    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        csr_apply(&self.row_ptr, &self.cols, &self.vals, x, out);
    }

    /// Gathers the supported elements of `rho`.
    pub fn compress(&self, rho: &TwoModeDensityMatrix) -> Result<Vec<C64>> {
        self.cutoff.ensure_same(rho.cutoff())?;
        let flat = rho.as_slice();
        Ok(self.support.iter().map(|&k| flat[k as usize]).collect())
    }

    /// Scatters a compressed vector back into a full density matrix.
    pub fn expand(&self, x: &[C64]) -> TwoModeDensityMatrix {
        expand_support(self.cutoff, &self.support, x)
    }
}

pub(crate) fn expand_support(cutoff: Cutoff, support: &[u32], x: &[C64]) -> TwoModeDensityMatrix {
    let mut rho = TwoModeDensityMatrix::zeros(cutoff);
    let flat = rho.as_mut_slice();
    for (&k, v) in support.iter().zip(x) {
        flat[k as usize] = *v;
    }
    rho
}

fn csr_apply(row_ptr: &[usize], cols: &[u32], vals: &[f64], x: &[C64], out: &mut [C64]) {
    let row = |r: usize| {
        let mut acc = C64::new(0.0, 0.0);
        for k in row_ptr[r]..row_ptr[r + 1] {
            acc += x[cols[k] as usize] * vals[k];
        }
        acc
    };
    if out.len() >= PARALLEL_ROWS {
        out.par_chunks_mut(4096).enumerate().for_each(|(chunk, slice)| {
            let base = chunk * 4096;
            for (i, o) in slice.iter_mut().enumerate() {
                *o = row(base + i);
            }
        });
    } else {
        for (r, o) in out.iter_mut().enumerate() {
            *o = row(r);
        }
    }
}
