//! Truncated two-mode Fock space.
//!
//! Both modes share the same cutoff `n_max`, so each mode has `n_max + 1`
//! levels and a pair `(n1, n2)` is flattened row-major with `n1` outer:
//! `flat = n1 * (n_max + 1) + n2`. Two-mode density matrices are stored as a
//! dense row-major matrix over these pair indices, i.e. the element
//! `rho[n1, n2; m1, m2]` lives at `flat(n1, n2) * dim + flat(m1, m2)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance on `|sum |amp|^2 - 1|` accepted by [`TwoModePureState::new`].
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Hermiticity defect beyond which [`TwoModeDensityMatrix::min_eigenvalue`]
/// refuses to run.
pub const HERMITICITY_TOLERANCE: f64 = 1e-8;

/// Smallest eigenvalue tolerated for evolved states.
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// Highest retained Fock level per mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cutoff(usize);

impl Cutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidCutoff(n_max));
        }
        Ok(Self(n_max))
    }

    pub fn n_max(self) -> usize {
        self.0
    }

    /// Levels per mode, `n_max + 1`.
    pub fn levels(self) -> usize {
        self.0 + 1
    }

    /// Dimension of the two-mode Hilbert space.
    pub fn pair_dim(self) -> usize {
        self.levels() * self.levels()
    }

    /// Length of a flattened two-mode density matrix.
    pub fn super_dim(self) -> usize {
        self.pair_dim() * self.pair_dim()
    }

    pub(crate) fn ensure_same(self, other: Cutoff) -> Result<()> {
        if self != other {
            return Err(Error::CutoffMismatch { expected: self.0, found: other.0 });
        }
        Ok(())
    }
}

/// Row-major pair index with `n1` outer.
pub fn flat_index(n1: usize, n2: usize, cutoff: Cutoff) -> Result<usize> {
    let n_max = cutoff.n_max();
    if n1 > n_max || n2 > n_max {
        return Err(Error::LevelOutOfRange { n1, n2, n_max });
    }
    Ok(n1 * cutoff.levels() + n2)
}

/// Inverse of [`flat_index`].
pub fn unflat_index(index: usize, cutoff: Cutoff) -> Result<(usize, usize)> {
    if index >= cutoff.pair_dim() {
        return Err(Error::LengthMismatch { expected: cutoff.pair_dim(), found: index + 1 });
    }
    Ok((index / cutoff.levels(), index % cutoff.levels()))
}

/// Which of the two modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Signal,
    Idler,
}

/// Pure two-mode state, amplitudes indexed by [`flat_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModePureState {
    cutoff: Cutoff,
    amp: Vec<C64>,
}

impl TwoModePureState {
    /// Checked constructor; amplitudes must be normalized within
    /// [`NORM_TOLERANCE`].
    pub fn new(cutoff: Cutoff, amp: Vec<C64>) -> Result<Self> {
        let state = Self::from_raw(cutoff, amp)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Unchecked normalization, used by constructors that report their own
    /// truncation tail.
    pub(crate) fn from_raw(cutoff: Cutoff, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != cutoff.pair_dim() {
            return Err(Error::LengthMismatch { expected: cutoff.pair_dim(), found: amp.len() });
        }
        Ok(Self { cutoff, amp })
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn amp(&self, n1: usize, n2: usize) -> C64 {
        self.amp[n1 * self.cutoff.levels() + n2]
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &TwoModePureState) -> Result<C64> {
        self.cutoff.ensure_same(other.cutoff)?;
        Ok(self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum())
    }
}

/// Dense two-mode density matrix over the flattened pair basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeDensityMatrix {
    cutoff: Cutoff,
    data: Vec<C64>,
}

impl TwoModeDensityMatrix {
    pub fn zeros(cutoff: Cutoff) -> Self {
        Self { cutoff, data: vec![C64::new(0.0, 0.0); cutoff.super_dim()] }
    }

    /// `|n1 n2><n1 n2|`.
    pub fn basis_projector(cutoff: Cutoff, n1: usize, n2: usize) -> Result<Self> {
        let k = flat_index(n1, n2, cutoff)?;
        let mut rho = Self::zeros(cutoff);
        rho.data[k * cutoff.pair_dim() + k] = C64::new(1.0, 0.0);
        Ok(rho)
    }

    pub fn vacuum(cutoff: Cutoff) -> Self {
        Self::basis_projector(cutoff, 0, 0).expect("vacuum is always inside the basis")
    }

    pub fn from_flat(cutoff: Cutoff, data: Vec<C64>) -> Result<Self> {
        if data.len() != cutoff.super_dim() {
            return Err(Error::LengthMismatch { expected: cutoff.super_dim(), found: data.len() });
        }
        Ok(Self { cutoff, data })
    }

    /// Tensor product `rho_signal (x) rho_idler`.
    pub fn product(signal: &SingleModeDensityMatrix, idler: &SingleModeDensityMatrix) -> Result<Self> {
        signal.cutoff.ensure_same(idler.cutoff)?;
        let cutoff = signal.cutoff;
        let l = cutoff.levels();
        let dim = cutoff.pair_dim();
        let mut rho = Self::zeros(cutoff);
        for n1 in 0..l {
            for n2 in 0..l {
                for m1 in 0..l {
                    for m2 in 0..l {
                        rho.data[(n1 * l + n2) * dim + m1 * l + m2] = signal.get(n1, m1) * idler.get(n2, m2);
                    }
                }
            }
        }
        Ok(rho)
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, n1: usize, n2: usize, m1: usize, m2: usize) -> C64 {
        let l = self.cutoff.levels();
        self.data[(n1 * l + n2) * self.cutoff.pair_dim() + m1 * l + m2]
    }

    pub fn set(&mut self, n1: usize, n2: usize, m1: usize, m2: usize, value: C64) {
        let l = self.cutoff.levels();
        let dim = self.cutoff.pair_dim();
        self.data[(n1 * l + n2) * dim + m1 * l + m2] = value;
    }

    /// Element by pair indices.
    pub fn at(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.cutoff.pair_dim() + col]
    }

    pub fn trace(&self) -> C64 {
        let dim = self.cutoff.pair_dim();
        (0..dim).map(|k| self.data[k * dim + k]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.cutoff.pair_dim();
        let mut out = Self::zeros(self.cutoff);
        for r in 0..dim {
            for c in 0..dim {
                out.data[c * dim + r] = self.data[r * dim + c].conj();
            }
        }
        out
    }

    /// Max entrywise `|rho - rho^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.cutoff.pair_dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.data[r * dim + c] - self.data[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    ///
    /// The matrix is split into the connected components of its nonzero
    /// pattern first. Evolved states from the vacuum are block diagonal in the
    /// photon-number difference, so this keeps the eigensolves small.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let defect = self.hermiticity_defect();
        if defect > HERMITICITY_TOLERANCE {
            return Err(Error::NotHermitian { defect, tolerance: HERMITICITY_TOLERANCE });
        }
        let dim = self.cutoff.pair_dim();
        let mut min = f64::INFINITY;
        for block in nonzero_components(dim, |r, c| self.data[r * dim + c] != C64::new(0.0, 0.0)) {
            let n = block.len();
            let m = DMatrix::from_fn(n, n, |i, j| {
                let a = self.data[block[i] * dim + block[j]];
                let b = self.data[block[j] * dim + block[i]].conj();
                (a + b) * 0.5
            });
            let ev = m.symmetric_eigenvalues();
            min = min.min(ev.min());
        }
        Ok(min)
    }

    /// Population with `n1 == n_max` or `n2 == n_max`.
    pub fn leakage(&self) -> f64 {
        self.guard_band_population(1)
    }

    /// Population with `max(n1, n2) > n_max - width`.
    pub fn guard_band_population(&self, width: usize) -> f64 {
        let l = self.cutoff.levels();
        let dim = self.cutoff.pair_dim();
        let threshold = l.saturating_sub(width);
        let mut pop = 0.0;
        for n1 in 0..l {
            for n2 in 0..l {
                if n1 >= threshold || n2 >= threshold {
                    let k = n1 * l + n2;
                    pop += self.data[k * dim + k].re;
                }
            }
        }
        pop
    }

    /// Reduced state of `keep`.
    pub fn partial_trace(&self, keep: Mode) -> SingleModeDensityMatrix {
        let l = self.cutoff.levels();
        let mut out = SingleModeDensityMatrix::zeros(self.cutoff);
        for n in 0..l {
            for m in 0..l {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..l {
                    acc += match keep {
                        Mode::Signal => self.get(n, k, m, k),
                        Mode::Idler => self.get(k, n, k, m),
                    };
                }
                out.data[n * l + m] = acc;
            }
        }
        out
    }

    /// `<n1 - n2>` and `<(n1 - n2)^2>`.
    pub fn number_difference_moments(&self) -> (f64, f64) {
        let l = self.cutoff.levels();
        let dim = self.cutoff.pair_dim();
        let (mut first, mut second) = (0.0, 0.0);
        for n1 in 0..l {
            for n2 in 0..l {
                let k = n1 * l + n2;
                let p = self.data[k * dim + k].re;
                let d = n1 as f64 - n2 as f64;
                first += d * p;
                second += d * d * p;
            }
        }
        (first, second)
    }

    /// `<a_mode^dagger a_mode>`.
    pub fn mean_photon_number(&self, mode: Mode) -> f64 {
        let reduced = self.partial_trace(mode);
        (0..self.cutoff.levels()).map(|n| n as f64 * reduced.get(n, n).re).sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { cutoff: self.cutoff, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: C64, other: &Self) -> Result<Self> {
        self.cutoff.ensure_same(other.cutoff)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect();
        Ok(Self { cutoff: self.cutoff, data })
    }

    /// Max entrywise `|self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.cutoff.ensure_same(other.cutoff)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Single-mode density matrix, possibly unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeDensityMatrix {
    cutoff: Cutoff,
    data: Vec<C64>,
}

impl SingleModeDensityMatrix {
    pub fn zeros(cutoff: Cutoff) -> Self {
        let l = cutoff.levels();
        Self { cutoff, data: vec![C64::new(0.0, 0.0); l * l] }
    }

    pub fn from_flat(cutoff: Cutoff, data: Vec<C64>) -> Result<Self> {
        let l = cutoff.levels();
        if data.len() != l * l {
            return Err(Error::LengthMismatch { expected: l * l, found: data.len() });
        }
        Ok(Self { cutoff, data })
    }

    /// `|psi><psi|` for a single-mode coefficient vector.
    pub fn from_pure(cutoff: Cutoff, psi: &[C64]) -> Result<Self> {
        let l = cutoff.levels();
        if psi.len() != l {
            return Err(Error::LengthMismatch { expected: l, found: psi.len() });
        }
        let mut data = Vec::with_capacity(l * l);
        for a in psi {
            for b in psi {
                data.push(a * b.conj());
            }
        }
        Ok(Self { cutoff, data })
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.data[n * self.cutoff.levels() + m]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        let l = self.cutoff.levels();
        (0..l).map(|n| self.data[n * l + n]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let l = self.cutoff.levels();
        let mut worst = 0.0f64;
        for n in 0..l {
            for m in n..l {
                worst = worst.max((self.data[n * l + m] - self.data[m * l + n].conj()).norm());
            }
        }
        worst
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { cutoff: self.cutoff, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// `<psi|sigma|psi>` for a single-mode coefficient vector.
    pub fn expectation(&self, psi: &[C64]) -> Result<C64> {
        let l = self.cutoff.levels();
        if psi.len() != l {
            return Err(Error::LengthMismatch { expected: l, found: psi.len() });
        }
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..l {
            let row: C64 = (0..l).map(|m| self.data[n * l + m] * psi[m]).sum();
            acc += psi[n].conj() * row;
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.cutoff.ensure_same(other.cutoff)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Connected components of the symmetric nonzero pattern of a square matrix.
fn nonzero_components(dim: usize, nonzero: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for r in 0..dim {
        for c in (r + 1)..dim {
            if nonzero(r, c) || nonzero(c, r) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for k in 0..dim {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(k);
    }
    groups.into_values().collect()
}
