//! Brute-force references for validating the production code paths.
//!
//! The dense generator here is assembled from explicit ladder-operator
//! matrices and Kronecker products. It shares no index arithmetic with
//! [`crate::liouvillian`], so agreement between the two is a real check.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::fock::{Cutoff, SingleModeDensityMatrix};
use crate::liouvillian::OscillatorParams;

/// Largest cutoff the dense oracle accepts; the superoperator has
/// `(n_max + 1)^8` entries.
pub const DENSE_CUTOFF_LIMIT: usize = 6;

/// Dense operator on the flattened two-mode basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

/// Working precision of the dense assembly. Entries are products of several
/// square roots and reach `~10^4`, so plain doubles would accumulate a few
/// ulps; double-double keeps every entry correct to the final rounding.
type Wide = TwoFloat;

fn wide_annihilation(levels: usize) -> DMatrix<Wide> {
    DMatrix::from_fn(levels, levels, |r, c| if c == r + 1 { Wide::from(c as f64).sqrt() } else { Wide::from(0.0) })
}

fn wide_identity(n: usize) -> DMatrix<Wide> {
    DMatrix::from_fn(n, n, |r, c| Wide::from(if r == c { 1.0 } else { 0.0 }))
}

/// Nearest double, ties to even. Square roots squared come back as
/// `n (1 + 1e-32)`, so a residue that sits on the midpoint to within far
/// less than an ulp is an exact tie and is rounded as one.
fn round_wide(v: Wide) -> f64 {
    let (hi, lo) = (v.hi(), v.lo());
    if lo == 0.0 {
        return hi;
    }
    let neighbour = if lo > 0.0 { hi.next_up() } else { hi.next_down() };
    let half = (neighbour - hi) / 2.0;
    if (lo - half).abs() <= 1e-12 * half.abs() {
        hi + half
    } else {
        hi + lo
    }
}

fn narrow(m: &DMatrix<Wide>) -> DMatrix<f64> {
    m.map(round_wide)
}

/// Single-mode annihilation operator, `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(levels: usize) -> DMatrix<f64> {
    narrow(&wide_annihilation(levels))
}

fn wide_ladders(cutoff: Cutoff) -> (DMatrix<Wide>, DMatrix<Wide>) {
    let a = wide_annihilation(cutoff.levels());
    let id = wide_identity(cutoff.levels());
    (a.kronecker(&id), id.kronecker(&a))
}

/// Signal and idler annihilation operators on the two-mode space.
pub fn two_mode_ladders(cutoff: Cutoff) -> (DenseOperator, DenseOperator) {
    let (a1, a2) = wide_ladders(cutoff);
    (DenseOperator(narrow(&a1)), DenseOperator(narrow(&a2)))
}

/// `rho -> A rho` on row-major flattened matrices.
fn left(a: &DMatrix<Wide>) -> DMatrix<Wide> {
    a.kronecker(&wide_identity(a.nrows()))
}

/// `rho -> rho B` on row-major flattened matrices.
fn right(b: &DMatrix<Wide>) -> DMatrix<Wide> {
    wide_identity(b.nrows()).kronecker(&b.transpose())
}

/// `rho -> A rho B`, i.e. `A (x) B^T`.
fn sandwich(a: &DMatrix<Wide>, b: &DMatrix<Wide>) -> DMatrix<Wide> {
    a.kronecker(&b.transpose())
}

/// `2 L rho L^+ - L^+ L rho - rho L^+ L` for a real jump operator.
fn dissipator(jump: &DMatrix<Wide>) -> DMatrix<Wide> {
    let jd = jump.transpose();
    let jdj = &jd * jump;
    let two = Wide::from(2.0);
    sandwich(jump, &jd).map(|v| v * two) - left(&jdj) - right(&jdj)
}

/// The dense generator split by coupling, `lambda * pump + g2 * pair + loss`,
/// so parameter scans pay for the Kronecker products once per cutoff.
#[derive(Clone, Debug)]
pub struct DenseGeneratorParts {
    cutoff: Cutoff,
    pump: DMatrix<Wide>,
    pair: DMatrix<Wide>,
    loss: DMatrix<Wide>,
}

impl DenseGeneratorParts {
    pub fn new(cutoff: Cutoff) -> Result<Self> {
        if cutoff.n_max() > DENSE_CUTOFF_LIMIT {
            return Err(Error::OracleTooLarge { n_max: cutoff.n_max(), limit: DENSE_CUTOFF_LIMIT });
        }
        let (a1, a2) = wide_ladders(cutoff);
        let pair_annihilation = &a1 * &a2;
        let k = pair_annihilation.transpose() - &pair_annihilation;
        Ok(Self {
            cutoff,
            pump: left(&k) - right(&k),
            pair: dissipator(&pair_annihilation),
            loss: dissipator(&a1) + dissipator(&a2),
        })
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn assemble(&self, params: OscillatorParams) -> DenseOperator {
        let (lambda, g2) = (Wide::from(params.lambda()), Wide::from(params.g2()));
        let values = self
            .pump
            .iter()
            .zip(self.pair.iter())
            .zip(self.loss.iter())
            .map(|((&h, &t), &s)| round_wide(h * lambda + t * g2 + s));
        DenseOperator(DMatrix::from_iterator(self.pump.nrows(), self.pump.ncols(), values))
    }
}

/// Generator assembled from the operator form of the master equation.
pub fn dense_liouvillian(params: OscillatorParams, cutoff: Cutoff) -> Result<DenseOperator> {
    Ok(DenseGeneratorParts::new(cutoff)?.assemble(params))
}

/// `|alpha e^{-tau}><alpha e^{-tau}|` truncated to the cutoff; the textbook
/// solution of the linear-loss master equation from a coherent state.
pub fn coherent_decay_reference(alpha: C64, tau: f64, cutoff: Cutoff) -> SingleModeDensityMatrix {
    let amplitude = alpha * (-tau).exp();
    let mut psi = Vec::with_capacity(cutoff.levels());
    let mut log_fact = 0.0f64;
    for n in 0..cutoff.levels() {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        // e^{-|a|^2/2} a^n / sqrt(n!) evaluated from the closed form
        let mag = if amplitude.norm() == 0.0 {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-(amplitude.norm_sqr()) / 2.0 + n as f64 * amplitude.norm().ln() - 0.5 * log_fact).exp()
        };
        psi.push(C64::from_polar(mag, n as f64 * amplitude.arg()));
    }
    SingleModeDensityMatrix::from_pure(cutoff, &psi).expect("length matches cutoff")
}
