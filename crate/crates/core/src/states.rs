//! Ideal reference states: coherent states, the equal-number pair-coherent
//! ("circle") state, the two-mode squeezed state of the parametric amplifier
//! and single-mode cat states.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Cutoff, TwoModeDensityMatrix, TwoModePureState};

/// A truncated expansion together with the probability mass that fell
/// outside the basis (`1 - sum |c_n|^2`).
#[derive(Clone, Debug, PartialEq)]
pub struct Truncated<T> {
    pub value: T,
    pub tail_mass: f64,
}

/// Coherent amplitude `r0` of the circle decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleParams {
    r0: f64,
}

impl CircleParams {
    pub fn new(r0: f64) -> Result<Self> {
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(Error::InvalidParameter(format!("circle radius must be >= 0, got {r0}")));
        }
        Ok(Self { r0 })
    }

    /// Radius associated with the oscillator's pump-to-nonlinearity ratio.
    pub fn from_ratio(lambda_over_g2: f64, mapping: RadiusMapping) -> Result<Self> {
        if !(lambda_over_g2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("ratio must be >= 0, got {lambda_over_g2}")));
        }
        Self::new(mapping.radius(lambda_over_g2))
    }

    pub fn r0(self) -> f64 {
        self.r0
    }
}

/// How the ratio `lambda / g^2` translates into a circle radius (and the
/// amplitude of the conditioned cat).
///
/// The two-photon dissipator and the pump combine into
/// `g^2 D[a1 a2 - lambda/g^2]`, whose dark state satisfies
/// `a1 a2 |psi> = (lambda/g^2) |psi>`, i.e. `r0^2 = lambda / g^2`. The cat
/// label `|i lambda/g^2> + |-i lambda/g^2>` suggests `r0 = lambda / g^2`
/// instead; both are available.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusMapping {
    /// `r0 = sqrt(lambda / g^2)`, the dark state of the dissipator.
    #[default]
    Sqrt,
    /// `r0 = lambda / g^2`, read off the cat label.
    Linear,
}

impl RadiusMapping {
    pub fn radius(self, lambda_over_g2: f64) -> f64 {
        match self {
            RadiusMapping::Sqrt => lambda_over_g2.sqrt(),
            RadiusMapping::Linear => lambda_over_g2,
        }
    }
}

impl std::str::FromStr for RadiusMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(RadiusMapping::Sqrt),
            "linear" => Ok(RadiusMapping::Linear),
            other => Err(Error::Config(format!("unknown radius mapping '{other}' (sqrt|linear)"))),
        }
    }
}

impl std::fmt::Display for RadiusMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadiusMapping::Sqrt => "sqrt",
            RadiusMapping::Linear => "linear",
        })
    }
}

/// Squeeze argument `r = chi * epsilon * tau` of the parametric amplifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NdpaParams {
    r: f64,
}

impl NdpaParams {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("squeeze argument must be >= 0, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn r(self) -> f64 {
        self.r
    }
}

/// Parity of a cat superposition `|beta> + sign |-beta>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatParity {
    Even,
    Odd,
}

impl CatParity {
    pub fn sign(self) -> f64 {
        match self {
            CatParity::Even => 1.0,
            CatParity::Odd => -1.0,
        }
    }
}

/// Fock coefficients `e^{-|alpha|^2/2} alpha^n / sqrt(n!)`, not renormalized.
pub fn coherent_coefficients(alpha: C64, cutoff: Cutoff) -> Truncated<Vec<C64>> {
    let levels = cutoff.levels();
    if alpha.norm_sqr() > cutoff.n_max() as f64 / 2.0 {
        log::warn!(
            "coherent amplitude |alpha|^2 = {:.3} is not small against n_max = {}",
            alpha.norm_sqr(),
            cutoff.n_max()
        );
    }
    let mut coeffs = Vec::with_capacity(levels);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    coeffs.push(c);
    for n in 1..levels {
        c = c * alpha / (n as f64).sqrt();
        coeffs.push(c);
    }
    let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    Truncated { value: coeffs, tail_mass: 1.0 - kept }
}

/// Equal-number pair-coherent state with amplitudes proportional to
/// `r0^{2n} / n!` on the `|n>|n>` diagonal, renormalized over the basis.
pub fn circle_state(params: CircleParams, cutoff: Cutoff) -> TwoModePureState {
    let levels = cutoff.levels();
    let z = params.r0 * params.r0;
    if z > cutoff.n_max() as f64 / 2.0 {
        log::warn!("circle radius^2 = {z:.3} is not small against n_max = {}", cutoff.n_max());
    }
    let mut diag = Vec::with_capacity(levels);
    let mut c = 1.0f64;
    diag.push(c);
    for n in 1..levels {
        c *= z / n as f64;
        diag.push(c);
    }
    let norm = diag.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut amp = vec![C64::new(0.0, 0.0); cutoff.pair_dim()];
    for (n, c) in diag.iter().enumerate() {
        amp[n * levels + n] = C64::new(c / norm, 0.0);
    }
    TwoModePureState::from_raw(cutoff, amp).expect("length matches cutoff")
}

/// Two-mode squeezed vacuum `sum tanh^n(r) / cosh(r) |n>|n>`, truncated.
pub fn ndpa_state(params: NdpaParams, cutoff: Cutoff) -> Truncated<TwoModePureState> {
    let levels = cutoff.levels();
    let t = params.r.tanh();
    let mut amp = vec![C64::new(0.0, 0.0); cutoff.pair_dim()];
    let mut c = 1.0 / params.r.cosh();
    let mut kept = 0.0;
    for n in 0..levels {
        amp[n * levels + n] = C64::new(c, 0.0);
        kept += c * c;
        c *= t;
    }
    let tail_mass = 1.0 - kept;
    if tail_mass > 1e-8 {
        log::warn!("squeezed state truncation tail {tail_mass:e} exceeds 1e-8");
    }
    let state = TwoModePureState::from_raw(cutoff, amp).expect("length matches cutoff");
    Truncated { value: state, tail_mass }
}

/// Normalized single-mode cat `|beta> + sign |-beta>`.
///
/// Uses the analytic norm `2 (1 + sign e^{-2|beta|^2})` and then divides out
/// the remaining truncation deficit so the returned vector has unit norm.
pub fn cat_state(beta: C64, parity: CatParity, cutoff: Cutoff) -> Result<Vec<C64>> {
    let overlap = (-2.0 * beta.norm_sqr()).exp();
    let norm_sqr = 2.0 * (1.0 + parity.sign() * overlap);
    if parity == CatParity::Odd && beta.norm_sqr() == 0.0 {
        return Err(Error::NullCatState);
    }
    let coherent = coherent_coefficients(beta, cutoff).value;
    let keep_even = parity == CatParity::Even;
    let scale = 2.0 / norm_sqr.sqrt();
    let mut coeffs: Vec<C64> = coherent
        .iter()
        .enumerate()
        .map(|(n, c)| if (n % 2 == 0) == keep_even { c * scale } else { C64::new(0.0, 0.0) })
        .collect();
    let kept = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if kept == 0.0 {
        return Err(Error::NullCatState);
    }
    for c in &mut coeffs {
        *c /= kept;
    }
    Ok(coeffs)
}

/// Product `|a>|b>` of two single-mode coefficient vectors.
pub fn product_state(signal: &[C64], idler: &[C64], cutoff: Cutoff) -> Result<TwoModePureState> {
    let levels = cutoff.levels();
    for v in [signal, idler] {
        if v.len() != levels {
            return Err(Error::LengthMismatch { expected: levels, found: v.len() });
        }
    }
    let amp = signal.iter().flat_map(|a| idler.iter().map(move |b| a * b)).collect();
    TwoModePureState::from_raw(cutoff, amp)
}

/// `|psi><psi|`.
pub fn pure_to_density(psi: &TwoModePureState) -> TwoModeDensityMatrix {
    let cutoff = psi.cutoff();
    let amp = psi.amplitudes();
    let mut data = Vec::with_capacity(cutoff.super_dim());
    for a in amp {
        for b in amp {
            data.push(a * b.conj());
        }
    }
    TwoModeDensityMatrix::from_flat(cutoff, data).expect("outer product has super_dim entries")
}
