//! Fidelity of evolved states against pure references.
//!
//! Two conventions are reported side by side: the squared overlap
//! `<psi|rho|psi>` and its square root. They agree at 1 and differ elsewhere.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{SingleModeDensityMatrix, TwoModeDensityMatrix, TwoModePureState};
use crate::integrator::{Observer, Trajectory};
use crate::measurement::condition_on_idler;
use crate::states::{cat_state, circle_state, CatParity, CircleParams};

/// Clip events larger than this are logged.
pub const CLIP_WARN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityRecord {
    pub tau: f64,
    pub f_overlap: f64,
    pub f_sqrt: f64,
    /// Raw overlap minus the clipped value.
    pub clipped: f64,
}

impl FidelityRecord {
    fn from_raw(tau: f64, raw: f64) -> Self {
        let f = raw.clamp(0.0, 1.0);
        let clipped = raw - f;
        if clipped.abs() > CLIP_WARN {
            log::warn!("fidelity {raw} clipped to [0, 1] at tau = {tau}");
        }
        Self { tau, f_overlap: f, f_sqrt: f.sqrt(), clipped }
    }

    pub fn at(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }
}

/// `<psi|rho|psi>` for a two-mode reference.
pub fn pure_fidelity(psi: &TwoModePureState, rho: &TwoModeDensityMatrix) -> Result<FidelityRecord> {
    psi.cutoff().ensure_same(rho.cutoff())?;
    let amp = psi.amplitudes();
    let dim = amp.len();
    let flat = rho.as_slice();
    let mut acc = C64::new(0.0, 0.0);
    for (r, a) in amp.iter().enumerate() {
        if *a == C64::new(0.0, 0.0) {
            continue;
        }
        let row = &flat[r * dim..(r + 1) * dim];
        let inner: C64 = row.iter().zip(amp).map(|(v, b)| v * b).sum();
        acc += a.conj() * inner;
    }
    Ok(FidelityRecord::from_raw(0.0, acc.re))
}

/// `<psi|sigma|psi>` for a single-mode reference.
pub fn single_mode_fidelity(psi: &[C64], sigma: &SingleModeDensityMatrix) -> Result<FidelityRecord> {
    Ok(FidelityRecord::from_raw(0.0, sigma.expectation(psi)?.re))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FidelitySeries {
    pub records: Vec<FidelityRecord>,
    /// `(tau, reason)` for records that could not be evaluated.
    pub skipped: Vec<(f64, String)>,
}

impl FidelitySeries {
    /// Record with the largest overlap (both conventions share the argmax).
    pub fn max(&self) -> Option<FidelityRecord> {
        self.records.iter().copied().fold(None, |best: Option<FidelityRecord>, r| match best {
            Some(b) if b.f_overlap >= r.f_overlap => Some(b),
            _ => Some(r),
        })
    }

    /// Rebuilds a series from observer columns `<prefix>_f_overlap`.
    pub fn from_observables(trajectory: &Trajectory, prefix: &str) -> Self {
        let key = format!("{prefix}_f_overlap");
        let clip_key = format!("{prefix}_clipped");
        let mut series = FidelitySeries::default();
        for r in &trajectory.records {
            match r.observable(&key) {
                Some(f) if f.is_finite() => series.records.push(FidelityRecord {
                    tau: r.tau,
                    f_overlap: f,
                    f_sqrt: f.sqrt(),
                    clipped: r.observable(&clip_key).unwrap_or(0.0),
                }),
                _ => series.skipped.push((r.tau, format!("no {key} value"))),
            }
        }
        series
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,f_overlap,f_sqrt")?;
        for r in &self.records {
            writeln!(w, "{},{:.12e},{:.12e}", r.tau, r.f_overlap, r.f_sqrt)?;
        }
        Ok(())
    }
}

fn snapshots(trajectory: &Trajectory) -> Result<Vec<(f64, &crate::integrator::Snapshot)>> {
    trajectory
        .records
        .iter()
        .map(|r| {
            r.snapshot
                .as_ref()
                .map(|s| (r.tau, s))
                .ok_or_else(|| Error::InvalidParameter(format!("trajectory record at tau = {} has no snapshot", r.tau)))
        })
        .collect()
}

/// Circle-state fidelity of every snapshot.
pub fn circle_fidelity_series(trajectory: &Trajectory, params: CircleParams) -> Result<FidelitySeries> {
    let snaps = snapshots(trajectory)?;
    let Some((_, first)) = snaps.first() else {
        return Ok(FidelitySeries::default());
    };
    let reference = circle_state(params, first.to_density().cutoff());
    let records = snaps
        .par_iter()
        .map(|(tau, s)| pure_fidelity(&reference, &s.to_density()).map(|f| f.at(*tau)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelitySeries { records, skipped: Vec::new() })
}

/// Fidelity of the signal state, conditioned on the idler reading `x = 0` at
/// `theta = 0`, against the even cat `|i beta> + |-i beta>`.
pub fn cat_fidelity_series(trajectory: &Trajectory, beta: f64) -> Result<FidelitySeries> {
    let snaps = snapshots(trajectory)?;
    let Some((_, first)) = snaps.first() else {
        return Ok(FidelitySeries::default());
    };
    let cutoff = first.to_density().cutoff();
    let reference = cat_state(C64::new(0.0, beta), CatParity::Even, cutoff)?;
    let outcomes: Vec<_> = snaps
        .par_iter()
        .map(|(tau, s)| match condition_on_idler(&s.to_density(), 0.0, 0.0) {
            Ok(c) => single_mode_fidelity(&reference, &c.normalized).map(|f| Ok(f.at(*tau))),
            Err(Error::NullConditioning(w)) => Ok(Err((*tau, format!("null conditioning weight {w:e}")))),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut series = FidelitySeries::default();
    for o in outcomes {
        match o {
            Ok(r) => series.records.push(r),
            Err(skip) => {
                log::warn!("cat fidelity skipped at tau = {}: {}", skip.0, skip.1);
                series.skipped.push(skip);
            }
        }
    }
    Ok(series)
}

/// Observer emitting `circle_f_overlap`, `circle_f_sqrt`, `circle_clipped`.
pub struct CircleFidelityObserver {
    reference: TwoModePureState,
}

impl CircleFidelityObserver {
    pub fn new(params: CircleParams, cutoff: crate::fock::Cutoff) -> Self {
        Self { reference: circle_state(params, cutoff) }
    }
}

impl Observer for CircleFidelityObserver {
    fn observe(&mut self, _tau: f64, rho: &TwoModeDensityMatrix) -> Result<Vec<(String, f64)>> {
        let f = pure_fidelity(&self.reference, rho)?;
        Ok(vec![
            ("circle_f_overlap".into(), f.f_overlap),
            ("circle_f_sqrt".into(), f.f_sqrt),
            ("circle_clipped".into(), f.clipped),
        ])
    }
}

/// Observer emitting `cat_f_overlap`, `cat_f_sqrt`, `cat_clipped` and the
/// conditioning weight `cat_weight`; a null slice yields `NaN` fidelities.
pub struct CatFidelityObserver {
    reference: Vec<C64>,
}

impl CatFidelityObserver {
    pub fn new(beta: f64, cutoff: crate::fock::Cutoff) -> Result<Self> {
        Ok(Self { reference: cat_state(C64::new(0.0, beta), CatParity::Even, cutoff)? })
    }
}

impl Observer for CatFidelityObserver {
    fn observe(&mut self, tau: f64, rho: &TwoModeDensityMatrix) -> Result<Vec<(String, f64)>> {
        match condition_on_idler(rho, 0.0, 0.0) {
            Ok(c) => {
                let f = single_mode_fidelity(&self.reference, &c.normalized)?;
                Ok(vec![
                    ("cat_f_overlap".into(), f.f_overlap),
                    ("cat_f_sqrt".into(), f.f_sqrt),
                    ("cat_clipped".into(), f.clipped),
                    ("cat_weight".into(), c.weight),
                ])
            }
            Err(Error::NullConditioning(w)) => {
                log::warn!("cat fidelity skipped at tau = {tau}: null conditioning weight {w:e}");
                Ok(vec![
                    ("cat_f_overlap".into(), f64::NAN),
                    ("cat_f_sqrt".into(), f64::NAN),
                    ("cat_clipped".into(), 0.0),
                    ("cat_weight".into(), w),
                ])
            }
            Err(e) => Err(e),
        }
    }
}
