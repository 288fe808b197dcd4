//! Time stepping of `d rho / d tau = L rho`.
//!
//! [`evolve`] first restricts the generator to the indices reachable from the
//! initial state's support (see [`SuperOperator::restrict_to_reachable`]) and
//! integrates the compressed vector with classical RK4, either at a fixed
//! step or with step doubling. Full density matrices are only materialized at
//! record times.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{Cutoff, TwoModeDensityMatrix};
use crate::liouvillian::{expand_support, ReducedOperator, SuperOperator};

/// Trace drift beyond which [`evolve`] aborts.
pub const DEFAULT_MAX_TRACE_DRIFT: f64 = 1e-4;
/// Top-shell population beyond which [`evolve`] aborts.
pub const DEFAULT_MAX_LEAKAGE: f64 = 1e-4;

/// How the step size is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum StepMode {
    /// RK4 with steps no larger than `dt`, shrunk to land on record times.
    Fixed { dt: f64 },
    /// Fixed step chosen from the generator: see [`auto_step`].
    Auto,
    /// Step-doubling RK4 with a per-step relative error target.
    Adaptive { rel_tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolveControls {
    pub t_end: f64,
    pub mode: StepMode,
    pub record_every: f64,
    pub keep_snapshots: bool,
    pub max_trace_drift: f64,
    pub max_leakage: f64,
}

impl EvolveControls {
    pub fn new(t_end: f64, mode: StepMode, record_every: f64) -> Result<Self> {
        let controls = Self {
            t_end,
            mode,
            record_every,
            keep_snapshots: false,
            max_trace_drift: DEFAULT_MAX_TRACE_DRIFT,
            max_leakage: DEFAULT_MAX_LEAKAGE,
        };
        controls.validate()?;
        Ok(controls)
    }

    pub fn with_snapshots(mut self, keep: bool) -> Self {
        self.keep_snapshots = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if !(self.record_every > 0.0) {
            return Err(Error::InvalidParameter(format!("record_every must be > 0, got {}", self.record_every)));
        }
        match self.mode {
            StepMode::Fixed { dt } if !(dt > 0.0) => Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}"))),
            StepMode::Adaptive { rel_tol } if !(rel_tol > 0.0 && rel_tol <= 1e-3) => {
                Err(Error::InvalidParameter(format!("rel_tol must lie in (0, 1e-3], got {rel_tol}")))
            }
            _ => Ok(()),
        }
    }
}

/// Compressed density matrix kept in a trajectory record.
#[derive(Clone, Debug)]
pub struct Snapshot {
    cutoff: Cutoff,
    support: Arc<Vec<u32>>,
    values: Vec<C64>,
}

impl Snapshot {
    pub fn to_density(&self) -> TwoModeDensityMatrix {
        expand_support(self.cutoff, &self.support, &self.values)
    }
}

#[derive(Clone, Debug)]
pub struct Record {
    pub tau: f64,
    pub observables: Vec<(String, f64)>,
    pub snapshot: Option<Snapshot>,
}

impl Record {
    pub fn observable(&self, name: &str) -> Option<f64> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Time-ordered records, first at `tau = 0`.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn taus(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.tau).collect()
    }

    /// Values of one named observable, with `NaN` where a record lacks it.
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.records.iter().map(|r| r.observable(name).unwrap_or(f64::NAN)).collect()
    }

    /// Column names in first-seen order.
    pub fn observable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.records {
            for (n, _) in &r.observables {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        names
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolveStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub reduced_dim: usize,
    pub reduced_nnz: usize,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub trajectory: Trajectory,
    pub final_state: TwoModeDensityMatrix,
    pub stats: EvolveStats,
}

/// Caller-supplied measurement run at every record time.
pub trait Observer {
    fn observe(&mut self, tau: f64, rho: &TwoModeDensityMatrix) -> Result<Vec<(String, f64)>>;
}

impl<F> Observer for F
where
    F: FnMut(f64, &TwoModeDensityMatrix) -> Result<Vec<(String, f64)>>,
{
    fn observe(&mut self, tau: f64, rho: &TwoModeDensityMatrix) -> Result<Vec<(String, f64)>> {
        self(tau, rho)
    }
}

/// Default fixed step: `min(1e-3, 0.05 / (g^2 (nbar + 1)), 1 / max_row_abs_sum)`
/// with `nbar = lambda / g^2`. The last term keeps `dt * ||L||_inf <= 1`,
/// which the g^2 photon-number rates at the top shell usually dominate.
pub fn auto_step(l: &SuperOperator, row_abs_sum: f64) -> f64 {
    let p = l.params();
    let mut dt = 1e-3f64;
    if p.g2() > 0.0 {
        dt = dt.min(0.05 / (p.g2() * (p.ratio() + 1.0)));
    }
    if row_abs_sum > 0.0 {
        dt = dt.min(1.0 / row_abs_sum);
    }
    dt
}

/// One classical RK4 step on the full flattened state.
pub fn step_rk4(l: &SuperOperator, rho: &TwoModeDensityMatrix, dt: f64) -> Result<TwoModeDensityMatrix> {
    let norm = l.max_row_abs_sum();
    if dt * norm > 1.0 {
        log::warn!("dt * ||L||_inf = {:.3} exceeds 1; RK4 may be unstable", dt * norm);
    }
    let k1 = l.apply(rho)?;
    let k2 = l.apply(&rho.add_scaled(C64::new(dt / 2.0, 0.0), &k1)?)?;
    let k3 = l.apply(&rho.add_scaled(C64::new(dt / 2.0, 0.0), &k2)?)?;
    let k4 = l.apply(&rho.add_scaled(C64::new(dt, 0.0), &k3)?)?;
    let data = rho
        .as_slice()
        .iter()
        .zip(k1.as_slice())
        .zip(k2.as_slice())
        .zip(k3.as_slice())
        .zip(k4.as_slice())
        .map(|((((y, a), b), c), d)| y + (a + b * 2.0 + c * 2.0 + d) * (dt / 6.0))
        .collect();
    TwoModeDensityMatrix::from_flat(rho.cutoff(), data)
}

/// RK4 buffers over a reduced operator.
struct Stepper<'a> {
    op: &'a ReducedOperator,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl<'a> Stepper<'a> {
    fn new(op: &'a ReducedOperator) -> Self {
        let z = vec![C64::new(0.0, 0.0); op.dim()];
        Self { op, k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// Writes `y(t + h)` into `out`.
    fn step(&mut self, y: &[C64], h: f64, out: &mut [C64]) {
        self.op.apply_into(y, &mut self.k1);
        for ((t, y), k) in self.tmp.iter_mut().zip(y).zip(&self.k1) {
            *t = y + k * (h / 2.0);
        }
        self.op.apply_into(&self.tmp, &mut self.k2);
        for ((t, y), k) in self.tmp.iter_mut().zip(y).zip(&self.k2) {
            *t = y + k * (h / 2.0);
        }
        self.op.apply_into(&self.tmp, &mut self.k3);
        for ((t, y), k) in self.tmp.iter_mut().zip(y).zip(&self.k3) {
            *t = y + k * h;
        }
        self.op.apply_into(&self.tmp, &mut self.k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            out[i] = y[i] + (self.k1[i] + self.k2[i] * 2.0 + self.k3[i] * 2.0 + self.k4[i]) * w;
        }
    }
}

fn record_times(controls: &EvolveControls) -> Vec<f64> {
    let mut times = vec![0.0];
    let n = (controls.t_end / controls.record_every - 1e-9).ceil().max(1.0) as usize;
    for k in 1..n {
        times.push(k as f64 * controls.record_every);
    }
    times.push(controls.t_end);
    times
}

/// Integrates from `rho0` to `controls.t_end`, recording built-in
/// diagnostics (`trace`, `trace_drift`, `hermiticity_defect`, `leakage`)
/// followed by every observer's output at each record time.
pub fn evolve(
    l: &SuperOperator,
    rho0: &TwoModeDensityMatrix,
    controls: &EvolveControls,
    observers: &mut [&mut dyn Observer],
) -> Result<Evolution> {
    controls.validate()?;
    l.cutoff().ensure_same(rho0.cutoff())?;
    let tr = rho0.trace();
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("initial state must have unit trace, got {tr}")));
    }
    let defect = rho0.hermiticity_defect();
    if defect > 1e-10 {
        return Err(Error::NotHermitian { defect, tolerance: 1e-10 });
    }

    let seed = rho0.as_slice().iter().enumerate().filter(|(_, v)| **v != C64::new(0.0, 0.0)).map(|(k, _)| k);
    let reduced = l.restrict_to_reachable(seed);
    let row_abs_sum = reduced.max_row_abs_sum();
    let mut y = reduced.compress(rho0)?;
    let mut next = y.clone();
    let mut stepper = Stepper::new(&reduced);

    let mut stats = EvolveStats {
        steps: 0,
        rejected_steps: 0,
        min_dt: f64::INFINITY,
        max_dt: 0.0,
        reduced_dim: reduced.dim(),
        reduced_nnz: reduced.nnz(),
    };

    let fixed_dt = match controls.mode {
        StepMode::Fixed { dt } => {
            if dt * row_abs_sum > 1.0 {
                log::warn!("dt * ||L||_inf = {:.3} exceeds 1; RK4 may be unstable", dt * row_abs_sum);
            }
            Some(dt)
        }
        StepMode::Auto => Some(auto_step(l, row_abs_sum)),
        StepMode::Adaptive { .. } => None,
    };
    let mut adaptive_h = fixed_dt.unwrap_or_else(|| auto_step(l, row_abs_sum));

    let times = record_times(controls);
    let mut trajectory = Trajectory::default();
    let mut t = 0.0;
    for (k, &target) in times.iter().enumerate() {
        if k > 0 {
            let interval = target - t;
            match (fixed_dt, controls.mode) {
                (Some(dt), _) => {
                    let n = (interval / dt - 1e-9).ceil().max(1.0) as usize;
                    let h = interval / n as f64;
                    for _ in 0..n {
                        stepper.step(&y, h, &mut next);
                        std::mem::swap(&mut y, &mut next);
                    }
                    stats.steps += n;
                    stats.min_dt = stats.min_dt.min(h);
                    stats.max_dt = stats.max_dt.max(h);
                }
                (None, StepMode::Adaptive { rel_tol }) => {
                    adaptive_h = advance_adaptive(&mut stepper, &mut y, interval, adaptive_h, rel_tol, &mut stats)
                        .map_err(|reason| Error::EvolutionAborted { tau: t, reason })?;
                }
                _ => unreachable!("fixed step always resolved for non-adaptive modes"),
            }
            t = target;
        }
        let rho = reduced.expand(&y);
        let record = make_record(t, &rho, &reduced, &y, controls, observers)?;
        trajectory.records.push(record);
    }
    if stats.steps == 0 {
        stats.min_dt = 0.0;
    }
    let final_state = reduced.expand(&y);
    Ok(Evolution { trajectory, final_state, stats })
}

fn make_record(
    tau: f64,
    rho: &TwoModeDensityMatrix,
    reduced: &ReducedOperator,
    y: &[C64],
    controls: &EvolveControls,
    observers: &mut [&mut dyn Observer],
) -> Result<Record> {
    let trace = rho.trace();
    let drift = (trace - C64::new(1.0, 0.0)).norm();
    let leakage = rho.leakage();
    if !drift.is_finite() || drift > controls.max_trace_drift {
        return Err(Error::EvolutionAborted {
            tau,
            reason: format!(
                "trace drift {drift:e} exceeds {:e}; basis too small or step too large",
                controls.max_trace_drift
            ),
        });
    }
    if leakage > controls.max_leakage {
        return Err(Error::EvolutionAborted {
            tau,
            reason: format!("top-shell population {leakage:e} exceeds {:e}; increase n_max", controls.max_leakage),
        });
    }
    let mut observables = vec![
        ("trace".to_string(), trace.re),
        ("trace_drift".to_string(), drift),
        ("hermiticity_defect".to_string(), rho.hermiticity_defect()),
        ("leakage".to_string(), leakage),
    ];
    for obs in observers.iter_mut() {
        observables.extend(obs.observe(tau, rho)?);
    }
    let snapshot = controls.keep_snapshots.then(|| Snapshot {
        cutoff: reduced.cutoff(),
        support: Arc::clone(reduced.support()),
        values: y.to_vec(),
    });
    Ok(Record { tau, observables, snapshot })
}

/// Step-doubling RK4 across `interval`; returns the step size to try next.
fn advance_adaptive(
    stepper: &mut Stepper<'_>,
    y: &mut Vec<C64>,
    interval: f64,
    mut h: f64,
    rel_tol: f64,
    stats: &mut EvolveStats,
) -> std::result::Result<f64, String> {
    let n = y.len();
    let mut full = vec![C64::new(0.0, 0.0); n];
    let mut half = vec![C64::new(0.0, 0.0); n];
    let mut two_half = vec![C64::new(0.0, 0.0); n];
    let mut done = 0.0;
    while interval - done > 1e-15 * interval.max(1.0) {
        let remaining = interval - done;
        let landing = h >= remaining;
        let step = if landing { remaining } else { h };
        stepper.step(y, step, &mut full);
        stepper.step(y, step / 2.0, &mut half);
        stepper.step(&half, step / 2.0, &mut two_half);
        let scale = two_half.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let err = two_half.iter().zip(&full).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
        let ratio = err / (rel_tol * scale);
        if !ratio.is_finite() {
            return Err("non-finite error estimate in adaptive step".into());
        }
        let factor = if ratio == 0.0 { 2.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 2.0) };
        if ratio <= 1.0 {
            std::mem::swap(y, &mut two_half);
            done += step;
            stats.steps += 1;
            stats.min_dt = stats.min_dt.min(step);
            stats.max_dt = stats.max_dt.max(step);
            // a truncated landing step should not shrink the next one
            h = if landing { h.max(step * factor) } else { step * factor };
        } else {
            stats.rejected_steps += 1;
            h = step * factor;
            if h < 1e-14 {
                return Err(format!("adaptive step underflow (h = {h:e})"));
            }
        }
    }
    Ok(h)
}
