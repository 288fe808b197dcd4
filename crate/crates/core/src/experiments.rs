//! Experiment runners behind the command-line front-end.
//!
//! A [`RunConfig`] is read from a flat `key = value` file and/or overridden
//! key by key; the runners write CSV series and a JSON summary into the
//! configured output directory. Every file starts with `#` metadata lines
//! echoing the configuration, basis size, scheme and build id.
//!
//! Config grammar: one `key = value` per line, `#` starts a comment, blank
//! lines are ignored, `_` and `-` are interchangeable in keys. Keys:
//! `name`, `g2`, `lambda`, `ratio`, `preset`, `gamma3`, `epsilon`, `r0`,
//! `radius-mapping`, `nmax`, `t-end`, `dt`, `rel-tol`, `record-every`,
//! `grid-min`, `grid-max`, `grid-points`, `out`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fidelity::{CatFidelityObserver, CircleFidelityObserver, FidelityRecord, FidelitySeries};
use crate::fock::{Cutoff, Mode, TwoModeDensityMatrix};
use crate::integrator::{evolve, EvolveControls, EvolveStats, Observer, StepMode, Trajectory};
use crate::liouvillian::{OscillatorParams, SuperOperator};
use crate::measurement::{
    condition_on_idler, fringe_visibility, signal_distribution, DistributionSeries, QuadratureGrid,
};
use crate::states::{circle_state, pure_to_density, CircleParams, RadiusMapping};

pub const BUILD_ID: &str = env!("CIRCLESTATE_BUILD_ID");

const DEFAULT_NMAX: usize = 20;
const DEFAULT_T_END: f64 = 0.3;
const DEFAULT_SAMPLES: f64 = 200.0;

/// Crystal data: nonlinear coupling `kappa` and signal/idler damping `gamma`, in s^-1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub kappa: f64,
    pub gamma: f64,
}

pub const PRESETS: [Preset; 2] =
    [Preset { name: "AgGaSe2", kappa: 4.4e4, gamma: 7.5e8 }, Preset { name: "KTP", kappa: 7.6e3, gamma: 7.5e8 }];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .copied()
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (AgGaSe2|KTP)")))
}

const KEYS: [&str; 18] = [
    "name",
    "g2",
    "lambda",
    "ratio",
    "preset",
    "gamma3",
    "epsilon",
    "r0",
    "radius-mapping",
    "nmax",
    "t-end",
    "dt",
    "rel-tol",
    "record-every",
    "grid-min",
    "grid-max",
    "grid-points",
    "out",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub name: String,
    pub g2: Option<f64>,
    pub lambda: Option<f64>,
    pub ratio: Option<f64>,
    pub preset: Option<String>,
    pub gamma3: Option<f64>,
    pub epsilon: Option<f64>,
    pub r0: Option<f64>,
    pub radius_mapping: RadiusMapping,
    pub nmax: usize,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub rel_tol: Option<f64>,
    pub record_every: Option<f64>,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            g2: None,
            lambda: None,
            ratio: None,
            preset: None,
            gamma3: None,
            epsilon: None,
            r0: None,
            radius_mapping: RadiusMapping::default(),
            nmax: DEFAULT_NMAX,
            t_end: None,
            dt: None,
            rel_tol: None,
            record_every: None,
            grid_min: -6.0,
            grid_max: 6.0,
            grid_points: 241,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().replace('_', "-");
            if seen.insert(key.clone(), lineno + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            cfg.set(&key, value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key; used for both config lines and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('_', "-");
        match key.as_str() {
            "name" => self.name = value.to_string(),
            "g2" => self.g2 = Some(parse_num(&key, value)?),
            "lambda" => self.lambda = Some(parse_num(&key, value)?),
            "ratio" => self.ratio = Some(parse_num(&key, value)?),
            "preset" => self.preset = Some(preset(value)?.name.to_string()),
            "gamma3" => self.gamma3 = Some(parse_num(&key, value)?),
            "epsilon" => self.epsilon = Some(parse_num(&key, value)?),
            "r0" => self.r0 = Some(parse_num(&key, value)?),
            "radius-mapping" => self.radius_mapping = value.parse()?,
            "nmax" => self.nmax = parse_num(&key, value)?,
            "t-end" => self.t_end = Some(parse_num(&key, value)?),
            "dt" => self.dt = Some(parse_num(&key, value)?),
            "rel-tol" => self.rel_tol = Some(parse_num(&key, value)?),
            "record-every" => self.record_every = Some(parse_num(&key, value)?),
            "grid-min" => self.grid_min = parse_num(&key, value)?,
            "grid-max" => self.grid_max = parse_num(&key, value)?,
            "grid-points" => self.grid_points = parse_num(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key '{key}' (known: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Config-file text that reproduces this configuration.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("name", self.name.clone());
        let opt = |v: Option<f64>| v.map(|x| x.to_string());
        for (k, v) in [
            ("g2", opt(self.g2)),
            ("lambda", opt(self.lambda)),
            ("ratio", opt(self.ratio)),
            ("preset", self.preset.clone()),
            ("gamma3", opt(self.gamma3)),
            ("epsilon", opt(self.epsilon)),
            ("r0", opt(self.r0)),
        ] {
            if let Some(v) = v {
                line(k, v);
            }
        }
        line("radius-mapping", self.radius_mapping.to_string());
        line("nmax", self.nmax.to_string());
        for (k, v) in [
            ("t-end", opt(self.t_end)),
            ("dt", opt(self.dt)),
            ("rel-tol", opt(self.rel_tol)),
            ("record-every", opt(self.record_every)),
        ] {
            if let Some(v) = v {
                line(k, v);
            }
        }
        line("grid-min", self.grid_min.to_string());
        line("grid-max", self.grid_max.to_string());
        line("grid-points", self.grid_points.to_string());
        line("out", self.out.display().to_string());
        s
    }

    pub fn cutoff(&self) -> Result<Cutoff> {
        Cutoff::new(self.nmax)
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::uniform(self.grid_min, self.grid_max, self.grid_points)
    }

    /// `lambda` and `g^2`, either given directly (`g2` with exactly one of
    /// `lambda`, `ratio`) or formed from a crystal preset plus `gamma3`, `epsilon`.
    pub fn oscillator_params(&self) -> Result<OscillatorParams> {
        if let Some(name) = &self.preset {
            if self.g2.is_some() || self.lambda.is_some() || self.ratio.is_some() {
                return Err(Error::Config("preset excludes g2, lambda and ratio".into()));
            }
            let p = preset(name)?;
            let (gamma3, epsilon) = match (self.gamma3, self.epsilon) {
                (Some(g), Some(e)) => (g, e),
                _ => return Err(Error::Config(format!("preset {} requires gamma3 and epsilon", p.name))),
            };
            return OscillatorParams::from_physical(p.kappa, p.gamma, gamma3, epsilon);
        }
        if self.gamma3.is_some() || self.epsilon.is_some() {
            return Err(Error::Config("gamma3 and epsilon are only used with a preset".into()));
        }
        let g2 = self.g2.ok_or_else(|| Error::Config("g2 is required".into()))?;
        match (self.lambda, self.ratio) {
            (Some(lambda), None) => OscillatorParams::new(lambda, g2),
            (None, Some(ratio)) => OscillatorParams::from_ratio(ratio, g2),
            (Some(_), Some(_)) => Err(Error::Config("give exactly one of lambda and ratio, not both".into())),
            (None, None) => Err(Error::Config("one of lambda or ratio is required".into())),
        }
    }

    /// Circle radius: `r0` if given, otherwise mapped from the ratio.
    pub fn circle_params(&self) -> Result<CircleParams> {
        match (self.r0, self.ratio) {
            (Some(_), Some(_)) => Err(Error::Config("give exactly one of r0 and ratio, not both".into())),
            (Some(r0), None) => CircleParams::new(r0),
            (None, Some(ratio)) => CircleParams::from_ratio(ratio, self.radius_mapping),
            (None, None) => {
                let p = self.oscillator_params()?;
                CircleParams::from_ratio(p.ratio(), self.radius_mapping)
            }
        }
    }

    pub fn controls(&self) -> Result<EvolveControls> {
        let t_end = self.t_end.unwrap_or(DEFAULT_T_END);
        let mode = match (self.dt, self.rel_tol) {
            (Some(_), Some(_)) => return Err(Error::Config("give at most one of dt and rel-tol".into())),
            (Some(dt), None) => StepMode::Fixed { dt },
            (None, Some(rel_tol)) => StepMode::Adaptive { rel_tol },
            (None, None) => StepMode::Auto,
        };
        let record_every = self.record_every.unwrap_or(t_end / DEFAULT_SAMPLES);
        EvolveControls::new(t_end, mode, record_every)
    }
}

fn scheme_label(mode: StepMode, stats: &EvolveStats) -> String {
    match mode {
        StepMode::Fixed { dt } => format!("rk4-fixed dt<={dt} (min {:.9e} max {:.9e})", stats.min_dt, stats.max_dt),
        StepMode::Auto => format!("rk4-auto dt<={:.9e}", stats.max_dt),
        StepMode::Adaptive { rel_tol } => format!("rk4-step-doubling rel_tol={rel_tol}"),
    }
}

/// `#` header shared by every file of a run.
fn header(cfg: &RunConfig, extra: &[(&str, String)]) -> Result<String> {
    let cutoff = cfg.cutoff()?;
    let mut h = String::new();
    let _ = writeln!(h, "# build=circlestate {} ({BUILD_ID})", env!("CARGO_PKG_VERSION"));
    for line in cfg.to_config_text().lines() {
        let _ = writeln!(h, "# config.{line}");
    }
    let _ = writeln!(h, "# basis.levels_per_mode={}", cutoff.levels());
    let _ = writeln!(h, "# basis.pair_dim={}", cutoff.pair_dim());
    let _ = writeln!(h, "# basis.super_dim={}", cutoff.super_dim());
    let _ = writeln!(h, "# time=tau (gamma t)");
    for (k, v) in extra {
        let _ = writeln!(h, "# {k}={v}");
    }
    Ok(h)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

fn distribution_csv(header: &str, series: &DistributionSeries) -> Result<String> {
    let mut buf = header.as_bytes().to_vec();
    series.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, Serialize)]
struct RunInfo {
    build: String,
    config: RunConfig,
    levels_per_mode: usize,
    pair_dim: usize,
    time_unit: &'static str,
}

fn run_info(cfg: &RunConfig) -> Result<RunInfo> {
    let cutoff = cfg.cutoff()?;
    Ok(RunInfo {
        build: format!("circlestate {} ({BUILD_ID})", env!("CARGO_PKG_VERSION")),
        config: cfg.clone(),
        levels_per_mode: cutoff.levels(),
        pair_dim: cutoff.pair_dim(),
        time_unit: "tau = gamma t",
    })
}

/// Visibility and the two conditional distributions of one signal state.
#[derive(Clone, Debug, Serialize)]
pub struct FringeSummary {
    pub weight: f64,
    pub visibility_x0: f64,
    pub visibility_p: f64,
    pub peaks_x0: Vec<f64>,
    pub peaks_p: Vec<f64>,
}

/// Conditions on idler `x2 = 0` (`theta2 = 0`) and evaluates the signal
/// distributions at `theta1 = 0` and `theta1 = pi/2`.
pub fn conditional_distributions(
    rho: &TwoModeDensityMatrix,
    grid: &QuadratureGrid,
) -> Result<(DistributionSeries, DistributionSeries, f64)> {
    let c = condition_on_idler(rho, 0.0, 0.0)?;
    let mut x0 = signal_distribution(&c.normalized, 0.0, grid);
    let mut p = signal_distribution(&c.normalized, std::f64::consts::FRAC_PI_2, grid);
    x0.normalization = c.weight;
    p.normalization = c.weight;
    Ok((x0, p, c.weight))
}

fn fringe_summary(x0: &DistributionSeries, p: &DistributionSeries, weight: f64) -> FringeSummary {
    FringeSummary {
        weight,
        visibility_x0: fringe_visibility(x0),
        visibility_p: fringe_visibility(p),
        peaks_x0: x0.local_maxima().iter().map(|&i| x0.points[i]).collect(),
        peaks_p: p.local_maxima().iter().map(|&i| p.points[i]).collect(),
    }
}

/// Observer emitting `signal_photons`, `cond_weight`, `visibility_x0` and
/// `visibility_p`, optionally keeping the distributions for surface output.
pub struct FringeObserver {
    grid: QuadratureGrid,
    keep: bool,
    pub surfaces: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl FringeObserver {
    pub fn new(grid: QuadratureGrid, keep_surfaces: bool) -> Self {
        Self { grid, keep: keep_surfaces, surfaces: Vec::new() }
    }
}

impl Observer for FringeObserver {
    fn observe(&mut self, tau: f64, rho: &TwoModeDensityMatrix) -> Result<Vec<(String, f64)>> {
        let photons = rho.mean_photon_number(Mode::Signal);
        let (weight, v0, vp) = match conditional_distributions(rho, &self.grid) {
            Ok((x0, p, w)) => {
                let v = (w, fringe_visibility(&x0), fringe_visibility(&p));
                if self.keep {
                    self.surfaces.push((tau, x0.values, p.values));
                }
                v
            }
            Err(Error::NullConditioning(w)) => (w, f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        Ok(vec![
            ("signal_photons".into(), photons),
            ("cond_weight".into(), weight),
            ("visibility_x0".into(), v0),
            ("visibility_p".into(), vp),
        ])
    }
}

/// Observables as CSV: `tau` followed by every observable column.
pub fn trajectory_csv(header: &str, trajectory: &Trajectory) -> String {
    let names = trajectory.observable_names();
    let mut s = header.to_string();
    let _ = writeln!(s, "tau,{}", names.join(","));
    for r in &trajectory.records {
        let _ = write!(s, "{}", r.tau);
        for n in &names {
            match r.observable(n) {
                Some(v) => {
                    let _ = write!(s, ",{v:e}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

fn surface_csv(header: &str, grid: &QuadratureGrid, surfaces: &[(f64, Vec<f64>, Vec<f64>)], pick: usize) -> String {
    let mut s = header.to_string();
    s.push_str("tau,x,P\n");
    for (tau, x0, p) in surfaces {
        let values = if pick == 0 { x0 } else { p };
        for (x, v) in grid.points().iter().zip(values) {
            let _ = writeln!(s, "{tau},{x},{v:e}");
        }
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct IdealSummary {
    pub r0: f64,
    pub fringes: FringeSummary,
    pub files: Vec<PathBuf>,
}

/// Ideal circle state conditioned on idler `x2 = 0`: distributions at
/// `theta1 = 0` and `pi/2`.
pub fn ideal_distributions(cfg: &RunConfig) -> Result<IdealSummary> {
    let params = cfg.circle_params()?;
    let cutoff = cfg.cutoff()?;
    let grid = cfg.grid()?;
    let rho = pure_to_density(&circle_state(params, cutoff));
    let (x0, p, weight) = conditional_distributions(&rho, &grid)?;
    let fringes = fringe_summary(&x0, &p, weight);
    let h = header(cfg, &[("state", format!("ideal circle r0={}", params.r0()))])?;
    let files = vec![
        write_file(&cfg.out, "ideal_x0.csv", &distribution_csv(&h, &x0)?)?,
        write_file(&cfg.out, "ideal_p.csv", &distribution_csv(&h, &p)?)?,
    ];
    let summary = IdealSummary { r0: params.r0(), fringes, files };
    write_summary(cfg, "ideal", &summary)?;
    Ok(summary)
}

fn write_summary<T: Serialize>(cfg: &RunConfig, kind: &str, result: &T) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        kind: &'a str,
        run: RunInfo,
        result: &'a T,
    }
    let body = serde_json::to_string_pretty(&Wrapped { kind, run: run_info(cfg)?, result })?;
    write_file(&cfg.out, "summary.json", &(body + "\n"))
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveSummary {
    pub lambda: f64,
    pub g2: f64,
    pub scheme: String,
    pub steps: usize,
    pub reduced_dim: usize,
    pub max_leakage: f64,
    pub max_trace_drift: f64,
    pub peak_visibility_x0: Option<(f64, f64)>,
    pub peak_visibility_p: Option<(f64, f64)>,
    pub files: Vec<PathBuf>,
}

fn series_max(traj: &Trajectory, name: &str) -> Option<(f64, f64)> {
    traj.records.iter().filter_map(|r| r.observable(name).filter(|v| v.is_finite()).map(|v| (r.tau, v))).fold(
        None,
        |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        },
    )
}

fn abs_max(traj: &Trajectory, name: &str) -> f64 {
    traj.series(name).into_iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
}

/// Evolution from the two-mode vacuum with diagnostics, fringe visibilities
/// and conditional distribution surfaces.
pub fn run_evolve(cfg: &RunConfig) -> Result<EvolveSummary> {
    let params = cfg.oscillator_params()?;
    let cutoff = cfg.cutoff()?;
    let controls = cfg.controls()?;
    let grid = cfg.grid()?;
    let l = SuperOperator::build(params, cutoff);
    let mut fringes = FringeObserver::new(grid.clone(), true);
    let evo = evolve(&l, &TwoModeDensityMatrix::vacuum(cutoff), &controls, &mut [&mut fringes])?;
    let scheme = scheme_label(controls.mode, &evo.stats);
    let h = header(
        cfg,
        &[
            ("lambda", params.lambda().to_string()),
            ("g2", params.g2().to_string()),
            ("scheme", scheme.clone()),
            ("conditioning", "theta2=0 x2=0".into()),
        ],
    )?;
    let traj = &evo.trajectory;
    let files = vec![
        write_file(&cfg.out, "observables.csv", &trajectory_csv(&h, traj))?,
        write_file(&cfg.out, "surface_x0.csv", &surface_csv(&format!("{h}# theta1=0\n"), &grid, &fringes.surfaces, 0))?,
        write_file(
            &cfg.out,
            "surface_p.csv",
            &surface_csv(&format!("{h}# theta1=pi/2\n"), &grid, &fringes.surfaces, 1),
        )?,
    ];
    let summary = EvolveSummary {
        lambda: params.lambda(),
        g2: params.g2(),
        scheme,
        steps: evo.stats.steps,
        reduced_dim: evo.stats.reduced_dim,
        max_leakage: abs_max(traj, "leakage"),
        max_trace_drift: abs_max(traj, "trace_drift"),
        peak_visibility_x0: series_max(traj, "visibility_x0"),
        peak_visibility_p: series_max(traj, "visibility_p"),
        files,
    };
    write_summary(cfg, "evolve", &summary)?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Circle,
    Cat,
}

impl Reference {
    fn prefix(self) -> &'static str {
        match self {
            Reference::Circle => "circle",
            Reference::Cat => "cat",
        }
    }
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Reference::Circle),
            "cat" => Ok(Reference::Cat),
            other => Err(Error::Config(format!("unknown reference '{other}' (circle|cat)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelitySummary {
    pub reference: Reference,
    /// Circle radius, or cat amplitude `beta` of `|i beta> + |-i beta>`.
    pub amplitude: f64,
    pub radius_mapping: RadiusMapping,
    pub lambda: f64,
    pub g2: f64,
    pub scheme: String,
    pub max: Option<FidelityRecord>,
    pub conventions: [&'static str; 2],
    pub skipped: usize,
    pub files: Vec<PathBuf>,
}

impl FidelitySummary {
    pub fn line(&self) -> String {
        match &self.max {
            Some(m) => format!(
                "{} max f_overlap={:.6} f_sqrt={:.6} at tau={} (amplitude={:.6}, mapping={})",
                self.reference.prefix(),
                m.f_overlap,
                m.f_sqrt,
                m.tau,
                self.amplitude,
                self.radius_mapping
            ),
            None => format!("{} max unavailable: no valid records", self.reference.prefix()),
        }
    }
}

/// Fidelity of the evolving state against the ideal circle state, or of the
/// conditioned signal against the even cat `|i beta> + |-i beta>`.
pub fn run_fidelity(cfg: &RunConfig, reference: Reference) -> Result<FidelitySummary> {
    let params = cfg.oscillator_params()?;
    let cutoff = cfg.cutoff()?;
    let controls = cfg.controls()?;
    let circle = cfg.circle_params()?;
    let l = SuperOperator::build(params, cutoff);
    let mut circle_obs;
    let mut cat_obs;
    let observer: &mut dyn Observer = match reference {
        Reference::Circle => {
            circle_obs = CircleFidelityObserver::new(circle, cutoff);
            &mut circle_obs
        }
        Reference::Cat => {
            cat_obs = CatFidelityObserver::new(circle.r0(), cutoff)?;
            &mut cat_obs
        }
    };
    let evo = evolve(&l, &TwoModeDensityMatrix::vacuum(cutoff), &controls, &mut [observer])?;
    let series = FidelitySeries::from_observables(&evo.trajectory, reference.prefix());
    let scheme = scheme_label(controls.mode, &evo.stats);
    let h = header(
        cfg,
        &[
            ("lambda", params.lambda().to_string()),
            ("g2", params.g2().to_string()),
            ("scheme", scheme.clone()),
            ("reference", format!("{} amplitude={}", reference.prefix(), circle.r0())),
            ("f_overlap", "<psi|rho|psi>".into()),
            ("f_sqrt", "sqrt(<psi|rho|psi>)".into()),
        ],
    )?;
    let mut body = h.into_bytes();
    series.write_csv(&mut body)?;
    let name = format!("fidelity_{}.csv", reference.prefix());
    let files = vec![
        write_file(&cfg.out, &name, &String::from_utf8(body).expect("csv output is utf-8"))?,
        write_file(&cfg.out, "observables.csv", &trajectory_csv(&header(cfg, &[])?, &evo.trajectory))?,
    ];
    let summary = FidelitySummary {
        reference,
        amplitude: circle.r0(),
        radius_mapping: cfg.radius_mapping,
        lambda: params.lambda(),
        g2: params.g2(),
        scheme,
        max: series.max(),
        conventions: ["f_overlap = <psi|rho|psi>", "f_sqrt = sqrt(f_overlap)"],
        skipped: series.skipped.len(),
        files,
    };
    write_summary(cfg, "fidelity", &summary)?;
    Ok(summary)
}

/// What each configuration of a sweep runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Evolve,
    Circle,
    Cat,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evolve" => Ok(SweepKind::Evolve),
            "circle" => Ok(SweepKind::Circle),
            "cat" => Ok(SweepKind::Cat),
            other => Err(Error::Config(format!("unknown sweep kind '{other}' (evolve|circle|cat)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub out: PathBuf,
    pub summary_line: String,
    pub error: Option<String>,
}

/// Runs `kind` once per value of `key`, concurrently, each into
/// `out/<key>=<value>`. Failures are reported per entry.
pub fn run_sweep(cfg: &RunConfig, key: &str, values: &[String], kind: SweepKind) -> Result<Vec<SweepEntry>> {
    let variants = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(key, v)?;
            c.out = cfg.out.join(format!("{key}={v}"));
            c.name = format!("{}-{key}={v}", cfg.name);
            Ok((v.clone(), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let entries: Vec<SweepEntry> = variants
        .par_iter()
        .map(|(v, c)| {
            let line = match kind {
                SweepKind::Evolve => run_evolve(c).map(|s| {
                    format!(
                        "evolve peak visibility_x0={:?} visibility_p={:?}",
                        s.peak_visibility_x0, s.peak_visibility_p
                    )
                }),
                SweepKind::Circle => run_fidelity(c, Reference::Circle).map(|s| s.line()),
                SweepKind::Cat => run_fidelity(c, Reference::Cat).map(|s| s.line()),
            };
            match line {
                Ok(l) => SweepEntry { value: v.clone(), out: c.out.clone(), summary_line: l, error: None },
                Err(e) => SweepEntry {
                    value: v.clone(),
                    out: c.out.clone(),
                    summary_line: String::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let body = serde_json::to_string_pretty(&entries)?;
    write_file(&cfg.out, "sweep.json", &(body + "\n"))?;
    Ok(entries)
}

/// Writes the sparse generator as coordinate triples.
pub fn export_liouvillian(cfg: &RunConfig) -> Result<PathBuf> {
    let l = SuperOperator::build(cfg.oscillator_params()?, cfg.cutoff()?);
    let mut body = header(cfg, &[])?.into_bytes();
    l.write_coordinates(&mut body)?;
    write_file(&cfg.out, "liouvillian.txt", &String::from_utf8(body).expect("ascii output"))
}
