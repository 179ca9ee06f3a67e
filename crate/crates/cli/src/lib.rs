//! Experiment drivers behind the `fabryperot` binary: parameter sweeps with
//! root tracking, EP sensitivity scans, transmission combs, band scans and
//! skin-effect reports, plus the power-law slope fits used to quantify them.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use fabryperot::model::{ConfigError, RadiationCondition, ResonatorArray};
use fabryperot::propagation::{propagate_mode, ModeTrace, PropagationError};
use fabryperot::skin::{
    band_scan, damping_diagnostics, envelope_report, replicate, BandScan, EnvelopeReport,
    PeriodicCell, SkinError,
};
use fabryperot::spectra::{
    find_resonances, transmission, transmission_peaks, Resonance, SearchRegion, SpectraError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Skin(#[from] SkinError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("tracking lost at grid point {index} (parameter {value:.6e}): {reason}")]
    TrackingLost {
        index: usize,
        value: f64,
        reason: String,
    },
    #[error("invalid sweep: {0}")]
    BadSpec(String),
    #[error("no in-band resonance found in band {band}")]
    NoInBandResonance { band: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 config, 3 solver, 4 tracking.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::BadSpec(_) => 2,
            CliError::TrackingLost { .. } => 4,
            _ => 3,
        }
    }
}

// ---------------------------------------------------------------------------
// slope fitting
// ---------------------------------------------------------------------------

/// Least-squares fit of `ln y` against `ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Log-log least squares over all strictly positive pairs; `None` with fewer
/// than three usable points.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let denom = nf * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let ss_tot = syy - sy * sy / nf;
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Some(SlopeFit {
        slope,
        intercept,
        r_squared,
        points_used: n,
    })
}

/// Fit restricted to the asymptotic half of the grid (the smallest `x`
/// values); leading-order statements are only clean there.
pub fn fit_asymptotic_half(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let keep = (xs.len() / 2).max(3).min(xs.len());
    let xs2: Vec<f64> = idx[..keep].iter().map(|&i| xs[i]).collect();
    let ys2: Vec<f64> = idx[..keep].iter().map(|&i| ys[i]).collect();
    fit_power_law(&xs2, &ys2)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Contrast `delta`.
    Delta,
    /// Speed phase: `v_1 = e^{i theta}`, `v_N = e^{-i theta}`.
    Theta,
    /// Additive perturbation of the first resonator length.
    Epsilon,
    /// Left boundary angle.
    ThetaL,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub kind: GridKind,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.count < 5 {
            return Err(CliError::BadSpec(format!(
                "grid needs at least 5 points (got {})",
                self.count
            )));
        }
        match self.kind {
            GridKind::Log => {
                if self.start <= 0.0 || self.stop <= 0.0 {
                    return Err(CliError::BadSpec(
                        "log grids require positive endpoints".into(),
                    ));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                Ok((0..self.count)
                    .map(|i| (a + (b - a) * i as f64 / (self.count - 1) as f64).exp())
                    .collect())
            }
            GridKind::Linear => Ok((0..self.count)
                .map(|i| {
                    self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackedQuantity {
    /// `|omega_b - omega_a|` of the two tracked roots.
    Gap,
    /// All root positions, no tracking.
    Positions,
    /// Same as `Gap`; the EP-splitting reading of it.
    Splitting,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Grid,
    pub quantity: TrackedQuantity,
    pub window: SearchRegion,
}

/// Applies a sweep parameter value to the base system.
pub fn apply_parameter(
    base: &ResonatorArray,
    rc: RadiationCondition,
    param: SweepParameter,
    value: f64,
) -> (ResonatorArray, RadiationCondition) {
    let mut cfg = base.clone();
    let mut out_rc = rc;
    match param {
        SweepParameter::Delta => cfg.contrast = value,
        SweepParameter::Theta => {
            let n = cfg.len();
            cfg.speeds_inside[0] = Complex64::from_polar(1.0, value);
            if n > 1 {
                cfg.speeds_inside[n - 1] = Complex64::from_polar(1.0, -value);
            }
        }
        SweepParameter::Epsilon => cfg.lengths[0] = base.lengths[0] + value,
        SweepParameter::ThetaL => out_rc = RadiationCondition::LeftAngle(value),
    }
    (cfg, out_rc)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub roots: Vec<Resonance>,
    /// `|omega_b - omega_a|` when the quantity tracks a pair.
    pub quantity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fit: Option<SlopeFit>,
}

/// Root positions (with multiplicity) of a solved window, flattened.
fn positions(roots: &[Resonance]) -> Vec<Complex64> {
    let mut out = Vec::new();
    for r in roots {
        for _ in 0..r.multiplicity {
            out.push(r.omega);
        }
    }
    out
}

/// Runs the sweep: solves every grid point (in parallel), then tracks the
/// named quantity by nearest-neighbour continuation and fits a power law
/// over the asymptotic half.
pub fn run_sweep(
    base: &ResonatorArray,
    rc: RadiationCondition,
    spec: &SweepSpec,
    tol: f64,
) -> Result<SweepResult, CliError> {
    let values = spec.grid.values()?;
    let solved: Vec<Result<Vec<Resonance>, SpectraError>> = values
        .par_iter()
        .map(|&v| {
            let (cfg, rck) = apply_parameter(base, rc, spec.parameter, v);
            find_resonances(&spec.window, &cfg, rck, tol)
        })
        .collect();
    let mut rows = Vec::with_capacity(values.len());
    let mut prev_pair: Option<(Complex64, Complex64)> = None;
    for (i, (v, res)) in values.iter().zip(solved).enumerate() {
        let roots = res?;
        let quantity = match spec.quantity {
            TrackedQuantity::Positions => None,
            TrackedQuantity::Gap | TrackedQuantity::Splitting => {
                let pos = positions(&roots);
                let pair = match pos.len() {
                    2 => (pos[0], pos[1]),
                    _ => {
                        return Err(CliError::TrackingLost {
                            index: i,
                            value: *v,
                            reason: format!(
                                "window holds {} roots (with multiplicity), expected 2",
                                pos.len()
                            ),
                        })
                    }
                };
                // nearest-neighbour continuation with the separation guard
                if let Some((pa, pb)) = prev_pair {
                    let sep = (pair.1 - pair.0).norm();
                    let direct = (pair.0 - pa).norm().max((pair.1 - pb).norm());
                    let swapped = (pair.1 - pa).norm().max((pair.0 - pb).norm());
                    let matched = direct.min(swapped);
                    if sep > 0.0 && matched > 0.5 * sep && matched > 1e-9 {
                        let drift_scale = (pa - pb).norm().max(sep);
                        if matched > 3.0 * drift_scale {
                            return Err(CliError::TrackingLost {
                                index: i,
                                value: *v,
                                reason: format!(
                                    "tracked roots jumped by {matched:.3e} (separation {sep:.3e})"
                                ),
                            });
                        }
                    }
                }
                prev_pair = Some(pair);
                Some((pair.1 - pair.0).norm())
            }
        };
        rows.push(SweepRow {
            value: *v,
            roots,
            quantity,
        });
    }
    let fit = match spec.quantity {
        TrackedQuantity::Positions => None,
        _ => {
            let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.quantity.unwrap_or(0.0)).collect();
            fit_asymptotic_half(&xs, &ys)
        }
    };
    Ok(SweepResult { rows, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpParameter {
    /// Perturb the first resonator length: `l_1 = l_1 + eps`.
    Ell1,
    /// Perturb the matched-resonator ansatz: `l_1 = v_1 = theta_0 + eps`.
    Theta,
    /// Perturb the left boundary angle around its base value.
    ThetaL,
}

/// Splitting-versus-perturbation scan around an exceptional point.
pub fn run_sensitivity(
    base: &ResonatorArray,
    rc: RadiationCondition,
    param: EpParameter,
    grid: &Grid,
    window: &SearchRegion,
    tol: f64,
) -> Result<SweepResult, CliError> {
    let values = grid.values()?;
    let theta0 = base.lengths[0];
    let theta_l0 = match rc {
        RadiationCondition::LeftAngle(t) => t,
        RadiationCondition::PerfectTransmission => 0.0,
        RadiationCondition::OutgoingBoth => std::f64::consts::FRAC_PI_2,
    };
    let solved: Vec<Result<Vec<Resonance>, SpectraError>> = values
        .par_iter()
        .map(|&eps| {
            let mut cfg = base.clone();
            let mut rck = rc;
            match param {
                EpParameter::Ell1 => cfg.lengths[0] += eps,
                EpParameter::Theta => {
                    cfg.lengths[0] = theta0 + eps;
                    cfg.speeds_inside[0] = Complex64::new(theta0 + eps, 0.0);
                }
                EpParameter::ThetaL => rck = RadiationCondition::LeftAngle(theta_l0 + eps),
            }
            find_resonances(window, &cfg, rck, tol)
        })
        .collect();
    let mut rows = Vec::with_capacity(values.len());
    for (i, (v, res)) in values.iter().zip(solved).enumerate() {
        let roots = res?;
        let pos = positions(&roots);
        if pos.len() != 2 {
            return Err(CliError::TrackingLost {
                index: i,
                value: *v,
                reason: format!(
                    "window holds {} roots (with multiplicity), expected 2",
                    pos.len()
                ),
            });
        }
        rows.push(SweepRow {
            value: *v,
            quantity: Some((pos[1] - pos[0]).norm()),
            roots,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.quantity.unwrap()).collect();
    let fit = fit_power_law(&xs, &ys);
    Ok(SweepResult { rows, fit })
}

// ---------------------------------------------------------------------------
// transmission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TransmissionResult {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub peak_indices: Vec<usize>,
}

/// Transmission on a uniform grid over `(omega_min, omega_max]` plus the
/// prominence-filtered peak list.
pub fn run_transmission(
    config: &ResonatorArray,
    omega_min: f64,
    omega_max: f64,
    count: usize,
    prominence: f64,
) -> Result<TransmissionResult, CliError> {
    if count < 2 {
        return Err(CliError::BadSpec("transmission grid needs >= 2 points".into()));
    }
    let omegas: Vec<f64> = (0..count)
        .map(|i| omega_min + (omega_max - omega_min) * i as f64 / (count - 1) as f64)
        .collect();
    let values: Vec<f64> = omegas
        .par_iter()
        .map(|&w| transmission(w, config))
        .collect::<Result<_, _>>()?;
    let peak_indices = transmission_peaks(&values, prominence);
    Ok(TransmissionResult {
        omegas,
        values,
        peak_indices,
    })
}

// ---------------------------------------------------------------------------
// skin experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DampingRow {
    pub omega: Complex64,
    pub nu: Complex64,
    pub regime: String,
}

#[derive(Debug, Clone)]
pub struct SkinResult {
    pub scan: BandScan,
    pub band_used: usize,
    pub resonance: Resonance,
    pub mode: ModeTrace,
    pub envelope: EnvelopeReport,
    pub damping: Vec<DampingRow>,
}

/// Full skin-effect experiment: band scan of the unit cell, resonances of the
/// `M`-fold replication inside the chosen band, the mode at the resonance
/// closest to the band midpoint, and its envelope report.
pub fn run_skin(
    cell_config: &ResonatorArray,
    m: usize,
    band_index: usize,
    scan_range: (f64, f64),
    scan_samples: usize,
    tol: f64,
) -> Result<SkinResult, CliError> {
    let cell = PeriodicCell::new(cell_config.clone())?;
    let scan = band_scan(&cell, scan_range, scan_samples)?;
    let &(a, b) = scan
        .bands
        .get(band_index)
        .ok_or(CliError::NoInBandResonance { band: band_index })?;
    let rep = replicate(&cell, m);
    let margin = 1e-4 * (b - a);
    let window = SearchRegion::new(a + margin, b - margin, -0.5, 0.02)
        .map_err(CliError::Spectra)?;
    let roots = find_resonances(&window, &rep, RadiationCondition::OutgoingBoth, tol)?;
    let mid = 0.5 * (a + b);
    let best = roots
        .iter()
        .filter(|r| {
            fabryperot::skin::cell_matrix(Complex64::new(r.omega.re, 0.0), &cell)
                .map(|mm| mm.trace().re.abs() <= 2.0 + 1e-6)
                .unwrap_or(false)
        })
        .min_by(|x, y| {
            (x.omega.re - mid)
                .abs()
                .partial_cmp(&(y.omega.re - mid).abs())
                .unwrap()
        })
        .copied()
        .ok_or(CliError::NoInBandResonance { band: band_index })?;
    let mode = propagate_mode(best.omega, &rep, RadiationCondition::OutgoingBoth, 64)?;
    let envelope = envelope_report(&mode, &cell, m)?;
    let damping = roots
        .iter()
        .map(|r| {
            let d = damping_diagnostics(r.omega, cell.unit.gauges[0]);
            DampingRow {
                omega: r.omega,
                nu: d.nu,
                regime: d.regime.to_string(),
            }
        })
        .collect();
    Ok(SkinResult {
        scan,
        band_used: band_index,
        resonance: best,
        mode,
        envelope,
        damping,
    })
}

// ---------------------------------------------------------------------------
// tables
// ---------------------------------------------------------------------------

pub fn sweep_to_csv(result: &SweepResult, param_name: &str) -> String {
    let mut out = String::new();
    if result.rows.iter().any(|r| r.quantity.is_some()) {
        out.push_str(&format!("{param_name},splitting\n"));
        for r in &result.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e}\n",
                r.value,
                r.quantity.unwrap_or(0.0)
            ));
        }
    } else {
        out.push_str(&format!("{param_name},index,re_omega,im_omega\n"));
        for r in &result.rows {
            for (i, p) in positions(&r.roots).iter().enumerate() {
                out.push_str(&format!("{:.16e},{},{:.16e},{:.16e}\n", r.value, i, p.re, p.im));
            }
        }
    }
    out
}

pub fn fit_to_json(fit: &Option<SlopeFit>) -> String {
    match fit {
        Some(f) => serde_json::to_string_pretty(&serde_json::json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "points_used": f.points_used,
        }))
        .expect("serialises"),
        None => "null".to_string(),
    }
}

pub fn transmission_to_csv(result: &TransmissionResult) -> String {
    let mut out = String::from("omega,transmission\n");
    for (w, t) in result.omegas.iter().zip(&result.values) {
        out.push_str(&format!("{w:.16e},{t:.16e}\n"));
    }
    out
}

pub fn peaks_to_csv(result: &TransmissionResult) -> String {
    let mut out = String::from("omega_peak,transmission_peak\n");
    for &i in &result.peak_indices {
        out.push_str(&format!(
            "{:.16e},{:.16e}\n",
            result.omegas[i], result.values[i]
        ));
    }
    out
}

pub fn bands_to_json(scan: &BandScan) -> String {
    let rows: Vec<serde_json::Value> = scan
        .bands
        .iter()
        .map(|&(a, b)| serde_json::json!({"a": a, "b": b}))
        .collect();
    serde_json::to_string_pretty(&rows).expect("serialises")
}

pub fn band_scan_to_csv(scan: &BandScan) -> String {
    let mut out = String::from("omega,trace,re_k,im_k,in_band\n");
    for s in &scan.samples {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            s.omega, s.trace, s.k.re, s.k.im, s.in_band
        ));
    }
    out
}

pub fn damping_to_csv(rows: &[DampingRow]) -> String {
    let mut out = String::from("re_omega,im_omega,re_nu,im_nu,regime\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.omega.re, r.omega.im, r.nu.re, r.nu.im, r.regime
        ));
    }
    out
}
