//! Periodic replication, band structure and skin-effect diagnostics for
//! chains with imaginary gauge potentials.
//!
//! The symmetrised cell matrix has eigenvalues `exp(+-i k(omega))`; real
//! quasimomentum marks the spectral bands. Resonant modes of the finite
//! replicated chain decay with the universal envelope `exp(-Gamma(x))`
//! regardless of the band: the envelope report quantifies this by per-cell
//! maxima and their gauge-compensated ratios.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::ResonatorArray;
use crate::propagation::{symmetrised_block, Mat2C, ModeTrace, PropagationError, RegionTag};

#[derive(Debug, Error, PartialEq)]
pub enum SkinError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("a periodic cell needs a positive trailing spacing s_N")]
    MissingTrailingSpacing,
    #[error("band scan needs at least 100 samples (got {got})")]
    TooFewSamples { got: usize },
    #[error("the mode's frequency lies outside every band (|trace| = {trace:.6})")]
    OutOfBand { trace: f64 },
    #[error("no in-band resonance found in the scanned window")]
    NoInBandResonance,
}

/// A unit cell: a validated chain whose trailing spacing `s_N` is positive,
/// anchored at the origin.
#[derive(Debug, Clone)]
pub struct PeriodicCell {
    pub unit: ResonatorArray,
}

impl PeriodicCell {
    pub fn new(unit: ResonatorArray) -> Result<Self, SkinError> {
        if unit.spacings.len() != unit.len() || unit.trailing_spacing() <= 0.0 {
            return Err(SkinError::MissingTrailingSpacing);
        }
        Ok(PeriodicCell { unit })
    }

    /// Period `L = sum l_i + sum s_i` including the trailing spacing.
    pub fn period(&self) -> f64 {
        self.unit.total_span()
    }

    /// Gauge phase accumulated over one cell, `sum_i gamma_i l_i`.
    pub fn gamma_per_cell(&self) -> f64 {
        self.unit
            .gauges
            .iter()
            .zip(&self.unit.lengths)
            .map(|(g, l)| g * l)
            .sum()
    }
}

/// Band membership sample at one frequency.
#[derive(Debug, Clone, Copy)]
pub struct BandDiagnostics {
    pub omega: f64,
    pub trace: f64,
    pub k: Complex64,
    pub in_band: bool,
}

/// Result of a band scan: per-sample diagnostics plus the maximal in-band
/// intervals, edges refined by bisection.
#[derive(Debug, Clone)]
pub struct BandScan {
    pub samples: Vec<BandDiagnostics>,
    pub bands: Vec<(f64, f64)>,
}

/// Envelope statistics of a resonant mode of an `M`-fold replicated cell.
#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    /// Per-cell maxima of `|u|`.
    pub cell_maxima: Vec<f64>,
    /// `Gamma(m L)` at the left edge of each cell.
    pub gamma_profile: Vec<f64>,
    /// `cell_maxima[m] * exp(Gamma(m L))`: flat when the decay is exactly
    /// the gauge envelope.
    pub envelope_ratios: Vec<f64>,
    /// Least-squares slope of `ln`(cell maxima) against the cell index.
    pub slope_fit: f64,
    /// max/min of the envelope ratios over the interior cells.
    pub ratio_spread: f64,
}

impl EnvelopeReport {
    /// CSV `cell,log_cell_max,gamma_at_cell,envelope_ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,log_cell_max,gamma_at_cell,envelope_ratio\n");
        for m in 0..self.cell_maxima.len() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                m,
                self.cell_maxima[m].ln(),
                self.gamma_profile[m],
                self.envelope_ratios[m]
            ));
        }
        out
    }
}

/// Classification of the in-resonator solution character at `nu =
/// sqrt(gamma^2 - omega^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingRegime {
    Oscillatory,
    Overdamped,
    Critical,
}

impl std::fmt::Display for DampingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DampingRegime::Oscillatory => write!(f, "oscillatory"),
            DampingRegime::Overdamped => write!(f, "overdamped"),
            DampingRegime::Critical => write!(f, "critical"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DampingDiagnostics {
    pub nu: Complex64,
    pub regime: DampingRegime,
}

/// Replicates the unit cell `M` times to the right; the final trailing
/// spacing is zeroed for the finite resonance problem.
pub fn replicate(cell: &PeriodicCell, m: usize) -> ResonatorArray {
    assert!(m >= 1, "need at least one copy");
    let u = &cell.unit;
    let n = u.len();
    let mut lengths = Vec::with_capacity(m * n);
    let mut spacings = Vec::with_capacity(m * n);
    let mut speeds = Vec::with_capacity(m * n);
    let mut gauges = Vec::with_capacity(m * n);
    for rep in 0..m {
        for i in 0..n {
            lengths.push(u.lengths[i]);
            speeds.push(u.speeds_inside[i]);
            gauges.push(u.gauges[i]);
            let last = rep == m - 1 && i == n - 1;
            spacings.push(if last { 0.0 } else { u.spacings[i] });
        }
    }
    let mut out = ResonatorArray::new(lengths, spacings, speeds, u.speed_background, u.contrast);
    out.gauges = gauges;
    out
}

/// Symmetrised cell matrix `P~(omega) = P~_N ... P~_1` (trailing gap
/// included); unimodular, real-entried for real `omega` and real parameters.
pub fn cell_matrix(omega: Complex64, cell: &PeriodicCell) -> Result<Mat2C, SkinError> {
    let mut acc = Mat2C::identity();
    for i in 0..cell.unit.len() {
        acc = symmetrised_block(i, omega, &cell.unit)? * acc;
    }
    Ok(acc)
}

/// Quasimomentum `k(omega)`: the cell matrix has eigenvalues `exp(+-ik)`;
/// the branch is fixed by `Re k` in `[0, pi]` (principal cell), and the
/// residual sign freedom by `|exp(ik)| <= 1` (the decaying Floquet solution).
pub fn quasimomentum(omega: Complex64, cell: &PeriodicCell) -> Result<Complex64, SkinError> {
    let m = cell_matrix(omega, cell)?;
    let (small, large) = m.eigenvalues();
    // k from an eigenvalue mu: k = -i log mu, so Im k = -ln|mu| >= 0 for the
    // small eigenvalue
    let k_small = Complex64::new(small.arg(), -small.norm().ln());
    let k_large = Complex64::new(large.arg(), -large.norm().ln());
    let tol = 1e-12;
    let in_cell = |k: Complex64| k.re >= -tol && k.re <= std::f64::consts::PI + tol;
    let decaying = |k: Complex64| k.im >= -tol;
    match (
        in_cell(k_small) && decaying(k_small),
        in_cell(k_large) && decaying(k_large),
    ) {
        (true, _) => Ok(k_small),
        (false, true) => Ok(k_large),
        // fall back to the principal-cell representative
        _ => Ok(if in_cell(k_small) { k_small } else { k_large }),
    }
}

/// Band-membership tolerance on `|trace| - 2`.
const BAND_TOL: f64 = 1e-10;

/// Scans `omega` over `[lo, hi]` and extracts the maximal in-band intervals;
/// edges are bisected to 1e-10. Intervals clipped by the scan window are
/// truncated at the window boundary.
pub fn band_scan(
    cell: &PeriodicCell,
    range: (f64, f64),
    samples: usize,
) -> Result<BandScan, SkinError> {
    if samples < 100 {
        return Err(SkinError::TooFewSamples { got: samples });
    }
    let (lo, hi) = range;
    let trace_at = |w: f64| -> Result<f64, SkinError> {
        Ok(cell_matrix(Complex64::new(w, 0.0), cell)?.trace().re)
    };
    let mut diags = Vec::with_capacity(samples);
    for i in 0..samples {
        let w = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let tr = trace_at(w)?;
        let k = quasimomentum(Complex64::new(w, 0.0), cell)?;
        diags.push(BandDiagnostics {
            omega: w,
            trace: tr,
            k,
            in_band: tr.abs() <= 2.0 + BAND_TOL,
        });
    }
    // maximal runs of in-band samples, refined at the crossings
    let mut bands = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..samples {
        let here = diags[i].in_band;
        if here && start.is_none() {
            let a = if i == 0 {
                lo
            } else {
                bisect_edge(&trace_at, diags[i - 1].omega, diags[i].omega)?
            };
            start = Some(a);
        }
        if !here {
            if let Some(a) = start.take() {
                let b = bisect_edge(&trace_at, diags[i - 1].omega, diags[i].omega)?;
                bands.push((a, b));
            }
        }
    }
    if let Some(a) = start {
        bands.push((a, hi));
    }
    Ok(BandScan {
        samples: diags,
        bands,
    })
}

fn bisect_edge<F>(trace_at: &F, mut a: f64, mut b: f64) -> Result<f64, SkinError>
where
    F: Fn(f64) -> Result<f64, SkinError>,
{
    let g = |w: f64| -> Result<f64, SkinError> { Ok(trace_at(w)?.abs() - 2.0) };
    let mut ga = g(a)?;
    for _ in 0..80 {
        if (b - a).abs() <= 1e-10 {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if (ga < 0.0) == (gm < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `Gamma(x) = int_0^x gamma`, piecewise linear with slope `gamma_i` inside
/// resonator `i` and zero elsewhere.
pub fn gamma_profile(x: f64, config: &ResonatorArray) -> f64 {
    let (a, b) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
    let sign = if x >= 0.0 { 1.0 } else { -1.0 };
    let mut acc = 0.0;
    for (i, &(xl, xr)) in config.extremities().iter().enumerate() {
        let overlap = (xr.min(b) - xl.max(a)).max(0.0);
        acc += config.gauges[i] * overlap;
    }
    sign * acc
}

/// Envelope statistics of a (previously computed) mode of the `M`-fold
/// replicated cell. The mode must sit at an in-band frequency.
pub fn envelope_report(
    mode: &ModeTrace,
    cell: &PeriodicCell,
    m: usize,
) -> Result<EnvelopeReport, SkinError> {
    let tr = cell_matrix(Complex64::new(mode.omega.re, 0.0), cell)?
        .trace()
        .re;
    if tr.abs() > 2.0 + 1e-6 {
        return Err(SkinError::OutOfBand { trace: tr });
    }
    let period = cell.period();
    let g_cell = cell.gamma_per_cell();
    let mut cell_maxima = vec![0.0f64; m];
    for (i, &x) in mode.xs.iter().enumerate() {
        if mode.region_tags[i] == RegionTag::Exterior {
            continue;
        }
        if x < 0.0 {
            continue;
        }
        let idx = ((x / period) as usize).min(m - 1);
        cell_maxima[idx] = cell_maxima[idx].max(mode.us[i].norm());
    }
    let gamma_profile: Vec<f64> = (0..m).map(|j| j as f64 * g_cell).collect();
    let envelope_ratios: Vec<f64> = cell_maxima
        .iter()
        .zip(&gamma_profile)
        .map(|(&cm, &g)| cm * g.exp())
        .collect();
    // least-squares slope of ln(cell max) versus cell index
    let n = m as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (j, &cm) in cell_maxima.iter().enumerate() {
        let (x, y) = (j as f64, cm.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope_fit = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let interior = &envelope_ratios[1..m.saturating_sub(1).max(1)];
    let rmax = interior.iter().cloned().fold(f64::MIN, f64::max);
    let rmin = interior.iter().cloned().fold(f64::MAX, f64::min);
    Ok(EnvelopeReport {
        cell_maxima,
        gamma_profile,
        envelope_ratios,
        slope_fit,
        ratio_spread: rmax / rmin,
    })
}

/// Character of the in-resonator fundamental solution
/// `u = exp(-gamma x)(a exp(nu x) + b exp(-nu x))`. Complex frequencies with
/// neither part negligible are classified by the dominant component of `nu`.
pub fn damping_diagnostics(omega: Complex64, gamma: f64) -> DampingDiagnostics {
    let nu = (Complex64::new(gamma * gamma, 0.0) - omega * omega).sqrt();
    let scale = 1.0 + gamma.abs() + omega.norm();
    let tol = 1e-12 * scale;
    let regime = if nu.norm() <= tol {
        DampingRegime::Critical
    } else if nu.re.abs() <= tol {
        DampingRegime::Oscillatory
    } else if nu.im.abs() <= tol && nu.re > 0.0 {
        DampingRegime::Overdamped
    } else if nu.im.abs() >= nu.re.abs() {
        DampingRegime::Oscillatory
    } else {
        DampingRegime::Overdamped
    };
    DampingDiagnostics { nu, regime }
}
