//! Characteristic determinants, complex resonance finding, exceptional-point
//! classification, the high-contrast limiting spectrum and transmission.
//!
//! Resonances are the zeros of the characteristic determinant
//! `f(omega) = det(M(omega) b_L | b_R)`, where `M` is the total propagation
//! matrix (the symmetrised one as soon as a gauge potential is present) and
//! `b_L`, `b_R` are the radiation-condition boundary vectors. `f` is entire
//! in `omega`, so zeros are located by argument-principle counts on
//! rectangle contours, recursive subdivision, and Newton refinement with the
//! analytic derivative obtained by product-rule differentiation of the
//! matrix chain.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{RadiationCondition, ResonatorArray};
use crate::propagation::{total_jet_impl, PropagationError};

#[derive(Debug, Error, PartialEq)]
pub enum SpectraError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("region is degenerate or contour sampling too coarse")]
    BadRegion,
    #[error("a zero of f stays too close to the contour after 5 dilations")]
    ContourTooClose,
    #[error("subdivision exhausted max_depth with an unresolved box around ({re}, {im})")]
    MaxDepthExceeded { re: f64, im: f64 },
    #[error("Newton refinement failed to converge in box around ({re}, {im})")]
    NewtonDiverged { re: f64, im: f64 },
    #[error("linear system singular at omega = {omega}")]
    SingularSystem { omega: f64 },
}

/// Rectangle in the complex plane searched for resonances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub max_depth: usize,
    pub contour_samples: usize,
}

impl SearchRegion {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self, SpectraError> {
        let r = SearchRegion {
            re_min,
            re_max,
            im_min,
            im_max,
            max_depth: 56,
            contour_samples: 256,
        };
        r.check()?;
        Ok(r)
    }

    pub fn with_max_depth(mut self, d: usize) -> Self {
        self.max_depth = d;
        self
    }

    pub fn with_contour_samples(mut self, n: usize) -> Self {
        self.contour_samples = n.max(64);
        self
    }

    fn check(&self) -> Result<(), SpectraError> {
        if !(self.re_min < self.re_max) || !(self.im_min < self.im_max) || self.contour_samples < 64
        {
            return Err(SpectraError::BadRegion);
        }
        Ok(())
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    fn dilated(&self, factor: f64) -> SearchRegion {
        let c = self.center();
        let hw = 0.5 * (self.re_max - self.re_min) * factor;
        let hh = 0.5 * (self.im_max - self.im_min) * factor;
        SearchRegion {
            re_min: c.re - hw,
            re_max: c.re + hw,
            im_min: c.im - hh,
            im_max: c.im + hh,
            ..*self
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn diag(&self) -> f64 {
        let w = self.re_max - self.re_min;
        let h = self.im_max - self.im_min;
        (w * w + h * h).sqrt()
    }
}

/// A located zero of the characteristic determinant.
#[derive(Debug, Clone, Copy)]
pub struct Resonance {
    pub omega: Complex64,
    /// Algebraic multiplicity (order of the zero).
    pub multiplicity: usize,
    /// Raw residual `|f(omega)|`.
    pub residual: f64,
    pub condition: RadiationCondition,
    /// Set when the algebraic multiplicity exceeds the geometric bound 1.
    pub is_exceptional: bool,
}

/// Outcome of [`classify_exceptional`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExceptionalReport {
    pub is_ep: bool,
    pub m_a: usize,
    pub m_g_bound: usize,
}

/// For `delta > 0` the propagation matrix propagates any solution uniquely,
/// so the geometric multiplicity is at most 1 and every higher-order zero is
/// an exceptional point.
pub fn classify_exceptional(res: &Resonance, _delta: f64) -> ExceptionalReport {
    ExceptionalReport {
        is_ep: res.multiplicity >= 2,
        m_a: res.multiplicity,
        m_g_bound: 1,
    }
}

/// Characteristic determinant `f(omega; delta)`.
///
/// Uses the symmetrised total matrix whenever a gauge potential is present
/// (the numerically stable, mathematically equivalent form).
pub fn char_det(
    omega: Complex64,
    config: &ResonatorArray,
    rc: RadiationCondition,
) -> Result<Complex64, SpectraError> {
    Ok(char_det_scaled(omega, config, rc)?.0)
}

/// Determinant together with the scale against which its rounding noise is
/// measured (the largest partial-product norm times the boundary-vector
/// size).
pub fn char_det_scaled(
    omega: Complex64,
    config: &ResonatorArray,
    rc: RadiationCondition,
) -> Result<(Complex64, f64), SpectraError> {
    let (jet, scale) = total_jet_impl(omega, config, config.has_gauge())?;
    let v = config.speed_background;
    let bl = rc.left_vector(omega, v);
    let br = rc.right_vector(omega, v);
    let u = jet.m.apply(bl);
    let f = u.0 * br.1 - u.1 * br.0;
    let bnorm = 1.0 + (omega.norm() / v).powi(2);
    Ok((f, scale * bnorm))
}

/// Determinant, its analytic `omega`-derivative, and the noise scale.
pub fn char_det_jet(
    omega: Complex64,
    config: &ResonatorArray,
    rc: RadiationCondition,
) -> Result<(Complex64, Complex64, f64), SpectraError> {
    let (jet, scale) = total_jet_impl(omega, config, config.has_gauge())?;
    let v = config.speed_background;
    let bl = rc.left_vector(omega, v);
    let br = rc.right_vector(omega, v);
    let dbl = rc.left_vector_d(omega, v);
    let dbr = rc.right_vector_d(omega, v);
    let u = jet.m.apply(bl);
    let du = {
        let a = jet.dm.apply(bl);
        let b = jet.m.apply(dbl);
        (a.0 + b.0, a.1 + b.1)
    };
    let f = u.0 * br.1 - u.1 * br.0;
    let df = du.0 * br.1 + u.0 * dbr.1 - du.1 * br.0 - u.1 * dbr.0;
    let bnorm = 1.0 + (omega.norm() / v).powi(2);
    Ok((f, df, scale * bnorm))
}

/// Absolute level below which values of `f` are rounding noise.
fn noise_floor(scale: f64) -> f64 {
    16.0 * f64::EPSILON * scale
}

// ---------------------------------------------------------------------------
// winding numbers
// ---------------------------------------------------------------------------

enum Winding {
    Count(i64),
    /// `|f|` dipped into the noise floor somewhere on the contour.
    FloorHit,
    /// Phase increments never stabilised.
    Unstable,
}

/// Discrete winding number of `f` along a closed polyline given by `points`
/// (must not include the closing duplicate).
fn winding_of<F>(f: &F, points: &[Complex64]) -> Result<Winding, SpectraError>
where
    F: Fn(Complex64) -> Result<(Complex64, f64), SpectraError>,
{
    let mut vals = Vec::with_capacity(points.len());
    for &p in points {
        let (v, scale) = f(p)?;
        if v.norm() <= 4.0 * noise_floor(scale) {
            return Ok(Winding::FloorHit);
        }
        vals.push(v);
    }
    let mut total = 0.0f64;
    let mut max_step = 0.0f64;
    for i in 0..vals.len() {
        let a = vals[i];
        let b = vals[(i + 1) % vals.len()];
        let d = (b / a).arg();
        max_step = max_step.max(d.abs());
        total += d;
    }
    let w = total / std::f64::consts::TAU;
    let rounded = w.round();
    if max_step > 2.5 || (w - rounded).abs() > 0.1 {
        return Ok(Winding::Unstable);
    }
    Ok(Winding::Count(rounded as i64))
}

fn rect_points(r: &SearchRegion, n: usize) -> Vec<Complex64> {
    let w = r.re_max - r.re_min;
    let h = r.im_max - r.im_min;
    let per = 2.0 * (w + h);
    let side = |len: f64| ((n as f64 * len / per).ceil() as usize).max(8);
    let (nb, nr, nt, nl) = (side(w), side(h), side(w), side(h));
    let mut pts = Vec::with_capacity(nb + nr + nt + nl);
    for i in 0..nb {
        pts.push(Complex64::new(
            r.re_min + w * i as f64 / nb as f64,
            r.im_min,
        ));
    }
    for i in 0..nr {
        pts.push(Complex64::new(
            r.re_max,
            r.im_min + h * i as f64 / nr as f64,
        ));
    }
    for i in 0..nt {
        pts.push(Complex64::new(
            r.re_max - w * i as f64 / nt as f64,
            r.im_max,
        ));
    }
    for i in 0..nl {
        pts.push(Complex64::new(
            r.re_min,
            r.im_max - h * i as f64 / nl as f64,
        ));
    }
    pts
}

fn circle_points(center: Complex64, radius: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            center + Complex64::from_polar(radius, t)
        })
        .collect()
}

/// Winding on a rectangle, doubling the sampling until the count stabilises
/// to the same integer on two consecutive refinements.
fn rect_winding<F>(f: &F, r: &SearchRegion, n0: usize) -> Result<Winding, SpectraError>
where
    F: Fn(Complex64) -> Result<(Complex64, f64), SpectraError>,
{
    let mut n = n0.max(64);
    let mut prev: Option<i64> = None;
    while n <= 1 << 16 {
        match winding_of(f, &rect_points(r, n))? {
            Winding::Count(w) => {
                if prev == Some(w) {
                    return Ok(Winding::Count(w));
                }
                prev = Some(w);
            }
            Winding::FloorHit => return Ok(Winding::FloorHit),
            Winding::Unstable => {
                prev = None;
            }
        }
        n *= 2;
    }
    Ok(Winding::Unstable)
}

fn circle_winding<F>(
    f: &F,
    center: Complex64,
    radius: f64,
    n0: usize,
) -> Result<Winding, SpectraError>
where
    F: Fn(Complex64) -> Result<(Complex64, f64), SpectraError>,
{
    let mut n = n0.max(64);
    let mut prev: Option<i64> = None;
    while n <= 1 << 15 {
        match winding_of(f, &circle_points(center, radius, n))? {
            Winding::Count(w) => {
                if prev == Some(w) {
                    return Ok(Winding::Count(w));
                }
                prev = Some(w);
            }
            Winding::FloorHit => return Ok(Winding::FloorHit),
            Winding::Unstable => {
                prev = None;
            }
        }
        n *= 2;
    }
    Ok(Winding::Unstable)
}

/// Number of zeros of the characteristic determinant inside `region`,
/// counted with multiplicity via the argument principle. If a zero grazes
/// the contour, the region is dilated by 1% (up to five times).
pub fn count_zeros(
    region: &SearchRegion,
    config: &ResonatorArray,
    rc: RadiationCondition,
) -> Result<usize, SpectraError> {
    region.check()?;
    let f = |z| char_det_scaled(z, config, rc);
    for attempt in 0..=5 {
        let r = region.dilated(1.0 + 0.01 * attempt as f64);
        match rect_winding(&f, &r, region.contour_samples)? {
            Winding::Count(w) if w >= 0 => return Ok(w as usize),
            _ => continue,
        }
    }
    Err(SpectraError::ContourTooClose)
}

/// Argument-principle count on a circular contour, with the same 1%
/// dilation retry as [`count_zeros`].
pub fn count_zeros_in_disk(
    center: Complex64,
    radius: f64,
    config: &ResonatorArray,
    rc: RadiationCondition,
) -> Result<usize, SpectraError> {
    if !(radius > 0.0) {
        return Err(SpectraError::BadRegion);
    }
    let f = |z| char_det_scaled(z, config, rc);
    for attempt in 0..=5 {
        let r = radius * (1.0 + 0.01 * attempt as f64);
        match circle_winding(&f, center, r, 256)? {
            Winding::Count(w) if w >= 0 => return Ok(w as usize),
            _ => continue,
        }
    }
    Err(SpectraError::ContourTooClose)
}

/// Residuals of the nested-derivative determinant identity at a claimed
/// zero of order `m`: for every order `w < m`,
/// `sum_{i+j+k=w} det(d^i P b_L^(j) | b_R^(k))` must vanish.
///
/// Matrix derivatives beyond the first come from central differences of the
/// analytic jet, so the returned residuals (normalised by the matrix scale)
/// are reliable to roughly `1e-6 * w`-th-order accuracy; callers should
/// assert only the low orders and merely report `w >= 3`.
pub fn multiplicity_identity_residuals(
    omega: Complex64,
    m: usize,
    config: &ResonatorArray,
    rc: RadiationCondition,
) -> Result<Vec<f64>, SpectraError> {
    let v = config.speed_background;
    let jet_at = |z: Complex64| -> Result<(crate::propagation::Mat2C, crate::propagation::Mat2C, f64), SpectraError> {
        let (jet, scale) = total_jet_impl(z, config, config.has_gauge())?;
        Ok((jet.m, jet.dm, scale))
    };
    let h = 1e-4 * (1.0 + omega.norm());
    let (p0, dp0, scale) = jet_at(omega)?;
    let (_, dpp, _) = jet_at(omega + h)?;
    let (_, dpm, _) = jet_at(omega - h)?;
    // second and third derivatives as central differences of the analytic
    // first derivative
    let inv2h = Complex64::new(0.5 / h, 0.0);
    let d2 = dpp.add(&dpm.scale(Complex64::new(-1.0, 0.0))).scale(inv2h);
    let d3 = dpp
        .add(&dpm)
        .add(&dp0.scale(Complex64::new(-2.0, 0.0)))
        .scale(Complex64::new(1.0 / (h * h), 0.0));
    let dps = [p0, dp0, d2, d3];
    let bl = [rc.left_vector(omega, v), rc.left_vector_d(omega, v)];
    let br = [rc.right_vector(omega, v), rc.right_vector_d(omega, v)];
    let zero2 = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    // Taylor-normalised derivatives (divide order i by i!) make each sum the
    // w-th Taylor coefficient of f, which vanishes for w < m.
    let inv_fact = [1.0, 1.0, 0.5, 1.0 / 6.0];
    let mut out = Vec::new();
    for w in 0..m.min(4) {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=w {
            for j in 0..=(w - i) {
                let k = w - i - j;
                if j > 1 || k > 1 {
                    continue; // boundary vectors are linear in omega
                }
                let left = dps[i].apply(bl[j]);
                let right = if k <= 1 { br[k] } else { zero2 };
                acc += inv_fact[i] * (left.0 * right.1 - left.1 * right.0);
            }
        }
        out.push(acc.norm() / (1.0 + scale));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// root finding
// ---------------------------------------------------------------------------

struct NewtonResult {
    omega: Complex64,
    residual: f64,
    last_step: f64,
}

/// Newton iteration with the analytic derivative. Converges when the raw
/// residual drops under `tol` or under a small multiple of the rounding
/// floor, whichever is larger at the iterate's scale.
fn newton(
    config: &ResonatorArray,
    rc: RadiationCondition,
    seed: Complex64,
    tol: f64,
) -> Result<Option<NewtonResult>, SpectraError> {
    let mut z = seed;
    let mut last_step = f64::INFINITY;
    let mut best: Option<NewtonResult> = None;
    for _ in 0..120 {
        let (fv, dfv, scale) = char_det_jet(z, config, rc)?;
        let fnorm = fv.norm();
        let ok_level = tol.max(4.0 * noise_floor(scale));
        if best.as_ref().map_or(true, |b| fnorm < b.residual) {
            best = Some(NewtonResult {
                omega: z,
                residual: fnorm,
                last_step,
            });
        }
        if fnorm <= ok_level && last_step <= 1e-7 * (1.0 + z.norm()) {
            return Ok(best);
        }
        if dfv.norm() == 0.0 {
            break;
        }
        let step = fv / dfv;
        z -= step;
        last_step = step.norm();
        if last_step <= f64::EPSILON * (1.0 + z.norm()) {
            let (fv2, _, scale2) = char_det_jet(z, config, rc)?;
            if fv2.norm() <= tol.max(8.0 * noise_floor(scale2)) {
                return Ok(Some(NewtonResult {
                    omega: z,
                    residual: fv2.norm(),
                    last_step,
                }));
            }
            break;
        }
    }
    // accept a stagnated iterate only if it reached the noise floor
    if let Some(b) = best {
        let (_, _, scale) = char_det_jet(b.omega, config, rc)?;
        if b.residual <= tol.max(16.0 * noise_floor(scale)) {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

fn newton_in_box(
    config: &ResonatorArray,
    rc: RadiationCondition,
    rect: &SearchRegion,
    tol: f64,
) -> Result<Option<NewtonResult>, SpectraError> {
    let wide = rect.dilated(1.6);
    let mut seeds = vec![rect.center()];
    for gi in 0..3 {
        for gj in 0..3 {
            seeds.push(Complex64::new(
                rect.re_min + (rect.re_max - rect.re_min) * (0.25 + 0.25 * gi as f64),
                rect.im_min + (rect.im_max - rect.im_min) * (0.25 + 0.25 * gj as f64),
            ));
        }
    }
    let mut escaped: Option<NewtonResult> = None;
    for seed in seeds {
        if let Some(res) = newton(config, rc, seed, tol)? {
            if wide.contains(res.omega) {
                return Ok(Some(res));
            }
            if escaped.is_none() {
                escaped = Some(res);
            }
        }
    }
    Ok(escaped)
}

struct RootRec {
    omega: Complex64,
    multiplicity: usize,
    residual: f64,
    last_step: f64,
}

/// Locates every zero of the characteristic determinant in `region`.
///
/// Rectangle quadrisection (split lines jittered off any contour-grazing
/// zero) narrows each box down to a single zero, which Newton then refines;
/// boxes that reach `max_depth`, shrink to rounding size, or whose contours
/// dip into the noise floor are unresolvable clusters and are returned as a
/// single root carrying the cluster's full winding count as multiplicity.
/// The returned multiplicities always sum to `count_zeros(region)`.
pub fn find_resonances(
    region: &SearchRegion,
    config: &ResonatorArray,
    rc: RadiationCondition,
    tol: f64,
) -> Result<Vec<Resonance>, SpectraError> {
    region.check()?;
    let f = |z| char_det_scaled(z, config, rc);
    let n0 = region.contour_samples;

    // outer contour, with the spec'd 1% dilation retry
    let mut outer: Option<(SearchRegion, i64)> = None;
    for attempt in 0..=5 {
        let r = region.dilated(1.0 + 0.01 * attempt as f64);
        if let Winding::Count(w) = rect_winding(&f, &r, n0)? {
            if w >= 0 {
                outer = Some((r, w));
                break;
            }
        }
    }
    let (outer_rect, total) = outer.ok_or(SpectraError::ContourTooClose)?;
    if total == 0 {
        return Ok(Vec::new());
    }

    let mut roots: Vec<RootRec> = Vec::new();
    let mut stack: Vec<(SearchRegion, usize, i64)> = vec![(outer_rect, 0, total)];

    while let Some((rect, depth, w)) = stack.pop() {
        if w == 0 {
            continue;
        }
        let tiny = rect.diag() < 4e-13 * (1.0 + rect.center().norm());
        if w == 1 {
            match newton_in_box(config, rc, &rect, tol)? {
                Some(res) => roots.push(RootRec {
                    omega: res.omega,
                    multiplicity: 1,
                    residual: res.residual,
                    last_step: res.last_step,
                }),
                None => {
                    return Err(SpectraError::NewtonDiverged {
                        re: rect.center().re,
                        im: rect.center().im,
                    })
                }
            }
            continue;
        }
        // w >= 2
        if depth >= rect.max_depth {
            return Err(SpectraError::MaxDepthExceeded {
                re: rect.center().re,
                im: rect.center().im,
            });
        }
        if tiny {
            cluster_terminate(config, rc, &rect, w, tol, &mut roots)?;
            continue;
        }
        match split_box(&f, &rect, n0)? {
            Some(children) => {
                let sum: i64 = children.iter().map(|&(_, cw)| cw).sum();
                if sum == w {
                    for (child, cw) in children {
                        stack.push((child, depth + 1, cw));
                    }
                } else {
                    // a zero sits on a shared edge; treat as unresolved cluster
                    cluster_terminate(config, rc, &rect, w, tol, &mut roots)?;
                }
            }
            None => cluster_terminate(config, rc, &rect, w, tol, &mut roots)?,
        }
    }

    // merge duplicates (a Newton iterate occasionally escapes its box)
    roots.sort_by(|a, b| {
        (a.omega.re, a.omega.im)
            .partial_cmp(&(b.omega.re, b.omega.im))
            .unwrap()
    });
    let mut merged: Vec<RootRec> = Vec::new();
    for r in roots {
        if let Some(last) = merged.last_mut() {
            let near = 2e-14 * (1.0 + last.omega.norm());
            if (r.omega - last.omega).norm() <= near {
                last.multiplicity += r.multiplicity;
                last.residual = last.residual.min(r.residual);
                continue;
            }
        }
        merged.push(r);
    }

    // verification circle around isolated roots (spec's multiplicity check)
    for i in 0..merged.len() {
        let radius = (10.0 * merged[i].last_step).max(1e-7);
        let isolated = merged
            .iter()
            .enumerate()
            .all(|(j, o)| j == i || (o.omega - merged[i].omega).norm() > 3.0 * radius);
        if !isolated {
            continue;
        }
        if let Winding::Count(mc) = circle_winding(&f, merged[i].omega, radius, 128)? {
            if mc >= 1 && mc as usize != merged[i].multiplicity {
                // only adopt the circle count when it keeps the total intact
                let new_total: i64 = merged
                    .iter()
                    .enumerate()
                    .map(|(j, o)| {
                        if j == i {
                            mc
                        } else {
                            o.multiplicity as i64
                        }
                    })
                    .sum();
                if new_total == total {
                    merged[i].multiplicity = mc as usize;
                }
            }
        }
    }

    Ok(merged
        .into_iter()
        .map(|r| Resonance {
            omega: r.omega,
            multiplicity: r.multiplicity,
            residual: r.residual,
            condition: rc,
            is_exceptional: r.multiplicity >= 2,
        })
        .collect())
}

fn cluster_terminate(
    config: &ResonatorArray,
    rc: RadiationCondition,
    rect: &SearchRegion,
    w: i64,
    tol: f64,
    roots: &mut Vec<RootRec>,
) -> Result<(), SpectraError> {
    // Newton limit from the centre; at a true multiple root it converges
    // linearly, so give it the relaxed acceptance used for clusters.
    let res = match newton_in_box(config, rc, rect, tol.max(1e-300))? {
        Some(r) => r,
        None => {
            // fall back to the best point on a small grid
            let mut best = (rect.center(), f64::INFINITY);
            for gi in 0..5 {
                for gj in 0..5 {
                    let z = Complex64::new(
                        rect.re_min + (rect.re_max - rect.re_min) * (gi as f64 + 0.5) / 5.0,
                        rect.im_min + (rect.im_max - rect.im_min) * (gj as f64 + 0.5) / 5.0,
                    );
                    let (fv, _) = char_det_scaled(z, config, rc)?;
                    if fv.norm() < best.1 {
                        best = (z, fv.norm());
                    }
                }
            }
            NewtonResult {
                omega: best.0,
                residual: best.1,
                last_step: rect.diag(),
            }
        }
    };
    roots.push(RootRec {
        omega: res.omega,
        multiplicity: w.max(1) as usize,
        residual: res.residual,
        last_step: res.last_step,
    });
    Ok(())
}

type Child = (SearchRegion, i64);

/// Quadrisection with jittered split lines; returns `None` when no jitter
/// yields four reliable contours (noise floor or persistent instability).
fn split_box<F>(f: &F, rect: &SearchRegion, n0: usize) -> Result<Option<Vec<Child>>, SpectraError>
where
    F: Fn(Complex64) -> Result<(Complex64, f64), SpectraError>,
{
    const JITTER: [f64; 5] = [0.0, 0.0073, -0.0131, 0.0219, -0.0305];
    let w = rect.re_max - rect.re_min;
    let h = rect.im_max - rect.im_min;
    'jitter: for &j in &JITTER {
        let cx = rect.re_min + w * (0.5 + j);
        let cy = rect.im_min + h * (0.5 + j);
        let quads = [
            SearchRegion {
                re_min: rect.re_min,
                re_max: cx,
                im_min: rect.im_min,
                im_max: cy,
                ..*rect
            },
            SearchRegion {
                re_min: cx,
                re_max: rect.re_max,
                im_min: rect.im_min,
                im_max: cy,
                ..*rect
            },
            SearchRegion {
                re_min: rect.re_min,
                re_max: cx,
                im_min: cy,
                im_max: rect.im_max,
                ..*rect
            },
            SearchRegion {
                re_min: cx,
                re_max: rect.re_max,
                im_min: cy,
                im_max: rect.im_max,
                ..*rect
            },
        ];
        let mut out = Vec::with_capacity(4);
        for q in quads {
            match rect_winding(f, &q, n0)? {
                Winding::Count(cw) if cw >= 0 => out.push((q, cw)),
                _ => continue 'jitter,
            }
        }
        return Ok(Some(out));
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// delta -> 0 limiting spectrum
// ---------------------------------------------------------------------------

/// Which elementary lattice condition fired at a limiting resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Contributor {
    /// `l_j omega / v_j` is a multiple of pi (1-based resonator index).
    Resonator(usize),
    /// `s_j omega / v` is a multiple of pi (1-based gap index).
    Gap(usize),
}

impl std::fmt::Display for Contributor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Contributor::Resonator(j) => write!(f, "ell{j}"),
            Contributor::Gap(j) => write!(f, "s{j}"),
        }
    }
}

/// One zero of `f(omega; 0)` with its order (= number of contributors).
#[derive(Debug, Clone)]
pub struct DeltaZeroEntry {
    pub omega: Complex64,
    pub order: usize,
    pub contributors: Vec<Contributor>,
}

#[derive(Debug, Clone, Default)]
pub struct DeltaZeroSpectrum {
    pub entries: Vec<DeltaZeroEntry>,
}

/// Enumerates the zeros of the limiting determinant in the disk spanned by
/// the real window `[lo, hi]`: the union of the lattices
/// `pi k v_j / l_j` (resonators) and `pi k v / s_j` (interior gaps). For a
/// complex interior speed the lattice lies on the ray of `v_j`.
pub fn delta_zero_spectrum(config: &ResonatorArray, window: (f64, f64)) -> DeltaZeroSpectrum {
    let (lo, hi) = window;
    if !(lo < hi) {
        return DeltaZeroSpectrum::default();
    }
    let center = Complex64::new(0.5 * (lo + hi), 0.0);
    let radius = 0.5 * (hi - lo);
    let mut candidates: Vec<(Complex64, Contributor)> = Vec::new();
    let mut push_lattice = |step: Complex64, who: Contributor| {
        let smag = step.norm();
        if smag == 0.0 {
            return;
        }
        let kmax = ((center.norm() + radius) / smag).ceil() as i64 + 1;
        for k in -kmax..=kmax {
            let p = step * k as f64;
            if (p - center).norm() <= radius * (1.0 + 1e-12) + 1e-300 {
                candidates.push((p, who));
            }
        }
    };
    for j in 0..config.len() {
        let step = std::f64::consts::PI * config.speeds_inside[j] / config.lengths[j];
        push_lattice(step, Contributor::Resonator(j + 1));
    }
    for j in 0..config.len().saturating_sub(1) {
        let step = Complex64::new(
            std::f64::consts::PI * config.speed_background / config.spacings[j],
            0.0,
        );
        push_lattice(step, Contributor::Gap(j + 1));
    }
    candidates.sort_by(|a, b| (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap());
    let mut entries: Vec<DeltaZeroEntry> = Vec::new();
    for (omega, who) in candidates {
        let tol = 1e-9 * (1.0 + omega.norm());
        match entries.last_mut() {
            Some(e) if (e.omega - omega).norm() <= tol => {
                e.contributors.push(who);
                e.order = e.contributors.len();
            }
            _ => entries.push(DeltaZeroEntry {
                omega,
                order: 1,
                contributors: vec![who],
            }),
        }
    }
    for e in &mut entries {
        e.contributors.sort();
    }
    DeltaZeroSpectrum { entries }
}

// ---------------------------------------------------------------------------
// transmission
// ---------------------------------------------------------------------------

/// Transmission coefficient `T(omega) = |u(x_N^R)|` for a unit-amplitude
/// plane wave incident from the left (forcing referenced to the left face).
pub fn transmission(omega: f64, config: &ResonatorArray) -> Result<f64, SpectraError> {
    let w = Complex64::new(omega, 0.0);
    let (jet, scale) = total_jet_impl(w, config, false)?;
    let v = config.speed_background;
    let i = Complex64::i();
    let k = w / v;
    let bl_out = (Complex64::new(1.0, 0.0), -i * k);
    let bl_in = (Complex64::new(1.0, 0.0), i * k);
    let br = (Complex64::new(1.0, 0.0), i * k);
    // u_L = a*(1, ik) + b*(1, -ik) with a = 1 (unit incident amplitude);
    // right side outgoing: u_R = c*(1, ik). Solve for (b, c):
    //   [P bl_out | -br] (b, c)^T = -P bl_in
    let col1 = jet.m.apply(bl_out);
    let rhs = {
        let t = jet.m.apply(bl_in);
        (-t.0, -t.1)
    };
    let det = col1.0 * (-br.1) - (-br.0) * col1.1;
    if det.norm() <= 1e-12 * (1.0 + scale) {
        return Err(SpectraError::SingularSystem { omega });
    }
    let c = (col1.0 * rhs.1 - col1.1 * rhs.0) / det;
    Ok(c.norm())
}

/// Indices of prominence-filtered local maxima of `ts`.
///
/// The scan interval is treated as half-open `(a, b]`: the first grid point
/// is never a peak (a rise into the open end is not attained there; the
/// static `T -> 1` limit at `omega -> 0` would otherwise register), while
/// the closed right endpoint is a candidate with one-sided prominence (a
/// comb scanned up to its symmetry point crests exactly on the boundary).
pub fn transmission_peaks(ts: &[f64], prominence_frac: f64) -> Vec<usize> {
    let n = ts.len();
    if n < 2 {
        return Vec::new();
    }
    let tmax = ts.iter().cloned().fold(f64::MIN, f64::max);
    let floor = prominence_frac * tmax;
    let mut peaks = Vec::new();
    for i in 1..n {
        let left_ok = ts[i] > ts[i - 1];
        let right_ok = i == n - 1 || ts[i] >= ts[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        // prominence: drop to the highest valley separating this peak from
        // higher terrain on each side
        let mut prom_sides = Vec::new();
        for dir in [-1i64, 1i64] {
            let mut j = i as i64 + dir;
            let mut valley = ts[i];
            let mut bounded = false;
            while j >= 0 && (j as usize) < n {
                let v = ts[j as usize];
                if v > ts[i] {
                    bounded = true;
                    break;
                }
                valley = valley.min(v);
                j += dir;
            }
            prom_sides.push((valley, bounded));
        }
        let prom = match (prom_sides[0], prom_sides[1]) {
            ((vl, true), (vr, true)) => ts[i] - vl.max(vr),
            ((vl, true), (_, false)) => ts[i] - vl,
            ((_, false), (vr, true)) => ts[i] - vr,
            ((vl, false), (vr, false)) => ts[i] - vl.min(vr),
        };
        if prom >= floor && prom > 0.0 {
            peaks.push(i);
        }
    }
    peaks
}

// ---------------------------------------------------------------------------
// serialisation
// ---------------------------------------------------------------------------

/// CSV table `re_omega,im_omega,multiplicity,residual,is_ep`, floats at 17
/// significant digits, rows sorted by (Re, Im).
pub fn resonances_to_csv(list: &[Resonance]) -> String {
    let mut out = String::from("re_omega,im_omega,multiplicity,residual,is_ep\n");
    for r in list {
        out.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e},{}\n",
            r.omega.re, r.omega.im, r.multiplicity, r.residual, r.is_exceptional
        ));
    }
    out
}

/// JSON form of a resonance list, stamped with the configuration digest.
pub fn resonances_to_json(list: &[Resonance], config: &ResonatorArray) -> String {
    let rows: Vec<serde_json::Value> = list
        .iter()
        .map(|r| {
            serde_json::json!({
                "re_omega": r.omega.re,
                "im_omega": r.omega.im,
                "multiplicity": r.multiplicity,
                "residual": r.residual,
                "is_ep": r.is_exceptional,
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "config_hash": config.digest(),
        "resonances": rows,
    }))
    .expect("serialises")
}
