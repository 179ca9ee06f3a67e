//! Propagation (transfer) matrices for resonator chains.
//!
//! A 2x2 matrix maps Dirichlet-Neumann data `(u, u')` across a resonator, a
//! gap, or a full block (resonator plus trailing gap). Products of blocks
//! give the total matrix of the chain; an imaginary gauge potential inside a
//! resonator modifies its interior matrix, and factoring out the gauge decay
//! yields the symmetrised variants used for band structure and for a
//! numerically stable characteristic determinant.
//!
//! Matrix entries are built from even functions of the local wavenumber
//! (`cosh(sqrt(q))` and `sinh(sqrt(q))/sqrt(q)` of `q = (nu l)^2`), so no
//! square-root branch is ever taken. The trig argument is always formed as
//! `omega * (l/v)` with the ratio rounded once: when `l == v` the argument
//! equals `omega` exactly, which keeps the contrast-amplified cancellations
//! near `sin(omega l / v) = 0` at full precision.

mod mode;

pub use mode::{green_function, propagate_mode, ModeTrace, RegionTag};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::ResonatorArray;

/// 2x2 complex matrix acting on Dirichlet-Neumann data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2C {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
}

impl Mat2C {
    pub const fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Mat2C { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2C::new(one, zero, zero, one)
    }

    pub fn zero() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Mat2C::new(zero, zero, zero, zero)
    }

    pub fn det(&self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> Complex64 {
        self.a11 + self.a22
    }

    pub fn frobenius(&self) -> f64 {
        (self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr())
            .sqrt()
    }

    pub fn apply(&self, v: (Complex64, Complex64)) -> (Complex64, Complex64) {
        (
            self.a11 * v.0 + self.a12 * v.1,
            self.a21 * v.0 + self.a22 * v.1,
        )
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Mat2C::new(c * self.a11, c * self.a12, c * self.a21, c * self.a22)
    }

    pub fn add(&self, o: &Mat2C) -> Self {
        Mat2C::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Mat2C::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d)
    }

    /// Eigenvalues, ordered by magnitude (small, large).
    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        let half_tr = 0.5 * self.trace();
        let disc = (half_tr * half_tr - self.det()).sqrt();
        let (e1, e2) = (half_tr - disc, half_tr + disc);
        if e1.norm() <= e2.norm() {
            (e1, e2)
        } else {
            (e2, e1)
        }
    }
}

impl std::ops::Mul for Mat2C {
    type Output = Mat2C;
    fn mul(self, o: Mat2C) -> Mat2C {
        Mat2C::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("wave speed is zero")]
    ZeroSpeed,
    #[error("contrast is zero; use the delta-zero spectrum for the limit problem")]
    ZeroContrast,
    #[error("gauge propagation requires unit background and interior speeds")]
    GaugeRequiresUnitSpeeds,
    #[error("omega is not a resonance: |f| = {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotAResonance { residual: f64, tol: f64 },
    #[error("omega is (numerically) a resonance; the Wronskian vanishes")]
    AtResonance,
    #[error("point {x} lies outside the chain support")]
    OutOfSupport { x: f64 },
}

/// `cosh(sqrt(q))`, `sinh(sqrt(q))/sqrt(q)` and their `d/dq`; entire and even
/// in `sqrt(q)`, hence branch-free.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EvenTrig {
    pub ch: Complex64,
    pub sincu: Complex64,
    pub dch: Complex64,
    pub dsincu: Complex64,
}

pub(crate) fn even_trig_unit(q: Complex64) -> EvenTrig {
    if q.norm() < 1e-12 {
        // |sqrt(q)| < 1e-6: 4-term Taylor keeps the 0/0 limits exact.
        let ch = 1.0 + q * (1.0 / 2.0 + q * (1.0 / 24.0 + q * (1.0 / 720.0)));
        let sincu = 1.0 + q * (1.0 / 6.0 + q * (1.0 / 120.0 + q * (1.0 / 5040.0)));
        let dch = 0.5 + q * (1.0 / 12.0 + q * (1.0 / 240.0 + q * (1.0 / 10080.0)));
        let dsincu = 1.0 / 6.0 + q * (1.0 / 60.0 + q * (1.0 / 1680.0 + q * (1.0 / 90720.0)));
        EvenTrig {
            ch,
            sincu,
            dch,
            dsincu,
        }
    } else {
        let nu = q.sqrt();
        let ch = nu.cosh();
        let sincu = nu.sinh() / nu;
        let dch = 0.5 * sincu;
        let dsincu = (ch - sincu) / (2.0 * q);
        EvenTrig {
            ch,
            sincu,
            dch,
            dsincu,
        }
    }
}

/// Matrix/derivative pair for product-rule differentiation in `omega`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatJet {
    pub m: Mat2C,
    pub dm: Mat2C,
}

impl MatJet {
    pub fn identity() -> Self {
        MatJet {
            m: Mat2C::identity(),
            dm: Mat2C::zero(),
        }
    }

    pub fn mul(&self, right: &MatJet) -> MatJet {
        MatJet {
            m: self.m * right.m,
            dm: (self.dm * right.m).add(&(self.m * right.dm)),
        }
    }

    pub fn scale(&self, c: Complex64) -> MatJet {
        MatJet {
            m: self.m.scale(c),
            dm: self.dm.scale(c),
        }
    }
}

/// Free-space propagator over distance `dist` at wavenumber `omega/speed`,
/// with its `omega`-derivative.
pub(crate) fn free_jet(omega: Complex64, dist: f64, speed: Complex64) -> MatJet {
    let ratio = dist / speed;
    let arg = omega * ratio;
    let q = -arg * arg;
    let dq = -2.0 * omega * (ratio * ratio);
    let t = even_trig_unit(q);
    let (a12, a21, da12, da21);
    if dist == 0.0 {
        a12 = Complex64::new(0.0, 0.0);
        a21 = Complex64::new(0.0, 0.0);
        da12 = Complex64::new(0.0, 0.0);
        da21 = Complex64::new(0.0, 0.0);
    } else {
        a12 = dist * t.sincu;
        a21 = q * t.sincu / dist;
        da12 = dist * t.dsincu * dq;
        da21 = (t.sincu + q * t.dsincu) * dq / dist;
    }
    MatJet {
        m: Mat2C::new(t.ch, a12, a21, t.ch),
        dm: Mat2C::new(t.dch * dq, da12, da21, t.dch * dq),
    }
}

/// Gauge interior propagator over distance `dist` (unit interior speed),
/// with its `omega`-derivative. Reduces to [`free_jet`] at `gamma = 0`.
pub(crate) fn gauge_interior_jet(omega: Complex64, dist: f64, gamma: f64) -> MatJet {
    let gl = gamma * dist;
    let wl = omega * dist;
    let q = Complex64::new(gl * gl, 0.0) - wl * wl;
    let dq = -2.0 * omega * (dist * dist);
    let t = even_trig_unit(q);
    let e = Complex64::new((-gl).exp(), 0.0);
    let w2 = omega * omega;
    let s = dist * t.sincu; // sinh(nu l)/nu
    let ds = dist * t.dsincu * dq;
    let dch = t.dch * dq;
    let m = Mat2C::new(t.ch + gamma * s, s, -w2 * s, t.ch - gamma * s).scale(e);
    let dm = Mat2C::new(
        dch + gamma * ds,
        ds,
        -2.0 * omega * s - w2 * ds,
        dch - gamma * ds,
    )
    .scale(e);
    MatJet { m, dm }
}

/// Conjugation by `diag(1, delta)`: converts an interior propagator to act on
/// exterior Dirichlet-Neumann data.
fn delta_conjugate(m: &Mat2C, delta: f64) -> Mat2C {
    Mat2C::new(m.a11, m.a12 * delta, m.a21 / delta, m.a22)
}

/// Interior propagation matrix `[[cos(kl), sin(kl)/k], [-k sin(kl), cos(kl)]]`
/// with `k = omega/speed`; the `omega -> 0` limit is the shear `[[1, l], [0, 1]]`.
pub fn interior_matrix(
    omega: Complex64,
    length: f64,
    speed: Complex64,
) -> Result<Mat2C, PropagationError> {
    if speed.norm() == 0.0 {
        return Err(PropagationError::ZeroSpeed);
    }
    Ok(free_jet(omega, length, speed).m)
}

/// Exterior propagation matrix across a gap; identity when `spacing == 0`.
pub fn exterior_matrix(omega: Complex64, spacing: f64, v: f64) -> Mat2C {
    free_jet(omega, spacing, Complex64::new(v, 0.0)).m
}

/// Gauge-modified interior matrix (unit interior speed). Both square-root
/// branches of `nu = sqrt(gamma^2 - omega^2)` give this same matrix.
pub fn gauge_interior_matrix(omega: Complex64, length: f64, gamma: f64) -> Mat2C {
    gauge_interior_jet(omega, length, gamma).m
}

fn block_jet(
    i: usize,
    omega: Complex64,
    config: &ResonatorArray,
) -> Result<MatJet, PropagationError> {
    if config.contrast == 0.0 {
        return Err(PropagationError::ZeroContrast);
    }
    if config.speeds_inside[i].norm() == 0.0 {
        return Err(PropagationError::ZeroSpeed);
    }
    let delta = config.contrast;
    let interior = if config.has_gauge() {
        if config.speed_background != 1.0 || config.speeds_inside[i] != Complex64::new(1.0, 0.0) {
            return Err(PropagationError::GaugeRequiresUnitSpeeds);
        }
        gauge_interior_jet(omega, config.lengths[i], config.gauges[i])
    } else {
        free_jet(omega, config.lengths[i], config.speeds_inside[i])
    };
    let conj = MatJet {
        m: delta_conjugate(&interior.m, delta),
        dm: delta_conjugate(&interior.dm, delta),
    };
    let ext = free_jet(
        omega,
        config.spacing_after(i),
        Complex64::new(config.speed_background, 0.0),
    );
    Ok(ext.mul(&conj))
}

/// Block matrix of resonator `i` (0-based) and its trailing gap:
/// `P_ext(s_i) diag(1, 1/delta) P_int diag(1, delta)`.
pub fn block_matrix(
    i: usize,
    omega: Complex64,
    config: &ResonatorArray,
) -> Result<Mat2C, PropagationError> {
    Ok(block_jet(i, omega, config)?.m)
}

/// Same as [`block_matrix`] for chains with a gauge potential; determinant
/// `exp(-2 l_i gamma_i)`.
pub fn gauge_block_matrix(
    i: usize,
    omega: Complex64,
    config: &ResonatorArray,
) -> Result<Mat2C, PropagationError> {
    block_matrix(i, omega, config)
}

/// Gauge block with the decay factored out: `exp(l_i gamma_i) P_i`, an
/// element of SL(2, C).
pub fn symmetrised_block(
    i: usize,
    omega: Complex64,
    config: &ResonatorArray,
) -> Result<Mat2C, PropagationError> {
    let b = block_jet(i, omega, config)?;
    let e = Complex64::new((config.gauges[i] * config.lengths[i]).exp(), 0.0);
    Ok(b.m.scale(e))
}

/// Product of block jets; `scale` tracks the largest partial-product norm,
/// the natural size against which rounding noise in the product is measured.
pub(crate) fn total_jet_impl(
    omega: Complex64,
    config: &ResonatorArray,
    symmetrised: bool,
) -> Result<(MatJet, f64), PropagationError> {
    let mut acc = MatJet::identity();
    let mut scale = 1.0f64;
    for i in 0..config.len() {
        let mut b = block_jet(i, omega, config)?;
        if symmetrised {
            let e = Complex64::new((config.gauges[i] * config.lengths[i]).exp(), 0.0);
            b = b.scale(e);
        }
        acc = b.mul(&acc);
        scale = scale.max(acc.m.frobenius());
    }
    Ok((acc, scale))
}

/// Total propagation matrix `P_N ... P_1`.
pub fn total_matrix(omega: Complex64, config: &ResonatorArray) -> Result<Mat2C, PropagationError> {
    Ok(total_jet_impl(omega, config, false)?.0.m)
}

/// Symmetrised total matrix `exp(sum_i l_i gamma_i) P_tot`, in SL(2, C).
pub fn symmetrised_total(
    omega: Complex64,
    config: &ResonatorArray,
) -> Result<Mat2C, PropagationError> {
    Ok(total_jet_impl(omega, config, true)?.0.m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
    }

    /// Series oracle for cos/sin of complex arguments, independent of the
    /// std implementations used by `even_trig_unit`.
    fn cos_series(z: Complex64) -> Complex64 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..60 {
            term = -term * z * z / ((2 * n - 1) as f64 * (2 * n) as f64);
            sum += term;
        }
        sum
    }

    fn sin_series(z: Complex64) -> Complex64 {
        let mut term = z;
        let mut sum = term;
        for n in 1..60 {
            term = -term * z * z / ((2 * n) as f64 * (2 * n + 1) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn interior_half_period() {
        let m = interior_matrix(c(std::f64::consts::PI, 0.0), 1.0, c(1.0, 0.0)).unwrap();
        assert!(close(m.a11, c(-1.0, 0.0), 1e-15));
        assert!(m.a12.norm() < 1e-15);
        assert!(m.a21.norm() < 1e-14);
        assert!(close(m.a22, c(-1.0, 0.0), 1e-15));
    }

    #[test]
    fn interior_shear_limit() {
        let m = interior_matrix(c(0.0, 0.0), 2.0, c(1.0, 0.0)).unwrap();
        assert_eq!(m.a11, c(1.0, 0.0));
        assert_eq!(m.a12, c(2.0, 0.0));
        assert_eq!(m.a21, c(0.0, 0.0));
        assert_eq!(m.a22, c(1.0, 0.0));
    }

    #[test]
    fn interior_complex_speed_matches_series_oracle() {
        // omega = 1, l = 1, v = e^{i pi/4}; k = e^{-i pi/4}
        let v = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let m = interior_matrix(c(1.0, 0.0), 1.0, v).unwrap();
        let k = c(1.0, 0.0) / v;
        assert!(close(m.a11, cos_series(k), 1e-14));
        assert!(close(m.a12, sin_series(k) / k, 1e-14));
        assert!(close(m.a21, -k * sin_series(k), 1e-14));
        assert!(close(m.a22, cos_series(k), 1e-14));
        // frozen values
        assert!(close(m.a11, c(0.95835813283300702, 0.49861138667283276), 1e-14));
        assert!(close(m.a12, c(0.99166942223800144, 0.16646827901959765), 1e-14));
        assert!(close(m.a21, c(-0.16646827901959765, 0.99166942223800144), 1e-14));
    }

    #[test]
    fn interior_zero_speed_rejected() {
        assert_eq!(
            interior_matrix(c(1.0, 0.0), 1.0, c(0.0, 0.0)),
            Err(PropagationError::ZeroSpeed)
        );
    }

    #[test]
    fn exterior_zero_spacing_is_identity() {
        for &w in &[c(0.3, 0.0), c(2.0, -0.7), c(0.0, 0.0)] {
            assert_eq!(exterior_matrix(w, 0.0, 1.0), Mat2C::identity());
        }
    }

    #[test]
    fn exterior_quarter_period() {
        let m = exterior_matrix(c(std::f64::consts::FRAC_PI_2, 0.0), 1.0, 1.0);
        assert!(m.a11.norm() < 1e-15);
        assert!(close(m.a12, c(2.0 / std::f64::consts::PI, 0.0), 1e-15));
        assert!(close(m.a21, c(-std::f64::consts::FRAC_PI_2, 0.0), 1e-15));
        assert!(m.a22.norm() < 1e-15);
    }

    #[test]
    fn exterior_equals_interior_formula() {
        let w = c(1.0, 1.0);
        let e = exterior_matrix(w, 1.0, 1.0);
        let i = interior_matrix(w, 1.0, c(1.0, 0.0)).unwrap();
        assert_eq!(e, i);
    }

    /// Explicit 4-matrix product oracle for the block, written with plain
    /// cos/sin rather than the even-form primitives.
    fn block_product_oracle(
        omega: Complex64,
        l: f64,
        s: f64,
        vi: Complex64,
        v: f64,
        delta: f64,
    ) -> Mat2C {
        let pint = {
            let k = omega / vi;
            Mat2C::new(
                (k * l).cos(),
                (k * l).sin() / k,
                -k * (k * l).sin(),
                (k * l).cos(),
            )
        };
        let pext = if s == 0.0 {
            Mat2C::identity()
        } else {
            let k = omega / v;
            Mat2C::new(
                (k * s).cos(),
                (k * s).sin() / k,
                -k * (k * s).sin(),
                (k * s).cos(),
            )
        };
        let d = Mat2C::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(delta, 0.0));
        let dinv = Mat2C::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / delta, 0.0));
        pext * dinv * pint * d
    }

    #[test]
    fn block_matches_product_oracle_100_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let l = rng.gen_range(0.3..2.0);
            let s = rng.gen_range(0.2..2.0);
            let vi = c(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
            let v = rng.gen_range(0.5..2.0);
            let delta = rng.gen_range(0.01..1.0);
            let w = c(rng.gen_range(0.2..6.0), rng.gen_range(-1.0..1.0));
            let cfg = ResonatorArray::new(vec![l], vec![s], vec![vi], v, delta);
            let got = block_matrix(0, w, &cfg).unwrap();
            let want = block_product_oracle(w, l, s, vi, v, delta);
            for (g, e) in [
                (got.a11, want.a11),
                (got.a12, want.a12),
                (got.a21, want.a21),
                (got.a22, want.a22),
            ] {
                assert!(
                    (g - e).norm() <= 1e-12 * (1.0 + e.norm()),
                    "block mismatch: got {g}, want {e}"
                );
            }
        }
    }

    /// Closed-form block entries obtained from the matrix product (the
    /// published display carries delta <-> 1/delta typos in its second
    /// column; the product form is the consistent one, det = 1).
    #[test]
    fn block_closed_form() {
        let (l, s, delta) = (1.3, 0.7, 0.05);
        let vi = c(1.5, -0.2);
        let v = 1.1;
        let w = c(2.1, 0.3);
        let cfg = ResonatorArray::new(vec![l], vec![s], vec![vi], v, delta);
        let m = block_matrix(0, w, &cfg).unwrap();
        let (cl, sl) = ((w / vi * l).cos(), (w / vi * l).sin());
        let (cs, ss) = ((w / v * s).cos(), (w / v * s).sin());
        let r = v / vi;
        assert!(close(m.a11, cs * cl - (r / delta) * ss * sl, 1e-13));
        assert!(close(m.a12, (v / w) * cl * ss + delta * (vi / w) * cs * sl, 1e-13));
        assert!(close(m.a21, -(w / v) * cl * ss - (w / (delta * vi)) * cs * sl, 1e-13));
        assert!(close(m.a22, cs * cl - (delta / r) * ss * sl, 1e-13));
    }

    #[test]
    fn block_det_is_one() {
        let cfg = ResonatorArray::unit_chain(2, 0.1);
        let m = block_matrix(0, c(std::f64::consts::PI, 0.0), &cfg).unwrap();
        assert!((m.det() - c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn block_zero_contrast_rejected() {
        let cfg = ResonatorArray::unit_chain(1, 0.0);
        assert_eq!(
            block_matrix(0, c(1.0, 0.0), &cfg),
            Err(PropagationError::ZeroContrast)
        );
    }

    #[test]
    fn block_homogeneous_limit() {
        // delta = 1 and v_i = v: block reduces to free propagation over l + s.
        let cfg = ResonatorArray::new(vec![0.8], vec![0.5], vec![c(1.3, 0.0)], 1.3, 1.0);
        let w = c(1.7, -0.2);
        let m = block_matrix(0, w, &cfg).unwrap();
        let free = exterior_matrix(w, 1.3, 1.3);
        for (g, e) in [
            (m.a11, free.a11),
            (m.a12, free.a12),
            (m.a21, free.a21),
            (m.a22, free.a22),
        ] {
            assert!(close(g, e, 1e-12));
        }
    }

    #[test]
    fn total_single_block() {
        let cfg = ResonatorArray::unit_chain(1, 0.2);
        let w = c(1.2, -0.1);
        assert_eq!(
            total_matrix(w, &cfg).unwrap(),
            block_matrix(0, w, &cfg).unwrap()
        );
    }

    #[test]
    fn gauge_interior_reduces_at_zero_gauge() {
        let w = c(1.4, 0.3);
        let m = gauge_interior_matrix(w, 1.2, 0.0);
        let p = interior_matrix(w, 1.2, c(1.0, 0.0)).unwrap();
        for (g, e) in [(m.a11, p.a11), (m.a12, p.a12), (m.a21, p.a21), (m.a22, p.a22)] {
            assert!(close(g, e, 1e-14));
        }
    }

    #[test]
    fn gauge_interior_det() {
        let (l, g) = (1.3, 0.8);
        let m = gauge_interior_matrix(c(2.2, 0.4), l, g);
        let want = c((-2.0 * g * l).exp(), 0.0);
        assert!(close(m.det(), want, 1e-13));
    }

    #[test]
    fn gauge_interior_matches_factored_form() {
        // e^{-gl} [[1,0],[-g,1]] P^{sqrt(w^2-g^2)}_int [[1,0],[g,1]]
        let (l, g) = (0.9, 1.7);
        for &w in &[c(2.5, 0.0), c(0.4, 0.3), c(1.7, -0.6)] {
            let mu = (w * w - c(g * g, 0.0)).sqrt();
            let pint = interior_matrix(mu, l, c(1.0, 0.0)).unwrap();
            let gm = Mat2C::new(c(1.0, 0.0), c(0.0, 0.0), c(-g, 0.0), c(1.0, 0.0));
            let gp = Mat2C::new(c(1.0, 0.0), c(0.0, 0.0), c(g, 0.0), c(1.0, 0.0));
            let want = (gm * pint * gp).scale(c((-g * l).exp(), 0.0));
            let got = gauge_interior_matrix(w, l, g);
            for (a, b) in [
                (got.a11, want.a11),
                (got.a12, want.a12),
                (got.a21, want.a21),
                (got.a22, want.a22),
            ] {
                assert!(close(a, b, 1e-13));
            }
        }
    }

    #[test]
    fn gauge_branch_invariance_100_draws() {
        // Both square roots of w^2 - g^2 must give the same matrix; compare
        // the even-form result against the factored form with the opposite
        // branch.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let l = rng.gen_range(0.2..2.0);
            let g = rng.gen_range(-2.0..2.0);
            let w = c(rng.gen_range(0.1..4.0), rng.gen_range(-1.0..1.0));
            let mu = -(w * w - c(g * g, 0.0)).sqrt(); // opposite branch
            let pint = interior_matrix(mu, l, c(1.0, 0.0)).unwrap();
            let gm = Mat2C::new(c(1.0, 0.0), c(0.0, 0.0), c(-g, 0.0), c(1.0, 0.0));
            let gp = Mat2C::new(c(1.0, 0.0), c(0.0, 0.0), c(g, 0.0), c(1.0, 0.0));
            let want = (gm * pint * gp).scale(c((-g * l).exp(), 0.0));
            let got = gauge_interior_matrix(w, l, g);
            for (a, b) in [
                (got.a11, want.a11),
                (got.a12, want.a12),
                (got.a21, want.a21),
                (got.a22, want.a22),
            ] {
                assert!(close(a, b, 1e-13));
            }
        }
    }

    /// Closed form of the gauge block from the product (the published
    /// display's (1,1) entry misplaces delta; entries (1,2), (2,1), (2,2)
    /// agree with it).
    #[test]
    fn gauge_block_closed_form() {
        let (l, s, g, delta) = (1.0, 0.8, 1.3, 0.07);
        let w = c(2.4, 0.5);
        let cfg = ResonatorArray::new(vec![l], vec![s], vec![c(1.0, 0.0)], 1.0, delta)
            .with_gauges(vec![g]);
        let m = gauge_block_matrix(0, w, &cfg).unwrap();
        let nu = (c(g * g, 0.0) - w * w).sqrt();
        let (ch, shn) = ((nu * l).cosh(), (nu * l).sinh() / nu);
        let (cs, ss) = ((w * s).cos(), (w * s).sin());
        let e = c((-g * l).exp(), 0.0);
        let psi = |a: Complex64, b: Complex64| a * cs + b * ss;
        assert!(close(m.a11, e * (cs * ch - psi(c(-g, 0.0), w / delta) * shn), 1e-12));
        assert!(close(
            m.a12,
            e * (ch * ss / w - (delta / w) * psi(-w, c(g / delta, 0.0)) * shn),
            1e-12
        ));
        assert!(close(
            m.a21,
            e * (-w * ch * ss - (w / delta) * psi(w, c(delta * g, 0.0)) * shn),
            1e-12
        ));
        assert!(close(
            m.a22,
            e * (cs * ch - delta * psi(c(g / delta, 0.0), w) * shn),
            1e-12
        ));
    }

    #[test]
    fn gauge_block_det_100_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let l = rng.gen_range(0.3..1.8);
            let s = rng.gen_range(0.2..1.5);
            let g = rng.gen_range(-1.5..1.5);
            let delta = rng.gen_range(0.02..0.9);
            let w = c(rng.gen_range(0.2..5.0), rng.gen_range(-0.8..0.8));
            let cfg = ResonatorArray::new(vec![l], vec![s], vec![c(1.0, 0.0)], 1.0, delta)
                .with_gauges(vec![g]);
            let m = gauge_block_matrix(0, w, &cfg).unwrap();
            let want = c((-2.0 * g * l).exp(), 0.0);
            assert!(
                (m.det() - want).norm() <= 1e-13 * (1.0 + want.norm()),
                "det {} want {}",
                m.det(),
                want
            );
        }
    }

    #[test]
    fn gauge_block_requires_unit_speeds() {
        let cfg = ResonatorArray::new(vec![1.0], vec![0.5], vec![c(2.0, 0.0)], 1.0, 0.1)
            .with_gauges(vec![1.0]);
        assert_eq!(
            gauge_block_matrix(0, c(1.0, 0.0), &cfg),
            Err(PropagationError::GaugeRequiresUnitSpeeds)
        );
    }

    #[test]
    fn symmetrised_block_is_unimodular() {
        let cfg = ResonatorArray::new(vec![1.0], vec![0.6], vec![c(1.0, 0.0)], 1.0, 0.1)
            .with_gauges(vec![1.0]);
        let m = symmetrised_block(0, c(2.3, -0.4), &cfg).unwrap();
        assert!((m.det() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn symmetrised_total_scaling() {
        let cfg = ResonatorArray::new(
            vec![1.0, 0.7],
            vec![0.5],
            vec![c(1.0, 0.0); 2],
            1.0,
            0.2,
        )
        .with_gauges(vec![1.0, -0.4]);
        let w = c(1.9, 0.2);
        let tot = total_matrix(w, &cfg).unwrap();
        let sym = symmetrised_total(w, &cfg).unwrap();
        let e = c((1.0 * 1.0 + (-0.4) * 0.7f64).exp(), 0.0);
        for (a, b) in [
            (sym.a11, e * tot.a11),
            (sym.a12, e * tot.a12),
            (sym.a21, e * tot.a21),
            (sym.a22, e * tot.a22),
        ] {
            assert!(close(a, b, 1e-13));
        }
        assert!((sym.det() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn jet_derivative_matches_finite_difference() {
        let cfg = ResonatorArray::new(
            vec![1.0, 1.2],
            vec![0.8],
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            1.0,
            0.15,
        )
        .with_gauges(vec![0.9, 0.3]);
        let w = c(1.7, -0.3);
        let h = 1e-6;
        let (jet, _) = total_jet_impl(w, &cfg, true).unwrap();
        let mp = total_jet_impl(w + c(h, 0.0), &cfg, true).unwrap().0.m;
        let mm = total_jet_impl(w - c(h, 0.0), &cfg, true).unwrap().0.m;
        let fd = mp.add(&mm.scale(c(-1.0, 0.0))).scale(c(0.5 / h, 0.0));
        for (a, b) in [
            (jet.dm.a11, fd.a11),
            (jet.dm.a12, fd.a12),
            (jet.dm.a21, fd.a21),
            (jet.dm.a22, fd.a22),
        ] {
            assert!((a - b).norm() <= 1e-7 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }

    #[test]
    fn even_trig_series_continuity() {
        // continuity across the series threshold and against direct eval
        let q = c(4e-12, 3e-12);
        let t = even_trig_unit(q);
        let nu = q.sqrt();
        assert!(close(t.ch, nu.cosh(), 1e-15));
        assert!(close(t.sincu, nu.sinh() / nu, 1e-15));
        let small = even_trig_unit(c(1e-13, 0.0));
        assert!((small.ch - 1.0).norm() < 1e-12);
        assert!((small.sincu - 1.0).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn det_multiplicative(
            a in -2.0f64..2.0, b in -2.0f64..2.0, cc in -2.0f64..2.0, d in -2.0f64..2.0,
            e in -2.0f64..2.0, f in -2.0f64..2.0, g in -2.0f64..2.0, h in -2.0f64..2.0,
        ) {
            let m1 = Mat2C::new(c(a, b), c(cc, d), c(d, a), c(b, cc));
            let m2 = Mat2C::new(c(e, f), c(g, h), c(h, e), c(f, g));
            let lhs = (m1 * m2).det();
            let rhs = m1.det() * m2.det();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn mul_associative(
            a in -1.0f64..1.0, b in -1.0f64..1.0, cc in -1.0f64..1.0,
            d in -1.0f64..1.0, e in -1.0f64..1.0, f in -1.0f64..1.0,
        ) {
            let m1 = Mat2C::new(c(a, b), c(b, cc), c(cc, a), c(a, d));
            let m2 = Mat2C::new(c(d, e), c(e, f), c(f, d), c(d, a));
            let m3 = Mat2C::new(c(f, a), c(a, e), c(e, b), c(b, f));
            let lhs = (m1 * m2) * m3;
            let rhs = m1 * (m2 * m3);
            for (x, y) in [(lhs.a11, rhs.a11), (lhs.a12, rhs.a12), (lhs.a21, rhs.a21), (lhs.a22, rhs.a22)] {
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }

        #[test]
        fn total_det_unimodular_random_dimer(
            l1 in 0.3f64..2.0, l2 in 0.3f64..2.0, s in 0.2f64..1.5,
            delta in 0.01f64..0.9,
            wre in 0.1f64..5.0, wim in -1.0f64..1.0,
        ) {
            let cfg = ResonatorArray::new(
                vec![l1, l2], vec![s],
                vec![c(1.0, 0.0), c(1.0, 0.0)], 1.0, delta,
            );
            let m = total_matrix(c(wre, wim), &cfg).unwrap();
            prop_assert!((m.det() - c(1.0, 0.0)).norm() <= 1e-12 * m.frobenius().max(1.0));
        }
    }
}
