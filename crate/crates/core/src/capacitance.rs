//! Generalised and gauge capacitance matrices and their eigenvalues.
//!
//! In the high-contrast limit the resonances near a limiting frequency
//! `omega_0` are governed by an `N x N` tridiagonal capacitance matrix: the
//! nonzero eigenvalues `lambda_i` produce the square-root pairs
//! `omega_0 +- v sqrt(delta lambda_i)`, the zero eigenvalues the `O(delta)`
//! branch. Chains with an imaginary gauge potential have an analogous gauge
//! capacitance matrix built from `zeta(z) = z / (1 - exp(-z))`.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::ResonatorArray;

#[derive(Debug, Error, PartialEq)]
pub enum CapacitanceError {
    #[error("omega_0 = {omega} is not in the delta = 0 limiting spectrum")]
    NotALimitResonance { omega: Complex64 },
    #[error("eigensolver did not converge within the iteration cap")]
    ConvergenceFailure,
    #[error("matrix size {n} exceeds the small dense regime (64)")]
    TooLarge { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CapacitanceKind {
    /// C-tilde at a limiting resonance, assembled from the theta products.
    Generalised {
        omega0: Complex64,
        thetas: Vec<Complex64>,
    },
    /// Gauge capacitance matrix built from zeta ratios.
    Gauge,
}

/// Complex tridiagonal matrix; `sub[i]` couples row `i+1` to column `i`,
/// `sup[i]` row `i` to column `i+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitanceMatrix {
    pub n: usize,
    pub diag: Vec<Complex64>,
    pub sub: Vec<Complex64>,
    pub sup: Vec<Complex64>,
    pub kind: CapacitanceKind,
}

impl CapacitanceMatrix {
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let z = Complex64::new(0.0, 0.0);
        let mut m = vec![vec![z; self.n]; self.n];
        for i in 0..self.n {
            m[i][i] = self.diag[i];
            if i + 1 < self.n {
                m[i][i + 1] = self.sup[i];
                m[i + 1][i] = self.sub[i];
            }
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        let s: f64 = self.diag.iter().map(|x| x.norm_sqr()).sum::<f64>()
            + self.sub.iter().map(|x| x.norm_sqr()).sum::<f64>()
            + self.sup.iter().map(|x| x.norm_sqr()).sum::<f64>();
        s.sqrt()
    }

    /// JSON object `{n, diag, sub, super}` with complex entries as `[re, im]`.
    pub fn to_json(&self) -> String {
        let pair = |v: &Vec<Complex64>| -> Vec<[f64; 2]> { v.iter().map(|c| [c.re, c.im]).collect() };
        serde_json::to_string_pretty(&serde_json::json!({
            "n": self.n,
            "diag": pair(&self.diag),
            "sub": pair(&self.sub),
            "super": pair(&self.sup),
        }))
        .expect("serialises")
    }
}

/// The interleaved parameter vectors: `frak_t = (r_1 l_1, s_1, r_2 l_2, ...)`
/// and `t = (r_1^2 l_1, s_1, r_2^2 l_2, ...)`, both of length `2N - 1`.
pub fn t_vectors(config: &ResonatorArray) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = config.len();
    let mut frak = Vec::with_capacity(2 * n - 1);
    let mut t = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        let r = config.speed_ratio(i);
        frak.push(r * config.lengths[i]);
        t.push(r * r * config.lengths[i]);
        if i + 1 < n {
            frak.push(Complex64::new(config.spacings[i], 0.0));
            t.push(Complex64::new(config.spacings[i], 0.0));
        }
    }
    (frak, t)
}

/// Relative tolerance of the `pi | frak_t_j omega / v` divisibility test.
const DIVISIBILITY_TOL: f64 = 1e-9;

fn is_pi_multiple(z: Complex64) -> bool {
    let q = z / std::f64::consts::PI;
    let k = q.re.round();
    (q - k).norm() <= DIVISIBILITY_TOL * q.norm().max(1.0)
}

/// Coefficients `c_0..c_{2N}` (with `c_0 = c_{2N} = 0`) and the products
/// `theta_j = c_j c_{j+1}`, `j = 1..2N-2`, at a limiting resonance.
pub fn coefficients(
    omega0: Complex64,
    config: &ResonatorArray,
) -> Result<(Vec<Complex64>, Vec<Complex64>), CapacitanceError> {
    let (frak, t) = t_vectors(config);
    let v = config.speed_background;
    let zero = Complex64::new(0.0, 0.0);
    let m = frak.len(); // 2N - 1
    let mut c = vec![zero; m + 2];
    let mut any = false;
    for j in 0..m {
        if is_pi_multiple(frak[j] * omega0 / v) {
            c[j + 1] = 1.0 / t[j];
            any = true;
        }
    }
    if !any {
        return Err(CapacitanceError::NotALimitResonance { omega: omega0 });
    }
    let thetas: Vec<Complex64> = (1..m).map(|j| c[j] * c[j + 1]).collect();
    Ok((c, thetas))
}

/// Generalised capacitance matrix at a limiting resonance `omega0`.
pub fn capacitance_matrix(
    omega0: Complex64,
    config: &ResonatorArray,
) -> Result<CapacitanceMatrix, CapacitanceError> {
    let n = config.len();
    let (_, thetas) = coefficients(omega0, config)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut diag = vec![zero; n];
    let mut sub = vec![zero; n.saturating_sub(1)];
    let mut sup = vec![zero; n.saturating_sub(1)];
    if n >= 2 {
        diag[0] = thetas[0];
        sup[0] = -thetas[0];
        for i in 1..n - 1 {
            sub[i - 1] = -thetas[2 * i - 1];
            diag[i] = thetas[2 * i - 1] + thetas[2 * i];
            sup[i] = -thetas[2 * i];
        }
        sub[n - 2] = -thetas[2 * n - 3];
        diag[n - 1] = thetas[2 * n - 3];
    }
    Ok(CapacitanceMatrix {
        n,
        diag,
        sub,
        sup,
        kind: CapacitanceKind::Generalised { omega0, thetas },
    })
}

/// `zeta(z) = z / (1 - exp(-z))`, positive on the real line, `zeta(0) = 1`.
pub fn zeta(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z / (-(-z).exp_m1())
    }
}

/// Gauge capacitance matrix `C^gamma`. The trailing spacing serves as `s_N`
/// for the first diagonal entry's right neighbour gap when `N = 1`.
pub fn gauge_capacitance(config: &ResonatorArray) -> CapacitanceMatrix {
    let n = config.len();
    let gl = |i: usize| config.gauges[i] * config.lengths[i];
    let s = |i: usize| config.spacing_after(i);
    let zero = Complex64::new(0.0, 0.0);
    let mut diag = vec![zero; n];
    let mut sub = vec![zero; n.saturating_sub(1)];
    let mut sup = vec![zero; n.saturating_sub(1)];
    if n == 1 {
        diag[0] = Complex64::new(zeta(gl(0)) / s(0), 0.0);
    } else {
        diag[0] = Complex64::new(zeta(gl(0)) / s(0), 0.0);
        for i in 1..n - 1 {
            diag[i] = Complex64::new(zeta(-gl(i)) / s(i - 1) + zeta(gl(i)) / s(i), 0.0);
        }
        diag[n - 1] = Complex64::new(zeta(-gl(n - 1)) / s(n - 2), 0.0);
        for i in 0..n - 1 {
            sup[i] = Complex64::new(-zeta(gl(i)) / s(i), 0.0);
            sub[i] = Complex64::new(-zeta(-gl(i + 1)) / s(i), 0.0);
        }
    }
    CapacitanceMatrix {
        n,
        diag,
        sub,
        sup,
        kind: CapacitanceKind::Gauge,
    }
}

// ---------------------------------------------------------------------------
// dense complex eigenvalues (Hessenberg QR with Wilkinson shifts)
// ---------------------------------------------------------------------------

/// All eigenvalues of the (generally non-Hermitian) tridiagonal matrix,
/// sorted by (Re, Im).
///
/// Explicitly shifted QR on the Hessenberg form with Wilkinson shifts;
/// eigenvalues closer than `10 sqrt(eps) ||A||_F` are indistinguishable from
/// a defective cluster in f64 and are collapsed to their barycentre, which
/// unlike the individual values is well conditioned.
pub fn eigenvalues(cm: &CapacitanceMatrix) -> Result<Vec<Complex64>, CapacitanceError> {
    if cm.n > 64 {
        return Err(CapacitanceError::TooLarge { n: cm.n });
    }
    let mut evs = hessenberg_qr(cm.to_dense())?;
    collapse_clusters(&mut evs, 10.0 * f64::EPSILON.sqrt() * cm.frobenius());
    evs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(evs)
}

fn eig2(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
) -> (Complex64, Complex64) {
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
    (0.5 * (tr + disc), 0.5 * (tr - disc))
}

fn hessenberg_qr(mut h: Vec<Vec<Complex64>>) -> Result<Vec<Complex64>, CapacitanceError> {
    let n = h.len();
    let mut evs = Vec::with_capacity(n);
    if n == 0 {
        return Ok(evs);
    }
    let mut hi = n - 1;
    let mut iter_total = 0usize;
    let cap = 100 * n.max(1);
    let eps = f64::EPSILON;
    loop {
        // deflate negligible subdiagonals
        for i in 1..=hi {
            let s = h[i - 1][i - 1].norm() + h[i][i].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[i][i - 1].norm() <= eps * s {
                h[i][i - 1] = Complex64::new(0.0, 0.0);
            }
        }
        // split off converged eigenvalues from the bottom
        loop {
            if hi == 0 {
                evs.push(h[0][0]);
                evs.reverse();
                return Ok(evs);
            }
            if h[hi][hi - 1].norm() == 0.0 {
                evs.push(h[hi][hi]);
                hi -= 1;
                continue;
            }
            if hi >= 1 && (hi == 1 || h[hi - 1][hi - 2].norm() == 0.0) {
                // isolated 2x2 block
                let (e1, e2) = eig2(
                    h[hi - 1][hi - 1],
                    h[hi - 1][hi],
                    h[hi][hi - 1],
                    h[hi][hi],
                );
                evs.push(e2);
                evs.push(e1);
                if hi == 1 {
                    evs.reverse();
                    return Ok(evs);
                }
                hi -= 2;
                continue;
            }
            break;
        }
        // active window [lo, hi]
        let mut lo = hi;
        while lo > 0 && h[lo][lo - 1].norm() != 0.0 {
            lo -= 1;
        }
        iter_total += 1;
        if iter_total > cap {
            return Err(CapacitanceError::ConvergenceFailure);
        }
        // Wilkinson shift: trailing 2x2 eigenvalue nearest h[hi][hi]
        let (e1, e2) = eig2(
            h[hi - 1][hi - 1],
            h[hi - 1][hi],
            h[hi][hi - 1],
            h[hi][hi],
        );
        let mut shift = if (e1 - h[hi][hi]).norm() <= (e2 - h[hi][hi]).norm() {
            e1
        } else {
            e2
        };
        if iter_total % 16 == 0 {
            // exceptional shift to break rare cycling
            shift += Complex64::new(h[hi][hi - 1].norm(), 0.0);
        }
        // explicit shifted QR step on the window via Givens rotations
        for i in lo..=hi {
            h[i][i] -= shift;
        }
        let mut rot: Vec<(Complex64, Complex64)> = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (a, b) = (h[k][k], h[k + 1][k]);
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (a.conj() / r, b.conj() / r)
            };
            // apply G_k to rows k, k+1
            for j in k..=hi {
                let (x, y) = (h[k][j], h[k + 1][j]);
                h[k][j] = c * x + s * y;
                h[k + 1][j] = -s.conj() * x + c.conj() * y;
            }
            rot.push((c, s));
        }
        // multiply by G_k^H on the right (columns k, k+1)
        for (k, (c, s)) in (lo..hi).zip(rot.iter()) {
            let top = if k + 2 <= hi { k + 2 } else { hi };
            for row in lo..=top {
                let (x, y) = (h[row][k], h[row][k + 1]);
                h[row][k] = x * c.conj() + y * s.conj();
                h[row][k + 1] = -x * *s + y * *c;
            }
        }
        for i in lo..=hi {
            h[i][i] += shift;
        }
    }
}

/// Greedy merge of eigenvalue clusters tighter than `tol` to their mean.
fn collapse_clusters(evs: &mut [Complex64], tol: f64) {
    if tol <= 0.0 {
        return;
    }
    let n = evs.len();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        for j in i + 1..n {
            if !assigned[j] && members.iter().any(|&k| (evs[k] - evs[j]).norm() <= tol) {
                members.push(j);
                assigned[j] = true;
            }
        }
        if members.len() > 1 {
            let mean = members.iter().map(|&k| evs[k]).sum::<Complex64>() / members.len() as f64;
            for &k in &members {
                evs[k] = mean;
            }
        }
    }
}

/// Leading-order resonance predictions near a limiting frequency:
/// `omega_0 +- v sqrt(delta lambda_i)` for each nonzero eigenvalue, plus
/// `omega_0` itself for the remaining `n(omega_0) - 2m` zeros of the
/// `O(delta)` branch.
pub fn predict_resonances(
    omega0: Complex64,
    delta: f64,
    config: &ResonatorArray,
) -> Result<Vec<Complex64>, CapacitanceError> {
    let cm = capacitance_matrix(omega0, config)?;
    let evs = eigenvalues(&cm)?;
    let zero_tol = 1e-10 * cm.frobenius();
    let v = config.speed_background;
    let mut out = Vec::new();
    let mut m = 0usize;
    for &lam in &evs {
        if lam.norm() > zero_tol {
            m += 1;
            let root = (delta * lam).sqrt() * v;
            out.push(omega0 + root);
            out.push(omega0 - root);
        }
    }
    // multiplicity bookkeeping: n(omega_0) contributors in total
    let (frak, _) = t_vectors(config);
    let vbg = config.speed_background;
    let n_of_omega = frak
        .iter()
        .filter(|&&fj| is_pi_multiple(fj * omega0 / vbg))
        .count();
    for _ in 2 * m..n_of_omega {
        out.push(omega0);
    }
    out.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(out)
}

/// Membership helper: true when `omega0` lies in the limiting spectrum
/// (used by callers that want the check without the matrix).
pub fn is_limit_resonance(omega0: Complex64, config: &ResonatorArray) -> bool {
    coefficients(omega0, config).is_ok()
}
