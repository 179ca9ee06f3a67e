//! Shared helpers for the integration suites: the paper systems, an
//! eigensolver-independent characteristic-polynomial oracle, and a small
//! log-log fitter.

use fabryperot::capacitance::CapacitanceMatrix;
use fabryperot::model::ResonatorArray;
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The symmetric dimer `l_i = 1, v = v_i = 1` at spacing `s`.
pub fn dimer(s: f64, delta: f64) -> ResonatorArray {
    ResonatorArray::new(vec![1.0, 1.0], vec![s], vec![c(1.0, 0.0); 2], 1.0, delta)
}

/// The complex-speed trimer `(v_1, v_2, v_3) = (e^{i t}, 1, e^{-i t})`,
/// `s_i = l_i = 1`.
pub fn trimer(theta: f64, delta: f64) -> ResonatorArray {
    ResonatorArray::new(
        vec![1.0, 1.0, 1.0],
        vec![1.0, 1.0],
        vec![
            Complex64::from_polar(1.0, theta),
            c(1.0, 0.0),
            Complex64::from_polar(1.0, -theta),
        ],
        1.0,
        delta,
    )
}

/// The matched dimer `l_1 = v_1 = theta, l_2 = v_2 = 1, s = 1/2`.
pub fn radiation_dimer(theta: f64, delta: f64) -> ResonatorArray {
    ResonatorArray::new(
        vec![theta, 1.0],
        vec![0.5],
        vec![c(theta, 0.0), c(1.0, 0.0)],
        1.0,
        delta,
    )
}

/// Least-squares slope of `ln y` against `ln x` over all positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Characteristic polynomial of a tridiagonal matrix via the three-term
/// recurrence, roots by Durand-Kerner: the eigensolver-independent oracle.
pub fn charpoly_roots(cm: &CapacitanceMatrix) -> Vec<Complex64> {
    let n = cm.n;
    if n == 0 {
        return Vec::new();
    }
    let mut p_prev: Vec<Complex64> = vec![c(1.0, 0.0)];
    let mut p: Vec<Complex64> = vec![cm.diag[0], c(-1.0, 0.0)];
    for k in 1..n {
        let mut q = vec![c(0.0, 0.0); p.len() + 1];
        for (i, &pc) in p.iter().enumerate() {
            q[i] += cm.diag[k] * pc;
            q[i + 1] -= pc;
        }
        let w = cm.sub[k - 1] * cm.sup[k - 1];
        for (i, &pc) in p_prev.iter().enumerate() {
            q[i] -= w * pc;
        }
        p_prev = std::mem::replace(&mut p, q);
    }
    durand_kerner(&p)
}

fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|&x| x / lead).collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = c(0.0, 0.0);
        for &cf in monic.iter().rev() {
            acc = acc * z + cf;
        }
        acc
    };
    let seed = c(0.4, 0.9);
    let mut zs: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..600 {
        let mut maxstep = 0.0f64;
        for i in 0..n {
            let mut den = c(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    den *= zs[i] - zs[j];
                }
            }
            if den.norm() == 0.0 {
                continue;
            }
            let step = eval(zs[i]) / den;
            zs[i] -= step;
            maxstep = maxstep.max(step.norm());
        }
        if maxstep < 1e-15 {
            break;
        }
    }
    zs
}
