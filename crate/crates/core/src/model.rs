//! Resonator-chain configurations and radiation-condition closures.
//!
//! A [`ResonatorArray`] is the single source of truth for a system: resonator
//! lengths, gap spacings, wave speeds, the density contrast and optional
//! imaginary gauge potentials. A [`RadiationCondition`] selects how the chain
//! is closed at its two ends.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geometry and material data of a finite chain of `N` resonators.
///
/// The `i`-th resonator occupies `(x_i^L, x_i^R)` with `x_i^R - x_i^L =
/// lengths[i]`; `spacings[i]` is the gap between resonators `i` and `i+1`.
/// `spacings` may carry one trailing entry (the spacing after the last
/// resonator): it is zero for finite resonance problems and positive for
/// periodic unit cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorArray {
    pub lengths: Vec<f64>,
    /// Interior gaps, plus an optional trailing gap after the last resonator.
    pub spacings: Vec<f64>,
    pub speeds_inside: Vec<Complex64>,
    pub speed_background: f64,
    pub contrast: f64,
    pub gauges: Vec<f64>,
    pub left_anchor: f64,
}

/// Boundary closure applied at the two ends of the chain.
///
/// The closures fix the admissible Dirichlet-Neumann data `(u, u')` at the
/// outer edges:
/// - `OutgoingBoth`: left vector `(1, -i w/v)`, right vector `(1, i w/v)`;
/// - `PerfectTransmission`: left vector `(1, i w/v)` (incoming radiation
///   only), right vector unchanged;
/// - `LeftAngle(t)`: left vector `cos t * (1, i w) + sin t * (1, -i w)`,
///   right vector unchanged. The angle parametrisation is defined with unit
///   background speed; `LeftAngle(0)` matches `PerfectTransmission` and
///   `LeftAngle(pi/2)` matches `OutgoingBoth` when `v = 1`. Whether the
///   angle form should scale with `1/v` for `v != 1` is left open here; we
///   deliberately use `(1, +-i w)` as is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiationCondition {
    OutgoingBoth,
    PerfectTransmission,
    LeftAngle(f64),
}

impl RadiationCondition {
    /// Left boundary vector at frequency `omega` with background speed `v`.
    pub fn left_vector(&self, omega: Complex64, v: f64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        match *self {
            RadiationCondition::OutgoingBoth => (Complex64::new(1.0, 0.0), -i * omega / v),
            RadiationCondition::PerfectTransmission => (Complex64::new(1.0, 0.0), i * omega / v),
            RadiationCondition::LeftAngle(t) => {
                let (st, ct) = t.sin_cos();
                (
                    Complex64::new(ct + st, 0.0),
                    i * omega * ct - i * omega * st,
                )
            }
        }
    }

    /// Right boundary vector `(1, i w/v)`, common to all closures.
    pub fn right_vector(&self, omega: Complex64, v: f64) -> (Complex64, Complex64) {
        (Complex64::new(1.0, 0.0), Complex64::i() * omega / v)
    }

    /// Derivatives of the boundary vectors with respect to `omega`.
    pub fn left_vector_d(&self, _omega: Complex64, v: f64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        match *self {
            RadiationCondition::OutgoingBoth => (Complex64::new(0.0, 0.0), -i / v),
            RadiationCondition::PerfectTransmission => (Complex64::new(0.0, 0.0), i / v),
            RadiationCondition::LeftAngle(t) => {
                let (st, ct) = t.sin_cos();
                (Complex64::new(0.0, 0.0), i * ct - i * st)
            }
        }
    }

    pub fn right_vector_d(&self, _omega: Complex64, v: f64) -> (Complex64, Complex64) {
        (Complex64::new(0.0, 0.0), Complex64::i() / v)
    }
}

/// Violations of the [`ResonatorArray`] invariants, reported for the first
/// offending entry.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("resonator {index} has non-positive length {value}")]
    NonPositiveLength { index: usize, value: f64 },
    #[error("interior spacing {index} is non-positive ({value})")]
    NonPositiveSpacing { index: usize, value: f64 },
    #[error("trailing spacing is negative ({value})")]
    NegativeTrailingSpacing { value: f64 },
    #[error("speed is zero (resonator {index})")]
    ZeroSpeed { index: usize },
    #[error("background speed must be positive (got {value})")]
    NonPositiveBackgroundSpeed { value: f64 },
    #[error("contrast must be non-negative (got {value})")]
    NegativeContrast { value: f64 },
    #[error("gauge potentials require real positive interior speeds (resonator {index})")]
    MixedGaugeComplexSpeed { index: usize },
    #[error("empty chain")]
    EmptyChain,
    #[error("field `{field}` has length {got}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ResonatorArray {
    /// Chain with unit background speed, no gauge, anchored at the origin.
    pub fn new(
        lengths: Vec<f64>,
        spacings: Vec<f64>,
        speeds_inside: Vec<Complex64>,
        speed_background: f64,
        contrast: f64,
    ) -> Self {
        let n = lengths.len();
        ResonatorArray {
            lengths,
            spacings,
            speeds_inside,
            speed_background,
            contrast,
            gauges: vec![0.0; n],
            left_anchor: 0.0,
        }
    }

    /// Chain of `n` identical unit resonators with unit gaps and real unit
    /// speeds; the standard test bench.
    pub fn unit_chain(n: usize, contrast: f64) -> Self {
        ResonatorArray::new(
            vec![1.0; n],
            vec![1.0; n.saturating_sub(1)],
            vec![Complex64::new(1.0, 0.0); n],
            1.0,
            contrast,
        )
    }

    pub fn with_gauges(mut self, gauges: Vec<f64>) -> Self {
        self.gauges = gauges;
        self
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Gap after resonator `i`; the trailing gap defaults to zero.
    pub fn spacing_after(&self, i: usize) -> f64 {
        self.spacings.get(i).copied().unwrap_or(0.0)
    }

    /// Trailing spacing after the final resonator (zero unless configured).
    pub fn trailing_spacing(&self) -> f64 {
        if self.spacings.len() == self.len() {
            self.spacings[self.len() - 1]
        } else {
            0.0
        }
    }

    /// Whether any gauge potential is switched on.
    pub fn has_gauge(&self) -> bool {
        self.gauges.iter().any(|&g| g != 0.0)
    }

    /// Speed contrast `r_i = v / v_i`.
    pub fn speed_ratio(&self, i: usize) -> Complex64 {
        self.speed_background / self.speeds_inside[i]
    }

    /// Validates every invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.len();
        if n == 0 {
            return Err(ConfigError::EmptyChain);
        }
        if self.speeds_inside.len() != n {
            return Err(ConfigError::LengthMismatch {
                field: "speeds_inside",
                got: self.speeds_inside.len(),
                expected: n,
            });
        }
        if self.spacings.len() + 1 != n && self.spacings.len() != n {
            return Err(ConfigError::LengthMismatch {
                field: "spacings",
                got: self.spacings.len(),
                expected: n - 1,
            });
        }
        if self.gauges.len() != n {
            return Err(ConfigError::LengthMismatch {
                field: "gauges",
                got: self.gauges.len(),
                expected: n,
            });
        }
        for (i, &l) in self.lengths.iter().enumerate() {
            if !(l > 0.0) {
                return Err(ConfigError::NonPositiveLength { index: i, value: l });
            }
        }
        for (i, &s) in self.spacings.iter().enumerate().take(n - 1) {
            if !(s > 0.0) {
                return Err(ConfigError::NonPositiveSpacing { index: i, value: s });
            }
        }
        if self.spacings.len() == n && self.spacings[n - 1] < 0.0 {
            return Err(ConfigError::NegativeTrailingSpacing {
                value: self.spacings[n - 1],
            });
        }
        if !(self.speed_background > 0.0) {
            return Err(ConfigError::NonPositiveBackgroundSpeed {
                value: self.speed_background,
            });
        }
        if self.contrast < 0.0 {
            return Err(ConfigError::NegativeContrast {
                value: self.contrast,
            });
        }
        for (i, v) in self.speeds_inside.iter().enumerate() {
            if v.norm() == 0.0 {
                return Err(ConfigError::ZeroSpeed { index: i });
            }
        }
        if self.has_gauge() {
            // Gauge potentials and complex wave speeds are mutually exclusive.
            for (i, v) in self.speeds_inside.iter().enumerate() {
                if v.im != 0.0 || v.re <= 0.0 {
                    return Err(ConfigError::MixedGaugeComplexSpeed { index: i });
                }
            }
        }
        Ok(())
    }

    /// Extremities `(x_i^L, x_i^R)` of every resonator, strictly increasing.
    pub fn extremities(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        let mut x = self.left_anchor;
        for i in 0..self.len() {
            let xr = x + self.lengths[i];
            out.push((x, xr));
            x = xr + self.spacing_after(i);
        }
        out
    }

    /// Total footprint `x_N^R + s_N - x_1^L` including any trailing gap.
    pub fn total_span(&self) -> f64 {
        self.lengths.iter().sum::<f64>() + self.spacings.iter().sum::<f64>()
    }

    /// Hex digest of the canonical JSON form; stamped into JSON outputs.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(&ConfigFile::from(self)).expect("config serialises");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// On-disk JSON schema for a chain plus its radiation condition.
///
/// `speeds_inside` entries are plain reals or `[re, im]` pairs; `radiation`
/// is `"outgoing"`, `"perfect_transmission"` or `{"left_angle": t}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub lengths: Vec<f64>,
    pub spacings: Vec<f64>,
    pub speeds_inside: Vec<ComplexEntry>,
    pub speed_background: f64,
    pub contrast: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_anchor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radiation: Option<RadiationEntry>,
}

/// A complex number accepted either as a bare real or as an `[re, im]` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexEntry> for Complex64 {
    fn from(e: ComplexEntry) -> Self {
        match e {
            ComplexEntry::Real(x) => Complex64::new(x, 0.0),
            ComplexEntry::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// `"outgoing"`, `"perfect_transmission"`, or `{"left_angle": t}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiationEntry {
    Name(String),
    LeftAngle { left_angle: f64 },
}

impl RadiationEntry {
    fn to_condition(&self) -> Result<RadiationCondition, ConfigError> {
        match self {
            RadiationEntry::Name(s) if s == "outgoing" => Ok(RadiationCondition::OutgoingBoth),
            RadiationEntry::Name(s) if s == "perfect_transmission" => {
                Ok(RadiationCondition::PerfectTransmission)
            }
            RadiationEntry::Name(s) => Err(ConfigError::Parse(format!(
                "unknown radiation condition `{s}`"
            ))),
            RadiationEntry::LeftAngle { left_angle } => {
                Ok(RadiationCondition::LeftAngle(*left_angle))
            }
        }
    }
}

impl From<&ResonatorArray> for ConfigFile {
    fn from(a: &ResonatorArray) -> Self {
        ConfigFile {
            lengths: a.lengths.clone(),
            spacings: a.spacings.clone(),
            speeds_inside: a
                .speeds_inside
                .iter()
                .map(|v| {
                    if v.im == 0.0 {
                        ComplexEntry::Real(v.re)
                    } else {
                        ComplexEntry::Pair([v.re, v.im])
                    }
                })
                .collect(),
            speed_background: a.speed_background,
            contrast: a.contrast,
            gauges: if a.has_gauge() {
                Some(a.gauges.clone())
            } else {
                None
            },
            left_anchor: if a.left_anchor != 0.0 {
                Some(a.left_anchor)
            } else {
                None
            },
            radiation: None,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Builds and validates the array; the radiation condition defaults to
    /// outgoing on both sides.
    pub fn to_array(&self) -> Result<(ResonatorArray, RadiationCondition), ConfigError> {
        let n = self.lengths.len();
        let arr = ResonatorArray {
            lengths: self.lengths.clone(),
            spacings: self.spacings.clone(),
            speeds_inside: self
                .speeds_inside
                .iter()
                .cloned()
                .map(Complex64::from)
                .collect(),
            speed_background: self.speed_background,
            contrast: self.contrast,
            gauges: self.gauges.clone().unwrap_or_else(|| vec![0.0; n]),
            left_anchor: self.left_anchor.unwrap_or(0.0),
        };
        arr.validate()?;
        let rc = match &self.radiation {
            Some(entry) => entry.to_condition()?,
            None => RadiationCondition::OutgoingBoth,
        };
        Ok((arr, rc))
    }
}
