//! Capacity and rate bounds, all in bits.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::systems::{NoiseKind, SystemModel};

/// Scalar high-rate quantization constant.
pub const K2_SCALAR: f64 = 1.0 / 12.0;

/// Default trapezoid node count on `[-pi, pi]`.
pub const DEFAULT_QUADRATURE_POINTS: usize = 8192;

/// Roots closer than this to the unit circle are flagged.
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("eigenvalue and multiplicity lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("root computation for the AR polynomial did not converge")]
    RootsNotConverged,
    #[error("density integrates to {0} over the box, expected 1 within 1e-3")]
    NotNormalized(f64),
    #[error("logarithm argument must be positive, got {0}")]
    NonPositiveLogArgument(f64),
    #[error("system is not additive with gaussian or uniform noise; supply the entropy rate directly")]
    UnsupportedSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Ha,
    ArRd,
    ShannonLb,
    GlUpper,
    GlLower,
    ZoomUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value_bits: f64,
    pub params: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl BoundReport {
    fn new(kind: BoundKind, value_bits: f64, params: Value) -> Self {
        let params = params
            .as_object()
            .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default();
        Self {
            kind,
            value_bits,
            params,
            details: None,
        }
    }
}

/// `sum max(0, n_lambda log2 |lambda|)`.
pub fn linear_entropy(eigenvalues: &[Complex64], multiplicities: &[u32]) -> Result<f64, BoundsError> {
    if eigenvalues.len() != multiplicities.len() {
        return Err(BoundsError::LengthMismatch(eigenvalues.len(), multiplicities.len()));
    }
    Ok(eigenvalues
        .iter()
        .zip(multiplicities)
        .map(|(l, n)| (f64::from(*n) * l.norm().log2()).max(0.0))
        .sum())
}

pub fn linear_entropy_report(eigenvalues: &[Complex64], multiplicities: &[u32]) -> Result<BoundReport, BoundsError> {
    let value = linear_entropy(eigenvalues, multiplicities)?;
    Ok(BoundReport::new(
        BoundKind::Ha,
        value,
        json!({ "eigenvalues": complex_json(eigenvalues), "multiplicities": multiplicities }),
    ))
}

/// `sum_{|lambda| > 1} log2 ceil(|lambda|)`.
pub fn zoom_capacity_upper(eigenvalues: &[Complex64]) -> f64 {
    eigenvalues
        .iter()
        .map(|l| l.norm())
        .filter(|m| *m > 1.0)
        .map(|m| m.ceil().log2())
        .sum()
}

pub fn zoom_capacity_upper_report(eigenvalues: &[Complex64]) -> BoundReport {
    BoundReport::new(
        BoundKind::ZoomUpper,
        zoom_capacity_upper(eigenvalues),
        json!({ "eigenvalues": complex_json(eigenvalues) }),
    )
}

fn complex_json(values: &[Complex64]) -> Value {
    Value::Array(values.iter().map(|z| json!([z.re, z.im])).collect())
}

/// Roots of `z^m + a_1 z^{m-1} + ... + a_m` as companion-matrix eigenvalues.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, BoundsError> {
    let m = coeffs.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let companion = DMatrix::from_row_slice(m, m, &crate::systems::companion_matrix(coeffs));
    let schur = nalgebra::linalg::Schur::try_new(companion, 1e-14, 10_000).ok_or(BoundsError::RootsNotConverged)?;
    let roots: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(BoundsError::RootsNotConverged);
    }
    Ok(roots)
}

/// One point `(D_theta, R(D_theta))` of the AR rate-distortion curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArRateDistortion {
    pub theta: f64,
    pub distortion: f64,
    /// Integral term plus the unstable-root correction.
    pub rate_bits: f64,
    pub correction_bits: f64,
    pub roots: Vec<Complex64>,
    /// Some root lies within [`UNIT_CIRCLE_TOLERANCE`] of the unit circle.
    pub near_unit_circle: bool,
}

/// Parametric rate-distortion pair of the Gaussian AR source
/// `x_t = -sum a_k x_{t-k} + w_t`, `w ~ N(0, sigma2)`.
///
/// With `g(w) = |1 + sum a_k e^{-ikw}|^2 / sigma2`:
/// `D = (1/2pi) int min(theta, 1/g)`,
/// `R = (1/2pi) int max(0, (1/2) log2(1/(theta g))) + sum (1/2) max(0, log2 |rho_k|^2)`.
/// Both integrals use the composite trapezoid rule on `quadrature_points`
/// nodes over `[-pi, pi]`.
pub fn ar_rate_distortion(
    a_coeffs: &[f64],
    sigma2: f64,
    theta: f64,
    quadrature_points: usize,
) -> Result<ArRateDistortion, BoundsError> {
    if !(theta > 0.0) || !(sigma2 > 0.0) {
        return Err(BoundsError::InvalidArgument("theta and sigma2 must be positive".into()));
    }
    if quadrature_points < 512 {
        return Err(BoundsError::InvalidArgument("quadrature_points must be at least 512".into()));
    }
    let g = |w: f64| -> f64 {
        let mut s = Complex64::new(1.0, 0.0);
        for (k, a) in a_coeffs.iter().enumerate() {
            s += Complex64::from_polar(*a, -((k + 1) as f64) * w);
        }
        s.norm_sqr() / sigma2
    };
    let d_integrand = |w: f64| -> f64 {
        let gw = g(w);
        if gw <= 0.0 {
            theta
        } else {
            theta.min(1.0 / gw)
        }
    };
    let r_integrand = |w: f64| -> f64 {
        let gw = g(w);
        if gw <= 0.0 {
            // log diverges to +inf only on a null set; clamp at the node
            f64::MAX.log2()
        } else {
            (0.5 * (1.0 / (theta * gw)).log2()).max(0.0)
        }
    };
    let distortion = trapezoid(d_integrand, -PI, PI, quadrature_points) / (2.0 * PI);
    let integral_rate = trapezoid(r_integrand, -PI, PI, quadrature_points) / (2.0 * PI);
    let roots = polynomial_roots(a_coeffs)?;
    let correction_bits: f64 = roots.iter().map(|r| 0.5 * r.norm_sqr().log2().max(0.0)).sum();
    let near_unit_circle = roots.iter().any(|r| (r.norm() - 1.0).abs() < UNIT_CIRCLE_TOLERANCE);
    Ok(ArRateDistortion {
        theta,
        distortion,
        rate_bits: integral_rate + correction_bits,
        correction_bits,
        roots,
        near_unit_circle,
    })
}

/// `theta` values on a logarithmic grid.
pub fn log_grid(low: f64, high: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![low];
    }
    let (a, b) = (low.ln(), high.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Sweeps `theta` and writes CSV `theta,D,R_bits,correction_bits`.
pub fn ar_rate_distortion_curve<W: Write>(
    a_coeffs: &[f64],
    sigma2: f64,
    thetas: &[f64],
    quadrature_points: usize,
    out: W,
) -> Result<Vec<ArRateDistortion>, BoundsError> {
    #[derive(Serialize)]
    struct Row {
        theta: f64,
        #[serde(rename = "D")]
        d: f64,
        #[serde(rename = "R_bits")]
        r_bits: f64,
        correction_bits: f64,
    }
    let points: Vec<ArRateDistortion> = thetas
        .iter()
        .map(|t| ar_rate_distortion(a_coeffs, sigma2, *t, quadrature_points))
        .collect::<Result<_, _>>()?;
    let mut w = csv::Writer::from_writer(out);
    for p in &points {
        w.serialize(Row {
            theta: p.theta,
            d: p.distortion,
            r_bits: p.rate_bits,
            correction_bits: p.correction_bits,
        })
        .map_err(|e| BoundsError::InvalidArgument(e.to_string()))?;
    }
    w.flush().map_err(|e| BoundsError::InvalidArgument(e.to_string()))?;
    Ok(points)
}

pub fn ar_rate_distortion_report(
    a_coeffs: &[f64],
    sigma2: f64,
    theta: f64,
    quadrature_points: usize,
) -> Result<BoundReport, BoundsError> {
    let rd = ar_rate_distortion(a_coeffs, sigma2, theta, quadrature_points)?;
    let mut report = BoundReport::new(
        BoundKind::ArRd,
        rd.rate_bits,
        json!({ "a": a_coeffs, "sigma2": sigma2, "theta": theta, "quadrature_points": quadrature_points }),
    );
    report.details = Some(json!({
        "distortion": rd.distortion,
        "correction_bits": rd.correction_bits,
        "roots": complex_json(&rd.roots),
        "near_unit_circle": rd.near_unit_circle,
    }));
    Ok(report)
}

/// Composite trapezoid rule with `nodes` equally spaced nodes including
/// both endpoints.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    assert!(nodes >= 2, "trapezoid rule needs two nodes");
    let h = (b - a) / (nodes - 1) as f64;
    let interior: f64 = (1..nodes - 1).map(|i| f(a + h * i as f64)).sum();
    h * (0.5 * (f(a) + f(b)) + interior)
}

/// `h_bar - (N/2) log2(2 pi e epsilon)`; may be negative.
pub fn shannon_lower_bound(entropy_rate_bits: f64, dim: usize, epsilon: f64) -> Result<f64, BoundsError> {
    if !(epsilon > 0.0) {
        return Err(BoundsError::InvalidArgument("epsilon must be positive".into()));
    }
    Ok(entropy_rate_bits - dim as f64 / 2.0 * (2.0 * PI * E * epsilon).log2())
}

pub fn shannon_lower_bound_report(entropy_rate_bits: f64, dim: usize, epsilon: f64) -> Result<BoundReport, BoundsError> {
    let value = shannon_lower_bound(entropy_rate_bits, dim, epsilon)?;
    Ok(BoundReport::new(
        BoundKind::ShannonLb,
        value,
        json!({ "entropy_rate_bits": entropy_rate_bits, "N": dim, "epsilon": epsilon }),
    ))
}

/// Smallest `epsilon` at which the Shannon bound still sits at or below
/// `level` bits; for smaller `epsilon` it exceeds `level`.
pub fn shannon_divergence_threshold(entropy_rate_bits: f64, dim: usize, level: f64) -> f64 {
    ((entropy_rate_bits - level) * 2.0 / dim as f64).exp2() / (2.0 * PI * E)
}

/// `h(x_t | x_{t-1}) = h(w)` for an additive system.
pub fn conditional_entropy_rate(system: &SystemModel) -> Result<f64, BoundsError> {
    if !system.is_additive() {
        return Err(BoundsError::UnsupportedSystem);
    }
    let n = system.noise_dim as f64;
    match system.noise {
        NoiseKind::Gaussian { variance } => Ok(n / 2.0 * (2.0 * PI * E * variance).log2()),
        NoiseKind::Uniform { width } => Ok(n * width.log2()),
        _ => Err(BoundsError::UnsupportedSystem),
    }
}

/// Axis-aligned integration box.
pub type IntegrationBox = [(f64, f64)];

/// Tensor-product trapezoid integral over a box.
pub fn trapezoid_box<F: Fn(&[f64]) -> f64>(f: &F, bounds: &IntegrationBox, nodes: usize) -> f64 {
    fn recurse<F: Fn(&[f64]) -> f64>(f: &F, bounds: &IntegrationBox, nodes: usize, point: &mut Vec<f64>) -> f64 {
        let depth = point.len();
        if depth == bounds.len() {
            return f(point);
        }
        let (a, b) = bounds[depth];
        let h = (b - a) / (nodes - 1) as f64;
        let mut sum = 0.0;
        for i in 0..nodes {
            let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
            point.push(a + h * i as f64);
            sum += w * recurse(f, bounds, nodes, point);
            point.pop();
        }
        sum * h
    }
    recurse(f, bounds, nodes, &mut Vec::with_capacity(bounds.len()))
}

/// `(int p^{k/(k+2)})^{(k+2)/k}` by the trapezoid rule on the box.
pub fn density_norm<F: Fn(&[f64]) -> f64>(
    density: F,
    k: usize,
    bounds: &IntegrationBox,
    quadrature_points: usize,
) -> Result<f64, BoundsError> {
    if k == 0 || bounds.len() != k {
        return Err(BoundsError::InvalidArgument("box dimension must equal k >= 1".into()));
    }
    if quadrature_points < 2 {
        return Err(BoundsError::InvalidArgument("need at least two nodes".into()));
    }
    let mass = trapezoid_box(&density, bounds, quadrature_points);
    if (mass - 1.0).abs() > 1e-3 {
        return Err(BoundsError::NotNormalized(mass));
    }
    let exponent = k as f64 / (k as f64 + 2.0);
    let integral = trapezoid_box(&|x: &[f64]| density(x).max(0.0).powf(exponent), bounds, quadrature_points);
    Ok(integral.powf(1.0 / exponent))
}

/// `(N/2) log2(K2 * norm / epsilon)`.
pub fn gl_capacity_upper(density_norm_value: f64, dim: usize, epsilon: f64, k2: f64) -> Result<f64, BoundsError> {
    let arg = k2 * density_norm_value / epsilon;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(BoundsError::NonPositiveLogArgument(arg));
    }
    Ok(dim as f64 / 2.0 * arg.log2())
}

/// Same arithmetic as [`gl_capacity_upper`] on the noise density norm:
/// capacities below this value cannot reach distortion `epsilon`.
pub fn gl_capacity_lower(noise_density_norm: f64, dim: usize, epsilon: f64, k2: f64) -> Result<f64, BoundsError> {
    gl_capacity_upper(noise_density_norm, dim, epsilon, k2)
}

pub fn gl_report(kind: BoundKind, norm: f64, dim: usize, epsilon: f64, k2: f64) -> Result<BoundReport, BoundsError> {
    let value = gl_capacity_upper(norm, dim, epsilon, k2)?;
    let norm_key = if kind == BoundKind::GlLower { "noise_density_norm" } else { "density_norm" };
    Ok(BoundReport::new(
        kind,
        value,
        json!({ norm_key: norm, "N": dim, "epsilon": epsilon, "K2": k2 }),
    ))
}

/// Standard normal density in one dimension.
pub fn standard_normal_pdf(x: &[f64]) -> f64 {
    (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()
}
