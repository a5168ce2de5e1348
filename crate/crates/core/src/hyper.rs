//! Hyperbolic geometry kernel for a single face.
//!
//! Arrays follow the same opposite-side convention as the Euclidean kernel.
//! Each vertex carries `S = exp(f)`, `C = sqrt(1 + eps exp(2f))` and
//! `kappa = C / S`; a side satisfies `cosh l = C_s C_t + eta S_s S_t`. The
//! flow coordinate is `u = f` at `eps = 0` vertices and a monotone
//! reparametrization onto `(-inf, 0)` at `eps = 1` vertices.

use thiserror::Error;

use crate::euclid::{constant_extension, quad_root};
use crate::weights::{other_corners, FaceWeights, WeightScheme, WeightsError};

#[derive(Debug, Error, PartialEq)]
pub enum HyperError {
    #[error("u = {u} is outside the domain u < 0 required at eps = 1 vertices")]
    Domain { u: f64 },
    #[error("cosh length {0} is not above 1; the edge condition fails on this edge")]
    ArgumentNotAboveOne(f64),
    #[error("cosh lengths {cosh_lengths:?} do not satisfy the triangle inequalities")]
    DegenerateTriangle { cosh_lengths: [f64; 3] },
    #[error("degeneracy root kappa = {kappa_root} admits no real factor threshold at this corner")]
    NoRealThreshold { kappa_root: f64 },
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Flow coordinate of a factor. Identity at `eps = 0`; at `eps = 1` the
/// strictly increasing bijection from the reals onto `(-inf, 0)`.
pub fn u_of_f(f: f64, eps: u8) -> f64 {
    if eps == 0 {
        f
    } else {
        // Equal to 0.5 ln((C - 1)/(C + 1)), written to avoid cancellation
        // for very negative f and overflow for large f.
        -(-f).exp().asinh()
    }
}

/// Inverse of [`u_of_f`]; requires `u < 0` where `eps = 1`.
pub fn f_of_u(u: f64, eps: u8) -> Result<f64, HyperError> {
    if eps == 0 {
        return Ok(u);
    }
    if !(u < 0.0) {
        return Err(HyperError::Domain { u });
    }
    Ok(-(-u).sinh().ln())
}

/// Derivative `df/du = C`, used to convert between parameterizations.
pub fn dfdu(f: f64, eps: u8) -> f64 {
    vertex_data(f, eps).c
}

/// Per-vertex hyperbolic quantities derived from one factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexData {
    pub s: f64,
    pub c: f64,
    pub kappa: f64,
}

pub fn vertex_data(f: f64, eps: u8) -> VertexData {
    let s = f.exp();
    if eps == 0 {
        VertexData {
            s,
            c: 1.0,
            kappa: (-f).exp(),
        }
    } else {
        // kappa = sqrt(1 + exp(-2f)) stays finite for large f where
        // C and S individually overflow much earlier.
        let kappa = (1.0 + (-2.0 * f).exp()).sqrt();
        VertexData { s, c: kappa * s, kappa }
    }
}

/// `cosh` of the induced length on one edge.
pub fn cosh_edge_length_h(
    f_i: f64,
    f_j: f64,
    eps_i: u8,
    eps_j: u8,
    eta: f64,
) -> Result<f64, HyperError> {
    let (a, b) = (vertex_data(f_i, eps_i), vertex_data(f_j, eps_j));
    let x = a.c * b.c + eta * a.s * b.s;
    if !(x > 1.0) {
        return Err(HyperError::ArgumentNotAboveOne(x));
    }
    Ok(x)
}

/// Induced hyperbolic length on one edge.
pub fn edge_length_h(f_i: f64, f_j: f64, eps_i: u8, eps_j: u8, eta: f64) -> Result<f64, HyperError> {
    Ok(cosh_edge_length_h(f_i, f_j, eps_i, eps_j, eta)?.acosh())
}

/// `cosh` side lengths of a face, `cosh_l[q]` opposite corner `q`.
pub fn face_cosh_lengths(fw: &FaceWeights, f: [f64; 3]) -> Result<[f64; 3], HyperError> {
    let vd = face_vertex_data(fw, f);
    let mut ch = [0.0; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        let x = vd[s].c * vd[t].c + fw.eta[q] * vd[s].s * vd[t].s;
        if !(x > 1.0) {
            return Err(HyperError::ArgumentNotAboveOne(x));
        }
        ch[q] = x;
    }
    Ok(ch)
}

pub(crate) fn face_vertex_data(fw: &FaceWeights, f: [f64; 3]) -> [VertexData; 3] {
    [
        vertex_data(f[0], fw.eps[0]),
        vertex_data(f[1], fw.eps[1]),
        vertex_data(f[2], fw.eps[2]),
    ]
}

/// Inner angles of a hyperbolic triangle from its `cosh` side lengths,
/// `angles[q]` opposite `cosh_l[q]`. The cosine of each angle is clamped to
/// `[-1, 1]`; values beyond the clamp margin mean the lengths do not bound a
/// triangle.
pub fn angles_h(cosh_l: [f64; 3]) -> Result<[f64; 3], HyperError> {
    const CLAMP_MARGIN: f64 = 1e-14;
    let mut sh = [0.0; 3];
    for q in 0..3 {
        if !(cosh_l[q] > 1.0) {
            return Err(HyperError::DegenerateTriangle { cosh_lengths: cosh_l });
        }
        sh[q] = (cosh_l[q] * cosh_l[q] - 1.0).sqrt();
    }
    let mut theta = [0.0; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        let cos = (cosh_l[s] * cosh_l[t] - cosh_l[q]) / (sh[s] * sh[t]);
        if cos.abs() > 1.0 + CLAMP_MARGIN {
            return Err(HyperError::DegenerateTriangle { cosh_lengths: cosh_l });
        }
        theta[q] = cos.clamp(-1.0, 1.0).acos();
    }
    Ok(theta)
}

/// Hyperbolic area of a triangle with the given angles (angle deficit).
pub fn triangle_area_h(angles: [f64; 3]) -> f64 {
    std::f64::consts::PI - angles[0] - angles[1] - angles[2]
}

/// The nondegeneracy form `Q` of a hyperbolic face, positive exactly when the
/// induced cosh lengths bound a real triangle.
pub fn q_value_h(scheme: &WeightScheme, face: [usize; 3], f: [f64; 3]) -> Result<f64, WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    Ok(q_value_fw(&fw, f))
}

pub(crate) fn face_kappa(fw: &FaceWeights, f: [f64; 3]) -> [f64; 3] {
    let vd = face_vertex_data(fw, f);
    [vd[0].kappa, vd[1].kappa, vd[2].kappa]
}

pub(crate) fn q_value_fw(fw: &FaceWeights, f: [f64; 3]) -> f64 {
    fw.quad_form(face_kappa(fw, f)) + fw.g_value()
}

/// Closed-form factor threshold of the degenerate region at one corner.
///
/// `Some(T)`: with the other two factors fixed, the face degenerates exactly
/// for `f_corner <= T`. `None`: no degenerate region at this corner. If the
/// degeneracy quadratic has no real root the face is degenerate for every
/// corner factor; the returned value then marks the least-degenerate point of
/// the axis rather than a boundary. The `corner` argument is a vertex id of
/// `face`; `f` is aligned with `face` and the corner's own entry is ignored.
pub fn degenerate_interval_h(
    scheme: &WeightScheme,
    face: [usize; 3],
    corner: usize,
    f: [f64; 3],
) -> Result<Option<f64>, HyperError> {
    let q = face
        .iter()
        .position(|&v| v == corner)
        .ok_or(WeightsError::CornerNotInFace { corner, face })?;
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let a = fw.a_coeff(q);
    if a <= 0.0 {
        return Ok(None);
    }
    let kappa = face_kappa(&fw, f);
    let (s, t) = other_corners(q);
    let g = fw.gammas();
    let b = -2.0 * (g[s] * kappa[t] + g[t] * kappa[s]);
    let c = fw.a_coeff(s) * kappa[s] * kappa[s] + fw.a_coeff(t) * kappa[t] * kappa[t]
        - 2.0 * g[q] * kappa[s] * kappa[t]
        - fw.g_value();
    let kappa_root = quad_root(a, b, b * b - 4.0 * a * c);
    Ok(Some(factor_threshold(kappa_root, fw.eps[q])?))
}

/// Converts a kappa-space degeneracy root into a factor threshold:
/// `f <= -0.5 ln(kappa_root^2 - eps)`. The log argument can only fail to be
/// positive for roots that admissible schemes do not produce; that case is
/// reported rather than silently classified.
pub(crate) fn factor_threshold(kappa_root: f64, eps: u8) -> Result<f64, HyperError> {
    let arg = kappa_root * kappa_root - f64::from(eps);
    if !(arg > 0.0) || kappa_root <= 0.0 {
        return Err(HyperError::NoRealThreshold { kappa_root });
    }
    Ok(-0.5 * arg.ln())
}

/// Angles extended by constants through the degenerate regions; the extended
/// angle sum is at most `pi` (equality only in the degenerate constants).
pub fn extended_angles_h(
    scheme: &WeightScheme,
    face: [usize; 3],
    f: [f64; 3],
) -> Result<[f64; 3], WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    Ok(extended_angles_fw(&fw, f))
}

pub(crate) fn extended_angles_fw(fw: &FaceWeights, f: [f64; 3]) -> [f64; 3] {
    if q_value_fw(fw, f) > 0.0 {
        if let Ok(ch) = face_cosh_lengths(fw, f) {
            if let Ok(theta) = angles_h(ch) {
                return theta;
            }
        }
    }
    constant_extension(fw.h(face_kappa(fw, f)))
}

/// Angle derivatives with respect to the flow coordinates,
/// `jac[q][p] = d theta_q / d u_p`. Symmetric and negative definite.
pub fn jacobian_h(
    scheme: &WeightScheme,
    face: [usize; 3],
    f: [f64; 3],
) -> Result<[[f64; 3]; 3], HyperError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    jacobian_fw(&fw, f)
}

pub(crate) fn jacobian_fw(fw: &FaceWeights, f: [f64; 3]) -> Result<[[f64; 3]; 3], HyperError> {
    let ch = face_cosh_lengths(fw, f)?;
    if q_value_fw(fw, f) <= 0.0 {
        return Err(HyperError::DegenerateTriangle { cosh_lengths: ch });
    }
    let theta = angles_h(ch)?;
    let vd = face_vertex_data(fw, f);
    let h = fw.h(face_kappa(fw, f));
    let sh = ch.map(|x| (x * x - 1.0).sqrt());
    // sinh l_qs sinh l_qt sin theta_q is the same for every corner q.
    let area_term = sh[1] * sh[2] * theta[0].sin();
    let mut jac = [[0.0; 3]; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        jac[q][s] = vd[q].s * vd[q].s * vd[s].s * vd[s].s * vd[t].s * h[t]
            / (area_term * sh[t] * sh[t]);
        jac[q][t] = vd[q].s * vd[q].s * vd[t].s * vd[t].s * vd[s].s * h[s]
            / (area_term * sh[s] * sh[s]);
    }
    // The diagonal follows from the exact length-weighted row identity
    // rather than a direct derivative of theta_q.
    for q in 0..3 {
        let (s, t) = other_corners(q);
        jac[q][q] = -(jac[s][q] * ch[t] + jac[t][q] * ch[s]);
    }
    Ok(jac)
}

/// Coefficients `(lambda, mu)` bounding an edge with `eps_i = 1`:
/// `lambda (C_i C_j + S_i S_j) <= cosh l <= mu (C_i C_j + S_i S_j)`.
pub fn length_bound_coefficients(eps_j: u8, eta: f64) -> (f64, f64) {
    let mu = 1.0 + eta.abs();
    let lambda = if eps_j == 1 {
        if eta > 0.0 {
            eta.min(1.0)
        } else {
            0.5 * (1.0 + eta)
        }
    } else {
        eta.min(1.0)
    };
    (lambda, mu)
}

/// Everything the reporting layer wants to know about one hyperbolic face.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicFaceGeom {
    pub cosh_lengths: [f64; 3],
    pub lengths: [f64; 3],
    pub q_value: f64,
    pub h: [f64; 3],
    pub g_value: f64,
    pub degenerate: bool,
    /// Ordinary angles when nondegenerate, the constant extension otherwise.
    pub angles: [f64; 3],
    pub jacobian: Option<[[f64; 3]; 3]>,
    /// Angle deficit area; absent on degenerate input.
    pub area: Option<f64>,
    pub vertex_data: [VertexData; 3],
}

pub fn face_geom_h(
    scheme: &WeightScheme,
    face: [usize; 3],
    f: [f64; 3],
) -> Result<HyperbolicFaceGeom, WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let vd = face_vertex_data(&fw, f);
    let q_value = q_value_fw(&fw, f);
    let h = fw.h(face_kappa(&fw, f));
    let degenerate = !(q_value > 0.0);
    let cosh_lengths = face_cosh_lengths(&fw, f).unwrap_or([f64::NAN; 3]);
    let lengths = cosh_lengths.map(f64::acosh);
    let angles = extended_angles_fw(&fw, f);
    let (jacobian, area) = if degenerate {
        (None, None)
    } else {
        (jacobian_fw(&fw, f).ok(), Some(triangle_area_h(angles)))
    };
    Ok(HyperbolicFaceGeom {
        cosh_lengths,
        lengths,
        q_value,
        h,
        g_value: fw.g_value(),
        degenerate,
        angles,
        jacobian,
        area,
        vertex_data: vd,
    })
}
