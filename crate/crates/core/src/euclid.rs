//! Euclidean geometry kernel for a single face.
//!
//! All per-face arrays use the opposite-side convention: index `q` refers to
//! corner `q`, `lengths[q]` is the side opposite corner `q`, and `angles[q]`
//! is the inner angle at corner `q`. The radii `r = exp(f)` are the natural
//! inputs here; the flow coordinate `u` coincides with `f` in this background.

use thiserror::Error;

use crate::weights::{other_corners, FaceWeights, WeightScheme, WeightsError};

#[derive(Debug, Error, PartialEq)]
pub enum EuclidError {
    #[error("squared length {0} is not positive; the edge condition fails on this edge")]
    NonpositiveRadicand(f64),
    #[error("lengths {lengths:?} do not satisfy the triangle inequalities")]
    DegenerateTriangle { lengths: [f64; 3] },
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Length induced on one edge by factors at its endpoints:
/// `l = sqrt(eps_i r_i^2 + eps_j r_j^2 + 2 eta r_i r_j)` with `r = exp(f)`.
///
/// Under the edge condition the radicand is at least
/// `2 (eps_i eps_j + eta) r_i r_j > 0`, so the result is a positive length.
pub fn edge_length_e(f_i: f64, f_j: f64, eps_i: u8, eps_j: u8, eta: f64) -> Result<f64, EuclidError> {
    let (r_i, r_j) = (f_i.exp(), f_j.exp());
    let radicand =
        f64::from(eps_i) * r_i * r_i + f64::from(eps_j) * r_j * r_j + 2.0 * eta * r_i * r_j;
    if !(radicand > 0.0) {
        return Err(EuclidError::NonpositiveRadicand(radicand));
    }
    Ok(radicand.sqrt())
}

/// The three side lengths of a face from its corner radii.
pub fn face_lengths(fw: &FaceWeights, r: [f64; 3]) -> Result<[f64; 3], EuclidError> {
    let mut l = [0.0; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        let radicand = fw.epsf(s) * r[s] * r[s] + fw.epsf(t) * r[t] * r[t]
            + 2.0 * fw.eta[q] * r[s] * r[t];
        if !(radicand > 0.0) {
            return Err(EuclidError::NonpositiveRadicand(radicand));
        }
        l[q] = radicand.sqrt();
    }
    Ok(l)
}

/// Twice the triangle area from side lengths, by the stable sorted form of
/// Heron's formula. Returns 0 for flat or impossible length triples.
pub(crate) fn area2_from_lengths(l: [f64; 3]) -> f64 {
    let mut s = l;
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let (a, b, c) = (s[0], s[1], s[2]);
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.5 * p.max(0.0).sqrt()
}

/// Inner angles from side lengths by the law of cosines, `angles[q]` opposite
/// `l[q]`. Cosines are clamped to `[-1, 1]` before `acos`.
pub fn angles_e(l: [f64; 3]) -> Result<[f64; 3], EuclidError> {
    for q in 0..3 {
        let (s, t) = other_corners(q);
        if !(l[q] > 0.0) || l[q] >= l[s] + l[t] {
            return Err(EuclidError::DegenerateTriangle { lengths: l });
        }
    }
    let mut theta = [0.0; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        let cos = (l[s] * l[s] + l[t] * l[t] - l[q] * l[q]) / (2.0 * l[s] * l[t]);
        theta[q] = cos.clamp(-1.0, 1.0).acos();
    }
    Ok(theta)
}

/// The nondegeneracy form `Q` of a face at radii `r`, positive exactly when
/// the induced lengths make a real triangle.
pub fn q_value_e(scheme: &WeightScheme, face: [usize; 3], r: [f64; 3]) -> Result<f64, WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    Ok(fw.quad_form(kappa_of_r(r)))
}

pub(crate) fn kappa_of_r(r: [f64; 3]) -> [f64; 3] {
    [1.0 / r[0], 1.0 / r[1], 1.0 / r[2]]
}

/// Closed-form radius threshold of the degenerate region at one corner.
///
/// With the other two radii held fixed, the face degenerates exactly when the
/// corner radius drops to or below the returned threshold. `None` means this
/// corner has no degenerate region (its quadratic coefficient `A` is not
/// positive, so the face stays nondegenerate for every value of the corner
/// radius). If the degeneracy quadratic has no real root the face is
/// degenerate for every corner radius; the returned value then marks the
/// least-degenerate point of the axis rather than a boundary. The `corner`
/// argument is a vertex id of `face`; `r` is aligned with `face` and the
/// entry at the corner itself is ignored.
pub fn degenerate_interval_e(
    scheme: &WeightScheme,
    face: [usize; 3],
    corner: usize,
    r: [f64; 3],
) -> Result<Option<f64>, WeightsError> {
    let q = face
        .iter()
        .position(|&v| v == corner)
        .ok_or(WeightsError::CornerNotInFace { corner, face })?;
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let kappa = kappa_of_r(r);
    Ok(corner_threshold(&fw, q, kappa).map(|k_root| 1.0 / k_root))
}

/// Root `kappa_q = (-B + sqrt(D)) / (2A)` of the degeneracy quadratic at a
/// face corner, shared by both backgrounds (the hyperbolic caller subtracts
/// `G` from the constant term). Returns `None` when `A <= 0`.
pub(crate) fn quad_root(a: f64, b: f64, delta: f64) -> f64 {
    (-b + delta.max(0.0).sqrt()) / (2.0 * a)
}

fn corner_threshold(fw: &FaceWeights, q: usize, kappa: [f64; 3]) -> Option<f64> {
    let a = fw.a_coeff(q);
    if a <= 0.0 {
        return None;
    }
    let (s, t) = other_corners(q);
    let g = fw.gammas();
    let b = -2.0 * (g[s] * kappa[t] + g[t] * kappa[s]);
    let c = fw.a_coeff(s) * kappa[s] * kappa[s] + fw.a_coeff(t) * kappa[t] * kappa[t]
        - 2.0 * g[q] * kappa[s] * kappa[t];
    Some(quad_root(a, b, b * b - 4.0 * a * c))
}

/// Angles extended by constants through the degenerate regions: ordinary
/// angles on nondegenerate input, otherwise `pi` at the collapsing corner
/// (the unique corner with negative `h`) and `0` at the other two. The
/// extension keeps the angle sum at `pi` everywhere.
pub fn extended_angles_e(
    scheme: &WeightScheme,
    face: [usize; 3],
    r: [f64; 3],
) -> Result<[f64; 3], WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    Ok(extended_angles_fw(&fw, r))
}

pub(crate) fn extended_angles_fw(fw: &FaceWeights, r: [f64; 3]) -> [f64; 3] {
    let kappa = kappa_of_r(r);
    if fw.quad_form(kappa) > 0.0 {
        if let Ok(l) = face_lengths(fw, r) {
            if let Ok(theta) = angles_e(l) {
                return theta;
            }
        }
    }
    constant_extension(fw.h(kappa))
}

/// Degenerate-side constants: `pi` at the corner whose `h` is smallest (the
/// unique negative one away from region boundaries), `0` at the others.
pub(crate) fn constant_extension(h: [f64; 3]) -> [f64; 3] {
    let mut q_min = 0;
    for q in 1..3 {
        if h[q] < h[q_min] {
            q_min = q;
        }
    }
    let mut theta = [0.0; 3];
    theta[q_min] = std::f64::consts::PI;
    theta
}

/// Angle derivatives with respect to the flow coordinates,
/// `jac[q][p] = d theta_q / d u_p`. Symmetric with zero row sums.
pub fn jacobian_e(
    scheme: &WeightScheme,
    face: [usize; 3],
    r: [f64; 3],
) -> Result<[[f64; 3]; 3], EuclidError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    jacobian_fw(&fw, r)
}

pub(crate) fn jacobian_fw(fw: &FaceWeights, r: [f64; 3]) -> Result<[[f64; 3]; 3], EuclidError> {
    let kappa = kappa_of_r(r);
    let l = face_lengths(fw, r)?;
    if fw.quad_form(kappa) <= 0.0 {
        return Err(EuclidError::DegenerateTriangle { lengths: l });
    }
    let h = fw.h(kappa);
    let area2 = area2_from_lengths(l);
    let mut jac = [[0.0; 3]; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        // d theta_q / d u_s goes through the third corner's h value, scaled
        // by the edge between q and s (the side opposite t).
        jac[q][s] = r[q] * r[q] * r[s] * r[s] * r[t] * h[t] / (area2 * l[t] * l[t]);
        jac[q][t] = r[q] * r[q] * r[t] * r[t] * r[s] * h[s] / (area2 * l[s] * l[s]);
        jac[q][q] = -jac[q][s] - jac[q][t];
    }
    Ok(jac)
}

/// Power-center data of a nondegenerate face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterData {
    /// `d[q][p]`: signed distance from corner `q` to the foot of the center
    /// perpendicular on edge `{q, p}`; diagonal entries are unused zeros.
    pub d: [[f64; 3]; 3],
    /// `h_perp[q]`: signed distance from the center to the side opposite `q`,
    /// negative when the center lies beyond that side.
    pub h_perp: [f64; 3],
}

/// Distances tied to the geometric (equal-power) center: the two sub-segments
/// each edge is split into, and the center's signed distance to each side.
/// Satisfies `d[q][p] + d[p][q] = length of edge {q, p}`.
pub fn center_data_e(
    scheme: &WeightScheme,
    face: [usize; 3],
    r: [f64; 3],
) -> Result<CenterData, EuclidError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let kappa = kappa_of_r(r);
    let l = face_lengths(&fw, r)?;
    if fw.quad_form(kappa) <= 0.0 {
        return Err(EuclidError::DegenerateTriangle { lengths: l });
    }
    let h = fw.h(kappa);
    let area2 = area2_from_lengths(l);
    let mut d = [[0.0; 3]; 3];
    let mut h_perp = [0.0; 3];
    for q in 0..3 {
        let (s, t) = other_corners(q);
        d[q][s] = (fw.epsf(q) * r[q] * r[q] + fw.eta[t] * r[q] * r[s]) / l[t];
        d[q][t] = (fw.epsf(q) * r[q] * r[q] + fw.eta[s] * r[q] * r[t]) / l[s];
        h_perp[q] = r[q] * r[s] * r[s] * r[t] * r[t] * h[q] / (area2 * l[q]);
    }
    Ok(CenterData { d, h_perp })
}

/// Everything the reporting layer wants to know about one Euclidean face.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanFaceGeom {
    pub lengths: [f64; 3],
    pub q_value: f64,
    pub h: [f64; 3],
    pub degenerate: bool,
    /// Ordinary angles when nondegenerate, the constant extension otherwise.
    pub angles: [f64; 3],
    pub jacobian: Option<[[f64; 3]; 3]>,
    /// Twice the face area; absent on degenerate input.
    pub area_term: Option<f64>,
}

pub fn face_geom_e(
    scheme: &WeightScheme,
    face: [usize; 3],
    r: [f64; 3],
) -> Result<EuclideanFaceGeom, WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let kappa = kappa_of_r(r);
    let q_value = fw.quad_form(kappa);
    let h = fw.h(kappa);
    let degenerate = !(q_value > 0.0);
    let lengths = face_lengths(&fw, r).unwrap_or([f64::NAN; 3]);
    let angles = extended_angles_fw(&fw, r);
    let (jacobian, area_term) = if degenerate {
        (None, None)
    } else {
        (
            jacobian_fw(&fw, r).ok(),
            Some(area2_from_lengths(lengths) * 0.5),
        )
    };
    Ok(EuclideanFaceGeom {
        lengths,
        q_value,
        h,
        degenerate,
        angles,
        jacobian,
        area_term,
    })
}
