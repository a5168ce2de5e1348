//! Per-vertex curvature and the global curvature Jacobian.
//!
//! Curvature at a vertex is the angle defect `K = 2 pi - (sum of incident
//! inner angles)`. With extended angles the sum runs over the constant-by-
//! region extension instead, which keeps `K` defined (and continuous) across
//! degenerate configurations at the price of differentiability.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::surface::TriangulatedSurface;
use crate::weights::{FaceWeights, WeightScheme, WeightsError};
use crate::{euclid, hyper, Background, ConformalState};

#[derive(Debug, Error, PartialEq)]
pub enum CurvatureError {
    #[error("face {0} is degenerate; ordinary angles are undefined there")]
    DegenerateFace(usize),
    #[error("extended curvature is continuous but not differentiable; no Jacobian exists")]
    ExtendedNotDifferentiable,
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Per-vertex curvature values for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub values: Vec<f64>,
    /// True when at least one face fell back to extended angles.
    pub used_extended: bool,
}

impl CurvatureField {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_deviation(&self, target: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(target)
            .map(|(k, kb)| (k - kb).abs())
            .fold(0.0, f64::max)
    }
}

fn face_factors(state: &ConformalState, face: [usize; 3]) -> [f64; 3] {
    [state.f[face[0]], state.f[face[1]], state.f[face[2]]]
}

/// Angles of one face of a state, with the face's nondegeneracy flag.
/// Extended angles are returned either way; the flag tells which case holds.
pub(crate) fn face_angles(
    scheme: &WeightScheme,
    face: [usize; 3],
    state: &ConformalState,
) -> Result<(bool, [f64; 3]), WeightsError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let f = face_factors(state, face);
    Ok(match state.background {
        Background::Euclidean => {
            let r = f.map(f64::exp);
            let nondegenerate = fw.quad_form(euclid::kappa_of_r(r)) > 0.0;
            (nondegenerate, euclid::extended_angles_fw(&fw, r))
        }
        Background::Hyperbolic => {
            let nondegenerate = hyper::q_value_fw(&fw, f) > 0.0;
            (nondegenerate, hyper::extended_angles_fw(&fw, f))
        }
    })
}

/// True when every face of the state is nondegenerate.
pub(crate) fn state_nondegenerate(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state: &ConformalState,
) -> Result<bool, WeightsError> {
    for &face in surface.faces() {
        if !face_angles(scheme, face, state)?.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Curvature of every vertex. With `extended = false` the state must be
/// nondegenerate on every face; with `extended = true` degenerate faces
/// contribute their constant extension instead.
pub fn vertex_curvature(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state: &ConformalState,
    extended: bool,
) -> Result<CurvatureField, CurvatureError> {
    let mut angle_sums = vec![0.0f64; surface.vertex_count()];
    let mut used_extended = false;
    for (fi, &face) in surface.faces().iter().enumerate() {
        let (nondegenerate, theta) = face_angles(scheme, face, state)?;
        if !nondegenerate {
            if !extended {
                return Err(CurvatureError::DegenerateFace(fi));
            }
            used_extended = true;
        }
        for q in 0..3 {
            angle_sums[face[q]] += theta[q];
        }
    }
    let values = angle_sums
        .iter()
        .map(|&s| 2.0 * std::f64::consts::PI - s)
        .collect();
    Ok(CurvatureField {
        values,
        used_extended,
    })
}

/// Total curvature minus `2 pi chi`. Vanishes identically in the Euclidean
/// background (extended or not); equals the total triangle area in the
/// nondegenerate hyperbolic background.
pub fn gauss_bonnet_residual(field: &CurvatureField, surface: &TriangulatedSurface) -> f64 {
    field.total() - 2.0 * std::f64::consts::PI * surface.euler_characteristic() as f64
}

/// Global curvature Jacobian `dK/du`, assembled face by face in face order.
/// Symmetric; positive semi-definite with kernel `(1, ..., 1)` in the
/// Euclidean background and positive definite in the hyperbolic one.
///
/// `extended = true` is refused: the extended curvature is not Lipschitz, so
/// no Jacobian exists on the degenerate side.
pub fn curvature_jacobian(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state: &ConformalState,
    extended: bool,
) -> Result<DMatrix<f64>, CurvatureError> {
    if extended {
        return Err(CurvatureError::ExtendedNotDifferentiable);
    }
    assemble_jacobian(surface, scheme, state, false)
}

/// Jacobian of the extended curvature where it is defined: degenerate faces
/// have locally constant extended angles, so they contribute nothing. Used
/// by the implicit integrators; intentionally not part of the public API.
pub(crate) fn extended_flow_jacobian(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state: &ConformalState,
) -> Result<DMatrix<f64>, CurvatureError> {
    assemble_jacobian(surface, scheme, state, true)
}

fn assemble_jacobian(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state: &ConformalState,
    skip_degenerate: bool,
) -> Result<DMatrix<f64>, CurvatureError> {
    let n = surface.vertex_count();
    let mut lambda = DMatrix::zeros(n, n);
    for (fi, &face) in surface.faces().iter().enumerate() {
        let fw = FaceWeights::from_scheme(scheme, face)?;
        let f = face_factors(state, face);
        let jac = match state.background {
            Background::Euclidean => euclid::jacobian_fw(&fw, f.map(f64::exp)).map_err(|e| match e {
                euclid::EuclidError::Weights(w) => CurvatureError::Weights(w),
                _ => CurvatureError::DegenerateFace(fi),
            }),
            Background::Hyperbolic => hyper::jacobian_fw(&fw, f).map_err(|e| match e {
                hyper::HyperError::Weights(w) => CurvatureError::Weights(w),
                _ => CurvatureError::DegenerateFace(fi),
            }),
        };
        let jac = match jac {
            Ok(jac) => jac,
            Err(CurvatureError::DegenerateFace(_)) if skip_degenerate => continue,
            Err(e) => return Err(e),
        };
        for q in 0..3 {
            for p in 0..3 {
                lambda[(face[q], face[p])] -= jac[q][p];
            }
        }
    }
    Ok(lambda)
}
