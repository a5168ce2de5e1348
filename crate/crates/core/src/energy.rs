//! Action functionals: the Ricci energy, its target-shifted potential, and
//! the Calabi energy.
//!
//! The face energy is a line integral of the inner angles over a straight
//! segment in `u`-coordinates. It is path independent because the angle
//! Jacobian is symmetric, so the straight segment from a fixed base point
//! defines the functional. In extended mode the integrand uses the constant
//! extension of the angles, which makes the energy convex and `C^1` on the
//! whole coordinate box.

use thiserror::Error;

use crate::curvature::{state_nondegenerate, CurvatureError};
use crate::surface::TriangulatedSurface;
use crate::weights::{FaceWeights, WeightScheme, WeightsError};
use crate::{euclid, hyper, Background, ConformalState};
use crate::hyper::HyperError;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("integration path leaves the admissible region at parameter {t}")]
    PathLeavesAdmissible { t: f64 },
    #[error("infeasible target curvature: {reason}")]
    BadTarget { reason: String },
    #[error("face {0} is degenerate")]
    DegenerateFace(usize),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

fn curvature_to_energy(err: CurvatureError) -> EnergyError {
    match err {
        CurvatureError::DegenerateFace(i) => EnergyError::DegenerateFace(i),
        CurvatureError::Weights(w) => EnergyError::Weights(w),
        CurvatureError::ExtendedNotDifferentiable => {
            unreachable!("energy evaluation never requests an extended Jacobian")
        }
    }
}

// 16-node Gauss-Legendre rule on [-1, 1], positive half; the rule is
// symmetric. Exact for polynomials of degree 31.
const GL_NODES: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];
const GL_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

const QUAD_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 28;

fn gl16<F>(f: &mut F, a: f64, b: f64) -> Result<f64, EnergyError>
where
    F: FnMut(f64) -> Result<f64, EnergyError>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for k in 0..8 {
        let dx = half * GL_NODES[k];
        sum += GL_WEIGHTS[k] * (f(mid - dx)? + f(mid + dx)?);
    }
    Ok(half * sum)
}

fn adaptive<F>(f: &mut F, a: f64, b: f64, whole: f64, depth: u32) -> Result<f64, EnergyError>
where
    F: FnMut(f64) -> Result<f64, EnergyError>,
{
    let mid = 0.5 * (a + b);
    let left = gl16(f, a, mid)?;
    let right = gl16(f, mid, b)?;
    let refined = left + right;
    if (refined - whole).abs() < QUAD_TOL || depth >= MAX_DEPTH {
        return Ok(refined);
    }
    Ok(adaptive(f, a, mid, left, depth + 1)? + adaptive(f, mid, b, right, depth + 1)?)
}

/// Adaptive composite quadrature over [0, 1]. Subdivides until two
/// successive refinements agree to 1e-10, which resolves the isolated
/// derivative kinks of the extended integrand.
fn integrate01<F>(mut f: F) -> Result<f64, EnergyError>
where
    F: FnMut(f64) -> Result<f64, EnergyError>,
{
    let whole = gl16(&mut f, 0.0, 1.0)?;
    adaptive(&mut f, 0.0, 1.0, whole, 0)
}

/// Line integral of the face's inner angles along the straight segment from
/// `u_base` to `u_target` in `u`-coordinates.
///
/// With `extended = false` the whole segment must stay nondegenerate;
/// otherwise the constant extension is integrated. Hyperbolic coordinates
/// must lie in the admissible box (`u < 0` wherever `epsilon = 1`).
pub fn triangle_energy(
    scheme: &WeightScheme,
    face: [usize; 3],
    u_target: [f64; 3],
    u_base: [f64; 3],
    background: Background,
    extended: bool,
) -> Result<f64, EnergyError> {
    let fw = FaceWeights::from_scheme(scheme, face)?;
    let du = [
        u_target[0] - u_base[0],
        u_target[1] - u_base[1],
        u_target[2] - u_base[2],
    ];
    integrate01(|tau| {
        let u = [
            u_base[0] + tau * du[0],
            u_base[1] + tau * du[1],
            u_base[2] + tau * du[2],
        ];
        let (nondegenerate, theta) = match background {
            Background::Euclidean => {
                let r = u.map(f64::exp);
                (
                    fw.quad_form(euclid::kappa_of_r(r)) > 0.0,
                    euclid::extended_angles_fw(&fw, r),
                )
            }
            Background::Hyperbolic => {
                let mut fvals = [0.0; 3];
                for q in 0..3 {
                    fvals[q] = hyper::f_of_u(u[q], fw.eps[q])?;
                }
                (
                    hyper::q_value_fw(&fw, fvals) > 0.0,
                    hyper::extended_angles_fw(&fw, fvals),
                )
            }
        };
        if !extended && !nondegenerate {
            return Err(EnergyError::PathLeavesAdmissible { t: tau });
        }
        Ok(theta[0] * du[0] + theta[1] * du[1] + theta[2] * du[2])
    })
}

/// Fixed base point of the global energy. Euclidean: the origin. Hyperbolic:
/// `u = -1` on scaling vertices and `u = 0` on distance vertices, moved along
/// the diagonal if that point happens to be degenerate.
fn base_point(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    background: Background,
) -> Result<Vec<f64>, EnergyError> {
    let n = surface.vertex_count();
    match background {
        Background::Euclidean => Ok(vec![0.0; n]),
        Background::Hyperbolic => {
            let default: Vec<f64> = (0..n)
                .map(|v| if scheme.epsilon(v) == 1 { -1.0 } else { 0.0 })
                .collect();
            let state = ConformalState::from_u_coords(background, scheme, &default)?;
            if state_nondegenerate(surface, scheme, &state)? {
                return Ok(default);
            }
            for s in [0.0, -0.5, 0.5, -1.0, 1.0, -2.0, 2.0, -4.0, 4.0] {
                let trial = ConformalState::new(background, vec![s; n]);
                if state_nondegenerate(surface, scheme, &trial)? {
                    return Ok(trial.u_coords(scheme));
                }
            }
            Ok(default)
        }
    }
}

/// The global energy `2 pi sum(u) - sum of face energies`, whose gradient is
/// the vertex curvature. Convex on the admissible region; the extended
/// version is convex and `C^1` on the whole coordinate box.
pub fn ricci_energy(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    u: &[f64],
    background: Background,
    extended: bool,
) -> Result<f64, EnergyError> {
    assert_eq!(u.len(), surface.vertex_count(), "one u per vertex");
    let base = base_point(surface, scheme, background)?;
    let mut total = 2.0 * std::f64::consts::PI * u.iter().sum::<f64>();
    for &face in surface.faces() {
        let ut = [u[face[0]], u[face[1]], u[face[2]]];
        let ub = [base[face[0]], base[face[1]], base[face[2]]];
        total -= triangle_energy(scheme, face, ut, ub, background, extended)?;
    }
    Ok(total)
}

/// Checks that a target curvature is feasible for the background before any
/// flow or solve starts.
pub fn validate_target(
    surface: &TriangulatedSurface,
    k_bar: &[f64],
    background: Background,
) -> Result<(), EnergyError> {
    let n = surface.vertex_count();
    if k_bar.len() != n {
        return Err(EnergyError::BadTarget {
            reason: format!("expected {n} target values, got {}", k_bar.len()),
        });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    for (v, &k) in k_bar.iter().enumerate() {
        if !k.is_finite() || k >= two_pi {
            return Err(EnergyError::BadTarget {
                reason: format!("target at vertex {v} is {k}; every value must be below 2 pi"),
            });
        }
    }
    let total: f64 = k_bar.iter().sum();
    let constraint = two_pi * surface.euler_characteristic() as f64;
    match background {
        Background::Euclidean => {
            let tol = 1e-8 * (1.0 + constraint.abs());
            if (total - constraint).abs() > tol {
                return Err(EnergyError::BadTarget {
                    reason: format!(
                        "Euclidean targets must sum to 2 pi chi = {constraint}; got {total}"
                    ),
                });
            }
        }
        Background::Hyperbolic => {
            if total <= constraint {
                return Err(EnergyError::BadTarget {
                    reason: format!(
                        "hyperbolic targets must sum to more than 2 pi chi = {constraint}; got {total}"
                    ),
                });
            }
        }
    }
    Ok(())
}

/// The potential `ricci_energy - sum(k_bar * u)`, whose gradient is `K - Kbar`
/// and whose minimizers realize the target curvature.
pub fn target_potential(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    u: &[f64],
    k_bar: &[f64],
    background: Background,
    extended: bool,
) -> Result<f64, EnergyError> {
    validate_target(surface, k_bar, background)?;
    let energy = ricci_energy(surface, scheme, u, background, extended)?;
    let shift: f64 = k_bar.iter().zip(u).map(|(k, ui)| k * ui).sum();
    Ok(energy - shift)
}

/// Squared curvature deviation `1/2 sum (k_bar - K)^2` at the state `u`.
/// Requires every face nondegenerate.
pub fn calabi_energy(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    u: &[f64],
    k_bar: &[f64],
    background: Background,
) -> Result<f64, EnergyError> {
    let state = ConformalState::from_u_coords(background, scheme, u)?;
    let field = crate::curvature::vertex_curvature(surface, scheme, &state, false)
        .map_err(curvature_to_energy)?;
    Ok(0.5
        * field
            .values
            .iter()
            .zip(k_bar)
            .map(|(k, kb)| (kb - k) * (kb - k))
            .sum::<f64>())
}
