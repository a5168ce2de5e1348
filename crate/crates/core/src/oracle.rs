//! Brute-force cross-checks used by the test suite and `dcs verify`.
//!
//! Everything here deliberately avoids the analytic derivative formulas of
//! the geometry kernels: Jacobians come from central differences of the
//! length/angle evaluation path, region boundaries from sign scans of `Q`,
//! and eigenvalue extremes from plain cyclic Jacobi sweeps.

use nalgebra::DMatrix;
use rand::Rng;

use thiserror::Error;

use crate::surface::TriangulatedSurface;
use crate::weights::{FaceWeights, WeightScheme, WeightsError};
use crate::{euclid, hyper, Background};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("function evaluation failed at a probe point")]
    EvaluationFailed,
    #[error("matrix is not symmetric; largest asymmetry {0}")]
    NotSymmetric(f64),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Central-difference Jacobian of a vector map: column `k` holds
/// `(f(x + h e_k) - f(x - h e_k)) / 2h`. The map may refuse a probe point by
/// returning `None`, which surfaces as an error.
pub fn fd_jacobian<F>(mut func: F, x: &[f64], step: f64) -> Result<DMatrix<f64>, OracleError>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(OracleError::BadStep(step));
    }
    let n = x.len();
    let rows = func(x).ok_or(OracleError::EvaluationFailed)?.len();
    let mut jac = DMatrix::zeros(rows, n);
    let mut probe = x.to_vec();
    for k in 0..n {
        probe[k] = x[k] + step;
        let plus = func(&probe).ok_or(OracleError::EvaluationFailed)?;
        probe[k] = x[k] - step;
        let minus = func(&probe).ok_or(OracleError::EvaluationFailed)?;
        probe[k] = x[k];
        if plus.len() != rows || minus.len() != rows {
            return Err(OracleError::EvaluationFailed);
        }
        for row in 0..rows {
            jac[(row, k)] = (plus[row] - minus[row]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Angles of one face as a function of the three flow coordinates, through
/// the Euclidean length and law-of-cosines path only.
pub fn euclid_angle_map(fw: FaceWeights) -> impl FnMut(&[f64]) -> Option<Vec<f64>> {
    move |u: &[f64]| {
        let r = [u[0].exp(), u[1].exp(), u[2].exp()];
        let l = euclid::face_lengths(&fw, r).ok()?;
        Some(euclid::angles_e(l).ok()?.to_vec())
    }
}

/// Angles of one face as a function of the three flow coordinates, through
/// the hyperbolic length and law-of-cosines path only.
pub fn hyper_angle_map(fw: FaceWeights) -> impl FnMut(&[f64]) -> Option<Vec<f64>> {
    move |u: &[f64]| {
        let mut f = [0.0; 3];
        for q in 0..3 {
            f[q] = hyper::f_of_u(u[q], fw.eps[q]).ok()?;
        }
        let ch = hyper::face_cosh_lengths(&fw, f).ok()?;
        Some(hyper::angles_h(ch).ok()?.to_vec())
    }
}

/// One-dimensional sign scan of `Q` along a single corner coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Local corner index of the scanned coordinate.
    pub axis: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub signs: Vec<i8>,
    /// Interpolated locations where the sign of `Q` flips.
    pub crossings: Vec<f64>,
}

/// Scans `Q` for one face along the coordinate of `corner` (a vertex id of
/// `face`), holding the other two coordinates at their `fixed` values. The
/// coordinate is the radius `r` in the Euclidean background and the factor
/// `f` in the hyperbolic one.
pub fn scan_admissible(
    scheme: &WeightScheme,
    face: [usize; 3],
    background: Background,
    corner: usize,
    fixed: [f64; 3],
    range: (f64, f64),
    samples: usize,
) -> Result<ScanResult, WeightsError> {
    let axis = face
        .iter()
        .position(|&v| v == corner)
        .ok_or(WeightsError::CornerNotInFace { corner, face })?;
    let fw = FaceWeights::from_scheme(scheme, face)?;
    Ok(scan_face(&fw, background, axis, fixed, range, samples))
}

/// [`scan_admissible`] in face-local form.
pub fn scan_face(
    fw: &FaceWeights,
    background: Background,
    axis: usize,
    fixed: [f64; 3],
    range: (f64, f64),
    samples: usize,
) -> ScanResult {
    assert!(samples >= 2, "a scan needs at least two samples");
    let mut grid = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    let mut signs = Vec::with_capacity(samples);
    for k in 0..samples {
        let x = range.0 + (range.1 - range.0) * k as f64 / (samples - 1) as f64;
        let mut coords = fixed;
        coords[axis] = x;
        let q = match background {
            Background::Euclidean => fw.quad_form(euclid::kappa_of_r(coords)),
            Background::Hyperbolic => hyper::q_value_fw(fw, coords),
        };
        grid.push(x);
        values.push(q);
        signs.push(if q > 0.0 {
            1
        } else if q < 0.0 {
            -1
        } else {
            0
        });
    }
    let mut crossings = Vec::new();
    for k in 1..samples {
        if signs[k - 1] * signs[k] < 0 {
            let (x0, x1) = (grid[k - 1], grid[k]);
            let (q0, q1) = (values[k - 1], values[k]);
            crossings.push(x0 - q0 * (x1 - x0) / (q1 - q0));
        } else if signs[k] == 0 {
            crossings.push(grid[k]);
        }
    }
    ScanResult {
        axis,
        grid,
        values,
        signs,
        crossings,
    }
}

/// All eigenvalues (ascending) and matching eigenvector columns of a
/// symmetric matrix, by cyclic Jacobi rotations.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), OracleError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(OracleError::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    let mut asym: f64 = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            asym = asym.max((m[(p, q)] - m[(q, p)]).abs());
        }
    }
    if asym > 1e-10 {
        return Err(OracleError::NotSymmetric(asym));
    }

    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok((eigenvalues, vectors))
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn min_max_eigenvalues(m: &DMatrix<f64>) -> Result<(f64, f64), OracleError> {
    let (values, _) = jacobi_eigen(m)?;
    Ok((values[0], values[values.len() - 1]))
}

/// Checks the two structure conditions on one face's weights.
pub fn face_weights_admissible(fw: &FaceWeights) -> bool {
    for q in 0..3 {
        let (s, t) = crate::weights::other_corners(q);
        if fw.epsf(s) * fw.epsf(t) + fw.eta[q] <= 0.0 {
            return false;
        }
        if fw.gamma(q) < 0.0 {
            return false;
        }
    }
    true
}

/// Random admissible face weights. Mixes all-positive weights with
/// rejection-sampled mixed-sign ones so negative couplings get exercised.
pub fn random_face_weights(rng: &mut impl Rng) -> FaceWeights {
    loop {
        let eps = [rng.gen_range(0..2u8), rng.gen_range(0..2u8), rng.gen_range(0..2u8)];
        let eta = if rng.gen_bool(0.7) {
            [
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..3.0),
            ]
        } else {
            [
                rng.gen_range(-0.9..3.0),
                rng.gen_range(-0.9..3.0),
                rng.gen_range(-0.9..3.0),
            ]
        };
        let fw = FaceWeights::new(eps, eta);
        if face_weights_admissible(&fw) {
            return fw;
        }
    }
}

/// Random admissible face weights whose every corner has a degenerate region
/// (all quadratic coefficients positive, since every eta exceeds 1).
pub fn random_face_weights_with_regions(rng: &mut impl Rng) -> FaceWeights {
    FaceWeights::new(
        [rng.gen_range(0..2u8), rng.gen_range(0..2u8), rng.gen_range(0..2u8)],
        [
            rng.gen_range(1.05..3.0),
            rng.gen_range(1.05..3.0),
            rng.gen_range(1.05..3.0),
        ],
    )
}

/// Random admissible scheme over a whole surface: arbitrary eps, positive
/// eta (which satisfies both structure conditions on every face).
pub fn random_scheme(rng: &mut impl Rng, surface: &TriangulatedSurface) -> WeightScheme {
    let eps = (0..surface.vertex_count())
        .map(|_| rng.gen_range(0..2u8))
        .collect();
    let eta = surface
        .edges()
        .iter()
        .map(|&e| (e, rng.gen_range(0.2..2.5)))
        .collect::<Vec<_>>();
    WeightScheme::new(eps, eta).expect("eps sampled from {0,1}")
}
