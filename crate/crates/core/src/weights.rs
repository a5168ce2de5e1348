//! Weight schemes: per-vertex coefficients and per-edge weights.
//!
//! A scheme fixes, once and for all, a coefficient `eps ∈ {0, 1}` at every
//! vertex and a symmetric weight `eta` on every edge. Together with the
//! per-vertex factors they determine all edge lengths. Schemes are admissible
//! when they satisfy two sign conditions, checked exactly (no tolerance):
//!
//! * per edge `{s, t}`:            `eps_s eps_t + eta_st > 0`;
//! * per face corner `q` opposite the edge `{s, t}`:
//!   `gamma_q = eps_q eta_st + eta_qs eta_qt >= 0`.
//!
//! Admissibility keeps squared Euclidean lengths positive and makes the
//! nondegeneracy of a triangle equivalent to a single sign `Q > 0` of the
//! quadratic form computed by [`FaceWeights::quad_form`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::surface::TriangulatedSurface;

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("vertex {vertex} has epsilon = {value}, must be 0 or 1")]
    BadEpsilon { vertex: usize, value: u8 },
    #[error("vertex {vertex} has no epsilon coefficient")]
    MissingEpsilon { vertex: usize },
    #[error("scheme assigns epsilon to {got} vertices, surface has {expected}")]
    VertexCountMismatch { expected: usize, got: usize },
    #[error("edge ({0}, {1}) has no eta weight")]
    MissingEta(usize, usize),
    #[error("vertex {corner} is not a corner of face {face:?}")]
    CornerNotInFace { corner: usize, face: [usize; 3] },
    #[error("kappa[{index}] = {value}, must be positive")]
    NonpositiveKappa { index: usize, value: f64 },
}

/// The two other corner indices of a face, in cyclic order after `q`.
pub(crate) fn other_corners(q: usize) -> (usize, usize) {
    ((q + 1) % 3, (q + 2) % 3)
}

/// Vertex coefficients `eps` and symmetric edge weights `eta`.
///
/// Eta keys are stored with sorted endpoints, so lookups work in either
/// order. The scheme is a plain container: whether it covers a given surface
/// and satisfies the structure conditions is decided by [`validate_scheme`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    epsilon: Vec<u8>,
    eta: BTreeMap<(usize, usize), f64>,
}

impl WeightScheme {
    pub fn new(
        epsilon: Vec<u8>,
        eta: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self, WeightsError> {
        for (vertex, &value) in epsilon.iter().enumerate() {
            if value > 1 {
                return Err(WeightsError::BadEpsilon { vertex, value });
            }
        }
        let eta = eta
            .into_iter()
            .map(|((a, b), w)| ((a.min(b), a.max(b)), w))
            .collect();
        Ok(WeightScheme { epsilon, eta })
    }

    /// Constant scheme on all vertices and edges of a surface.
    pub fn uniform(surface: &TriangulatedSurface, eps: u8, eta: f64) -> Self {
        WeightScheme::new(
            vec![eps; surface.vertex_count()],
            surface.edges().iter().map(|&e| (e, eta)),
        )
        .expect("uniform eps is validated by the caller signature")
    }

    pub fn vertex_count(&self) -> usize {
        self.epsilon.len()
    }

    /// Coefficient at a vertex. Panics when the vertex is uncovered; use
    /// [`validate_scheme`] first for untrusted input.
    pub fn epsilon(&self, v: usize) -> u8 {
        self.epsilon[v]
    }

    pub fn eta(&self, a: usize, b: usize) -> Option<f64> {
        self.eta.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn set_eta(&mut self, a: usize, b: usize, value: f64) {
        self.eta.insert((a.min(b), a.max(b)), value);
    }

    fn eta_checked(&self, a: usize, b: usize) -> Result<f64, WeightsError> {
        self.eta(a, b).ok_or(WeightsError::MissingEta(a.min(b), a.max(b)))
    }

    fn epsilon_checked(&self, v: usize) -> Result<u8, WeightsError> {
        self.epsilon
            .get(v)
            .copied()
            .ok_or(WeightsError::MissingEpsilon { vertex: v })
    }
}

/// An edge whose weight fails the strict edge condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeConditionViolation {
    pub edge: (usize, usize),
    /// Value of `eps_s eps_t + eta_st`, which must be `> 0`.
    pub value: f64,
}

/// A face corner whose `gamma` fails the corner condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerConditionViolation {
    pub face: usize,
    /// Vertex id of the offending corner.
    pub corner: usize,
    /// Value of `gamma` at the corner, which must be `>= 0`.
    pub value: f64,
}

/// Outcome of checking the structure conditions over a whole surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionReport {
    pub edge_violations: Vec<EdgeConditionViolation>,
    pub corner_violations: Vec<CornerConditionViolation>,
}

impl ConditionReport {
    pub fn is_admissible(&self) -> bool {
        self.edge_violations.is_empty() && self.corner_violations.is_empty()
    }
}

/// Checks that a scheme covers a surface and satisfies the structure
/// conditions, reporting every violation rather than the first.
pub fn validate_scheme(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
) -> Result<ConditionReport, WeightsError> {
    if scheme.vertex_count() != surface.vertex_count() {
        return Err(WeightsError::VertexCountMismatch {
            expected: surface.vertex_count(),
            got: scheme.vertex_count(),
        });
    }
    let mut report = ConditionReport::default();
    for &(s, t) in surface.edges() {
        let value = f64::from(scheme.epsilon(s) * scheme.epsilon(t)) + scheme.eta_checked(s, t)?;
        if value <= 0.0 {
            report
                .edge_violations
                .push(EdgeConditionViolation { edge: (s, t), value });
        }
    }
    for (fi, &face) in surface.faces().iter().enumerate() {
        let fw = FaceWeights::from_scheme(scheme, face)?;
        for q in 0..3 {
            let value = fw.gamma(q);
            if value < 0.0 {
                report.corner_violations.push(CornerConditionViolation {
                    face: fi,
                    corner: face[q],
                    value,
                });
            }
        }
    }
    Ok(report)
}

/// Weights of one face in corner-local form, the input of both geometry
/// kernels.
///
/// `eta[q]` is the weight of the edge opposite corner `q`, so formulas read
/// exactly as in the corner-symmetric notation: for corner `q` with the other
/// two corners `s, t`, the opposite edge is `{s, t}` and carries `eta[q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceWeights {
    pub eps: [u8; 3],
    pub eta: [f64; 3],
}

impl FaceWeights {
    pub fn new(eps: [u8; 3], eta: [f64; 3]) -> Self {
        FaceWeights { eps, eta }
    }

    pub fn from_scheme(scheme: &WeightScheme, face: [usize; 3]) -> Result<Self, WeightsError> {
        let mut eps = [0u8; 3];
        let mut eta = [0.0f64; 3];
        for q in 0..3 {
            let (s, t) = other_corners(q);
            eps[q] = scheme.epsilon_checked(face[q])?;
            eta[q] = scheme.eta_checked(face[s], face[t])?;
        }
        Ok(FaceWeights { eps, eta })
    }

    pub fn epsf(&self, q: usize) -> f64 {
        f64::from(self.eps[q])
    }

    /// `gamma_q = eps_q eta_q + eta_s eta_t`.
    pub fn gamma(&self, q: usize) -> f64 {
        let (s, t) = other_corners(q);
        self.epsf(q) * self.eta[q] + self.eta[s] * self.eta[t]
    }

    pub fn gammas(&self) -> [f64; 3] {
        [self.gamma(0), self.gamma(1), self.gamma(2)]
    }

    /// `h_q = (eps_s eps_t - eta_q^2) kappa_q + gamma_s kappa_t + gamma_t kappa_s`.
    ///
    /// The signs of the three `h` values classify a triangle: all positive on
    /// nondegenerate data, and at most one can be nonpositive.
    pub fn h(&self, kappa: [f64; 3]) -> [f64; 3] {
        let g = self.gammas();
        let mut h = [0.0; 3];
        for q in 0..3 {
            let (s, t) = other_corners(q);
            h[q] = (self.epsf(s) * self.epsf(t) - self.eta[q] * self.eta[q]) * kappa[q]
                + g[s] * kappa[t]
                + g[t] * kappa[s];
        }
        h
    }

    /// Scheme invariant `G = sum_q eps_q eta_q^2 + 2 eta_0 eta_1 eta_2 - eps_0 eps_1 eps_2`.
    ///
    /// `G > 0` whenever the structure conditions hold with at least one strict
    /// corner inequality; it is the discriminant scale of the degeneracy
    /// thresholds.
    pub fn g_value(&self) -> f64 {
        let [e0, e1, e2] = [self.epsf(0), self.epsf(1), self.epsf(2)];
        let [n0, n1, n2] = self.eta;
        e0 * n0 * n0 + e1 * n1 * n1 + e2 * n2 * n2 + 2.0 * n0 * n1 * n2 - e0 * e1 * e2
    }

    /// The quadratic form
    /// `Q = sum_q (eps_s eps_t - eta_q^2) kappa_q^2 + 2 sum_q gamma_q kappa_s kappa_t`,
    /// expanded term by term. Algebraically `Q = kappa . h(kappa)`, which the
    /// tests verify against this independent expansion.
    pub fn quad_form(&self, kappa: [f64; 3]) -> f64 {
        let g = self.gammas();
        let mut q_val = 0.0;
        for q in 0..3 {
            let (s, t) = other_corners(q);
            q_val += (self.epsf(s) * self.epsf(t) - self.eta[q] * self.eta[q])
                * kappa[q]
                * kappa[q]
                + 2.0 * g[q] * kappa[s] * kappa[t];
        }
        q_val
    }

    /// Leading coefficient `A_q = eta_q^2 - eps_s eps_t` of the degeneracy
    /// quadratic in `kappa_q`.
    pub fn a_coeff(&self, q: usize) -> f64 {
        let (s, t) = other_corners(q);
        self.eta[q] * self.eta[q] - self.epsf(s) * self.epsf(t)
    }
}

/// `gamma` at one corner of a face, addressed by vertex id.
pub fn corner_gamma(
    scheme: &WeightScheme,
    face: [usize; 3],
    corner: usize,
) -> Result<f64, WeightsError> {
    let q = face
        .iter()
        .position(|&v| v == corner)
        .ok_or(WeightsError::CornerNotInFace { corner, face })?;
    Ok(FaceWeights::from_scheme(scheme, face)?.gamma(q))
}

/// The three `h` values of a face for given positive `kappa`, ordered like
/// the face's corners.
pub fn h_values(
    kappa: [f64; 3],
    scheme: &WeightScheme,
    face: [usize; 3],
) -> Result<[f64; 3], WeightsError> {
    for (index, &value) in kappa.iter().enumerate() {
        if !(value > 0.0) {
            return Err(WeightsError::NonpositiveKappa { index, value });
        }
    }
    Ok(FaceWeights::from_scheme(scheme, face)?.h(kappa))
}

#[derive(Debug, Error)]
pub enum WeightsParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Scheme(#[from] WeightsError),
}

/// Parses the plain-text weights format against a known surface.
///
/// Lines are `epsilon v VALUE` (VALUE in `{0, 1}`) or `eta i j VALUE`;
/// `#` starts a comment. Vertices without an epsilon line default to 1.
/// Every edge of the surface must receive an eta line; pairs that are not
/// edges, out-of-range indices, and duplicate assignments are rejected.
pub fn parse_weights(
    text: &str,
    surface: &TriangulatedSurface,
) -> Result<WeightScheme, WeightsParseError> {
    let syntax = |line: usize, message: String| WeightsParseError::Syntax { line, message };
    let n = surface.vertex_count();
    let mut epsilon: Vec<Option<u8>> = vec![None; n];
    let mut eta: BTreeMap<(usize, usize), f64> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match tokens.as_slice() {
            ["epsilon", v, value] => {
                let v: usize = v
                    .parse()
                    .map_err(|_| syntax(line, format!("bad vertex index `{v}`")))?;
                if v >= n {
                    return Err(syntax(line, format!("vertex {v} out of range 0..{n}")));
                }
                let value: u8 = match *value {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(syntax(line, format!("epsilon must be 0 or 1, got `{other}`"))),
                };
                if epsilon[v].replace(value).is_some() {
                    return Err(syntax(line, format!("duplicate epsilon for vertex {v}")));
                }
            }
            ["eta", a, b, value] => {
                let a: usize = a
                    .parse()
                    .map_err(|_| syntax(line, format!("bad vertex index `{a}`")))?;
                let b: usize = b
                    .parse()
                    .map_err(|_| syntax(line, format!("bad vertex index `{b}`")))?;
                let value: f64 = value
                    .parse()
                    .map_err(|_| syntax(line, format!("bad eta value `{value}`")))?;
                if surface.edge_index(a, b).is_none() {
                    return Err(syntax(line, format!("({a}, {b}) is not an edge")));
                }
                if eta.insert((a.min(b), a.max(b)), value).is_some() {
                    return Err(syntax(line, format!("duplicate eta for edge ({a}, {b})")));
                }
            }
            _ => {
                return Err(syntax(
                    line,
                    format!("expected `epsilon v VALUE` or `eta i j VALUE`, got `{body}`"),
                ))
            }
        }
    }

    for &(a, b) in surface.edges() {
        if !eta.contains_key(&(a, b)) {
            return Err(WeightsError::MissingEta(a, b).into());
        }
    }
    let epsilon = epsilon.into_iter().map(|e| e.unwrap_or(1)).collect();
    Ok(WeightScheme::new(epsilon, eta)?)
}
