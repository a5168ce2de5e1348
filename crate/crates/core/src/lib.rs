//! Discrete conformal structures on closed triangulated surfaces.
//!
//! A discrete conformal structure assigns a log-factor `f_v` to every vertex of
//! a triangulated surface and, through fixed per-vertex coefficients `eps` and
//! per-edge weights `eta`, turns those factors into edge lengths in a Euclidean
//! or hyperbolic background. The crate provides the length/angle kernels, the
//! discrete curvature map and its Jacobian, variational energies, curvature
//! flows (Ricci and Calabi), a Newton solver for prescribed curvature, and a
//! small self-check oracle used by the test suite and the `dcs verify` command.

pub mod cli;
pub mod curvature;
pub mod energy;
pub mod euclid;
pub mod flow;
pub mod hyper;
pub mod oracle;
pub mod surface;
pub mod weights;

use weights::WeightScheme;

/// Background geometry in which every triangle is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    Euclidean,
    Hyperbolic,
}

impl std::fmt::Display for Background {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Background::Euclidean => write!(f, "euclidean"),
            Background::Hyperbolic => write!(f, "hyperbolic"),
        }
    }
}

/// Per-vertex log-factors together with the background they live in.
///
/// The factors `f` are the primary unknowns of every flow and solve in this
/// crate. Flows act on the coordinates `u` instead, which reparametrize `f`
/// vertex-wise (identically in the Euclidean background, and through a
/// monotone map wherever a hyperbolic vertex has `eps = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalState {
    pub background: Background,
    pub f: Vec<f64>,
}

impl ConformalState {
    pub fn new(background: Background, f: Vec<f64>) -> Self {
        ConformalState { background, f }
    }

    /// State with `f = 0` at every vertex.
    pub fn flat(background: Background, vertex_count: usize) -> Self {
        ConformalState::new(background, vec![0.0; vertex_count])
    }

    pub fn vertex_count(&self) -> usize {
        self.f.len()
    }

    /// Radii `r = exp(f)`, the natural variables of the Euclidean kernel.
    pub fn radii(&self) -> Vec<f64> {
        self.f.iter().map(|&f| f.exp()).collect()
    }

    /// Flow coordinates `u` for this state under the given scheme.
    pub fn u_coords(&self, scheme: &WeightScheme) -> Vec<f64> {
        match self.background {
            Background::Euclidean => self.f.clone(),
            Background::Hyperbolic => self
                .f
                .iter()
                .enumerate()
                .map(|(v, &f)| hyper::u_of_f(f, scheme.epsilon(v)))
                .collect(),
        }
    }

    /// Rebuilds a state from flow coordinates.
    ///
    /// Fails only in the hyperbolic background, when a coordinate at an
    /// `eps = 1` vertex lies outside its domain `u < 0`.
    pub fn from_u_coords(
        background: Background,
        scheme: &WeightScheme,
        u: &[f64],
    ) -> Result<Self, hyper::HyperError> {
        let f = match background {
            Background::Euclidean => u.to_vec(),
            Background::Hyperbolic => u
                .iter()
                .enumerate()
                .map(|(v, &u)| hyper::f_of_u(u, scheme.epsilon(v)))
                .collect::<Result<Vec<_>, _>>()?,
        };
        Ok(ConformalState { background, f })
    }
}
