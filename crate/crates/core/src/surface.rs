//! Combinatorics of closed connected triangulated surfaces.
//!
//! The geometry kernels never look at coordinates; everything downstream only
//! needs the incidence data collected here: faces as vertex triples, the edge
//! list with a canonical numbering, and the face ring around every vertex.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("face {face} repeats vertex {vertex}")]
    DegenerateFace { face: usize, vertex: usize },
    #[error("face {face} references vertex {vertex}, but only {vertex_count} vertices were declared")]
    BadIndex {
        face: usize,
        vertex: usize,
        vertex_count: usize,
    },
    #[error("edge ({0}, {1}) belongs to {count} face(s), expected exactly 2", .edge.0, .edge.1)]
    NonManifoldEdge { edge: (usize, usize), count: usize },
    #[error("surface is not connected")]
    Disconnected,
    #[error("surface has no faces")]
    NoFaces,
}

/// A closed connected surface given by its triangulation.
///
/// Construction validates that every edge lies on exactly two faces and that
/// the whole complex is connected, so holders of a value of this type may rely
/// on both. Edges are numbered in lexicographic order of their endpoint pairs
/// `(min, max)`, which keeps every derived quantity independent of the order
/// faces were listed in.
#[derive(Debug, Clone)]
pub struct TriangulatedSurface {
    vertex_count: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<(usize, usize)>,
    edge_index: HashMap<(usize, usize), usize>,
    edge_faces: Vec<[usize; 2]>,
    vertex_faces: Vec<Vec<usize>>,
}

impl TriangulatedSurface {
    pub fn new(vertex_count: usize, faces: &[[usize; 3]]) -> Result<Self, SurfaceError> {
        if faces.is_empty() {
            return Err(SurfaceError::NoFaces);
        }
        for (fi, fv) in faces.iter().enumerate() {
            for &v in fv {
                if v >= vertex_count {
                    return Err(SurfaceError::BadIndex {
                        face: fi,
                        vertex: v,
                        vertex_count,
                    });
                }
            }
            for q in 0..3 {
                if fv[q] == fv[(q + 1) % 3] {
                    return Err(SurfaceError::DegenerateFace {
                        face: fi,
                        vertex: fv[q],
                    });
                }
            }
        }

        // Canonical edge order: sorted endpoint pairs.
        let mut incident: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
            std::collections::BTreeMap::new();
        for (fi, fv) in faces.iter().enumerate() {
            for q in 0..3 {
                let (a, b) = (fv[q], fv[(q + 1) % 3]);
                let key = (a.min(b), a.max(b));
                incident.entry(key).or_default().push(fi);
            }
        }
        let mut edges = Vec::with_capacity(incident.len());
        let mut edge_index = HashMap::with_capacity(incident.len());
        let mut edge_faces = Vec::with_capacity(incident.len());
        for (key, fs) in &incident {
            if fs.len() != 2 {
                return Err(SurfaceError::NonManifoldEdge {
                    edge: *key,
                    count: fs.len(),
                });
            }
            edge_index.insert(*key, edges.len());
            edges.push(*key);
            edge_faces.push([fs[0], fs[1]]);
        }

        let mut vertex_faces = vec![Vec::new(); vertex_count];
        for (fi, fv) in faces.iter().enumerate() {
            for &v in fv {
                vertex_faces[v].push(fi);
            }
        }
        if vertex_faces.iter().any(|fs| fs.is_empty()) {
            return Err(SurfaceError::Disconnected);
        }

        // Breadth-first search on the dual graph; closedness is already
        // guaranteed, so face connectivity equals connectivity of the surface.
        let mut seen = vec![false; faces.len()];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(fi) = queue.pop_front() {
            let fv = faces[fi];
            for q in 0..3 {
                let (a, b) = (fv[q], fv[(q + 1) % 3]);
                let e = edge_index[&(a.min(b), a.max(b))];
                for &other in &edge_faces[e] {
                    if !seen[other] {
                        seen[other] = true;
                        reached += 1;
                        queue.push_back(other);
                    }
                }
            }
        }
        if reached != faces.len() {
            return Err(SurfaceError::Disconnected);
        }

        Ok(TriangulatedSurface {
            vertex_count,
            faces: faces.to_vec(),
            edges,
            edge_index,
            edge_faces,
            vertex_faces,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Edge endpoints in canonical `(min, max)` form, indexed by edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edge id for an endpoint pair, in either order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    /// The two faces sharing an edge.
    pub fn edge_faces(&self, edge: usize) -> [usize; 2] {
        self.edge_faces[edge]
    }

    /// Ids of all faces containing a vertex.
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }
}

#[derive(Debug, Error)]
pub enum MeshParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Build(#[from] SurfaceError),
}

/// Parses the plain-text mesh format.
///
/// The payload is a `vertices N` line, a `faces M` line, then `M` lines of
/// three vertex indices. `#` starts a comment; blank lines are ignored.
pub fn parse_mesh(text: &str) -> Result<TriangulatedSurface, MeshParseError> {
    let syntax = |line: usize, message: String| MeshParseError::Syntax { line, message };
    let mut payload = text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            None
        } else {
            Some((i + 1, body))
        }
    });

    let header = |keyword: &str,
                  item: Option<(usize, &str)>|
     -> Result<usize, MeshParseError> {
        let (line, body) =
            item.ok_or_else(|| syntax(0, format!("missing `{keyword}` header")))?;
        let mut tokens = body.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(kw), Some(n), None) if kw == keyword => n
                .parse()
                .map_err(|_| syntax(line, format!("bad count `{n}` after `{keyword}`"))),
            _ => Err(syntax(line, format!("expected `{keyword} N`, got `{body}`"))),
        }
    };

    let vertex_count = header("vertices", payload.next())?;
    let face_count = header("faces", payload.next())?;

    let mut faces = Vec::with_capacity(face_count);
    for _ in 0..face_count {
        let (line, body) = payload
            .next()
            .ok_or_else(|| syntax(0, format!("expected {face_count} faces, found {}", faces.len())))?;
        let idx: Vec<usize> = body
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| syntax(line, format!("bad vertex index `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        if idx.len() != 3 {
            return Err(syntax(
                line,
                format!("expected 3 vertex indices, got {}", idx.len()),
            ));
        }
        faces.push([idx[0], idx[1], idx[2]]);
    }
    if let Some((line, body)) = payload.next() {
        return Err(syntax(line, format!("unexpected content `{body}` after last face")));
    }

    Ok(TriangulatedSurface::new(vertex_count, &faces)?)
}

/// Faces of the boundary of a tetrahedron, the smallest closed surface.
pub fn tetrahedron_faces() -> Vec<[usize; 3]> {
    vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
}

/// Faces of the boundary of an octahedron: poles 0 and 5, equator 1..=4.
pub fn octahedron_faces() -> Vec<[usize; 3]> {
    vec![
        [0, 1, 2],
        [0, 2, 3],
        [0, 3, 4],
        [0, 4, 1],
        [5, 2, 1],
        [5, 3, 2],
        [5, 4, 3],
        [5, 1, 4],
    ]
}

/// A genus-one surface: n-by-n grid with wraparound, each square split once.
pub fn torus_faces(n: usize) -> (usize, Vec<[usize; 3]>) {
    assert!(n >= 3, "smaller grids identify edges non-manifoldly");
    let v = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut faces = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    (n * n, faces)
}
