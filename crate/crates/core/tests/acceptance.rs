//! End-to-end acceptance gates. Each test checks one shipping criterion at
//! its stated tolerance; together they cover the Jacobians, spectra,
//! degeneracy thresholds, curvature totals, energy structure, flows, solver
//! rigidity, and the h-sign law.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use discrete_conformal::curvature::{curvature_jacobian, vertex_curvature};
use discrete_conformal::energy::{ricci_energy, triangle_energy};
use discrete_conformal::flow::{
    newton_solve, run_extended_ricci, run_ordinary_ricci, FlowError, FlowOptions, FlowStatus,
};
use discrete_conformal::oracle;
use discrete_conformal::surface::{octahedron_faces, tetrahedron_faces, torus_faces, TriangulatedSurface};
use discrete_conformal::weights::{FaceWeights, WeightScheme};
use discrete_conformal::{curvature, euclid, hyper, Background, ConformalState};

const FACE: [usize; 3] = [0, 1, 2];

/// Three-vertex scheme carrying one face's weights, for the face-local API.
fn scheme_of(fw: &FaceWeights) -> WeightScheme {
    WeightScheme::new(
        fw.eps.to_vec(),
        [((1, 2), fw.eta[0]), ((0, 2), fw.eta[1]), ((0, 1), fw.eta[2])],
    )
    .unwrap()
}

fn tetra() -> TriangulatedSurface {
    TriangulatedSurface::new(4, &tetrahedron_faces()).unwrap()
}

fn octa() -> TriangulatedSurface {
    TriangulatedSurface::new(6, &octahedron_faces()).unwrap()
}

fn sample_euclid_face(rng: &mut ChaCha8Rng) -> (FaceWeights, [f64; 3]) {
    loop {
        let fw = oracle::random_face_weights(rng);
        let u = [
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
        ];
        let scheme = scheme_of(&fw);
        if euclid::q_value_e(&scheme, FACE, u.map(f64::exp)).unwrap() > 1e-2 {
            return (fw, u);
        }
    }
}

fn sample_hyper_face(rng: &mut ChaCha8Rng) -> (FaceWeights, [f64; 3]) {
    loop {
        let fw = oracle::random_face_weights(rng);
        let f = [
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        ];
        let scheme = scheme_of(&fw);
        if hyper::q_value_h(&scheme, FACE, f).unwrap() > 1e-2 {
            return (fw, f);
        }
    }
}

fn sample_state(
    rng: &mut ChaCha8Rng,
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    background: Background,
) -> ConformalState {
    loop {
        let f: Vec<f64> = (0..surface.vertex_count())
            .map(|_| rng.gen_range(-0.3..0.3))
            .collect();
        let state = ConformalState::new(background, f);
        if vertex_curvature(surface, scheme, &state, false).is_ok() {
            return state;
        }
    }
}

#[test]
fn face_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let start = Instant::now();
    for _ in 0..100 {
        let (fw, u) = sample_euclid_face(&mut rng);
        let scheme = scheme_of(&fw);
        let analytic = euclid::jacobian_e(&scheme, FACE, u.map(f64::exp)).unwrap();
        let fd = oracle::fd_jacobian(oracle::euclid_angle_map(fw), &u, 1e-6).unwrap();
        for q in 0..3 {
            for p in 0..3 {
                assert!(
                    (analytic[q][p] - fd[(q, p)]).abs() < 1e-5,
                    "euclidean entry ({q},{p}): {} vs {}",
                    analytic[q][p],
                    fd[(q, p)]
                );
            }
        }

        let (fw, f) = sample_hyper_face(&mut rng);
        let scheme = scheme_of(&fw);
        let analytic = hyper::jacobian_h(&scheme, FACE, f).unwrap();
        let u: Vec<f64> = (0..3).map(|q| hyper::u_of_f(f[q], fw.eps[q])).collect();
        let fd = oracle::fd_jacobian(oracle::hyper_angle_map(fw), &u, 1e-6).unwrap();
        for q in 0..3 {
            for p in 0..3 {
                assert!(
                    (analytic[q][p] - fd[(q, p)]).abs() < 1e-5,
                    "hyperbolic entry ({q},{p}): {} vs {}",
                    analytic[q][p],
                    fd[(q, p)]
                );
            }
        }
    }
    assert!(
        start.elapsed().as_secs_f64() < 5.0,
        "finite-difference sweep took too long"
    );
}

#[test]
fn jacobian_spectra_have_the_predicted_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    for _ in 0..40 {
        let (fw, u) = sample_euclid_face(&mut rng);
        let scheme = scheme_of(&fw);
        let jac = euclid::jacobian_e(&scheme, FACE, u.map(f64::exp)).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| jac[i][j]);
        let (eigs, vecs) = oracle::jacobi_eigen(&m).unwrap();
        assert!(eigs[2] <= 1e-10, "largest eigenvalue {} positive", eigs[2]);
        let near_zero = (0..3).min_by(|&a, &b| {
            eigs[a].abs().partial_cmp(&eigs[b].abs()).unwrap()
        })
        .unwrap();
        assert!(eigs[near_zero].abs() <= 1e-10);
        let v = vecs.column(near_zero);
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        for i in 0..3 {
            assert!(
                (v[i] - sign / 3f64.sqrt()).abs() < 1e-8,
                "kernel direction off: {v:?}"
            );
        }

        let (fw, f) = sample_hyper_face(&mut rng);
        let scheme = scheme_of(&fw);
        let jac = hyper::jacobian_h(&scheme, FACE, f).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| jac[i][j]);
        let (_, hi) = oracle::min_max_eigenvalues(&m).unwrap();
        assert!(hi < 0.0, "hyperbolic spectrum reaches {hi}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(403);
    for surface in [tetra(), octa()] {
        for _ in 0..3 {
            let scheme = oracle::random_scheme(&mut rng, &surface);
            let n = surface.vertex_count();

            let state = sample_state(&mut rng, &surface, &scheme, Background::Euclidean);
            let lambda = curvature_jacobian(&surface, &scheme, &state, false).unwrap();
            let (eigs, _) = oracle::jacobi_eigen(&lambda).unwrap();
            assert!(eigs[0].abs() < 1e-10, "Euclidean kernel eigenvalue {}", eigs[0]);
            assert!(eigs[1] > 1e-10, "rank fell below N-1: {eigs:?}");
            for i in 0..n {
                assert!(lambda.row(i).sum().abs() < 1e-10);
            }

            let state = sample_state(&mut rng, &surface, &scheme, Background::Hyperbolic);
            let lambda = curvature_jacobian(&surface, &scheme, &state, false).unwrap();
            let (lo, _) = oracle::min_max_eigenvalues(&lambda).unwrap();
            assert!(lo > 0.0, "hyperbolic global Jacobian not PD: {lo}");
        }
    }
}

#[test]
fn degeneracy_thresholds_match_sign_scans() {
    // Closed-form anchor.
    let strong = {
        let s = tetra();
        WeightScheme::uniform(&s, 1, 2.0)
    };
    let t = euclid::degenerate_interval_e(&strong, FACE, 0, [1.0, 1.0, 1.0])
        .unwrap()
        .unwrap();
    assert!((t - 6.0 / (24.0 + 18.0 * 2f64.sqrt())).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let nearest_to = |scan: &oracle::ScanResult, t: f64| {
        scan.crossings
            .iter()
            .copied()
            .min_by(|a, b| (a - t).abs().partial_cmp(&(b - t).abs()).unwrap())
    };

    let mut done = 0;
    let mut attempts = 0;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 500, "euclidean threshold sampling stalled");
        let fw = oracle::random_face_weights_with_regions(&mut rng);
        let scheme = scheme_of(&fw);
        let corner = done % 3;
        let mut r = [
            rng.gen_range(0.6..1.8),
            rng.gen_range(0.6..1.8),
            rng.gen_range(0.6..1.8),
        ];
        let t = euclid::degenerate_interval_e(&scheme, FACE, corner, r)
            .unwrap()
            .expect("coupled weights always bound a region");
        let (lo, hi) = (t * 0.2, t * 4.0);
        r[corner] = 0.0;
        let scan =
            oracle::scan_admissible(&scheme, FACE, Background::Euclidean, corner, r, (lo, hi), 4001)
                .unwrap();
        let Some(nearest) = nearest_to(&scan, t) else {
            // No admissible point in the window: the whole axis is degenerate
            // and there is no boundary for the scan to locate.
            assert!(scan.signs.iter().all(|&s| s <= 0));
            continue;
        };
        assert!(
            (nearest - t).abs() <= (hi - lo) / 1e3,
            "euclidean crossing {nearest} vs threshold {t}"
        );
        done += 1;
    }

    let mut done = 0;
    let mut attempts = 0;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 500, "hyperbolic threshold sampling stalled");
        let fw = oracle::random_face_weights_with_regions(&mut rng);
        let scheme = scheme_of(&fw);
        let corner = done % 3;
        let mut f = [
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
        ];
        let t = match hyper::degenerate_interval_h(&scheme, FACE, corner, f) {
            Ok(Some(t)) => t,
            Ok(None) => continue,
            Err(_) => continue,
        };
        let (lo, hi) = (t - 2.0, t + 2.0);
        f[corner] = 0.0;
        let scan = oracle::scan_admissible(
            &scheme,
            FACE,
            Background::Hyperbolic,
            corner,
            f,
            (lo, hi),
            4001,
        )
        .unwrap();
        let Some(nearest) = nearest_to(&scan, t) else {
            assert!(scan.signs.iter().all(|&s| s <= 0));
            continue;
        };
        assert!(
            (nearest - t).abs() <= (hi - lo) / 1e3,
            "hyperbolic crossing {nearest} vs threshold {t}"
        );
        done += 1;
    }
}

#[test]
fn total_curvature_satisfies_gauss_bonnet() {
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    let (torus_n, torus_f) = torus_faces(5);
    let torus = TriangulatedSurface::new(torus_n, &torus_f).unwrap();
    for surface in [tetra(), octa(), torus] {
        for _ in 0..3 {
            let scheme = oracle::random_scheme(&mut rng, &surface);
            let state = sample_state(&mut rng, &surface, &scheme, Background::Euclidean);
            let field = vertex_curvature(&surface, &scheme, &state, false).unwrap();
            let res = curvature::gauss_bonnet_residual(&field, &surface);
            assert!(res.abs() < 1e-10, "Euclidean residual {res}");
        }
    }

    // Extended instance with a genuinely degenerate face.
    let surface = tetra();
    let strong = WeightScheme::uniform(&surface, 1, 2.0);
    let state = ConformalState::new(Background::Euclidean, vec![0.05f64.ln(), 0.0, 0.0, 0.0]);
    let field = vertex_curvature(&surface, &strong, &state, true).unwrap();
    assert!(field.used_extended);
    let res = curvature::gauss_bonnet_residual(&field, &surface);
    assert!(res.abs() < 1e-10, "extended residual {res}");

    // Hyperbolic residual equals the summed triangle areas.
    for surface in [tetra(), octa()] {
        for _ in 0..3 {
            let scheme = oracle::random_scheme(&mut rng, &surface);
            let state = sample_state(&mut rng, &surface, &scheme, Background::Hyperbolic);
            let field = vertex_curvature(&surface, &scheme, &state, false).unwrap();
            let res = curvature::gauss_bonnet_residual(&field, &surface);
            let mut area = 0.0;
            for &face in surface.faces() {
                let fvals = [state.f[face[0]], state.f[face[1]], state.f[face[2]]];
                let geom = hyper::face_geom_h(&scheme, face, fvals).unwrap();
                area += geom.area.unwrap();
            }
            assert!(res > 0.0);
            assert!((res - area).abs() < 1e-10, "residual {res} vs area {area}");
        }
    }
}

#[test]
fn energies_are_path_independent_with_curvature_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(406);

    // Path independence on random admissible segments, both backgrounds.
    for _ in 0..5 {
        let fw = oracle::random_face_weights(&mut rng);
        let scheme = scheme_of(&fw);
        let rand3 = |rng: &mut ChaCha8Rng| {
            [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ]
        };
        let (base, mid, target) = (rand3(&mut rng), rand3(&mut rng), rand3(&mut rng));
        let direct =
            triangle_energy(&scheme, FACE, target, base, Background::Euclidean, true).unwrap();
        let leg1 = triangle_energy(&scheme, FACE, mid, base, Background::Euclidean, true).unwrap();
        let leg2 =
            triangle_energy(&scheme, FACE, target, mid, Background::Euclidean, true).unwrap();
        assert!((direct - leg1 - leg2).abs() < 1e-8);

        let randbox = |rng: &mut ChaCha8Rng, fw: &FaceWeights| {
            let mut u = [0.0; 3];
            for q in 0..3 {
                u[q] = if fw.eps[q] == 1 {
                    -rng.gen_range(0.5..1.5)
                } else {
                    rng.gen_range(-0.5..0.5)
                };
            }
            u
        };
        let (base, mid, target) = (
            randbox(&mut rng, &fw),
            randbox(&mut rng, &fw),
            randbox(&mut rng, &fw),
        );
        let direct =
            triangle_energy(&scheme, FACE, target, base, Background::Hyperbolic, true).unwrap();
        let leg1 = triangle_energy(&scheme, FACE, mid, base, Background::Hyperbolic, true).unwrap();
        let leg2 =
            triangle_energy(&scheme, FACE, target, mid, Background::Hyperbolic, true).unwrap();
        assert!((direct - leg1 - leg2).abs() < 1e-8);
    }

    // Gradient of the global energy is the curvature, both backgrounds.
    let surface = tetra();
    let scheme = WeightScheme::uniform(&surface, 1, 1.0);
    for background in [Background::Euclidean, Background::Hyperbolic] {
        let u: Vec<f64> = match background {
            Background::Euclidean => vec![0.15, -0.1, 0.05, 0.0],
            Background::Hyperbolic => vec![-1.1, -0.9, -1.2, -1.0],
        };
        let state = ConformalState::from_u_coords(background, &scheme, &u).unwrap();
        let k = vertex_curvature(&surface, &scheme, &state, false).unwrap();
        let h = 1e-6;
        for v in 0..4 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[v] += h;
            dn[v] -= h;
            let ep = ricci_energy(&surface, &scheme, &up, background, false).unwrap();
            let en = ricci_energy(&surface, &scheme, &dn, background, false).unwrap();
            let grad = (ep - en) / (2.0 * h);
            assert!(
                (grad - k.values[v]).abs() < 1e-5,
                "gradient {grad} vs curvature {}",
                k.values[v]
            );
        }
    }

    // Translation identities.
    let t = 0.3;
    let u0 = [0.1, -0.2, 0.05];
    let shifted = [u0[0] + t, u0[1] + t, u0[2] + t];
    let base = [0.0; 3];
    let e0 = triangle_energy(&scheme, FACE, u0, base, Background::Euclidean, false).unwrap();
    let e1 = triangle_energy(&scheme, FACE, shifted, base, Background::Euclidean, false).unwrap();
    assert!((e1 - e0 - t * std::f64::consts::PI).abs() < 1e-8);

    let t = 0.1;
    let u = vec![0.1, -0.05, 0.2, 0.0];
    let shifted: Vec<f64> = u.iter().map(|x| x + t).collect();
    let e0 = ricci_energy(&surface, &scheme, &u, Background::Euclidean, false).unwrap();
    let e1 = ricci_energy(&surface, &scheme, &shifted, Background::Euclidean, false).unwrap();
    assert!((e1 - e0 - 0.4 * std::f64::consts::PI).abs() < 1e-8);
}

#[test]
fn hyperbolic_solvers_reach_the_closed_form() {
    let surface = tetra();
    let scheme = WeightScheme::uniform(&surface, 1, 1.0);
    let k_bar = vec![1.5 * std::f64::consts::PI; 4];
    let expect = 0.5 * (1.0 + 3f64.sqrt()).ln();

    let state = ConformalState::flat(Background::Hyperbolic, 4);
    let start = Instant::now();
    let trace = run_extended_ricci(&surface, &scheme, &state, &k_bar, &FlowOptions::default())
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(trace.status, FlowStatus::Converged);
    assert!(trace.final_error() < 1e-9);
    assert!(elapsed < 1.0, "flow took {elapsed:.3} s");
    for &f in &trace.final_state.f {
        assert!((f - expect).abs() < 1e-6);
    }

    let report = newton_solve(&surface, &scheme, &state, &k_bar, &FlowOptions::default()).unwrap();
    assert!(report.iterations <= 10, "{} Newton iterations", report.iterations);
    assert!(report.final_error < 1e-9);
    for &f in &report.state.f {
        assert!((f - expect).abs() < 1e-6);
    }
}

#[test]
fn euclidean_flow_is_conservative_and_step_stable() {
    let surface = tetra();
    let scheme = WeightScheme::uniform(&surface, 1, 1.0);
    let k_bar = vec![std::f64::consts::PI; 4];
    let state = ConformalState::new(Background::Euclidean, vec![1.2f64.ln(), 0.0, 0.0, 0.0]);

    let run = |dt: f64| {
        let opts = FlowOptions {
            dt,
            ..FlowOptions::default()
        };
        run_extended_ricci(&surface, &scheme, &state, &k_bar, &opts).unwrap()
    };
    let a = run(0.05);
    assert_eq!(a.status, FlowStatus::Converged);
    let sum0 = a.sum_u[0];
    for &s in &a.sum_u {
        assert!((s - sum0).abs() < 1e-10, "total u drifted by {}", (s - sum0).abs());
    }
    let b = run(0.025);
    assert_eq!(b.status, FlowStatus::Converged);
    for (x, y) in a.final_state.f.iter().zip(&b.final_state.f) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn extended_flow_survives_degenerate_starts() {
    let surface = tetra();
    let strong = WeightScheme::uniform(&surface, 1, 2.0);
    let k_bar = vec![std::f64::consts::PI; 4];
    // Radius 0.05 is far below the corner threshold near 0.1213.
    let state = ConformalState::new(Background::Euclidean, vec![0.05f64.ln(), 0.0, 0.0, 0.0]);

    let err = run_ordinary_ricci(&surface, &strong, &state, &k_bar, &FlowOptions::default())
        .unwrap_err();
    assert!(matches!(
        err,
        FlowError::Curvature(discrete_conformal::curvature::CurvatureError::DegenerateFace(_))
    ));

    let trace = run_extended_ricci(&surface, &strong, &state, &k_bar, &FlowOptions::default())
        .unwrap();
    assert_eq!(trace.status, FlowStatus::Converged);
    assert!(trace.final_error() < 1e-9);
    let final_field = vertex_curvature(&surface, &strong, &trace.final_state, false).unwrap();
    assert!(!final_field.used_extended, "limit state is nondegenerate");
}

#[test]
fn solutions_are_rigid_across_starts() {
    let mut rng = ChaCha8Rng::seed_from_u64(409);
    let surface = tetra();
    let scheme = WeightScheme::uniform(&surface, 1, 1.0);

    for background in [Background::Euclidean, Background::Hyperbolic] {
        let witness = sample_state(&mut rng, &surface, &scheme, background);
        let k_bar = vertex_curvature(&surface, &scheme, &witness, false)
            .unwrap()
            .values;
        let opts = FlowOptions {
            tol: 1e-10,
            ..FlowOptions::default()
        };
        let solve_from_random = |rng: &mut ChaCha8Rng| {
            let start = sample_state(rng, &surface, &scheme, background);
            newton_solve(&surface, &scheme, &start, &k_bar, &opts)
                .unwrap()
                .state
                .f
        };
        let f1 = solve_from_random(&mut rng);
        let f2 = solve_from_random(&mut rng);
        match background {
            Background::Euclidean => {
                let m1: f64 = f1.iter().sum::<f64>() / 4.0;
                let m2: f64 = f2.iter().sum::<f64>() / 4.0;
                for (a, b) in f1.iter().zip(&f2) {
                    assert!(
                        ((a - m1) - (b - m2)).abs() < 1e-6,
                        "scale classes differ: {f1:?} vs {f2:?}"
                    );
                }
            }
            Background::Hyperbolic => {
                for (a, b) in f1.iter().zip(&f2) {
                    assert!((a - b).abs() < 1e-8, "solutions differ: {f1:?} vs {f2:?}");
                }
            }
        }
    }
}

#[test]
fn h_values_never_have_two_nonpositive_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(410);
    let mut degenerate_seen = 0usize;
    for round in 0..100_000 {
        let fw = oracle::random_face_weights(&mut rng);
        let hyperbolic = round % 2 == 1;
        let kappa = if hyperbolic {
            // Hyperbolic factors through the vertex data.
            let mut k = [0.0; 3];
            for q in 0..3 {
                k[q] = hyper::vertex_data(rng.gen_range(-3.0..3.0), fw.eps[q]).kappa;
            }
            k
        } else {
            // Euclidean factors: kappa = 1/r.
            [
                (-rng.gen_range(-3.0..3.0f64)).exp(),
                (-rng.gen_range(-3.0..3.0f64)).exp(),
                (-rng.gen_range(-3.0..3.0f64)).exp(),
            ]
        };
        let h = fw.h(kappa);
        let nonpositive = h.iter().filter(|x| **x <= 0.0).count();
        assert!(nonpositive < 2, "round {round}: h = {h:?}");
        let q = fw.quad_form(kappa) + if hyperbolic { fw.g_value() } else { 0.0 };
        if q <= 0.0 {
            degenerate_seen += 1;
            let negative = h.iter().filter(|x| **x < 0.0).count();
            assert_eq!(negative, 1, "round {round}: degenerate with h = {h:?}");
        }
    }
    assert!(
        degenerate_seen > 1000,
        "only {degenerate_seen} degenerate samples; the sweep is not exercising the law"
    );
}
