//! Command line interface: `check`, `geom`, `flow`, `solve`, `verify`.
//!
//! Exit codes: 0 on success, 1 when the inputs fail validation (unreadable or
//! malformed files, inadmissible schemes, infeasible targets), 2 when a
//! computation starts but fails (non-converged flows, stalled solves,
//! self-check failures).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curvature::{curvature_jacobian, face_angles, vertex_curvature};
use crate::energy::{triangle_energy, EnergyError};
use crate::flow::{
    newton_solve, run_calabi, run_extended_ricci, FlowError, FlowOptions, FlowStatus, FlowTrace,
    IntegrationMethod,
};
use crate::oracle;
use crate::surface::{parse_mesh, TriangulatedSurface};
use crate::weights::{parse_weights, validate_scheme, FaceWeights, WeightScheme};
use crate::{euclid, hyper, Background, ConformalState};

#[derive(Debug, Parser)]
#[command(
    name = "dcs",
    version,
    about = "Discrete conformal structures on closed triangulated surfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a mesh and weight scheme and classify all faces.
    Check(InstanceArgs),
    /// Print per-face geometry: lengths, angles, Q values, Jacobians.
    Geom(InstanceArgs),
    /// Integrate a curvature flow towards a target curvature.
    Flow(FlowArgs),
    /// Solve for a target curvature with Newton's method.
    Solve(SolveArgs),
    /// Run the self-check battery (finite differences, spectra, identities).
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackgroundArg {
    Euclidean,
    Hyperbolic,
}

impl From<BackgroundArg> for Background {
    fn from(b: BackgroundArg) -> Background {
        match b {
            BackgroundArg::Euclidean => Background::Euclidean,
            BackgroundArg::Hyperbolic => Background::Hyperbolic,
        }
    }
}

/// Flow choice and integrator, combined into one flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Extended Ricci flow, explicit RK4.
    Ricci,
    /// Calabi flow, explicit RK4.
    Calabi,
    /// Extended Ricci flow, implicit Euler.
    RicciImplicit,
    /// Calabi flow, implicit Euler.
    CalabiImplicit,
}

impl MethodArg {
    fn integration(self) -> IntegrationMethod {
        match self {
            MethodArg::Ricci | MethodArg::Calabi => IntegrationMethod::ExplicitRk4,
            MethodArg::RicciImplicit | MethodArg::CalabiImplicit => {
                IntegrationMethod::ImplicitEuler
            }
        }
    }

    fn is_calabi(self) -> bool {
        matches!(self, MethodArg::Calabi | MethodArg::CalabiImplicit)
    }
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Mesh file: `vertices N`, `faces M`, then M corner triples.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Weight file: `epsilon V X` and `eta I J X` lines.
    #[arg(long)]
    pub weights: PathBuf,
    /// Factor file: `f V X` lines; unlisted vertices get 0.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackgroundArg::Euclidean)]
    pub background: BackgroundArg,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Target curvature: a file of `K V X` lines, `constant`, or
    /// `constant:VALUE`.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long = "t-max", default_value_t = 500.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Ricci)]
    pub method: MethodArg,
    /// Output basename; writes BASENAME.csv (trace) and BASENAME.json
    /// (summary).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Target curvature: a file of `K V X` lines, `constant`, or
    /// `constant:VALUE`.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Output basename; writes BASENAME.json (summary).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Optional mesh to include in the checks.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub factors: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackgroundArg::Euclidean)]
    pub background: BackgroundArg,
    /// Seed of the randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Geom(args) => cmd_geom(args),
        Command::Flow(args) => cmd_flow(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// 12 significant digits, scientific notation.
fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn round12(x: f64) -> f64 {
    if x.is_finite() {
        sci(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

/// Parses `f V X` lines; vertices not listed keep factor 0.
fn parse_factors(text: &str, vertex_count: usize) -> Result<Vec<f64>, String> {
    let mut f = vec![0.0f64; vertex_count];
    let mut seen = vec![false; vertex_count];
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| format!("factors line {}: {msg}", ln + 1);
        if parts.len() != 3 || parts[0] != "f" {
            return Err(err("expected `f VERTEX VALUE`".into()));
        }
        let v: usize = parts[1]
            .parse()
            .map_err(|_| err(format!("bad vertex id {:?}", parts[1])))?;
        if v >= vertex_count {
            return Err(err(format!("vertex {v} out of range 0..{vertex_count}")));
        }
        if seen[v] {
            return Err(err(format!("duplicate factor for vertex {v}")));
        }
        let x: f64 = parts[2]
            .parse()
            .map_err(|_| err(format!("bad value {:?}", parts[2])))?;
        if !x.is_finite() {
            return Err(err(format!("factor for vertex {v} is not finite")));
        }
        seen[v] = true;
        f[v] = x;
    }
    Ok(f)
}

/// Parses `K V X` lines; every vertex must be assigned.
fn parse_target_file(text: &str, vertex_count: usize) -> Result<Vec<f64>, String> {
    let mut k = vec![0.0f64; vertex_count];
    let mut seen = vec![false; vertex_count];
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| format!("target line {}: {msg}", ln + 1);
        if parts.len() != 3 || parts[0] != "K" {
            return Err(err("expected `K VERTEX VALUE`".into()));
        }
        let v: usize = parts[1]
            .parse()
            .map_err(|_| err(format!("bad vertex id {:?}", parts[1])))?;
        if v >= vertex_count {
            return Err(err(format!("vertex {v} out of range 0..{vertex_count}")));
        }
        if seen[v] {
            return Err(err(format!("duplicate target for vertex {v}")));
        }
        let x: f64 = parts[2]
            .parse()
            .map_err(|_| err(format!("bad value {:?}", parts[2])))?;
        seen[v] = true;
        k[v] = x;
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(format!("target file assigns no curvature to vertex {v}"));
    }
    Ok(k)
}

fn load_instance(
    args: &InstanceArgs,
) -> Result<(TriangulatedSurface, WeightScheme, ConformalState), CliError> {
    let surface = parse_mesh(&read_file(&args.mesh)?).map_err(validation)?;
    let scheme = parse_weights(&read_file(&args.weights)?, &surface).map_err(validation)?;
    let f = match &args.factors {
        Some(path) => {
            parse_factors(&read_file(path)?, surface.vertex_count()).map_err(CliError::Validation)?
        }
        None => vec![0.0; surface.vertex_count()],
    };
    let state = ConformalState::new(args.background.into(), f);
    Ok((surface, scheme, state))
}

fn resolve_target(
    spec: &str,
    surface: &TriangulatedSurface,
    background: Background,
) -> Result<Vec<f64>, CliError> {
    let n = surface.vertex_count();
    if spec == "constant" {
        return match background {
            Background::Euclidean => {
                let total = 2.0 * std::f64::consts::PI * surface.euler_characteristic() as f64;
                Ok(vec![total / n as f64; n])
            }
            Background::Hyperbolic => Err(CliError::Validation(
                "hyperbolic targets have no canonical constant; use constant:VALUE or a file"
                    .into(),
            )),
        };
    }
    if let Some(value) = spec.strip_prefix("constant:") {
        let x: f64 = value
            .parse()
            .map_err(|_| CliError::Validation(format!("bad constant target {value:?}")))?;
        return Ok(vec![x; n]);
    }
    parse_target_file(&read_file(Path::new(spec))?, n).map_err(CliError::Validation)
}

fn flow_error(err: FlowError) -> CliError {
    match &err {
        FlowError::Energy(EnergyError::BadTarget { .. }) | FlowError::DegenerateStart(_) => {
            validation(err)
        }
        _ => runtime(err),
    }
}

fn cmd_check(args: &InstanceArgs) -> Result<(), CliError> {
    let (surface, scheme, state) = load_instance(args)?;
    println!(
        "surface: {} vertices, {} edges, {} faces, chi = {}",
        surface.vertex_count(),
        surface.edge_count(),
        surface.face_count(),
        surface.euler_characteristic()
    );
    let report = validate_scheme(&surface, &scheme).map_err(validation)?;
    for v in &report.edge_violations {
        println!(
            "edge condition violated on ({}, {}): {}",
            v.edge.0,
            v.edge.1,
            sci(v.value)
        );
    }
    for v in &report.corner_violations {
        println!(
            "corner condition violated at face {} corner {}: {}",
            v.face,
            v.corner,
            sci(v.value)
        );
    }
    if report.is_admissible() {
        println!("scheme: admissible");
    } else {
        println!(
            "scheme: {} edge and {} corner violations",
            report.edge_violations.len(),
            report.corner_violations.len()
        );
    }
    let mut degenerate = Vec::new();
    for (fi, &face) in surface.faces().iter().enumerate() {
        let (nondeg, _) = face_angles(&scheme, face, &state).map_err(validation)?;
        if !nondeg {
            degenerate.push(fi);
        }
    }
    println!(
        "faces: {} nondegenerate, {} degenerate",
        surface.face_count() - degenerate.len(),
        degenerate.len()
    );
    for fi in &degenerate {
        println!("degenerate face {fi}");
    }
    if report.is_admissible() && degenerate.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(
            "structure conditions or nondegeneracy failed".into(),
        ))
    }
}

fn print_triple(label: &str, v: [f64; 3]) {
    println!("  {label:<10} {} {} {}", sci(v[0]), sci(v[1]), sci(v[2]));
}

fn cmd_geom(args: &InstanceArgs) -> Result<(), CliError> {
    let (surface, scheme, state) = load_instance(args)?;
    let background: Background = args.background.into();
    for (fi, &face) in surface.faces().iter().enumerate() {
        println!("face {fi}: [{}, {}, {}]", face[0], face[1], face[2]);
        let fvals = [state.f[face[0]], state.f[face[1]], state.f[face[2]]];
        let jacobian = match background {
            Background::Euclidean => {
                let geom =
                    euclid::face_geom_e(&scheme, face, fvals.map(f64::exp)).map_err(validation)?;
                print_triple("lengths", geom.lengths);
                print_triple(
                    if geom.degenerate { "extended" } else { "angles" },
                    geom.angles,
                );
                println!("  {:<10} {}", "q_value", sci(geom.q_value));
                print_triple("h", geom.h);
                println!(
                    "  {:<10} {}",
                    "status",
                    if geom.degenerate { "degenerate" } else { "nondegenerate" }
                );
                geom.jacobian
            }
            Background::Hyperbolic => {
                let geom = hyper::face_geom_h(&scheme, face, fvals).map_err(validation)?;
                print_triple("lengths", geom.lengths);
                print_triple(
                    if geom.degenerate { "extended" } else { "angles" },
                    geom.angles,
                );
                println!("  {:<10} {}", "q_value", sci(geom.q_value));
                print_triple("h", geom.h);
                println!(
                    "  {:<10} {}",
                    "status",
                    if geom.degenerate { "degenerate" } else { "nondegenerate" }
                );
                geom.jacobian
            }
        };
        if let Some(jac) = jacobian {
            for (q, row) in jac.iter().enumerate() {
                print_triple(if q == 0 { "jacobian" } else { "" }, *row);
            }
        }
    }
    let field = vertex_curvature(&surface, &scheme, &state, true).map_err(runtime)?;
    println!(
        "curvature{}:",
        if field.used_extended { " (extended)" } else { "" }
    );
    for (v, k) in field.values.iter().enumerate() {
        println!("  K_{v} = {}", sci(*k));
    }
    println!(
        "gauss_bonnet_residual = {}",
        sci(crate::curvature::gauss_bonnet_residual(&field, &surface))
    );
    Ok(())
}

fn trace_csv(trace: &FlowTrace) -> String {
    let n = trace.states.first().map_or(0, Vec::len);
    let mut out = String::from("t,err,sum_u");
    for v in 0..n {
        out.push_str(&format!(",u_{v}"));
    }
    out.push('\n');
    for row in 0..trace.times.len() {
        out.push_str(&sci(trace.times[row]));
        out.push(',');
        out.push_str(&sci(trace.errors[row]));
        out.push(',');
        out.push_str(&sci(trace.sum_u[row]));
        for x in &trace.states[row] {
            out.push(',');
            out.push_str(&sci(*x));
        }
        out.push('\n');
    }
    out
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn summary_json(
    status: &str,
    iterations: usize,
    final_error: f64,
    wall_time_secs: f64,
    final_f: &[f64],
) -> String {
    let value = serde_json::json!({
        "status": status,
        "iterations": iterations,
        "final_error": round12(final_error),
        "wall_time_secs": round12(wall_time_secs),
        "final_f": final_f.iter().map(|x| round12(*x)).collect::<Vec<f64>>(),
    });
    let mut text = serde_json::to_string_pretty(&value).expect("summary serializes");
    text.push('\n');
    text
}

fn with_extension(base: &Path, ext: &str) -> PathBuf {
    let mut name = base.as_os_str().to_os_string();
    name.push(ext);
    PathBuf::from(name)
}

fn cmd_flow(args: &FlowArgs) -> Result<(), CliError> {
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(CliError::Validation("dt must be positive".into()));
    }
    if !(args.t_max > 0.0 && args.t_max.is_finite()) {
        return Err(CliError::Validation("t-max must be positive".into()));
    }
    if !(args.tol >= 0.0) {
        return Err(CliError::Validation("tol must be nonnegative".into()));
    }
    let (surface, scheme, state) = load_instance(&args.instance)?;
    let k_bar = resolve_target(&args.target, &surface, state.background)?;
    let opts = FlowOptions {
        dt: args.dt,
        t_max: args.t_max,
        tol: args.tol,
        method: args.method.integration(),
        ..FlowOptions::default()
    };
    let start = Instant::now();
    let trace = if args.method.is_calabi() {
        run_calabi(&surface, &scheme, &state, &k_bar, &opts)
    } else {
        run_extended_ricci(&surface, &scheme, &state, &k_bar, &opts)
    }
    .map_err(flow_error)?;
    let wall = start.elapsed().as_secs_f64();

    if let Some(out) = &args.out {
        write_output(&with_extension(out, ".csv"), &trace_csv(&trace))?;
        write_output(
            &with_extension(out, ".json"),
            &summary_json(
                &trace.status.to_string(),
                trace.steps,
                trace.final_error(),
                wall,
                &trace.final_state.f,
            ),
        )?;
    }
    println!("status: {}", trace.status);
    println!("steps: {}", trace.steps);
    println!("final_error: {}", sci(trace.final_error()));
    println!("wall_time_secs: {wall:.3}");
    for (v, f) in trace.final_state.f.iter().enumerate() {
        println!("f_{v} = {}", sci(*f));
    }
    match trace.status {
        FlowStatus::Converged => Ok(()),
        other => Err(CliError::Runtime(format!("flow ended with status {other}"))),
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    if !(args.tol >= 0.0) {
        return Err(CliError::Validation("tol must be nonnegative".into()));
    }
    let (surface, scheme, state) = load_instance(&args.instance)?;
    let k_bar = resolve_target(&args.target, &surface, state.background)?;
    let opts = FlowOptions {
        tol: args.tol,
        ..FlowOptions::default()
    };
    let start = Instant::now();
    let report = newton_solve(&surface, &scheme, &state, &k_bar, &opts).map_err(flow_error)?;
    let wall = start.elapsed().as_secs_f64();
    if let Some(out) = &args.out {
        write_output(
            &with_extension(out, ".json"),
            &summary_json(
                "converged",
                report.iterations,
                report.final_error,
                wall,
                &report.state.f,
            ),
        )?;
    }
    println!("status: converged");
    println!("iterations: {}", report.iterations);
    println!("final_error: {}", sci(report.final_error));
    println!("wall_time_secs: {wall:.3}");
    for (v, f) in report.state.f.iter().enumerate() {
        println!("f_{v} = {}", sci(*f));
    }
    Ok(())
}

// ---- verify battery -------------------------------------------------------

fn sample_euclid_face(rng: &mut ChaCha8Rng) -> Result<(FaceWeights, [f64; 3]), String> {
    for _ in 0..500 {
        let fw = oracle::random_face_weights(rng);
        let u = [
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
        ];
        if fw.quad_form(euclid::kappa_of_r(u.map(f64::exp))) > 1e-2 {
            return Ok((fw, u));
        }
    }
    Err("no nondegenerate Euclidean sample found".into())
}

fn sample_hyper_face(rng: &mut ChaCha8Rng) -> Result<(FaceWeights, [f64; 3]), String> {
    for _ in 0..500 {
        let fw = oracle::random_face_weights(rng);
        let f = [
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        ];
        if hyper::q_value_fw(&fw, f) > 1e-2 {
            return Ok((fw, f));
        }
    }
    Err("no nondegenerate hyperbolic sample found".into())
}

fn check_euclid_face_fd(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for round in 0..20 {
        let (fw, u) = sample_euclid_face(rng)?;
        let analytic = euclid::jacobian_fw(&fw, u.map(f64::exp)).map_err(|e| e.to_string())?;
        let fd = oracle::fd_jacobian(oracle::euclid_angle_map(fw), &u, 1e-6)
            .map_err(|e| e.to_string())?;
        for q in 0..3 {
            for p in 0..3 {
                let diff = (analytic[q][p] - fd[(q, p)]).abs();
                if diff > 1e-5 {
                    return Err(format!("round {round} entry ({q},{p}) off by {diff:.2e}"));
                }
            }
        }
    }
    Ok(())
}

fn check_hyper_face_fd(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for round in 0..20 {
        let (fw, f) = sample_hyper_face(rng)?;
        let analytic = hyper::jacobian_fw(&fw, f).map_err(|e| e.to_string())?;
        let mut u = [0.0; 3];
        for q in 0..3 {
            u[q] = hyper::u_of_f(f[q], fw.eps[q]);
        }
        let fd = oracle::fd_jacobian(oracle::hyper_angle_map(fw), &u, 1e-6)
            .map_err(|e| e.to_string())?;
        for q in 0..3 {
            for p in 0..3 {
                let diff = (analytic[q][p] - fd[(q, p)]).abs();
                if diff > 1e-5 {
                    return Err(format!("round {round} entry ({q},{p}) off by {diff:.2e}"));
                }
            }
        }
    }
    Ok(())
}

fn check_euclid_face_spectrum(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..20 {
        let (fw, u) = sample_euclid_face(rng)?;
        let jac = euclid::jacobian_fw(&fw, u.map(f64::exp)).map_err(|e| e.to_string())?;
        let m = DMatrix::from_fn(3, 3, |i, j| jac[i][j]);
        let (lo, hi) = oracle::min_max_eigenvalues(&m).map_err(|e| e.to_string())?;
        if hi > 1e-10 {
            return Err(format!("largest eigenvalue {hi:.2e} is positive"));
        }
        if lo >= 0.0 {
            return Err("negative-definite part missing".into());
        }
        for q in 0..3 {
            let row: f64 = jac[q].iter().sum();
            if row.abs() > 1e-10 {
                return Err(format!("row {q} sums to {row:.2e}"));
            }
        }
    }
    Ok(())
}

fn check_hyper_face_spectrum(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..20 {
        let (fw, f) = sample_hyper_face(rng)?;
        let jac = hyper::jacobian_fw(&fw, f).map_err(|e| e.to_string())?;
        let m = DMatrix::from_fn(3, 3, |i, j| jac[i][j]);
        let (_, hi) = oracle::min_max_eigenvalues(&m).map_err(|e| e.to_string())?;
        if hi >= 0.0 {
            return Err(format!("largest eigenvalue {hi:.2e} is not negative"));
        }
    }
    Ok(())
}

fn sample_state(
    rng: &mut ChaCha8Rng,
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    background: Background,
) -> Result<ConformalState, String> {
    for _ in 0..200 {
        let f: Vec<f64> = (0..surface.vertex_count())
            .map(|_| rng.gen_range(-0.3..0.3))
            .collect();
        let state = ConformalState::new(background, f);
        match crate::curvature::vertex_curvature(surface, scheme, &state, false) {
            Ok(_) => return Ok(state),
            Err(_) => continue,
        }
    }
    Err("no nondegenerate state found".into())
}

fn check_global_jacobian(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let tetra = TriangulatedSurface::new(4, &crate::surface::tetrahedron_faces()).unwrap();
    let octa = TriangulatedSurface::new(6, &crate::surface::octahedron_faces()).unwrap();
    for surface in [&tetra, &octa] {
        for _ in 0..4 {
            let scheme = oracle::random_scheme(rng, surface);
            for background in [Background::Euclidean, Background::Hyperbolic] {
                let state = sample_state(rng, surface, &scheme, background)?;
                let lambda =
                    curvature_jacobian(surface, &scheme, &state, false).map_err(|e| e.to_string())?;
                let n = surface.vertex_count();
                for i in 0..n {
                    for j in 0..i {
                        if (lambda[(i, j)] - lambda[(j, i)]).abs() > 1e-9 {
                            return Err(format!("asymmetry at ({i},{j})"));
                        }
                    }
                }
                let (lo, _) = oracle::min_max_eigenvalues(&lambda).map_err(|e| e.to_string())?;
                match background {
                    Background::Euclidean => {
                        if lo < -1e-9 {
                            return Err(format!("Euclidean eigenvalue {lo:.2e} below zero"));
                        }
                        for i in 0..n {
                            if lambda.row(i).sum().abs() > 1e-9 {
                                return Err(format!("row {i} does not annihilate the ones vector"));
                            }
                        }
                    }
                    Background::Hyperbolic => {
                        if lo <= 0.0 {
                            return Err(format!("hyperbolic eigenvalue {lo:.2e} not positive"));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_gauss_bonnet(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let tetra = TriangulatedSurface::new(4, &crate::surface::tetrahedron_faces()).unwrap();
    for _ in 0..5 {
        let scheme = oracle::random_scheme(rng, &tetra);
        let f: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let state = ConformalState::new(Background::Euclidean, f);
        let field =
            vertex_curvature(&tetra, &scheme, &state, true).map_err(|e| e.to_string())?;
        let res = crate::curvature::gauss_bonnet_residual(&field, &tetra);
        if res.abs() > 1e-10 {
            return Err(format!("Euclidean residual {res:.2e}"));
        }
    }
    // Forced degenerate configuration: the extension preserves the total.
    let strong = WeightScheme::uniform(&tetra, 1, 2.0);
    let mut f = vec![0.0; 4];
    f[0] = 0.05f64.ln();
    let state = ConformalState::new(Background::Euclidean, f);
    let field = vertex_curvature(&tetra, &strong, &state, true).map_err(|e| e.to_string())?;
    if !field.used_extended {
        return Err("expected a degenerate face in the forced sample".into());
    }
    let res = crate::curvature::gauss_bonnet_residual(&field, &tetra);
    if res.abs() > 1e-10 {
        return Err(format!("extended residual {res:.2e}"));
    }
    // Hyperbolic residual equals the total area.
    let unit = WeightScheme::uniform(&tetra, 1, 1.0);
    let state = ConformalState::flat(Background::Hyperbolic, 4);
    let field = vertex_curvature(&tetra, &unit, &state, false).map_err(|e| e.to_string())?;
    let res = crate::curvature::gauss_bonnet_residual(&field, &tetra);
    let mut area = 0.0;
    for &face in tetra.faces() {
        let geom = hyper::face_geom_h(&unit, face, [0.0; 3]).map_err(|e| e.to_string())?;
        area += geom.area.ok_or("unexpected degenerate face")?;
    }
    if (res - area).abs() > 1e-12 {
        return Err(format!("area residual mismatch: {res} vs {area}"));
    }
    Ok(())
}

fn check_path_independence(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let tetra = TriangulatedSurface::new(4, &crate::surface::tetrahedron_faces()).unwrap();
    for _ in 0..3 {
        let scheme = oracle::random_scheme(rng, &tetra);
        let face = [0, 1, 2];
        let rand3 = |rng: &mut ChaCha8Rng| {
            [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ]
        };
        let base = rand3(rng);
        let mid = rand3(rng);
        let target = rand3(rng);
        let direct = triangle_energy(&scheme, face, target, base, Background::Euclidean, true)
            .map_err(|e| e.to_string())?;
        let leg1 = triangle_energy(&scheme, face, mid, base, Background::Euclidean, true)
            .map_err(|e| e.to_string())?;
        let leg2 = triangle_energy(&scheme, face, target, mid, Background::Euclidean, true)
            .map_err(|e| e.to_string())?;
        let gap = (direct - (leg1 + leg2)).abs();
        if gap > 1e-8 {
            return Err(format!("two-leg path differs by {gap:.2e}"));
        }
    }
    Ok(())
}

fn check_region_scan(_rng: &mut ChaCha8Rng) -> Result<(), String> {
    let tetra = TriangulatedSurface::new(4, &crate::surface::tetrahedron_faces()).unwrap();
    let strong = WeightScheme::uniform(&tetra, 1, 2.0);
    let face = [0, 1, 2];

    let threshold = euclid::degenerate_interval_e(&strong, face, 0, [1.0, 1.0, 1.0])
        .map_err(|e| e.to_string())?
        .ok_or("expected a Euclidean threshold")?;
    let samples = 2000;
    let scan = oracle::scan_admissible(
        &strong,
        face,
        Background::Euclidean,
        0,
        [1.0, 1.0, 1.0],
        (0.01, 1.0),
        samples,
    )
    .map_err(|e| e.to_string())?;
    let cell = (1.0 - 0.01) / (samples - 1) as f64;
    if scan.crossings.len() != 1 {
        return Err(format!("expected one crossing, got {:?}", scan.crossings));
    }
    if (scan.crossings[0] - threshold).abs() > cell {
        return Err(format!(
            "crossing {} vs threshold {threshold}",
            scan.crossings[0]
        ));
    }

    let f_threshold = hyper::degenerate_interval_h(&strong, face, 0, [0.0, 0.0, 0.0])
        .map_err(|e| e.to_string())?
        .ok_or("expected a hyperbolic threshold")?;
    let scan = oracle::scan_admissible(
        &strong,
        face,
        Background::Hyperbolic,
        0,
        [0.0, 0.0, 0.0],
        (-4.0, 0.0),
        samples,
    )
    .map_err(|e| e.to_string())?;
    let cell = 4.0 / (samples - 1) as f64;
    if scan.crossings.len() != 1 {
        return Err(format!("expected one crossing, got {:?}", scan.crossings));
    }
    if (scan.crossings[0] - f_threshold).abs() > cell {
        return Err(format!(
            "crossing {} vs threshold {f_threshold}",
            scan.crossings[0]
        ));
    }
    Ok(())
}

fn check_h_sign_law(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for round in 0..2000 {
        let fw = oracle::random_face_weights(rng);
        let kappa = [
            rng.gen_range(-3.0..3.0f64).exp(),
            rng.gen_range(-3.0..3.0f64).exp(),
            rng.gen_range(-3.0..3.0f64).exp(),
        ];
        let h = fw.h(kappa);
        let nonpositive = h.iter().filter(|x| **x <= 0.0).count();
        if nonpositive >= 2 {
            return Err(format!("round {round}: two h values nonpositive: {h:?}"));
        }
        if fw.quad_form(kappa) <= 0.0 {
            let negative = h.iter().filter(|x| **x < 0.0).count();
            if negative != 1 {
                return Err(format!(
                    "round {round}: degenerate face with {negative} negative h values"
                ));
            }
        }
    }
    Ok(())
}

fn check_coordinate_round_trip(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..500 {
        let eps = rng.gen_range(0..=1u8);
        let f = rng.gen_range(-20.0..20.0);
        let u = hyper::u_of_f(f, eps);
        let back = hyper::f_of_u(u, eps).map_err(|e| e.to_string())?;
        if (back - f).abs() > 1e-12 * (1.0 + f.abs()) {
            return Err(format!("f = {f}, round trip gave {back}"));
        }
    }
    Ok(())
}

fn check_instance(args: &VerifyArgs) -> Result<(), String> {
    let (mesh, weights) = match (&args.mesh, &args.weights) {
        (Some(m), Some(w)) => (m, w),
        _ => return Err("verify needs both --mesh and --weights for instance checks".into()),
    };
    let instance = InstanceArgs {
        mesh: mesh.clone(),
        weights: weights.clone(),
        factors: args.factors.clone(),
        background: args.background,
    };
    let (surface, scheme, state) = load_instance(&instance).map_err(|e| e.message().to_string())?;
    let report = validate_scheme(&surface, &scheme).map_err(|e| e.to_string())?;
    if !report.is_admissible() {
        return Err(format!(
            "{} edge and {} corner violations",
            report.edge_violations.len(),
            report.corner_violations.len()
        ));
    }
    let field = vertex_curvature(&surface, &scheme, &state, true).map_err(|e| e.to_string())?;
    let residual = crate::curvature::gauss_bonnet_residual(&field, &surface);
    match state.background {
        Background::Euclidean if residual.abs() > 1e-8 => {
            Err(format!("Euclidean total curvature off by {residual:.2e}"))
        }
        Background::Hyperbolic if !field.used_extended && residual <= 0.0 => {
            Err(format!("hyperbolic residual {residual:.2e} not positive"))
        }
        _ => Ok(()),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut passes = 0usize;
    let mut failures = 0usize;
    let mut run_check = |name: &str, result: Result<(), String>| match result {
        Ok(()) => {
            passes += 1;
            println!("PASS  {name}");
        }
        Err(detail) => {
            failures += 1;
            println!("FAIL  {name}: {detail}");
        }
    };

    run_check("euclidean face jacobian vs finite differences", check_euclid_face_fd(&mut rng));
    run_check("hyperbolic face jacobian vs finite differences", check_hyper_face_fd(&mut rng));
    run_check("euclidean face jacobian spectrum", check_euclid_face_spectrum(&mut rng));
    run_check("hyperbolic face jacobian spectrum", check_hyper_face_spectrum(&mut rng));
    run_check("global curvature jacobian structure", check_global_jacobian(&mut rng));
    run_check("gauss-bonnet totals", check_gauss_bonnet(&mut rng));
    run_check("energy path independence", check_path_independence(&mut rng));
    run_check("degeneracy thresholds vs scans", check_region_scan(&mut rng));
    run_check("h sign law", check_h_sign_law(&mut rng));
    run_check("coordinate round trip", check_coordinate_round_trip(&mut rng));
    if args.mesh.is_some() || args.weights.is_some() {
        run_check("instance", check_instance(args));
    }

    println!("verify: {passes} passed, {failures} failed");
    if failures == 0 {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{failures} self-checks failed")))
    }
}
