//! Subcommand dispatch and machine-readable outputs.
//!
//! Every command reads one scene (a built-in by name, or a JSON config file),
//! computes, and writes a single CSV or JSON artifact to stdout or to a file.
//! File writes go through a temp file in the target directory so a crash never
//! leaves a half-written artifact. Outputs are deterministic for a fixed
//! config: sampling uses the scene seed and floats print in shortest
//! round-trip form.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::contact::metric_invariants;
use crate::expr::Expr;
use crate::flow::{integrate_extremal, normal_extremal};
use crate::scene::{self, Scene};
use crate::steiner;
use crate::surface::{
    a3_integrand, gauss_curvature_diagnostic, mean_curvature, riemannian_mean_curvature,
};
use crate::volume::{coarea_check, volume_series};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "srtube",
    about = "Half-tube volumes and expansion coefficients for surfaces in 3D contact sub-Riemannian geometries",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads for the quadrature pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Local invariants (chi, kappa, torsion) at seeded sample points (JSON).
    Invariants(SceneArgs),
    /// Curvature diagnostics at every patch quadrature node (CSV).
    Curvature(SceneArgs),
    /// Expansion coefficients by quadrature of the closed-form integrands (JSON).
    Coeffs(SceneArgs),
    /// Half-tube volume for every eps in the scene grid (CSV).
    Volume(SceneArgs),
    /// Quadrature coefficients against the fitted volume expansion (JSON).
    Verify(SceneArgs),
    /// Normal extremal from the patch midpoint, sampled every step (CSV).
    Geodesic(SceneArgs),
    /// Coarea identity check on a coordinate box (JSON).
    Coarea(CoareaArgs),
}

#[derive(Args)]
struct SceneArgs {
    /// Built-in scene name (run with a bogus name to list them).
    #[arg(long)]
    scene: Option<String>,
    /// Scene config file; exactly one of --scene / --config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write here instead of the config's output.path (stdout when neither is set).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Must name the command's format; present so configs can be linted.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct CoareaArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Slicing function, affine with at most two active coordinates.
    #[arg(long)]
    phi: String,
    /// Integrand weight.
    #[arg(long, default_value = "1")]
    f: String,
    /// Box bounds x0 x1 y0 y1 z0 z1.
    #[arg(long = "box", num_args = 6, allow_negative_numbers = true,
          default_values_t = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])]
    box_: Vec<f64>,
    /// Level range for the sliced side (default: the exact range of phi on the box).
    #[arg(long, num_args = 2, allow_negative_numbers = true)]
    t_range: Option<Vec<f64>>,
    /// Quadrature nodes per axis.
    #[arg(long, default_value_t = 24)]
    nodes: usize,
}

pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore failure: the pool is already built on repeated entry, and
        // results do not depend on thread count anyway.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(&cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            let body = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{body}");
            e.exit_code()
        }
    }
}

fn run(cmd: &Cmd) -> Result<()> {
    let (content, path) = dispatch(cmd)?;
    match path {
        Some(p) => write_atomic(&p, &content),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn dispatch(cmd: &Cmd) -> Result<(String, Option<PathBuf>)> {
    let (args, natural, name) = match cmd {
        Cmd::Invariants(a) => (a, "json", "invariants"),
        Cmd::Curvature(a) => (a, "csv", "curvature"),
        Cmd::Coeffs(a) => (a, "json", "coeffs"),
        Cmd::Volume(a) => (a, "csv", "volume"),
        Cmd::Verify(a) => (a, "json", "verify"),
        Cmd::Geodesic(a) => (a, "csv", "geodesic"),
        Cmd::Coarea(a) => (&a.scene, "json", "coarea"),
    };
    let scene = scene::load(
        args.scene.as_deref(),
        args.config.as_deref().and_then(Path::to_str),
    )?;
    let path = resolve_output(name, natural, args, &scene)?;
    let content = match cmd {
        Cmd::Invariants(_) => invariants_report(&scene)?,
        Cmd::Curvature(_) => curvature_report(&scene)?,
        Cmd::Coeffs(_) => coeffs_report(&scene)?,
        Cmd::Volume(_) => volume_report(&scene)?,
        Cmd::Verify(_) => verify_report(&scene)?,
        Cmd::Geodesic(_) => geodesic_report(&scene)?,
        Cmd::Coarea(a) => coarea_report(&scene, a)?,
    };
    Ok((content, path))
}

/// Each command emits one fixed format; a conflicting request is a config
/// error rather than a silent coercion.
fn resolve_output(
    cmd: &str,
    natural: &str,
    args: &SceneArgs,
    scene: &Scene,
) -> Result<Option<PathBuf>> {
    let requested = args.format.as_deref().or(scene.output.format.as_deref());
    if let Some(f) = requested {
        if f != natural {
            return Err(Error::config(format!(
                "output.format: the {cmd} command emits {natural}, not {f}"
            )));
        }
    }
    Ok(args
        .output
        .clone()
        .or_else(|| scene.output.path.as_ref().map(PathBuf::from)))
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

const INVARIANT_SAMPLES: usize = 5;

fn invariants_report(scene: &Scene) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mut points = Vec::with_capacity(INVARIANT_SAMPLES);
    for _ in 0..INVARIANT_SAMPLES {
        let x = scene.model.sample_point(&mut rng);
        let inv = metric_invariants(&scene.model, &x)?;
        points.push(json!({
            "x": x[..scene.model.dim],
            "chi": inv.chi,
            "kappa": inv.kappa,
            "tau": inv.tau,
        }));
    }
    let body = json!({"scene": scene.name, "model": scene.info, "points": points});
    Ok(format!("{body:#}\n"))
}

/// Riemannian-approximation scales reported by `curvature`, largest first so
/// adjacent columns show the convergence.
const H_EPS_SWEEP: [f64; 3] = [0.1, 0.05, 0.025];

fn curvature_report(scene: &Scene) -> Result<String> {
    let (model, surf, patch) = (&scene.model, &scene.surface, &scene.patch);
    let tol = scene.params.char_tol;
    let mut out = String::from("u1,u2,H,H_eps_0.1,H_eps_0.05,H_eps_0.025,a3_integrand,gauss_diag\n");
    for (u, _w) in patch.quad_nodes() {
        let cp = patch.point(surf, u)?;
        let h = mean_curvature(model, surf, &cp.p, tol)?;
        let mut he = [0.0; 3];
        for (i, eps) in H_EPS_SWEEP.iter().enumerate() {
            he[i] = riemannian_mean_curvature(model, surf, &cp.p, *eps, tol)?;
        }
        // The third-coefficient integrand exists only for the Popp volume;
        // density scenes leave the column empty.
        let a3 = match model.density {
            None => a3_integrand(model, surf, &cp.p, tol)?.to_string(),
            Some(_) => String::new(),
        };
        let gd = gauss_curvature_diagnostic(model, surf, &cp.p, tol)?;
        out += &format!(
            "{},{},{},{},{},{},{},{}\n",
            u[0], u[1], h, he[0], he[1], he[2], a3, gd
        );
    }
    Ok(out)
}

fn coeffs_report(scene: &Scene) -> Result<String> {
    let coef = steiner::coefficients(
        &scene.model,
        &scene.surface,
        &scene.patch,
        scene.params.char_tol,
    )?;
    let body = json!({
        "scene": scene.name,
        "model": scene.info,
        "a": [json!(coef.a1), json!(coef.a2), json!(coef.a3)],
        "quad_err": coef.quad_err,
    });
    Ok(format!("{body:#}\n"))
}

fn volume_report(scene: &Scene) -> Result<String> {
    let series = volume_series(
        &scene.model,
        &scene.surface,
        &scene.patch,
        &scene.eps,
        &scene.params,
    )?;
    let mut out = String::from("eps,vol,quad_err\n");
    for p in &series.points {
        out += &format!("{},{},{}\n", p.eps, p.vol, p.quad_err);
    }
    Ok(out)
}

fn verify_report(scene: &Scene) -> Result<String> {
    let report = steiner::verify(
        &scene.name,
        scene.info.clone(),
        &scene.model,
        &scene.surface,
        &scene.patch,
        &scene.eps,
        &scene.params,
        scene.weighted_fit,
        &scene.tolerances,
    )?;
    Ok(format!("{}\n", serde_json::to_string_pretty(&report)?))
}

fn geodesic_report(scene: &Scene) -> Result<String> {
    let (model, surf, patch) = (&scene.model, &scene.surface, &scene.patch);
    let mid = [
        0.5 * (patch.u1[0] + patch.u1[1]),
        0.5 * (patch.u2[0] + patch.u2[1]),
    ];
    let cp = patch.point(surf, mid)?;
    let start = normal_extremal(model, surf, &cp.p, scene.params.char_tol)?;
    let samples = integrate_extremal(model, start, scene.t_max, scene.params.step)?;
    let mut out = String::from(if model.dim == 3 {
        "t,x0,x1,x2,h1,h2,h0,two_H\n"
    } else {
        "t,x0,x1,x2,x3,h1,h2,h0,two_H\n"
    });
    for s in &samples {
        out += &s.t.to_string();
        for a in 0..model.dim {
            out += &format!(",{}", s.x[a]);
        }
        let two_h = s.h[0] * s.h[0] + s.h[1] * s.h[1];
        out += &format!(",{},{},{},{}\n", s.h[0], s.h[1], s.h[2], two_h);
    }
    Ok(out)
}

fn coarea_report(scene: &Scene, args: &CoareaArgs) -> Result<String> {
    let phi = Expr::parse(&args.phi)?;
    let f = Expr::parse(&args.f)?;
    let b = &args.box_;
    let bounds = [[b[0], b[1]], [b[2], b[3]], [b[4], b[5]]];
    let t_range = args.t_range.as_ref().map(|t| [t[0], t[1]]);
    let report = coarea_check(&scene.model, &phi, &f, bounds, t_range, args.nodes)?;
    let body = json!({
        "scene": scene.name,
        "model": scene.info,
        "phi": args.phi,
        "f": args.f,
        "box": bounds,
        "nodes": args.nodes,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "abs_err": report.abs_err,
        "rel_err": report.rel_err,
    });
    Ok(format!("{body:#}\n"))
}
