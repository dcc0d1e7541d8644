//! Scene configuration: the JSON schema with strict validation and
//! pointered error paths, the built-in scene library, and assembly into the
//! model / surface / patch / run pieces the commands consume.

use serde::{Deserialize, Serialize};

use crate::contact::{ContactModel, SampleDomain, VectorField};
use crate::expr::Expr;
use crate::steiner::{log_spaced, ModelInfo, Tolerances};
use crate::surface::{Chart, ImplicitSurface, SurfacePatch};
use crate::volume::VolumeParams;
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelConfig,
    pub surface: SurfaceConfig,
    pub patch: PatchConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// "heisenberg", "su2", "sl2", or "custom".
    pub name: String,
    /// Curvature parameter for su2 / sl2; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Density h of mu = h nu against the Popp volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    /// Transverse field normalizing the density (defaults to the Reeb field).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transverse: Option<Vec<String>>,
    /// Custom frames: three vector fields, each as coordinate components.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<[Vec<String>; 3]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub canonical_left_invariant: bool,
    /// Sample box for invariant dumps on custom models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<[[f64; 2]; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    /// "plane", "rotational", "su2_band", "sl2_branch", or "custom".
    pub kind: String,
    /// Profile coefficients for rotational graphs: z = sum g[i] r^i.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    /// Defining function for custom surfaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Co-orientation: +1 (default) or -1 for the tube on the other side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    /// Range of the chart's first parameter (r / theta / s / x).
    pub u1: [f64; 2],
    /// Range of the chart's second parameter (theta / z / y).
    pub u2: [f64; 2],
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    /// Newton seed for the custom graph chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
}

fn default_grid() -> [usize; 2] {
    [32, 32]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub eps: EpsConfig,
    pub step: f64,
    pub fd_step: f64,
    pub char_tol: f64,
    pub t_nodes: usize,
    /// Flows never exceed this time; every eps must stay below it.
    pub t_max: f64,
    pub seed: u64,
    pub weighted_fit: bool,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = VolumeParams::default();
        RunConfig {
            eps: EpsConfig::default(),
            step: p.step,
            fd_step: p.fd_step,
            char_tol: p.char_tol,
            t_nodes: p.t_nodes,
            t_max: 0.1,
            seed: 12345,
            weighted_fit: false,
            tolerances: Tolerances::default(),
        }
    }
}

/// Either an explicit eps list or a log-spaced grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsConfig {
    List(Vec<f64>),
    Log(LogGrid),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig::Log(LogGrid {
            n: 12,
            lo: 2e-3,
            hi: 5e-2,
        })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output file; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// "csv" or "json"; each command has a natural default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

/// A validated, fully assembled scene.
#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub info: ModelInfo,
    pub model: ContactModel,
    pub surface: ImplicitSurface,
    pub patch: SurfacePatch,
    pub eps: Vec<f64>,
    pub params: VolumeParams,
    pub t_max: f64,
    pub seed: u64,
    pub weighted_fit: bool,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

fn bad(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::config(format!("{path}: {msg}"))
}

impl SceneConfig {
    /// Parse a config from JSON with the error pointing into the document
    /// (field path plus line/column).
    pub fn from_json(text: &str) -> Result<SceneConfig> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| bad(&e.path().to_string(), e.inner()))
    }

    /// Validate everything and assemble the runnable scene.
    pub fn build(&self) -> Result<Scene> {
        let (model, info) = self.build_model()?;
        let (surface, chart) = self.build_surface(&model)?;

        let pc = &self.patch;
        if pc.grid[0] < 4 || pc.grid[1] < 4 {
            return Err(bad(
                "patch.grid",
                format!("each grid size must be at least 4, got {:?}", pc.grid),
            ));
        }
        for (range, path) in [(pc.u1, "patch.u1"), (pc.u2, "patch.u2")] {
            if !(range[0] < range[1]) {
                return Err(bad(path, format!("range {range:?} is empty")));
            }
        }
        if pc.z0.is_some() && self.surface.kind != "custom" {
            return Err(bad("patch.z0", "only the custom graph chart takes a seed"));
        }

        // A reversed co-orientation flips the sign of the chart's area
        // density; pairing it with the parameter-swapped chart keeps the
        // patch positively oriented. Ranges swap along with the parameters.
        let flip = self.surface.s == Some(-1.0);
        let patch = if flip {
            SurfacePatch {
                chart: Chart::Swapped(Box::new(chart)),
                u1: pc.u2,
                u2: pc.u1,
                n1: pc.grid[1],
                n2: pc.grid[0],
            }
        } else {
            SurfacePatch {
                chart,
                u1: pc.u1,
                u2: pc.u2,
                n1: pc.grid[0],
                n2: pc.grid[1],
            }
        };

        let rc = &self.run;
        for (v, path) in [
            (rc.step, "run.step"),
            (rc.fd_step, "run.fd_step"),
            (rc.char_tol, "run.char_tol"),
            (rc.t_max, "run.t_max"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(path, format!("must be positive and finite, got {v}")));
            }
        }
        if rc.t_nodes < 2 || rc.t_nodes % 2 != 0 {
            return Err(bad(
                "run.t_nodes",
                format!("must be an even number >= 2, got {}", rc.t_nodes),
            ));
        }
        let eps = match &rc.eps {
            EpsConfig::List(list) => {
                if list.is_empty() {
                    return Err(bad("run.eps", "the list is empty"));
                }
                if list[0] <= 0.0 || list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad(
                        "run.eps",
                        "values must be positive and strictly increasing",
                    ));
                }
                list.clone()
            }
            EpsConfig::Log(g) => {
                if g.n < 2 {
                    return Err(bad("run.eps.n", format!("need at least 2 values, got {}", g.n)));
                }
                if !(g.lo > 0.0 && g.lo < g.hi) {
                    return Err(bad(
                        "run.eps",
                        format!("need 0 < lo < hi, got lo = {}, hi = {}", g.lo, g.hi),
                    ));
                }
                log_spaced(g.n, g.lo, g.hi)
            }
        };
        if *eps.last().unwrap() > rc.t_max {
            return Err(bad(
                "run.eps",
                format!(
                    "largest value {} exceeds run.t_max = {}",
                    eps.last().unwrap(),
                    rc.t_max
                ),
            ));
        }
        let t = &rc.tolerances;
        for (v, path) in [
            (t.a1_rel, "run.tolerances.a1_rel"),
            (t.a2_rel_a1, "run.tolerances.a2_rel_a1"),
            (t.a2_rel_self, "run.tolerances.a2_rel_self"),
            (t.a3_rel_a1, "run.tolerances.a3_rel_a1"),
            (t.a3_rel_self, "run.tolerances.a3_rel_self"),
        ] {
            if !(v > 0.0) {
                return Err(bad(path, format!("must be positive, got {v}")));
            }
        }
        if let Some(f) = &self.output.format {
            if f != "csv" && f != "json" {
                return Err(bad(
                    "output.format",
                    format!("expected \"csv\" or \"json\", got \"{f}\""),
                ));
            }
        }

        Ok(Scene {
            name: self.name.clone().unwrap_or_else(|| "scene".into()),
            info,
            model,
            surface,
            patch,
            eps,
            params: VolumeParams {
                step: rc.step,
                fd_step: rc.fd_step,
                char_tol: rc.char_tol,
                t_nodes: rc.t_nodes,
            },
            t_max: rc.t_max,
            seed: rc.seed,
            weighted_fit: rc.weighted_fit,
            tolerances: rc.tolerances,
            output: self.output.clone(),
        })
    }

    fn build_model(&self) -> Result<(ContactModel, ModelInfo)> {
        let mc = &self.model;
        let k = mc.k.unwrap_or(1.0);
        let mut info = ModelInfo {
            name: mc.name.clone(),
            k: None,
            density: mc.density.clone(),
        };
        let mut model = match mc.name.as_str() {
            "heisenberg" => {
                if mc.k.is_some() {
                    return Err(bad("model.k", "heisenberg takes no curvature parameter"));
                }
                ContactModel::heisenberg()
            }
            "su2" | "sl2" => {
                if !(k > 0.0) {
                    return Err(bad("model.k", format!("must be positive, got {k}")));
                }
                info.k = Some(k);
                if mc.name == "su2" {
                    ContactModel::su2(k)
                } else {
                    ContactModel::sl2(k)
                }
            }
            "custom" => self.build_custom_model()?,
            other => {
                return Err(bad(
                    "model.name",
                    format!("unknown model \"{other}\" (heisenberg, su2, sl2, custom)"),
                ));
            }
        };
        if mc.name != "custom" {
            if mc.frame.is_some() {
                return Err(bad("model.frame", "frames are only for custom models"));
            }
            if mc.sample_box.is_some() {
                return Err(bad("model.sample_box", "only custom models take a sample box"));
            }
            if mc.canonical_left_invariant {
                return Err(bad(
                    "model.canonical_left_invariant",
                    "built-in models already declare their structure",
                ));
            }
        }
        if let Some(h) = &mc.density {
            let h = Expr::parse(h).map_err(|e| bad("model.density", e))?;
            let transverse = match &mc.transverse {
                None => None,
                Some(comps) => {
                    if comps.len() != model.dim {
                        return Err(bad(
                            "model.transverse",
                            format!("expected {} components, got {}", model.dim, comps.len()),
                        ));
                    }
                    let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
                    Some(VectorField::parse(&refs).map_err(|e| bad("model.transverse", e))?)
                }
            };
            model = model.with_density(h, transverse);
        } else if mc.transverse.is_some() {
            return Err(bad(
                "model.transverse",
                "a transverse field is only meaningful together with a density",
            ));
        }
        Ok((model, info))
    }

    fn build_custom_model(&self) -> Result<ContactModel> {
        let mc = &self.model;
        let frame_cfg = mc
            .frame
            .as_ref()
            .ok_or_else(|| bad("model.frame", "custom models need three frame fields"))?;
        let dim = frame_cfg[0].len();
        if dim != 3 {
            return Err(bad(
                "model.frame",
                format!(
                    "custom frames are three-coordinate (the embedded models are built in), got {dim} components"
                ),
            ));
        }
        let mut fields = Vec::with_capacity(3);
        for (i, comps) in frame_cfg.iter().enumerate() {
            if comps.len() != dim {
                return Err(bad(
                    &format!("model.frame[{i}]"),
                    format!("expected {dim} components, got {}", comps.len()),
                ));
            }
            let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
            fields.push(
                VectorField::parse(&refs).map_err(|e| bad(&format!("model.frame[{i}]"), e))?,
            );
        }
        let sample_box = mc.sample_box.unwrap_or([[-1.0, 1.0]; 3]);
        for (i, r) in sample_box.iter().enumerate() {
            if !(r[0] < r[1]) {
                return Err(bad(
                    &format!("model.sample_box[{i}]"),
                    format!("range {r:?} is empty"),
                ));
            }
        }
        let mut it = fields.into_iter();
        Ok(ContactModel {
            name: "custom".into(),
            dim,
            frame: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
            constraint: None,
            density: None,
            transverse: None,
            canonical_left_invariant: mc.canonical_left_invariant,
            sample_domain: SampleDomain::Box(sample_box),
        })
    }

    fn build_surface(&self, model: &ContactModel) -> Result<(ImplicitSurface, Chart)> {
        let sc = &self.surface;
        let s = sc.s.unwrap_or(1.0);
        if s != 1.0 && s != -1.0 {
            return Err(bad("surface.s", format!("must be +1 or -1, got {s}")));
        }
        let needs_3d = |kind: &str| -> Result<()> {
            if model.dim != 3 {
                return Err(bad(
                    "surface.kind",
                    format!("\"{kind}\" graphs live in three-coordinate models, not {}", model.name),
                ));
            }
            Ok(())
        };
        let no_field = |val: bool, path: &str, msg: &str| -> Result<()> {
            if val {
                return Err(bad(path, msg));
            }
            Ok(())
        };
        let (surf, chart) = match sc.kind.as_str() {
            "plane" => {
                needs_3d("plane")?;
                no_field(sc.g.is_some(), "surface.g", "the plane has no profile; use rotational")?;
                no_field(sc.f.is_some(), "surface.f", "the plane is built in")?;
                (
                    ImplicitSurface::rotational(&[]),
                    Chart::Rotational { g: vec![] },
                )
            }
            "rotational" => {
                needs_3d("rotational")?;
                no_field(sc.f.is_some(), "surface.f", "rotational surfaces come from g")?;
                let g = sc
                    .g
                    .clone()
                    .ok_or_else(|| bad("surface.g", "rotational surfaces need profile coefficients"))?;
                (ImplicitSurface::rotational(&g), Chart::Rotational { g })
            }
            "su2_band" => {
                if model.name != "su2" {
                    return Err(bad("surface.kind", "su2_band needs the su2 model"));
                }
                no_field(sc.g.is_some(), "surface.g", "the band has no profile")?;
                no_field(sc.f.is_some(), "surface.f", "the band is built in")?;
                if self.patch.u2[0] <= -1.0 || self.patch.u2[1] >= 1.0 {
                    return Err(bad("patch.u2", "the band chart needs |z| < 1"));
                }
                (
                    ImplicitSurface::new(Expr::parse("w").unwrap(), 1.0)?,
                    Chart::Su2Band,
                )
            }
            "sl2_branch" => {
                if model.name != "sl2" {
                    return Err(bad("surface.kind", "sl2_branch needs the sl2 model"));
                }
                no_field(sc.g.is_some(), "surface.g", "the branch has no profile")?;
                no_field(sc.f.is_some(), "surface.f", "the branch is built in")?;
                (
                    ImplicitSurface::new(Expr::parse("y - z").unwrap(), 1.0)?,
                    Chart::Sl2Branch,
                )
            }
            "custom" => {
                needs_3d("custom")?;
                no_field(sc.g.is_some(), "surface.g", "custom surfaces come from f")?;
                let f = sc
                    .f
                    .as_ref()
                    .ok_or_else(|| bad("surface.f", "custom surfaces need a defining function"))?;
                let f = Expr::parse(f).map_err(|e| bad("surface.f", e))?;
                (
                    ImplicitSurface::new(f, 1.0)?,
                    Chart::GraphZ {
                        z0: self.patch.z0.unwrap_or(0.0),
                    },
                )
            }
            other => {
                return Err(bad(
                    "surface.kind",
                    format!(
                        "unknown kind \"{other}\" (plane, rotational, su2_band, sl2_branch, custom)"
                    ),
                ));
            }
        };
        Ok((if s < 0.0 { surf.flipped() } else { surf }, chart))
    }
}

/// Built-in scene source by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Names of the built-in scenes, in presentation order.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

static BUILTINS: [(&str, &str); 5] = [
    (
        "heisenberg-plane-annulus",
        include_str!("../scenes/heisenberg-plane-annulus.json"),
    ),
    (
        "heisenberg-paraboloid-band",
        include_str!("../scenes/heisenberg-paraboloid-band.json"),
    ),
    (
        "heisenberg-cubic-band",
        include_str!("../scenes/heisenberg-cubic-band.json"),
    ),
    ("su2-band", include_str!("../scenes/su2-band.json")),
    ("sl2-patch", include_str!("../scenes/sl2-patch.json")),
];

/// Load a built-in scene or a config file path, in that order of precedence.
pub fn load(scene: Option<&str>, config_path: Option<&str>) -> Result<Scene> {
    let text = match (scene, config_path) {
        (Some(name), None) => builtin(name)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown scene \"{name}\"; built-ins: {}",
                    builtin_names().join(", ")
                ))
            })?
            .to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)?,
        _ => {
            return Err(Error::config(
                "pass exactly one of --scene NAME or --config PATH",
            ));
        }
    };
    SceneConfig::from_json(&text)?.build()
}
