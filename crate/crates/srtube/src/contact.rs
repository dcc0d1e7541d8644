//! Contact sub-Riemannian models: an orthonormal horizontal frame `X1, X2`
//! and the Reeb field `X0` on a 3-dimensional manifold, given either in
//! global coordinates or embedded in R^4 through a constraint.
//!
//! Conventions. Structure constants follow
//!
//! ```text
//! [X2, X1] = c1_12 X1 + c2_12 X2 + c0_12 X0      (c0_12 = 1)
//! [X1, X0] = c1_01 X1 + c2_01 X2
//! [X2, X0] = c1_02 X1 + c2_02 X2
//! ```
//!
//! so `c^k_ij` is the `X_k` component of the bracket whose *second* index
//! names the first argument. The torsion matrix, the invariants `chi` and
//! `kappa`, and the divergence pair below are all written in terms of these.

use crate::expr::Expr;
use crate::jet::{Jet1, Jet2, Scalar, DIM};
use crate::linalg::{det3, det4, solve};
use crate::{Error, Result};
use rand::Rng;

pub const FRAME_NAMES: [&str; 3] = ["X1", "X2", "X0"];

/// A vector field with expression-valued coordinate components.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub comp: [Expr; DIM],
}

impl VectorField {
    pub fn parse(comps: &[&str]) -> Result<VectorField> {
        if comps.len() != 3 && comps.len() != 4 {
            return Err(Error::config(format!(
                "a vector field needs 3 or 4 components, got {}",
                comps.len()
            )));
        }
        let mut out = [Expr::num(0.0), Expr::num(0.0), Expr::num(0.0), Expr::num(0.0)];
        for (i, c) in comps.iter().enumerate() {
            out[i] = Expr::parse(c)?;
        }
        Ok(VectorField { comp: out })
    }

    pub fn values(&self, p: &[f64; DIM]) -> Result<[f64; DIM]> {
        Ok([
            self.comp[0].eval(p)?,
            self.comp[1].eval(p)?,
            self.comp[2].eval(p)?,
            self.comp[3].eval(p)?,
        ])
    }

    pub fn jet1(&self, p: &[f64; DIM]) -> Result<[Jet1; DIM]> {
        Ok([
            self.comp[0].eval(p)?,
            self.comp[1].eval(p)?,
            self.comp[2].eval(p)?,
            self.comp[3].eval(p)?,
        ])
    }

    pub fn jet2(&self, p: &[f64; DIM]) -> Result<[Jet2; DIM]> {
        Ok([
            self.comp[0].eval(p)?,
            self.comp[1].eval(p)?,
            self.comp[2].eval(p)?,
            self.comp[3].eval(p)?,
        ])
    }

    /// Apply the field to a first-order jet: X(f) = sum_a X^a d_a f.
    pub fn apply(&self, p: &[f64; DIM], fj: &Jet1) -> Result<f64> {
        let v = self.values(p)?;
        Ok((0..DIM).map(|a| v[a] * fj.g[a]).sum())
    }
}

/// How points are brought back onto an embedding constraint after a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Scale the point onto a sphere-like level set (|x| normalization).
    Sphere,
    /// Newton steps along the constraint gradient.
    Newton,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub phi: Expr,
    pub projection: Projection,
}

/// Where random sample points live (self-checks, invariant dumps).
#[derive(Clone, Debug)]
pub enum SampleDomain {
    Box([[f64; 2]; 3]),
    /// Unit sphere in R^4.
    UnitSphere,
    /// The sheet x w - y z = 1 with x, w > 0.
    QuadricSheet,
}

#[derive(Clone, Debug)]
pub struct ContactModel {
    pub name: String,
    /// Number of ambient coordinates (3 for charts, 4 for embedded models).
    pub dim: usize,
    /// X1, X2 (horizontal, orthonormal) and X0 (Reeb).
    pub frame: [VectorField; 3],
    pub constraint: Option<Constraint>,
    /// Density h of the measure mu = h nu against the Popp volume; None = Popp.
    pub density: Option<Expr>,
    /// Transverse field with mu(X1, X2, Xtheta) = 1; defaults to X0 under Popp.
    pub transverse: Option<VectorField>,
    /// Whether X1, X2 is a canonical basis of a left-invariant structure
    /// ([X1,X0] along X2, [X2,X0] along X1), enabling the specialized
    /// third-coefficient integrand.
    pub canonical_left_invariant: bool,
    pub sample_domain: SampleDomain,
}

impl ContactModel {
    /// Heisenberg group in exponential coordinates: X1 = dx + (y/2) dz,
    /// X2 = dy - (x/2) dz, X0 = dz.
    pub fn heisenberg() -> ContactModel {
        let f = |comps: &[&str]| VectorField::parse(comps).unwrap();
        ContactModel {
            name: "heisenberg".into(),
            dim: 3,
            frame: [
                f(&["1", "0", "y / 2"]),
                f(&["0", "1", "-x / 2"]),
                f(&["0", "0", "1"]),
            ],
            constraint: None,
            density: None,
            transverse: None,
            canonical_left_invariant: true,
            sample_domain: SampleDomain::Box([[-1.2, 1.2]; 3]),
        }
    }

    /// SU(2) as the unit sphere in R^4 with a one-parameter family of
    /// left-invariant structures; kappa = 4 k^2, chi = 0.
    pub fn su2(k: f64) -> ContactModel {
        assert!(k > 0.0 && k.is_finite(), "su2 parameter k must be positive");
        let f = |comps: [String; 4]| VectorField {
            comp: comps.map(|c| Expr::parse(&c).unwrap()),
        };
        let kk = 2.0 * k * k;
        ContactModel {
            name: "su2".into(),
            dim: 4,
            frame: [
                f([
                    format!("({k}) * z"),
                    format!("-({k}) * w"),
                    format!("-({k}) * x"),
                    format!("({k}) * y"),
                ]),
                f([
                    format!("({k}) * w"),
                    format!("({k}) * z"),
                    format!("-({k}) * y"),
                    format!("-({k}) * x"),
                ]),
                f([
                    format!("-({kk}) * y"),
                    format!("({kk}) * x"),
                    format!("-({kk}) * w"),
                    format!("({kk}) * z"),
                ]),
            ],
            constraint: Some(Constraint {
                phi: Expr::parse("x*x + y*y + z*z + w*w - 1").unwrap(),
                projection: Projection::Sphere,
            }),
            density: None,
            transverse: None,
            canonical_left_invariant: true,
            sample_domain: SampleDomain::UnitSphere,
        }
    }

    /// SL(2) realized on the quadric x w - y z = 1; kappa = -4 k^2, chi = 0.
    pub fn sl2(k: f64) -> ContactModel {
        assert!(k > 0.0 && k.is_finite(), "sl2 parameter k must be positive");
        let f = |comps: [String; 4]| VectorField {
            comp: comps.map(|c| Expr::parse(&c).unwrap()),
        };
        let kk = 2.0 * k * k;
        ContactModel {
            name: "sl2".into(),
            dim: 4,
            frame: [
                f([
                    format!("({k}) * y"),
                    format!("({k}) * x"),
                    format!("({k}) * w"),
                    format!("({k}) * z"),
                ]),
                f([
                    format!("({k}) * x"),
                    format!("-({k}) * y"),
                    format!("({k}) * z"),
                    format!("-({k}) * w"),
                ]),
                f([
                    format!("-({kk}) * y"),
                    format!("({kk}) * x"),
                    format!("-({kk}) * w"),
                    format!("({kk}) * z"),
                ]),
            ],
            constraint: Some(Constraint {
                phi: Expr::parse("x*w - y*z - 1").unwrap(),
                projection: Projection::Newton,
            }),
            density: None,
            transverse: None,
            canonical_left_invariant: true,
            sample_domain: SampleDomain::QuadricSheet,
        }
    }

    /// Replace the Popp volume by mu = h nu. The transverse field, when
    /// given, must satisfy mu(X1, X2, Xtheta) = 1; it enables the
    /// cross-checked divergence path.
    pub fn with_density(mut self, h: Expr, transverse: Option<VectorField>) -> ContactModel {
        self.density = Some(h);
        self.transverse = transverse;
        self
    }

    pub fn density_jet1(&self, p: &[f64; DIM]) -> Result<Jet1> {
        match &self.density {
            None => Ok(Jet1::constant(1.0)),
            Some(h) => h.eval(p),
        }
    }

    pub fn density_value(&self, p: &[f64; DIM]) -> Result<f64> {
        match &self.density {
            None => Ok(1.0),
            Some(h) => h.eval(p),
        }
    }

    pub fn frame_values(&self, p: &[f64; DIM]) -> Result<[[f64; DIM]; 3]> {
        Ok([
            self.frame[0].values(p)?,
            self.frame[1].values(p)?,
            self.frame[2].values(p)?,
        ])
    }

    pub fn frame_jet1(&self, p: &[f64; DIM]) -> Result<[[Jet1; DIM]; 3]> {
        Ok([
            self.frame[0].jet1(p)?,
            self.frame[1].jet1(p)?,
            self.frame[2].jet1(p)?,
        ])
    }

    pub fn frame_jet2(&self, p: &[f64; DIM]) -> Result<[[Jet2; DIM]; 3]> {
        Ok([
            self.frame[0].jet2(p)?,
            self.frame[1].jet2(p)?,
            self.frame[2].jet2(p)?,
        ])
    }

    /// Constraint gradient as a first-order jet (None for 3D charts).
    pub fn constraint_grad(&self, p: &[f64; DIM]) -> Result<Option<[Jet1; DIM]>> {
        match &self.constraint {
            None => Ok(None),
            Some(c) => {
                let phi: Jet2 = c.phi.eval(p)?;
                let mut g = [Jet1::ZERO; DIM];
                for a in 0..DIM {
                    g[a] = Jet1::new(phi.g[a], phi.h[a]);
                }
                Ok(Some(g))
            }
        }
    }

    /// Residual of the embedding constraint (0 for 3D charts).
    pub fn constraint_residual(&self, p: &[f64; DIM]) -> Result<f64> {
        match &self.constraint {
            None => Ok(0.0),
            Some(c) => Ok(c.phi.eval::<f64>(p)?.abs()),
        }
    }

    /// Bring a drifted point back onto the constraint set.
    pub fn project(&self, x: &mut [f64; DIM]) -> Result<()> {
        let Some(c) = &self.constraint else {
            return Ok(());
        };
        match c.projection {
            Projection::Sphere => {
                let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n < 1e-12 {
                    return Err(Error::domain("sphere projection of near-zero point"));
                }
                for v in x.iter_mut() {
                    *v /= n;
                }
            }
            Projection::Newton => {
                for _ in 0..3 {
                    let phi: Jet1 = c.phi.eval(x)?;
                    if phi.v.abs() < 1e-14 {
                        break;
                    }
                    let g2: f64 = phi.g.iter().map(|g| g * g).sum();
                    if g2 < 1e-12 {
                        return Err(Error::domain(
                            "constraint gradient vanishes during projection",
                        ));
                    }
                    for a in 0..DIM {
                        x[a] -= phi.v * phi.g[a] / g2;
                    }
                }
            }
        }
        Ok(())
    }

    /// Volume density of the Popp volume against Lebesgue measure of the
    /// chart/ambient coordinates: nu = |det[X1 X2 X0 (grad phi)]|^{-1} with
    /// the gradient column only in the embedded case (where it measures
    /// volume transverse to the manifold; callers only use ratios there).
    pub fn frame_det(&self, p: &[f64; DIM]) -> Result<f64> {
        let f = self.frame_values(p)?;
        let det = if self.dim == 3 {
            det3([
                [f[0][0], f[1][0], f[2][0]],
                [f[0][1], f[1][1], f[2][1]],
                [f[0][2], f[1][2], f[2][2]],
            ])
        } else {
            let g = self
                .constraint_grad(p)?
                .ok_or_else(|| Error::domain("4D model without constraint"))?;
            let mut m = [[0.0; 4]; 4];
            for r in 0..4 {
                for c in 0..3 {
                    m[r][c] = f[c][r];
                }
                m[r][3] = g[r].v;
            }
            det4(m)
        };
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateFrame { point: *p, det });
        }
        Ok(det)
    }

    /// Seeded random point in the model's sample domain.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> [f64; 4] {
        match &self.sample_domain {
            SampleDomain::Box(b) => [
                rng.random_range(b[0][0]..b[0][1]),
                rng.random_range(b[1][0]..b[1][1]),
                rng.random_range(b[2][0]..b[2][1]),
                0.0,
            ],
            SampleDomain::UnitSphere => loop {
                let mut x = [0.0; 4];
                let mut n2 = 0.0;
                for v in x.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                    n2 += *v * *v;
                }
                if n2 > 1e-3 && n2 <= 1.0 {
                    let n = n2.sqrt();
                    break x.map(|v| v / n);
                }
            },
            SampleDomain::QuadricSheet => {
                let y = rng.random_range(-0.8..0.8);
                let z = rng.random_range(-0.8..0.8);
                let s = rng.random_range(-0.7..0.7);
                let c = (1.0 + y * z).sqrt();
                [c * (-s).exp(), y, z, c * s.exp()]
            }
        }
    }
}

/// Decompose a coordinate vector in the frame (plus the constraint normal in
/// the embedded case). Returns the three frame components and the size of the
/// normal part, which must vanish for tangent vectors.
pub fn decompose(
    model: &ContactModel,
    frames: &[[f64; DIM]; 3],
    grad_phi: Option<&[f64; DIM]>,
    v: [f64; DIM],
) -> Result<([f64; 3], f64)> {
    if model.dim == 3 {
        let a = [
            [frames[0][0], frames[1][0], frames[2][0]],
            [frames[0][1], frames[1][1], frames[2][1]],
            [frames[0][2], frames[1][2], frames[2][2]],
        ];
        let x = solve::<f64, 3>(a, [v[0], v[1], v[2]])?;
        Ok((x, 0.0))
    } else {
        let g = grad_phi.ok_or_else(|| Error::domain("missing constraint gradient"))?;
        let mut a = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..3 {
                a[r][c] = frames[c][r];
            }
            a[r][3] = g[r];
        }
        let x = solve::<f64, 4>(a, v)?;
        let gnorm = g.iter().map(|t| t * t).sum::<f64>().sqrt();
        Ok(([x[0], x[1], x[2]], (x[3] * gnorm).abs()))
    }
}

/// Jet-valued variant of [`decompose`]: carries coordinate gradients of the
/// components through the solve. Only the value part of the normal component
/// is reported.
pub fn decompose_jet1(
    model: &ContactModel,
    frames: &[[Jet1; DIM]; 3],
    grad_phi: Option<&[Jet1; DIM]>,
    v: [Jet1; DIM],
) -> Result<([Jet1; 3], f64)> {
    if model.dim == 3 {
        let a = [
            [frames[0][0], frames[1][0], frames[2][0]],
            [frames[0][1], frames[1][1], frames[2][1]],
            [frames[0][2], frames[1][2], frames[2][2]],
        ];
        let x = solve::<Jet1, 3>(a, [v[0], v[1], v[2]])?;
        Ok((x, 0.0))
    } else {
        let g = grad_phi.ok_or_else(|| Error::domain("missing constraint gradient"))?;
        let mut a = [[Jet1::ZERO; 4]; 4];
        for r in 0..4 {
            for c in 0..3 {
                a[r][c] = frames[c][r];
            }
            a[r][3] = g[r];
        }
        let x = solve::<Jet1, 4>(a, v)?;
        let gnorm = g.iter().map(|t| t.v * t.v).sum::<f64>().sqrt();
        Ok(([x[0], x[1], x[2]], (x[3].v * gnorm).abs()))
    }
}

/// Components of `[W, V]` as first-order jets: [V, W] evaluated with the
/// arguments swapped to match the `c^k_ij = <w^k, [X_j, X_i]>` convention
/// is up to the caller; this computes the literal bracket [V, W].
pub fn bracket_jet1(
    v: &[Jet2; DIM],
    w: &[Jet2; DIM],
) -> [Jet1; DIM] {
    let mut out = [Jet1::ZERO; DIM];
    for a in 0..DIM {
        let mut acc = Jet1::ZERO;
        for b in 0..DIM {
            // V^b d_b W^a - W^b d_b V^a, each factor as a Jet1.
            let vb = v[b].lower();
            let wb = w[b].lower();
            let dwa = Jet1::new(w[a].g[b], w[a].h[b]);
            let dva = Jet1::new(v[a].g[b], v[a].h[b]);
            acc = acc + vb * dwa - wb * dva;
        }
        out[a] = acc;
    }
    out
}

/// Structure constants at a point (values), in the convention of the module
/// docs: `c12[k]` is the X_k component of [X2, X1], `c01[k]` of [X1, X0],
/// `c02[k]` of [X2, X0].
#[derive(Clone, Copy, Debug)]
pub struct StructureConstants {
    pub c12: [f64; 3],
    pub c01: [f64; 3],
    pub c02: [f64; 3],
    /// Largest normal (off-manifold) component over the three brackets.
    pub residual: f64,
}

/// Structure constants with coordinate gradients.
#[derive(Clone, Copy, Debug)]
pub struct StructureConstantsJet {
    pub c12: [Jet1; 3],
    pub c01: [Jet1; 3],
    pub c02: [Jet1; 3],
    pub residual: f64,
}

impl StructureConstantsJet {
    pub fn values(&self) -> StructureConstants {
        StructureConstants {
            c12: self.c12.map(|j| j.v),
            c01: self.c01.map(|j| j.v),
            c02: self.c02.map(|j| j.v),
            residual: self.residual,
        }
    }
}

pub fn structure_constants_jet(
    model: &ContactModel,
    p: &[f64; DIM],
) -> Result<StructureConstantsJet> {
    let f2 = model.frame_jet2(p)?;
    let f1 = [
        f2[0].map(|j| j.lower()),
        f2[1].map(|j| j.lower()),
        f2[2].map(|j| j.lower()),
    ];
    let grad = model.constraint_grad(p)?;
    // [X2, X1], [X1, X0], [X2, X0] per the index convention.
    let b12 = bracket_jet1(&f2[1], &f2[0]);
    let b01 = bracket_jet1(&f2[0], &f2[2]);
    let b02 = bracket_jet1(&f2[1], &f2[2]);
    let (c12, r12) = decompose_jet1(model, &f1, grad.as_ref(), b12)?;
    let (c01, r01) = decompose_jet1(model, &f1, grad.as_ref(), b01)?;
    let (c02, r02) = decompose_jet1(model, &f1, grad.as_ref(), b02)?;
    Ok(StructureConstantsJet {
        c12,
        c01,
        c02,
        residual: r12.max(r01).max(r02),
    })
}

pub fn structure_constants(model: &ContactModel, p: &[f64; DIM]) -> Result<StructureConstants> {
    Ok(structure_constants_jet(model, p)?.values())
}

/// Frame derivative of a jet-valued scalar: X_i(c) from the value gradient.
fn frame_derivative(frame_vals: &[[f64; DIM]; 3], i: usize, c: &Jet1) -> f64 {
    (0..DIM).map(|a| frame_vals[i][a] * c.g[a]).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct MetricInvariants {
    pub chi: f64,
    pub kappa: f64,
    pub tau: [[f64; 2]; 2],
    pub constants: StructureConstants,
}

const STRUCTURE_TOL: f64 = 1e-8;

fn validate_contact(p: &[f64; DIM], sc: &StructureConstants) -> Result<()> {
    let checks = [
        ("X0 component of [X2, X1] must be 1", (sc.c12[2] - 1.0).abs()),
        ("[X1, X0] must have no X0 component", sc.c01[2].abs()),
        ("[X2, X0] must have no X0 component", sc.c02[2].abs()),
        (
            "torsion matrix must be trace-free (Reeb flow preserves the Popp volume)",
            (sc.c01[0] + sc.c02[1]).abs(),
        ),
        ("brackets must be tangent to the constraint set", sc.residual),
    ];
    for (msg, err) in checks {
        if !(err <= STRUCTURE_TOL) {
            return Err(Error::InvalidStructure {
                point: *p,
                msg: format!("{msg} (violation {err:.3e})"),
            });
        }
    }
    Ok(())
}

/// The local invariants chi and kappa together with the torsion matrix.
pub fn metric_invariants(model: &ContactModel, p: &[f64; DIM]) -> Result<MetricInvariants> {
    let scj = structure_constants_jet(model, p)?;
    let sc = scj.values();
    validate_contact(p, &sc)?;
    let tau = torsion_from(&sc);
    let minus_det = tau[0][1] * tau[1][0] - tau[0][0] * tau[1][1];
    let scale = 1.0 + tau.iter().flatten().map(|t| t * t).sum::<f64>();
    if minus_det < -1e-9 * scale {
        return Err(Error::InvalidStructure {
            point: *p,
            msg: format!("torsion matrix has positive determinant {:.3e}", -minus_det),
        });
    }
    let chi = minus_det.max(0.0).sqrt();
    let fv = model.frame_values(p)?;
    let kappa = frame_derivative(&fv, 1, &scj.c12[0]) - frame_derivative(&fv, 0, &scj.c12[1])
        - sc.c12[0] * sc.c12[0]
        - sc.c12[1] * sc.c12[1]
        + 0.5 * (sc.c01[1] - sc.c02[0]);
    Ok(MetricInvariants {
        chi,
        kappa,
        tau,
        constants: sc,
    })
}

fn torsion_from(sc: &StructureConstants) -> [[f64; 2]; 2] {
    let m = 0.5 * (sc.c02[0] + sc.c01[1]);
    [[sc.c01[0], m], [m, sc.c02[1]]]
}

/// Torsion matrix tau = [[c1_01, m], [m, c2_02]], m = (c1_02 + c2_01)/2.
pub fn torsion_matrix(model: &ContactModel, p: &[f64; DIM]) -> Result<[[f64; 2]; 2]> {
    let sc = structure_constants(model, p)?;
    validate_contact(p, &sc)?;
    Ok(torsion_from(&sc))
}

/// Divergence of the horizontal frame fields with respect to the model
/// measure: (div X1, div X2). Under the Popp volume this is
/// (c2_12, -c1_12); a density h adds X_i(h)/h. When a transverse field is
/// declared the same pair is recomputed from the structure constants of the
/// frame {X1, X2, Xtheta} and the two routes are required to agree.
pub fn divergence_frame(model: &ContactModel, p: &[f64; DIM]) -> Result<[f64; 2]> {
    let sc = structure_constants(model, p)?;
    validate_contact(p, &sc)?;
    let mut div = [sc.c12[1], -sc.c12[0]];
    if model.density.is_some() {
        let h = model.density_jet1(p)?;
        if h.v <= 0.0 {
            return Err(Error::domain(format!(
                "measure density must be positive, got {:.6e}",
                h.v
            )));
        }
        let fv = model.frame_values(p)?;
        div[0] += frame_derivative(&fv, 0, &h) / h.v;
        div[1] += frame_derivative(&fv, 1, &h) / h.v;
    }
    if model.transverse.is_some() {
        let tc = theta_frame_constants(model, p)?;
        let alt = [tc.c12[1] - tc.ct1[2], -tc.c12[0] - tc.ct2[2]];
        let dev = (alt[0] - div[0]).abs().max((alt[1] - div[1]).abs());
        if dev > 1e-7 {
            return Err(Error::InvalidTransverse {
                msg: format!(
                    "divergence via transverse frame disagrees with density route by {dev:.3e}"
                ),
            });
        }
    }
    Ok(div)
}

/// Structure constants of the frame {X1, X2, Xtheta} where Xtheta is the
/// declared transverse field (default X0): components of [X2, X1], [X1,
/// Xtheta], [X2, Xtheta] in that frame. Validates mu(X1, X2, Xtheta) = 1.
#[derive(Clone, Copy, Debug)]
pub struct ThetaConstants {
    pub c12: [f64; 3],
    /// [X1, Xtheta] components (X1, X2, Xtheta).
    pub ct1: [f64; 3],
    /// [X2, Xtheta] components.
    pub ct2: [f64; 3],
}

pub fn theta_frame_constants(model: &ContactModel, p: &[f64; DIM]) -> Result<ThetaConstants> {
    let theta = model.transverse.clone().unwrap_or_else(|| model.frame[2].clone());
    let f2 = [
        model.frame[0].jet2(p)?,
        model.frame[1].jet2(p)?,
        theta.jet2(p)?,
    ];
    let f1 = [
        f2[0].map(|j| j.lower()),
        f2[1].map(|j| j.lower()),
        f2[2].map(|j| j.lower()),
    ];
    let grad = model.constraint_grad(p)?;

    // Normalization: mu(X1, X2, Xtheta) = h * nu(X1, X2, Xtheta) = 1, where
    // nu is the Popp volume (frame {X1, X2, X0} unimodular). The X0-component
    // of Xtheta equals nu(X1, X2, Xtheta).
    let base = model.frame_jet1(p)?;
    let theta_vals = [f1[0], f1[1], f1[2]][2].map(|j| Jet1::new(j.v, j.g));
    let (comps, _) = decompose_jet1(
        model,
        &base,
        grad.as_ref(),
        theta_vals,
    )?;
    let h = model.density_value(p)?;
    let norm = h * comps[2].v;
    if (norm - 1.0).abs() > 1e-7 {
        return Err(Error::InvalidTransverse {
            msg: format!("mu(X1, X2, Xtheta) = {norm:.9} but must equal 1"),
        });
    }

    let b12 = bracket_jet1(&f2[1], &f2[0]);
    let bt1 = bracket_jet1(&f2[0], &f2[2]);
    let bt2 = bracket_jet1(&f2[1], &f2[2]);
    let decompose_theta = |v: [Jet1; DIM]| -> Result<[f64; 3]> {
        let (c, _r) = decompose_jet1(model, &f1, grad.as_ref(), v)?;
        Ok([c[0].v, c[1].v, c[2].v])
    };
    Ok(ThetaConstants {
        c12: decompose_theta(b12)?,
        ct1: decompose_theta(bt1)?,
        ct2: decompose_theta(bt2)?,
    })
}

/// Second-order frame jet of a scalar expression: value, the three frame
/// derivatives `d1[i] = X_i f`, and the iterated derivatives
/// `d2[i][j] = X_i (X_j f)`. The commutator identity
///
/// ```text
/// d2[1][0] - d2[0][1] = c1_12 d1[0] + c2_12 d1[1] + d1[2]
/// ```
///
/// (X2 X1 f - X1 X2 f = [X2, X1] f) holds by construction and is asserted by
/// the self-checks.
#[derive(Clone, Copy, Debug)]
pub struct ScalarJet {
    pub value: f64,
    pub d1: [f64; 3],
    pub d2: [[f64; 3]; 3],
}

pub fn eval_jet(model: &ContactModel, f: &Expr, p: &[f64; DIM]) -> Result<ScalarJet> {
    let fj: Jet2 = f.eval(p)?;
    let f2 = model.frame_jet2(p)?;
    scalar_jet_from(&f2, &fj)
}

/// Same as [`eval_jet`] but reusing frame jets the caller already has.
pub fn scalar_jet_from(f2: &[[Jet2; DIM]; 3], fj: &Jet2) -> Result<ScalarJet> {
    let mut d1 = [0.0; 3];
    let mut d2 = [[0.0; 3]; 3];
    for i in 0..3 {
        d1[i] = (0..DIM).map(|a| f2[i][a].v * fj.g[a]).sum();
    }
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for b in 0..DIM {
                // X_i (X_j f) = sum_b X_i^b d_b (sum_a X_j^a d_a f)
                let mut inner = 0.0;
                for a in 0..DIM {
                    inner += f2[j][a].g[b] * fj.g[a] + f2[j][a].v * fj.h[b][a];
                }
                acc += f2[i][b].v * inner;
            }
            d2[i][j] = acc;
        }
    }
    Ok(ScalarJet {
        value: fj.v,
        d1,
        d2,
    })
}

/// Declared structure constants for the bracket self-check: any entry set to
/// `Some` is compared against the computed value at every sample point.
#[derive(Clone, Copy, Debug, Default)]
pub struct DeclaredConstants {
    pub c12: [Option<f64>; 3],
    pub c01: [Option<f64>; 3],
    pub c02: [Option<f64>; 3],
}

#[derive(Clone, Debug)]
pub struct BracketViolation {
    pub name: String,
    pub expected: f64,
    pub got: f64,
    pub point: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct BracketReport {
    pub samples: usize,
    /// Worst disagreement between finite-difference brackets and the
    /// jet-computed ones, over all pairs, components, and points.
    pub max_fd_err: f64,
    /// Worst violation of the contact normalization (c0_12 = 1, no X0
    /// component in [X_i, X0], trace-free torsion).
    pub max_structure_err: f64,
    pub violations: Vec<BracketViolation>,
}

/// Validate the declared frame against finite differences and, optionally,
/// a table of declared structure constants.
pub fn bracket_selfcheck(
    model: &ContactModel,
    samples: usize,
    seed: u64,
    declared: Option<&DeclaredConstants>,
) -> Result<BracketReport> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = BracketReport {
        samples,
        max_fd_err: 0.0,
        max_structure_err: 0.0,
        violations: Vec::new(),
    };
    let mut worst: std::collections::BTreeMap<String, BracketViolation> =
        std::collections::BTreeMap::new();

    for _ in 0..samples {
        let p = model.sample_point(&mut rng);
        let scj = structure_constants_jet(model, &p)?;
        let sc = scj.values();

        // Finite-difference brackets of the raw component functions,
        // Richardson-extrapolated central differences.
        let fd_bracket = |v: &VectorField, w: &VectorField| -> Result<[f64; DIM]> {
            let h = 1.0 / 64.0;
            let vv = v.values(&p)?;
            let wv = w.values(&p)?;
            let mut out = [0.0; DIM];
            for a in 0..DIM {
                let mut acc = 0.0;
                for b in 0..DIM {
                    let d = |field: &VectorField, step: f64| -> Result<f64> {
                        let mut pp = p;
                        pp[b] += step;
                        let up = field.comp[a].eval::<f64>(&pp)?;
                        pp[b] -= 2.0 * step;
                        let dn = field.comp[a].eval::<f64>(&pp)?;
                        Ok((up - dn) / (2.0 * step))
                    };
                    let dw = (4.0 * d(w, h / 2.0)? - d(w, h)?) / 3.0;
                    let dv = (4.0 * d(v, h / 2.0)? - d(v, h)?) / 3.0;
                    acc += vv[b] * dw - wv[b] * dv;
                }
                out[a] = acc;
            }
            Ok(out)
        };

        let fv = model.frame_values(&p)?;
        let reconstruct = |c: &[Jet1; 3]| -> [f64; DIM] {
            let mut out = [0.0; DIM];
            for a in 0..DIM {
                out[a] = c[0].v * fv[0][a] + c[1].v * fv[1][a] + c[2].v * fv[2][a];
            }
            out
        };
        for (ci, vi, wi) in [(&scj.c12, 1usize, 0usize), (&scj.c01, 0, 2), (&scj.c02, 1, 2)] {
            let fd = fd_bracket(&model.frame[vi], &model.frame[wi])?;
            let rec = reconstruct(ci);
            for a in 0..DIM {
                report.max_fd_err = report.max_fd_err.max((fd[a] - rec[a]).abs());
            }
        }

        let structure_err = (sc.c12[2] - 1.0)
            .abs()
            .max(sc.c01[2].abs())
            .max(sc.c02[2].abs())
            .max((sc.c01[0] + sc.c02[1]).abs())
            .max(sc.residual);
        report.max_structure_err = report.max_structure_err.max(structure_err);

        if let Some(d) = declared {
            let groups = [("c_12", &d.c12, &sc.c12), ("c_01", &d.c01, &sc.c01), ("c_02", &d.c02, &sc.c02)];
            for (stem, decl, got) in groups {
                for k in 0..3 {
                    if let Some(expected) = decl[k] {
                        let err = (got[k] - expected).abs();
                        if err > 1e-7 {
                            let name = format!("{stem}[{}]", FRAME_NAMES[k]);
                            let v = BracketViolation {
                                name: name.clone(),
                                expected,
                                got: got[k],
                                point: p,
                            };
                            match worst.get(&name) {
                                Some(old) if (old.got - old.expected).abs() >= err => {}
                                _ => {
                                    worst.insert(name, v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    report.violations = worst.into_values().collect();
    Ok(report)
}
