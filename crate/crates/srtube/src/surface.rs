//! Surfaces given by a defining function, their horizontal geometry, and the
//! closed-form integrands of the volume expansion.
//!
//! For `f` with surface S = {f = 0} and orientation sign `s`, the signed
//! distance delta from S satisfies `X_i delta = X_i(s f) / |grad_H (s f)|` on
//! S. The induced perimeter measure, the mean curvature (first variation),
//! and the third-coefficient integrand are all evaluated from second-order
//! frame jets of `s f` at a point; no symbolic manipulation is involved.

use crate::contact::{
    decompose, eval_jet, metric_invariants, structure_constants, theta_frame_constants,
    ContactModel,
};
use crate::expr::Expr;
use crate::jet::{Jet1, Jet2, Scalar, DIM};
use crate::linalg::{det3, det4};
use crate::quad::gauss_legendre_on;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ImplicitSurface {
    pub f: Expr,
    /// Orientation sign: the half-tube grows on the side where s*f > 0.
    pub s: f64,
}

impl ImplicitSurface {
    pub fn new(f: Expr, s: f64) -> Result<ImplicitSurface> {
        if s != 1.0 && s != -1.0 {
            return Err(Error::config(format!("orientation s must be +1 or -1, got {s}")));
        }
        Ok(ImplicitSurface { f, s })
    }

    /// Graph surface z = g(r) in a 3D chart, as f = z - sum g[i] r^i with
    /// r^2 = x^2 + y^2.
    /// Same surface with the opposite co-orientation: the half-tube sits on
    /// the other side.
    pub fn flipped(mut self) -> ImplicitSurface {
        self.s = -self.s;
        self
    }

    pub fn rotational(g: &[f64]) -> ImplicitSurface {
        let r2 = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::var(0)), Box::new(Expr::var(0)))),
            Box::new(Expr::Mul(Box::new(Expr::var(1)), Box::new(Expr::var(1)))),
        );
        let mut acc: Option<Expr> = None;
        for (i, &c) in g.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let term = if i == 0 {
                Expr::num(c)
            } else {
                Expr::Mul(
                    Box::new(Expr::num(c)),
                    Box::new(Expr::Pow(Box::new(r2.clone()), i as f64 / 2.0)),
                )
            };
            acc = Some(match acc {
                None => term,
                Some(a) => Expr::Add(Box::new(a), Box::new(term)),
            });
        }
        let f = match acc {
            None => Expr::var(2),
            Some(gsum) => Expr::Sub(Box::new(Expr::var(2)), Box::new(gsum)),
        };
        ImplicitSurface { f, s: 1.0 }
    }

    pub fn f_value(&self, p: &[f64; DIM]) -> Result<f64> {
        Ok(self.s * self.f.eval::<f64>(p)?)
    }

    /// Second-order frame jet of s*f.
    pub fn jet(&self, model: &ContactModel, p: &[f64; DIM]) -> Result<crate::contact::ScalarJet> {
        let mut j = eval_jet(model, &self.f, p)?;
        j.value *= self.s;
        for i in 0..3 {
            j.d1[i] *= self.s;
            for k in 0..3 {
                j.d2[i][k] *= self.s;
            }
        }
        Ok(j)
    }
}

/// Is the horizontal gradient of the defining function below `char_tol`?
pub fn is_characteristic(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<bool> {
    let j = surf.jet(model, p)?;
    Ok((j.d1[0] * j.d1[0] + j.d1[1] * j.d1[1]).sqrt() < char_tol)
}

/// First-order surface data at a non-characteristic point.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceFrame {
    /// (X1 delta, X2 delta, X0 delta).
    pub q: [f64; 3],
    /// |grad_H (s f)| before normalization.
    pub norm_h: f64,
    /// Frame components of the horizontal normal N = q1 X1 + q2 X2.
    pub n: [f64; 3],
    /// Frame components of the characteristic direction X_S = q2 X1 - q1 X2.
    pub xs: [f64; 3],
    /// Frame components of Y_S = (X0 delta) N - X0, tangent and transverse
    /// to the characteristic foliation.
    pub ys: [f64; 3],
    pub n_coord: [f64; DIM],
    pub xs_coord: [f64; DIM],
    pub ys_coord: [f64; DIM],
}

/// Coordinate jets of the normalized slope fields at a point: q_i as
/// first-order jets, plus everything needed to take their frame derivatives.
struct SlopeJets {
    q: [Jet1; 3],
    norm: Jet1,
    fvals: [[f64; DIM]; 3],
}

fn slope_jets(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<SlopeJets> {
    let fj_raw: Jet2 = surf.f.eval(p)?;
    let fj = fj_raw.scale(surf.s);
    let frames2 = model.frame_jet2(p)?;
    // X_i f as first-order coordinate jets.
    let mut xif = [Jet1::ZERO; 3];
    for i in 0..3 {
        let mut v = 0.0;
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            v += frames2[i][a].v * fj.g[a];
            for b in 0..DIM {
                g[b] += frames2[i][a].g[b] * fj.g[a] + frames2[i][a].v * fj.h[b][a];
            }
        }
        xif[i] = Jet1::new(v, g);
    }
    let norm2 = xif[0] * xif[0] + xif[1] * xif[1];
    let norm_v = norm2.v.sqrt();
    if norm_v < char_tol {
        return Err(Error::CharacteristicPoint {
            point: *p,
            norm: norm_v,
            tol: char_tol,
        });
    }
    let norm = norm2.sqrt();
    let q = [xif[0] / norm, xif[1] / norm, xif[2] / norm];
    let fvals = [
        frames2[0].map(|j| j.v),
        frames2[1].map(|j| j.v),
        frames2[2].map(|j| j.v),
    ];
    Ok(SlopeJets { q, norm, fvals })
}

impl SlopeJets {
    /// Frame derivative X_i(c) of a jet-valued scalar.
    fn xd(&self, i: usize, c: &Jet1) -> f64 {
        (0..DIM).map(|a| self.fvals[i][a] * c.g[a]).sum()
    }

    fn coord_combo(&self, w: [f64; 3]) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for a in 0..DIM {
            out[a] = w[0] * self.fvals[0][a] + w[1] * self.fvals[1][a] + w[2] * self.fvals[2][a];
        }
        out
    }
}

/// The adapted frame along the surface.
pub fn surface_frame(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<SurfaceFrame> {
    let sj = slope_jets(model, surf, p, char_tol)?;
    let q = [sj.q[0].v, sj.q[1].v, sj.q[2].v];
    let n = [q[0], q[1], 0.0];
    let xs = [q[1], -q[0], 0.0];
    let ys = [q[2] * q[0], q[2] * q[1], -1.0];
    Ok(SurfaceFrame {
        q,
        norm_h: sj.norm.v,
        n,
        xs,
        ys,
        n_coord: sj.coord_combo(n),
        xs_coord: sj.coord_combo(xs),
        ys_coord: sj.coord_combo(ys),
    })
}

/// Mean curvature with respect to the model measure (Popp volume, or h nu
/// when the model declares a density): H = -div_mu(N).
pub fn mean_curvature(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<f64> {
    let sj = slope_jets(model, surf, p, char_tol)?;
    let div = crate::contact::divergence_frame(model, p)?;
    Ok(-(sj.xd(0, &sj.q[0])
        + sj.xd(1, &sj.q[1])
        + sj.q[0].v * div[0]
        + sj.q[1].v * div[1]))
}

fn require_popp(model: &ContactModel, what: &str) -> Result<()> {
    if model.density.is_some() {
        return Err(Error::UnsupportedMeasure {
            msg: format!("{what} is defined for the Popp volume; the model declares a density"),
        });
    }
    Ok(())
}

/// Integrand of the third expansion coefficient under the Popp volume:
/// 2 X_S(X0 delta) - (X0 delta)^2 - kappa - <tau(X_S), N>.
pub fn a3_integrand(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<f64> {
    require_popp(model, "the third-coefficient integrand")?;
    let sj = slope_jets(model, surf, p, char_tol)?;
    let inv = metric_invariants(model, p)?;
    let (q1, q2, q0) = (sj.q[0].v, sj.q[1].v, sj.q[2].v);
    let xs_coord = sj.coord_combo([q2, -q1, 0.0]);
    let xs_q0: f64 = (0..DIM).map(|a| xs_coord[a] * sj.q[2].g[a]).sum();
    // <tau(X_S), N> with N = (q1, q2), X_S = (q2, -q1) in the horizontal frame.
    let pairing = q1 * (inv.tau[0][0] * q2 - inv.tau[0][1] * q1)
        + q2 * (inv.tau[1][0] * q2 - inv.tau[1][1] * q1);
    Ok(2.0 * xs_q0 - q0 * q0 - inv.kappa - pairing)
}

/// Specialized third-coefficient integrand for canonical left-invariant
/// structures ([X1, X0] along X2, [X2, X0] along X1): the torsion pairing
/// collapses to chi * ((X1 delta)^2 - (X2 delta)^2).
pub fn a3_integrand_leftinvariant(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<f64> {
    require_popp(model, "the third-coefficient integrand")?;
    if !model.canonical_left_invariant {
        return Err(Error::unsupported(format!(
            "model `{}` does not declare a canonical left-invariant frame",
            model.name
        )));
    }
    let sc = structure_constants(model, p)?;
    let m = 0.5 * (sc.c02[0] + sc.c01[1]);
    if sc.c01[0].abs() > 1e-9 || sc.c02[1].abs() > 1e-9 || m < -1e-9 {
        return Err(Error::InvalidStructure {
            point: *p,
            msg: format!(
                "frame is not canonical: c1_01 = {:.3e}, c2_02 = {:.3e}, (c1_02 + c2_01)/2 = {:.3e}",
                sc.c01[0], sc.c02[1], m
            ),
        });
    }
    let sj = slope_jets(model, surf, p, char_tol)?;
    let inv = metric_invariants(model, p)?;
    let (q1, q2, q0) = (sj.q[0].v, sj.q[1].v, sj.q[2].v);
    let xs_coord = sj.coord_combo([q2, -q1, 0.0]);
    let xs_q0: f64 = (0..DIM).map(|a| xs_coord[a] * sj.q[2].g[a]).sum();
    Ok(2.0 * xs_q0 - q0 * q0 - inv.kappa + m * (q1 * q1 - q2 * q2))
}

/// Pointwise diagnostic: the surface curvature candidate
/// X_S(X0 delta) - (X0 delta)^2 obtained from Riemannian approximations.
/// Its integral does not reproduce the third coefficient; it is exposed for
/// comparison dumps only.
pub fn gauss_curvature_diagnostic(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    char_tol: f64,
) -> Result<f64> {
    let sj = slope_jets(model, surf, p, char_tol)?;
    let (q1, q2, q0) = (sj.q[0].v, sj.q[1].v, sj.q[2].v);
    let xs_coord = sj.coord_combo([q2, -q1, 0.0]);
    let xs_q0: f64 = (0..DIM).map(|a| xs_coord[a] * sj.q[2].g[a]).sum();
    Ok(xs_q0 - q0 * q0)
}

/// Mean curvature of the surface in the Riemannian extension of the metric
/// where {X1, X2, Xtheta/eps} is orthonormal: H^eps = -div_mu(n^eps) with
/// n^eps the Riemannian unit normal. Converges to `mean_curvature` at rate
/// eps^2 away from characteristic points.
pub fn riemannian_mean_curvature(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    eps: f64,
    char_tol: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::config(format!("eps must be positive, got {eps}")));
    }
    let sj = slope_jets(model, surf, p, char_tol)?;
    let theta = model
        .transverse
        .clone()
        .unwrap_or_else(|| model.frame[2].clone());
    let theta2 = theta.jet2(p)?;
    let fj = {
        let raw: Jet2 = surf.f.eval(p)?;
        raw.scale(surf.s)
    };
    // X_theta f as a first-order jet, then q_theta = X_theta f / |grad_H f|.
    let mut v = 0.0;
    let mut g = [0.0; DIM];
    for a in 0..DIM {
        v += theta2[a].v * fj.g[a];
        for b in 0..DIM {
            g[b] += theta2[a].g[b] * fj.g[a] + theta2[a].v * fj.h[b][a];
        }
    }
    let qt = Jet1::new(v, g) / sj.norm;

    let eps2 = eps * eps;
    let scale = (Jet1::constant(1.0) + qt * qt * Jet1::constant(eps2)).sqrt();
    let a1 = sj.q[0] / scale;
    let a2 = sj.q[1] / scale;
    let at = qt * Jet1::constant(eps2) / scale;

    let tc = theta_frame_constants(model, p)?;
    let theta_vals = theta2.map(|j| j.v);
    let xd_theta = |c: &Jet1| -> f64 { (0..DIM).map(|a| theta_vals[a] * c.g[a]).sum() };

    Ok(-(sj.xd(0, &a1)
        + sj.xd(1, &a2)
        + xd_theta(&at)
        + a1.v * (tc.c12[1] - tc.ct1[2])
        + a2.v * (-tc.c12[0] - tc.ct2[2])
        + at.v * (tc.ct1[0] + tc.ct2[1])))
}

/// Area density of the induced measure on the surface against the chart
/// parameters: dA = h * nu(N, d_{u1} phi, d_{u2} phi). Positive when the
/// chart orientation is compatible with the normal.
pub fn area_density(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    du1: [f64; DIM],
    du2: [f64; DIM],
    char_tol: f64,
) -> Result<f64> {
    let frame = surface_frame(model, surf, p, char_tol)?;
    let fv = model.frame_values(p)?;
    let grad = model.constraint_grad(p)?;
    let grad_vals = grad.map(|g| g.map(|j| j.v));
    let (v1, r1) = decompose(model, &fv, grad_vals.as_ref(), du1)?;
    let (v2, r2) = decompose(model, &fv, grad_vals.as_ref(), du2)?;
    let scale = 1.0
        + du1.iter().map(|t| t.abs()).fold(0.0, f64::max)
        + du2.iter().map(|t| t.abs()).fold(0.0, f64::max);
    if r1 > 1e-8 * scale || r2 > 1e-8 * scale {
        return Err(Error::domain(format!(
            "chart tangents are not tangent to the constraint set (residuals {r1:.3e}, {r2:.3e})"
        )));
    }
    let det = det3([
        [frame.n[0], v1[0], v2[0]],
        [frame.n[1], v1[1], v2[1]],
        [frame.n[2], v1[2], v2[2]],
    ]);
    Ok(model.density_value(p)? * det)
}

/// Cross-check variant of [`area_density`] computed entirely from coordinate
/// determinants (no frame decomposition): the ratio
/// det[N, d1, d2, grad phi] / det[X1, X2, X0, grad phi], with the gradient
/// column only in the embedded case.
pub fn area_density_coordinate(
    model: &ContactModel,
    surf: &ImplicitSurface,
    p: &[f64; DIM],
    du1: [f64; DIM],
    du2: [f64; DIM],
    char_tol: f64,
) -> Result<f64> {
    let frame = surface_frame(model, surf, p, char_tol)?;
    let fv = model.frame_values(p)?;
    let h = model.density_value(p)?;
    if model.dim == 3 {
        let num = det3([
            [frame.n_coord[0], du1[0], du2[0]],
            [frame.n_coord[1], du1[1], du2[1]],
            [frame.n_coord[2], du1[2], du2[2]],
        ]);
        let den = det3([
            [fv[0][0], fv[1][0], fv[2][0]],
            [fv[0][1], fv[1][1], fv[2][1]],
            [fv[0][2], fv[1][2], fv[2][2]],
        ]);
        Ok(h * num / den)
    } else {
        let g = model
            .constraint_grad(p)?
            .ok_or_else(|| Error::domain("4D model without constraint"))?
            .map(|j| j.v);
        let col = |a: [f64; 4], b: [f64; 4], c: [f64; 4], d: [f64; 4]| {
            let mut m = [[0.0; 4]; 4];
            for r in 0..4 {
                m[r] = [a[r], b[r], c[r], d[r]];
            }
            m
        };
        let num = det4(col(frame.n_coord, du1, du2, g));
        let den = det4(col(fv[0], fv[1], fv[2], g));
        Ok(h * num / den)
    }
}

/// Parametrizations of the built-in surface families.
#[derive(Clone, Debug)]
pub enum Chart {
    /// (r, theta) -> (r cos theta, r sin theta, g(r)); polynomial g.
    Rotational { g: Vec<f64> },
    /// (theta, z) -> (sqrt(1-z^2) cos theta, sqrt(1-z^2) sin theta, z, 0).
    Su2Band,
    /// (s, y) -> (sqrt(1+y^2) e^{-s}, y, y, sqrt(1+y^2) e^{s}).
    Sl2Branch,
    /// (x, y) -> (x, y, zeta(x, y)) with zeta solved from f = 0 by Newton
    /// iteration started at z0. 3D models only.
    GraphZ { z0: f64 },
    /// The inner chart with its parameters in the other order. Reverses the
    /// chart orientation, pairing a chart with the opposite co-orientation
    /// of the surface.
    Swapped(Box<Chart>),
}

#[derive(Clone, Copy, Debug)]
pub struct ChartPoint {
    pub p: [f64; DIM],
    pub du1: [f64; DIM],
    pub du2: [f64; DIM],
}

#[derive(Clone, Debug)]
pub struct SurfacePatch {
    pub chart: Chart,
    pub u1: [f64; 2],
    pub u2: [f64; 2],
    pub n1: usize,
    pub n2: usize,
}

impl Chart {
    fn eval(&self, surf: &ImplicitSurface, u: [f64; 2]) -> Result<ChartPoint> {
        match self {
            Chart::Rotational { g } => {
                let (r, th) = (u[0], u[1]);
                if r <= 0.0 {
                    return Err(Error::domain(format!(
                        "rotational chart needs r > 0, got {r}"
                    )));
                }
                let (sin, cos) = th.sin_cos();
                let mut gv = 0.0;
                let mut dgv = 0.0;
                for (i, &c) in g.iter().enumerate() {
                    gv += c * r.powi(i as i32);
                    if i >= 1 {
                        dgv += c * i as f64 * r.powi(i as i32 - 1);
                    }
                }
                Ok(ChartPoint {
                    p: [r * cos, r * sin, gv, 0.0],
                    du1: [cos, sin, dgv, 0.0],
                    du2: [-r * sin, r * cos, 0.0, 0.0],
                })
            }
            Chart::Su2Band => {
                let (th, z) = (u[0], u[1]);
                if z.abs() >= 1.0 {
                    return Err(Error::domain(format!("band chart needs |z| < 1, got {z}")));
                }
                let rho = (1.0 - z * z).sqrt();
                let (sin, cos) = th.sin_cos();
                Ok(ChartPoint {
                    p: [rho * cos, rho * sin, z, 0.0],
                    du1: [-rho * sin, rho * cos, 0.0, 0.0],
                    du2: [-z / rho * cos, -z / rho * sin, 1.0, 0.0],
                })
            }
            Chart::Sl2Branch => {
                let (sv, y) = (u[0], u[1]);
                let c = (1.0 + y * y).sqrt();
                let (em, ep) = ((-sv).exp(), sv.exp());
                Ok(ChartPoint {
                    p: [c * em, y, y, c * ep],
                    du1: [-c * em, 0.0, 0.0, c * ep],
                    du2: [y / c * em, 1.0, 1.0, y / c * ep],
                })
            }
            Chart::GraphZ { z0 } => {
                let (x, y) = (u[0], u[1]);
                let mut z = *z0;
                let mut converged = false;
                for _ in 0..60 {
                    let fj: Jet1 = surf.f.eval(&[x, y, z, 0.0])?;
                    if fj.g[2].abs() < 1e-10 {
                        return Err(Error::domain(format!(
                            "graph chart: d f / d z = {:.3e} too small at ({x}, {y}, {z})",
                            fj.g[2]
                        )));
                    }
                    let step = fj.v / fj.g[2];
                    z -= step;
                    if step.abs() < 1e-14 * (1.0 + z.abs()) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::domain(format!(
                        "graph chart: Newton failed to locate the surface over ({x}, {y})"
                    )));
                }
                let fj: Jet1 = surf.f.eval(&[x, y, z, 0.0])?;
                Ok(ChartPoint {
                    p: [x, y, z, 0.0],
                    du1: [1.0, 0.0, -fj.g[0] / fj.g[2], 0.0],
                    du2: [0.0, 1.0, -fj.g[1] / fj.g[2], 0.0],
                })
            }
            Chart::Swapped(inner) => {
                let cp = inner.eval(surf, [u[1], u[0]])?;
                Ok(ChartPoint {
                    p: cp.p,
                    du1: cp.du2,
                    du2: cp.du1,
                })
            }
        }
    }
}

impl SurfacePatch {
    pub fn point(&self, surf: &ImplicitSurface, u: [f64; 2]) -> Result<ChartPoint> {
        self.chart.eval(surf, u)
    }

    /// Tensor Gauss-Legendre nodes over the parameter rectangle.
    pub fn quad_nodes(&self) -> Vec<([f64; 2], f64)> {
        let (x1, w1) = gauss_legendre_on(self.n1, self.u1[0], self.u1[1]);
        let (x2, w2) = gauss_legendre_on(self.n2, self.u2[0], self.u2[1]);
        let mut out = Vec::with_capacity(self.n1 * self.n2);
        for (a, wa) in x1.iter().zip(&w1) {
            for (b, wb) in x2.iter().zip(&w2) {
                out.push(([*a, *b], wa * wb));
            }
        }
        out
    }

    /// Check the patch against the surface and model: points lie on the
    /// surface (and constraint), stay an order of magnitude clear of
    /// characteristic points, and the chart orientation gives a positive
    /// area density. Scans all quadrature nodes plus a boundary sweep.
    pub fn validate(
        &self,
        model: &ContactModel,
        surf: &ImplicitSurface,
        char_tol: f64,
    ) -> Result<()> {
        if self.n1 < 4 || self.n2 < 4 {
            return Err(Error::config(format!(
                "patch grid must be at least 4x4, got {}x{}",
                self.n1, self.n2
            )));
        }
        if !(self.u1[0] < self.u1[1]) || !(self.u2[0] < self.u2[1]) {
            return Err(Error::config("patch parameter ranges must be nonempty"));
        }
        let mut points: Vec<[f64; 2]> = self.quad_nodes().into_iter().map(|(u, _)| u).collect();
        let nb = 9;
        for i in 0..=nb {
            let t = i as f64 / nb as f64;
            let a = self.u1[0] + t * (self.u1[1] - self.u1[0]);
            let b = self.u2[0] + t * (self.u2[1] - self.u2[0]);
            points.push([a, self.u2[0]]);
            points.push([a, self.u2[1]]);
            points.push([self.u1[0], b]);
            points.push([self.u1[1], b]);
        }
        for u in points {
            let cp = self.point(surf, u)?;
            let fv = surf.f_value(&cp.p)?;
            if fv.abs() > 1e-9 {
                return Err(Error::NotOnSurface {
                    point: cp.p,
                    residual: fv.abs(),
                });
            }
            if model.dim == 4 {
                let c = model.constraint_residual(&cp.p)?;
                if c > 1e-10 {
                    return Err(Error::NotOnSurface {
                        point: cp.p,
                        residual: c,
                    });
                }
            }
            let frame = surface_frame(model, surf, &cp.p, 10.0 * char_tol)?;
            debug_assert!(frame.norm_h >= 10.0 * char_tol);
            let w = area_density(model, surf, &cp.p, cp.du1, cp.du2, char_tol)?;
            if w <= 0.0 {
                return Err(Error::domain(format!(
                    "area density {w:.3e} is not positive at u = ({}, {}); \
                     swap the chart parameters or flip the orientation sign",
                    u[0], u[1]
                )));
            }
        }
        Ok(())
    }
}
