//! Normal extremals (metric geodesics leaving a surface orthogonally) and the
//! tube Jacobian along them.
//!
//! Extremals solve the Hamiltonian system of H(p, x) = (h1^2 + h2^2)/2 with
//! h_i = <p, X_i(x)>. A surface point with slopes (q1, q2, q0) launches the
//! extremal whose covector satisfies <p, X_i> = q_i; arclength then equals the
//! signed distance to the surface until the cut locus. The change of volume
//! along the flow is tracked by a 2x2 determinant C(t) computed from finite
//! differences of neighbouring extremals; C(0) = 1 and C'(0) = -H.

use crate::contact::{decompose, ContactModel};
use crate::jet::DIM;
use crate::linalg::solve;
use crate::surface::{surface_frame, ImplicitSurface, SurfacePatch};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct ExtremalState {
    pub x: [f64; DIM],
    pub p: [f64; DIM],
}

/// Frame momenta (h1, h2, h0) at the current point.
pub fn controls(model: &ContactModel, s: &ExtremalState) -> Result<[f64; 3]> {
    let fv = model.frame_values(&s.x)?;
    let dot = |f: &[f64; DIM]| (0..DIM).map(|a| s.p[a] * f[a]).sum::<f64>();
    Ok([dot(&fv[0]), dot(&fv[1]), dot(&fv[2])])
}

pub fn hamiltonian(model: &ContactModel, s: &ExtremalState) -> Result<f64> {
    let h = controls(model, s)?;
    Ok(0.5 * (h[0] * h[0] + h[1] * h[1]))
}

fn deriv(model: &ContactModel, s: &ExtremalState) -> Result<([f64; DIM], [f64; DIM])> {
    let j1 = model.frame[0].jet1(&s.x)?;
    let j2 = model.frame[1].jet1(&s.x)?;
    let h1: f64 = (0..DIM).map(|a| s.p[a] * j1[a].v).sum();
    let h2: f64 = (0..DIM).map(|a| s.p[a] * j2[a].v).sum();
    let mut xdot = [0.0; DIM];
    let mut pdot = [0.0; DIM];
    for b in 0..DIM {
        xdot[b] = h1 * j1[b].v + h2 * j2[b].v;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for a in 0..DIM {
            g1 += s.p[a] * j1[a].g[b];
            g2 += s.p[a] * j2[a].g[b];
        }
        pdot[b] = -(h1 * g1 + h2 * g2);
    }
    Ok((xdot, pdot))
}

/// One classical Runge-Kutta step followed by re-projection of the point onto
/// the model's constraint set (the covector is left untouched; its normal
/// component is invariant along the flow).
pub fn rk4_step(model: &ContactModel, s: &ExtremalState, dt: f64) -> Result<ExtremalState> {
    let add = |s: &ExtremalState, kx: &[f64; DIM], kp: &[f64; DIM], c: f64| ExtremalState {
        x: std::array::from_fn(|a| s.x[a] + c * kx[a]),
        p: std::array::from_fn(|a| s.p[a] + c * kp[a]),
    };
    let (k1x, k1p) = deriv(model, s)?;
    let (k2x, k2p) = deriv(model, &add(s, &k1x, &k1p, dt / 2.0))?;
    let (k3x, k3p) = deriv(model, &add(s, &k2x, &k2p, dt / 2.0))?;
    let (k4x, k4p) = deriv(model, &add(s, &k3x, &k3p, dt))?;
    let mut out = ExtremalState {
        x: std::array::from_fn(|a| {
            s.x[a] + dt / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a])
        }),
        p: std::array::from_fn(|a| {
            s.p[a] + dt / 6.0 * (k1p[a] + 2.0 * k2p[a] + 2.0 * k3p[a] + k4p[a])
        }),
    };
    model.project(&mut out.x)?;
    Ok(out)
}

/// Default bound on |2H - 2H(0)| along a flow; exceeding it aborts with
/// `DriftExceeded` since the arclength parametrization is no longer trusted.
pub const DRIFT_BUDGET: f64 = 1e-7;

/// Advance by `dt_total` (signed) in uniform substeps of at most `step`,
/// monitoring conservation of the Hamiltonian against `two_h_ref`.
pub fn advance(
    model: &ContactModel,
    s: &mut ExtremalState,
    t_now: f64,
    dt_total: f64,
    step: f64,
    two_h_ref: f64,
    budget: f64,
) -> Result<()> {
    if dt_total == 0.0 {
        return Ok(());
    }
    if !(step > 0.0) {
        return Err(Error::config(format!("step must be positive, got {step}")));
    }
    let n = (dt_total.abs() / step).ceil().max(1.0) as usize;
    let dt = dt_total / n as f64;
    for k in 0..n {
        *s = rk4_step(model, s, dt)?;
        let two_h = 2.0 * hamiltonian(model, s)?;
        let drift = (two_h - two_h_ref).abs();
        if drift > budget {
            return Err(Error::DriftExceeded {
                drift,
                budget,
                t: t_now + dt * (k + 1) as f64,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct PathSample {
    pub t: f64,
    pub x: [f64; DIM],
    pub p: [f64; DIM],
    /// Frame momenta (h1, h2, h0) at the sample.
    pub h: [f64; 3],
}

/// Integrate an extremal from `start` to `t_max`, recording a sample every
/// `step` (the final sample lands exactly on `t_max`).
pub fn integrate_extremal(
    model: &ContactModel,
    start: ExtremalState,
    t_max: f64,
    step: f64,
) -> Result<Vec<PathSample>> {
    if !(t_max > 0.0) {
        return Err(Error::config(format!("t_max must be positive, got {t_max}")));
    }
    let two_h_ref = 2.0 * hamiltonian(model, &start)?;
    let mut s = start;
    let mut t = 0.0;
    let mut out = vec![PathSample {
        t,
        x: s.x,
        p: s.p,
        h: controls(model, &s)?,
    }];
    while t < t_max - 1e-15 {
        let dt = step.min(t_max - t);
        advance(model, &mut s, t, dt, step, two_h_ref, DRIFT_BUDGET)?;
        t += dt;
        out.push(PathSample {
            t,
            x: s.x,
            p: s.p,
            h: controls(model, &s)?,
        });
    }
    Ok(out)
}

/// Covector launching the extremal with prescribed frame momenta
/// (h1, h2, h0) = lambda at the point. Unique in a 3D chart; the minimal-norm
/// representative is returned in the embedded case (its component along the
/// constraint conormal vanishes and plays no role in the flow).
pub fn transversality_covector(
    model: &ContactModel,
    x: &[f64; DIM],
    lambda: [f64; 3],
) -> Result<[f64; DIM]> {
    let fv = model.frame_values(x)?;
    if model.dim == 3 {
        // Solve F p = lambda with F_{ia} = X_i^a (a 3x3 system).
        let a = [
            [fv[0][0], fv[0][1], fv[0][2]],
            [fv[1][0], fv[1][1], fv[1][2]],
            [fv[2][0], fv[2][1], fv[2][2]],
        ];
        let p3 = solve::<f64, 3>(a, lambda)?;
        Ok([p3[0], p3[1], p3[2], 0.0])
    } else {
        // p = F^T (F F^T)^{-1} lambda.
        let mut gram = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = (0..DIM).map(|a| fv[i][a] * fv[j][a]).sum();
            }
        }
        let y = solve::<f64, 3>(gram, lambda)?;
        Ok(std::array::from_fn(|a| {
            y[0] * fv[0][a] + y[1] * fv[1][a] + y[2] * fv[2][a]
        }))
    }
}

/// The extremal leaving the surface orthogonally at `x` toward the positive
/// side.
pub fn normal_extremal(
    model: &ContactModel,
    surf: &ImplicitSurface,
    x: &[f64; DIM],
    char_tol: f64,
) -> Result<ExtremalState> {
    let frame = surface_frame(model, surf, x, char_tol)?;
    let p = transversality_covector(model, x, frame.q)?;
    Ok(ExtremalState { x: *x, p })
}

/// A surface quadrature node together with the eight neighbouring extremals
/// used to difference the flow: offsets of +-delta and +-delta/2 along the
/// chart directions matching X_S and Y_S, giving fourth-order Richardson
/// estimates of the variation fields.
pub struct TubeNode {
    pub u: [f64; 2],
    center: ExtremalState,
    offsets: [ExtremalState; 8],
    fd_step: f64,
    two_h_ref: f64,
    /// Density at the foot point, for the measure ratio h(G(t))/h(foot).
    h_foot: f64,
    t: f64,
}

impl TubeNode {
    pub fn new(
        model: &ContactModel,
        surf: &ImplicitSurface,
        patch: &SurfacePatch,
        u: [f64; 2],
        fd_step: f64,
        char_tol: f64,
    ) -> Result<TubeNode> {
        if !(fd_step > 0.0) {
            return Err(Error::config(format!(
                "finite-difference step must be positive, got {fd_step}"
            )));
        }
        let cp = patch.point(surf, u)?;
        let frame = surface_frame(model, surf, &cp.p, char_tol)?;

        // Chart directions whose pushforwards best match X_S and Y_S
        // (least squares on the embedding tangents).
        let dot = |a: &[f64; DIM], b: &[f64; DIM]| (0..DIM).map(|i| a[i] * b[i]).sum::<f64>();
        let gram = [
            [dot(&cp.du1, &cp.du1), dot(&cp.du1, &cp.du2)],
            [dot(&cp.du1, &cp.du2), dot(&cp.du2, &cp.du2)],
        ];
        let dir = |target: &[f64; DIM]| -> Result<[f64; 2]> {
            solve::<f64, 2>(gram, [dot(target, &cp.du1), dot(target, &cp.du2)])
        };
        let e_xs = dir(&frame.xs_coord)?;
        let e_ys = dir(&frame.ys_coord)?;

        let launch = |u_off: [f64; 2]| -> Result<ExtremalState> {
            let cpo = patch.point(surf, u_off)?;
            normal_extremal(model, surf, &cpo.p, char_tol)
        };
        let shift = |dir: [f64; 2], c: f64| [u[0] + c * dir[0], u[1] + c * dir[1]];
        let offsets = [
            launch(shift(e_xs, fd_step))?,
            launch(shift(e_xs, -fd_step))?,
            launch(shift(e_xs, fd_step / 2.0))?,
            launch(shift(e_xs, -fd_step / 2.0))?,
            launch(shift(e_ys, fd_step))?,
            launch(shift(e_ys, -fd_step))?,
            launch(shift(e_ys, fd_step / 2.0))?,
            launch(shift(e_ys, -fd_step / 2.0))?,
        ];
        let center = ExtremalState {
            x: cp.p,
            p: transversality_covector(model, &cp.p, frame.q)?,
        };
        Ok(TubeNode {
            u,
            center,
            offsets,
            fd_step,
            two_h_ref: frame.q[0] * frame.q[0] + frame.q[1] * frame.q[1],
            h_foot: model.density_value(&cp.p)?,
            t: 0.0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn center(&self) -> &ExtremalState {
        &self.center
    }

    /// Advance the node and its stencil to time `t >= t()`.
    pub fn advance_to(&mut self, model: &ContactModel, t: f64, step: f64) -> Result<()> {
        let dt = t - self.t;
        if dt < -1e-12 {
            return Err(Error::config(format!(
                "cannot flow a tube node backwards: at t = {}, asked for {t}",
                self.t
            )));
        }
        if dt <= 0.0 {
            return Ok(());
        }
        advance(model, &mut self.center, self.t, dt, step, self.two_h_ref, DRIFT_BUDGET)?;
        for s in self.offsets.iter_mut() {
            advance(model, s, self.t, dt, step, self.two_h_ref, DRIFT_BUDGET)?;
        }
        self.t = t;
        Ok(())
    }

    /// Frame pairings of the transported variation fields at the current
    /// point: rows (V1, V2) = (dG X_S, dG Y_S), columns (<., JN>, <., X0>).
    /// JN is read from the extremal's horizontal velocity, never from the
    /// distance function.
    fn variation_pairings(&self, model: &ContactModel) -> Result<[[f64; 2]; 2]> {
        let fv = model.frame_values(&self.center.x)?;
        let h = controls(model, &self.center)?;
        let grad = model.constraint_grad(&self.center.x)?;
        let grad_vals = grad.map(|g| g.map(|j| j.v));

        let variation = |base: usize| -> Result<[f64; 3]> {
            let d_full: [f64; DIM] = std::array::from_fn(|a| {
                (self.offsets[base].x[a] - self.offsets[base + 1].x[a]) / (2.0 * self.fd_step)
            });
            let d_half: [f64; DIM] = std::array::from_fn(|a| {
                (self.offsets[base + 2].x[a] - self.offsets[base + 3].x[a]) / self.fd_step
            });
            let v: [f64; DIM] = std::array::from_fn(|a| (4.0 * d_half[a] - d_full[a]) / 3.0);
            let (comps, _) = decompose(model, &fv, grad_vals.as_ref(), v)?;
            Ok(comps)
        };
        let v_xs = variation(0)?;
        let v_ys = variation(4)?;

        let jn = [-h[1], h[0]];
        Ok([
            [v_xs[0] * jn[0] + v_xs[1] * jn[1], v_xs[2]],
            [v_ys[0] * jn[0] + v_ys[1] * jn[1], v_ys[2]],
        ])
    }

    /// The Jacobian determinant C(t) of the normal flow against the surface
    /// measure, and the density ratio h(G(t))/h(foot). Errors with
    /// `TubeValidity` when C is not positive: the tube has focused before
    /// this time and arclength no longer measures distance.
    pub fn c_and_density(&self, model: &ContactModel) -> Result<(f64, f64)> {
        let p = self.variation_pairings(model)?;
        let c = p[0][0] * p[1][1] - p[1][0] * p[0][1];
        if !(c > 0.0) {
            return Err(Error::TubeValidity {
                t: self.t,
                u1: self.u[0],
                u2: self.u[1],
                value: c,
            });
        }
        Ok((c, model.density_value(&self.center.x)? / self.h_foot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::surface::{mean_curvature, Chart};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Heisenberg extremal from the origin in closed form: with initial
    /// momenta (cos phi, sin phi, h0),
    ///   x + i y = w0 (1 - e^{-i h0 t}) / (i h0),
    ///   z = (h0 t - sin(h0 t)) / (2 h0^2).
    fn heis_exact(phi: f64, h0: f64, t: f64) -> [f64; 3] {
        let (s0, c0) = phi.sin_cos();
        if h0.abs() < 1e-14 {
            return [t * c0, t * s0, 0.0];
        }
        let th = h0 * t;
        // (1 - e^{-i th}) / (i h0) = (sin th - i (1 - cos th)) / h0
        let re = (th.sin() * c0 + (1.0 - th.cos()) * s0) / h0;
        let im = (th.sin() * s0 - (1.0 - th.cos()) * c0) / h0;
        [re, im, (th - th.sin()) / (2.0 * h0 * h0)]
    }

    #[test]
    fn straight_line_when_h0_vanishes() {
        let m = ContactModel::heisenberg();
        let start = ExtremalState {
            x: [0.0; DIM],
            p: [0.6f64.cos(), 0.6f64.sin(), 0.0, 0.0],
        };
        let path = integrate_extremal(&m, start, 0.5, 1e-3).unwrap();
        let end = path.last().unwrap();
        let exact = heis_exact(0.6, 0.0, 0.5);
        for a in 0..3 {
            assert!(close(end.x[a], exact[a], 1e-12), "{:?} vs {exact:?}", end.x);
        }
    }

    #[test]
    fn heisenberg_exponential_closed_form() {
        let m = ContactModel::heisenberg();
        for (phi, h0) in [(0.4f64, 1.3f64), (2.1, -0.8), (0.0, 3.0)] {
            let start = ExtremalState {
                x: [0.0; DIM],
                p: [phi.cos(), phi.sin(), h0, 0.0],
            };
            let path = integrate_extremal(&m, start, 0.5, 1e-3).unwrap();
            let end = path.last().unwrap();
            let exact = heis_exact(phi, h0, 0.5);
            for a in 0..3 {
                assert!(
                    close(end.x[a], exact[a], 1e-8),
                    "phi={phi} h0={h0}: {:?} vs {exact:?}",
                    end.x
                );
            }
            // Frame momenta rotate: (h1 + i h2)(t) = e^{-i h0 t} (h1 + i h2)(0).
            let th = -h0 * 0.5;
            let hx = phi.cos() * th.cos() - phi.sin() * th.sin();
            let hy = phi.cos() * th.sin() + phi.sin() * th.cos();
            assert!(close(end.h[0], hx, 1e-9));
            assert!(close(end.h[1], hy, 1e-9));
            assert!(close(end.h[2], h0, 1e-9), "h0 is conserved");
        }
    }

    #[test]
    fn reversibility_and_conservation() {
        let m = ContactModel::su2(1.0);
        let x0 = [0.6, 0.0, 0.8, 0.0];
        let p = transversality_covector(&m, &x0, [0.8, 0.6, 0.3]).unwrap();
        let mut s = ExtremalState { x: x0, p };
        let two_h = 2.0 * hamiltonian(&m, &s).unwrap();
        assert!(close(two_h, 1.0, 1e-12), "unit initial momenta give 2H = 1");
        advance(&m, &mut s, 0.0, 0.3, 1e-3, two_h, DRIFT_BUDGET).unwrap();
        // Stays on the sphere.
        let r: f64 = s.x.iter().map(|v| v * v).sum::<f64>();
        assert!(close(r, 1.0, 1e-10), "sphere constraint drift {r}");
        assert!(close(2.0 * hamiltonian(&m, &s).unwrap(), two_h, 1e-10));
        // Flowing back returns to the start.
        advance(&m, &mut s, 0.3, -0.3, 1e-3, two_h, DRIFT_BUDGET).unwrap();
        for a in 0..DIM {
            assert!(close(s.x[a], x0[a], 1e-9), "{:?} vs {x0:?}", s.x);
            assert!(close(s.p[a], p[a], 1e-9));
        }
    }

    #[test]
    fn transversality_matches_surface_slopes() {
        let m = ContactModel::heisenberg();
        let surf = ImplicitSurface::rotational(&[0.0, 0.0, 0.5]);
        let x = [1.0, 0.4, 0.5 * 1.16, 0.0];
        let q = crate::surface::surface_frame(&m, &surf, &x, 1e-6).unwrap().q;
        let s = normal_extremal(&m, &surf, &x, 1e-6).unwrap();
        let h = controls(&m, &s).unwrap();
        for i in 0..3 {
            assert!(close(h[i], q[i], 1e-12));
        }
        assert!(close(2.0 * hamiltonian(&m, &s).unwrap(), 1.0, 1e-12));
        // The extremal leaves toward the positive side of the surface.
        let path = integrate_extremal(&m, s, 0.05, 1e-3).unwrap();
        for smp in &path[1..] {
            assert!(surf.f_value(&smp.x).unwrap() > 0.0);
        }
    }

    #[test]
    fn embedded_transversality_is_tangent_and_minimal() {
        let m = ContactModel::sl2(0.9);
        let x = [(2.0f64).sqrt() / 1.2, 0.6, 0.6, 1.2 * (2.0f64).sqrt() / 1.44];
        // Re-project roughly onto xw - yz = 1 before use.
        let mut x = x;
        m.project(&mut x).unwrap();
        let p = transversality_covector(&m, &x, [0.6, -0.8, 0.25]).unwrap();
        let s = ExtremalState { x, p };
        let h = controls(&m, &s).unwrap();
        assert!(close(h[0], 0.6, 1e-10));
        assert!(close(h[1], -0.8, 1e-10));
        assert!(close(h[2], 0.25, 1e-10));
        // Minimal-norm lift is orthogonal to the constraint conormal.
        let g = m.constraint_grad(&x).unwrap().unwrap().map(|j| j.v);
        let dot: f64 = (0..DIM).map(|a| p[a] * g[a]).sum();
        assert!(dot.abs() < 1e-10, "conormal component {dot}");
    }

    #[test]
    fn drift_guard_trips_on_oversized_steps() {
        let m = ContactModel::heisenberg();
        let start = ExtremalState {
            x: [0.0; DIM],
            p: [1.0, 0.0, 4.0, 0.0],
        };
        let mut s = start;
        let err = advance(&m, &mut s, 0.0, 0.4, 0.4, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::DriftExceeded { .. }));
    }

    fn paraboloid_node(u: [f64; 2]) -> (ContactModel, ImplicitSurface, SurfacePatch, TubeNode) {
        let m = ContactModel::heisenberg();
        let surf = ImplicitSurface::rotational(&[0.0, 0.0, 0.5]);
        let patch = SurfacePatch {
            chart: Chart::Rotational {
                g: vec![0.0, 0.0, 0.5],
            },
            u1: [0.5, 1.5],
            u2: [0.0, std::f64::consts::TAU],
            n1: 4,
            n2: 4,
        };
        let node = TubeNode::new(&m, &surf, &patch, u, 1e-4, 1e-6).unwrap();
        (m, surf, patch, node)
    }

    #[test]
    fn jacobian_starts_at_one_with_slope_minus_h() {
        let (m, surf, patch, node) = paraboloid_node([1.0, 0.7]);
        let (c0, h0) = node.c_and_density(&m).unwrap();
        assert!(close(c0, 1.0, 1e-8), "C(0) = {c0}");
        assert!(close(h0, 1.0, 1e-14), "no density, ratio 1");

        // Richardson slope of C at t = 0 against the mean curvature.
        let cp = patch.point(&surf, [1.0, 0.7]).unwrap();
        let h_geom = mean_curvature(&m, &surf, &cp.p, 1e-6).unwrap();
        let c_at = |t: f64| -> f64 {
            let (m2, _, _, mut n2) = paraboloid_node([1.0, 0.7]);
            n2.advance_to(&m2, t, 1e-3).unwrap();
            n2.c_and_density(&m2).unwrap().0
        };
        // One-sided Richardson (nodes cannot flow backwards):
        // 2 D(tau) - D(2 tau) = C'(0) + O(tau^2).
        let tau = 1e-3;
        let d_half = (c_at(tau) - c_at(0.0)) / tau;
        let d_full = (c_at(2.0 * tau) - c_at(0.0)) / (2.0 * tau);
        let slope = 2.0 * d_half - d_full;
        assert!(
            close(slope, -h_geom, 1e-4),
            "C'(0) = {slope} vs -H = {}",
            -h_geom
        );
    }

    #[test]
    fn jacobian_smooth_and_contracting_before_focus() {
        // On the paraboloid H > 0, so C decreases initially and stays
        // positive and smooth well before any focal time.
        let (m, _, _, mut node) = paraboloid_node([1.0, 0.3]);
        let tau = 5e-4;
        let t0 = 0.1;
        node.advance_to(&m, t0 - tau, 1e-3).unwrap();
        let (c_m, _) = node.c_and_density(&m).unwrap();
        node.advance_to(&m, t0, 1e-3).unwrap();
        let (c_0, _) = node.c_and_density(&m).unwrap();
        node.advance_to(&m, t0 + tau, 1e-3).unwrap();
        let (c_p, _) = node.c_and_density(&m).unwrap();
        assert!(c_0 > 0.5 && c_0 < 1.0, "C(0.1) = {c_0}");
        assert!(c_p < c_m, "C still decreasing at t = 0.1");
        let second = (c_p - 2.0 * c_0 + c_m) / (tau * tau);
        assert!(second.abs() < 50.0, "C''(0.1) = {second}");
    }

    #[test]
    fn density_ratio_tracks_transport() {
        let h = Expr::parse("exp(z)").unwrap();
        let m = ContactModel::heisenberg().with_density(h, None);
        let surf = ImplicitSurface::rotational(&[0.0, 0.0, 0.5]);
        let patch = SurfacePatch {
            chart: Chart::Rotational {
                g: vec![0.0, 0.0, 0.5],
            },
            u1: [0.5, 1.5],
            u2: [0.0, std::f64::consts::TAU],
            n1: 4,
            n2: 4,
        };
        let mut node = TubeNode::new(&m, &surf, &patch, [1.0, 0.2], 1e-4, 1e-6).unwrap();
        node.advance_to(&m, 0.15, 1e-3).unwrap();
        let (_, hr) = node.c_and_density(&m).unwrap();
        let z0 = 0.5;
        let z1 = node.center().x[2];
        assert!(close(hr, (z1 - z0).exp(), 1e-12), "{hr}");
        assert!(z1 > z0, "the normal flow climbs the paraboloid's outside");
    }

    #[test]
    fn focal_collapse_is_reported() {
        // The plane through the origin focuses all normals at height
        // z = pi r^2 / 2-ish scale; past the focal time C turns negative and
        // the node must refuse.
        let m = ContactModel::heisenberg();
        let plane = ImplicitSurface::rotational(&[]);
        let patch = SurfacePatch {
            chart: Chart::Rotational { g: vec![] },
            u1: [0.05, 0.3],
            u2: [0.0, std::f64::consts::TAU],
            n1: 4,
            n2: 4,
        };
        let mut node = TubeNode::new(&m, &plane, &patch, [0.1, 1.0], 1e-5, 1e-8).unwrap();
        // All plane normals from the circle of radius r meet on the axis at
        // t = pi r / 2, here 0.157.
        let mut tripped = false;
        for &t in &[0.05, 0.1, 0.2, 0.3] {
            if node.advance_to(&m, t, 5e-4).is_err() {
                tripped = true;
                break;
            }
            match node.c_and_density(&m) {
                Ok((c, _)) => {
                    assert!(c > 0.0);
                    assert!(t < 0.158, "C(t) should have collapsed by {t}");
                }
                Err(Error::TubeValidity { t: tv, value, .. }) => {
                    assert!(tv > 0.15, "collapse reported too early, t = {tv}");
                    assert!(value <= 0.0, "reported C = {value}");
                    tripped = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(tripped, "flow past the focal time must be rejected");
    }

    #[test]
    fn jacobian_second_derivative_matches_transported_curvature() {
        // d2C/dt2(0) = H^2 - N(H), with N(H) the t-slope of the curvature
        // the tube itself transports: H(G(t)) = -C'(t)/C(t), and H(G(0)) is
        // the surface mean curvature. All stencils one-sided in t (tubes
        // flow forward); the second derivative uses the third-order
        // five-point formula, the transported slopes fourth-order centered
        // ones at interior samples.
        let (m, surf, patch, _) = paraboloid_node([1.0, 0.7]);
        for u in [[0.8, 0.4], [1.2, 2.0]] {
            let mut node = TubeNode::new(&m, &surf, &patch, u, 1e-4, 1e-6).unwrap();
            let d = 2e-3;
            let mut c = [0.0; 7];
            for (k, ck) in c.iter_mut().enumerate() {
                node.advance_to(&m, k as f64 * d, 1e-3).unwrap();
                *ck = node.c_and_density(&m).unwrap().0;
            }
            let fd2 = (35.0 * c[0] - 104.0 * c[1] + 114.0 * c[2] - 56.0 * c[3] + 11.0 * c[4])
                / (12.0 * d * d);
            let slope = |k: usize| (c[k - 2] - 8.0 * c[k - 1] + 8.0 * c[k + 1] - c[k + 2]) / (12.0 * d);
            let h2 = -slope(2) / c[2];
            let h4 = -slope(4) / c[4];
            let cp = patch.point(&surf, u).unwrap();
            let h0 = mean_curvature(&m, &surf, &cp.p, 1e-6).unwrap();
            let nh = (-3.0 * h0 + 4.0 * h2 - h4) / (4.0 * d);
            let rhs = h0 * h0 - nh;
            assert!(
                (fd2 - rhs).abs() <= 1e-3 * rhs.abs().max(1.0),
                "u = {u:?}: d2C/dt2 = {fd2} vs H^2 - N(H) = {rhs}"
            );
        }
    }

    #[test]
    fn x0_pairing_slope_matches_jn_pairing() {
        // Transport identity for both variation fields: d/dt <V, X0> = <V, JN>.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(51);
        let band = |g: Vec<f64>| SurfacePatch {
            chart: Chart::Rotational { g },
            u1: [0.5, 1.5],
            u2: [0.0, std::f64::consts::TAU],
            n1: 4,
            n2: 4,
        };
        let cases = [
            (
                ContactModel::heisenberg(),
                ImplicitSurface::rotational(&[0.0, 0.0, 0.5]),
                band(vec![0.0, 0.0, 0.5]),
            ),
            (
                ContactModel::su2(1.0),
                ImplicitSurface {
                    f: Expr::parse("w").unwrap(),
                    s: 1.0,
                },
                SurfacePatch {
                    chart: Chart::Su2Band,
                    u1: [0.0, std::f64::consts::TAU],
                    u2: [-0.5, 0.5],
                    n1: 4,
                    n2: 4,
                },
            ),
            (
                ContactModel::sl2(1.0),
                ImplicitSurface {
                    f: Expr::parse("y - z").unwrap(),
                    s: 1.0,
                },
                SurfacePatch {
                    chart: Chart::Sl2Branch,
                    u1: [-0.4, 0.4],
                    u2: [0.2, 1.0],
                    n1: 4,
                    n2: 4,
                },
            ),
        ];
        for (m, surf, patch) in &cases {
            for _ in 0..20 {
                let u = [
                    rng.random_range(patch.u1[0]..patch.u1[1]),
                    rng.random_range(patch.u2[0]..patch.u2[1]),
                ];
                let t: f64 = rng.random_range(0.01..0.12);
                let tau = 1e-3;
                let mut node = TubeNode::new(m, surf, patch, u, 1e-4, 1e-6).unwrap();
                node.advance_to(m, t - tau, 1e-3).unwrap();
                let a = node.variation_pairings(m).unwrap();
                node.advance_to(m, t, 1e-3).unwrap();
                let mid = node.variation_pairings(m).unwrap();
                node.advance_to(m, t + tau, 1e-3).unwrap();
                let b = node.variation_pairings(m).unwrap();
                for i in 0..2 {
                    let fd = (b[i][1] - a[i][1]) / (2.0 * tau);
                    assert!(
                        (fd - mid[i][0]).abs() <= 1e-5 * mid[i][0].abs().max(1.0),
                        "V{} at u = {u:?}, t = {t}: slope {fd} vs pairing {}",
                        i + 1,
                        mid[i][0]
                    );
                }
            }
        }
    }

    #[test]
    fn endpoint_error_scales_as_fourth_order() {
        let m = ContactModel::heisenberg();
        let (phi, h0, t) = (0.9f64, 3.0f64, 0.48f64);
        let exact = heis_exact(phi, h0, t);
        let err = |step: f64| -> f64 {
            let start = ExtremalState {
                x: [0.0; DIM],
                p: [phi.cos(), phi.sin(), h0, 0.0],
            };
            let path = integrate_extremal(&m, start, t, step).unwrap();
            let e = path.last().unwrap();
            (0..3).map(|a| (e.x[a] - exact[a]).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(8e-3), err(4e-3));
        assert!(
            fine > 1e-13,
            "fine error {fine:.3e} too close to roundoff to measure the order"
        );
        let ratio = coarse / fine;
        assert!(ratio >= 15.0, "step-halving ratio {ratio:.2} (fourth order needs >= 15)");
    }

    #[test]
    fn flow_leaves_the_plane_on_the_co_oriented_side() {
        let m = ContactModel::heisenberg();
        let plane = ImplicitSurface {
            f: Expr::parse("z").unwrap(),
            s: 1.0,
        };
        let patch = SurfacePatch {
            chart: Chart::GraphZ { z0: 0.0 },
            u1: [0.5, 1.5],
            u2: [-0.5, 0.5],
            n1: 4,
            n2: 4,
        };
        let mut node = TubeNode::new(&m, &plane, &patch, [1.0, 0.2], 1e-4, 1e-6).unwrap();
        let mut prev = 0.0;
        for k in 1..=5 {
            node.advance_to(&m, k as f64 * 0.01, 1e-3).unwrap();
            let z = node.center().x[2];
            assert!(z > prev, "z must increase along the outward flow: {z} vs {prev}");
            prev = z;
        }
        // The opposite co-orientation launches to the other side.
        let start = normal_extremal(&m, &plane.flipped(), &[1.0, 0.2, 0.0, 0.0], 1e-6).unwrap();
        let stepped = rk4_step(&m, &start, 1e-2).unwrap();
        assert!(stepped.x[2] < 0.0, "flipped side: z = {}", stepped.x[2]);
    }
}
