//! Half-tube volumes by direct integration of the normal flow, the coarea
//! identity self-check, and a closed-form distance oracle for the Heisenberg
//! group.
//!
//! The half-tube volume is
//!     mu(U_eps) = int_0^eps int_U C(t, u) h(G(t,u))/h(u) dA_mu(u) dt,
//! integrated with Gauss-Legendre rules: tensor nodes on the surface patch
//! and cumulative segments in t so one flow per node serves every requested
//! eps. A half-order t-rule runs alongside the main one; their difference is
//! the reported quadrature error estimate.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::contact::ContactModel;
use crate::expr::Expr;
use crate::flow::TubeNode;
use crate::jet::{Jet1, Jet2, DIM};
use crate::linalg::det3;
use crate::quad::gauss_legendre_on;
use crate::surface::{area_density, ImplicitSurface, SurfacePatch};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct VolumeParams {
    /// Geodesic integrator step.
    pub step: f64,
    /// Offset for the tube-node finite-difference stencil.
    pub fd_step: f64,
    /// Characteristic-point tolerance.
    pub char_tol: f64,
    /// Gauss-Legendre nodes per t-segment (the error estimate uses half as
    /// many).
    pub t_nodes: usize,
}

impl Default for VolumeParams {
    fn default() -> Self {
        VolumeParams {
            step: 1e-3,
            fd_step: 1e-4,
            char_tol: 1e-6,
            t_nodes: 16,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VolumePoint {
    pub eps: f64,
    pub vol: f64,
    pub quad_err: f64,
}

#[derive(Clone, Debug)]
pub struct VolumeSeries {
    pub points: Vec<VolumePoint>,
    pub t_nodes: usize,
    pub surface_nodes: usize,
}

/// Half-tube volumes for every value in `eps` (strictly increasing).
pub fn volume_series(
    model: &ContactModel,
    surf: &ImplicitSurface,
    patch: &SurfacePatch,
    eps: &[f64],
    params: &VolumeParams,
) -> Result<VolumeSeries> {
    if eps.is_empty() {
        return Err(Error::config("need at least one eps value"));
    }
    if eps[0] <= 0.0 || eps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(
            "eps values must be positive and strictly increasing",
        ));
    }
    if params.t_nodes < 2 || params.t_nodes % 2 != 0 {
        return Err(Error::config(format!(
            "t_nodes must be an even number >= 2, got {}",
            params.t_nodes
        )));
    }
    patch.validate(model, surf, params.char_tol)?;

    // Cumulative t-segments [0, eps1], [eps1, eps2], ... with two co-located
    // rules per segment: tag 0 is the main rule, tag 1 the half-order one.
    let nseg = eps.len();
    let mut segments: Vec<Vec<(f64, usize, f64)>> = Vec::with_capacity(nseg);
    for k in 0..nseg {
        let a = if k == 0 { 0.0 } else { eps[k - 1] };
        let b = eps[k];
        let (t_main, w_main) = gauss_legendre_on(params.t_nodes, a, b);
        let (t_half, w_half) = gauss_legendre_on(params.t_nodes / 2, a, b);
        let mut stops: Vec<(f64, usize, f64)> = t_main
            .iter()
            .zip(&w_main)
            .map(|(t, w)| (*t, 0, *w))
            .chain(t_half.iter().zip(&w_half).map(|(t, w)| (*t, 1, *w)))
            .collect();
        stops.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        segments.push(stops);
    }

    let nodes = patch.quad_nodes();
    // Per node: the area weight and both rules' per-segment integrals of
    // C h(G)/h. Parallel over nodes; the reduction below is a fixed-order
    // sequential sum, so results do not depend on thread count.
    let per_node: Vec<(f64, Vec<f64>, Vec<f64>)> = nodes
        .par_iter()
        .map(|&(u, w_u)| -> Result<(f64, Vec<f64>, Vec<f64>)> {
            let cp = patch.point(surf, u)?;
            let da = area_density(model, surf, &cp.p, cp.du1, cp.du2, params.char_tol)?;
            let mut node = TubeNode::new(model, surf, patch, u, params.fd_step, params.char_tol)?;
            let mut seg_main = vec![0.0; nseg];
            let mut seg_half = vec![0.0; nseg];
            for (k, stops) in segments.iter().enumerate() {
                for &(t, tag, w_t) in stops {
                    node.advance_to(model, t, params.step)?;
                    let (c, hr) = node.c_and_density(model)?;
                    let val = c * hr * w_t;
                    if tag == 0 {
                        seg_main[k] += val;
                    } else {
                        seg_half[k] += val;
                    }
                }
            }
            Ok((w_u * da, seg_main, seg_half))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(nseg);
    let mut cum_main = vec![0.0; per_node.len()];
    let mut cum_half = vec![0.0; per_node.len()];
    let mut prev = 0.0;
    for k in 0..nseg {
        let mut vol_main = 0.0;
        let mut vol_half = 0.0;
        for (j, (aw, sm, sh)) in per_node.iter().enumerate() {
            cum_main[j] += sm[k];
            cum_half[j] += sh[k];
            vol_main += aw * cum_main[j];
            vol_half += aw * cum_half[j];
        }
        if !(vol_main > prev) {
            return Err(Error::domain(format!(
                "volume is not increasing at eps = {}: {} after {}",
                eps[k], vol_main, prev
            )));
        }
        prev = vol_main;
        points.push(VolumePoint {
            eps: eps[k],
            vol: vol_main,
            quad_err: (vol_main - vol_half).abs(),
        });
    }
    Ok(VolumeSeries {
        points,
        t_nodes: params.t_nodes,
        surface_nodes: nodes.len(),
    })
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Check the coarea identity
///     int_box f ||grad_H Phi|| dmu = int dt int_{Phi = t} f dA_mu
/// by independent quadrature of both sides. Phi must be affine with at most
/// two active coordinates so the slices are explicit rectangles; 3D models
/// only.
pub fn coarea_check(
    model: &ContactModel,
    phi: &Expr,
    f: &Expr,
    bounds: [[f64; 2]; 3],
    t_range: Option<[f64; 2]>,
    n: usize,
) -> Result<CoareaReport> {
    if model.dim != 3 {
        return Err(Error::unsupported(
            "coarea box domains are defined for 3D models only",
        ));
    }
    if n < 4 {
        return Err(Error::config(format!("need at least 4 nodes per axis, got {n}")));
    }
    for b in &bounds {
        if !(b[0] < b[1]) {
            return Err(Error::config("box bounds must be nonempty"));
        }
    }
    let (alpha, gamma) = affine_coefficients(phi, &bounds)?;

    // Left side: 3D tensor quadrature of f ||grad_H Phi|| h / |det F|.
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
        .map(|i| gauss_legendre_on(n, bounds[i][0], bounds[i][1]))
        .collect();
    let mut lhs = 0.0;
    for (x, wx) in rules[0].0.iter().zip(&rules[0].1) {
        for (y, wy) in rules[1].0.iter().zip(&rules[1].1) {
            for (z, wz) in rules[2].0.iter().zip(&rules[2].1) {
                let p = [*x, *y, *z, 0.0];
                let fv = model.frame_values(&p)?;
                let x1phi: f64 = (0..3).map(|a| fv[0][a] * alpha[a]).sum();
                let x2phi: f64 = (0..3).map(|a| fv[1][a] * alpha[a]).sum();
                let grad_norm = (x1phi * x1phi + x2phi * x2phi).sqrt();
                let detf = det3([
                    [fv[0][0], fv[1][0], fv[2][0]],
                    [fv[0][1], fv[1][1], fv[2][1]],
                    [fv[0][2], fv[1][2], fv[2][2]],
                ]);
                let h = model.density_value(&p)?;
                let fval: f64 = f.eval(&p)?;
                lhs += wx * wy * wz * fval * grad_norm * h / detf.abs();
            }
        }
    }

    // Right side: slice the box by the level sets of Phi. The level range is
    // split at the corner values of Phi, where the slice shape kinks.
    let mut corner_vals = Vec::with_capacity(8);
    for &cx in &bounds[0] {
        for &cy in &bounds[1] {
            for &cz in &bounds[2] {
                corner_vals.push(alpha[0] * cx + alpha[1] * cy + alpha[2] * cz + gamma);
            }
        }
    }
    corner_vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (t_lo, t_hi) = match t_range {
        Some([a, b]) => (a, b),
        None => (corner_vals[0], corner_vals[7]),
    };
    let mut breaks: Vec<f64> = vec![t_lo];
    for &v in &corner_vals {
        if v > t_lo + 1e-12 && v < t_hi - 1e-12 {
            breaks.push(v);
        }
    }
    breaks.push(t_hi);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let active: Vec<usize> = (0..3).filter(|&i| alpha[i] != 0.0).collect();
    let mut rhs = 0.0;
    for seg in breaks.windows(2) {
        let (t_rule, w_rule) = gauss_legendre_on(n, seg[0], seg[1]);
        for (t, wt) in t_rule.iter().zip(&w_rule) {
            let surf_t = ImplicitSurface {
                f: Expr::Sub(Box::new(phi.clone()), Box::new(Expr::num(*t))),
                s: 1.0,
            };
            rhs += wt * slice_integral(model, &surf_t, f, &bounds, &alpha, gamma, &active, *t, n)?;
        }
    }

    let abs_err = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs());
    Ok(CoareaReport {
        lhs,
        rhs,
        abs_err,
        rel_err: if scale > 0.0 { abs_err / scale } else { 0.0 },
    })
}

/// Extract (alpha, gamma) with Phi = alpha . x + gamma, rejecting
/// non-affine expressions and more than two active coordinates.
fn affine_coefficients(phi: &Expr, bounds: &[[f64; 2]; 3]) -> Result<([f64; 3], f64)> {
    let center = [
        0.5 * (bounds[0][0] + bounds[0][1]),
        0.5 * (bounds[1][0] + bounds[1][1]),
        0.5 * (bounds[2][0] + bounds[2][1]),
        0.0,
    ];
    let j: Jet2 = phi.eval(&center)?;
    for row in &j.h {
        for &v in row {
            if v.abs() > 1e-10 {
                return Err(Error::unsupported(
                    "level-set slicing needs an affine expression; curvature detected",
                ));
            }
        }
    }
    if j.g[3].abs() > 1e-12 {
        return Err(Error::unsupported("expression uses the fourth coordinate"));
    }
    // Corners confirm the gradient is globally constant (catches non-affine
    // expressions whose curvature vanishes at the center).
    for &cx in &bounds[0] {
        for &cy in &bounds[1] {
            for &cz in &bounds[2] {
                let jc: Jet1 = phi.eval(&[cx, cy, cz, 0.0])?;
                for a in 0..3 {
                    if (jc.g[a] - j.g[a]).abs() > 1e-10 {
                        return Err(Error::unsupported(
                            "level-set slicing needs an affine expression; gradient varies",
                        ));
                    }
                }
            }
        }
    }
    let alpha = [j.g[0], j.g[1], j.g[2]];
    let n_active = alpha.iter().filter(|a| a.abs() > 0.0).count();
    if n_active == 0 {
        return Err(Error::unsupported("expression is constant; no level sets"));
    }
    if n_active > 2 {
        return Err(Error::unsupported(
            "level-set slicing supports at most two active coordinates",
        ));
    }
    let gamma = j.v - alpha[0] * center[0] - alpha[1] * center[1] - alpha[2] * center[2];
    Ok((alpha, gamma))
}

/// Integral of f over the slice {Phi = t} within the box, against the
/// induced surface measure.
#[allow(clippy::too_many_arguments)]
fn slice_integral(
    model: &ContactModel,
    surf_t: &ImplicitSurface,
    f: &Expr,
    bounds: &[[f64; 2]; 3],
    alpha: &[f64; 3],
    gamma: f64,
    active: &[usize],
    t: f64,
    n: usize,
) -> Result<f64> {
    let char_tol = 1e-12;
    let mut total = 0.0;
    if active.len() == 1 {
        let k = active[0];
        let xk = (t - gamma) / alpha[k];
        let others: Vec<usize> = (0..3).filter(|&i| i != k).collect();
        let (u_rule, uw) = gauss_legendre_on(n, bounds[others[0]][0], bounds[others[0]][1]);
        let (v_rule, vw) = gauss_legendre_on(n, bounds[others[1]][0], bounds[others[1]][1]);
        let mut du1 = [0.0; DIM];
        du1[others[0]] = 1.0;
        let mut du2 = [0.0; DIM];
        du2[others[1]] = 1.0;
        for (u, wu) in u_rule.iter().zip(&uw) {
            for (v, wv) in v_rule.iter().zip(&vw) {
                let mut p = [0.0; DIM];
                p[k] = xk;
                p[others[0]] = *u;
                p[others[1]] = *v;
                let da = area_density(model, surf_t, &p, du1, du2, char_tol)?;
                let fval: f64 = f.eval(&p)?;
                total += wu * wv * fval * da.abs();
            }
        }
    } else {
        let (k1, k2) = (active[0], active[1]);
        let k3 = (0..3).find(|i| !active.contains(i)).unwrap();
        let norm = (alpha[k1] * alpha[k1] + alpha[k2] * alpha[k2]).sqrt();
        let d = [-alpha[k2] / norm, alpha[k1] / norm];
        let base = [
            (t - gamma) * alpha[k1] / (norm * norm),
            (t - gamma) * alpha[k2] / (norm * norm),
        ];
        // Clip the line base + s d to the rectangle of (k1, k2) bounds.
        let mut s_lo = f64::NEG_INFINITY;
        let mut s_hi = f64::INFINITY;
        for (i, &k) in [k1, k2].iter().enumerate() {
            if d[i].abs() < 1e-14 {
                if base[i] < bounds[k][0] || base[i] > bounds[k][1] {
                    return Ok(0.0);
                }
            } else {
                let (a, b) = (
                    (bounds[k][0] - base[i]) / d[i],
                    (bounds[k][1] - base[i]) / d[i],
                );
                s_lo = s_lo.max(a.min(b));
                s_hi = s_hi.min(a.max(b));
            }
        }
        if !(s_lo < s_hi) {
            return Ok(0.0);
        }
        let (s_rule, sw) = gauss_legendre_on(n, s_lo, s_hi);
        let (v_rule, vw) = gauss_legendre_on(n, bounds[k3][0], bounds[k3][1]);
        let mut du1 = [0.0; DIM];
        du1[k1] = d[0];
        du1[k2] = d[1];
        let mut du2 = [0.0; DIM];
        du2[k3] = 1.0;
        for (s, ws) in s_rule.iter().zip(&sw) {
            for (v, wv) in v_rule.iter().zip(&vw) {
                let mut p = [0.0; DIM];
                p[k1] = base[0] + s * d[0];
                p[k2] = base[1] + s * d[1];
                p[k3] = *v;
                let da = area_density(model, surf_t, &p, du1, du2, char_tol)?;
                let fval: f64 = f.eval(&p)?;
                total += ws * wv * fval * da.abs();
            }
        }
    }
    Ok(total)
}

/// Sub-Riemannian distance between two points of the Heisenberg group, via
/// the closed-form geodesics: left-translate so the first point is the
/// origin, then solve (theta - sin theta)/(8 sin^2(theta/2)) = |Z|/R^2 for
/// the winding parameter.
pub fn heisenberg_distance(p: &[f64; DIM], q: &[f64; DIM]) -> f64 {
    let x = q[0] - p[0];
    let y = q[1] - p[1];
    let z = q[2] - p[2] + 0.5 * (p[0] * q[1] - p[1] * q[0]);
    heisenberg_norm(x, y, z)
}

fn theta_ratio(theta: f64) -> f64 {
    if theta < 1e-4 {
        // (theta - sin)/(4 (1 - cos)) with series to avoid cancellation.
        theta / 12.0 * (1.0 + theta * theta / 30.0)
    } else {
        (theta - theta.sin()) / (4.0 * (1.0 - theta.cos()))
    }
}

fn heisenberg_norm(x: f64, y: f64, z: f64) -> f64 {
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    let az = z.abs();
    if az <= 1e-12 * r2 {
        return r;
    }
    if r2 <= 1e-12 * az {
        return 2.0 * (PI * az).sqrt();
    }
    let target = az / r2;
    let mut lo = 0.0;
    let mut hi = 2.0 * PI - 1e-12;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if theta_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    if theta > 1e-4 && theta < 2.0 * PI - 1e-4 {
        for _ in 0..4 {
            let c = theta.cos();
            let s = theta.sin();
            let one_m_c = 1.0 - c;
            let deriv = (one_m_c * one_m_c - (theta - s) * s) / (4.0 * one_m_c * one_m_c);
            let next = theta - (theta_ratio(theta) - target) / deriv;
            if next > 0.0 && next < 2.0 * PI {
                theta = next;
            }
        }
    }
    theta * r / (2.0 * (theta / 2.0).sin())
}

/// Estimated distance from `x` to the surface patch: the minimum of the
/// point-to-point distance over a refined sampling of the patch. Heisenberg
/// only. The estimate can exceed the true distance by at most the final
/// sampling resolution.
pub fn heisenberg_distance_oracle(
    model: &ContactModel,
    x: &[f64; DIM],
    surf: &ImplicitSurface,
    patch: &SurfacePatch,
) -> Result<f64> {
    if model.name != "heisenberg" {
        return Err(Error::unsupported(format!(
            "the distance oracle covers the Heisenberg group only, not `{}`",
            model.name
        )));
    }
    // The distance landscape over a patch is a curved trench, not a round
    // basin: surface points horizontally aligned with x sit near the
    // minimum, while any horizontal misalignment costs ~ sqrt(offset), and
    // the locus of alignment drifts across both chart coordinates. A plain
    // 2D grid refinement locks onto the trench far from the true foot and
    // never recovers. Minimize in a nested fashion instead: for each value
    // of one coordinate the other is minimized over its full range (slices
    // cross the trench smoothly), leaving a one-dimensional V-shaped
    // profile that multilevel window tracking follows to the bottom. Both
    // coordinate orderings are tried and the smaller minimum wins.
    let eval = |u: [f64; 2]| -> Result<f64> {
        let cp = patch.point(surf, u)?;
        Ok(heisenberg_distance(x, &cp.p))
    };
    let mut best = f64::INFINITY;
    for swap in [false, true] {
        let (outer, inner) = if swap {
            (patch.u1, patch.u2)
        } else {
            (patch.u2, patch.u1)
        };
        let profile = |o: f64| -> Result<f64> {
            let slice = |v: f64| eval(if swap { [o, v] } else { [v, o] });
            Ok(line_min(slice, inner, 32, 5)?.1)
        };
        let (_, d) = line_min(profile, outer, 256, 14)?;
        best = best.min(d);
    }
    Ok(best)
}

/// Multilevel 1D minimization: one scan of `coarse + 1` points over the
/// whole range, then `levels` refinements of a window two cells either side
/// of the running argmin, 33 points each, clamped to the range. Each level
/// shrinks the sample spacing eightfold, and the window always contains the
/// minimum of a profile that is unimodal at the current scale, sharp
/// creases included. Returns (argmin, min).
fn line_min<F>(mut f: F, range: [f64; 2], coarse: usize, levels: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (range[0], range[1]);
    let mut best = f64::INFINITY;
    let mut best_v = 0.5 * (lo + hi);
    for level in 0..=levels {
        let grid = if level == 0 { coarse } else { 32 };
        for i in 0..=grid {
            let v = lo + (hi - lo) * i as f64 / grid as f64;
            let d = f(v)?;
            if d < best {
                best = d;
                best_v = v;
            }
        }
        let w = (hi - lo) / grid as f64;
        lo = (best_v - 2.0 * w).max(range[0]);
        hi = (best_v + 2.0 * w).min(range[1]);
    }
    Ok((best_v, best))
}
