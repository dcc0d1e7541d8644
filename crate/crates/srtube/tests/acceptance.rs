//! Acceptance gate: one test per shipped claim, each printing a single
//! verdict line (visible with `cargo test --test acceptance -- --nocapture`;
//! failing tests always show theirs).
//!
//! Two checks fail by design against their stated reference values and carry
//! the full analysis in their panic messages: the plane-annulus first
//! coefficient (the stated 3*pi does not match any measure this geometry
//! produces; every independent route gives 7*pi/3) and the rotational
//! third-coefficient reference formula (off by exactly 4x from the value the
//! geometry and the volume series both produce). Everything else is green.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srtube::contact::{metric_invariants, ContactModel};
use srtube::expr::Expr;
use srtube::flow::{
    integrate_extremal, normal_extremal, rk4_step, transversality_covector, ExtremalState,
    TubeNode,
};
use srtube::scene;
use srtube::steiner::{self, verify_from_parts, ExpansionFit, Tolerances};
use srtube::surface::{
    a3_integrand, mean_curvature, riemannian_mean_curvature, surface_frame, Chart,
    ImplicitSurface, SurfacePatch,
};
use srtube::volume::{coarea_check, heisenberg_distance_oracle};

fn verdict(n: usize, pass: bool, detail: &str) {
    println!(
        "acceptance {n}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn load(name: &str) -> scene::Scene {
    scene::load(Some(name), None).unwrap()
}

#[test]
fn criterion_1_model_invariants() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (ContactModel::heisenberg(), 0.0),
        (ContactModel::su2(1.0), 4.0),
        (ContactModel::su2(0.7), 4.0 * 0.49),
        (ContactModel::sl2(1.0), -4.0),
        (ContactModel::sl2(1.3), -4.0 * 1.69),
    ];
    let mut worst = 0.0f64;
    for (model, kappa) in &cases {
        for _ in 0..8 {
            let x = model.sample_point(&mut rng);
            let inv = metric_invariants(model, &x).unwrap();
            worst = worst.max(inv.chi.abs()).max((inv.kappa - kappa).abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && dt < 1.0;
    verdict(
        1,
        pass,
        &format!("(chi, kappa) at 40 sampled points across 5 models, worst error {worst:.2e}, {dt:.2}s"),
    );
    assert!(pass, "worst invariant error {worst:.3e} (tol 1e-9) in {dt:.2}s (budget 1s)");
}

#[test]
fn criterion_2_plane_annulus_reference_value() {
    let t0 = Instant::now();
    let s = load("heisenberg-plane-annulus");
    let report = steiner::verify(
        &s.name,
        s.info.clone(),
        &s.model,
        &s.surface,
        &s.patch,
        &s.eps,
        &s.params,
        s.weighted_fit,
        &s.tolerances,
    )
    .unwrap();
    let [a1, a2, a3] = report.a;
    let [f1, f2, f3] = report.a_fit;
    let dt = t0.elapsed().as_secs_f64();

    // What the geometry does satisfy: the plane is flat for this measure
    // (second and third coefficients vanish to quadrature precision) and the
    // fitted volume series reproduces the quadrature coefficients.
    assert!(dt < 60.0, "took {dt:.1}s, budget 60s");
    assert!(
        a2.abs() < 1e-9 * a1 && a3.abs() < 1e-9 * a1,
        "quadrature flatness: a2 = {a2:.3e}, a3 = {a3:.3e}"
    );
    assert!(
        (f1 - a1).abs() < 1e-4 * a1,
        "fit vs quadrature first coefficient: {f1} vs {a1}"
    );
    assert!(
        f2.abs() < 1e-3 * f1 && f3.abs() < 1e-3 * f1,
        "fitted flatness: a2_fit = {f2:.3e}, a3_fit = {f3:.3e}"
    );

    let stated = 3.0 * PI;
    let pass = (a1 - stated).abs() < 1e-4 * stated && (f1 - stated).abs() < 1e-4 * stated;
    verdict(
        2,
        pass,
        &format!(
            "annulus first coefficient: quadrature {a1:.9}, fit {f1:.9}, stated reference {stated:.9}"
        ),
    );
    assert!(
        pass,
        "the stated reference 3*pi = {stated:.6} is not what this geometry produces. \
         On z = 0 the horizontal gradient of z has norm r/2 at radius r, so the \
         perimeter density pulled back to the (r, theta) chart is (r/2) * r = r^2/2, \
         and the annulus 1 <= r <= 2 integrates to (2pi)(2^3 - 1^3)/6 = 7pi/3 = {:.9}. \
         Independent routes agree: closed-form quadrature {a1:.9}, coordinate-determinant \
         quadrature (same to 1e-14), the fitted slope of the geodesic-flow volume series \
         {f1:.9}, and the Carnot distance oracle (volume tests). No density on this \
         surface yields 3*pi while keeping a2 = a3 = 0.",
        7.0 * PI / 3.0
    );
}

#[test]
fn criterion_3_su2_sl2_pointwise_cancellations() {
    let mut detail = String::new();
    let mut pass = true;
    for name in ["su2-band", "sl2-patch"] {
        let t0 = Instant::now();
        let s = load(name);
        let (mut worst_h, mut worst_a3) = (0.0f64, 0.0f64);
        for (u, _) in s.patch.quad_nodes() {
            let p = s.patch.point(&s.surface, u).unwrap().p;
            let h = mean_curvature(&s.model, &s.surface, &p, s.params.char_tol).unwrap();
            let i3 = a3_integrand(&s.model, &s.surface, &p, s.params.char_tol).unwrap();
            worst_h = worst_h.max(h.abs());
            worst_a3 = worst_a3.max(i3.abs());
        }
        let dt = t0.elapsed().as_secs_f64();
        pass &= worst_h < 1e-8 && worst_a3 < 1e-8 && dt < 30.0;
        detail += &format!("{name}: max|H| = {worst_h:.2e}, max|I3| = {worst_a3:.2e}, {dt:.2}s; ");
        assert!(
            worst_h < 1e-8 && worst_a3 < 1e-8,
            "{name}: integrands must vanish at every node, got max|H| = {worst_h:.3e}, max|I3| = {worst_a3:.3e}"
        );
        assert!(dt < 30.0, "{name} took {dt:.1}s, budget 30s");
    }
    verdict(3, pass, detail.trim_end_matches("; "));
    assert!(pass);
}

fn poly012(g: &[f64], r: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (k, c) in g.iter().enumerate() {
        let kf = k as f64;
        v += c * r.powi(k as i32);
        if k >= 1 {
            d1 += c * kf * r.powi(k as i32 - 1);
        }
        if k >= 2 {
            d2 += c * kf * (kf - 1.0) * r.powi(k as i32 - 2);
        }
    }
    (v, d1, d2)
}

#[test]
fn criterion_4_rotational_closed_forms() {
    let model = ContactModel::heisenberg();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let profiles: [&[f64]; 3] = [
        &[0.0, 0.0, 0.5],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 0.5, 0.0, 0.25],
    ];
    let mut worst_h = 0.0f64;
    let mut worst_i3_printed = 0.0f64;
    let mut ratio_lo = f64::INFINITY;
    let mut ratio_hi = f64::NEG_INFINITY;
    for _ in 0..200 {
        let r = rng.random_range(0.3..3.0);
        let th = rng.random_range(0.0..TAU);
        for g in profiles {
            let surf = ImplicitSurface::rotational(g);
            let (gv, g1, g2) = poly012(g, r);
            let p = [r * th.cos(), r * th.sin(), gv, 0.0];
            let w = r * r + 4.0 * g1 * g1;

            let h = mean_curvature(&model, &surf, &p, 1e-6).unwrap();
            let h_closed = 2.0 * (4.0 * g1.powi(3) + r.powi(3) * g2) / (r * w.powf(1.5));
            worst_h = worst_h.max((h - h_closed).abs() / h_closed.abs());

            let i3 = a3_integrand(&model, &surf, &p, 1e-6).unwrap();
            let printed = 4.0 * g1 * (r * g2 - g1) / (w * w);
            if printed.abs() > 1e-12 {
                worst_i3_printed = worst_i3_printed.max((i3 - printed).abs() / printed.abs());
                ratio_lo = ratio_lo.min(i3 / printed);
                ratio_hi = ratio_hi.max(i3 / printed);
            } else {
                // The paraboloid profile satisfies r g'' = g', so both sides
                // vanish and the prefactor is invisible.
                worst_i3_printed = worst_i3_printed.max((i3 - printed).abs());
            }
        }
    }
    assert!(
        worst_h < 1e-10,
        "mean curvature vs its closed form: worst relative deviation {worst_h:.3e}"
    );
    let pass = worst_i3_printed < 1e-10;
    verdict(
        4,
        pass,
        &format!(
            "rotational closed forms, 200 samples x 3 profiles: H matches to {worst_h:.2e}; \
             I3 vs printed reference off by factor {ratio_lo:.12}..{ratio_hi:.12}"
        ),
    );
    assert!(
        pass,
        "the printed reference 4 g'(r g'' - g')/(r^2 + 4 g'^2)^2 is off by exactly 4x: \
         computed/printed = {ratio_lo:.12}..{ratio_hi:.12} over every sample where it is \
         nonzero. The consistent prefactor is 16. Evidence: (1) at g = r^3, r = 1 the \
         defining identity I3 = 2 X_S(X0 delta) - (X0 delta)^2 - kappa - <tau(X_S), N> \
         evaluates term by term to 144/1369 = 16 * 9/1369, while the reference gives \
         36/1369; (2) the geodesic-flow volume series fits a third coefficient matching \
         the 16-prefactor integral (cubic-band tests); (3) the reference formula's own \
         intermediate quantities (X0 delta = 4 g' / w with w = r^2 + 4 g'^2, X_S applied \
         along the profile) reproduce 16, not 4. The paraboloid profile r^2/2 is excluded \
         from the ratio because r g'' - g' = 0 there."
    );
}

#[test]
fn criterion_5_jacobian_derivative_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let d1 = 1e-3;
    let d2 = 2e-3;
    let (mut worst_c0, mut worst_first, mut worst_second) = (0.0f64, 0.0f64, 0.0f64);
    for name in scene::builtin_names() {
        let s = load(name);
        for _ in 0..20 {
            let u = [
                rng.random_range(s.patch.u1[0]..s.patch.u1[1]),
                rng.random_range(s.patch.u2[0]..s.patch.u2[1]),
            ];
            let mut node = TubeNode::new(
                &s.model,
                &s.surface,
                &s.patch,
                u,
                s.params.fd_step,
                s.params.char_tol,
            )
            .unwrap();
            let c = |node: &mut TubeNode, t: f64| {
                node.advance_to(&s.model, t, s.params.step).unwrap();
                node.c_and_density(&s.model).unwrap().0
            };
            let c0 = c(&mut node, 0.0);
            worst_c0 = worst_c0.max((c0 - 1.0).abs());

            // One-sided stencils; the flow only runs forward. The second
            // derivative uses the third-order five-point formula to keep
            // truncation below the stated tolerance.
            let (ca1, ca2) = (c(&mut node, d1), c(&mut node, 2.0 * d1));
            let cb: Vec<f64> = (1..=4).map(|k| c(&mut node, k as f64 * d2)).collect();
            let fd1 = (-3.0 * c0 + 4.0 * ca1 - ca2) / (2.0 * d1);
            let fd2 = (35.0 * c0 - 104.0 * cb[0] + 114.0 * cb[1] - 56.0 * cb[2]
                + 11.0 * cb[3])
                / (12.0 * d2 * d2);

            // The right side H^2 - N(H) uses the tube extension of H (levels
            // of the metric distance, not of the defining function, which
            // carries no meaning off the surface); its closed pointwise form
            // is exactly the third-coefficient integrand.
            let cp = s.patch.point(&s.surface, u).unwrap();
            let h0 = mean_curvature(&s.model, &s.surface, &cp.p, s.params.char_tol).unwrap();
            let rhs = a3_integrand(&s.model, &s.surface, &cp.p, s.params.char_tol).unwrap();

            worst_first = worst_first.max((fd1 + h0).abs() / h0.abs().max(1.0));
            worst_second = worst_second.max((fd2 - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    let pass = worst_c0 < 1e-8 && worst_first < 1e-5 && worst_second < 1e-3;
    verdict(
        5,
        pass,
        &format!(
            "C(0) = 1 to {worst_c0:.2e}; dC/dt = -H to {worst_first:.2e} rel; \
             d2C/dt2 = H^2 - N(H) to {worst_second:.2e} rel (20 nodes x 5 scenes)"
        ),
    );
    assert!(
        pass,
        "C(0): {worst_c0:.3e} (tol 1e-8), first: {worst_first:.3e} (tol 1e-5), second: {worst_second:.3e} (tol 1e-3)"
    );
}

#[test]
fn criterion_6_riemannian_approximation_order() {
    let model = ContactModel::heisenberg();
    let surf = ImplicitSurface::rotational(&[0.0, 0.0, 0.5]);
    let p = [1.0, 0.0, 0.5, 0.0];
    let h = mean_curvature(&model, &surf, &p, 1e-6).unwrap();
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&e| (riemannian_mean_curvature(&model, &surf, &p, e, 1e-6).unwrap() - h).abs())
        .collect();
    let o1 = (errs[0] / errs[1]).log2();
    let o2 = (errs[1] / errs[2]).log2();
    let pass = o1 >= 1.9 && o2 >= 1.9;
    verdict(
        6,
        pass,
        &format!("|H_eps - H| on the paraboloid at r = 1: orders {o1:.3}, {o2:.3}"),
    );
    assert!(pass, "observed orders {o1:.3}, {o2:.3} (need >= 1.9); errors {errs:?}");
}

#[test]
fn criterion_7_coarea_identity() {
    let model = ContactModel::heisenberg();
    let phi = Expr::parse("x").unwrap();
    let f = Expr::parse("1").unwrap();
    let r = coarea_check(&model, &phi, &f, [[0.0, 1.0]; 3], None, 24).unwrap();
    let pass = r.rel_err < 1e-6;
    verdict(
        7,
        pass,
        &format!(
            "slicing the unit box by x: lhs {:.12}, rhs {:.12}, rel err {:.2e}",
            r.lhs, r.rhs, r.rel_err
        ),
    );
    assert!(pass, "coarea relative error {:.3e} (tol 1e-6)", r.rel_err);
}

/// Heisenberg extremal from the origin with momenta (cos phi, sin phi, h0).
fn heis_exact(phi: f64, h0: f64, t: f64) -> [f64; 3] {
    let (s0, c0) = phi.sin_cos();
    if h0.abs() < 1e-14 {
        return [t * c0, t * s0, 0.0];
    }
    let th = h0 * t;
    let re = (th.sin() * c0 + (1.0 - th.cos()) * s0) / h0;
    let im = (th.sin() * s0 - (1.0 - th.cos()) * c0) / h0;
    [re, im, (th - th.sin()) / (2.0 * h0 * h0)]
}

#[test]
fn criterion_8_geodesic_integrity() {
    // Hamiltonian drift over one unit of time at the production step.
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst_drift = 0.0f64;
    for model in [
        ContactModel::heisenberg(),
        ContactModel::su2(1.0),
        ContactModel::sl2(1.0),
    ] {
        let x = model.sample_point(&mut rng);
        let p = transversality_covector(&model, &x, [0.6, 0.8, 0.5]).unwrap();
        let path = integrate_extremal(&model, ExtremalState { x, p }, 1.0, 1e-3).unwrap();
        let h2 = |s: &srtube::flow::PathSample| s.h[0] * s.h[0] + s.h[1] * s.h[1];
        let h2_0 = h2(&path[0]);
        for s in &path {
            worst_drift = worst_drift.max((h2(s) - h2_0).abs());
        }
    }
    assert!(
        worst_drift < 1e-9,
        "Hamiltonian drift {worst_drift:.3e} over unit time (budget 1e-9)"
    );

    // Endpoint against the closed-form exponential.
    let model = ContactModel::heisenberg();
    let mut worst_end = 0.0f64;
    for (phi, h0) in [(0.4f64, 1.3f64), (2.1, -0.8), (5.9, 2.4)] {
        let start = ExtremalState {
            x: [0.0; 4],
            p: [phi.cos(), phi.sin(), h0, 0.0],
        };
        let end = integrate_extremal(&model, start, 0.5, 1e-3).unwrap();
        let end = end.last().unwrap();
        let exact = heis_exact(phi, h0, 0.5);
        for a in 0..3 {
            worst_end = worst_end.max((end.x[a] - exact[a]).abs());
        }
    }
    assert!(
        worst_end < 1e-8,
        "endpoint vs closed form at t = 0.5: {worst_end:.3e} (tol 1e-8)"
    );

    // Distance-oracle consistency: flow out t, ask the brute-force metric
    // minimizer for the distance back to the surface.
    let s = load("heisenberg-plane-annulus");
    let mut worst_oracle = 0.0f64;
    for _ in 0..10 {
        let u = [rng.random_range(1.2..1.8), rng.random_range(0.5..5.5)];
        let t: f64 = rng.random_range(0.01..0.1);
        let cp = s.patch.point(&s.surface, u).unwrap();
        let start = normal_extremal(&s.model, &s.surface, &cp.p, s.params.char_tol).unwrap();
        let mut st = start;
        let steps = (t / 1e-3).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        for _ in 0..steps {
            st = rk4_step(&s.model, &st, dt).unwrap();
        }
        let d = heisenberg_distance_oracle(&s.model, &st.x, &s.surface, &s.patch).unwrap();
        worst_oracle = worst_oracle.max((d - t).abs());
    }
    let pass = worst_oracle <= 3e-3;
    verdict(
        8,
        pass,
        &format!(
            "drift {worst_drift:.2e}/unit t, endpoint vs exponential {worst_end:.2e}, \
             oracle |d - t| <= {worst_oracle:.2e} over 10 launches"
        ),
    );
    assert!(pass, "oracle consistency {worst_oracle:.3e} (tol 3e-3)");
}

#[test]
fn criterion_9_property_suite_spot_checks() {
    // Unit-norm identity at every quadrature node of every built-in scene.
    let mut worst_norm = 0.0f64;
    for name in scene::builtin_names() {
        let s = load(name);
        for (u, _) in s.patch.quad_nodes() {
            let p = s.patch.point(&s.surface, u).unwrap().p;
            let q = surface_frame(&s.model, &s.surface, &p, s.params.char_tol)
                .unwrap()
                .q;
            worst_norm = worst_norm.max((q[0] * q[0] + q[1] * q[1] - 1.0).abs());
        }
    }
    assert!(worst_norm < 1e-12, "unit-norm identity: {worst_norm:.3e}");

    // The geometry only sees the zero set: f and e^phi f agree.
    let model = ContactModel::heisenberg();
    let base = ImplicitSurface {
        f: Expr::parse("z - x*x/2 - y").unwrap(),
        s: 1.0,
    };
    let scaled = ImplicitSurface {
        f: Expr::parse("exp(0.3*x - 0.2*z) * (z - x*x/2 - y)").unwrap(),
        s: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_gauge = 0.0f64;
    for _ in 0..20 {
        let x = rng.random_range(-1.0..1.0);
        let y = rng.random_range(-1.0..1.0);
        let p = [x, y, x * x / 2.0 + y, 0.0];
        let pairs = [
            (
                mean_curvature(&model, &base, &p, 1e-6).unwrap(),
                mean_curvature(&model, &scaled, &p, 1e-6).unwrap(),
            ),
            (
                a3_integrand(&model, &base, &p, 1e-6).unwrap(),
                a3_integrand(&model, &scaled, &p, 1e-6).unwrap(),
            ),
        ];
        for (a, b) in pairs {
            worst_gauge = worst_gauge.max((a - b).abs());
        }
    }
    assert!(worst_gauge < 1e-9, "defining-function invariance: {worst_gauge:.3e}");

    // Orientation covariance: flipping the co-orientation negates the second
    // coefficient and keeps the first and third.
    let surf = ImplicitSurface::rotational(&[0.0, 0.0, 0.5]);
    let patch = SurfacePatch {
        chart: Chart::Rotational { g: vec![0.0, 0.0, 0.5] },
        u1: [0.5, 1.5],
        u2: [0.0, TAU],
        n1: 16,
        n2: 16,
    };
    let up = steiner::coefficients(&model, &surf, &patch, 1e-6).unwrap();
    let flipped = surf.clone().flipped();
    let swapped = SurfacePatch {
        chart: Chart::Swapped(Box::new(patch.chart.clone())),
        u1: patch.u2,
        u2: patch.u1,
        n1: patch.n2,
        n2: patch.n1,
    };
    let down = steiner::coefficients(&model, &flipped, &swapped, 1e-6).unwrap();
    let cov = (up.a1 - down.a1)
        .abs()
        .max((up.a2 + down.a2).abs())
        .max((up.a3.unwrap() - down.a3.unwrap()).abs());
    assert!(cov < 1e-12, "orientation covariance: {cov:.3e}");

    // Negative control: a corrupted fit must be flagged, coefficient by
    // coefficient.
    let a = [up.a1, up.a2, up.a3.unwrap()];
    let good = ExpansionFit {
        a,
        residual: 0.0,
        cond: 1.0,
    };
    let tols = Tolerances::default();
    let ok = verify_from_parts("control", steiner::ModelInfo::named("heisenberg"), a, [0.0; 3], &good, &tols);
    assert_eq!(ok.pass, [true, true, true]);
    let bad = ExpansionFit {
        a: [a[0], -a[1], a[2]],
        residual: 0.0,
        cond: 1.0,
    };
    let flagged = verify_from_parts("control", steiner::ModelInfo::named("heisenberg"), a, [0.0; 3], &bad, &tols);
    assert!(!flagged.pass[1] && flagged.pass[0] && flagged.pass[2]);

    verdict(
        9,
        true,
        &format!(
            "unit-norm {worst_norm:.2e}, gauge invariance {worst_gauge:.2e}, \
             orientation covariance {cov:.2e}, negative control flagged"
        ),
    );
}
