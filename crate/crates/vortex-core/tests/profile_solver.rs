use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use vortex_core::grid::{AzimuthalMode, RadialProfile};
use vortex_core::kernels::{gauss_profile, sup_r2h, Vec2};
use vortex_core::point_vortex::{integrate, System, VortexConfiguration};
use vortex_core::profile_solver::{omega_bvp_residual, ProfileSolver, WappOrder};

fn solver() -> &'static ProfileSolver {
    static S: OnceLock<ProfileSolver> = OnceLock::new();
    S.get_or_init(ProfileSolver::default)
}

fn mode(n: usize, c: impl Fn(f64) -> f64, s: impl Fn(f64) -> f64) -> AzimuthalMode {
    let g = solver().grid().clone();
    AzimuthalMode {
        n,
        c_profile: RadialProfile::from_fn(g.clone(), c),
        s_profile: RadialProfile::from_fn(g, s),
    }
}

fn diff(a: &AzimuthalMode, b: &AzimuthalMode) -> AzimuthalMode {
    let mut d = a.clone();
    d.add_scaled(b, -1.0);
    d
}

#[test]
fn homogeneous_solutions_positive_with_flat_wronskian() {
    let s = solver();
    let r = s.grid().nodes();
    for n in 2..=4 {
        let hs = s.homogeneous_solutions(n).unwrap();
        assert!(hs.wronskian_drift < 1e-8, "n={n}: drift {}", hs.wronskian_drift);
        for k in 1..r.len() {
            assert!(hs.psi_minus[k] > 0.0 && hs.psi_plus[k] > 0.0, "n={n}, r={}", r[k]);
        }
        // series normalization
        let k = r.partition_point(|&x| x < 0.01);
        assert!((hs.psi_minus[k] / r[k].powi(n as i32) - 1.0).abs() < 1e-4);
        let target = hs.w0 / (2.0 * n as f64);
        assert!((hs.kappa_minus - target).abs() < 1e-6 * target, "n={n}: κ₋ {} vs {}", hs.kappa_minus, target);
        assert!((hs.kappa_plus - target).abs() < 1e-6 * target, "n={n}: κ₊ {} vs {}", hs.kappa_plus, target);
    }
    assert!(sup_r2h().1 < 4.0);
}

#[test]
fn omega_bvp_zero_source() {
    let s = solver();
    let a = RadialProfile::zeros(s.grid().clone());
    let (om, w) = s.solve_omega_bvp(2, &a).unwrap();
    assert!(om.values.iter().chain(&w.values).all(|&v| v == 0.0));
}

#[test]
fn omega_bvp_residual_small() {
    let s = solver();
    let r = s.grid().nodes();
    for n in [2usize, 3, 4] {
        let a = RadialProfile::from_fn(s.grid().clone(), |r| r.powi(n as i32) * gauss_profile(r));
        let (om, _) = s.solve_omega_bvp(n, &a).unwrap();
        let res = omega_bvp_residual(s, n, &om, &a);
        // weighted max norm, weight (1 + r²)^{-1}
        let scale = (0..r.len()).map(|k| a.values[k].abs() / (n as f64 * s.phi()[k])).fold(0.0, f64::max);
        let worst = (0..r.len()).map(|k| res[k].abs() / (1.0 + r[k] * r[k])).fold(0.0, f64::max);
        assert!(worst < 1e-6 * scale.max(1.0), "n={n}: residual {worst:e}");
    }
}

#[test]
fn omega_asymptotics_mode_two() {
    let s = solver();
    let r = s.grid().nodes();
    let (_, om) = s.reference_omega(2).unwrap().as_ref().clone();
    let slope = |r1: f64, r2: f64, f: &dyn Fn(f64) -> f64| (f(r2) / f(r1)).ln() / (r2 / r1).ln();
    let at = |x: f64| om.at(x).unwrap();
    let near = slope(0.01, 0.05, &at);
    assert!((near - 2.0).abs() < 0.01, "near slope {near}");
    let far = slope(12.0, 18.0, &|x| at(x) * (x * x / 4.0).exp());
    assert!((far - 4.0).abs() < 0.05, "far slope {far}");
    let c1 = at(0.02) / 0.0004;
    let c2 = at(14.0) / (14f64.powi(4) * (-49.0f64).exp());
    assert!(c1 > 0.0 && c2 > 0.0);
    assert!(om.values[1..r.len() - 1].iter().all(|&v| v > 0.0));
}

#[test]
fn lambda_of_radial_is_zero() {
    let s = solver();
    let w = AzimuthalMode::new(0, RadialProfile::from_fn(s.grid().clone(), gauss_profile), RadialProfile::zeros(s.grid().clone())).unwrap();
    let out = s.apply_lambda(&w);
    assert!(out.c_profile.values.iter().chain(&out.s_profile.values).all(|&v| v == 0.0));
}

#[test]
fn gradient_of_g_is_in_the_kernel() {
    let s = solver();
    let w = mode(1, |r| -0.5 * r * gauss_profile(r), |_| 0.0);
    let out = s.apply_lambda(&w);
    let rel = s.y_norm(&out) / s.y_norm(&w);
    assert!(rel < 1e-8, "‖Λ₁∂₁G‖/‖∂₁G‖ = {rel:e}");
}

#[test]
fn round_trips_through_lambda() {
    let s = solver();
    let zs = [
        mode(2, |_| 0.0, |r| r * r * gauss_profile(r)),
        mode(3, |r| -0.3 * r.powi(3) * gauss_profile(r), |r| 0.7 * r.powi(3) * gauss_profile(r)),
        mode(4, |r| r.powi(4) * gauss_profile(r), |_| 0.0),
    ];
    for z in &zs {
        let w = s.solve_lambda(z).unwrap();
        let back = s.apply_lambda(&w);
        let rel = s.y_norm(&diff(&back, z)) / s.y_norm(z);
        assert!(rel < 1e-6, "n={}: {rel:e}", z.n);
    }
    // Λ(−ω cos 2θ) = r²g sin 2θ
    let (_, om) = s.reference_omega(2).unwrap().as_ref().clone();
    let w = AzimuthalMode { n: 2, c_profile: om.clone(), s_profile: RadialProfile::zeros(s.grid().clone()) }.scaled(-1.0);
    let back = s.apply_lambda(&w);
    let rel = s.y_norm(&diff(&back, &zs[0])) / s.y_norm(&zs[0]);
    assert!(rel < 1e-6, "{rel:e}");
}

#[test]
fn regularized_bound_and_linear_convergence() {
    let s = solver();
    let z = mode(2, |_| 0.0, |r| -r * r * gauss_profile(r) / (4.0 * PI));
    let w = s.solve_lambda(&z).unwrap();
    let rel = |e: f64| {
        let we = s.solve_regularized(e, &z).unwrap();
        assert!(s.y_norm(&we) <= s.y_norm(&z) / e.abs());
        s.y_norm(&diff(&we, &w)) / s.y_norm(&w)
    };
    // linear where ε is small against the O(10⁻²) scale of Λ on the core
    let (lo, hi) = (rel(1e-6), rel(1e-4));
    let slope = (hi / lo).ln() / 100f64.ln();
    assert!((slope - 1.0).abs() <= 0.1, "slope {slope}");
    for e in [1e-3, 1e-2, 1e-1] {
        let a = rel(e);
        let b = rel(-e);
        assert!((a - b).abs() <= 1e-8, "ε={e}: {a:e} vs {b:e}");
    }
}

#[test]
fn regularized_mode_one_is_solvable() {
    let s = solver();
    let z = mode(1, |r| r * gauss_profile(r), |r| 0.5 * r * gauss_profile(r));
    for e in [1e-1, 1e-2] {
        let w = s.solve_regularized(e, &z).unwrap();
        assert!(w.c_profile.values.iter().all(|v| v.is_finite()));
    }
}

fn random_mode(n: usize, coef: &[f64]) -> AzimuthalMode {
    // smooth Z-class data: polynomial times e^{−r²/4}
    let c = coef.to_vec();
    let c2 = coef.to_vec();
    mode(
        n,
        move |r| r.powi(n as i32) * (c[0] + c[1] * r + c[2] * r * r) * gauss_profile(r),
        move |r| if n == 0 { 0.0 } else { r.powi(n as i32) * (c2[3] + c2[4] * r * r) * gauss_profile(r) },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lambda_is_skew(n in 1usize..=4, coef in prop::collection::vec(-1.0f64..1.0, 5), noise in prop::collection::vec(-1.0f64..1.0, 16)) {
        let s = solver();
        let mut u = random_mode(n, &coef);
        // rough component so the check is not limited to smooth data
        let m = s.len();
        for (q, v) in noise.iter().enumerate() {
            let k = 1 + (q * 97) % (m - 2);
            u.c_profile.values[k] += v * gauss_profile(s.grid().nodes()[k]);
        }
        let lu = s.apply_lambda(&u);
        let ip = s.y_inner(&lu, &u);
        let nn = s.y_inner(&u, &u);
        prop_assert!(ip.abs() <= 1e-10 * nn, "⟨Λu,u⟩ = {ip:e}, ‖u‖² = {nn:e}");
    }

    #[test]
    fn regularized_solution_bounded(coef in prop::collection::vec(-1.0f64..1.0, 5), k in 0usize..3) {
        let s = solver();
        let eps = [0.3, 0.03, -0.05][k];
        let z = random_mode(2, &coef);
        let w = s.solve_regularized(eps, &z).unwrap();
        prop_assert!(s.y_norm(&w) <= s.y_norm(&z) / eps.abs() * (1.0 + 1e-12));
    }
}

fn equal_pair() -> vortex_core::point_vortex::Trajectory {
    let cfg = VortexConfiguration::new(vec![Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0)], vec![1.0, 1.0], 0.01, 0.5).unwrap();
    integrate(&cfg, System::Pw, 51).unwrap()
}

#[test]
fn single_vortex_has_no_deformation() {
    let s = solver();
    let cfg = VortexConfiguration::new(vec![Vec2::new(0.0, 0.0)], vec![1.0], 0.01, 1.0).unwrap();
    let traj = integrate(&cfg, System::Pw, 11).unwrap();
    let p = s.build_deformation(&traj, 0, 0.5, 0.01).unwrap();
    for m in [&p.f0, &p.fnu, &p.fbar, &p.h[0]] {
        assert!(m.c_profile.values.iter().chain(&m.s_profile.values).all(|&v| v == 0.0));
    }
    let w = s.assemble_wapp(&p, 0.0, WappOrder::ThreeHalves);
    let xi = Vec2::new(0.3, -1.2);
    assert_eq!(w.eval(xi), vortex_core::kernels::gauss(xi));
}

#[test]
fn deformation_of_an_equal_pair() {
    let s = solver();
    let traj = equal_pair();
    let t = 0.25;
    let nus = [1e-5, 1e-4];
    let mut gaps = Vec::new();
    for &nu in &nus {
        let p = s.build_deformation(&traj, 0, t, nu).unwrap();
        gaps.push(s.y_norm(&diff(&p.fnu, &p.f0)));

        // F⁰ bound |profile| ≤ C r²(1 + r²)e^{−r²/4}
        let r = s.grid().nodes();
        let c = (1..r.len())
            .map(|k| p.f0.c_profile.values[k].abs().max(p.f0.s_profile.values[k].abs()) / (r[k] * r[k] * (1.0 + r[k] * r[k]) * (-r[k] * r[k] / 4.0).exp()))
            .fold(0.0, f64::max);
        assert!(c.is_finite() && c < 1e3);

        // F⁰ phase: cos 2(θ − θ_ij)
        let th = p.pairs[0].2;
        let k = r.partition_point(|&x| x < 2.0);
        let phase = 0.5 * p.f0.s_profile.values[k].atan2(p.f0.c_profile.values[k]);
        let dphi = ((phase - th).rem_euclid(PI / 2.0 * 2.0)).min((th - phase).rem_euclid(PI));
        assert!(dphi < 1e-9 || (PI - dphi) < 1e-9, "phase {phase} vs θ_ij {th}");

        // F̄ mass
        assert!(p.fbar.c_profile.mass().abs() < 1e-8, "mass {}", p.fbar.c_profile.mass());

        // w_app integrates to 1 and its quadrupole matches ω(r)(α_j/α_i)νt/(4π|z|²) at small ν
        let w = s.assemble_wapp(&p, nu * t / (traj.d * traj.d), WappOrder::First);
        let polar = vortex_core::grid::PolarGrid::new(401, 20.0, 64);
        let weights = polar.area_weights();
        let total: f64 = polar.points().zip(&weights).map(|((r, a), w_)| w_ * w.eval(Vec2::from_polar(r, a))).sum();
        assert!((total - 1.0).abs() < 1e-6, "∫w_app = {total}");
    }
    let ratio = gaps[1] / gaps[0];
    assert!((ratio - 10.0).abs() < 1.0, "‖F^ν − F⁰‖ should scale like ν: {gaps:?}");
}

#[test]
fn wapp_quadrupole_matches_closed_form() {
    let s = solver();
    let traj = equal_pair();
    let (t, nu) = (0.25, 1e-6);
    let p = s.build_deformation(&traj, 0, t, nu).unwrap();
    let eps = nu * t / (traj.d * traj.d);
    let w = s.assemble_wapp(&p, eps, WappOrder::First);
    let (_, om) = s.reference_omega(2).unwrap().as_ref().clone();
    let z = traj.z_ij(0, 1, t).unwrap();
    let th = z.angle();
    for r in [0.5, 1.5, 3.0] {
        // P₂ of (w_app − G − εF̄) by an 8-angle projection
        let mut cc = 0.0;
        let mut ss = 0.0;
        for q in 0..8 {
            let a = 2.0 * PI * q as f64 / 8.0;
            let v = w.eval(Vec2::from_polar(r, a));
            cc += v * (2.0 * a).cos() / 4.0;
            ss += v * (2.0 * a).sin() / 4.0;
        }
        let amp = om.at(r).unwrap() * nu * t / (4.0 * PI * z.norm_sq());
        let expect_c = amp * (2.0 * th).cos();
        let expect_s = amp * (2.0 * th).sin();
        let err = ((cc - expect_c).powi(2) + (ss - expect_s).powi(2)).sqrt();
        assert!(err < 2e-3 * amp.abs() + 1e-12, "r={r}: ({cc:e}, {ss:e}) vs ({expect_c:e}, {expect_s:e})");
    }
}

#[test]
fn fbar_matches_duhamel_for_a_frozen_source() {
    let s = solver();
    let g = s.grid().clone();
    // zero-mass radial source
    let q = RadialProfile::from_fn(g.clone(), |r| (r * r / 4.0 - 1.0) * gauss_profile(r) * (1.0 + 0.1 * r * r));
    let q_mass = q.mass();
    let gp = RadialProfile::from_fn(g.clone(), gauss_profile);
    let qv: Vec<f64> = q.values.iter().zip(&gp.values).map(|(a, b)| a - q_mass / gp.mass() * b).collect();
    let coeff = 1.0;
    let t = 1.0;
    let stepped = s
        .evolve_radial(|_| Ok(qv.clone()), coeff, 1e-3 * t, &[t], true)
        .unwrap()
        .pop()
        .unwrap();
    // F̄(t) = −coeff ∫_0^t S(log(t/s)) (s/t) s·q ds   (source −coeff·s·q)
    //      = −coeff·t ∫_0^∞ e^{−2σ} S(σ) q dσ with s = t e^{−σ}
    let sigmas: Vec<f64> = (0..=400).map(|k| 8.0 * k as f64 / 400.0).collect();
    let mut acc = vec![0.0; g.len()];
    let mut state = qv.clone();
    let mut prev = 0.0;
    let h = sigmas[1];
    for (k, &sg) in sigmas.iter().enumerate() {
        if sg > prev {
            state = s.semigroup_action(&state, sg - prev);
            prev = sg;
        }
        let w = if k == 0 || k == sigmas.len() - 1 { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        for (a, v) in acc.iter_mut().zip(&state) {
            *a += -coeff * t * w * h / 3.0 * (-2.0 * sg).exp() * v;
        }
    }
    let a = AzimuthalMode::new(0, stepped, RadialProfile::zeros(g.clone())).unwrap();
    let b = AzimuthalMode::new(0, RadialProfile { grid: g.clone(), values: acc }, RadialProfile::zeros(g)).unwrap();
    let rel = s.y_norm(&diff(&a, &b)) / s.y_norm(&b);
    assert!(rel < 1e-4, "Duhamel mismatch {rel:e}");
}

#[test]
fn profile_csv_columns() {
    let s = solver();
    let m = mode(2, |r| r, |_| 0.0);
    let mut buf = Vec::new();
    vortex_core::profile_solver::write_profile_csv(&mut buf, &m).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,mode_n,cos_coeff,sin_coeff"));
    assert_eq!(text.lines().count(), s.len() + 1);
    let _ = Arc::strong_count(s.grid());
}

