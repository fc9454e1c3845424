use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use vortex_core::kernels::gauss;
use vortex_core::point_vortex::{integrate, System, VortexConfiguration};
use vortex_core::profile_solver::ProfileSolver;
use vortex_core::Vec2;
use vortex_dns::{init_oseen_superposition, VorticityField};
use vortex_lab::analysis::*;
use vortex_lab::config::ExperimentConfig;
use vortex_lab::experiment::{output_times, start_time};
use vortex_lab::plot::{LinePlot, Series};
use vortex_lab::summary::SummaryRow;
use vortex_lab::Error;

fn solver() -> &'static ProfileSolver {
    static S: OnceLock<ProfileSolver> = OnceLock::new();
    S.get_or_init(ProfileSolver::default)
}

fn single(nu: f64) -> VortexConfiguration {
    VortexConfiguration::new(vec![Vec2::ZERO], vec![1.0], nu, 1.0).unwrap()
}

fn pair(angle: f64) -> VortexConfiguration {
    VortexConfiguration::new(vec![Vec2::new(0.5, 0.0), Vec2::new(-0.5, 0.0)], vec![1.0, 1.0], 0.01, 0.5).unwrap().rotated(angle)
}

/// erf by its Taylor series (|x| < 1)
fn erf_small(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for k in 1..40 {
        term *= -x * x / k as f64;
        sum += term / (2 * k + 1) as f64;
    }
    2.0 / PI.sqrt() * sum
}

/// composite Simpson on [0, b]
fn simpson(f: impl Fn(f64) -> f64, b: f64, m: usize) -> f64 {
    let h = b / m as f64;
    let mut s = f(0.0) + f(b);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

/// A field whose rescaled profile about `center` is exactly G + q.
fn planted(q: impl Fn(Vec2) -> f64, center: Vec2, nu: f64, t: f64, n: usize, l_box: f64) -> VorticityField {
    let dx = l_box / n as f64;
    let s = (nu * t).sqrt();
    let mut total = vec![0.0; n * n];
    for j2 in 0..n {
        for j1 in 0..n {
            let x = Vec2::new(-0.5 * l_box + j1 as f64 * dx, -0.5 * l_box + j2 as f64 * dx);
            let xi = (1.0 / s) * (x - center);
            total[j2 * n + j1] = (gauss(xi) + q(xi)) / (nu * t);
        }
    }
    VorticityField { n, l_box, t, nu, alphas: vec![1.0], components: vec![total.clone()], total }
}

#[test]
fn x_norm_of_gaussian_matches_closed_form() {
    // ∫ G² e^{βr/4} dξ = (1/8π)(1 + a e^{a²/2} √(π/2)(1 + erf(a/√2))), a = β/4
    let beta: f64 = 0.5;
    let a = beta / 4.0;
    let oracle = ((1.0 + a * (a * a / 2.0).exp() * (PI / 2.0).sqrt() * (1.0 + erf_small(a / 2f64.sqrt()))) / (8.0 * PI)).sqrt();
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), gauss);
    // fourth-order Simpson on the 192-radius extraction grid, h ≈ 0.05
    assert!((x_norm(&w, beta) - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", x_norm(&w, beta));
    let zero = RescaledProfile::from_fn(RescaledProfile::default_grid(), |_| 0.0);
    assert_eq!(x_norm(&zero, beta), 0.0);
}

#[test]
fn x_norm_grows_with_beta_and_checks_range() {
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), |x| gauss(x) * (1.0 + x.x1));
    let mut prev = 0.0;
    for k in 1..10 {
        let v = x_norm_checked(&w, 0.1 * k as f64).unwrap();
        assert!(v > prev);
        prev = v;
    }
    assert!(x_norm_checked(&w, 0.0).is_err());
    assert!(x_norm_checked(&w, 1.0).is_err());
}

#[test]
fn extraction_of_an_oseen_field_gives_the_gaussian() {
    let (nu, t) = (0.01, 0.25);
    let cfg = single(nu);
    let traj = integrate(&cfg, System::Pw2, 11).unwrap();
    let field = init_oseen_superposition(&cfg, t, 256, 4.0).unwrap();
    let w = extract_rescaled_profile(&field, &traj, 0, t).unwrap();
    assert!((w.mass() - 1.0).abs() < 1e-6, "mass {}", w.mass());
    let dev = x_norm(&w.minus(gauss), DEFAULT_BETA);
    assert!(dev < 1e-4, "‖w − G‖_X = {dev:e}");
    // a centre ten core radii away sees nothing
    let off = extract_at(&field, 0, Vec2::new(1.0, 0.0), 1.0, RescaledProfile::default_grid()).unwrap();
    assert!(off.mass().abs() < 1e-10 && off.max_abs() < 1e-10);
    // wrong time and reach beyond the half box are errors
    assert!(extract_rescaled_profile(&field, &traj, 0, 0.3).is_err());
    assert!(extract_at(&field, 0, Vec2::new(1.6, 0.0), 1.0, RescaledProfile::default_grid()).is_err());
    assert!(extract_rescaled_profile(&field, &traj, 1, t).is_err());
}

#[test]
fn planted_quadrupole_norm_is_recovered() {
    let eps = 0.01;
    let q = move |x: Vec2| eps * x.norm_sq() * (-x.norm_sq() / 4.0).exp() * (2.0 * x.angle()).cos();
    let center = Vec2::new(0.1, -0.05);
    let field = planted(q, center, 0.01, 0.25, 256, 4.0);
    let w = extract_at(&field, 0, center, 1.0, RescaledProfile::default_grid()).unwrap();
    // ‖q‖_X² = π ε² ∫ r⁵ e^{−r²/2} e^{βr/4} dr
    let oracle = (PI * eps * eps * simpson(|r| r.powi(5) * (-r * r / 2.0 + DEFAULT_BETA * r / 4.0).exp(), 12.0, 24_000)).sqrt();
    let got = x_norm(&w.minus(gauss), DEFAULT_BETA);
    assert!((got - oracle).abs() < 1e-4, "{got} vs {oracle}");
}

#[test]
fn azimuthal_projection_of_gaussian_has_only_mode_zero() {
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), gauss);
    let p0 = azimuthal_project(&w, 0).unwrap();
    for (k, r) in w.grid.radii.iter().enumerate() {
        assert!((p0.c_profile.values[k] - gauss(Vec2::new(*r, 0.0))).abs() < 1e-15);
    }
    for n in 1..=8 {
        assert!(mode_l2_sq(&w, &azimuthal_project(&w, n).unwrap()).sqrt() < 1e-12);
    }
}

#[test]
fn azimuthal_projection_recovers_a_cos_two_theta_profile() {
    let a = |r: f64| r * r * (-r * r / 4.0).exp();
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), |x| a(x.norm()) * (2.0 * x.angle()).cos());
    let p2 = azimuthal_project(&w, 2).unwrap();
    for (k, r) in w.grid.radii.iter().enumerate() {
        assert!((p2.c_profile.values[k] - a(*r)).abs() < 1e-13);
        assert!(p2.s_profile.values[k].abs() < 1e-13);
    }
}

#[test]
fn parseval_for_band_limited_profiles() {
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), |x| {
        let (r, th) = (x.norm(), x.angle());
        let e = (-r * r / 4.0).exp();
        e * (1.0 + 0.3 * r * th.sin() + 0.2 * r * r * (2.0 * th).cos() - 0.1 * r.powi(3) * (3.0 * th + 0.4).sin())
    });
    let total: f64 = w.grid.area_weights().iter().zip(&w.values).map(|(q, v)| q * v * v).sum();
    let modes: f64 = (0..=3).map(|n| mode_l2_sq(&w, &azimuthal_project(&w, n).unwrap())).sum();
    assert!((modes - total).abs() < 1e-10 * total, "{modes} vs {total}");
}

#[test]
fn too_few_angles_is_an_aliasing_error() {
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), gauss);
    assert!(matches!(azimuthal_project(&w, 33), Err(Error::Analysis(_))));
    assert!(azimuthal_project(&w, 32).is_ok());
}

#[test]
fn predicted_phase_of_an_equal_pair_is_twice_the_pair_angle() {
    let traj = integrate(&pair(0.0), System::Pw2, 51).unwrap();
    for &t in &[0.1, 0.3, 0.5] {
        let z = traj.positions_at(t).unwrap();
        let theta = (z[0] - z[1]).angle();
        let (amp, phase) = predicted_quadrupole(&traj, 0, t, 0.01).unwrap();
        assert!(wrap_angle(phase - 2.0 * theta).abs() < 1e-12);
        assert!((amp - 0.01 * t / (z[0] - z[1]).norm_sq() / (4.0 * PI)).abs() < 1e-15);
    }
}

#[test]
fn quadrupole_fit_recovers_a_planted_template() {
    let traj = integrate(&pair(0.0), System::Pw2, 51).unwrap();
    let om = solver().reference_omega(2).unwrap();
    let (amp, psi) = (3e-4, 0.7);
    let w = RescaledProfile::from_fn(RescaledProfile::default_grid(), |x| {
        gauss(x) + amp * om.1.at(x.norm()).unwrap_or(0.0) * (2.0 * x.angle() - psi).cos()
    });
    let fit = quadrupole_fit(&w, &traj, 0, 0.25, 0.01, solver()).unwrap();
    assert!((fit.amplitude_measured - amp).abs() < 1e-3 * amp, "{fit:?}");
    assert!(wrap_angle(fit.phase_measured - psi).abs() < 1e-3);
    assert!(!fit.degenerate);
    let flat = RescaledProfile::from_fn(RescaledProfile::default_grid(), gauss);
    assert!(quadrupole_fit(&flat, &traj, 0, 0.25, 0.01, solver()).unwrap().degenerate);
}

#[test]
fn convergence_fit_on_synthetic_series() {
    let nus = [0.02, 0.01, 0.005];
    let fit = convergence_fit(&nus, &nus.map(|v| 3.7 * v)).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-12);
    assert!((fit.intercept - 3.7f64.ln()).abs() < 1e-12);
    assert!(convergence_fit(&nus[..2], &[1.0, 2.0]).is_err());
    assert!(convergence_fit(&[0.02, 0.015, 0.01], &[1.0, 2.0, 3.0]).is_err());
    assert!(convergence_fit(&nus, &[1.0, 0.0, 3.0]).is_err());
    assert!(convergence_fit(&nus, &[1.0, -1.0, 3.0]).is_err());
}

const GOOD: &str = r#"
[vortices]
x1 = [0.5, -0.5]
x2 = [0.0, 0.0]
alpha = [1.0, 1.0]
[physics]
nu_list = [0.02, 0.01, 0.005]
T = 0.5
[grid]
n = 512
box = 8.0
[analysis]
beta = 0.5
times = 8
[output]
dir = "out"
"#;

fn config_error(text: &str) -> String {
    match ExperimentConfig::from_toml_str(text) {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_parses_and_bundled_files_load() {
    let cfg = ExperimentConfig::from_toml_str(GOOD).unwrap();
    assert_eq!(cfg.nu_list, vec![0.02, 0.01, 0.005]);
    assert_eq!((cfg.n, cfg.l_box, cfg.times), (512, 8.0, 8));
    assert!(cfg.plane_correction && cfg.quadrupole && cfg.wapp && !cfg.box_doubling);
    assert_eq!(cfg.max_pair_distance(), 1.0);
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let pair = ExperimentConfig::load(&dir.join("two_corotating.cfg")).unwrap();
    assert_eq!(pair.positions.len(), 2);
    let single = ExperimentConfig::load(&dir.join("single_vortex.cfg")).unwrap();
    assert_eq!((single.positions.len(), single.t0), (1, Some(0.25)));
}

#[test]
fn malformed_configs_name_the_key() {
    assert_eq!(config_error(&GOOD.replace("T = 0.5", "")), "physics.T");
    assert_eq!(config_error(&GOOD.replace("n = 512", "n = 500")), "grid.n");
    assert_eq!(config_error(&GOOD.replace("box = 8.0", "box = 8.0\nfoo = 1")), "grid.foo");
    assert_eq!(config_error(&GOOD.replace("[0.02, 0.01, 0.005]", "[0.01, 0.02]")), "physics.nu_list");
    assert_eq!(config_error(&GOOD.replace("beta = 0.5", "beta = 1.5")), "analysis.beta");
    assert_eq!(config_error(&GOOD.replace("times = 8", "times = 4")), "analysis.times");
    assert_eq!(config_error(&GOOD.replace("x2 = [0.0, 0.0]", "x2 = [0.0]")), "vortices.x2");
    assert_eq!(config_error(&GOOD.replace("T = 0.5", "T = \"long\"")), "physics.T");
    assert_eq!(config_error(&format!("{GOOD}\n[extra]\na = 1\n")), "extra");
    assert_eq!(config_error("[vortices\n"), "<file>");
    let msg = ExperimentConfig::from_toml_str(&GOOD.replace("T = 0.5", "")).unwrap_err().to_string();
    assert!(msg.contains("physics.T"), "{msg}");
}

#[test]
fn start_time_respects_core_resolution() {
    let cfg = ExperimentConfig::from_toml_str(GOOD).unwrap();
    let traj = integrate(&cfg.vortex_config(0.01).unwrap(), System::Pw2, 11).unwrap();
    let t0 = start_time(&cfg, &traj, 0.01, cfg.l_box);
    let dx = cfg.l_box / cfg.n as f64;
    assert!((0.01 * t0).sqrt() >= 3.0 * dx);
    assert!(t0 >= cfg.t0_fraction * traj.t0);
    let times = output_times(t0, 0.5, 8);
    assert_eq!(times.len(), 8);
    assert!(times[0] > t0 && (times[7] - 0.5).abs() < 1e-15);
}

#[test]
fn summary_rows_and_plots() {
    assert!(SummaryRow::within("a", 1.1, 1.0, 0.2).pass());
    assert!(!SummaryRow::within("a", 1.3, 1.0, 0.2).pass());
    assert!(SummaryRow::at_most("b", 0.3, 1.0 / 3.0).pass());
    assert!(!SummaryRow::at_most("b", 0.4, 1.0 / 3.0).pass());
    assert!(!SummaryRow::failed("stage:simulation", "boom").pass());
    let mut p = LinePlot::new("t", "x", "y").log_log().provenance("from test".into());
    p.add(Series::new("s", vec![(0.01, 1e-3), (0.02, 2e-3)]));
    let svg = p.render();
    assert!(svg.starts_with("<svg") && svg.contains("<!-- provenance: from test -->") && svg.contains("1e-2 1e-3"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn quadrupole_phase_rotates_with_the_configuration(angle in -3.0f64..3.0) {
        let om = solver().reference_omega(2).unwrap();
        let (amp, psi, t, nu) = (2e-4, 0.4, 0.3, 0.01);
        let profile = |rot: f64| {
            let om = om.clone();
            RescaledProfile::from_fn(RescaledProfile::default_grid(), move |x| {
                gauss(x) + amp * om.1.at(x.norm()).unwrap_or(0.0) * (2.0 * (x.angle() - rot) - psi).cos()
            })
        };
        let base_traj = integrate(&pair(0.0), System::Pw2, 31).unwrap();
        let rot_traj = integrate(&pair(angle), System::Pw2, 31).unwrap();
        let a = quadrupole_fit(&profile(0.0), &base_traj, 0, t, nu, solver()).unwrap();
        let b = quadrupole_fit(&profile(angle), &rot_traj, 0, t, nu, solver()).unwrap();
        prop_assert!(wrap_angle(b.phase_measured - a.phase_measured - 2.0 * angle).abs() < 1e-9);
        prop_assert!(wrap_angle(b.phase_predicted - a.phase_predicted - 2.0 * angle).abs() < 1e-8);
        prop_assert!((a.amplitude_measured - b.amplitude_measured).abs() < 1e-9 * amp);
    }

    #[test]
    fn convergence_fit_is_scale_invariant(c in 1e-6f64..1e6, e1 in -0.2f64..0.2, e2 in -0.2f64..0.2) {
        let nus = [0.04, 0.02, 0.01, 0.005];
        let m = [1.0, 0.5 * (1.0 + e1), 0.25 * (1.0 + e2), 0.125];
        let a = convergence_fit(&nus, &m).unwrap();
        let b = convergence_fit(&nus, &m.map(|v| c * v)).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-10);
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
    }
}
