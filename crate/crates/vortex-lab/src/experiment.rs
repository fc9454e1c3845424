//! The batch pipeline: trajectories, simulations per ν, extraction, norms and fits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use vortex_core::kernels::gauss;
use vortex_core::point_vortex::{integrate, System, Trajectory};
use vortex_core::profile_solver::{ProfileSolver, WappOrder};
use vortex_dns::snapshot::{append_index, write_snapshot};
use vortex_dns::{init_oseen_superposition, Simulation, VorticityField};

use crate::analysis::{convergence_fit, extract_rescaled_profile, quadrupole_fit, x_norm, QuadrupoleFit, RescaledProfile};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::plot::{LinePlot, Series};
use crate::summary::{write_summary, SummaryRow};

const TRAJECTORY_SAMPLES: usize = 401;

#[derive(Debug, Clone)]
pub struct MetricRow {
    pub t: f64,
    pub i: usize,
    /// ‖w_i − G‖_X
    pub dev_gauss: f64,
    /// ‖w_i − w_app‖_X
    pub dev_wapp: Option<f64>,
    pub quad: Option<QuadrupoleFit>,
}

#[derive(Debug, Clone)]
pub struct DecompositionRow {
    pub t: f64,
    pub sum_residual: f64,
    /// max_i |∫ω_i − α_i|/|α_i|
    pub mass_drift: f64,
    /// max_i of −min(sign(α_i)ω_i)/max|ω_i|
    pub undershoot: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub nu: f64,
    pub n: usize,
    pub l_box: f64,
    pub t0: f64,
    pub steps: usize,
    pub seconds: f64,
    pub traj: Trajectory,
    pub metrics: Vec<MetricRow>,
    pub decomposition: Vec<DecompositionRow>,
    pub final_field: VorticityField,
    /// rescaled profile of vortex 0 at the final time
    pub final_profile: RescaledProfile,
}

impl RunResult {
    pub fn max_dev_gauss(&self) -> f64 {
        self.metrics.iter().map(|m| m.dev_gauss).fold(0.0, f64::max)
    }

    pub fn max_dev_wapp(&self) -> Option<f64> {
        self.metrics.iter().map(|m| m.dev_wapp).try_fold(0.0f64, |a, v| v.map(|v| a.max(v)))
    }

    pub fn final_quadrupoles(&self) -> Vec<QuadrupoleFit> {
        let t_end = self.metrics.iter().map(|m| m.t).fold(f64::MIN, f64::max);
        self.metrics.iter().filter(|m| m.t == t_end).filter_map(|m| m.quad).collect()
    }
}

/// Start time: the configured value (absolute, or a fraction of T0) raised to the smallest
/// time at which the cores span three grid spacings of the box `l_box`.
pub fn start_time(cfg: &ExperimentConfig, traj: &Trajectory, nu: f64, l_box: f64) -> f64 {
    let base = match cfg.t0 {
        Some(t0) => t0,
        None if traj.t0.is_finite() => cfg.t0_fraction * traj.t0,
        None => 0.0,
    };
    let dx = l_box / cfg.n as f64;
    base.max((3.0 * dx).powi(2) / nu * (1.0 + 1e-9))
}

pub fn output_times(t0: f64, t_final: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| t0 + (t_final - t0) * k as f64 / count as f64).collect()
}

pub fn trajectory(cfg: &ExperimentConfig, nu: f64) -> Result<Trajectory> {
    let traj = integrate(&cfg.vortex_config(nu)?, System::Pw2, TRAJECTORY_SAMPLES)?;
    if traj.collision {
        return Err(Error::Stage { stage: "trajectory".into(), message: format!("collision before T at ν = {nu}") });
    }
    Ok(traj)
}

/// Measures every vortex of one snapshot against G and (optionally) w_app.
pub fn analyze_field(cfg: &ExperimentConfig, solver: &ProfileSolver, field: &VorticityField, traj: &Trajectory) -> Result<(Vec<MetricRow>, Vec<RescaledProfile>)> {
    let t = field.t;
    let nu = field.nu;
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    for i in 0..field.n_vortices() {
        let w = extract_rescaled_profile(field, traj, i, t)?;
        let dev_gauss = x_norm(&w.minus(gauss), cfg.beta);
        let interacting = field.n_vortices() > 1;
        let dev_wapp = if cfg.wapp && interacting {
            let prof = solver.build_deformation(traj, i, t, nu)?;
            let wa = solver.assemble_wapp(&prof, nu * t / (traj.d * traj.d), WappOrder::First);
            Some(x_norm(&w.minus(|x| wa.eval(x)), cfg.beta))
        } else {
            None
        };
        let quad = if cfg.quadrupole && interacting { Some(quadrupole_fit(&w, traj, i, t, nu, solver)?) } else { None };
        rows.push(MetricRow { t, i, dev_gauss, dev_wapp, quad });
        profiles.push(w);
    }
    Ok((rows, profiles))
}

pub fn decomposition_row(field: &VorticityField) -> DecompositionRow {
    let rep = field.decompose_check();
    let mass_drift = rep.masses.iter().zip(&field.alphas).map(|(m, a)| ((m - a) / a).abs()).fold(0.0, f64::max);
    DecompositionRow { t: field.t, sum_residual: rep.sum_residual, mass_drift, undershoot: rep.relative_undershoot().max(0.0) }
}

/// Runs the simulation for one ν on an n×n grid of side `l_box`, calling `observe` at every
/// output time.
pub fn simulate<F>(cfg: &ExperimentConfig, nu: f64, n: usize, l_box: f64, mut observe: F) -> Result<(Trajectory, f64, usize, VorticityField)>
where
    F: FnMut(&VorticityField, &Trajectory) -> Result<()>,
{
    let traj = trajectory(cfg, nu)?;
    let mut local = cfg.clone();
    local.n = n;
    let t0 = start_time(&local, &traj, nu, l_box);
    if !(t0 < cfg.t_final) {
        return Err(Error::Stage {
            stage: "simulation".into(),
            message: format!("start time {t0:.4} (core resolution) is not before T = {}", cfg.t_final),
        });
    }
    let mut vc = cfg.vortex_config(nu)?;
    // the simulation starts at t0 from the PW2 positions at t0
    vc.positions = traj.positions_at(t0)?;
    let field = init_oseen_superposition(&vc, t0, n, l_box)?;
    let mut sim = Simulation::from_field(&field)?.with_plane_correction(cfg.plane_correction);
    let mut steps = 0;
    let mut last = field;
    for t in output_times(t0, cfg.t_final, cfg.times) {
        steps += sim.advance_to(t, cfg.cfl)?;
        last = sim.to_field();
        observe(&last, &traj)?;
    }
    Ok((traj, t0, steps, last))
}

pub fn run_one(cfg: &ExperimentConfig, solver: &ProfileSolver, nu: f64, n: usize, l_box: f64) -> Result<RunResult> {
    let clock = Instant::now();
    let mut metrics = Vec::new();
    let mut decomposition = Vec::new();
    let mut final_profile = None;
    let (traj, t0, steps, final_field) = simulate(cfg, nu, n, l_box, |field, traj| {
        decomposition.push(decomposition_row(field));
        let (rows, mut profiles) = analyze_field(cfg, solver, field, traj)?;
        metrics.extend(rows);
        final_profile = Some(profiles.swap_remove(0));
        Ok(())
    })?;
    Ok(RunResult {
        nu,
        n,
        l_box,
        t0,
        steps,
        seconds: clock.elapsed().as_secs_f64(),
        traj,
        metrics,
        decomposition,
        final_field,
        final_profile: final_profile.expect("at least one output time"),
    })
}

/// Box-doubling diagnostic for the first ν: runs at L and 2L with the same n and a common
/// start time, and compares the final profiles of vortex 0.
#[derive(Debug, Clone)]
pub struct BoxDoubling {
    pub nu: f64,
    pub t0: f64,
    /// ‖w_L − w_2L‖_X at T
    pub difference: f64,
    /// ‖w_L − G‖_X at T
    pub deviation: f64,
}

pub fn box_doubling(cfg: &ExperimentConfig, solver: &ProfileSolver) -> Result<BoxDoubling> {
    let nu = cfg.nu_list[0];
    let traj = trajectory(cfg, nu)?;
    let mut c = cfg.clone();
    c.t0 = Some(start_time(cfg, &traj, nu, 2.0 * cfg.l_box));
    c.wapp = false;
    c.quadrupole = false;
    let a = run_one(&c, solver, nu, cfg.n, cfg.l_box)?;
    let b = run_one(&c, solver, nu, cfg.n, 2.0 * cfg.l_box)?;
    let mut diff = a.final_profile.clone();
    diff.values.iter_mut().zip(&b.final_profile.values).for_each(|(x, y)| *x -= y);
    Ok(BoxDoubling {
        nu,
        t0: a.t0,
        difference: x_norm(&diff, cfg.beta),
        deviation: x_norm(&a.final_profile.minus(gauss), cfg.beta),
    })
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    pub box_doubling: Option<BoxDoubling>,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<(String, String)>,
    pub dir: PathBuf,
}

impl ExperimentReport {
    pub fn row(&self, criterion: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }
}

/// Runs all ν values, at most `threads` at a time.
pub fn run_sweep(cfg: &ExperimentConfig, solver: &ProfileSolver, threads: usize) -> Vec<(f64, Result<RunResult>)> {
    let mut out = Vec::new();
    for chunk in cfg.nu_list.chunks(threads.max(1)) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&nu| s.spawn(move || (nu, run_one(cfg, solver, nu, cfg.n, cfg.l_box)))).collect();
            handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
        });
        out.extend(results);
    }
    out
}

pub fn summarize(cfg: &ExperimentConfig, runs: &[RunResult], bd: Option<&BoxDoubling>) -> (Vec<SummaryRow>, Vec<(String, String)>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let single = cfg.positions.len() == 1;
    if single {
        if let Some(worst) = runs.iter().map(|r| r.max_dev_gauss()).reduce(f64::max) {
            rows.push(SummaryRow::within("single_vortex_x_norm", worst, 0.0, 1e-3));
        }
        if let Some(bd) = bd {
            rows.push(SummaryRow::within("box_doubling", bd.difference, 0.0, 5e-4));
        }
    } else if !runs.is_empty() {
        let nus: Vec<f64> = runs.iter().map(|r| r.nu).collect();
        let dev_g: Vec<f64> = runs.iter().map(|r| r.max_dev_gauss()).collect();
        match convergence_fit(&nus, &dev_g) {
            Ok(fit) => rows.push(SummaryRow::within("gaussian_deviation_slope", fit.slope, 1.0, 0.2)),
            Err(e) => failures.push(("fits".into(), format!("gaussian_deviation_slope: {e}"))),
        }
        let dev_w: Option<Vec<f64>> = runs.iter().map(|r| r.max_dev_wapp()).collect();
        if let Some(dev_w) = dev_w {
            match convergence_fit(&nus, &dev_w) {
                Ok(fit) => rows.push(SummaryRow::within("wapp_deviation_slope", fit.slope, 1.5, 0.3)),
                Err(e) => failures.push(("fits".into(), format!("wapp_deviation_slope: {e}"))),
            }
            let k = nus.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap();
            rows.push(SummaryRow::at_most("wapp_ratio_smallest_nu", dev_w[k] / dev_g[k], 1.0 / 3.0));
        }
        let quads: Vec<QuadrupoleFit> = runs.iter().flat_map(|r| r.final_quadrupoles()).collect();
        if !quads.is_empty() {
            let amp = quads.iter().map(|q| q.amplitude_rel_error()).fold(0.0, f64::max);
            let phase = quads.iter().map(|q| q.phase_error().to_degrees()).fold(0.0, f64::max);
            rows.push(SummaryRow::within("quadrupole_amplitude_rel_error", amp, 0.0, 0.2));
            rows.push(SummaryRow::within("quadrupole_phase_error_deg", phase, 0.0, 10.0));
        }
        if let Some(bd) = bd {
            rows.push(SummaryRow::at_most("box_doubling_rel", bd.difference / bd.deviation, 0.1));
        }
    }
    let decomp = runs.iter().flat_map(|r| &r.decomposition);
    let (mut sum, mut drift, mut under) = (0.0f64, 0.0f64, 0.0f64);
    for d in decomp {
        sum = sum.max(d.sum_residual);
        drift = drift.max(d.mass_drift);
        under = under.max(d.undershoot);
    }
    if !runs.is_empty() {
        rows.push(SummaryRow::within("decomposition_sum_residual", sum, 0.0, 1e-10));
        rows.push(SummaryRow::within("component_mass_drift", drift, 0.0, 1e-6));
        rows.push(SummaryRow::within("sign_undershoot", under, 0.0, 1e-4));
    }
    (rows, failures)
}

fn write_run(dir: &Path, r: &RunResult, index: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
    writeln!(f, "t,vortex,x_norm_dev_gauss,x_norm_dev_wapp,quad_amp_measured,quad_amp_predicted,quad_phase_measured,quad_phase_predicted")?;
    for m in &r.metrics {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10e}"));
        writeln!(
            f,
            "{:.10e},{},{:.10e},{},{},{},{},{}",
            m.t,
            m.i,
            m.dev_gauss,
            opt(m.dev_wapp),
            opt(m.quad.map(|q| q.amplitude_measured)),
            opt(m.quad.map(|q| q.amplitude_predicted)),
            opt(m.quad.map(|q| q.phase_measured)),
            opt(m.quad.map(|q| q.phase_predicted)),
        )?;
    }
    let mut f = BufWriter::new(fs::File::create(dir.join("decomposition.csv"))?);
    writeln!(f, "t,sum_residual,mass_drift,undershoot")?;
    for d in &r.decomposition {
        writeln!(f, "{:.10e},{:.6e},{:.6e},{:.6e}", d.t, d.sum_residual, d.mass_drift, d.undershoot)?;
    }
    r.traj.write_csv(BufWriter::new(fs::File::create(dir.join("trajectory_pw2.csv"))?))?;
    let snap = dir.join("snapshot_final.bin");
    write_snapshot(&snap, &r.final_field)?;
    append_index(index, &snap, r.final_field.t, r.nu)?;
    Ok(())
}

fn write_plots(dir: &Path, runs: &[RunResult]) -> Result<()> {
    let prov = |what: &str| format!("{what}; data from nu_*/metrics.csv, generated by vortex-lab reproduce");
    let mut conv = LinePlot::new("max over t of X-norm deviations", "nu", "deviation").log_log().provenance(prov("convergence"));
    conv.add(Series::new("|w - G|_X", runs.iter().map(|r| (r.nu, r.max_dev_gauss())).collect()));
    let wapp: Option<Vec<(f64, f64)>> = runs.iter().map(|r| r.max_dev_wapp().map(|v| (r.nu, v))).collect();
    if let Some(w) = wapp {
        conv.add(Series::new("|w - w_app|_X", w));
    }
    conv.write(&dir.join("convergence.svg"))?;

    let mut dev = LinePlot::new("deviation from the Gaussian, vortex 0", "t", "|w - G|_X").provenance(prov("deviation vs time"));
    for r in runs {
        let pts = r.metrics.iter().filter(|m| m.i == 0).map(|m| (m.t, m.dev_gauss)).collect();
        dev.add(Series::new(&format!("nu = {:e}", r.nu), pts));
    }
    dev.write(&dir.join("deviation_vs_time.svg"))?;

    let mut ph = LinePlot::new("quadrupole phase, vortex 0", "t", "phase (deg)").provenance(prov("quadrupole phase"));
    for r in runs {
        let meas: Vec<(f64, f64)> = r.metrics.iter().filter(|m| m.i == 0).filter_map(|m| m.quad.map(|q| (m.t, q.phase_measured.to_degrees()))).collect();
        let pred: Vec<(f64, f64)> = r.metrics.iter().filter(|m| m.i == 0).filter_map(|m| m.quad.map(|q| (m.t, q.phase_predicted.to_degrees()))).collect();
        if !meas.is_empty() {
            ph.add(Series::new(&format!("measured, nu = {:e}", r.nu), meas));
            ph.add(Series::new(&format!("predicted, nu = {:e}", r.nu), pred));
        }
    }
    if !ph.is_empty() {
        ph.write(&dir.join("quadrupole_phase.svg"))?;
    }
    Ok(())
}

/// Full pipeline with artifacts under `cfg.output_dir`. Stage failures end up in the summary;
/// only an unwritable output directory is returned as an error.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let solver = ProfileSolver::default();
    let index = dir.join("snapshots_index.csv");
    if index.exists() {
        fs::remove_file(&index)?;
    }
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for (k, (nu, res)) in run_sweep(cfg, &solver, threads).into_iter().enumerate() {
        match res {
            Ok(r) => {
                if let Err(e) = write_run(&dir.join(format!("nu_{k}")), &r, &index) {
                    failures.push(("output".to_string(), format!("ν = {nu}: {e}")));
                }
                runs.push(r);
            }
            Err(e) => failures.push(("simulation".to_string(), format!("ν = {nu}: {e}"))),
        }
    }
    let bd = if cfg.box_doubling {
        match box_doubling(cfg, &solver) {
            Ok(b) => Some(b),
            Err(e) => {
                failures.push(("box_doubling".to_string(), e.to_string()));
                None
            }
        }
    } else {
        None
    };
    let (mut rows, fit_failures) = summarize(cfg, &runs, bd.as_ref());
    failures.extend(fit_failures);
    for (stage, msg) in &failures {
        rows.push(SummaryRow::failed(&format!("stage:{stage}"), msg));
    }
    if let Err(e) = write_plots(&dir, &runs) {
        rows.push(SummaryRow::failed("stage:plots", &e.to_string()));
    }
    let mut f = BufWriter::new(fs::File::create(dir.join("convergence.csv"))?);
    writeln!(f, "nu,t0,steps,seconds,max_dev_gauss,max_dev_wapp")?;
    for r in &runs {
        writeln!(f, "{:e},{:.6e},{},{:.2},{:.10e},{}", r.nu, r.t0, r.steps, r.seconds, r.max_dev_gauss(), r.max_dev_wapp().map_or(String::new(), |v| format!("{v:.10e}")))?;
    }
    write_summary(&dir.join("summary.csv"), &rows)?;
    Ok(ExperimentReport { runs, box_doubling: bd, rows, failures, dir })
}
