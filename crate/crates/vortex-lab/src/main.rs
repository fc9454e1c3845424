use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use vortex_core::expansion::{default_polar_grid, velocity_difference_exact, velocity_difference_series, weighted_remainder_sup, write_remainder_csv, RemainderRow};
use vortex_core::point_vortex::{compare_trajectories, integrate, System};
use vortex_core::profile_solver::{write_profile_csv, ProfileSolver};
use vortex_core::Vec2;
use vortex_dns::snapshot::{append_index, read_snapshot, write_snapshot};
use vortex_lab::config::ExperimentConfig;
use vortex_lab::experiment::{analyze_field, run_experiment, simulate, trajectory};
use vortex_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "vortex-lab", version, about = "Interacting viscous vortices: trajectories, profiles and simulations")]
struct Cli {
    /// experiment configuration file
    #[arg(long, global = true, default_value = "configs/two_corotating.cfg")]
    config: PathBuf,
    /// concurrent simulations
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// seed for randomized checks
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PW and PW2 trajectories for every ν
    Pv,
    /// ω(r) and the deformation profiles of vortex 0 at T
    Profiles,
    /// multipole tail check and remainder scaling
    Expand,
    /// simulations with snapshots at every output time
    Simulate,
    /// metrics from the snapshots written by `simulate`
    Analyze,
    /// the full pipeline with summary and plots
    Reproduce,
}

fn nu_dir(out: &Path, k: usize) -> Result<PathBuf> {
    let d = out.join(format!("nu_{k}"));
    fs::create_dir_all(&d)?;
    Ok(d)
}

fn cmd_pv(cfg: &ExperimentConfig) -> Result<()> {
    for (k, &nu) in cfg.nu_list.iter().enumerate() {
        let dir = nu_dir(&cfg.output_dir, k)?;
        let pw = integrate(&cfg.vortex_config(nu)?, System::Pw, 401)?;
        let pw2 = trajectory(cfg, nu)?;
        pw.write_csv(BufWriter::new(fs::File::create(dir.join("trajectory_pw.csv"))?))?;
        pw2.write_csv(BufWriter::new(fs::File::create(dir.join("trajectory_pw2.csv"))?))?;
        if pw.n() > 1 {
            let dev = compare_trajectories(&pw, &pw2)?;
            println!("ν = {nu:e}: max_i |z_i^ν − z_i|/d at T = {:.3e}", dev.final_deviation());
        } else {
            println!("ν = {nu:e}: trajectories written");
        }
    }
    Ok(())
}

fn cmd_profiles(cfg: &ExperimentConfig) -> Result<()> {
    let solver = ProfileSolver::default();
    fs::create_dir_all(&cfg.output_dir)?;
    let omega = solver.reference_omega(2)?;
    let mode = vortex_core::grid::AzimuthalMode::new(2, omega.1.clone(), vortex_core::grid::RadialProfile::new(omega.1.grid.clone(), vec![0.0; omega.1.values.len()])?)?;
    write_profile_csv(BufWriter::new(fs::File::create(cfg.output_dir.join("omega_n2.csv"))?), &mode)?;
    for (k, &nu) in cfg.nu_list.iter().enumerate() {
        let traj = trajectory(cfg, nu)?;
        if traj.n() < 2 {
            continue;
        }
        let prof = solver.build_deformation(&traj, 0, cfg.t_final, nu)?;
        prof.dump(&nu_dir(&cfg.output_dir, k)?, "vortex0_T")?;
    }
    println!("profiles written to {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_expand(cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let eta = Vec2::from_polar(rng.gen_range(0.5..10.5), rng.gen_range(0.0..std::f64::consts::TAU));
        let rho = rng.gen_range(0.0..0.5);
        let xi = Vec2::from_polar(rho * eta.norm(), rng.gen_range(0.0..std::f64::consts::TAU));
        let exact = velocity_difference_exact(xi, eta)?;
        for terms in 1..=8 {
            let bound = rho.powi(terms as i32 + 2) / (1.0 - rho);
            let err = (velocity_difference_series(xi, eta, terms)? - exact).abs();
            worst = worst.max(err / bound.max(f64::MIN_POSITIVE));
        }
    }
    println!("multipole tail: max error/bound over 10^4 points = {worst:.3}");
    let traj = trajectory(cfg, cfg.nu_list[0])?;
    if traj.n() < 2 {
        return Ok(());
    }
    let polar = default_polar_grid();
    let t = 0.5 * cfg.t_final;
    let mut rows = Vec::new();
    for k in 0..5 {
        let nu = 4e-5 * 2f64.powi(k);
        rows.push(RemainderRow { nu, t, sup_weighted_remainder: weighted_remainder_sup(&traj, 0, t, nu, 0.9, &polar)? });
    }
    fs::create_dir_all(&cfg.output_dir)?;
    write_remainder_csv(BufWriter::new(fs::File::create(cfg.output_dir.join("remainder.csv"))?), &rows)?;
    let x: Vec<f64> = rows.iter().map(|r| r.nu * t / (traj.d * traj.d)).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.sup_weighted_remainder).collect();
    if let Some(fit) = vortex_core::fit::log_log_fit(&x, &y) {
        println!("remainder exponent in νt/d² = {:.3}", fit.slope);
    }
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let index = cfg.output_dir.join("snapshots_index.csv");
    fs::create_dir_all(&cfg.output_dir)?;
    if index.exists() {
        fs::remove_file(&index)?;
    }
    for (k, &nu) in cfg.nu_list.iter().enumerate() {
        let dir = nu_dir(&cfg.output_dir, k)?;
        let mut count = 0;
        let (_, t0, steps, _) = simulate(cfg, nu, cfg.n, cfg.l_box, |field, _| {
            count += 1;
            let path = dir.join(format!("snapshot_{count:03}.bin"));
            write_snapshot(&path, field)?;
            append_index(&index, &path, field.t, nu)?;
            Ok(())
        })?;
        println!("ν = {nu:e}: t0 = {t0:.4}, {steps} steps, {count} snapshots");
    }
    Ok(())
}

fn cmd_analyze(cfg: &ExperimentConfig) -> Result<()> {
    let index = cfg.output_dir.join("snapshots_index.csv");
    let text = fs::read_to_string(&index)?;
    let solver = ProfileSolver::default();
    println!("snapshot,t,nu,vortex,x_norm_dev_gauss,x_norm_dev_wapp");
    for line in text.lines().skip(1) {
        let path = line.split(',').next().ok_or_else(|| Error::Analysis(format!("bad index line `{line}`")))?;
        let field = read_snapshot(Path::new(path))?;
        let traj = trajectory(cfg, field.nu)?;
        let (rows, _) = analyze_field(cfg, &solver, &field, &traj)?;
        for m in rows {
            println!("{path},{:.6e},{:e},{},{:.6e},{}", m.t, field.nu, m.i, m.dev_gauss, m.dev_wapp.map_or(String::new(), |v| format!("{v:.6e}")));
        }
    }
    Ok(())
}

fn cmd_reproduce(cfg: &ExperimentConfig, threads: usize) -> Result<bool> {
    let report = run_experiment(cfg, threads)?;
    println!("criterion,value,target,tolerance,pass");
    for r in &report.rows {
        println!("{},{:.4e},{:e},{:e},{}", r.criterion, r.value, r.target, r.tolerance, r.pass());
    }
    println!("artifacts in {}", report.dir.display());
    Ok(report.rows.iter().all(|r| r.pass()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<bool> {
        let cfg = ExperimentConfig::load(&cli.config)?;
        match cli.command {
            Command::Pv => cmd_pv(&cfg)?,
            Command::Profiles => cmd_profiles(&cfg)?,
            Command::Expand => cmd_expand(&cfg, cli.seed)?,
            Command::Simulate => cmd_simulate(&cfg)?,
            Command::Analyze => cmd_analyze(&cfg)?,
            Command::Reproduce => return cmd_reproduce(&cfg, cli.threads),
        }
        Ok(true)
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
