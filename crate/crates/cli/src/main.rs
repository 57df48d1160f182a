use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::json;

use finitebath::config::{apply_override, config_from_map, parse_document, RunConfig};
use finitebath::exact::diagonalize;
use finitebath::experiments::{
    run_initial_energy_scan, run_sweep, run_two_bath_sweep, simulate_point, PropagatorKind, SweepSpec,
    ThermalizationCurve,
};
use finitebath::io::{
    emit_curve, emit_histogram, read_histogram, unix_now, write_json, RunManifest,
};
use finitebath::oracles::{
    arcsine_distribution_check, degenerate_mode_frequencies, effective_temperature, langevin_reference,
    memory_kernel, spectral_lines, symmetric_degenerate_bath, LangevinParams,
};
use finitebath::rng::{RngStream, StreamKind};
use finitebath::stats::{energy_temperature, fit_temperature, mean};
use finitebath::{build_coupling_matrix, realize_bath, Error, SystemState, TestParticleSpec};

#[derive(Parser)]
#[command(name = "finitebath", version, about = "Thermalization of a harmonic test particle in finite oscillator baths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set bath1_n=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Explicit seeds, replacing the `seeds` key.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seed_list: Vec<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// One frequency and seed; writes the energy histogram and its fit.
    Single {
        #[command(flatten)]
        run: RunArgs,
        /// Test-particle frequency; defaults to the first grid point.
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Single-bath thermalization curve (or the initial-energy scan when
    /// `initial_energies` is set).
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Switched two-bath curve plus each bath alone.
    Twobath {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Analytic and reference diagnostics.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// Fit a temperature to a histogram CSV or a file of energies (one per line).
    Fit {
        path: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleKind {
    /// Langevin reference run; prints the stationary fit.
    Langevin {
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 5.0)]
        temperature: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 2e5)]
        t_final: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        sample_interval: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Zero-bandwidth bath: exchange spectrum and arcsine check.
    Degenerate {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1e-4)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        omega_r: f64,
        #[arg(long, default_value_t = 1.0)]
        e0: f64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Memory kernel of bath 1 of a configuration at the given times.
    Kernel {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0")]
        times: Vec<f64>,
    },
    /// Effective temperature of a two-temperature mixture.
    EffectiveTemperature {
        #[arg(long)]
        energy: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::InvalidParameter { .. } | Error::Config(_) => 2,
        r if r.is_numerical_failure() => 3,
        r if r.is_fit_failure() => 4,
        _ => 1,
    }
}

fn load(run: &RunArgs) -> finitebath::Result<(RunConfig, SweepSpec)> {
    let text = fs::read_to_string(&run.config)
        .map_err(|e| Error::Config(format!("{}: {e}", run.config.display())))?;
    let mut map = parse_document(&text)?;
    for o in &run.overrides {
        apply_override(&mut map, o)?;
    }
    if !run.seed_list.is_empty() {
        map.insert("seeds".into(), json!(run.seed_list));
    }
    let cfg = config_from_map(map)?;
    let spec = cfg.to_sweep_spec()?;
    Ok((cfg, spec))
}

fn prepare_out(dir: &Path) -> finitebath::Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn warn_failures(curve: &ThermalizationCurve, label: &str) {
    for p in &curve.points {
        for f in &p.failures {
            warn!("{label}: omega = {}: {f}", p.omega);
        }
    }
}

fn cmd_single(run: &RunArgs, omega: Option<f64>) -> finitebath::Result<()> {
    let started = unix_now();
    let (cfg, spec) = load(run)?;
    let omega = omega.unwrap_or(spec.omega_grid[0]);
    let seed = spec.seeds[0];
    prepare_out(&run.out)?;
    let result = simulate_point(omega, &spec, seed)?;
    let mut manifest = RunManifest::new(cfg.snapshot(), vec![seed], spec.propagator, started);
    manifest.dt = result.dt;
    manifest.max_snap = result.max_snap;
    manifest.finished_unix = unix_now();
    let manifest_path = run.out.join("manifest.json");
    manifest.write(&manifest_path)?;
    let hist = result.histogram(&spec.binning)?;
    let fit = fit_temperature(&hist);
    emit_histogram(Some(&hist), fit.as_ref(), Some(&manifest_path), &run.out.join("histogram.csv"))?;
    let fit = fit?;
    println!(
        "omega = {omega}  T_tp = {:.6} ± {:.6}  <E> = {:.6}",
        fit.temperature,
        fit.std_error,
        result.mean_energy()
    );
    Ok(())
}

fn cmd_sweep(run: &RunArgs) -> finitebath::Result<()> {
    let started = unix_now();
    let (cfg, spec) = load(run)?;
    prepare_out(&run.out)?;
    let mut manifest = RunManifest::new(cfg.snapshot(), spec.seeds.clone(), spec.propagator, started);
    if let Some(e0s) = &cfg.initial_energies {
        let records = run_initial_energy_scan(&spec.omega_grid, e0s, &spec)?;
        for (i, &e0) in e0s.iter().enumerate() {
            let points = records.iter().filter(|r| r.e0 == e0).map(|r| r.point.clone()).collect();
            let curve = ThermalizationCurve {
                points,
                dt: None,
                delta_t_steps: None,
                max_snap: 0.0,
            };
            warn_failures(&curve, &format!("E0 = {e0}"));
            emit_curve(&curve, &run.out.join(format!("curve_e0_{i}.csv")))?;
            manifest.record_curve(&curve);
        }
        write_json(&run.out.join("energy_scan.json"), &records)?;
        info!("wrote {} energy-scan records", records.len());
    } else {
        let curve = run_sweep(&spec)?;
        warn_failures(&curve, "sweep");
        emit_curve(&curve, &run.out.join("curve.csv"))?;
        manifest.record_curve(&curve);
        if let Some(peak) = curve.peak_omega() {
            println!("peak omega = {peak}");
        }
    }
    manifest.write(&run.out.join("manifest.json"))
}

fn cmd_twobath(run: &RunArgs) -> finitebath::Result<()> {
    let started = unix_now();
    let (cfg, spec) = load(run)?;
    prepare_out(&run.out)?;
    let curves = run_two_bath_sweep(&spec)?;
    let mut manifest = RunManifest::new(cfg.snapshot(), spec.seeds.clone(), PropagatorKind::SwitchedRk4, started);
    for (name, curve) in [
        ("switched", &curves.switched),
        ("bath1_alone", &curves.bath1_alone),
        ("bath2_alone", &curves.bath2_alone),
    ] {
        warn_failures(curve, name);
        emit_curve(curve, &run.out.join(format!("{name}.csv")))?;
    }
    manifest.record_curve(&curves.switched);
    manifest.write(&run.out.join("manifest.json"))
}

fn cmd_oracle(kind: &OracleKind) -> finitebath::Result<()> {
    let report = match kind {
        OracleKind::Langevin {
            gamma,
            temperature,
            mass,
            omega,
            t_final,
            dt,
            sample_interval,
            seed,
        } => {
            let params = LangevinParams {
                gamma: *gamma,
                temperature: *temperature,
                mass: *mass,
                omega: *omega,
            };
            let mut rng = RngStream::global(*seed, StreamKind::Langevin);
            let energies = langevin_reference(&params, (0.0, 0.0), *t_final, *dt, *sample_interval, &mut rng)?;
            let fit = energy_temperature(&energies)?;
            json!({"fit": fit, "mean_energy": mean(&energies), "samples": energies.len()})
        }
        OracleKind::Degenerate {
            n,
            mass,
            omega_r,
            e0,
            temperature,
            samples,
            seed,
        } => {
            let xi = *n as f64 * mass;
            if !(xi < 1.0) {
                return Err(Error::invalid("n/mass", "resonance needs N m / M < 1"));
            }
            let tp = TestParticleSpec::new(1.0, omega_r * (1.0 - xi).sqrt())?.with_initial_energy(*e0);
            let bath = symmetric_degenerate_bath(*n, *mass, *omega_r, *temperature, *seed);
            let a = build_coupling_matrix(&tp, &bath.frequencies, bath.mass);
            let prop = diagonalize(&a, &SystemState::initial(&tp, &[&bath]))?;
            let (lo, hi) = degenerate_mode_frequencies(&tp, *n, *mass, *omega_r);
            let beat = hi - lo;
            let dt = 2.0 * std::f64::consts::PI / hi / 20.0;
            let dressed = a.coupled_stiffness();
            let energy = |t: f64| {
                let (q, p) = prop.observe_test_particle(t);
                finitebath::model::test_particle_energy_with(
                    finitebath::EnergyDefinition::Dressed,
                    &tp,
                    q,
                    p,
                    dressed,
                )
            };
            let series: Vec<f64> = (0..*samples).map(|i| energy(i as f64 * dt)).collect();
            let lines = spectral_lines(&series, dt);
            let mut rng = RngStream::global(*seed, StreamKind::SamplingTimes);
            let t_span = 200.0 * 2.0 * std::f64::consts::PI / beat;
            let sampled: Vec<f64> = (0..*samples).map(|_| energy(t_span * rng.uniform())).collect();
            let check = arcsine_distribution_check(&sampled, *e0)?;
            json!({
                "exchange_frequency": beat,
                "lines": lines.iter().take(5).map(|l| json!({"omega": l.omega, "amplitude": l.amplitude})).collect::<Vec<_>>(),
                "arcsine_ks": check.ks.statistic,
                "arcsine_p": check.ks.p_value,
                "rejected": check.n_rejected,
            })
        }
        OracleKind::Kernel { run, times } => {
            let (_, spec) = load(run)?;
            let bath = realize_bath(&spec.baths[0], spec.seeds[0]);
            let values: Vec<f64> = times
                .iter()
                .map(|&t| memory_kernel(&bath.frequencies, bath.mass, t))
                .collect();
            json!({"times": times, "kernel": values})
        }
        OracleKind::EffectiveTemperature { energy, t1, t2 } => {
            json!({"effective_temperature": effective_temperature(*energy, *t1, *t2)?})
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_fit(path: &Path) -> finitebath::Result<()> {
    let text = fs::read_to_string(path)?;
    let fit = if text.starts_with(finitebath::io::HISTOGRAM_HEADER) {
        let hist = read_histogram(path)?.ok_or(Error::EmptyInput("histogram has no bins"))?;
        fit_temperature(&hist)?
    } else {
        let energies = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.parse::<f64>().map_err(|_| Error::Io(format!("cannot parse `{l}` as an energy"))))
            .collect::<finitebath::Result<Vec<f64>>>()?;
        finitebath::stats::Binning::default().histogram(&energies).and_then(|h| fit_temperature(&h))?
    };
    println!("{}", serde_json::to_string_pretty(&fit).expect("fit serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Single { run, omega } => cmd_single(run, *omega),
        Command::Sweep { run } => cmd_sweep(run),
        Command::Twobath { run } => cmd_twobath(run),
        Command::Oracle { kind } => cmd_oracle(kind),
        Command::Fit { path } => cmd_fit(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
