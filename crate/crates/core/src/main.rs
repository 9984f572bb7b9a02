use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bec_hhg::config::ExperimentConfig;
use bec_hhg::franck_condon::{build_fc_matrix, converged_excited_shell, shell_basis, FcMatrix};
use bec_hhg::pipeline::{
    condensate_amplitudes, condensate_occupations, config_hash, configuration_trace, load_config, point_spectrum,
    run_sweep, run_thermo, sample_point, with_threads, write_amplitude_csv, write_dipole_csv, write_spectrum_csv,
    write_thermo_json,
    PipelineError, RunOptions,
};
use bec_hhg::trap::solve_chemical_potential;

#[derive(Debug, Parser)]
#[command(name = "bec-hhg", version, about = "High-harmonic emission from a trapped ideal Bose gas")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "BEC_HHG_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chemical potential and occupations at every sweep temperature.
    Thermo,
    /// Franck–Condon table between two oscillator shells.
    Fc {
        /// Momentum transfer in units of 1/x0, as `qx,qy,qz`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        q: Vec<f64>,
        /// Highest ground shell in the rows.
        #[arg(long, default_value_t = 2)]
        shell: usize,
    },
    /// Time-dependent dipole of one configuration for one emission mode.
    Dipole {
        /// Emission grid index.
        #[arg(long, default_value_t = 0)]
        mode: usize,
        /// Sweep point to sample from; omitted means the pure condensate.
        #[arg(long)]
        point: Option<usize>,
        /// Sample index within the sweep point.
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
    /// Emission spectrum of the condensate or of one sweep point.
    Spectrum {
        #[arg(long)]
        point: Option<usize>,
        /// Single-atom dipole CSV (t, Re d, Im d) replacing the propagation.
        #[arg(long)]
        dipole: Option<PathBuf>,
    },
    /// Full temperature sweep with purity, fidelity and spectra.
    Sweep {
        #[arg(long)]
        dipole: Option<PathBuf>,
    },
    /// Parse the config and print it with defaults filled in.
    Validate,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, PipelineError> {
    let path = cli.config.as_deref().ok_or_else(|| {
        PipelineError::Config(vec![bec_hhg::config::ConfigError { field: "--config".into(), message: "required".into() }])
    })?;
    let v = load_config(path)?;
    for w in &v.warnings {
        log::warn!("{w}");
    }
    let mut cfg = v.config;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn fc_table(q: [f64; 3], shell: usize, cfg: Option<&ExperimentConfig>) -> Result<FcMatrix, PipelineError> {
    let params = cfg.map(|c| c.oscillator).unwrap_or_default();
    let numeric = |e: bec_hhg::franck_condon::FcError| PipelineError::Numeric(e.to_string());
    let e_shell = converged_excited_shell(shell, q, &params).map_err(numeric)?;
    let cols = shell_basis(e_shell);
    build_fc_matrix(&shell_basis(shell), &cols, q, &params).map_err(numeric)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Validate => {
            let cfg = load(cli)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        Command::Thermo => {
            let cfg = load(cli)?;
            let summaries = run_thermo(&cfg)?;
            let dir = out_dir(cli, &cfg);
            ensure_dir(&dir)?;
            write_thermo_json(&dir.join("thermo.json"), &summaries, &config_hash(&cfg)?)?;
            println!("{}", serde_json::to_string_pretty(&summaries)?);
        }
        Command::Fc { q, shell } => {
            let cfg = cli.config.as_ref().map(|_| load(cli)).transpose()?;
            let [qx, qy, qz] = q[..] else {
                return Err(PipelineError::Config(vec![bec_hhg::config::ConfigError { field: "--q".into(), message: "needs three components".into() }]));
            };
            let q = [qx, qy, qz];
            let fc = fc_table(q, *shell, cfg.as_ref())?;
            let dir = cli.out.clone().or_else(|| cfg.as_ref().and_then(|c| c.outputs.dir.clone())).unwrap_or_else(|| "out".into());
            ensure_dir(&dir)?;
            let path = dir.join(format!("fc_shell{shell}.csv"));
            fc.write_abs2_csv(&path).map_err(|e| PipelineError::Numeric(e.to_string()))?;
            println!("{} x {} table, max sum-rule deficit {:.3e} -> {}", fc.nrows(), fc.ncols(), fc.max_sum_rule_deficit(), path.display());
        }
        Command::Dipole { mode, point, sample } => {
            let cfg = load(cli)?;
            let dir = out_dir(cli, &cfg);
            ensure_dir(&dir)?;
            let hash = config_hash(&cfg)?;
            let (occ, label) = match point {
                None => (condensate_occupations(cfg.trap.atoms), "condensate".to_string()),
                Some(i) => {
                    let p = cfg.sweep.get(*i).ok_or_else(|| PipelineError::Numeric(format!("sweep point {i} out of range")))?;
                    let state = solve_chemical_potential(&cfg.trap_at(p.value), p.value)?;
                    let configs = sample_point(&ExperimentConfig { samples: sample + 1, ..cfg.clone() }, &state, *i);
                    (configs[*sample].clone(), format!("point{i}-sample{sample}"))
                }
            };
            let trace = with_threads(cli.threads, || configuration_trace(&cfg, &occ, *mode, &label))??;
            let path = dir.join(format!("dipole_{label}_mode{mode:03}.csv"));
            write_dipole_csv(&path, &trace, &hash)?;
            println!("{}", path.display());
        }
        Command::Spectrum { point, dipole } => {
            let mut cfg = load(cli)?;
            if dipole.is_some() {
                cfg.dipole_override = dipole.clone();
            }
            let dir = out_dir(cli, &cfg);
            ensure_dir(&dir)?;
            let hash = config_hash(&cfg)?;
            match point {
                None => {
                    let amps = with_threads(cli.threads, || condensate_amplitudes(&cfg))??;
                    let s: Vec<f64> = amps.chis.iter().map(|c| c.norm_sqr()).collect();
                    write_spectrum_csv(&dir.join("condensate_spectrum.csv"), &amps.omegas, &s, &hash)?;
                    write_amplitude_csv(&dir.join("condensate_amplitudes.csv"), &amps, &hash)?;
                    for (w, v) in amps.omegas.iter().zip(&s) {
                        println!("{w:>10.4} {v:.6e}");
                    }
                }
                Some(i) => {
                    let (omegas, s) = with_threads(cli.threads, || point_spectrum(&cfg, *i))??;
                    write_spectrum_csv(&dir.join(format!("spectrum_{i:02}.csv")), &omegas, &s, &hash)?;
                    for (w, v) in omegas.iter().zip(&s) {
                        println!("{w:>10.4} {v:.6e}");
                    }
                }
            }
        }
        Command::Sweep { dipole } => {
            let mut cfg = load(cli)?;
            if dipole.is_some() {
                cfg.dipole_override = dipole.clone();
            }
            let opts = RunOptions { out_dir: out_dir(cli, &cfg), threads: cli.threads };
            let manifest = run_sweep(&cfg, &opts)?;
            println!("{:>8} {:>8} {:>10} {:>10} {:>10}", "T", "T/Tc", "purity", "stderr", "fidelity");
            for r in &manifest.records {
                let se = r.purity_stderr.map_or("-".to_string(), |s| format!("{s:.4}"));
                println!("{:>8.3} {:>8.3} {:>10.6} {:>10} {:>10.6}", r.t, r.t_over_tc, r.purity, se, r.fidelity);
            }
            for f in &manifest.failures {
                eprintln!("point {} (T={}) failed: {}", f.index, f.t, f.error);
            }
            if !manifest.failures.is_empty() {
                return Err(PipelineError::Numeric(format!("{} sweep point(s) failed", manifest.failures.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
