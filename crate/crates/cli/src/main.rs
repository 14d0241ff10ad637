use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebpe_core::io::diagnostics::DirRecorder;
use ebpe_core::io::snapshot::{read_snapshot, write_snapshot};
use ebpe_core::linops::spectrum_report;
use ebpe_core::monitors::{constraint_check, mms_convergence_study, MonitorSummary};
use ebpe_core::stochastic::{run_direct_em, run_split_stochastic};
use ebpe_core::timestep::{run_deterministic, run_deterministic_from, InitialCondition};
use ebpe_core::{parse_config, parse_mms_ladder, Error, RunConfig};

const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 1;
const EXIT_BLOWUP: u8 = 2;
const EXIT_MONITOR: u8 = 3;

/// Energy-balance surface model coupled to the hydrostatic primitive
/// equations on a periodic cylinder.
#[derive(Parser, Debug)]
#[command(name = "ebpe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// INI run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the noise seed and the random initial-condition seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Diagnostics row every N steps.
    #[arg(long)]
    cadence: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deterministic IMEX run.
    RunDet {
        #[command(flatten)]
        common: Common,
        /// Continue from a snapshot up to the configured end time.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Stochastic run with the split (convolution + remainder) scheme.
    RunStoch {
        #[command(flatten)]
        common: Common,
    },
    /// Stochastic run with semi-implicit Euler-Maruyama on the full system.
    RunDirectEm {
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalues of the shifted linear operator per mode.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Only the lowest N modes.
        #[arg(long)]
        max_modes: Option<usize>,
    },
    /// Manufactured-solution convergence study from the `[mms]` section.
    Mms {
        #[command(flatten)]
        common: Common,
    },
    /// Constraint residuals of a snapshot.
    Check {
        snapshot: PathBuf,
        /// Also require the snapshot grid to match this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(&common.config)?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = common.seed {
        config.noise.seed = seed;
        if let InitialCondition::RandomSmooth { seed: s, .. } = &mut config.initial {
            *s = seed;
        }
    }
    if let Some(c) = common.cadence {
        if c == 0 {
            return Err(Error::InvalidParameter("--cadence must be at least 1".into()));
        }
        config.output.cadence = c;
    }
    config.validate()?;
    Ok(config)
}

fn report(summary: &MonitorSummary, out: &Path) -> u8 {
    println!(
        "steps={} max_principle={} energy={} h1={} constraints={}",
        summary.steps,
        summary.max_principle.label(),
        summary.energy.label(),
        summary.h1.label(),
        summary.constraints.label()
    );
    println!("output: {}", out.display());
    if summary.failed() {
        eprintln!("monitor failure");
        EXIT_MONITOR
    } else {
        EXIT_OK
    }
}

fn run(cli: Cli) -> Result<u8, (Error, Option<PathBuf>)> {
    match cli.command {
        Command::RunDet { common, restart } => {
            let config = load(&common).map_err(|e| (e, None))?;
            let out = common.out.clone();
            let mut rec = DirRecorder::new(&out).map_err(|e| (e, None))?;
            let result = match restart {
                Some(path) => {
                    let grid = config.grid().map_err(|e| (e, None))?;
                    let snap = read_snapshot(&path).map_err(|e| (e, None))?;
                    snap.check_grid(&grid).map_err(|e| (e, None))?;
                    run_deterministic_from(&config, snap.to_state(config.dt), &mut rec)
                }
                None => run_deterministic(&config, &mut rec),
            };
            let output = result.map_err(|e| (e, Some(out.clone())))?;
            Ok(report(&output.summary, &out))
        }
        Command::RunStoch { common } => {
            let config = load(&common).map_err(|e| (e, None))?;
            let out = common.out.clone();
            let mut rec = DirRecorder::new(&out).map_err(|e| (e, None))?;
            let output = run_split_stochastic(&config, None, &mut rec)
                .map_err(|e| (e, Some(out.clone())))?;
            Ok(report(&output.run.summary, &out))
        }
        Command::RunDirectEm { common } => {
            let config = load(&common).map_err(|e| (e, None))?;
            let out = common.out.clone();
            let mut rec = DirRecorder::new(&out).map_err(|e| (e, None))?;
            let output = run_direct_em(&config, None, &mut rec).map_err(|e| (e, Some(out.clone())))?;
            Ok(report(&output.summary, &out))
        }
        Command::Spectrum {
            common,
            omega,
            max_modes,
        } => {
            let config = load(&common).map_err(|e| (e, None))?;
            let grid = config.grid().map_err(|e| (e, None))?;
            let r = spectrum_report(&grid, omega, max_modes.unwrap_or(usize::MAX))
                .map_err(|e| (e, None))?;
            fs::create_dir_all(&common.out).map_err(|e| (e.into(), None))?;
            let path = common.out.join("spectrum.csv");
            fs::write(&path, r.to_csv()).map_err(|e| (e.into(), None))?;
            println!(
                "modes={} min_real_part={:.6e} max_angle={:.6} sectorial={}",
                r.modes.len(),
                r.min_real_part,
                r.max_angle,
                r.is_sectorial()
            );
            println!("output: {}", path.display());
            Ok(if r.is_sectorial() && r.min_real_part >= -1e-10 {
                EXIT_OK
            } else {
                EXIT_MONITOR
            })
        }
        Command::Mms { common } => {
            let text = fs::read_to_string(&common.config).map_err(|e| (e.into(), None))?;
            let ladder = parse_mms_ladder(&text).map_err(|e| (e, None))?;
            let r = mms_convergence_study(&ladder).map_err(|e| (e, None))?;
            fs::create_dir_all(&common.out).map_err(|e| (e.into(), None))?;
            let path = common.out.join("mms.csv");
            fs::write(&path, r.to_csv()).map_err(|e| (e.into(), None))?;
            for (res, err) in &r.rows {
                println!("{res:.6e} {err:.6e}");
            }
            println!("order={:.4}", r.order);
            println!("output: {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Check { snapshot, config } => {
            let snap = read_snapshot(&snapshot).map_err(|e| (e, None))?;
            let grid = ebpe_core::Grid::new(snap.nx, snap.ny, snap.nz).map_err(|e| (e, None))?;
            if let Some(path) = config {
                let text = fs::read_to_string(path).map_err(|e| (e.into(), None))?;
                let c = parse_config(&text).map_err(|e| (e, None))?;
                snap.check_grid(&c.grid().map_err(|e| (e, None))?)
                    .map_err(|e| (e, None))?;
            }
            let state = snap.to_state(1.0);
            let r = constraint_check(&grid, &state).map_err(|e| (e, None))?;
            println!("grid=({},{},{}) t={}", snap.nx, snap.ny, snap.nz, snap.time);
            println!("trace={:.6e}", r.trace);
            println!("bottom_neumann={:.6e}", r.bottom_neumann);
            println!("solenoidal={:.6e}", r.solenoidal);
            println!("w_top={:.6e}", r.w_top);
            let ok = state.is_finite() && r.within_tolerance(state.velocity_sup(), state.rho.sup_norm());
            println!("constraints={}", if ok { "pass" } else { "fail" });
            Ok(if ok { EXIT_OK } else { EXIT_MONITOR })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((err, out)) => {
            eprintln!("error: {err}");
            if let Error::BlowUp { last_valid, .. } = &err {
                if let Some(dir) = out {
                    let path = dir.join("last_valid.bin");
                    match write_snapshot(&path, last_valid, None) {
                        Ok(()) => eprintln!("last valid state written to {}", path.display()),
                        Err(e) => eprintln!("could not write last valid state: {e}"),
                    }
                }
                return ExitCode::from(EXIT_BLOWUP);
            }
            ExitCode::from(EXIT_INVALID)
        }
    }
}
