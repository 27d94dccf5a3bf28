//! `weakdelay`: simulate weak-measurement delay records, estimate delays and
//! tabulate sweeps. Exit codes: 0 success, 1 model or estimator error,
//! 2 malformed input.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use weakdelay_core::io::{format_value, read_record_file, write_record_file};
use weakdelay_core::polarization::QwpModel;
use weakdelay_core::simulator::{
    alpha_min, is_balanced, resolution_factor, snr_sweep, sweep_theta, wva_uncertainty,
    PHI_WVA,
};
use weakdelay_core::spectrum::wavelength_to_angular_frequency;
use weakdelay_core::waveplate::{
    compound_retardance, pivot_delay, IndexModel, PivotAxis, PlateStack, TiltAngles,
};
use weakdelay_core::{estimate, simulate, Error, Method, Result, RunConfig};

#[derive(Parser)]
#[command(name = "weakdelay", version, about = "Weak-measurement time-delay simulation and estimation")]
struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a record and write it as CSV, plus a JSON sidecar of the resolved config.
    Simulate {
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar path (default: <out>.json).
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config photon count; 0 is noise-free.
        #[arg(long)]
        photons: Option<u64>,
    },
    /// Estimate the delay in a record file and print JSON.
    Estimate {
        #[arg(long)]
        records: PathBuf,
        /// Estimator name, or `all`.
        #[arg(long, default_value = "all")]
        method: String,
        /// Assumed postselection angle (rad); required by every method except
        /// jwm_simplified and strubi_reference.
        #[arg(long)]
        phi: Option<f64>,
        /// Quarter-wave plate model assumed by exact and quartic.
        #[arg(long, value_enum, default_value_t = QwpArg::Ideal)]
        qwp: QwpArg,
        /// Design wavelength of a dispersive plate.
        #[arg(long, default_value_t = 780.0)]
        design_nm: f64,
    },
    /// Sweep the pivot angle, simulate and estimate at each angle, write CSV.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        theta_min: f64,
        #[arg(long)]
        theta_max: f64,
        /// Number of angles, endpoints included.
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo SNR of the first-order estimator; one CSV row per (alpha, phi_assumed).
    Snr {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dimensionless delays ω₀τ.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = PHI_WVA)]
        phi_actual: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.03, 0.05, 0.08])]
        phi_assumed: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        photons: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytic WVA precision: resolution factor, α_min and Δα.
    Analytic {
        /// Report α_min (its coefficient, and its value when --epsilon is given).
        #[arg(long)]
        alpha_min: bool,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
        #[arg(long, default_value_t = 780.0)]
        lambda0_nm: f64,
        /// Source bandwidth.
        #[arg(long, default_value_t = 17.6)]
        delta_lambda_nm: f64,
        /// Spectrometer resolution.
        #[arg(long, default_value_t = 0.1)]
        resolution_nm: f64,
    },
    /// Compound waveplate retardance and pivot delay.
    Waveplate {
        #[arg(long, default_value_t = 780.0)]
        lambda_nm: f64,
        /// Default: zero-order half-wave pair with --h2-mm.
        #[arg(long)]
        h1_mm: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        h2_mm: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        xi_rad: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        psi_rad: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta_rad: Option<f64>,
        #[arg(long, value_enum, default_value_t = PivotArg::Azimuth)]
        pivot: PivotArg,
        /// Constant indices instead of the quartz dispersion model.
        #[arg(long, requires = "n_e")]
        n_o: Option<f64>,
        #[arg(long, requires = "n_o")]
        n_e: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum QwpArg {
    Ideal,
    Dispersive,
    Absent,
}

#[derive(Clone, Copy, ValueEnum)]
enum PivotArg {
    Azimuth,
    Elevation,
}

impl From<PivotArg> for PivotAxis {
    fn from(p: PivotArg) -> Self {
        match p {
            PivotArg::Azimuth => PivotAxis::Azimuth,
            PivotArg::Elevation => PivotAxis::Elevation,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_input_error() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate { config, out, sidecar, seed, photons } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.photons = photons.unwrap_or(cfg.photons);
            let run = cfg.resolve()?;
            let record = simulate(&run.experiment)?;
            write_record_file(&record, &out)?;
            let sidecar = sidecar.unwrap_or_else(|| {
                let mut s = out.clone().into_os_string();
                s.push(".json");
                PathBuf::from(s)
            });
            write_text(&sidecar, &serde_json::to_string_pretty(&cfg.resolved()?).expect("config serializes"))?;
            print_json(&json!({
                "records": out,
                "sidecar": sidecar,
                "rows": record.len(),
                "total": record.total(),
                "tau_true_s": run.experiment.tau_true,
                "tau_true_fs": run.experiment.tau_true * 1e15,
            }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { records, method, phi, qwp, design_nm } => {
            let record = read_record_file(&records)?;
            let qwp = match qwp {
                QwpArg::Ideal => QwpModel::Ideal,
                QwpArg::Absent => QwpModel::Absent,
                QwpArg::Dispersive => QwpModel::dispersive_at(wavelength_to_angular_frequency(design_nm)?)
                    .map_err(|e| Error::Config(e.to_string()))?,
            };
            let methods = if method == "all" {
                Method::ALL.to_vec()
            } else {
                vec![method.parse::<Method>()?]
            };
            let mut worst: Option<Error> = None;
            let mut objects = Vec::new();
            for m in &methods {
                let result = match phi {
                    Some(phi) => estimate(&record, *m, phi, qwp),
                    None if matches!(m, Method::JwmSimplified | Method::StrubiReference) => {
                        estimate(&record, *m, std::f64::consts::FRAC_PI_2, qwp)
                    }
                    None => Err(Error::Config(format!("--phi is required for {m}"))),
                };
                objects.push(match result {
                    Ok(r) => json!({
                        "method": m.name(),
                        "tau_s": r.tau_hat,
                        "tau_fs": r.tau_hat * 1e15,
                        "diagnostics": r.diagnostics,
                    }),
                    Err(e) => {
                        let obj = json!({ "method": m.name(), "error": error_json(&e)["error"] });
                        if worst.as_ref().is_none_or(|w| !w.is_input_error()) {
                            worst = Some(e);
                        }
                        obj
                    }
                });
            }
            if methods.len() == 1 {
                print_json(&objects[0]);
            } else {
                print_json(&Value::Array(objects));
            }
            Ok(worst.map_or(ExitCode::SUCCESS, |e| exit_code(&e)))
        }
        Command::Sweep { config, theta_min, theta_max, steps, out, seed } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let run = cfg.resolve()?;
            if steps == 0 || !(theta_max >= theta_min) {
                return Err(Error::Config("need steps >= 1 and theta_max >= theta_min".into()));
            }
            let thetas: Vec<f64> = if steps == 1 {
                vec![theta_min]
            } else {
                (0..steps)
                    .map(|k| theta_min + (theta_max - theta_min) * k as f64 / (steps - 1) as f64)
                    .collect()
            };
            let rows = sweep_theta(&thetas, &run.stack, run.axis, &run.experiment)?;
            let jwm = is_balanced(run.experiment.phi_assumed);
            let mut header = vec!["theta_rad", "tau_theory_s", "tau_exact_s", "tau_first_order_s"];
            if jwm {
                header.push("tau_jwm_s");
            }
            header.push("first_order_deviation_s");
            let mut w = csv_writer(&out)?;
            w.write_record(&header).map_err(|e| csv_error(&out, e))?;
            for r in &rows {
                let mut fields = vec![r.theta_rad, r.tau_theory_s, r.tau_exact_s, r.tau_first_order_s];
                if let Some(j) = r.tau_jwm_s.filter(|_| jwm) {
                    fields.push(j);
                }
                fields.push(r.tau_first_order_s - r.tau_theory_s);
                w.write_record(fields.iter().map(|v| format_value(*v)))
                    .map_err(|e| csv_error(&out, e))?;
            }
            w.flush().map_err(|e| io_error(&out, e))?;
            print_json(&json!({ "table": out, "rows": rows.len() }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Snr { config, alphas, phi_actual, phi_assumed, trials, photons, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.photons = photons.unwrap_or(cfg.photons);
            cfg.phi_actual_rad = phi_actual;
            let run = cfg.resolve()?;
            let points = snr_sweep(&alphas, phi_actual, &phi_assumed, trials, &run.experiment)?;
            let mut w = csv_writer(&out)?;
            w.write_record(["alpha", "phi_assumed_rad", "snr_db", "trials", "bias_s", "std_s"])
                .map_err(|e| csv_error(&out, e))?;
            for p in &points {
                w.write_record([
                    format_value(p.alpha),
                    format_value(p.phi_assumed),
                    format_value(p.snr_db),
                    p.trials.to_string(),
                    format_value(p.bias_s),
                    format_value(p.std_s),
                ])
                .map_err(|e| csv_error(&out, e))?;
            }
            w.flush().map_err(|e| io_error(&out, e))?;
            print_json(&json!({ "table": out, "rows": points.len() }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Analytic {
            alpha_min: want_min,
            epsilon,
            alpha,
            beta,
            lambda0_nm,
            delta_lambda_nm,
            resolution_nm,
        } => {
            let c = resolution_factor(lambda0_nm, delta_lambda_nm, resolution_nm)?;
            let mut out = json!({
                "lambda0_nm": lambda0_nm,
                "delta_lambda_nm": delta_lambda_nm,
                "resolution_nm": resolution_nm,
                "resolution_factor": c,
            });
            if want_min || epsilon.is_some() {
                out["alpha_min_coefficient"] = json!(alpha_min(1.0, lambda0_nm, delta_lambda_nm, resolution_nm)?);
                if let Some(eps) = epsilon {
                    out["epsilon"] = json!(eps);
                    out["alpha_min"] = json!(alpha_min(eps, lambda0_nm, delta_lambda_nm, resolution_nm)?);
                }
            }
            if let (Some(a), Some(b)) = (alpha, beta) {
                out["alpha"] = json!(a);
                out["beta"] = json!(b);
                out["delta_alpha"] = json!(wva_uncertainty(a, b, lambda0_nm, delta_lambda_nm, resolution_nm)?);
            }
            print_json(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Waveplate { lambda_nm, h1_mm, h2_mm, xi_rad, psi_rad, theta_rad, pivot, n_o, n_e } => {
            let index = match (n_o, n_e) {
                (Some(n_o), Some(n_e)) => IndexModel::Constant { n_o, n_e },
                _ => IndexModel::quartz(),
            };
            let lambda = lambda_nm * 1e-9;
            let stack = match h1_mm {
                Some(h1) => PlateStack::new(h1 * 1e-3, h2_mm * 1e-3, index)?,
                None => PlateStack::zero_order_half_wave(h2_mm * 1e-3, lambda, index)?,
            };
            let idx = index.at(lambda)?;
            let tilt = TiltAngles::new(xi_rad, psi_rad)?;
            let mut out = json!({
                "lambda_nm": lambda_nm,
                "n_o": idx.n_o,
                "n_e": idx.n_e,
                "n_avg": idx.average(),
                "birefringence": idx.birefringence(),
                "h1_mm": stack.h1 * 1e3,
                "h2_mm": stack.h2 * 1e3,
                "xi_rad": xi_rad,
                "psi_rad": psi_rad,
                "retardance_normal_rad": compound_retardance(lambda, &stack, TiltAngles::normal())?,
                "retardance_rad": compound_retardance(lambda, &stack, tilt)?,
            });
            if let Some(theta) = theta_rad {
                let tau = pivot_delay(theta, &stack, lambda, pivot.into())?;
                out["theta_rad"] = json!(theta);
                out["pivot_delay_s"] = json!(tau);
                out["pivot_delay_fs"] = json!(tau * 1e15);
            }
            print_json(&out);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    io_error(path, std::io::Error::other(e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_error(path, e))?;
    writeln!(f, "{text}").map_err(|e| io_error(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| io_error(path, e))?;
    Ok(csv::Writer::from_writer(f))
}
