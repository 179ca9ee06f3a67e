//! `fabryperot`: resonances, exceptional points and skin-effect diagnostics
//! for one-dimensional high-contrast resonator chains.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use fabryperot::capacitance::{capacitance_matrix, eigenvalues, gauge_capacitance};
use fabryperot::model::{ConfigFile, RadiationCondition, ResonatorArray};
use fabryperot::skin::band_scan;
use fabryperot::skin::PeriodicCell;
use fabryperot::spectra::{
    classify_exceptional, find_resonances, resonances_to_csv, resonances_to_json, SearchRegion,
};
use fabryperot_cli::*;

#[derive(Parser)]
#[command(
    name = "fabryperot",
    about = "Scattering resonances, exceptional points and skin-effect diagnostics for 1D resonator chains",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Path to the JSON chain configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output directory for tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Table format for resonance lists.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Root-finder residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Worker threads for grid evaluation (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long, allow_hyphen_values = true)]
    re_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    re_max: f64,
    #[arg(long, allow_hyphen_values = true)]
    im_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    im_max: f64,
}

impl RegionArgs {
    fn build(&self) -> Result<SearchRegion, CliError> {
        SearchRegion::new(self.re_min, self.re_max, self.im_min, self.im_max)
            .map_err(CliError::Spectra)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Delta,
    Theta,
    Epsilon,
    ThetaL,
}

#[derive(Clone, Copy, ValueEnum)]
enum EpParamArg {
    Ell1,
    Theta,
    ThetaL,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Log,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Gap,
    Positions,
    Splitting,
}

#[derive(Subcommand)]
enum Command {
    /// Locate the resonances inside a complex window.
    Resonances {
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Sweep a parameter and track a quantity, with a power-law fit.
    Sweep {
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long, value_enum, default_value_t = GridArg::Log)]
        grid: GridArg,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value_t = QuantityArg::Splitting)]
        quantity: QuantityArg,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Splitting-versus-perturbation scan around an exceptional point.
    Sensitivity {
        #[arg(long, value_enum)]
        param: EpParamArg,
        #[arg(long, value_enum, default_value_t = GridArg::Log)]
        grid: GridArg,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        count: usize,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Transmission coefficient over a real frequency grid, with peaks.
    Transmission {
        #[arg(long)]
        omega_min: f64,
        #[arg(long)]
        omega_max: f64,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Peak prominence threshold as a fraction of max T.
        #[arg(long, default_value_t = 0.1)]
        prominence: f64,
    },
    /// Band scan, in-band resonance, mode trace and envelope report for a
    /// replicated gauge cell.
    Skin {
        /// Number of unit-cell copies M.
        #[arg(long, default_value_t = 20)]
        replicas: usize,
        /// Which band (by index) to pick the resonance from.
        #[arg(long, default_value_t = 0)]
        band: usize,
        #[arg(long, default_value_t = 0.05)]
        omega_min: f64,
        #[arg(long, default_value_t = 8.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Print a capacitance matrix and its eigenvalues.
    Capacitance {
        /// Real part of the limiting frequency omega_0 (generalised matrix).
        #[arg(long, allow_hyphen_values = true)]
        omega0_re: Option<f64>,
        /// Imaginary part of omega_0.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        omega0_im: f64,
        /// Build the gauge capacitance matrix instead.
        #[arg(long)]
        gauge: bool,
    },
    /// Band structure of a periodic unit cell.
    Bands {
        #[arg(long, default_value_t = 0.05)]
        omega_min: f64,
        #[arg(long, default_value_t = 8.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.common.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build_global();
    }
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn load(path: &Path) -> Result<(ResonatorArray, RadiationCondition), CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Config(fabryperot::model::ConfigError::Parse(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })?;
    let cf = ConfigFile::parse(&text)?;
    Ok(cf.to_array()?)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Resonances { region } => {
            let (cfg, rc) = load(&c.config)?;
            let window = region.build()?;
            let roots = find_resonances(&window, &cfg, rc, c.tol)?;
            let (name, table) = match c.format {
                Format::Csv => ("resonances.csv", resonances_to_csv(&roots)),
                Format::Json => ("resonances.json", resonances_to_json(&roots, &cfg)),
            };
            let path = write_out(&c.out, name, &table)?;
            println!("{} resonances -> {}", roots.len(), path.display());
            for r in &roots {
                let ep = classify_exceptional(r, cfg.contrast);
                println!(
                    "  omega = {:+.12e} {:+.12e}i  m_a = {}  is_ep = {}",
                    r.omega.re, r.omega.im, ep.m_a, ep.is_ep
                );
            }
        }
        Command::Sweep {
            param,
            grid,
            start,
            stop,
            count,
            quantity,
            region,
        } => {
            let (cfg, rc) = load(&c.config)?;
            let spec = SweepSpec {
                parameter: match param {
                    ParamArg::Delta => SweepParameter::Delta,
                    ParamArg::Theta => SweepParameter::Theta,
                    ParamArg::Epsilon => SweepParameter::Epsilon,
                    ParamArg::ThetaL => SweepParameter::ThetaL,
                },
                grid: Grid {
                    kind: match grid {
                        GridArg::Log => GridKind::Log,
                        GridArg::Linear => GridKind::Linear,
                    },
                    start: *start,
                    stop: *stop,
                    count: *count,
                },
                quantity: match quantity {
                    QuantityArg::Gap => TrackedQuantity::Gap,
                    QuantityArg::Positions => TrackedQuantity::Positions,
                    QuantityArg::Splitting => TrackedQuantity::Splitting,
                },
                window: region.build()?,
            };
            let result = run_sweep(&cfg, rc, &spec, c.tol)?;
            let pname = match param {
                ParamArg::Delta => "delta",
                ParamArg::Theta => "theta",
                ParamArg::Epsilon => "epsilon",
                ParamArg::ThetaL => "theta_l",
            };
            let path = write_out(&c.out, "sweep.csv", &sweep_to_csv(&result, pname))?;
            write_out(&c.out, "sweep_fit.json", &fit_to_json(&result.fit))?;
            println!("sweep over {pname}: {} points -> {}", result.rows.len(), path.display());
            if let Some(f) = &result.fit {
                println!(
                    "  asymptotic slope = {:.6} (r^2 = {:.6}, {} points)",
                    f.slope, f.r_squared, f.points_used
                );
            }
        }
        Command::Sensitivity {
            param,
            grid,
            start,
            stop,
            count,
            region,
        } => {
            let (cfg, rc) = load(&c.config)?;
            let g = Grid {
                kind: match grid {
                    GridArg::Log => GridKind::Log,
                    GridArg::Linear => GridKind::Linear,
                },
                start: *start,
                stop: *stop,
                count: *count,
            };
            let p = match param {
                EpParamArg::Ell1 => EpParameter::Ell1,
                EpParamArg::Theta => EpParameter::Theta,
                EpParamArg::ThetaL => EpParameter::ThetaL,
            };
            let window = region.build()?;
            let result = run_sensitivity(&cfg, rc, p, &g, &window, c.tol)?;
            let path = write_out(&c.out, "sensitivity.csv", &sweep_to_csv(&result, "epsilon"))?;
            write_out(&c.out, "sensitivity_fit.json", &fit_to_json(&result.fit))?;
            println!("sensitivity scan -> {}", path.display());
            if let Some(f) = &result.fit {
                println!(
                    "  splitting slope = {:.6} (r^2 = {:.6}, {} points)",
                    f.slope, f.r_squared, f.points_used
                );
            }
        }
        Command::Transmission {
            omega_min,
            omega_max,
            count,
            prominence,
        } => {
            let (cfg, _) = load(&c.config)?;
            let result = run_transmission(&cfg, *omega_min, *omega_max, *count, *prominence)?;
            let path = write_out(&c.out, "transmission.csv", &transmission_to_csv(&result))?;
            write_out(&c.out, "peaks.csv", &peaks_to_csv(&result))?;
            println!(
                "transmission on {} points, {} peaks -> {}",
                result.omegas.len(),
                result.peak_indices.len(),
                path.display()
            );
            for &i in &result.peak_indices {
                println!("  peak at omega = {:.6} (T = {:.6})", result.omegas[i], result.values[i]);
            }
        }
        Command::Skin {
            replicas,
            band,
            omega_min,
            omega_max,
            samples,
        } => {
            let (cfg, _) = load(&c.config)?;
            let result = run_skin(
                &cfg,
                *replicas,
                *band,
                (*omega_min, *omega_max),
                *samples,
                c.tol,
            )?;
            write_out(&c.out, "bands.json", &bands_to_json(&result.scan))?;
            write_out(&c.out, "envelope.csv", &result.envelope.to_csv())?;
            write_out(&c.out, "mode.csv", &result.mode.to_csv())?;
            write_out(&c.out, "damping.csv", &damping_to_csv(&result.damping))?;
            println!(
                "skin report: band {} resonance at {:+.9e} {:+.9e}i",
                result.band_used, result.resonance.omega.re, result.resonance.omega.im
            );
            println!(
                "  cell-max slope = {:.6}, ratio spread = {:.4}",
                result.envelope.slope_fit, result.envelope.ratio_spread
            );
        }
        Command::Capacitance {
            omega0_re,
            omega0_im,
            gauge,
        } => {
            let (cfg, _) = load(&c.config)?;
            let cm = if *gauge {
                gauge_capacitance(&cfg)
            } else {
                let re = omega0_re.ok_or_else(|| {
                    CliError::BadSpec("either --gauge or --omega0-re is required".into())
                })?;
                capacitance_matrix(Complex64::new(re, *omega0_im), &cfg)
                    .map_err(|e| CliError::BadSpec(e.to_string()))?
            };
            let evs = eigenvalues(&cm).map_err(|e| CliError::BadSpec(e.to_string()))?;
            let path = write_out(&c.out, "capacitance.json", &cm.to_json())?;
            println!("capacitance matrix (n = {}) -> {}", cm.n, path.display());
            for e in &evs {
                println!("  lambda = {:+.12e} {:+.12e}i", e.re, e.im);
            }
        }
        Command::Bands {
            omega_min,
            omega_max,
            samples,
        } => {
            let (cfg, _) = load(&c.config)?;
            let cell = PeriodicCell::new(cfg)?;
            let scan = band_scan(&cell, (*omega_min, *omega_max), *samples)?;
            write_out(&c.out, "bands.json", &bands_to_json(&scan))?;
            let path = write_out(&c.out, "bandscan.csv", &band_scan_to_csv(&scan))?;
            println!("{} bands -> {}", scan.bands.len(), path.display());
            for &(a, b) in &scan.bands {
                println!("  [{a:.9}, {b:.9}]");
            }
        }
    }
    Ok(())
}
