use clap::{Args, Parser, Subcommand};
use rydconv::emission::{gaussian_fit, AngularMap, FitOptions};
use rydconv::ensemble::{sample_cloud, CloudGeometry};
use rydconv::scenario::{load_scenario, run_scenario, validate_config, Overrides};
use rydconv::Result;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rydconv", version, about = "Microwave-to-optical conversion in a driven Rydberg ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a scenario file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Exit 0 even when physics guards fire.
        #[arg(long)]
        allow_warnings: bool,
    },
    /// Parse a scenario and check the physics guards without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        allow_warnings: bool,
    },
    /// Sample a cloud and write it as columns x y z eta delta_s.
    ExportCloud {
        /// Scenario to take the geometry and physics from; reference setup otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit a 2-D Gaussian to an exported angular map and print the result as JSON.
    FitMap {
        map: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        mask_fraction: f64,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Stored output times.
    #[arg(long)]
    time_points: Option<usize>,
    /// Angular grid as NXxNY, e.g. 161x101.
    #[arg(long, value_parser = parse_points)]
    angular_points: Option<(usize, usize)>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seeds: a.seeds,
            output_dir: a.out,
            preset: a.preset,
            time_points: a.time_points,
            angular_points: a.angular_points,
        }
    }
}

fn parse_points(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NXxNY, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn report_warnings<W: std::fmt::Display>(warnings: &[W], allow: bool) -> ExitCode {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if warnings.is_empty() || allow {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} physics warning(s); pass --allow-warnings to accept them", warnings.len());
        ExitCode::from(2)
    }
}

fn export_cloud(config: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let (geometry, params) = match config {
        Some(c) => {
            let sc = load_scenario(c, &Overrides::default())?;
            (sc.geometry, sc.params)
        }
        None => (CloudGeometry::paper(seed), rydconv::physics::PhysicalParams::paper()),
    };
    let cloud = sample_cloud(&CloudGeometry { seed, ..geometry }, &params)?;
    let mut w = BufWriter::new(File::create(out)?);
    cloud.write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

fn fit_map(path: &Path, mask_fraction: f64) -> Result<()> {
    let map = AngularMap::read_text(BufReader::new(File::open(path)?), &path.display().to_string())?;
    let fit = gaussian_fit(&map, &FitOptions { mask_fraction, ..FitOptions::default() })?;
    println!("{}", serde_json::to_string_pretty(&fit).expect("fit serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, overrides, allow_warnings } => run_scenario(&config, &overrides.into()).map(|r| {
            println!("{}", r.summary_path.display());
            if let Some(a) = &r.summary.aggregate {
                if let (Some(m), Some(s)) = (a.p_delta_omega_mean, a.p_delta_omega_std) {
                    println!("P_dOmega = {m:.4} +- {s:.4} over {} run(s)", a.runs);
                }
                println!(
                    "theta_x0 = {:.5} pi, width_x = {:.5} pi, width_y = {:.5} pi",
                    a.theta_x0_pi_mean, a.width_x_pi_mean, a.width_y_pi_mean
                );
            }
            report_warnings(&r.summary.warnings, allow_warnings)
        }),
        Command::Validate { config, overrides, allow_warnings } => validate_config(&config, &overrides.into()).map(|r| {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            report_warnings(&r.warnings, allow_warnings)
        }),
        Command::ExportCloud { config, seed, out } => export_cloud(config.as_deref(), seed, &out).map(|_| ExitCode::SUCCESS),
        Command::FitMap { map, mask_fraction } => fit_map(&map, mask_fraction).map(|_| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
