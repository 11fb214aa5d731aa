use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wander_core::frontend::{
    construct, fixed_point, render_basin, render_figure, verify, with_thread_pool, FigureInput, FrontendError,
    Scenario, Viewport, EXIT_CONFIG, EXIT_FAILED, EXIT_OK,
};
use wander_core::polynomials::Polynomial;
use wander_core::verification::Certificate;

/// Builds and checks finite stages of maps with prescribed wandering domains.
///
/// Set WANDER_THREADS to cap the number of worker threads.
#[derive(Parser)]
#[command(name = "wander", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write f_k.poly checkpoints plus report.json.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recheck a stored polynomial against a scenario.
    Verify {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// The previous stage, to include the Cauchy bound.
        #[arg(long)]
        prev: Option<PathBuf>,
    },
    /// Draw the orbit figure or the basin picture as a binary PPM.
    Render {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        /// Pixel side in plane units.
        #[arg(long)]
        pixel: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Figure,
    Basin,
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn print_certificate(cert: &Certificate) {
    for c in &cert.checks {
        let verdict = if c.pass { "pass" } else { "FAIL" };
        println!("  [{verdict}] {} (margin {:e}) {}", c.name, c.margin, c.details);
    }
}

fn run(cli: Cli) -> Result<i32, FrontendError> {
    match cli.command {
        Command::Construct { config, out } => {
            let scenario = Scenario::from_path(&config)?;
            let report = construct(&scenario, &base_dir(&config), &out)?;
            for s in &report.stages {
                println!("stage {}: ε = {:e}, degree {}", s.stage, s.epsilon, s.degree);
                print_certificate(&s.certificate);
            }
            if let Some(summary) = &report.summary {
                println!("summary:");
                print_certificate(summary);
            }
            if let Some(err) = &report.error {
                println!("error ({}): {err}", report.error_kind.as_deref().unwrap_or("unknown"));
            }
            println!("report hash {}", report.hash);
            Ok(report.exit_code())
        }
        Command::Verify { poly, config, prev } => {
            let scenario = Scenario::from_path(&config)?;
            let f = Polynomial::read_poly(&poly)?;
            let prev = prev.map(|p| Polynomial::read_poly(&p)).transpose()?;
            let cert = verify(&f, &scenario, &base_dir(&config), prev.as_ref())?;
            print_certificate(&cert);
            Ok(if cert.passed() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Render { poly, config, kind, out, pixel } => {
            let scenario = Scenario::from_path(&config)?;
            let f = Polynomial::read_poly(&poly)?;
            let img = match kind {
                Kind::Figure => {
                    let mut input = FigureInput::for_scenario(&scenario, &base_dir(&config))?;
                    if let Some(p) = pixel {
                        input.pixel = p;
                    }
                    render_figure(&f, &input)
                }
                Kind::Basin => {
                    let viewport = Viewport::for_mode(scenario.mode, scenario.stages);
                    render_basin(&f, fixed_point(scenario.mode), &viewport, pixel.unwrap_or(0.02))
                }
            };
            img.write_ppm(&out)?;
            println!("wrote {}x{} image to {}", img.width, img.height, out.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = with_thread_pool(|| match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wander: {e}");
            e.exit_code()
        }
    });
    ExitCode::from(code as u8)
}
