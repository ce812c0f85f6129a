use std::path::PathBuf;
use std::process::ExitCode;

use calib_atlas_cli::audit::run_audit;
use calib_atlas_cli::error::CliResult;
use calib_atlas_cli::plot::{emit_plot_data, load_report};
use calib_atlas_cli::report::write_json;
use calib_atlas_cli::verify_runner::{run_verify, Suite, VerifyOptions};
use calib_atlas_cli::{CONFIG_SCHEMA, EXIT_ERROR, EXIT_FAIL, EXIT_PASS, MANIFEST_SCHEMA, REPORT_SCHEMA};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "calib-atlas", version, about = "Calibration audits and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaName {
    Config,
    Report,
    Manifest,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run the metrics of an audit configuration and write report.json.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite (edges, counterexamples, oracles, all) and write manifest.json.
    Verify {
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Shift every edge bound by this amount (fault injection).
        #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
        tamper_bound_offset: f64,
    },
    /// Write reliability and simplex CSVs from a report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the JSON schemas of configurations, reports and manifests.
    Schema {
        #[arg(value_enum, default_value_t = SchemaName::All)]
        which: SchemaName,
    },
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Audit { config, out } => {
            let outcome = run_audit(&config)?;
            let path = write_json(&out, "report.json", &outcome.report)?;
            log::info!("wrote {}", path.display());
            Ok(if outcome.passed { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Verify { suite, seed, out, tamper_bound_offset } => {
            let outcome = run_verify(suite, VerifyOptions { seed, bound_offset: tamper_bound_offset });
            let path = write_json(&out, "manifest.json", &outcome.manifest)?;
            log::info!("wrote {}", path.display());
            Ok(if outcome.passed { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Plot { report, out } => {
            for path in emit_plot_data(&load_report(&report)?, &out)? {
                log::info!("wrote {}", path.display());
            }
            Ok(EXIT_PASS)
        }
        Command::Schema { which } => {
            let text = match which {
                SchemaName::Config => CONFIG_SCHEMA.to_string(),
                SchemaName::Report => REPORT_SCHEMA.to_string(),
                SchemaName::Manifest => MANIFEST_SCHEMA.to_string(),
                SchemaName::All => format!(
                    "{{\"audit_config\": {CONFIG_SCHEMA}, \"report\": {REPORT_SCHEMA}, \"verify_manifest\": {MANIFEST_SCHEMA}}}\n"
                ),
            };
            print!("{text}");
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CALIB_ATLAS_LOG", "warn")).init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
