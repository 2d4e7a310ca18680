//! Command-line front end: FER sweeps, PCS campaigns, correction studies and
//! the loop-series verification suite.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ldpc_floor::harness::{
    self, CodeSource, DecoderName, ExperimentConfig, StudyConfig,
};

#[derive(Parser)]
#[command(name = "ldpc-floor", version, about = "LDPC error-floor toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// RNG seed; every run must be reproducible, so this is mandatory.
    #[arg(long)]
    seed: u64,
    /// Optional key=value config file; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo frame-error-rate sweep over an SNR grid.
    Fer {
        #[command(flatten)]
        common: Common,
        /// tanner155 | hamming74 | path to an alist file.
        #[arg(long)]
        code: Option<String>,
        /// bp | lp | erasure | bg | fg | lgg.
        #[arg(long)]
        decoder: Option<String>,
        /// Grid of s^2 values: "start:end:step" or "a,b,c".
        #[arg(long)]
        snr: Option<String>,
        #[arg(long)]
        target_errors: Option<usize>,
        #[arg(long)]
        max_frames: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudo-codeword search campaign; writes a JSON-lines catalog.
    Pcs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        code: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correction study over a cataloged set of pseudo-codewords.
    Study {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        code: Option<String>,
        /// Existing catalog (JSON lines, as written by `pcs`).
        #[arg(long)]
        catalog: PathBuf,
        /// Comma-separated decoder list, e.g. "bg,lgg,erasure".
        #[arg(long)]
        methods: Option<String>,
        /// Also run the ~N-pinned-LP successful-bit scan per entry.
        #[arg(long)]
        successful_bits: bool,
        /// Output JSON path; a readable table goes to stdout.
        #[arg(long)]
        out: PathBuf,
    },
    /// Loop-series exactness suite on the bundled toy instances.
    VerifyLoops {
        #[command(flatten)]
        common: Common,
    },
}

fn file_overrides(common: &Common) -> Result<std::collections::BTreeMap<String, String>> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            Ok(harness::parse_config_file(&text)?)
        }
        None => Ok(Default::default()),
    }
}

fn pick<T: Clone>(
    flag: Option<T>,
    file: Option<Result<T>>,
    default: T,
) -> Result<T> {
    match (flag, file) {
        (Some(v), _) => Ok(v),
        (None, Some(v)) => v,
        (None, None) => Ok(default),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fer {
            common,
            code,
            decoder,
            snr,
            target_errors,
            max_frames,
            out,
        } => {
            let file = file_overrides(&common)?;
            let config = ExperimentConfig {
                code: pick(
                    code.map(|s| CodeSource::from_str(&s).unwrap()),
                    file.get("code").map(|s| Ok(CodeSource::from_str(s)?)),
                    CodeSource::Tanner155,
                )?,
                decoder: pick(
                    decoder.as_deref().map(DecoderName::from_str).transpose()?,
                    file.get("decoder").map(|s| Ok(DecoderName::from_str(s)?)),
                    DecoderName::Lp,
                )?,
                snr_grid: pick(
                    snr.as_deref().map(harness::parse_snr_grid).transpose()?,
                    file.get("snr").map(|s| Ok(harness::parse_snr_grid(s)?)),
                    vec![1.6],
                )?,
                max_frames: pick(
                    max_frames,
                    file.get("max_frames")
                        .map(|s| s.parse().context("max_frames")),
                    100_000,
                )?,
                target_errors: pick(
                    target_errors,
                    file.get("target_errors")
                        .map(|s| s.parse().context("target_errors")),
                    50,
                )?,
                seed: common.seed,
            };
            let points = harness::run_fer(&config)?;
            harness::write_fer_csv(&out, &config, &points)?;
            for p in &points {
                println!(
                    "s2={:<6} frames={:<8} errors={:<6} fer={:.4e} [{:.4e}, {:.4e}]",
                    p.s2, p.frames, p.errors, p.fer, p.wilson_lo, p.wilson_hi
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Pcs {
            common,
            code,
            restarts,
            out,
        } => {
            let file = file_overrides(&common)?;
            let source = pick(
                code.map(|s| CodeSource::from_str(&s).unwrap()),
                file.get("code").map(|s| Ok(CodeSource::from_str(s)?)),
                CodeSource::Tanner155,
            )?;
            let restarts = pick(
                restarts,
                file.get("restarts").map(|s| s.parse().context("restarts")),
                500,
            )?;
            let h = source.load()?;
            let summary = harness::run_pcs_campaign(&h, restarts, common.seed, &out)?;
            println!(
                "{} restarts -> {} distinct pseudo-codewords, {} below d_eff 20, min d_eff {}",
                summary.restarts,
                summary.catalog_size,
                summary.dangerous_count,
                summary
                    .min_d_eff
                    .map(|d| format!("{d:.4}"))
                    .unwrap_or_else(|| "n/a".into())
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Study {
            common,
            code,
            catalog,
            methods,
            successful_bits,
            out,
        } => {
            let file = file_overrides(&common)?;
            let source = pick(
                code.map(|s| CodeSource::from_str(&s).unwrap()),
                file.get("code").map(|s| Ok(CodeSource::from_str(s)?)),
                CodeSource::Tanner155,
            )?;
            let methods_text = methods
                .or_else(|| file.get("methods").cloned())
                .unwrap_or_else(|| "erasure,bg,lgg".into());
            let methods = methods_text
                .split(',')
                .map(|tok| DecoderName::from_str(tok.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let h = source.load()?;
            let entries = harness::load_catalog(&catalog)?;
            if entries.is_empty() {
                bail!("catalog {} has no entries", catalog.display());
            }
            let report = harness::run_correction_study(
                &h,
                &entries,
                &StudyConfig {
                    methods,
                    seed: common.seed,
                    with_successful_bits: successful_bits,
                },
            )?;
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            print!("{}", report.render_table());
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::VerifyLoops { common } => {
            let reports = harness::verify_loops_suite(common.seed)?;
            let mut failed = false;
            for (name, r) in &reports {
                let ok = r.loop_relative_error < 1e-6 && r.bp_converged;
                failed |= !ok;
                println!(
                    "{:<18} loops={:<4} Z={:.6e} Z_bethe={:.6e} Z_loop={:.6e} rel_err={:.2e} [{}]",
                    name,
                    r.loop_count,
                    r.z_exact,
                    r.z_bethe,
                    r.z_loop,
                    r.loop_relative_error,
                    if ok { "ok" } else { "FAIL" }
                );
            }
            if failed {
                bail!("loop-series verification failed");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
