use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use tryinfo::table::SweepTable;

use crate::commands;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tryinfo", version, about = "Information and Fisher analysis of time-reversed interferometry")]
struct Cli {
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the source/detector grid size.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Override the finite-difference step.
    #[arg(long, global = true)]
    fd_delta: Option<f64>,
    /// Override the identity-residual tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Worker threads for sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Record the wall-clock time in the output metadata.
    #[arg(long, global = true)]
    timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropies and mutual information of the two-path kernel versus beta.
    SweepBeta {
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fisher information of the null model versus residual depth, one table per floor.
    NullSweep {
        /// Background floors; repeat or comma-separate.
        #[arg(long, value_delimiter = ',')]
        b: Vec<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Entropy of truncated mode spectra and of unitarily rotated states.
    Coherence {
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Numerical identity suite; exits with status 2 on any failure.
    CheckIdentities {
        /// Check a joint distribution file (`x,y,p` rows) instead of the built-in models.
        #[arg(long)]
        joint: Option<PathBuf>,
    },
    /// Write the configured complex kernel as `x,y,re,im,abs2` plus a `.meta` sidecar.
    KernelDump {
        #[arg(long)]
        beta: Option<f64>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.grid_n {
        cfg.grid.n = n;
    }
    if let Some(d) = cli.fd_delta {
        cfg.numerics.fd_delta = d;
    }
    if let Some(t) = cli.tolerance {
        cfg.numerics.tolerance = t;
    }
    match &cli.command {
        Command::SweepBeta { start, stop, count } => {
            cfg.sweep_beta.start = start.unwrap_or(cfg.sweep_beta.start);
            cfg.sweep_beta.stop = stop.unwrap_or(cfg.sweep_beta.stop);
            cfg.sweep_beta.count = count.unwrap_or(cfg.sweep_beta.count);
        }
        Command::NullSweep { b, count } => {
            if !b.is_empty() {
                cfg.null.b = b.clone();
            }
            cfg.null.count = count.unwrap_or(cfg.null.count);
        }
        Command::Coherence { modes, seed } => {
            cfg.coherence.modes = modes.unwrap_or(cfg.coherence.modes);
            cfg.coherence.seed = seed.unwrap_or(cfg.coherence.seed);
        }
        Command::KernelDump { beta } => {
            cfg.kernel.beta = beta.unwrap_or(cfg.kernel.beta);
        }
        Command::CheckIdentities { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn stamp(t: &mut SweepTable, enabled: bool) {
    if enabled {
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        t.meta("timestamp_unix", secs);
    }
}

/// `runs/null.csv` with floor 1e-3 becomes `runs/null_b1e-3.csv`.
pub fn per_floor_path(out: &Path, b: f64) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_b{b:e}.{}", ext.to_string_lossy()),
        None => format!("{stem}_b{b:e}"),
    };
    out.with_file_name(name)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::SweepBeta { .. } => {
            let mut t = commands::sweep_beta(&cfg, cli.workers)?;
            stamp(&mut t, cli.timestamp);
            write_text(out, &t.to_csv_string())
        }
        Command::NullSweep { .. } => {
            let mut tables = commands::null_sweep(&cfg, cli.workers)?;
            for (_, t) in tables.iter_mut() {
                stamp(t, cli.timestamp);
            }
            match out {
                Some(p) if tables.len() > 1 => {
                    for (b, t) in &tables {
                        write_text(Some(&per_floor_path(p, *b)), &t.to_csv_string())?;
                    }
                    Ok(())
                }
                _ => {
                    let text: Vec<String> = tables.iter().map(|(_, t)| t.to_csv_string()).collect();
                    write_text(out, &text.join("\n"))
                }
            }
        }
        Command::Coherence { .. } => {
            let mut t = commands::coherence(&cfg)?;
            stamp(&mut t, cli.timestamp);
            write_text(out, &t.to_csv_string())
        }
        Command::CheckIdentities { joint } => {
            let report = commands::check_identities(&cfg, joint.as_deref(), cli.workers)?;
            write_text(out, &report.to_csv_string())?;
            let failed = report.failures();
            if failed.is_empty() {
                Ok(())
            } else {
                let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
                Err(CliError::Identity(names.join(", ")))
            }
        }
        Command::KernelDump { .. } => {
            let (kernel, meta) = commands::kernel_dump(&cfg)?;
            let mut csv = Vec::new();
            kernel.write_csv(&mut csv).map_err(|e| CliError::io(Path::new("<buffer>"), e))?;
            write_text(out, &String::from_utf8(csv).expect("ascii csv"))?;
            if let Some(p) = out {
                let mut side = p.as_os_str().to_owned();
                side.push(".meta");
                let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
                write_text(Some(Path::new(&side)), &text)?;
            }
            Ok(())
        }
    }
}
