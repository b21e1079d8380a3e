//! `qlottery` command line: `run`, `verify` and `stats`.
//!
//! Exit codes: 0 success, 1 bad input, 2 run aborted, 3 verification failed.

use std::io::Write;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::RunConfig;
use crate::protocol::{detection_stats, run_lottery_with_source, verify_transcript, Transcript};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

pub const SEED_ENV: &str = "QLOTTERY_SEED";

#[derive(Debug, Parser)]
#[command(name = "qlottery", version, about = "Quantum lottery simulator and verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one lottery from a config file.
    Run {
        config: PathBuf,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Write the transcript JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the TID width (below 256 the run is marked NON-SECURE).
        #[arg(long)]
        width: Option<usize>,
    },
    /// Check a transcript using its public events only.
    Verify { transcript: PathBuf },
    /// Repeat a config over independent seeds and report detection rates.
    Stats {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

fn seed_choice(config: &RunConfig, sub: &ArgMatches, seed: Option<u64>) -> (u64, String) {
    match (seed, sub.value_source("seed")) {
        (Some(s), Some(ValueSource::EnvVariable)) => (s, format!("env:{SEED_ENV}")),
        (Some(s), _) => (s, "command-line".into()),
        (None, _) => match config.seed {
            Some(s) => (s, "config".into()),
            None => (0, "default".into()),
        },
    }
}

fn load_config(
    path: &PathBuf,
    width: Option<usize>,
    err: &mut dyn Write,
) -> Option<RunConfig> {
    let mut config = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return None;
        }
    };
    if let Some(w) = width {
        config.widths.tid = w;
        if let Err(e) = config.validate() {
            let _ = writeln!(err, "error: {e}");
            return None;
        }
    }
    Some(config)
}

/// Parses `args` (program name first) and executes the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return EXIT_INPUT;
        }
    };
    let sub = matches
        .subcommand()
        .map(|(_, m)| m.clone())
        .expect("subcommand required");
    match cli.command {
        Command::Run {
            config,
            seed,
            out: out_path,
            width,
        } => cmd_run(&config, seed, out_path, width, &sub, out, err),
        Command::Verify { transcript } => cmd_verify(&transcript, out, err),
        Command::Stats {
            config,
            trials,
            seed,
            json,
        } => cmd_stats(&config, trials as usize, seed, json, &sub, out, err),
    }
}

fn cmd_run(
    path: &PathBuf,
    seed: Option<u64>,
    out_path: Option<PathBuf>,
    width: Option<usize>,
    sub: &ArgMatches,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(config) = load_config(path, width, err) else {
        return EXIT_INPUT;
    };
    let (seed, source) = seed_choice(&config, sub, seed);
    let transcript = match run_lottery_with_source(&config, seed, &source) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Some(p) = out_path {
        let json = match transcript.to_json() {
            Ok(j) => j,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
        };
        if let Err(e) = std::fs::write(&p, json) {
            let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
            return EXIT_INPUT;
        }
    }
    let _ = print_summary(&transcript, out);
    if transcript.abort_reason().is_some() {
        EXIT_ABORTED
    } else {
        EXIT_OK
    }
}

fn print_summary(t: &Transcript, out: &mut dyn Write) -> std::io::Result<()> {
    let echo = &t.config_echo;
    writeln!(
        out,
        "scheme {} | participants {} | seed {} ({}) | attack {}",
        echo.config.scheme,
        echo.config.participants,
        echo.seed,
        echo.seed_source,
        echo.config.adversary.name()
    )?;
    if echo.non_secure {
        writeln!(out, "NON-SECURE: TID width {} bits", echo.config.widths.tid)?;
    }
    if let Some(reason) = t.abort_reason() {
        writeln!(out, "run aborted: {reason}")?;
        return Ok(());
    }
    if let Some(w) = &t.winner_hex {
        writeln!(out, "winner {w}")?;
    }
    writeln!(out, "{:<12} {:>8} {:>12} {:>10}", "participant", "distance", "share", "decimal")?;
    for row in &t.rewards {
        writeln!(
            out,
            "{:<12} {:>8} {:>12} {:>10}",
            format!("P{}", row.participant),
            row.distance,
            row.share,
            row.share_decimal
        )?;
    }
    for v in &t.verdicts {
        writeln!(out, "verdict: {v}")?;
    }
    Ok(())
}

fn cmd_verify(path: &PathBuf, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let transcript = match Transcript::from_json(&text) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let verdicts = match verify_transcript(&transcript.public_view()) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if verdicts.iter().all(|v| v.is_ok()) {
        let _ = writeln!(out, "OK");
        return EXIT_OK;
    }
    for v in verdicts.iter().filter(|v| !v.is_ok()) {
        let culprit = v.culprit().unwrap_or_default();
        let _ = writeln!(out, "VIOLATION: {v} (culprit: {culprit})");
    }
    EXIT_VIOLATION
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn cmd_stats(
    path: &PathBuf,
    trials: usize,
    seed: Option<u64>,
    json: bool,
    sub: &ArgMatches,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(config) = load_config(path, None, err) else {
        return EXIT_INPUT;
    };
    let (seed, source) = seed_choice(&config, sub, seed);
    let summary = match detection_stats(&config, seed, trials) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let _ = writeln!(out, "seed                 {seed} ({source})");
    let _ = writeln!(out, "scheme               {}", summary.scheme);
    let _ = writeln!(out, "attack               {}", summary.attack);
    let _ = writeln!(out, "trials               {}", summary.trials);
    let _ = writeln!(out, "detections           {}", summary.detections);
    let _ = writeln!(out, "detection prob       {:.4}", summary.detection_probability);
    let _ = writeln!(
        out,
        "wilson 95%           [{:.4}, {:.4}]",
        summary.wilson_low, summary.wilson_high
    );
    let _ = writeln!(out, "mean error rate      {}", fmt_opt(summary.mean_error_rate));
    let _ = writeln!(
        out,
        "mean sig mismatch    {}",
        fmt_opt(summary.mean_signature_mismatch_rate)
    );
    let _ = writeln!(out, "aborted runs         {}", summary.aborted_runs);
    if json {
        match serde_json::to_string_pretty(&summary) {
            Ok(j) => {
                let _ = writeln!(out, "{j}");
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
        }
    }
    EXIT_OK
}
