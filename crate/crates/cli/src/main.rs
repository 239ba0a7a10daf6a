//! `fracell <command> [--config path] [--key=value ...] [--out dir]`
//!
//! Exit status: 0 when every assertion passes, 1 when some assertion fails
//! (the failures are listed in `report.json` and on stderr), 2 on invalid
//! configuration or any other error.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::Config;

#[derive(Parser, Debug)]
#[command(
    name = "fracell",
    version,
    about = "Fractional elliptic experiments: solve, kernel, extension, halfline, probe, converge",
    after_help = concat!(
        "Any configuration key can be overridden as --key=value.\n",
        "FRACELL_THREADS caps the worker threads used for independent sweep points.\n",
        "Run `fracell keys` to list the keys and their defaults."
    )
)]
struct Cli {
    /// solve | kernel | extension | halfline | probe | converge | keys
    command: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "fracell-out")]
    out: PathBuf,
}

/// Pulls `--key=value` overrides out of argv, leaving clap's own options.
fn split_args(args: impl IntoIterator<Item = String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--").and_then(|kv| kv.split_once('=')) {
            Some((k, v)) if k != "config" && k != "out" => overrides.push((k.to_string(), v.to_string())),
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FRACELL_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("FRACELL_THREADS = `{v}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main_inner() -> Result<bool> {
    let (args, overrides) = split_args(std::env::args());
    let cli = Cli::parse_from(args);
    if cli.command == "keys" {
        println!("{}", config::describe_keys());
        return Ok(true);
    }
    configure_threads()?;
    let cfg = Config::load(cli.config.as_deref(), &overrides)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let outcome = commands::run(&cli.command, &cfg, &cli.out)?;
    report::write(&cli.out, &cli.command, &cfg, &outcome)?;
    for a in &outcome.assertions {
        println!(
            "{} {} = {:.6e} ({})",
            if a.pass { "PASS" } else { "FAIL" },
            a.name,
            a.value,
            a.condition
        );
    }
    let failures = outcome.failures();
    if !failures.is_empty() {
        eprintln!("failed assertions: {}", failures.join(", "));
    }
    Ok(failures.is_empty())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_separated_from_options() {
        let argv = ["fracell", "solve", "--s=0.3", "--out=dir", "--config", "c.txt", "--nodes=65"];
        let (rest, ov) = split_args(argv.iter().map(|s| s.to_string()));
        assert_eq!(rest, ["fracell", "solve", "--out=dir", "--config", "c.txt"]);
        assert_eq!(ov, [("s".to_string(), "0.3".to_string()), ("nodes".to_string(), "65".to_string())]);
    }
}
