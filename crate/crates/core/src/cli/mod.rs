//! Command-line pipeline: `prepare` builds and persists a corpus, `train`
//! fits one mode, `eval` scores a checkpoint and `compare` runs all three
//! modes into a comparison table and loss curves.
//!
//! Every command reads one TOML [`RunConfig`]; `--seed`, `--out` and
//! `--threads` override the file. Outputs are written to temporary files
//! and renamed into place only after the command has succeeded.

mod checkpoint;
mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use tempfile::NamedTempFile;

use crate::eval::Side;
use crate::training::TrainMode;
use crate::{Error, Result};

pub use checkpoint::{format_version, Checkpoint, MAGIC};
pub use commands::{
    build_corpus, cmd_compare, cmd_eval, cmd_prepare, cmd_train, load_corpus, untrained_side_note,
    CompareSummary, Manifest, ModeRun, TrainSummary, CONFIG_FILE, CORPUS_FILE, CURVES_HEADER,
    MANIFEST_FILE,
};
pub use config::{DataConfig, DataSource, GridConfig, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "jsr", version, about = "Joint search and recommendation training")]
pub struct Cli {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the corpus and write it with a manifest of counts.
    Prepare,
    /// Train one mode on the prepared corpus.
    Train {
        /// Overrides `training.mode`.
        #[arg(long)]
        mode: Option<TrainMode>,
    },
    /// Evaluate a checkpoint on the held-out side of the prepared corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        side: Side,
        /// Report path; defaults to `<out>/eval/`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train joint and individual models and compare them.
    Compare,
}

/// Run a parsed command line and return the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let overrides = Overrides { seed: cli.seed, out: cli.out.clone(), threads: cli.threads };
    let mut config = RunConfig::load(cli.config.as_deref())?.resolve(&overrides)?;
    if config.threads > 0 {
        // Fails only when the pool already exists, e.g. a second call in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
    }
    match &cli.command {
        Command::Prepare => json(&cmd_prepare(&config)?),
        Command::Train { mode } => {
            if let Some(m) = mode {
                config.training.mode = *m;
            }
            json(&cmd_train(&config)?)
        }
        Command::Eval { checkpoint, side, report } => {
            Ok(cmd_eval(&config, checkpoint, *side, report.as_deref())?.to_text())
        }
        Command::Compare => Ok(cmd_compare(&config)?.table),
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))
}

fn staged(path: &Path, bytes: &[u8]) -> Result<NamedTempFile> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| Error::io(tmp.path(), e))?;
    Ok(tmp)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_all_atomic(&[(path.to_path_buf(), bytes.to_vec())])
}

/// Stage every file before renaming any, so a failed write leaves no new
/// outputs behind.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let staged: Vec<(NamedTempFile, &PathBuf)> = files
        .iter()
        .map(|(path, bytes)| Ok((staged(path, bytes)?, path)))
        .collect::<Result<_>>()?;
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_globally() {
        let cli = Cli::try_parse_from(["jsr", "train", "--mode", "rs_only", "--seed", "3", "--threads", "2"]).unwrap();
        assert_eq!(cli.seed, Some(3));
        assert_eq!(cli.threads, Some(2));
        assert!(matches!(cli.command, Command::Train { mode: Some(TrainMode::RsOnly) }));
        let cli = Cli::try_parse_from(["jsr", "--out", "d", "eval", "--checkpoint", "c", "--side", "retrieval"]).unwrap();
        assert_eq!(cli.out, Some(PathBuf::from("d")));
        assert!(Cli::try_parse_from(["jsr", "eval", "--checkpoint", "c", "--side", "both"]).is_err());
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path().join("a")).unwrap().count(), 1);
    }
}
