//! Run directory layout and the files written into it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trainer::{EpochRecord, TrainSink};
use crate::world::TrajectoryRecord;

pub const CONFIG_ECHO_FILE: &str = "config_echo.toml";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const EVAL_TRAJECTORIES_FILE: &str = "eval_trajectories.jsonl";
pub const EVAL_METRICS_FILE: &str = "eval_metrics.json";

/// `<root>/<algorithm>/<seed>`.
pub fn run_dir(root: &Path, algorithm: &str, seed: u64) -> PathBuf {
    root.join(algorithm).join(seed.to_string())
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f =
        File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(BufWriter::new(f))
}

/// Column names of the epoch CSV for `agents` UAMs.
pub fn epoch_header(agents: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_owned(), "epsilon".to_owned(), "mean_reward".to_owned()];
    h.extend((1..=agents).map(|j| format!("per_agent_reward_{j}")));
    h.push("buffer_size".to_owned());
    h.push("wall_ms".to_owned());
    h
}

/// Streams the epoch CSV and (optionally) a trajectory log as training runs.
pub struct RunWriter {
    epochs: Option<csv::Writer<BufWriter<File>>>,
    trajectories: Option<BufWriter<File>>,
    agents: usize,
}

impl RunWriter {
    pub fn new(epochs_path: Option<&Path>, trajectories_path: Option<&Path>, agents: usize) -> Result<Self> {
        let epochs = match epochs_path {
            Some(p) => {
                let mut w = csv::Writer::from_writer(create(p)?);
                w.write_record(epoch_header(agents)).map_err(csv_io)?;
                Some(w)
            }
            None => None,
        };
        let trajectories = trajectories_path.map(create).transpose()?;
        Ok(Self {
            epochs,
            trajectories,
            agents,
        })
    }

    /// Writer for the standard training files inside `dir`.
    pub fn for_training(dir: &Path, agents: usize) -> Result<Self> {
        Self::new(Some(&dir.join(EPOCHS_FILE)), Some(&dir.join(TRAJECTORIES_FILE)), agents)
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(w) = self.epochs.as_mut() {
            w.flush()?;
        }
        if let Some(w) = self.trajectories.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl TrainSink for RunWriter {
    fn on_epoch(&mut self, r: &EpochRecord) -> Result<()> {
        if r.per_agent_reward.len() != self.agents {
            return Err(Error::shape(
                "epoch record agents",
                self.agents,
                r.per_agent_reward.len(),
            ));
        }
        if let Some(w) = self.epochs.as_mut() {
            let mut row = vec![r.epoch.to_string(), r.epsilon.to_string(), r.mean_reward.to_string()];
            row.extend(r.per_agent_reward.iter().map(f64::to_string));
            row.push(r.buffer_size.to_string());
            row.push(r.wall_ms.to_string());
            w.write_record(&row).map_err(csv_io)?;
        }
        Ok(())
    }

    fn on_trajectory(&mut self, r: &TrajectoryRecord) -> Result<()> {
        if let Some(w) = self.trajectories.as_mut() {
            serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Pretty JSON file.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}
