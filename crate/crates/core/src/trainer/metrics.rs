use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stability::Intervention;
use crate::error::Result;
use crate::policy::{save_checkpoint, PolicyParams};

/// One RL iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub lr: f64,
    pub beta: f64,
    pub mean_reward: f64,
    pub mean_qa_final: f64,
    pub mean_qa_first: f64,
    pub kl_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftMetricsRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEvent {
    pub step: usize,
    pub kind: Intervention,
    pub lr_scale: f64,
    pub beta: f64,
    pub reward_window_mean: f64,
}

/// Output directory of a training run: metrics CSV, JSON-lines logs, checkpoint.
pub struct RunSink {
    dir: PathBuf,
    metrics: Option<csv::Writer<File>>,
    events: Option<BufWriter<File>>,
    audit: Option<BufWriter<File>>,
}

impl RunSink {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let events = Some(BufWriter::new(File::create(dir.join("events.jsonl"))?));
        Ok(Self { dir: dir.to_path_buf(), metrics: None, events, audit: None })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn metric<T: Serialize>(&mut self, row: &T) -> Result<()> {
        if self.metrics.is_none() {
            self.metrics = Some(csv::Writer::from_path(self.dir.join("metrics.csv"))?);
        }
        let w = self.metrics.as_mut().unwrap();
        w.serialize(row)?;
        w.flush()?;
        Ok(())
    }

    fn jsonl<T: Serialize>(slot: &mut Option<BufWriter<File>>, path: PathBuf, item: &T) -> Result<()> {
        if slot.is_none() {
            *slot = Some(BufWriter::new(File::create(path)?));
        }
        let w = slot.as_mut().unwrap();
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn event(&mut self, e: &InterventionEvent) -> Result<()> {
        Self::jsonl(&mut self.events, self.dir.join("events.jsonl"), e)
    }

    pub fn audit<T: Serialize>(&mut self, record: &T) -> Result<()> {
        Self::jsonl(&mut self.audit, self.dir.join("rewards.jsonl"), record)
    }

    pub fn checkpoint(&self, params: &PolicyParams) -> Result<PathBuf> {
        let path = self.dir.join("checkpoint.bin");
        save_checkpoint(&path, params)?;
        Ok(path)
    }
}
