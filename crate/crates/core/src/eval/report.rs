use std::path::Path;

use serde::{Deserialize, Serialize};

use super::edit::EditScores;
use super::t2i::{T2iFragment, T2iScores};
use crate::error::{Error, Result};
use crate::introspect::TrajectoryDump;
use crate::world::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub with_aha: Option<T2iScores>,
    pub without_aha: Option<T2iScores>,
    pub editing: EditScores,
    pub consistency_ratio: f64,
    pub reason_accuracy: f64,
}

/// Collects evaluation fragments; every fragment is required.
#[derive(Debug, Clone, Default)]
pub struct ReportBuilder {
    pub seed: u64,
    pub t2i: Option<T2iFragment>,
    pub editing: Option<EditScores>,
    pub consistency_ratio: Option<f64>,
    pub reason_accuracy: Option<f64>,
}

impl ReportBuilder {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn build(&self) -> Result<EvalReport> {
        let mut missing = Vec::new();
        if self.t2i.is_none() {
            missing.push("t2i");
        }
        if self.editing.is_none() {
            missing.push("editing");
        }
        if self.consistency_ratio.is_none() {
            missing.push("consistency_ratio");
        }
        if self.reason_accuracy.is_none() {
            missing.push("reason_accuracy");
        }
        if !missing.is_empty() {
            return Err(Error::IncompleteReport(missing.join(", ")));
        }
        let t2i = self.t2i.as_ref().unwrap();
        Ok(EvalReport {
            seed: self.seed,
            with_aha: t2i.with_aha.clone(),
            without_aha: t2i.without_aha.clone(),
            editing: self.editing.clone().unwrap(),
            consistency_ratio: self.consistency_ratio.unwrap(),
            reason_accuracy: self.reason_accuracy.unwrap(),
        })
    }
}

#[derive(Serialize)]
struct CategoryRow<'a> {
    mode: &'a str,
    category: &'a str,
    mean_qa: f64,
}

/// Write `report.json`, `t2i.csv` (one row per prompt), `categories.csv`,
/// `edit.csv` (one row per task) and `trajectories.jsonl` into `dir`.
pub fn write_report(dir: &Path, builder: &ReportBuilder) -> Result<EvalReport> {
    let report = builder.build()?;
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;

    let t2i = builder.t2i.as_ref().unwrap();
    let mut w = csv::Writer::from_path(dir.join("t2i.csv"))?;
    for r in &t2i.results {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("categories.csv"))?;
    for (mode, scores) in [("with-aha", &report.with_aha), ("without-aha", &report.without_aha)] {
        if let Some(s) = scores {
            for (category, &mean_qa) in &s.per_category {
                w.serialize(CategoryRow { mode, category, mean_qa })?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("edit.csv"))?;
    for r in &builder.editing.as_ref().unwrap().results {
        w.serialize(r)?;
    }
    w.flush()?;

    let dumps: Vec<TrajectoryDump> = t2i.trajectories.iter().map(TrajectoryDump::from).collect();
    jsonl::write(&dir.join("trajectories.jsonl"), &dumps)?;
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{eval_edit, eval_t2i, AhaMode, EvalSuite};
    use crate::introspect::EpisodeConfig;
    use crate::policy::random_params;

    fn builder() -> ReportBuilder {
        let p = random_params(3, 0.3);
        let suite = EvalSuite::generate(2, 5, 1);
        let mut b = ReportBuilder::new(7);
        b.t2i = Some(eval_t2i(&p, &suite, AhaMode::Both, &EpisodeConfig::default(), 7));
        b.editing = Some(eval_edit(&p, &suite, 4.0).unwrap());
        b.consistency_ratio = Some(0.75);
        b.reason_accuracy = Some(0.25);
        b
    }

    #[test]
    fn missing_fragments_are_named() {
        let mut b = builder();
        b.editing = None;
        b.reason_accuracy = None;
        match b.build() {
            Err(Error::IncompleteReport(m)) => assert_eq!(m, "editing, reason_accuracy"),
            other => panic!("expected IncompleteReport, got {other:?}"),
        }
    }

    #[test]
    fn written_report_round_trips_and_is_byte_stable() {
        let b = builder();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let mut report = write_report(d1.path(), &b).unwrap();
        write_report(d2.path(), &builder()).unwrap();
        // Per-task results go to edit.csv, not report.json.
        report.editing.results.clear();
        assert_eq!(load_report(&d1.path().join("report.json")).unwrap(), report);
        for f in ["report.json", "t2i.csv", "categories.csv", "edit.csv", "trajectories.jsonl"] {
            let a = std::fs::read(d1.path().join(f)).unwrap();
            assert_eq!(a, std::fs::read(d2.path().join(f)).unwrap(), "{f}");
            assert!(!a.is_empty());
        }
        let t2i = std::fs::read_to_string(d1.path().join("t2i.csv")).unwrap();
        assert_eq!(t2i.lines().count(), 1 + 12);
    }
}
