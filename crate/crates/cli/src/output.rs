//! On-disk layout shared by the long-running commands.
//!
//! Every resolved parameter point gets its own directory holding the full
//! velocity series, the reconstructed tip path, a restartable snapshot, and
//! a key=value summary. Summaries use 17 significant digits so a resumed
//! run reads back exactly the floats it wrote. Wall-clock information lives
//! only in the top-level MANIFEST, keeping everything else byte-stable
//! across reruns.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rotor_core::error::Result;
use rotor_core::quotient::Classification;
use rotor_core::sweep::{SweepRecord, SweepResult, SweepSink};
use rotor_core::{reconstruct_tip, write_snapshot, SimState};

pub fn record_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("rec_{index:03}"))
}

pub fn record_summary(record: &SweepRecord) -> String {
    let mut out = String::new();
    out.push_str(&format!("beta={:.16e}\n", record.beta));
    out.push_str(&format!("classification={}\n", record.classification));
    out.push_str(&format!("q_s={:.16e}\n", record.q_s));
    match record.period {
        Some(t) => out.push_str(&format!("period={t:.16e}\n")),
        None => out.push_str("period=nan\n"),
    }
    out.push_str(&format!("n_periods={}\n", record.n_periods));
    out.push_str(&format!("steps_run={}\n", record.steps_run));
    out.push_str(&format!("hash_before={}\n", record.hash_before));
    out.push_str(&format!("hash_after={}\n", record.hash_after));
    let snapshot = match &record.snapshot {
        Some(p) => p.file_name().map(|f| f.to_string_lossy().into_owned()),
        None => None,
    };
    out.push_str(&format!("snapshot={}\n", snapshot.as_deref().unwrap_or("none")));
    out
}

/// Reads a summary written by [`record_summary`] back into a record.
/// Returns `None` when any field is missing or malformed, which a resumed
/// sweep treats as "this point was not finished".
pub fn parse_record_summary(text: &str, dir: &Path) -> Option<SweepRecord> {
    let mut beta = None;
    let mut classification = None;
    let mut q_s = None;
    let mut period = None;
    let mut n_periods = None;
    let mut steps_run = None;
    let mut hash_before = None;
    let mut hash_after = None;
    let mut snapshot = None;
    for line in text.lines() {
        let (key, value) = line.split_once('=')?;
        match key {
            "beta" => beta = value.parse::<f64>().ok(),
            "classification" => classification = value.parse::<Classification>().ok(),
            "q_s" => q_s = value.parse::<f64>().ok(),
            "period" => {
                let t = value.parse::<f64>().ok()?;
                period = Some(if t.is_nan() { None } else { Some(t) });
            }
            "n_periods" => n_periods = value.parse::<usize>().ok(),
            "steps_run" => steps_run = value.parse::<u64>().ok(),
            "hash_before" => hash_before = Some(value.to_string()),
            "hash_after" => hash_after = Some(value.to_string()),
            "snapshot" => {
                snapshot = Some(if value == "none" { None } else { Some(dir.join(value)) });
            }
            _ => return None,
        }
    }
    Some(SweepRecord {
        beta: beta?,
        q_s: q_s?,
        classification: classification?,
        period: period?,
        n_periods: n_periods?,
        steps_run: steps_run?,
        snapshot: snapshot?,
        hash_before: hash_before?,
        hash_after: hash_after?,
    })
}

/// Writes the full per-point file set and returns the snapshot path.
pub fn write_record_dir(dir: &Path, record: &SweepRecord, state: &SimState) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    state.record.write_csv(&dir.join("quotient.csv"))?;
    reconstruct_tip(&state.record, 0.0, 0.0, 0.0).write_csv(dir.join("tip.csv"))?;
    let snapshot = dir.join("snapshot.txt");
    write_snapshot(state, &snapshot)?;
    let mut summary = record.clone();
    summary.snapshot = Some(snapshot.clone());
    std::fs::write(dir.join("summary.txt"), record_summary(&summary))?;
    Ok(snapshot)
}

/// Sink that lays each sweep point out as `rec_NNN/` under a root
/// directory. `base_index` shifts the numbering when a resumed sweep
/// continues after already-finished points.
pub struct RecordDirSink {
    pub root: PathBuf,
    pub base_index: usize,
    pub written: usize,
}

impl SweepSink for RecordDirSink {
    fn persist(
        &mut self,
        index: usize,
        record: &SweepRecord,
        state: &SimState,
    ) -> Result<Option<PathBuf>> {
        let dir = record_dir(&self.root, self.base_index + index);
        let snapshot = write_record_dir(&dir, record, state)?;
        self.written += 1;
        Ok(Some(snapshot))
    }
}

/// Two-column beta versus quotient-size table for direct plotting.
/// Unresolved and failed points keep their NaN so gaps stay visible.
pub fn beta_qs_csv(result: &SweepResult) -> String {
    let mut out = String::from("beta,q_s\n");
    for r in &result.records {
        out.push_str(&format!("{:.16e},{:.16e}\n", r.beta, r.q_s));
    }
    out
}

/// Completion state stamped into the MANIFEST.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Running,
    Complete,
    Error,
}

impl RunStatus {
    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Complete => "complete",
            RunStatus::Error => "error",
        }
    }
}

/// Rewrites the MANIFEST. This is the only file that mentions wall-clock
/// time, so everything else in the output tree is reproducible bytewise.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &Path,
    status: RunStatus,
    completed: usize,
    total: usize,
    note: Option<&str>,
) -> std::io::Result<()> {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut text = String::new();
    text.push_str(&format!("command={command}\n"));
    text.push_str(&format!("config={}\n", config.display()));
    text.push_str(&format!("status={}\n", status.as_str()));
    text.push_str(&format!("completed={completed}\n"));
    text.push_str(&format!("total={total}\n"));
    if let Some(note) = note {
        text.push_str(&format!("note={note}\n"));
    }
    text.push_str(&format!("written_unix={unix}\n"));
    std::fs::write(out_dir.join("MANIFEST"), text)
}
