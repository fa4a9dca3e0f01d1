use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the training log. `epoch` counts from 1; the learning rate
/// used during epoch `e` is `lr_at(e - 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    pub lr: f64,
    pub mrae: f64,
    pub rmse: f64,
    pub bpmrae: f64,
    /// Checkpoint written at the end of this epoch, if any.
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.epoch <= last.epoch {
                return Err(Error::config(format!(
                    "log epochs must increase: {} after {}",
                    record.epoch, last.epoch
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::format(0, format!("csv write failed: {e}")))?;
        }
        w.flush().map_err(|e| Error::format(0, format!("csv write failed: {e}")))
    }

    pub fn read_csv(input: impl std::io::Read) -> Result<Self> {
        let mut log = Self::default();
        for r in csv::Reader::from_reader(input).deserialize() {
            let r: EpochRecord = r.map_err(|e| {
                let at = e.position().map_or(0, |p| p.byte());
                Error::format(at, format!("bad training log: {e}"))
            })?;
            log.push(r)?;
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

/// Record with the lowest validation MRAE; ties go to the later epoch and
/// NaN ranks last.
pub fn select_best_epoch(log: &TrainLog) -> Result<&EpochRecord> {
    let key = |r: &EpochRecord| if r.mrae.is_nan() { f64::INFINITY } else { r.mrae };
    log.records
        .iter()
        .fold(None::<&EpochRecord>, |best, r| match best {
            Some(b) if key(b) < key(r) => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| Error::config("cannot select a best epoch from an empty log"))
}
