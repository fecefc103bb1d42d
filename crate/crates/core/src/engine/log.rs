//! Force-event logs: one JSON object per line,
//! `{"t":…,"type":"force","voxel":…,"force":[x,y,z],"duration":…}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::ForceEvent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Force {
        t: f64,
        voxel: usize,
        force: [f64; 3],
        duration: f64,
    },
}

impl From<ForceEvent> for LogRecord {
    fn from(e: ForceEvent) -> Self {
        LogRecord::Force {
            t: e.start,
            voxel: e.voxel,
            force: e.force,
            duration: e.duration,
        }
    }
}

impl LogRecord {
    pub fn into_event(self) -> Result<ForceEvent> {
        let LogRecord::Force { t, voxel, force, duration } = self;
        let ev = ForceEvent {
            voxel,
            force,
            start: t,
            duration,
        };
        ev.validate()?;
        Ok(ev)
    }
}

pub fn write_event_log(events: &[ForceEvent], mut out: impl Write) -> Result<()> {
    for &e in events {
        let line = serde_json::to_string(&LogRecord::from(e)).map_err(|err| Error::parse("event log", err.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parse a log; blank lines are skipped.
pub fn read_event_log(input: impl Read) -> Result<Vec<ForceEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line)
            .map_err(|err| Error::parse("event log", format!("line {}: {err}", i + 1)))?;
        events.push(record.into_event()?);
    }
    Ok(events)
}

/// Appends events to a file as they happen, flushing each line.
pub struct EventRecorder {
    out: BufWriter<File>,
    written: usize,
}

impl EventRecorder {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            written: 0,
        })
    }

    pub fn record(&mut self, event: ForceEvent) -> Result<()> {
        write_event_log(&[event], &mut self.out)?;
        self.out.flush()?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }
}
