//! File helpers: JSONL frame datasets and JSON documents.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::world::{DatasetRecord, FrameSet};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// One `{"z":[..],"inst":i,"pitch":p}` object per line.
pub fn write_dataset<W: Write>(set: &FrameSet, mut out: W) -> Result<()> {
    for rec in set.to_records() {
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::Io { path: "<dataset>".into(), source: e })?;
    }
    out.flush().map_err(|e| Error::Io { path: "<dataset>".into(), source: e })
}

pub fn save_dataset(set: &FrameSet, path: &Path) -> Result<()> {
    write_dataset(set, create(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io { path: path.to_path_buf(), source },
        other => other,
    })
}

/// Reads a JSONL dataset; blank lines are skipped, bad lines are reported
/// with their 1-based line number.
pub fn read_dataset<R: BufRead>(input: R, path: &Path) -> Result<FrameSet> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(first) = records.first().map(|r: &DatasetRecord| r.z.len()) {
            if rec.z.len() != first {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("record has {} channels, expected {first}", rec.z.len()),
                });
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Empty(format!("{} holds no records", path.display())));
    }
    FrameSet::from_records(&records)
}

pub fn load_dataset(path: &Path) -> Result<FrameSet> {
    let f = File::open(path).map_err(io_err(path))?;
    read_dataset(BufReader::new(f), path)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes()).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}
