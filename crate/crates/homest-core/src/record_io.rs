//! Measurement record file formats.
//!
//! CSV layout (schema 1): `#`-prefixed header lines carrying
//! `dt`, `n_steps`, `base_seed`, `stream_index`, `theta_true` and
//! `fingerprint`, followed by a `step_index,dy` table. Floating-point fields
//! round-trip exactly through the shortest-representation formatting.
//!
//! Binary layout (magic `HREC1`): all integers and floats little-endian;
//! `dt: f64`, `n_steps: u64`, `base_seed: u64`, `stream_index: u64`,
//! `theta_true: f64`, `fingerprint_len: u8`, fingerprint bytes, then
//! `n_steps` f64 increments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trajectory::{MeasurementRecord, RngSpec};

const BINARY_MAGIC: &[u8; 5] = b"HREC1";

pub fn write_record_csv(path: &Path, record: &MeasurementRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# schema=1")?;
    writeln!(w, "# dt={}", record.dt)?;
    writeln!(w, "# n_steps={}", record.n_steps())?;
    writeln!(w, "# base_seed={}", record.rng.base_seed)?;
    writeln!(w, "# stream_index={}", record.rng.stream_index)?;
    writeln!(w, "# theta_true={}", record.theta_true)?;
    writeln!(w, "# fingerprint={}", record.fingerprint)?;
    writeln!(w, "step_index,dy")?;
    for (i, dy) in record.increments.iter().enumerate() {
        writeln!(w, "{i},{dy}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_record_csv(path: &Path) -> Result<MeasurementRecord> {
    let reader = BufReader::new(File::open(path)?);
    let mut dt = None;
    let mut n_steps = None;
    let mut base_seed = None;
    let mut stream_index = None;
    let mut theta_true = None;
    let mut fingerprint = None;
    let mut increments = Vec::new();
    let mut saw_header = false;

    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "schema" => {
                        if value.trim() != "1" {
                            return Err(Error::RecordParse(format!(
                                "unsupported schema {}",
                                value.trim()
                            )));
                        }
                    }
                    "dt" => dt = Some(parse_f64(value)?),
                    "n_steps" => n_steps = Some(parse_u64(value)? as usize),
                    "base_seed" => base_seed = Some(parse_u64(value)?),
                    "stream_index" => stream_index = Some(parse_u64(value)?),
                    "theta_true" => theta_true = Some(parse_f64(value)?),
                    "fingerprint" => fingerprint = Some(value.trim().to_owned()),
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            if line != "step_index,dy" {
                return Err(Error::RecordParse(format!(
                    "expected column header 'step_index,dy', got '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let (idx, dy) = line
            .split_once(',')
            .ok_or_else(|| Error::RecordParse(format!("malformed row '{line}'")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|e| Error::RecordParse(format!("bad step index: {e}")))?;
        if idx != increments.len() {
            return Err(Error::RecordParse(format!(
                "non-contiguous step index {idx}, expected {}",
                increments.len()
            )));
        }
        increments.push(parse_f64(dy)?);
    }

    let dt = dt.ok_or_else(|| Error::RecordParse("missing dt header".into()))?;
    let expected = n_steps.ok_or_else(|| Error::RecordParse("missing n_steps header".into()))?;
    if increments.len() != expected {
        return Err(Error::RecordParse(format!(
            "n_steps header says {expected}, found {} rows",
            increments.len()
        )));
    }
    Ok(MeasurementRecord {
        dt,
        increments,
        rng: RngSpec::new(
            base_seed.ok_or_else(|| Error::RecordParse("missing base_seed header".into()))?,
            stream_index
                .ok_or_else(|| Error::RecordParse("missing stream_index header".into()))?,
        ),
        theta_true: theta_true
            .ok_or_else(|| Error::RecordParse("missing theta_true header".into()))?,
        fingerprint: fingerprint
            .ok_or_else(|| Error::RecordParse("missing fingerprint header".into()))?,
    })
}

pub fn write_record_binary(path: &Path, record: &MeasurementRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&record.dt.to_le_bytes())?;
    w.write_all(&(record.n_steps() as u64).to_le_bytes())?;
    w.write_all(&record.rng.base_seed.to_le_bytes())?;
    w.write_all(&record.rng.stream_index.to_le_bytes())?;
    w.write_all(&record.theta_true.to_le_bytes())?;
    let fp = record.fingerprint.as_bytes();
    if fp.len() > u8::MAX as usize {
        return Err(Error::InvalidInput("fingerprint too long".into()));
    }
    w.write_all(&[fp.len() as u8])?;
    w.write_all(fp)?;
    for dy in &record.increments {
        w.write_all(&dy.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_record_binary(path: &Path) -> Result<MeasurementRecord> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::RecordParse("bad magic, not a HREC1 file".into()));
    }
    let dt = read_f64(&mut r)?;
    let n_steps = read_u64(&mut r)? as usize;
    let base_seed = read_u64(&mut r)?;
    let stream_index = read_u64(&mut r)?;
    let theta_true = read_f64(&mut r)?;
    let mut len = [0u8; 1];
    r.read_exact(&mut len)?;
    let mut fp = vec![0u8; len[0] as usize];
    r.read_exact(&mut fp)?;
    let fingerprint = String::from_utf8(fp)
        .map_err(|e| Error::RecordParse(format!("fingerprint not utf-8: {e}")))?;
    let mut increments = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        increments.push(read_f64(&mut r)?);
    }
    Ok(MeasurementRecord {
        dt,
        increments,
        rng: RngSpec::new(base_seed, stream_index),
        theta_true,
        fingerprint,
    })
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::RecordParse(format!("bad float '{}': {e}", s.trim())))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|e| Error::RecordParse(format!("bad integer '{}': {e}", s.trim())))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
