//! Metrics log: one JSON object per line, one line per epoch.
//!
//! Each line carries `epoch` (1-based), mean train `loss`, train `accuracy`
//! and the learning rate `lr` in effect for the epoch's final step. Floats
//! use the shortest round-trip decimal form, so identical runs produce
//! byte-identical logs.

use std::io::{BufRead, Write};

use maskvqa_core::train::EpochRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    epoch: usize,
    loss: f64,
    accuracy: f64,
    lr: f64,
}

/// Serializes epoch records as line-delimited JSON.
pub fn write_log(records: &[EpochRecord], w: &mut impl Write) -> anyhow::Result<()> {
    for r in records {
        let line = Line {
            epoch: r.epoch,
            loss: r.loss,
            accuracy: r.accuracy,
            lr: r.lr,
        };
        serde_json::to_writer(&mut *w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Parses a line-delimited metrics log, reporting the line of any problem.
pub fn read_log(r: impl BufRead) -> anyhow::Result<Vec<EpochRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("metrics line {}: {e}", i + 1))?;
        out.push(EpochRecord {
            epoch: parsed.epoch,
            loss: parsed.loss,
            accuracy: parsed.accuracy,
            lr: parsed.lr,
        });
    }
    Ok(out)
}

/// Writes a metrics log file.
pub fn save_log(records: &[EpochRecord], path: impl AsRef<std::path::Path>) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_log(records, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a metrics log file.
pub fn load_log(path: impl AsRef<std::path::Path>) -> anyhow::Result<Vec<EpochRecord>> {
    let bytes = std::fs::read(path)?;
    read_log(std::io::BufReader::new(bytes.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_roundtrips_and_is_line_delimited() {
        let records = vec![
            EpochRecord {
                epoch: 1,
                loss: 1.75,
                accuracy: 0.25,
                lr: 0.1 / 3.0,
            },
            EpochRecord {
                epoch: 2,
                loss: 0.5,
                accuracy: 1.0,
                lr: 0.1,
            },
        ];
        let mut buf = Vec::new();
        write_log(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"epoch\":1,"), "{text}");
        let back = read_log(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].epoch, 1);
        assert_eq!(back[0].lr.to_bits(), (0.1f64 / 3.0).to_bits());
        assert_eq!(back[1].accuracy, 1.0);
    }

    #[test]
    fn malformed_lines_report_their_line_number() {
        let text = "{\"epoch\":1,\"loss\":0.5,\"accuracy\":1.0,\"lr\":0.1}\nnot json\n";
        let err = read_log(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
