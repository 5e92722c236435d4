//! Line-delimited JSON episode traces.
//!
//! Lines starting with `#` are header comments. Every other line is one
//! [`Episode`] object with fields in this fixed order: `seed`, `value_v`,
//! `confirmations_n`, `block_value_B`, `coalition_members`, `pooled_q_true`,
//! `pooled_q_observed`, `attack_attempted`, `attack_succeeded` (omitted when
//! no attack was attempted), `histories`. Floats are written in shortest
//! round-trip form. A file whose last line lacks its newline is treated as
//! truncated.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::episode::Episode;

pub fn write_trace_to<W: Write>(
    mut out: W,
    header: &[String],
    episodes: &[Episode],
) -> std::io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    for episode in episodes {
        serde_json::to_writer(&mut out, episode)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_trace(path: &Path, header: &[String], episodes: &[Episode]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_to(BufWriter::new(file), header, episodes).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<Episode>> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_trace(path, &text)
}

pub fn parse_trace(path: &Path, text: &str) -> Result<Vec<Episode>> {
    let malformed = |line: usize, message: String| Error::Malformed {
        path: path.into(),
        line,
        message,
    };
    let mut episodes = Vec::new();
    let line_count = text.lines().count();
    for (idx, line) in text.lines().enumerate() {
        let number = idx + 1;
        if line.starts_with('#') {
            continue;
        }
        if number == line_count && !text.ends_with('\n') {
            return Err(malformed(
                number,
                "truncated final line (no newline)".into(),
            ));
        }
        let episode: Episode =
            serde_json::from_str(line).map_err(|e| malformed(number, e.to_string()))?;
        episode
            .validate()
            .map_err(|e| malformed(number, e.to_string()))?;
        episodes.push(episode);
    }
    Ok(episodes)
}
