//! Line-delimited corpus files: one JSON object per record, UTF-8.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::ArticleRecord;

pub fn write_corpus<W: Write>(records: &[ArticleRecord], mut out: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a corpus, validating each record. `origin` names the source in errors.
pub fn read_corpus<R: BufRead>(input: R, origin: &Path) -> Result<Vec<ArticleRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in input.lines().enumerate() {
        let line_no = index + 1;
        let at = |message: String| Error::Line {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let line = line.map_err(|e| at(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let record: ArticleRecord = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        record.validate().map_err(|e| at(e.to_string()))?;
        if !seen.insert(record.pmid.clone()) {
            return Err(at(format!("duplicate pmid {}", record.pmid)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus(records: &[ArticleRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(records, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: &Path) -> Result<Vec<ArticleRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), path)
}
