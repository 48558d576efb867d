//! JSONL corpus files.
//!
//! One record per line, either
//! `{"kind":"text","text_id":..,"words":[[left,right],..]}` or
//! `{"kind":"scanpath","reader_id":..,"text_id":..,"fixations":[[pos,dur],..]}`.
//! Numbers are written in plain decimal notation with the shortest digits that
//! parse back to the same `f64`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gazeprint_core::corpus::{Fixation, Scanpath, TextLine, Word};
use serde::Deserialize;

use crate::FormatError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub texts: Vec<TextLine>,
    pub scanpaths: Vec<Scanpath>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Text(TextRecord),
    Scanpath(ScanpathRecord),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextRecord {
    text_id: String,
    words: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanpathRecord {
    reader_id: String,
    text_id: String,
    fixations: Vec<[f64; 2]>,
}

/// Parses a corpus from JSONL text. Blank lines are ignored; `source` only
/// labels error messages.
pub fn parse_corpus(source: &str, content: &str) -> Result<Corpus, FormatError> {
    let at = |line: usize, message: String| FormatError::Line {
        path: source.to_string(),
        line,
        message,
    };
    let mut corpus = Corpus::default();
    let mut text_ids = HashSet::new();
    // scanpaths may precede their text; references are checked at the end
    let mut scanpath_lines = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(raw).map_err(|e| at(line, e.to_string()))?;
        match record {
            Record::Text(t) => {
                if !text_ids.insert(t.text_id.clone()) {
                    return Err(at(line, format!("duplicate text_id {}", t.text_id)));
                }
                let words = t.words.iter().map(|&[l, r]| Word::new(l, r)).collect();
                corpus
                    .texts
                    .push(TextLine::new(t.text_id, words).map_err(|e| at(line, e.to_string()))?);
            }
            Record::Scanpath(s) => {
                let fixations = s.fixations.iter().map(|&[p, d]| Fixation::new(p, d)).collect();
                let sp = Scanpath::new(s.reader_id, s.text_id, fixations).map_err(|e| at(line, e.to_string()))?;
                corpus.scanpaths.push(sp);
                scanpath_lines.push(line);
            }
        }
    }
    for (sp, &line) in corpus.scanpaths.iter().zip(&scanpath_lines) {
        let text = corpus
            .texts
            .iter()
            .find(|t| t.id() == sp.text_id)
            .ok_or_else(|| at(line, format!("scanpath refers to unknown text_id {}", sp.text_id)))?;
        sp.validate_against(text).map_err(|e| at(line, e.to_string()))?;
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, FormatError> {
    let content = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_corpus(&path.display().to_string(), &content)
}

fn push_pairs(out: &mut String, pairs: impl Iterator<Item = (f64, f64)>) {
    out.push('[');
    for (i, (a, b)) in pairs.enumerate() {
        if i > 0 {
            out.push(',');
        }
        // Display for f64 is shortest round-trip and never uses exponents
        let _ = write!(out, "[{a},{b}]");
    }
    out.push(']');
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Texts first, then scanpaths, each in the given order.
pub fn format_corpus(texts: &[TextLine], scanpaths: &[Scanpath]) -> String {
    let mut out = String::new();
    for t in texts {
        let _ = write!(out, "{{\"kind\":\"text\",\"text_id\":{},\"words\":", json_string(t.id()));
        push_pairs(&mut out, t.words().iter().map(|w| (w.left, w.right)));
        out.push_str("}\n");
    }
    for sp in scanpaths {
        let _ = write!(
            out,
            "{{\"kind\":\"scanpath\",\"reader_id\":{},\"text_id\":{},\"fixations\":",
            json_string(&sp.reader_id),
            json_string(&sp.text_id)
        );
        push_pairs(&mut out, sp.fixations.iter().map(|f| (f.position, f.duration)));
        out.push_str("}\n");
    }
    out
}

pub fn save_corpus(path: &Path, texts: &[TextLine], scanpaths: &[Scanpath]) -> Result<(), FormatError> {
    fs::write(path, format_corpus(texts, scanpaths)).map_err(|e| FormatError::io(path, e))
}
