use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::{AnchorWord, Modality, Report};
use crate::{Error, Result};

pub fn load_corpus(path: &Path) -> Result<Vec<Report>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

/// Parses corpus JSONL. Blank lines are skipped; errors carry the 1-based
/// line number.
pub fn parse_corpus(text: &str) -> Result<Vec<Report>> {
    let mut reports = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let report = parse_line(line).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                line: line_no,
                message,
            },
            other => other,
        })?;
        if !seen.insert(report.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate id {}", report.id),
            });
        }
        reports.push(report);
    }
    Ok(reports)
}

fn parse_line(line: &str) -> Result<Report> {
    let bad = |message: String| Error::Parse { line: 0, message };
    let value: Value = serde_json::from_str(line).map_err(|e| bad(format!("invalid json: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| bad("expected a json object".into()))?;
    let field = |name: &str| obj.get(name).ok_or_else(|| bad(format!("missing field {name}")));

    let id = field("id")?
        .as_str()
        .ok_or_else(|| bad("field id must be a string".into()))?
        .to_string();
    let modality: Modality = field("modality")?
        .as_str()
        .ok_or_else(|| bad("field modality must be a string".into()))?
        .parse()
        .map_err(|e: Error| bad(e.to_string()))?;
    let sections = field("sections")?
        .as_object()
        .ok_or_else(|| bad("field sections must be an object".into()))?
        .iter()
        .map(|(k, v)| {
            v.as_str()
                .map(|s| (k.clone(), s.to_string()))
                .ok_or_else(|| bad(format!("section {k} must be a string")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let anchors = match obj.get("anchors") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                let label = v
                    .as_str()
                    .ok_or_else(|| bad("anchors must be strings".into()))?;
                AnchorWord::parse(modality, label)
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(bad("field anchors must be an array".into())),
    };
    let signal_ref = match obj.get("signal_ref") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(bad("field signal_ref must be a string or null".into())),
    };
    let report = Report {
        id,
        modality,
        sections,
        anchors,
        signal_ref,
    };
    if report.sections.values().all(|t| t.trim().is_empty()) {
        return Err(bad("all sections are empty".into()));
    }
    Ok(report)
}

pub fn write_corpus(path: &Path, reports: &[Report]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for report in reports {
        report.validate()?;
        serde_json::to_writer(&mut out, report)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth_corpus;

    const GOOD: &str = r#"{"id": "a", "modality": "eeg", "sections": {"impression": "normal eeg."}, "anchors": ["Normality"], "signal_ref": null}
{"id": "b", "modality": "xray", "sections": {"findings": "no acute disease."}, "anchors": [], "signal_ref": "b.clra"}
{"id": "c", "modality": "eeg", "sections": {"impression": "seizure."}, "anchors": ["seizure"]}
"#;

    #[test]
    fn parses_in_order() {
        let reports = parse_corpus(GOOD).unwrap();
        let ids: Vec<_> = reports.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(reports[1].signal_ref.as_deref(), Some("b.clra"));
        assert_eq!(reports[2].anchors[0].label(), "Seizure");
    }

    #[test]
    fn missing_field_names_line() {
        let text = r#"{"id": "a", "modality": "eeg", "sections": {"impression": "x."}, "anchors": []}
{"id": "b", "sections": {"impression": "x."}, "anchors": []}
"#;
        let err = parse_corpus(text).unwrap_err();
        assert_eq!(err.to_string(), "line 2: missing field modality");
    }

    #[test]
    fn unknown_anchor_is_named() {
        let text = r#"{"id": "a", "modality": "eeg", "sections": {"impression": "x."}, "anchors": ["Flying"]}"#;
        let err = parse_corpus(text).unwrap_err();
        assert!(err.to_string().contains("Flying"), "{err}");
    }

    #[test]
    fn write_then_load_is_identity() {
        let reports = synth_corpus(11, 40, Modality::Eeg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&path, &reports).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), reports);
    }
}
