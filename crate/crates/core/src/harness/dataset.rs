use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::types::Requirement;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate instance id `{id}`")]
    DuplicateId { line: usize, id: String },
}

/// Parses JSON-lines text, one `{id, text, variant, dataset}` object per
/// non-blank line. Line numbers in errors are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<Requirement>, DatasetError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let req: Requirement = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        req.validate().map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.0,
        })?;
        if !seen.insert(req.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: line_no,
                id: req.id,
            });
        }
        out.push(req);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Requirement>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"id":"a","text":"sum two ints","variant":"original","dataset":"fm_bench"}"#;

    #[test]
    fn parses_and_rejects() {
        assert!(parse_dataset("").unwrap().is_empty());
        let two = format!("{LINE}\n\n{}\n", LINE.replace(r#""a""#, r#""b""#));
        assert_eq!(parse_dataset(&two).unwrap().len(), 2);
        let dup = format!("{LINE}\n{LINE}\n");
        assert!(matches!(parse_dataset(&dup), Err(DatasetError::DuplicateId { line: 2, .. })));
        let missing = format!("{LINE}\n{}\n", r#"{"id":"c","variant":"original","dataset":"x"}"#);
        match parse_dataset(&missing) {
            Err(DatasetError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }
}
