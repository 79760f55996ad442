//! Line-delimited JSON artifacts and atomic file replacement.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// One compact JSON document per line, each terminated by `\n`.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses JSONL text; blank lines are skipped and errors cite the 1-based line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic(path, to_jsonl(items)?.as_bytes())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, creating missing parent directories first.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QueryId, Strategy, TraceRecord};

    fn rec(q: u64) -> TraceRecord {
        TraceRecord {
            strategy: Strategy::beam(2, 4, 40).unwrap(),
            query_id: QueryId(q),
            features: vec![0.1, -2.5e-7, 3.0],
            soft_label: 0.375,
            mean_tokens: 1234.5,
            mean_latency: 0.1 + 0.2,
            repeats: 8,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let items = vec![rec(0), rec(1)];
        let text = to_jsonl(&items).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: Vec<TraceRecord> = parse_jsonl(&text, Path::new("t.jsonl")).unwrap();
        assert_eq!(back, items);
    }

    #[test]
    fn parse_error_cites_line_number() {
        let mut text = to_jsonl(&(0..20).map(rec).collect::<Vec<_>>()).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[16] = "{\"strategy\": oops".into();
        text = lines.join("\n");
        match parse_jsonl::<TraceRecord>(&text, Path::new("traces.jsonl")) {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 17);
                assert_eq!(path, Path::new("traces.jsonl"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input_gives_no_items() {
        let v: Vec<TraceRecord> = parse_jsonl("\n\n", Path::new("x")).unwrap();
        assert!(v.is_empty());
        assert_eq!(to_jsonl::<TraceRecord>(&[]).unwrap(), "");
    }

    #[test]
    fn atomic_write_creates_directories() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/out.jsonl");
        write_jsonl(&path, &[rec(3)]).unwrap();
        write_jsonl(&path, &[rec(4)]).unwrap();
        let back: Vec<TraceRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, vec![rec(4)]);
        assert_eq!(
            std::fs::read_dir(path.parent().unwrap()).unwrap().count(),
            1
        );
    }

    #[test]
    fn missing_file_is_an_environment_error() {
        let e = read_jsonl::<TraceRecord>(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert!(e.is_environmental());
    }
}
