//! File helpers shared by every artifact writer: atomic replacement and
//! JSON-lines encoding.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Json { path: String, line: usize, source: serde_json::Error },
}

fn io_err(path: &Path, source: io::Error) -> ArtifactError {
    ArtifactError::Io { path: path.display().to_string(), source }
}

/// Write `bytes` to `path` through a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.flush().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut buf = serde_json::to_vec_pretty(value)
        .map_err(|source| ArtifactError::Json { path: path.display().to_string(), line: 0, source })?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|source| ArtifactError::Json { path: path.display().to_string(), line: 0, source })
}

/// Encode records as JSON lines.
pub fn to_jsonl<'a, T, I>(records: I) -> Vec<u8>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut buf = Vec::new();
    for record in records {
        // serializing plain data structs cannot fail
        serde_json::to_writer(&mut buf, record).expect("serialize record");
        buf.push(b'\n');
    }
    buf
}

pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<(), ArtifactError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    write_atomic(path, &to_jsonl(records))
}

/// Append one record to a JSON-lines log, creating it if needed.
pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut line = serde_json::to_vec(record)
        .map_err(|source| ArtifactError::Json { path: path.display().to_string(), line: 0, source })?;
    line.push(b'\n');
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    file.write_all(&line).map_err(|e| io_err(path, e))
}

/// Read a JSON-lines file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| ArtifactError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/log.jsonl");
        append_jsonl(&path, &vec![1, 2]).unwrap();
        append_jsonl(&path, &vec![3]).unwrap();
        let back: Vec<Vec<i32>> = read_jsonl(&path).unwrap();
        assert_eq!(back, vec![vec![1, 2], vec![3]]);

        write_jsonl(&path, &[vec![9]]).unwrap();
        let back: Vec<Vec<i32>> = read_jsonl(&path).unwrap();
        assert_eq!(back, vec![vec![9]]);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        fs::write(&path, "[1]\n\nnot json\n").unwrap();
        let err = read_jsonl::<Vec<i32>>(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }
}
