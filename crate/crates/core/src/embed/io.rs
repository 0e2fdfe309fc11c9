//! Embedding table files.
//!
//! Two on-disk encodings, auto-detected on load:
//!
//! * JSON-lines: one `{"id": "...", "vec": [..]}` object per line.
//! * Binary: `b"MISP"`, `u32` format version, `u64` row count, `u64`
//!   dimension (all little-endian), then `rows * dim` little-endian `f32`
//!   values in row-major order. Row ids are not part of the binary layout;
//!   they live in a sidecar text file `<path>.ids`, one id per line. Without
//!   a sidecar, rows are named by their index.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MispError, Result};

pub const MAGIC: &[u8; 4] = b"MISP";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Dense row-major table of named vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonRow<'a> {
    #[serde(borrow)]
    id: std::borrow::Cow<'a, str>,
    vec: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            ids: Vec::new(),
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(MispError::dim("id count does not match row count"));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut table = EmbeddingTable::new(dim);
        for (id, row) in ids.into_iter().zip(rows) {
            table.push(id, &row)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, id: impl Into<String>, row: &[f64]) -> Result<()> {
        if self.ids.is_empty() && self.dim == 0 {
            self.dim = row.len();
        }
        if row.len() != self.dim || row.is_empty() {
            return Err(MispError::dim(format!(
                "row of length {} in table of dimension {}",
                row.len(),
                self.dim
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MispError::NonFinite("embedding row has non-finite entries".into()));
        }
        self.ids.push(id.into());
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.data.chunks(self.dim.max(1)))
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Rows rounded to `f32`, matching what the binary encoding stores.
    pub fn to_f32_precision(&self) -> Self {
        EmbeddingTable {
            ids: self.ids.clone(),
            dim: self.dim,
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for (id, row) in self.rows() {
            let rec = JsonRow {
                id: id.into(),
                vec: row.to_vec(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary body plus `<path>.ids` sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode_binary())?;
        let mut ids = String::new();
        for id in &self.ids {
            if id.contains('\n') {
                return Err(MispError::Format(format!("id {id:?} contains a newline")));
            }
            ids.push_str(id);
            ids.push('\n');
        }
        fs::write(ids_sidecar(path), ids)?;
        Ok(())
    }

    pub fn encode_binary(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf
    }

    /// Parses the binary encoding; ids default to row indices.
    pub fn decode_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(MispError::Format("missing MISP header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(MispError::Format(format!("unsupported format version {version}")));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let expected = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| MispError::Format("header sizes overflow".into()))?;
        if bytes.len() != expected {
            return Err(MispError::Format(format!(
                "expected {expected} bytes for {rows}x{dim}, found {}",
                bytes.len()
            )));
        }
        let data: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MispError::NonFinite("binary table has non-finite values".into()));
        }
        Ok(EmbeddingTable {
            ids: (0..rows).map(|i| i.to_string()).collect(),
            dim,
            data,
        })
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = EmbeddingTable::new(0);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: JsonRow = serde_json::from_str(&line)
                .map_err(|e| MispError::Format(format!("line {}: {e}", lineno + 1)))?;
            table
                .push(rec.id.into_owned(), &rec.vec)
                .map_err(|e| MispError::Format(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(table)
    }

    /// Loads either encoding, sniffing the magic bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            let mut table = Self::decode_binary(&bytes)?;
            let sidecar = ids_sidecar(path);
            if sidecar.exists() {
                let ids: Vec<String> = fs::read_to_string(&sidecar)?.lines().map(str::to_owned).collect();
                if ids.len() != table.len() {
                    return Err(MispError::Format(format!(
                        "{} lists {} ids for {} rows",
                        sidecar.display(),
                        ids.len(),
                        table.len()
                    )));
                }
                table.ids = ids;
            }
            Ok(table)
        } else {
            Self::read_jsonl(BufReader::new(bytes.as_slice()))
        }
    }
}

pub fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> EmbeddingTable {
        EmbeddingTable::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![0.1, -2.0, 3.5], vec![1e-3, 0.0, 7.25]],
        )
        .unwrap()
    }

    #[test]
    fn binary_layout() {
        let t = sample();
        let bytes = t.encode_binary();
        assert_eq!(&bytes[..4], b"MISP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), HEADER_LEN + 2 * 3 * 4);
        assert_eq!(f32::from_le_bytes(bytes[24..28].try_into().unwrap()), 0.1f32);
    }

    #[test]
    fn rejects_truncated_and_bad_version() {
        let mut bytes = sample().encode_binary();
        bytes.pop();
        assert!(EmbeddingTable::decode_binary(&bytes).is_err());
        let mut bytes = sample().encode_binary();
        bytes[4] = 9;
        assert!(EmbeddingTable::decode_binary(&bytes).is_err());
    }

    #[test]
    fn autodetects_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample();
        let jp = dir.path().join("t.jsonl");
        let bp = dir.path().join("t.bin");
        t.write_jsonl(&jp).unwrap();
        t.write_binary(&bp).unwrap();
        assert_eq!(EmbeddingTable::load(&jp).unwrap(), t);
        assert_eq!(EmbeddingTable::load(&bp).unwrap(), t.to_f32_precision());
        fs::remove_file(ids_sidecar(&bp)).unwrap();
        assert_eq!(EmbeddingTable::load(&bp).unwrap().ids(), &["0", "1"]);
    }

    #[test]
    fn jsonl_rejects_ragged_rows() {
        let text = "{\"id\":\"a\",\"vec\":[1,2]}\n{\"id\":\"b\",\"vec\":[1]}\n";
        assert!(EmbeddingTable::read_jsonl(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn binary_roundtrip_is_exact_at_f32(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 4), 1..6)) {
            let ids = (0..rows.len()).map(|i| i.to_string()).collect();
            let t = EmbeddingTable::from_rows(ids, rows).unwrap().to_f32_precision();
            let back = EmbeddingTable::decode_binary(&t.encode_binary()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
