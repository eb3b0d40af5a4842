use std::collections::HashMap;
use std::io::{Read, Write};

use super::{check_unit, UnitVector};
use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 4] = b"DNVS";
pub const STORE_VERSION: u32 = 1;

/// Searchable collection of image embeddings, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    rows_by_id: HashMap<u64, usize>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        VectorStore {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            rows_by_id: HashMap::new(),
        }
    }

    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = (u64, UnitVector)>) -> Result<Self> {
        let mut store = VectorStore::new(dim);
        for (id, v) in rows {
            store.push(id, v)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, id: u64, v: UnitVector) -> Result<()> {
        self.push_raw(id, v.as_slice())
    }

    fn push_raw(&mut self, id: u64, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for id {id} has dimension {}, store has {}",
                v.len(),
                self.dim
            )));
        }
        check_unit(v).map_err(|e| Error::invalid(format!("id {id}: {e}")))?;
        if self.rows_by_id.insert(id, self.ids.len()).is_some() {
            return Err(Error::invalid(format!("duplicate image id {id}")));
        }
        self.ids.push(id);
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_of(&self, id: u64) -> Option<usize> {
        self.rows_by_id.get(&id).copied()
    }

    pub fn vector(&self, id: u64) -> Option<&[f32]> {
        self.row_of(id).map(|r| self.row(r))
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, &[f32])> {
        self.ids.iter().copied().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// Binary little-endian layout: magic `DNVS`, `u32` version, `u32 n`,
    /// `u32 d`, then `n` records of `u64` id followed by `d` `f32` values.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(STORE_MAGIC)?;
        w.write_all(&STORE_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 + 4 * self.dim);
        for (id, row) in self.rows() {
            buf.clear();
            buf.extend_from_slice(&id.to_le_bytes());
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * (8 + 4 * self.dim));
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: String| Error::Format {
            what: "vector store",
            msg,
        };
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| bad(format!("truncated header: {e}")))?;
        if &header[0..4] != STORE_MAGIC {
            return Err(bad("bad magic, expected DNVS".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != STORE_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let n = word(8) as usize;
        let dim = word(12) as usize;
        if dim == 0 {
            return Err(bad("dimension 0".into()));
        }
        let mut store = VectorStore::new(dim);
        let mut rec = vec![0u8; 8 + 4 * dim];
        let mut row = vec![0f32; dim];
        for i in 0..n {
            r.read_exact(&mut rec)
                .map_err(|e| bad(format!("truncated at record {i}: {e}")))?;
            let id = u64::from_le_bytes(rec[..8].try_into().unwrap());
            for (j, v) in row.iter_mut().enumerate() {
                let at = 8 + 4 * j;
                *v = f32::from_le_bytes(rec[at..at + 4].try_into().unwrap());
            }
            store.push_raw(id, &row)?;
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).unwrap_or(0) != 0 {
            return Err(bad("trailing bytes after last record".into()));
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::embed_text;

    fn small() -> VectorStore {
        VectorStore::from_rows(
            64,
            (0..5u64).map(|i| (i * 10, embed_text(&format!("doc {i}"), 1).unwrap())),
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let store = small();
        let bytes = store.to_bytes();
        assert_eq!(&bytes[..4], b"DNVS");
        assert_eq!(bytes.len(), 16 + 5 * (8 + 4 * 64));
        assert_eq!(VectorStore::read_from(&bytes[..]).unwrap(), store);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let bytes = small().to_bytes();
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &5u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &64u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &0u64.to_le_bytes());
        assert_eq!(&bytes[16 + 8 + 256..16 + 16 + 256], &10u64.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut bytes = small().to_bytes();
        assert!(VectorStore::read_from(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(VectorStore::read_from(&bytes[..]).is_err());
        bytes[0] = b'X';
        assert!(VectorStore::read_from(&bytes[..]).is_err());
    }

    #[test]
    fn rejects_duplicates_and_bad_rows() {
        let mut store = small();
        assert!(store.push(0, embed_text("x", 0).unwrap()).is_err());
        assert!(store.push_raw(99, &[0.5; 64]).is_err());
        assert!(store.push_raw(99, &[1.0; 3]).is_err());
    }
}
