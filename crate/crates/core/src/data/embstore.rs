//! `.rfemb` embedding store layout (little-endian):
//!
//! ```text
//! magic "RFEMB1" | version u16 | embedder_id (u32 len + UTF-8)
//! | layer_index u32 | dim u32 | record count u32
//! per record: id (u32 len + UTF-8) | dim × f32
//! crc32 u32 over all preceding bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::{io_err, DataError, Result};
use crate::binfmt::{CrcReader, CrcWriter, FormatError};
use crate::tensor::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 6] = b"RFEMB1";
pub const EMBEDDING_VERSION: u16 = 1;

/// Hidden-state vectors for one (embedder, layer) pair, keyed by problem id
/// in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    embedder_id: String,
    layer_index: u32,
    dim: usize,
    records: IndexMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(embedder_id: impl Into<String>, layer_index: u32, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(FormatError::ZeroDim.into());
        }
        Ok(Self { embedder_id: embedder_id.into(), layer_index, dim, records: IndexMap::new() })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(DataError::DimMismatch { id, expected: self.dim, actual: vector.len() });
        }
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(DataError::NonFiniteEmbedding { id });
        }
        if self.records.contains_key(&id) {
            return Err(DataError::DuplicateEmbedding(id));
        }
        self.records.insert(id, vector);
        Ok(())
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn layer_index(&self) -> u32 {
        self.layer_index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.records.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.records.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Rows for `ids`, promoted to `f64`, in the given order.
    pub fn matrix(&self, ids: &[String]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let v = self.get(id).ok_or_else(|| DataError::MissingEmbedding(id.clone()))?;
            data.extend(v.iter().map(|&x| f64::from(x)));
        }
        Ok(Matrix::from_vec(ids.len(), self.dim, data).expect("finite by construction"))
    }
}

/// Exact encoded size in bytes.
pub fn encoded_size(store: &EmbeddingStore) -> usize {
    let header = 6 + 2 + 4 + store.embedder_id.len() + 4 + 4 + 4;
    let records: usize = store.records.keys().map(|id| 4 + id.len() + 4 * store.dim).sum();
    header + records + 4
}

pub fn encode_embedding_store<W: Write>(store: &EmbeddingStore, out: W) -> std::result::Result<W, FormatError> {
    let to_u32 = |v: usize, what: &str| u32::try_from(v).map_err(|_| FormatError::Invalid(format!("{what} exceeds u32")));
    let mut w = CrcWriter::new(out);
    w.put(EMBEDDING_MAGIC)?;
    w.put_u16(EMBEDDING_VERSION)?;
    w.put_str(&store.embedder_id)?;
    w.put_u32(store.layer_index)?;
    w.put_u32(to_u32(store.dim, "dim")?)?;
    w.put_u32(to_u32(store.records.len(), "record count")?)?;
    for (id, v) in &store.records {
        w.put_str(id)?;
        w.put_f32s(v)?;
    }
    Ok(w.finish()?)
}

pub fn decode_embedding_store<R: Read>(input: R) -> std::result::Result<EmbeddingStore, FormatError> {
    let mut r = CrcReader::new(input);
    r.magic(EMBEDDING_MAGIC)?;
    r.version(EMBEDDING_VERSION)?;
    let embedder_id = r.string("embedder id")?;
    let layer_index = r.u32("layer index")?;
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(FormatError::ZeroDim);
    }
    let count = r.u32("record count")? as usize;
    let mut records = IndexMap::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.string("record id")?;
        let mut v = Vec::with_capacity(dim);
        r.f32s_into(&mut v, dim, "record vector")?;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(FormatError::Invalid(format!("non-finite value in record {id:?}")));
        }
        if records.insert(id.clone(), v).is_some() {
            return Err(FormatError::Invalid(format!("duplicate record id {id:?}")));
        }
    }
    r.finish()?;
    Ok(EmbeddingStore { embedder_id, layer_index, dim, records })
}

pub fn write_embedding_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    encode_embedding_store(store, BufWriter::new(file))
        .map_err(|source| DataError::Format { path: path.to_path_buf(), source })?;
    Ok(())
}

pub fn read_embedding_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    decode_embedding_store(BufReader::new(file)).map_err(|source| DataError::Format { path: path.to_path_buf(), source })
}
