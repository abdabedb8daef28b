use std::collections::HashMap;

use super::embstore::EmbeddingStore;
use super::{DataError, Result};
use crate::tensor::Matrix;

/// Embedding rows aligned with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined<T> {
    pub x: Matrix,
    pub y: Vec<T>,
    pub ids: Vec<String>,
    pub dropped: usize,
}

/// Rows follow `ids` order. In strict mode a missing embedding or label is
/// an error; otherwise the id is dropped and counted.
pub fn join<T: Clone>(store: &EmbeddingStore, labels: &HashMap<String, T>, ids: &[String], strict: bool) -> Result<Joined<T>> {
    let mut kept = Vec::with_capacity(ids.len());
    let mut y = Vec::with_capacity(ids.len());
    let mut dropped = 0;
    for id in ids {
        let has_embedding = store.contains(id);
        let label = labels.get(id);
        match (has_embedding, label) {
            (true, Some(l)) => {
                kept.push(id.clone());
                y.push(l.clone());
            }
            _ if !strict => dropped += 1,
            (false, _) => return Err(DataError::MissingEmbedding(id.clone())),
            (true, None) => return Err(DataError::MissingLabel(id.clone())),
        }
    }
    if dropped > 0 {
        log::warn!("join dropped {dropped} of {} ids lacking an embedding or label", ids.len());
    }
    let x = store.matrix(&kept)?;
    Ok(Joined { x, y, ids: kept, dropped })
}
