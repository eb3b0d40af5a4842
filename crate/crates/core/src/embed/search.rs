use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dot, UnitVector, VectorStore};
use crate::error::{Error, Result};

/// A retrieved item and its dot-product distance to the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: u64,
    pub distance: f64,
}

/// Descending distance, then ascending id.
pub(crate) fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.distance
        .total_cmp(&a.distance)
        .then_with(|| a.id.cmp(&b.id))
}

/// Keeps the best `k` hits in rank order.
pub(crate) fn select_top_k(mut hits: Vec<Hit>, k: usize) -> Vec<Hit> {
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, rank_order);
        hits.truncate(k);
    }
    hits.sort_unstable_by(rank_order);
    hits
}

pub(crate) fn check_query(query: &UnitVector, store: &VectorStore, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if query.dim() != store.dim() {
        return Err(Error::invalid(format!(
            "query dimension {} does not match store dimension {}",
            query.dim(),
            store.dim()
        )));
    }
    Ok(())
}

const PAR_THRESHOLD: usize = 8192;

pub(crate) fn score_rows(query: &[f32], store: &VectorStore, rows: &[u32]) -> Vec<Hit> {
    let score = |&r: &u32| Hit {
        id: store.ids()[r as usize],
        distance: dot(query, store.row(r as usize)),
    };
    if rows.len() >= PAR_THRESHOLD {
        rows.par_iter().map(score).collect()
    } else {
        rows.iter().map(score).collect()
    }
}

/// Exhaustive top-`k` by dot product.
pub fn exact_top_k(query: &UnitVector, store: &VectorStore, k: usize) -> Result<Vec<Hit>> {
    check_query(query, store, k)?;
    let q = query.as_slice();
    let hits: Vec<Hit> = if store.len() >= PAR_THRESHOLD {
        (0..store.len())
            .into_par_iter()
            .map(|r| Hit {
                id: store.ids()[r],
                distance: dot(q, store.row(r)),
            })
            .collect()
    } else {
        store
            .rows()
            .map(|(id, row)| Hit {
                id,
                distance: dot(q, row),
            })
            .collect()
    };
    Ok(select_top_k(hits, k))
}
