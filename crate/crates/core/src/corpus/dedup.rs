//! Exact (content hash) and near (embedding dot product) deduplication.
//!
//! Records are merged along connected components of the "same hash or
//! dot >= threshold" relation, so the result does not depend on input
//! order. The smallest image id of a component survives.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{Candidate, ContentHash, CorpusRecord, Provenance, Status};
use crate::embed::{dot, VectorStore};
use crate::error::{Error, Result};

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Keeps the smaller index as the root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// All index pairs `(i, j)`, `i < j`, with `dot(v_i, v_j) >= threshold`.
///
/// Exact. Items are bucketed around evenly spaced pivots; a bucket is
/// skipped for item `a` when the angle from `a` to the pivot exceeds the
/// bucket's angular radius plus `acos(threshold)` (triangle inequality on
/// the sphere).
pub fn near_duplicate_pairs(vectors: &[&[f32]], threshold: f64) -> Vec<(usize, usize)> {
    let m = vectors.len();
    if m < 2 {
        return Vec::new();
    }
    if m <= 64 {
        let mut pairs = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if dot(vectors[i], vectors[j]) >= threshold {
                    pairs.push((i, j));
                }
            }
        }
        return pairs;
    }

    let num_pivots = (m as f64).sqrt().ceil() as usize;
    let pivots: Vec<usize> = (0..num_pivots).map(|p| p * m / num_pivots).collect();
    let angle = |d: f64| d.clamp(-1.0, 1.0).acos();

    // Angle from every item to every pivot.
    let to_pivot: Vec<Vec<f64>> = vectors
        .par_iter()
        .map(|v| pivots.iter().map(|&p| angle(dot(v, vectors[p]))).collect())
        .collect();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); num_pivots];
    let mut radius = vec![0f64; num_pivots];
    for (i, angles) in to_pivot.iter().enumerate() {
        let (b, a) = angles
            .iter()
            .copied()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
            .expect("at least one pivot");
        buckets[b].push(i);
        radius[b] = radius[b].max(a);
    }

    let reach = angle(threshold) + 1e-9;
    (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut found = Vec::new();
            for (b, members) in buckets.iter().enumerate() {
                if to_pivot[i][b] > radius[b] + reach {
                    continue;
                }
                for &j in members {
                    if j > i && dot(vectors[i], vectors[j]) >= threshold {
                        found.push((i, j));
                    }
                }
            }
            found.sort_unstable();
            found
        })
        .collect()
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "near-duplicate threshold must be in (0, 1], got {threshold}"
        )))
    }
}

/// Groups candidates by image and merges duplicates across keywords.
pub fn deduplicate(
    candidates: &[Candidate],
    store: &VectorStore,
    threshold: f64,
) -> Result<Vec<CorpusRecord>> {
    check_threshold(threshold)?;
    let mut by_id: BTreeMap<u64, (ContentHash, BTreeMap<&str, f64>)> = BTreeMap::new();
    for c in candidates {
        let entry = by_id.entry(c.image_id).or_insert((c.content_hash, BTreeMap::new()));
        if entry.0 != c.content_hash {
            return Err(Error::invalid(format!(
                "image {} appears with two different content hashes",
                c.image_id
            )));
        }
        let best = entry.1.entry(c.keyword.as_str()).or_insert(c.distance);
        *best = best.max(c.distance);
    }
    let records: Vec<CorpusRecord> = by_id
        .into_iter()
        .map(|(image_id, (content_hash, prov))| CorpusRecord {
            image_id,
            content_hash,
            provenance: prov
                .into_iter()
                .map(|(k, d)| Provenance {
                    keyword: k.to_string(),
                    distance: d,
                })
                .collect(),
            duplicates: Vec::new(),
            status: Status::Kept,
        })
        .collect();
    deduplicate_records(records, store, threshold)
}

/// Merges records that share a content hash or whose embeddings have dot
/// product `>= threshold`. Idempotent. Statuses are reset to kept.
pub fn deduplicate_records(
    mut records: Vec<CorpusRecord>,
    store: &VectorStore,
    threshold: f64,
) -> Result<Vec<CorpusRecord>> {
    check_threshold(threshold)?;
    records.sort_by_key(|r| r.image_id);
    if let Some(w) = records.windows(2).find(|w| w[0].image_id == w[1].image_id) {
        return Err(Error::invalid(format!("image {} listed twice", w[0].image_id)));
    }
    let vectors: Vec<&[f32]> = records
        .iter()
        .map(|r| {
            store
                .vector(r.image_id)
                .ok_or_else(|| Error::invalid(format!("image {} is not in the store", r.image_id)))
        })
        .collect::<Result<_>>()?;

    let mut sets = DisjointSet::new(records.len());
    let mut first_with_hash: HashMap<ContentHash, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(&j) = first_with_hash.get(&r.content_hash) {
            sets.union(i, j);
        } else {
            first_with_hash.insert(r.content_hash, i);
        }
    }
    for (i, j) in near_duplicate_pairs(&vectors, threshold) {
        sets.union(i, j);
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..records.len() {
        groups.entry(sets.find(i)).or_default().push(i);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (root, members) in groups {
        let survivor = &records[root];
        let mut prov: BTreeMap<&str, f64> = BTreeMap::new();
        let mut duplicates = Vec::new();
        for &i in &members {
            for p in &records[i].provenance {
                let best = prov.entry(p.keyword.as_str()).or_insert(p.distance);
                *best = best.max(p.distance);
            }
            if i != root {
                duplicates.push(records[i].image_id);
            }
            duplicates.extend_from_slice(&records[i].duplicates);
        }
        duplicates.sort_unstable();
        duplicates.dedup();
        out.push(CorpusRecord {
            image_id: survivor.image_id,
            content_hash: survivor.content_hash,
            provenance: prov
                .into_iter()
                .map(|(k, d)| Provenance {
                    keyword: k.to_string(),
                    distance: d,
                })
                .collect(),
            duplicates,
            status: Status::Kept,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::embedding_content_hash;
    use crate::embed::{gaussian_unit, seeded_rng, UnitVector};

    fn cand(store: &VectorStore, id: u64, kw: &str, d: f64) -> Candidate {
        Candidate {
            image_id: id,
            content_hash: embedding_content_hash(store.vector(id).unwrap()),
            distance: d,
            keyword: kw.into(),
        }
    }

    fn random_store(n: u64, dim: usize) -> VectorStore {
        let mut rng = seeded_rng(1, b"dedup");
        VectorStore::from_rows(dim, (0..n).map(|i| (i, gaussian_unit(&mut rng, dim)))).unwrap()
    }

    #[test]
    fn same_image_two_keywords() {
        let store = random_store(5, 16);
        let recs = deduplicate(&[cand(&store, 3, "a", 0.5), cand(&store, 3, "b", 0.7), cand(&store, 3, "a", 0.6)], &store, 0.98).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(
            recs[0].provenance,
            vec![
                Provenance { keyword: "a".into(), distance: 0.6 },
                Provenance { keyword: "b".into(), distance: 0.7 }
            ]
        );
    }

    #[test]
    fn disjoint_sets_are_preserved() {
        let store = random_store(10, 32);
        let cands: Vec<_> = (0..10).map(|i| cand(&store, i, if i < 5 { "a" } else { "b" }, 0.1)).collect();
        assert_eq!(deduplicate(&cands, &store, 0.98).unwrap().len(), 10);
    }

    fn pair_store(cos: f64) -> VectorStore {
        let a = UnitVector::new(vec![1.0, 0.0]).unwrap();
        let b = UnitVector::from_f64(&[cos, (1.0 - cos * cos).sqrt()]).unwrap();
        VectorStore::from_rows(2, [(4, b), (2, a)]).unwrap()
    }

    #[test]
    fn near_duplicate_threshold() {
        let store = pair_store(0.99);
        assert!((dot(store.vector(2).unwrap(), store.vector(4).unwrap()) - 0.99).abs() < 1e-6);
        let cands = [cand(&store, 4, "x", 0.9), cand(&store, 2, "y", 0.8)];
        let merged = deduplicate(&cands, &store, 0.98).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].image_id, 2);
        assert_eq!(merged[0].duplicates, vec![4]);
        assert_eq!(merged[0].provenance.len(), 2);
        assert_eq!(deduplicate(&cands, &store, 0.995).unwrap().len(), 2);
    }

    #[test]
    fn exact_hash_duplicates_merge() {
        let v = UnitVector::new(vec![0.6, 0.8]).unwrap();
        let store = VectorStore::from_rows(2, [(10, v.clone()), (3, v)]).unwrap();
        let recs = deduplicate(&[cand(&store, 10, "k", 0.9), cand(&store, 3, "k", 0.9)], &store, 1.0).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].image_id, 3);
    }

    #[test]
    fn threshold_validated() {
        let store = random_store(2, 4);
        assert!(deduplicate(&[], &store, 0.0).is_err());
        assert!(deduplicate(&[], &store, 1.01).is_err());
    }

    #[test]
    fn pivot_pruning_matches_brute_force() {
        // Clustered data with many true near-duplicates.
        let dim = 16;
        let mut rng = seeded_rng(2, b"pivots");
        let centers: Vec<UnitVector> = (0..20).map(|_| gaussian_unit(&mut rng, dim)).collect();
        let rows: Vec<Vec<f32>> = (0..600)
            .map(|i| {
                let c = centers[i % 20].as_slice();
                let noise = gaussian_unit(&mut rng, dim);
                let scale = [0.02, 0.1, 0.4][i % 3];
                let v: Vec<f64> = c.iter().zip(noise.as_slice()).map(|(&a, &b)| a as f64 + scale * b as f64).collect();
                UnitVector::from_f64(&v).unwrap().into_inner()
            })
            .collect();
        let views: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        for t in [0.5, 0.9, 0.98, 0.999] {
            let mut brute = Vec::new();
            for i in 0..views.len() {
                for j in i + 1..views.len() {
                    if dot(views[i], views[j]) >= t {
                        brute.push((i, j));
                    }
                }
            }
            let mut got = near_duplicate_pairs(&views, t);
            got.sort_unstable();
            assert_eq!(got, brute, "threshold {t}");
        }
    }
}
