//! Inverted-file style partitioned index: spherical k-means cells with
//! nearest-centroid assignment, searched by probing the closest cells.

use rand::Rng;
use rayon::prelude::*;

use super::search::{check_query, score_rows, select_top_k};
use super::{dot, seeded_rng, Hit, UnitVector, VectorStore};
use crate::error::{Error, Result};

pub const KMEANS_MAX_ITERS: usize = 25;
const KMEANS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedIndex {
    dim: usize,
    /// `num_cells × dim`, unit rows.
    centroids: Vec<f32>,
    /// Cell of each store row.
    assignments: Vec<u32>,
    /// Store rows per cell, ascending. With spill > 1 a row is listed in
    /// each of its `spill` nearest cells.
    cells: Vec<Vec<u32>>,
    spill: usize,
}

impl PartitionedIndex {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn centroid(&self, cell: usize) -> &[f32] {
        &self.centroids[cell * self.dim..(cell + 1) * self.dim]
    }

    /// Cell index of the item stored at `row`.
    pub fn cell_of_row(&self, row: usize) -> usize {
        self.assignments[row] as usize
    }

    pub fn cell_of(&self, store: &VectorStore, id: u64) -> Option<usize> {
        store.row_of(id).map(|r| self.cell_of_row(r))
    }

    /// Number of cells each row is listed in.
    pub fn spill(&self) -> usize {
        self.spill
    }

    pub fn cell_rows(&self, cell: usize) -> &[u32] {
        &self.cells[cell]
    }

    pub fn cell_ids(&self, cell: usize, store: &VectorStore) -> Vec<u64> {
        self.cells[cell].iter().map(|&r| store.ids()[r as usize]).collect()
    }

    fn nearest_cells(&self, query: &[f32], probes: usize) -> Vec<usize> {
        let mut scored: Vec<(usize, f64)> = (0..self.num_cells())
            .map(|c| (c, dot(query, self.centroid(c))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(probes);
        scored.into_iter().map(|(c, _)| c).collect()
    }
}

fn nearest_centroid(row: &[f32], centroids: &[f32], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::NEG_INFINITY);
    for (c, cen) in centroids.chunks_exact(dim).enumerate() {
        let s = dot(row, cen);
        if s > best.1 {
            best = (c as u32, s);
        }
    }
    best
}

/// The `m` best cells for `row`, best first, ties to the lower cell.
fn nearest_centroids(row: &[f32], centroids: &[f32], dim: usize, m: usize) -> Vec<u32> {
    let mut scored: Vec<(u32, f64)> = centroids
        .chunks_exact(dim)
        .enumerate()
        .map(|(c, cen)| (c as u32, dot(row, cen)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().take(m).map(|(c, _)| c).collect()
}

fn assign_all(store: &VectorStore, centroids: &[f32]) -> Vec<(u32, f64)> {
    let dim = store.dim();
    (0..store.len())
        .into_par_iter()
        .map(|r| nearest_centroid(store.row(r), centroids, dim))
        .collect()
}

/// k-means++ seeding on the cosine distance `1 - dot`.
fn init_centroids(store: &VectorStore, num_cells: usize, seed: u64) -> Vec<f32> {
    let mut rng = seeded_rng(seed, b"kmeans++");
    let n = store.len();
    let dim = store.dim();
    let mut centroids = Vec::with_capacity(num_cells * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(store.row(first));
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut dist: Vec<f64> = (0..n).map(|r| 1.0 - dot(store.row(r), store.row(first))).collect();
    while centroids.len() < num_cells * dim {
        let weights: Vec<f64> = dist
            .iter()
            .zip(&chosen)
            .map(|(&d, &c)| if c { 0.0 } else { d.max(0.0).powi(2) })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (r, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(r);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight has a positive entry")
        } else {
            // Remaining points coincide with chosen centroids.
            (0..n).find(|&r| !chosen[r]).expect("num_cells <= n")
        };
        chosen[pick] = true;
        let row = store.row(pick);
        centroids.extend_from_slice(row);
        dist.par_iter_mut().enumerate().for_each(|(r, d)| {
            *d = d.min(1.0 - dot(store.row(r), row));
        });
    }
    centroids
}

fn normalize_into(sum: &[f64], out: &mut [f32]) -> bool {
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return false;
    }
    for (o, s) in out.iter_mut().zip(sum) {
        *o = (s / norm) as f32;
    }
    true
}

/// Spherical k-means over the store. At most [`KMEANS_MAX_ITERS`] Lloyd
/// iterations; stops early once no centroid moves by more than 1e-6. Cells
/// left empty are re-seeded from the point farthest from its centroid.
pub fn build_partitioned_index(
    store: &VectorStore,
    num_cells: usize,
    seed: u64,
) -> Result<PartitionedIndex> {
    build_partitioned_index_with_spill(store, num_cells, seed, 1)
}

/// Like [`build_partitioned_index`], but lists every row in its `spill`
/// nearest cells. Redundant assignment trades scan volume for recall on
/// queries that land near cell boundaries.
pub fn build_partitioned_index_with_spill(
    store: &VectorStore,
    num_cells: usize,
    seed: u64,
    spill: usize,
) -> Result<PartitionedIndex> {
    let n = store.len();
    if spill == 0 || spill > num_cells {
        return Err(Error::invalid(format!(
            "spill must be in 1..={num_cells}, got {spill}"
        )));
    }
    if num_cells == 0 || num_cells > n {
        return Err(Error::invalid(format!(
            "num_cells must be in 1..={n}, got {num_cells}"
        )));
    }
    let dim = store.dim();
    let mut centroids = init_centroids(store, num_cells, seed);
    let mut assigned = assign_all(store, &centroids);

    for _ in 0..KMEANS_MAX_ITERS {
        let mut sums = vec![0f64; num_cells * dim];
        let mut counts = vec![0usize; num_cells];
        for (r, &(c, _)) in assigned.iter().enumerate() {
            let c = c as usize;
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(store.row(r)) {
                *s += f64::from(v);
            }
        }

        let mut next = centroids.clone();
        // Farthest points first, for re-seeding empty cells.
        let mut far: Vec<usize> = Vec::new();
        if counts.contains(&0) {
            far = (0..n).collect();
            far.sort_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(a.cmp(&b)));
        }
        let mut far_iter = far.into_iter();
        for c in 0..num_cells {
            let out = &mut next[c * dim..(c + 1) * dim];
            if counts[c] == 0 {
                if let Some(r) = far_iter.next() {
                    out.copy_from_slice(store.row(r));
                }
            } else {
                normalize_into(&sums[c * dim..(c + 1) * dim], out);
            }
        }

        let moved = centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        centroids = next;
        assigned = assign_all(store, &centroids);
        if moved < KMEANS_TOL {
            break;
        }
    }

    let mut cells = vec![Vec::new(); num_cells];
    if spill == 1 {
        for (r, &(c, _)) in assigned.iter().enumerate() {
            cells[c as usize].push(r as u32);
        }
    } else {
        let lists: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|r| nearest_centroids(store.row(r), &centroids, dim, spill))
            .collect();
        for (r, list) in lists.iter().enumerate() {
            for &c in list {
                cells[c as usize].push(r as u32);
            }
        }
    }
    Ok(PartitionedIndex {
        dim,
        centroids,
        assignments: assigned.into_iter().map(|(c, _)| c).collect(),
        cells,
        spill,
    })
}

/// Top-`k` over the `probes` cells whose centroids score highest against
/// the query. With `probes == num_cells` this equals [`super::exact_top_k`].
pub fn approx_top_k(
    query: &UnitVector,
    index: &PartitionedIndex,
    store: &VectorStore,
    k: usize,
    probes: usize,
) -> Result<Vec<Hit>> {
    check_query(query, store, k)?;
    if probes == 0 || probes > index.num_cells() {
        return Err(Error::invalid(format!(
            "probes must be in 1..={}, got {probes}",
            index.num_cells()
        )));
    }
    if index.assignments.len() != store.len() || index.dim != store.dim() {
        return Err(Error::invalid("index was built over a different store"));
    }
    let q = query.as_slice();
    let mut rows: Vec<u32> = index
        .nearest_cells(q, probes)
        .into_iter()
        .flat_map(|c| index.cells[c].iter().copied())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    Ok(select_top_k(score_rows(q, store, &rows), k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{exact_top_k, gaussian_unit};

    fn random_store(n: usize, dim: usize, seed: u64) -> VectorStore {
        let mut rng = seeded_rng(seed, b"index-test");
        VectorStore::from_rows(dim, (0..n as u64).map(|i| (i * 3 + 1, gaussian_unit(&mut rng, dim)))).unwrap()
    }

    #[test]
    fn single_cell_holds_everything() {
        let store = random_store(40, 8, 1);
        let index = build_partitioned_index(&store, 1, 0).unwrap();
        assert_eq!(index.num_cells(), 1);
        assert_eq!(index.cell_ids(0, &store), store.ids());
        let q = gaussian_unit(&mut seeded_rng(9, b"q"), 8);
        assert_eq!(
            approx_top_k(&q, &index, &store, 7, 1).unwrap(),
            exact_top_k(&q, &store, 7).unwrap()
        );
    }

    #[test]
    fn separated_clusters_get_their_own_cells() {
        // Four tight clusters around orthogonal axes.
        let dim = 8;
        let mut rng = seeded_rng(5, b"clusters");
        let mut rows = Vec::new();
        for cluster in 0..4u64 {
            for j in 0..25u64 {
                let mut v = vec![0f64; dim];
                v[cluster as usize * 2] = 1.0;
                for x in v.iter_mut() {
                    *x += 0.01 * (rng.random::<f64>() - 0.5);
                }
                rows.push((cluster * 100 + j, UnitVector::from_f64(&v).unwrap()));
            }
        }
        let store = VectorStore::from_rows(dim, rows).unwrap();
        let index = build_partitioned_index(&store, 4, 11).unwrap();
        for cell in 0..4 {
            let ids = index.cell_ids(cell, &store);
            assert_eq!(ids.len(), 25);
            let cluster = ids[0] / 100;
            assert!(ids.iter().all(|id| id / 100 == cluster));
        }
    }

    #[test]
    fn build_is_deterministic_and_total() {
        let store = random_store(500, 16, 2);
        let a = build_partitioned_index(&store, 12, 42).unwrap();
        let b = build_partitioned_index(&store, 12, 42).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<u32> = a.cells.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..500).collect::<Vec<u32>>());
        assert!(a.cells.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn full_probing_equals_exact() {
        let store = random_store(300, 16, 3);
        let index = build_partitioned_index(&store, 10, 1).unwrap();
        let mut rng = seeded_rng(4, b"q");
        for _ in 0..25 {
            let q = gaussian_unit(&mut rng, 16);
            assert_eq!(
                approx_top_k(&q, &index, &store, 12, 10).unwrap(),
                exact_top_k(&q, &store, 12).unwrap()
            );
        }
    }

    #[test]
    fn spill_lists_rows_in_several_cells() {
        let store = random_store(400, 16, 8);
        let index = build_partitioned_index_with_spill(&store, 8, 1, 3).unwrap();
        let total: usize = (0..8).map(|c| index.cell_rows(c).len()).sum();
        assert_eq!(total, 1200);
        for r in 0..400 {
            assert!(index.cell_rows(index.cell_of_row(r)).contains(&(r as u32)));
        }
        let mut rng = seeded_rng(2, b"q");
        for _ in 0..10 {
            let q = gaussian_unit(&mut rng, 16);
            assert_eq!(
                approx_top_k(&q, &index, &store, 9, 8).unwrap(),
                exact_top_k(&q, &store, 9).unwrap()
            );
        }
        assert!(build_partitioned_index_with_spill(&store, 8, 1, 9).is_err());
    }

    #[test]
    fn argument_validation() {
        let store = random_store(10, 4, 6);
        assert!(build_partitioned_index(&store, 0, 0).is_err());
        assert!(build_partitioned_index(&store, 11, 0).is_err());
        let index = build_partitioned_index(&store, 3, 0).unwrap();
        let q = gaussian_unit(&mut seeded_rng(0, b""), 4);
        assert!(approx_top_k(&q, &index, &store, 1, 0).is_err());
        assert!(approx_top_k(&q, &index, &store, 1, 4).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_cell() {
        let v = UnitVector::new(vec![1.0, 0.0]).unwrap();
        let w = UnitVector::new(vec![0.0, 1.0]).unwrap();
        let store = VectorStore::from_rows(
            2,
            (0..6u64).map(|i| (i, if i < 5 { v.clone() } else { w.clone() })),
        )
        .unwrap();
        let index = build_partitioned_index(&store, 3, 0).unwrap();
        let total: usize = (0..3).map(|c| index.cell_rows(c).len()).sum();
        assert_eq!(total, 6);
    }
}
