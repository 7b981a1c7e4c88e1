//! Key/tag datastore with exact search and an inverted-file (IVF) index.
//!
//! Keys are stored as `f32` rows. When the store carries a whitening model,
//! keys are whitened before insertion and every raw query is whitened by the
//! same model before search. Distances are squared L2, accumulated in `f64`.
//! Results are ordered by ascending distance, ties broken by ascending entry id.
//!
//! File layout (little-endian):
//!
//! ```text
//! b"SKDS" | version: u32 | dims: u32 | entries: u64
//! tags: entries × u8 (0 = B, 1 = I, 2 = O)
//! origins: entries × (dataset: u32, sentence: u32, token: u32)
//! dataset names: count: u32, then per name len: u32 + UTF-8 bytes
//! keys: entries × dims f32
//! whitening flag: u8, then (if 1) mean, W, eigenvalues as f64 and clamp count u32
//! index flag: u8, then (if 1) centroids: u32, centroid rows f32,
//!   per list len: u64 + ids as u64
//! ```

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Tag;
use crate::embedio::{AlignedCorpus, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::whitening::WhiteningModel;

pub const MAGIC: &[u8; 4] = b"SKDS";
pub const VERSION: u32 = 1;

pub const DEFAULT_CENTROIDS: usize = 4096;
pub const DEFAULT_NPROBE: usize = 32;
pub const KMEANS_ITERATIONS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Origin {
    pub dataset: u32,
    pub sentence: u32,
    pub token: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatastoreEntry<'a> {
    pub key: &'a [f32],
    pub tag: Tag,
    pub dataset: &'a str,
    pub sentence: usize,
    pub token: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Squared L2 distance in (possibly whitened) key space.
    pub distance: f64,
    pub tag: Tag,
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    centroids: Vec<f32>,
    lists: Vec<Vec<u64>>,
}

impl IvfIndex {
    pub fn n_centroids(&self) -> usize {
        self.lists.len()
    }

    pub fn centroid(&self, i: usize, dims: usize) -> &[f32] {
        &self.centroids[i * dims..(i + 1) * dims]
    }

    pub fn lists(&self) -> &[Vec<u64>] {
        &self.lists
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datastore {
    dims: usize,
    keys: Vec<f32>,
    tags: Vec<Tag>,
    origins: Vec<Origin>,
    datasets: Vec<String>,
    whitening: Option<WhiteningModel>,
    index: Option<IvfIndex>,
}

/// Squared L2 distance between two `f32` vectors, summed in `f64`.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    distance: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

impl Datastore {
    pub fn new(dims: usize) -> Self {
        Datastore {
            dims,
            keys: Vec::new(),
            tags: Vec::new(),
            origins: Vec::new(),
            datasets: Vec::new(),
            whitening: None,
            index: None,
        }
    }

    /// One entry per token of every corpus, `O` tokens included, in corpus
    /// then token order. With `use_whitening` the model is fit on the union of
    /// all raw keys and stored alongside the whitened keys.
    pub fn build(corpora: &[AlignedCorpus<'_>], use_whitening: bool) -> Result<Self> {
        let first = corpora.first().ok_or(Error::Empty("datastore corpora"))?;
        let dims = first.embeddings.dims();
        let mut raw = Vec::new();
        let mut store = Datastore::new(dims);
        for (ds, aligned) in corpora.iter().enumerate() {
            if aligned.embeddings.dims() != dims {
                return Err(Error::Dimension {
                    expected: dims,
                    found: aligned.embeddings.dims(),
                });
            }
            store.datasets.push(aligned.corpus.name.clone());
            for (s, sentence) in aligned.corpus.sentences.iter().enumerate() {
                for (t, &tag) in sentence.tags().iter().enumerate() {
                    store.tags.push(tag);
                    store.origins.push(Origin {
                        dataset: ds as u32,
                        sentence: s as u32,
                        token: t as u32,
                    });
                }
            }
            raw.extend_from_slice(aligned.embeddings.data());
        }

        if use_whitening {
            let raw = EmbeddingMatrix::new(dims, raw)?;
            let model = WhiteningModel::fit(&raw)?;
            store.keys = to_f32(&model.apply_matrix(&raw)?)?;
            store.whitening = Some(model);
        } else {
            store.keys = raw;
        }
        Ok(store)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn whitening(&self) -> Option<&WhiteningModel> {
        self.whitening.as_ref()
    }

    pub fn index(&self) -> Option<&IvfIndex> {
        self.index.as_ref()
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn key(&self, id: usize) -> &[f32] {
        &self.keys[id * self.dims..(id + 1) * self.dims]
    }

    pub fn tag(&self, id: usize) -> Tag {
        self.tags[id]
    }

    pub fn entry(&self, id: usize) -> DatastoreEntry<'_> {
        let origin = self.origins[id];
        DatastoreEntry {
            key: self.key(id),
            tag: self.tags[id],
            dataset: &self.datasets[origin.dataset as usize],
            sentence: origin.sentence as usize,
            token: origin.token as usize,
        }
    }

    /// Maps a raw query into key space (whitening it if the store is whitened).
    pub fn prepare_query(&self, query: &[f32]) -> Result<Vec<f32>> {
        if query.len() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                found: query.len(),
            });
        }
        match &self.whitening {
            Some(model) => to_f32(&model.apply(query)?),
            None => Ok(query.to_vec()),
        }
    }

    /// Exact k nearest entries to a raw query.
    pub fn search_flat(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        let q = self.check_search(query, k)?;
        Ok(self.search_prepared_flat(&q, k))
    }

    /// k nearest entries among the `nprobe` inverted lists closest to the query.
    pub fn search_ivf(&self, query: &[f32], k: usize, nprobe: usize) -> Result<Vec<Neighbor>> {
        let index = self.index.as_ref().ok_or(Error::MissingIndex)?;
        if nprobe == 0 || nprobe > index.n_centroids() {
            return Err(Error::param(format!(
                "nprobe must be in 1..={}, got {nprobe}",
                index.n_centroids()
            )));
        }
        let q = self.check_search(query, k)?;
        Ok(self.search_prepared_ivf(&q, k, nprobe))
    }

    /// Search with an already prepared (key-space) query; `nprobe = None` is exact.
    pub(crate) fn search_prepared(&self, q: &[f32], k: usize, nprobe: Option<usize>) -> Vec<Neighbor> {
        match nprobe {
            None => self.search_prepared_flat(q, k),
            Some(p) => self.search_prepared_ivf(q, k, p),
        }
    }

    pub(crate) fn check_nprobe(&self, nprobe: Option<usize>) -> Result<()> {
        if let Some(p) = nprobe {
            let index = self.index.as_ref().ok_or(Error::MissingIndex)?;
            if p == 0 || p > index.n_centroids() {
                return Err(Error::param(format!(
                    "nprobe must be in 1..={}, got {p}",
                    index.n_centroids()
                )));
            }
        }
        Ok(())
    }

    fn check_search(&self, query: &[f32], k: usize) -> Result<Vec<f32>> {
        if self.is_empty() {
            return Err(Error::EmptyStore);
        }
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        self.prepare_query(query)
    }

    fn search_prepared_flat(&self, q: &[f32], k: usize) -> Vec<Neighbor> {
        self.top_k(q, k, 0..self.len())
    }

    fn search_prepared_ivf(&self, q: &[f32], k: usize, nprobe: usize) -> Vec<Neighbor> {
        let index = self.index.as_ref().expect("index checked by caller");
        let mut ranked: Vec<Candidate> = (0..index.n_centroids())
            .map(|c| Candidate {
                distance: squared_l2(q, index.centroid(c, self.dims)),
                id: c,
            })
            .collect();
        ranked.sort_unstable();
        let ids = ranked[..nprobe]
            .iter()
            .flat_map(|c| index.lists[c.id].iter().map(|&id| id as usize));
        self.top_k(q, k, ids)
    }

    fn top_k(&self, q: &[f32], k: usize, ids: impl Iterator<Item = usize>) -> Vec<Neighbor> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for id in ids {
            let cand = Candidate {
                distance: squared_l2(q, self.key(id)),
                id,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand < *worst {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                distance: c.distance,
                tag: self.tags[c.id],
                id: c.id,
            })
            .collect()
    }

    /// Clusters the keys with k-means and fills one inverted list per centroid.
    ///
    /// Initial centroids are distinct entries drawn with `seed`; the loop runs
    /// at most [`KMEANS_ITERATIONS`] rounds and stops early once assignments are
    /// stable. A cluster that empties is reseeded with the point farthest from
    /// its current centroid.
    pub fn build_index(&mut self, n_centroids: usize, seed: u64) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyStore);
        }
        let n = self.len();
        if n_centroids == 0 || n_centroids > n {
            return Err(Error::param(format!(
                "n_centroids must be in 1..={n}, got {n_centroids}"
            )));
        }
        let d = self.dims;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids: Vec<f64> = Vec::with_capacity(n_centroids * d);
        for id in sample(&mut rng, n, n_centroids).into_iter() {
            centroids.extend(self.key(id).iter().map(|&v| v as f64));
        }

        let mut assignment: Vec<(usize, f64)> = vec![(usize::MAX, 0.0); n];
        for _ in 0..KMEANS_ITERATIONS {
            let next: Vec<(usize, f64)> = (0..n)
                .into_par_iter()
                .map(|id| nearest_centroid_f64(self.key(id), &centroids, d))
                .collect();
            let changed = next.iter().zip(&assignment).any(|(a, b)| a.0 != b.0);
            assignment = next;

            let mut sums = vec![0.0f64; n_centroids * d];
            let mut counts = vec![0usize; n_centroids];
            for (id, &(c, _)) in assignment.iter().enumerate() {
                counts[c] += 1;
                for (s, &v) in sums[c * d..(c + 1) * d].iter_mut().zip(self.key(id)) {
                    *s += v as f64;
                }
            }

            let empty: Vec<usize> = (0..n_centroids).filter(|&c| counts[c] == 0).collect();
            if !changed && empty.is_empty() {
                break;
            }
            for c in 0..n_centroids {
                if counts[c] > 0 {
                    let inv = 1.0 / counts[c] as f64;
                    for (dst, s) in centroids[c * d..(c + 1) * d]
                        .iter_mut()
                        .zip(&sums[c * d..(c + 1) * d])
                    {
                        *dst = s * inv;
                    }
                }
            }
            if !empty.is_empty() {
                let mut far: Vec<usize> = (0..n).collect();
                far.sort_by(|&a, &b| {
                    assignment[b]
                        .1
                        .total_cmp(&assignment[a].1)
                        .then(a.cmp(&b))
                });
                for (&c, &id) in empty.iter().zip(&far) {
                    for (dst, &v) in centroids[c * d..(c + 1) * d].iter_mut().zip(self.key(id)) {
                        *dst = v as f64;
                    }
                }
            }
        }

        let centroids: Vec<f32> = centroids.iter().map(|&v| v as f32).collect();
        let owners: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|id| {
                let key = self.key(id);
                (0..n_centroids)
                    .map(|c| Candidate {
                        distance: squared_l2(key, &centroids[c * d..(c + 1) * d]),
                        id: c,
                    })
                    .min()
                    .map(|c| c.id)
                    .unwrap_or(0)
            })
            .collect();
        let mut lists = vec![Vec::new(); n_centroids];
        for (id, &c) in owners.iter().enumerate() {
            lists[c].push(id as u64);
        }
        self.index = Some(IvfIndex { centroids, lists });
        Ok(())
    }

    pub fn drop_index(&mut self) {
        self.index = None;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let d = self.dims;
        let mut out = Vec::with_capacity(24 + n * (13 + 4 * d));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend(self.tags.iter().map(|t| t.index() as u8));
        for o in &self.origins {
            for v in [o.dataset, o.sentence, o.token] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.datasets.len() as u32).to_le_bytes());
        for name in &self.datasets {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for v in &self.keys {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &self.whitening {
            Some(model) => {
                out.push(1);
                model.write_to(&mut out);
            }
            None => out.push(0),
        }
        match &self.index {
            Some(index) => {
                out.push(1);
                out.extend_from_slice(&(index.n_centroids() as u32).to_le_bytes());
                for v in &index.centroids {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                for list in &index.lists {
                    out.extend_from_slice(&(list.len() as u64).to_le_bytes());
                    for id in list {
                        out.extend_from_slice(&id.to_le_bytes());
                    }
                }
            }
            None => out.push(0),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a datastore file (bad magic)".into()));
        }
        r.pos = 4;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported datastore version {version}")));
        }
        let d = r.u32()? as usize;
        let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("entry count overflow".into()))?;
        if d == 0 {
            return Err(Error::Format("datastore width must be positive".into()));
        }

        let tags = r
            .take(n)?
            .iter()
            .map(|&b| {
                Tag::from_index(b as usize)
                    .ok_or_else(|| Error::Format(format!("invalid tag byte {b}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut origins = Vec::with_capacity(n);
        for _ in 0..n {
            origins.push(Origin {
                dataset: r.u32()?,
                sentence: r.u32()?,
                token: r.u32()?,
            });
        }
        let n_datasets = r.u32()? as usize;
        let mut datasets = Vec::with_capacity(n_datasets.min(1024));
        for _ in 0..n_datasets {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("dataset name is not UTF-8".into()))?;
            datasets.push(name.to_string());
        }
        if let Some(o) = origins.iter().find(|o| o.dataset as usize >= n_datasets) {
            return Err(Error::Format(format!("origin names unknown dataset {}", o.dataset)));
        }
        let keys = r.f32s(n.checked_mul(d).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        if keys.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite key".into()));
        }

        let whitening = match r.u8()? {
            0 => None,
            1 => {
                let len = WhiteningModel::encoded_len(d);
                Some(WhiteningModel::read_from(d, r.take(len)?)?)
            }
            f => return Err(Error::Format(format!("invalid whitening flag {f}"))),
        };
        let index = match r.u8()? {
            0 => None,
            1 => {
                let c = r.u32()? as usize;
                let centroids = r.f32s(c * d)?;
                let mut lists = Vec::with_capacity(c.min(1 << 20));
                let mut seen = 0usize;
                for _ in 0..c {
                    let len = usize::try_from(r.u64()?)
                        .map_err(|_| Error::Format("list length overflow".into()))?;
                    let mut list = Vec::with_capacity(len.min(n));
                    for _ in 0..len {
                        let id = r.u64()?;
                        if id as usize >= n {
                            return Err(Error::Format(format!("list id {id} out of range")));
                        }
                        list.push(id);
                    }
                    seen += len;
                    lists.push(list);
                }
                if seen != n {
                    return Err(Error::Format(format!(
                        "inverted lists hold {seen} ids for {n} entries"
                    )));
                }
                Some(IvfIndex { centroids, lists })
            }
            f => return Err(Error::Format(format!("invalid index flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Datastore {
            dims: d,
            keys,
            tags,
            origins,
            datasets,
            whitening,
            index,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Datastore::from_bytes(&fs::read(path)?)
    }
}

fn nearest_centroid_f64(key: &[f32], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(d).enumerate() {
        let dist: f64 = key
            .iter()
            .zip(centroid)
            .map(|(&x, &y)| {
                let t = x as f64 - y;
                t * t
            })
            .sum();
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn to_f32(values: &[f64]) -> Result<Vec<f32>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = v as f32;
            if f.is_finite() {
                Ok(f)
            } else {
                Err(Error::NonFinite { row: i, col: 0 })
            }
        })
        .collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Length {
                expected: (self.pos as u64).saturating_add(len as u64),
                found: self.bytes.len() as u64,
            }),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format("size overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
