//! Neighbor-augmented tagging: a temperature softmax over retrieved neighbor
//! distances gives `p_kNN`, which is mixed with the base model's `p_SE` as
//! `p = λ·p_kNN + (1 − λ)·p_SE` and decoded per sentence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{repair, Sentence, Tag, TaggedCorpus};
use crate::datastore::{Datastore, Neighbor};
use crate::embedio::AlignedCorpus;
use crate::error::{Error, Result};
use crate::evalkit::{evaluate, EvalReport, GridRow, MatchMode};

/// Tolerance on the sum of a [`LabelDistribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub temperature: f64,
    pub lambda: f64,
    /// Inverted lists to probe; `None` searches exhaustively.
    pub nprobe: Option<usize>,
}

impl KnnConfig {
    pub fn new(k: usize, lambda: f64, temperature: f64) -> Self {
        KnnConfig {
            k,
            temperature,
            lambda,
            nprobe: None,
        }
    }

    pub fn with_nprobe(mut self, nprobe: Option<usize>) -> Self {
        self.nprobe = nprobe;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        check_temperature(self.temperature)?;
        check_lambda(self.lambda)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param(format!("temperature must be positive, got {t}")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!("lambda must be in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// Probabilities over `(B, I, O)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution([f64; 3]);

impl LabelDistribution {
    pub fn new(b: f64, i: f64, o: f64) -> Result<Self> {
        let p = [b, i, o];
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param(format!("invalid probabilities {p:?}")));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::param(format!("probabilities {p:?} do not sum to 1")));
        }
        Ok(LabelDistribution(p))
    }

    /// Base-model row from a distribution file, renormalized in `f64`.
    pub fn from_row(row: [f32; 3]) -> Self {
        let p = row.map(|v| v as f64);
        let sum: f64 = p.iter().sum();
        LabelDistribution(p.map(|v| v / sum))
    }

    pub fn one_hot(tag: Tag) -> Self {
        let mut p = [0.0; 3];
        p[tag.index()] = 1.0;
        LabelDistribution(p)
    }

    pub fn prob(&self, tag: Tag) -> f64 {
        self.0[tag.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    /// Most probable tag; ties resolve in the order B, I, O.
    pub fn argmax(&self) -> Tag {
        let mut best = Tag::B;
        for tag in [Tag::I, Tag::O] {
            if self.prob(tag) > self.prob(best) {
                best = tag;
            }
        }
        best
    }
}

/// Softmax of `−distance / T` over the retrieved neighbors, summed per tag.
/// Tags absent from the neighbors get exactly zero mass.
pub fn knn_distribution(neighbors: &[Neighbor], temperature: f64) -> Result<LabelDistribution> {
    check_temperature(temperature)?;
    let nearest = neighbors
        .iter()
        .map(|n| n.distance)
        .min_by(f64::total_cmp)
        .ok_or(Error::Empty("neighbor list"))?;
    let mut mass = [0.0f64; 3];
    for n in neighbors {
        // Shifting by the nearest distance leaves the softmax unchanged and
        // keeps the largest weight at exactly 1.
        mass[n.tag.index()] += (-(n.distance - nearest) / temperature).exp();
    }
    let total: f64 = mass.iter().sum();
    Ok(LabelDistribution(mass.map(|m| m / total)))
}

pub fn interpolate(
    p_se: &LabelDistribution,
    p_knn: &LabelDistribution,
    lambda: f64,
) -> Result<LabelDistribution> {
    check_lambda(lambda)?;
    let mut p = [0.0; 3];
    for (j, out) in p.iter_mut().enumerate() {
        *out = lambda * p_knn.0[j] + (1.0 - lambda) * p_se.0[j];
    }
    Ok(LabelDistribution(p))
}

/// Per-token argmax followed by the stray-`I` repair.
pub fn decode(distributions: &[LabelDistribution]) -> Vec<Tag> {
    let raw: Vec<Tag> = distributions.iter().map(LabelDistribution::argmax).collect();
    repair(&raw)
}

fn base_distributions(test: &AlignedCorpus<'_>) -> Result<Vec<LabelDistribution>> {
    let table = test
        .distributions
        .ok_or_else(|| Error::param("base distributions are required"))?;
    Ok((0..table.rows())
        .map(|r| LabelDistribution::from_row(table.row(r)))
        .collect())
}

fn assemble(test: &AlignedCorpus<'_>, dists: &[LabelDistribution]) -> Result<TaggedCorpus> {
    let sentences = test
        .sentences()
        .map(|(sentence, rows)| sentence.with_tags(decode(&dists[rows])))
        .collect::<Result<Vec<Sentence>>>()?;
    Ok(TaggedCorpus::new(test.corpus.name.clone(), sentences))
}

/// Predictions of the base model alone.
pub fn base_decode(test: &AlignedCorpus<'_>) -> Result<TaggedCorpus> {
    assemble(test, &base_distributions(test)?)
}

/// The `k` nearest neighbors of every token, in token order.
pub fn retrieve(
    test: &AlignedCorpus<'_>,
    store: &Datastore,
    k: usize,
    nprobe: Option<usize>,
) -> Result<Vec<Vec<Neighbor>>> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if test.embeddings.dims() != store.dims() {
        return Err(Error::Dimension {
            expected: store.dims(),
            found: test.embeddings.dims(),
        });
    }
    store.check_nprobe(nprobe)?;
    (0..test.embeddings.rows())
        .into_par_iter()
        .map(|row| {
            let q = store.prepare_query(test.embedding(row))?;
            Ok(store.search_prepared(&q, k, nprobe))
        })
        .collect()
}

/// Mixes and decodes using precomputed neighbor lists, keeping the first
/// `cfg.k` neighbors of each list.
pub fn predict_with_neighbors(
    test: &AlignedCorpus<'_>,
    neighbors: &[Vec<Neighbor>],
    cfg: &KnnConfig,
) -> Result<TaggedCorpus> {
    cfg.validate()?;
    let base = base_distributions(test)?;
    if neighbors.len() != base.len() {
        return Err(Error::Alignment {
            what: "neighbor lists",
            expected: base.len(),
            found: neighbors.len(),
        });
    }
    let mixed = base
        .par_iter()
        .zip(neighbors.par_iter())
        .map(|(p_se, list)| {
            let top = &list[..cfg.k.min(list.len())];
            let p_knn = knn_distribution(top, cfg.temperature)?;
            interpolate(p_se, &p_knn, cfg.lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(test, &mixed)
}

/// Full inference: retrieve, aggregate, interpolate and decode every sentence.
pub fn infer(test: &AlignedCorpus<'_>, store: &Datastore, cfg: &KnnConfig) -> Result<TaggedCorpus> {
    cfg.validate()?;
    let neighbors = retrieve(test, store, cfg.k, cfg.nprobe)?;
    predict_with_neighbors(test, &neighbors, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    #[serde(rename = "T")]
    pub temperature: Vec<f64>,
}

impl Default for SearchSpace {
    /// k ∈ {4, …, 128}, λ ∈ {0.10, 0.15, …, 0.90}, T ∈ {0.1, 0.5, 1, 2, 3, 5, 10}.
    fn default() -> Self {
        SearchSpace {
            k: vec![4, 8, 16, 32, 64, 128],
            lambda: (0..17).map(|i| (10 + 5 * i) as f64 / 100.0).collect(),
            temperature: vec![0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0],
        }
    }
}

impl SearchSpace {
    /// Sorted, deduplicated and validated copy.
    pub fn normalized(&self) -> Result<SearchSpace> {
        if self.k.is_empty() || self.lambda.is_empty() || self.temperature.is_empty() {
            return Err(Error::param("search space has an empty axis"));
        }
        let mut k = self.k.clone();
        k.sort_unstable();
        k.dedup();
        if k[0] == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        let mut lambda = self.lambda.clone();
        lambda.iter().try_for_each(|&l| check_lambda(l))?;
        lambda.sort_by(f64::total_cmp);
        lambda.dedup();
        let mut temperature = self.temperature.clone();
        temperature.iter().try_for_each(|&t| check_temperature(t))?;
        temperature.sort_by(f64::total_cmp);
        temperature.dedup();
        Ok(SearchSpace { k, lambda, temperature })
    }

    pub fn len(&self) -> usize {
        self.k.len() * self.lambda.len() * self.temperature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every configuration, ordered by k, then λ, then T.
    pub fn configs(&self) -> Vec<KnnConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &k in &self.k {
            for &lambda in &self.lambda {
                for &t in &self.temperature {
                    out.push(KnnConfig::new(k, lambda, t));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: KnnConfig,
    pub best_report: EvalReport,
    /// One row per configuration, in [`SearchSpace::configs`] order.
    pub rows: Vec<GridRow>,
}

/// Scores every configuration by strict span-F1 on `dev`. Neighbor lists are
/// retrieved once at the largest k and truncated per configuration. Ties on
/// F1 go to the smaller k, then smaller λ, then smaller T.
pub fn grid_search(
    dev: &AlignedCorpus<'_>,
    store: &Datastore,
    space: &SearchSpace,
    nprobe: Option<usize>,
) -> Result<GridResult> {
    let space = space.normalized()?;
    let max_k = *space.k.last().expect("normalized space is nonempty");
    let neighbors = retrieve(dev, store, max_k, nprobe)?;
    let gold = dev.corpus.spans();

    let rows = space
        .configs()
        .into_par_iter()
        .map(|cfg| {
            let cfg = cfg.with_nprobe(nprobe);
            let pred = predict_with_neighbors(dev, &neighbors, &cfg)?;
            let report = evaluate(&gold, &pred.spans(), MatchMode::Strict)?;
            Ok(GridRow {
                k: cfg.k,
                lambda: cfg.lambda,
                temperature: cfg.temperature,
                report,
            })
        })
        .collect::<Result<Vec<GridRow>>>()?;

    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.report.f1 > rows[best].report.f1 {
            best = i;
        }
    }
    let b = rows[best];
    Ok(GridResult {
        best: KnnConfig::new(b.k, b.lambda, b.temperature).with_nprobe(nprobe),
        best_report: b.report,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_conll;
    use crate::embedio::{align, DistributionTable, EmbeddingMatrix};
    use proptest::prelude::*;

    fn nb(distance: f64, tag: Tag) -> Neighbor {
        Neighbor { distance, tag, id: 0 }
    }

    #[test]
    fn single_neighbor_is_one_hot() {
        let p = knn_distribution(&[nb(3.7, Tag::B)], 1.0).unwrap();
        assert_eq!(p.as_array(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_fixture() {
        let p = knn_distribution(&[nb(0.0, Tag::B), nb(2f64.ln(), Tag::O)], 1.0).unwrap();
        let [b, i, o] = p.as_array();
        assert!((b - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(i, 0.0);
        assert!((o - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn equidistant_neighbors_split_evenly() {
        let n = [nb(1.0, Tag::B), nb(1.0, Tag::O), nb(1.0, Tag::B), nb(1.0, Tag::O)];
        assert_eq!(knn_distribution(&n, 0.5).unwrap().as_array(), [0.5, 0.0, 0.5]);
    }

    #[test]
    fn far_neighbors_do_not_underflow() {
        let n = [nb(1e6, Tag::I), nb(1e6 + 1.0, Tag::O)];
        let p = knn_distribution(&n, 0.1).unwrap();
        assert!(p.prob(Tag::I) > 0.99);
        assert!(p.as_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn knn_errors() {
        assert!(knn_distribution(&[], 1.0).is_err());
        assert!(knn_distribution(&[nb(0.0, Tag::B)], 0.0).is_err());
        assert!(knn_distribution(&[nb(0.0, Tag::B)], f64::NAN).is_err());
    }

    #[test]
    fn interpolation_fixtures() {
        let se = LabelDistribution::new(0.2, 0.3, 0.5).unwrap();
        let knn = LabelDistribution::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(interpolate(&se, &knn, 0.0).unwrap(), se);
        assert_eq!(interpolate(&se, &knn, 1.0).unwrap(), knn);
        let p = interpolate(&se, &knn, 0.3).unwrap().as_array();
        for (got, want) in p.iter().zip([0.44, 0.21, 0.35]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(interpolate(&se, &knn, 1.5).is_err());
        assert!(interpolate(&se, &knn, -0.1).is_err());
    }

    #[test]
    fn decode_cases() {
        let d = |b, i, o| LabelDistribution::new(b, i, o).unwrap();
        assert_eq!(
            decode(&[d(0.1, 0.2, 0.7), d(0.1, 0.8, 0.1), d(0.2, 0.5, 0.3)]),
            vec![Tag::O, Tag::B, Tag::I]
        );
        assert_eq!(decode(&[d(0.0, 0.0, 1.0), d(0.1, 0.1, 0.8)]), vec![Tag::O, Tag::O]);
        assert_eq!(decode(&[d(0.4, 0.4, 0.2)]), vec![Tag::B]);
        assert_eq!(decode(&[d(0.1, 0.45, 0.45)]), vec![Tag::B]);
    }

    #[test]
    fn label_distribution_validation() {
        assert!(LabelDistribution::new(0.5, 0.5, 0.1).is_err());
        assert!(LabelDistribution::new(-0.1, 0.6, 0.5).is_err());
        let p = LabelDistribution::from_row([0.2, 0.3, 0.5]);
        assert!((p.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(KnnConfig::new(0, 0.5, 1.0).validate().is_err());
        assert!(KnnConfig::new(1, 0.5, 0.0).validate().is_err());
        assert!(KnnConfig::new(1, 1.1, 1.0).validate().is_err());
        assert!(KnnConfig::new(4, 0.3, 0.1).validate().is_ok());
    }

    #[test]
    fn default_space_has_714_points() {
        let space = SearchSpace::default();
        assert_eq!((space.k.len(), space.lambda.len(), space.temperature.len()), (6, 17, 7));
        assert_eq!(space.configs().len(), 714);
        assert_eq!(space.lambda[1], 0.15);
        assert_eq!(space.lambda[16], 0.9);
        assert_eq!(space.normalized().unwrap(), space);
        let bad = SearchSpace { k: vec![], ..SearchSpace::default() };
        assert!(bad.normalized().is_err());
    }

    fn fixture() -> (TaggedCorpus, EmbeddingMatrix, DistributionTable) {
        let corpus = parse_conll(
            "we O\nneed O\nstrong B\nteamwork I\n\nknow B\nPython I\nwell O\n",
            "fixture",
            false,
        )
        .unwrap();
        let emb = EmbeddingMatrix::from_rows(
            2,
            &[[0.0, 0.0], [0.1, 0.0], [1.0, 1.0], [1.1, 1.2], [0.9, 1.0], [1.2, 1.3], [0.0, 0.2]],
        )
        .unwrap();
        let dists = DistributionTable::from_rows(&[
            [0.1, 0.1, 0.8],
            [0.3, 0.3, 0.4],
            [0.2, 0.3, 0.5],
            [0.2, 0.6, 0.2],
            [0.1, 0.1, 0.8],
            [0.1, 0.5, 0.4],
            [0.05, 0.05, 0.9],
        ])
        .unwrap();
        (corpus, emb, dists)
    }

    #[test]
    fn lambda_zero_matches_base_decode() {
        let (corpus, emb, dists) = fixture();
        let test = align(&corpus, &emb, Some(&dists)).unwrap();
        let store = Datastore::build(&[test], false).unwrap();
        let pred = infer(&test, &store, &KnnConfig::new(3, 0.0, 1.0)).unwrap();
        assert_eq!(pred, base_decode(&test).unwrap());
    }

    #[test]
    fn self_retrieval_recovers_gold() {
        let (corpus, emb, dists) = fixture();
        let test = align(&corpus, &emb, Some(&dists)).unwrap();
        for whiten in [false, true] {
            let store = Datastore::build(&[test], whiten).unwrap();
            let pred = infer(&test, &store, &KnnConfig::new(1, 1.0, 1.0)).unwrap();
            assert_eq!(pred.spans(), corpus.spans());
        }
    }

    #[test]
    fn oversized_k_uses_whole_store() {
        let (corpus, emb, dists) = fixture();
        let test = align(&corpus, &emb, Some(&dists)).unwrap();
        let store = Datastore::build(&[test], false).unwrap();
        let pred = infer(&test, &store, &KnnConfig::new(100, 0.5, 1.0)).unwrap();
        assert_eq!(pred.token_count(), corpus.token_count());
    }

    #[test]
    fn inference_requires_distributions_and_matching_dims() {
        let (corpus, emb, dists) = fixture();
        let with = align(&corpus, &emb, Some(&dists)).unwrap();
        let without = align(&corpus, &emb, None).unwrap();
        let store = Datastore::build(&[with], false).unwrap();
        assert!(infer(&without, &store, &KnnConfig::new(1, 0.5, 1.0)).is_err());
        let narrow = Datastore::new(3);
        assert!(infer(&with, &narrow, &KnnConfig::new(1, 0.5, 1.0)).is_err());
        assert!(matches!(
            infer(&with, &store, &KnnConfig::new(1, 0.5, 1.0).with_nprobe(Some(1))),
            Err(Error::MissingIndex)
        ));
    }

    #[test]
    fn grid_single_point_and_tie_break() {
        let (corpus, emb, dists) = fixture();
        let test = align(&corpus, &emb, Some(&dists)).unwrap();
        let store = Datastore::build(&[test], false).unwrap();
        let single = SearchSpace { k: vec![2], lambda: vec![0.4], temperature: vec![3.0] };
        let r = grid_search(&test, &store, &single, None).unwrap();
        assert_eq!(r.best, KnnConfig::new(2, 0.4, 3.0));
        assert_eq!(r.rows.len(), 1);

        // With k = 1 and the store holding the dev tokens, every λ ≥ 0.5 hits
        // F1 = 1, so the smallest such λ and the smallest T must win.
        let space = SearchSpace {
            k: vec![2, 1],
            lambda: vec![0.9, 0.6, 1.0],
            temperature: vec![5.0, 0.5],
        };
        let r = grid_search(&test, &store, &space, None).unwrap();
        assert_eq!(r.rows.len(), 12);
        assert_eq!(r.best_report.f1, 1.0);
        assert_eq!(r.best, KnnConfig::new(1, 0.6, 0.5));
        for row in &r.rows {
            let direct = infer(&test, &store, &KnnConfig::new(row.k, row.lambda, row.temperature)).unwrap();
            let report = evaluate(&corpus.spans(), &direct.spans(), MatchMode::Strict).unwrap();
            assert_eq!(report, row.report);
        }
    }

    proptest! {
        #[test]
        fn distributions_are_normalized(
            raw in prop::collection::vec((0.0f64..50.0, 0usize..3), 1..32),
            t in 0.01f64..100.0,
            lambda in 0.0f64..=1.0,
            se in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        ) {
            let neighbors: Vec<Neighbor> = raw.iter().map(|&(d, i)| nb(d, Tag::from_index(i).unwrap())).collect();
            let p = knn_distribution(&neighbors, t).unwrap();
            prop_assert!((p.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for tag in Tag::ALL {
                if !neighbors.iter().any(|n| n.tag == tag) {
                    prop_assert_eq!(p.prob(tag), 0.0);
                }
            }
            let total = se.0 + se.1 + se.2 + 1e-9;
            let p_se = LabelDistribution::new(se.0 / total, se.1 / total, 1.0 - (se.0 + se.1) / total).unwrap();
            let mixed = interpolate(&p_se, &p, lambda).unwrap();
            prop_assert!((mixed.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn high_temperature_gives_frequencies(
            raw in prop::collection::vec((0.0f64..100.0, 0usize..3), 1..64),
        ) {
            let neighbors: Vec<Neighbor> = raw.iter().map(|&(d, i)| nb(d, Tag::from_index(i).unwrap())).collect();
            let p = knn_distribution(&neighbors, 1e9).unwrap();
            for tag in Tag::ALL {
                let freq = neighbors.iter().filter(|n| n.tag == tag).count() as f64 / neighbors.len() as f64;
                prop_assert!((p.prob(tag) - freq).abs() < 1e-6);
            }
        }
    }
}
