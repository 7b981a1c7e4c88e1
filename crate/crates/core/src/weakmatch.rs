//! Weakly supervised skill extraction against taxonomy skill embeddings.
//!
//! Each sentence is split into n-gram candidates; a candidate's score is its
//! best cosine similarity to any skill representation, and the single best
//! candidate above the threshold is labeled as a span.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{tags_from_spans, Span, Tag, TaggedCorpus};
use crate::error::{Error, Result};

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("cosine of a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Token occurrence counts for idf weights `−ln(n_t / N)`.
///
/// Tokens are keyed lowercased.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    total: usize,
    counts: HashMap<String, usize>,
    smooth_unseen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdfWeight {
    Seen(f64),
    /// Token absent from the table; weighted as if it occurred once.
    Smoothed(f64),
}

impl IdfWeight {
    pub fn value(self) -> f64 {
        match self {
            IdfWeight::Seen(v) | IdfWeight::Smoothed(v) => v,
        }
    }
}

impl IdfTable {
    pub fn from_corpus(corpus: &TaggedCorpus) -> Result<Self> {
        IdfTable::from_tokens(
            corpus
                .sentences
                .iter()
                .flat_map(|s| s.tokens().iter().map(String::as_str)),
        )
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut counts = HashMap::new();
        let mut total = 0;
        for token in tokens {
            *counts.entry(token.to_lowercase()).or_insert(0) += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::Empty("idf corpus"));
        }
        Ok(IdfTable {
            total,
            counts,
            smooth_unseen: true,
        })
    }

    /// Makes lookups of unseen tokens fail instead of smoothing them.
    pub fn strict(mut self) -> Self {
        self.smooth_unseen = false;
        self
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn count(&self, token: &str) -> usize {
        self.counts.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn weight(&self, token: &str) -> Result<IdfWeight> {
        let n = self.total as f64;
        match self.count(token) {
            0 if self.smooth_unseen => Ok(IdfWeight::Smoothed(-(1.0 / n).ln())),
            0 => Err(Error::UnseenToken(token.to_string())),
            c => Ok(IdfWeight::Seen(-(c as f64 / n).ln())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RepresentationMethod {
    /// Phrase encoded without context.
    Iso,
    /// Mean over the phrase's in-context occurrence embeddings.
    Aoc,
    /// Idf-weighted sum of the phrase's token embeddings.
    Wse,
}

impl FromStr for RepresentationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iso" => Ok(RepresentationMethod::Iso),
            "aoc" => Ok(RepresentationMethod::Aoc),
            "wse" => Ok(RepresentationMethod::Wse),
            other => Err(Error::param(format!("unknown representation method {other:?}"))),
        }
    }
}

impl fmt::Display for RepresentationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepresentationMethod::Iso => "iso",
            RepresentationMethod::Aoc => "aoc",
            RepresentationMethod::Wse => "wse",
        })
    }
}

pub enum RepresentationInput<'a> {
    Isolated(Vec<f64>),
    Contexts(Vec<Vec<f64>>),
    Weighted {
        tokens: Vec<(String, Vec<f64>)>,
        idf: &'a IdfTable,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillRepresentation {
    pub id: String,
    pub method: RepresentationMethod,
    vector: Vec<f64>,
    /// Tokens whose idf came from the unseen-token smoothing rule.
    pub smoothed_tokens: usize,
}

impl SkillRepresentation {
    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    fn checked(id: String, method: RepresentationMethod, vector: Vec<f64>, smoothed: usize) -> Result<Self> {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::param(format!("skill {id} has a non-finite vector")));
        }
        if norm(&vector) == 0.0 {
            return Err(Error::ZeroVector(format!("skill {id}")));
        }
        Ok(SkillRepresentation {
            id,
            method,
            vector,
            smoothed_tokens: smoothed,
        })
    }
}

pub fn represent(id: impl Into<String>, input: RepresentationInput<'_>) -> Result<SkillRepresentation> {
    let id = id.into();
    match input {
        RepresentationInput::Isolated(v) => {
            SkillRepresentation::checked(id, RepresentationMethod::Iso, v, 0)
        }
        RepresentationInput::Contexts(occurrences) => {
            let first = occurrences
                .first()
                .ok_or(Error::Empty("occurrence vectors"))?;
            let mut mean = vec![0.0; first.len()];
            for occ in &occurrences {
                check_width(first.len(), occ.len())?;
                for (m, v) in mean.iter_mut().zip(occ) {
                    *m += v;
                }
            }
            let n = occurrences.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            SkillRepresentation::checked(id, RepresentationMethod::Aoc, mean, 0)
        }
        RepresentationInput::Weighted { tokens, idf } => {
            let (_, first) = tokens.first().ok_or(Error::Empty("weighted tokens"))?;
            let mut sum = vec![0.0; first.len()];
            let mut smoothed = 0;
            for (token, v) in &tokens {
                check_width(first.len(), v.len())?;
                let w = idf.weight(token)?;
                if matches!(w, IdfWeight::Smoothed(_)) {
                    smoothed += 1;
                }
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += w.value() * x;
                }
            }
            SkillRepresentation::checked(id, RepresentationMethod::Wse, sum, smoothed)
        }
    }
}

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            min_n: 1,
            max_n: 4,
            threshold: 0.8,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(Error::param(format!(
                "invalid n-gram range [{}, {}]",
                self.min_n, self.max_n
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::param(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// All contiguous spans of `min_n..=max_n` tokens, ordered by start then length.
pub fn generate_ngrams(len: usize, min_n: usize, max_n: usize) -> Vec<Span> {
    let mut out = Vec::new();
    for start in 0..len {
        for n in min_n.max(1)..=max_n {
            let end = start + n - 1;
            if end >= len {
                break;
            }
            out.push(Span::new(start, end));
        }
    }
    out
}

/// Mean of the token vectors covered by `span`.
pub fn mean_pool<R: AsRef<[f64]>>(tokens: &[R], span: Span) -> Vec<f64> {
    let rows = &tokens[span.start..=span.end];
    let mut out = vec![0.0; rows[0].as_ref().len()];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row.as_ref()) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatch {
    pub tags: Vec<Tag>,
    /// Winning candidate, its score, and the index of the closest skill.
    pub best: Option<(Span, f64, usize)>,
}

/// Labels the highest-scoring candidate if its score exceeds the threshold.
///
/// Equal scores resolve to the leftmost candidate, then the longest.
/// Zero candidate vectors score as no match.
pub fn match_sentence(
    len: usize,
    candidates: &[(Span, Vec<f64>)],
    skills: &[SkillRepresentation],
    cfg: &MatchConfig,
) -> Result<SentenceMatch> {
    if skills.is_empty() {
        return Err(Error::Empty("skill representations"));
    }
    cfg.validate()?;
    let mut best: Option<(Span, f64, usize)> = None;
    for (span, vector) in candidates {
        if span.end >= len {
            return Err(Error::param(format!("candidate {span:?} beyond sentence length {len}")));
        }
        if norm(vector) == 0.0 {
            continue;
        }
        let mut top: Option<(f64, usize)> = None;
        for (si, skill) in skills.iter().enumerate() {
            let score = cosine(vector, skill.vector())?;
            if top.is_none_or(|(s, _)| score > s) {
                top = Some((score, si));
            }
        }
        let (score, si) = top.expect("skills are nonempty");
        let better = match best {
            None => true,
            Some((b_span, b_score, _)) => {
                score > b_score
                    || (score == b_score
                        && (span.start < b_span.start
                            || (span.start == b_span.start && span.len() > b_span.len())))
            }
        };
        if better {
            best = Some((*span, score, si));
        }
    }
    let best = best.filter(|&(_, score, _)| score > cfg.threshold);
    let spans: Vec<Span> = best.iter().map(|b| b.0).collect();
    Ok(SentenceMatch {
        tags: tags_from_spans(len, &spans),
        best,
    })
}

/// Runs candidate generation, mean pooling and matching over every sentence
/// of `corpus`, with one `f32` token vector per row of `token_vectors`.
pub fn match_corpus(
    corpus: &TaggedCorpus,
    token_vectors: &crate::embedio::EmbeddingMatrix,
    skills: &[SkillRepresentation],
    cfg: &MatchConfig,
) -> Result<(TaggedCorpus, Vec<SentenceMatch>)> {
    use rayon::prelude::*;

    let aligned = crate::embedio::align(corpus, token_vectors, None)?;
    let ranges = aligned.row_ranges();
    let matches = corpus
        .sentences
        .par_iter()
        .zip(ranges.into_par_iter())
        .map(|(sentence, rows)| {
            let vectors: Vec<Vec<f64>> = rows
                .map(|r| token_vectors.row(r).iter().map(|&v| v as f64).collect())
                .collect();
            let candidates: Vec<(Span, Vec<f64>)> = generate_ngrams(sentence.len(), cfg.min_n, cfg.max_n)
                .into_iter()
                .map(|span| (span, mean_pool(&vectors, span)))
                .collect();
            match_sentence(sentence.len(), &candidates, skills, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let sentences = corpus
        .sentences
        .iter()
        .zip(&matches)
        .map(|(s, m)| s.with_tags(m.tags.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((TaggedCorpus::new(corpus.name.clone(), sentences), matches))
}

/// Edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Closest title to `query`; an exact hit returns immediately and ties keep
/// the first candidate.
pub fn levenshtein_best_match<'a, S: AsRef<str>>(query: &str, candidates: &'a [S]) -> Result<(&'a str, usize)> {
    let mut best: Option<(&'a str, usize)> = None;
    for candidate in candidates {
        let title = candidate.as_ref();
        let d = levenshtein(title, query);
        if d == 0 {
            return Ok((title, 0));
        }
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((title, d));
        }
    }
    best.ok_or(Error::Empty("candidate titles"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillRecord {
    pub id: String,
    pub title: String,
}

/// One `id<TAB>title` record per line; blank lines are skipped.
pub fn parse_inventory(text: &str) -> Result<Vec<SkillRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let (id, title) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected skill id and title separated by a tab".into(),
            })?;
            Ok(SkillRecord {
                id: id.trim().to_string(),
                title: title.trim().to_string(),
            })
        })
        .collect()
}

pub fn load_inventory(path: impl AsRef<Path>) -> Result<Vec<SkillRecord>> {
    parse_inventory(&std::fs::read_to_string(path)?)
}

/// One row label of a representation file: the skill id and, for weighted
/// sums, the token the row embeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLabel {
    pub id: String,
    pub token: Option<String>,
}

/// Sidecar list with one `id` or `id<TAB>token` line per matrix row.
pub fn parse_row_labels(text: &str) -> Result<Vec<RowLabel>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or("").trim();
            if id.is_empty() {
                return Err(Error::Parse { line: i + 1, message: "empty skill id".into() });
            }
            let token = fields.next().map(|t| t.trim().to_string()).filter(|t| !t.is_empty());
            if fields.next().is_some() {
                return Err(Error::Parse { line: i + 1, message: "expected at most two fields".into() });
            }
            Ok(RowLabel { id: id.to_string(), token })
        })
        .collect()
}

pub fn load_row_labels(path: impl AsRef<Path>) -> Result<Vec<RowLabel>> {
    parse_row_labels(&std::fs::read_to_string(path)?)
}

/// Builds one representation per distinct id, in order of first appearance.
///
/// Iso expects each id on exactly one row. Aoc averages all rows of an id.
/// Wse needs a token on every row and sums the rows weighted by `idf`.
pub fn build_representations(
    method: RepresentationMethod,
    vectors: &crate::embedio::EmbeddingMatrix,
    labels: &[RowLabel],
    idf: Option<&IdfTable>,
) -> Result<Vec<SkillRepresentation>> {
    if labels.len() != vectors.rows() {
        return Err(Error::Alignment {
            what: "representation rows",
            expected: labels.len(),
            found: vectors.rows(),
        });
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (row, label) in labels.iter().enumerate() {
        let rows = groups.entry(label.id.as_str()).or_insert_with(|| {
            order.push(label.id.as_str());
            Vec::new()
        });
        rows.push(row);
    }
    let widen = |row: usize| -> Vec<f64> { vectors.row(row).iter().map(|&v| v as f64).collect() };
    order
        .into_iter()
        .map(|id| {
            let rows = &groups[id];
            let input = match method {
                RepresentationMethod::Iso => {
                    if rows.len() != 1 {
                        return Err(Error::param(format!("skill {id} has {} rows; iso expects one", rows.len())));
                    }
                    RepresentationInput::Isolated(widen(rows[0]))
                }
                RepresentationMethod::Aoc => RepresentationInput::Contexts(rows.iter().map(|&r| widen(r)).collect()),
                RepresentationMethod::Wse => {
                    let idf = idf.ok_or_else(|| Error::param("wse needs an idf table"))?;
                    let tokens = rows
                        .iter()
                        .map(|&r| {
                            let token = labels[r].token.clone().ok_or_else(|| {
                                Error::param(format!("row {r} of skill {id} has no token"))
                            })?;
                            Ok((token, widen(r)))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    RepresentationInput::Weighted { tokens, idf }
                }
            };
            represent(id, input)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iso(id: &str, v: &[f64]) -> SkillRepresentation {
        represent(id, RepresentationInput::Isolated(v.to_vec())).unwrap()
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroVector(_))));
        assert!(cosine(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn idf_values() {
        let tokens: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let idf = IdfTable::from_tokens(tokens.iter().map(String::as_str)).unwrap();
        assert!((idf.weight("t5").unwrap().value() - 4.60517).abs() < 1e-5);
        let unseen = idf.weight("unknown").unwrap();
        assert!(matches!(unseen, IdfWeight::Smoothed(_)));
        assert!((unseen.value() - 4.60517).abs() < 1e-5);
        assert!(matches!(idf.clone().strict().weight("unknown"), Err(Error::UnseenToken(_))));

        let same = IdfTable::from_tokens(["a", "A", "a"]).unwrap();
        assert_eq!(same.weight("a").unwrap().value(), 0.0);
        assert!(IdfTable::from_tokens(std::iter::empty()).is_err());
    }

    #[test]
    fn representations() {
        assert_eq!(iso("s", &[1.0, -2.0]).vector(), &[1.0, -2.0]);
        let aoc = represent("s", RepresentationInput::Contexts(vec![vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert_eq!(aoc.vector(), &[0.5, 0.5]);
        assert!(represent("s", RepresentationInput::Contexts(vec![])).is_err());
        assert!(represent("s", RepresentationInput::Isolated(vec![0.0, 0.0])).is_err());

        // Every token weight is zero when the only token fills the corpus.
        let idf = IdfTable::from_tokens(["python", "python"]).unwrap();
        let zero = represent(
            "s",
            RepresentationInput::Weighted { tokens: vec![("python".into(), vec![1.0, 2.0])], idf: &idf },
        );
        assert!(matches!(zero, Err(Error::ZeroVector(_))));
    }

    #[test]
    fn uniform_idf_wse_has_unweighted_cosine() {
        let idf = IdfTable::from_tokens(["manage", "a", "team", "x"]).unwrap();
        let tokens = vec![
            ("manage".to_string(), vec![0.3, -1.2, 2.0]),
            ("a".to_string(), vec![1.0, 0.5, 0.0]),
            ("team".to_string(), vec![-0.7, 0.1, 0.9]),
        ];
        let wse = represent("s", RepresentationInput::Weighted { tokens: tokens.clone(), idf: &idf }).unwrap();
        let c = 4f64.ln();
        let plain: Vec<f64> = (0..3).map(|j| tokens.iter().map(|t| t.1[j]).sum()).collect();
        for (w, p) in wse.vector().iter().zip(&plain) {
            assert!((w - c * p).abs() < 1e-12);
        }
        let target = [0.2, 0.9, -0.4];
        let a = cosine(wse.vector(), &target).unwrap();
        let b = cosine(&plain, &target).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ngram_counts() {
        assert_eq!(generate_ngrams(5, 1, 4).len(), 14);
        assert_eq!(generate_ngrams(1, 1, 4), vec![Span::new(0, 0)]);
        assert_eq!(generate_ngrams(3, 1, 4).len(), 6);
        assert!(generate_ngrams(0, 1, 4).is_empty());
        assert_eq!(
            generate_ngrams(3, 1, 2),
            vec![Span::new(0, 0), Span::new(0, 1), Span::new(1, 1), Span::new(1, 2), Span::new(2, 2)]
        );
    }

    #[test]
    fn exact_skill_vector_is_labeled() {
        let skills = vec![iso("teamwork", &[1.0, 0.0, 0.0]), iso("python", &[0.0, 1.0, 0.0])];
        let candidates = vec![
            (Span::new(0, 0), vec![0.1, 0.1, 1.0]),
            (Span::new(1, 2), vec![0.0, 1.0, 0.0]),
        ];
        let m = match_sentence(4, &candidates, &skills, &MatchConfig::default()).unwrap();
        assert_eq!(m.tags, vec![Tag::O, Tag::B, Tag::I, Tag::O]);
        assert_eq!(m.best.unwrap().2, 1);
    }

    #[test]
    fn threshold_one_labels_nothing() {
        let skills = vec![iso("s", &[1.0, 0.0])];
        let candidates = vec![(Span::new(0, 0), vec![1.0, 0.1]), (Span::new(1, 1), vec![0.5, 0.5])];
        let cfg = MatchConfig { threshold: 1.0, ..MatchConfig::default() };
        let m = match_sentence(2, &candidates, &skills, &cfg).unwrap();
        assert_eq!(m.tags, vec![Tag::O, Tag::O]);
        assert!(m.best.is_none());
    }

    #[test]
    fn higher_score_wins_then_leftmost_then_longest() {
        let skills = vec![iso("s", &[1.0, 0.0])];
        let v = |score: f64| vec![score, (1.0 - score * score).sqrt()];
        let candidates = vec![(Span::new(0, 0), v(0.90)), (Span::new(2, 3), v(0.95))];
        let m = match_sentence(4, &candidates, &skills, &MatchConfig::default()).unwrap();
        assert_eq!(m.best.unwrap().0, Span::new(2, 3));

        let tied = vec![
            (Span::new(1, 1), vec![1.0, 0.0]),
            (Span::new(0, 0), vec![2.0, 0.0]),
            (Span::new(0, 1), vec![3.0, 0.0]),
        ];
        let m = match_sentence(3, &tied, &skills, &MatchConfig::default()).unwrap();
        assert_eq!(m.best.unwrap().0, Span::new(0, 1));
        assert!(match_sentence(3, &tied, &[], &MatchConfig::default()).is_err());
    }

    #[test]
    fn levenshtein_matching() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        let titles = ["manage staff", "python", "pythons"];
        assert_eq!(levenshtein_best_match("python", &titles).unwrap(), ("python", 0));
        assert_eq!(levenshtein_best_match("abc", &["abd", "xyz"]).unwrap(), ("abd", 1));
        assert_eq!(levenshtein_best_match("abc", &["abd", "abe"]).unwrap(), ("abd", 1));
        assert!(levenshtein_best_match::<&str>("abc", &[]).is_err());
    }

    #[test]
    fn inventory_parsing() {
        let inv = parse_inventory("s1\tmanage a team\n\ns2\tPython (computer programming)\n").unwrap();
        assert_eq!(inv.len(), 2);
        assert_eq!(inv[1].title, "Python (computer programming)");
        assert!(matches!(parse_inventory("s1 no tab\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn representations_from_rows() {
        let m = crate::embedio::EmbeddingMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0]).unwrap();
        let labels = parse_row_labels("a\tteam\na\twork\nb\tpython\n").unwrap();
        let aoc = build_representations(RepresentationMethod::Aoc, &m, &labels, None).unwrap();
        assert_eq!(aoc.len(), 2);
        assert_eq!(aoc[0].id, "a");
        assert_eq!(aoc[0].vector(), &[0.5, 0.5]);
        assert!(build_representations(RepresentationMethod::Iso, &m, &labels, None).is_err());
        assert!(build_representations(RepresentationMethod::Wse, &m, &labels, None).is_err());

        let idf = IdfTable::from_tokens(["team", "work", "x", "x"]).unwrap();
        let wse = build_representations(RepresentationMethod::Wse, &m, &labels, Some(&idf)).unwrap();
        assert_eq!(wse[1].smoothed_tokens, 1);
        let w = 4f64.ln();
        assert!((wse[0].vector()[0] - w).abs() < 1e-12);

        let short = parse_row_labels("a\n").unwrap();
        assert!(matches!(
            build_representations(RepresentationMethod::Aoc, &m, &short, None),
            Err(Error::Alignment { .. })
        ));
        assert!(parse_row_labels("a\tb\tc\n").is_err());
    }

    /// Textbook full-matrix edit distance, kept separate from the two-row version.
    fn edit_distance_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in dp.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in dp[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                dp[i][j] = (dp[i - 1][j] + 1).min(dp[i][j - 1] + 1).min(dp[i - 1][j - 1] + cost);
            }
        }
        dp[a.len()][b.len()]
    }

    proptest! {
        #[test]
        fn levenshtein_matches_oracle(a in "[a-d]{0,8}", b in "[a-d]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), edit_distance_oracle(&a, &b));
        }

        #[test]
        fn cosine_is_scale_invariant(
            v in prop::collection::vec(-10.0f64..10.0, 4),
            w in prop::collection::vec(-10.0f64..10.0, 4),
            a in 0.01f64..100.0,
        ) {
            prop_assume!(norm(&v) > 1e-3 && norm(&w) > 1e-3);
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            prop_assert!((cosine(&scaled, &w).unwrap() - cosine(&v, &w).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn ngram_count_formula(len in 0usize..40, lo in 1usize..6, extra in 0usize..6) {
            let hi = lo + extra;
            let expected: usize = (lo..=hi).map(|n| (len + 1).saturating_sub(n)).sum();
            prop_assert_eq!(generate_ngrams(len, lo, hi).len(), expected);
        }

        #[test]
        fn lower_threshold_never_loses_spans(
            sentences in prop::collection::vec(prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..6), 1..8),
            t_low in 0.0f64..1.0,
            gap in 0.0f64..0.5,
        ) {
            let skills = vec![iso("a", &[1.0, 0.2, 0.0]), iso("b", &[-0.3, 1.0, 0.5])];
            let t_high = (t_low + gap).min(1.0);
            let count = |tau: f64| {
                let cfg = MatchConfig { threshold: tau, ..MatchConfig::default() };
                sentences
                    .iter()
                    .filter(|tokens| {
                        let cands: Vec<(Span, Vec<f64>)> = generate_ngrams(tokens.len(), 1, 4)
                            .into_iter()
                            .map(|s| (s, mean_pool(tokens, s)))
                            .collect();
                        let m = match_sentence(tokens.len(), &cands, &skills, &cfg).unwrap();
                        let spans = crate::corpus::extract_spans(&m.tags);
                        assert!(spans.len() <= 1);
                        assert_eq!(crate::corpus::tags_from_spans(tokens.len(), &spans), m.tags);
                        m.best.is_some()
                    })
                    .count()
            };
            prop_assert!(count(t_low) >= count(t_high));
        }
    }
}
