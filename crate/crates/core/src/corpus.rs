//! CoNLL-style BIO corpora: parsing, span extraction, surface statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Generic BIO tag. Typed tags such as `B-Skill` are collapsed on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Tag {
    B,
    I,
    O,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::B, Tag::I, Tag::O];

    /// Parses `B`, `I`, `O`, or a typed variant such as `I-Knowledge`.
    pub fn parse(raw: &str) -> Option<Tag> {
        let (prefix, rest) = match raw.char_indices().nth(1) {
            Some((idx, _)) => raw.split_at(idx),
            None => (raw, ""),
        };
        let tag = match prefix {
            "B" => Tag::B,
            "I" => Tag::I,
            "O" => Tag::O,
            _ => return None,
        };
        match (tag, rest) {
            (_, "") => Some(tag),
            (Tag::O, _) => None,
            (_, suffix) if suffix.len() > 1 && (suffix.starts_with('-') || suffix.starts_with('_')) => {
                Some(tag)
            }
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Tag::B => 0,
            Tag::I => 1,
            Tag::O => 2,
        }
    }

    pub fn from_index(idx: usize) -> Option<Tag> {
        Tag::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::O => "O",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive token range `[start, end]` within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Spans of one sentence, sorted by start and non-overlapping.
pub type SpanSet = Vec<Span>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
    tags: Vec<Tag>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::param(format!(
                "sentence has {} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        if tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Ok(Sentence { tokens, tags })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Same tokens, different tags.
    pub fn with_tags(&self, tags: Vec<Tag>) -> Result<Self> {
        Sentence::new(self.tokens.clone(), tags)
    }

    pub fn spans(&self) -> SpanSet {
        extract_spans(&self.tags)
    }

    /// Normalized surface text of `span`: tokens lowercased and joined by single spaces.
    pub fn surface(&self, span: Span) -> String {
        surface_text(&self.tokens[span.start..=span.end])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaggedCorpus {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl TaggedCorpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        TaggedCorpus {
            name: name.into(),
            sentences,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn spans(&self) -> Vec<SpanSet> {
        self.sentences.iter().map(Sentence::spans).collect()
    }

    pub fn tags(&self) -> impl Iterator<Item = Tag> + '_ {
        self.sentences.iter().flat_map(|s| s.tags.iter().copied())
    }

    pub fn load(path: impl AsRef<Path>, merge_nested: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        parse_conll(&text, name, merge_nested)
    }

    /// Single tag column, tab separated, blank line between sentences.
    pub fn to_conll(&self) -> String {
        let mut out = String::new();
        for (i, sentence) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for (token, tag) in sentence.tokens.iter().zip(&sentence.tags) {
                out.push_str(token);
                out.push('\t');
                out.push_str(tag.as_str());
                out.push('\n');
            }
        }
        out
    }
}

/// Raw rows of one sentence with every tag column kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSentence {
    pub tokens: Vec<String>,
    pub columns: Vec<Vec<Tag>>,
}

/// Splits token-per-line text into sentences, keeping one vector per tag column.
///
/// Every non-blank line must carry the same number of tag columns (1 or 2).
pub fn parse_columns(text: &str) -> Result<Vec<ColumnSentence>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut sentences = Vec::new();
    let mut n_cols: Option<usize> = None;
    let mut current: Option<ColumnSentence> = None;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            if let Some(s) = current.take() {
                sentences.push(s);
            }
            continue;
        }
        let tag_cols = fields.len() - 1;
        if !(1..=2).contains(&tag_cols) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 or 3 columns, found {}", fields.len()),
            });
        }
        match n_cols {
            None => n_cols = Some(tag_cols),
            Some(n) if n != tag_cols => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} columns, found {}", n + 1, fields.len()),
                })
            }
            Some(_) => {}
        }
        let sentence = current.get_or_insert_with(|| ColumnSentence {
            tokens: Vec::new(),
            columns: vec![Vec::new(); tag_cols],
        });
        sentence.tokens.push(fields[0].to_string());
        for (col, raw) in fields[1..].iter().enumerate() {
            let tag = Tag::parse(raw).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("unknown tag {raw:?}"),
            })?;
            sentence.columns[col].push(tag);
        }
    }
    if let Some(s) = current.take() {
        sentences.push(s);
    }
    Ok(sentences)
}

/// Parses a CoNLL corpus with generic BIO tags.
///
/// With two tag columns (skills, knowledge) and `merge_nested` set, the skills
/// tag is kept wherever it is not `O` and the knowledge tag fills the rest.
/// Without `merge_nested` only the first column is read.
pub fn parse_conll(text: &str, name: impl Into<String>, merge_nested: bool) -> Result<TaggedCorpus> {
    let sentences = parse_columns(text)?
        .into_iter()
        .map(|raw| {
            let tags = if raw.columns.len() == 2 && merge_nested {
                raw.columns[0]
                    .iter()
                    .zip(&raw.columns[1])
                    .map(|(&skill, &knowledge)| if skill != Tag::O { skill } else { knowledge })
                    .collect()
            } else {
                raw.columns.into_iter().next().unwrap_or_default()
            };
            Sentence::new(raw.tokens, tags)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TaggedCorpus::new(name, sentences))
}

/// Reads a `token gold pred` file into a gold and a predicted corpus.
pub fn parse_gold_pred(text: &str, name: &str) -> Result<(TaggedCorpus, TaggedCorpus)> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for raw in parse_columns(text)? {
        if raw.columns.len() != 2 {
            return Err(Error::Format(
                "prediction file needs gold and predicted tag columns".into(),
            ));
        }
        let mut cols = raw.columns.into_iter();
        let g = cols.next().unwrap_or_default();
        let p = cols.next().unwrap_or_default();
        gold.push(Sentence::new(raw.tokens.clone(), g)?);
        pred.push(Sentence::new(raw.tokens, p)?);
    }
    Ok((TaggedCorpus::new(name, gold), TaggedCorpus::new(name, pred)))
}

/// Writes `token gold pred` rows. Both corpora must cover the same tokens.
pub fn gold_pred_conll(gold: &TaggedCorpus, pred: &TaggedCorpus) -> Result<String> {
    if gold.sentences.len() != pred.sentences.len() {
        return Err(Error::Alignment {
            what: "predicted sentences",
            expected: gold.sentences.len(),
            found: pred.sentences.len(),
        });
    }
    let mut out = String::new();
    for (i, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Alignment {
                what: "predicted tokens",
                expected: g.len(),
                found: p.len(),
            });
        }
        if i > 0 {
            out.push('\n');
        }
        for ((token, gt), pt) in g.tokens.iter().zip(&g.tags).zip(&p.tags) {
            out.push_str(&format!("{token}\t{gt}\t{pt}\n"));
        }
    }
    Ok(out)
}

/// Decodes BIO tags into maximal spans. A stray `I` (after `O` or at the
/// start) opens a new span.
pub fn extract_spans(tags: &[Tag]) -> SpanSet {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => {
                if let Some(start) = open {
                    spans.push(Span::new(start, i - 1));
                }
                open = Some(i);
            }
            Tag::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            Tag::O => {
                if let Some(start) = open.take() {
                    spans.push(Span::new(start, i - 1));
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(Span::new(start, tags.len() - 1));
    }
    spans
}

/// Canonical BIO encoding of `spans` over a sentence of `len` tokens.
pub fn tags_from_spans(len: usize, spans: &[Span]) -> Vec<Tag> {
    let mut tags = vec![Tag::O; len];
    for span in spans {
        tags[span.start] = Tag::B;
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = Tag::I;
        }
    }
    tags
}

/// Applies the stray-`I` repair so that tags round-trip through spans.
pub fn repair(tags: &[Tag]) -> Vec<Tag> {
    tags_from_spans(tags.len(), &extract_spans(tags))
}

pub fn surface_text<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .flat_map(|t| t.as_ref().split_whitespace())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Counts of normalized span surface texts in a training corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanFrequencyIndex {
    counts: BTreeMap<String, usize>,
}

impl SpanFrequencyIndex {
    pub fn count(&self, surface: &str) -> usize {
        self.counts.get(surface).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

pub fn span_frequency_index(train: &TaggedCorpus) -> SpanFrequencyIndex {
    let mut counts = BTreeMap::new();
    for sentence in &train.sentences {
        for span in sentence.spans() {
            *counts.entry(sentence.surface(span)).or_insert(0) += 1;
        }
    }
    SpanFrequencyIndex { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Bucket {
    Low,
    MidLow,
    MidHigh,
    High,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::Low, Bucket::MidLow, Bucket::MidHigh, Bucket::High];

    pub fn label(self) -> &'static str {
        match self {
            Bucket::Low => "low",
            Bucket::MidLow => "mid-low",
            Bucket::MidHigh => "mid-high",
            Bucket::High => "high",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Four half-open count ranges `[0, a) [a, b) [b, c) [c, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyBuckets {
    lower: [usize; 3],
}

impl Default for FrequencyBuckets {
    /// low 0 to 3, mid-low 4 to 6, mid-high 7 to 10, high 11 and up.
    fn default() -> Self {
        FrequencyBuckets { lower: [4, 7, 11] }
    }
}

impl FrequencyBuckets {
    /// `lower` holds the first count of mid-low, mid-high and high.
    pub fn new(lower: [usize; 3]) -> Result<Self> {
        if lower[0] == 0 || lower[0] >= lower[1] || lower[1] >= lower[2] {
            return Err(Error::param(format!(
                "bucket edges must be strictly increasing and positive: {lower:?}"
            )));
        }
        Ok(FrequencyBuckets { lower })
    }

    pub fn bucket_of(&self, count: usize) -> Bucket {
        match count {
            c if c < self.lower[0] => Bucket::Low,
            c if c < self.lower[1] => Bucket::MidLow,
            c if c < self.lower[2] => Bucket::MidHigh,
            _ => Bucket::High,
        }
    }

    /// Inclusive count range of `bucket`; `None` upper bound means open-ended.
    pub fn range(&self, bucket: Bucket) -> (usize, Option<usize>) {
        match bucket {
            Bucket::Low => (0, Some(self.lower[0] - 1)),
            Bucket::MidLow => (self.lower[0], Some(self.lower[1] - 1)),
            Bucket::MidHigh => (self.lower[1], Some(self.lower[2] - 1)),
            Bucket::High => (self.lower[2], None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JaccardResult {
    pub intersection: usize,
    pub union: usize,
    pub coefficient: f64,
    /// Set when both inputs were empty and the coefficient was defined as 1.
    pub both_empty: bool,
}

pub fn jaccard_overlap(a: &HashSet<String>, b: &HashSet<String>) -> JaccardResult {
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    if union == 0 {
        return JaccardResult {
            intersection: 0,
            union: 0,
            coefficient: 1.0,
            both_empty: true,
        };
    }
    JaccardResult {
        intersection,
        union,
        coefficient: intersection as f64 / union as f64,
        both_empty: false,
    }
}

/// Unique normalized surface texts of spans with at least `min_tokens` tokens.
pub fn span_text_set(corpus: &TaggedCorpus, min_tokens: usize) -> HashSet<String> {
    corpus
        .sentences
        .iter()
        .flat_map(|s| {
            s.spans()
                .into_iter()
                .filter(|span| span.len() >= min_tokens)
                .map(move |span| s.surface(span))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub spans: usize,
    pub mean_span_length: f64,
}

pub fn corpus_stats(corpus: &TaggedCorpus) -> CorpusStats {
    let mut spans = 0;
    let mut span_tokens = 0;
    for sentence in &corpus.sentences {
        for span in sentence.spans() {
            spans += 1;
            span_tokens += span.len();
        }
    }
    CorpusStats {
        sentences: corpus.sentences.len(),
        tokens: corpus.token_count(),
        spans,
        mean_span_length: if spans == 0 {
            0.0
        } else {
            span_tokens as f64 / spans as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<Tag> {
        s.split_whitespace().map(|t| Tag::parse(t).unwrap()).collect()
    }

    fn sentence(tokens: &str, t: &str) -> Sentence {
        Sentence::new(tokens.split_whitespace().map(String::from).collect(), tags(t)).unwrap()
    }

    #[test]
    fn parses_single_column_sentence() {
        let text = "ability O\nto O\nwork B\nunder I\nstress I\ncondition O\n";
        let corpus = parse_conll(text, "sayfullina", false).unwrap();
        assert_eq!(corpus.sentences.len(), 1);
        assert_eq!(corpus.sentences[0].spans(), vec![Span::new(2, 4)]);
    }

    #[test]
    fn empty_input_has_no_sentences() {
        let corpus = parse_conll("", "empty", false).unwrap();
        assert!(corpus.sentences.is_empty());
        let corpus = parse_conll("\n\n  \n", "blank", false).unwrap();
        assert!(corpus.sentences.is_empty());
    }

    #[test]
    fn merges_nested_columns_skills_first() {
        let text = "working\tB-Skill\tO\non\tI-Skill\tB-Knowledge\nDocker\tO\tB-Knowledge\n.\tO\tO\n";
        let corpus = parse_conll(text, "skillspan", true).unwrap();
        assert_eq!(corpus.sentences[0].tags(), &tags("B I B O")[..]);

        let first_only = parse_conll(text, "skillspan", false).unwrap();
        assert_eq!(first_only.sentences[0].tags(), &tags("B I O O")[..]);
    }

    #[test]
    fn strips_type_suffixes() {
        assert_eq!(Tag::parse("B-Skill"), Some(Tag::B));
        assert_eq!(Tag::parse("I_KNOWLEDGE"), Some(Tag::I));
        assert_eq!(Tag::parse("O"), Some(Tag::O));
        assert_eq!(Tag::parse("S-Skill"), None);
        assert_eq!(Tag::parse("Bx"), None);
        assert_eq!(Tag::parse("B-"), None);
        assert_eq!(Tag::parse("O-Skill"), None);
        assert_eq!(Tag::parse(""), None);
    }

    #[test]
    fn rejects_bad_lines_with_line_number() {
        let err = parse_conll("a O\nb O O O\n", "x", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_conll("a O\n\nb\n", "x", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_conll("a O\nb X\n", "x", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_conll("a O\nb O O\n", "x", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn span_extraction_cases() {
        assert_eq!(extract_spans(&tags("O O B I I O")), vec![Span::new(2, 4)]);
        assert!(extract_spans(&tags("O O O")).is_empty());
        assert_eq!(
            extract_spans(&tags("B I B")),
            vec![Span::new(0, 1), Span::new(2, 2)]
        );
        assert_eq!(
            extract_spans(&tags("O I I O I")),
            vec![Span::new(1, 2), Span::new(4, 4)]
        );
        assert_eq!(repair(&tags("O I I")), tags("O B I"));
    }

    #[test]
    fn frequency_index_counts_lowercased() {
        let mut sentences = Vec::new();
        for _ in 0..5 {
            sentences.push(sentence("good teamwork skills", "O B O"));
        }
        sentences.push(sentence("Manage a team", "B I I"));
        sentences.push(sentence("you manage  a TEAM", "O B I I"));
        let train = TaggedCorpus::new("toy", sentences);
        let index = span_frequency_index(&train);
        assert_eq!(index.count("teamwork"), 5);
        assert_eq!(index.count("manage a team"), 2);
        assert_eq!(index.count("python"), 0);
        assert_eq!(index.len(), 2);

        let buckets = FrequencyBuckets::default();
        assert_eq!(buckets.bucket_of(index.count("teamwork")), Bucket::MidLow);
        assert_eq!(buckets.bucket_of(index.count("python")), Bucket::Low);
    }

    #[test]
    fn default_bucket_edges() {
        let b = FrequencyBuckets::default();
        let expect = [
            (0, Bucket::Low),
            (3, Bucket::Low),
            (4, Bucket::MidLow),
            (6, Bucket::MidLow),
            (7, Bucket::MidHigh),
            (10, Bucket::MidHigh),
            (11, Bucket::High),
            (15, Bucket::High),
            (1000, Bucket::High),
        ];
        for (count, bucket) in expect {
            assert_eq!(b.bucket_of(count), bucket, "count {count}");
        }
        assert_eq!(b.range(Bucket::MidHigh), (7, Some(10)));
        assert_eq!(b.range(Bucket::High), (11, None));
        assert!(FrequencyBuckets::new([4, 4, 11]).is_err());
        assert!(FrequencyBuckets::new([0, 4, 11]).is_err());
    }

    #[test]
    fn jaccard_cases() {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<HashSet<_>>();
        let a = set(&["python", "teamwork"]);
        assert_eq!(jaccard_overlap(&a, &a).coefficient, 1.0);
        let b = set(&["java"]);
        assert_eq!(jaccard_overlap(&a, &b).coefficient, 0.0);
        let c = set(&["python", "java", "sql"]);
        let r = jaccard_overlap(&a, &c);
        assert_eq!((r.intersection, r.union), (1, 4));
        assert_eq!(r.coefficient, 0.25);
        let empty = HashSet::new();
        let r = jaccard_overlap(&empty, &empty);
        assert!(r.both_empty);
        assert_eq!(r.coefficient, 1.0);
    }

    #[test]
    fn stats_cases() {
        let empty = corpus_stats(&TaggedCorpus::default());
        assert_eq!(
            (empty.sentences, empty.tokens, empty.spans, empty.mean_span_length),
            (0, 0, 0, 0.0)
        );
        let corpus = TaggedCorpus::new(
            "fixture",
            vec![
                sentence("a b c d e", "B O O O O"),
                sentence("f g h i j", "O B I I O"),
            ],
        );
        let stats = corpus_stats(&corpus);
        assert_eq!((stats.sentences, stats.tokens, stats.spans), (2, 10, 2));
        assert_eq!(stats.mean_span_length, 2.0);
    }

    #[test]
    fn gold_pred_round_trip() {
        let gold = TaggedCorpus::new("g", vec![sentence("a b c", "B I O")]);
        let pred = TaggedCorpus::new("g", vec![sentence("a b c", "O B O")]);
        let text = gold_pred_conll(&gold, &pred).unwrap();
        assert_eq!(text, "a\tB\tO\nb\tI\tB\nc\tO\tO\n");
        let (g, p) = parse_gold_pred(&text, "g").unwrap();
        assert_eq!(g, gold);
        assert_eq!(p, pred);
    }

    fn arb_sentence() -> impl Strategy<Value = Sentence> {
        prop::collection::vec(("[a-zA-Z]{1,6}", 0usize..3), 1..12).prop_map(|rows| {
            let (tokens, tags): (Vec<_>, Vec<_>) = rows
                .into_iter()
                .map(|(t, i)| (t, Tag::from_index(i).unwrap()))
                .unzip();
            Sentence::new(tokens, tags).unwrap()
        })
    }

    proptest! {
        #[test]
        fn conll_round_trip(sentences in prop::collection::vec(arb_sentence(), 0..6)) {
            let corpus = TaggedCorpus::new("rt", sentences);
            let reparsed = parse_conll(&corpus.to_conll(), "rt", false).unwrap();
            prop_assert_eq!(reparsed, corpus);
        }

        #[test]
        fn spans_are_sorted_disjoint_and_idempotent(s in arb_sentence()) {
            let spans = s.spans();
            let covered: usize = spans.iter().map(Span::len).sum();
            prop_assert!(covered <= s.len());
            for pair in spans.windows(2) {
                prop_assert!(pair[0].end < pair[1].start);
            }
            for span in &spans {
                prop_assert!(span.start <= span.end && span.end < s.len());
            }
            let regenerated = tags_from_spans(s.len(), &spans);
            prop_assert_eq!(extract_spans(&regenerated), spans);
        }

        #[test]
        fn every_count_has_one_bucket(count in 0usize..10_000) {
            let b = FrequencyBuckets::default();
            let hits = Bucket::ALL
                .iter()
                .filter(|&&bucket| {
                    let (lo, hi) = b.range(bucket);
                    count >= lo && hi.is_none_or(|h| count <= h)
                })
                .count();
            prop_assert_eq!(hits, 1);
            let (lo, hi) = b.range(b.bucket_of(count));
            prop_assert!(count >= lo && hi.is_none_or(|h| count <= h));
        }
    }
}
