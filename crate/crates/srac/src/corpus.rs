//! Bag-of-words data model: vocabularies, observations, labeled corpora,
//! dataset splitting, and seeded synthetic-observation generators.
//!
//! ## Corpus file format
//!
//! UTF-8 text, one record per line:
//!
//! ```text
//! #vocab w0 w1 w2 w3        (optional header fixing the vocabulary order)
//! walk<TAB>w3 w1 w3
//! -<TAB>w0 w2               (`-` marks an unlabeled observation)
//! w0 w1                     (a line without a TAB is an unlabeled token list)
//! ```
//!
//! Without a header, tokens extend the vocabulary in first-seen order. With
//! a header, a token outside the declared vocabulary is an error. Word order
//! inside an observation is preserved: the left-to-right perplexity
//! estimator conditions on preceding positions.
//!
//! All fractional counts (split sizes, replacement counts) use round-half-up
//! on `rate * n`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::lda::TrainedTopicModel;
use crate::seeds;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: empty observation")]
    EmptyObservation { line: usize },
    #[error("line {line}: token '{token}' not in declared vocabulary")]
    UnknownToken { line: usize, token: String },
    #[error("duplicate token '{0}' in vocabulary")]
    DuplicateToken(String),
    #[error("vocabulary must contain at least one token")]
    EmptyVocabulary,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus has no labels; the split requires them")]
    MissingLabels,
    #[error("category '{name}' has {have} training instances but {need} folds are required")]
    InfeasibleSplit { name: String, have: usize, need: usize },
    #[error("category index {0} does not exist")]
    NoSuchCategory(usize),
    #[error("category '{0}' has no instances")]
    EmptyCategory(String),
    #[error("rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("donor distribution invalid: {0}")]
    BadDonor(String),
    #[error("models do not share a vocabulary (sizes {0} and {1})")]
    VocabularyMismatch(usize, usize),
    #[error("observation length must be at least 1")]
    EmptyLength,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Round-half-up of `x`, the rounding rule for every fractional count.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Ordered set of distinct tokens; word id `i` is the index of the token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary { words: Vec::new(), index: HashMap::new() };
        for w in words {
            v.push(w.into())?;
        }
        if v.words.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        Ok(v)
    }

    fn push(&mut self, word: String) -> Result<usize, CorpusError> {
        if self.index.contains_key(&word) {
            return Err(CorpusError::DuplicateToken(word));
        }
        let id = self.words.len();
        self.index.insert(word.clone(), id);
        self.words.push(word);
        Ok(id)
    }

    fn intern(&mut self, word: &str) -> usize {
        match self.index.get(word) {
            Some(&id) => id,
            None => self.push(word.to_string()).expect("absent token cannot collide"),
        }
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// FNV-1a fingerprint over the token list; order-sensitive.
    pub fn fingerprint(&self) -> u64 {
        seeds::fnv1a64(self.words.join("\n").as_bytes())
    }
}

/// One bag-of-words observation. Duplicates are allowed and position order
/// is meaningful.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub id: String,
    pub word_ids: Vec<usize>,
}

impl Observation {
    pub fn new(id: impl Into<String>, word_ids: Vec<usize>) -> Result<Self, CorpusError> {
        if word_ids.is_empty() {
            return Err(CorpusError::EmptyLength);
        }
        Ok(Observation { id: id.into(), word_ids })
    }

    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }
}

/// A set of observations over a shared vocabulary with optional per-record
/// category labels.
#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    pub vocabulary: Vocabulary,
    pub observations: Vec<Observation>,
    /// Per-observation category index into `category_names`; `None` when the
    /// record is unlabeled.
    pub labels: Vec<Option<usize>>,
    pub category_names: Vec<String>,
}

impl LabeledCorpus {
    pub fn new(
        vocabulary: Vocabulary,
        observations: Vec<Observation>,
        labels: Vec<Option<usize>>,
        category_names: Vec<String>,
    ) -> Result<Self, CorpusError> {
        if observations.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        assert_eq!(observations.len(), labels.len(), "labels must parallel observations");
        for obs in &observations {
            for &w in &obs.word_ids {
                assert!(w < vocabulary.len(), "word id {w} out of vocabulary");
            }
        }
        for l in labels.iter().flatten() {
            assert!(*l < category_names.len(), "label {l} out of category range");
        }
        Ok(LabeledCorpus { vocabulary, observations, labels, category_names })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn n_categories(&self) -> usize {
        self.category_names.len()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    /// Observation indices per category, in corpus order.
    pub fn by_category(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.category_names.len()];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                groups[*c].push(i);
            }
        }
        groups
    }

    /// Sub-corpus over the given observation indices. Vocabulary and
    /// category names (and therefore label indices) are preserved.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledCorpus, CorpusError> {
        let observations: Vec<_> = indices.iter().map(|&i| self.observations[i].clone()).collect();
        let labels: Vec<_> = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledCorpus::new(self.vocabulary.clone(), observations, labels, self.category_names.clone())
    }

    /// Empirical word distribution of the given observations (all when
    /// `indices` is `None`), normalized over the full vocabulary.
    pub fn empirical_distribution(&self, indices: Option<&[usize]>) -> Vec<f64> {
        let mut counts = vec![0.0f64; self.vocabulary.len()];
        let mut total = 0.0f64;
        let all: Vec<usize> = (0..self.len()).collect();
        for &i in indices.unwrap_or(&all) {
            for &w in &self.observations[i].word_ids {
                counts[w] += 1.0;
                total += 1.0;
            }
        }
        if total > 0.0 {
            for c in &mut counts {
                *c /= total;
            }
        }
        counts
    }

    /// Parses the corpus file format described in the module docs.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut vocab: Option<Vocabulary> = None;
        let mut fixed_vocab = false;
        let mut observations = Vec::new();
        let mut labels: Vec<Option<usize>> = Vec::new();
        let mut category_names: Vec<String> = Vec::new();
        let mut category_index: HashMap<String, usize> = HashMap::new();

        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() {
                continue;
            }
            if lineno == 1 && trimmed.starts_with("#vocab") {
                let tokens: Vec<&str> = trimmed["#vocab".len()..].split_whitespace().collect();
                if tokens.is_empty() {
                    return Err(CorpusError::Malformed {
                        line: lineno,
                        msg: "empty #vocab header".into(),
                    });
                }
                vocab = Some(Vocabulary::new(tokens)?);
                fixed_vocab = true;
                continue;
            }

            let (label_field, token_field) = match trimmed.split_once('\t') {
                Some((l, t)) => (Some(l.trim()), t),
                None => (None, trimmed),
            };

            let tokens: Vec<&str> = token_field.split_whitespace().collect();
            if tokens.is_empty() {
                return Err(CorpusError::EmptyObservation { line: lineno });
            }

            let label = match label_field {
                None | Some("-") => None,
                Some("") => {
                    return Err(CorpusError::Malformed {
                        line: lineno,
                        msg: "empty label field (use '-' for unlabeled)".into(),
                    })
                }
                Some(name) => Some(*category_index.entry(name.to_string()).or_insert_with(|| {
                    category_names.push(name.to_string());
                    category_names.len() - 1
                })),
            };

            let v = vocab.get_or_insert_with(|| Vocabulary {
                words: Vec::new(),
                index: HashMap::new(),
            });
            let mut word_ids = Vec::with_capacity(tokens.len());
            for tok in tokens {
                let id = if fixed_vocab {
                    v.id_of(tok).ok_or_else(|| CorpusError::UnknownToken {
                        line: lineno,
                        token: tok.to_string(),
                    })?
                } else {
                    v.intern(tok)
                };
                word_ids.push(id);
            }
            let id = format!("o{}", observations.len());
            observations.push(Observation { id, word_ids });
            labels.push(label);
        }

        let vocabulary = vocab.ok_or(CorpusError::EmptyCorpus)?;
        if vocabulary.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        LabeledCorpus::new(vocabulary, observations, labels, category_names)
    }

    /// Writes the corpus in the file format, always emitting the `#vocab`
    /// header so that vocabulary order round-trips exactly.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        writeln!(w, "#vocab {}", self.vocabulary.words().join(" "))?;
        for (obs, label) in self.observations.iter().zip(&self.labels) {
            let label = match label {
                Some(c) => self.category_names[*c].as_str(),
                None => "-",
            };
            let tokens: Vec<&str> = obs.word_ids.iter().map(|&i| self.vocabulary.word(i)).collect();
            writeln!(w, "{}\t{}", label, tokens.join(" "))?;
        }
        Ok(())
    }
}

/// Parameters shared by the split operations.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    /// Fraction of each category that goes to training, in (0, 1).
    pub train_fraction: f64,
    /// Cross-validation folds the training side must be able to support.
    pub folds: usize,
    /// Category whose every instance becomes the unknown testing set
    /// (non-exhaustive splits only).
    pub holdout_category: Option<usize>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, folds: usize, seed: u64) -> Self {
        assert!(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must be in (0,1)");
        assert!(folds >= 1, "folds must be at least 1");
        SplitSpec { train_fraction, folds, holdout_category: None, seed }
    }

    pub fn with_holdout(mut self, category: usize) -> Self {
        self.holdout_category = Some(category);
        self
    }
}

fn shuffled(mut items: Vec<usize>, rng: &mut seeds::SeededRng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
    items
}

fn require_labels(corpus: &LabeledCorpus) -> Result<(), CorpusError> {
    if !corpus.is_fully_labeled() || corpus.n_categories() == 0 {
        return Err(CorpusError::MissingLabels);
    }
    Ok(())
}

/// Per-category stratified train/test split at `train_fraction`.
///
/// Each category contributes exactly `round_half_up(fraction * n)` training
/// instances; the split errors when that count cannot support the requested
/// cross-validation folds.
pub fn split_exhaustive(
    corpus: &LabeledCorpus,
    spec: &SplitSpec,
) -> Result<(LabeledCorpus, LabeledCorpus), CorpusError> {
    require_labels(corpus)?;
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (c, members) in corpus.by_category().into_iter().enumerate() {
        if members.is_empty() {
            return Err(CorpusError::EmptyCategory(corpus.category_names[c].clone()));
        }
        let n_train = round_half_up(spec.train_fraction * members.len() as f64);
        if n_train < spec.folds {
            return Err(CorpusError::InfeasibleSplit {
                name: corpus.category_names[c].clone(),
                have: n_train,
                need: spec.folds,
            });
        }
        let mut rng = seeds::rng(seeds::derive(spec.seed, c as u64));
        let order = shuffled(members, &mut rng);
        train_idx.extend_from_slice(&order[..n_train]);
        test_idx.extend_from_slice(&order[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((corpus.subset(&train_idx)?, corpus.subset(&test_idx)?))
}

/// Non-exhaustive split: every instance of the holdout category becomes the
/// unknown testing set; a `1 - train_fraction` stratified sample of the
/// remaining categories becomes the known testing set; the rest trains.
pub fn split_nonexhaustive(
    corpus: &LabeledCorpus,
    spec: &SplitSpec,
) -> Result<(LabeledCorpus, LabeledCorpus, LabeledCorpus), CorpusError> {
    require_labels(corpus)?;
    let holdout = spec.holdout_category.ok_or(CorpusError::NoSuchCategory(usize::MAX))?;
    if holdout >= corpus.n_categories() {
        return Err(CorpusError::NoSuchCategory(holdout));
    }
    let groups = corpus.by_category();
    if groups[holdout].is_empty() {
        return Err(CorpusError::EmptyCategory(corpus.category_names[holdout].clone()));
    }

    let mut train_idx = Vec::new();
    let mut known_idx = Vec::new();
    let unknown_idx = groups[holdout].clone();
    for (c, members) in groups.into_iter().enumerate() {
        if c == holdout {
            continue;
        }
        if members.is_empty() {
            return Err(CorpusError::EmptyCategory(corpus.category_names[c].clone()));
        }
        let n_known = round_half_up((1.0 - spec.train_fraction) * members.len() as f64);
        let n_train = members.len() - n_known;
        if n_train < spec.folds {
            return Err(CorpusError::InfeasibleSplit {
                name: corpus.category_names[c].clone(),
                have: n_train,
                need: spec.folds,
            });
        }
        let mut rng = seeds::rng(seeds::derive(spec.seed, c as u64));
        let order = shuffled(members, &mut rng);
        known_idx.extend_from_slice(&order[..n_known]);
        train_idx.extend_from_slice(&order[n_known..]);
    }
    train_idx.sort_unstable();
    known_idx.sort_unstable();
    Ok((
        corpus.subset(&train_idx)?,
        corpus.subset(&known_idx)?,
        corpus.subset(&unknown_idx)?,
    ))
}

/// Draws one observation from the model's generative process:
/// `theta ~ Dir(alpha)`, then for each position `z ~ theta`, `w ~ phi_z`.
pub fn sample_observation(
    model: &TrainedTopicModel,
    length: usize,
    seed: u64,
) -> Result<Observation, CorpusError> {
    if length == 0 {
        return Err(CorpusError::EmptyLength);
    }
    let mut rng = seeds::rng(seed);
    let theta = crate::lda::sample_dirichlet(model.alpha(), &mut rng);
    let mut word_ids = Vec::with_capacity(length);
    for _ in 0..length {
        let z = crate::lda::sample_index(&theta, &mut rng);
        let w = crate::lda::sample_index(model.phi_row(z), &mut rng);
        word_ids.push(w);
    }
    Observation::new(format!("gen-{seed:016x}"), word_ids)
}

/// Resamples `round_half_up(rate * N)` uniformly chosen positions of `obs`
/// from the donor word distribution. Length and the remaining positions are
/// preserved.
pub fn replace_words(
    obs: &Observation,
    donor: &[f64],
    replacement_rate: f64,
    seed: u64,
) -> Result<Observation, CorpusError> {
    if !(0.0..=1.0).contains(&replacement_rate) {
        return Err(CorpusError::RateOutOfRange(replacement_rate));
    }
    validate_distribution(donor)?;
    let n = obs.len();
    let n_replace = round_half_up(replacement_rate * n as f64).min(n);
    let mut rng = seeds::rng(seed);
    let positions = {
        use rand::seq::index::sample;
        sample(&mut rng, n, n_replace).into_vec()
    };
    let mut word_ids = obs.word_ids.clone();
    for p in positions {
        word_ids[p] = crate::lda::sample_index(donor, &mut rng);
    }
    Observation::new(obs.id.clone(), word_ids)
}

/// Builds an observation whose words come from two generative processes:
/// `round_half_up(overlap_rate * N)` positions from `known`, the remainder
/// from `novel`, with positions shuffled deterministically.
pub fn synth_overlap_observation(
    known: &TrainedTopicModel,
    novel: &TrainedTopicModel,
    overlap_rate: f64,
    length: usize,
    seed: u64,
) -> Result<Observation, CorpusError> {
    if !(0.0..=1.0).contains(&overlap_rate) {
        return Err(CorpusError::RateOutOfRange(overlap_rate));
    }
    if known.vocab_size() != novel.vocab_size() {
        return Err(CorpusError::VocabularyMismatch(known.vocab_size(), novel.vocab_size()));
    }
    if length == 0 {
        return Err(CorpusError::EmptyLength);
    }
    let n_known = round_half_up(overlap_rate * length as f64).min(length);
    let known_part = if n_known > 0 {
        sample_observation(known, n_known, seeds::derive(seed, 0))?.word_ids
    } else {
        Vec::new()
    };
    let novel_part = if length - n_known > 0 {
        sample_observation(novel, length - n_known, seeds::derive(seed, 1))?.word_ids
    } else {
        Vec::new()
    };
    let mut word_ids: Vec<usize> = known_part.into_iter().chain(novel_part).collect();
    use rand::seq::SliceRandom;
    let mut rng = seeds::rng(seeds::derive(seed, 2));
    word_ids.shuffle(&mut rng);
    Observation::new(format!("mix-{seed:016x}"), word_ids)
}

fn validate_distribution(p: &[f64]) -> Result<(), CorpusError> {
    if p.is_empty() {
        return Err(CorpusError::BadDonor("empty distribution".into()));
    }
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(CorpusError::BadDonor("negative or non-finite entry".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(CorpusError::BadDonor(format!("sums to {sum}, expected 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::{Hyperparameters, TrainedTopicModel};

    fn parse_str(s: &str) -> Result<LabeledCorpus, CorpusError> {
        LabeledCorpus::parse(s.as_bytes())
    }

    fn single_topic_model(phi_row: Vec<f64>) -> TrainedTopicModel {
        let v = phi_row.len();
        let vocab = Vocabulary::new((0..v).map(|i| format!("w{i}"))).unwrap();
        let hyper = Hyperparameters::symmetric(1, 1.0, 0.01, v).unwrap();
        TrainedTopicModel::from_parts(hyper, vec![phi_row], vocab, 0, 0).unwrap()
    }

    #[test]
    fn parses_single_labeled_line() {
        let c = parse_str("walk\tw3 w1 w3").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.observations[0].len(), 3);
        assert_eq!(c.labels[0], Some(0));
        assert_eq!(c.category_names, vec!["walk"]);
        // first-seen vocabulary order
        assert_eq!(c.vocabulary.words(), &["w3".to_string(), "w1".to_string()]);
        assert_eq!(c.observations[0].word_ids, vec![0, 1, 0]);
    }

    #[test]
    fn file_without_label_column_is_unlabeled() {
        let c = parse_str("w0 w1 w2\nw2 w2").unwrap();
        assert!(c.labels.iter().all(Option::is_none));
        assert!(c.category_names.is_empty());
    }

    #[test]
    fn empty_observation_is_an_error_with_line_number() {
        let err = parse_str("walk\t").unwrap_err();
        match err {
            CorpusError::EmptyObservation { line } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn header_fixes_vocabulary_and_rejects_unknown_tokens() {
        let c = parse_str("#vocab a b c\nx\tc a").unwrap();
        assert_eq!(c.vocabulary.words(), &["a".to_string(), "b".into(), "c".into()]);
        assert_eq!(c.observations[0].word_ids, vec![2, 0]);

        let err = parse_str("#vocab a b\nx\tz").unwrap_err();
        assert!(matches!(err, CorpusError::UnknownToken { token, .. } if token == "z"));
    }

    #[test]
    fn round_trip_preserves_everything() {
        let src = "#vocab a b c\nwalk\ta b a\n-\tc\nrun\tb b c\n";
        let c = parse_str(src).unwrap();
        let mut out = Vec::new();
        c.write_to(&mut out).unwrap();
        let c2 = LabeledCorpus::parse(out.as_slice()).unwrap();
        assert_eq!(c.vocabulary, c2.vocabulary);
        assert_eq!(c.labels, c2.labels);
        assert_eq!(c.category_names, c2.category_names);
        let ids: Vec<_> = c.observations.iter().map(|o| &o.word_ids).collect();
        let ids2: Vec<_> = c2.observations.iter().map(|o| &o.word_ids).collect();
        assert_eq!(ids, ids2);
    }

    fn uniform_corpus(per_category: usize, categories: usize) -> LabeledCorpus {
        let mut s = String::from("#vocab a b\n");
        for c in 0..categories {
            for _ in 0..per_category {
                s.push_str(&format!("cat{c}\ta b\n"));
            }
        }
        parse_str(&s).unwrap()
    }

    #[test]
    fn exhaustive_split_is_stratified_75_25() {
        let corpus = uniform_corpus(20, 3);
        let spec = SplitSpec::new(0.75, 4, 11);
        let (train, test) = split_exhaustive(&corpus, &spec).unwrap();
        for groups in [train.by_category(), test.by_category()] {
            assert_eq!(groups.len(), 3);
        }
        for g in train.by_category() {
            assert_eq!(g.len(), 15);
        }
        for g in test.by_category() {
            assert_eq!(g.len(), 5);
        }
    }

    #[test]
    fn splits_are_deterministic_and_partition_the_corpus() {
        let corpus = uniform_corpus(8, 2);
        let spec = SplitSpec::new(0.75, 2, 99);
        let (tr1, te1) = split_exhaustive(&corpus, &spec).unwrap();
        let (tr2, te2) = split_exhaustive(&corpus, &spec).unwrap();
        let ids = |c: &LabeledCorpus| c.observations.iter().map(|o| o.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&tr1), ids(&tr2));
        assert_eq!(ids(&te1), ids(&te2));

        let mut all: Vec<String> = ids(&tr1).into_iter().chain(ids(&te1)).collect();
        all.sort();
        let mut expect: Vec<String> = corpus.observations.iter().map(|o| o.id.clone()).collect();
        expect.sort();
        assert_eq!(all, expect);
    }

    #[test]
    fn four_instance_category_with_four_folds_is_infeasible() {
        let corpus = uniform_corpus(4, 1);
        let spec = SplitSpec::new(0.75, 4, 1);
        let err = split_exhaustive(&corpus, &spec).unwrap_err();
        assert!(matches!(err, CorpusError::InfeasibleSplit { have: 3, need: 4, .. }));
    }

    #[test]
    fn nonexhaustive_split_isolates_the_holdout_category() {
        let corpus = uniform_corpus(8, 6);
        let spec = SplitSpec::new(0.75, 2, 5).with_holdout(2);
        let (train, known, unknown) = split_nonexhaustive(&corpus, &spec).unwrap();
        assert!(unknown.labels.iter().all(|l| *l == Some(2)));
        assert_eq!(unknown.len(), 8);
        assert!(train.labels.iter().all(|l| *l != Some(2)));
        assert!(known.labels.iter().all(|l| *l != Some(2)));
        // 25% of each remaining category
        for (c, g) in known.by_category().iter().enumerate() {
            if c != 2 {
                assert_eq!(g.len(), 2);
            }
        }
    }

    #[test]
    fn nonexhaustive_rejects_missing_holdout() {
        let corpus = uniform_corpus(4, 2);
        let spec = SplitSpec::new(0.75, 1, 5).with_holdout(7);
        assert!(matches!(
            split_nonexhaustive(&corpus, &spec),
            Err(CorpusError::NoSuchCategory(7))
        ));
    }

    #[test]
    fn holdouts_partition_the_corpus_across_categories() {
        let corpus = uniform_corpus(8, 4);
        let mut seen = Vec::new();
        for h in 0..4 {
            let spec = SplitSpec::new(0.75, 2, 3).with_holdout(h);
            let (_, _, unknown) = split_nonexhaustive(&corpus, &spec).unwrap();
            seen.extend(unknown.observations.iter().map(|o| o.id.clone()));
        }
        seen.sort();
        let mut expect: Vec<String> = corpus.observations.iter().map(|o| o.id.clone()).collect();
        expect.sort();
        assert_eq!(seen, expect);
    }

    #[test]
    fn sampled_word_frequencies_follow_phi() {
        let model = single_topic_model(vec![0.25; 4]);
        let obs = sample_observation(&model, 10_000, 7).unwrap();
        let mut counts = [0usize; 4];
        for &w in &obs.word_ids {
            counts[w] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.25).abs() < 0.02, "frequency {freq} too far from 0.25");
        }
    }

    #[test]
    fn degenerate_phi_yields_constant_words() {
        let model = single_topic_model(vec![1.0, 0.0, 0.0]);
        let obs = sample_observation(&model, 50, 3).unwrap();
        assert!(obs.word_ids.iter().all(|&w| w == 0));
        let one = sample_observation(&model, 1, 3).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn replace_words_identity_and_full_replacement() {
        let obs = Observation::new("x", vec![0, 1, 2, 3]).unwrap();
        let donor = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let same = replace_words(&obs, &vec![0.125; 8], 0.0, 1).unwrap();
        assert_eq!(same.word_ids, obs.word_ids);
        let all7 = replace_words(&obs, &donor, 1.0, 1).unwrap();
        assert!(all7.word_ids.iter().all(|&w| w == 7));
    }

    #[test]
    fn replace_words_touches_exactly_the_rounded_count() {
        let obs = Observation::new("x", vec![0; 112]).unwrap();
        let mut donor = vec![0.0; 4];
        donor[3] = 1.0; // disjoint from the original words, so every replacement is visible
        let out = replace_words(&obs, &donor, 0.5, 9).unwrap();
        let replaced = out.word_ids.iter().filter(|&&w| w == 3).count();
        assert_eq!(replaced, 56);
        assert_eq!(out.len(), 112);
    }

    #[test]
    fn replace_words_rejects_bad_rate() {
        let obs = Observation::new("x", vec![0]).unwrap();
        assert!(matches!(
            replace_words(&obs, &[1.0], 1.5, 0),
            Err(CorpusError::RateOutOfRange(_))
        ));
    }

    #[test]
    fn overlap_endpoints_draw_from_a_single_source() {
        let known = single_topic_model(vec![1.0, 0.0, 0.0, 0.0]);
        let novel = single_topic_model(vec![0.0, 0.0, 0.0, 1.0]);
        let all_known = synth_overlap_observation(&known, &novel, 1.0, 40, 5).unwrap();
        assert!(all_known.word_ids.iter().all(|&w| w == 0));
        let all_novel = synth_overlap_observation(&known, &novel, 0.0, 40, 5).unwrap();
        assert!(all_novel.word_ids.iter().all(|&w| w == 3));
    }

    #[test]
    fn overlap_half_splits_112_words_56_56() {
        let known = single_topic_model(vec![1.0, 0.0, 0.0, 0.0]);
        let novel = single_topic_model(vec![0.0, 0.0, 0.0, 1.0]);
        let obs = synth_overlap_observation(&known, &novel, 0.5, 112, 5).unwrap();
        let from_known = obs.word_ids.iter().filter(|&&w| w == 0).count();
        assert_eq!(from_known, 56);
        assert_eq!(obs.len(), 112);
    }

    #[test]
    fn overlap_rejects_mismatched_vocabularies() {
        let known = single_topic_model(vec![1.0, 0.0]);
        let novel = single_topic_model(vec![0.0, 0.0, 1.0]);
        assert!(matches!(
            synth_overlap_observation(&known, &novel, 0.5, 10, 1),
            Err(CorpusError::VocabularyMismatch(2, 3))
        ));
    }
}
