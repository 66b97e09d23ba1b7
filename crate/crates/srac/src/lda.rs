//! Latent Dirichlet allocation: model representation, collapsed Gibbs
//! training, and per-observation activity-distribution inference.
//!
//! Training integrates out `theta` and `phi` and samples token-topic
//! assignments; the returned `phi` is the smoothed count estimate from the
//! final sweep. Inference holds `phi` fixed and Gibbs-samples assignments
//! for a single observation, averaging the activity-distribution estimate
//! `theta_k = (n_k + alpha_k) / sum_z (n_z + alpha_z)` over post-burn-in
//! sweeps.

use std::io::{Read, Write};

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabeledCorpus, Observation, Vocabulary};
use crate::seeds::{self, SeededRng};

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("topic count must be at least 1")]
    BadTopicCount,
    #[error("{0} must be strictly positive everywhere")]
    NonPositiveHyper(&'static str),
    #[error("alpha has length {0}, expected K = {1}")]
    AlphaLength(usize, usize),
    #[error("beta has length {0}, expected vocabulary size {1}")]
    BetaLength(usize, usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty observation")]
    EmptyObservation,
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("burn-in {0} must be smaller than iterations {1}")]
    BadBurnIn(usize, usize),
    #[error("word id {0} out of vocabulary (size {1})")]
    WordOutOfVocabulary(usize, usize),
    #[error("phi row {0} is not a probability distribution")]
    BadPhiRow(usize),
    #[error("theta is not a probability distribution")]
    BadTheta,
    #[error("ground-truth index {0} out of range for K = {1}")]
    BadGroundTruth(usize, usize),
    #[error("validation corpus has {0} categories, expected K = {1}")]
    CategoryCountMismatch(usize, usize),
    #[error("validation corpus must be fully labeled")]
    UnlabeledValidation,
    #[error("topic labels have length {0}, expected K = {1}")]
    TopicLabelLength(usize, usize),
    #[error("Pvwp baseline must be finite and <= 0, got {0}")]
    BadBaseline(f64),
    #[error("assignment solve supports at most {0} topics, got {1}")]
    AssignmentTooLarge(usize, usize),
    #[error("model file: {0}")]
    BadModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dirichlet concentration parameters for a K-topic model over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    k: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(k: usize, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self, LdaError> {
        if k < 1 {
            return Err(LdaError::BadTopicCount);
        }
        if alpha.len() != k {
            return Err(LdaError::AlphaLength(alpha.len(), k));
        }
        if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(LdaError::NonPositiveHyper("alpha"));
        }
        if beta.iter().any(|&b| !(b > 0.0) || !b.is_finite()) || beta.is_empty() {
            return Err(LdaError::NonPositiveHyper("beta"));
        }
        Ok(Hyperparameters { k, alpha, beta })
    }

    /// Symmetric shorthand: scalar `alpha` repeated K times, scalar `beta`
    /// repeated over the vocabulary.
    pub fn symmetric(k: usize, alpha: f64, beta: f64, vocab_size: usize) -> Result<Self, LdaError> {
        Hyperparameters::new(k, vec![alpha; k], vec![beta; vocab_size])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }
}

/// Per-observation activity distribution `theta` over K categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution {
    theta: Vec<f64>,
}

impl CategoryDistribution {
    pub fn new(theta: Vec<f64>) -> Result<Self, LdaError> {
        let sum: f64 = theta.iter().sum();
        if theta.is_empty()
            || theta.iter().any(|&t| t < 0.0 || !t.is_finite())
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(LdaError::BadTheta);
        }
        Ok(CategoryDistribution { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }
}

/// `theta` sorted descending together with the 1-based rank of the
/// ground-truth category.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProportion {
    pub theta_sorted: Vec<f64>,
    /// 1-based rank of the ground-truth category in `theta_sorted`.
    pub k: usize,
    /// `theta_sorted[j] == theta[perm[j]]`.
    pub perm: Vec<usize>,
}

/// Stable descending sort of `theta` with original-index tiebreak; `k` is
/// the 1-based rank of `ground_truth_index`.
pub fn sort_proportion(theta: &[f64], ground_truth_index: usize) -> Result<SortedProportion, LdaError> {
    if ground_truth_index >= theta.len() {
        return Err(LdaError::BadGroundTruth(ground_truth_index, theta.len()));
    }
    let mut perm: Vec<usize> = (0..theta.len()).collect();
    perm.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap().then(a.cmp(&b)));
    let theta_sorted: Vec<f64> = perm.iter().map(|&i| theta[i]).collect();
    let k = perm.iter().position(|&i| i == ground_truth_index).unwrap() + 1;
    Ok(SortedProportion { theta_sorted, k, perm })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub iterations: usize,
    pub seed: u64,
}

/// A trained K-topic model: row-stochastic `phi`, its hyperparameters and
/// vocabulary, an optional topic-to-category mapping, and the validation
/// Pvwp baseline needed to compute the generalizability indicator online.
#[derive(Debug, Clone)]
pub struct TrainedTopicModel {
    hyper: Hyperparameters,
    phi: Vec<Vec<f64>>,
    vocabulary: Vocabulary,
    topic_labels: Option<Vec<String>>,
    valid_pvwp_baseline: Option<f64>,
    train_summary: TrainSummary,
}

impl TrainedTopicModel {
    pub fn from_parts(
        hyper: Hyperparameters,
        phi: Vec<Vec<f64>>,
        vocabulary: Vocabulary,
        iterations: usize,
        seed: u64,
    ) -> Result<Self, LdaError> {
        if phi.len() != hyper.k() {
            return Err(LdaError::BadPhiRow(phi.len()));
        }
        if hyper.beta().len() != vocabulary.len() {
            return Err(LdaError::BetaLength(hyper.beta().len(), vocabulary.len()));
        }
        for (t, row) in phi.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != vocabulary.len()
                || row.iter().any(|&p| p < 0.0 || !p.is_finite())
                || (sum - 1.0).abs() > 1e-9
            {
                return Err(LdaError::BadPhiRow(t));
            }
        }
        Ok(TrainedTopicModel {
            hyper,
            phi,
            vocabulary,
            topic_labels: None,
            valid_pvwp_baseline: None,
            train_summary: TrainSummary { iterations, seed },
        })
    }

    pub fn k(&self) -> usize {
        self.hyper.k()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn alpha(&self) -> &[f64] {
        self.hyper.alpha()
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        &self.phi[topic]
    }

    pub fn topic_labels(&self) -> Option<&[String]> {
        self.topic_labels.as_deref()
    }

    pub fn topic_for_category(&self, name: &str) -> Option<usize> {
        self.topic_labels.as_ref()?.iter().position(|l| l == name)
    }

    pub fn valid_pvwp_baseline(&self) -> Option<f64> {
        self.valid_pvwp_baseline
    }

    pub fn train_summary(&self) -> TrainSummary {
        self.train_summary
    }

    pub fn with_baseline(mut self, pvwp: f64) -> Result<Self, LdaError> {
        if !pvwp.is_finite() || pvwp > 0.0 {
            return Err(LdaError::BadBaseline(pvwp));
        }
        self.valid_pvwp_baseline = Some(pvwp);
        Ok(self)
    }

    pub fn with_topic_labels(mut self, labels: Vec<String>) -> Result<Self, LdaError> {
        if labels.len() != self.k() {
            return Err(LdaError::TopicLabelLength(labels.len(), self.k()));
        }
        self.topic_labels = Some(labels);
        Ok(self)
    }

    /// Serializes the model as JSON. Floats use shortest round-trip
    /// formatting, so save/load is bit-exact.
    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            k: self.k(),
            alpha: self.hyper.alpha().to_vec(),
            beta: self.hyper.beta().to_vec(),
            vocabulary: self.vocabulary.words().to_vec(),
            vocab_hash: format!("{:016x}", self.vocabulary.fingerprint()),
            phi: self.phi.clone(),
            topic_labels: self.topic_labels.clone(),
            valid_pvwp_baseline: self.valid_pvwp_baseline,
            train_summary: self.train_summary,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), LdaError> {
        w.write_all(self.to_json_string().as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, LdaError> {
        let mut buf = String::new();
        r.read_to_string(&mut buf)?;
        Self::from_json_str(&buf)
    }

    pub fn from_json_str(s: &str) -> Result<Self, LdaError> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| LdaError::BadModelFile(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(LdaError::BadModelFile(format!("unknown format '{}'", file.format)));
        }
        let vocabulary = Vocabulary::new(file.vocabulary)
            .map_err(|e| LdaError::BadModelFile(e.to_string()))?;
        let expect_hash = format!("{:016x}", vocabulary.fingerprint());
        if file.vocab_hash != expect_hash {
            return Err(LdaError::BadModelFile("vocabulary hash mismatch".into()));
        }
        let hyper = Hyperparameters::new(file.k, file.alpha, file.beta)?;
        let mut model = TrainedTopicModel::from_parts(
            hyper,
            file.phi,
            vocabulary,
            file.train_summary.iterations,
            file.train_summary.seed,
        )?;
        if let Some(labels) = file.topic_labels {
            model = model.with_topic_labels(labels)?;
        }
        if let Some(b) = file.valid_pvwp_baseline {
            model = model.with_baseline(b)?;
        }
        Ok(model)
    }
}

const MODEL_FORMAT: &str = "srac-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    k: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    vocabulary: Vec<String>,
    vocab_hash: String,
    phi: Vec<Vec<f64>>,
    topic_labels: Option<Vec<String>>,
    valid_pvwp_baseline: Option<f64>,
    train_summary: TrainSummary,
}

/// Samples an index proportional to the (unnormalized) weights.
pub(crate) fn sample_index(weights: &[f64], rng: &mut SeededRng) -> usize {
    use rand::Rng;
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "sample_index requires positive total weight");
    let mut x = rng.random::<f64>() * total;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_nonzero = i;
            if x < w {
                return i;
            }
            x -= w;
        }
    }
    last_nonzero
}

/// Draws from Dirichlet(alpha) via normalized Gamma variates.
pub(crate) fn sample_dirichlet(alpha: &[f64], rng: &mut SeededRng) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("alpha validated positive").sample(rng))
        .collect();
    let sum: f64 = draws.iter().sum();
    if sum <= 0.0 {
        // Underflow corner for very small alpha: fall back to a point mass.
        let argmax = alpha
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        draws.iter_mut().for_each(|d| *d = 0.0);
        draws[argmax] = 1.0;
        return draws;
    }
    draws.iter_mut().for_each(|d| *d /= sum);
    draws
}

/// Collapsed Gibbs training. `phi` is estimated from the final-state counts:
/// `phi[z][w] = (n[z][w] + beta[w]) / sum_w' (n[z][w'] + beta[w'])`.
/// Deterministic under a fixed seed.
pub fn train_gibbs(
    corpus: &LabeledCorpus,
    hyper: Hyperparameters,
    iterations: usize,
    seed: u64,
) -> Result<TrainedTopicModel, LdaError> {
    if corpus.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(LdaError::NoIterations);
    }
    let v = corpus.vocabulary.len();
    if hyper.beta().len() != v {
        return Err(LdaError::BetaLength(hyper.beta().len(), v));
    }
    let k = hyper.k();
    let alpha = hyper.alpha();
    let beta = hyper.beta();
    let beta_sum = hyper.beta_sum();

    let mut rng = seeds::rng(seed);
    let mut doc_topic: Vec<Vec<f64>> = vec![vec![0.0; k]; corpus.len()];
    let mut topic_word: Vec<Vec<f64>> = vec![vec![0.0; v]; k];
    let mut topic_total: Vec<f64> = vec![0.0; k];
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(corpus.len());

    use rand::Rng;
    for (d, obs) in corpus.observations.iter().enumerate() {
        let mut zs = Vec::with_capacity(obs.len());
        for &w in &obs.word_ids {
            if w >= v {
                return Err(LdaError::WordOutOfVocabulary(w, v));
            }
            let z = rng.random_range(0..k);
            doc_topic[d][z] += 1.0;
            topic_word[z][w] += 1.0;
            topic_total[z] += 1.0;
            zs.push(z);
        }
        assignments.push(zs);
    }

    let mut weights = vec![0.0f64; k];
    for _ in 0..iterations {
        for (d, obs) in corpus.observations.iter().enumerate() {
            for (i, &w) in obs.word_ids.iter().enumerate() {
                let old = assignments[d][i];
                doc_topic[d][old] -= 1.0;
                topic_word[old][w] -= 1.0;
                topic_total[old] -= 1.0;
                for t in 0..k {
                    weights[t] = (doc_topic[d][t] + alpha[t]) * (topic_word[t][w] + beta[w])
                        / (topic_total[t] + beta_sum);
                }
                let new = sample_index(&weights, &mut rng);
                assignments[d][i] = new;
                doc_topic[d][new] += 1.0;
                topic_word[new][w] += 1.0;
                topic_total[new] += 1.0;
            }
        }
    }

    let phi: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let denom = topic_total[t] + beta_sum;
            (0..v).map(|w| (topic_word[t][w] + beta[w]) / denom).collect()
        })
        .collect();
    TrainedTopicModel::from_parts(hyper, phi, corpus.vocabulary.clone(), iterations, seed)
}

/// Gibbs-samples topic assignments for one observation holding `phi` fixed
/// and returns the activity distribution averaged over post-burn-in sweeps.
pub fn estimate_theta(
    model: &TrainedTopicModel,
    obs: &Observation,
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CategoryDistribution, LdaError> {
    if obs.is_empty() {
        return Err(LdaError::EmptyObservation);
    }
    if burn_in >= iterations {
        return Err(LdaError::BadBurnIn(burn_in, iterations));
    }
    let k = model.k();
    let alpha = model.alpha();
    let alpha_sum = model.hyper().alpha_sum();
    let n = obs.len() as f64;
    for &w in &obs.word_ids {
        if w >= model.vocab_size() {
            return Err(LdaError::WordOutOfVocabulary(w, model.vocab_size()));
        }
    }

    let mut rng = seeds::rng(seed);
    use rand::Rng;
    let mut z: Vec<usize> = (0..obs.len()).map(|_| rng.random_range(0..k)).collect();
    let mut counts = vec![0.0f64; k];
    for &t in &z {
        counts[t] += 1.0;
    }

    let mut accum = vec![0.0f64; k];
    let mut samples = 0usize;
    let mut weights = vec![0.0f64; k];
    for sweep in 0..iterations {
        for (i, &w) in obs.word_ids.iter().enumerate() {
            let old = z[i];
            counts[old] -= 1.0;
            for t in 0..k {
                weights[t] = model.phi[t][w] * (counts[t] + alpha[t]);
            }
            let new = sample_index(&weights, &mut rng);
            z[i] = new;
            counts[new] += 1.0;
        }
        if sweep >= burn_in {
            for t in 0..k {
                accum[t] += (counts[t] + alpha[t]) / (n + alpha_sum);
            }
            samples += 1;
        }
    }
    let theta: Vec<f64> = accum.iter().map(|a| a / samples as f64).collect();
    CategoryDistribution::new(theta)
}

/// Finds the bijective topic-to-category assignment maximizing mean
/// interpretability on a labeled validation corpus, solved exactly, and
/// returns the model with `topic_labels` attached.
///
/// `score[t][c]` is the mean interpretability over validation observations
/// of category `c` when topic `t` is hypothesized as their ground truth;
/// the assignment maximizing the total score is found by subset DP.
pub fn map_topics_to_categories(
    model: &TrainedTopicModel,
    validation: &LabeledCorpus,
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TrainedTopicModel, LdaError> {
    let k = model.k();
    let n_cat = validation.n_categories();
    if n_cat != k {
        return Err(LdaError::CategoryCountMismatch(n_cat, k));
    }
    if !validation.is_fully_labeled() {
        return Err(LdaError::UnlabeledValidation);
    }
    if k == 1 {
        return model.clone().with_topic_labels(vec![validation.category_names[0].clone()]);
    }
    const MAX_K: usize = 24;
    if k > MAX_K {
        return Err(LdaError::AssignmentTooLarge(MAX_K, k));
    }

    let mut score = vec![vec![0.0f64; k]; k]; // [topic][category] mean interpretability
    let mut count = vec![0usize; k];
    for (i, obs) in validation.observations.iter().enumerate() {
        let c = validation.labels[i].expect("validated labeled");
        let theta = estimate_theta(model, obs, iterations, burn_in, seeds::derive(seed, i as u64))?;
        for t in 0..k {
            let ii = crate::reflection::interpretability(theta.theta(), t)
                .expect("K >= 2 and theta valid");
            score[t][c] += ii;
        }
        count[c] += 1;
    }
    for c in 0..k {
        if count[c] == 0 {
            return Err(LdaError::CategoryCountMismatch(n_cat, k));
        }
        for t in 0..k {
            score[t][c] /= count[c] as f64;
        }
    }

    // dp over used-category masks; topic index = popcount(mask).
    let full = (1usize << k) - 1;
    let mut dp = vec![f64::NEG_INFINITY; full + 1];
    let mut choice = vec![usize::MAX; full + 1];
    dp[0] = 0.0;
    for mask in 0..full {
        if dp[mask] == f64::NEG_INFINITY {
            continue;
        }
        let t = mask.count_ones() as usize;
        for c in 0..k {
            if mask & (1 << c) != 0 {
                continue;
            }
            let next = mask | (1 << c);
            let cand = dp[mask] + score[t][c];
            if cand > dp[next] {
                dp[next] = cand;
                choice[next] = c;
            }
        }
    }
    let mut assignment = vec![usize::MAX; k];
    let mut mask = full;
    while mask != 0 {
        let c = choice[mask];
        let t = mask.count_ones() as usize - 1;
        assignment[t] = c;
        mask &= !(1 << c);
    }

    let labels: Vec<String> =
        assignment.iter().map(|&c| validation.category_names[c].clone()).collect();
    model.clone().with_topic_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn tiny_corpus() -> LabeledCorpus {
        LabeledCorpus::parse("#vocab a b c\nx\ta a b\ny\tc c b\n".as_bytes()).unwrap()
    }

    #[test]
    fn hyperparameters_validate() {
        assert!(Hyperparameters::symmetric(0, 1.0, 0.1, 3).is_err());
        assert!(Hyperparameters::symmetric(2, 0.0, 0.1, 3).is_err());
        assert!(Hyperparameters::symmetric(2, 1.0, -0.1, 3).is_err());
        assert!(Hyperparameters::new(2, vec![1.0], vec![0.1; 3]).is_err());
    }

    #[test]
    fn single_topic_phi_is_smoothed_empirical_frequency() {
        let corpus = tiny_corpus();
        let hyper = Hyperparameters::symmetric(1, 1.0, 0.5, 3).unwrap();
        let model = train_gibbs(&corpus, hyper, 5, 42).unwrap();
        // counts: a=2, b=2, c=2, total 6; smoothed by beta=0.5 over 3 words
        for w in 0..3 {
            let expect = (2.0 + 0.5) / (6.0 + 1.5);
            assert!((model.phi_row(0)[w] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let corpus = tiny_corpus();
        let hyper = Hyperparameters::symmetric(2, 1.0, 0.01, 3).unwrap();
        let m1 = train_gibbs(&corpus, hyper.clone(), 50, 7).unwrap();
        let m2 = train_gibbs(&corpus, hyper, 50, 7).unwrap();
        for t in 0..2 {
            for w in 0..3 {
                assert_eq!(m1.phi_row(t)[w].to_bits(), m2.phi_row(t)[w].to_bits());
            }
        }
    }

    #[test]
    fn theta_is_unit_for_single_topic() {
        let corpus = tiny_corpus();
        let hyper = Hyperparameters::symmetric(1, 1.0, 0.01, 3).unwrap();
        let model = train_gibbs(&corpus, hyper, 5, 1).unwrap();
        let obs = Observation::new("t", vec![0, 1]).unwrap();
        let theta = estimate_theta(&model, &obs, 10, 2, 3).unwrap();
        assert_eq!(theta.theta(), &[1.0]);
    }

    fn disjoint_model() -> TrainedTopicModel {
        // 3 topics over 9 words with disjoint supports
        let vocab = Vocabulary::new((0..9).map(|i| format!("w{i}"))).unwrap();
        let hyper = Hyperparameters::symmetric(3, 1.0, 0.01, 9).unwrap();
        let mut phi = vec![vec![0.0; 9]; 3];
        for t in 0..3 {
            for w in 0..3 {
                phi[t][3 * t + w] = 1.0 / 3.0;
            }
        }
        TrainedTopicModel::from_parts(hyper, phi, vocab, 0, 0).unwrap()
    }

    #[test]
    fn disjoint_supports_concentrate_theta() {
        let model = disjoint_model();
        // 30 words wholly from topic 2's support: the count estimate tops
        // out at (N+1)/(N+K), so N must be large enough to clear 0.9.
        let words: Vec<usize> = (0..30).map(|i| 6 + i % 3).collect();
        let obs = Observation::new("t", words).unwrap();
        let theta = estimate_theta(&model, &obs, 200, 50, 5).unwrap();
        assert!(theta.theta()[2] >= 0.9, "theta = {:?}", theta.theta());
    }

    #[test]
    fn single_sweep_theta_matches_the_count_formula() {
        // N=1, K=2, symmetric alpha: theta is (1+a)/(1+2a) for the sampled
        // topic and a/(1+2a) for the other.
        let vocab = Vocabulary::new(["a", "b"]).unwrap();
        let a = 0.7;
        let hyper = Hyperparameters::new(2, vec![a, a], vec![0.01, 0.01]).unwrap();
        let phi = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let model = TrainedTopicModel::from_parts(hyper, phi, vocab, 0, 0).unwrap();
        let obs = Observation::new("t", vec![0]).unwrap();
        for seed in 0..20 {
            let theta = estimate_theta(&model, &obs, 1, 0, seed).unwrap();
            let hi = (1.0 + a) / (1.0 + 2.0 * a);
            let lo = a / (1.0 + 2.0 * a);
            let got = theta.theta();
            let matches = (got[0] - hi).abs() < 1e-12 && (got[1] - lo).abs() < 1e-12
                || (got[0] - lo).abs() < 1e-12 && (got[1] - hi).abs() < 1e-12;
            assert!(matches, "unexpected theta {got:?}");
        }
    }

    #[test]
    fn sort_proportion_examples() {
        let s = sort_proportion(&[0.2, 0.5, 0.3], 0).unwrap();
        assert_eq!(s.theta_sorted, vec![0.5, 0.3, 0.2]);
        assert_eq!(s.k, 3);

        let s = sort_proportion(&[0.25, 0.25, 0.25, 0.25], 0).unwrap();
        assert_eq!(s.k, 1);

        let s = sort_proportion(&[0.4, 0.4, 0.2], 1).unwrap();
        assert_eq!(s.k, 2);
        assert_eq!(s.perm, vec![0, 1, 2]);
    }

    #[test]
    fn sort_proportion_rejects_bad_ground_truth() {
        assert!(sort_proportion(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn topic_mapping_recovers_a_known_permutation() {
        let model = disjoint_model();
        // categories listed in order [c0, c1, c2]; c0's data comes from
        // topic 2, c1's from topic 0, c2's from topic 1.
        let perm = [2usize, 0, 1];
        let mut text = String::from("#vocab w0 w1 w2 w3 w4 w5 w6 w7 w8\n");
        for (c, &t) in perm.iter().enumerate() {
            for i in 0..4 {
                let w = 3 * t + (i % 3);
                text.push_str(&format!("c{c}\tw{w} w{} w{w}\n", 3 * t));
            }
        }
        let validation = LabeledCorpus::parse(text.as_bytes()).unwrap();
        let mapped = map_topics_to_categories(&model, &validation, 100, 20, 9).unwrap();
        let labels = mapped.topic_labels().unwrap();
        assert_eq!(labels, &["c1".to_string(), "c2".into(), "c0".into()]);
        assert_eq!(mapped.topic_for_category("c0"), Some(2));
    }

    #[test]
    fn topic_mapping_is_identity_for_aligned_labels() {
        let model = disjoint_model();
        let mut text = String::from("#vocab w0 w1 w2 w3 w4 w5 w6 w7 w8\n");
        for c in 0..3 {
            for _ in 0..4 {
                text.push_str(&format!("c{c}\tw{} w{} w{}\n", 3 * c, 3 * c + 1, 3 * c + 2));
            }
        }
        let validation = LabeledCorpus::parse(text.as_bytes()).unwrap();
        let mapped = map_topics_to_categories(&model, &validation, 100, 20, 9).unwrap();
        assert_eq!(
            mapped.topic_labels().unwrap(),
            &["c0".to_string(), "c1".into(), "c2".into()]
        );
    }

    #[test]
    fn topic_mapping_k1_is_trivial() {
        let vocab = Vocabulary::new(["a", "b"]).unwrap();
        let hyper = Hyperparameters::symmetric(1, 1.0, 0.01, 2).unwrap();
        let model =
            TrainedTopicModel::from_parts(hyper, vec![vec![0.5, 0.5]], vocab, 0, 0).unwrap();
        let validation = LabeledCorpus::parse("only\ta b\n".as_bytes()).unwrap();
        let mapped = map_topics_to_categories(&model, &validation, 10, 2, 0).unwrap();
        assert_eq!(mapped.topic_labels().unwrap(), &["only".to_string()]);
    }

    #[test]
    fn topic_mapping_rejects_category_mismatch() {
        let model = disjoint_model();
        let validation = LabeledCorpus::parse("#vocab w0 w1 w2 w3 w4 w5 w6 w7 w8\na\tw0\nb\tw3\n".as_bytes()).unwrap();
        assert!(matches!(
            map_topics_to_categories(&model, &validation, 10, 2, 0),
            Err(LdaError::CategoryCountMismatch(2, 3))
        ));
    }

    #[test]
    fn model_json_round_trips_bit_exactly() {
        let corpus = tiny_corpus();
        let hyper = Hyperparameters::symmetric(2, 1.0, 0.01, 3).unwrap();
        let model = train_gibbs(&corpus, hyper, 30, 3)
            .unwrap()
            .with_baseline(-2.5)
            .unwrap()
            .with_topic_labels(vec!["x".into(), "y".into()])
            .unwrap();
        let json = model.to_json_string();
        let loaded = TrainedTopicModel::from_json_str(&json).unwrap();
        assert_eq!(json, loaded.to_json_string());
        for t in 0..2 {
            for w in 0..3 {
                assert_eq!(model.phi_row(t)[w].to_bits(), loaded.phi_row(t)[w].to_bits());
            }
        }
        assert_eq!(loaded.valid_pvwp_baseline(), Some(-2.5));
    }

    #[test]
    fn baseline_must_be_nonpositive() {
        let model = disjoint_model();
        assert!(model.clone().with_baseline(0.5).is_err());
        assert!(model.with_baseline(-0.5).is_ok());
    }

    #[test]
    fn gibbs_rejects_empty_and_zero_iterations() {
        let corpus = tiny_corpus();
        let hyper = Hyperparameters::symmetric(2, 1.0, 0.01, 3).unwrap();
        assert!(matches!(
            train_gibbs(&corpus, hyper.clone(), 0, 1),
            Err(LdaError::NoIterations)
        ));
        let obs = Observation::new("t", vec![0]).unwrap();
        let model = train_gibbs(&corpus, hyper, 5, 1).unwrap();
        assert!(matches!(
            estimate_theta(&model, &obs, 5, 5, 1),
            Err(LdaError::BadBurnIn(5, 5))
        ));
    }
}
