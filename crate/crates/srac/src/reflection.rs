//! Self-reflection indicators: interpretability (`I_I`), accuracy (`I_A`),
//! per-visual-word perplexity (`Pvwp`), and generalizability (`I_G`).
//!
//! `I_I` scores how well a sorted activity proportion matches the ground
//! truth on a [0, 1] scale:
//!
//! ```text
//! I_I(theta_s, k) = 1/2 * ((K - k)/(K - 1) + 1(k = K))
//!                       * (theta_k/theta_1 - theta_{k + 1(k != K)}/theta_k + 1)
//! ```
//!
//! with a 0/0 ratio defined by its limit: `theta_{k+1}/theta_k := 1` when
//! both are zero (`theta_k/theta_1` is then 0).
//!
//! `Pvwp` is the average per-word log-likelihood of an observation under a
//! trained model, estimated by the left-to-right particle algorithm: for
//! each position, every particle resamples the assignments of all earlier
//! positions, accumulates the predictive probability of the current word,
//! then samples its assignment. `I_G` compares `exp(Pvwp)` for one
//! observation against `c * exp(baseline)` and clamps to 1.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{LabeledCorpus, Observation};
use crate::lda::{sample_index, sort_proportion, TrainedTopicModel};
use crate::seeds;

/// Default particle count for experiments; acceptance oracles use more.
pub const DEFAULT_PARTICLES: usize = 50;

#[derive(Debug, Error)]
pub enum ReflectionError {
    #[error("interpretability requires K >= 2")]
    KTooSmall,
    #[error("rank {0} out of range 1..={1}")]
    BadRank(usize, usize),
    #[error("ground-truth index {0} out of range for K = {1}")]
    BadGroundTruth(usize, usize),
    #[error("not a sorted probability vector: {0}")]
    BadSortedTheta(String),
    #[error("particle count must be at least 1")]
    NoParticles,
    #[error("empty observation")]
    EmptyObservation,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("word id {0} out of vocabulary (size {1})")]
    WordOutOfVocabulary(usize, usize),
    #[error("word id {0} has zero probability under every topic")]
    ZeroProbabilityWord(usize),
    #[error("model has no validation Pvwp baseline")]
    BaselineUnset,
    #[error("novelty constant c must be >= 1, got {0}")]
    BadNoveltyConstant(f64),
    #[error("novelty threshold must lie in (0, 1), got {0}")]
    BadNoveltyThreshold(f64),
    #[error("input vectors must have equal length >= 2")]
    BadVectorLengths,
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("empty input")]
    EmptyInput,
    #[error("record '{0}' is missing the interpretability indicator")]
    MissingInterpretability(String),
    #[error(transparent)]
    Lda(#[from] crate::lda::LdaError),
}

/// Interpretability of an unsorted activity distribution against the
/// ground-truth category index. Requires K >= 2.
pub fn interpretability(theta: &[f64], ground_truth_index: usize) -> Result<f64, ReflectionError> {
    if theta.len() < 2 {
        return Err(ReflectionError::KTooSmall);
    }
    if ground_truth_index >= theta.len() {
        return Err(ReflectionError::BadGroundTruth(ground_truth_index, theta.len()));
    }
    let sorted = sort_proportion(theta, ground_truth_index)?;
    interpretability_sorted(&sorted.theta_sorted, sorted.k)
}

/// Interpretability of an already-sorted proportion with the 1-based rank
/// of the ground truth.
pub fn interpretability_sorted(theta_sorted: &[f64], rank: usize) -> Result<f64, ReflectionError> {
    let kk = theta_sorted.len();
    if kk < 2 {
        return Err(ReflectionError::KTooSmall);
    }
    if rank < 1 || rank > kk {
        return Err(ReflectionError::BadRank(rank, kk));
    }
    validate_sorted_simplex(theta_sorted)?;

    let f2 = (kk - rank) as f64 / (kk - 1) as f64 + if rank == kk { 1.0 } else { 0.0 };
    let t1 = theta_sorted[0];
    let tk = theta_sorted[rank - 1];
    let tnext = theta_sorted[if rank == kk { rank - 1 } else { rank }];
    let ratio_head = if tk == 0.0 { 0.0 } else { tk / t1 };
    let ratio_tail = if tk == 0.0 { 1.0 } else { tnext / tk };
    Ok(0.5 * f2 * (ratio_head - ratio_tail + 1.0))
}

fn validate_sorted_simplex(theta: &[f64]) -> Result<(), ReflectionError> {
    if theta.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return Err(ReflectionError::BadSortedTheta("negative or non-finite entry".into()));
    }
    if theta.windows(2).any(|w| w[0] < w[1]) {
        return Err(ReflectionError::BadSortedTheta("not non-increasing".into()));
    }
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ReflectionError::BadSortedTheta(format!("sums to {sum}")));
    }
    Ok(())
}

/// 1 iff the most probable category (lowest index on ties) matches the
/// ground truth.
pub fn accuracy(theta: &[f64], ground_truth_index: usize) -> Result<bool, ReflectionError> {
    if theta.is_empty() || ground_truth_index >= theta.len() {
        return Err(ReflectionError::BadGroundTruth(ground_truth_index, theta.len()));
    }
    let mut argmax = 0;
    for (i, &t) in theta.iter().enumerate() {
        if t > theta[argmax] {
            argmax = i;
        }
    }
    Ok(argmax == ground_truth_index)
}

/// Left-to-right particle estimate of the per-visual-word perplexity
/// `Pvwp(w | M) = log P(w | M) / N`, always <= 0. Deterministic under seed.
pub fn pvwp(
    obs: &Observation,
    model: &TrainedTopicModel,
    particles: usize,
    seed: u64,
) -> Result<f64, ReflectionError> {
    if particles == 0 {
        return Err(ReflectionError::NoParticles);
    }
    if obs.is_empty() {
        return Err(ReflectionError::EmptyObservation);
    }
    let k = model.k();
    let v = model.vocab_size();
    for &w in &obs.word_ids {
        if w >= v {
            return Err(ReflectionError::WordOutOfVocabulary(w, v));
        }
    }
    let alpha = model.alpha();
    let alpha_sum: f64 = alpha.iter().sum();
    let phi = model.phi();
    let n = obs.len();

    let mut rng = seeds::rng(seed);
    let mut assignments: Vec<Vec<usize>> = vec![Vec::with_capacity(n); particles];
    let mut counts: Vec<Vec<f64>> = vec![vec![0.0; k]; particles];
    let mut weights = vec![0.0f64; k];
    let mut log_lik = 0.0f64;

    for pos in 0..n {
        let w_n = obs.word_ids[pos];
        let denom = pos as f64 + alpha_sum;
        let mut p_n = 0.0f64;
        for r in 0..particles {
            // Resample the assignments of all earlier positions.
            for j in 0..pos {
                let w_j = obs.word_ids[j];
                let old = assignments[r][j];
                counts[r][old] -= 1.0;
                for t in 0..k {
                    weights[t] = phi[t][w_j] * (counts[r][t] + alpha[t]);
                }
                let new = sample_index(&weights, &mut rng);
                assignments[r][j] = new;
                counts[r][new] += 1.0;
            }
            // Predictive probability of the current word, summed over topics.
            let mut p = 0.0;
            for t in 0..k {
                p += phi[t][w_n] * (counts[r][t] + alpha[t]);
            }
            p_n += p / denom;
            // Sample the current position's assignment.
            for t in 0..k {
                weights[t] = phi[t][w_n] * (counts[r][t] + alpha[t]);
            }
            let z_n = sample_index(&weights, &mut rng);
            assignments[r].push(z_n);
            counts[r][z_n] += 1.0;
        }
        if p_n <= 0.0 {
            return Err(ReflectionError::ZeroProbabilityWord(w_n));
        }
        log_lik += (p_n / particles as f64).ln();
    }
    Ok(log_lik / n as f64)
}

/// Mean per-observation Pvwp over a corpus. Per-observation seeds derive
/// from the observation id, so duplicated observations reuse their seeds.
pub fn pvwp_dataset(
    corpus: &LabeledCorpus,
    model: &TrainedTopicModel,
    particles: usize,
    seed: u64,
) -> Result<f64, ReflectionError> {
    if corpus.is_empty() {
        return Err(ReflectionError::EmptyCorpus);
    }
    let values: Vec<Result<f64, ReflectionError>> = corpus
        .observations
        .par_iter()
        .map(|obs| pvwp(obs, model, particles, seeds::derive_tagged(seed, &obs.id)))
        .collect();
    let mut sum = 0.0;
    for v in values {
        sum += v?;
    }
    Ok(sum / corpus.len() as f64)
}

/// Configuration for the generalizability indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyConfig {
    /// Novelty constant `c >= 1` scaling the baseline.
    pub c: f64,
    /// Reporting threshold: observations with `I_G` below it are flagged
    /// novel. Not used by action selection.
    pub novelty_threshold: f64,
}

impl NoveltyConfig {
    pub fn new(c: f64, novelty_threshold: f64) -> Result<Self, ReflectionError> {
        if !(c >= 1.0) || !c.is_finite() {
            return Err(ReflectionError::BadNoveltyConstant(c));
        }
        if !(novelty_threshold > 0.0 && novelty_threshold < 1.0) {
            return Err(ReflectionError::BadNoveltyThreshold(novelty_threshold));
        }
        Ok(NoveltyConfig { c, novelty_threshold })
    }

    pub fn is_novel(&self, i_g: f64) -> bool {
        i_g < self.novelty_threshold
    }
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        NoveltyConfig { c: 1.0, novelty_threshold: 0.5 }
    }
}

/// `I_G = min(1, exp(Pvwp(w) - baseline - ln c))`, computed in log space.
pub fn generalizability_from_pvwp(pvwp_obs: f64, baseline: f64, c: f64) -> f64 {
    (pvwp_obs - baseline - c.ln()).exp().min(1.0)
}

/// Generalizability of one observation against the model's validation
/// baseline. Requires the baseline to be set.
pub fn generalizability(
    obs: &Observation,
    model: &TrainedTopicModel,
    config: &NoveltyConfig,
    particles: usize,
    seed: u64,
) -> Result<f64, ReflectionError> {
    let baseline = model.valid_pvwp_baseline().ok_or(ReflectionError::BaselineUnset)?;
    let p = pvwp(obs, model, particles, seed)?;
    Ok(generalizability_from_pvwp(p, baseline, config.c))
}

/// Product-moment correlation of two indicator vectors.
pub fn pearson_rho(x: &[f64], y: &[f64]) -> Result<f64, ReflectionError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(ReflectionError::BadVectorLengths);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(ReflectionError::ZeroVariance);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Per-observation indicator record; `i_i`/`i_a` are present only when the
/// ground truth is known.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRecord {
    pub obs_id: String,
    pub i_i: Option<f64>,
    pub i_g: f64,
    pub i_a: Option<bool>,
    pub pvwp: f64,
}

/// Fraction of records with `i_i <= i_g`. Every record must carry `i_i`.
pub fn prob_ii_le_ig(records: &[IndicatorRecord]) -> Result<f64, ReflectionError> {
    if records.is_empty() {
        return Err(ReflectionError::EmptyInput);
    }
    let mut hits = 0usize;
    for r in records {
        let ii = r
            .i_i
            .ok_or_else(|| ReflectionError::MissingInterpretability(r.obs_id.clone()))?;
        if ii <= r.i_g {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

/// Writes records as `obs_id,i_i,i_g,i_a,pvwp` with empty fields for absent
/// values and six decimal places for floats.
pub fn write_indicator_csv<W: Write>(records: &[IndicatorRecord], w: &mut W) -> io::Result<()> {
    writeln!(w, "obs_id,i_i,i_g,i_a,pvwp")?;
    for r in records {
        let ii = r.i_i.map(|v| format!("{v:.6}")).unwrap_or_default();
        let ia = r.i_a.map(|v| if v { "1" } else { "0" }.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{:.6},{},{:.6}", r.obs_id, ii, r.i_g, ia, r.pvwp)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::lda::Hyperparameters;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn worked_examples_match_hand_evaluation() {
        let a = interpretability_sorted(&[0.4, 0.35, 0.15, 0.10], 2).unwrap();
        let b = interpretability_sorted(&[0.4, 0.30, 0.15, 0.15], 2).unwrap();
        assert!(approx(a, 0.482142, 1e-6), "got {a}");
        assert!(approx(b, 0.416667, 1e-6), "got {b}");
        assert!(a > b);
    }

    #[test]
    fn one_hot_extremes() {
        assert_eq!(interpretability(&[1.0, 0.0, 0.0], 0).unwrap(), 1.0);
        // ground truth on a zero entry: rank > 1, value 0
        assert_eq!(interpretability(&[1.0, 0.0, 0.0], 2).unwrap(), 0.0);
        assert_eq!(interpretability(&[0.0, 0.0, 1.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_with_correct_top_is_half() {
        assert_eq!(interpretability(&[0.25; 4], 0).unwrap(), 0.5);
    }

    #[test]
    fn zero_over_zero_convention() {
        // theta_k = theta_{k+1} = 0 forces the tail ratio to its limit 1.
        let v = interpretability_sorted(&[0.6, 0.4, 0.0, 0.0], 3).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn interpretability_rejects_k1_and_bad_input() {
        assert!(matches!(interpretability(&[1.0], 0), Err(ReflectionError::KTooSmall)));
        assert!(interpretability_sorted(&[0.3, 0.7], 1).is_err()); // not sorted
        assert!(interpretability_sorted(&[0.9, 0.3], 1).is_err()); // not a simplex
    }

    #[test]
    fn accuracy_cases() {
        assert!(accuracy(&[0.6, 0.4], 0).unwrap());
        assert!(!accuracy(&[0.6, 0.4], 1).unwrap());
        // argmax ties break to the lowest index, matching sort_proportion
        assert!(accuracy(&[0.5, 0.5], 0).unwrap());
        assert!(!accuracy(&[0.5, 0.5], 1).unwrap());
    }

    #[test]
    fn one_hot_interpretability_equals_accuracy() {
        for k in 2..=5usize {
            for hot in 0..k {
                let mut theta = vec![0.0; k];
                theta[hot] = 1.0;
                for g in 0..k {
                    let ii = interpretability(&theta, g).unwrap();
                    let ia = if accuracy(&theta, g).unwrap() { 1.0 } else { 0.0 };
                    assert_eq!(ii, ia, "k={k} hot={hot} g={g}");
                }
            }
        }
    }

    fn uniform_model(k: usize, v: usize) -> TrainedTopicModel {
        let vocab = Vocabulary::new((0..v).map(|i| format!("w{i}"))).unwrap();
        let hyper = Hyperparameters::symmetric(k, 1.0, 0.01, v).unwrap();
        let phi = vec![vec![1.0 / v as f64; v]; k];
        TrainedTopicModel::from_parts(hyper, phi, vocab, 0, 0).unwrap()
    }

    #[test]
    fn single_position_pvwp_is_exact() {
        // N=1: no resampling happens, so the estimate is the exact mixture
        // probability ln(sum_z (alpha_z/alpha_sum) * phi[z][w]) = ln 0.25.
        let model = uniform_model(2, 4);
        let obs = Observation::new("t", vec![1]).unwrap();
        for (r, seed) in [(1usize, 0u64), (7, 1), (50, 2)] {
            let p = pvwp(&obs, &model, r, seed).unwrap();
            assert!(approx(p, 0.25f64.ln(), 1e-12), "got {p}");
        }
    }

    #[test]
    fn pvwp_is_nonpositive_and_deterministic() {
        let model = uniform_model(3, 5);
        let obs = Observation::new("t", vec![0, 4, 2, 2, 1, 3]).unwrap();
        let a = pvwp(&obs, &model, 20, 9).unwrap();
        let b = pvwp(&obs, &model, 20, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a <= 0.0);
    }

    #[test]
    fn pvwp_dataset_is_the_mean_and_reuses_id_seeds() {
        let model = uniform_model(2, 3);
        let corpus = LabeledCorpus::parse("#vocab w0 w1 w2\n-\tw0 w1\n-\tw2 w2 w1\n".as_bytes()).unwrap();
        let seed = 11;
        let d = pvwp_dataset(&corpus, &model, 10, seed).unwrap();
        let p0 = pvwp(&corpus.observations[0], &model, 10, seeds::derive_tagged(seed, "o0")).unwrap();
        let p1 = pvwp(&corpus.observations[1], &model, 10, seeds::derive_tagged(seed, "o1")).unwrap();
        assert!(approx(d, (p0 + p1) / 2.0, 1e-15));

        // duplicating the corpus reuses per-id seeds, so the mean is unchanged
        let doubled = LabeledCorpus::new(
            corpus.vocabulary.clone(),
            corpus
                .observations
                .iter()
                .chain(corpus.observations.iter())
                .cloned()
                .collect(),
            vec![None; 4],
            vec![],
        )
        .unwrap();
        let d2 = pvwp_dataset(&doubled, &model, 10, seed).unwrap();
        assert!(approx(d, d2, 1e-15));
    }

    #[test]
    fn generalizability_branches() {
        // clamp branch
        assert_eq!(generalizability_from_pvwp(-1.0, -1.5, 1.0), 1.0);
        // boundary: exp(pvwp) == c * exp(baseline)
        assert_eq!(generalizability_from_pvwp(-1.5, -1.5, 1.0), 1.0);
        // baseline - ln 2 at c = 1
        let g = generalizability_from_pvwp(-1.5 - 2.0f64.ln(), -1.5, 1.0);
        assert!(approx(g, 0.5, 1e-12));
        // pvwp equal to baseline at c = 2
        let g = generalizability_from_pvwp(-1.5, -1.5, 2.0);
        assert!(approx(g, 0.5, 1e-12));
    }

    #[test]
    fn generalizability_requires_a_baseline() {
        let model = uniform_model(2, 3);
        let obs = Observation::new("t", vec![0]).unwrap();
        let cfg = NoveltyConfig::default();
        assert!(matches!(
            generalizability(&obs, &model, &cfg, 5, 1),
            Err(ReflectionError::BaselineUnset)
        ));
    }

    #[test]
    fn generalizability_is_nonincreasing_in_c() {
        let mut last = f64::INFINITY;
        for c in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let g = generalizability_from_pvwp(-2.0, -1.5, c);
            assert!(g <= last);
            assert!(g > 0.0 && g <= 1.0);
            last = g;
        }
    }

    #[test]
    fn novelty_config_validates() {
        assert!(NoveltyConfig::new(0.5, 0.5).is_err());
        assert!(NoveltyConfig::new(1.0, 1.0).is_err());
        let cfg = NoveltyConfig::new(1.0, 0.5).unwrap();
        assert!(cfg.is_novel(0.4));
        assert!(!cfg.is_novel(0.6));
    }

    #[test]
    fn pearson_cases() {
        let x = [0.1, 0.5, 0.9];
        assert!(approx(pearson_rho(&x, &x).unwrap(), 1.0, 1e-12));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(approx(pearson_rho(&x, &neg).unwrap(), -1.0, 1e-12));
        assert!(approx(
            pearson_rho(&[0.0, 1.0, 2.0], &[0.0, 2.0, 4.0]).unwrap(),
            1.0,
            1e-12
        ));
        assert!(matches!(
            pearson_rho(&[1.0, 1.0], &[0.0, 1.0]),
            Err(ReflectionError::ZeroVariance)
        ));
        assert!(pearson_rho(&[1.0], &[1.0]).is_err());
    }

    fn rec(id: &str, ii: f64, ig: f64) -> IndicatorRecord {
        IndicatorRecord { obs_id: id.into(), i_i: Some(ii), i_g: ig, i_a: Some(true), pvwp: -1.0 }
    }

    #[test]
    fn prob_ii_le_ig_cases() {
        assert_eq!(prob_ii_le_ig(&[rec("a", 0.5, 0.5)]).unwrap(), 1.0);
        assert_eq!(prob_ii_le_ig(&[rec("a", 0.9, 0.5)]).unwrap(), 0.0);
        assert_eq!(prob_ii_le_ig(&[rec("a", 0.2, 0.5), rec("b", 0.9, 0.5)]).unwrap(), 0.5);
        assert!(matches!(prob_ii_le_ig(&[]), Err(ReflectionError::EmptyInput)));
        let missing = IndicatorRecord {
            obs_id: "x".into(),
            i_i: None,
            i_g: 0.5,
            i_a: None,
            pvwp: -1.0,
        };
        assert!(prob_ii_le_ig(&[missing]).is_err());
    }

    #[test]
    fn csv_uses_six_decimals_and_empty_fields() {
        let records = vec![
            rec("a", 0.482142857, 0.75),
            IndicatorRecord { obs_id: "b".into(), i_i: None, i_g: 0.5, i_a: None, pvwp: -2.0 },
        ];
        let mut out = Vec::new();
        write_indicator_csv(&records, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "obs_id,i_i,i_g,i_a,pvwp");
        assert_eq!(lines[1], "a,0.482143,0.750000,1,-1.000000");
        assert_eq!(lines[2], "b,,0.500000,,-2.000000");
    }
}
