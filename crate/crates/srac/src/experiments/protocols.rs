//! The five experiment protocols with their record and aggregate types.
//!
//! Runners return `(records, aggregates)`; aggregates are always computed
//! from the records by the same function the auditor uses, so a stored
//! report can be re-derived from its CSV. Work items (repeats, folds,
//! trials) carry derived seeds and may run in parallel without affecting
//! output order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    replace_words, round_half_up, split_exhaustive, split_nonexhaustive, synth_overlap_observation,
    LabeledCorpus, Observation, SplitSpec,
};
use crate::lda::{
    estimate_theta, map_topics_to_categories, sample_index, train_gibbs, Hyperparameters,
    TrainedTopicModel,
};
use crate::reflection::{
    accuracy, generalizability_from_pvwp, interpretability, pearson_rho, prob_ii_le_ig, pvwp,
    IndicatorRecord, ReflectionError,
};
use crate::risk::{parse_risk_matrix, select_action, RiskMatrix};
use crate::seeds;

use super::{ExperimentConfig, ExperimentError, SimConfig};

// ---------------------------------------------------------------------------
// shared machinery
// ---------------------------------------------------------------------------

/// Inference and scoring parameters shared by protocol evaluations.
#[derive(Debug, Clone, Copy)]
pub struct EvalParams {
    pub theta_sweeps: usize,
    pub theta_burn_in: usize,
    pub particles: usize,
    pub c: f64,
}

impl EvalParams {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        EvalParams {
            theta_sweeps: cfg.theta_sweeps,
            theta_burn_in: cfg.theta_burn_in,
            particles: cfg.particles,
            c: cfg.novelty.c,
        }
    }
}

/// Indicator records for a batch of observations under one model.
///
/// `i_i`/`i_a` are filled when the observation is labeled, the model has a
/// topic mapping covering that label, and K >= 2. Per-observation seeds
/// derive from the observation id.
pub fn evaluate_observations(
    model: &TrainedTopicModel,
    observations: &[Observation],
    labels: &[Option<usize>],
    category_names: &[String],
    params: &EvalParams,
    seed: u64,
) -> Result<Vec<IndicatorRecord>, ExperimentError> {
    let baseline =
        model.valid_pvwp_baseline().ok_or(ReflectionError::BaselineUnset)?;
    let records: Vec<Result<IndicatorRecord, ExperimentError>> = observations
        .par_iter()
        .zip(labels.par_iter())
        .map(|(obs, label)| {
            let s = seeds::derive_tagged(seed, &obs.id);
            let theta = estimate_theta(
                model,
                obs,
                params.theta_sweeps,
                params.theta_burn_in,
                seeds::derive(s, 0),
            )?;
            let pv = pvwp(obs, model, params.particles, seeds::derive(s, 1))?;
            let i_g = generalizability_from_pvwp(pv, baseline, params.c);
            let ground_truth = label
                .and_then(|c| category_names.get(c))
                .and_then(|name| model.topic_for_category(name));
            let (i_i, i_a) = match ground_truth {
                Some(topic) if model.k() >= 2 => (
                    Some(interpretability(theta.theta(), topic)?),
                    Some(accuracy(theta.theta(), topic)?),
                ),
                _ => (None, None),
            };
            Ok(IndicatorRecord { obs_id: obs.id.clone(), i_i, i_g, i_a, pvwp: pv })
        })
        .collect();
    records.into_iter().collect()
}

struct CvOutcome {
    model: TrainedTopicModel,
    /// (fold, obs_id, pvwp) for every validation document.
    fold_records: Vec<(usize, String, f64)>,
}

fn stratified_folds(
    corpus: &LabeledCorpus,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ExperimentError> {
    use rand::seq::SliceRandom;
    if folds > corpus.len() {
        return Err(ExperimentError::Infeasible(format!(
            "{} folds over {} observations",
            folds,
            corpus.len()
        )));
    }
    let mut assignment = vec![Vec::new(); folds];
    let mut deal = |mut members: Vec<usize>, stream: u64| {
        let mut rng = seeds::rng(seeds::derive(seed, stream));
        members.shuffle(&mut rng);
        for (i, m) in members.into_iter().enumerate() {
            assignment[i % folds].push(m);
        }
    };
    if corpus.is_fully_labeled() && corpus.n_categories() > 0 {
        for (c, members) in corpus.by_category().into_iter().enumerate() {
            deal(members, c as u64);
        }
    } else {
        deal((0..corpus.len()).collect(), u64::MAX);
    }
    for fold in &mut assignment {
        fold.sort_unstable();
        if fold.is_empty() {
            return Err(ExperimentError::Infeasible("empty cross-validation fold".into()));
        }
    }
    Ok(assignment)
}

/// Trains on all data and attaches the cross-validation Pvwp baseline: the
/// mean over folds of each fold model's mean validation Pvwp.
fn train_with_cv_baseline(
    corpus: &LabeledCorpus,
    k: usize,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<CvOutcome, ExperimentError> {
    let hyper = Hyperparameters::symmetric(k, cfg.alpha, cfg.beta, corpus.vocabulary.len())?;
    let folds = stratified_folds(corpus, cfg.folds, seeds::derive_tagged(seed, "folds"))?;

    let per_fold: Vec<Result<(f64, Vec<(usize, String, f64)>), ExperimentError>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, validation)| {
            let train_idx: Vec<usize> = (0..corpus.len())
                .filter(|i| !validation.contains(i))
                .collect();
            if train_idx.is_empty() {
                return Err(ExperimentError::Infeasible("empty training fold".into()));
            }
            let train = corpus.subset(&train_idx)?;
            let fold_model =
                train_gibbs(&train, hyper.clone(), cfg.train_iters, seeds::derive(seed, f as u64))?;
            let eval_seed = seeds::derive(seeds::derive_tagged(seed, "cv-eval"), f as u64);
            let mut records = Vec::with_capacity(validation.len());
            for &i in validation {
                let obs = &corpus.observations[i];
                let pv = pvwp(
                    obs,
                    &fold_model,
                    cfg.particles,
                    seeds::derive_tagged(eval_seed, &obs.id),
                )?;
                records.push((f, obs.id.clone(), pv));
            }
            let mean = records.iter().map(|r| r.2).sum::<f64>() / records.len() as f64;
            Ok((mean, records))
        })
        .collect();

    let mut fold_means = Vec::new();
    let mut fold_records = Vec::new();
    for r in per_fold {
        let (mean, records) = r?;
        fold_means.push(mean);
        fold_records.extend(records);
    }
    let baseline = fold_means.iter().sum::<f64>() / fold_means.len() as f64;
    let model = train_gibbs(corpus, hyper, cfg.train_iters, seeds::derive_tagged(seed, "final"))?
        .with_baseline(baseline)?;
    Ok(CvOutcome { model, fold_records })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

fn parse_csv<'a>(text: &'a str, header: &[&str]) -> Result<Vec<Vec<&'a str>>, ExperimentError> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| ExperimentError::BadReport("empty records file".into()))?;
    if first != header.join(",") {
        return Err(ExperimentError::BadReport(format!("unexpected header '{first}'")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(ExperimentError::BadReport(format!(
                "row {}: {} cells, expected {}",
                idx + 2,
                cells.len(),
                header.len()
            )));
        }
        rows.push(cells);
    }
    Ok(rows)
}

fn cell<T: std::str::FromStr>(v: &str, what: &str) -> Result<T, ExperimentError> {
    v.parse().map_err(|_| ExperimentError::BadReport(format!("bad {what} cell '{v}'")))
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip formatting; audit re-parses these exactly.
    format!("{v}")
}

// ---------------------------------------------------------------------------
// exhaustive protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveRecord {
    pub run: usize,
    pub obs_id: String,
    pub i_i: f64,
    pub i_g: f64,
    pub i_a: bool,
    pub pvwp: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMean {
    pub run: usize,
    pub n: usize,
    pub mean_i_i: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustiveAggregates {
    pub runs: Vec<RunMean>,
    pub mean_i_i: f64,
    pub std_i_i: f64,
    pub mean_i_a: f64,
    pub mean_i_g: f64,
    pub mean_pvwp: f64,
}

const EXHAUSTIVE_HEADER: [&str; 6] = ["run", "obs_id", "i_i", "i_g", "i_a", "pvwp"];

pub(super) fn exhaustive_rows(records: &[ExhaustiveRecord]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.run.to_string(),
                r.obs_id.clone(),
                fmt_f64(r.i_i),
                fmt_f64(r.i_g),
                u8::from(r.i_a).to_string(),
                fmt_f64(r.pvwp),
            ]
        })
        .collect();
    (EXHAUSTIVE_HEADER.to_vec(), rows)
}

pub(super) fn parse_exhaustive_rows(text: &str) -> Result<Vec<ExhaustiveRecord>, ExperimentError> {
    parse_csv(text, &EXHAUSTIVE_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(ExhaustiveRecord {
                run: cell(c[0], "run")?,
                obs_id: c[1].to_string(),
                i_i: cell(c[2], "i_i")?,
                i_g: cell(c[3], "i_g")?,
                i_a: cell::<u8>(c[4], "i_a")? != 0,
                pvwp: cell(c[5], "pvwp")?,
            })
        })
        .collect()
}

pub(super) fn exhaustive_aggregates(records: &[ExhaustiveRecord]) -> ExhaustiveAggregates {
    let n_runs = records.iter().map(|r| r.run).max().map_or(0, |m| m + 1);
    let mut runs = Vec::new();
    for run in 0..n_runs {
        let xs: Vec<f64> = records.iter().filter(|r| r.run == run).map(|r| r.i_i).collect();
        runs.push(RunMean { run, n: xs.len(), mean_i_i: mean(xs.into_iter()) });
    }
    let run_means: Vec<f64> = runs.iter().map(|r| r.mean_i_i).collect();
    let m = mean(run_means.iter().copied());
    let std = if run_means.len() >= 2 {
        let var = run_means.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
            / (run_means.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    ExhaustiveAggregates {
        runs,
        mean_i_i: m,
        std_i_i: std,
        mean_i_a: mean(records.iter().map(|r| f64::from(u8::from(r.i_a)))),
        mean_i_g: mean(records.iter().map(|r| r.i_g)),
        mean_pvwp: mean(records.iter().map(|r| r.pvwp)),
    }
}

/// Exhaustive protocol: stratified 75/25 split, cross-validated training,
/// topic mapping, interpretability on the held-out test set, repeated with
/// fresh seeds.
pub fn run_exhaustive(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ExhaustiveRecord>, ExhaustiveAggregates), ExperimentError> {
    let corpus = cfg.load_corpus()?;
    if !corpus.is_fully_labeled() {
        return Err(ExperimentError::Config("exhaustive protocol requires labels".into()));
    }
    if corpus.n_categories() < 2 {
        return Err(ExperimentError::Infeasible("need at least 2 categories".into()));
    }
    let k = cfg.k.unwrap_or(corpus.n_categories());
    if k != corpus.n_categories() {
        return Err(ExperimentError::Config(format!(
            "exhaustive protocol maps topics onto categories; k = {k} but corpus has {}",
            corpus.n_categories()
        )));
    }
    let params = EvalParams::from_config(cfg);

    let per_rep: Vec<Result<Vec<ExhaustiveRecord>, ExperimentError>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = seeds::derive(seeds::derive_tagged(cfg.seed, "rep"), rep as u64);
            let spec = SplitSpec::new(cfg.train_fraction, cfg.folds, seeds::derive_tagged(rep_seed, "split"));
            let (train, test) = split_exhaustive(&corpus, &spec)?;
            if test.is_empty() {
                return Err(ExperimentError::Infeasible("empty testing set".into()));
            }
            let cv = train_with_cv_baseline(&train, k, cfg, seeds::derive_tagged(rep_seed, "cv"))?;
            let model = map_topics_to_categories(
                &cv.model,
                &train,
                cfg.theta_sweeps,
                cfg.theta_burn_in,
                seeds::derive_tagged(rep_seed, "map"),
            )?;
            let recs = evaluate_observations(
                &model,
                &test.observations,
                &test.labels,
                &test.category_names,
                &params,
                seeds::derive_tagged(rep_seed, "eval"),
            )?;
            Ok(recs
                .into_iter()
                .map(|r| ExhaustiveRecord {
                    run: rep,
                    obs_id: format!("run{rep}-{}", r.obs_id),
                    i_i: r.i_i.expect("labeled, mapped, K >= 2"),
                    i_g: r.i_g,
                    i_a: r.i_a.expect("labeled, mapped"),
                    pvwp: r.pvwp,
                })
                .collect())
        })
        .collect();

    let mut records = Vec::new();
    for r in per_rep {
        records.extend(r?);
    }
    let aggregates = exhaustive_aggregates(&records);
    Ok((records, aggregates))
}

// ---------------------------------------------------------------------------
// nonexhaustive protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct NonexhaustiveRecord {
    pub fold: usize,
    pub set: String,
    pub obs_id: String,
    pub pvwp: f64,
    pub i_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldGap {
    pub fold: usize,
    pub mean_ig_known: f64,
    pub mean_ig_unknown: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonexhaustiveAggregates {
    pub folds: Vec<FoldGap>,
    pub mean_pvwp_valid: f64,
    pub mean_pvwp_known: f64,
    pub mean_pvwp_unknown: f64,
    pub mean_ig_valid: f64,
    pub mean_ig_known: f64,
    pub mean_ig_unknown: f64,
    pub ig_gap: f64,
}

const NONEXHAUSTIVE_HEADER: [&str; 5] = ["fold", "set", "obs_id", "pvwp", "i_g"];

pub(super) fn nonexhaustive_rows(
    records: &[NonexhaustiveRecord],
) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.fold.to_string(),
                r.set.clone(),
                r.obs_id.clone(),
                fmt_f64(r.pvwp),
                fmt_f64(r.i_g),
            ]
        })
        .collect();
    (NONEXHAUSTIVE_HEADER.to_vec(), rows)
}

pub(super) fn parse_nonexhaustive_rows(
    text: &str,
) -> Result<Vec<NonexhaustiveRecord>, ExperimentError> {
    parse_csv(text, &NONEXHAUSTIVE_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(NonexhaustiveRecord {
                fold: cell(c[0], "fold")?,
                set: c[1].to_string(),
                obs_id: c[2].to_string(),
                pvwp: cell(c[3], "pvwp")?,
                i_g: cell(c[4], "i_g")?,
            })
        })
        .collect()
}

pub(super) fn nonexhaustive_aggregates(records: &[NonexhaustiveRecord]) -> NonexhaustiveAggregates {
    let n_folds = records.iter().map(|r| r.fold).max().map_or(0, |m| m + 1);
    let mut folds = Vec::new();
    for f in 0..n_folds {
        let known = mean(
            records.iter().filter(|r| r.fold == f && r.set == "known").map(|r| r.i_g),
        );
        let unknown = mean(
            records.iter().filter(|r| r.fold == f && r.set == "unknown").map(|r| r.i_g),
        );
        folds.push(FoldGap { fold: f, mean_ig_known: known, mean_ig_unknown: unknown, gap: known - unknown });
    }
    let sel = |set: &'static str| records.iter().filter(move |r| r.set == set);
    let mean_ig_known = mean(sel("known").map(|r| r.i_g));
    let mean_ig_unknown = mean(sel("unknown").map(|r| r.i_g));
    NonexhaustiveAggregates {
        folds,
        mean_pvwp_valid: mean(sel("valid").map(|r| r.pvwp)),
        mean_pvwp_known: mean(sel("known").map(|r| r.pvwp)),
        mean_pvwp_unknown: mean(sel("unknown").map(|r| r.pvwp)),
        mean_ig_valid: mean(sel("valid").map(|r| r.i_g)),
        mean_ig_known,
        mean_ig_unknown,
        ig_gap: mean_ig_known - mean_ig_unknown,
    }
}

/// Control split: no category is truly held out; the "unknown" set is a
/// fresh sample of category `pseudo` whose remaining instances stay in
/// training.
fn control_split(
    corpus: &LabeledCorpus,
    spec: &SplitSpec,
    pseudo: usize,
) -> Result<(LabeledCorpus, LabeledCorpus, LabeledCorpus), ExperimentError> {
    use rand::seq::SliceRandom;
    let mut train_idx = Vec::new();
    let mut known_idx = Vec::new();
    let mut unknown_idx = Vec::new();
    for (c, mut members) in corpus.by_category().into_iter().enumerate() {
        if members.is_empty() {
            return Err(ExperimentError::Infeasible(format!(
                "category '{}' has no instances",
                corpus.category_names[c]
            )));
        }
        let n_test = round_half_up((1.0 - spec.train_fraction) * members.len() as f64);
        if members.len() - n_test < spec.folds {
            return Err(ExperimentError::Infeasible(format!(
                "category '{}' leaves fewer training instances than folds",
                corpus.category_names[c]
            )));
        }
        let mut rng = seeds::rng(seeds::derive(spec.seed, c as u64));
        members.shuffle(&mut rng);
        let (test, train) = members.split_at(n_test);
        if c == pseudo {
            unknown_idx.extend_from_slice(test);
        } else {
            known_idx.extend_from_slice(test);
        }
        train_idx.extend_from_slice(train);
    }
    train_idx.sort_unstable();
    known_idx.sort_unstable();
    unknown_idx.sort_unstable();
    Ok((
        corpus.subset(&train_idx)?,
        corpus.subset(&known_idx)?,
        corpus.subset(&unknown_idx)?,
    ))
}

/// Non-exhaustive protocol: each category in turn becomes the unknown
/// testing set; Pvwp and I_G are reported for validation, known, and
/// unknown sets. With `control = true` no category is withheld and the
/// unknown set is drawn from a training category instead.
pub fn run_nonexhaustive(
    cfg: &ExperimentConfig,
) -> Result<(Vec<NonexhaustiveRecord>, NonexhaustiveAggregates), ExperimentError> {
    let corpus = cfg.load_corpus()?;
    if !corpus.is_fully_labeled() {
        return Err(ExperimentError::Config("nonexhaustive protocol requires labels".into()));
    }
    let n_cat = corpus.n_categories();
    if n_cat < 2 {
        return Err(ExperimentError::Infeasible("need at least 2 categories".into()));
    }

    let per_fold: Vec<Result<Vec<NonexhaustiveRecord>, ExperimentError>> = (0..n_cat)
        .into_par_iter()
        .map(|h| {
            let fold_seed = seeds::derive(seeds::derive_tagged(cfg.seed, "fold"), h as u64);
            let spec = SplitSpec::new(cfg.train_fraction, cfg.folds, seeds::derive_tagged(fold_seed, "split"))
                .with_holdout(h);
            let (train, known, unknown) = if cfg.control {
                control_split(&corpus, &spec, h)?
            } else {
                split_nonexhaustive(&corpus, &spec)?
            };
            let present = train.by_category().iter().filter(|g| !g.is_empty()).count();
            let k = cfg.k.unwrap_or(present);
            let cv = train_with_cv_baseline(&train, k, cfg, seeds::derive_tagged(fold_seed, "cv"))?;
            let baseline = cv.model.valid_pvwp_baseline().expect("baseline just attached");

            let mut records = Vec::new();
            for (_, obs_id, pv) in &cv.fold_records {
                records.push(NonexhaustiveRecord {
                    fold: h,
                    set: "valid".into(),
                    obs_id: format!("h{h}-{obs_id}"),
                    pvwp: *pv,
                    i_g: generalizability_from_pvwp(*pv, baseline, cfg.novelty.c),
                });
            }
            let eval_seed = seeds::derive_tagged(fold_seed, "eval");
            for (set, part) in [("known", &known), ("unknown", &unknown)] {
                for obs in &part.observations {
                    let pv = pvwp(
                        obs,
                        &cv.model,
                        cfg.particles,
                        seeds::derive_tagged(eval_seed, &obs.id),
                    )?;
                    records.push(NonexhaustiveRecord {
                        fold: h,
                        set: set.into(),
                        obs_id: format!("h{h}-{}", obs.id),
                        pvwp: pv,
                        i_g: generalizability_from_pvwp(pv, baseline, cfg.novelty.c),
                    });
                }
            }
            Ok(records)
        })
        .collect();

    let mut records = Vec::new();
    for r in per_fold {
        records.extend(r?);
    }
    let aggregates = nonexhaustive_aggregates(&records);
    Ok((records, aggregates))
}

// ---------------------------------------------------------------------------
// overlap sweep protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRecord {
    pub rate: f64,
    pub obs_id: String,
    pub pvwp: f64,
    pub i_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatePoint {
    pub rate: f64,
    pub n: usize,
    pub mean_i_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapAggregates {
    pub rates: Vec<RatePoint>,
    pub strictly_increasing: bool,
    pub pearson_rate_ig: Option<f64>,
}

const OVERLAP_HEADER: [&str; 4] = ["rate", "obs_id", "pvwp", "i_g"];

pub(super) fn overlap_rows(records: &[OverlapRecord]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = records
        .iter()
        .map(|r| vec![fmt_f64(r.rate), r.obs_id.clone(), fmt_f64(r.pvwp), fmt_f64(r.i_g)])
        .collect();
    (OVERLAP_HEADER.to_vec(), rows)
}

pub(super) fn parse_overlap_rows(text: &str) -> Result<Vec<OverlapRecord>, ExperimentError> {
    parse_csv(text, &OVERLAP_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(OverlapRecord {
                rate: cell(c[0], "rate")?,
                obs_id: c[1].to_string(),
                pvwp: cell(c[2], "pvwp")?,
                i_g: cell(c[3], "i_g")?,
            })
        })
        .collect()
}

pub(super) fn overlap_aggregates(records: &[OverlapRecord]) -> OverlapAggregates {
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(rate, _)| rate.to_bits() == r.rate.to_bits()) {
            Some((_, v)) => v.push(r.i_g),
            None => groups.push((r.rate, vec![r.i_g])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let rates: Vec<RatePoint> = groups
        .iter()
        .map(|(rate, v)| RatePoint { rate: *rate, n: v.len(), mean_i_g: mean(v.iter().copied()) })
        .collect();
    let strictly_increasing = rates.windows(2).all(|w| w[0].mean_i_g < w[1].mean_i_g);
    let xs: Vec<f64> = rates.iter().map(|r| r.rate).collect();
    let ys: Vec<f64> = rates.iter().map(|r| r.mean_i_g).collect();
    let pearson_rate_ig = pearson_rho(&xs, &ys).ok();
    OverlapAggregates { rates, strictly_increasing, pearson_rate_ig }
}

/// Overlap sweep: trains a "known" model on the first half of the
/// categories and a "novel" model on the second half, then measures mean
/// I_G of mixed observations as the proportion of known-model words grows.
pub fn run_overlap_sweep(
    cfg: &ExperimentConfig,
) -> Result<(Vec<OverlapRecord>, OverlapAggregates), ExperimentError> {
    let corpus = cfg.load_corpus()?;
    if !corpus.is_fully_labeled() {
        return Err(ExperimentError::Config("overlap sweep requires labels".into()));
    }
    let n_cat = corpus.n_categories();
    if n_cat < 2 || n_cat % 2 != 0 {
        return Err(ExperimentError::Config(format!(
            "overlap sweep needs an even category count >= 2, got {n_cat}"
        )));
    }
    let half = n_cat / 2;
    let groups = corpus.by_category();
    let known_idx: Vec<usize> = groups[..half].iter().flatten().copied().collect();
    let novel_idx: Vec<usize> = groups[half..].iter().flatten().copied().collect();
    let known_corpus = corpus.subset(&known_idx)?;
    let novel_corpus = corpus.subset(&novel_idx)?;

    let cv = train_with_cv_baseline(&known_corpus, half, cfg, seeds::derive_tagged(cfg.seed, "known"))?;
    let known_model = cv.model;
    let novel_hyper =
        Hyperparameters::symmetric(n_cat - half, cfg.alpha, cfg.beta, corpus.vocabulary.len())?;
    let novel_model = train_gibbs(
        &novel_corpus,
        novel_hyper,
        cfg.train_iters,
        seeds::derive_tagged(cfg.seed, "novel"),
    )?;
    let baseline = known_model.valid_pvwp_baseline().expect("baseline attached");

    let sweep_seed = seeds::derive_tagged(cfg.seed, "sweep");
    let jobs: Vec<(usize, usize)> = (0..cfg.overlap_rates.len())
        .flat_map(|ri| (0..cfg.sweep_instances).map(move |i| (ri, i)))
        .collect();
    let records: Vec<Result<OverlapRecord, ExperimentError>> = jobs
        .par_iter()
        .map(|&(ri, i)| {
            let rate = cfg.overlap_rates[ri];
            let s = seeds::derive(sweep_seed, (ri * cfg.sweep_instances + i) as u64);
            let mut obs =
                synth_overlap_observation(&known_model, &novel_model, rate, cfg.sweep_doc_len, s)?;
            obs.id = format!("r{ri}-i{i}");
            let pv = pvwp(&obs, &known_model, cfg.particles, seeds::derive(s, 3))?;
            Ok(OverlapRecord {
                rate,
                obs_id: obs.id,
                pvwp: pv,
                i_g: generalizability_from_pvwp(pv, baseline, cfg.novelty.c),
            })
        })
        .collect();
    let records: Vec<OverlapRecord> = records.into_iter().collect::<Result<_, _>>()?;
    let aggregates = overlap_aggregates(&records);
    Ok((records, aggregates))
}

// ---------------------------------------------------------------------------
// semi-exhaustive protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SemiExhaustiveRecord {
    pub fold: usize,
    pub rate: f64,
    pub obs_id: String,
    pub i_i: f64,
    pub i_g: f64,
    pub i_a: bool,
    pub pvwp: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateMeans {
    pub rate: f64,
    pub n: usize,
    pub mean_i_i: f64,
    pub mean_i_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemiExhaustiveAggregates {
    pub rho_ig: Option<f64>,
    pub p_ii_le_ig: f64,
    pub n_records: usize,
    pub per_rate: Vec<RateMeans>,
}

const SEMI_HEADER: [&str; 7] = ["fold", "rate", "obs_id", "i_i", "i_g", "i_a", "pvwp"];

pub(super) fn semi_exhaustive_rows(
    records: &[SemiExhaustiveRecord],
) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.fold.to_string(),
                fmt_f64(r.rate),
                r.obs_id.clone(),
                fmt_f64(r.i_i),
                fmt_f64(r.i_g),
                u8::from(r.i_a).to_string(),
                fmt_f64(r.pvwp),
            ]
        })
        .collect();
    (SEMI_HEADER.to_vec(), rows)
}

pub(super) fn parse_semi_exhaustive_rows(
    text: &str,
) -> Result<Vec<SemiExhaustiveRecord>, ExperimentError> {
    parse_csv(text, &SEMI_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(SemiExhaustiveRecord {
                fold: cell(c[0], "fold")?,
                rate: cell(c[1], "rate")?,
                obs_id: c[2].to_string(),
                i_i: cell(c[3], "i_i")?,
                i_g: cell(c[4], "i_g")?,
                i_a: cell::<u8>(c[5], "i_a")? != 0,
                pvwp: cell(c[6], "pvwp")?,
            })
        })
        .collect()
}

pub(super) fn semi_exhaustive_aggregates(
    records: &[SemiExhaustiveRecord],
) -> SemiExhaustiveAggregates {
    let ii: Vec<f64> = records.iter().map(|r| r.i_i).collect();
    let ig: Vec<f64> = records.iter().map(|r| r.i_g).collect();
    let rho_ig = pearson_rho(&ii, &ig).ok();
    let indicator_records: Vec<IndicatorRecord> = records
        .iter()
        .map(|r| IndicatorRecord {
            obs_id: r.obs_id.clone(),
            i_i: Some(r.i_i),
            i_g: r.i_g,
            i_a: Some(r.i_a),
            pvwp: r.pvwp,
        })
        .collect();
    let p_ii_le_ig = prob_ii_le_ig(&indicator_records).unwrap_or(f64::NAN);

    let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(rate, _)| rate.to_bits() == r.rate.to_bits()) {
            Some((_, v)) => v.push((r.i_i, r.i_g)),
            None => groups.push((r.rate, vec![(r.i_i, r.i_g)])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let per_rate = groups
        .iter()
        .map(|(rate, v)| RateMeans {
            rate: *rate,
            n: v.len(),
            mean_i_i: mean(v.iter().map(|p| p.0)),
            mean_i_g: mean(v.iter().map(|p| p.1)),
        })
        .collect();
    SemiExhaustiveAggregates { rho_ig, p_ii_le_ig, n_records: records.len(), per_rate }
}

/// Corpus with category `drop` removed and the remaining labels re-indexed.
fn remove_category(
    corpus: &LabeledCorpus,
    drop: usize,
) -> Result<LabeledCorpus, ExperimentError> {
    let keep: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus.labels[i] != Some(drop))
        .collect();
    let observations: Vec<Observation> = keep.iter().map(|&i| corpus.observations[i].clone()).collect();
    let labels: Vec<Option<usize>> = keep
        .iter()
        .map(|&i| corpus.labels[i].map(|c| if c > drop { c - 1 } else { c }))
        .collect();
    let mut names = corpus.category_names.clone();
    names.remove(drop);
    Ok(LabeledCorpus::new(corpus.vocabulary.clone(), observations, labels, names)?)
}

/// Semi-exhaustive protocol: per fold one category is treated as novel; its
/// empirical word distribution corrupts the initial testing set at each
/// replacement rate, and the (I_I, I_G) relationship is pooled over folds.
pub fn run_semi_exhaustive(
    cfg: &ExperimentConfig,
) -> Result<(Vec<SemiExhaustiveRecord>, SemiExhaustiveAggregates), ExperimentError> {
    let corpus = cfg.load_corpus()?;
    if !corpus.is_fully_labeled() {
        return Err(ExperimentError::Config("semi-exhaustive protocol requires labels".into()));
    }
    let n_cat = corpus.n_categories();
    if n_cat < 3 {
        return Err(ExperimentError::Infeasible(
            "need at least 3 categories (2 must remain after the novel one is removed)".into(),
        ));
    }
    if cfg.replacement_rates.is_empty() {
        return Err(ExperimentError::Config("replacement_rates must not be empty".into()));
    }
    let params = EvalParams::from_config(cfg);

    let per_fold: Vec<Result<Vec<SemiExhaustiveRecord>, ExperimentError>> = (0..n_cat)
        .into_par_iter()
        .map(|f| {
            let fold_seed = seeds::derive(seeds::derive_tagged(cfg.seed, "semifold"), f as u64);
            let novel_members: Vec<usize> = (0..corpus.len())
                .filter(|&i| corpus.labels[i] == Some(f))
                .collect();
            if novel_members.is_empty() {
                return Err(ExperimentError::Infeasible(format!(
                    "category '{}' has no instances",
                    corpus.category_names[f]
                )));
            }
            let donor = corpus.empirical_distribution(Some(&novel_members));
            let rest = remove_category(&corpus, f)?;
            let spec = SplitSpec::new(
                cfg.train_fraction,
                cfg.folds,
                seeds::derive_tagged(fold_seed, "split"),
            );
            let (train, initial_test) = split_exhaustive(&rest, &spec)?;
            if initial_test.is_empty() {
                return Err(ExperimentError::Infeasible("empty initial testing set".into()));
            }
            let cv = train_with_cv_baseline(&train, n_cat - 1, cfg, seeds::derive_tagged(fold_seed, "cv"))?;
            let model = map_topics_to_categories(
                &cv.model,
                &train,
                cfg.theta_sweeps,
                cfg.theta_burn_in,
                seeds::derive_tagged(fold_seed, "map"),
            )?;

            let mut fold_records = Vec::new();
            for (ri, &rate) in cfg.replacement_rates.iter().enumerate() {
                let mut corrupted = Vec::with_capacity(initial_test.len());
                for obs in &initial_test.observations {
                    let s = seeds::derive_tagged(fold_seed, &format!("replace-{ri}-{}", obs.id));
                    let mut replaced = replace_words(obs, &donor, rate, s)?;
                    replaced.id = format!("f{f}-r{ri}-{}", obs.id);
                    corrupted.push(replaced);
                }
                let recs = evaluate_observations(
                    &model,
                    &corrupted,
                    &initial_test.labels,
                    &initial_test.category_names,
                    &params,
                    seeds::derive_tagged(fold_seed, &format!("eval-{ri}")),
                )?;
                for r in recs {
                    fold_records.push(SemiExhaustiveRecord {
                        fold: f,
                        rate,
                        obs_id: r.obs_id,
                        i_i: r.i_i.expect("labeled, mapped, K >= 2"),
                        i_g: r.i_g,
                        i_a: r.i_a.expect("labeled, mapped"),
                        pvwp: r.pvwp,
                    });
                }
            }
            Ok(fold_records)
        })
        .collect();

    let mut records = Vec::new();
    for r in per_fold {
        records.extend(r?);
    }
    let aggregates = semi_exhaustive_aggregates(&records);
    Ok((records, aggregates))
}

// ---------------------------------------------------------------------------
// decision simulation protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub variant: String,
    pub case: u8,
    pub style_rate: f64,
    pub novel_rate: f64,
    pub rep: usize,
    pub behavior: String,
    pub role: String,
    pub trial: usize,
    pub i_g: f64,
    pub pvwp: f64,
    pub srac_action: usize,
    pub baseline_action: usize,
    pub ideal_action: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRates {
    pub fail_to_assist: f64,
    pub fail_to_follow: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRates {
    pub case: u8,
    pub trials: usize,
    pub srac: FailureRates,
    pub baseline: FailureRates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub case: u8,
    pub style_rate: f64,
    pub novel_rate: f64,
    pub trials: usize,
    pub srac: FailureRates,
    pub baseline: FailureRates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionAggregates {
    pub cases: Vec<CaseRates>,
    pub sensitivity: Vec<SensitivityPoint>,
}

const DECISION_HEADER: [&str; 13] = [
    "variant",
    "case",
    "style_rate",
    "novel_rate",
    "rep",
    "behavior",
    "role",
    "trial",
    "i_g",
    "pvwp",
    "srac_action",
    "baseline_action",
    "ideal_action",
];

pub(super) fn decision_rows(records: &[DecisionRecord]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.variant.clone(),
                r.case.to_string(),
                fmt_f64(r.style_rate),
                fmt_f64(r.novel_rate),
                r.rep.to_string(),
                r.behavior.clone(),
                r.role.clone(),
                r.trial.to_string(),
                fmt_f64(r.i_g),
                fmt_f64(r.pvwp),
                r.srac_action.to_string(),
                r.baseline_action.to_string(),
                r.ideal_action.to_string(),
            ]
        })
        .collect();
    (DECISION_HEADER.to_vec(), rows)
}

pub(super) fn parse_decision_rows(text: &str) -> Result<Vec<DecisionRecord>, ExperimentError> {
    parse_csv(text, &DECISION_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(DecisionRecord {
                variant: c[0].to_string(),
                case: cell(c[1], "case")?,
                style_rate: cell(c[2], "style_rate")?,
                novel_rate: cell(c[3], "novel_rate")?,
                rep: cell(c[4], "rep")?,
                behavior: c[5].to_string(),
                role: c[6].to_string(),
                trial: cell(c[7], "trial")?,
                i_g: cell(c[8], "i_g")?,
                pvwp: cell(c[9], "pvwp")?,
                srac_action: cell(c[10], "srac_action")?,
                baseline_action: cell(c[11], "baseline_action")?,
                ideal_action: cell(c[12], "ideal_action")?,
            })
        })
        .collect()
}

fn failure_rates<'a>(records: impl Iterator<Item = &'a DecisionRecord> + Clone) -> (FailureRates, FailureRates) {
    let rate = |chosen: fn(&DecisionRecord) -> usize, role: &str| {
        let subset = records.clone().filter(|r| r.role == role);
        mean(subset.map(|r| f64::from(u8::from(chosen(r) != r.ideal_action))))
    };
    (
        FailureRates {
            fail_to_assist: rate(|r| r.srac_action, "assist"),
            fail_to_follow: rate(|r| r.srac_action, "follow"),
        },
        FailureRates {
            fail_to_assist: rate(|r| r.baseline_action, "assist"),
            fail_to_follow: rate(|r| r.baseline_action, "follow"),
        },
    )
}

pub(super) fn decision_aggregates(records: &[DecisionRecord]) -> DecisionAggregates {
    let mut cases = Vec::new();
    for case in [1u8, 2] {
        let subset: Vec<&DecisionRecord> =
            records.iter().filter(|r| r.variant == "main" && r.case == case).collect();
        if subset.is_empty() {
            continue;
        }
        let (srac, baseline) = failure_rates(subset.iter().copied());
        cases.push(CaseRates { case, trials: subset.len(), srac, baseline });
    }

    let mut sensitivity: Vec<SensitivityPoint> = Vec::new();
    for r in records.iter().filter(|r| r.variant == "sens") {
        let exists = sensitivity.iter().any(|p| {
            p.case == r.case
                && p.style_rate.to_bits() == r.style_rate.to_bits()
                && p.novel_rate.to_bits() == r.novel_rate.to_bits()
        });
        if exists {
            continue;
        }
        let subset: Vec<&DecisionRecord> = records
            .iter()
            .filter(|x| {
                x.variant == "sens"
                    && x.case == r.case
                    && x.style_rate.to_bits() == r.style_rate.to_bits()
                    && x.novel_rate.to_bits() == r.novel_rate.to_bits()
            })
            .collect();
        let (srac, baseline) = failure_rates(subset.iter().copied());
        sensitivity.push(SensitivityPoint {
            case: r.case,
            style_rate: r.style_rate,
            novel_rate: r.novel_rate,
            trials: subset.len(),
            srac,
            baseline,
        });
    }
    DecisionAggregates { cases, sensitivity }
}

/// The simulated behavior space: three behaviors over four vocabulary
/// blocks (one per behavior plus a reserved novel block), with cyclic
/// style confusion b -> b+1.
struct BehaviorWorld {
    corpus: LabeledCorpus,
    dists: Vec<Vec<f64>>,
    novel_dist: Vec<f64>,
    style_donor: Vec<Vec<f64>>,
}

fn build_world(
    sim: &SimConfig,
    names: &[String],
    seed: u64,
) -> Result<BehaviorWorld, ExperimentError> {
    use crate::corpus::Vocabulary;
    let block = sim.vocab_block;
    if block == 0 || sim.doc_len == 0 || sim.train_docs == 0 {
        return Err(ExperimentError::Config("sim sizes must be positive".into()));
    }
    let v = 4 * block;
    let mass_sum = sim.own_mass + sim.confuse_mass + sim.background_mass;
    if mass_sum <= 0.0 {
        return Err(ExperimentError::Config("sim masses must be positive".into()));
    }

    // Per-block word weights, including the reserved novel block.
    let mut block_weights = Vec::with_capacity(4);
    for b in 0..4u64 {
        let mut rng = seeds::rng(seeds::derive(seed, b));
        block_weights.push(crate::lda::sample_dirichlet(&vec![sim.concentration; block], &mut rng));
    }

    let mut dists = Vec::with_capacity(3);
    for b in 0..3usize {
        let confused = (b + 1) % 3;
        let mut p = vec![0.0f64; v];
        for w in 0..block {
            p[b * block + w] += sim.own_mass / mass_sum * block_weights[b][w];
            p[confused * block + w] += sim.confuse_mass / mass_sum * block_weights[confused][w];
        }
        for w in 0..3 * block {
            p[w] += sim.background_mass / mass_sum / (3 * block) as f64;
        }
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= sum);
        dists.push(p);
    }
    let mut novel_dist = vec![0.0f64; v];
    for w in 0..block {
        novel_dist[3 * block + w] = block_weights[3][w];
    }

    let vocab = Vocabulary::new((0..v).map(|i| format!("w{i}")))?;
    let mut observations = Vec::new();
    let mut labels = Vec::new();
    for (b, dist) in dists.iter().enumerate() {
        for d in 0..sim.train_docs {
            let mut rng = seeds::rng(seeds::derive(
                seeds::derive_tagged(seed, "train"),
                (b * sim.train_docs + d) as u64,
            ));
            let word_ids: Vec<usize> =
                (0..sim.doc_len).map(|_| sample_index(dist, &mut rng)).collect();
            observations.push(Observation::new(format!("b{b}-d{d}"), word_ids)?);
            labels.push(Some(b));
        }
    }
    let corpus = LabeledCorpus::new(vocab, observations, labels, names.to_vec())?;
    let style_donor = (0..3).map(|b| dists[(b + 1) % 3].clone()).collect();
    Ok(BehaviorWorld { corpus, dists, novel_dist, style_donor })
}

struct TrialSpec {
    variant: &'static str,
    case: u8,
    style_rate: f64,
    novel_rate: f64,
    rep: usize,
    behavior: usize,
    trial: usize,
}

/// Decision simulation: paired SRAC-vs-baseline trials in an exhaustive
/// case (style noise only) and a non-exhaustive case (style noise plus
/// injected novel-block words), plus noise-sensitivity variants.
pub fn run_decision_sim(
    cfg: &ExperimentConfig,
) -> Result<(Vec<DecisionRecord>, DecisionAggregates), ExperimentError> {
    let matrix: RiskMatrix = match &cfg.risk_matrix_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_risk_matrix(&text)?.matrix
        }
        None => crate::risk::following_task_matrix(),
    };
    if matrix.n_activities() != 3 {
        return Err(ExperimentError::Config(format!(
            "decision simulation models 3 behaviors; the matrix has {} activities",
            matrix.n_activities()
        )));
    }
    let names = matrix.activity_names.clone();
    let world = build_world(&cfg.sim, &names, seeds::derive_tagged(cfg.seed, "world"))?;

    let cv = train_with_cv_baseline(&world.corpus, 3, cfg, seeds::derive_tagged(cfg.seed, "cv"))?;
    let model = map_topics_to_categories(
        &cv.model,
        &world.corpus,
        cfg.theta_sweeps,
        cfg.theta_burn_in,
        seeds::derive_tagged(cfg.seed, "map"),
    )?;
    let baseline_pvwp = model.valid_pvwp_baseline().expect("baseline attached");

    // Align matrix columns with topic order so theta indexes them directly.
    let order: Vec<usize> = (0..3)
        .map(|t| {
            let name = &model.topic_labels().expect("mapped")[t];
            names.iter().position(|n| n == name).expect("matrix names were the training labels")
        })
        .collect();
    let aligned = matrix.with_column_order(&order);
    let ideal: Vec<usize> = (0..3).map(|b| matrix.least_risk_action(b)).collect();

    let mut schedule: Vec<(&'static str, u8, f64, f64, usize)> = vec![
        ("main", 1, cfg.sim.style_rate_case1, 0.0, cfg.sim.reps),
        ("main", 2, cfg.sim.style_rate_case2, cfg.sim.novel_rate, cfg.sim.reps),
    ];
    for &s in &cfg.sim.sensitivity_case1 {
        schedule.push(("sens", 1, s, 0.0, cfg.sim.sensitivity_reps));
    }
    for &nv in &cfg.sim.sensitivity_case2 {
        schedule.push(("sens", 2, cfg.sim.style_rate_case2, nv, cfg.sim.sensitivity_reps));
    }

    let mut trials = Vec::new();
    for (variant, case, style_rate, novel_rate, reps) in schedule {
        for rep in 0..reps {
            for behavior in 0..3 {
                for trial in 0..cfg.sim.trials {
                    trials.push(TrialSpec {
                        variant,
                        case,
                        style_rate,
                        novel_rate,
                        rep,
                        behavior,
                        trial,
                    });
                }
            }
        }
    }

    let trial_master = seeds::derive_tagged(cfg.seed, "trial");
    let records: Vec<Result<DecisionRecord, ExperimentError>> = trials
        .par_iter()
        .map(|t| {
            use rand::Rng;
            let tag = format!(
                "{}-{}-{}-{}-{}-{}-{}",
                t.variant, t.case, t.style_rate, t.novel_rate, t.rep, t.behavior, t.trial
            );
            let s = seeds::derive_tagged(trial_master, &tag);

            let mut rng = seeds::rng(seeds::derive(s, 0));
            let word_ids: Vec<usize> = (0..cfg.sim.doc_len)
                .map(|_| sample_index(&world.dists[t.behavior], &mut rng))
                .collect();
            let mut obs = Observation::new(tag.clone(), word_ids)?;
            if t.style_rate > 0.0 {
                obs = replace_words(&obs, &world.style_donor[t.behavior], t.style_rate, seeds::derive(s, 1))?;
            }
            let mut injected_rate = 0.0;
            if t.case == 2 && t.novel_rate > 0.0 {
                let mut inject_rng = seeds::rng(seeds::derive(s, 2));
                if inject_rng.random::<f64>() < cfg.sim.inject_fraction {
                    obs = replace_words(&obs, &world.novel_dist, t.novel_rate, seeds::derive(s, 3))?;
                    injected_rate = t.novel_rate;
                }
            }

            let theta = estimate_theta(
                &model,
                &obs,
                cfg.theta_sweeps,
                cfg.theta_burn_in,
                seeds::derive(s, 4),
            )?;
            let pv = pvwp(&obs, &model, cfg.particles, seeds::derive(s, 5))?;
            let i_g = generalizability_from_pvwp(pv, baseline_pvwp, cfg.novelty.c);

            let srac = select_action(theta.theta(), i_g, &aligned)?.chosen_index;
            let top_topic = argmax(theta.theta());
            let baseline_action = aligned.least_risk_action(top_topic);

            Ok(DecisionRecord {
                variant: t.variant.to_string(),
                case: t.case,
                style_rate: t.style_rate,
                novel_rate: injected_rate,
                rep: t.rep,
                behavior: names[t.behavior].clone(),
                role: if t.behavior == 0 { "assist".into() } else { "follow".into() },
                trial: t.trial,
                i_g,
                pvwp: pv,
                srac_action: srac,
                baseline_action,
                ideal_action: ideal[t.behavior],
            })
        })
        .collect();
    let records: Vec<DecisionRecord> = records.into_iter().collect::<Result<_, _>>()?;
    let aggregates = decision_aggregates(&records);
    Ok((records, aggregates))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(run: usize, ii: f64) -> ExhaustiveRecord {
        ExhaustiveRecord {
            run,
            obs_id: format!("r{run}"),
            i_i: ii,
            i_g: 0.9,
            i_a: ii > 0.5,
            pvwp: -2.0,
        }
    }

    #[test]
    fn exhaustive_aggregates_mean_and_std_over_runs() {
        let records = vec![rec(0, 0.8), rec(0, 1.0), rec(1, 0.4), rec(1, 0.6)];
        let agg = exhaustive_aggregates(&records);
        assert_eq!(agg.runs.len(), 2);
        assert!((agg.runs[0].mean_i_i - 0.9).abs() < 1e-12);
        assert!((agg.runs[1].mean_i_i - 0.5).abs() < 1e-12);
        assert!((agg.mean_i_i - 0.7).abs() < 1e-12);
        // sample std of [0.9, 0.5]
        assert!((agg.std_i_i - 0.2828427124746190).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_rows_round_trip() {
        let records = vec![rec(0, 0.482142857142857), rec(1, 0.25)];
        let (header, rows) = exhaustive_rows(&records);
        let mut text = header.join(",") + "\n";
        for r in rows {
            text.push_str(&(r.join(",") + "\n"));
        }
        let parsed = parse_exhaustive_rows(&text).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn nonexhaustive_aggregates_compute_the_gap() {
        let mk = |fold, set: &str, ig| NonexhaustiveRecord {
            fold,
            set: set.into(),
            obs_id: "x".into(),
            pvwp: -1.0,
            i_g: ig,
        };
        let records = vec![
            mk(0, "valid", 0.9),
            mk(0, "known", 0.8),
            mk(0, "unknown", 0.2),
            mk(1, "known", 0.9),
            mk(1, "unknown", 0.3),
        ];
        let agg = nonexhaustive_aggregates(&records);
        assert!((agg.mean_ig_known - 0.85).abs() < 1e-12);
        assert!((agg.mean_ig_unknown - 0.25).abs() < 1e-12);
        assert!((agg.ig_gap - 0.6).abs() < 1e-12);
        assert_eq!(agg.folds.len(), 2);
    }

    #[test]
    fn overlap_aggregates_sort_rates_and_check_monotonicity() {
        let mk = |rate, ig| OverlapRecord { rate, obs_id: "x".into(), pvwp: -1.0, i_g: ig };
        let records = vec![mk(0.5, 0.6), mk(0.0, 0.1), mk(1.0, 0.9), mk(0.0, 0.2)];
        let agg = overlap_aggregates(&records);
        let rates: Vec<f64> = agg.rates.iter().map(|r| r.rate).collect();
        assert_eq!(rates, vec![0.0, 0.5, 1.0]);
        assert_eq!(agg.rates[0].n, 2);
        assert!(agg.strictly_increasing);
        assert!(agg.pearson_rate_ig.unwrap() > 0.9);
    }

    #[test]
    fn semi_aggregates_pool_rho_and_probability() {
        let mk = |ii, ig| SemiExhaustiveRecord {
            fold: 0,
            rate: 0.5,
            obs_id: "x".into(),
            i_i: ii,
            i_g: ig,
            i_a: true,
            pvwp: -1.0,
        };
        let records = vec![mk(0.2, 0.3), mk(0.4, 0.5), mk(0.9, 0.8)];
        let agg = semi_exhaustive_aggregates(&records);
        assert!(agg.rho_ig.unwrap() > 0.9);
        assert!((agg.p_ii_le_ig - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(agg.n_records, 3);
    }

    #[test]
    fn decision_aggregates_split_roles_and_variants() {
        let mk = |variant: &str, case, role: &str, srac, base| DecisionRecord {
            variant: variant.into(),
            case,
            style_rate: 0.1,
            novel_rate: 0.0,
            rep: 0,
            behavior: "Falling".into(),
            role: role.into(),
            trial: 0,
            i_g: 0.9,
            pvwp: -1.0,
            srac_action: srac,
            baseline_action: base,
            ideal_action: 0,
        };
        let records = vec![
            mk("main", 1, "assist", 0, 1), // srac ok, baseline fails
            mk("main", 1, "assist", 0, 0),
            mk("main", 1, "follow", 1, 0), // both "fail" (ideal 0)
            mk("sens", 1, "assist", 0, 1),
        ];
        let agg = decision_aggregates(&records);
        assert_eq!(agg.cases.len(), 1);
        let c = &agg.cases[0];
        assert_eq!(c.trials, 3);
        assert!((c.srac.fail_to_assist - 0.0).abs() < 1e-12);
        assert!((c.baseline.fail_to_assist - 0.5).abs() < 1e-12);
        assert!((c.srac.fail_to_follow - 1.0).abs() < 1e-12);
        assert_eq!(agg.sensitivity.len(), 1);
        assert_eq!(agg.sensitivity[0].trials, 1);
    }

    #[test]
    fn control_split_keeps_the_pseudo_category_in_training() {
        let corpus = LabeledCorpus::parse(
            "#vocab a b\nx\ta\nx\ta\nx\ta\nx\ta\ny\tb\ny\tb\ny\tb\ny\tb\n".as_bytes(),
        )
        .unwrap();
        let spec = SplitSpec::new(0.75, 1, 7);
        let (train, known, unknown) = control_split(&corpus, &spec, 0).unwrap();
        assert!(unknown.labels.iter().all(|l| *l == Some(0)));
        assert_eq!(unknown.len(), 1);
        assert_eq!(known.len(), 1);
        assert!(known.labels.iter().all(|l| *l == Some(1)));
        // category 0 still trains on its remaining instances
        assert!(train.labels.iter().filter(|l| **l == Some(0)).count() == 3);
    }

    #[test]
    fn remove_category_reindexes_labels() {
        let corpus = LabeledCorpus::parse(
            "#vocab a\nx\ta\ny\ta\nz\ta\n".as_bytes(),
        )
        .unwrap();
        let out = remove_category(&corpus, 1).unwrap();
        assert_eq!(out.category_names, vec!["x", "z"]);
        assert_eq!(out.labels, vec![Some(0), Some(1)]);
    }
}
