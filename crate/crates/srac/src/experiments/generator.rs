//! Synthetic corpus generation.
//!
//! Categories get near-disjoint vocabulary blocks with a controllable
//! cross-category overlap and a uniform background floor, mirroring the
//! structure of quantized visual-word data where activities share only a
//! small fraction of words. Per-block word weights are Dirichlet-drawn so
//! categories are not flat within their block.

use crate::corpus::{CorpusError, LabeledCorpus, Observation, Vocabulary};
use crate::lda::{sample_dirichlet, sample_index};
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub categories: usize,
    pub vocab_size: usize,
    pub docs_per_category: usize,
    pub doc_len: usize,
    /// Probability mass a category places on other categories' blocks.
    pub overlap: f64,
    /// Probability mass spread uniformly over the whole vocabulary.
    pub background: f64,
    /// Dirichlet concentration of the within-block word weights.
    pub concentration: f64,
    pub category_names: Option<Vec<String>>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            categories: 3,
            vocab_size: 120,
            docs_per_category: 20,
            doc_len: 112,
            overlap: 0.02,
            background: 0.02,
            concentration: 5.0,
            category_names: None,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        if self.categories == 0 || self.docs_per_category == 0 || self.doc_len == 0 {
            return Err(CorpusError::BadDonor("generator sizes must be positive".into()));
        }
        if self.vocab_size < self.categories {
            return Err(CorpusError::BadDonor("vocabulary smaller than category count".into()));
        }
        if self.overlap < 0.0 || self.background < 0.0 || self.overlap + self.background > 1.0 {
            return Err(CorpusError::BadDonor("overlap + background must stay within [0, 1]".into()));
        }
        if let Some(names) = &self.category_names {
            if names.len() != self.categories {
                return Err(CorpusError::BadDonor("category_names length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        match &self.category_names {
            Some(n) => n.clone(),
            None => (0..self.categories).map(|c| format!("cat{c}")).collect(),
        }
    }
}

/// Contiguous vocabulary block for category `c` when `v` words are split
/// over `n` categories; remainders widen the leading blocks.
pub fn block_range(v: usize, n: usize, c: usize) -> std::ops::Range<usize> {
    let base = v / n;
    let extra = v % n;
    let start = c * base + c.min(extra);
    let width = base + usize::from(c < extra);
    start..start + width
}

/// True per-category word distributions for a generator configuration.
pub fn category_distributions(cfg: &GeneratorConfig, seed: u64) -> Result<Vec<Vec<f64>>, CorpusError> {
    cfg.validate()?;
    let v = cfg.vocab_size;
    let own_mass = 1.0 - cfg.overlap - cfg.background;
    let mut dists = Vec::with_capacity(cfg.categories);
    for c in 0..cfg.categories {
        let block = block_range(v, cfg.categories, c);
        let mut rng = seeds::rng(seeds::derive(seed, c as u64));
        let weights = sample_dirichlet(&vec![cfg.concentration; block.len()], &mut rng);
        let mut p = vec![0.0f64; v];
        let other_words = (v - block.len()) as f64;
        for w in 0..v {
            if block.contains(&w) {
                p[w] += own_mass * weights[w - block.start];
            } else if other_words > 0.0 {
                p[w] += cfg.overlap / other_words;
            }
            p[w] += cfg.background / v as f64;
        }
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= sum);
        dists.push(p);
    }
    Ok(dists)
}

/// Draws a labeled corpus: `docs_per_category` documents of `doc_len` words
/// per category, each word iid from the category's distribution.
pub fn generate_corpus(cfg: &GeneratorConfig, seed: u64) -> Result<LabeledCorpus, CorpusError> {
    let dists = category_distributions(cfg, seeds::derive_tagged(seed, "dists"))?;
    let vocab = Vocabulary::new((0..cfg.vocab_size).map(|i| format!("w{i}")))?;
    let names = cfg.names();

    let mut observations = Vec::new();
    let mut labels = Vec::new();
    for (c, dist) in dists.iter().enumerate() {
        for d in 0..cfg.docs_per_category {
            let mut rng = seeds::rng(seeds::derive(seed, (c * cfg.docs_per_category + d) as u64));
            let word_ids: Vec<usize> =
                (0..cfg.doc_len).map(|_| sample_index(dist, &mut rng)).collect();
            observations.push(Observation::new(format!("c{c}-d{d}"), word_ids)?);
            labels.push(Some(c));
        }
    }
    LabeledCorpus::new(vocab, observations, labels, names)
}
