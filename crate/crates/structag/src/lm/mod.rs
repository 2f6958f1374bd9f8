//! Language models over n-gram counts and structural tags.
//!
//! The model family, in increasing order of structure:
//!
//! - equiprobable and maximum-likelihood unigram baselines;
//! - interpolated trigram, mixing unigram/bigram/trigram estimates with
//!   weights trained on held-out data, either one weight vector overall or
//!   one per previous-word frequency bucket;
//! - the weighted-average model, whose closed-form weights grow with
//!   segment length and frequency;
//! - multi-level structural-tag models, interpolating class-decomposed
//!   estimates at several hierarchy depths alongside the word estimates.
//!
//! Every model exposes a conditional distribution `P(w | history)` that
//! sums to one over the vocabulary for any history.

mod em;
mod weighted;

pub use em::{em_train_lambdas, EmOptions, EmTrace};
pub use weighted::{weighted_average_prob, weighted_average_prob_base, LogBase};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::cluster::{TagMap, TAG_BITS};
use crate::corpus::{NGramCounts, WordId};
use crate::{Error, Result};

/// One interpolation component: class depth `level` (16 = word identity)
/// and n-gram order `order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComponentSpec {
    pub level: u8,
    pub order: u8,
}

impl ComponentSpec {
    pub fn new(level: u8, order: u8) -> Self {
        ComponentSpec { level, order }
    }

    /// The nine-component roster interpolating three orders at each of
    /// three hierarchy depths.
    pub fn three_level(levels: [u8; 3], max_order: u8) -> Vec<ComponentSpec> {
        let mut specs = Vec::new();
        for &level in &levels {
            for order in 1..=max_order {
                specs.push(ComponentSpec { level, order });
            }
        }
        specs
    }

    /// Word-only components for the interpolated trigram model.
    pub fn word_orders(max_order: u8) -> Vec<ComponentSpec> {
        (1..=max_order)
            .map(|order| ComponentSpec { level: TAG_BITS, order })
            .collect()
    }
}

impl std::fmt::Display for ComponentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.level, self.order)
    }
}

/// Maximum-likelihood conditional probability `count(context·w) /
/// Σ_v count(context·v)`.
///
/// `None` marks an undefined context: one that never occurs in a position
/// it could be extended from. The continuation-sum denominator (rather
/// than the raw context count) keeps `Σ_w P(w|context) = 1` even for the
/// context that ends the training stream. The empty context yields the
/// unigram estimate `count(w)/N`.
pub fn prob_ml(counts: &NGramCounts, context: &[WordId], w: WordId) -> Option<f64> {
    if context.is_empty() {
        if counts.n() == 0 {
            return None;
        }
        return Some(counts.unigram(w) as f64 / counts.n() as f64);
    }
    let denom = counts.context_total(context);
    if denom == 0 {
        return None;
    }
    let mut gram = Vec::with_capacity(context.len() + 1);
    gram.extend_from_slice(context);
    gram.push(w);
    Some(counts.gram(&gram) as f64 / denom as f64)
}

fn pack_classes(classes: &[u16]) -> u64 {
    let mut key = 0u64;
    for &c in classes {
        key = (key << 17) | (c as u64 + 1);
    }
    key
}

/// N-gram tables over class codes at one hierarchy depth, aggregated from
/// word counts through tag prefixes.
#[derive(Debug, Clone)]
pub struct ClassCounts {
    level: u8,
    n: u64,
    grams: Vec<HashMap<u64, u64>>,
    ctx: Vec<HashMap<u64, u64>>,
}

impl ClassCounts {
    pub fn build(counts: &NGramCounts, tags: &TagMap, level: u8) -> Result<Self> {
        if level == 0 || level > TAG_BITS {
            return Err(Error::InvalidDepth(level as u32));
        }
        let max_order = counts.max_order();
        let mut grams: Vec<HashMap<u64, u64>> = vec![HashMap::new(); max_order];
        let mut n = 0u64;
        let mut classes = Vec::with_capacity(max_order);
        for order in 1..=max_order {
            'segment: for (ids, count) in counts.iter_order(order) {
                classes.clear();
                for id in ids {
                    match tags.class_at(id, level) {
                        Some(c) => classes.push(c),
                        None => continue 'segment,
                    }
                }
                *grams[order - 1].entry(pack_classes(&classes)).or_insert(0) += count;
                if order == 1 {
                    n += count;
                }
            }
        }
        let mut ctx: Vec<HashMap<u64, u64>> = vec![HashMap::new(); max_order.saturating_sub(1)];
        for order in 2..=max_order {
            let mut totals = HashMap::with_capacity(grams[order - 2].len());
            for (&key, &count) in &grams[order - 1] {
                *totals.entry(key >> 17).or_insert(0) += count;
            }
            ctx[order - 2] = totals;
        }
        Ok(ClassCounts { level, n, grams, ctx })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    /// Unigram mass of a class (total count of its member words).
    pub fn class_mass(&self, class: u16) -> u64 {
        self.grams[0]
            .get(&pack_classes(&[class]))
            .copied()
            .unwrap_or(0)
    }

    fn gram(&self, classes: &[u16]) -> u64 {
        if classes.is_empty() || classes.len() > self.grams.len() {
            return 0;
        }
        self.grams[classes.len() - 1]
            .get(&pack_classes(classes))
            .copied()
            .unwrap_or(0)
    }

    fn context_total(&self, context: &[u16]) -> u64 {
        if context.is_empty() {
            return self.n;
        }
        if context.len() >= self.grams.len() {
            return 0;
        }
        self.ctx[context.len() - 1]
            .get(&pack_classes(context))
            .copied()
            .unwrap_or(0)
    }

    /// Class-decomposed probability: `P(class(w) | classes(context)) ·
    /// P(w | class(w))`. `None` marks an undefined class context; a word
    /// whose class has no mass scores zero.
    fn component_prob(
        &self,
        counts: &NGramCounts,
        tags: &TagMap,
        context: &[WordId],
        w: WordId,
    ) -> Option<f64> {
        let mut ctx_classes = Vec::with_capacity(context.len());
        for &id in context {
            ctx_classes.push(tags.class_at(id, self.level)?);
        }
        let w_class = tags.class_at(w, self.level)?;

        let class_cond = if ctx_classes.is_empty() {
            if self.n == 0 {
                return None;
            }
            self.class_mass(w_class) as f64 / self.n as f64
        } else {
            let denom = self.context_total(&ctx_classes);
            if denom == 0 {
                return None;
            }
            let mut gram = ctx_classes.clone();
            gram.push(w_class);
            self.gram(&gram) as f64 / denom as f64
        };

        let mass = self.class_mass(w_class);
        if mass == 0 {
            // the class conditional is necessarily zero too
            return Some(0.0);
        }
        Some(class_cond * (counts.unigram(w) as f64 / mass as f64))
    }
}

/// Class-decomposed conditional probability for one component, per the
/// worked decomposition `P(c(context·w)) · P(w | c(w))`.
///
/// Propagates `undefined-context` (`None`) both for unseen class contexts
/// and for words whose class carries no probability mass.
pub fn prob_class_component(
    class_counts: &ClassCounts,
    counts: &NGramCounts,
    tags: &TagMap,
    context: &[WordId],
    w: WordId,
) -> Option<f64> {
    if let Some(c) = tags.class_at(w, class_counts.level) {
        if class_counts.class_mass(c) == 0 {
            return None;
        }
    }
    class_counts.component_prob(counts, tags, context, w)
}

/// Interpolation weights per frequency bucket.
///
/// The bucket key is the raw training frequency of the previous word, with
/// 0 reserved for "no previous word". A non-bucketed table holds a single
/// weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTable {
    bucketed: bool,
    n_components: usize,
    weights: std::collections::BTreeMap<u64, Vec<f64>>,
    /// Buckets that saw no held-out events and kept uniform weights.
    pub zero_event_buckets: Vec<u64>,
    /// EM iterations taken to converge.
    pub iterations: u32,
}

impl LambdaTable {
    pub(crate) fn new(
        bucketed: bool,
        weights: std::collections::BTreeMap<u64, Vec<f64>>,
        zero_event_buckets: Vec<u64>,
        iterations: u32,
    ) -> Self {
        let n_components = weights.values().next().map_or(0, |v| v.len());
        LambdaTable {
            bucketed,
            n_components,
            weights,
            zero_event_buckets,
            iterations,
        }
    }

    /// A single-bucket table with explicit weights (normalized).
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || sum <= 0.0 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidConfiguration(
                "weights must be non-negative and sum to a positive value".into(),
            ));
        }
        let mut map = std::collections::BTreeMap::new();
        map.insert(0, weights.iter().map(|w| w / sum).collect());
        Ok(LambdaTable::new(false, map, Vec::new(), 0))
    }

    pub fn is_bucketed(&self) -> bool {
        self.bucketed
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn bucket_count(&self) -> usize {
        self.weights.len()
    }

    pub fn buckets(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.weights.iter().map(|(&b, w)| (b, w.as_slice()))
    }

    /// Weight vector for an event whose previous word has the given
    /// training frequency.
    pub fn weights_for(&self, prev_freq: u64) -> &[f64] {
        if !self.bucketed {
            return self.weights.values().next().unwrap();
        }
        self.weights
            .get(&prev_freq)
            .or_else(|| self.weights.get(&0))
            .unwrap()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "bucketed\t{}", self.bucketed).unwrap();
        for (bucket, weights) in &self.weights {
            for (component, w) in weights.iter().enumerate() {
                writeln!(out, "{bucket}\t{component}\t{w:.17}").unwrap();
            }
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let bucketed = match lines.next() {
            Some((_, line)) if line == "bucketed\ttrue" => true,
            Some((_, line)) if line == "bucketed\tfalse" => false,
            _ => return Err(Error::parse(path, 1, "expected `bucketed` header")),
        };
        let mut weights: std::collections::BTreeMap<u64, Vec<f64>> = std::collections::BTreeMap::new();
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (bucket, component, weight) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::parse(path, lineno + 1, "expected bucket<TAB>component<TAB>weight")),
            };
            let bucket: u64 = bucket
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad bucket"))?;
            let component: usize = component
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad component id"))?;
            let weight: f64 = weight
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad weight"))?;
            let vec = weights.entry(bucket).or_default();
            if component != vec.len() {
                return Err(Error::parse(path, lineno + 1, "component ids must be dense per bucket"));
            }
            vec.push(weight);
        }
        if weights.is_empty() {
            return Err(Error::parse(path, 0, "no weights"));
        }
        let n = weights.values().next().unwrap().len();
        if weights.values().any(|v| v.len() != n) {
            return Err(Error::parse(path, 0, "buckets disagree on component count"));
        }
        Ok(LambdaTable::new(bucketed, weights, Vec::new(), 0))
    }
}

/// Model family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Equiprobable,
    Unigram,
    InterpTrigram,
    WeightedAverage,
    StructuralTag,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Equiprobable => "equiprobable",
            ModelKind::Unigram => "unigram",
            ModelKind::InterpTrigram => "interp-trigram",
            ModelKind::WeightedAverage => "weighted-average",
            ModelKind::StructuralTag => "structural-tag",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equiprobable" => Ok(ModelKind::Equiprobable),
            "unigram" => Ok(ModelKind::Unigram),
            "interp-trigram" => Ok(ModelKind::InterpTrigram),
            "weighted-average" => Ok(ModelKind::WeightedAverage),
            "structural-tag" => Ok(ModelKind::StructuralTag),
            other => Err(Error::InvalidConfiguration(format!("unknown model kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trained, immutable language model.
#[derive(Debug)]
pub struct Model<'a> {
    kind: ModelKind,
    counts: &'a NGramCounts,
    tags: Option<&'a TagMap>,
    components: Vec<ComponentSpec>,
    class_counts: HashMap<u8, ClassCounts>,
    lambdas: Option<LambdaTable>,
}

impl<'a> Model<'a> {
    /// Validate inputs for `kind` and assemble a model handle.
    ///
    /// Interpolated kinds need a [`LambdaTable`] whose component count
    /// matches; the structural-tag kind additionally needs a [`TagMap`]
    /// covering the whole vocabulary.
    pub fn build(
        kind: ModelKind,
        counts: &'a NGramCounts,
        tags: Option<&'a TagMap>,
        specs: Vec<ComponentSpec>,
        lambdas: Option<LambdaTable>,
    ) -> Result<Self> {
        let components = match kind {
            ModelKind::Equiprobable | ModelKind::Unigram | ModelKind::WeightedAverage => Vec::new(),
            ModelKind::InterpTrigram => {
                if specs.is_empty() {
                    ComponentSpec::word_orders(counts.max_order() as u8)
                } else {
                    specs
                }
            }
            ModelKind::StructuralTag => {
                if specs.is_empty() {
                    return Err(Error::InvalidConfiguration(
                        "structural-tag model needs component specs".into(),
                    ));
                }
                specs
            }
        };
        validate_components(&components, counts.max_order())?;

        let lambdas = match kind {
            ModelKind::InterpTrigram | ModelKind::StructuralTag => {
                let table = lambdas.ok_or_else(|| {
                    Error::InvalidConfiguration(format!("{kind} model needs interpolation weights"))
                })?;
                if table.n_components() != components.len() {
                    return Err(Error::InvalidConfiguration(format!(
                        "weight table has {} components, model has {}",
                        table.n_components(),
                        components.len()
                    )));
                }
                Some(table)
            }
            _ => None,
        };

        let mut class_counts = HashMap::new();
        if kind == ModelKind::StructuralTag {
            let tags = tags.ok_or_else(|| {
                Error::InvalidConfiguration("structural-tag model needs a tag map".into())
            })?;
            if !tags.covers(counts.vocab_size() as usize) {
                return Err(Error::InvalidConfiguration(
                    "tag map does not cover the vocabulary".into(),
                ));
            }
            for spec in &components {
                if spec.level < TAG_BITS && !class_counts.contains_key(&spec.level) {
                    class_counts.insert(spec.level, ClassCounts::build(counts, tags, spec.level)?);
                }
            }
        }

        Ok(Model {
            kind,
            counts,
            tags,
            components,
            class_counts,
            lambdas,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn lambdas(&self) -> Option<&LambdaTable> {
        self.lambdas.as_ref()
    }

    /// History length the model conditions on.
    pub fn order(&self) -> usize {
        match self.kind {
            ModelKind::Equiprobable | ModelKind::Unigram => 1,
            _ => self.counts.max_order(),
        }
    }

    /// One component's probability. `None` iff the component's context is
    /// undefined for this history (so the defined set is identical for
    /// every candidate word).
    fn component_prob(&self, spec: ComponentSpec, history: &[WordId], w: WordId) -> Option<f64> {
        let ctx_len = (spec.order - 1) as usize;
        if history.len() < ctx_len {
            return None;
        }
        let context = &history[history.len() - ctx_len..];
        if spec.level == TAG_BITS {
            // full depth: classes are words, the decomposition collapses
            prob_ml(self.counts, context, w)
        } else {
            self.class_counts[&spec.level].component_prob(self.counts, self.tags.unwrap(), context, w)
        }
    }

    /// Conditional probability of `w` after `history` (which may be any
    /// length; the model truncates it to its order).
    pub fn prob(&self, history: &[WordId], w: WordId) -> f64 {
        match self.kind {
            ModelKind::Equiprobable => 1.0 / self.counts.vocab_size() as f64,
            ModelKind::Unigram => self.counts.unigram(w) as f64 / self.counts.n() as f64,
            ModelKind::WeightedAverage => weighted_average_prob(self.counts, history, w),
            ModelKind::InterpTrigram | ModelKind::StructuralTag => {
                let keep = history.len().min(self.counts.max_order() - 1);
                let history = &history[history.len() - keep..];
                let prev_freq = history
                    .last()
                    .map_or(0, |&prev| self.counts.unigram(prev));
                let lambda = self.lambdas.as_ref().unwrap().weights_for(prev_freq);

                let mut probs = Vec::with_capacity(self.components.len());
                let mut lambda_sum = 0.0;
                let mut defined = 0usize;
                for (i, &spec) in self.components.iter().enumerate() {
                    let p = self.component_prob(spec, history, w);
                    if p.is_some() {
                        lambda_sum += lambda[i];
                        defined += 1;
                    }
                    probs.push(p);
                }
                if defined == 0 {
                    return 0.0;
                }
                let mut total = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    if let Some(p) = p {
                        // renormalize weights over the defined components
                        let weight = if lambda_sum > 0.0 {
                            lambda[i] / lambda_sum
                        } else {
                            1.0 / defined as f64
                        };
                        total += weight * p;
                    }
                }
                total
            }
        }
    }
}

fn validate_components(specs: &[ComponentSpec], max_order: usize) -> Result<()> {
    for (i, spec) in specs.iter().enumerate() {
        if spec.level == 0 || spec.level > TAG_BITS {
            return Err(Error::InvalidConfiguration(format!(
                "component level {} out of range 1..={TAG_BITS}",
                spec.level
            )));
        }
        if spec.order == 0 || spec.order as usize > max_order {
            return Err(Error::InvalidConfiguration(format!(
                "component order {} out of range 1..={max_order}",
                spec.order
            )));
        }
        if specs[..i].contains(spec) {
            return Err(Error::InvalidConfiguration(format!(
                "duplicate component {spec}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{assign_unique_suffix, cluster_topdown};
    use approx::assert_relative_eq;

    #[test]
    fn ml_probability_by_hand() {
        // counts {(a,b): 3}: P(b|a) = 1.0
        let counts = NGramCounts::count(&[0, 1, 0, 1, 0, 1], 2, 2).unwrap();
        assert_relative_eq!(prob_ml(&counts, &[0], 1).unwrap(), 1.0);
    }

    #[test]
    fn ml_unseen_context_is_undefined() {
        let counts = NGramCounts::count(&[0, 1, 0, 1], 2, 3).unwrap();
        assert_eq!(prob_ml(&counts, &[2], 0), None);
    }

    #[test]
    fn ml_empty_context_single_type() {
        let counts = NGramCounts::count(&[0, 0, 0], 1, 1).unwrap();
        assert_relative_eq!(prob_ml(&counts, &[], 0).unwrap(), 1.0);
    }

    fn injective_tags(v: usize) -> TagMap {
        let mut tags = TagMap::unassigned(v, 0);
        let ids: Vec<WordId> = (0..v as WordId).collect();
        tags.admit(&ids);
        for id in 0..v as WordId {
            tags.set_code(id, id as u16);
        }
        tags.set_frozen_depth(16);
        tags
    }

    #[test]
    fn full_depth_class_component_equals_word_ml() {
        let stream = vec![0, 1, 2, 0, 1, 2, 1, 0, 2, 1];
        let counts = NGramCounts::count(&stream, 3, 3).unwrap();
        let tags = injective_tags(3);
        let cc = ClassCounts::build(&counts, &tags, 16).unwrap();
        for w in 0..3u32 {
            for ctx in [vec![], vec![0], vec![1, 2], vec![0, 1]] {
                let class = prob_class_component(&cc, &counts, &tags, &ctx, w);
                let word = prob_ml(&counts, &ctx, w);
                match (class, word) {
                    (Some(c), Some(m)) => assert!((c - m).abs() <= 1e-12),
                    (None, None) => {}
                    other => panic!("mismatch for ctx {ctx:?} w {w}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn one_class_toy_decomposition() {
        // a, b share one class; corpus [a,b,a,b]: P(b) = P(c)·P(b|c) = 1·0.5
        let counts = NGramCounts::count(&[0, 1, 0, 1], 2, 2).unwrap();
        let mut tags = TagMap::unassigned(2, 0);
        tags.admit(&[0, 1]);
        tags.set_frozen_depth(1);
        let cc = ClassCounts::build(&counts, &tags, 1).unwrap();
        assert_relative_eq!(
            prob_class_component(&cc, &counts, &tags, &[], 1).unwrap(),
            0.5
        );
    }

    #[test]
    fn zero_mass_class_is_undefined() {
        // word 2 never occurs; with injective tags its class has no mass
        let counts = NGramCounts::count(&[0, 1, 0, 1], 2, 3).unwrap();
        let tags = injective_tags(3);
        let cc = ClassCounts::build(&counts, &tags, 16).unwrap();
        assert_eq!(prob_class_component(&cc, &counts, &tags, &[], 2), None);
    }

    #[test]
    fn lambda_table_round_trip() {
        let mut weights = std::collections::BTreeMap::new();
        weights.insert(0u64, vec![0.25, 0.75]);
        weights.insert(3u64, vec![0.5, 0.5]);
        let table = LambdaTable::new(true, weights, vec![], 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lambdas.tsv");
        table.write_tsv(&path).unwrap();
        let back = LambdaTable::read_tsv(&path).unwrap();
        assert!(back.is_bucketed());
        assert_eq!(back.weights_for(3), &[0.5, 0.5]);
        assert_eq!(back.weights_for(0), &[0.25, 0.75]);
        // unseen bucket falls back to the reserved zero bucket
        assert_eq!(back.weights_for(12), &[0.25, 0.75]);
    }

    #[test]
    fn equiprobable_needs_only_counts() {
        let counts = NGramCounts::count(&[0, 1, 2, 0], 2, 3).unwrap();
        let model = Model::build(ModelKind::Equiprobable, &counts, None, vec![], None).unwrap();
        assert_relative_eq!(model.prob(&[], 0), 1.0 / 3.0);
        assert_relative_eq!(model.prob(&[1, 2], 0), 1.0 / 3.0);
    }

    #[test]
    fn interp_trigram_needs_lambdas() {
        let counts = NGramCounts::count(&[0, 1, 2, 0], 3, 3).unwrap();
        assert!(matches!(
            Model::build(ModelKind::InterpTrigram, &counts, None, vec![], None),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn structural_tag_rejects_uncovered_vocabulary() {
        let counts = NGramCounts::count(&[0, 1, 2, 0, 1, 2], 3, 3).unwrap();
        let mut tags = TagMap::unassigned(3, 0);
        tags.admit(&[0, 1]); // word 2 uncovered
        let lambdas = LambdaTable::from_weights(&[1.0; 6]).unwrap();
        let specs = ComponentSpec::three_level([16, 2, 1], 2);
        let err = Model::build(ModelKind::StructuralTag, &counts, Some(&tags), specs, Some(lambdas))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidConfiguration(_)));
    }

    #[test]
    fn pure_unigram_weights_reduce_to_unigram_ml() {
        let stream = vec![0, 1, 2, 0, 1, 0, 2, 2, 1, 0];
        let counts = NGramCounts::count(&stream, 3, 3).unwrap();
        let lambdas = LambdaTable::from_weights(&[1.0, 0.0, 0.0]).unwrap();
        let model = Model::build(ModelKind::InterpTrigram, &counts, None, vec![], Some(lambdas))
            .unwrap();
        for w in 0..3u32 {
            for hist in [vec![], vec![1], vec![0, 1]] {
                assert_relative_eq!(
                    model.prob(&hist, w),
                    prob_ml(&counts, &[], w).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    fn exhaustive_sum(model: &Model<'_>, history: &[WordId], v: u32) -> f64 {
        (0..v).map(|w| model.prob(history, w)).sum()
    }

    #[test]
    fn models_are_proper_distributions() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xABCD);
        let v: u32 = 9;
        let stream: Vec<WordId> = (0..500).map(|_| rng.gen_range(0..v)).collect();
        let counts = NGramCounts::count(&stream, 3, v).unwrap();

        let (mut tags, _) = cluster_topdown(&counts, v as usize, 3, 42).unwrap();
        assign_unique_suffix(&mut tags, &counts).unwrap();

        let heldout: Vec<WordId> = (0..300).map(|_| rng.gen_range(0..v)).collect();
        let word_specs = ComponentSpec::word_orders(3);
        let (word_lambdas, _) =
            em_train_lambdas(&word_specs, &heldout, &counts, None, EmOptions::default()).unwrap();
        let class_specs = ComponentSpec::three_level([16, 3, 2], 3);
        let (class_lambdas, _) = em_train_lambdas(
            &class_specs,
            &heldout,
            &counts,
            Some(&tags),
            EmOptions { bucketed: true, ..EmOptions::default() },
        )
        .unwrap();

        let models = vec![
            Model::build(ModelKind::Equiprobable, &counts, None, vec![], None).unwrap(),
            Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap(),
            Model::build(ModelKind::InterpTrigram, &counts, None, vec![], Some(word_lambdas)).unwrap(),
            Model::build(ModelKind::WeightedAverage, &counts, None, vec![], None).unwrap(),
            Model::build(
                ModelKind::StructuralTag,
                &counts,
                Some(&tags),
                class_specs,
                Some(class_lambdas),
            )
            .unwrap(),
        ];
        for model in &models {
            for _ in 0..25 {
                let len = rng.gen_range(0..4);
                let history: Vec<WordId> = (0..len).map(|_| rng.gen_range(0..v)).collect();
                let total = exhaustive_sum(model, &history, v);
                assert!(
                    (total - 1.0).abs() < 1e-9,
                    "{} sums to {total} for history {history:?}",
                    model.kind()
                );
            }
        }
    }
}
