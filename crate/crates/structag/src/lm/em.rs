//! Interpolation-weight estimation on held-out data.
//!
//! A simplified forward-backward scheme for mixture weights: component
//! probabilities are fixed by the training counts, so each iteration
//! accumulates posterior responsibilities per bucket and renormalizes.
//! Components whose context is undefined for an event contribute zero to
//! that event's posterior. Iteration stops when no weight moves by 0.001
//! or more.

use std::collections::BTreeMap;

use super::{ComponentSpec, LambdaTable};
use crate::cluster::{TagMap, TAG_BITS};
use crate::corpus::{NGramCounts, WordId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    /// Train one weight vector per previous-word frequency bucket instead
    /// of a single shared vector.
    pub bucketed: bool,
    /// Halting threshold on the largest absolute weight change.
    pub halt_delta: f64,
    /// Safety cap on iterations; the halting rule fires far earlier.
    pub max_iterations: u32,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            bucketed: false,
            halt_delta: 1e-3,
            max_iterations: 10_000,
        }
    }
}

/// Diagnostics from one EM run.
#[derive(Debug, Clone)]
pub struct EmTrace {
    pub iterations: u32,
    /// Held-out log-likelihood (base 2) under the weights entering each
    /// iteration; non-decreasing.
    pub log_likelihoods: Vec<f64>,
    /// Events every component was undefined or zero for (excluded).
    pub skipped_events: usize,
    pub zero_event_buckets: Vec<u64>,
}

/// Train interpolation weights for `components` on a held-out stream.
///
/// Weights start uniform; each iteration redistributes them in proportion
/// to the components' posterior responsibility for the held-out events of
/// the bucket. Buckets with no events keep uniform weights and are listed
/// in the trace.
pub fn em_train_lambdas(
    components: &[ComponentSpec],
    heldout: &[WordId],
    counts: &NGramCounts,
    tags: Option<&TagMap>,
    options: EmOptions,
) -> Result<(LambdaTable, EmTrace)> {
    if components.is_empty() {
        return Err(Error::InvalidConfiguration("no components to interpolate".into()));
    }
    if heldout.is_empty() {
        return Err(Error::InsufficientData("empty held-out stream".into()));
    }
    super::validate_components(components, counts.max_order())?;

    let mut class_counts = std::collections::HashMap::new();
    for spec in components {
        if spec.level < TAG_BITS && !class_counts.contains_key(&spec.level) {
            let tags = tags.ok_or_else(|| {
                Error::InvalidConfiguration(format!(
                    "component {spec} needs a tag map"
                ))
            })?;
            class_counts.insert(spec.level, super::ClassCounts::build(counts, tags, spec.level)?);
        }
    }

    // Bucket universe: the reserved 0 bucket plus every distinct training
    // frequency, so any in-vocabulary previous word hits an existing
    // bucket at prediction time.
    let mut bucket_keys: Vec<u64> = vec![0];
    if options.bucketed {
        for id in 0..counts.vocab_size() {
            let f = counts.unigram(id);
            if f > 0 {
                bucket_keys.push(f);
            }
        }
        bucket_keys.sort_unstable();
        bucket_keys.dedup();
    }
    let bucket_index: std::collections::HashMap<u64, usize> = bucket_keys
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i))
        .collect();

    // Component probabilities are independent of the weights; cache them
    // per event. NaN marks an undefined context.
    let n_comp = components.len();
    let mut event_probs: Vec<f64> = Vec::with_capacity(heldout.len() * n_comp);
    let mut event_bucket: Vec<u32> = Vec::with_capacity(heldout.len());
    for (i, &w) in heldout.iter().enumerate() {
        let key = if options.bucketed && i > 0 {
            counts.unigram(heldout[i - 1])
        } else {
            0
        };
        event_bucket.push(bucket_index[&key] as u32);
        for spec in components {
            let ctx_len = (spec.order - 1) as usize;
            let p = if i < ctx_len {
                None
            } else {
                let context = &heldout[i - ctx_len..i];
                if spec.level == TAG_BITS {
                    super::prob_ml(counts, context, w)
                } else {
                    class_counts[&spec.level].component_prob(counts, tags.unwrap(), context, w)
                }
            };
            event_probs.push(p.unwrap_or(f64::NAN));
        }
    }

    let n_buckets = bucket_keys.len();
    let mut lambda = vec![vec![1.0 / n_comp as f64; n_comp]; n_buckets];
    let mut trace = EmTrace {
        iterations: 0,
        log_likelihoods: Vec::new(),
        skipped_events: 0,
        zero_event_buckets: Vec::new(),
    };
    let mut bucket_event_ids: Vec<Vec<u32>> = vec![Vec::new(); n_buckets];
    for (e, &b) in event_bucket.iter().enumerate() {
        bucket_event_ids[b as usize].push(e as u32);
    }

    // Each bucket is an independent weight set: it iterates until its own
    // weights stop moving, then freezes. Freezing keeps every weight
    // strictly positive (the update is multiplicative, so a weight could
    // otherwise underflow to zero if other buckets forced more passes).
    let mut active: Vec<bool> = (0..n_buckets).map(|b| !bucket_event_ids[b].is_empty()).collect();
    let mut bucket_ll = vec![0.0f64; n_buckets];
    let mut skipped = vec![0usize; n_buckets];
    while active.iter().any(|&a| a) && trace.iterations < options.max_iterations {
        trace.iterations += 1;
        for b in 0..n_buckets {
            if !active[b] {
                continue;
            }
            let weights = &mut lambda[b];
            let mut resp = vec![0.0f64; n_comp];
            let mut log_likelihood = 0.0;
            skipped[b] = 0;
            for &e in &bucket_event_ids[b] {
                let probs = &event_probs[e as usize * n_comp..(e as usize + 1) * n_comp];
                let mut total = 0.0;
                for (c, &p) in probs.iter().enumerate() {
                    if !p.is_nan() {
                        total += weights[c] * p;
                    }
                }
                if total <= 0.0 {
                    skipped[b] += 1;
                    continue;
                }
                log_likelihood += total.log2();
                for (c, &p) in probs.iter().enumerate() {
                    if !p.is_nan() {
                        resp[c] += weights[c] * p / total;
                    }
                }
            }
            bucket_ll[b] = log_likelihood;
            let resp_total: f64 = resp.iter().sum();
            if resp_total <= 0.0 {
                active[b] = false;
                continue;
            }
            let mut max_change = 0.0f64;
            for c in 0..n_comp {
                let updated = resp[c] / resp_total;
                max_change = max_change.max((updated - weights[c]).abs());
                weights[c] = updated;
            }
            if max_change < options.halt_delta {
                active[b] = false;
            }
        }
        trace.log_likelihoods.push(bucket_ll.iter().sum());
        trace.skipped_events = skipped.iter().sum();
    }

    // The multiplicative update can drive a weight all the way to
    // floating-point zero in a bucket whose events never need that
    // component. A literal zero would let test events score zero
    // probability, so finished weights are floored at a level far below
    // anything the halting resolution can distinguish.
    const WEIGHT_FLOOR: f64 = 1e-10;
    let mut weights = BTreeMap::new();
    for (b, key) in bucket_keys.iter().enumerate() {
        let mut vec = lambda[b].clone();
        for w in &mut vec {
            *w = w.max(WEIGHT_FLOOR);
        }
        let total: f64 = vec.iter().sum();
        for w in &mut vec {
            *w /= total;
        }
        weights.insert(*key, vec);
        if bucket_event_ids[b].is_empty() {
            trace.zero_event_buckets.push(*key);
        }
    }
    let table = LambdaTable::new(
        options.bucketed,
        weights,
        trace.zero_event_buckets.clone(),
        trace.iterations,
    );
    Ok((table, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_component_converges_to_one() {
        let counts = NGramCounts::count(&[0, 1, 0, 1, 1, 0], 2, 2).unwrap();
        let heldout = vec![0, 1, 1, 0];
        let specs = vec![ComponentSpec::new(16, 1)];
        let (table, trace) =
            em_train_lambdas(&specs, &heldout, &counts, None, EmOptions::default()).unwrap();
        assert_relative_eq!(table.weights_for(0)[0], 1.0);
        assert_eq!(trace.iterations, 1);
    }

    #[test]
    fn identical_components_stay_uniform() {
        let counts = NGramCounts::count(&[0, 1, 0, 1, 1, 0], 2, 2).unwrap();
        let heldout = vec![0, 1, 1, 0, 0, 1];
        // the same component listed conceptually twice: two unigram specs
        // are forbidden as duplicates, so emulate with bigram specs over a
        // symmetric stream is overkill; instead check the posterior math
        // directly with unigram + unigram-equivalent class component.
        let mut tags = crate::cluster::TagMap::unassigned(2, 0);
        tags.admit(&[0, 1]);
        tags.set_code(0, 0x0000);
        tags.set_code(1, 0x0001);
        tags.set_frozen_depth(16);
        let specs = vec![ComponentSpec::new(16, 1), ComponentSpec::new(16, 2)];
        let (table, _) =
            em_train_lambdas(&specs, &heldout, &counts, Some(&tags), EmOptions::default()).unwrap();
        let w = table.weights_for(0);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn log_likelihood_is_non_decreasing() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let v = 6u32;
        let train: Vec<WordId> = (0..400).map(|_| rng.gen_range(0..v)).collect();
        let heldout: Vec<WordId> = (0..200).map(|_| rng.gen_range(0..v)).collect();
        let counts = NGramCounts::count(&train, 3, v).unwrap();
        let specs = ComponentSpec::word_orders(3);
        for bucketed in [false, true] {
            let (_, trace) = em_train_lambdas(
                &specs,
                &heldout,
                &counts,
                None,
                EmOptions { bucketed, ..EmOptions::default() },
            )
            .unwrap();
            for pair in trace.log_likelihoods.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-9,
                    "log-likelihood dropped: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn weights_are_simplex_per_bucket() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v = 5u32;
        let train: Vec<WordId> = (0..300).map(|_| rng.gen_range(0..v)).collect();
        let heldout: Vec<WordId> = (0..150).map(|_| rng.gen_range(0..v)).collect();
        let counts = NGramCounts::count(&train, 3, v).unwrap();
        let specs = ComponentSpec::word_orders(3);
        let (table, _) = em_train_lambdas(
            &specs,
            &heldout,
            &counts,
            None,
            EmOptions { bucketed: true, ..EmOptions::default() },
        )
        .unwrap();
        for (_, weights) in table.buckets() {
            assert!(weights.iter().all(|&w| w >= 0.0));
            assert_relative_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        // structural check: buckets are the distinct frequencies plus 0
        let mut freqs: Vec<u64> = (0..v).map(|id| counts.unigram(id)).filter(|&f| f > 0).collect();
        freqs.push(0);
        freqs.sort_unstable();
        freqs.dedup();
        assert_eq!(table.bucket_count(), freqs.len());
    }

    #[test]
    fn empty_heldout_rejected() {
        let counts = NGramCounts::count(&[0, 1], 2, 2).unwrap();
        let specs = ComponentSpec::word_orders(2);
        assert!(matches!(
            em_train_lambdas(&specs, &[], &counts, None, EmOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
