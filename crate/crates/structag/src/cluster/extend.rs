//! Attachment of low-frequency words to an existing hierarchy.
//!
//! Frequent words dominate the bigram statistics, so the expensive flip
//! search runs over them only; the long Zipf tail is attached afterwards,
//! one word at a time in descending frequency. Each word descends the
//! existing tree greedily: at every level it takes whichever of the two
//! candidate sub-classes yields the larger average class mutual
//! information with the word included, all previously placed words fixed.

use std::collections::HashMap;

use rand::RngCore as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use super::optimize::Adjacency;
use super::{marginal_term, xlog2, TagMap, TAG_BITS};
use crate::corpus::{NGramCounts, WordId};
use crate::{Error, Result};

// RNG stream for words with no bigram mass; levels use streams 1..=16.
const RARE_BITS_STREAM: u64 = 0x5eed;

/// Per-level class count state over the placed words.
struct LevelCounts {
    level: u8,
    joint: HashMap<u32, u64>,
    row: HashMap<u16, u64>,
    col: HashMap<u16, u64>,
}

impl LevelCounts {
    fn new(level: u8) -> Self {
        LevelCounts {
            level,
            joint: HashMap::new(),
            row: HashMap::new(),
            col: HashMap::new(),
        }
    }

    #[inline]
    fn key(c: u16, d: u16) -> u32 {
        (c as u32) << 16 | d as u32
    }

    fn joint_at(&self, c: u16, d: u16) -> u64 {
        self.joint.get(&Self::key(c, d)).copied().unwrap_or(0)
    }

    fn add_pair(&mut self, c: u16, d: u16, count: u64) {
        *self.joint.entry(Self::key(c, d)).or_insert(0) += count;
        *self.row.entry(c).or_insert(0) += count;
        *self.col.entry(d).or_insert(0) += count;
    }
}

/// A word's bigram mass split by neighbour class at one level.
struct Profile {
    right: HashMap<u16, u64>,
    left: HashMap<u16, u64>,
    self_count: u64,
    out_mass: u64,
    in_mass: u64,
}

impl Profile {
    fn collect(adj: &Adjacency, tags: &TagMap, w: WordId, level: u8) -> Self {
        let mut right = HashMap::new();
        let mut out_mass = 0;
        for &(v, count) in adj.right(w) {
            if let Some(class) = tags.class_at(v, level) {
                *right.entry(class).or_insert(0) += count;
                out_mass += count;
            }
        }
        let mut left = HashMap::new();
        let mut in_mass = 0;
        for &(v, count) in adj.left(w) {
            if let Some(class) = tags.class_at(v, level) {
                *left.entry(class).or_insert(0) += count;
                in_mass += count;
            }
        }
        let self_count = adj.self_count(w);
        Profile {
            right,
            left,
            self_count,
            out_mass,
            in_mass,
        }
    }

    fn touched(&self) -> Vec<u16> {
        let mut classes: Vec<u16> = self.right.keys().chain(self.left.keys()).copied().collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }
}

/// Score of adding the word to class `cand`: the change in
/// `M·B' = S1 − S2 − S3 + B'·log₂B'` with the `B'` terms shared by both
/// candidates, so only `Δ(S1 − S2 − S3)` matters for the comparison.
fn add_score(state: &LevelCounts, profile: &Profile, cand: u16) -> f64 {
    let rw = |x: u16| profile.right.get(&x).copied().unwrap_or(0);
    let cw = |x: u16| profile.left.get(&x).copied().unwrap_or(0);
    let wl = profile.out_mass + profile.self_count;
    let wr = profile.in_mass + profile.self_count;

    let mut d_s1 = 0.0;
    for (&d, &m) in &profile.right {
        if d != cand {
            let j = state.joint_at(cand, d);
            d_s1 += xlog2(j + m) - xlog2(j);
        }
    }
    for (&e, &m) in &profile.left {
        if e != cand {
            let j = state.joint_at(e, cand);
            d_s1 += xlog2(j + m) - xlog2(j);
        }
    }
    let corner = state.joint_at(cand, cand);
    d_s1 += xlog2(corner + rw(cand) + cw(cand) + profile.self_count) - xlog2(corner);

    // row'[x] = row[x] + cw[x] (+ wl at cand); col'[x] = col[x] + rw[x] (+ wr at cand)
    let mut classes = profile.touched();
    if let Err(pos) = classes.binary_search(&cand) {
        classes.insert(pos, cand);
    }
    let mut d_s2 = 0.0;
    let mut old_s3 = Some(0.0);
    let mut new_s3 = Some(0.0);
    for &x in &classes {
        let row = state.row.get(&x).copied().unwrap_or(0);
        let col = state.col.get(&x).copied().unwrap_or(0);
        let extra_row = cw(x) + if x == cand { wl } else { 0 };
        let extra_col = rw(x) + if x == cand { wr } else { 0 };
        d_s2 += xlog2(row + extra_row) - xlog2(row);
        old_s3 = match (old_s3, marginal_term(col, row)) {
            (Some(acc), Some(t)) => Some(acc + t),
            _ => None,
        };
        new_s3 = match (new_s3, marginal_term(col + extra_col, row + extra_row)) {
            (Some(acc), Some(t)) => Some(acc + t),
            _ => None,
        };
    }
    match (old_s3, new_s3) {
        (Some(o), Some(n)) => d_s1 - d_s2 - (n - o),
        (_, None) => f64::NEG_INFINITY,
        (None, Some(_)) => f64::INFINITY,
    }
}

fn commit(state: &mut LevelCounts, profile: &Profile, cand: u16) {
    for (&d, &m) in &profile.right {
        if d != cand {
            *state.joint.entry(LevelCounts::key(cand, d)).or_insert(0) += m;
        }
    }
    for (&e, &m) in &profile.left {
        if e != cand {
            *state.joint.entry(LevelCounts::key(e, cand)).or_insert(0) += m;
        }
    }
    let corner_gain =
        profile.right.get(&cand).copied().unwrap_or(0) + profile.left.get(&cand).copied().unwrap_or(0) + profile.self_count;
    if corner_gain > 0 {
        *state.joint.entry(LevelCounts::key(cand, cand)).or_insert(0) += corner_gain;
    }
    let wl = profile.out_mass + profile.self_count;
    let wr = profile.in_mass + profile.self_count;
    for &x in &profile.touched() {
        let extra_row = profile.left.get(&x).copied().unwrap_or(0);
        let extra_col = profile.right.get(&x).copied().unwrap_or(0);
        if extra_row > 0 {
            *state.row.entry(x).or_insert(0) += extra_row;
        }
        if extra_col > 0 {
            *state.col.entry(x).or_insert(0) += extra_col;
        }
    }
    if wl > 0 {
        *state.row.entry(cand).or_insert(0) += wl;
    }
    if wr > 0 {
        *state.col.entry(cand).or_insert(0) += wr;
    }
}

/// Attach `remaining` words to an already clustered hierarchy.
///
/// Words are processed in descending frequency (ties by id); words with no
/// bigram participation cannot affect the metric, so they go last and
/// receive seeded pseudo-random bits. Previously placed words never move.
pub fn extend_rare_words(tags: &mut TagMap, counts: &NGramCounts, remaining: &[WordId]) -> Result<()> {
    let depth = tags.frozen_depth();
    for &id in remaining {
        if id as usize >= tags.len() {
            return Err(Error::InvalidConfiguration(format!(
                "word id {id} outside the tag map"
            )));
        }
        if tags.is_assigned(id) {
            return Err(Error::InvalidConfiguration(format!(
                "word id {id} is already assigned"
            )));
        }
    }
    if depth == 0 {
        // nothing clustered yet; admission is all that is possible
        tags.admit(remaining);
        return Ok(());
    }

    let adj = Adjacency::build(counts);
    let mut connected = Vec::new();
    let mut isolated = Vec::new();
    for &id in remaining {
        if adj.participation(id) > 0 {
            connected.push(id);
        } else {
            isolated.push(id);
        }
    }
    let by_freq = |a: &WordId, b: &WordId| {
        counts
            .unigram(*b)
            .cmp(&counts.unigram(*a))
            .then_with(|| a.cmp(b))
    };
    connected.sort_by(by_freq);
    isolated.sort_by(by_freq);

    let mut levels: Vec<LevelCounts> = (1..=depth).map(LevelCounts::new).collect();
    for (l, r, count) in counts.iter_bigrams() {
        if tags.is_assigned(l) && tags.is_assigned(r) {
            for state in &mut levels {
                let cl = tags.class_at(l, state.level).unwrap();
                let cr = tags.class_at(r, state.level).unwrap();
                state.add_pair(cl, cr, count);
            }
        }
    }

    for id in connected {
        let mut prefix: u16 = 0;
        for state in &mut levels {
            let profile = Profile::collect(&adj, tags, id, state.level);
            let c0 = prefix << 1;
            let c1 = (prefix << 1) | 1;
            let s0 = add_score(state, &profile, c0);
            let s1 = add_score(state, &profile, c1);
            let bit = if s1 > s0 { 1u16 } else { 0 };
            prefix = (prefix << 1) | bit;
            commit(state, &profile, prefix);
        }
        tags.set_code(id, prefix << (TAG_BITS - depth));
        debug_assert_eq!(tags.class_at(id, depth), Some(prefix));
    }

    // Isolated words: no mass, both candidates always tie. Seeded bits.
    let mut rng = ChaCha8Rng::seed_from_u64(tags.seed());
    rng.set_stream(RARE_BITS_STREAM);
    for id in isolated {
        let mut prefix: u16 = 0;
        for _ in 0..depth {
            prefix = (prefix << 1) | (rng.next_u32() & 1) as u16;
        }
        tags.set_code(id, prefix << (TAG_BITS - depth));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{assign_unique_suffix, average_class_mi, class_stats, cluster_topdown};
    use super::*;
    use crate::corpus::{NGramCounts, VocabCutoff, Vocabulary};

    /// Slow reference: rerun the placement decisions through the public
    /// stats path and check the fast version agrees.
    fn oracle_extend(tags: &TagMap, counts: &NGramCounts, remaining: &[WordId]) -> Vec<(WordId, u16)> {
        let depth = tags.frozen_depth();
        let adj = Adjacency::build(counts);
        let mut placed = tags.clone();
        let mut order: Vec<WordId> = remaining
            .iter()
            .copied()
            .filter(|&id| adj.participation(id) > 0)
            .collect();
        order.sort_by(|&a, &b| {
            counts
                .unigram(b)
                .cmp(&counts.unigram(a))
                .then_with(|| a.cmp(&b))
        });
        let mut result = Vec::new();
        for id in order {
            let mut prefix = 0u16;
            for level in 1..=depth {
                let mut best_bit = 0u16;
                let mut best = f64::NEG_INFINITY;
                for bit in 0..2u16 {
                    let cand = (prefix << 1) | bit;
                    let mut snapshot = placed.clone();
                    snapshot.set_code(id, cand << (TAG_BITS - level));
                    let mi = match class_stats(counts, &snapshot, level) {
                        Ok(stats) => average_class_mi(&stats),
                        Err(_) => 0.0,
                    };
                    if mi > best {
                        best = mi;
                        best_bit = bit;
                    }
                }
                prefix = (prefix << 1) | best_bit;
            }
            placed.set_code(id, prefix << (TAG_BITS - depth));
            result.push((id, prefix));
        }
        result
    }

    #[test]
    fn extension_matches_full_stats_oracle() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xFEED);
        for case in 0..8 {
            let v: WordId = 8;
            let stream: Vec<WordId> = (0..400)
                .map(|_| {
                    // skew towards low ids so the top-5 cut is stable
                    let x: f64 = rng.gen();
                    ((x * x * v as f64) as WordId).min(v - 1)
                })
                .collect();
            let counts = NGramCounts::count(&stream, 2, v).unwrap();
            let (mut tags, _) = cluster_topdown(&counts, 5, 3, case).unwrap();
            let remaining: Vec<WordId> = (0..v).filter(|&id| !tags.is_assigned(id)).collect();
            let expected = oracle_extend(&tags, &counts, &remaining);
            extend_rare_words(&mut tags, &counts, &remaining).unwrap();
            for (id, prefix) in expected {
                assert_eq!(
                    tags.class_at(id, tags.frozen_depth()),
                    Some(prefix),
                    "case {case}, word {id}"
                );
            }
        }
    }

    #[test]
    fn identical_profile_joins_the_twin_class_path() {
        // y (id 6) occurs in exactly the contexts x (id 3) does; x is
        // clustered, y is attached afterwards.
        let mut stream = Vec::new();
        for round in 0..30 {
            let noun = if round % 2 == 0 { 3 } else { 6 }; // x or y
            // det noun verb det obj
            stream.extend_from_slice(&[0, noun, 1, 0, 2]);
            stream.extend_from_slice(&[4, noun, 5, 4, 2]);
        }
        let counts = NGramCounts::count(&stream, 2, 7).unwrap();
        let mut tags = TagMap::unassigned(7, 3);
        tags.admit(&[0, 1, 2, 3, 4, 5]);
        let adj = Adjacency::build(&counts);
        for level in 1..=3 {
            let mut opt = super::super::optimize::LevelOptimizer::with_adjacency(&adj, &tags, level).unwrap();
            opt.run();
            opt.write_back(&mut tags);
        }
        extend_rare_words(&mut tags, &counts, &[6]).unwrap();
        for level in 1..=3 {
            assert_eq!(
                tags.class_at(6, level),
                tags.class_at(3, level),
                "level {level}"
            );
        }
    }

    #[test]
    fn empty_remaining_changes_nothing() {
        let counts = NGramCounts::count(&[0, 1, 0, 1, 1], 2, 2).unwrap();
        let (mut tags, _) = cluster_topdown(&counts, 2, 1, 5).unwrap();
        let before = tags.clone();
        extend_rare_words(&mut tags, &counts, &[]).unwrap();
        assert_eq!(before, tags);
    }

    #[test]
    fn frequent_words_never_move() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let stream: Vec<WordId> = (0..600).map(|_| rng.gen_range(0..10)).collect();
        let counts = NGramCounts::count(&stream, 2, 10).unwrap();
        let (mut tags, _) = cluster_topdown(&counts, 6, 4, 9).unwrap();
        let frozen: Vec<Option<u16>> = (0..10).map(|w| tags.code(w).map(|t| t.0)).collect();
        let remaining: Vec<WordId> = (0..10).filter(|&id| !tags.is_assigned(id)).collect();
        extend_rare_words(&mut tags, &counts, &remaining).unwrap();
        for w in 0..10u32 {
            if let Some(code) = frozen[w as usize] {
                assert_eq!(tags.code(w).map(|t| t.0), Some(code));
            }
        }
        assert!(tags.covers(10));
    }

    #[test]
    fn isolated_words_get_seeded_bits() {
        // word 3 never occurs
        let counts = NGramCounts::count(&[0, 1, 2, 0, 1, 2, 1, 0], 2, 4).unwrap();
        let (mut a, _) = cluster_topdown(&counts, 3, 2, 77).unwrap();
        let (mut b, _) = cluster_topdown(&counts, 3, 2, 77).unwrap();
        extend_rare_words(&mut a, &counts, &[3]).unwrap();
        extend_rare_words(&mut b, &counts, &[3]).unwrap();
        assert_eq!(a, b);
        assert!(a.is_assigned(3));
    }

    #[test]
    fn already_assigned_word_rejected() {
        let counts = NGramCounts::count(&[0, 1, 0, 1, 1], 2, 2).unwrap();
        let (mut tags, _) = cluster_topdown(&counts, 2, 1, 5).unwrap();
        let err = extend_rare_words(&mut tags, &counts, &[1]).unwrap_err();
        assert!(matches!(err, Error::InvalidConfiguration(_)));
    }

    #[test]
    fn full_pipeline_is_injective_after_suffix() {
        let tokens: Vec<String> = "the cat sat on the mat the dog sat on the log a cat and a dog \
                                   met on the mat and the log"
            .split_whitespace()
            .map(|s| s.to_string())
            .collect();
        let vocab = Vocabulary::build(&tokens, VocabCutoff::MaxSize(8)).unwrap();
        let (stream, _) = vocab.map_tokens(&tokens);
        let counts = NGramCounts::count(&stream, 2, vocab.len() as u32).unwrap();
        let (mut tags, _) = cluster_topdown(&counts, 5, 3, 11).unwrap();
        let remaining: Vec<WordId> = vocab.ids().filter(|&id| !tags.is_assigned(id)).collect();
        extend_rare_words(&mut tags, &counts, &remaining).unwrap();
        assign_unique_suffix(&mut tags, &counts).unwrap();
        let mut codes: Vec<u16> = vocab.ids().map(|id| tags.code(id).unwrap().0).collect();
        codes.sort_unstable();
        let before = codes.len();
        codes.dedup();
        assert_eq!(before, codes.len());
    }
}
