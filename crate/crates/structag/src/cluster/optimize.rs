//! Steepest-ascent search for the locally optimal bit assignment at one
//! hierarchy level.
//!
//! A sweep evaluates, for every word, the mutual-information change of
//! toggling that word's bit at the current level; the single best strictly
//! improving flip is applied and the sweep repeats until no flip improves.
//! Words moved early can move back later if the metric licenses it.
//!
//! The change for one flip is computed incrementally from integer count
//! state in `O(degree)` via the decomposition
//!
//! ```text
//! M·B = Σ J·log₂J  −  Σ L·log₂L  −  Σ R·log₂L  +  B·log₂B
//! ```
//!
//! where `J` is the class joint count table, `L`/`R` its row/column sums
//! and `B` the total bigram mass: moving one word touches only the
//! joint cells carrying that word's bigram mass and the two classes'
//! marginals, and `B` is invariant under flips.

use rand::RngCore as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{marginal_term, xlog2, TagMap, TAG_BITS};
use crate::corpus::{NGramCounts, WordId};
use crate::{Error, Result};

/// Word-level bigram adjacency, the read-only input shared by every level.
#[derive(Debug)]
pub(crate) struct Adjacency {
    right: Vec<Vec<(WordId, u64)>>,
    left: Vec<Vec<(WordId, u64)>>,
    self_count: Vec<u64>,
    vocab_size: usize,
}

impl Adjacency {
    pub(crate) fn build(counts: &NGramCounts) -> Self {
        let v = counts.vocab_size() as usize;
        let mut right: Vec<Vec<(WordId, u64)>> = vec![Vec::new(); v];
        let mut left: Vec<Vec<(WordId, u64)>> = vec![Vec::new(); v];
        let mut self_count = vec![0u64; v];
        for (l, r, count) in counts.iter_bigrams() {
            if l == r {
                self_count[l as usize] = count;
            } else {
                right[l as usize].push((r, count));
                left[r as usize].push((l, count));
            }
        }
        for list in right.iter_mut().chain(left.iter_mut()) {
            list.sort_unstable_by_key(|(id, _)| *id);
        }
        Adjacency {
            right,
            left,
            self_count,
            vocab_size: v,
        }
    }

    /// Total bigram mass the word participates in (left, right and self).
    pub(crate) fn participation(&self, w: WordId) -> u64 {
        let w = w as usize;
        let out: u64 = self.right[w].iter().map(|(_, c)| c).sum();
        let inn: u64 = self.left[w].iter().map(|(_, c)| c).sum();
        out + inn + 2 * self.self_count[w]
    }

    pub(crate) fn right(&self, w: WordId) -> &[(WordId, u64)] {
        &self.right[w as usize]
    }

    pub(crate) fn left(&self, w: WordId) -> &[(WordId, u64)] {
        &self.left[w as usize]
    }

    pub(crate) fn self_count(&self, w: WordId) -> u64 {
        self.self_count[w as usize]
    }
}

struct Scratch {
    rw: Vec<u64>,
    cw: Vec<u64>,
    touched_r: Vec<u32>,
    touched_c: Vec<u32>,
}

impl Scratch {
    fn new(classes: usize) -> Self {
        Scratch {
            rw: vec![0; classes],
            cw: vec![0; classes],
            touched_r: Vec::new(),
            touched_c: Vec::new(),
        }
    }

    fn clear(&mut self) {
        for &d in &self.touched_r {
            self.rw[d as usize] = 0;
        }
        for &e in &self.touched_c {
            self.cw[e as usize] = 0;
        }
        self.touched_r.clear();
        self.touched_c.clear();
    }
}

/// Record of one level's optimization.
#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub level: u8,
    pub initial_mi: f64,
    pub final_mi: f64,
    /// Mutual information after each accepted flip.
    pub mi_after_flip: Vec<f64>,
    pub flips: usize,
    /// Set if the sweep cap was hit before reaching a local optimum
    /// (not expected on real data).
    pub truncated: bool,
}

/// Traces for every level of a [`cluster_topdown`] run.
#[derive(Debug, Clone, Default)]
pub struct ClusterTrace {
    pub levels: Vec<LevelTrace>,
}

/// Mutable search state for optimizing a single level.
pub struct LevelOptimizer<'a> {
    level: u8,
    adj: &'a Adjacency,
    members: Vec<WordId>,
    member: Vec<bool>,
    class_of: Vec<u32>,
    classes: usize,
    joint: Vec<u64>,
    row: Vec<u64>,
    col: Vec<u64>,
    total: u64,
}

impl<'a> LevelOptimizer<'a> {
    pub(crate) fn with_adjacency(adj: &'a Adjacency, tags: &TagMap, level: u8) -> Result<Self> {
        if level == 0 || level > TAG_BITS {
            return Err(Error::InvalidDepth(level as u32));
        }
        let expected = tags.frozen_depth() + 1;
        if level != expected {
            return Err(Error::OutOfOrderLevel { level, expected });
        }
        let members: Vec<WordId> = tags.assigned_ids().collect();
        let mut member = vec![false; adj.vocab_size];
        for &w in &members {
            member[w as usize] = true;
        }

        // Dense slots for the frozen prefixes present among members; the
        // class index of a word is 2·slot + its bit at this level.
        let mut prefixes: Vec<u16> = members
            .iter()
            .map(|&w| tags.class_at(w, level - 1).unwrap())
            .collect();
        prefixes.sort_unstable();
        prefixes.dedup();
        let slot_of = |p: u16| prefixes.binary_search(&p).unwrap() as u32;
        let classes = prefixes.len() * 2;

        // Initial bits are pseudo-random, drawn from a per-level stream of
        // the map's seed so levels are independently reproducible.
        let mut rng = ChaCha8Rng::seed_from_u64(tags.seed());
        rng.set_stream(level as u64);
        let mut class_of = vec![u32::MAX; adj.vocab_size];
        for &w in &members {
            let bit = rng.next_u32() & 1;
            let prefix = tags.class_at(w, level - 1).unwrap();
            class_of[w as usize] = slot_of(prefix) * 2 + bit;
        }

        let mut state = LevelOptimizer {
            level,
            adj,
            members,
            member,
            class_of,
            classes,
            joint: vec![0; classes * classes],
            row: vec![0; classes],
            col: vec![0; classes],
            total: 0,
        };
        state.rebuild_tables();
        Ok(state)
    }

    fn rebuild_tables(&mut self) {
        self.joint.iter_mut().for_each(|c| *c = 0);
        self.row.iter_mut().for_each(|c| *c = 0);
        self.col.iter_mut().for_each(|c| *c = 0);
        self.total = 0;
        let c = self.classes;
        for &w in &self.members {
            let cw = self.class_of[w as usize] as usize;
            for &(v, count) in &self.adj.right[w as usize] {
                if self.member[v as usize] {
                    let cv = self.class_of[v as usize] as usize;
                    self.joint[cw * c + cv] += count;
                }
            }
            let self_c = self.adj.self_count[w as usize];
            if self_c > 0 {
                self.joint[cw * c + cw] += self_c;
            }
        }
        for ci in 0..c {
            for di in 0..c {
                let j = self.joint[ci * c + di];
                self.row[ci] += j;
                self.col[di] += j;
            }
        }
        self.total = self.row.iter().sum();
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    /// Exact average class mutual information of the current assignment,
    /// recomputed from the integer count state.
    pub fn mi(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let b = self.total as f64;
        let mut s1 = 0.0;
        for &j in &self.joint {
            s1 += xlog2(j);
        }
        let mut s2 = 0.0;
        for &l in &self.row {
            s2 += xlog2(l);
        }
        let mut s3 = 0.0;
        for d in 0..self.classes {
            match marginal_term(self.col[d], self.row[d]) {
                Some(t) => s3 += t,
                None => return f64::INFINITY,
            }
        }
        (s1 - s2 - s3) / b + b.log2()
    }

    /// Mutual-information change of toggling `w`'s bit at this level,
    /// touching only the joint rows and columns of the word's source and
    /// destination classes.
    pub fn delta_flip(&self, w: WordId) -> f64 {
        let mut scratch = Scratch::new(self.classes);
        self.delta_flip_with(w, &mut scratch)
    }

    fn aggregate(&self, w: WordId, scratch: &mut Scratch) -> (u64, u64, u64) {
        let wi = w as usize;
        let mut out_mass = 0u64;
        for &(v, count) in &self.adj.right[wi] {
            if self.member[v as usize] {
                let d = self.class_of[v as usize];
                if scratch.rw[d as usize] == 0 {
                    scratch.touched_r.push(d);
                }
                scratch.rw[d as usize] += count;
                out_mass += count;
            }
        }
        let mut in_mass = 0u64;
        for &(v, count) in &self.adj.left[wi] {
            if self.member[v as usize] {
                let e = self.class_of[v as usize];
                if scratch.cw[e as usize] == 0 {
                    scratch.touched_c.push(e);
                }
                scratch.cw[e as usize] += count;
                in_mass += count;
            }
        }
        let self_c = self.adj.self_count[wi];
        (out_mass + self_c, in_mass + self_c, self_c)
    }

    fn delta_flip_with(&self, w: WordId, scratch: &mut Scratch) -> f64 {
        debug_assert!(self.member[w as usize]);
        let c = self.classes;
        let a = self.class_of[w as usize] as usize;
        let b = a ^ 1;
        let (wl, wr, self_c) = self.aggregate(w, scratch);
        if wl == 0 && wr == 0 {
            scratch.clear();
            return 0.0;
        }

        let rw_a = scratch.rw[a];
        let rw_b = scratch.rw[b];
        let cw_a = scratch.cw[a];
        let cw_b = scratch.cw[b];

        let mut d_s1 = 0.0;
        for &d in &scratch.touched_r {
            let d = d as usize;
            if d == a || d == b {
                continue;
            }
            let m = scratch.rw[d];
            let j_ad = self.joint[a * c + d];
            let j_bd = self.joint[b * c + d];
            d_s1 += xlog2(j_ad - m) - xlog2(j_ad) + xlog2(j_bd + m) - xlog2(j_bd);
        }
        for &e in &scratch.touched_c {
            let e = e as usize;
            if e == a || e == b {
                continue;
            }
            let m = scratch.cw[e];
            let j_ea = self.joint[e * c + a];
            let j_eb = self.joint[e * c + b];
            d_s1 += xlog2(j_ea - m) - xlog2(j_ea) + xlog2(j_eb + m) - xlog2(j_eb);
        }
        let j_aa = self.joint[a * c + a];
        let j_ab = self.joint[a * c + b];
        let j_ba = self.joint[b * c + a];
        let j_bb = self.joint[b * c + b];
        let n_aa = j_aa - rw_a - cw_a - self_c;
        let n_ab = j_ab - rw_b + cw_a;
        let n_ba = j_ba + rw_a - cw_b;
        let n_bb = j_bb + rw_b + cw_b + self_c;
        d_s1 += xlog2(n_aa) - xlog2(j_aa);
        d_s1 += xlog2(n_ab) - xlog2(j_ab);
        d_s1 += xlog2(n_ba) - xlog2(j_ba);
        d_s1 += xlog2(n_bb) - xlog2(j_bb);

        let (l_a, l_b) = (self.row[a], self.row[b]);
        let (r_a, r_b) = (self.col[a], self.col[b]);
        let d_s2 = xlog2(l_a - wl) - xlog2(l_a) + xlog2(l_b + wl) - xlog2(l_b);

        let old_m = match (marginal_term(r_a, l_a), marginal_term(r_b, l_b)) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        let new_m = match (marginal_term(r_a - wr, l_a - wl), marginal_term(r_b + wr, l_b + wl)) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        scratch.clear();

        match (old_m, new_m) {
            (Some(o), Some(n)) => (d_s1 - d_s2 - (n - o)) / self.total as f64,
            // Never move into a degenerate state; always move out of one.
            (_, None) => f64::NEG_INFINITY,
            (None, Some(_)) => f64::INFINITY,
        }
    }

    /// Toggle `w`'s bit, updating the count state incrementally.
    pub fn apply_flip(&mut self, w: WordId) {
        let c = self.classes;
        let a = self.class_of[w as usize] as usize;
        let b = a ^ 1;
        let mut scratch = Scratch::new(c);
        let (wl, wr, self_c) = self.aggregate(w, &mut scratch);
        for &d in &scratch.touched_r {
            let d = d as usize;
            if d == a || d == b {
                continue;
            }
            let m = scratch.rw[d];
            self.joint[a * c + d] -= m;
            self.joint[b * c + d] += m;
        }
        for &e in &scratch.touched_c {
            let e = e as usize;
            if e == a || e == b {
                continue;
            }
            let m = scratch.cw[e];
            self.joint[e * c + a] -= m;
            self.joint[e * c + b] += m;
        }
        let rw_a = scratch.rw[a];
        let rw_b = scratch.rw[b];
        let cw_a = scratch.cw[a];
        let cw_b = scratch.cw[b];
        let j_aa = self.joint[a * c + a];
        let j_ab = self.joint[a * c + b];
        let j_ba = self.joint[b * c + a];
        let j_bb = self.joint[b * c + b];
        self.joint[a * c + a] = j_aa - rw_a - cw_a - self_c;
        self.joint[a * c + b] = j_ab - rw_b + cw_a;
        self.joint[b * c + a] = j_ba + rw_a - cw_b;
        self.joint[b * c + b] = j_bb + rw_b + cw_b + self_c;
        self.row[a] -= wl;
        self.row[b] += wl;
        self.col[a] -= wr;
        self.col[b] += wr;
        self.class_of[w as usize] = b as u32;
    }

    /// Evaluate every possible flip and return the strictly improving one
    /// with the largest gain, ties to the lowest word id. Evaluation is
    /// read-only and runs in parallel; the result does not depend on the
    /// number of worker threads.
    pub fn best_flip(&self) -> Option<(WordId, f64)> {
        let classes = self.classes;
        let (delta, w) = self
            .members
            .par_iter()
            .map_init(
                || Scratch::new(classes),
                |scratch, &w| (self.delta_flip_with(w, scratch), w),
            )
            .reduce(
                || (f64::NEG_INFINITY, WordId::MAX),
                |best, cand| {
                    if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                        cand
                    } else {
                        best
                    }
                },
            );
        (delta > 0.0).then_some((w, delta))
    }

    /// Run sweeps until no strictly improving flip remains.
    pub fn run(&mut self) -> LevelTrace {
        let mut trace = LevelTrace {
            level: self.level,
            initial_mi: self.mi(),
            final_mi: 0.0,
            mi_after_flip: Vec::new(),
            flips: 0,
            truncated: false,
        };
        // Termination is guaranteed because each accepted flip strictly
        // increases M over a finite state space; the cap only guards
        // against floating-point cycling on adversarial inputs.
        let cap = 64 * self.members.len() + 256;
        let mut running = trace.initial_mi;
        loop {
            if trace.flips >= cap {
                trace.truncated = true;
                break;
            }
            let Some((w, delta)) = self.best_flip() else {
                break;
            };
            self.apply_flip(w);
            running += delta;
            trace.mi_after_flip.push(running);
            trace.flips += 1;
        }
        trace.final_mi = self.mi();
        trace
    }

    /// Write the optimized bits into `tags` and advance its frozen depth.
    pub fn write_back(&self, tags: &mut TagMap) {
        let shift = TAG_BITS - self.level;
        for &w in &self.members {
            let prefix = tags.class_at(w, self.level - 1).unwrap();
            let bit = (self.class_of[w as usize] & 1) as u16;
            let code = ((prefix << 1) | bit) << shift;
            tags.set_code(w, code);
        }
        tags.set_frozen_depth(self.level);
    }

    /// Word ids participating in this level's search.
    pub fn members(&self) -> &[WordId] {
        &self.members
    }
}

/// Optimize the bit at `level` for every assigned word of `tags`.
/// `level` must be exactly one past the map's frozen depth.
pub fn optimize_level(counts: &NGramCounts, tags: &mut TagMap, level: u8) -> Result<LevelTrace> {
    let adj = Adjacency::build(counts);
    let mut optimizer = LevelOptimizer::with_adjacency(&adj, tags, level)?;
    let trace = optimizer.run();
    optimizer.write_back(tags);
    Ok(trace)
}

/// Build a hierarchy of `depth` levels over the `top_k` most frequent
/// words (ties by id). Words outside the top `top_k` are left unassigned
/// for [`extend_rare_words`](super::extend_rare_words).
pub fn cluster_topdown(
    counts: &NGramCounts,
    top_k: usize,
    depth: u8,
    seed: u64,
) -> Result<(TagMap, ClusterTrace)> {
    let vocab_size = counts.vocab_size() as usize;
    if depth == 0 || depth > TAG_BITS {
        return Err(Error::InvalidConfiguration(format!(
            "depth must be between 1 and {TAG_BITS}, got {depth}"
        )));
    }
    if top_k == 0 || top_k > vocab_size {
        return Err(Error::InvalidConfiguration(format!(
            "top_k must be between 1 and the vocabulary size {vocab_size}, got {top_k}"
        )));
    }
    let mut ids: Vec<WordId> = (0..vocab_size as WordId).collect();
    ids.sort_by(|&a, &b| counts.unigram(b).cmp(&counts.unigram(a)).then_with(|| a.cmp(&b)));
    ids.truncate(top_k);

    let mut tags = TagMap::unassigned(vocab_size, seed);
    tags.admit(&ids);

    let adj = Adjacency::build(counts);
    let mut trace = ClusterTrace::default();
    for level in 1..=depth {
        let mut optimizer = LevelOptimizer::with_adjacency(&adj, &tags, level)?;
        trace.levels.push(optimizer.run());
        optimizer.write_back(&mut tags);
    }
    Ok((tags, trace))
}
