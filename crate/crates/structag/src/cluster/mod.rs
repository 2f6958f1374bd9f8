//! Hierarchical word classification via structural tags.
//!
//! Every word receives a 16-bit code whose most significant bits encode
//! progressively finer class membership: the top bit is the coarsest
//! two-way division, the top two bits a four-way division, and so on. The
//! prefix of a code at any depth is a class id, so one tag carries all
//! sixteen classification levels at once.
//!
//! Levels are fixed one at a time, coarsest first. At each level the bit
//! assignment is found by steepest-ascent search over single-word moves,
//! maximising the average class mutual information of adjacent class
//! occurrences (see [`average_class_mi`]). Once a level is frozen, no
//! later operation changes any word's bits at that level.

mod extend;
mod optimize;

pub use extend::extend_rare_words;
pub use optimize::{cluster_topdown, optimize_level, ClusterTrace, LevelOptimizer, LevelTrace};

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::{NGramCounts, Vocabulary, WordId};
use crate::{Error, Result};

/// Width of a structural tag in bits.
pub const TAG_BITS: u8 = 16;

/// A 16-bit structural tag. Prefixes of the code are class ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructuralTag(pub u16);

impl StructuralTag {
    /// The top `depth` bits of the code, as an integer in `[0, 2^depth)`.
    /// Depth 0 is the universal class.
    pub fn prefix(self, depth: u8) -> Result<u16> {
        if depth > TAG_BITS {
            return Err(Error::InvalidDepth(depth as u32));
        }
        Ok(prefix_bits(self.0, depth))
    }
}

#[inline]
pub(crate) fn prefix_bits(code: u16, depth: u8) -> u16 {
    if depth == 0 {
        0
    } else {
        code >> (TAG_BITS - depth)
    }
}

/// Word-to-tag assignment under construction or complete.
///
/// Words are *admitted* before clustering; admitted words hold a code whose
/// top [`frozen_depth`](TagMap::frozen_depth) bits are meaningful. The full
/// 16-bit codes become unique only after [`assign_unique_suffix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMap {
    codes: Vec<Option<u16>>,
    frozen_depth: u8,
    seed: u64,
}

impl TagMap {
    /// A map with every word unassigned. `seed` drives all pseudo-random
    /// choices made while building the hierarchy and is recorded in the
    /// serialized form.
    pub fn unassigned(vocab_size: usize, seed: u64) -> Self {
        TagMap {
            codes: vec![None; vocab_size],
            frozen_depth: 0,
            seed,
        }
    }

    /// Admit words into the (yet unclustered) hierarchy with an empty code.
    pub fn admit(&mut self, ids: &[WordId]) {
        for &id in ids {
            self.codes[id as usize] = Some(0);
        }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of levels already optimized; deeper bits carry no class
    /// information yet.
    pub fn frozen_depth(&self) -> u8 {
        self.frozen_depth
    }

    pub fn code(&self, id: WordId) -> Option<StructuralTag> {
        self.codes[id as usize].map(StructuralTag)
    }

    pub fn is_assigned(&self, id: WordId) -> bool {
        self.codes[id as usize].is_some()
    }

    /// Class of a word at `level` (top `level` bits), if assigned.
    pub fn class_at(&self, id: WordId, level: u8) -> Option<u16> {
        self.codes[id as usize].map(|c| prefix_bits(c, level))
    }

    pub fn assigned_ids(&self) -> impl Iterator<Item = WordId> + '_ {
        self.codes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(i, _)| i as WordId)
    }

    pub fn assigned_len(&self) -> usize {
        self.codes.iter().filter(|c| c.is_some()).count()
    }

    pub fn covers(&self, vocab_size: usize) -> bool {
        self.codes.len() == vocab_size && self.codes.iter().all(|c| c.is_some())
    }

    pub(crate) fn set_code(&mut self, id: WordId, code: u16) {
        self.codes[id as usize] = Some(code);
    }

    pub(crate) fn set_frozen_depth(&mut self, depth: u8) {
        self.frozen_depth = depth;
    }

    /// Serialize as TSV with `depth` and `seed` headers and one
    /// `word<TAB>code<TAB>frequency` row per assigned word, in id order.
    pub fn to_tsv(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        writeln!(out, "depth\t{}", self.frozen_depth).unwrap();
        writeln!(out, "seed\t{}", self.seed).unwrap();
        for (i, code) in self.codes.iter().enumerate() {
            if let Some(c) = code {
                let id = i as WordId;
                writeln!(out, "{}\t{:04x}\t{}", vocab.word(id), c, vocab.frequency(id)).unwrap();
            }
        }
        out
    }

    pub fn write_tsv(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        fs::write(path, self.to_tsv(vocab)).map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let mut header = |name: &str| -> Result<u64> {
            match lines.next() {
                Some((lineno, line)) => {
                    let mut parts = line.split('\t');
                    match (parts.next(), parts.next()) {
                        (Some(k), Some(v)) if k == name => v
                            .parse()
                            .map_err(|_| Error::parse(path, lineno + 1, format!("bad {name} value"))),
                        _ => Err(Error::parse(path, lineno + 1, format!("expected `{name}` header"))),
                    }
                }
                None => Err(Error::parse(path, 0, format!("missing `{name}` header"))),
            }
        };
        let depth = header("depth")?;
        if depth > TAG_BITS as u64 {
            return Err(Error::InvalidDepth(depth as u32));
        }
        let seed = header("seed")?;
        let mut map = TagMap::unassigned(vocab.len(), seed);
        map.frozen_depth = depth as u8;
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (word, code) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::parse(path, lineno + 1, "expected word<TAB>code<TAB>frequency")),
            };
            let id = vocab
                .id(word)
                .ok_or_else(|| Error::parse(path, lineno + 1, format!("word `{word}` not in vocabulary")))?;
            let code = u16::from_str_radix(code, 16)
                .map_err(|_| Error::parse(path, lineno + 1, "bad hex code"))?;
            if map.codes[id as usize].is_some() {
                return Err(Error::parse(path, lineno + 1, format!("duplicate word `{word}`")));
            }
            map.codes[id as usize] = Some(code);
        }
        Ok(map)
    }
}

/// Maximum-likelihood class statistics at one hierarchy depth.
///
/// `joint[(c, d)]` is the probability that a bigram maps to classes
/// `(c, d)`; `marginal[c]` is the probability that a class occurs as the
/// left element of a bigram (the joint's row marginal). Only bigrams whose
/// both endpoints are assigned contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLevelStats {
    level: u8,
    joint: BTreeMap<(u16, u16), f64>,
    marginal: BTreeMap<u16, f64>,
}

impl ClassLevelStats {
    /// Assemble stats from explicit probability tables (used by tests and
    /// callers with externally estimated distributions).
    pub fn from_parts(
        level: u8,
        joint: BTreeMap<(u16, u16), f64>,
        marginal: BTreeMap<u16, f64>,
    ) -> Self {
        ClassLevelStats { level, joint, marginal }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn joint(&self) -> &BTreeMap<(u16, u16), f64> {
        &self.joint
    }

    pub fn marginal(&self) -> &BTreeMap<u16, f64> {
        &self.marginal
    }
}

/// Class bigram and occurrence probabilities at `level`, estimated from
/// counts through tag prefixes.
pub fn class_stats(counts: &NGramCounts, tags: &TagMap, level: u8) -> Result<ClassLevelStats> {
    if level == 0 || level > TAG_BITS {
        return Err(Error::InvalidDepth(level as u32));
    }
    let mut joint_counts: BTreeMap<(u16, u16), u64> = BTreeMap::new();
    let mut total = 0u64;
    for (l, r, count) in counts.iter_bigrams() {
        if let (Some(cl), Some(cr)) = (tags.class_at(l, level), tags.class_at(r, level)) {
            *joint_counts.entry((cl, cr)).or_insert(0) += count;
            total += count;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientData(
            "no bigrams over assigned words".into(),
        ));
    }
    let mut joint = BTreeMap::new();
    let mut marginal: BTreeMap<u16, f64> = BTreeMap::new();
    for (&(c, d), &count) in &joint_counts {
        let p = count as f64 / total as f64;
        joint.insert((c, d), p);
        *marginal.entry(c).or_insert(0.0) += p;
    }
    Ok(ClassLevelStats { level, joint, marginal })
}

/// Average class mutual information in bits:
/// `Σ P(c,d) · log₂(P(c,d) / (P(c)·P(d)))` over cells with positive joint
/// mass, with `0·log 0 = 0`.
///
/// Returns `+∞` if some class carries joint mass but has a zero marginal,
/// which cannot happen for stats derived from a stream in which every
/// class occurs somewhere as a left bigram element.
pub fn average_class_mi(stats: &ClassLevelStats) -> f64 {
    let mut mi = 0.0;
    for (&(c, d), &p) in &stats.joint {
        if p <= 0.0 {
            continue;
        }
        let mc = stats.marginal.get(&c).copied().unwrap_or(0.0);
        let md = stats.marginal.get(&d).copied().unwrap_or(0.0);
        if mc <= 0.0 || md <= 0.0 {
            return f64::INFINITY;
        }
        mi += p * (p / (mc * md)).log2();
    }
    mi
}

#[inline]
pub(crate) fn xlog2(x: u64) -> f64 {
    if x == 0 {
        0.0
    } else {
        let v = x as f64;
        v * v.log2()
    }
}

/// `col_mass · log₂(row_mass)` with the zero conventions used by the
/// mutual-information decomposition. `None` marks the degenerate case of a
/// class that is entered but never left.
#[inline]
pub(crate) fn marginal_term(col_mass: u64, row_mass: u64) -> Option<f64> {
    if col_mass == 0 {
        Some(0.0)
    } else if row_mass == 0 {
        None
    } else {
        Some(col_mass as f64 * (row_mass as f64).log2())
    }
}

/// Make every full 16-bit code unique: within each class at the frozen
/// depth, the free low bits are assigned by descending frequency rank
/// (ties by id).
pub fn assign_unique_suffix(tags: &mut TagMap, counts: &NGramCounts) -> Result<()> {
    let depth = tags.frozen_depth;
    let free_bits = TAG_BITS - depth;
    let capacity = 1usize << free_bits;
    let mut classes: HashMap<u16, Vec<WordId>> = HashMap::new();
    for id in tags.assigned_ids() {
        classes
            .entry(tags.class_at(id, depth).unwrap())
            .or_default()
            .push(id);
    }
    for (&prefix, members) in &classes {
        if members.len() > capacity {
            return Err(Error::ClassOverflow {
                prefix,
                depth,
                size: members.len(),
                capacity,
            });
        }
    }
    let mut ordered: Vec<(u16, Vec<WordId>)> = classes.into_iter().collect();
    ordered.sort_unstable_by_key(|(p, _)| *p);
    for (prefix, mut members) in ordered {
        members.sort_by(|&a, &b| {
            counts
                .unigram(b)
                .cmp(&counts.unigram(a))
                .then_with(|| a.cmp(&b))
        });
        for (rank, id) in members.into_iter().enumerate() {
            let code = if free_bits == 0 {
                prefix
            } else {
                (prefix << free_bits) | rank as u16
            };
            tags.set_code(id, code);
        }
    }
    Ok(())
}

/// Render the hierarchy as indented text down to `depth`. Classes are
/// ordered by code; words within a leaf by descending frequency, ties by
/// id.
pub fn export_hierarchy(tags: &TagMap, vocab: &Vocabulary, depth: u8) -> Result<String> {
    if depth > tags.frozen_depth {
        return Err(Error::InvalidDepth(depth as u32));
    }
    let mut out = String::new();
    let ids: Vec<WordId> = tags.assigned_ids().collect();
    writeln!(out, ". {} words", ids.len()).unwrap();
    render_node(&mut out, tags, vocab, &ids, 0, 0, depth);
    Ok(out)
}

fn render_node(
    out: &mut String,
    tags: &TagMap,
    vocab: &Vocabulary,
    ids: &[WordId],
    level: u8,
    prefix: u16,
    depth: u8,
) {
    if level == depth {
        if level > 0 || !ids.is_empty() {
            let mut members = ids.to_vec();
            members.sort_by(|&a, &b| {
                vocab
                    .frequency(b)
                    .cmp(&vocab.frequency(a))
                    .then_with(|| a.cmp(&b))
            });
            let words: Vec<&str> = members.iter().map(|&id| vocab.word(id)).collect();
            let indent = "  ".repeat(level as usize);
            let label = bit_label(prefix, level);
            writeln!(out, "{indent}{label}: {}", words.join(" ")).unwrap();
        }
        return;
    }
    for bit in 0..2u16 {
        let child_prefix = (prefix << 1) | bit;
        let child_level = level + 1;
        let subset: Vec<WordId> = ids
            .iter()
            .copied()
            .filter(|&id| tags.class_at(id, child_level) == Some(child_prefix))
            .collect();
        if subset.is_empty() {
            continue;
        }
        if child_level < depth {
            let indent = "  ".repeat(child_level as usize);
            let label = bit_label(child_prefix, child_level);
            writeln!(out, "{indent}{label} ({} words)", subset.len()).unwrap();
        }
        render_node(out, tags, vocab, &subset, child_level, child_prefix, depth);
    }
}

fn bit_label(prefix: u16, level: u8) -> String {
    if level == 0 {
        ".".to_string()
    } else {
        (0..level)
            .rev()
            .map(|b| if prefix >> b & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

/// Newick rendering of the hierarchy for external dendrogram tools. Word
/// labels are single-quoted.
pub fn to_newick(tags: &TagMap, vocab: &Vocabulary, depth: u8) -> Result<String> {
    if depth > tags.frozen_depth {
        return Err(Error::InvalidDepth(depth as u32));
    }
    let ids: Vec<WordId> = tags.assigned_ids().collect();
    let mut out = String::new();
    newick_node(&mut out, tags, vocab, &ids, 0, 0, depth);
    out.push(';');
    Ok(out)
}

fn newick_node(
    out: &mut String,
    tags: &TagMap,
    vocab: &Vocabulary,
    ids: &[WordId],
    level: u8,
    prefix: u16,
    depth: u8,
) {
    if level == depth {
        let mut members = ids.to_vec();
        members.sort_by(|&a, &b| {
            vocab
                .frequency(b)
                .cmp(&vocab.frequency(a))
                .then_with(|| a.cmp(&b))
        });
        let leaves: Vec<String> = members
            .iter()
            .map(|&id| format!("'{}'", vocab.word(id).replace('\'', "''")))
            .collect();
        if leaves.len() == 1 {
            out.push_str(&leaves[0]);
        } else {
            out.push('(');
            out.push_str(&leaves.join(","));
            out.push(')');
        }
        return;
    }
    let mut children = Vec::new();
    for bit in 0..2u16 {
        let child_prefix = (prefix << 1) | bit;
        let subset: Vec<WordId> = ids
            .iter()
            .copied()
            .filter(|&id| tags.class_at(id, level + 1) == Some(child_prefix))
            .collect();
        if !subset.is_empty() {
            let mut child = String::new();
            newick_node(&mut child, tags, vocab, &subset, level + 1, child_prefix, depth);
            children.push(child);
        }
    }
    if children.len() == 1 {
        out.push_str(&children[0]);
    } else {
        out.push('(');
        out.push_str(&children.join(","));
        out.push(')');
    }
}
