//! Corpus processing: tokenization, vocabulary construction, n-gram
//! counting and train/held-out/test splitting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Dense vocabulary identifier. Id 0 is always the unknown-word entry.
pub type WordId = u32;

/// A sequence of vocabulary ids.
pub type TokenStream = Vec<WordId>;

/// Reserved id for the unknown-word entry.
pub const UNK_ID: WordId = 0;

/// Surface form of the unknown-word entry. The tokenizer can never produce
/// this string (angle brackets are split off as punctuation), so it is safe
/// as a reserved token.
pub const UNK_TOKEN: &str = "<unk>";

/// Highest n-gram order supported by [`NGramCounts`].
pub const MAX_ORDER: usize = 3;

// Ids are packed into u64 keys at 21 bits apiece (three per key).
const ID_BITS: u32 = 21;
const MAX_VOCAB: u32 = (1 << ID_BITS) - 2;

/// Split text into lowercase word tokens.
///
/// Alphanumeric runs form words; every other non-whitespace character
/// becomes a single-character token of its own; whitespace only separates.
/// The rules are fixed so that tokenization is reproducible bit-for-bit.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            if !word.is_empty() {
                tokens.push(word.to_lowercase());
                word.clear();
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_lowercase().to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word.to_lowercase());
    }
    tokens
}

/// Vocabulary truncation rule for [`Vocabulary::build`].
#[derive(Debug, Clone, Copy)]
pub enum VocabCutoff {
    /// Keep the `n` most frequent word types.
    MaxSize(usize),
    /// Keep every type occurring at least `n` times.
    MinCount(u64),
}

/// Frequency-ranked word/id mapping with a reserved unknown entry.
///
/// Id 0 is [`UNK_TOKEN`]; ids 1.. are the retained types in descending
/// training frequency, ties broken lexicographically. The unknown entry's
/// frequency is the total mass of all excluded tokens.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    freqs: Vec<u64>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn build(tokens: &[String], cutoff: VocabCutoff) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("empty token sequence".into()));
        }
        if let VocabCutoff::MaxSize(0) = cutoff {
            return Err(Error::InvalidConfiguration(
                "vocabulary size must be at least 1".into(),
            ));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for t in tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let retained = match cutoff {
            VocabCutoff::MaxSize(n) => n.min(ranked.len()),
            VocabCutoff::MinCount(c) => ranked.iter().take_while(|(_, f)| *f >= c).count(),
        };
        let excluded_mass: u64 = ranked[retained..].iter().map(|(_, f)| f).sum();

        let mut words = Vec::with_capacity(retained + 1);
        let mut freqs = Vec::with_capacity(retained + 1);
        words.push(UNK_TOKEN.to_string());
        freqs.push(excluded_mass);
        for (w, f) in &ranked[..retained] {
            words.push((*w).to_string());
            freqs.push(*f);
        }
        Self::from_rows(words, freqs)
    }

    fn from_rows(words: Vec<String>, freqs: Vec<u64>) -> Result<Self> {
        if words.len() as u64 > MAX_VOCAB as u64 {
            return Err(Error::InvalidConfiguration(format!(
                "vocabulary of {} types exceeds the supported maximum {}",
                words.len(),
                MAX_VOCAB
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as WordId).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary word `{w}`")));
            }
        }
        Ok(Vocabulary { words, freqs, index })
    }

    /// Number of entries, unknown included.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    /// Id of `word`, falling back to [`UNK_ID`].
    pub fn id_or_unk(&self, word: &str) -> WordId {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn frequency(&self, id: WordId) -> u64 {
        self.freqs[id as usize]
    }

    pub fn ids(&self) -> impl Iterator<Item = WordId> + '_ {
        (0..self.words.len() as WordId).into_iter()
    }

    /// Map word tokens to ids, sending out-of-vocabulary tokens to
    /// [`UNK_ID`]. Returns the stream and the number of tokens mapped to
    /// the unknown entry.
    pub fn map_tokens(&self, tokens: &[String]) -> (TokenStream, usize) {
        let mut oov = 0;
        let stream = tokens
            .iter()
            .map(|t| match self.id(t) {
                Some(id) => id,
                None => {
                    oov += 1;
                    UNK_ID
                }
            })
            .collect();
        (stream, oov)
    }

    /// Serialize as TSV: one `id<TAB>word<TAB>frequency` line per entry.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (w, f)) in self.words.iter().zip(&self.freqs).enumerate() {
            writeln!(out, "{i}\t{w}\t{f}").unwrap();
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        let mut freqs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (id, word, freq) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::parse(path, lineno + 1, "expected id<TAB>word<TAB>frequency")),
            };
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad id"))?;
            if id != words.len() {
                return Err(Error::parse(path, lineno + 1, "ids must be dense and ascending"));
            }
            let freq: u64 = freq
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad frequency"))?;
            words.push(word.to_string());
            freqs.push(freq);
        }
        if words.is_empty() {
            return Err(Error::parse(path, 0, "empty vocabulary file"));
        }
        if words[0] != UNK_TOKEN {
            return Err(Error::parse(path, 1, format!("entry 0 must be `{UNK_TOKEN}`")));
        }
        Self::from_rows(words, freqs)
    }
}

fn pack(ids: &[WordId]) -> u64 {
    debug_assert!(ids.len() <= MAX_ORDER);
    let mut key = 0u64;
    for &id in ids {
        debug_assert!(id <= MAX_VOCAB);
        key = (key << ID_BITS) | (id as u64 + 1);
    }
    key
}

fn unpack(mut key: u64, order: usize) -> Vec<WordId> {
    let mut ids = vec![0; order];
    for slot in ids.iter_mut().rev() {
        *slot = ((key & ((1 << ID_BITS) - 1)) - 1) as WordId;
        key >>= ID_BITS;
    }
    ids
}

/// Exact occurrence counts for contiguous segments of orders `1..=max_order`,
/// plus continuation totals per context.
///
/// The continuation total of a context is the summed count of all segments
/// extending it by one token. It equals the context's own count everywhere
/// except at the final positions of the stream, and it is the denominator
/// that keeps every conditional distribution summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramCounts {
    max_order: usize,
    n: u64,
    vocab_size: u32,
    grams: Vec<HashMap<u64, u64>>,
    ctx: Vec<HashMap<u64, u64>>,
}

impl NGramCounts {
    pub fn count(stream: &[WordId], max_order: usize, vocab_size: u32) -> Result<Self> {
        Self::validate_config(max_order, vocab_size)?;
        let mut grams: Vec<HashMap<u64, u64>> = vec![HashMap::new(); max_order];
        for start in 0..stream.len() {
            Self::count_at(&mut grams, stream, start, max_order);
        }
        Ok(Self::finish(grams, stream.len() as u64, max_order, vocab_size))
    }

    /// Parallel counting: the stream is sharded, shards counted
    /// independently and merged. Bit-identical to [`NGramCounts::count`].
    pub fn count_parallel(
        stream: &[WordId],
        max_order: usize,
        vocab_size: u32,
        threads: usize,
    ) -> Result<Self> {
        Self::validate_config(max_order, vocab_size)?;
        let shards = threads.max(1).min(stream.len().max(1));
        let chunk = stream.len().div_ceil(shards);
        let partials: Vec<Vec<HashMap<u64, u64>>> = {
            use rayon::prelude::*;
            (0..shards)
                .into_par_iter()
                .map(|s| {
                    let lo = s * chunk;
                    let hi = ((s + 1) * chunk).min(stream.len());
                    let mut grams: Vec<HashMap<u64, u64>> = vec![HashMap::new(); max_order];
                    for start in lo..hi {
                        Self::count_at(&mut grams, stream, start, max_order);
                    }
                    grams
                })
                .collect()
        };
        let mut grams: Vec<HashMap<u64, u64>> = vec![HashMap::new(); max_order];
        for partial in partials {
            for (order, table) in partial.into_iter().enumerate() {
                for (key, count) in table {
                    *grams[order].entry(key).or_insert(0) += count;
                }
            }
        }
        Ok(Self::finish(grams, stream.len() as u64, max_order, vocab_size))
    }

    fn validate_config(max_order: usize, vocab_size: u32) -> Result<()> {
        if max_order < 1 || max_order > MAX_ORDER {
            return Err(Error::InvalidConfiguration(format!(
                "max order must be between 1 and {MAX_ORDER}, got {max_order}"
            )));
        }
        if vocab_size > MAX_VOCAB {
            return Err(Error::InvalidConfiguration(format!(
                "vocabulary size {vocab_size} exceeds the supported maximum {MAX_VOCAB}"
            )));
        }
        Ok(())
    }

    #[inline]
    fn count_at(grams: &mut [HashMap<u64, u64>], stream: &[WordId], start: usize, max_order: usize) {
        let mut key = 0u64;
        for k in 0..max_order.min(stream.len() - start) {
            key = (key << ID_BITS) | (stream[start + k] as u64 + 1);
            *grams[k].entry(key).or_insert(0) += 1;
        }
    }

    fn finish(grams: Vec<HashMap<u64, u64>>, n: u64, max_order: usize, vocab_size: u32) -> Self {
        let mut ctx: Vec<HashMap<u64, u64>> = vec![HashMap::new(); max_order.saturating_sub(1)];
        for k in 2..=max_order {
            let mut totals = HashMap::with_capacity(grams[k - 2].len());
            for (&key, &count) in &grams[k - 1] {
                *totals.entry(key >> ID_BITS).or_insert(0) += count;
            }
            ctx[k - 2] = totals;
        }
        NGramCounts {
            max_order,
            n,
            vocab_size,
            grams,
            ctx,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    /// Count of the exact segment `ids`. Zero if the segment never occurred
    /// or its order exceeds `max_order`.
    pub fn gram(&self, ids: &[WordId]) -> u64 {
        if ids.is_empty() || ids.len() > self.max_order {
            return 0;
        }
        self.grams[ids.len() - 1].get(&pack(ids)).copied().unwrap_or(0)
    }

    pub fn unigram(&self, id: WordId) -> u64 {
        self.gram(&[id])
    }

    /// Summed count of every segment extending `context` by one token.
    /// The empty context yields the token count N.
    pub fn context_total(&self, context: &[WordId]) -> u64 {
        if context.is_empty() {
            return self.n;
        }
        if context.len() >= self.max_order {
            return 0;
        }
        self.ctx[context.len() - 1]
            .get(&pack(context))
            .copied()
            .unwrap_or(0)
    }

    /// Iterate all counted segments of one order (arbitrary table order).
    pub fn iter_order(&self, order: usize) -> impl Iterator<Item = (Vec<WordId>, u64)> + '_ {
        assert!(order >= 1 && order <= self.max_order);
        self.grams[order - 1]
            .iter()
            .map(move |(&key, &count)| (unpack(key, order), count))
    }

    /// Iterate bigrams as `((left, right), count)` without allocating.
    pub fn iter_bigrams(&self) -> impl Iterator<Item = (WordId, WordId, u64)> + '_ {
        const MASK: u64 = (1 << ID_BITS) - 1;
        self.grams
            .get(1)
            .into_iter()
            .flat_map(|table| table.iter())
            .map(|(&key, &count)| {
                let right = ((key & MASK) - 1) as WordId;
                let left = (((key >> ID_BITS) & MASK) - 1) as WordId;
                (left, right, count)
            })
    }

    /// Serialize as TSV with `N` and `V` headers and one
    /// `order<TAB>ids<TAB>count` line per counted segment, sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "N\t{}", self.n).unwrap();
        writeln!(out, "V\t{}", self.vocab_size).unwrap();
        for order in 1..=self.max_order {
            let mut keys: Vec<u64> = self.grams[order - 1].keys().copied().collect();
            keys.sort_unstable();
            for key in keys {
                let ids = unpack(key, order);
                let joined = ids
                    .iter()
                    .map(|id| id.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                writeln!(out, "{order}\t{joined}\t{}", self.grams[order - 1][&key]).unwrap();
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
        let n = header("N")?;
        let vocab_size = header("V")? as u32;

        let mut grams: Vec<HashMap<u64, u64>> = vec![HashMap::new(); MAX_ORDER];
        let mut max_order = 1usize;
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (order, ids, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::parse(path, lineno + 1, "expected order<TAB>ids<TAB>count")),
            };
            let order: usize = order
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad order"))?;
            if order < 1 || order > MAX_ORDER {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("order {order} outside supported range 1..={MAX_ORDER}"),
                ));
            }
            let mut seq = Vec::with_capacity(order);
            for part in ids.split(' ') {
                let id: WordId = part
                    .parse()
                    .map_err(|_| Error::parse(path, lineno + 1, "bad token id"))?;
                if id >= vocab_size && vocab_size > 0 {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("token id {id} outside vocabulary of size {vocab_size}"),
                    ));
                }
                seq.push(id);
            }
            if seq.len() != order {
                return Err(Error::parse(path, lineno + 1, "id count does not match order"));
            }
            let count: u64 = count
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad count"))?;
            if grams[order - 1].insert(pack(&seq), count).is_some() {
                return Err(Error::parse(path, lineno + 1, "duplicate segment"));
            }
            max_order = max_order.max(order);
        }
        grams.truncate(max_order);
        let counts = Self::finish(grams, n, max_order, vocab_size);
        let unigram_sum: u64 = counts.grams[0].values().sum();
        if unigram_sum != n {
            return Err(Error::parse(
                path,
                0,
                format!("unigram counts sum to {unigram_sum}, header N is {n}"),
            ));
        }
        Ok(counts)
    }
}

/// Contiguous 60/30/10 slices of a token stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplits {
    pub train: TokenStream,
    pub heldout: TokenStream,
    pub test: TokenStream,
}

/// Boundary indices for the 60/30/10 split: `(⌊0.6n⌋, ⌊0.9n⌋)`.
pub fn split_bounds(n: usize) -> Result<(usize, usize)> {
    if n < 10 {
        return Err(Error::CorpusTooSmall(n));
    }
    Ok((n * 6 / 10, n * 9 / 10))
}

pub fn split_corpus(stream: &[WordId]) -> Result<CorpusSplits> {
    let (b1, b2) = split_bounds(stream.len())?;
    Ok(CorpusSplits {
        train: stream[..b1].to_vec(),
        heldout: stream[b1..b2].to_vec(),
        test: stream[b2..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_splits_words_and_punctuation() {
        assert_eq!(
            tokenize("The boys eat the sandwiches quickly."),
            toks(&["the", "boys", "eat", "the", "sandwiches", "quickly", "."])
        );
    }

    #[test]
    fn tokenize_empty_input() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_collapses_whitespace() {
        assert_eq!(tokenize("a  a\ta"), toks(&["a", "a", "a"]));
    }

    #[test]
    fn tokenize_interior_punctuation() {
        assert_eq!(tokenize("don't stop"), toks(&["don", "'", "t", "stop"]));
        assert_eq!(tokenize("3.14"), toks(&["3", ".", "14"]));
    }

    #[test]
    fn vocabulary_truncates_by_frequency() {
        let v = Vocabulary::build(&toks(&["a", "b", "a", "c", "a", "b"]), VocabCutoff::MaxSize(2))
            .unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.word(UNK_ID), UNK_TOKEN);
        assert_eq!(v.frequency(UNK_ID), 1); // c excluded
        assert_eq!(v.frequency(v.id("a").unwrap()), 3);
        assert_eq!(v.frequency(v.id("b").unwrap()), 2);
        assert_eq!(v.id("c"), None);
    }

    #[test]
    fn vocabulary_single_type() {
        let v = Vocabulary::build(&toks(&["a"]), VocabCutoff::MaxSize(10)).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.frequency(v.id("a").unwrap()), 1);
        assert_eq!(v.frequency(UNK_ID), 0);
    }

    #[test]
    fn vocabulary_tie_breaks_lexicographically() {
        let v = Vocabulary::build(&toks(&["a", "b"]), VocabCutoff::MaxSize(1)).unwrap();
        assert_eq!(v.id("a"), Some(1));
        assert_eq!(v.id("b"), None);
        assert_eq!(v.frequency(UNK_ID), 1);
    }

    #[test]
    fn vocabulary_zero_size_rejected() {
        let err = Vocabulary::build(&toks(&["a"]), VocabCutoff::MaxSize(0)).unwrap_err();
        assert!(matches!(err, Error::InvalidConfiguration(_)));
    }

    #[test]
    fn vocabulary_conserves_mass() {
        let tokens = toks(&["x", "y", "z", "x", "y", "x", "w", "w", "w", "w"]);
        let v = Vocabulary::build(&tokens, VocabCutoff::MaxSize(2)).unwrap();
        let total: u64 = v.ids().map(|id| v.frequency(id)).sum();
        assert_eq!(total, tokens.len() as u64);
    }

    #[test]
    fn vocabulary_min_count_cutoff() {
        let v = Vocabulary::build(
            &toks(&["a", "b", "a", "c", "a", "b"]),
            VocabCutoff::MinCount(2),
        )
        .unwrap();
        assert_eq!(v.len(), 3); // a, b, unk
        assert_eq!(v.frequency(UNK_ID), 1);
    }

    #[test]
    fn counting_matches_hand_counts() {
        // [a,b,a,b,a,b] with a=0, b=1
        let stream = vec![0, 1, 0, 1, 0, 1];
        let c = NGramCounts::count(&stream, 2, 2).unwrap();
        assert_eq!(c.unigram(0), 3);
        assert_eq!(c.unigram(1), 3);
        assert_eq!(c.gram(&[0, 1]), 3);
        assert_eq!(c.gram(&[1, 0]), 2);
        assert_eq!(c.gram(&[1, 1]), 0);
    }

    #[test]
    fn counting_short_stream() {
        let c = NGramCounts::count(&[0], 3, 1).unwrap();
        assert_eq!(c.unigram(0), 1);
        assert_eq!(c.iter_order(2).count(), 0);
        assert_eq!(c.iter_order(3).count(), 0);
    }

    #[test]
    fn unigram_counts_sum_to_n() {
        let stream = vec![0, 1, 2, 1, 0, 2, 2, 1];
        let c = NGramCounts::count(&stream, 3, 3).unwrap();
        let sum: u64 = c.iter_order(1).map(|(_, n)| n).sum();
        assert_eq!(sum, stream.len() as u64);
    }

    #[test]
    fn prefix_counts_dominate_segment_counts() {
        let stream: Vec<WordId> = (0..200).map(|i| (i * 7 % 5) as WordId).collect();
        let c = NGramCounts::count(&stream, 3, 5).unwrap();
        for order in 2..=3 {
            for (ids, count) in c.iter_order(order) {
                assert!(c.gram(&ids[..order - 1]) >= count);
            }
        }
    }

    #[test]
    fn context_total_differs_only_at_stream_tail() {
        let stream = vec![0, 1, 2, 0, 1];
        let c = NGramCounts::count(&stream, 2, 3).unwrap();
        // final token is 1: context [1] occurs twice but extends only once
        assert_eq!(c.gram(&[1]), 2);
        assert_eq!(c.context_total(&[1]), 1);
        assert_eq!(c.context_total(&[0]), 2);
        assert_eq!(c.context_total(&[]), 5);
    }

    #[test]
    fn parallel_counting_is_identical() {
        let stream: Vec<WordId> = (0..5000).map(|i| (i * 31 % 17) as WordId).collect();
        let seq = NGramCounts::count(&stream, 3, 17).unwrap();
        for threads in [1, 2, 3, 8] {
            let par = NGramCounts::count_parallel(&stream, 3, 17, threads).unwrap();
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn counts_tsv_round_trip() {
        let stream = vec![0, 1, 2, 0, 1, 2, 2, 1, 0, 0];
        let c = NGramCounts::count(&stream, 3, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.tsv");
        c.write_tsv(&path).unwrap();
        let back = NGramCounts::read_tsv(&path).unwrap();
        assert_eq!(c, back);
        // deterministic export
        assert_eq!(c.to_tsv(), back.to_tsv());
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let v = Vocabulary::build(
            &toks(&["b", "a", "b", "c", "c", "c"]),
            VocabCutoff::MaxSize(2),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.write_tsv(&path).unwrap();
        let back = Vocabulary::read_tsv(&path).unwrap();
        assert_eq!(v.to_tsv(), back.to_tsv());
        assert_eq!(back.id("c"), Some(1));
    }

    #[test]
    fn split_exact_and_floor_boundaries() {
        let s100: Vec<WordId> = vec![0; 100];
        let sp = split_corpus(&s100).unwrap();
        assert_eq!((sp.train.len(), sp.heldout.len(), sp.test.len()), (60, 30, 10));

        let s101: Vec<WordId> = vec![0; 101];
        let sp = split_corpus(&s101).unwrap();
        assert_eq!((sp.train.len(), sp.heldout.len(), sp.test.len()), (60, 30, 11));

        let s10: Vec<WordId> = vec![0; 10];
        let sp = split_corpus(&s10).unwrap();
        assert_eq!((sp.train.len(), sp.heldout.len(), sp.test.len()), (6, 3, 1));
    }

    #[test]
    fn split_rejects_tiny_corpus() {
        let err = split_corpus(&[0; 9]).unwrap_err();
        assert!(matches!(err, Error::CorpusTooSmall(9)));
    }

    #[test]
    fn split_concatenation_reproduces_source() {
        let stream: Vec<WordId> = (0..137).map(|i| i % 7).collect();
        let sp = split_corpus(&stream).unwrap();
        let mut joined = sp.train.clone();
        joined.extend(&sp.heldout);
        joined.extend(&sp.test);
        assert_eq!(joined, stream);
    }
}
