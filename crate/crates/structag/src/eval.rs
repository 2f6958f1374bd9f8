//! Model and cluster evaluation: test-set perplexity, ranking of
//! alternative sentences, and purity of a classification against a gold
//! lexicon.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cluster::TagMap;
use crate::corpus::{tokenize, TokenStream, Vocabulary, WordId, UNK_ID};
use crate::lm::Model;
use crate::{Error, Result};

/// Per-model perplexity measurement over a test stream.
#[derive(Debug, Clone)]
pub struct PerplexityReport {
    pub model: String,
    /// Tokens evaluated.
    pub tokens: usize,
    /// Σ log₂ P over all events.
    pub log_prob_sum: f64,
    /// `2^(−log_prob_sum / tokens)`.
    pub perplexity: f64,
    /// Tokens that are the unknown-word entry (mapped from
    /// out-of-vocabulary words).
    pub unk_tokens: usize,
    /// Running perplexity after each successive tenth of the stream, to
    /// expose non-stationary test sets.
    pub decile_perplexity: Vec<f64>,
}

/// Evaluate `model` event by event over `test`, conditioning each token on
/// the preceding stream (truncated to the model's order).
pub fn perplexity(model: &Model<'_>, test: &[WordId], label: &str) -> Result<PerplexityReport> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test stream".into()));
    }
    let order = model.order();
    let mut log_sum = 0.0;
    let mut unk_tokens = 0;
    let mut decile_perplexity = Vec::with_capacity(10);
    let mut next_decile = 1;
    for (i, &w) in test.iter().enumerate() {
        if w == UNK_ID {
            unk_tokens += 1;
        }
        let start = i.saturating_sub(order - 1);
        let p = model.prob(&test[start..i], w);
        if p <= 0.0 {
            return Err(Error::EvaluationFailure {
                position: i,
                word: format!("id {w}"),
            });
        }
        log_sum += p.log2();
        while next_decile <= 10 && (i + 1) * 10 >= next_decile * test.len() {
            decile_perplexity.push(2f64.powf(-log_sum / (i + 1) as f64));
            next_decile += 1;
        }
    }
    Ok(PerplexityReport {
        model: label.to_string(),
        tokens: test.len(),
        log_prob_sum: log_sum,
        perplexity: 2f64.powf(-log_sum / test.len() as f64),
        unk_tokens,
        decile_perplexity,
    })
}

/// Joint probability of a token stream under the model, events conditioned
/// within the stream only (history starts empty).
pub fn stream_probability(model: &Model<'_>, stream: &[WordId]) -> f64 {
    let order = model.order();
    let mut p = 1.0;
    for (i, &w) in stream.iter().enumerate() {
        let start = i.saturating_sub(order - 1);
        p *= model.prob(&stream[start..i], w);
    }
    p
}

/// Score a list of alternative sentences and normalise over them.
///
/// Each sentence is tokenized, mapped through the vocabulary (unknown
/// words to the unknown entry) and scored as an independent stream; the
/// raw joint probabilities are divided by their sum and sorted descending
/// (stable on ties).
pub fn rank_sentences(
    model: &Model<'_>,
    vocab: &Vocabulary,
    sentences: &[String],
) -> Result<Vec<(String, f64)>> {
    if sentences.is_empty() {
        return Err(Error::InvalidInput("no sentences to rank".into()));
    }
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let tokens = tokenize(sentence);
        let (stream, _): (TokenStream, usize) = vocab.map_tokens(&tokens);
        scored.push((sentence.clone(), stream_probability(model, &stream)));
    }
    let total: f64 = scored.iter().map(|(_, p)| p).sum();
    if total > 0.0 {
        for (_, p) in &mut scored {
            *p /= total;
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    Ok(scored)
}

/// Reference labels for vocabulary words, e.g. part-of-speech tags or a
/// vowel/consonant marking.
#[derive(Debug, Clone, Default)]
pub struct GoldLexicon {
    labels: HashMap<String, String>,
}

impl GoldLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, label: impl Into<String>) {
        self.labels.insert(word.into(), label.into());
    }

    pub fn label(&self, word: &str) -> Option<&str> {
        self.labels.get(word).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Read `word<TAB>label` lines.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lexicon = GoldLexicon::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next()) {
                (Some(w), Some(l)) => lexicon.insert(w, l),
                _ => return Err(Error::parse(path, lineno + 1, "expected word<TAB>label")),
            }
        }
        Ok(lexicon)
    }
}

/// Purity measurement with coverage diagnostics.
#[derive(Debug, Clone)]
pub struct PurityReport {
    /// Frequency-weighted fraction of covered tokens whose class majority
    /// label matches their own.
    pub purity: f64,
    pub covered_types: usize,
    pub uncovered_types: usize,
    pub covered_mass: u64,
    pub level: u8,
}

/// Frequency-weighted purity of the level-`level` classes against a gold
/// lexicon. The unknown entry is outside the lexicon's scope and ignored;
/// other uncovered words are excluded from the measure but counted. Gold
/// coverage below half the vocabulary is an error.
pub fn cluster_purity(
    tags: &TagMap,
    vocab: &Vocabulary,
    gold: &GoldLexicon,
    level: u8,
) -> Result<PurityReport> {
    let mut covered_types = 0;
    let mut uncovered_types = 0;
    // class -> label -> token mass
    let mut classes: HashMap<u16, HashMap<&str, u64>> = HashMap::new();
    for id in vocab.ids() {
        if id == UNK_ID {
            continue;
        }
        let word = vocab.word(id);
        let (Some(label), Some(class)) = (gold.label(word), tags.class_at(id, level)) else {
            uncovered_types += 1;
            continue;
        };
        covered_types += 1;
        *classes.entry(class).or_default().entry(label).or_insert(0) += vocab.frequency(id);
    }
    let total = covered_types + uncovered_types;
    if covered_types * 2 < total {
        return Err(Error::InsufficientGold {
            covered: covered_types,
            total,
        });
    }
    let mut covered_mass = 0u64;
    let mut majority_mass = 0u64;
    for label_masses in classes.values() {
        let class_mass: u64 = label_masses.values().sum();
        let class_majority = label_masses.values().max().copied().unwrap_or(0);
        covered_mass += class_mass;
        majority_mass += class_majority;
    }
    let purity = if covered_mass == 0 {
        0.0
    } else {
        majority_mass as f64 / covered_mass as f64
    };
    Ok(PurityReport {
        purity,
        covered_types,
        uncovered_types,
        covered_mass,
        level,
    })
}

/// Aligned plain-text table of perplexity results.
pub fn format_report_table(reports: &[PerplexityReport]) -> String {
    let name_width = reports
        .iter()
        .map(|r| r.model.len())
        .max()
        .unwrap_or(0)
        .max("Language Model".len());
    let mut out = String::new();
    writeln!(out, "{:<name_width$}  {:>14}", "Language Model", "Perplexity").unwrap();
    writeln!(out, "{}  {}", "-".repeat(name_width), "-".repeat(14)).unwrap();
    for r in reports {
        writeln!(out, "{:<name_width$}  {:>14.1}", r.model, r.perplexity).unwrap();
    }
    out
}

/// Perplexity reports as TSV, one line per model plus decile columns.
pub fn reports_to_tsv(reports: &[PerplexityReport]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "model\ttokens\tlog2_prob_sum\tperplexity\tunk_tokens\tdecile_perplexities"
    )
    .unwrap();
    for r in reports {
        let deciles = r
            .decile_perplexity
            .iter()
            .map(|p| format!("{p:.4}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            r.model, r.tokens, r.log_prob_sum, r.perplexity, r.unk_tokens, deciles
        )
        .unwrap();
    }
    out
}

/// Two-column table of ranked sentences and their normalised
/// probabilities.
pub fn format_ranking(model_name: &str, ranked: &[(String, f64)]) -> String {
    let width = ranked
        .iter()
        .map(|(s, _)| s.len())
        .max()
        .unwrap_or(0)
        .max("sentence".len());
    let mut out = String::new();
    writeln!(out, "{:<width$}  {:>10}", "sentence", model_name).unwrap();
    for (sentence, p) in ranked {
        writeln!(out, "{sentence:<width$}  {p:>10.5}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{NGramCounts, VocabCutoff};
    use crate::lm::{ComponentSpec, LambdaTable, Model, ModelKind};
    use approx::assert_relative_eq;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn equiprobable_perplexity_equals_vocabulary_size() {
        let counts = NGramCounts::count(&[0, 1, 2, 3, 4], 1, 5).unwrap();
        let model = Model::build(ModelKind::Equiprobable, &counts, None, vec![], None).unwrap();
        let report = perplexity(&model, &[0, 3, 3, 1, 4, 2], "equiprobable").unwrap();
        assert_relative_eq!(report.perplexity, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn two_event_perplexity_by_hand() {
        // events with P = 0.5 and P = 0.125: PP = 2^((1+3)/2) = 4
        let counts = NGramCounts::count(&[0, 0, 0, 0, 1, 1, 1, 2], 1, 3).unwrap();
        let model = Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap();
        // P(0) = 1/2, P(2) = 1/8
        let report = perplexity(&model, &[0, 2], "unigram").unwrap();
        assert_relative_eq!(report.perplexity, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn perfect_predictor_has_perplexity_one() {
        let counts = NGramCounts::count(&[0, 0, 0, 0], 1, 1).unwrap();
        let model = Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap();
        let report = perplexity(&model, &[0, 0, 0], "unigram").unwrap();
        assert_relative_eq!(report.perplexity, 1.0);
    }

    #[test]
    fn zero_probability_event_is_reported() {
        // word 1 has zero training mass under the unigram model
        let counts = NGramCounts::count(&[0, 0, 0], 1, 2).unwrap();
        let model = Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap();
        let err = perplexity(&model, &[0, 1], "unigram").unwrap_err();
        assert!(matches!(err, Error::EvaluationFailure { position: 1, .. }));
    }

    #[test]
    fn decile_perplexities_cover_the_stream() {
        let counts = NGramCounts::count(&[0, 1, 0, 1, 0, 1, 1, 0, 0, 1], 1, 2).unwrap();
        let model = Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap();
        let stream: Vec<WordId> = (0..40).map(|i| i % 2).collect();
        let report = perplexity(&model, &stream, "unigram").unwrap();
        assert_eq!(report.decile_perplexity.len(), 10);
        assert_relative_eq!(
            *report.decile_perplexity.last().unwrap(),
            report.perplexity,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_sentence_normalizes_to_one() {
        let tokens = toks(&["a", "b", "a", "b"]);
        let vocab = Vocabulary::build(&tokens, VocabCutoff::MaxSize(5)).unwrap();
        let (stream, _) = vocab.map_tokens(&tokens);
        let counts = NGramCounts::count(&stream, 2, vocab.len() as u32).unwrap();
        let model = Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap();
        let ranked = rank_sentences(&model, &vocab, &["a b".to_string()]).unwrap();
        assert_relative_eq!(ranked[0].1, 1.0);
    }

    #[test]
    fn empty_sentence_list_rejected() {
        let counts = NGramCounts::count(&[0, 0], 1, 1).unwrap();
        let vocab = Vocabulary::build(&toks(&["a"]), VocabCutoff::MaxSize(1)).unwrap();
        let model = Model::build(ModelKind::Unigram, &counts, None, vec![], None).unwrap();
        assert!(matches!(
            rank_sentences(&model, &vocab, &[]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ranking_is_normalized_and_sorted() {
        let tokens = toks(&["a", "b", "a", "b", "a", "c"]);
        let vocab = Vocabulary::build(&tokens, VocabCutoff::MaxSize(5)).unwrap();
        let (stream, _) = vocab.map_tokens(&tokens);
        let counts = NGramCounts::count(&stream, 2, vocab.len() as u32).unwrap();
        let lambdas = LambdaTable::from_weights(&[0.5, 0.5]).unwrap();
        let specs = ComponentSpec::word_orders(2);
        let model =
            Model::build(ModelKind::InterpTrigram, &counts, None, specs, Some(lambdas)).unwrap();
        let sentences = vec!["a b a".to_string(), "c c c".to_string(), "a b".to_string()];
        let ranked = rank_sentences(&model, &vocab, &sentences).unwrap();
        let total: f64 = ranked.iter().map(|(_, p)| p).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        for pair in ranked.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    fn tagged_vocab(words: &[(&str, u16)], stream_words: &[&str]) -> (Vocabulary, TagMap) {
        let tokens = toks(stream_words);
        let vocab = Vocabulary::build(&tokens, VocabCutoff::MaxSize(words.len())).unwrap();
        let mut tags = TagMap::unassigned(vocab.len(), 0);
        let ids: Vec<WordId> = vocab.ids().collect();
        tags.admit(&ids);
        for (word, code) in words {
            tags.set_code(vocab.id(word).unwrap(), *code);
        }
        tags.set_frozen_depth(16);
        (vocab, tags)
    }

    #[test]
    fn pure_classes_score_one() {
        let (vocab, tags) = tagged_vocab(
            &[("a", 0x0000), ("b", 0x0001), ("x", 0x8000), ("y", 0x8001)],
            &["a", "b", "x", "y", "a", "b", "x", "a"],
        );
        let mut gold = GoldLexicon::new();
        gold.insert("a", "noun");
        gold.insert("b", "noun");
        gold.insert("x", "verb");
        gold.insert("y", "verb");
        let report = cluster_purity(&tags, &vocab, &gold, 1).unwrap();
        assert_relative_eq!(report.purity, 1.0);
        assert_eq!(report.uncovered_types, 0);
    }

    #[test]
    fn equal_mass_split_scores_half() {
        // one class, two labels with equal token mass
        let (vocab, tags) = tagged_vocab(&[("a", 0x0000), ("b", 0x0001)], &["a", "b", "a", "b"]);
        let mut gold = GoldLexicon::new();
        gold.insert("a", "noun");
        gold.insert("b", "verb");
        let report = cluster_purity(&tags, &vocab, &gold, 1).unwrap();
        assert_relative_eq!(report.purity, 0.5);
    }

    #[test]
    fn purity_is_monotone_in_level() {
        let (vocab, tags) = tagged_vocab(
            &[("a", 0x0000), ("b", 0x4000), ("x", 0x8000), ("y", 0xC000)],
            &["a", "b", "x", "y", "a", "b", "x", "a", "y", "y"],
        );
        let mut gold = GoldLexicon::new();
        gold.insert("a", "n");
        gold.insert("b", "v");
        gold.insert("x", "n");
        gold.insert("y", "v");
        let mut last = 0.0;
        for level in 1..=3 {
            let report = cluster_purity(&tags, &vocab, &gold, level).unwrap();
            assert!(report.purity >= last - 1e-12);
            last = report.purity;
        }
    }

    #[test]
    fn random_tags_approach_chance_purity() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let k = 4; // equal-mass labels
        let n_words = 400;
        let words: Vec<String> = (0..n_words).map(|i| format!("w{i:03}")).collect();
        // every word once: equal mass
        let vocab = Vocabulary::build(&words, VocabCutoff::MaxSize(n_words)).unwrap();
        let mut gold = GoldLexicon::new();
        for (i, w) in words.iter().enumerate() {
            gold.insert(w.clone(), format!("label{}", i % k));
        }
        // Monte-Carlo estimate over random level-1 assignments
        let mut purities = Vec::new();
        for _ in 0..60 {
            let mut tags = TagMap::unassigned(vocab.len(), 0);
            let ids: Vec<WordId> = vocab.ids().collect();
            tags.admit(&ids);
            for id in vocab.ids() {
                tags.set_code(id, rng.gen_range(0..2u16) << 15);
            }
            tags.set_frozen_depth(1);
            let report = cluster_purity(&tags, &vocab, &gold, 1).unwrap();
            purities.push(report.purity);
        }
        let mean: f64 = purities.iter().sum::<f64>() / purities.len() as f64;
        assert!(
            (mean - 1.0 / k as f64).abs() < 0.05,
            "mean purity {mean} not near {}",
            1.0 / k as f64
        );
    }

    #[test]
    fn low_coverage_is_rejected() {
        let (vocab, tags) = tagged_vocab(
            &[("a", 0x0000), ("b", 0x0001), ("x", 0x8000), ("y", 0x8001)],
            &["a", "b", "x", "y"],
        );
        let mut gold = GoldLexicon::new();
        gold.insert("a", "noun");
        let err = cluster_purity(&tags, &vocab, &gold, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientGold { covered: 1, total: 4 }));
    }

    #[test]
    fn gold_lexicon_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.tsv");
        fs::write(&path, "a\tnoun\nb\tverb\n").unwrap();
        let gold = GoldLexicon::read_tsv(&path).unwrap();
        assert_eq!(gold.label("a"), Some("noun"));
        assert_eq!(gold.len(), 2);
    }

    #[test]
    fn report_tables_render() {
        let reports = vec![
            PerplexityReport {
                model: "unigram".into(),
                tokens: 10,
                log_prob_sum: -33.2,
                perplexity: 1226.7,
                unk_tokens: 1,
                decile_perplexity: vec![],
            },
            PerplexityReport {
                model: "interp-trigram".into(),
                tokens: 10,
                log_prob_sum: -28.0,
                perplexity: 701.7,
                unk_tokens: 1,
                decile_perplexity: vec![],
            },
        ];
        let table = format_report_table(&reports);
        assert!(table.contains("1226.7"));
        assert!(table.contains("701.7"));
        let tsv = reports_to_tsv(&reports);
        assert!(tsv.starts_with("model\t"));
    }
}
