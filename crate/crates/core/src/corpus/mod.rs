//! Instances, the JSONL corpus format, splits and training-size schedules.

mod split;
mod synth;

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{doubling_schedule, split, Fractions};
pub use synth::{synth_corpus, SynthConfig};

/// Penn tags treated as prepositions by the head-word rule.
pub const PREPOSITION_TAGS: &[&str] = &["IN", "TO"];
/// Penn tags treated as nouns by the head-word rule.
pub const NOUN_TAGS: &[&str] = &["NN", "NNS", "NNP", "NNPS"];

pub fn is_noun(pos: &str) -> bool {
    NOUN_TAGS.contains(&pos)
}

pub fn is_preposition(pos: &str) -> bool {
    PREPOSITION_TAGS.contains(&pos)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: String,
    /// Index of the dependency parent, `-1` for the syntactic root.
    pub head: i64,
    #[serde(rename = "dep")]
    pub dep_label: String,
}

impl Token {
    pub fn new(surface: &str, pos: &str, head: i64, dep_label: &str) -> Self {
        Token {
            surface: surface.to_string(),
            pos: pos.to_string(),
            head,
            dep_label: dep_label.to_string(),
        }
    }

    pub fn parent(&self) -> Option<usize> {
        usize::try_from(self.head).ok()
    }

    pub fn is_root(&self) -> bool {
        self.head == -1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "entity")]
    pub entity_id: String,
    /// Cached head-word token index; filled in by [`Instance::new`].
    #[serde(skip)]
    pub head_word: usize,
}

impl Mention {
    pub fn new(start: usize, end: usize, entity_id: &str) -> Self {
        Mention {
            start,
            end,
            entity_id: entity_id.to_string(),
            head_word: start,
        }
    }

    pub fn span(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Picks the syntactic head of a mention span.
///
/// A noun directly governing a preposition wins ("Chancellor" in
/// "Chancellor of the Exchequer"); otherwise the last noun; otherwise the last
/// token of the span.
pub fn head_word(m: &Mention, tokens: &[Token]) -> usize {
    let span = &tokens[m.span()];
    for (offset, tok) in span.iter().enumerate() {
        if is_preposition(&tok.pos) {
            if let Some(noun) = span[..offset].iter().rposition(|t| is_noun(&t.pos)) {
                return m.start + noun;
            }
        }
    }
    match span.iter().rposition(|t| is_noun(&t.pos)) {
        Some(noun) => m.start + noun,
        None => m.end - 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub tokens: Vec<Token>,
    pub m1: Mention,
    pub m2: Mention,
    pub relation: String,
}

impl Instance {
    /// Validates the instance and caches the mention head words.
    pub fn new(tokens: Vec<Token>, m1: Mention, m2: Mention, relation: &str) -> Result<Self> {
        let mut inst = Instance {
            tokens,
            m1,
            m2,
            relation: relation.to_string(),
        };
        inst.validate().map_err(|message| Error::Validation { line: 0, message })?;
        inst.cache_head_words();
        Ok(inst)
    }

    fn cache_head_words(&mut self) {
        self.m1.head_word = head_word(&self.m1, &self.tokens);
        self.m2.head_word = head_word(&self.m2, &self.tokens);
    }

    /// Checks spans and the dependency tree. Returns a message on failure.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("sentence has no tokens".into());
        }
        for (name, m) in [("m1", &self.m1), ("m2", &self.m2)] {
            if m.start >= m.end || m.end > n {
                return Err(format!(
                    "{name} span [{}, {}) out of range for {n} tokens",
                    m.start, m.end
                ));
            }
        }
        let mut roots = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.head < -1 || tok.head >= n as i64 {
                return Err(format!("token {i} has head {} outside [-1, {n})", tok.head));
            }
            if tok.head == i as i64 {
                return Err(format!("token {i} is its own head"));
            }
            if tok.is_root() {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = self.tokens[cur].parent() {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(format!("dependency cycle through token {start}"));
                }
            }
        }
        Ok(())
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    /// Sorted relation labels.
    pub label_vocab: Vec<String>,
    /// Sorted entity ids.
    pub entity_vocab: Vec<String>,
}

impl Dataset {
    pub fn from_instances(instances: Vec<Instance>) -> Self {
        let labels: BTreeSet<&str> = instances.iter().map(|i| i.relation.as_str()).collect();
        let entities: BTreeSet<&str> = instances
            .iter()
            .flat_map(|i| [i.m1.entity_id.as_str(), i.m2.entity_id.as_str()])
            .collect();
        let label_vocab = labels.into_iter().map(String::from).collect();
        let entity_vocab = entities.into_iter().map(String::from).collect();
        Dataset {
            instances,
            label_vocab,
            entity_vocab,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_vocab.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// A dataset holding the first `n` instances (all of them if `n` is larger).
    pub fn head(&self, n: usize) -> Dataset {
        Dataset::from_instances(self.instances.iter().take(n).cloned().collect())
    }

    pub fn label_counts(&self) -> Vec<(String, usize)> {
        self.label_vocab
            .iter()
            .map(|l| {
                let c = self.instances.iter().filter(|i| &i.relation == l).count();
                (l.clone(), c)
            })
            .collect()
    }
}

/// Parses one JSONL document. Line numbers in errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<Dataset> {
    let mut instances = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut inst: Instance = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        inst.validate().map_err(|message| Error::Validation {
            line: line_no,
            message,
        })?;
        inst.cache_head_words();
        instances.push(inst);
    }
    Ok(Dataset::from_instances(instances))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn write_corpus(ds: &Dataset, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    for inst in &ds.instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n").map_err(|e| Error::io("<corpus writer>", e))?;
    }
    w.flush().map_err(|e| Error::io("<corpus writer>", e))?;
    Ok(())
}

pub fn save_corpus(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(ds, file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str, pos: &str, head: i64) -> Token {
        Token::new(s, pos, head, "dep")
    }

    fn mention_over(tokens: &[Token], start: usize, end: usize) -> usize {
        head_word(&Mention::new(start, end, "e"), tokens)
    }

    #[test]
    fn head_word_prefers_noun_before_preposition() {
        let toks = vec![
            tok("Chancellor", "NN", -1),
            tok("of", "IN", 0),
            tok("the", "DT", 3),
            tok("Exchequer", "NNP", 1),
        ];
        assert_eq!(mention_over(&toks, 0, 4), 0);
    }

    #[test]
    fn head_word_takes_last_noun() {
        let toks = vec![tok("Bill", "NNP", 1), tok("Gates", "NNP", -1)];
        assert_eq!(mention_over(&toks, 0, 2), 1);
    }

    #[test]
    fn head_word_falls_back_to_last_token() {
        let toks = vec![tok("quickly", "RB", 1), tok("ran", "VBD", -1)];
        assert_eq!(mention_over(&toks, 0, 2), 1);
    }

    #[test]
    fn head_word_picks_noun_nearest_the_preposition() {
        // "Bank Board of Governors": two nouns precede "of".
        let toks = vec![
            tok("Bank", "NNP", 1),
            tok("Board", "NNP", -1),
            tok("of", "IN", 1),
            tok("Governors", "NNPS", 2),
        ];
        assert_eq!(mention_over(&toks, 0, 4), 1);
    }

    #[test]
    fn head_word_ignores_leading_preposition() {
        let toks = vec![
            tok("to", "TO", 1),
            tok("Paris", "NNP", -1),
            tok("city", "NN", 1),
        ];
        assert_eq!(mention_over(&toks, 0, 3), 2);
    }

    const ONE_LINE: &str = r#"{"tokens":[{"surface":"Bill","pos":"NNP","head":1,"dep":"nn"},{"surface":"Gates","pos":"NNP","head":2,"dep":"nsubj"},{"surface":"founded","pos":"VBD","head":-1,"dep":"root"},{"surface":"Microsoft","pos":"NNP","head":2,"dep":"dobj"}],"m1":{"start":0,"end":2,"entity":"E1"},"m2":{"start":3,"end":4,"entity":"E2"},"relation":"founder"}"#;

    #[test]
    fn parses_single_line() {
        let ds = parse_corpus(ONE_LINE).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label_vocab, vec!["founder"]);
        assert_eq!(ds.entity_vocab, vec!["E1", "E2"]);
        assert_eq!(ds.instances[0].m1.head_word, 1);
        assert_eq!(ds.instances[0].m2.head_word, 3);
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let ds = parse_corpus("").unwrap();
        assert!(ds.is_empty());
        assert!(ds.label_vocab.is_empty());
        assert!(ds.entity_vocab.is_empty());
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = format!("{ONE_LINE}\n{{not json\n");
        match parse_corpus(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn head_cycle_is_rejected_at_its_line() {
        let bad = r#"{"tokens":[{"surface":"a","pos":"NN","head":1,"dep":"x"},{"surface":"b","pos":"NN","head":0,"dep":"x"},{"surface":"c","pos":"VB","head":-1,"dep":"root"}],"m1":{"start":0,"end":1,"entity":"A"},"m2":{"start":1,"end":2,"entity":"B"},"relation":"r"}"#;
        let text = format!("{ONE_LINE}\n\n{bad}\n");
        match parse_corpus(&text) {
            Err(Error::Validation { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("cycle"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_span_is_rejected() {
        let toks = vec![tok("a", "NN", -1)];
        let err = Instance::new(toks, Mention::new(0, 1, "A"), Mention::new(0, 2, "B"), "r");
        assert!(matches!(err, Err(Error::Validation { .. })));
    }

    #[test]
    fn two_roots_rejected() {
        let toks = vec![tok("a", "NN", -1), tok("b", "NN", -1)];
        let err = Instance::new(toks, Mention::new(0, 1, "A"), Mention::new(1, 2, "B"), "r");
        assert!(err.is_err());
    }

    #[test]
    fn corpus_round_trip_through_file() {
        let ds = parse_corpus(ONE_LINE).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_corpus(&ds, &path).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), ds);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus("/definitely/not/here.jsonl"),
            Err(Error::Io { .. })
        ));
    }
}
