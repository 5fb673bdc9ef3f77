//! Hand-crafted feature families and their one-hot encoding.
//!
//! Feature strings are namespaced by family:
//!
//! | prefix  | family                                                       |
//! |---------|--------------------------------------------------------------|
//! | `CHUNK` | noun or verb strictly between the mentions (base-chunk proxy) |
//! | `COLL`  | collocation windows around each mention head word            |
//! | `CTX`   | context words around each mention span                       |
//! | `SYN`   | tokens and POS tags on the dependency path                   |
//! | `LEX`   | head words, mention tokens, unigrams and bigrams in between  |
//! | `DEP`   | head-parent pairs, path words and dependency labels          |

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_noun, Instance, Mention, Token};
use crate::deppath::instance_path;

pub const SENTENCE_START: &str = "<S>";
pub const SENTENCE_END: &str = "</S>";
pub const EMPTY_PATH: &str = "<EMPTY>";

/// Collocation windows `(from, to)` relative to a head word.
pub const COLLOCATIONS: [(i64, i64); 5] = [(-1, -1), (1, 1), (-2, -1), (-1, 1), (1, 2)];

/// Context words on each side of a mention span.
pub const CONTEXT_WINDOW: usize = 2;

fn offset_label(o: i64) -> String {
    if o > 0 {
        format!("+{o}")
    } else {
        o.to_string()
    }
}

fn token_at(tokens: &[Token], i: i64) -> &str {
    if i < 0 {
        SENTENCE_START
    } else if i as usize >= tokens.len() {
        SENTENCE_END
    } else {
        &tokens[i as usize].surface
    }
}

/// The `C_{from,to}` collocation around `head`, e.g. `COLL:-1,+1:husband_Richard_spoiled`.
pub fn collocation(tokens: &[Token], head: usize, from: i64, to: i64) -> String {
    let words: Vec<&str> = (from..=to).map(|o| token_at(tokens, head as i64 + o)).collect();
    format!(
        "COLL:{},{}:{}",
        offset_label(from),
        offset_label(to),
        words.join("_")
    )
}

/// Up to `window` words before and after a mention span, without padding.
pub fn context_words<'a>(tokens: &'a [Token], m: &Mention, window: usize) -> Vec<&'a str> {
    let before = m.start.saturating_sub(window)..m.start;
    let after = m.end..(m.end + window).min(tokens.len());
    before
        .chain(after)
        .map(|i| tokens[i].surface.as_str())
        .collect()
}

fn between(inst: &Instance) -> std::ops::Range<usize> {
    let (first, second) = if inst.m1.start <= inst.m2.start {
        (&inst.m1, &inst.m2)
    } else {
        (&inst.m2, &inst.m1)
    };
    first.end..second.start.max(first.end)
}

fn parent_surface(tokens: &[Token], i: usize) -> &str {
    tokens[i]
        .parent()
        .map_or("<ROOT>", |p| tokens[p].surface.as_str())
}

/// Extracts every feature string for an instance. Pure and deterministic.
pub fn extract_features(inst: &Instance) -> Vec<String> {
    let toks = &inst.tokens;
    let hw1 = inst.m1.head_word;
    let hw2 = inst.m2.head_word;
    let mut out = Vec::new();

    let span = between(inst);
    let chunk = toks[span.clone()]
        .iter()
        .any(|t| is_noun(&t.pos) || t.pos.starts_with("VB"));
    out.push(format!("CHUNK:{}", u8::from(chunk)));

    for hw in [hw1, hw2] {
        for (from, to) in COLLOCATIONS {
            out.push(collocation(toks, hw, from, to));
        }
    }

    for m in [&inst.m1, &inst.m2] {
        for w in context_words(toks, m, CONTEXT_WINDOW) {
            out.push(format!("CTX:{w}"));
        }
    }

    let path = instance_path(inst).ok().filter(|p| !p.degenerate);
    match &path {
        Some(p) => {
            let pos_path: Vec<&str> = p.nodes.iter().map(|&i| toks[i].pos.as_str()).collect();
            out.push(format!("SYN:POS_PATH:{}", pos_path.join("-")));
            // endpoints are the mention heads, covered by LEX
            for &i in &p.nodes[1..p.len() - 1] {
                out.push(format!("SYN:TOK_POS:{}/{}", toks[i].surface, toks[i].pos));
            }
        }
        None => out.push(format!("SYN:POS_PATH:{EMPTY_PATH}")),
    }

    let h1 = &toks[hw1].surface;
    let h2 = &toks[hw2].surface;
    out.push(format!("LEX:HW1:{h1}"));
    out.push(format!("LEX:HW2:{h2}"));
    out.push(format!("LEX:HW12:{h1}_{h2}"));
    for i in inst.m1.span() {
        out.push(format!("LEX:M1TOK:{}", toks[i].surface));
    }
    for i in inst.m2.span() {
        out.push(format!("LEX:M2TOK:{}", toks[i].surface));
    }
    for i in span.clone() {
        out.push(format!("LEX:UNI:{}", toks[i].surface));
    }
    for i in span.start..span.end.saturating_sub(1) {
        out.push(format!("LEX:BI:{}_{}", toks[i].surface, toks[i + 1].surface));
    }

    out.push(format!("DEP:HW1_PARENT:{h1}_{}", parent_surface(toks, hw1)));
    out.push(format!("DEP:HW2_PARENT:{h2}_{}", parent_surface(toks, hw2)));
    match &path {
        Some(p) => {
            for &i in &p.nodes[1..p.len() - 1] {
                out.push(format!("DEP:PATH_WORD:{}", toks[i].surface));
            }
            // labels on the edges below the top node, arm by arm
            let labels: Vec<&str> = p
                .nodes
                .iter()
                .filter(|&&i| i != p.lca)
                .map(|&i| toks[i].dep_label.as_str())
                .collect();
            for l in &labels {
                out.push(format!("DEP:PATH_LABEL:{l}"));
            }
            out.push(format!("DEP:LABEL_PATH:{}", labels.join("-")));
        }
        None => out.push(format!("DEP:LABEL_PATH:{EMPTY_PATH}")),
    }
    out
}

/// Feature string to contiguous id. Once frozen it never grows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureDictionary {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    frozen: bool,
}

impl From<Vec<String>> for FeatureDictionary {
    /// Rebuilds a frozen dictionary from names in id order.
    fn from(names: Vec<String>) -> Self {
        let ids = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        FeatureDictionary {
            names,
            ids,
            frozen: true,
        }
    }
}

impl From<FeatureDictionary> for Vec<String> {
    fn from(d: FeatureDictionary) -> Self {
        d.names
    }
}

impl FeatureDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn get(&self, feature: &str) -> Option<usize> {
        self.ids.get(feature).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    fn lookup_or_insert(&mut self, feature: &str) -> Option<usize> {
        if let Some(&id) = self.ids.get(feature) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.names.len();
        self.names.push(feature.to_string());
        self.ids.insert(feature.to_string(), id);
        Some(id)
    }
}

/// Binary vector stored as its sorted set of active indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<usize>,
    dim: usize,
}

impl SparseVector {
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        assert!(indices.last().is_none_or(|&i| i < dim), "index out of range");
        SparseVector { indices, dim }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Every active index carries the value 1.
    pub fn value(&self, i: usize) -> f64 {
        if self.indices.binary_search(&i).is_ok() {
            1.0
        } else {
            0.0
        }
    }
}

/// Maps feature strings to a one-hot vector, growing `dict` unless it is frozen.
pub fn encode<S: AsRef<str>>(features: &[S], dict: &mut FeatureDictionary) -> SparseVector {
    let ids = features
        .iter()
        .filter_map(|f| dict.lookup_or_insert(f.as_ref()))
        .collect();
    SparseVector::new(ids, dict.len())
}

/// Encodes against the dictionary as it stands, dropping unknown features.
pub fn encode_known<S: AsRef<str>>(features: &[S], dict: &FeatureDictionary) -> SparseVector {
    let ids = features.iter().filter_map(|f| dict.get(f.as_ref())).collect();
    SparseVector::new(ids, dict.len())
}

/// Builds a dictionary over a training set and freezes it.
pub fn build_dictionary<'a>(instances: impl IntoIterator<Item = &'a Instance>) -> FeatureDictionary {
    let mut dict = FeatureDictionary::new();
    for inst in instances {
        encode(&extract_features(inst), &mut dict);
    }
    dict.freeze();
    dict
}
