//! Trained model state, per-instance preprocessing and prediction.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{classify, ClassifierParams};
use super::config::TrainConfig;
use crate::corpus::Instance;
use crate::deppath::{build_merge_tree, instance_path, MergeNode, PathMergeTree};
use crate::embed::{EmbeddingKind, EmbeddingTable};
use crate::error::{Error, Result};
use crate::features::{encode_known, extract_features, FeatureDictionary, SparseVector};
use crate::net::{tree_forward, LstmParams, Topology, TreeForward};
use crate::rng;

pub const CHECKPOINT_VERSION: &str = "relex-model-v1";

/// Stream id for the LSTM initialization drawn from the config seed.
const LSTM_INIT_STREAM: u64 = 0x157;

/// Everything needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub dim: usize,
    pub lstm: LstmParams,
    pub classifier: Option<ClassifierParams>,
    pub words: EmbeddingTable,
    pub entities: EmbeddingTable,
    pub dictionary: FeatureDictionary,
    pub labels: Vec<String>,
    pub config: TrainConfig,
}

impl Checkpoint {
    /// Untrained model: random LSTM, no classifier yet.
    pub fn new(words: EmbeddingTable, entities: EmbeddingTable, config: TrainConfig) -> Result<Self> {
        if words.kind() != EmbeddingKind::Word || entities.kind() != EmbeddingKind::Entity {
            return Err(Error::invalid("word and entity tables are swapped"));
        }
        if words.dim() != entities.dim() {
            return Err(Error::Dimension {
                expected: words.dim(),
                actual: entities.dim(),
            });
        }
        let dim = words.dim();
        let lstm = LstmParams::random(dim, &mut rng::derive(config.seed, LSTM_INIT_STREAM));
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            dim,
            lstm,
            classifier: None,
            words,
            entities,
            dictionary: FeatureDictionary::from(Vec::new()),
            labels: Vec::new(),
            config,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Checkpoint(m));
        if self.version != CHECKPOINT_VERSION {
            return bad(format!("unsupported version {:?}", self.version));
        }
        if self.lstm.dim() != self.dim || self.words.dim() != self.dim || self.entities.dim() != self.dim {
            return bad(format!("component dimensions disagree with d = {}", self.dim));
        }
        if self.words.kind() != EmbeddingKind::Word || self.entities.kind() != EmbeddingKind::Entity {
            return bad("embedding table kinds are swapped".into());
        }
        if let Some(c) = &self.classifier {
            c.validate()?;
            if c.n_labels != self.labels.len() {
                return bad(format!("classifier has {} labels, vocabulary {}", c.n_labels, self.labels.len()));
            }
            if c.n_sparse != self.dictionary.len() {
                return bad(format!(
                    "classifier expects {} features, dictionary has {}",
                    c.n_sparse,
                    self.dictionary.len()
                ));
            }
            if c.dim != self.dim {
                return bad(format!("classifier dense width {} != d = {}", c.dim, self.dim));
            }
        }
        if !self.lstm.is_finite() {
            return bad("LSTM parameters are not finite".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Root representation of an instance's path tree under the current
    /// LSTM, with table lookups falling back to out-of-vocabulary vectors.
    pub fn represent(&self, inst: &Instance) -> Result<Vec<f64>> {
        let prep = PreparedTree::new(inst, 0)?;
        let fwd = self.forward(&prep)?;
        Ok(fwd.root_h().to_vec())
    }

    pub(crate) fn forward(&self, prep: &PreparedTree) -> Result<TreeForward> {
        let inputs: Vec<Vec<f64>> = prep
            .leaves
            .iter()
            .map(|leaf| match leaf {
                LeafKey::Entity(id) => self.entities.lookup(id).into_owned(),
                LeafKey::Word(w) => self.words.lookup(w).into_owned(),
            })
            .collect();
        tree_forward(&self.lstm, &prep.topo, &inputs)
    }

    /// Label probabilities and predicted label index.
    pub fn predict(&self, inst: &Instance) -> Result<(Vec<f64>, usize)> {
        let c = self
            .classifier
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("model has no classifier".into()))?;
        let sparse = encode_known(&extract_features(inst), &self.dictionary);
        let dense = if self.config.use_lstm {
            self.represent(inst)?
        } else {
            vec![0.0; self.dim]
        };
        classify(c, &sparse, &dense)
    }

    pub fn predict_label(&self, inst: &Instance) -> Result<&str> {
        let (_, l) = self.predict(inst)?;
        Ok(&self.labels[l])
    }

    /// Predicted label indices, computed in parallel over read-only state.
    pub fn predict_all(&self, instances: &[Instance]) -> Result<Vec<usize>> {
        instances
            .par_iter()
            .map(|inst| self.predict(inst).map(|(_, l)| l))
            .collect()
    }
}

/// Table row feeding one leaf of a path tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafKey {
    Entity(String),
    Word(String),
}

/// Path tree of an instance with the table keys its leaves read and the
/// context words of its internal phrases.
#[derive(Debug, Clone)]
pub struct PreparedTree {
    pub tree: PathMergeTree,
    pub topo: Topology,
    /// Indexed by path position.
    pub leaves: Vec<LeafKey>,
    /// `(node, context words)` for every internal node except the root.
    pub phrase_contexts: Vec<(usize, Vec<String>)>,
}

impl PreparedTree {
    /// Mention heads read entity vectors, other path tokens read word vectors.
    /// `window` sets how many tokens on each side of a phrase count as context.
    pub fn new(inst: &Instance, window: usize) -> Result<Self> {
        let path = instance_path(inst)?;
        let tree = build_merge_tree(&path);
        let topo = Topology::from(&tree);
        let last = path.len() - 1;
        let leaves = path
            .nodes
            .iter()
            .enumerate()
            .map(|(pos, &tok)| {
                if pos == 0 {
                    LeafKey::Entity(inst.m1.entity_id.clone())
                } else if pos == last {
                    LeafKey::Entity(inst.m2.entity_id.clone())
                } else {
                    LeafKey::Word(inst.tokens[tok].surface.clone())
                }
            })
            .collect();

        let root = tree.root();
        let n = inst.tokens.len();
        let mut phrase_contexts = Vec::new();
        if window > 0 {
            for (id, node) in tree.nodes.iter().enumerate() {
                if id == root || matches!(node, MergeNode::Leaf { .. }) {
                    continue;
                }
                let (a, b) = tree.token_span(id);
                let words: Vec<String> = (a.saturating_sub(window)..a)
                    .chain(b + 1..(b + 1 + window).min(n))
                    .map(|t| inst.tokens[t].surface.clone())
                    .collect();
                phrase_contexts.push((id, words));
            }
        }
        Ok(PreparedTree {
            tree,
            topo,
            leaves,
            phrase_contexts,
        })
    }
}

/// One-hot features and, when the LSTM is in use, the path tree.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub sparse: SparseVector,
    pub tree: Option<PreparedTree>,
}

/// Preprocesses instances in parallel against a frozen dictionary.
pub fn prepare_all(
    instances: &[Instance],
    dict: &FeatureDictionary,
    with_tree: bool,
    window: usize,
) -> Result<Vec<PreparedInstance>> {
    instances
        .par_iter()
        .map(|inst| {
            Ok(PreparedInstance {
                sparse: encode_known(&extract_features(inst), dict),
                tree: if with_tree {
                    Some(PreparedTree::new(inst, window)?)
                } else {
                    None
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mention, Token};

    fn sentence() -> Instance {
        // Bill founded Microsoft in Seattle
        let toks = vec![
            Token::new("Bill", "NNP", 1, "nsubj"),
            Token::new("founded", "VBD", -1, "root"),
            Token::new("Microsoft", "NNP", 1, "dobj"),
            Token::new("in", "IN", 1, "prep"),
            Token::new("Seattle", "NNP", 3, "pobj"),
        ];
        Instance::new(toks, Mention::new(0, 1, "E1"), Mention::new(4, 5, "E2"), "r").unwrap()
    }

    #[test]
    fn leaves_and_contexts() {
        let p = PreparedTree::new(&sentence(), 1).unwrap();
        assert_eq!(
            p.leaves,
            vec![
                LeafKey::Entity("E1".into()),
                LeafKey::Word("founded".into()),
                LeafKey::Word("in".into()),
                LeafKey::Entity("E2".into()),
            ]
        );
        assert_eq!(p.tree.internal_count(), 3);
        assert_eq!(p.phrase_contexts.len(), 2);
        for (node, ctx) in &p.phrase_contexts {
            let (a, b) = p.tree.token_span(*node);
            let expected = usize::from(a > 0) + usize::from(b + 1 < 5);
            assert_eq!(ctx.len(), expected);
        }
        assert!(PreparedTree::new(&sentence(), 0).unwrap().phrase_contexts.is_empty());
    }

    #[test]
    fn checkpoint_validation() {
        let mut words = EmbeddingTable::new(EmbeddingKind::Word, 3);
        words.ensure("Bill");
        let ents = EmbeddingTable::new(EmbeddingKind::Entity, 3);
        let ck = Checkpoint::new(words.clone(), ents.clone(), TrainConfig::default()).unwrap();
        ck.validate().unwrap();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);

        let mut bad = ck.clone();
        bad.version = "relex-model-v0".into();
        assert!(Checkpoint::from_json(&bad.to_json().unwrap()).is_err());
        let mut bad = ck.clone();
        bad.classifier = Some(ClassifierParams::zeros(2, 0, 3));
        assert!(bad.validate().is_err());
        assert!(Checkpoint::new(ents, words, TrainConfig::default()).is_err());
    }
}
