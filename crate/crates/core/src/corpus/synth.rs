//! Templated synthetic corpora with known relation structure.
//!
//! Every sentence has the shape
//! `[adv] [First] Last VERB [adv] PREP [First] Last [in YEAR] .`
//! with the verb as the dependency root, the first mention as its subject and
//! the second mention as the object of the preposition. Each relation owns a
//! few verb/preposition connectives and a pool of subject and object entities,
//! so both the connective and the entity pair carry the label. With
//! probability `ambiguity` the connective is drawn from a pool shared by all
//! relations, leaving only the entities as evidence.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use super::{Dataset, Instance, Mention, Token};
use crate::rng::{self, Rng};

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tas", "vo", "bri", "dun", "el", "fa", "gor", "hal", "is", "jen",
    "kor", "lum", "nax", "ob", "pel", "quin", "ros", "sil", "tor", "ul", "vek", "wen", "yar", "zo",
];
const PREPOSITIONS: &[&str] = &["of", "in", "at", "for", "with", "from", "by", "on", "to"];
const SHARED_VERBS: &[&str] = &["met", "joined", "visited", "saw", "mentioned"];
const SHARED_PREPS: &[&str] = &["with", "near", "beside"];
const ADVERBS: &[&str] = &["reportedly", "recently", "quietly", "once", "later", "again"];
const YEARS: &[&str] = &["spring", "winter", "summer", "autumn", "May", "June"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub n_relations: usize,
    pub seed: u64,
    /// Relative label frequencies; uniform when `None`.
    pub label_weights: Option<Vec<f64>>,
    /// Subject and object entities per relation.
    pub pool_size: usize,
    /// Connective paraphrases per relation.
    pub connectives: usize,
    /// Probability that a sentence uses a shared, label-neutral connective.
    pub ambiguity: f64,
}

impl SynthConfig {
    pub fn new(n: usize, n_relations: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            n_relations,
            seed,
            label_weights: None,
            pool_size: 12,
            connectives: 3,
            ambiguity: 0.3,
        }
    }

    /// Geometric label frequencies: relation `r` has weight `ratio^r`.
    pub fn skewed(mut self, ratio: f64) -> Self {
        self.label_weights = Some((0..self.n_relations).map(|r| ratio.powi(r as i32)).collect());
        self
    }

    pub fn generate(&self) -> Dataset {
        assert!(self.n_relations >= 2, "synthetic corpus needs at least two relations");
        let lexicon = Lexicon::build(self);
        let weights = self
            .label_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.n_relations]);
        let label_dist = WeightedIndex::new(&weights).expect("label weights must be positive");
        let mut rng = rng::seeded(self.seed);
        let instances = (0..self.n)
            .map(|_| {
                let r = label_dist.sample(&mut rng);
                lexicon.sentence(r, self.ambiguity, &mut rng)
            })
            .collect();
        Dataset::from_instances(instances)
    }
}

/// `n` templated instances over `n_relations` uniformly frequent relations.
pub fn synth_corpus(n: usize, n_relations: usize, seed: u64) -> Dataset {
    SynthConfig::new(n, n_relations, seed).generate()
}

struct Entity {
    id: String,
    first: String,
    last: String,
}

struct Relation {
    label: String,
    connectives: Vec<(String, String)>,
    subjects: Vec<Entity>,
    objects: Vec<Entity>,
}

struct Lexicon {
    relations: Vec<Relation>,
}

impl Lexicon {
    // The lexicon depends only on the shape parameters, not on the seed, so
    // corpora drawn with different seeds share words and entities.
    fn build(cfg: &SynthConfig) -> Self {
        let mut rng = rng::derive(0x5eed, cfg.n_relations as u64);
        let mut used: HashSet<String> = HashSet::new();
        let mut fresh = |rng: &mut Rng, capital: bool| loop {
            let n_syl = rng.gen_range(2..=3);
            let mut w: String = (0..n_syl)
                .map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())])
                .collect();
            if capital {
                w[..1].make_ascii_uppercase();
            }
            if used.insert(w.clone()) {
                return w;
            }
        };
        let mut next_id = 0usize;
        let mut entity = |rng: &mut Rng, fresh: &mut dyn FnMut(&mut Rng, bool) -> String| {
            next_id += 1;
            Entity {
                id: format!("Q{:04}", next_id),
                first: fresh(rng, true),
                last: fresh(rng, true),
            }
        };
        let relations = (0..cfg.n_relations)
            .map(|r| {
                let connectives = (0..cfg.connectives)
                    .map(|_| {
                        let verb = fresh(&mut rng, false) + "ed";
                        let prep = PREPOSITIONS[rng.gen_range(0..PREPOSITIONS.len())].to_string();
                        (verb, prep)
                    })
                    .collect();
                let subjects = (0..cfg.pool_size).map(|_| entity(&mut rng, &mut fresh)).collect();
                let objects = (0..cfg.pool_size).map(|_| entity(&mut rng, &mut fresh)).collect();
                Relation {
                    label: format!("rel:{}", r),
                    connectives,
                    subjects,
                    objects,
                }
            })
            .collect();
        Lexicon { relations }
    }

    fn sentence(&self, r: usize, ambiguity: f64, rng: &mut Rng) -> Instance {
        let rel = &self.relations[r];
        let subj = &rel.subjects[rng.gen_range(0..rel.subjects.len())];
        let obj = &rel.objects[rng.gen_range(0..rel.objects.len())];
        let (verb, prep) = if rng.gen_bool(ambiguity) {
            (
                SHARED_VERBS[rng.gen_range(0..SHARED_VERBS.len())].to_string(),
                SHARED_PREPS[rng.gen_range(0..SHARED_PREPS.len())].to_string(),
            )
        } else {
            rel.connectives[rng.gen_range(0..rel.connectives.len())].clone()
        };

        // Heads are patched once the verb position is known.
        const VERB: i64 = i64::MIN;
        let mut toks: Vec<Token> = Vec::new();
        if rng.gen_bool(0.3) {
            toks.push(Token::new(ADVERBS[rng.gen_range(0..ADVERBS.len())], "RB", VERB, "advmod"));
        }
        let m1_start = toks.len();
        if rng.gen_bool(0.5) {
            toks.push(Token::new(&subj.first, "NNP", toks.len() as i64 + 1, "nn"));
        }
        toks.push(Token::new(&subj.last, "NNP", VERB, "nsubj"));
        let m1_end = toks.len();
        let verb_pos = toks.len() as i64;
        toks.push(Token::new(&verb, "VBD", -1, "root"));
        if rng.gen_bool(0.2) {
            toks.push(Token::new(ADVERBS[rng.gen_range(0..ADVERBS.len())], "RB", VERB, "advmod"));
        }
        let prep_pos = toks.len() as i64;
        toks.push(Token::new(&prep, "IN", VERB, "prep"));
        let m2_start = toks.len();
        if rng.gen_bool(0.5) {
            toks.push(Token::new(&obj.first, "NNP", toks.len() as i64 + 1, "nn"));
        }
        toks.push(Token::new(&obj.last, "NNP", prep_pos, "pobj"));
        let m2_end = toks.len();
        if rng.gen_bool(0.4) {
            let in_pos = toks.len() as i64;
            toks.push(Token::new("in", "IN", VERB, "prep"));
            toks.push(Token::new(YEARS[rng.gen_range(0..YEARS.len())], "NN", in_pos, "pobj"));
        }
        toks.push(Token::new(".", ".", VERB, "punct"));
        for t in &mut toks {
            if t.head == VERB {
                t.head = verb_pos;
            }
        }

        Instance::new(
            toks,
            Mention::new(m1_start, m1_end, &subj.id),
            Mention::new(m2_start, m2_end, &obj.id),
            &rel.label,
        )
        .expect("synthetic instances are well-formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generates_requested_shape() {
        let ds = synth_corpus(100, 4, 7);
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.label_vocab.len(), 4);
        assert_eq!(ds, synth_corpus(100, 4, 7));
        assert_ne!(ds, synth_corpus(100, 4, 8));
    }

    #[test]
    fn zero_instances() {
        let ds = synth_corpus(0, 4, 7);
        assert!(ds.is_empty());
        assert!(ds.label_vocab.is_empty());
    }

    #[test]
    fn head_words_are_last_names() {
        let ds = synth_corpus(50, 3, 1);
        for inst in &ds.instances {
            assert_eq!(inst.m1.head_word, inst.m1.end - 1);
            assert_eq!(inst.m2.head_word, inst.m2.end - 1);
            assert_eq!(inst.tokens[inst.m1.head_word].dep_label, "nsubj");
        }
    }

    #[test]
    fn skew_orders_label_frequencies() {
        let ds = SynthConfig::new(3000, 4, 2).skewed(0.4).generate();
        let counts: Vec<usize> = ds.label_counts().into_iter().map(|(_, c)| c).collect();
        assert!(counts.windows(2).all(|w| w[0] > w[1]), "{counts:?}");
    }
}
