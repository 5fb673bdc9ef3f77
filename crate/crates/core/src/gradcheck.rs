//! Randomized finite-difference checks of every hand-derived gradient.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::Result;
use crate::features::SparseVector;
use crate::net::{chain_forward, gradient_check, tree_backward, tree_forward, LstmParams, TopoNode, Topology};
use crate::rng::{self, Rng};
use crate::train::{cross_entropy, entity_loss, word_loss, ClassifierParams};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const MAX_DIM: usize = 8;
pub const MAX_LEAVES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    ChainLstm,
    TreeLstm,
    EntityLoss,
    WordLoss,
    Softmax,
    /// Entity and word losses backpropagated through a tree LSTM.
    PretrainPipeline,
    /// Softmax over features and the root state of a tree LSTM.
    FinetunePipeline,
}

impl CaseKind {
    pub const ALL: [CaseKind; 7] = [
        CaseKind::ChainLstm,
        CaseKind::TreeLstm,
        CaseKind::EntityLoss,
        CaseKind::WordLoss,
        CaseKind::Softmax,
        CaseKind::PretrainPipeline,
        CaseKind::FinetunePipeline,
    ];
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseKind::ChainLstm => "chain-lstm",
            CaseKind::TreeLstm => "tree-lstm",
            CaseKind::EntityLoss => "entity-loss",
            CaseKind::WordLoss => "word-loss",
            CaseKind::Softmax => "softmax",
            CaseKind::PretrainPipeline => "pretrain-pipeline",
            CaseKind::FinetunePipeline => "finetune-pipeline",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub kind: CaseKind,
    pub dim: usize,
    pub n_params: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn max_error(&self) -> f64 {
        self.cases.iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < TOLERANCE
    }

    pub fn worst(&self, kind: CaseKind) -> Option<f64> {
        self.cases
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.error)
            .reduce(f64::max)
    }
}

fn vec_in(r: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..=scale)).collect()
}

/// Random binary tree over `leaves` inputs, built by merging random pairs.
pub fn random_topology(r: &mut Rng, leaves: usize) -> Topology {
    let mut nodes: Vec<TopoNode> = (0..leaves)
        .map(|i| TopoNode {
            children: vec![],
            input: Some(i),
        })
        .collect();
    let mut pool: Vec<usize> = (0..leaves).collect();
    while pool.len() > 1 {
        pool.shuffle(r);
        let a = pool.pop().expect("two nodes");
        let b = pool.pop().expect("two nodes");
        nodes.push(TopoNode {
            children: vec![a, b],
            input: None,
        });
        pool.push(nodes.len() - 1);
    }
    Topology::new(nodes).expect("children precede parents")
}

/// Splits a flat vector into the LSTM parameters and `n` input vectors.
fn unpack(x: &[f64], d: usize, n_params: usize, n: usize) -> (LstmParams, Vec<Vec<f64>>) {
    let mut p = LstmParams::zeros(d);
    p.as_mut_slice().copy_from_slice(&x[..n_params]);
    let inputs = (0..n)
        .map(|i| x[n_params + i * d..n_params + (i + 1) * d].to_vec())
        .collect();
    (p, inputs)
}

fn flat_lstm_point(r: &mut Rng, d: usize, n_inputs: usize) -> (Vec<f64>, usize) {
    let p = LstmParams::random(d, r);
    let n_params = p.len();
    let mut x = p.as_slice().to_vec();
    x.extend(vec_in(r, n_inputs * d, 1.0));
    (x, n_params)
}

fn check_lstm(r: &mut Rng, d: usize, topo: &Topology, chain: bool, seed: u64) -> Result<(usize, f64)> {
    let n_in = topo.input_count();
    let (x, n_params) = flat_lstm_point(r, d, n_in);
    // L = Σ_j r_j · h_j over a random subset of nodes (the root always).
    let mut probes: Vec<(usize, Vec<f64>)> = Vec::new();
    for j in 0..topo.len() {
        if j == topo.root() || r.gen_bool(0.5) {
            probes.push((j, vec_in(r, d, 1.0)));
        }
    }
    let loss = |x: &[f64]| -> f64 {
        let (p, inputs) = unpack(x, d, n_params, n_in);
        let states = if chain {
            chain_forward(&p, &inputs).expect("valid chain")
        } else {
            tree_forward(&p, topo, &inputs).expect("valid tree").states
        };
        probes
            .iter()
            .map(|(j, v)| v.iter().zip(&states[*j].h).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let (p, inputs) = unpack(&x, d, n_params, n_in);
    let fwd = tree_forward(&p, topo, &inputs)?;
    let g = tree_backward(&p, topo, &fwd, &probes)?;
    let mut analytic = g.params.as_slice().to_vec();
    analytic.extend(g.inputs.concat());
    Ok((x.len(), gradient_check(&x, &analytic, STEP, seed, loss)?))
}

fn check_entity(r: &mut Rng, d: usize, seed: u64) -> Result<(usize, f64)> {
    let k = r.gen_range(1..=3);
    let n = 3 + 2 * k;
    let x = vec_in(r, n * d, 1.0);
    let split = |x: &[f64]| -> Vec<Vec<f64>> { x.chunks(d).map(<[f64]>::to_vec).collect() };
    let eval = |x: &[f64]| {
        let v = split(x);
        let ni: Vec<&[f64]> = v[3..3 + k].iter().map(Vec::as_slice).collect();
        let nj: Vec<&[f64]> = v[3 + k..].iter().map(Vec::as_slice).collect();
        entity_loss(&v[0], &v[1], &v[2], &ni, &nj)
    };
    let out = eval(&x);
    let mut analytic = [out.d_ei.clone(), out.d_ej.clone(), out.d_f.clone()].concat();
    analytic.extend(out.d_neg_i.concat());
    analytic.extend(out.d_neg_j.concat());
    Ok((x.len(), gradient_check(&x, &analytic, STEP, seed, |x| eval(x).value)?))
}

fn check_word(r: &mut Rng, d: usize, seed: u64) -> Result<(usize, f64)> {
    let n_ctx = r.gen_range(1..=3);
    let k = r.gen_range(0..=3);
    let n = 1 + n_ctx * (1 + k);
    let x = vec_in(r, n * d, 1.0);
    let eval = |x: &[f64]| {
        let v: Vec<&[f64]> = x.chunks(d).collect();
        let ctx: Vec<&[f64]> = v[1..1 + n_ctx].to_vec();
        let negs: Vec<Vec<&[f64]>> = (0..n_ctx)
            .map(|c| v[1 + n_ctx + c * k..1 + n_ctx + (c + 1) * k].to_vec())
            .collect();
        word_loss(v[0], &ctx, &negs)
    };
    let out = eval(&x);
    let mut analytic = out.d_h.clone();
    analytic.extend(out.d_contexts.concat());
    for per_ctx in &out.d_negatives {
        analytic.extend(per_ctx.concat());
    }
    Ok((x.len(), gradient_check(&x, &analytic, STEP, seed, |x| eval(x).value)?))
}

fn random_classifier(r: &mut Rng, d: usize) -> (ClassifierParams, SparseVector, usize) {
    let n_labels = r.gen_range(2..=5);
    let n_sparse = r.gen_range(3..=10);
    let mut c = ClassifierParams::zeros(n_labels, n_sparse, d);
    c.weights = vec_in(r, c.weights.len(), 1.0);
    c.bias = vec_in(r, n_labels, 1.0);
    let active: Vec<usize> = (0..n_sparse).filter(|_| r.gen_bool(0.5)).collect();
    let gold = r.gen_range(0..n_labels);
    (c, SparseVector::new(active, n_sparse), gold)
}

/// Gradients of cross-entropy w.r.t. `[weights, bias]`.
fn classifier_grads(c: &ClassifierParams, sparse: &SparseVector, dense: &[f64], d_logits: &[f64]) -> Vec<f64> {
    let w = c.width();
    let mut g = vec![0.0; c.weights.len() + c.bias.len()];
    for (l, &dl) in d_logits.iter().enumerate() {
        for &i in sparse.indices() {
            g[l * w + i] = dl;
        }
        for (k, x) in dense.iter().enumerate() {
            g[l * w + c.n_sparse + k] = dl * x;
        }
        g[c.weights.len() + l] = dl;
    }
    g
}

fn with_classifier(c: &ClassifierParams, x: &[f64]) -> ClassifierParams {
    let mut c = c.clone();
    let nw = c.weights.len();
    c.weights.copy_from_slice(&x[..nw]);
    c.bias.copy_from_slice(&x[nw..nw + c.n_labels]);
    c
}

fn check_softmax(r: &mut Rng, d: usize, seed: u64) -> Result<(usize, f64)> {
    let (c, sparse, gold) = random_classifier(r, d);
    let mut x = [c.weights.clone(), c.bias.clone()].concat();
    let n_cls = x.len();
    x.extend(vec_in(r, d, 1.0));
    let eval = |x: &[f64]| cross_entropy(&with_classifier(&c, x), &sparse, &x[n_cls..], gold).expect("shapes");
    let out = eval(&x);
    let mut analytic = classifier_grads(&c, &sparse, &x[n_cls..], &out.d_logits);
    analytic.extend(&out.d_dense);
    Ok((x.len(), gradient_check(&x, &analytic, STEP, seed, |x| eval(x).value)?))
}

fn check_finetune_pipeline(r: &mut Rng, d: usize, seed: u64) -> Result<(usize, f64)> {
    let leaves = r.gen_range(1..=MAX_LEAVES);
    let topo = random_topology(r, leaves);
    let (c, sparse, gold) = random_classifier(r, d);
    let (mut x, n_params) = flat_lstm_point(r, d, leaves);
    let n_lstm = x.len();
    x.extend(&c.weights);
    x.extend(&c.bias);
    let eval = |x: &[f64]| {
        let (p, inputs) = unpack(&x[..n_lstm], d, n_params, leaves);
        let fwd = tree_forward(&p, &topo, &inputs).expect("valid tree");
        let ce = cross_entropy(&with_classifier(&c, &x[n_lstm..]), &sparse, fwd.root_h(), gold).expect("shapes");
        (p, fwd, ce)
    };
    let (p, fwd, ce) = eval(&x);
    let g = tree_backward(&p, &topo, &fwd, &[(topo.root(), ce.d_dense.clone())])?;
    let mut analytic = g.params.as_slice().to_vec();
    analytic.extend(g.inputs.concat());
    analytic.extend(classifier_grads(&c, &sparse, fwd.root_h(), &ce.d_logits));
    Ok((x.len(), gradient_check(&x, &analytic, STEP, seed, |x| eval(x).2.value)?))
}

fn check_pretrain_pipeline(r: &mut Rng, d: usize, seed: u64) -> Result<(usize, f64)> {
    let leaves = r.gen_range(2..=MAX_LEAVES);
    let topo = random_topology(r, leaves);
    let k = r.gen_range(1..=2);
    // Leaves, then entity vectors e_i, e_j and 2k negatives, then per internal
    // non-root node one context word with k negatives.
    let internal: Vec<usize> = (leaves..topo.len()).filter(|&j| j != topo.root()).collect();
    let n_vec = leaves + 2 + 2 * k + internal.len() * (1 + k);
    let (x, n_params) = flat_lstm_point(r, d, n_vec);
    let eval = |x: &[f64]| {
        let (p, vecs) = unpack(x, d, n_params, n_vec);
        let fwd = tree_forward(&p, &topo, &vecs[..leaves]).expect("valid tree");
        let e = &vecs[leaves..];
        let ni: Vec<&[f64]> = e[2..2 + k].iter().map(Vec::as_slice).collect();
        let nj: Vec<&[f64]> = e[2 + k..2 + 2 * k].iter().map(Vec::as_slice).collect();
        let eo = entity_loss(&e[0], &e[1], fwd.root_h(), &ni, &nj);
        let w = &e[2 + 2 * k..];
        let words: Vec<_> = internal
            .iter()
            .enumerate()
            .map(|(t, &node)| {
                let block = &w[t * (1 + k)..(t + 1) * (1 + k)];
                let negs: Vec<&[f64]> = block[1..].iter().map(Vec::as_slice).collect();
                word_loss(&fwd.states[node].h, &[&block[0]], &[negs])
            })
            .collect();
        (p, vecs, fwd, eo, words)
    };
    let objective = |x: &[f64]| {
        let (_, _, _, eo, words) = eval(x);
        eo.value + words.iter().map(|w| w.value).sum::<f64>()
    };
    let (p, _, fwd, eo, words) = eval(&x);
    let mut upstream = vec![(topo.root(), eo.d_f.clone())];
    for (&node, wl) in internal.iter().zip(&words) {
        upstream.push((node, wl.d_h.clone()));
    }
    let g = tree_backward(&p, &topo, &fwd, &upstream)?;
    let mut analytic = g.params.as_slice().to_vec();
    analytic.extend(g.inputs.concat());
    analytic.extend([eo.d_ei.clone(), eo.d_ej.clone()].concat());
    analytic.extend(eo.d_neg_i.concat());
    analytic.extend(eo.d_neg_j.concat());
    for wl in &words {
        analytic.extend(&wl.d_contexts[0]);
        analytic.extend(wl.d_negatives[0].concat());
    }
    Ok((x.len(), gradient_check(&x, &analytic, STEP, seed, objective)?))
}

/// Runs `per_kind` random configurations of every case kind.
pub fn run_suite(per_kind: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for (ki, kind) in CaseKind::ALL.into_iter().enumerate() {
        for i in 0..per_kind {
            let case_seed = ((ki as u64) << 32) | i as u64;
            let mut r = rng::derive(seed, case_seed);
            let d = r.gen_range(1..=MAX_DIM);
            let (n_params, error) = match kind {
                CaseKind::ChainLstm => {
                    let len = r.gen_range(1..=MAX_LEAVES);
                    check_lstm(&mut r, d, &Topology::chain(len)?, true, case_seed)?
                }
                CaseKind::TreeLstm => {
                    let leaves = r.gen_range(1..=MAX_LEAVES);
                    let topo = random_topology(&mut r, leaves);
                    check_lstm(&mut r, d, &topo, false, case_seed)?
                }
                CaseKind::EntityLoss => check_entity(&mut r, d, case_seed)?,
                CaseKind::WordLoss => check_word(&mut r, d, case_seed)?,
                CaseKind::Softmax => check_softmax(&mut r, d, case_seed)?,
                CaseKind::PretrainPipeline => check_pretrain_pipeline(&mut r, d, case_seed)?,
                CaseKind::FinetunePipeline => check_finetune_pipeline(&mut r, d, case_seed)?,
            };
            report.cases.push(CaseResult {
                kind,
                dim: d,
                n_params,
                error,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_topologies_are_binary() {
        let mut r = rng::seeded(3);
        for leaves in 1..=MAX_LEAVES {
            let t = random_topology(&mut r, leaves);
            assert_eq!(t.len(), 2 * leaves - 1);
            assert_eq!(t.input_count(), leaves);
        }
    }

    #[test]
    fn small_suite_passes() {
        let rep = run_suite(3, 1).unwrap();
        assert_eq!(rep.cases.len(), 3 * CaseKind::ALL.len());
        for kind in CaseKind::ALL {
            assert!(rep.worst(kind).unwrap() < TOLERANCE, "{kind}: {:?}", rep.worst(kind));
        }
    }
}
