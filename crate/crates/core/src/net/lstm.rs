//! Chain and child-sum tree LSTM cells.
//!
//! A tree node `j` with input `x` and children `l` computes
//!
//! ```text
//! h̃   = Σ_l h_l
//! i    = σ(W_i x + U_i h̃ + b_i)
//! o    = σ(W_o x + U_o h̃ + b_o)
//! u    = tanh(W_u x + U_u h̃ + b_u)
//! f_l  = σ(W_f x + U_f h_l + b_f)          one forget gate per child
//! c    = i ⊙ u + Σ_l f_l ⊙ c_l
//! h    = o ⊙ tanh(c)
//! ```
//!
//! With a single child this is exactly the chain LSTM step.

use super::math::{axpy, matvec_add, matvec_t_add, outer_add, sigmoid};
use super::params::{Gate, LstmParams};
use crate::deppath::{MergeNode, PathMergeTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoNode {
    pub children: Vec<usize>,
    /// Index into the input list; `None` feeds a zero vector.
    pub input: Option<usize>,
}

/// Nodes in evaluation order: every child precedes its parent and the root is last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    nodes: Vec<TopoNode>,
}

impl Topology {
    pub fn new(nodes: Vec<TopoNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("topology needs at least one node"));
        }
        let mut has_parent = vec![false; nodes.len()];
        for (j, n) in nodes.iter().enumerate() {
            for &c in &n.children {
                if c >= j {
                    return Err(Error::invalid(format!("node {j} has child {c} after it")));
                }
                if std::mem::replace(&mut has_parent[c], true) {
                    return Err(Error::invalid(format!("node {c} has two parents")));
                }
            }
        }
        Ok(Topology { nodes })
    }

    /// Node `t` has input `t` and child `t - 1`.
    pub fn chain(len: usize) -> Result<Self> {
        Topology::new(
            (0..len)
                .map(|t| TopoNode {
                    children: if t == 0 { vec![] } else { vec![t - 1] },
                    input: Some(t),
                })
                .collect(),
        )
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn input_count(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| n.input)
            .max()
            .map_or(0, |m| m + 1)
    }
}

impl From<&PathMergeTree> for Topology {
    /// Leaves read input `path_pos`; merge nodes get a zero input.
    fn from(tree: &PathMergeTree) -> Self {
        let nodes = tree
            .nodes
            .iter()
            .map(|n| match *n {
                MergeNode::Leaf { path_pos, .. } => TopoNode {
                    children: vec![],
                    input: Some(path_pos),
                },
                MergeNode::Merge { left, right } => TopoNode {
                    children: vec![left, right],
                    input: None,
                },
            })
            .collect();
        Topology::new(nodes).expect("merge trees are topologically ordered")
    }
}

/// Activations cached by the forward pass of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub x: Vec<f64>,
    pub h_sum: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub u: Vec<f64>,
    /// One forget gate per child, in child order.
    pub f: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn gate_preact(p: &LstmParams, g: Gate, x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut a = p.b(g).to_vec();
    matvec_add(p.w(g), x, &mut a);
    matvec_add(p.u(g), h, &mut a);
    a
}

fn cell(p: &LstmParams, x: Vec<f64>, children: &[&NodeState]) -> NodeState {
    let d = p.dim();
    let mut h_sum = vec![0.0; d];
    for ch in children {
        axpy(1.0, &ch.h, &mut h_sum);
    }
    let i: Vec<f64> = gate_preact(p, Gate::Input, &x, &h_sum)
        .into_iter()
        .map(sigmoid)
        .collect();
    let o: Vec<f64> = gate_preact(p, Gate::Output, &x, &h_sum)
        .into_iter()
        .map(sigmoid)
        .collect();
    let u: Vec<f64> = gate_preact(p, Gate::Update, &x, &h_sum)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let f: Vec<Vec<f64>> = children
        .iter()
        .map(|ch| {
            gate_preact(p, Gate::Forget, &x, &ch.h)
                .into_iter()
                .map(sigmoid)
                .collect()
        })
        .collect();
    let mut c: Vec<f64> = i.iter().zip(&u).map(|(a, b)| a * b).collect();
    for (fl, ch) in f.iter().zip(children) {
        for k in 0..d {
            c[k] += fl[k] * ch.c[k];
        }
    }
    let h = o.iter().zip(&c).map(|(o, c)| o * c.tanh()).collect();
    let state = NodeState {
        x,
        h_sum,
        i,
        o,
        u,
        f,
        c,
        h,
    };
    debug_assert!(state.in_range(), "LSTM activations out of range");
    state
}

impl NodeState {
    /// Gates in `[0, 1]`, `u` and `h` in `[-1, 1]`, memory finite.
    pub fn in_range(&self) -> bool {
        let unit = |v: &[f64]| v.iter().all(|x| (0.0..=1.0).contains(x));
        let sym = |v: &[f64]| v.iter().all(|x| (-1.0..=1.0).contains(x));
        unit(&self.i)
            && unit(&self.o)
            && self.f.iter().all(|f| unit(f))
            && sym(&self.u)
            && sym(&self.h)
            && self.c.iter().all(|x| x.is_finite())
    }
}

fn check_dim(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

/// Runs a chain LSTM from `c_0 = h_0 = 0`.
pub fn chain_forward(p: &LstmParams, xs: &[Vec<f64>]) -> Result<Vec<NodeState>> {
    let mut states: Vec<NodeState> = Vec::with_capacity(xs.len());
    for x in xs {
        check_dim(p.dim(), x)?;
        let prev: Vec<&NodeState> = states.last().into_iter().collect();
        let s = cell(p, x.clone(), &prev);
        states.push(s);
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeForward {
    pub states: Vec<NodeState>,
    pub n_inputs: usize,
}

impl TreeForward {
    pub fn root_h(&self) -> &[f64] {
        &self.states.last().expect("non-empty topology").h
    }
}

pub fn tree_forward(p: &LstmParams, topo: &Topology, inputs: &[Vec<f64>]) -> Result<TreeForward> {
    let d = p.dim();
    let mut states: Vec<NodeState> = Vec::with_capacity(topo.len());
    for node in topo.nodes() {
        let x = match node.input {
            Some(slot) => {
                let x = inputs.get(slot).ok_or(Error::MissingLeafInput(slot))?;
                check_dim(d, x)?;
                x.clone()
            }
            None => vec![0.0; d],
        };
        let children: Vec<&NodeState> = node.children.iter().map(|&c| &states[c]).collect();
        let s = cell(p, x, &children);
        states.push(s);
    }
    Ok(TreeForward {
        states,
        n_inputs: inputs.len(),
    })
}

/// Gradients produced by [`tree_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeGrads {
    pub params: LstmParams,
    /// `∂L/∂x` per input slot.
    pub inputs: Vec<Vec<f64>>,
}

/// Reverse-mode pass through a forward run. `upstream` lists `(node, ∂L/∂h)`
/// injections; several nodes may receive loss at once.
pub fn tree_backward(
    p: &LstmParams,
    topo: &Topology,
    fwd: &TreeForward,
    upstream: &[(usize, Vec<f64>)],
) -> Result<TreeGrads> {
    let d = p.dim();
    let n = topo.len();
    let mut dh = vec![vec![0.0; d]; n];
    let mut dc = vec![vec![0.0; d]; n];
    for (node, g) in upstream {
        if *node >= n {
            return Err(Error::UnknownNode(*node));
        }
        check_dim(d, g)?;
        axpy(1.0, g, &mut dh[*node]);
    }

    let mut grads = LstmParams::zeros(d);
    let mut d_inputs = vec![vec![0.0; d]; fwd.n_inputs];

    for j in (0..n).rev() {
        let s = &fwd.states[j];
        let node = &topo.nodes()[j];
        let dh_j = std::mem::take(&mut dh[j]);
        let mut dc_j = std::mem::take(&mut dc[j]);

        let mut da_o = vec![0.0; d];
        for k in 0..d {
            let tc = s.c[k].tanh();
            da_o[k] = dh_j[k] * tc * s.o[k] * (1.0 - s.o[k]);
            dc_j[k] += dh_j[k] * s.o[k] * (1.0 - tc * tc);
        }
        let mut da_i = vec![0.0; d];
        let mut da_u = vec![0.0; d];
        for k in 0..d {
            da_i[k] = dc_j[k] * s.u[k] * s.i[k] * (1.0 - s.i[k]);
            da_u[k] = dc_j[k] * s.i[k] * (1.0 - s.u[k] * s.u[k]);
        }

        let mut dx = vec![0.0; d];
        let mut dh_sum = vec![0.0; d];
        for (g, da) in [(Gate::Input, &da_i), (Gate::Output, &da_o), (Gate::Update, &da_u)] {
            outer_add(da, &s.x, grads.w_mut(g));
            outer_add(da, &s.h_sum, grads.u_mut(g));
            axpy(1.0, da, grads.b_mut(g));
            matvec_t_add(p.w(g), da, &mut dx);
            matvec_t_add(p.u(g), da, &mut dh_sum);
        }

        for (l, &child) in node.children.iter().enumerate() {
            let f = &s.f[l];
            let ch = &fwd.states[child];
            let da_f: Vec<f64> = (0..d)
                .map(|k| dc_j[k] * ch.c[k] * f[k] * (1.0 - f[k]))
                .collect();
            outer_add(&da_f, &s.x, grads.w_mut(Gate::Forget));
            outer_add(&da_f, &ch.h, grads.u_mut(Gate::Forget));
            axpy(1.0, &da_f, grads.b_mut(Gate::Forget));
            matvec_t_add(p.w(Gate::Forget), &da_f, &mut dx);
            matvec_t_add(p.u(Gate::Forget), &da_f, &mut dh[child]);
            axpy(1.0, &dh_sum, &mut dh[child]);
            for k in 0..d {
                dc[child][k] += dc_j[k] * f[k];
            }
        }

        if let Some(slot) = node.input {
            axpy(1.0, &dx, &mut d_inputs[slot]);
        }
    }

    Ok(TreeGrads {
        params: grads,
        inputs: d_inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn random_inputs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = LstmParams::zeros(3);
        let xs = random_inputs(4, 3, 1);
        for s in chain_forward(&p, &xs).unwrap() {
            assert!(s.h.iter().all(|&h| h == 0.0));
        }
        let topo = Topology::new(vec![
            TopoNode { children: vec![], input: Some(0) },
            TopoNode { children: vec![], input: Some(1) },
            TopoNode { children: vec![0, 1], input: None },
        ])
        .unwrap();
        let fwd = tree_forward(&p, &topo, &xs).unwrap();
        assert!(fwd.root_h().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn empty_chain() {
        let p = LstmParams::zeros(2);
        assert!(chain_forward(&p, &[]).unwrap().is_empty());
    }

    #[test]
    fn chain_dimension_mismatch() {
        let p = LstmParams::zeros(2);
        assert!(matches!(
            chain_forward(&p, &[vec![1.0; 3]]),
            Err(Error::Dimension { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn single_step_matches_scalar_evaluation() {
        let mut p = LstmParams::zeros(1);
        let set = |p: &mut LstmParams, g, w, b| {
            p.w_mut(g)[0] = w;
            p.b_mut(g)[0] = b;
        };
        set(&mut p, Gate::Input, 0.5, 0.1);
        set(&mut p, Gate::Forget, -0.3, 1.0);
        set(&mut p, Gate::Output, 0.8, -0.2);
        set(&mut p, Gate::Update, 1.2, 0.05);
        let x = 0.7;
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = sig(0.5 * x + 0.1);
        let o = sig(0.8 * x - 0.2);
        let u = (1.2 * x + 0.05f64).tanh();
        let h = o * (i * u).tanh();
        let s = chain_forward(&p, &[vec![x]]).unwrap();
        assert_abs_diff_eq!(s[0].h[0], h, epsilon = 1e-15);
    }

    #[test]
    fn single_leaf_tree_equals_one_chain_step() {
        let p = LstmParams::random(4, &mut rng::seeded(3));
        let xs = random_inputs(1, 4, 4);
        let topo = Topology::new(vec![TopoNode { children: vec![], input: Some(0) }]).unwrap();
        let tree = tree_forward(&p, &topo, &xs).unwrap();
        let chain = chain_forward(&p, &xs).unwrap();
        assert_eq!(tree.root_h(), chain[0].h.as_slice());
    }

    #[test]
    fn three_leaf_tree_matches_scalar_evaluation() {
        // ((x0, x1), x2) with d = 1 and hand-set weights
        let mut p = LstmParams::zeros(1);
        for (g, w, u, b) in [
            (Gate::Input, 0.4, 0.3, 0.0),
            (Gate::Forget, 0.2, -0.5, 0.5),
            (Gate::Output, -0.6, 0.9, 0.1),
            (Gate::Update, 1.1, 0.7, -0.1),
        ] {
            p.w_mut(g)[0] = w;
            p.u_mut(g)[0] = u;
            p.b_mut(g)[0] = b;
        }
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let leaf = |x: f64| {
            let i = sig(0.4 * x);
            let o = sig(-0.6 * x + 0.1);
            let u = (1.1 * x - 0.1f64).tanh();
            let c = i * u;
            (c, o * c.tanh())
        };
        let merge = |a: (f64, f64), b: (f64, f64)| {
            let hs = a.1 + b.1;
            let i = sig(0.3 * hs);
            let o = sig(0.9 * hs + 0.1);
            let u = (0.7 * hs - 0.1f64).tanh();
            let fa = sig(-0.5 * a.1 + 0.5);
            let fb = sig(-0.5 * b.1 + 0.5);
            let c = i * u + fa * a.0 + fb * b.0;
            (c, o * c.tanh())
        };
        let (x0, x1, x2) = (0.3, -0.8, 1.5);
        let expected = merge(merge(leaf(x0), leaf(x1)), leaf(x2)).1;

        let topo = Topology::new(vec![
            TopoNode { children: vec![], input: Some(0) },
            TopoNode { children: vec![], input: Some(1) },
            TopoNode { children: vec![], input: Some(2) },
            TopoNode { children: vec![0, 1], input: None },
            TopoNode { children: vec![3, 2], input: None },
        ])
        .unwrap();
        let fwd = tree_forward(&p, &topo, &[vec![x0], vec![x1], vec![x2]]).unwrap();
        assert_abs_diff_eq!(fwd.root_h()[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn chain_topology_reproduces_chain_forward() {
        let p = LstmParams::random(5, &mut rng::seeded(8));
        let xs = random_inputs(6, 5, 9);
        let chain = chain_forward(&p, &xs).unwrap();
        let tree = tree_forward(&p, &Topology::chain(6).unwrap(), &xs).unwrap();
        assert_eq!(chain, tree.states);
    }

    #[test]
    fn missing_leaf_input_is_named() {
        let p = LstmParams::zeros(2);
        let topo = Topology::chain(3).unwrap();
        assert!(matches!(
            tree_forward(&p, &topo, &random_inputs(2, 2, 0)),
            Err(Error::MissingLeafInput(2))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = LstmParams::random(3, &mut rng::seeded(5));
        let topo = Topology::chain(3).unwrap();
        let fwd = tree_forward(&p, &topo, &random_inputs(3, 3, 6)).unwrap();
        let g = tree_backward(&p, &topo, &fwd, &[(2, vec![0.0; 3])]).unwrap();
        assert!(g.params.as_slice().iter().all(|&x| x == 0.0));
        assert!(g.inputs.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn unknown_node_rejected() {
        let p = LstmParams::zeros(2);
        let topo = Topology::chain(2).unwrap();
        let fwd = tree_forward(&p, &topo, &random_inputs(2, 2, 0)).unwrap();
        assert!(matches!(
            tree_backward(&p, &topo, &fwd, &[(7, vec![1.0; 2])]),
            Err(Error::UnknownNode(7))
        ));
    }

    #[test]
    fn output_bias_gradient_matches_hand_derivation() {
        let mut p = LstmParams::zeros(1);
        p.w_mut(Gate::Input)[0] = 0.9;
        p.w_mut(Gate::Update)[0] = -0.4;
        p.w_mut(Gate::Output)[0] = 0.3;
        p.b_mut(Gate::Output)[0] = 0.2;
        let topo = Topology::chain(1).unwrap();
        let fwd = tree_forward(&p, &topo, &[vec![1.3]]).unwrap();
        let s = &fwd.states[0];
        let delta = 0.75;
        let expected = delta * s.c[0].tanh() * s.o[0] * (1.0 - s.o[0]);
        let g = tree_backward(&p, &topo, &fwd, &[(0, vec![delta])]).unwrap();
        assert_abs_diff_eq!(g.params.b(Gate::Output)[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn topology_validation() {
        assert!(Topology::new(vec![]).is_err());
        assert!(Topology::new(vec![TopoNode { children: vec![0], input: None }]).is_err());
        let shared = vec![
            TopoNode { children: vec![], input: Some(0) },
            TopoNode { children: vec![0], input: None },
            TopoNode { children: vec![0, 1], input: None },
        ];
        assert!(Topology::new(shared).is_err());
    }
}
