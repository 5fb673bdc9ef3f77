//! Negative-sampling objectives. Both are log-likelihoods to be maximized;
//! gradients are of the returned value.

use crate::error::{Error, Result};
use crate::net::math::{axpy, dot, log_sigmoid, sigmoid};

/// Trilinear score `Σ_k e_i[k] f[k] e_j[k]`.
pub fn score(e_i: &[f64], f: &[f64], e_j: &[f64]) -> Result<f64> {
    if e_i.len() != f.len() || e_j.len() != f.len() {
        return Err(Error::Dimension {
            expected: f.len(),
            actual: if e_i.len() != f.len() { e_i.len() } else { e_j.len() },
        });
    }
    Ok(trilinear(e_i, f, e_j))
}

#[inline]
fn trilinear(a: &[f64], f: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(f).zip(b).map(|((a, f), b)| a * f * b).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityLoss {
    pub value: f64,
    pub d_ei: Vec<f64>,
    pub d_ej: Vec<f64>,
    pub d_f: Vec<f64>,
    pub d_neg_i: Vec<Vec<f64>>,
    pub d_neg_j: Vec<Vec<f64>>,
}

/// Entity prediction objective at the root representation `f`:
///
/// `log σ(s(e_i, f, e_j)) + Σ log σ(-s(n, f, e_j)) + Σ log σ(-s(e_i, f, n'))`
///
/// where `neg_i` replace `e_i` and `neg_j` replace `e_j`.
pub fn entity_loss(
    e_i: &[f64],
    e_j: &[f64],
    f: &[f64],
    neg_i: &[&[f64]],
    neg_j: &[&[f64]],
) -> EntityLoss {
    let d = f.len();
    let mut out = EntityLoss {
        value: 0.0,
        d_ei: vec![0.0; d],
        d_ej: vec![0.0; d],
        d_f: vec![0.0; d],
        d_neg_i: Vec::with_capacity(neg_i.len()),
        d_neg_j: Vec::with_capacity(neg_j.len()),
    };

    let s = trilinear(e_i, f, e_j);
    out.value += log_sigmoid(s);
    let g = sigmoid(-s);
    for k in 0..d {
        out.d_ei[k] += g * f[k] * e_j[k];
        out.d_ej[k] += g * f[k] * e_i[k];
        out.d_f[k] += g * e_i[k] * e_j[k];
    }

    for n in neg_i {
        let s = trilinear(n, f, e_j);
        out.value += log_sigmoid(-s);
        let g = -sigmoid(s);
        let mut dn = vec![0.0; d];
        for k in 0..d {
            dn[k] = g * f[k] * e_j[k];
            out.d_ej[k] += g * f[k] * n[k];
            out.d_f[k] += g * n[k] * e_j[k];
        }
        out.d_neg_i.push(dn);
    }
    for n in neg_j {
        let s = trilinear(e_i, f, n);
        out.value += log_sigmoid(-s);
        let g = -sigmoid(s);
        let mut dn = vec![0.0; d];
        for k in 0..d {
            dn[k] = g * f[k] * e_i[k];
            out.d_ei[k] += g * f[k] * n[k];
            out.d_f[k] += g * e_i[k] * n[k];
        }
        out.d_neg_j.push(dn);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordLoss {
    pub value: f64,
    pub d_h: Vec<f64>,
    pub d_contexts: Vec<Vec<f64>>,
    /// `d_negatives[c][n]` for negative `n` of context word `c`.
    pub d_negatives: Vec<Vec<Vec<f64>>>,
}

/// Word prediction objective for a phrase representation `h`:
///
/// `Σ_c [ log σ(v_c·h) + Σ_n log σ(-v_n·h) ]`
pub fn word_loss(h: &[f64], contexts: &[&[f64]], negatives: &[Vec<&[f64]>]) -> WordLoss {
    assert_eq!(contexts.len(), negatives.len(), "one negative list per context word");
    let d = h.len();
    let mut out = WordLoss {
        value: 0.0,
        d_h: vec![0.0; d],
        d_contexts: Vec::with_capacity(contexts.len()),
        d_negatives: Vec::with_capacity(contexts.len()),
    };
    for (vc, negs) in contexts.iter().zip(negatives) {
        let s = dot(vc, h);
        out.value += log_sigmoid(s);
        let g = sigmoid(-s);
        axpy(g, vc, &mut out.d_h);
        out.d_contexts.push(h.iter().map(|x| g * x).collect());
        let mut dns = Vec::with_capacity(negs.len());
        for vn in negs {
            let s = dot(vn, h);
            out.value += log_sigmoid(-s);
            let g = -sigmoid(s);
            axpy(g, vn, &mut out.d_h);
            dns.push(h.iter().map(|x| g * x).collect());
        }
        out.d_negatives.push(dns);
    }
    out
}
