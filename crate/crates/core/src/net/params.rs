use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Update,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Update];

    fn slot(self) -> usize {
        match self {
            Gate::Input => 0,
            Gate::Forget => 1,
            Gate::Output => 2,
            Gate::Update => 3,
        }
    }
}

/// Gate weights `W`, `U` (both `d x d`, row-major) and bias `b` for each of
/// the four gates, stored in one flat buffer so optimizers and gradient
/// checks can treat the whole set as a single vector.
///
/// The same type doubles as the gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr")]
pub struct LstmParams {
    dim: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct ParamsRepr {
    dim: usize,
    data: Vec<f64>,
}

impl TryFrom<ParamsRepr> for LstmParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = LstmParams::zeros(r.dim);
        if p.data.len() != r.data.len() {
            return Err(Error::Checkpoint(format!(
                "LSTM parameters of dim {} need {} values, found {}",
                r.dim,
                p.data.len(),
                r.data.len()
            )));
        }
        Ok(LstmParams {
            dim: r.dim,
            data: r.data,
        })
    }
}

impl LstmParams {
    pub fn zeros(dim: usize) -> Self {
        LstmParams {
            dim,
            data: vec![0.0; 4 * (2 * dim * dim + dim)],
        }
    }

    /// Uniform in `[-1/√d, 1/√d]` with the forget bias set to 1.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let mut p = LstmParams {
            dim,
            data: (0..4 * (2 * dim * dim + dim))
                .map(|_| rng.gen_range(-bound..=bound))
                .collect(),
        };
        p.b_mut(Gate::Forget).fill(1.0);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offsets(&self, g: Gate) -> (usize, usize, usize) {
        let d = self.dim;
        let base = g.slot() * (2 * d * d + d);
        (base, base + d * d, base + 2 * d * d)
    }

    pub fn w(&self, g: Gate) -> &[f64] {
        let (w, u, _) = self.offsets(g);
        &self.data[w..u]
    }

    pub fn u(&self, g: Gate) -> &[f64] {
        let (_, u, b) = self.offsets(g);
        &self.data[u..b]
    }

    pub fn b(&self, g: Gate) -> &[f64] {
        let (_, _, b) = self.offsets(g);
        &self.data[b..b + self.dim]
    }

    pub fn w_mut(&mut self, g: Gate) -> &mut [f64] {
        let (w, u, _) = self.offsets(g);
        &mut self.data[w..u]
    }

    pub fn u_mut(&mut self, g: Gate) -> &mut [f64] {
        let (_, u, b) = self.offsets(g);
        &mut self.data[u..b]
    }

    pub fn b_mut(&mut self, g: Gate) -> &mut [f64] {
        let (_, _, b) = self.offsets(g);
        let d = self.dim;
        &mut self.data[b..b + d]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn layout_is_disjoint() {
        let mut p = LstmParams::zeros(3);
        assert_eq!(p.len(), 4 * (18 + 3));
        p.w_mut(Gate::Output)[8] = 1.0;
        p.u_mut(Gate::Output)[0] = 2.0;
        p.b_mut(Gate::Output)[2] = 3.0;
        assert_eq!(p.as_slice().iter().filter(|&&x| x != 0.0).count(), 3);
        assert_eq!(p.w(Gate::Output)[8], 1.0);
        assert_eq!(p.u(Gate::Output)[0], 2.0);
        assert_eq!(p.b(Gate::Output)[2], 3.0);
    }

    #[test]
    fn random_init_bounds() {
        let p = LstmParams::random(4, &mut rng::seeded(1));
        assert!(p.b(Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(p.w(Gate::Input).iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn json_rejects_wrong_length() {
        let bad = r#"{"dim":2,"data":[0.0]}"#;
        assert!(serde_json::from_str::<LstmParams>(bad).is_err());
        let p = LstmParams::random(2, &mut rng::seeded(2));
        let back: LstmParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
