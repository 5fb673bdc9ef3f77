//! Small dense vector helpers. Matrices are row-major `d x d` slices.

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += M x`
pub fn matvec_add(m: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (row, o) in m.chunks_exact(d).zip(out.iter_mut()) {
        *o += dot(row, x);
    }
}

/// `out += Mᵀ v`
pub fn matvec_t_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = out.len();
    for (row, &vi) in m.chunks_exact(d).zip(v) {
        if vi != 0.0 {
            axpy(vi, row, out);
        }
    }
}

/// `M += a bᵀ`
pub fn outer_add(a: &[f64], b: &[f64], m: &mut [f64]) {
    let d = b.len();
    for (row, &ai) in m.chunks_exact_mut(d).zip(a) {
        if ai != 0.0 {
            axpy(ai, b, row);
        }
    }
}

pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let n = norm(a) * norm(b);
    if n == 0.0 {
        0.0
    } else {
        dot(a, b) / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((log_sigmoid(2.0) - sigmoid(2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn matvec_and_transpose() {
        let m = [1.0, 2.0, 3.0, 4.0];
        let mut out = vec![0.0; 2];
        matvec_add(&m, &[1.0, 1.0], &mut out);
        assert_eq!(out, vec![3.0, 7.0]);
        let mut out = vec![0.0; 2];
        matvec_t_add(&m, &[1.0, 1.0], &mut out);
        assert_eq!(out, vec![4.0, 6.0]);
        let mut g = vec![0.0; 4];
        outer_add(&[1.0, 2.0], &[3.0, 4.0], &mut g);
        assert_eq!(g, vec![3.0, 4.0, 6.0, 8.0]);
    }
}
