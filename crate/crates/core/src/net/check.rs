use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng;

/// Minimum number of coordinates probed by [`gradient_check`].
pub const MIN_PROBED_COORDS: usize = 200;

/// Relative error `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares an analytic gradient with central differences of `loss`.
///
/// Probes every coordinate when there are at most [`MIN_PROBED_COORDS`],
/// otherwise a seeded random subset of that size. Returns the largest
/// relative error seen.
pub fn gradient_check<F>(
    params: &[f64],
    analytic: &[f64],
    h: f64,
    seed: u64,
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::Dimension {
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    let base = loss(params);
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss at base point is {base}")));
    }
    let coords: Vec<usize> = if params.len() <= MIN_PROBED_COORDS {
        (0..params.len()).collect()
    } else {
        sample(&mut rng::seeded(seed), params.len(), MIN_PROBED_COORDS).into_vec()
    };
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in coords {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = loss(&probe);
        probe[i] = orig - h;
        let minus = loss(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss near coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p: Vec<f64> = (0..250).map(|i| 0.5 + (i % 7) as f64 / 7.0).collect();
        let err = gradient_check(&p, &p, 1e-5, 1, |q| 0.5 * q.iter().map(|x| x * x).sum::<f64>()).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let p = vec![1.0, 2.0];
        let wrong = vec![1.0, 0.0];
        let err = gradient_check(&p, &wrong, 1e-5, 1, |q| 0.5 * (q[0] * q[0] + q[1] * q[1])).unwrap();
        assert!(err > 0.5);
    }

    #[test]
    fn zero_step_rejected() {
        assert!(gradient_check(&[1.0], &[1.0], 0.0, 1, |q| q[0]).is_err());
    }

    #[test]
    fn non_finite_loss_rejected() {
        assert!(matches!(
            gradient_check(&[1.0], &[1.0], 1e-5, 1, |_| f64::NAN),
            Err(Error::NonFinite(_))
        ));
    }
}
