//! Finite-difference gradient checking.

use crate::error::TensorError;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;
use crate::Result;

/// Result of a finite-difference check.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    /// Maximum relative error over all coordinates.
    pub max_rel_err: f64,
    /// Coordinate attaining the maximum.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Relative error with an absolute floor so near-zero pairs compare sanely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs())).max(1e-8)
}

/// Checks the analytic gradient of a scalar function at `point` against
/// central finite differences.
///
/// `build` receives a fresh graph and the entered point and must return the
/// scalar loss var; it is re-run for every perturbed coordinate, so it must
/// be deterministic. Runs in `f64` only — that is the precision where
/// central differences with `eps ≈ 1e-5` resolve the comparison.
pub fn finite_difference_check<B>(build: B, point: &Tensor<f64>, eps: f64) -> Result<GradCheck>
where
    B: Fn(&mut Graph<f64>, Var) -> Result<Var>,
{
    let eval = |t: &Tensor<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.leaf(t.clone(), true)?;
        let loss = build(&mut g, x)?;
        let v = g.value(loss).item()?;
        if !v.is_finite() {
            return Err(TensorError::NonFinite("finite_difference_check"));
        }
        Ok(v)
    };

    // Analytic gradient at the point.
    let mut g = Graph::new();
    let x = g.leaf(point.clone(), true)?;
    let loss = build(&mut g, x)?;
    g.backward(loss)?;
    let analytic: Vec<f64> = g
        .grad(x)
        .ok_or_else(|| TensorError::InvalidArg("loss does not depend on the input".into()))?
        .to_vec();

    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = point.clone();
    for i in 0..probe.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let e = rel_err(analytic[i], numeric);
        if e > out.max_rel_err {
            out = GradCheck {
                max_rel_err: e,
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_on_a_simple_composite() {
        // f(x) = mean(tanh(x)^2)
        let point = Tensor::from_vec(vec![0.3, -1.2, 0.0, 2.5]);
        let check = finite_difference_check(
            |g, x| {
                let t = g.tanh(x)?;
                let sq = g.mul(t, t)?;
                g.mean(sq)
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(check.max_rel_err < 1e-8, "{check:?}");
    }

    #[test]
    fn reports_disagreement_at_a_relu_kink() {
        // At x = 0 the subgradient used by backward (0) and the central
        // difference (0.5) genuinely disagree; the checker must notice.
        let point = Tensor::from_vec(vec![0.0]);
        let check = finite_difference_check(
            |g, x| {
                let r = g.relu(x)?;
                g.sum(r)
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(check.max_rel_err > 0.4, "{check:?}");
    }

    #[test]
    fn rel_err_floors_near_zero_comparisons() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert!(rel_err(1.0, 2.0) > 0.4);
        assert!(rel_err(1e-12, -1e-12) < 1e-3);
    }
}
