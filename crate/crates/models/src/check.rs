//! Finite-difference verification of whole-model gradients.
//!
//! [`fd_loss_check`] compares the analytic gradient of the teacher-forced
//! training loss against central finite differences, sampling a handful of
//! coordinates from every parameter so each weight matrix, bias, norm and
//! embedding is exercised. Meaningful in `f64` only (an `f32` loss has too
//! little resolution for the quotient).

use rand::Rng;

use tprlab_tensor::rng;
use tprlab_tensor::scalar::Scalar;

use crate::{ModelError, Result, SeqModel};

/// Relative error with a floor suited to loss-level finite differences.
///
/// The difference quotient carries absolute noise of roughly
/// ulp(loss) / (2·eps) ≈ 1e-11 at eps = 1e-5, independent of the gradient's
/// size. Some parameters have *exactly* zero gradient by structure (a key
/// bias shifts every attention score for a query equally, and softmax is
/// shift-invariant), so the denominator floor must sit well above that
/// noise or zeros read as mismatches.
fn loss_rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(a.abs().max(b.abs()), 1e-6)
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

/// Central-difference check of `d loss / d θ` for a sample of coordinates
/// of every parameter. Requires dropout 0 (otherwise the loss itself is
/// stochastic and differences are meaningless).
pub fn fd_loss_check<F: Scalar>(
    model: &mut dyn SeqModel<F>,
    inputs: &[Vec<usize>],
    targets: &[Vec<usize>],
    coords_per_param: usize,
    eps: f64,
    seed: u64,
) -> Result<FdReport> {
    if model.config().dropout != 0.0 {
        return Err(ModelError::BadConfig(
            "finite differences require dropout 0".into(),
        ));
    }

    model.params_mut().zero_grads();
    let mut drop_rng = rng::stream(seed, "fd-loss-train");
    model.train_loss(inputs, targets, &mut drop_rng)?;
    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.iter().map(|g| g.as_f64()).collect()))
        .collect();
    model.params_mut().zero_grads();

    let mut pick = rng::stream(seed, "fd-loss-coords");
    let mut report = FdReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
    };

    for (name, grads) in &analytic {
        let numel = grads.len();
        for _ in 0..coords_per_param.min(numel) {
            let idx = pick.gen_range(0..numel);
            let plus = loss_with_nudge(model, name, idx, eps, inputs, targets, seed)?;
            let minus = loss_with_nudge(model, name, idx, -eps, inputs, targets, seed)?;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grads[idx];
            let rel = loss_rel_err(a, numeric);
            report.coords_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = name.clone();
                report.worst_index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Loss with one parameter coordinate displaced by `eps`; the original
/// value is restored exactly afterwards.
fn loss_with_nudge<F: Scalar>(
    model: &mut dyn SeqModel<F>,
    name: &str,
    idx: usize,
    eps: f64,
    inputs: &[Vec<usize>],
    targets: &[Vec<usize>],
    seed: u64,
) -> Result<f64> {
    let original = {
        let p = model.params_mut().by_name_mut(name)?;
        let x = p.value.data()[idx];
        p.value.data_mut()[idx] = F::from_f64(x.as_f64() + eps);
        x
    };
    let mut drop_rng = rng::stream(seed, "fd-loss-eval");
    let loss = model.train_loss(inputs, targets, &mut drop_rng);
    {
        let p = model.params_mut().by_name_mut(name)?;
        p.value.data_mut()[idx] = original;
    }
    model.params_mut().zero_grads();
    loss
}
