//! Finite-difference checks for every differentiable graph operation.
//!
//! Each check compares the analytic gradient against central differences in
//! f64 at a pseudo-random point. The composition always ends in a scalar
//! that mixes the op's output with fixed weights, so a gradient that is
//! wrong anywhere shows up in the reduction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tprlab_tensor::gradcheck::finite_difference_check;
use tprlab_tensor::{Graph, Tensor, Var};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn point(seed: u64, shape: &[usize]) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.gen_range(-1.5..1.5))
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Fixed mixing weights so reductions do not hide coordinate errors.
fn weights(g: &mut Graph<f64>, shape: &[usize]) -> Var {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|i| 0.3 + 0.07 * (i as f64 % 13.0)).collect();
    g.constant(Tensor::new(shape.to_vec(), data).unwrap()).unwrap()
}

/// Weighted sum of `v` as the scalar head of every check.
fn head(g: &mut Graph<f64>, v: Var) -> tprlab_tensor::Result<Var> {
    let shape = g.shape(v).to_vec();
    let w = weights(g, &shape);
    let mixed = g.mul(v, w)?;
    g.sum(mixed)
}

fn check<B>(name: &str, p: &Tensor<f64>, build: B)
where
    B: Fn(&mut Graph<f64>, Var) -> tprlab_tensor::Result<Var>,
{
    let r = finite_difference_check(build, p, EPS).unwrap();
    assert!(
        r.max_rel_err < TOL,
        "{name}: rel err {:.3e} at index {} (analytic {:.6e}, numeric {:.6e})",
        r.max_rel_err,
        r.worst_index,
        r.analytic,
        r.numeric
    );
}

#[test]
fn matmul_wrt_lhs_and_rhs() {
    check("matmul lhs", &point(1, &[3, 4]), |g, x| {
        let b = g.constant(point(2, &[4, 5]))?;
        let c = g.matmul(x, b)?;
        head(g, c)
    });
    check("matmul rhs", &point(3, &[4, 5]), |g, x| {
        let a = g.constant(point(4, &[3, 4]))?;
        let c = g.matmul(a, x)?;
        head(g, c)
    });
}

#[test]
fn bmm_wrt_lhs_and_rhs() {
    check("bmm lhs", &point(5, &[2, 3, 4]), |g, x| {
        let b = g.constant(point(6, &[2, 4, 5]))?;
        let c = g.bmm(x, b)?;
        head(g, c)
    });
    check("bmm rhs", &point(7, &[2, 4, 5]), |g, x| {
        let a = g.constant(point(8, &[2, 3, 4]))?;
        let c = g.bmm(a, x)?;
        head(g, c)
    });
}

#[test]
fn add_with_suffix_broadcast() {
    check("add lhs", &point(9, &[4, 3]), |g, x| {
        let b = g.constant(point(10, &[3]))?;
        let c = g.add(x, b)?;
        head(g, c)
    });
    check("add broadcast rhs", &point(11, &[3]), |g, x| {
        let a = g.constant(point(12, &[4, 3]))?;
        let c = g.add(a, x)?;
        head(g, c)
    });
}

#[test]
fn mul_scale_sub() {
    check("mul", &point(13, &[2, 5]), |g, x| {
        let b = g.constant(point(14, &[2, 5]))?;
        let c = g.mul(x, b)?;
        head(g, c)
    });
    check("scale", &point(15, &[7]), |g, x| {
        let c = g.scale(x, -2.75)?;
        head(g, c)
    });
    check("sub", &point(16, &[2, 3]), |g, x| {
        let b = g.constant(point(17, &[3]))?;
        let c = g.sub(x, b)?;
        head(g, c)
    });
}

#[test]
fn outer_product_both_sides() {
    check("outer lhs", &point(18, &[4]), |g, x| {
        let b = g.constant(point(19, &[6]))?;
        let c = g.outer(x, b)?;
        head(g, c)
    });
    check("outer rhs", &point(20, &[6]), |g, x| {
        let a = g.constant(point(21, &[4]))?;
        let c = g.outer(a, x)?;
        head(g, c)
    });
}

#[test]
fn shape_ops() {
    check("reshape", &point(22, &[2, 6]), |g, x| {
        let c = g.reshape(x, vec![3, 4])?;
        head(g, c)
    });
    check("swap_axes", &point(23, &[2, 3, 4]), |g, x| {
        let c = g.swap_axes(x, 0, 2)?;
        head(g, c)
    });
    check("transpose", &point(24, &[3, 5]), |g, x| {
        let c = g.transpose(x)?;
        head(g, c)
    });
    check("concat", &point(25, &[2, 3]), |g, x| {
        let b = g.constant(point(26, &[2, 2]))?;
        let c = g.concat(&[x, b, x], 1)?;
        head(g, c)
    });
    check("slice", &point(27, &[3, 6]), |g, x| {
        let c = g.slice(x, 1, 2, 3)?;
        head(g, c)
    });
}

#[test]
fn nonlinearities() {
    // Offset the point away from relu's kink at 0.
    let mut p = point(28, &[9]);
    for v in p.data_mut() {
        if v.abs() < 0.1 {
            *v += 0.25;
        }
    }
    check("relu", &p, |g, x| {
        let c = g.relu(x)?;
        head(g, c)
    });
    check("gelu", &point(29, &[9]), |g, x| {
        let c = g.gelu(x)?;
        head(g, c)
    });
    check("tanh", &point(30, &[9]), |g, x| {
        let c = g.tanh(x)?;
        head(g, c)
    });
    check("sigmoid", &point(31, &[9]), |g, x| {
        let c = g.sigmoid(x)?;
        head(g, c)
    });
}

#[test]
fn softmax_and_layer_norm() {
    check("softmax", &point(32, &[3, 5]), |g, x| {
        let c = g.softmax(x)?;
        head(g, c)
    });
    check("layer_norm wrt input", &point(33, &[4, 6]), |g, x| {
        let gamma = g.constant(point(34, &[6]))?;
        let beta = g.constant(point(35, &[6]))?;
        let c = g.layer_norm(x, gamma, beta, 1e-8)?;
        head(g, c)
    });
    check("layer_norm wrt gamma", &point(36, &[6]), |g, x| {
        let a = g.constant(point(37, &[4, 6]))?;
        let beta = g.constant(point(38, &[6]))?;
        let c = g.layer_norm(a, x, beta, 1e-8)?;
        head(g, c)
    });
    check("layer_norm wrt beta", &point(39, &[6]), |g, x| {
        let a = g.constant(point(40, &[4, 6]))?;
        let gamma = g.constant(point(41, &[6]))?;
        let c = g.layer_norm(a, gamma, x, 1e-8)?;
        head(g, c)
    });
}

#[test]
fn lookup_and_losses() {
    check("embed wrt table", &point(42, &[5, 4]), |g, x| {
        let c = g.embed(x, &[4, 0, 2, 2, 1], &[5])?;
        head(g, c)
    });
    check("cross_entropy", &point(43, &[4, 6]), |g, x| {
        g.cross_entropy(x, &[2, 0, 5, 1], -1)
    });
    check("cross_entropy with ignored rows", &point(44, &[4, 6]), |g, x| {
        g.cross_entropy(x, &[2, -1, 5, -1], -1)
    });
    check("mean", &point(45, &[3, 4]), |g, x| g.mean(x));
    check("mean_axis", &point(46, &[3, 4, 2]), |g, x| {
        let c = g.mean_axis(x, 1)?;
        head(g, c)
    });
}

#[test]
fn dropout_with_replayed_mask() {
    // The mask must be identical across the analytic pass and every
    // finite-difference evaluation, so the build closure reseeds its own rng.
    check("dropout", &point(47, &[40]), |g, x| {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let c = g.dropout(x, 0.3, &mut rng)?;
        head(g, c)
    });
}

#[test]
fn composite_mlp_through_slices() {
    // All parameters packed into one vector: W1 (4x8), b1 (8), W2 (8x3).
    // The forward pass routes through slice → reshape → matmul → add →
    // relu-free gelu → cross entropy, checking the whole chain jointly.
    let n = 4 * 8 + 8 + 8 * 3;
    check("mlp composite", &point(48, &[n]), |g, x| {
        let w1 = g.slice(x, 0, 0, 32)?;
        let w1 = g.reshape(w1, vec![4, 8])?;
        let b1 = g.slice(x, 0, 32, 8)?;
        let w2 = g.slice(x, 0, 40, 24)?;
        let w2 = g.reshape(w2, vec![8, 3])?;
        let input = g.constant(point(49, &[5, 4]))?;
        let h = g.matmul(input, w1)?;
        let h = g.add(h, b1)?;
        let h = g.gelu(h)?;
        let logits = g.matmul(h, w2)?;
        g.cross_entropy(logits, &[0, 2, 1, 1, 0], -1)
    });
}
