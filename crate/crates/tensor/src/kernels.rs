//! Raw slice kernels behind the graph ops.
//!
//! Every kernel has a fixed, input-independent summation order, so repeated
//! runs of the same build produce bit-identical results regardless of worker
//! count. Matrix products use the row-accumulation (i-k-j) loop order so the
//! inner loop streams contiguously through both operands.

use crate::scalar::Scalar;

/// Unrolled dot product with eight independent accumulators. The fixed
/// reduction tree keeps results deterministic while letting the compiler
/// vectorize the chunk loop.
#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 8;
    let mut acc = [F::zero(); 8];
    for c in 0..chunks {
        let i = c * 8;
        for l in 0..8 {
            acc[l] = a[i + l].mul_add(b[i + l], acc[l]);
        }
    }
    let mut tail = F::zero();
    for i in chunks * 8..a.len() {
        tail = a[i].mul_add(b[i], tail);
    }
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7])) + tail
}

/// Register-tile width for the blocked matrix kernels. The hot shapes have
/// n a multiple of 32, so full tiles dominate and the tail path is rare.
const TILE_N: usize = 32;

#[inline(always)]
fn axpy_tile<F: Scalar>(acc: &mut [F; TILE_N], av: F, brow: &[F]) {
    for (aj, &bj) in acc.iter_mut().zip(brow) {
        *aj = av.mul_add(bj, *aj);
    }
}

/// `c += a @ b` where `a` is (m,k), `b` is (k,n), `c` is (m,n).
///
/// Blocked 4 rows × `TILE_N` columns with local accumulators so the hot
/// loop stays in registers. Each output element still receives its k terms
/// in ascending order and the prior `c` value once at the end, so results
/// are independent of the blocking.
pub fn matmul_nn<F: Scalar>(a: &[F], b: &[F], m: usize, k: usize, n: usize, c: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let mut i = 0;
    while i + 4 <= m {
        let arows = [
            &a[i * k..(i + 1) * k],
            &a[(i + 1) * k..(i + 2) * k],
            &a[(i + 2) * k..(i + 3) * k],
            &a[(i + 3) * k..(i + 4) * k],
        ];
        let mut jt = 0;
        while jt < n {
            let w = TILE_N.min(n - jt);
            let mut acc = [[F::zero(); TILE_N]; 4];
            for p in 0..k {
                let brow = &b[p * n + jt..p * n + jt + w];
                for (accr, arow) in acc.iter_mut().zip(arows) {
                    axpy_tile(accr, arow[p], brow);
                }
            }
            for (r, accr) in acc.iter().enumerate() {
                let crow = &mut c[(i + r) * n + jt..(i + r) * n + jt + w];
                for (cj, &aj) in crow.iter_mut().zip(accr) {
                    *cj = *cj + aj;
                }
            }
            jt += w;
        }
        i += 4;
    }
    while i < m {
        let arow = &a[i * k..(i + 1) * k];
        let mut jt = 0;
        while jt < n {
            let w = TILE_N.min(n - jt);
            let mut acc = [F::zero(); TILE_N];
            for (p, &av) in arow.iter().enumerate() {
                axpy_tile(&mut acc, av, &b[p * n + jt..p * n + jt + w]);
            }
            let crow = &mut c[i * n + jt..i * n + jt + w];
            for (cj, &aj) in crow.iter_mut().zip(&acc) {
                *cj = *cj + aj;
            }
            jt += w;
        }
        i += 1;
    }
}

/// `c += a @ b^T` where `a` is (m,n), `b` is (k,n), `c` is (m,k).
///
/// Transposes `b` (k·n work) and reuses the register-tiled [`matmul_nn`]
/// (m·n·k work), which beats any direct dot formulation: axpy-style inner
/// loops vectorize fully while row dots bottleneck on horizontal
/// reductions.
pub fn matmul_nt<F: Scalar>(a: &[F], b: &[F], m: usize, n: usize, k: usize, c: &mut [F]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    let mut bt = vec![F::zero(); n * k];
    for p in 0..k {
        for (j, &bv) in b[p * n..(p + 1) * n].iter().enumerate() {
            bt[j * k + p] = bv;
        }
    }
    matmul_nn(a, &bt, m, n, k, c);
}

/// `c += a^T @ g` where `a` is (m,k), `g` is (m,n), `c` is (k,n).
///
/// Blocked like [`matmul_nn`]: 4 output rows × `TILE_N` columns per pass,
/// inner loop ascending over the shared m axis.
pub fn matmul_tn<F: Scalar>(a: &[F], g: &[F], m: usize, k: usize, n: usize, c: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    let mut p = 0;
    while p + 4 <= k {
        let mut jt = 0;
        while jt < n {
            let w = TILE_N.min(n - jt);
            let mut acc = [[F::zero(); TILE_N]; 4];
            for i in 0..m {
                let grow = &g[i * n + jt..i * n + jt + w];
                for (r, accr) in acc.iter_mut().enumerate() {
                    axpy_tile(accr, a[i * k + p + r], grow);
                }
            }
            for (r, accr) in acc.iter().enumerate() {
                let crow = &mut c[(p + r) * n + jt..(p + r) * n + jt + w];
                for (cj, &aj) in crow.iter_mut().zip(accr) {
                    *cj = *cj + aj;
                }
            }
            jt += w;
        }
        p += 4;
    }
    while p < k {
        let mut jt = 0;
        while jt < n {
            let w = TILE_N.min(n - jt);
            let mut acc = [F::zero(); TILE_N];
            for i in 0..m {
                axpy_tile(&mut acc, a[i * k + p], &g[i * n + jt..i * n + jt + w]);
            }
            let crow = &mut c[p * n + jt..p * n + jt + w];
            for (cj, &aj) in crow.iter_mut().zip(&acc) {
                *cj = *cj + aj;
            }
            jt += w;
        }
        p += 1;
    }
}

/// In-place numerically stable softmax over contiguous rows of length `row`.
pub fn softmax_rows<F: Scalar>(x: &mut [F], row: usize) {
    debug_assert_eq!(x.len() % row, 0);
    for r in x.chunks_mut(row) {
        let max = r.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in r.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in r.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// Softmax backward: `dx = y * (g - sum(g * y))` per row, accumulated into `dx`.
pub fn softmax_backward_rows<F: Scalar>(y: &[F], g: &[F], row: usize, dx: &mut [F]) {
    for ((yr, gr), dr) in y
        .chunks(row)
        .zip(g.chunks(row))
        .zip(dx.chunks_mut(row))
    {
        let s = dot(gr, yr);
        for i in 0..row {
            dr[i] = dr[i] + yr[i] * (gr[i] - s);
        }
    }
}

/// Layer normalisation over contiguous rows: `y = (x - mean) / sqrt(var + eps)`,
/// then `y * gamma + beta`. Per-row `(mean, inv_std)` pairs are written to
/// `stats` for the backward pass.
pub fn layer_norm_rows<F: Scalar>(
    x: &[F],
    gamma: &[F],
    beta: &[F],
    row: usize,
    eps: F,
    y: &mut [F],
    stats: &mut Vec<F>,
) {
    debug_assert_eq!(gamma.len(), row);
    debug_assert_eq!(beta.len(), row);
    let n = F::from_f64(row as f64);
    for (xr, yr) in x.chunks(row).zip(y.chunks_mut(row)) {
        let mean = xr.iter().cloned().sum::<F>() / n;
        let mut var = F::zero();
        for &v in xr {
            let d = v - mean;
            var = d.mul_add(d, var);
        }
        var = var / n;
        let inv = (var + eps).sqrt().recip();
        for i in 0..row {
            yr[i] = (xr[i] - mean) * inv * gamma[i] + beta[i];
        }
        stats.push(mean);
        stats.push(inv);
    }
}

/// Layer-norm backward. `stats` holds the per-row `(mean, inv_std)` pairs
/// saved by the forward pass. Gradients are accumulated into the outputs.
#[allow(clippy::too_many_arguments)]
pub fn layer_norm_backward_rows<F: Scalar>(
    x: &[F],
    gamma: &[F],
    g: &[F],
    row: usize,
    stats: &[F],
    dx: &mut [F],
    dgamma: &mut [F],
    dbeta: &mut [F],
) {
    let n = F::from_f64(row as f64);
    for (r, (xr, gr)) in x.chunks(row).zip(g.chunks(row)).enumerate() {
        let mean = stats[2 * r];
        let inv = stats[2 * r + 1];
        // dxhat = g * gamma; need mean(dxhat) and mean(dxhat * xhat).
        let mut s1 = F::zero();
        let mut s2 = F::zero();
        for i in 0..row {
            let xhat = (xr[i] - mean) * inv;
            let dxh = gr[i] * gamma[i];
            s1 = s1 + dxh;
            s2 = dxh.mul_add(xhat, s2);
            dgamma[i] = gr[i].mul_add(xhat, dgamma[i]);
            dbeta[i] = dbeta[i] + gr[i];
        }
        s1 = s1 / n;
        s2 = s2 / n;
        let dr = &mut dx[r * row..(r + 1) * row];
        for i in 0..row {
            let xhat = (xr[i] - mean) * inv;
            dr[i] = dr[i] + inv * (gr[i] * gamma[i] - s1 - xhat * s2);
        }
    }
}

/// Tanh-approximation GELU.
#[inline]
pub fn gelu<F: Scalar>(x: F) -> F {
    let c = F::from_f64(0.7978845608028654); // sqrt(2/pi)
    let a = F::from_f64(0.044715);
    let half = F::from_f64(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (F::one() + u.tanh())
}

/// Derivative of [`gelu`].
#[inline]
pub fn gelu_grad<F: Scalar>(x: F) -> F {
    let c = F::from_f64(0.7978845608028654);
    let a = F::from_f64(0.044715);
    let half = F::from_f64(0.5);
    let three = F::from_f64(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    let du = c * (F::one() + three * a * x * x);
    half * (F::one() + t) + half * x * (F::one() - t * t) * du
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn arange(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| ((i * 7 + 3) % 11) as f64 * scale - 2.0).collect()
    }

    #[test]
    fn matmul_variants_agree_with_naive() {
        // Shapes straddle the 4-row blocks and the TILE_N column tiles:
        // exact multiples, sub-tile, and ragged tails on every axis.
        for (m, k, n) in [
            (5, 17, 9),
            (4, 8, 32),
            (8, 16, 64),
            (7, 5, 33),
            (6, 3, 35),
            (1, 1, 1),
            (3, 40, 70),
            (9, 64, 96),
        ] {
            let a = arange(m * k, 0.43);
            let b = arange(k * n, 0.31);
            let expect = naive_matmul(&a, &b, m, k, n);

            let mut c = vec![0.0; m * n];
            matmul_nn(&a, &b, m, k, n, &mut c);
            for (x, y) in c.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-10, "nn mismatch {x} vs {y} at {m}x{k}x{n}");
            }

            // a @ b = a @ (b^T)^T : build b^T and use matmul_nt.
            let mut bt = vec![0.0; k * n];
            for p in 0..k {
                for j in 0..n {
                    bt[j * k + p] = b[p * n + j];
                }
            }
            let mut c2 = vec![0.0; m * n];
            matmul_nt(&a, &bt, m, k, n, &mut c2);
            for (x, y) in c2.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-10, "nt mismatch {x} vs {y} at {m}x{k}x{n}");
            }

            // a @ b = (a^T)^T @ b : build a^T and use matmul_tn.
            let mut at = vec![0.0; m * k];
            for i in 0..m {
                for p in 0..k {
                    at[p * m + i] = a[i * k + p];
                }
            }
            let mut c3 = vec![0.0; m * n];
            matmul_tn(&at, &b, k, m, n, &mut c3);
            for (x, y) in c3.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-10, "tn mismatch {x} vs {y} at {m}x{k}x{n}");
            }
        }
    }

    #[test]
    fn matmul_accumulates_into_existing_output() {
        let (m, k, n) = (5, 6, 37);
        let a = arange(m * k, 0.21);
        let b = arange(k * n, 0.19);
        let base = arange(m * n, 0.05);
        let mut c = base.clone();
        matmul_nn(&a, &b, m, k, n, &mut c);
        let expect = naive_matmul(&a, &b, m, k, n);
        for i in 0..m * n {
            assert!((c[i] - (base[i] + expect[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn dot_matches_naive_across_lengths() {
        for len in [0, 1, 7, 8, 9, 31, 64, 100] {
            let a = arange(len, 0.17);
            let b = arange(len, 0.23);
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-10, "len {len}");
        }
    }

    #[test]
    fn softmax_rows_are_normalised_and_ordered() {
        let mut x = vec![1.0, 2.0, 3.0, -1.0, 1000.0, 999.0, 998.0, 997.0];
        softmax_rows(&mut x, 4);
        for r in x.chunks(4) {
            let s: f64 = r.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&p| p > 0.0 && p <= 1.0));
        }
        // Larger logits get larger probabilities.
        assert!(x[2] > x[1] && x[1] > x[0] && x[0] > x[3]);
        assert!(x[4] > x[5] && x[5] > x[6] && x[6] > x[7]);
    }

    #[test]
    fn layer_norm_rows_standardise() {
        let x = arange(12, 0.9);
        let gamma = vec![1.0; 4];
        let beta = vec![0.0; 4];
        let mut y = vec![0.0; 12];
        let mut stats = Vec::new();
        layer_norm_rows(&x, &gamma, &beta, 4, 1e-12, &mut y, &mut stats);
        for r in y.chunks(4) {
            let mean: f64 = r.iter().sum::<f64>() / 4.0;
            let var: f64 = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-8);
        }
        assert_eq!(stats.len(), 6);
    }

    #[test]
    fn gelu_matches_reference_points() {
        // Reference values computed from 0.5*x*(1+tanh(sqrt(2/pi)*(x+0.044715*x^3))).
        assert!((gelu(0.0_f64) - 0.0).abs() < 1e-15);
        assert!((gelu(1.0_f64) - 0.8411919906082768).abs() < 1e-12);
        assert!((gelu(-1.0_f64) + 0.15880800939172324).abs() < 1e-12);
        // Derivative against a central difference.
        for &x in &[-2.0f64, -0.5, 0.0, 0.3, 1.7] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8, "x = {x}");
        }
    }
}
