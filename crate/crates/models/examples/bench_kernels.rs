use std::time::Instant;
use tprlab_tensor::kernels::{matmul_nn, matmul_nt, matmul_tn};

fn bench(name: &str, mut f: impl FnMut(), flops: f64) {
    // warmup
    f();
    let t = Instant::now();
    let reps = 200;
    for _ in 0..reps { f(); }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    println!("{name}: {:.3} ms  ({:.1} GFLOP/s)", dt * 1e3, flops / dt / 1e9);
}

fn main() {
    let (m, k, n) = (640usize, 64usize, 256usize);
    let a = vec![0.5f32; m * k];
    let b = vec![0.25f32; k * n];
    let g = vec![0.125f32; m * n];
    let flops = (2 * m * k * n) as f64;

    let mut c = vec![0f32; m * n];
    bench("nn (640x64 @ 64x256)", || { c.iter_mut().for_each(|x| *x = 0.0); matmul_nn(&a, &b, m, k, n, &mut c); }, flops);

    let mut da = vec![0f32; m * k];
    bench("nt (dG @ B^T -> dA)", || { da.iter_mut().for_each(|x| *x = 0.0); matmul_nt(&g, &b, m, n, k, &mut da); }, flops);

    let mut db = vec![0f32; k * n];
    bench("tn (A^T @ dG -> dB)", || { db.iter_mut().for_each(|x| *x = 0.0); matmul_tn(&a, &g, m, k, n, &mut db); }, flops);

    // attention-shaped bmm pieces: (512, 5, 16) batches
    let (bs, l, hd) = (512usize, 5usize, 16usize);
    let q = vec![0.1f32; bs * l * hd];
    let kk = vec![0.2f32; bs * hd * l];
    let mut s = vec![0f32; bs * l * l];
    bench("bmm scores 512x(5x16 @ 16x5)", || {
        s.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..bs {
            matmul_nn(&q[i*l*hd..(i+1)*l*hd], &kk[i*hd*l..(i+1)*hd*l], l, hd, l, &mut s[i*l*l..(i+1)*l*l]);
        }
    }, (2 * bs * l * hd * l) as f64);
}
