// Throwaway throughput probe for kernel sizing decisions.
use museface::nn::kernel::{matmul_nn, matmul_nt, matmul_tn};
use std::time::Instant;

fn bench(name: &str, m: usize, k: usize, n: usize, reps: usize) {
    let a: Vec<f32> = (0..m * k).map(|i| (i as f32 * 0.001).sin()).collect();
    let b: Vec<f32> = (0..k * n).map(|i| (i as f32 * 0.002).cos()).collect();
    let bt: Vec<f32> = (0..n * k).map(|i| (i as f32 * 0.002).cos()).collect();
    let at: Vec<f32> = (0..k * m).map(|i| (i as f32 * 0.001).sin()).collect();
    let mut c = vec![0.0f32; m * n];

    let t = Instant::now();
    for _ in 0..reps { matmul_nn(&a, &b, &mut c, m, k, n); }
    let dt = t.elapsed().as_secs_f64();
    let gmac = (m * k * n * reps) as f64 / dt / 1e9;
    println!("{name} nn  {m}x{k}x{n}: {gmac:.2} GMAC/s");

    let t = Instant::now();
    for _ in 0..reps { matmul_nt(&a, &bt, &mut c, m, k, n); }
    let dt = t.elapsed().as_secs_f64();
    let gmac = (m * k * n * reps) as f64 / dt / 1e9;
    println!("{name} nt  {m}x{k}x{n}: {gmac:.2} GMAC/s");

    let t = Instant::now();
    for _ in 0..reps { matmul_tn(&at, &b, &mut c, m, k, n); }
    let dt = t.elapsed().as_secs_f64();
    let gmac = (m * k * n * reps) as f64 / dt / 1e9;
    println!("{name} tn  {m}x{k}x{n}: {gmac:.2} GMAC/s");
    if c[0] == 12345.0 { println!("sink"); }
}

fn main() {
    bench("conv stem", 32, 28 * 3, 128 * 39, 20);
    bench("conv mid", 128, 128 * 3, 128 * 10, 20);
    bench("conv deep", 512, 512 * 3, 128 * 3, 20);
    bench("fc flatten", 768, 1536, 128, 20);
    bench("unet up2", 256, 384 * 3, 128, 50);
}
