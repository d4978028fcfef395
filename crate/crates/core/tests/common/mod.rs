#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steamflow_core::neural::Mlp;

/// Worst relative error `|g - fd| / (|g| + |fd|)` (vector norms) between
/// the analytic parameter gradient and central differences over `count`
/// seeded random networks, each with 1 or 2 hidden layers.
pub fn worst_gradient_error(count: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let inputs = rng.gen_range(1..=8);
        let mut sizes = vec![inputs, rng.gen_range(2..=10)];
        if rng.gen_bool(0.5) {
            sizes.push(rng.gen_range(2..=6));
        }
        sizes.push(rng.gen_range(1..=2));
        let net = Mlp::new(&sizes, seed);
        let x: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let target: Vec<f64> = (0..net.output_size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let analytic = net.gradient(&x, &target).unwrap();

        let loss = |p: &[f64]| {
            let mut n = net.clone();
            n.set_params(p);
            let y = n.forward(&x).unwrap();
            0.5 * y.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let p0 = net.params();
        let h = 1e-6;
        let fd: Vec<f64> = (0..p0.len())
            .map(|i| {
                let mut up = p0.clone();
                let mut dn = p0.clone();
                up[i] += h;
                dn[i] -= h;
                (loss(&up) - loss(&dn)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = norm(&analytic) + norm(&fd);
        worst = worst.max(if scale == 0.0 { 0.0 } else { diff / scale });
    }
    worst
}

/// Poles of `s^4 + 9 s^3 + 25 s^2 + 31 s + 30 = (s + 5)(s + 3)(s^2 + s + 2)`.
pub fn paper_poles() -> [Complex64; 4] {
    let w = 7f64.sqrt() / 2.0;
    [
        Complex64::new(-5.0, 0.0),
        Complex64::new(-3.0, 0.0),
        Complex64::new(-0.5, w),
        Complex64::new(-0.5, -w),
    ]
}

/// Unit-step response by partial fractions of `0.75 / (s D(s))`.
pub fn modal_step(t: f64) -> f64 {
    let poles = paper_poles();
    let mut y = Complex64::new(0.75 / 30.0, 0.0);
    for (i, &p) in poles.iter().enumerate() {
        let mut dprime = Complex64::new(1.0, 0.0);
        for (j, &q) in poles.iter().enumerate() {
            if i != j {
                dprime *= p - q;
            }
        }
        y += 0.75 / (p * dprime) * (p * t).exp();
    }
    y.re
}
