mod common;

use common::{modal_step, paper_poles};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steamflow_core::plant::{build_transfer_function, paper_plant, DEFAULT_SAMPLE_TIME};
use steamflow_core::ActuatorParams;

/// Fourth-order ODE `y'''' + 9 y''' + 25 y'' + 31 y' + 30 y = 0.75 u` in
/// phase variables, integrated with classical RK4.
fn rk4_response(u: &[f64], sample_time: f64, substeps: usize) -> Vec<f64> {
    let f = |x: &[f64; 4], u: f64| -> [f64; 4] {
        [x[1], x[2], x[3], 0.75 * u - 30.0 * x[0] - 31.0 * x[1] - 25.0 * x[2] - 9.0 * x[3]]
    };
    let h = sample_time / substeps as f64;
    let mut x = [0.0; 4];
    let mut out = Vec::with_capacity(u.len() + 1);
    out.push(x[0]);
    for &uk in u {
        for _ in 0..substeps {
            let k1 = f(&x, uk);
            let x2: [f64; 4] = std::array::from_fn(|i| x[i] + 0.5 * h * k1[i]);
            let k2 = f(&x2, uk);
            let x3: [f64; 4] = std::array::from_fn(|i| x[i] + 0.5 * h * k2[i]);
            let k3 = f(&x3, uk);
            let x4: [f64; 4] = std::array::from_fn(|i| x[i] + h * k3[i]);
            let k4 = f(&x4, uk);
            for i in 0..4 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(x[0]);
    }
    out
}

fn simulate(u: &[f64]) -> Vec<f64> {
    let mut plant = paper_plant(&ActuatorParams::default(), DEFAULT_SAMPLE_TIME).unwrap();
    let mut y = vec![plant.output()];
    for &uk in u {
        y.push(plant.step(uk).unwrap());
    }
    y
}

#[test]
fn default_parameters_give_the_published_transfer_function() {
    let tf = build_transfer_function(&ActuatorParams::default()).unwrap();
    assert_eq!(tf.numerator, vec![0.75]);
    assert_eq!(tf.denominator, vec![1.0, 9.0, 25.0, 31.0, 30.0]);
}

#[test]
fn poles_used_by_the_oracle_are_roots_of_the_denominator() {
    let tf = build_transfer_function(&ActuatorParams::default()).unwrap();
    for p in paper_poles() {
        let v = tf.denominator.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * p + c);
        assert!(v.norm() < 1e-12, "{p}: {v}");
    }
}

#[test]
fn open_loop_step_matches_modal_solution() {
    let n = 600;
    let y = simulate(&vec![1.0; n]);
    let max_err = (0..=n)
        .map(|k| (y[k] - modal_step(k as f64 * DEFAULT_SAMPLE_TIME)).abs())
        .fold(0.0, f64::max);
    assert!(max_err < 1e-6, "max error {max_err:e}");
    assert!((y[n] - 0.025).abs() < 1e-6, "final value {}", y[n]);
}

#[test]
fn zoh_matches_fine_rk4_for_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let u: Vec<f64> = (0..200).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let exact = simulate(&u);
        let rk4 = rk4_response(&u, DEFAULT_SAMPLE_TIME, 100);
        let err = exact.iter().zip(&rk4).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err:e}");
    }
}

#[test]
fn response_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = (0..150).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let b: Vec<f64> = (0..150).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.5 * x - 0.5 * y).collect();
    let (ya, yb, yc) = (simulate(&a), simulate(&b), simulate(&combo));
    for k in 0..ya.len() {
        let expected = 2.5 * ya[k] - 0.5 * yb[k];
        assert!((yc[k] - expected).abs() < 1e-12 * (1.0 + expected.abs()), "k = {k}");
    }
}

#[test]
fn free_response_decays() {
    let mut plant = paper_plant(&ActuatorParams::default(), DEFAULT_SAMPLE_TIME).unwrap();
    for _ in 0..10 {
        plant.step(100.0).unwrap();
    }
    let start = plant.state().norm();
    for _ in 0..1000 {
        plant.step(0.0).unwrap();
    }
    assert!(plant.state().norm() < 1e-6 * start);
    assert!((plant.dc_gain().unwrap() - 0.025).abs() < 1e-12);
}
