use std::sync::OnceLock;

use steamflow_core::control::ReferenceModel;
use steamflow_core::harness::{run_scenario, train_bundle, BundleConfig, BundleTraining, ControllerKind, Scenario};
use steamflow_core::signals::{noise_sequence, ReferenceSignal};

fn trained(seed: u64) -> &'static BundleTraining {
    static SEED0: OnceLock<BundleTraining> = OnceLock::new();
    static SEED1: OnceLock<BundleTraining> = OnceLock::new();
    let cell = match seed {
        0 => &SEED0,
        1 => &SEED1,
        _ => unreachable!(),
    };
    cell.get_or_init(|| train_bundle(&BundleConfig::default(), seed).unwrap())
}

#[test]
fn all_controllers_train() {
    let tr = trained(0);
    assert!(tr.bundle.failures.is_empty(), "{:?}", tr.bundle.failures);
}

#[test]
fn zero_reference_keeps_the_loop_at_rest() {
    let bundle = &trained(0).bundle;
    for kind in ControllerKind::ALL {
        let sc = Scenario {
            reference: ReferenceSignal::step(0.0),
            ..Scenario::step(kind)
        };
        let rec = run_scenario(&sc, bundle).unwrap();
        let y_max = rec.y_true.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let u_max = rec.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(y_max < 0.02, "{kind}: |y| up to {y_max}");
        assert!(u_max < 1.0, "{kind}: |u| up to {u_max}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let bundle = &trained(0).bundle;
    for kind in ControllerKind::ALL {
        let sc = Scenario::step(kind).with_noise(4);
        assert_eq!(run_scenario(&sc, bundle).unwrap(), run_scenario(&sc, bundle).unwrap());
    }
}

#[test]
fn noise_only_touches_the_measurement() {
    let sc = Scenario::step(ControllerKind::ModelReference);
    let clean = run_scenario(&sc, &trained(0).bundle).unwrap();
    assert_eq!(clean.y_true, clean.y_measured);

    // the noise sequence depends on the noise seed only, not on the controllers
    let noisy = sc.with_noise(9);
    let expected = noise_sequence(&noisy.noise, noisy.sample_time, noisy.steps());
    for seed in [0, 1] {
        let rec = run_scenario(&noisy, &trained(seed).bundle).unwrap();
        for (k, e) in expected.iter().enumerate().take(rec.len()) {
            let n = rec.y_measured[k] - rec.y_true[k];
            assert!((n - e).abs() < 1e-12, "seed {seed}, k {k}");
        }
    }
    let other = run_scenario(&sc.with_noise(10), &trained(0).bundle).unwrap();
    let first = run_scenario(&noisy, &trained(0).bundle).unwrap();
    assert_ne!(first.y_measured, other.y_measured);
}

#[test]
fn training_seed_changes_controllers() {
    let a = &trained(0).bundle;
    let b = &trained(1).bundle;
    assert_ne!(a.mrc.as_ref().unwrap().net, b.mrc.as_ref().unwrap().net);
    assert_ne!(a.narx.as_ref().unwrap().net, b.narx.as_ref().unwrap().net);
}

#[test]
fn truncated_runs_agree_on_their_common_prefix() {
    let bundle = &trained(0).bundle;
    for kind in ControllerKind::ALL {
        let long = Scenario::sine(kind).with_noise(2);
        let short = Scenario { duration: 10.0, ..long };
        let a = run_scenario(&long, bundle).unwrap();
        let b = run_scenario(&short, bundle).unwrap();
        assert_eq!(b.len(), 101);
        assert_eq!(&a.u[..b.len()], &b.u[..]);
        assert_eq!(&a.y_true[..b.len()], &b.y_true[..]);
    }
}

#[test]
fn long_noisy_runs_stay_bounded() {
    let bundle = &trained(0).bundle;
    for kind in ControllerKind::ALL {
        let sc = Scenario {
            duration: 1000.0,
            ..Scenario::sine(kind).with_noise(3)
        };
        let rec = run_scenario(&sc, bundle).unwrap();
        assert!(rec.fault.is_none(), "{kind}: {:?}", rec.fault);
        assert!(rec.len() > 10_000);
        let (lo, hi) = bundle.u_limits;
        assert!(rec.u.iter().all(|u| u.is_finite() && (lo..=hi).contains(u)), "{kind}");
        assert!(rec.y_true.iter().all(|y| y.is_finite() && y.abs() < 20.0), "{kind}");
    }
}

#[test]
fn model_reference_loop_follows_the_reference_model() {
    let bundle = &trained(0).bundle;
    let sc = Scenario::step(ControllerKind::ModelReference);
    let rec = run_scenario(&sc, bundle).unwrap();
    let rm = ReferenceModel::with_defaults(sc.sample_time).unwrap();
    // the reference model answers r(k) at sample k + 1
    let ym = rm.simulate(&rec.r);
    let n = rec.len() - 1;
    let mse = (0..n).map(|k| (rec.y_true[k + 1] - ym[k]).powi(2)).sum::<f64>() / n as f64;
    assert!(mse.sqrt() < 0.05, "rmse {}", mse.sqrt());
    let m = rec.step_metrics().unwrap();
    assert!((m.steady_state - 1.0).abs() <= 0.02, "{m:?}");
}
