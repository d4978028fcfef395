use steamflow_core::neural::TrainConfig;
use steamflow_core::plant::paper_plant;
use steamflow_core::sysid::{collect_dataset, identify_narma_l2, identify_narx, Dataset, ExcitationConfig, NarmaL2Config};
use steamflow_core::ActuatorParams;

fn paper_data(seed: u64, segments: usize) -> Dataset {
    let cfg = ExcitationConfig {
        seed,
        total_segments: segments,
        ..ExcitationConfig::default()
    };
    let mut plant = paper_plant(&ActuatorParams::default(), cfg.sample_time).unwrap();
    collect_dataset(&cfg, &mut plant).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn more_data_does_not_hurt_identification() {
    let rmse = |segments| {
        median(
            (0..5)
                .map(|seed| {
                    identify_narx(&paper_data(seed, segments), &TrainConfig::with_seed(seed))
                        .unwrap()
                        .validation_rmse
                })
                .collect(),
        )
    };
    let (single, double) = (rmse(40), rmse(80));
    assert!(double <= 1.1 * single, "40 segments {single:e}, 80 segments {double:e}");
}

#[test]
fn narma_l2_gain_stays_away_from_zero_on_training_data() {
    let data = paper_data(3, 40);
    let id = identify_narma_l2(&data, &TrainConfig::with_seed(3), &NarmaL2Config::default()).unwrap();
    assert!(id.validation_fraction() < 0.01, "{}", id.validation_fraction());
    let m = &id.model;
    let first = m.max_delay();
    let stride = ((data.len() * 4 / 5 - first) / 1000).max(1);
    let mut min_g = f64::INFINITY;
    let mut scanned = 0;
    for k in (first..data.len() * 4 / 5).step_by(stride).take(1000) {
        let y_hist: Vec<f64> = (0..m.output_delays).map(|i| data.y[k - i]).collect();
        let u_hist: Vec<f64> = (1..=m.input_delays).map(|i| data.u[k - i]).collect();
        min_g = min_g.min(m.f_g(&y_hist, &u_hist).1.abs());
        scanned += 1;
    }
    assert_eq!(scanned, 1000);
    assert!(min_g > 1e-3, "min |g| {min_g}");
}
