use crate::error::{Error, Result};

/// Step-response characteristics. Times are measured from the first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub rise_time: f64,
    pub overshoot_pct: f64,
    pub settling_time: f64,
    pub steady_state: f64,
}

/// Thresholds for [`step_metrics_with`]. Defaults: 10-90 % rise, ±2 % band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetricsConfig {
    pub rise_low: f64,
    pub rise_high: f64,
    pub settle_band: f64,
    /// Fraction of trailing samples averaged for the steady-state value.
    pub tail_fraction: f64,
}

impl Default for StepMetricsConfig {
    fn default() -> Self {
        Self {
            rise_low: 0.1,
            rise_high: 0.9,
            settle_band: 0.02,
            tail_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackMetrics {
    pub peak_value: f64,
}

pub fn step_metrics(t: &[f64], y: &[f64], target: f64) -> Result<StepMetrics> {
    step_metrics_with(t, y, target, &StepMetricsConfig::default())
}

pub fn step_metrics_with(t: &[f64], y: &[f64], target: f64, cfg: &StepMetricsConfig) -> Result<StepMetrics> {
    if t.len() != y.len() {
        return Err(Error::Dimension {
            expected: t.len(),
            actual: y.len(),
        });
    }
    if t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("t", "time stamps must be strictly increasing"));
    }
    if y.iter().any(|v| !v.is_finite()) || !target.is_finite() {
        return Err(Error::NonFiniteData);
    }

    let tail = ((y.len() as f64 * cfg.tail_fraction).ceil() as usize).clamp(1, y.len());
    let steady_state = y[y.len() - tail..].iter().sum::<f64>() / tail as f64;
    if steady_state == 0.0 {
        return Err(Error::MetricUndefined {
            metric: "steady_state",
            reason: "response settles at zero".into(),
        });
    }
    // work on a rising response
    let sign = steady_state.signum();
    let ss = steady_state.abs();
    let yy: Vec<f64> = y.iter().map(|v| v * sign).collect();
    let t0 = t[0];

    let first_crossing = |level: f64, metric: &'static str| -> Result<f64> {
        let k = yy.iter().position(|&v| v >= level).ok_or_else(|| Error::MetricUndefined {
            metric,
            reason: format!("response never reaches {level}"),
        })?;
        if k == 0 {
            return Ok(0.0);
        }
        let frac = (level - yy[k - 1]) / (yy[k] - yy[k - 1]);
        Ok(t[k - 1] + frac * (t[k] - t[k - 1]) - t0)
    };
    let rise_time = first_crossing(cfg.rise_high * ss, "rise_time")? - first_crossing(cfg.rise_low * ss, "rise_time")?;

    let peak = yy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = (100.0 * (peak - ss) / ss).max(0.0);

    let band = cfg.settle_band * ss;
    let settling_time = match yy.iter().rposition(|&v| (v - ss).abs() > band) {
        None => 0.0,
        Some(k) if k + 1 == yy.len() => {
            return Err(Error::MetricUndefined {
                metric: "settling_time",
                reason: "response is outside the settling band at the final sample".into(),
            })
        }
        Some(k) => {
            let edge = if yy[k] > ss { ss + band } else { ss - band };
            let frac = (edge - yy[k]) / (yy[k + 1] - yy[k]);
            t[k] + frac * (t[k + 1] - t[k]) - t0
        }
    };

    Ok(StepMetrics {
        rise_time,
        overshoot_pct,
        settling_time,
        steady_state,
    })
}

/// Peak of the second half of the run, past the start-up transient.
pub fn track_metrics(y: &[f64]) -> Result<TrackMetrics> {
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let peak_value = y[y.len() / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TrackMetrics { peak_value })
}
