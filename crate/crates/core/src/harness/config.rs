use crate::error::{Error, Result};
use crate::signals::ReferenceKind;

use super::{Scenario, SINE_DURATION, STEP_DURATION};

const KEYS: [&str; 13] = [
    "controller",
    "reference",
    "amplitude",
    "start_time",
    "frequency",
    "phase",
    "noise",
    "noise_amplitude",
    "noise_correlation_time",
    "noise_seed",
    "duration",
    "sample_time",
    "seed",
];

/// Keys accepted by [`parse_scenario_config`].
pub fn scenario_config_keys() -> &'static [&'static str] {
    &KEYS
}

/// Applies flat `key = value` lines on top of `base`. Blank lines and `#`
/// comments are ignored; unknown or repeated keys are rejected. Switching
/// the reference kind without a `duration` picks that kind's default length.
pub fn parse_scenario_config(text: &str, base: Scenario) -> Result<Scenario> {
    let mut sc = base;
    let mut seen: Vec<&str> = vec![];
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: line_no, reason };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let key = *KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(format!("unknown key `{key}`")))?;
        if seen.contains(&key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        seen.push(key);
        let real = || value.parse::<f64>().map_err(|_| err(format!("`{key}` expects a number, got `{value}`")));
        let int = || value.parse::<u64>().map_err(|_| err(format!("`{key}` expects an unsigned integer, got `{value}`")));
        match key {
            "controller" => sc.controller = value.parse().map_err(|e: Error| err(e.to_string()))?,
            "reference" => {
                sc.reference.kind = match value {
                    "step" => ReferenceKind::Step,
                    "sine" => ReferenceKind::Sine,
                    _ => return Err(err(format!("reference must be `step` or `sine`, got `{value}`"))),
                }
            }
            "amplitude" => sc.reference.amplitude = real()?,
            "start_time" => sc.reference.start_time = real()?,
            "frequency" => sc.reference.frequency = real()?,
            "phase" => sc.reference.phase = real()?,
            "noise" => {
                sc.noise.enabled = match value {
                    "true" | "on" | "1" => true,
                    "false" | "off" | "0" => false,
                    _ => return Err(err(format!("noise must be true or false, got `{value}`"))),
                }
            }
            "noise_amplitude" => sc.noise.amplitude = real()?,
            "noise_correlation_time" => sc.noise.correlation_time = real()?,
            "noise_seed" => sc.noise.seed = int()?,
            "duration" => sc.duration = real()?,
            "sample_time" => sc.sample_time = real()?,
            "seed" => sc.seed = int()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    if seen.contains(&"reference") && !seen.contains(&"duration") && sc.reference.kind != base.reference.kind {
        sc.duration = match sc.reference.kind {
            ReferenceKind::Step => STEP_DURATION,
            ReferenceKind::Sine => SINE_DURATION,
        };
    }
    sc.validate()?;
    Ok(sc)
}
