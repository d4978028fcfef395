use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random piecewise-constant input used to excite the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationConfig {
    pub u_min: f64,
    pub u_max: f64,
    /// Shortest hold, s.
    pub interval_min: f64,
    /// Longest hold, s.
    pub interval_max: f64,
    pub total_segments: usize,
    pub sample_time: f64,
    pub seed: u64,
}

impl Default for ExcitationConfig {
    /// Inputs in `[1, 2]`, holds of 15 to 30 s, 40 segments at 0.1 s.
    fn default() -> Self {
        Self {
            u_min: 1.0,
            u_max: 2.0,
            interval_min: 15.0,
            interval_max: 30.0,
            total_segments: 40,
            sample_time: 0.1,
            seed: 0,
        }
    }
}

impl ExcitationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min <= self.u_max) {
            return Err(Error::param("u_min", "need finite u_min <= u_max"));
        }
        if !(self.interval_min > 0.0 && self.interval_min <= self.interval_max && self.interval_max.is_finite()) {
            return Err(Error::param("interval_min", "need 0 < interval_min <= interval_max"));
        }
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(Error::param("sample_time", "must be > 0"));
        }
        if self.total_segments == 0 {
            return Err(Error::param("total_segments", "must be at least 1"));
        }
        Ok(())
    }

    /// Hold length bounds in samples.
    pub fn hold_samples(&self) -> (usize, usize) {
        let lo = (self.interval_min / self.sample_time).round().max(1.0) as usize;
        let hi = (self.interval_max / self.sample_time).round().max(1.0) as usize;
        (lo, hi.max(lo))
    }
}

/// One constant-input segment: amplitude and hold length in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub amplitude: f64,
    pub samples: usize,
}

pub(crate) fn generate_segments(cfg: &ExcitationConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.hold_samples();
    Ok((0..cfg.total_segments)
        .map(|_| {
            let amplitude = if cfg.u_min == cfg.u_max {
                cfg.u_min
            } else {
                rng.gen_range(cfg.u_min..=cfg.u_max)
            };
            let samples = rng.gen_range(lo..=hi);
            Segment { amplitude, samples }
        })
        .collect())
}

/// Piecewise-constant excitation, one value per sample.
pub fn generate_excitation(cfg: &ExcitationConfig) -> Result<Vec<f64>> {
    Ok(generate_segments(cfg)?
        .into_iter()
        .flat_map(|s| std::iter::repeat_n(s.amplitude, s.samples))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_lengths(u: &[f64]) -> Vec<usize> {
        let mut runs = vec![];
        let mut len = 1;
        for w in u.windows(2) {
            if w[1] == w[0] {
                len += 1;
            } else {
                runs.push(len);
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    #[test]
    fn degenerate_range_is_constant() {
        let cfg = ExcitationConfig {
            u_min: 1.5,
            u_max: 1.5,
            ..Default::default()
        };
        assert!(generate_excitation(&cfg).unwrap().iter().all(|&u| u == 1.5));
    }

    #[test]
    fn defaults_respect_ranges() {
        let cfg = ExcitationConfig {
            seed: 11,
            ..Default::default()
        };
        let segs = generate_segments(&cfg).unwrap();
        assert!(segs.iter().all(|s| (1.0..=2.0).contains(&s.amplitude)));
        assert!(segs.iter().all(|s| (150..=300).contains(&s.samples)));
        let u = generate_excitation(&cfg).unwrap();
        assert_eq!(u.len(), segs.iter().map(|s| s.samples).sum::<usize>());
        // adjacent segments coincide with probability zero
        assert!(run_lengths(&u).iter().all(|&r| (150..=300).contains(&r)));
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let a = ExcitationConfig { seed: 1, ..Default::default() };
        let b = ExcitationConfig { seed: 2, ..Default::default() };
        assert_eq!(generate_excitation(&a).unwrap(), generate_excitation(&a).unwrap());
        assert_ne!(generate_excitation(&a).unwrap(), generate_excitation(&b).unwrap());
    }

    /// Chi-square upper tail via the Wilson-Hilferty normal approximation.
    fn chi_square_p(stat: f64, dof: f64) -> f64 {
        let z = ((stat / dof).powf(1.0 / 3.0) - (1.0 - 2.0 / (9.0 * dof))) / (2.0 / (9.0 * dof)).sqrt();
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }

    fn erfc(x: f64) -> f64 {
        // Numerical Recipes erfcc, relative error < 1.2e-7
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
        if x >= 0.0 {
            r
        } else {
            2.0 - r
        }
    }

    #[test]
    fn amplitudes_and_durations_look_uniform() {
        let cfg = ExcitationConfig {
            total_segments: 10_000,
            seed: 99,
            ..Default::default()
        };
        let segs = generate_segments(&cfg).unwrap();
        let bins = 20usize;
        let expected = segs.len() as f64 / bins as f64;
        let chi = |counts: &[usize], expected: &dyn Fn(usize) -> f64| {
            counts.iter().enumerate().map(|(i, &c)| (c as f64 - expected(i)).powi(2) / expected(i)).sum::<f64>()
        };

        let mut amp = vec![0usize; bins];
        let mut dur = vec![0usize; bins];
        for s in &segs {
            amp[(((s.amplitude - 1.0) * bins as f64) as usize).min(bins - 1)] += 1;
            dur[(s.samples - 150) * bins / 151] += 1;
        }
        let dof = (bins - 1) as f64;
        // 151 equally likely hold lengths do not split evenly into the bins
        let per_bin = |i: usize| (0..151usize).filter(|v| v * bins / 151 == i).count() as f64;
        assert!(chi_square_p(chi(&amp, &|_| expected), dof) > 0.001);
        assert!(chi_square_p(chi(&dur, &|i| per_bin(i) / 151.0 * segs.len() as f64), dof) > 0.001);
    }
}
