use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plant::DiscretePlant;

use super::{generate_excitation, ExcitationConfig};

/// Input/output record of the plant. `y[k]` is the output at sample `k`,
/// before `u[k]` is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub sample_time: f64,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, sample_time: f64) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension {
                expected: u.len(),
                actual: y.len(),
            });
        }
        if u.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        if !(sample_time > 0.0) {
            return Err(Error::param("sample_time", "must be > 0"));
        }
        Ok(Self { u, y, sample_time })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn output_range(&self) -> f64 {
        let lo = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,y\n");
        for (k, (u, y)) in self.u.iter().zip(&self.y).enumerate() {
            let _ = writeln!(out, "{:.12e},{:.16e},{:.16e}", k as f64 * self.sample_time, u, y);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "t,u,y" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    reason: "expected header `t,u,y`".into(),
                })
            }
        }
        let (mut t, mut u, mut y) = (vec![], vec![], vec![]);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: format!("expected 3 columns, got {}", fields.len()),
                });
            }
            t.push(fields[0]);
            u.push(fields[1]);
            y.push(fields[2]);
        }
        let sample_time = if t.len() >= 2 { t[1] - t[0] } else { 0.1 };
        Dataset::new(u, y, sample_time)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Drives `plant` (from its current state) with the excitation described by
/// `cfg` and records the response.
pub fn collect_dataset(cfg: &ExcitationConfig, plant: &mut DiscretePlant) -> Result<Dataset> {
    let u = generate_excitation(cfg)?;
    record(plant, u)
}

pub(crate) fn record(plant: &mut DiscretePlant, u: Vec<f64>) -> Result<Dataset> {
    let mut y = Vec::with_capacity(u.len());
    for &uk in &u {
        y.push(plant.output());
        plant.step(uk)?;
    }
    Dataset::new(u, y, plant.sample_time())
}
