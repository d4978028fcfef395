use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signals::{StepMetrics, TrackMetrics};

use super::{run_scenario, train_bundle, BundleConfig, ControllerKind, RunMetrics, Scenario};

/// Offset that keeps the noise stream of a seed apart from its training stream.
const NOISE_SEED_OFFSET: u64 = 0x6a09_e667_f3bc_c908;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioFamily {
    Step,
    StepNoise,
    Sine,
    SineNoise,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 4] = [Self::Step, Self::StepNoise, Self::Sine, Self::SineNoise];

    pub fn title(self) -> &'static str {
        match self {
            Self::Step => "Step reference",
            Self::StepNoise => "Step reference with sensor noise",
            Self::Sine => "Sine reference",
            Self::SineNoise => "Sine reference with sensor noise",
        }
    }

    pub fn is_step(self) -> bool {
        matches!(self, Self::Step | Self::StepNoise)
    }

    pub fn scenario(self, controller: ControllerKind, seed: u64) -> Scenario {
        let sc = if self.is_step() {
            Scenario::step(controller)
        } else {
            Scenario::sine(controller)
        };
        let sc = Scenario { seed, ..sc };
        match self {
            Self::StepNoise | Self::SineNoise => sc.with_noise(seed.wrapping_add(NOISE_SEED_OFFSET)),
            _ => sc,
        }
    }

    /// Published values: rise, overshoot, settling, steady state for step
    /// tables; the tracked peak for sine tables.
    pub fn published(self, controller: ControllerKind) -> RunMetrics {
        let step = |rise_time, overshoot_pct, settling_time| {
            RunMetrics::Step(StepMetrics {
                rise_time,
                overshoot_pct,
                settling_time,
                steady_state: 1.0,
            })
        };
        let peak = |peak_value| RunMetrics::Track(TrackMetrics { peak_value });
        use ControllerKind::*;
        match (self, controller) {
            (Self::Step, NarmaL2) => step(2.4, 6.0, 11.0),
            (Self::Step, ModelReference) => step(2.45, 1.02, 9.0),
            (Self::Step, NnPredictive) => step(2.45, 13.33, 14.3),
            (Self::StepNoise, NarmaL2) => step(2.6, 8.33, 19.0),
            (Self::StepNoise, ModelReference) => step(2.75, 3.33, 18.0),
            (Self::StepNoise, NnPredictive) => step(2.75, 15.0, 25.0),
            (Self::Sine, NarmaL2) => peak(3.0),
            (Self::Sine, ModelReference) => peak(3.8),
            (Self::Sine, NnPredictive) => peak(2.6),
            (Self::SineNoise, NarmaL2) => peak(2.8),
            (Self::SineNoise, ModelReference) => peak(3.7),
            (Self::SineNoise, NnPredictive) => peak(2.3),
        }
    }
}

/// Per-seed outcomes of one controller in one scenario family.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub controller: ControllerKind,
    /// One entry per seed; `Err` holds why the cell failed.
    pub per_seed: Vec<Cell>,
    /// Median of each metric over the seeds that produced it.
    pub median: Option<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub family: ScenarioFamily,
    pub rows: Vec<Row>,
}

/// Identification quality of one seed, as fractions of the output range.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedDiagnostics {
    pub seed: u64,
    pub narx_validation: Option<f64>,
    pub narx_free_run: Option<f64>,
    pub narma_l2_validation: Option<f64>,
    pub failures: Vec<(ControllerKind, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seeds: Vec<u64>,
    pub tables: Vec<Table>,
    pub diagnostics: Vec<SeedDiagnostics>,
}

/// Summary of a cell used by the medians: the same fields as the metrics.
pub type MetricSummary = RunMetrics;

/// Trains the three controllers for every seed and runs the four scenario
/// families. Seeds run in parallel; the report does not depend on
/// scheduling.
pub fn reproduce_tables(cfg: &BundleConfig, seeds: &[u64]) -> Result<Report> {
    if seeds.len() < 3 {
        return Err(Error::param("seeds", "at least three seeds are required"));
    }
    let per_seed: Vec<(SeedDiagnostics, Vec<Cell>)> = seeds
        .par_iter()
        .map(|&seed| seed_cells(cfg, seed))
        .collect();

    let tables = ScenarioFamily::ALL
        .iter()
        .enumerate()
        .map(|(fi, &family)| Table {
            family,
            rows: ControllerKind::ALL
                .iter()
                .enumerate()
                .map(|(ci, &controller)| {
                    let cells: Vec<_> = per_seed.iter().map(|(_, c)| c[fi * 3 + ci].clone()).collect();
                    Row {
                        controller,
                        median: median_metrics(&cells),
                        per_seed: cells,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(Report {
        seeds: seeds.to_vec(),
        tables,
        diagnostics: per_seed.into_iter().map(|(d, _)| d).collect(),
    })
}

type Cell = std::result::Result<RunMetrics, String>;

fn seed_cells(cfg: &BundleConfig, seed: u64) -> (SeedDiagnostics, Vec<Cell>) {
    let training = match train_bundle(cfg, seed) {
        Ok(t) => t,
        Err(e) => {
            let failures = ControllerKind::ALL.iter().map(|&k| (k, e.to_string())).collect();
            let cells = vec![Err(format!("training: {e}")); 12];
            return (
                SeedDiagnostics {
                    seed,
                    narx_validation: None,
                    narx_free_run: None,
                    narma_l2_validation: None,
                    failures,
                },
                cells,
            );
        }
    };
    let bundle = &training.bundle;
    let jobs: Vec<(ScenarioFamily, ControllerKind)> = ScenarioFamily::ALL
        .iter()
        .flat_map(|&f| ControllerKind::ALL.iter().map(move |&k| (f, k)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(family, kind)| {
            let outcome = run_scenario(&family.scenario(kind, seed), bundle).map_err(|e| e.to_string()).and_then(|rec| {
                if let Some(fault) = &rec.fault {
                    return Err(format!("controller fault at step {}: {}", fault.step, fault.reason));
                }
                rec.metrics.clone().unwrap_or_else(|| Err("no metrics".into()))
            });
            outcome
        })
        .collect::<Vec<_>>();
    (
        SeedDiagnostics {
            seed,
            narx_validation: training.narx_validation_fraction,
            narx_free_run: training.narx_free_run_fraction,
            narma_l2_validation: training.narma_l2_validation_fraction,
            failures: bundle.failures.clone(),
        },
        cells,
    )
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn median_metrics(cells: &[Cell]) -> Option<RunMetrics> {
    let ok: Vec<&RunMetrics> = cells.iter().filter_map(|c| c.as_ref().ok()).collect();
    let first = *ok.first()?;
    match first {
        RunMetrics::Step(_) => {
            let steps: Vec<&StepMetrics> = ok
                .iter()
                .filter_map(|m| match m {
                    RunMetrics::Step(s) => Some(s),
                    _ => None,
                })
                .collect();
            let col = |f: fn(&StepMetrics) -> f64| median(&mut steps.iter().map(|s| f(s)).collect::<Vec<_>>());
            Some(RunMetrics::Step(StepMetrics {
                rise_time: col(|s| s.rise_time)?,
                overshoot_pct: col(|s| s.overshoot_pct)?,
                settling_time: col(|s| s.settling_time)?,
                steady_state: col(|s| s.steady_state)?,
            }))
        }
        RunMetrics::Track(_) => {
            let mut peaks: Vec<f64> = ok
                .iter()
                .filter_map(|m| match m {
                    RunMetrics::Track(t) => Some(t.peak_value),
                    _ => None,
                })
                .collect();
            Some(RunMetrics::Track(TrackMetrics {
                peak_value: median(&mut peaks)?,
            }))
        }
    }
}

/// Pulls one metric out of a cell.
type Extract = fn(&RunMetrics) -> Option<f64>;

impl Report {
    pub fn table(&self, family: ScenarioFamily) -> &Table {
        self.tables.iter().find(|t| t.family == family).expect("every family is reported")
    }

    pub fn median(&self, family: ScenarioFamily, controller: ControllerKind) -> Option<RunMetrics> {
        self.table(family).rows.iter().find(|r| r.controller == controller)?.median
    }

    pub fn median_step(&self, family: ScenarioFamily, controller: ControllerKind) -> Option<StepMetrics> {
        match self.median(family, controller)? {
            RunMetrics::Step(s) => Some(s),
            RunMetrics::Track(_) => None,
        }
    }

    pub fn median_peak(&self, family: ScenarioFamily, controller: ControllerKind) -> Option<f64> {
        match self.median(family, controller)? {
            RunMetrics::Track(t) => Some(t.peak_value),
            RunMetrics::Step(_) => None,
        }
    }

    /// Plain-text report with one block per scenario family.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "Closed-loop performance over seeds {}", seeds.join(", "));
        for table in &self.tables {
            let _ = writeln!(out, "\n== {} ==", table.family.title());
            let metrics: &[(&str, Extract)] = if table.family.is_step() {
                &[
                    ("Rise time (s)", |m| step(m).map(|s| s.rise_time)),
                    ("Overshoot (%)", |m| step(m).map(|s| s.overshoot_pct)),
                    ("Settling time (s)", |m| step(m).map(|s| s.settling_time)),
                    ("Steady state", |m| step(m).map(|s| s.steady_state)),
                ]
            } else {
                &[("Peak value", |m| match m {
                    RunMetrics::Track(t) => Some(t.peak_value),
                    _ => None,
                })]
            };
            if !table.family.is_step() {
                let _ = writeln!(out, "Sine reference peak: 4");
            }
            for row in &table.rows {
                let _ = writeln!(out, "{}", row.controller.label());
                let published = table.family.published(row.controller);
                let mut header = format!("  {:<18}", "");
                for s in &seeds {
                    let _ = write!(header, " {:>10}", format!("seed {s}"));
                }
                let _ = writeln!(out, "{header} {:>10} {:>10}", "median", "paper");
                for (name, get) in metrics {
                    let mut line = format!("  {name:<18}");
                    for cell in &row.per_seed {
                        let text = match cell {
                            Ok(m) => fmt_value(get(m)),
                            Err(_) => "failed".to_string(),
                        };
                        let _ = write!(line, " {text:>10}");
                    }
                    let median = fmt_value(row.median.as_ref().and_then(get));
                    let _ = writeln!(line, " {median:>10} {:>10}", fmt_value(get(&published)));
                    out.push_str(&line);
                }
                for (seed, cell) in self.seeds.iter().zip(&row.per_seed) {
                    if let Err(reason) = cell {
                        let _ = writeln!(out, "  seed {seed} failed: {reason}");
                    }
                }
            }
        }
        let _ = writeln!(out, "\n== Identification (RMSE as % of output range) ==");
        let _ = writeln!(out, "  {:>8} {:>12} {:>12} {:>12}", "seed", "NARX", "NARX free", "NARMA-L2");
        for d in &self.diagnostics {
            let pct = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |v| format!("{:.4}", 100.0 * v));
            let _ = writeln!(
                out,
                "  {:>8} {:>12} {:>12} {:>12}",
                d.seed,
                pct(d.narx_validation),
                pct(d.narx_free_run),
                pct(d.narma_l2_validation)
            );
            for (kind, reason) in &d.failures {
                let _ = writeln!(out, "  seed {} {}: {}", d.seed, kind.label(), reason);
            }
        }
        out
    }
}

fn step(m: &RunMetrics) -> Option<&StepMetrics> {
    match m {
        RunMetrics::Step(s) => Some(s),
        RunMetrics::Track(_) => None,
    }
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.3}"),
        Some(v) => format!("{v}"),
        None => "-".to_string(),
    }
}
