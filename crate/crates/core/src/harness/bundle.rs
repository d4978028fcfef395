use std::path::Path;

use crate::control::{
    train_mrc, Controller, MrcConfig, MrcController, NarmaL2Controller, NmpcConfig, NmpcController, ReferenceModel,
    DEFAULT_U_LIMITS,
};
use crate::error::{Error, Result};
use crate::neural::persist::{Document, Section};
use crate::neural::{TrainConfig, DEFAULT_DELAYS, DEFAULT_HIDDEN};
use crate::plant::{paper_plant, ActuatorParams, DEFAULT_SAMPLE_TIME};
use crate::sysid::{
    collect_dataset, identify_narma_l2, identify_narx_with, refine_narx_parallel, Dataset, ExcitationConfig, NarmaL2Config, NarmaL2Model,
    NarxModel,
};

use super::ControllerKind;

/// Everything needed to identify the plant and train the three controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleConfig {
    pub plant: ActuatorParams,
    pub sample_time: f64,
    /// Excitation for the control models. Its seed is replaced by the
    /// training seed.
    pub excitation: ExcitationConfig,
    pub identification: TrainConfig,
    /// Window of the free-run refinement of the plant model, samples; 0 skips it.
    pub refine_window: usize,
    pub refine_epochs: usize,
    pub narma_l2: NarmaL2Config,
    pub mrc: MrcConfig,
    pub mrc_epochs: usize,
    pub reference_zeta: f64,
    pub reference_omega_n: f64,
    pub nmpc: NmpcConfig,
    pub u_limits: (f64, f64),
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self {
            plant: ActuatorParams::default(),
            sample_time: DEFAULT_SAMPLE_TIME,
            excitation: ExcitationConfig {
                u_min: DEFAULT_U_LIMITS.0,
                u_max: DEFAULT_U_LIMITS.1,
                interval_min: 2.0,
                interval_max: 12.0,
                total_segments: 120,
                sample_time: DEFAULT_SAMPLE_TIME,
                seed: 0,
            },
            identification: TrainConfig::default(),
            refine_window: 300,
            refine_epochs: 200,
            narma_l2: NarmaL2Config::default(),
            mrc: MrcConfig {
                hold_range: (20.0, 38.0),
                segments: 24,
                move_weight: 0.1,
                restarts: 4,
                ..MrcConfig::default()
            },
            mrc_epochs: 100,
            reference_zeta: ReferenceModel::DEFAULT_ZETA,
            reference_omega_n: ReferenceModel::DEFAULT_OMEGA_N,
            // the shortest conventional horizon oscillates on this plant
            nmpc: NmpcConfig {
                n2: 15,
                ..NmpcConfig::default()
            },
            u_limits: DEFAULT_U_LIMITS,
        }
    }
}

/// Trained controllers of one seed. A controller whose training failed is
/// absent and its failure is listed.
#[derive(Debug, Clone)]
pub struct ControllerBundle {
    pub plant: ActuatorParams,
    pub sample_time: f64,
    pub narx: Option<NarxModel>,
    pub narma_l2: Option<NarmaL2Model>,
    pub mrc: Option<MrcController>,
    pub nmpc: NmpcConfig,
    pub u_limits: (f64, f64),
    pub failures: Vec<(ControllerKind, String)>,
}

/// Training diagnostics alongside the bundle.
#[derive(Debug, Clone)]
pub struct BundleTraining {
    pub bundle: ControllerBundle,
    pub dataset: Dataset,
    pub narx_validation_fraction: Option<f64>,
    pub narx_free_run_fraction: Option<f64>,
    pub narma_l2_validation_fraction: Option<f64>,
    pub mrc_final_loss: Option<f64>,
}

/// Identifies the plant from seeded excitation and trains all controllers.
/// Only a failure to simulate the data is an error; model failures are
/// recorded in the bundle.
pub fn train_bundle(cfg: &BundleConfig, seed: u64) -> Result<BundleTraining> {
    let mut plant = paper_plant(&cfg.plant, cfg.sample_time)?;
    let excitation = ExcitationConfig {
        seed,
        sample_time: cfg.sample_time,
        ..cfg.excitation
    };
    let data = collect_dataset(&excitation, &mut plant)?;
    let train_cfg = TrainConfig { seed, ..cfg.identification };
    let mut failures = vec![];

    // one initialization: the surrogate is refined in free-run mode below
    let (narx_result, narma_result) = rayon::join(
        || identify_narx_with(&data, &train_cfg, DEFAULT_DELAYS, DEFAULT_DELAYS, DEFAULT_HIDDEN, 1),
        || identify_narma_l2(&data, &train_cfg, &cfg.narma_l2),
    );

    let mut out = BundleTraining {
        bundle: ControllerBundle {
            plant: cfg.plant,
            sample_time: cfg.sample_time,
            narx: None,
            narma_l2: None,
            mrc: None,
            nmpc: NmpcConfig {
                u_limits: cfg.u_limits,
                ..cfg.nmpc
            },
            u_limits: cfg.u_limits,
            failures: vec![],
        },
        dataset: data.clone(),
        narx_validation_fraction: None,
        narx_free_run_fraction: None,
        narma_l2_validation_fraction: None,
        mrc_final_loss: None,
    };
    match narma_result {
        Ok(id) => {
            out.narma_l2_validation_fraction = Some(id.validation_fraction());
            out.bundle.narma_l2 = Some(id.model);
        }
        Err(e) => failures.push((ControllerKind::NarmaL2, e.to_string())),
    }
    match narx_result {
        Ok(mut id) => {
            out.narx_validation_fraction = Some(id.validation_fraction());
            out.narx_free_run_fraction = Some(id.free_run_fraction());
            if cfg.refine_window > 0 {
                let refine_cfg = TrainConfig {
                    epochs: cfg.refine_epochs,
                    ..train_cfg
                };
                match refine_narx_parallel(&id.model, &data, &refine_cfg, cfg.refine_window) {
                    Ok(r) => {
                        out.narx_free_run_fraction = Some(r.validation_free_run_rmse / id.output_range.max(f64::MIN_POSITIVE));
                        id.model = r.model;
                    }
                    Err(e) => {
                        failures.push((ControllerKind::ModelReference, format!("plant model refinement: {e}")));
                        failures.push((ControllerKind::NnPredictive, format!("plant model refinement: {e}")));
                        failures.sort_by_key(|f| f.0);
                        out.bundle.failures = failures;
                        return Ok(out);
                    }
                }
            }
            let rm = ReferenceModel::new(cfg.reference_zeta, cfg.reference_omega_n, cfg.sample_time)?;
            let mrc_train = TrainConfig {
                epochs: cfg.mrc_epochs,
                ..train_cfg
            };
            let mrc_cfg = MrcConfig {
                u_limits: cfg.u_limits,
                ..cfg.mrc
            };
            match train_mrc(&id.model, &rm, &mrc_train, &mrc_cfg) {
                Ok(t) => {
                    out.mrc_final_loss = t.loss_history.last().copied().or(Some(t.initial_loss));
                    let mut ctl = t.controller;
                    ctl.drop_surrogate();
                    out.bundle.mrc = Some(ctl);
                }
                Err(e) => failures.push((ControllerKind::ModelReference, e.to_string())),
            }
            out.bundle.narx = Some(id.model);
        }
        Err(e) => {
            failures.push((ControllerKind::ModelReference, format!("plant model: {e}")));
            failures.push((ControllerKind::NnPredictive, format!("plant model: {e}")));
        }
    }
    failures.sort_by_key(|f| f.0);
    out.bundle.failures = failures;
    Ok(out)
}

impl ControllerBundle {
    /// A fresh controller instance with empty histories.
    pub fn controller(&self, kind: ControllerKind) -> Result<Box<dyn Controller + Send>> {
        let missing = || {
            let reason = self
                .failures
                .iter()
                .find(|f| f.0 == kind)
                .map_or_else(|| "not trained".to_string(), |f| f.1.clone());
            Error::TrainingFailed { epoch: 0, reason: format!("{kind}: {reason}") }
        };
        Ok(match kind {
            ControllerKind::NarmaL2 => {
                let model = self.narma_l2.clone().ok_or_else(missing)?;
                Box::new(NarmaL2Controller::new(model, Some(self.u_limits)))
            }
            ControllerKind::ModelReference => Box::new(self.mrc.clone().ok_or_else(missing)?),
            ControllerKind::NnPredictive => {
                let model = self.narx.clone().ok_or_else(missing)?;
                Box::new(NmpcController::new(model, self.nmpc)?)
            }
        })
    }

    /// Writes one text file per model plus `bundle.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut doc = Document::default();
        let mut s = Section::new("bundle");
        s.set_real("sample_time", self.sample_time)
            .set_real("u_min", self.u_limits.0)
            .set_real("u_max", self.u_limits.1);
        doc.push(s);
        let p = &self.plant;
        let mut s = Section::new("plant");
        s.set_real("inductance", p.inductance)
            .set_real("resistance", p.resistance)
            .set_real("mass", p.mass)
            .set_real("damper", p.damper)
            .set_real("spring", p.spring)
            .set_real("relay_gain", p.relay_gain)
            .set_real("sensor_sensitivity", p.sensor_sensitivity);
        doc.push(s);
        let n = &self.nmpc;
        let mut s = Section::new("nmpc");
        s.set("n1", n.n1)
            .set("n2", n.n2)
            .set("nu", n.nu)
            .set_real("rho", n.rho)
            .set("max_iterations", n.optimizer.max_iterations)
            .set_real("gradient_tolerance", n.optimizer.gradient_tolerance)
            .set("max_backtracks", n.optimizer.max_backtracks);
        doc.push(s);
        let mut s = Section::new("failures");
        for (kind, reason) in &self.failures {
            s.set(kind.as_str(), reason.replace('\n', " "));
        }
        doc.push(s);
        doc.save(&dir.join("bundle.txt"))?;
        if let Some(m) = &self.narx {
            m.to_document().save(&dir.join("narx.txt"))?;
        }
        if let Some(m) = &self.narma_l2 {
            m.to_document().save(&dir.join("narma_l2.txt"))?;
        }
        if let Some(m) = &self.mrc {
            m.to_document().save(&dir.join("model_reference.txt"))?;
        }
        Ok(())
    }

    /// Reads a bundle written by [`ControllerBundle::save`]. Missing model
    /// files leave the corresponding controllers untrained.
    pub fn load(dir: &Path) -> Result<Self> {
        let doc = Document::load(&dir.join("bundle.txt"))?;
        let b = doc.require("bundle")?;
        let p = doc.require("plant")?;
        let n = doc.require("nmpc")?;
        let u_limits = (b.parse("u_min")?, b.parse("u_max")?);
        let plant = ActuatorParams {
            inductance: p.parse("inductance")?,
            resistance: p.parse("resistance")?,
            mass: p.parse("mass")?,
            damper: p.parse("damper")?,
            spring: p.parse("spring")?,
            relay_gain: p.parse("relay_gain")?,
            sensor_sensitivity: p.parse("sensor_sensitivity")?,
        };
        plant.validate()?;
        let mut nmpc = NmpcConfig {
            n1: n.parse("n1")?,
            n2: n.parse("n2")?,
            nu: n.parse("nu")?,
            rho: n.parse("rho")?,
            u_limits,
            ..NmpcConfig::default()
        };
        nmpc.optimizer.max_iterations = n.parse("max_iterations")?;
        nmpc.optimizer.gradient_tolerance = n.parse("gradient_tolerance")?;
        nmpc.optimizer.max_backtracks = n.parse("max_backtracks")?;
        nmpc.validate()?;
        let failures = match doc.section("failures") {
            Some(s) => s
                .entries()
                .map(|(k, v)| Ok((k.parse::<ControllerKind>()?, v.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => vec![],
        };
        let optional = |name: &str| -> Result<Option<Document>> {
            let path = dir.join(name);
            if path.exists() {
                Document::load(&path).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            plant,
            sample_time: b.parse("sample_time")?,
            narx: optional("narx.txt")?.map(|d| NarxModel::from_document(&d)).transpose()?,
            narma_l2: optional("narma_l2.txt")?.map(|d| NarmaL2Model::from_document(&d)).transpose()?,
            mrc: optional("model_reference.txt")?.map(|d| MrcController::from_document(&d)).transpose()?,
            nmpc,
            u_limits,
            failures,
        })
    }
}
