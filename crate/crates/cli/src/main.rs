use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use steamflow_core::harness::{
    emit_csv, parse_scenario_config, render_svg, reproduce_tables, run_scenario, train_bundle, BundleConfig,
    ControllerBundle, ControllerKind, RunMetrics, Scenario,
};
use steamflow_core::neural::TrainConfig;
use steamflow_core::plant::paper_plant;
use steamflow_core::signals::ReferenceKind;
use steamflow_core::sysid::{collect_dataset, identify_narma_l2, identify_narx, ExcitationConfig, NarmaL2Config};
use steamflow_core::{ActuatorParams, Error};

#[derive(Parser)]
#[command(name = "steamflow", version, about = "Neural control of a steam-flow valve: identification, training and closed-loop runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    NarmaL2,
    ModelReference,
    NnPredictive,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::NarmaL2 => ControllerKind::NarmaL2,
            Controller::ModelReference => ControllerKind::ModelReference,
            Controller::NnPredictive => ControllerKind::NnPredictive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Reference {
    Step,
    Sine,
}

#[derive(Subcommand)]
enum Command {
    /// Collect open-loop data and identify the NARX and NARMA-L2 plant models.
    Identify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "identify")]
        out: PathBuf,
    },
    /// Train all three controllers for one seed and save the bundle.
    Train {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bundle")]
        out: PathBuf,
    },
    /// Run one closed-loop scenario and write its trace as CSV and SVG.
    Run {
        #[arg(long, value_enum)]
        controller: Option<Controller>,
        #[arg(long, value_enum)]
        reference: Option<Reference>,
        /// Enable sensor noise.
        #[arg(long)]
        noise: bool,
        /// Training seed; a bundle for it is trained unless --bundle is given.
        #[arg(long)]
        seed: Option<u64>,
        /// Scenario file of `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory written by `train`.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Train every seed, run the four scenario families and print the tables.
    Reproduce {
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seed: Vec<u64>,
        #[arg(long, default_value = "reproduce")]
        out: PathBuf,
    },
}

/// Process exit status for a failed command.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TrainingFailed { .. }
        | Error::IdentificationFailed(_)
        | Error::InsufficientData { .. }
        | Error::EmptyDataset
        | Error::NonFiniteData => 2,
        Error::ControllerFault { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Identify { seed, out } => identify(seed, &out),
        Command::Train { seed, out } => train(seed, &out),
        Command::Run {
            controller,
            reference,
            noise,
            seed,
            config,
            bundle,
            out,
        } => run(controller, reference, noise, seed, config.as_deref(), bundle.as_deref(), &out),
        Command::Reproduce { seed, out } => reproduce(&seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn create_dir(dir: &Path) -> steamflow_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> steamflow_core::Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn identify(seed: u64, out: &Path) -> steamflow_core::Result<()> {
    let excitation = ExcitationConfig {
        seed,
        ..ExcitationConfig::default()
    };
    let mut plant = paper_plant(&ActuatorParams::default(), excitation.sample_time)?;
    let data = collect_dataset(&excitation, &mut plant)?;
    let train_cfg = TrainConfig::with_seed(seed);
    let narx = identify_narx(&data, &train_cfg)?;
    let narma = identify_narma_l2(&data, &train_cfg, &NarmaL2Config::default())?;
    create_dir(out)?;
    data.save_csv(&out.join("dataset.csv"))?;
    narx.model.to_document().save(&out.join("narx.txt"))?;
    narma.model.to_document().save(&out.join("narma_l2.txt"))?;
    println!("samples            {}", data.len());
    println!("NARX one-step      {:.4} % of output range", 100.0 * narx.validation_fraction());
    println!("NARX free run      {:.4} % of output range", 100.0 * narx.free_run_fraction());
    println!("NARMA-L2 d-step    {:.4} % of output range", 100.0 * narma.validation_fraction());
    println!("models written to {}", out.display());
    Ok(())
}

fn train(seed: u64, out: &Path) -> steamflow_core::Result<()> {
    let tr = train_bundle(&BundleConfig::default(), seed)?;
    tr.bundle.save(out)?;
    for (kind, reason) in &tr.bundle.failures {
        eprintln!("{kind} failed: {reason}");
    }
    println!("bundle written to {}", out.display());
    match tr.bundle.failures.first() {
        Some((kind, reason)) => Err(Error::TrainingFailed {
            epoch: 0,
            reason: format!("{kind}: {reason}"),
        }),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    controller: Option<Controller>,
    reference: Option<Reference>,
    noise: bool,
    seed: Option<u64>,
    config: Option<&Path>,
    bundle_dir: Option<&Path>,
    out: &Path,
) -> steamflow_core::Result<()> {
    let mut sc = Scenario::step(ControllerKind::ModelReference);
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        sc = parse_scenario_config(&text, sc)?;
    }
    // flags override the file
    if let Some(r) = reference {
        let base = match r {
            Reference::Step => Scenario::step(sc.controller),
            Reference::Sine => Scenario::sine(sc.controller),
        };
        if base.reference.kind != sc.reference.kind {
            sc.reference = base.reference;
            sc.duration = base.duration;
        }
    }
    if let Some(c) = controller {
        sc.controller = c.into();
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
    if noise {
        sc.noise.enabled = true;
    }
    sc.validate()?;

    let bundle = match bundle_dir {
        Some(dir) => ControllerBundle::load(dir)?,
        None => train_bundle(&BundleConfig::default(), sc.seed)?.bundle,
    };
    let record = run_scenario(&sc, &bundle)?;
    create_dir(out)?;
    emit_csv(&record, &out.join("run.csv"))?;
    let reference_name = match sc.reference.kind {
        ReferenceKind::Step => "step",
        ReferenceKind::Sine => "sine",
    };
    let title = format!("{} controller, {reference_name} reference", sc.controller.label());
    write_text(&out.join("run.svg"), &render_svg(&record, &title))?;
    if let Some(fault) = record.fault {
        return Err(Error::ControllerFault {
            step: fault.step,
            reason: fault.reason,
        });
    }
    match &record.metrics {
        Some(Ok(RunMetrics::Step(m))) => {
            println!("rise time      {:.3} s", m.rise_time);
            println!("overshoot      {:.3} %", m.overshoot_pct);
            println!("settling time  {:.3} s", m.settling_time);
            println!("steady state   {:.4}", m.steady_state);
        }
        Some(Ok(RunMetrics::Track(m))) => println!("peak value     {:.4}", m.peak_value),
        Some(Err(reason)) => println!("metrics unavailable: {reason}"),
        None => {}
    }
    println!("trace written to {}", out.display());
    Ok(())
}

fn reproduce(seeds: &[u64], out: &Path) -> steamflow_core::Result<()> {
    let report = reproduce_tables(&BundleConfig::default(), seeds)?;
    let text = report.render();
    create_dir(out)?;
    write_text(&out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}
