use std::path::Path;
use std::process::{Command, Output};

fn steamflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steamflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// One trained bundle shared by the tests that need controllers.
fn trained_bundle(dir: &Path) -> std::path::PathBuf {
    let bundle = dir.join("bundle");
    let out = steamflow(&["train", "--seed", "3", "--out", bundle.to_str().unwrap()], dir);
    assert!(out.status.success(), "{}", stderr(&out));
    bundle
}

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = steamflow(&["--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["identify", "train", "run", "reproduce"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = steamflow(&["run", "--controller", "pid"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("unknown.cfg"), "controller = narma_l2\ngain = 3\n").unwrap();
    let out = steamflow(&["run", "--config", "unknown.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gain"), "{}", stderr(&out));

    std::fs::write(dir.path().join("short.cfg"), "duration = 0.5\n").unwrap();
    let out = steamflow(&["run", "--config", "short.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = steamflow(&["run", "--config", "missing.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identify_writes_models_and_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = steamflow(&["identify", "--seed", "1", "--out", "id"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["dataset.csv", "narx.txt", "narma_l2.txt"] {
        assert!(dir.path().join("id").join(f).is_file(), "{f} not written");
    }
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("NARX one-step"), "{text}");
}

#[test]
fn train_run_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = trained_bundle(dir.path());
    let b = bundle.to_str().unwrap();

    // step run from a saved bundle: header plus 301 rows for 30 s at 0.1 s
    let out = steamflow(&["run", "--controller", "model-reference", "--bundle", b, "--out", "step"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("step/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 302);
    assert!(csv.starts_with("t,r,y_true,y_measured,u\n"));
    let svg = std::fs::read_to_string(dir.path().join("step/run.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("overshoot"));

    // config file plus flag override
    std::fs::write(dir.path().join("sine.cfg"), "reference = sine\nduration = 20\n").unwrap();
    let out = steamflow(
        &["run", "--config", "sine.cfg", "--controller", "narma-l2", "--noise", "--bundle", b, "--out", "sine"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("sine/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 202);

    // a missing controller model is a training failure
    let partial = dir.path().join("partial");
    std::fs::create_dir(&partial).unwrap();
    for f in ["bundle.txt", "narx.txt", "narma_l2.txt"] {
        std::fs::copy(bundle.join(f), partial.join(f)).unwrap();
    }
    let out = steamflow(&["run", "--bundle", "partial", "--out", "partial_run"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    // a model whose output overflows faults the loop
    let broken = dir.path().join("broken");
    std::fs::create_dir(&broken).unwrap();
    for f in ["bundle.txt", "narx.txt", "model_reference.txt"] {
        std::fs::copy(bundle.join(f), broken.join(f)).unwrap();
    }
    let narma = std::fs::read_to_string(bundle.join("narma_l2.txt")).unwrap();
    let poisoned: String = narma
        .lines()
        .map(|l| {
            if l.starts_with("weights.1") {
                "weights.1 = 1e308 1e308 1e308 1e308 1e308 1e308".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(broken.join("narma_l2.txt"), poisoned).unwrap();
    let out = steamflow(&["run", "--controller", "narma-l2", "--bundle", "broken", "--out", "fault"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    // the partial trace is still written
    assert!(dir.path().join("fault/run.csv").is_file());
}
