use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracbloch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracbloch"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FRACBLOCH_DIM_CAP")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"[scenario]
name = "small"
model = "fock"
z_max_cm = 1.0
dz_cm = 0.1

[params]
kappa = 1.0
rho = 0.2
u0 = -3.0
n_sites = 5
"#;

#[test]
fn presets_listing_in_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let text = fracbloch(&["presets"], dir.path());
    assert!(text.status.success());
    let out = String::from_utf8(text.stdout).unwrap();
    for name in [
        "fig3-delocalization",
        "fig3c-bh-only",
        "fig4a-fractional-bo",
        "fig4b-single-bo",
        "effective-pair",
    ] {
        assert!(out.contains(name), "{name} missing");
    }
    assert!(out.contains("19 µm") && out.contains("0.95") && out.contains("-4"));

    let json = fracbloch(&["presets", "--json"], dir.path());
    let table: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(table.as_array().unwrap().len(), 5);
    assert_eq!(table[3]["params"]["n_sites"], 23);
}

#[test]
fn run_render_and_analyze_a_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let run = fracbloch(&["run", "small.toml", "--out", "res"], dir.path());
    assert!(run.status.success(), "{}", stderr(&run));
    for f in ["trajectory.csv", "observables.csv", "heatmap.pgm", "summary.json"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }

    let render = fracbloch(
        &[
            "render",
            "res/trajectory.csv",
            "--axis",
            "full-slice",
            "--z",
            "0.5",
            "--norm",
            "global",
            "--out",
            "f.pgm",
        ],
        dir.path(),
    );
    assert!(render.status.success(), "{}", stderr(&render));
    assert!(fs::read(dir.path().join("f.pgm"))
        .unwrap()
        .starts_with(b"P5\n5 5\n65535\n"));

    let bad_axis = fracbloch(&["render", "res/trajectory.csv", "--axis", "linear"], dir.path());
    assert_eq!(bad_axis.status.code(), Some(1));

    let analyze = fracbloch(&["analyze", "res/trajectory.csv"], dir.path());
    assert!(analyze.status.success(), "{}", stderr(&analyze));
    let d: serde_json::Value = serde_json::from_slice(&analyze.stdout).unwrap();
    assert_eq!(d["excitation_site"], 12);
    assert!(d["confinement"]["min"].as_f64().unwrap() <= 1.0);
}

#[test]
fn config_errors_exit_with_code_2_and_a_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        SMALL.replace("n_sites = 5", "n_sites = 5\nspeed = 3"),
    )
    .unwrap();
    let o = fracbloch(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("line 12") && msg.contains("speed"), "{msg}");

    let o = fracbloch(&["preset", "fig9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dimension_cap_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fracbloch"))
        .args(["run", "small.toml"])
        .current_dir(dir.path())
        .env("FRACBLOCH_DIM_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("cap of 10"));
}

#[test]
fn missing_files_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fracbloch(&["run", "nope.toml"], dir.path()).status.code(), Some(4));
    assert_eq!(fracbloch(&["analyze", "nope.csv"], dir.path()).status.code(), Some(4));
}

#[test]
fn preset_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = fracbloch(&["preset", "fig4b-single-bo", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trajectory.csv", "observables.csv", "heatmap.pgm", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}
