use std::fs;
use std::path::Path;
use std::process::Command;

use qsim_ins::pipeline::{load_model, load_series_dir, ExperimentConfig, Overrides, Pipeline};
use qsim_ins::spin::Axis;
use qsim_ins::estimator::Channel;

fn preset(name: &str, out: &Path, shots: Option<usize>) -> Pipeline {
    let mut c = ExperimentConfig::preset(name).unwrap();
    c.apply(&Overrides { shots, noiseless: shots.is_none(), output_dir: Some(out.to_path_buf()), ..Default::default() })
        .unwrap();
    Pipeline::new(c).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn same_seed_gives_identical_csv_and_manifest_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = preset("molecule-2", &dir.path().join("a"), Some(2048));
    let b = preset("molecule-2", &dir.path().join("b"), Some(2048));
    let ma = a.run_all().unwrap();
    b.run_all().unwrap();
    let (fa, fb) = (csv_files(a.output_dir()), csv_files(b.output_dir()));
    assert!(fa.len() > 10);
    assert_eq!(fa, fb);

    let stages: Vec<&str> = ma.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(stages, ["exact", "simulate", "fit", "cross-section", "concurrence"]);
    for f in ma.outputs() {
        assert!(a.output_dir().join(f).is_file(), "{} missing", f.display());
    }
    let listed: Vec<String> = ma.outputs().map(|p| p.display().to_string()).collect();
    for (f, _) in &fa {
        assert!(listed.contains(f), "{f} not in manifest");
    }
    assert_eq!(ma.config_hash, a.config().hash());

    let c = preset("molecule-2", &dir.path().join("c"), Some(2048));
    let mut cfg = c.config().clone();
    cfg.apply(&Overrides { seed: Some(99), ..Default::default() }).unwrap();
    let c = Pipeline::new(cfg).unwrap();
    c.simulate().unwrap();
    let fc = csv_files(&c.series_dir());
    let fa_series = csv_files(&a.series_dir());
    assert_ne!(fa_series, fc);
}

#[test]
fn shot_errors_follow_the_binomial_bound() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("molecule-2", dir.path(), Some(8192));
    p.simulate().unwrap();
    let bound = 0.25 / 8192f64.sqrt();
    for s in load_series_dir(&p.series_dir()).unwrap() {
        for e in s.raw_stderr() {
            assert!(e[0] <= bound + 1e-15 && e[1] <= bound + 1e-15);
        }
        assert_eq!(s.metadata.shots, Some(8192));
    }
}

#[test]
fn stages_reingest_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("molecule-1", dir.path(), None);
    p.simulate().unwrap();
    // Fit a copy of the simulated series from another directory.
    let copy = dir.path().join("elsewhere");
    fs::create_dir_all(&copy).unwrap();
    for e in fs::read_dir(p.series_dir()).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), copy.join(e.file_name())).unwrap();
    }
    p.fit(Some(&copy)).unwrap();
    let model = load_model(&p.model_path()).unwrap();
    assert!((model.frequencies[0] - 2.0).abs() < 1e-6 && (model.frequencies[1] - 3.0).abs() < 1e-6);
    p.cross_section(None).unwrap();
    p.concurrence(None).unwrap();
    let r = p.read_report().unwrap();
    assert!((r.fit.concurrence - 1.0).abs() < 1e-6);
    assert!((r.exact.unwrap() - 1.0).abs() < 1e-9);
    let m = p.manifest().unwrap();
    assert_eq!(m.stages.len(), 4);
}

#[test]
fn exact_stage_reference_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("molecule-1", dir.path(), None);
    p.exact().unwrap();
    let model = load_model(&dir.path().join("exact/model.json")).unwrap();
    assert_eq!(model.frequencies.len(), 2);
    let cross = Channel::new(0, 1, Axis::X, Axis::X);
    assert!((model.coefficient(cross, 0).unwrap().a + 0.125).abs() < 1e-12);
    assert!((model.coefficient(cross, 1).unwrap().a - 0.125).abs() < 1e-12);
    assert!(dir.path().join("exact/spectrum.csv").is_file());

    let t = preset("trimer", &dir.path().join("t"), None);
    t.exact().unwrap();
    let model = load_model(&dir.path().join("t/exact/model.json")).unwrap();
    let w = &model.frequencies;
    assert_eq!(w.len(), 3);
    for (a, b) in w.iter().zip([8.5, 9.5, 10.0]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn empty_channel_list_writes_eigenvalues_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "system = \"molecule-1\"\nchannels = []\noutput_dir = \"{}\"\ntimes = {{ stop = 1.0, points = 5 }}\n",
        dir.path().display()
    );
    let p = Pipeline::new(ExperimentConfig::from_toml(&text, "test").unwrap()).unwrap();
    let record = p.exact().unwrap();
    assert_eq!(record.outputs, vec![Path::new("exact/eigenvalues.csv").to_path_buf()]);
    let text = fs::read_to_string(dir.path().join("exact/eigenvalues.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(p.simulate().is_err());
}

#[test]
fn single_ion_map_is_isotropic_in_plane() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
output_dir = "{}"
schedule = [[inf, 1]]
times = {{ stop = 6.0, points = 61 }}

[system]
spins = [0.5]
field = 3.0
g = [1.0]
positions = [[0.0, 0.0, 0.0]]

[fit]
frequencies = 1

[cross_section]
map_q = {{ min = -2.0, max = 2.0, step = 0.25 }}
"#,
        dir.path().display()
    );
    let p = Pipeline::new(ExperimentConfig::from_toml(&text, "single").unwrap()).unwrap();
    let manifest = p.run_all().unwrap();
    assert!(manifest.stage("concurrence").is_none());
    let model = load_model(&p.model_path()).unwrap();
    assert!((model.frequencies[0] - 3.0).abs() < 1e-8);
    let mut r = csv::Reader::from_path(dir.path().join("cross_section/map_peak0.csv")).unwrap();
    let rows: Vec<[f64; 5]> = r.deserialize().map(|x| x.unwrap()).collect();
    let at = |qx: f64, qy: f64| {
        rows.iter().find(|p| (p[0] - qx).abs() < 1e-9 && (p[1] - qy).abs() < 1e-9).unwrap()[4]
    };
    for &(x, y) in &[(0.5, 1.25), (-1.0, 0.25), (2.0, -1.5)] {
        let i = at(x, y);
        assert!(i > 0.0);
        for (u, v) in [(y, x), (-x, y), (x, -y), (-y, -x)] {
            assert!((at(u, v) - i).abs() < 1e-9 * i);
        }
    }
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qsim-ins")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();

    let (code, stdout, _) = cli(&["--preset", "molecule-1", "--out-dir", out, "run-all"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("concurrence"));
    assert!(d.join("out/manifest.json").is_file());

    let (code, stdout, _) = cli(&["concurrence", "--preset", "molecule-1", "--out-dir", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("C = 1.0000"));

    let bad = d.join("bad.toml");
    fs::write(&bad, "system = \"molecule-1\"\ntimes = { stop = 1.0, points = 3 }\nshots = 5\n").unwrap();
    let (code, _, stderr) = cli(&["exact", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");

    let (code, _, _) = cli(&["exact", "--config", d.join("missing.toml").to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _, _) = cli(&["exact"]);
    assert_eq!(code, 2);

    // Valid configuration, but too few samples for the requested frequencies.
    let short = d.join("short.toml");
    fs::write(
        &short,
        format!(
            "system = \"molecule-1\"\nschedule = [[inf, 1]]\noutput_dir = \"{}\"\ntimes = {{ stop = 1.0, points = 4 }}\n[fit]\nfrequencies = 3\n",
            d.join("short").display()
        ),
    )
    .unwrap();
    let (code, _, stderr) = cli(&["run-all", "--config", short.to_str().unwrap()]);
    assert_eq!(code, 3, "{stderr}");
}
