use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ductflow::mesh::read_msh;
use tempfile::TempDir;

const CHANNEL: &str = r#"
[mesh]
generator = "channel"
length_cm = 2.0
height_cm = 0.5
nx = 8
ny = 2

[[outlets]]
tag = 3
kind = "duct"
length_cm = 2.0

[solver]
tau_s = 0.01
t_end_s = 0.1
snapshot_every_s = 0.02

[inlet]
waveform = "constant"
value_cm3_s = 1.0
"#;

fn ductflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ductflow")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn bundled(case: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{case}.toml"));
    fs::read_to_string(p).unwrap()
}

/// Bundled case shrunk to a coarse mesh and a short horizon.
fn quick_case(case: &str) -> String {
    bundled(case)
        .replace("resolution = 4", "resolution = 2")
        .replace("tau_s = 0.001", "tau_s = 0.005")
        .replace("t_end_s = 2.7", "t_end_s = 0.3")
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn mesh_gen_writes_readable_meshes() {
    let tmp = TempDir::new().unwrap();
    ok(ductflow(tmp.path(), &["mesh-gen", "bifurcation", "--resolution", "2", "-o", "b.msh"]));
    let mesh = read_msh::<f64>(tmp.path().join("b.msh")).unwrap();
    assert_eq!(mesh.dim(), 2);
    assert_eq!(mesh.tags(), vec![1, 2, 3, 4]);
    ok(ductflow(tmp.path(), &["mesh-gen", "channel", "--length", "2", "--height", "0.5"]));
    assert!(read_msh::<f64>(tmp.path().join("mesh.msh")).unwrap().num_cells() > 0);
    ok(ductflow(tmp.path(), &["mesh-gen", "box", "--length", "1", "--height", "1", "--depth", "1", "-o", "x.msh"]));
    assert_eq!(read_msh::<f64>(tmp.path().join("x.msh")).unwrap().dim(), 3);
}

#[test]
fn mesh_gen_rejects_invalid_dimensions() {
    let tmp = TempDir::new().unwrap();
    let o = ductflow(tmp.path(), &["mesh-gen", "channel", "--length", "-1", "--height", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = ductflow(tmp.path(), &["mesh-gen", "bifurcation", "--width", "0"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!tmp.path().join("mesh.msh").exists());
}

#[test]
fn run_writes_outputs_and_reruns_bit_identically_from_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CHANNEL);
    ok(ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "run", "-o", "a"]));
    let a = tmp.path().join("a");
    for f in ["mesh.msh", "timeseries.csv", "energy.csv", "manifest.toml"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let snaps = fs::read_dir(a.join("snapshots")).unwrap().count();
    assert_eq!(snaps, 5);
    assert_eq!(read(a.join("timeseries.csv")).lines().count(), 11);
    let manifest = read(a.join("manifest.toml"));
    assert!(manifest.contains("[manifest]") && manifest.contains("command"));

    ok(ductflow(tmp.path(), &["--config", a.join("manifest.toml").to_str().unwrap(), "run", "-o", "b"]));
    let b = tmp.path().join("b");
    for f in ["timeseries.csv", "energy.csv", "snapshots/u_000010.vtk"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs");
    }
}

#[test]
fn run_refuses_a_non_empty_output_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CHANNEL);
    fs::create_dir(tmp.path().join("busy")).unwrap();
    fs::write(tmp.path().join("busy/keep"), "x").unwrap();
    let o = ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "run", "-o", "busy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not empty"));
}

#[test]
fn configuration_errors_exit_with_usage_code() {
    let tmp = TempDir::new().unwrap();
    let no_outlets = CHANNEL.replace("[[outlets]]\ntag = 3\nkind = \"duct\"\nlength_cm = 2.0\n", "");
    let cfg = write_config(tmp.path(), "bad.toml", &no_outlets);
    let o = ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "run", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("boundary tag 3"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());

    let cfg = write_config(tmp.path(), "typo.toml", &CHANNEL.replace("tau_s", "tau"));
    let o = ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "run", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));

    let o = ductflow(tmp.path(), &["run", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ductflow(tmp.path(), &["--config", "missing.toml", "run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_of_a_run_with_itself_is_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", &CHANNEL.replace("[solver]", "[solver]\nscheme = \"fractional\""));
    ok(ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "run", "-o", "a"]));
    ok(ductflow(tmp.path(), &["compare", "a", "a", "--stride", "0.02", "-o", "self.csv"]));
    let csv = read(tmp.path().join("self.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));

    ok(ductflow(tmp.path(), &["compare", "a", "a", "--stride", "0.04", "--corrected", "-o", "c.csv"]));
    let csv = read(tmp.path().join("c.csv"));
    assert_eq!(csv.lines().count(), 3);
    let eps: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(eps > 0.0 && eps < 0.5, "{eps}");

    let o = ductflow(tmp.path(), &["compare", "a", "nowhere"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_interpolates_between_different_meshes() {
    let tmp = TempDir::new().unwrap();
    let coarse = write_config(tmp.path(), "coarse.toml", CHANNEL);
    let fine = write_config(tmp.path(), "fine.toml", &CHANNEL.replace("nx = 8\nny = 2", "nx = 16\nny = 4"));
    ok(ductflow(tmp.path(), &["--config", coarse.to_str().unwrap(), "run", "-o", "c"]));
    ok(ductflow(tmp.path(), &["--config", fine.to_str().unwrap(), "run", "-o", "f"]));
    ok(ductflow(tmp.path(), &["compare", "c", "f", "--stride", "0.02", "-o", "e.csv"]));
    let csv = read(tmp.path().join("e.csv"));
    let eps: Vec<f64> = csv.lines().skip(1).map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(eps.len(), 5);
    assert!(eps.iter().all(|e| *e > 0.0 && *e < 0.2), "{eps:?}");
}

#[test]
fn synth_meas_in_both_modes_is_seeded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CHANNEL);
    let c = cfg.to_str().unwrap();
    ok(ductflow(tmp.path(), &["--config", c, "run", "-o", "traj"]));

    let o = ductflow(tmp.path(), &["--config", c, "synth-meas", "-o", "m"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trajectory"));

    let hf = write_config(
        tmp.path(),
        "hf.toml",
        &format!("{CHANNEL}\n[measurement]\nmode = \"high_fidelity\"\ncadence_s = 0.02\nseed = 3\ntrajectory = \"traj\"\n"),
    );
    ok(ductflow(tmp.path(), &["--config", hf.to_str().unwrap(), "synth-meas", "-o", "hf1"]));
    ok(ductflow(tmp.path(), &["--config", hf.to_str().unwrap(), "synth-meas", "-o", "hf2"]));
    let d = tmp.path();
    assert_eq!(read(d.join("hf1/t_4.csv")), read(d.join("hf2/t_4.csv")));
    assert!(d.join("hf1/meta").is_file() && d.join("hf1/manifest.toml").is_file());
    assert!(!d.join("hf1/t_5.csv").exists());

    let mri = write_config(
        tmp.path(),
        "mri.toml",
        &format!("{CHANNEL}\n[measurement]\nmode = \"mri\"\nvoxel_size_cm = 0.1\ncadence_s = 0.04\nseed = 3\n"),
    );
    ok(ductflow(tmp.path(), &["--config", mri.to_str().unwrap(), "synth-meas", "--trajectory", "traj", "-o", "mri"]));
    let meta = read(d.join("mri/meta"));
    assert!(meta.contains("venc_cm_s"), "{meta}");
    assert!(d.join("mri/t_1.csv").is_file() && !d.join("mri/t_2.csv").exists());
    let other_seed = write_config(tmp.path(), "mri2.toml", &read(&mri).replace("seed = 3", "seed = 4"));
    ok(ductflow(tmp.path(), &["--config", other_seed.to_str().unwrap(), "synth-meas", "--trajectory", "traj", "-o", "mri2"]));
    assert_ne!(read(d.join("mri/t_0.csv")), read(d.join("mri2/t_0.csv")));
}

#[test]
fn estimate_runs_the_bundled_cases_end_to_end() {
    for case in ["case1_analog", "case2_analog", "case3_analog"] {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "case.toml", &quick_case(case));
        let o = ok(ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "estimate"]));
        let out = tmp.path().join(case.replace("_analog", "_out"));
        let table = String::from_utf8_lossy(&o.stdout).into_owned();
        assert_eq!(read(out.join("summary.txt")), table);
        assert!(table.starts_with("outlet  reference_cm  estimate_cm  rel_error"));
        let csv = read(out.join("estimation.csv"));
        assert!(csv.starts_with("t,beta_1,std_1,ell_1\n"), "{csv}");
        // t = 0 plus one row per 0.03 s sample up to 0.3 s.
        assert_eq!(csv.lines().count(), 12, "{case}");
        let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert!(last[3] > 0.0 && last[2] < 0.5, "{case}: {last:?}");
        assert!(out.join("measurements/meta").is_file());
        assert!(out.join("manifest.toml").is_file());
    }
}

#[test]
fn estimate_reads_saved_measurements() {
    let tmp = TempDir::new().unwrap();
    let case = write_config(tmp.path(), "case.toml", &quick_case("case1_analog"));
    ok(ductflow(tmp.path(), &["--config", case.to_str().unwrap(), "estimate", "-o", "twin"]));
    let from_dir = quick_case("case1_analog")
        .replace("[estimation]", "[estimation]\nmeasurements = \"twin/measurements\"\nreference_cm = [1.0]");
    let cfg = write_config(tmp.path(), "dir.toml", &from_dir);
    ok(ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "estimate", "-o", "again"]));
    assert_eq!(read(tmp.path().join("twin/estimation.csv")), read(tmp.path().join("again/estimation.csv")));
}

#[test]
fn estimate_rejects_unknown_outlet_tags() {
    let tmp = TempDir::new().unwrap();
    let text = quick_case("case1_analog").replace("estimated_tags = [3]", "estimated_tags = [9]");
    let cfg = write_config(tmp.path(), "case.toml", &text);
    let o = ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "estimate", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown estimated outlet tag 9"), "{}", stderr(&o));
}

#[test]
fn single_precision_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "f32.toml", &format!("precision = \"f32\"\n{CHANNEL}"));
    ok(ductflow(tmp.path(), &["--config", cfg.to_str().unwrap(), "run", "-o", "a"]));
    let d64 = write_config(tmp.path(), "f64.toml", CHANNEL);
    ok(ductflow(tmp.path(), &["--config", d64.to_str().unwrap(), "run", "-o", "b"]));
    let last = |dir: &str| -> Vec<f64> {
        let csv = read(tmp.path().join(dir).join("timeseries.csv"));
        csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect()
    };
    let (single, double) = (last("a"), last("b"));
    assert!(single.iter().all(|x| x.is_finite()), "{single:?}");
    // energy, peak speed and outflow; the 1e8 penalties cost f32 about three digits
    for (k, tol) in [(1, 1e-3), (4, 1e-4), (5, 1e-2)] {
        assert!((single[k] - double[k]).abs() <= tol * double[k].abs(), "{single:?} vs {double:?}");
    }
}
