use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metagpe::states::{soliton_train, SolitonSpec};
use metagpe::{
    evolve, Complex64, ComplexField, DynamicsKind, EvolutionConfig, Grid1D, LambdaSchedule, ModelParams, Recorder,
};
use metagpe_cli::heatmap::{emit_heatmap, read_heatmap_csv, DEGENERATE_GRAY};
use metagpe_cli::io::{decode_snapshot, encode_snapshot, read_observables, SnapshotHeader, HEADER_BYTES};
use metagpe_cli::{parse_config, CliError};
use proptest::prelude::*;
use serde_json::Value;

fn metagpe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metagpe"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SMALL_THERMAL: &str = r#"
[grid]
n_points = 64

[physics]
coupling = 500.0
lambda = 0.02

[initial]
kind = "thermal"
temperature = 5000.0
mode_cutoff = 8
seed = 7

[integration]
t_end = 0.01
snapshot_stride = 200
observable_stride = 50

[output]
directory = "out"
"#;

/// Every file under `dir`, keyed by path relative to it.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn metadata(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("metadata.json")).unwrap()).unwrap()
}

#[test]
fn identical_runs_write_identical_bytes() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let tmp = tempfile::tempdir().unwrap();
            write(tmp.path(), "run.cfg", SMALL_THERMAL);
            let out = metagpe(tmp.path(), &["evolve", "run.cfg"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let mut files = tree(&tmp.path().join("out"));
            let mut meta: Value = serde_json::from_slice(&files.remove(Path::new("metadata.json")).unwrap()).unwrap();
            meta.as_object_mut().unwrap().remove("wall_time_seconds");
            (tmp, files, meta, out.stdout)
        })
        .collect();
    let (a, b) = (&runs[0], &runs[1]);
    assert!(a.1.contains_key(Path::new("observables.csv")));
    assert!(a.1.contains_key(Path::new("final.gpf1")));
    assert!(a.1.contains_key(Path::new("heatmap.pgm")));
    assert!(a.1.keys().any(|k| k.starts_with("snapshots")));
    assert_eq!(a.1.keys().collect::<Vec<_>>(), b.1.keys().collect::<Vec<_>>());
    for (name, bytes) in &a.1 {
        assert!(bytes == &b.1[name], "{} differs", name.display());
    }
    assert_eq!(a.2, b.2);
    assert_eq!(a.3, b.3);
}

#[test]
fn observable_rows_follow_the_stride() {
    let tmp = tempfile::tempdir().unwrap();
    for (stride, t_end) in [(50u64, 0.01), (70, 0.01)] {
        let text = SMALL_THERMAL
            .replace("observable_stride = 50", &format!("observable_stride = {stride}"))
            .replace("t_end = 0.01", &format!("t_end = {t_end}"));
        let cfg_path = write(tmp.path(), "run.cfg", &text);
        let cfg = parse_config(&cfg_path).unwrap();
        let dt = cfg.integration().unwrap().dt;
        let steps = ((t_end / dt) - 1e-9).ceil() as u64;
        let out = metagpe(tmp.path(), &["evolve", "run.cfg"]);
        assert!(out.status.success());
        let lines = fs::read_to_string(tmp.path().join("out/observables.csv")).unwrap().lines().count() as u64;
        // Header, the samples at multiples of the stride, and the final
        // state when the last step is not itself a multiple.
        let expected = 1 + steps / stride + 1 + u64::from(steps % stride != 0);
        assert_eq!(lines, expected, "stride {stride}, {steps} steps");
        let records = read_observables(&tmp.path().join("out/observables.csv")).unwrap();
        // The stage step is shortened so that the steps tile t_end.
        assert!((records.last().unwrap().t - t_end).abs() < 1e-12);
    }
}

#[test]
fn metadata_records_config_defaults_and_versions() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.cfg", SMALL_THERMAL);
    let out = metagpe(tmp.path(), &["evolve", "run.cfg"]);
    assert!(out.status.success());
    let meta = metadata(&tmp.path().join("out"));
    assert_eq!(meta["command"], "evolve");
    assert_eq!(meta["status"], "ok");
    assert_eq!(meta["config_text"], SMALL_THERMAL);
    assert_eq!(meta["versions"]["metagpe"], metagpe::VERSION);
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let defaults = meta["defaults_applied"].as_object().unwrap();
    for key in ["physics.mu", "physics.dynamics", "integration.dt", "initial.condensate_fraction", "output.formats"] {
        assert!(defaults.contains_key(key), "{key} missing from {defaults:?}");
    }
    assert!(!defaults.contains_key("integration.snapshot_stride"));
    assert!(!defaults.keys().any(|k| k.starts_with("dispersion")));
    assert_eq!(meta["resolved_config"]["physics"]["coupling"], 500.0);
}

#[test]
fn exit_codes_by_failure_category() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    write(dir, "typo.cfg", &SMALL_THERMAL.replace("coupling = 500.0", "coupling = 500.0\ncuopling = 1.0"));
    let out = metagpe(dir, &["evolve", "typo.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error[config]") && err.contains("cuopling") && err.contains(":7:"), "{err}");

    let blow_up = "[grid]\nn_points = 64\n[physics]\ncoupling = 1.0e300\n[initial]\nkind = \"uniform\"\n\
                   [integration]\nt_end = 1.0e-3\n[output]\ndirectory = \"out\"\n";
    write(dir, "diverge.cfg", blow_up);
    let out = metagpe(dir, &["evolve", "diverge.cfg"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(metadata(&dir.join("out"))["error"]["category"], "divergence");

    fs::write(dir.join("blocked"), "a file where the output directory should go").unwrap();
    write(dir, "io.cfg", &SMALL_THERMAL.replace("directory = \"out\"", "directory = \"blocked/out\""));
    let out = metagpe(dir, &["evolve", "io.cfg"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("left in place"));

    let capped = "[grid]\nn_points = 64\n[physics]\ncoupling = 100.0\n[initial]\nkind = \"thermal\"\n\
                  temperature = 1000.0\nmode_cutoff = 4\n[groundstate]\ntolerance = 1.0e-12\nmax_iterations = 3\n\
                  [output]\ndirectory = \"gs\"\n";
    write(dir, "gs.cfg", capped);
    let out = metagpe(dir, &["groundstate", "gs.cfg"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(metadata(&dir.join("gs"))["error"]["exit_code"], 5);

    write(dir, "ok.cfg", &capped.replace("max_iterations = 3", "max_iterations = 100000"));
    let out = metagpe(dir, &["groundstate", "ok.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("gs/groundstate.gpf1").exists());
}

#[test]
fn config_errors_name_line_and_key() {
    let tmp = tempfile::tempdir().unwrap();
    let check = |text: &str, key: &str, line: usize| {
        let path = write(tmp.path(), "bad.cfg", text);
        match parse_config(&path) {
            Err(CliError::Config { key: k, line: l, .. }) => {
                assert_eq!((k.as_str(), l), (key, line), "{text}");
            }
            other => panic!("{text}: {:?}", other.map(|_| ())),
        }
    };
    check("[grid]\nn_points = 64\n\n[physics]\n", "physics.coupling", 4);
    check("[grid]\nn_points = 64\n[physics]\ncoupling = 1.0\npotential = \"missing.txt\"\n", "physics.potential", 5);
    check("[grid]\nn_points = 100\n[physics]\ncoupling = 1.0\n", "grid.n_points", 2);
    check("[grid]\nn_points = 64\n[physics]\ncoupling = \"strong\"\n", "physics.coupling", 4);
    check(
        "[grid]\nn_points = 64\n[physics]\ncoupling = 1.0\n[integration]\nt_end = 1.0\ndt = 1.0\n",
        "integration.dt",
        7,
    );
}

#[test]
fn shipped_configs_parse_to_the_figure_parameters() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["fig2a.cfg", "fig2b.cfg", "quench.cfg", "dispersion.cfg", "groundstate.cfg", "thermal.cfg"] {
        parse_config(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let a = parse_config(&dir.join("fig2a.cfg")).unwrap();
    assert_eq!(a.physics.coupling, 4.0e4);
    assert_eq!(a.physics.stages.len(), 1);
    assert_eq!(a.physics.stages[0].lambda, 0.01);
    let k_max = std::f64::consts::PI * 1024.0;
    let dt = 0.4 * 2.8 / (0.5 * k_max * k_max);
    assert!((a.integration().unwrap().dt - dt).abs() < 1e-15 * dt);
    match a.initial().unwrap() {
        metagpe_cli::config::InitialConfig::Solitons { solitons } => {
            let found: Vec<(f64, f64)> = solitons.iter().map(|s| (s.position, s.speed_fraction)).collect();
            assert_eq!(found, vec![(0.3, 0.0), (0.7, 0.0)]);
        }
        _ => panic!("fig2a starts from solitons"),
    }
    let q = parse_config(&dir.join("quench.cfg")).unwrap();
    let lambdas: Vec<f64> = q.physics.stages.iter().map(|s| s.lambda).collect();
    assert_eq!(lambdas, vec![0.0, 0.01, 0.0]);
    assert_eq!(q.physics.stages[1].duration, 0.01);
    assert!(q.quench.seeds.len() >= 8);
}

#[test]
fn snapshot_decoding_rejects_damaged_files() {
    let grid = Grid1D::new(8, 1.0).unwrap();
    let f = ComplexField::from_fn(&grid, |x| Complex64::new(x, 1.0)).unwrap();
    let bytes = encode_snapshot(&f, &SnapshotHeader::new(&grid, 0.5, 0.01));
    assert_eq!(bytes.len(), HEADER_BYTES + 16 * 8);
    assert!(decode_snapshot(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_snapshot(&bytes[..20]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(decode_snapshot(&wrong).is_err());
    let mut version = bytes.clone();
    version[4] = 2;
    assert!(decode_snapshot(&version).is_err());
    let mut nan = bytes;
    nan[HEADER_BYTES..HEADER_BYTES + 8].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(decode_snapshot(&nan).is_err());
}

#[test]
fn uniform_heatmap_is_mid_gray() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid1D::new(32, 1.0).unwrap();
    let psi = metagpe::states::uniform_state(&grid);
    let info = emit_heatmap(&[(0.0, psi.clone()), (1.0, psi)], tmp.path(), "flat").unwrap();
    let pgm = fs::read(tmp.path().join(&info.image)).unwrap();
    let header = b"P5\n32 2\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert!(pgm[header.len()..].iter().all(|&g| g == DEGENERATE_GRAY));
    assert_eq!(pgm.len(), header.len() + 64);
}

#[test]
fn heatmap_of_a_black_pair_shows_two_fixed_dark_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid1D::new(256, 1.0).unwrap();
    let p = ModelParams::new(2000.0, 2000.0, 0.01).unwrap();
    let pair = soliton_train(&grid, &p, &[SolitonSpec::black(0.3), SolitonSpec::black(0.7)]).unwrap();
    let dt = metagpe::dynamics::auto_time_step(&grid);
    let schedule = LambdaSchedule::constant(2000.0 * dt, 0.01).unwrap();
    let mut rec = Recorder::new();
    evolve(&pair.field, &p, DynamicsKind::Metriplectic, &schedule, &EvolutionConfig::new(dt, 200, 200), &mut rec)
        .unwrap();
    let frames: Vec<(f64, ComplexField)> = rec.snapshots.iter().map(|(t, _, f)| (*t, f.clone())).collect();
    assert_eq!(frames.len(), 11);
    let info = emit_heatmap(&frames, tmp.path(), "pair").unwrap();
    assert_eq!((info.rows, info.columns), (11, 256));

    let rows = read_heatmap_csv(&tmp.path().join(&info.csv)).unwrap();
    for (row, (_, f)) in rows.iter().zip(&frames) {
        let exact = metagpe::density(f);
        assert_eq!(row, &exact);
        let norm: f64 = row.iter().sum::<f64>() * grid.spacing();
        assert!((norm - 1.0).abs() < 1e-10, "{norm}");
    }

    // Pixel-column minima: the two darkest columns of every image row sit
    // at the nodes, 0.3 L and 0.7 L.
    let pgm = fs::read(tmp.path().join(&info.image)).unwrap();
    let pixels = &pgm[pgm.len() - 11 * 256..];
    for row in pixels.chunks(256) {
        let mut columns: Vec<usize> = (0..256).collect();
        columns.sort_by_key(|&j| (row[j], j));
        let mut darkest = [columns[0], columns[1]];
        darkest.sort();
        let nodes = [0.3 * 256.0, 0.7 * 256.0];
        for (c, x) in darkest.iter().zip(nodes) {
            assert!((*c as f64 - x).abs() <= 1.0, "dark columns {darkest:?}");
            assert_eq!(row[*c], 0);
        }
    }
}

#[test]
fn heatmap_rejects_mixed_grids_and_single_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let a = metagpe::states::uniform_state(&Grid1D::new(16, 1.0).unwrap());
    let b = metagpe::states::uniform_state(&Grid1D::new(32, 1.0).unwrap());
    assert!(emit_heatmap(&[(0.0, a.clone())], tmp.path(), "one").is_err());
    assert!(emit_heatmap(&[(0.0, a), (1.0, b)], tmp.path(), "mixed").is_err());
}

#[test]
fn dispersion_prints_its_table() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[grid]\nn_points = 128\n[physics]\ncoupling = 100.0\n[dispersion]\nmodes = [1, 2]\n\
                lambdas = [0.0, 0.01]\n[output]\ndirectory = \"d\"\n";
    write(tmp.path(), "d.cfg", text);
    let out = metagpe(tmp.path(), &["dispersion", "d.cfg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], metagpe_cli::drivers::DISPERSION_HEADER);
    assert_eq!(lines.len(), 5);
    let csv = fs::read_to_string(tmp.path().join("d/dispersion.csv")).unwrap();
    assert_eq!(csv.lines().collect::<Vec<_>>(), lines);
}

fn finite_parts() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 4.0),
        Just(f64::MAX),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snapshots_round_trip_bit_for_bit(
        log_n in 1u32..9,
        length in 0.1f64..10.0,
        time in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
        seed_values in proptest::collection::vec((finite_parts(), finite_parts()), 256),
    ) {
        let n = 1usize << log_n;
        let grid = Grid1D::new(n, length).unwrap();
        let values: Vec<Complex64> = seed_values[..n].iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let field = ComplexField::new(grid.clone(), values).unwrap();
        let header = SnapshotHeader::new(&grid, time, lambda);
        let bytes = encode_snapshot(&field, &header);
        let (h, f) = decode_snapshot(&bytes).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(f.grid(), &grid);
        for (a, b) in f.values().iter().zip(field.values()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        prop_assert_eq!(encode_snapshot(&f, &h), bytes);
    }
}
