use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phasecal::io::{read_bundle, read_calibration, write_calibration, CalibrationRecord, Provenance};
use phasecal::metrics::{cosine_similarity_db, starting_phase_agreement};
use phasecal::offsets::GainTable;
use phasecal::{Algorithm, AntennaOffset};
use tempfile::TempDir;

fn phasecal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasecal"))
        .args(args)
        .env_remove("PHASECAL_THREADS")
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut args = vec!["generate", "-o", path_str(&path)];
    args.extend_from_slice(extra);
    let out = phasecal(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

/// Data rows of the first CSV table in `text`.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .take_while(|l| !l.is_empty())
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn generate_grid_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let flags = ["--scenario", "grid-4x8", "--num-positions", "256", "--num-subcarriers", "8", "--seed", "1"];
    let a = generate(&dir, "a.gptc", &flags);
    let b = generate(&dir, "b.gptc", &flags);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let bundle = read_bundle(&a).unwrap();
    assert_eq!(bundle.measurement.dims(), (8, 32, 256));
    assert!(bundle.metadata.truth.is_some());
}

#[test]
fn generate_distributed_has_labelled_subarrays() {
    let dir = TempDir::new().unwrap();
    let path = generate(&dir, "d.gptc", &["--scenario", "distributed-4x-2x4", "--num-positions", "20", "--num-subcarriers", "4"]);
    let bundle = read_bundle(&path).unwrap();
    let subarrays = &bundle.metadata.geometry.subarrays;
    let labels: Vec<&str> = subarrays.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, ["A", "B", "C", "D"]);
    assert!(subarrays.iter().all(|s| s.antennas.len() == 8));
}

#[test]
fn generate_from_imported_positions() {
    let dir = TempDir::new().unwrap();
    let antennas = dir.path().join("antennas.txt");
    let positions = dir.path().join("track.txt");
    let lines: String = (0..32).map(|i| format!("{i}, {}, 0.0, 1.5\n", 0.06 * i as f64)).collect();
    std::fs::write(&antennas, lines).unwrap();
    std::fs::write(&positions, "# robot\n0 3 1 0.5\n1 4 -1 0.5\n2 5 0 0.5\n").unwrap();
    let path = generate(
        &dir,
        "imported.gptc",
        &["--antennas", path_str(&antennas), "--positions", path_str(&positions), "--num-subcarriers", "4"],
    );
    assert_eq!(read_bundle(&path).unwrap().measurement.dims(), (4, 32, 3));

    std::fs::write(&positions, "0 3 1 0.5\n0 4 -1 0.5\n").unwrap();
    let out = phasecal(&[
        "generate", "--antennas", path_str(&antennas), "--positions", path_str(&positions), "-o",
        path_str(&dir.path().join("bad.gptc")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn calibrate_recovers_truth() {
    let dir = TempDir::new().unwrap();
    let bundle = generate(&dir, "b.gptc", &["--scenario", "grid-4x8", "--num-positions", "48", "--num-subcarriers", "16", "--seed", "3"]);
    let record = dir.path().join("c.gpcr");
    let out = phasecal(&["calibrate", "-i", path_str(&bundle), "-o", path_str(&record), "--check-truth"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("truth check PASS"), "{text}");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[0][0], "0");
    let record = read_calibration(&record).unwrap();
    assert_eq!(record.provenance.algorithm, Algorithm::CoordinateDescent);
    assert_eq!(record.provenance.input_digest, read_bundle(&bundle).unwrap().digest());
    assert!(record.gains.is_some());
}

#[test]
fn iterative_residual_not_worse_than_eigenvector() {
    let dir = TempDir::new().unwrap();
    let bundle = generate(&dir, "b.gptc", &["--scenario", "distributed-4x-2x4", "--num-positions", "64", "--num-subcarriers", "8", "--snr", "0"]);
    let mut totals = Vec::new();
    for algorithm in ["iterative", "eigenvector"] {
        let record = dir.path().join(format!("{algorithm}.gpcr"));
        let out = phasecal(&["calibrate", "-i", path_str(&bundle), "-o", path_str(&record), "--algorithm", algorithm]);
        assert_eq!(code(&out), 0);
        totals.push(read_calibration(&record).unwrap().subcarrier_residuals);
    }
    for (iterative, eigen) in totals[0].iter().zip(&totals[1]) {
        assert!(iterative <= eigen, "{iterative} > {eigen}");
    }
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = phasecal(&["calibrate", "-i", path_str(&dir.path().join("nope.gptc")), "-o", path_str(&dir.path().join("c"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.gptc"));
}

fn handmade_record(bundle: &phasecal::DatasetBundle, gains: GainTable) -> CalibrationRecord {
    CalibrationRecord {
        radio: bundle.metadata.radio,
        antennas: vec![
            AntennaOffset {
                phase_offset_rad: 0.0,
                time_offset_s: 0.0,
                fit_residual_rad: 0.0
            };
            gains.num_antennas()
        ],
        provenance: Provenance {
            algorithm: Algorithm::Eigenvector,
            max_iterations: 1,
            relative_residual_tolerance: 0.0,
            seed: 0,
            tool_version: "handmade".into(),
            input_digest: bundle.digest(),
        },
        subcarrier_residuals: Vec::new(),
        gains: Some(gains),
    }
}

#[test]
fn apply_identity_and_truth_calibrations() {
    let dir = TempDir::new().unwrap();
    let bundle_path = generate(&dir, "b.gptc", &["--scenario", "grid-4x8", "--num-positions", "16", "--num-subcarriers", "8", "--with-ideal"]);
    let bundle = read_bundle(&bundle_path).unwrap();
    let (n_sub, l, _) = bundle.measurement.dims();

    let identity = dir.path().join("identity.gpcr");
    write_calibration(&handmade_record(&bundle, GainTable::identity(n_sub, l)), &identity).unwrap();
    let output = dir.path().join("same.gptc");
    let out = phasecal(&["apply", "-i", path_str(&bundle_path), "-c", path_str(&identity), "-o", path_str(&output)]);
    assert_eq!(code(&out), 0);
    let applied = read_bundle(&output).unwrap();
    assert_eq!(applied.digest(), bundle.digest());
    assert!(stdout(&out).contains(&bundle.digest()));

    let truth = bundle.metadata.truth.as_ref().unwrap();
    let rows: Vec<_> = (0..n_sub).map(|n| truth.profile.gains(n, &bundle.metadata.radio).unwrap()).collect();
    let true_gains = GainTable::from_indexed(n_sub, rows.iter().enumerate().map(|(n, g)| (n, g.view()))).unwrap();
    let exact = dir.path().join("truth.gpcr");
    write_calibration(&handmade_record(&bundle, true_gains), &exact).unwrap();
    let output = dir.path().join("flat.gptc");
    let out = phasecal(&["apply", "-i", path_str(&bundle_path), "-c", path_str(&exact), "-o", path_str(&output)]);
    assert_eq!(code(&out), 0);
    let flat = read_bundle(&output).unwrap();
    let ideal = bundle.ideal.as_ref().unwrap().as_array();
    let s = truth.phases.as_slice();
    let worst = flat
        .measurement
        .as_array()
        .indexed_iter()
        .map(|((n, li, d), z)| (z - ideal[[n, li, d]] * s[d]).norm())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn apply_refuses_foreign_or_mismatched_records() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "a.gptc", &["--scenario", "grid-4x8", "--num-positions", "16", "--num-subcarriers", "8", "--seed", "1"]);
    let b = generate(&dir, "b.gptc", &["--scenario", "grid-4x8", "--num-positions", "16", "--num-subcarriers", "8", "--seed", "2"]);
    let record = dir.path().join("a.gpcr");
    assert_eq!(code(&phasecal(&["calibrate", "-i", path_str(&a), "-o", path_str(&record)])), 0);
    let out_path = dir.path().join("out.gptc");
    let out = phasecal(&["apply", "-i", path_str(&b), "-c", path_str(&record), "-o", path_str(&out_path)]);
    assert_eq!(code(&out), 5);
    assert!(!out_path.exists());
    let out = phasecal(&["apply", "-i", path_str(&b), "-c", path_str(&record), "-o", path_str(&out_path), "--force"]);
    assert_eq!(code(&out), 0);

    let small = dir.path().join("small.gptc");
    let antennas = dir.path().join("antennas.txt");
    let track = dir.path().join("track.txt");
    std::fs::write(&antennas, "0 0 0 0\n1 0.1 0 0\n").unwrap();
    std::fs::write(&track, "0 3 0 0\n1 3 1 0\n").unwrap();
    let out = phasecal(&[
        "generate", "--antennas", path_str(&antennas), "--positions", path_str(&track), "--num-subcarriers", "8", "-o",
        path_str(&small),
    ]);
    assert_eq!(code(&out), 0);
    let out = phasecal(&["apply", "-i", path_str(&small), "-c", path_str(&record), "-o", path_str(&out_path), "--force"]);
    assert_eq!(code(&out), 2);

    let parametric_only = dir.path().join("p.gpcr");
    assert_eq!(code(&phasecal(&["calibrate", "-i", path_str(&a), "-o", path_str(&parametric_only), "--no-gains"])), 0);
    let out = phasecal(&["apply", "-i", path_str(&a), "-c", path_str(&parametric_only), "-o", path_str(&out_path)]);
    assert_eq!(code(&out), 2);
    let out = phasecal(&["apply", "-i", path_str(&a), "-c", path_str(&parametric_only), "-o", path_str(&out_path), "--mode", "parametric"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn evaluate_matches_library() {
    let dir = TempDir::new().unwrap();
    let bundle_path = generate(&dir, "d.gptc", &["--scenario", "distributed-4x-2x4", "--num-positions", "30", "--num-subcarriers", "4"]);
    let record_path = dir.path().join("c.gpcr");
    assert_eq!(code(&phasecal(&["calibrate", "-i", path_str(&bundle_path), "-o", path_str(&record_path)])), 0);

    // Self-comparison is exactly 0 dB.
    let out = phasecal(&[
        "evaluate", "-i", path_str(&bundle_path), "-c", path_str(&record_path), "--reference", path_str(&record_path),
    ]);
    assert_eq!(code(&out), 0);
    for row in csv_rows(&stdout(&out)) {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    }

    let out = phasecal(&[
        "evaluate", "-i", path_str(&bundle_path), "-c", path_str(&record_path), "--subarrays", "B,C", "--subcarrier", "2",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let bundle = read_bundle(&bundle_path).unwrap();
    let record = read_calibration(&record_path).unwrap();
    let gains = record.gains.as_ref().unwrap();
    let truth = GainTable::from_profile(&bundle.metadata.truth.as_ref().unwrap().profile, &bundle.metadata.radio).unwrap();
    let p_rows = csv_rows(&text);
    assert_eq!(p_rows.len(), 4);
    for (n, row) in p_rows.iter().enumerate() {
        let expected = cosine_similarity_db(gains.subcarrier(n), truth.subcarrier(n)).unwrap();
        assert_eq!(row[1], expected.to_string());
    }

    let agreement_text = text.split("\n\n").nth(1).expect("agreement table");
    assert!(agreement_text.starts_with("d,agreement_B_C"));
    let ideal = phasecal::geometry::build_ideal_tensor(&bundle.metadata.geometry, &bundle.metadata.track, &bundle.metadata.radio).unwrap();
    let geometry = &bundle.metadata.geometry;
    let series = starting_phase_agreement(
        bundle.measurement.subcarrier(2),
        ideal.subcarrier(2),
        gains.subcarrier(2),
        geometry.subarray("B").unwrap(),
        geometry.subarray("C").unwrap(),
    )
    .unwrap();
    let rows = csv_rows(agreement_text);
    assert_eq!(rows.len(), 30);
    for (row, value) in rows.iter().zip(&series.values) {
        let v: f64 = row[1].parse().unwrap();
        assert_eq!(v, value.unwrap());
        assert!(v < 1e-9, "noiseless agreement {v}");
    }

    let out = phasecal(&["evaluate", "-i", path_str(&bundle_path), "--subarrays", "B,Q"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_grid_arithmetic_and_determinism() {
    let dir = TempDir::new().unwrap();
    let common = [
        "sweep", "--scenario", "distributed-4x-2x4", "--num-positions", "24", "--num-subcarriers", "4", "--snr", "-12:1:5",
        "--realizations", "200", "--seed", "5",
    ];
    let first = dir.path().join("one.csv");
    let second = dir.path().join("two.csv");
    let mut args: Vec<&str> = common.to_vec();
    args.extend(["-o", path_str(&first), "--parallel", "1"]);
    let out = phasecal(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("realizations_per_point=200"));

    let out = Command::new(env!("CARGO_BIN_EXE_phasecal"))
        .args(common)
        .args(["-o", path_str(&second)])
        .env("PHASECAL_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text, std::fs::read_to_string(&second).unwrap());
    let rows = phasecal::sweep::parse_sweep_table(&text).unwrap();
    assert_eq!(rows.len(), 36);
    assert_eq!(rows[0].snr_db, -12.0);
    assert_eq!(rows[35].snr_db, 5.0);
    assert!(rows.iter().all(|r| r.n_realizations == 200));
}

#[test]
fn bad_flags_are_validation_errors() {
    let dir = TempDir::new().unwrap();
    let out_path = path_str(&dir.path().join("x")).to_string();
    assert_eq!(code(&phasecal(&["sweep", "--snr", "1:0:2", "-o", &out_path])), 2);
    assert_eq!(code(&phasecal(&["sweep", "--realizations", "0", "-o", &out_path])), 2);
    assert_eq!(code(&phasecal(&["generate", "--scenario", "grid-4x8", "--num-positions", "0", "-o", &out_path])), 2);
    assert_eq!(code(&phasecal(&["generate", "--scenario", "ring", "-o", &out_path])), 2);
    assert_eq!(code(&phasecal(&["calibrate", "-i", &out_path, "-o", &out_path, "--max-iterations", "0"])), 2);
}
