use std::borrow::Cow;
use std::io::Write as _;
use std::path::Path;

use phasecal::error::check_index;
use phasecal::geometry::build_ideal_tensor;
use phasecal::io::{
    read_bundle, read_calibration, read_positions, write_atomically, write_bundle,
    write_calibration, DatasetBundle,
};
use phasecal::metrics::{cosine_similarity_db, starting_phase_agreement};
use phasecal::offsets::{apply_calibration, parametric_gains, wrap_to_pi, wrap_to_two_pi};
use phasecal::pipeline::{calibrate_bundle, estimate_subcarriers};
use phasecal::scenario::{random_truth, synthesize_bundle, Scenario};
use phasecal::sweep::{parse_snr_grid, snr_sweep};
use phasecal::synthesis::impaired_matrix;
use phasecal::{
    ArrayGeometry, Calibration, CalibrationRecord, Error, GainTable, IdealTensor, RadioConfig,
    SolverConfig, TransmitterTrack,
};

use crate::args::{
    ApplyArgs, ApplyMode, CalibrateArgs, EvaluateArgs, GenerateArgs, SolverArgs, SweepArgs,
};
use crate::table::Table;
use crate::Failure;

const TRUTH_PHASE_TOL: f64 = 1e-9;
const TRUTH_TIME_TOL: f64 = 1e-12;

type CmdResult = Result<(), Failure>;

/// Prints one line to stdout. A closed pipe is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, Failure> {
    let config = SolverConfig {
        max_iterations: args.max_iterations,
        relative_residual_tolerance: args.tolerance,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

fn ideal_for(bundle: &DatasetBundle) -> Result<Cow<'_, IdealTensor>, Failure> {
    Ok(match &bundle.ideal {
        Some(ideal) => Cow::Borrowed(ideal),
        None => {
            let m = &bundle.metadata;
            Cow::Owned(build_ideal_tensor(&m.geometry, &m.track, &m.radio)?)
        }
    })
}

fn describe_snr(snr: Option<f64>) -> String {
    snr.map_or_else(|| "noiseless".to_string(), |s| format!("{s} dB"))
}

pub fn generate(args: &GenerateArgs) -> CmdResult {
    let bundle = match (args.scenario, &args.antennas, &args.positions) {
        (Some(kind), _, _) => {
            let scenario = Scenario::build(kind.into(), args.num_positions, args.num_subcarriers, args.seed)?;
            scenario.synthesize(&scenario.random_truth(args.seed), args.snr, args.seed, args.with_ideal)?
        }
        (None, Some(antennas), Some(positions)) => {
            let geometry = ArrayGeometry::new(read_positions(antennas)?)?;
            let track = TransmitterTrack::new(read_positions(positions)?)?;
            if args.num_subcarriers == 0 {
                return Err(Failure::Usage("--num-subcarriers must be at least 1".into()));
            }
            let radio = RadioConfig::from_center_frequency(
                args.center_frequency,
                args.bandwidth / args.num_subcarriers as f64,
                args.num_subcarriers,
            )?;
            let truth = random_truth(geometry.num_antennas(), track.num_positions(), &radio, args.seed);
            synthesize_bundle(&radio, &geometry, &track, &truth, args.snr, args.seed, args.with_ideal, None)?
        }
        _ => return Err(Failure::Usage("give --scenario, or both --antennas and --positions".into())),
    };
    write_bundle(&bundle, &args.output)?;
    let (n_sub, l, d) = bundle.measurement.dims();
    say(&format!(
        "wrote {}: L={l} D={d} N_sub={n_sub} SNR={} digest={}",
        args.output.display(),
        describe_snr(args.snr),
        bundle.digest()
    ));
    Ok(())
}

pub fn calibrate(args: &CalibrateArgs) -> CmdResult {
    let config = solver_config(&args.solver)?;
    let bundle = read_bundle(&args.input)?;
    if args.check_truth && bundle.metadata.truth.is_none() {
        return Err(Failure::Usage(format!("{} has no ground truth to check against", args.input.display())));
    }
    let record = calibrate_bundle(&bundle, args.algorithm.into(), &config, !args.no_gains)?;
    write_calibration(&record, &args.output)?;

    let mut table = Table::new(&["antenna", "phase_rad", "time_ns", "fit_residual_rad"]);
    for (l, o) in record.antennas.iter().enumerate() {
        table.push(vec![
            l.to_string(),
            format!("{:.12}", o.phase_offset_rad),
            format!("{:.9}", o.time_offset_s * 1e9),
            format!("{:.3e}", o.fit_residual_rad),
        ]);
    }
    table.print();
    let residuals = &record.subcarrier_residuals;
    eprintln!(
        "wrote {} ({}, mean subcarrier residual {:.6e})",
        args.output.display(),
        record.provenance.algorithm,
        residuals.iter().sum::<f64>() / residuals.len() as f64
    );

    if args.check_truth {
        let truth = bundle.metadata.truth.as_ref().expect("checked above");
        let (worst_phase, worst_time) = truth_errors(&record, &truth.profile);
        let pass = worst_phase <= TRUTH_PHASE_TOL && worst_time <= TRUTH_TIME_TOL;
        let line = format!(
            "truth check {}: max |phase error| {worst_phase:.3e} rad (<= {TRUTH_PHASE_TOL:e}), max |time error| {worst_time:.3e} s (<= {TRUTH_TIME_TOL:e})",
            if pass { "PASS" } else { "FAIL" }
        );
        say(&format!("# {line}"));
        if !pass {
            return Err(Failure::CheckFailed(line));
        }
    }
    Ok(())
}

/// Largest phase and time errors against the truth, both taken relative to
/// antenna 0.
fn truth_errors(record: &CalibrationRecord, profile: &phasecal::ImpairmentProfile) -> (f64, f64) {
    record
        .antennas
        .iter()
        .enumerate()
        .fold((0.0f64, 0.0f64), |(phase, time), (l, o)| {
            let phi = wrap_to_two_pi(profile.phase_offsets[l] - profile.phase_offsets[0]);
            let t = profile.time_offsets[l] - profile.time_offsets[0];
            (
                phase.max(wrap_to_pi(o.phase_offset_rad - phi).abs()),
                time.max((o.time_offset_s - t).abs()),
            )
        })
}

fn check_record_matches(record: &CalibrationRecord, bundle: &DatasetBundle) -> Result<(), Failure> {
    let (n_sub, l, _) = bundle.measurement.dims();
    if record.num_antennas() != l {
        return Err(Error::shape("calibration antennas", l, record.num_antennas()).into());
    }
    if record.radio != bundle.metadata.radio {
        return Err(Error::invalid(
            "calibration",
            format!(
                "radio configuration differs from the bundle's ({} vs {} subcarriers)",
                record.radio.num_subcarriers, n_sub
            ),
        )
        .into());
    }
    Ok(())
}

pub fn apply(args: &ApplyArgs) -> CmdResult {
    let mut bundle = read_bundle(&args.input)?;
    let record = read_calibration(&args.calibration)?;
    check_record_matches(&record, &bundle)?;
    record.check_provenance(&bundle.digest(), args.force)?;

    let calibration = match args.mode {
        ApplyMode::PerSubcarrier => Calibration::PerSubcarrier(record.gains.as_ref().ok_or_else(|| {
            Failure::Usage("calibration record has no per-subcarrier gains; use --mode parametric".into())
        })?),
        ApplyMode::Parametric => Calibration::Parametric {
            offsets: &record.antennas,
            config: &record.radio,
        },
    };
    bundle.measurement = apply_calibration(&bundle.measurement, calibration)?;
    bundle.metadata.applied_calibration = Some(format!(
        "{} calibration ({}) estimated from {}",
        match args.mode {
            ApplyMode::PerSubcarrier => "per-subcarrier",
            ApplyMode::Parametric => "parametric",
        },
        record.provenance.algorithm,
        record.provenance.input_digest
    ));
    write_bundle(&bundle, &args.output)?;
    say(&format!("wrote {} digest={}", args.output.display(), bundle.digest()));
    Ok(())
}

fn record_gains(record: &CalibrationRecord) -> GainTable {
    record
        .gains
        .clone()
        .unwrap_or_else(|| parametric_gains(&record.antennas, &record.radio))
}

fn load_record_for(path: &Path, bundle: &DatasetBundle) -> Result<CalibrationRecord, Failure> {
    let record = read_calibration(path)?;
    check_record_matches(&record, bundle)?;
    Ok(record)
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let config = solver_config(&args.solver)?;
    let bundle = read_bundle(&args.input)?;
    let m = &bundle.metadata;
    let (n_sub, _, _) = bundle.measurement.dims();

    // Resolve every selector before any estimation work.
    let subarrays = match &args.subarrays {
        Some(labels) => {
            if labels.len() != 2 {
                return Err(Failure::Usage(format!(
                    "--subarrays takes exactly two labels, got {}",
                    labels.len()
                )));
            }
            check_index("subcarrier", args.subcarrier, n_sub)?;
            let find = |label: &str| {
                m.geometry.subarray(label).ok_or_else(|| {
                    let known: Vec<&str> = m.geometry.subarrays.iter().map(|s| s.label.as_str()).collect();
                    Failure::from(Error::invalid(
                        "subarray",
                        format!("unknown label '{label}' (bundle has {known:?})"),
                    ))
                })
            };
            Some((find(&labels[0])?, find(&labels[1])?))
        }
        None => None,
    };
    let reference = match &args.reference {
        Some(path) => record_gains(&load_record_for(path, &bundle)?),
        None => match &m.truth {
            Some(truth) => GainTable::from_profile(&truth.profile, &m.radio)?,
            None => {
                return Err(Failure::Usage(
                    "bundle has no ground truth; give --reference".into(),
                ))
            }
        },
    };
    let ideal = ideal_for(&bundle)?;
    let estimate = match &args.calibration {
        Some(path) => record_gains(&load_record_for(path, &bundle)?),
        None => GainTable::from_estimates(&estimate_subcarriers(
            &bundle.measurement,
            &ideal,
            args.algorithm.into(),
            &config,
        )?)?,
    };

    let mut table = Table::new(&["subcarrier", "p_db"]);
    let mut finite = Vec::with_capacity(n_sub);
    for n in 0..n_sub {
        let p = cosine_similarity_db(estimate.subcarrier(n), reference.subcarrier(n))?;
        finite.extend(p.db());
        table.push(vec![n.to_string(), p.to_string()]);
    }
    table.print();
    if !finite.is_empty() {
        eprintln!("mean P over {} subcarriers: {} dB", finite.len(), finite.iter().sum::<f64>() / finite.len() as f64);
    }

    if let Some((b, c)) = subarrays {
        let n = args.subcarrier;
        let series = starting_phase_agreement(
            bundle.measurement.subcarrier(n),
            ideal.subcarrier(n),
            estimate.subcarrier(n),
            b,
            c,
        )?;
        let column = format!("agreement_{}_{}", series.label_b, series.label_c);
        let mut table = Table::new(&["d", &column]);
        for (d, value) in series.values.iter().enumerate() {
            table.push(vec![d.to_string(), value.map_or_else(|| "undefined".into(), |v| v.to_string())]);
        }
        say("");
        table.print();
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let config = solver_config(&args.solver)?;
    let grid = parse_snr_grid(&args.snr)?;
    if args.realizations == 0 {
        return Err(Failure::Usage("--realizations must be at least 1".into()));
    }

    let (radio, truth, ideal) = match &args.input {
        Some(path) => {
            let bundle = read_bundle(path)?;
            let ideal = ideal_for(&bundle)?.into_owned();
            let truth = bundle
                .metadata
                .truth
                .clone()
                .ok_or_else(|| Failure::Usage(format!("{} has no ground truth", path.display())))?;
            (bundle.metadata.radio, truth, ideal)
        }
        None => {
            let scenario = Scenario::build(args.scenario.into(), args.num_positions, args.num_subcarriers, config.seed)?;
            let truth = scenario.random_truth(config.seed);
            (scenario.radio, truth, scenario.ideal_tensor()?)
        }
    };
    let n = args.subcarrier.unwrap_or(radio.num_subcarriers / 2);
    check_index("subcarrier", n, radio.num_subcarriers)?;
    let g = truth.profile.gains(n, &radio)?;
    let clean = impaired_matrix(ideal.subcarrier(n), &g, truth.phases.as_slice());
    let result = snr_sweep(clean.view(), ideal.subcarrier(n), g.view(), &grid, args.realizations, &config)?;
    let text = result.to_table();

    for line in text.lines().filter(|l| l.starts_with('#')) {
        eprintln!("{line}");
    }
    eprintln!("# subcarrier={n}");
    match &args.output {
        Some(path) => {
            write_atomically(path, text.as_bytes())?;
            eprintln!("wrote {} ({} rows)", path.display(), result.rows.len());
        }
        None => say(text.trim_end()),
    }
    Ok(())
}
