//! End-to-end stages and the file-level commands behind the CLI.
//!
//! Commands read and write plain files: measurements CSV in, model JSON,
//! score CSV, report JSON and PR-curve CSV out. Every output embeds a
//! `# meta:` line (or JSON field) echoing the configuration that produced
//! it, and all iteration orders are deterministic, so identical inputs and
//! configuration produce byte-identical outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{DayRange, PrepOptions};
use crate::detect::{self, Calibration, DayScore, DetectionResult, Method};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::ingest::{self, EventDaySet, Measurement, Modality, RowError};
use crate::pca::{self, PcaBasis};
use crate::plot::{LinePlot, PlotSeries};
use crate::preprocess::{self, CensorRecord, DayVector, SlotAccumulator};
use crate::series::DailySeries;
use crate::synth::{self, SynthConfig};
use crate::trend::{self, CoefficientSeries};

/// Day vectors grouped by sensor and modality.
#[derive(Debug, Default)]
pub struct DayTable {
    map: BTreeMap<(String, Modality), Vec<DayVector>>,
}

impl DayTable {
    pub fn from_measurements(
        measurements: impl IntoIterator<Item = Measurement>,
        offset: FixedOffset,
    ) -> DayTable {
        let mut accs: BTreeMap<(String, Modality), SlotAccumulator> = BTreeMap::new();
        for m in measurements {
            accs.entry((m.sensor_id.clone(), m.modality))
                .or_insert_with(|| SlotAccumulator::new(m.sensor_id.clone(), m.modality, offset))
                .add(m.timestamp, m.value);
        }
        DayTable {
            map: accs
                .into_iter()
                .map(|(key, acc)| (key, acc.finish()))
                .collect(),
        }
    }

    /// Streams a measurements CSV into day vectors without keeping raw rows.
    pub fn from_csv(path: &Path, offset: FixedOffset) -> Result<(DayTable, Vec<RowError>)> {
        let file = std::io::BufReader::new(File::open(path)?);
        let mut accs: BTreeMap<(String, Modality), SlotAccumulator> = BTreeMap::new();
        let row_errors = ingest::stream_measurements(file, |m| {
            accs.entry((m.sensor_id.clone(), m.modality))
                .or_insert_with(|| SlotAccumulator::new(m.sensor_id.clone(), m.modality, offset))
                .add(m.timestamp, m.value);
        })?;
        let table = DayTable {
            map: accs
                .into_iter()
                .map(|(key, acc)| (key, acc.finish()))
                .collect(),
        };
        Ok((table, row_errors))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Modality, &[DayVector])> {
        self.map
            .iter()
            .map(|((sensor, modality), days)| (sensor.as_str(), *modality, days.as_slice()))
    }
}

/// Basis training output for one modality.
#[derive(Debug)]
pub struct TrainOutcome {
    pub basis: PcaBasis,
    pub censor_records: Vec<CensorRecord>,
    pub degenerate_days: usize,
    pub censored_days: usize,
    pub trained_days: usize,
}

/// Trains the basis for one modality on complete, censored days in range.
pub fn train_basis(
    table: &DayTable,
    modality: Modality,
    range: &DayRange,
    prep: &PrepOptions,
) -> Result<TrainOutcome> {
    let mut normalized = Vec::new();
    let mut degenerate = 0usize;
    for (_, m, days) in table.entries() {
        if m != modality {
            continue;
        }
        for day in days {
            if !range.contains(day.day) || !day.is_complete() {
                continue;
            }
            match preprocess::center_and_normalize(day) {
                Ok(n) => normalized.push(n),
                Err(Error::DegenerateDay { .. }) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
    }
    let outcome = preprocess::censor_noisy_days(normalized, prep.k_mad)?;
    let basis = pca::build_basis(&outcome.kept)?;
    Ok(TrainOutcome {
        basis,
        censor_records: outcome.records,
        degenerate_days: degenerate,
        censored_days: outcome.censored.len(),
        trained_days: outcome.kept.len(),
    })
}

/// Coefficient series for components 1..=K of one modality.
#[derive(Debug)]
pub struct ExpansionSeries {
    pub modality: Modality,
    /// `components[i]` holds component k = i + 1.
    pub components: Vec<CoefficientSeries>,
    /// Incomplete or degenerate days that could not be expanded.
    pub skipped_days: usize,
}

/// Expands every complete day in range over the basis and derives the
/// smoothed, averaged and high-passed series.
pub fn expand(
    table: &DayTable,
    basis: &PcaBasis,
    prep: &PrepOptions,
    range: &DayRange,
) -> Result<ExpansionSeries> {
    let k = prep.components;
    let mut per_component: Vec<BTreeMap<String, DailySeries>> = vec![BTreeMap::new(); k];
    let mut skipped = 0usize;
    for (sensor, m, days) in table.entries() {
        if m != basis.modality {
            continue;
        }
        for day in days {
            if !range.contains(day.day) {
                continue;
            }
            if !day.is_complete() {
                skipped += 1;
                continue;
            }
            let norm = match preprocess::center_and_normalize(day) {
                Ok(n) => n,
                Err(Error::DegenerateDay { .. }) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let coeffs = pca::project(&norm, basis, k)?;
            for (i, &e) in coeffs.e.iter().enumerate() {
                per_component[i]
                    .entry(sensor.to_string())
                    .or_default()
                    .insert(day.day, e);
            }
        }
    }
    let components = per_component
        .into_iter()
        .enumerate()
        .map(|(i, per_sensor)| {
            trend::build_coefficient_series(
                basis.modality,
                i + 1,
                per_sensor,
                prep.smooth_window_days,
                prep.smooth_iterations,
                prep.smooth_order,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpansionSeries {
        modality: basis.modality,
        components,
        skipped_days: skipped,
    })
}

/// Scores of one method plus the dates that could not be scored.
#[derive(Debug)]
pub struct MethodScores {
    pub scores: Vec<DayScore>,
    pub excluded: Vec<NaiveDate>,
}

/// Computes a method's scores from the first-coefficient series.
pub fn method_scores(
    method: Method,
    air: &ExpansionSeries,
    soil: Option<&ExpansionSeries>,
) -> Result<MethodScores> {
    let air1 = &air.components[0];
    match method {
        Method::Basic => Ok(MethodScores {
            scores: detect::score_basic(&air1.averaged),
            excluded: Vec::new(),
        }),
        Method::Highpass => Ok(MethodScores {
            scores: detect::score_highpass(&air1.highpassed),
            excluded: Vec::new(),
        }),
        Method::Delta => {
            let soil = soil.ok_or_else(|| {
                Error::InvalidConfig("the delta method needs a soil-temperature model".into())
            })?;
            let delta = detect::score_delta(&air1.highpassed, &soil.components[0].highpassed);
            Ok(MethodScores {
                scores: delta.scores,
                excluded: delta.excluded,
            })
        }
    }
}

/// Threshold request: a fixed value or data-driven calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Calibrate,
    Value(f64),
}

impl std::str::FromStr for ThresholdSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "calibrate" {
            return Ok(ThresholdSpec::Calibrate);
        }
        s.parse::<f64>()
            .map(ThresholdSpec::Value)
            .map_err(|_| Error::InvalidConfig(format!("threshold must be a number or `calibrate`, got `{s}`")))
    }
}

impl Serialize for ThresholdSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThresholdSpec::Calibrate => s.serialize_str("calibrate"),
            ThresholdSpec::Value(v) if v.is_finite() => s.serialize_f64(*v),
            ThresholdSpec::Value(v) if *v > 0.0 => s.serialize_str("inf"),
            ThresholdSpec::Value(_) => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        match value {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            serde_json::Value::Number(n) => Ok(ThresholdSpec::Value(
                n.as_f64().ok_or_else(|| serde::de::Error::custom("bad threshold"))?,
            )),
            _ => Err(serde::de::Error::custom("bad threshold")),
        }
    }
}

fn json_float(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn parse_json_float(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            other => other.parse().ok(),
        },
        _ => None,
    }
}

fn meta_file_writer(path: &Path, meta: &serde_json::Value) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# meta: {meta}")?;
    Ok(w)
}

/// Reads the `# meta:` comment line of one of our CSV outputs.
pub fn read_meta_comment(path: &Path) -> Result<Option<serde_json::Value>> {
    let text = std::fs::read_to_string(path)?;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some(meta) = rest.trim_start().strip_prefix("meta: ") {
            return Ok(Some(serde_json::from_str(meta)?));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthCommand {
    pub out_dir: PathBuf,
    pub synth: SynthConfig,
}

#[derive(Debug)]
pub struct SynthOutputs {
    pub measurements: PathBuf,
    pub ground_truth: PathBuf,
    pub event_days: usize,
}

/// Writes `measurements.csv` and `ground_truth.csv` for a synthetic corpus.
pub fn cmd_synth(cmd: &SynthCommand) -> Result<SynthOutputs> {
    let plan = synth::plan(&cmd.synth)?;
    std::fs::create_dir_all(&cmd.out_dir)?;
    let meta = json!({"command": "synth", "config": cmd});
    let comments = vec![format!("meta: {meta}")];

    let measurements = cmd.out_dir.join("measurements.csv");
    let file = BufWriter::new(File::create(&measurements)?);
    let mut writer = ingest::MeasurementsWriter::new(file, &comments)?;
    for sensor in 0..cmd.synth.n_sensors {
        for m in synth::sensor_measurements(&cmd.synth, &plan, sensor) {
            writer.write(&m)?;
        }
    }
    writer.finish()?;

    let ground_truth = cmd.out_dir.join("ground_truth.csv");
    ingest::write_ground_truth(
        BufWriter::new(File::create(&ground_truth)?),
        &comments,
        &plan.truth,
    )?;

    Ok(SynthOutputs {
        measurements,
        ground_truth,
        event_days: plan.event_windows.len(),
    })
}

// ---------------------------------------------------------------------------
// build-model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildModelCommand {
    pub measurements: PathBuf,
    pub out_dir: PathBuf,
    pub modalities: Vec<Modality>,
    pub train_range: DayRange,
    pub prep: PrepOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub modality: Modality,
    pub model_path: PathBuf,
    pub censor_path: PathBuf,
    pub trained_days: usize,
    pub censored_days: usize,
    pub degenerate_days: usize,
    pub first_component_fraction: f64,
    pub retained_fraction: f64,
    pub retained_components: usize,
}

/// Trains and writes one model file per requested modality, plus the
/// per-modality censoring report.
pub fn cmd_build_model(cmd: &BuildModelCommand) -> Result<Vec<ModelSummary>> {
    cmd.prep.validate()?;
    if cmd.modalities.is_empty() {
        return Err(Error::InvalidConfig("no modalities requested".into()));
    }
    std::fs::create_dir_all(&cmd.out_dir)?;
    let (table, row_errors) = DayTable::from_csv(&cmd.measurements, cmd.prep.utc_offset)?;
    let meta = json!({
        "command": "build-model",
        "config": cmd,
        "row_errors": row_errors.len(),
    });

    let mut summaries = Vec::new();
    for &modality in &cmd.modalities {
        let outcome = train_basis(&table, modality, &cmd.train_range, &cmd.prep)?;
        let model_path = cmd.out_dir.join(format!("model_{modality}.json"));
        outcome.basis.save_json(&model_path, Some(meta.clone()))?;

        let censor_path = cmd.out_dir.join(format!("censoring_{modality}.csv"));
        let mut w = csv::Writer::from_writer(meta_file_writer(&censor_path, &meta)?);
        w.write_record(["sensor_id", "day", "score", "censored"])?;
        for r in &outcome.censor_records {
            w.write_record([
                r.sensor_id.as_str(),
                &r.day.to_string(),
                &r.score.to_string(),
                &r.censored.to_string(),
            ])?;
        }
        w.flush()?;
        drop(w);

        summaries.push(ModelSummary {
            modality,
            model_path,
            censor_path,
            trained_days: outcome.trained_days,
            censored_days: outcome.censored_days,
            degenerate_days: outcome.degenerate_days,
            first_component_fraction: pca::variance_explained(&outcome.basis, 1),
            retained_fraction: pca::variance_explained(&outcome.basis, cmd.prep.components),
            retained_components: cmd.prep.components,
        });
    }
    Ok(summaries)
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectCommand {
    pub measurements: PathBuf,
    pub model_air: PathBuf,
    /// Needed for the delta method.
    pub model_soil: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub methods: Vec<Method>,
    pub threshold: ThresholdSpec,
    /// Ground truth for calibration.
    pub truth: Option<PathBuf>,
    pub min_precip_mm: f64,
    /// Precision floor for the calibrated operating point.
    pub min_precision: f64,
    /// Days used for calibration (defaults to every scored day).
    pub calib_range: DayRange,
    /// Days to score (defaults to every complete day).
    pub score_range: DayRange,
    pub export_series: bool,
    pub prep: PrepOptions,
}

#[derive(Debug)]
pub struct DetectSummary {
    pub scores_path: PathBuf,
    pub flagged_path: PathBuf,
    pub series_path: Option<PathBuf>,
    pub thresholds: BTreeMap<Method, f64>,
    pub calibrations: BTreeMap<Method, Calibration>,
    pub excluded_days: BTreeMap<Method, usize>,
    pub results: BTreeMap<Method, DetectionResult>,
}

/// Scores the corpus with the requested methods and writes scores plus the
/// flagged-day list.
pub fn cmd_detect(cmd: &DetectCommand) -> Result<DetectSummary> {
    cmd.prep.validate()?;
    if cmd.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let (air_basis, _) = PcaBasis::load_json(&cmd.model_air)?;
    if air_basis.modality != Modality::AirTemperature {
        return Err(Error::BadModel(format!(
            "expected an air_temperature model, found {}",
            air_basis.modality
        )));
    }
    let needs_soil = cmd.methods.contains(&Method::Delta);
    let soil_basis = match (&cmd.model_soil, needs_soil) {
        (Some(path), _) => {
            let (basis, _) = PcaBasis::load_json(path)?;
            if basis.modality != Modality::SoilTemperature {
                return Err(Error::BadModel(format!(
                    "expected a soil_temperature model, found {}",
                    basis.modality
                )));
            }
            Some(basis)
        }
        (None, true) => {
            return Err(Error::InvalidConfig(
                "the delta method needs --model-soil".into(),
            ))
        }
        (None, false) => None,
    };

    let (table, _row_errors) = DayTable::from_csv(&cmd.measurements, cmd.prep.utc_offset)?;
    let air = expand(&table, &air_basis, &cmd.prep, &cmd.score_range)?;
    let soil = soil_basis
        .as_ref()
        .map(|b| expand(&table, b, &cmd.prep, &cmd.score_range))
        .transpose()?;

    let truth = cmd
        .truth
        .as_ref()
        .map(|path| -> Result<EventDaySet> {
            let events = ingest::read_ground_truth_csv(path)?;
            ingest::build_event_days(&events, cmd.min_precip_mm)
        })
        .transpose()?;

    let mut thresholds = BTreeMap::new();
    let mut calibrations = BTreeMap::new();
    let mut excluded_days = BTreeMap::new();
    let mut results = BTreeMap::new();
    for &method in &cmd.methods {
        let ms = method_scores(method, &air, soil.as_ref())?;
        excluded_days.insert(method, ms.excluded.len());
        let threshold = match cmd.threshold {
            ThresholdSpec::Value(v) => v,
            ThresholdSpec::Calibrate => {
                let truth = truth.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("calibration needs --truth".into())
                })?;
                let evaluated: BTreeSet<NaiveDate> = ms
                    .scores
                    .iter()
                    .map(|s| s.day)
                    .filter(|d| cmd.calib_range.contains(*d))
                    .collect();
                let cal =
                    detect::calibrate_threshold(&ms.scores, truth, &evaluated, cmd.min_precision)?;
                calibrations.insert(method, cal);
                cal.threshold
            }
        };
        thresholds.insert(method, threshold);
        results.insert(method, detect::detect(method, &ms.scores, threshold)?);
    }

    std::fs::create_dir_all(&cmd.out_dir)?;
    let thresholds_meta: BTreeMap<String, serde_json::Value> = thresholds
        .iter()
        .map(|(m, t)| (m.to_string(), json_float(*t)))
        .collect();
    let meta = json!({
        "command": "detect",
        "config": cmd,
        "thresholds": thresholds_meta,
        "calibrations": calibrations,
        "training_meta": {
            "air_temperature": air_basis.training_meta,
            "soil_temperature": soil_basis.as_ref().map(|b| &b.training_meta),
        },
    });

    let scores_path = cmd.out_dir.join("scores.csv");
    let mut w = csv::Writer::from_writer(meta_file_writer(&scores_path, &meta)?);
    w.write_record(["date", "method", "score", "flagged"])?;
    for result in results.values() {
        for s in &result.scores {
            w.write_record([
                s.day.to_string(),
                s.method.to_string(),
                s.score.to_string(),
                result.flagged_days.contains(&s.day).to_string(),
            ])?;
        }
    }
    w.flush()?;
    drop(w);

    let flagged_path = cmd.out_dir.join("flagged.csv");
    let mut w = csv::Writer::from_writer(meta_file_writer(&flagged_path, &meta)?);
    w.write_record(["method", "date"])?;
    for result in results.values() {
        for day in &result.flagged_days {
            w.write_record([result.method.to_string(), day.to_string()])?;
        }
    }
    w.flush()?;
    drop(w);

    let series_path = if cmd.export_series {
        let path = cmd.out_dir.join("series.csv");
        let mut w = csv::Writer::from_writer(meta_file_writer(&path, &meta)?);
        w.write_record(["date", "series_name", "value"])?;
        let mut bundles = vec![&air];
        if let Some(soil) = &soil {
            bundles.push(soil);
        }
        for bundle in bundles {
            let tag = match bundle.modality {
                Modality::AirTemperature => "air",
                Modality::SoilTemperature => "soil",
                other => other.as_str(),
            };
            for cs in &bundle.components {
                let k = cs.component;
                for (sensor, series) in &cs.per_sensor {
                    write_series(&mut w, series, &format!("e{k}_{tag}_{sensor}"))?;
                }
                for (sensor, series) in &cs.per_sensor_smoothed {
                    write_series(&mut w, series, &format!("s{k}_{tag}_{sensor}"))?;
                }
                write_series(&mut w, &cs.averaged, &format!("E{k}_{tag}"))?;
                write_series(&mut w, &cs.averaged_smoothed, &format!("S{k}_{tag}"))?;
                write_series(&mut w, &cs.highpassed, &format!("D{k}_{tag}"))?;
            }
        }
        w.flush()?;
        Some(path)
    } else {
        None
    };

    Ok(DetectSummary {
        scores_path,
        flagged_path,
        series_path,
        thresholds,
        calibrations,
        excluded_days,
        results,
    })
}

fn write_series<W: Write>(
    w: &mut csv::Writer<W>,
    series: &DailySeries,
    name: &str,
) -> Result<()> {
    for (day, value) in series.iter() {
        w.write_record([day.to_string().as_str(), name, &value.to_string()])?;
    }
    Ok(())
}

/// Parsed contents of a scores CSV.
#[derive(Debug, Default)]
pub struct ScoresFile {
    pub per_method: BTreeMap<Method, Vec<(NaiveDate, f64, bool)>>,
    pub thresholds: BTreeMap<Method, f64>,
    pub meta: Option<serde_json::Value>,
}

/// Reads a scores CSV (as written by [`cmd_detect`]).
pub fn read_scores_csv(path: &Path) -> Result<ScoresFile> {
    let meta = read_meta_comment(path)?;
    let thresholds = meta
        .as_ref()
        .and_then(|m| m.get("thresholds"))
        .and_then(|t| t.as_object())
        .map(|obj| {
            obj.iter()
                .filter_map(|(k, v)| {
                    Some((k.parse::<Method>().ok()?, parse_json_float(v)?))
                })
                .collect()
        })
        .unwrap_or_default();

    let file = std::io::BufReader::new(File::open(path)?);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    let expected = ["date", "method", "score", "flagged"];
    if headers.iter().zip(expected).any(|(a, b)| a != b) || headers.len() != 4 {
        return Err(Error::MalformedHeader {
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut per_method: BTreeMap<Method, Vec<(NaiveDate, f64, bool)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let day: NaiveDate = record[0]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad date `{}`", &record[0])))?;
        let method: Method = record[1].parse()?;
        let score: f64 = record[2]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad score `{}`", &record[2])))?;
        let flagged: bool = record[3]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad flag `{}`", &record[3])))?;
        per_method.entry(method).or_default().push((day, score, flagged));
    }
    Ok(ScoresFile {
        per_method,
        thresholds,
        meta,
    })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateCommand {
    pub scores: PathBuf,
    pub truth: PathBuf,
    pub out_dir: PathBuf,
    pub min_precip_mm: f64,
    pub eval_range: DayRange,
    pub slack_days: u32,
    /// Overrides the threshold recorded in the scores file.
    pub threshold_override: Option<f64>,
    pub svg: bool,
}

/// Evaluates a scores file against ground truth; writes the report JSON and
/// one PR-curve CSV per method (plus optional SVG figures).
pub fn cmd_evaluate(cmd: &EvaluateCommand) -> Result<Vec<EvalReport>> {
    let scores_file = read_scores_csv(&cmd.scores)?;
    if scores_file.per_method.is_empty() {
        return Err(Error::DataCoverage("scores file has no rows".into()));
    }
    let events = ingest::read_ground_truth_csv(&cmd.truth)?;
    let truth = ingest::build_event_days(&events, cmd.min_precip_mm)?;
    std::fs::create_dir_all(&cmd.out_dir)?;

    let meta = json!({
        "command": "evaluate",
        "config": cmd,
        "scores_meta": scores_file.meta,
    });

    let mut reports = Vec::new();
    for (&method, rows) in &scores_file.per_method {
        let in_range: Vec<&(NaiveDate, f64, bool)> = rows
            .iter()
            .filter(|(day, _, _)| cmd.eval_range.contains(*day))
            .collect();
        let evaluated: BTreeSet<NaiveDate> = in_range.iter().map(|(d, _, _)| *d).collect();
        if evaluated.is_empty() {
            return Err(Error::DataCoverage(format!(
                "no {method} scores inside the evaluation range"
            )));
        }
        let threshold = cmd
            .threshold_override
            .or_else(|| scores_file.thresholds.get(&method).copied())
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "scores file records no threshold for {method}; pass one explicitly"
                ))
            })?;
        let scores: Vec<DayScore> = in_range
            .iter()
            .map(|(day, score, _)| DayScore {
                day: *day,
                method,
                score: *score,
            })
            .collect();
        let flagged_days: BTreeSet<NaiveDate> = if cmd.threshold_override.is_some() {
            scores
                .iter()
                .filter(|s| s.score < threshold)
                .map(|s| s.day)
                .collect()
        } else {
            in_range
                .iter()
                .filter(|(_, _, flagged)| *flagged)
                .map(|(d, _, _)| *d)
                .collect()
        };
        let result = DetectionResult {
            method,
            threshold,
            flagged_days,
            scores: scores.clone(),
        };
        let mut report = eval::confusion_with_slack(&result, &truth, &evaluated, cmd.slack_days)?;
        report.pr_curve = eval::pr_curve(&scores, &truth, &evaluated);

        let pr_path = cmd.out_dir.join(format!("pr_curve_{method}.csv"));
        let mut w = csv::Writer::from_writer(meta_file_writer(&pr_path, &meta)?);
        w.write_record(["threshold", "precision", "recall"])?;
        for p in &report.pr_curve {
            w.write_record([
                p.threshold.to_string(),
                p.precision.map(|v| v.to_string()).unwrap_or_default(),
                p.recall.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        drop(w);

        if cmd.svg {
            let curve_points: Vec<(f64, f64)> = report
                .pr_curve
                .iter()
                .filter_map(|p| Some((p.recall?, p.precision?)))
                .collect();
            let plot = LinePlot {
                title: format!("precision-recall, {method} method"),
                x_label: "recall".into(),
                y_label: "precision".into(),
                series: vec![PlotSeries {
                    name: method.to_string(),
                    points: curve_points,
                }],
                markers: Vec::new(),
                meta: Some(meta.to_string()),
            };
            std::fs::write(
                cmd.out_dir.join(format!("pr_curve_{method}.svg")),
                plot.to_svg(),
            )?;
        }

        reports.push(report);
    }

    if cmd.svg {
        let first_day = scores_file
            .per_method
            .values()
            .flat_map(|rows| rows.iter().map(|(d, _, _)| *d))
            .min()
            .unwrap();
        let day_x = |d: NaiveDate| (d - first_day).num_days() as f64;
        let series: Vec<PlotSeries> = scores_file
            .per_method
            .iter()
            .map(|(method, rows)| PlotSeries {
                name: method.to_string(),
                points: rows
                    .iter()
                    .filter(|(d, _, _)| cmd.eval_range.contains(*d))
                    .map(|(d, score, _)| (day_x(*d), *score))
                    .collect(),
            })
            .collect();
        let markers: Vec<f64> = truth
            .days
            .iter()
            .filter(|d| cmd.eval_range.contains(**d))
            .map(|d| day_x(*d))
            .collect();
        let plot = LinePlot {
            title: "projection scores with event markers".into(),
            x_label: format!("days since {first_day}"),
            y_label: "score".into(),
            series,
            markers,
            meta: Some(meta.to_string()),
        };
        std::fs::write(cmd.out_dir.join("scores.svg"), plot.to_svg())?;
    }

    let report_path = cmd.out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&json!({
        "meta": meta,
        "reports": reports,
    }))?;
    text.push('\n');
    std::fs::write(report_path, text)?;
    Ok(reports)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorePlotCommand {
    pub scores: PathBuf,
    pub truth: Option<PathBuf>,
    pub min_precip_mm: f64,
    pub out_dir: PathBuf,
}

/// Renders the score-series figure (one line per method, event markers at
/// the bottom) from an existing scores file.
pub fn cmd_report_scores(cmd: &ScorePlotCommand) -> Result<PathBuf> {
    let scores_file = read_scores_csv(&cmd.scores)?;
    if scores_file.per_method.is_empty() {
        return Err(Error::DataCoverage("scores file has no rows".into()));
    }
    let truth = cmd
        .truth
        .as_ref()
        .map(|path| -> Result<EventDaySet> {
            let events = ingest::read_ground_truth_csv(path)?;
            ingest::build_event_days(&events, cmd.min_precip_mm)
        })
        .transpose()?;
    std::fs::create_dir_all(&cmd.out_dir)?;
    let meta = json!({"command": "report", "config": cmd, "scores_meta": scores_file.meta});

    let first_day = scores_file
        .per_method
        .values()
        .flat_map(|rows| rows.iter().map(|(d, _, _)| *d))
        .min()
        .unwrap();
    let day_x = |d: NaiveDate| (d - first_day).num_days() as f64;
    let plot = LinePlot {
        title: "projection scores with event markers".into(),
        x_label: format!("days since {first_day}"),
        y_label: "score".into(),
        series: scores_file
            .per_method
            .iter()
            .map(|(method, rows)| PlotSeries {
                name: method.to_string(),
                points: rows.iter().map(|(d, score, _)| (day_x(*d), *score)).collect(),
            })
            .collect(),
        markers: truth
            .map(|t| t.days.iter().map(|d| day_x(*d)).collect())
            .unwrap_or_default(),
        meta: Some(meta.to_string()),
    };
    let path = cmd.out_dir.join("scores.svg");
    std::fs::write(&path, plot.to_svg())?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualCommand {
    pub measurements: PathBuf,
    pub model: PathBuf,
    pub sensor_id: String,
    pub day: NaiveDate,
    pub out_dir: PathBuf,
    pub prep: PrepOptions,
}

/// Writes the measurement-vs-reconstruction residual trace for one
/// sensor-day (the event-evidence figure), as CSV and SVG.
pub fn cmd_report_residual(cmd: &ResidualCommand) -> Result<(PathBuf, PathBuf)> {
    cmd.prep.validate()?;
    let (basis, _) = PcaBasis::load_json(&cmd.model)?;
    let (table, _) = DayTable::from_csv(&cmd.measurements, cmd.prep.utc_offset)?;
    let day = table
        .entries()
        .find(|(sensor, modality, _)| *sensor == cmd.sensor_id && *modality == basis.modality)
        .and_then(|(_, _, days)| days.iter().find(|d| d.day == cmd.day))
        .ok_or_else(|| {
            Error::DataCoverage(format!(
                "no {} data for sensor {} on {}",
                basis.modality, cmd.sensor_id, cmd.day
            ))
        })?;
    if !day.is_complete() {
        return Err(Error::InsufficientData {
            need: preprocess::SLOTS_PER_DAY,
            got: day.filled,
        });
    }
    let norm = preprocess::center_and_normalize(day)?;
    let coeffs = pca::project(&norm, &basis, cmd.prep.components)?;
    let recon = pca::reconstruct(&coeffs, &basis)?;
    let measured: Vec<f64> = day.slots.iter().map(|s| s.unwrap()).collect();

    std::fs::create_dir_all(&cmd.out_dir)?;
    let meta = json!({"command": "report-residual", "config": cmd});
    let csv_path = cmd
        .out_dir
        .join(format!("residual_{}_{}.csv", cmd.sensor_id, cmd.day));
    let mut w = csv::Writer::from_writer(meta_file_writer(&csv_path, &meta)?);
    w.write_record(["slot", "measured", "reconstructed", "residual"])?;
    for (j, (&m, &r)) in measured.iter().zip(&recon).enumerate() {
        w.write_record([
            j.to_string(),
            m.to_string(),
            r.to_string(),
            (m - r).to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);

    let plot = LinePlot {
        title: format!("measurement vs model, {} {}", cmd.sensor_id, cmd.day),
        x_label: "10-minute slot".into(),
        y_label: "temperature".into(),
        series: vec![
            PlotSeries {
                name: "measured".into(),
                points: measured.iter().enumerate().map(|(j, &v)| (j as f64, v)).collect(),
            },
            PlotSeries {
                name: "reconstructed".into(),
                points: recon.iter().enumerate().map(|(j, &v)| (j as f64, v)).collect(),
            },
            PlotSeries {
                name: "residual".into(),
                points: measured
                    .iter()
                    .zip(&recon)
                    .enumerate()
                    .map(|(j, (&m, &r))| (j as f64, m - r))
                    .collect(),
            },
        ],
        markers: Vec::new(),
        meta: Some(meta.to_string()),
    };
    let svg_path = cmd
        .out_dir
        .join(format!("residual_{}_{}.svg", cmd.sensor_id, cmd.day));
    std::fs::write(&svg_path, plot.to_svg())?;
    Ok((csv_path, svg_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_spec_parses() {
        assert_eq!(
            "calibrate".parse::<ThresholdSpec>().unwrap(),
            ThresholdSpec::Calibrate
        );
        assert_eq!(
            "-0.25".parse::<ThresholdSpec>().unwrap(),
            ThresholdSpec::Value(-0.25)
        );
        assert_eq!(
            "inf".parse::<ThresholdSpec>().unwrap(),
            ThresholdSpec::Value(f64::INFINITY)
        );
        assert!("nope".parse::<ThresholdSpec>().is_err());
    }

    #[test]
    fn threshold_spec_serde_round_trip() {
        for spec in [
            ThresholdSpec::Calibrate,
            ThresholdSpec::Value(1.5),
            ThresholdSpec::Value(f64::INFINITY),
            ThresholdSpec::Value(f64::NEG_INFINITY),
        ] {
            let json = serde_json::to_string(&spec).unwrap();
            let back: ThresholdSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn meta_comment_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let meta = json!({"command": "detect", "seed": 3});
        let mut w = meta_file_writer(&path, &meta).unwrap();
        writeln!(w, "a,b").unwrap();
        drop(w);
        let back = read_meta_comment(&path).unwrap();
        assert_eq!(back, Some(meta));
    }

    #[test]
    fn day_table_groups_by_sensor_and_modality() {
        let config = SynthConfig {
            n_sensors: 2,
            n_days: 3,
            n_events: 0,
            ..SynthConfig::default()
        };
        let data = synth::generate(&config).unwrap();
        let table =
            DayTable::from_measurements(data.measurements, crate::config::default_utc_offset());
        let keys: Vec<(String, Modality)> = table.map.keys().cloned().collect();
        assert_eq!(
            keys,
            vec![
                ("s01".to_string(), Modality::AirTemperature),
                ("s01".to_string(), Modality::SoilTemperature),
                ("s02".to_string(), Modality::AirTemperature),
                ("s02".to_string(), Modality::SoilTemperature),
            ]
        );
        for (_, _, days) in table.entries() {
            assert_eq!(days.len(), 3);
            assert!(days.iter().all(|d| d.is_complete()));
        }
    }
}
