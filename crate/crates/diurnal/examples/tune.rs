//! Scratch experiment: run the full in-memory pipeline on the default
//! synthetic corpus and print the numbers the acceptance suite pins.

use std::collections::BTreeSet;

use diurnal::config::{DayRange, PrepOptions};
use diurnal::detect::{self, Method};
use diurnal::eval;
use diurnal::ingest::{build_event_days, Modality};
use diurnal::pca;
use diurnal::pipeline::{self, DayTable};
use diurnal::preprocess;
use diurnal::synth::{self, SynthConfig};

fn main() {
    let config = SynthConfig::default();
    let prep = PrepOptions::default();
    let t0 = std::time::Instant::now();

    let plan = synth::plan(&config).unwrap();
    let mut table_input = Vec::new();
    for i in 0..config.n_sensors {
        table_input.extend(synth::sensor_measurements(&config, &plan, i));
    }
    println!("generated {} rows in {:?}", table_input.len(), t0.elapsed());

    let table = DayTable::from_measurements(table_input, prep.utc_offset);
    println!("aggregated in {:?}", t0.elapsed());

    let range = DayRange::default();
    let air = pipeline::train_basis(&table, Modality::AirTemperature, &range, &prep).unwrap();
    let soil = pipeline::train_basis(&table, Modality::SoilTemperature, &range, &prep).unwrap();
    println!(
        "air basis: {} days ({} censored), v1 {:.4}, v1..4 {:.4}",
        air.trained_days,
        air.censored_days,
        pca::variance_explained(&air.basis, 1),
        pca::variance_explained(&air.basis, 4)
    );
    println!(
        "soil basis: {} days ({} censored), v1 {:.4}, v1..4 {:.4}",
        soil.trained_days,
        soil.censored_days,
        pca::variance_explained(&soil.basis, 1),
        pca::variance_explained(&soil.basis, 4)
    );

    let air_exp = pipeline::expand(&table, &air.basis, &prep, &range).unwrap();
    let soil_exp = pipeline::expand(&table, &soil.basis, &prep, &range).unwrap();
    let truth = build_event_days(&plan.truth, 3.0).unwrap();
    println!("truth: {} event days", truth.days.len());

    for method in Method::ALL {
        let ms = pipeline::method_scores(method, &air_exp, Some(&soil_exp)).unwrap();
        let evaluated: BTreeSet<chrono::NaiveDate> = ms.scores.iter().map(|s| s.day).collect();
        match detect::calibrate_threshold(&ms.scores, &truth, &evaluated, 0.5) {
            Ok(cal) => {
                let result = detect::detect(method, &ms.scores, cal.threshold).unwrap();
                let report = eval::confusion(&result, &truth, &evaluated).unwrap();
                println!(
                    "{method:8}: threshold {:+.5}  precision {:.3}  recall {:.3}  (tp {} fp {} fn {})",
                    cal.threshold,
                    report.precision.unwrap(),
                    report.recall.unwrap(),
                    report.true_positives,
                    report.false_positives,
                    report.false_negatives,
                );
            }
            Err(e) => println!("{method:8}: calibration failed: {e}"),
        }
        if method == Method::Delta {
            let curve = eval::pr_curve(&ms.scores, &truth, &evaluated);
            let good = curve
                .iter()
                .filter(|p| p.recall.unwrap_or(0.0) >= 0.9)
                .filter_map(|p| p.precision)
                .fold(f64::NEG_INFINITY, f64::max);
            println!("delta: best precision at recall>=0.9: {good:.3}");
        }
    }

    // dump per-day series for offline analysis
    {
        use std::io::Write;
        let mut f = std::fs::File::create("/tmp/tune_series.csv").unwrap();
        writeln!(f, "day,e1_air,d1_air,d1_soil,delta,event").unwrap();
        let air1 = &air_exp.components[0];
        let soil1 = &soil_exp.components[0];
        for (day, e1) in air1.averaged.iter() {
            let da = air1.highpassed.get(day);
            let ds = soil1.highpassed.get(day);
            writeln!(
                f,
                "{day},{e1},{},{},{},{}",
                da.map(|v| v.to_string()).unwrap_or_default(),
                ds.map(|v| v.to_string()).unwrap_or_default(),
                da.zip(ds).map(|(a, b)| (a - b).to_string()).unwrap_or_default(),
                truth.days.contains(&day) as u8
            )
            .unwrap();
        }
        println!("wrote /tmp/tune_series.csv");
    }

    // residual localization over every injected event (air channel);
    // run on a corpus without bad days (jitter is a censoring concern)
    let mut loc_config = config.clone();
    loc_config.bad_day_rate = 0.0;
    let loc_plan = synth::plan(&loc_config).unwrap();
    let mut loc_rows = Vec::new();
    for i in 0..loc_config.n_sensors {
        loc_rows.extend(synth::sensor_measurements(&loc_config, &loc_plan, i));
    }
    let loc_table = DayTable::from_measurements(loc_rows, prep.utc_offset);
    let loc_air =
        pipeline::train_basis(&loc_table, Modality::AirTemperature, &range, &prep).unwrap();
    let mut ok = 0usize;
    let mut total = 0usize;
    let mut misses: Vec<(String, chrono::NaiveDate, usize, usize, f64)> = Vec::new();
    for (sensor, modality, days) in loc_table.entries() {
        if modality != Modality::AirTemperature {
            continue;
        }
        for day in days {
            let Some(window) = loc_plan.event_windows.get(&day.day) else {
                continue;
            };
            if !day.is_complete() {
                continue;
            }
            total += 1;
            let norm = preprocess::center_and_normalize(day).unwrap();
            let coeffs = pca::project(&norm, &loc_air.basis, 4).unwrap();
            let recon = pca::reconstruct(&coeffs, &loc_air.basis).unwrap();
            let peak = day
                .slots
                .iter()
                .map(|s| s.unwrap())
                .zip(&recon)
                .map(|(m, r)| (m - r).abs())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, _)| j)
                .unwrap();
            // envelope support is [start-1, start+dur+1); +-2 slots around it
            let lo = window.start_slot.saturating_sub(3);
            let hi = window.start_slot + window.duration_slots + 3;
            if peak >= lo && peak < hi {
                ok += 1;
            } else {
                misses.push((
                    sensor.to_string(),
                    day.day,
                    peak,
                    window.start_slot,
                    window.depth_c,
                ));
            }
        }
    }
    println!("residual localization: {ok}/{total} in window");
    for m in misses.iter().take(8) {
        println!("  miss: {m:?}");
    }
    println!("total {:?}", t0.elapsed());
}
