//! File formats: pattern parameters (TOML), pattern samples, waveforms,
//! sweep and trial tables, spectra (CSV), and JSON result records.
//! Every writer replaces its target atomically.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::SpatialSpectrum;
use crate::experiments::{SweepReport, TrialReport};
use crate::pattern::{GaussianComponent, GaussianMixturePattern, PatternSample};
use crate::pipeline::Recording;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative tolerance on the sample-interval uniformity of waveform files.
const TIME_STEP_RTOL: f64 = 1e-6;

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn check_schema_version(found: u32, context: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::parse(
            context,
            format!("unsupported schema_version {found}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    schema_version: u32,
    components: Vec<GaussianComponent>,
}

pub fn pattern_to_toml(p: &GaussianMixturePattern) -> String {
    let file = PatternFile {
        schema_version: SCHEMA_VERSION,
        components: p.components().to_vec(),
    };
    toml::to_string(&file).expect("pattern serialises")
}

pub fn pattern_from_toml(text: &str, context: &str) -> Result<GaussianMixturePattern> {
    let file: PatternFile = toml::from_str(text).map_err(|e| Error::parse(context, e.to_string()))?;
    check_schema_version(file.schema_version, context)?;
    GaussianMixturePattern::new(file.components)
}

pub fn read_pattern(path: &Path) -> Result<GaussianMixturePattern> {
    pattern_from_toml(&read_to_string(path)?, &path.display().to_string())
}

pub fn write_pattern(path: &Path, p: &GaussianMixturePattern) -> Result<()> {
    write_atomic(path, pattern_to_toml(p).as_bytes())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(headers: &csv::StringRecord, expected: &[&str], context: &str) -> Result<()> {
    for (i, want) in expected.iter().enumerate() {
        match headers.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(Error::parse(
                    context,
                    format!("column {} is `{got}`, expected `{want}`", i + 1),
                ))
            }
            None => return Err(Error::parse(context, format!("missing column `{want}`"))),
        }
    }
    if let Some(extra) = headers.get(expected.len()) {
        return Err(Error::parse(context, format!("unexpected column `{extra}`")));
    }
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize, column: &str, line: usize, context: &str) -> Result<f64> {
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::parse(context, format!("line {line}: missing `{column}`")))?;
    raw.parse::<f64>()
        .map_err(|_| Error::parse(context, format!("line {line}: `{column}` value `{raw}` is not a number")))
}

pub fn samples_from_csv(text: &str, context: &str) -> Result<Vec<PatternSample>> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| Error::parse(context, e.to_string()))?.clone();
    check_header(&headers, &["angle_deg", "gain"], context)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(context, e.to_string()))?;
        let line = i + 2;
        let angle = field(&rec, 0, "angle_deg", line, context)?;
        let gain = field(&rec, 1, "gain", line, context)?;
        out.push(PatternSample::new(angle, gain)?);
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<Vec<PatternSample>> {
    samples_from_csv(&read_to_string(path)?, &path.display().to_string())
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn write_samples(path: &Path, samples: &[PatternSample]) -> Result<()> {
    let rows = samples
        .iter()
        .map(|s| vec![s.angle_deg.to_string(), s.gain.to_string()]);
    write_atomic(path, &csv_bytes(&strings(&["angle_deg", "gain"]), rows))
}

/// Parse `time_s,ch1,...,chN`. The sample rate is recovered from the time column.
pub fn waveform_from_csv(text: &str, context: &str) -> Result<Recording> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| Error::parse(context, e.to_string()))?.clone();
    let n = headers.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::parse(context, "waveform needs `time_s` and at least one channel column"));
    }
    let expected: Vec<String> = std::iter::once("time_s".to_string())
        .chain((1..=n).map(|k| format!("ch{k}")))
        .collect();
    check_header(&headers, &expected.iter().map(String::as_str).collect::<Vec<_>>(), context)?;

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(context, e.to_string()))?;
        let line = i + 2;
        times.push(field(&rec, 0, "time_s", line, context)?);
        for (k, col) in expected.iter().enumerate().skip(1) {
            values.push(field(&rec, k, col, line, context)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::parse(context, "waveform needs at least 2 samples"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::parse(context, "time_s must be strictly increasing"));
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if step <= 0.0 {
            return Err(Error::parse(context, format!("line {}: time_s not strictly increasing", i + 3)));
        }
        if (step - dt).abs() > TIME_STEP_RTOL * dt {
            return Err(Error::parse(context, format!("line {}: non-uniform time step", i + 3)));
        }
    }
    let l = times.len();
    let channels = DMatrix::from_row_slice(l, n, &values).transpose();
    Recording::new(1.0 / dt, channels)
}

pub fn read_waveform(path: &Path) -> Result<Recording> {
    waveform_from_csv(&read_to_string(path)?, &path.display().to_string())
}

/// Channels are written in recording order; the time column starts at zero.
pub fn waveform_to_csv(rec: &Recording) -> Vec<u8> {
    let n = rec.n_channels();
    let header: Vec<String> = std::iter::once("time_s".to_string())
        .chain((1..=n).map(|k| format!("ch{k}")))
        .collect();
    let fs = rec.sample_rate_hz();
    let data = rec.channels();
    let rows = (0..rec.len()).map(|t| {
        std::iter::once((t as f64 / fs).to_string())
            .chain((0..n).map(|k| data[(k, t)].to_string()))
            .collect()
    });
    csv_bytes(&header, rows)
}

pub fn write_waveform(path: &Path, rec: &Recording) -> Result<()> {
    write_atomic(path, &waveform_to_csv(rec))
}

pub fn sweep_to_csv(report: &SweepReport) -> Vec<u8> {
    let header = strings(&["setting", "accuracy", "mean_err", "std_err", "min_err", "max_err", "n"]);
    let rows = report.rows.iter().map(|r| {
        let s = &r.stats;
        vec![
            r.setting.to_string(),
            s.accuracy.to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            s.n.to_string(),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    write_atomic(path, &sweep_to_csv(report))
}

pub fn trials_to_csv(trials: &[TrialReport]) -> Vec<u8> {
    let header = strings(&["trial", "true_deg", "estimated_deg", "error_deg", "success"]);
    let rows = trials.iter().map(|t| {
        vec![
            t.trial.to_string(),
            t.true_deg.to_string(),
            t.estimated_deg.to_string(),
            t.error_deg.to_string(),
            t.success.to_string(),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn write_trials(path: &Path, trials: &[TrialReport]) -> Result<()> {
    write_atomic(path, &trials_to_csv(trials))
}

pub fn spectrum_to_csv(s: &SpatialSpectrum) -> Vec<u8> {
    let rows = s
        .grid_deg
        .iter()
        .zip(&s.values)
        .map(|(a, v)| vec![a.to_string(), v.to_string()]);
    csv_bytes(&strings(&["angle_deg", "p_mu"]), rows)
}

pub fn write_spectrum(path: &Path, s: &SpatialSpectrum) -> Result<()> {
    write_atomic(path, &spectrum_to_csv(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_round_trip() {
        let p = GaussianMixturePattern::reference();
        let text = pattern_to_toml(&p);
        assert!(text.starts_with("schema_version = 1"));
        assert_eq!(pattern_from_toml(&text, "t").unwrap(), p);
    }

    #[test]
    fn pattern_file_validation() {
        let bad_version = "schema_version = 2\n[[components]]\namplitude = 1.0\ncenter_deg = 0.0\nwidth_deg = 1.0\n";
        assert!(matches!(pattern_from_toml(bad_version, "t"), Err(Error::Parse { .. })));
        let bad_width = "schema_version = 1\n[[components]]\namplitude = 1.0\ncenter_deg = 0.0\nwidth_deg = 0.0\n";
        assert!(matches!(pattern_from_toml(bad_width, "t"), Err(Error::InvalidInput(_))));
        let empty = "schema_version = 1\ncomponents = []\n";
        assert!(pattern_from_toml(empty, "t").is_err());
    }

    #[test]
    fn samples_parse_and_errors() {
        let s = samples_from_csv("angle_deg,gain\n0,0.5\n1, 0.25\n", "t").unwrap();
        assert_eq!(s, vec![PatternSample::new(0.0, 0.5).unwrap(), PatternSample::new(1.0, 0.25).unwrap()]);
        let err = samples_from_csv("angle,gain\n0,1\n", "t").unwrap_err().to_string();
        assert!(err.contains("`angle`"), "{err}");
        let err = samples_from_csv("angle_deg,gain\n0,x\n", "t").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("gain"), "{err}");
    }

    #[test]
    fn waveform_round_trip() {
        let data = DMatrix::from_fn(3, 50, |i, j| (i as f64 + 1.0) * (j as f64 * 0.37).sin());
        let rec = Recording::new(10e9, data).unwrap();
        let text = String::from_utf8(waveform_to_csv(&rec)).unwrap();
        assert!(text.starts_with("time_s,ch1,ch2,ch3\n"));
        let back = waveform_from_csv(&text, "t").unwrap();
        assert_eq!(back.channels(), rec.channels());
        assert!((back.sample_rate_hz() - 10e9).abs() < 1e-3);
    }

    #[test]
    fn waveform_header_errors_name_the_column() {
        let err = waveform_from_csv("time_s,ch1,chan2\n0,1,2\n1,1,2\n", "t").unwrap_err().to_string();
        assert!(err.contains("column 3") && err.contains("`chan2`"), "{err}");
        let err = waveform_from_csv("t,ch1\n0,1\n1,1\n", "t").unwrap_err().to_string();
        assert!(err.contains("`t`"), "{err}");
        let err = waveform_from_csv("time_s,ch1\n0,1\n1,oops\n", "t").unwrap_err().to_string();
        assert!(err.contains("ch1") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn waveform_time_axis_checks() {
        assert!(waveform_from_csv("time_s,ch1\n0,1\n2,1\n1,1\n", "t").is_err());
        assert!(waveform_from_csv("time_s,ch1\n0,1\n1,1\n3,1\n", "t").is_err());
        assert!(waveform_from_csv("time_s,ch1\n0,1\n", "t").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let missing = dir.path().join("no/such/dir/out.txt");
        assert!(matches!(write_atomic(&missing, b"x"), Err(Error::Io { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_samples(Path::new("/nonexistent/samples.csv")).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/samples.csv"), "{err}");
    }
}
