//! Loading and resampling of center-of-pressure recordings.
//!
//! Force platforms such as the Wii Balance Board deliver samples at an
//! irregular rate. Recordings are read from a small CSV format and brought
//! onto a uniform time grid before feature extraction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default output rate of [`resample`].
pub const DEFAULT_RATE_HZ: f64 = 25.0;

/// One timestamped CoP sample: `t` in seconds, `x` (medio-lateral) and `y`
/// (antero-posterior) in centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// An irregularly sampled CoP trajectory, as acquired.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    subject_id: String,
    samples: Vec<Sample>,
}

impl RawRecording {
    /// Validates and wraps a sample sequence.
    ///
    /// Requires at least two samples, finite values and strictly increasing
    /// timestamps.
    pub fn new(subject_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "recording needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::Validation(format!("non-finite value in sample {}", i + 1)));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::Validation(format!(
                    "non-increasing timestamps at sample {}",
                    i + 1
                )));
            }
        }
        Ok(RawRecording {
            subject_id: subject_id.into(),
            samples,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }
}

/// A CoP trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statokinesigram {
    subject_id: String,
    rate_hz: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Statokinesigram {
    pub fn new(subject_id: impl Into<String>, rate_hz: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("rate must be positive, got {rate_hz}")));
        }
        if x.len() != y.len() {
            return Err(Error::Validation(format!(
                "x and y lengths differ ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::Validation("statokinesigram needs at least 2 samples".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("statokinesigram contains non-finite values".into()));
        }
        Ok(Statokinesigram {
            subject_id: subject_id.into(),
            rate_hz,
            x,
            y,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The trajectory as timestamped samples starting at `t = 0`.
    pub fn to_raw(&self) -> RawRecording {
        let samples = self
            .x
            .iter()
            .zip(&self.y)
            .enumerate()
            .map(|(k, (&x, &y))| Sample {
                t: k as f64 / self.rate_hz,
                x,
                y,
            })
            .collect();
        RawRecording {
            subject_id: self.subject_id.clone(),
            samples,
        }
    }
}

/// Reads a trajectory CSV with header `t,x,y`.
///
/// The subject id defaults to the file stem; a comment line of the form
/// `# subject_id: <id>` before the header overrides it. Blank lines and other
/// `#` comments are ignored.
pub fn read_recording(path: impl AsRef<Path>) -> Result<RawRecording> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut subject_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut columns: Option<[usize; 3]> = None;
    let mut samples = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("subject_id") {
                let id = id.trim_start_matches([':', '=', ' ']).trim();
                if columns.is_none() && !id.is_empty() {
                    subject_id = id.to_string();
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(cols) = columns else {
            let find = |name: &str| {
                fields
                    .iter()
                    .position(|f| *f == name)
                    .ok_or_else(|| Error::parse(path, line_no, format!("header is missing column `{name}`")))
            };
            columns = Some([find("t")?, find("x")?, find("y")?]);
            continue;
        };
        let value = |col: usize, name: &str| -> Result<f64> {
            let field = fields
                .get(col)
                .ok_or_else(|| Error::parse(path, line_no, format!("missing `{name}` field")))?;
            field
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("invalid `{name}` value `{field}`")))
        };
        let sample = Sample {
            t: value(cols[0], "t")?,
            x: value(cols[1], "x")?,
            y: value(cols[2], "y")?,
        };
        if !(sample.t.is_finite() && sample.x.is_finite() && sample.y.is_finite()) {
            return Err(Error::Validation(format!(
                "{}:{line_no}: non-finite value in row",
                path.display()
            )));
        }
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if sample.t <= prev {
                return Err(Error::Validation(format!(
                    "{}:{line_no}: non-increasing timestamps",
                    path.display()
                )));
            }
        }
        samples.push(sample);
    }
    if columns.is_none() {
        return Err(Error::parse(path, 1, "missing `t,x,y` header"));
    }
    RawRecording::new(subject_id, samples).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Resamples a recording onto the grid `t_k = t_0 + k / rate_hz`.
///
/// Each grid value is the mean of the input samples lying strictly inside
/// `t_k ± window_s / 2`, weighted by the time interval each sample stands for
/// (half the distance between its two neighbours). Grid points whose window
/// holds no sample are filled by linear interpolation between the nearest
/// filled neighbours, or copied from the single nearest one at the edges.
///
/// Samples exactly on a window boundary are excluded, so with the default
/// window of two sample periods a uniform input maps to itself and resampling
/// is idempotent.
pub fn resample(rec: &RawRecording, rate_hz: f64, window_s: f64) -> Result<Statokinesigram> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {rate_hz}")));
    }
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::InvalidArgument(format!("window must be positive, got {window_s}")));
    }
    let duration = rec.duration();
    let period = 1.0 / rate_hz;
    if duration < period {
        return Err(Error::Validation(format!(
            "recording too short: {duration} s at {rate_hz} Hz"
        )));
    }

    let samples = rec.samples();
    let n = samples.len();
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let lo = if i == 0 { samples[0].t } else { samples[i - 1].t };
            let hi = if i + 1 == n { samples[n - 1].t } else { samples[i + 1].t };
            0.5 * (hi - lo)
        })
        .collect();

    let t0 = samples[0].t;
    // Tolerance keeps the grid from losing its last point to rounding in duration * rate.
    let n_out = (duration * rate_hz + 1e-9).floor() as usize + 1;
    let half = 0.5 * window_s * (1.0 - 1e-9);

    let mut x_out: Vec<Option<f64>> = Vec::with_capacity(n_out);
    let mut y_out: Vec<Option<f64>> = Vec::with_capacity(n_out);
    let mut start = 0;
    for k in 0..n_out {
        let tk = t0 + k as f64 / rate_hz;
        while start < n && samples[start].t <= tk - half {
            start += 1;
        }
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let mut i = start;
        while i < n && samples[i].t < tk + half {
            sw += weights[i];
            sx += weights[i] * samples[i].x;
            sy += weights[i] * samples[i].y;
            i += 1;
        }
        if sw > 0.0 {
            // Clamp so rounding cannot push the weighted mean outside the inputs it averages.
            let (xmin, xmax, ymin, ymax) = samples[start..i].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), s| (a.min(s.x), b.max(s.x), c.min(s.y), d.max(s.y)),
            );
            x_out.push(Some((sx / sw).clamp(xmin, xmax)));
            y_out.push(Some((sy / sw).clamp(ymin, ymax)));
        } else if i > start {
            // Every sample in the window has zero weight: plain mean.
            let m = (i - start) as f64;
            x_out.push(Some(samples[start..i].iter().map(|s| s.x).sum::<f64>() / m));
            y_out.push(Some(samples[start..i].iter().map(|s| s.y).sum::<f64>() / m));
        } else {
            x_out.push(None);
            y_out.push(None);
        }
    }

    Statokinesigram::new(rec.subject_id(), rate_hz, fill_gaps(&x_out), fill_gaps(&y_out))
}

/// Resamples with the default two-period window.
pub fn resample_default(rec: &RawRecording, rate_hz: f64) -> Result<Statokinesigram> {
    resample(rec, rate_hz, 2.0 / rate_hz)
}

fn fill_gaps(values: &[Option<f64>]) -> Vec<f64> {
    let filled: Vec<usize> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    debug_assert!(!filled.is_empty(), "first grid point always contains t_0");
    let mut out = Vec::with_capacity(values.len());
    let mut next = 0;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            out.push(*v);
            continue;
        }
        while next < filled.len() && filled[next] < i {
            next += 1;
        }
        let left = next.checked_sub(1).map(|j| filled[j]);
        let right = filled.get(next).copied();
        let value = match (left, right) {
            (Some(l), Some(r)) => {
                let (vl, vr) = (values[l].unwrap(), values[r].unwrap());
                let w = (i - l) as f64 / (r - l) as f64;
                vl + w * (vr - vl)
            }
            (Some(l), None) => values[l].unwrap(),
            (None, Some(r)) => values[r].unwrap(),
            (None, None) => unreachable!("at least one grid point is filled"),
        };
        out.push(value);
    }
    out
}
