use std::path::Path;

use super::AbrError;

/// Piecewise-constant throughput: sample `j` holds from its timestamp until
/// the next one. The last sample lasts as long as the interval before it (one
/// second for a single-sample trace). Time past the end wraps around.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    /// Segment start offsets from the first timestamp.
    starts: Vec<f64>,
    kbps: Vec<f64>,
    period: f64,
}

impl NetworkTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, AbrError> {
        if samples.is_empty() {
            return Err(AbrError::BadTrace("no samples".into()));
        }
        for (i, &(t, bw)) in samples.iter().enumerate() {
            if !t.is_finite() || !(bw > 0.0 && bw.is_finite()) {
                return Err(AbrError::BadTrace(format!("sample {i}: ({t}, {bw})")));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(AbrError::BadTrace(format!(
                    "timestamps not strictly increasing at sample {i}"
                )));
            }
        }
        let t0 = samples[0].0;
        let starts: Vec<f64> = samples.iter().map(|&(t, _)| t - t0).collect();
        let last = match starts.len() {
            1 => 1.0,
            n => starts[n - 1] - starts[n - 2],
        };
        Ok(Self {
            period: starts[starts.len() - 1] + last,
            starts,
            kbps: samples.iter().map(|&(_, b)| b).collect(),
        })
    }

    pub fn constant(kbps: f64) -> Result<Self, AbrError> {
        Self::new(vec![(0.0, kbps)])
    }

    /// Two whitespace- or comma-separated columns: seconds, kbps. Blank lines
    /// and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, AbrError> {
        let mut samples = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let err = |msg: String| AbrError::TraceParse { line: n + 1, msg };
            if fields.len() != 2 {
                return Err(err(format!("expected 2 columns, found {}", fields.len())));
            }
            let t: f64 = fields[0]
                .parse()
                .map_err(|_| err(format!("bad timestamp {:?}", fields[0])))?;
            let bw: f64 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad throughput {:?}", fields[1])))?;
            if !(bw > 0.0) {
                return Err(err(format!("throughput must be positive, got {bw}")));
            }
            if let Some(&(prev, _)) = samples.last() {
                if t <= prev {
                    return Err(err(format!("timestamp {t} not after {prev}")));
                }
            }
            samples.push((t, bw));
        }
        Self::new(samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AbrError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AbrError::BadTrace(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Two-column text that [`NetworkTrace::parse`] reads back exactly.
    pub fn to_text(&self) -> String {
        self.starts
            .iter()
            .zip(&self.kbps)
            .map(|(t, b)| format!("{t} {b}\n"))
            .collect()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn mean_kbps(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.kbps.len() {
            acc += self.kbps[j] * (self.segment_end(j) - self.starts[j]);
        }
        acc / self.period
    }

    fn segment_end(&self, j: usize) -> f64 {
        self.starts.get(j + 1).copied().unwrap_or(self.period)
    }

    /// Throughput in effect at time `t`.
    pub fn kbps_at(&self, t: f64) -> f64 {
        self.kbps[self.segment(t.rem_euclid(self.period))]
    }

    fn segment(&self, offset: f64) -> usize {
        self.starts
            .partition_point(|&s| s <= offset)
            .saturating_sub(1)
    }

    /// Seconds to move `kilobits` starting at time `start`.
    pub fn download_time(&self, kilobits: f64, start: f64) -> f64 {
        let mut left = kilobits;
        let mut offset = start.rem_euclid(self.period);
        let mut j = self.segment(offset);
        let mut elapsed = 0.0;
        loop {
            let span = self.segment_end(j) - offset;
            let capacity = self.kbps[j] * span;
            if left <= capacity {
                return elapsed + left / self.kbps[j];
            }
            left -= capacity;
            elapsed += span;
            j = (j + 1) % self.kbps.len();
            offset = self.starts[j];
        }
    }
}
