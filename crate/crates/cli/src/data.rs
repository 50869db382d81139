//! Dataset ingestion and synthetic generation.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use shuffledp::rng::stream;

use crate::error::{CliError, Result};

/// Values as domain indices plus the token each index stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub values: Vec<usize>,
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn d(&self) -> usize {
        self.labels.len()
    }
}

/// Reads one value token per line. A first line reading `value` is taken as
/// a header; blank lines are skipped. Tokens are numbered by first occurrence.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let text = std::str::from_utf8(raw).map_err(|_| CliError::Input {
            path: path.into(),
            line,
            reason: "token is not valid UTF-8".into(),
        })?;
        let token = text.trim();
        if token.is_empty() || (line == 1 && token.eq_ignore_ascii_case("value")) {
            continue;
        }
        let next = labels.len();
        let idx = *index.entry(token.to_string()).or_insert_with(|| {
            labels.push(token.to_string());
            next
        });
        values.push(idx);
    }
    if values.is_empty() {
        return Err(CliError::Input {
            path: path.into(),
            line: 0,
            reason: "file holds no values".into(),
        });
    }
    Ok(Dataset { values, labels })
}

/// `n` draws from a Zipf law over `0..d` (index 0 is the most frequent).
/// An exponent of 0 gives the uniform distribution.
pub fn gen_zipf(n: usize, d: usize, exponent: f64, seed: u64) -> Result<Vec<usize>> {
    if d == 0 {
        return Err(CliError::spec("zipf needs d >= 1"));
    }
    let dist = Zipf::new(d as u64, exponent).map_err(|e| CliError::spec(format!("zipf: {e}")))?;
    let mut rng = stream(seed, "dataset/zipf");
    Ok((0..n)
        .map(|_| (dist.sample(&mut rng) as usize - 1).min(d - 1))
        .collect())
}

/// Probability of the rank-1 value under [`gen_zipf`].
pub fn zipf_top_mass(d: usize, exponent: f64) -> f64 {
    1.0 / (1..=d).map(|k| (k as f64).powf(-exponent)).sum::<f64>()
}

/// `bits`-bit values where `heavy` distinct planted values hold a `mass`
/// fraction of the users, split by a Zipf law with `exponent`; the rest are
/// uniform. Returns the values and the planted set, heaviest first.
pub fn planted_heavy(
    n: usize,
    bits: u32,
    heavy: usize,
    mass: f64,
    exponent: f64,
    seed: u64,
) -> Result<(Vec<u64>, Vec<u64>)> {
    if bits == 0 || bits > 64 || heavy == 0 || !(0.0..=1.0).contains(&mass) {
        return Err(CliError::spec(
            "need 0 < bits <= 64, heavy >= 1 and mass in [0,1]",
        ));
    }
    let space = if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    };
    if (heavy as u64).saturating_sub(1) > space {
        return Err(CliError::spec("more planted values than the domain holds"));
    }
    let mut rng = stream(seed, "dataset/planted");
    let mut planted: Vec<u64> = Vec::with_capacity(heavy);
    while planted.len() < heavy {
        let v = rng.gen_range(0..=space);
        if !planted.contains(&v) {
            planted.push(v);
        }
    }
    let weights: Vec<f64> = (1..=heavy).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let heavy_n = (n as f64 * mass).round() as usize;
    let mut values = Vec::with_capacity(n);
    for (i, &h) in planted.iter().enumerate() {
        let c = if i + 1 == heavy {
            heavy_n.saturating_sub(values.len())
        } else {
            ((heavy_n as f64 * weights[i] / total).round() as usize).min(heavy_n - values.len())
        };
        values.extend(std::iter::repeat_n(h, c));
    }
    while values.len() < n {
        values.push(rng.gen_range(0..=space));
    }
    values.shuffle(&mut rng);
    Ok((values, planted))
}

/// Reads one unsigned integer per line (decimal, or hex with `0x`).
pub fn read_u64_lines(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.eq_ignore_ascii_case("value")) {
            continue;
        }
        let parsed = match t.strip_prefix("0x") {
            Some(h) => u64::from_str_radix(h, 16),
            None => t.parse(),
        };
        out.push(parsed.map_err(|e| CliError::Input {
            path: path.into(),
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(CliError::Input {
            path: path.into(),
            line: 0,
            reason: "file holds no values".into(),
        });
    }
    Ok(out)
}
