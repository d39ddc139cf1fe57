use serde::{Deserialize, Serialize};

use super::Method;
use crate::operators::Ledger;
use crate::tagging::{BlockTags, TagDistribution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(rename = "N")]
    pub n: usize,
    pub b: usize,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    pub d: usize,
    pub ell: Option<usize>,
    pub seed: u64,
    pub sketch_width: usize,
    pub distribution: Option<TagDistribution>,
    pub extra_cols: usize,
    pub optimize: bool,
    pub extra_samples: bool,
}

/// Matvec columns per phase, `A` and `A*` combined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatvecSummary {
    #[serde(rename = "phaseI")]
    pub phase_i: u64,
    #[serde(rename = "phaseII")]
    pub phase_ii: u64,
    #[serde(rename = "phaseIII")]
    pub phase_iii: u64,
    pub total: u64,
    pub ledger: Ledger,
}

impl MatvecSummary {
    pub fn from_ledger(ledger: Ledger) -> Self {
        Self {
            phase_i: ledger.phase_i.total(),
            phase_ii: ledger.phase_ii.total(),
            phase_iii: ledger.phase_iii.total(),
            total: ledger.total(),
            ledger,
        }
    }
}

/// Wall-clock seconds per phase, rounded to three significant digits.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    #[serde(rename = "phaseI_s")]
    pub phase_i_s: f64,
    #[serde(rename = "phaseII_s")]
    pub phase_ii_s: f64,
    #[serde(rename = "phaseIII_s")]
    pub phase_iii_s: f64,
    pub total_s: f64,
}

pub fn round_sig3(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let digits = 2 - x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

impl PhaseTimes {
    pub fn from_seconds(t: [f64; 3]) -> Self {
        Self {
            phase_i_s: round_sig3(t[0]),
            phase_ii_s: round_sig3(t[1]),
            phase_iii_s: round_sig3(t[2]),
            total_s: round_sig3(t.iter().sum()),
        }
    }
}

/// Aspect ratios of the null vectors used, over blocks with a nonempty far
/// field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspectSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub blocks: usize,
    pub excluded: usize,
}

impl AspectSummary {
    pub fn from_tags(tags: &[BlockTags]) -> Self {
        let mut rho: Vec<f64> = tags.iter().filter_map(|t| t.rho).collect();
        rho.sort_by(f64::total_cmp);
        let excluded = tags.len() - rho.len();
        if rho.is_empty() {
            return Self { min: f64::NAN, median: f64::NAN, max: f64::NAN, blocks: 0, excluded };
        }
        Self { min: rho[0], median: median_sorted(&rho), max: rho[rho.len() - 1], blocks: rho.len(), excluded }
    }
}

pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub method: Method,
    pub config: ConfigEcho,
    pub matvecs: MatvecSummary,
    pub times: PhaseTimes,
    pub relative_error: Option<f64>,
    pub aspect: Option<AspectSummary>,
    /// Stored reals: `2 Σ m_i k_i + K² + Σ_{j∈N_i} m_i m_j`.
    pub storage: usize,
    pub tag_redraws: usize,
    pub warnings: Vec<String>,
}

impl CompressionReport {
    /// Copy with wall-clock times zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self { times: PhaseTimes::default(), ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_digits() {
        assert_eq!(round_sig3(0.0123456), 0.0123);
        assert_eq!(round_sig3(123456.0), 123000.0);
        assert_eq!(round_sig3(0.0), 0.0);
    }
}
