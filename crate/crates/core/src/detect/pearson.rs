use serde::{Deserialize, Serialize};

use super::special::chi2_critical;
use crate::error::Result;
use crate::monitor::STATE_COUNT;

pub type Row = [u64; STATE_COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonOutcome {
    pub chi2: f64,
    pub reject: bool,
    /// False when either row has fewer than `min_row_total` transitions.
    pub applicable: bool,
}

/// Two-sample chi-square homogeneity statistic for a pair of count rows.
///
/// Columns that are empty in both rows carry no expected mass and are skipped.
pub fn chi2_statistic(row_r: &Row, row_s: &Row) -> f64 {
    let total_r: u64 = row_r.iter().sum();
    let total_s: u64 = row_s.iter().sum();
    let grand = (total_r + total_s) as f64;
    if grand == 0.0 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for (&fr, &fs) in row_r.iter().zip(row_s.iter()) {
        let col = (fr + fs) as f64;
        if col == 0.0 {
            continue;
        }
        for (observed, total) in [(fr, total_r), (fs, total_s)] {
            let expected = total as f64 * col / grand;
            if expected > 0.0 {
                let diff = observed as f64 - expected;
                chi2 += diff * diff / expected;
            }
        }
    }
    chi2
}

/// Row test with a precomputed critical value `χ²_{m-1, α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonTest {
    pub alpha: f64,
    pub critical: f64,
    pub min_row_total: u64,
}

impl PearsonTest {
    pub fn new(alpha: f64, states: usize, min_row_total: u64) -> Result<Self> {
        let critical = chi2_critical(states as u32 - 1, alpha)?;
        Ok(PearsonTest {
            alpha,
            critical,
            min_row_total,
        })
    }

    pub fn test(&self, row_r: &Row, row_s: &Row) -> PearsonOutcome {
        let chi2 = chi2_statistic(row_r, row_s);
        let applicable = row_r.iter().sum::<u64>() >= self.min_row_total.max(1)
            && row_s.iter().sum::<u64>() >= self.min_row_total.max(1);
        PearsonOutcome {
            chi2,
            reject: applicable && chi2 > self.critical,
            applicable,
        }
    }
}

pub fn pearson_row_test(
    row_r: &Row,
    row_s: &Row,
    alpha: f64,
    min_row_total: u64,
) -> Result<PearsonOutcome> {
    Ok(PearsonTest::new(alpha, STATE_COUNT, min_row_total)?.test(row_r, row_s))
}
