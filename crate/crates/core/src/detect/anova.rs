use super::special::f_sf;
use crate::error::{Error, Result};

/// One-way ANOVA p-value: the probability of seeing at least this much spread
/// among group means if all groups shared one mean.
///
/// Zero within-group variance with distinct means yields exactly 0; a fully
/// constant sample yields exactly 1.
pub fn anova_p(groups: &[Vec<f64>]) -> Result<f64> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs at least 2 groups, got {k}"
        )));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::InsufficientData("ANOVA group is empty".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs more observations ({n}) than groups ({k})"
        )));
    }

    let first = groups[0][0];
    if groups.iter().flatten().all(|&x| x == first) {
        return Ok(1.0);
    }
    let within_constant = groups.iter().all(|g| g.iter().all(|&x| x == g[0]));
    if within_constant {
        // means differ (the sample is not constant) and nothing varies inside a group
        return Ok(0.0);
    }

    let grand_mean = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand_mean).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    let df_between = (k - 1) as f64;
    let df_within = (n - k) as f64;
    let f = (ss_between / df_between) / (ss_within / df_within);
    Ok(f_sf(f, df_between, df_within).clamp(0.0, 1.0))
}
