//! Trading metrics over a portfolio value series.
//!
//! All metrics are per-step ratios; nothing is annualized.

use alloc::vec::Vec;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series needs at least {needed} entries, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("starting value must be positive")]
    NonPositiveStart,
    #[error("value series must be strictly positive (index {0})")]
    NonPositiveValue(usize),
    #[error("returns have zero volatility; Sharpe ratio is undefined")]
    ZeroVolatility,
}

/// Per-step simple returns `r_t = (v_t − v_{t−1}) / v_{t−1}` with the risk-free rate
/// they are measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    returns: Vec<f64>,
    risk_free: f64,
}

impl ReturnSeries {
    pub fn new(returns: Vec<f64>, risk_free: f64) -> Result<Self, MetricsError> {
        if returns.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        Ok(Self { returns, risk_free })
    }

    pub fn from_values(values: &[f64], risk_free: f64) -> Result<Self, MetricsError> {
        if values.len() < 2 {
            return Err(MetricsError::SeriesTooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|&v| !(v > 0.0)) {
            if i < values.len() - 1 {
                return Err(MetricsError::NonPositiveValue(i));
            }
        }
        let returns = values.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
        Self::new(returns, risk_free)
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn risk_free(&self) -> f64 {
        self.risk_free
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }
}

/// `(v_T − v_0) / v_0`.
pub fn cumulative_return(values: &[f64]) -> Result<f64, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::SeriesTooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let first = values[0];
    if !(first > 0.0) {
        return Err(MetricsError::NonPositiveStart);
    }
    Ok((values[values.len() - 1] - first) / first)
}

/// Sample standard deviation of returns (denominator `T − 1`).
pub fn volatility(series: &ReturnSeries) -> Result<f64, MetricsError> {
    let r = series.returns();
    if r.len() < 2 {
        return Err(MetricsError::SeriesTooShort {
            needed: 2,
            got: r.len(),
        });
    }
    if r.iter().all(|&x| x == r[0]) {
        return Ok(0.0);
    }
    let mean = series.mean();
    let ss: f64 = r.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(libm::sqrt(ss / (r.len() - 1) as f64))
}

/// `(r̄ − r_f) / σ`. Zero volatility is reported as [`MetricsError::ZeroVolatility`].
pub fn sharpe_ratio(series: &ReturnSeries) -> Result<f64, MetricsError> {
    let sigma = volatility(series)?;
    if sigma == 0.0 {
        return Err(MetricsError::ZeroVolatility);
    }
    Ok((series.mean() - series.risk_free()) / sigma)
}

/// Largest relative decline from a running peak.
pub fn max_drawdown(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if let Some(i) = values.iter().position(|&v| !(v > 0.0)) {
        return Err(MetricsError::NonPositiveValue(i));
    }
    let mut peak = values[0];
    let mut worst = 0.0_f64;
    for &v in values {
        if v > peak {
            peak = v;
        }
        worst = worst.max((peak - v) / peak);
    }
    Ok(worst)
}

/// Fraction of steps with a strictly positive return.
pub fn win_rate(series: &ReturnSeries) -> Result<f64, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let wins = series.returns().iter().filter(|&&r| r > 0.0).count();
    Ok(wins as f64 / series.len() as f64)
}

/// The five headline metrics of one session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub cumulative_return: f64,
    /// `None` when volatility is zero or undefined.
    pub sharpe_ratio: Option<f64>,
    pub max_drawdown: f64,
    pub win_rate: f64,
    /// `None` for a single-return series.
    pub volatility: Option<f64>,
}

impl MetricsReport {
    pub fn from_values(values: &[f64], risk_free: f64) -> Result<Self, MetricsError> {
        let series = ReturnSeries::from_values(values, risk_free)?;
        let volatility = match volatility(&series) {
            Ok(s) => Some(s),
            Err(MetricsError::SeriesTooShort { .. }) => None,
            Err(e) => return Err(e),
        };
        let sharpe_ratio = match sharpe_ratio(&series) {
            Ok(s) => Some(s),
            Err(MetricsError::ZeroVolatility | MetricsError::SeriesTooShort { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            cumulative_return: cumulative_return(values)?,
            sharpe_ratio,
            max_drawdown: max_drawdown(values)?,
            win_rate: win_rate(&series)?,
            volatility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn cumulative_return_examples() {
        assert_eq!(cumulative_return(&[1000.0, 1000.0]).unwrap(), 0.0);
        assert!(close(cumulative_return(&[1000.0, 1050.0]).unwrap(), 0.05));
        assert!(close(cumulative_return(&[500.0, 400.0]).unwrap(), -0.20));
        assert!(matches!(
            cumulative_return(&[1.0]),
            Err(MetricsError::SeriesTooShort { .. })
        ));
        assert_eq!(
            cumulative_return(&[0.0, 1.0]),
            Err(MetricsError::NonPositiveStart)
        );
    }

    #[test]
    fn sharpe_examples() {
        let flat = ReturnSeries::new(vec![0.001; 5], 0.001).unwrap();
        assert_eq!(sharpe_ratio(&flat), Err(MetricsError::ZeroVolatility));

        let sym = ReturnSeries::new(vec![0.01, -0.01, 0.01, -0.01], 0.0).unwrap();
        assert!(close(sharpe_ratio(&sym).unwrap(), 0.0));

        // mean 0.01; deviations 0.01, -0.01, 0 → σ = sqrt(0.0002 / 2) = 0.01
        let s = ReturnSeries::new(vec![0.02, 0.00, 0.01], 0.0).unwrap();
        assert!(close(volatility(&s).unwrap(), 0.01));
        assert!((sharpe_ratio(&s).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(close(max_drawdown(&[100.0, 120.0, 90.0, 110.0]).unwrap(), 0.25));
        assert!(close(max_drawdown(&[100.0, 50.0]).unwrap(), 0.5));
        assert_eq!(max_drawdown(&[]), Err(MetricsError::EmptySeries));
    }

    #[test]
    fn win_rate_examples() {
        let s = ReturnSeries::new(vec![0.01, -0.01, 0.02], 0.0).unwrap();
        assert!(close(win_rate(&s).unwrap(), 2.0 / 3.0));
        let s = ReturnSeries::new(vec![0.0; 4], 0.0).unwrap();
        assert_eq!(win_rate(&s).unwrap(), 0.0);
        let s = ReturnSeries::new(vec![0.1, 0.2], 0.0).unwrap();
        assert_eq!(win_rate(&s).unwrap(), 1.0);
        assert_eq!(
            ReturnSeries::new(vec![], 0.0),
            Err(MetricsError::EmptySeries)
        );
    }

    #[test]
    fn volatility_examples() {
        let s = ReturnSeries::new(vec![0.03; 6], 0.0).unwrap();
        assert_eq!(volatility(&s).unwrap(), 0.0);
        let s = ReturnSeries::new(vec![0.01, -0.01], 0.0).unwrap();
        assert!(close(volatility(&s).unwrap(), 0.014_142_135_623_730_95));
        let s = ReturnSeries::new(vec![0.01], 0.0).unwrap();
        assert!(matches!(
            volatility(&s),
            Err(MetricsError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn flat_cash_report() {
        let r = MetricsReport::from_values(&[1000.0; 6], 0.0).unwrap();
        assert_eq!(r.cumulative_return, 0.0);
        assert_eq!(r.max_drawdown, 0.0);
        assert_eq!(r.win_rate, 0.0);
        assert_eq!(r.volatility, Some(0.0));
        assert_eq!(r.sharpe_ratio, None);
    }
}
