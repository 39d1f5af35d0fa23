//! Rolling-k delta: how much cumulative return changes when every position is
//! replaced by the one held `k` steps earlier.
//!
//! For holdings `q_0..q_T` and prices `p_0..p_T`:
//!
//! ```text
//! r⁽ᵏ⁾_t = q_{t−k}ᵀ (p_{t+1} − p_t) / q_{t−k}ᵀ p_t
//! CR⁽ᵏ⁾  = Π_{t=k}^{T−k−1} (1 + r⁽ᵏ⁾_t) − 1
//! Δ_k    = CR⁽ᵏ⁾ − CR⁽⁰⁾
//! ```
//!
//! `CR⁽⁰⁾` is taken over the same index range `[k, T−k−1]` as `CR⁽ᵏ⁾`.

use crate::domain::{Holdings, PriceVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RollingError {
    #[error("lag {k} needs at least {needed} steps, history has {steps}")]
    LagTooLarge { k: usize, needed: usize, steps: usize },
    #[error("holdings and price histories are misaligned")]
    MisalignedHistories,
    #[error("lagged position has zero value at step {0}")]
    ZeroValuePosition(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingDelta {
    pub k: usize,
    pub lagged_return: f64,
    pub baseline_return: f64,
    pub delta: f64,
}

fn dot(q: &Holdings, p: &PriceVector) -> Result<f64, RollingError> {
    let mut acc = 0.0;
    for (asset, units) in q.as_map() {
        let price = p.get(asset.as_str()).ok_or(RollingError::MisalignedHistories)?;
        acc += units * price;
    }
    Ok(acc)
}

fn step_return(
    q: &Holdings,
    p_now: &PriceVector,
    p_next: &PriceVector,
    t: usize,
) -> Result<f64, RollingError> {
    let base = dot(q, p_now)?;
    if base <= 0.0 {
        return Err(RollingError::ZeroValuePosition(t));
    }
    Ok((dot(q, p_next)? - base) / base)
}

/// Cumulative return over `t ∈ [first, last]` using the position lagged by `lag`.
fn lagged_cr(
    holdings: &[Holdings],
    prices: &[PriceVector],
    lag: usize,
    first: usize,
    last: usize,
) -> Result<f64, RollingError> {
    let mut growth = 1.0;
    for t in first..=last {
        growth *= 1.0 + step_return(&holdings[t - lag], &prices[t], &prices[t + 1], t)?;
    }
    Ok(growth - 1.0)
}

/// Computes `Δ_k` for one session.
pub fn rolling_k_delta(
    holdings: &[Holdings],
    prices: &[PriceVector],
    k: usize,
) -> Result<RollingDelta, RollingError> {
    if holdings.len() != prices.len() || holdings.len() < 2 {
        return Err(RollingError::MisalignedHistories);
    }
    let steps = holdings.len() - 1;
    let needed = 2 * k + 1;
    if steps < needed {
        return Err(RollingError::LagTooLarge { k, needed, steps });
    }
    let (first, last) = (k, steps - k - 1);
    let lagged_return = lagged_cr(holdings, prices, k, first, last)?;
    let baseline_return = lagged_cr(holdings, prices, 0, first, last)?;
    Ok(RollingDelta {
        k,
        lagged_return,
        baseline_return,
        delta: lagged_return - baseline_return,
    })
}

/// Largest `k` for which [`rolling_k_delta`] is defined on a history of `len` entries.
pub fn max_feasible_lag(len: usize) -> Option<usize> {
    len.checked_sub(2).map(|steps_minus_one| steps_minus_one / 2)
}
