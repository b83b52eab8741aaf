//! Holistic delay characteristics of an admitted task.
//!
//! The delay of a task is the number of slots from the one in which it
//! enters the transmission buffer to the one in which its computation
//! finishes. It is analyzed through two derived kernels:
//!
//! 1. The *hat* kernel picks out the admission transitions. Weighting the
//!    stationary distribution by it gives `ẑ = x P̂`, the (unnormalized)
//!    state distribution just after an admission; `z = ẑ / ẑe` starts the
//!    tagged task, and `ẑe / λ` is the offloading ratio — the fraction of
//!    generated tasks that actually enter the buffer.
//! 2. The *tilde* kernel runs the system forward with further arrivals
//!    censored and level `(0,0)` absorbing. Starting from `z`, the absorbed
//!    mass after `n` steps is exactly `P(delay ≤ n)`, because the tagged
//!    task is the last one in the censored system and departs when the
//!    system drains.
//!
//! The cumulative distribution then yields the pmf by differencing, the
//! bound-violation curve `W_n = 1 − W̄_n`, the mean (also re-derived from
//! queue lengths via Little's law as a cross-check) and the standard
//! deviation.

use ndarray::{s, Array1};

use crate::error::{Error, Result};
use crate::kernel::{KernelVariant, LevelKernel};
use crate::layout::PhaseLayout;
use crate::linalg;
use crate::model::Model;
use crate::stationary::StationaryDistribution;

/// Stopping policy for the absorption iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CpdOptions {
    /// Stop once the unabsorbed tail `1 − W̄_n` falls below this.
    pub tail_eps: f64,
    /// Hard cap on the number of iterated slots.
    pub n_max: usize,
}

impl Default for CpdOptions {
    fn default() -> Self {
        CpdOptions {
            tail_eps: 1e-10,
            n_max: 100_000,
        }
    }
}

/// Where the absorption iteration stopped and how much tail is left.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationInfo {
    pub n_stop: usize,
    /// Unabsorbed mass `1 − W̄_{n_stop}`.
    pub tail: f64,
    /// `n_stop · tail`; moments are only trusted when this is tiny.
    pub n_times_tail: f64,
    /// False when the iteration hit `n_max` before reaching `tail_eps`.
    pub converged: bool,
    /// Geometric decay rate of `W_n` estimated over the last tenth of the
    /// computed range.
    pub geo_rate: Option<f64>,
    /// Bound on the mean-delay mass beyond the truncation point,
    /// `Σ_{n > n_stop} W_n ≤ tail · ρ / (1 − ρ)`.
    pub geo_tail_bound: Option<f64>,
    /// Convergence plus `n·tail < 1e-6`: the moment sums are reliable.
    pub moments_trusted: bool,
}

/// The full bundle of delay metrics for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCharacteristics {
    /// `W̄_n = P(delay ≤ n)`, index 0 holding `n = 1`.
    pub cpd: Vec<f64>,
    /// `PW_n = P(delay = n)`.
    pub pmf: Vec<f64>,
    /// `W_n = P(delay > n)`.
    pub violation: Vec<f64>,
    /// Mean delay in slots, from the pmf.
    pub d_ave: f64,
    /// Mean delay in slots, from queue lengths via Little's law.
    pub d_ave_little: f64,
    /// Delay standard deviation in slots.
    pub d_sd: f64,
    /// Offloading ratio: fraction of generated tasks that are admitted.
    pub p_off: f64,
    /// Stationary probability that the computation buffer is full.
    pub p2_full: f64,
    pub truncation: TruncationInfo,
}

impl DelayCharacteristics {
    /// `P(delay > n)`, reading off the computed curve; bounds beyond the
    /// truncation point report the residual tail.
    pub fn violation_at(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self.violation.get(n - 1) {
            Some(&w) => w,
            None => self.truncation.tail,
        }
    }
}

/// State distribution just after a task enters queue 1, plus the
/// offloading ratio.
///
/// `hat` must be the [`KernelVariant::Hat`] kernel of the same model.
pub fn tagged_initial(
    x: &StationaryDistribution,
    hat: &LevelKernel,
    layout: &PhaseLayout,
    lambda: f64,
) -> Result<(Array1<f64>, f64)> {
    assert_eq!(hat.variant, KernelVariant::Hat, "need the admission kernel");
    let p_hat = hat.assemble(layout);
    let zhat = x.probs.dot(&p_hat);
    let admitted = zhat.sum();
    if admitted <= 0.0 {
        return Err(Error::Degenerate(
            "no admission transitions carry stationary mass".into(),
        ));
    }
    let p_off = admitted / lambda;
    let z = zhat.mapv(|v| v / admitted);
    // by construction nothing can be admitted *into* level 0
    let level0_mass: f64 = z.slice(s![..layout.level0_dim]).sum();
    if level0_mass != 0.0 {
        return Err(Error::Consistency(format!(
            "tagged distribution has level-0 mass {level0_mass:e}"
        )));
    }
    Ok((z, p_off))
}

/// Run the censored absorption iteration from `z` and collect
/// `W̄_n = P(delay ≤ n)` until the tail drops below `tail_eps`.
///
/// `tilde` must be the [`KernelVariant::Tilde`] kernel of the same model.
pub fn delay_cpd(
    z: &Array1<f64>,
    tilde: &LevelKernel,
    layout: &PhaseLayout,
    options: &CpdOptions,
) -> Result<(Vec<f64>, TruncationInfo)> {
    assert_eq!(tilde.variant, KernelVariant::Tilde, "need the censored kernel");
    let cap1 = layout.cap1;
    let split = |v: &Array1<f64>| -> Vec<Array1<f64>> {
        let mut parts = Vec::with_capacity(cap1 + 1);
        let mut off = 0;
        for i1 in 0..=cap1 {
            let d = layout.level_dim(i1);
            parts.push(v.slice(s![off..off + d]).to_owned());
            off += d;
        }
        parts
    };
    let mut levels = split(z);
    let up_is_zero = linalg::max_abs(&tilde.up) == 0.0;
    let empty_up_is_zero = linalg::max_abs(&tilde.empty_up) == 0.0;

    let mut wbar = Vec::new();
    let mut info = TruncationInfo {
        n_stop: 0,
        tail: 1.0,
        n_times_tail: 0.0,
        converged: false,
        geo_rate: None,
        geo_tail_bound: None,
        moments_trusted: false,
    };
    for n in 1..=options.n_max {
        let mut next: Vec<Array1<f64>> = Vec::with_capacity(cap1 + 1);
        // level 0 receives from itself and from the draining level 1
        let mut lvl0 = levels[0].dot(&tilde.empty_hold);
        lvl0 += &levels[1].dot(&tilde.drain);
        next.push(lvl0);
        for j in 1..=cap1 {
            let mut acc = if j == cap1 {
                levels[j].dot(&tilde.hold_full)
            } else {
                levels[j].dot(&tilde.hold)
            };
            if j == 1 {
                if !empty_up_is_zero {
                    acc += &levels[0].dot(&tilde.empty_up);
                }
            } else if !up_is_zero {
                acc += &levels[j - 1].dot(&tilde.up);
            }
            if j + 1 <= cap1 {
                acc += &levels[j + 1].dot(&tilde.down);
            }
            next.push(acc);
        }
        levels = next;
        let mass: f64 = levels.iter().map(|l| l.sum()).sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Consistency(format!(
                "censored iteration lost mass at step {n}: total {mass}"
            )));
        }
        let absorbed: f64 = levels[0].slice(s![..layout.m]).sum();
        wbar.push(absorbed.min(1.0));
        let tail = 1.0 - absorbed;
        if tail < options.tail_eps {
            info.converged = true;
            break;
        }
    }
    info.n_stop = wbar.len();
    info.tail = 1.0 - wbar.last().copied().unwrap_or(0.0);
    info.n_times_tail = info.n_stop as f64 * info.tail;
    // decay rate over the last tenth of the range
    let k = (info.n_stop / 10).max(1);
    if info.n_stop > k {
        let w_end = 1.0 - wbar[info.n_stop - 1];
        let w_prev = 1.0 - wbar[info.n_stop - 1 - k];
        if w_end > 0.0 && w_prev > 0.0 && w_end < w_prev {
            let rho = (w_end / w_prev).powf(1.0 / k as f64);
            info.geo_rate = Some(rho);
            info.geo_tail_bound = Some(info.tail * rho / (1.0 - rho));
        }
    }
    info.moments_trusted = info.converged && info.n_times_tail < 1e-6;
    Ok((wbar, info))
}

/// `PW_n = W̄_n − W̄_{n−1}` with `W̄_0 = 0`. Differences in `[-1e-12, 0)`
/// are roundoff and clamp to zero; anything more negative means the CPD is
/// not monotone, i.e. a kernel bug.
pub fn pmf_from_cpd(cpd: &[f64]) -> Result<Vec<f64>> {
    let mut pmf = Vec::with_capacity(cpd.len());
    let mut prev = 0.0;
    for (i, &w) in cpd.iter().enumerate() {
        let mut d = w - prev;
        if d < 0.0 {
            if d < -1e-12 {
                return Err(Error::Consistency(format!(
                    "delay distribution decreases at n = {}: step {d:e}",
                    i + 1
                )));
            }
            d = 0.0;
        }
        pmf.push(d);
        prev = w;
    }
    Ok(pmf)
}

/// `W_n = 1 − W̄_n`.
pub fn violation_from_cpd(cpd: &[f64]) -> Vec<f64> {
    cpd.iter().map(|&w| 1.0 - w).collect()
}

/// Mean delay, computed two ways: from the pmf (`Σ n · PW_n`) and from the
/// stationary mean number in system over the effective admission rate
/// (Little's law). The two must agree; a relative gap above `1e-4` is a
/// construction bug. The check only fires when the truncation made the
/// pmf route reliable.
pub fn average_delay(
    pmf: &[f64],
    x: &StationaryDistribution,
    layout: &PhaseLayout,
    lambda: f64,
    p_off: f64,
    trusted: bool,
) -> Result<(f64, f64)> {
    let from_pmf: f64 = pmf
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1) as f64 * p)
        .sum();
    let mut mean_in_system = 0.0;
    for i1 in 0..=layout.cap1 {
        for i2 in 0..=layout.cap2 {
            if i1 + i2 == 0 {
                continue;
            }
            mean_in_system += (i1 + i2) as f64 * x.block_mass(layout, i1, i2);
        }
    }
    let effective_rate = lambda * p_off;
    if effective_rate <= 0.0 {
        return Err(Error::Degenerate("no effective admissions".into()));
    }
    let from_little = mean_in_system / effective_rate;
    if trusted {
        let rel = (from_pmf - from_little).abs() / from_little.max(f64::MIN_POSITIVE);
        if rel > 1e-4 {
            return Err(Error::Consistency(format!(
                "mean delay routes disagree: pmf {from_pmf}, little {from_little} (rel {rel:.2e})"
            )));
        }
    }
    Ok((from_pmf, from_little))
}

/// `sqrt(Σ PW_n (n − d_ave)²)`.
pub fn delay_std(pmf: &[f64], d_ave: f64) -> f64 {
    pmf.iter()
        .enumerate()
        .map(|(i, &p)| {
            let d = (i + 1) as f64 - d_ave;
            p * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Stationary probability that queue 2 is full: the mass of every
/// `(i1, cap2)` block.
pub fn prob_q2_full(x: &StationaryDistribution, layout: &PhaseLayout) -> f64 {
    (0..=layout.cap1)
        .map(|i1| x.block_mass(layout, i1, layout.cap2))
        .sum()
}

/// Compute the full delay bundle for a model from its stationary
/// distribution and the two derived kernels.
pub fn delay_characteristics(
    model: &Model,
    x: &StationaryDistribution,
    hat: &LevelKernel,
    tilde: &LevelKernel,
    options: &CpdOptions,
) -> Result<DelayCharacteristics> {
    let layout = model.layout();
    let lambda = model.arrival_rate()?;
    let (z, p_off) = tagged_initial(x, hat, layout, lambda)?;
    let (cpd, truncation) = delay_cpd(&z, tilde, layout, options)?;
    let pmf = pmf_from_cpd(&cpd)?;
    let violation = violation_from_cpd(&cpd);
    let (d_ave, d_ave_little) = average_delay(
        &pmf,
        x,
        layout,
        lambda,
        p_off,
        truncation.moments_trusted,
    )?;
    let d_sd = delay_std(&pmf, d_ave);
    let p2_full = prob_q2_full(x, layout);
    Ok(DelayCharacteristics {
        cpd,
        pmf,
        violation,
        d_ave,
        d_ave_little,
        d_sd,
        p_off,
        p2_full,
        truncation,
    })
}

/// At most one strict local maximum above a noise floor; flat stretches
/// and sub-floor ripples in the tail do not count against the peak.
pub fn is_unimodal(pmf: &[f64], floor: f64) -> bool {
    let mut rising = true;
    for w in pmf.windows(2) {
        let (a, b) = (w[0], w[1]);
        if rising {
            if b < a - floor {
                rising = false;
            }
        } else if b > a + floor {
            return false;
        }
    }
    true
}
