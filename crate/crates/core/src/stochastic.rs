//! Discrete-time arrival and duration models.
//!
//! Two primitives drive the whole system:
//!
//! * [`DMap`] — a discrete-time Markovian arrival process given by a pair of
//!   nonnegative matrices `(d0, d1)`. `d0[i][j]` is the probability of moving
//!   from phase `i` to phase `j` with no arrival in the slot, `d1[i][j]` the
//!   same with one arrival. `d0 + d1` is row-stochastic.
//! * [`DPh`] — a discrete phase-type duration: the number of steps a Markov
//!   chain with substochastic matrix `t` and initial row `alpha` takes until
//!   absorption. Durations are at least one slot (`alpha` sums to 1, no mass
//!   at the absorbing state), because a zero-length service or vacation has
//!   no representation in the slot kernel.
//!
//! Both are validated on construction and immutable afterwards. Sampling
//! walks the phase chain slot by slot so that a simulator built on it sees
//! exactly the per-slot phase process the analytic kernel encodes.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

const STOCHASTIC_TOL: f64 = 1e-12;

fn check_entries(name: &str, m: &Array2<f64>) -> Result<()> {
    for &v in m.iter() {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(Error::Validation(format!(
                "{name}: entry {v} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Discrete-time Markovian arrival process.
#[derive(Debug, Clone, PartialEq)]
pub struct DMap {
    d0: Array2<f64>,
    d1: Array2<f64>,
}

impl DMap {
    pub fn new(d0: Array2<f64>, d1: Array2<f64>) -> Result<Self> {
        if d0.nrows() == 0 || d0.nrows() != d0.ncols() || d0.dim() != d1.dim() {
            return Err(Error::Validation(format!(
                "arrival process: d0 is {:?}, d1 is {:?}; need equal square shapes",
                d0.dim(),
                d1.dim()
            )));
        }
        check_entries("arrival process d0", &d0)?;
        check_entries("arrival process d1", &d1)?;
        // d1 == 0 would mean no arrivals ever (λ = 0) and nothing to analyze;
        // d0 == 0 is the legal saturated case with an arrival in every slot.
        if !d1.iter().any(|&v| v > 0.0) {
            return Err(Error::Validation(
                "arrival process: d1 must contain a positive entry (no arrivals otherwise)".into(),
            ));
        }
        let m = d0.nrows();
        for i in 0..m {
            let s: f64 = (0..m).map(|j| d0[[i, j]] + d1[[i, j]]).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Validation(format!(
                    "arrival process: row {i} of d0 + d1 sums to {s}, not 1"
                )));
            }
        }
        Ok(DMap { d0, d1 })
    }

    pub fn phases(&self) -> usize {
        self.d0.nrows()
    }

    pub fn d0(&self) -> &Array2<f64> {
        &self.d0
    }

    pub fn d1(&self) -> &Array2<f64> {
        &self.d1
    }

    /// `d0 + d1`, the phase-process transition matrix.
    pub fn d_sum(&self) -> Array2<f64> {
        &self.d0 + &self.d1
    }

    /// Stationary phase distribution π with `π D = π`, `π e = 1`.
    ///
    /// Fails when the phase process is reducible (the fixed point is not
    /// unique).
    pub fn stationary(&self) -> Result<Array1<f64>> {
        let m = self.phases();
        let d = self.d_sum();
        if m == 1 {
            return Ok(Array1::ones(1));
        }
        // (D^T - I) has null dimension 1 exactly when π is unique.
        let mut a = d.t().to_owned();
        for i in 0..m {
            a[[i, i]] -= 1.0;
        }
        let null_dim = linalg::null_space_dim(&a, 1e-10);
        if null_dim != 1 {
            return Err(Error::Validation(format!(
                "arrival process: d0 + d1 is reducible (stationary space has dimension {null_dim})"
            )));
        }
        // Replace the last equation with the normalization π e = 1.
        for j in 0..m {
            a[[m - 1, j]] = 1.0;
        }
        let mut b = Array1::zeros(m);
        b[m - 1] = 1.0;
        let pi = linalg::solve(&a, &b)?;
        if pi.iter().any(|&v| v < -1e-10) {
            return Err(Error::Validation(
                "arrival process: stationary solve produced negative mass".into(),
            ));
        }
        Ok(pi.mapv(|v| v.max(0.0)))
    }

    /// Mean arrivals per slot, `λ = π d1 e`.
    pub fn arrival_rate(&self) -> Result<f64> {
        let pi = self.stationary()?;
        let ones = Array1::ones(self.phases());
        Ok(pi.dot(&self.d1.dot(&ones)))
    }

    /// One slot of the arrival process: joint draw of the next phase and
    /// whether an arrival occurred, with probabilities `d0[phase][j]` /
    /// `d1[phase][j]`.
    pub fn step<R: Rng + ?Sized>(&self, phase: usize, rng: &mut R) -> (usize, bool) {
        debug_assert!(phase < self.phases());
        let m = self.phases();
        let mut u: f64 = rng.random();
        for j in 0..m {
            u -= self.d0[[phase, j]];
            if u < 0.0 {
                return (j, false);
            }
        }
        for j in 0..m {
            u -= self.d1[[phase, j]];
            if u < 0.0 {
                return (j, true);
            }
        }
        // Rounding left a sliver of mass; attribute it to the last arrival cell.
        (m - 1, true)
    }
}

/// Discrete phase-type distribution `(alpha, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DPh {
    alpha: Array1<f64>,
    t: Array2<f64>,
    /// Exit column `t0 = e − t e`.
    t0: Array1<f64>,
}

impl DPh {
    pub fn new(alpha: Array1<f64>, t: Array2<f64>) -> Result<Self> {
        let k = alpha.len();
        if k == 0 || t.nrows() != k || t.ncols() != k {
            return Err(Error::Validation(format!(
                "phase-type: alpha has {} entries but t is {:?}",
                k,
                t.dim()
            )));
        }
        for &v in alpha.iter() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "phase-type: initial probability {v} outside [0, 1]"
                )));
            }
        }
        let s: f64 = alpha.sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Validation(format!(
                "phase-type: alpha sums to {s}, not 1 (durations must be at least one slot)"
            )));
        }
        check_entries("phase-type t", &t)?;
        let mut t0 = Array1::zeros(k);
        for i in 0..k {
            let row_sum: f64 = (0..k).map(|j| t[[i, j]]).sum();
            if row_sum > 1.0 + STOCHASTIC_TOL {
                return Err(Error::Validation(format!(
                    "phase-type: row {i} of t sums to {row_sum} > 1"
                )));
            }
            t0[i] = (1.0 - row_sum).max(0.0);
        }
        let dph = DPh { alpha, t, t0 };
        // I - t must be invertible for the duration to be proper.
        dph.mean()?;
        Ok(dph)
    }

    /// Scalar (order-1) representation: geometric on {1, 2, ...} with
    /// continue-probability `stay`.
    pub fn scalar(stay: f64) -> Result<Self> {
        DPh::new(Array1::ones(1), Array2::from_elem((1, 1), stay))
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &Array1<f64> {
        &self.alpha
    }

    pub fn t(&self) -> &Array2<f64> {
        &self.t
    }

    pub fn exit(&self) -> &Array1<f64> {
        &self.t0
    }

    /// Mean duration `alpha (I − t)^{-1} e`, in slots.
    pub fn mean(&self) -> Result<f64> {
        let k = self.order();
        let mut a = -self.t.clone();
        for i in 0..k {
            a[[i, i]] += 1.0;
        }
        let y = linalg::solve(&a, &Array1::ones(k)).map_err(|_| {
            Error::Validation("phase-type: I - t is singular, duration is improper".into())
        })?;
        Ok(self.alpha.dot(&y))
    }

    /// `P(duration = n)` for `n ≥ 1`: `alpha t^{n-1} t0`.
    pub fn pmf(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return Err(Error::Argument("phase-type pmf: n must be >= 1".into()));
        }
        let mut front = self.alpha.clone();
        for _ in 1..n {
            front = front.dot(&self.t);
        }
        Ok(front.dot(&self.t0))
    }

    /// The pmf over `1..=n_max`, computed in one sweep.
    pub fn pmf_prefix(&self, n_max: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n_max as usize);
        let mut front = self.alpha.clone();
        for _ in 0..n_max {
            out.push(front.dot(&self.t0));
            front = front.dot(&self.t);
        }
        out
    }

    /// Draw an initial phase from `alpha`.
    pub fn init_phase<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u: f64 = rng.random();
        for (j, &a) in self.alpha.iter().enumerate() {
            u -= a;
            if u < 0.0 {
                return j;
            }
        }
        self.order() - 1
    }

    /// One slot of the phase chain: `Some(next)` while the duration runs,
    /// `None` on completion.
    pub fn step_phase<R: Rng + ?Sized>(&self, phase: usize, rng: &mut R) -> Option<usize> {
        debug_assert!(phase < self.order());
        let mut u: f64 = rng.random();
        for j in 0..self.order() {
            u -= self.t[[phase, j]];
            if u < 0.0 {
                return Some(j);
            }
        }
        None
    }

    /// Draw a full duration by walking the phase chain; always ≥ 1 slot.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let mut phase = self.init_phase(rng);
        let mut n = 1u64;
        while let Some(next) = self.step_phase(phase, rng) {
            phase = next;
            n += 1;
        }
        n
    }
}

/// Multi-access strategy for the uplink rate of one user among others.
#[derive(Debug, Clone, PartialEq)]
pub enum AccessMode {
    /// Orthogonal access: the other users' bandwidth allocations are carved
    /// out of the shared band.
    Ofdma { other_bandwidths: Vec<f64> },
    /// Non-orthogonal access: the other users contribute interference power
    /// `p_n |h_n|^2` at the receiver.
    Noma { interference: Vec<f64> },
}

/// Achievable data rate for one user.
///
/// OFDMA: `(B − Σ B_n) log2(1 + p |h|² / σ)`.
/// NOMA:  `B log2(1 + p |h|² / (σ + Σ p_n |h_n|²))`.
pub fn multi_access_rate(
    mode: &AccessMode,
    bandwidth: f64,
    power: f64,
    channel_gain: f64,
    noise: f64,
) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::Argument("bandwidth must be positive".into()));
    }
    if power < 0.0 || channel_gain < 0.0 {
        return Err(Error::Argument(
            "power and channel gain must be nonnegative".into(),
        ));
    }
    if !(noise > 0.0) {
        return Err(Error::Argument("noise power must be positive".into()));
    }
    match mode {
        AccessMode::Ofdma { other_bandwidths } => {
            if other_bandwidths.iter().any(|&b| b < 0.0) {
                return Err(Error::Argument("bandwidth shares must be nonnegative".into()));
            }
            let residual = bandwidth - other_bandwidths.iter().sum::<f64>();
            if residual < 0.0 {
                return Err(Error::Argument(format!(
                    "allocated bandwidth exceeds the band by {}",
                    -residual
                )));
            }
            Ok(residual * (1.0 + power * channel_gain / noise).log2())
        }
        AccessMode::Noma { interference } => {
            if interference.iter().any(|&p| p < 0.0) {
                return Err(Error::Argument("interference terms must be nonnegative".into()));
            }
            let denom = noise + interference.iter().sum::<f64>();
            Ok(bandwidth * (1.0 + power * channel_gain / denom).log2())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn bernoulli(p: f64) -> DMap {
        DMap::new(
            Array2::from_elem((1, 1), 1.0 - p),
            Array2::from_elem((1, 1), p),
        )
        .unwrap()
    }

    fn case1_arrivals() -> DMap {
        DMap::new(
            array![[0.2359, 0.1938], [0.2792, 0.2805]],
            array![[0.1236, 0.4467], [0.2644, 0.1759]],
        )
        .unwrap()
    }

    fn case1_vacation() -> DPh {
        DPh::new(
            array![0.6545, 0.3455],
            array![[0.3035, 0.0617], [0.6738, 0.1916]],
        )
        .unwrap()
    }

    #[test]
    fn single_phase_stationary_is_one() {
        let m = bernoulli(0.3);
        let pi = m.stationary().unwrap();
        assert_eq!(pi.len(), 1);
        assert!((pi[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn case1_rate_is_half() {
        let m = case1_arrivals();
        let pi = m.stationary().unwrap();
        assert!((pi.sum() - 1.0).abs() < 1e-12);
        let d = m.d_sum();
        let res = linalg::max_abs_diff_vec(&pi.dot(&d), &pi);
        assert!(res < 1e-12, "pi D - pi residual {res}");
        let lambda = m.arrival_rate().unwrap();
        assert!((lambda - 0.5).abs() < 1e-4, "lambda = {lambda}");
    }

    #[test]
    fn stationary_matches_power_iteration() {
        // random-looking but fixed 3-phase process
        let d0 = array![[0.1, 0.2, 0.05], [0.0, 0.3, 0.1], [0.25, 0.05, 0.2]];
        let d1 = array![[0.3, 0.25, 0.1], [0.2, 0.3, 0.1], [0.2, 0.2, 0.1]];
        let m = DMap::new(d0, d1).unwrap();
        let pi = m.stationary().unwrap();
        let d = m.d_sum();
        let mut x = Array1::from_elem(3, 1.0 / 3.0);
        for _ in 0..20_000 {
            x = x.dot(&d);
        }
        assert!(linalg::max_abs_diff_vec(&pi, &x) < 1e-10);
    }

    #[test]
    fn reducible_process_is_rejected() {
        // two disconnected phases, each absorbing
        let d0 = array![[0.6, 0.0], [0.0, 0.7]];
        let d1 = array![[0.4, 0.0], [0.0, 0.3]];
        let m = DMap::new(d0, d1).unwrap();
        let err = m.stationary().unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("reducible"));
    }

    #[test]
    fn bernoulli_rate_is_p() {
        let m = bernoulli(0.27);
        assert!((m.arrival_rate().unwrap() - 0.27).abs() < 1e-14);
    }

    #[test]
    fn step_frequency_tracks_rate() {
        let m = case1_arrivals();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let steps = 1_000_000u64;
        let mut phase = 0usize;
        let mut arrivals = 0u64;
        for _ in 0..steps {
            let (next, arr) = m.step(phase, &mut rng);
            phase = next;
            arrivals += arr as u64;
        }
        let rate = arrivals as f64 / steps as f64;
        // three standard errors of a Bernoulli(0.5) mean
        let se = (0.5 * 0.5 / steps as f64).sqrt();
        assert!(
            (rate - 0.5).abs() < 3.0 * se + 1e-3,
            "empirical rate {rate}"
        );
    }

    #[test]
    fn deterministic_permutation_arrives_every_slot() {
        let d0 = array![[0.0, 0.0], [0.0, 0.0]];
        let d1 = array![[0.0, 1.0], [1.0, 0.0]];
        let m = DMap::new(d0, d1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut phase = 0;
        for _ in 0..100 {
            let (next, arr) = m.step(phase, &mut rng);
            assert!(arr);
            assert_ne!(next, phase);
            phase = next;
        }
        assert!((m.arrival_rate().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_one_slot_duration() {
        let d = DPh::new(array![1.0], array![[0.0]]).unwrap();
        assert!((d.mean().unwrap() - 1.0).abs() < 1e-15);
        assert!((d.pmf(1).unwrap() - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(d.sample(&mut rng), 1);
        }
    }

    #[test]
    fn scalar_mean_matches_rate() {
        // stay-probability 0.6429 gives mean 1 / 0.3571 = 2.8 slots
        let d = DPh::scalar(0.6429).unwrap();
        let mean = d.mean().unwrap();
        assert!((mean - 2.8).abs() < 1e-3, "mean {mean}");
        assert!((1.0 / mean - 0.3571).abs() < 2e-4);
    }

    #[test]
    fn case1_vacation_mean_is_two_slots() {
        let v = case1_vacation();
        assert!((v.mean().unwrap() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn geometric_pmf_closed_form() {
        let q = 0.35;
        let d = DPh::scalar(q).unwrap();
        for n in 1..=20u64 {
            let expect = q.powi(n as i32 - 1) * (1.0 - q);
            assert!((d.pmf(n).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn pmf_normalizes_and_matches_mean() {
        let v = case1_vacation();
        let mut total = 0.0;
        let mut weighted = 0.0;
        let mut n = 1u64;
        loop {
            let p = v.pmf(n).unwrap();
            total += p;
            weighted += n as f64 * p;
            if 1.0 - total < 1e-12 {
                break;
            }
            n += 1;
            assert!(n < 10_000, "tail did not shrink");
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert!((weighted - v.mean().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn singular_duration_is_rejected() {
        // row sum exactly 1 -> never absorbs
        let err = DPh::new(array![1.0], array![[1.0]]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn sample_mean_geometric() {
        let d = DPh::scalar(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000u64;
        let sum: u64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        // mean 2, variance q/(1-q)^2 = 2 -> sd of estimator
        let se = (2.0f64 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "sample mean {mean}");
    }

    #[test]
    fn case1_computation_sample_mean() {
        let d = DPh::scalar(0.5455).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 1_000_000u64;
        let sum: u64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        let true_mean = 1.0 / 0.4545;
        let var = 0.5455 / (1.0 - 0.5455f64).powi(2);
        let se = (var / n as f64).sqrt();
        assert!((mean - true_mean).abs() < 3.0 * se, "sample mean {mean}");
    }

    #[test]
    fn sample_histogram_matches_pmf() {
        let v = case1_vacation();
        let mut rng = ChaCha8Rng::seed_from_u64(20_24);
        let n = 1_000_000usize;
        let mut hist = vec![0u64; 64];
        for _ in 0..n {
            let d = v.sample(&mut rng) as usize;
            if d < hist.len() {
                hist[d] += 1;
            }
        }
        for k in 1..hist.len() {
            let p = v.pmf(k as u64).unwrap();
            if p < 1e-7 {
                continue;
            }
            let observed = hist[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (observed - p).abs() <= 4.0 * se,
                "bin {k}: observed {observed}, expected {p}"
            );
        }
    }

    #[test]
    fn single_user_rates_coincide() {
        let b = 7.5;
        let snr_num = 2.0; // p |h|^2
        let noise = 0.5;
        let ofdma = multi_access_rate(
            &AccessMode::Ofdma {
                other_bandwidths: vec![],
            },
            b,
            2.0,
            1.0,
            noise,
        )
        .unwrap();
        let noma = multi_access_rate(
            &AccessMode::Noma {
                interference: vec![],
            },
            b,
            2.0,
            1.0,
            noise,
        )
        .unwrap();
        assert!((ofdma - noma).abs() < 1e-12);
        assert!((ofdma - b * (1.0 + snr_num / noise).log2()).abs() < 1e-12);
    }

    #[test]
    fn ofdma_arithmetic_example() {
        // residual band 5, SNR 3 -> 5 * log2(4) = 10
        let r = multi_access_rate(
            &AccessMode::Ofdma {
                other_bandwidths: vec![2.0, 3.0],
            },
            10.0,
            3.0,
            1.0,
            1.0,
        )
        .unwrap();
        assert!((r - 10.0).abs() < 1e-12);
    }

    #[test]
    fn noma_interference_example() {
        let r = multi_access_rate(
            &AccessMode::Noma {
                interference: vec![1.0],
            },
            1.0,
            3.0,
            1.0,
            1.0,
        )
        .unwrap();
        assert!((r - (1.0f64 + 1.5).log2()).abs() < 1e-12);
    }

    #[test]
    fn ofdma_rejects_oversubscribed_band() {
        let err = multi_access_rate(
            &AccessMode::Ofdma {
                other_bandwidths: vec![6.0, 5.0],
            },
            10.0,
            1.0,
            1.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }
}
