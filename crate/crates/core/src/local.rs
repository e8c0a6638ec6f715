// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-stream recursive statistics.
//!
//! All recursions consume log-likelihood ratio increments `l_n`:
//!
//! - CUSUM: `W_n = max(0, W_{n-1}) + l_n`, `W_0 = 0`. The clamp applies to the
//!   previous value, so `W_n` itself may be negative. The usual clamped form
//!   `max(0, W_{n-1} + l_n)` equals `max(0, W_n)`, so both cross any `h > 0`
//!   at the same sample.
//! - Cumulative sum: `S_n = l_1 + ... + l_n`, `S_0 = 0`, with
//!   `W_n = S_n - min_{0 <= k < n} S_k`.
//! - TE-CUSUM: `G_n = max(G_{n-1}, W_n)`, `G_0 = 0`, i.e. the largest sum of
//!   increments over any window `(nu, N]` with `N <= n`.
//! - FMA: `Z_n = S_n - S_{n-w}`, the sum of the last `w` increments.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("no sample has been consumed yet")]
    Empty,
    #[error("non-finite increment {0}")]
    NonFinite(f64),
    #[error("window length must be at least 1")]
    ZeroWindow,
}

fn check(inc: f64) -> Result<f64, StateError> {
    if inc.is_finite() {
        Ok(inc)
    } else {
        Err(StateError::NonFinite(inc))
    }
}

/// Estimated start (and, for TE-CUSUM, end) of a change.
///
/// Samples are numbered from 1; `nu_hat = k` means the change is estimated to
/// affect samples `k + 1, k + 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangePointEstimate {
    pub nu_hat: u64,
    /// Sample at which `W` attained the current `G`.
    pub n_hat: Option<u64>,
}

/// CUSUM statistic with the cumulative sum needed for change-point estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumState {
    w: f64,
    s: f64,
    /// `min_{0 <= k < n} S_k`; `+inf` before the first sample.
    s_min: f64,
    /// Latest `k < n` attaining `s_min`.
    s_argmin: u64,
    n: u64,
}

impl Default for CusumState {
    fn default() -> Self {
        Self::new()
    }
}

impl CusumState {
    /// Reals kept per stream (`W`, `S`, `min S`), independent of history length.
    pub const STORED_REALS: usize = 3;

    pub const fn new() -> Self {
        Self {
            w: 0.0,
            s: 0.0,
            s_min: f64::INFINITY,
            s_argmin: 0,
            n: 0,
        }
    }

    /// Consumes one increment and returns the new `W`.
    ///
    /// The increment must be finite; see [`CusumState::try_update`].
    #[inline]
    pub fn update(&mut self, inc: f64) -> f64 {
        debug_assert!(inc.is_finite());
        // S_{n-1} joins the candidate set before S_n is formed.
        if self.s <= self.s_min {
            self.s_min = self.s;
            self.s_argmin = self.n;
        }
        self.s += inc;
        self.n += 1;
        self.w = self.w.max(0.0) + inc;
        self.w
    }

    pub fn try_update(&mut self, inc: f64) -> Result<f64, StateError> {
        check(inc).map(|inc| self.update(inc))
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `min_{0 <= k < n} S_k`, or `None` before the first sample.
    pub fn s_min(&self) -> Option<f64> {
        (self.n > 0).then_some(self.s_min)
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    /// Latest minimiser of `S_k` over `0 <= k < n`.
    pub fn estimate_change_point(&self) -> Result<ChangePointEstimate, StateError> {
        if self.n == 0 {
            return Err(StateError::Empty);
        }
        Ok(ChangePointEstimate {
            nu_hat: self.s_argmin,
            n_hat: None,
        })
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }
}

/// Temporary-event CUSUM: running maximum of the CUSUM statistic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TeCusumState {
    cusum: CusumState,
    g: f64,
    g_at: u64,
}

impl TeCusumState {
    pub const STORED_REALS: usize = CusumState::STORED_REALS + 1;

    pub const fn new() -> Self {
        Self {
            cusum: CusumState::new(),
            g: 0.0,
            g_at: 0,
        }
    }

    /// Consumes one increment and returns the new `G`.
    #[inline]
    pub fn update(&mut self, inc: f64) -> f64 {
        let w = self.cusum.update(inc);
        if w > self.g {
            self.g = w;
            self.g_at = self.cusum.n;
        }
        self.g
    }

    pub fn try_update(&mut self, inc: f64) -> Result<f64, StateError> {
        check(inc).map(|inc| self.update(inc))
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn w(&self) -> f64 {
        self.cusum.w
    }

    pub fn cusum(&self) -> &CusumState {
        &self.cusum
    }

    /// Start estimate from the inner CUSUM; end estimate is the sample where
    /// `W` last raised `G` (absent while `G = 0`).
    pub fn estimate_change_point(&self) -> Result<ChangePointEstimate, StateError> {
        let mut est = self.cusum.estimate_change_point()?;
        est.n_hat = (self.g_at > 0).then_some(self.g_at);
        Ok(est)
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }
}

/// Moving sum of the last `w` increments over a fixed ring buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FmaState {
    buf: Box<[f64]>,
    head: usize,
    len: usize,
    z: f64,
}

impl FmaState {
    pub fn new(window: usize) -> Result<Self, StateError> {
        if window == 0 {
            return Err(StateError::ZeroWindow);
        }
        Ok(Self {
            buf: vec![0.0; window].into_boxed_slice(),
            head: 0,
            len: 0,
            z: 0.0,
        })
    }

    pub fn window(&self) -> usize {
        self.buf.len()
    }

    /// Number of increment slots held by the buffer.
    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    /// Buffer slots plus the running sum.
    pub fn stored_reals(&self) -> usize {
        self.buf.len() + 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Consumes one increment and returns the new `Z`.
    #[inline]
    pub fn update(&mut self, inc: f64) -> f64 {
        debug_assert!(inc.is_finite());
        let cap = self.buf.len();
        if self.len < cap {
            self.buf[self.len] = inc;
            self.len += 1;
            self.z += inc;
        } else {
            self.z += inc - self.buf[self.head];
            self.buf[self.head] = inc;
            self.head += 1;
            if self.head == cap {
                self.head = 0;
                // Once per window: drop the rounding drift of the running sum.
                self.z = self.buf.iter().sum();
            }
        }
        self.z
    }

    pub fn try_update(&mut self, inc: f64) -> Result<f64, StateError> {
        check(inc).map(|inc| self.update(inc))
    }

    /// Buffer contents, oldest first.
    pub fn contents(&self) -> impl Iterator<Item = f64> + '_ {
        let (tail, front) = self.buf[..self.len].split_at(self.head.min(self.len));
        front.iter().chain(tail.iter()).copied()
    }

    pub fn reset(&mut self) {
        self.buf.fill(0.0);
        self.head = 0;
        self.len = 0;
        self.z = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_increments(seed: u64, n: usize, drift: f64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| drift + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    // max over 0 <= nu < n of sum_{k=nu+1..n} inc_k
    fn brute_cusum(inc: &[f64]) -> f64 {
        let n = inc.len();
        (0..n)
            .map(|nu| inc[nu..n].iter().sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    // max over 0 <= nu <= N <= n of sum_{k=nu+1..N} inc_k (empty window allowed)
    fn brute_tecusum(inc: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for nu in 0..inc.len() {
            let mut acc = 0.0;
            for &v in &inc[nu..] {
                acc += v;
                best = best.max(acc);
            }
        }
        best
    }

    #[test]
    fn cusum_hand_sequence() {
        let mut st = CusumState::new();
        let ws: Vec<f64> = [1.0, -2.0, 0.5].iter().map(|&v| st.update(v)).collect();
        assert_eq!(ws, vec![1.0, -1.0, 0.5]);
    }

    #[test]
    fn cusum_zero_increments_stay_zero() {
        let mut st = CusumState::new();
        for _ in 0..100 {
            assert_eq!(st.update(0.0), 0.0);
        }
    }

    #[test]
    fn cusum_matches_brute_force_glrt() {
        let inc = random_increments(3, 500, -0.1);
        let mut st = CusumState::new();
        for &v in &inc {
            st.update(v);
        }
        assert!((st.w() - brute_cusum(&inc)).abs() < 1e-9);
    }

    #[test]
    fn tecusum_hand_sequence() {
        let mut st = TeCusumState::new();
        let gs: Vec<f64> = [1.0, -2.0, 0.5].iter().map(|&v| st.update(v)).collect();
        assert_eq!(gs, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn tecusum_equals_w_under_positive_increments() {
        let mut st = TeCusumState::new();
        for i in 1..50 {
            let g = st.update(0.1 * i as f64);
            assert_eq!(g, st.w());
        }
    }

    #[test]
    fn tecusum_matches_brute_force_window_glrt() {
        let inc = random_increments(4, 300, -0.2);
        let mut st = TeCusumState::new();
        for &v in &inc {
            st.update(v);
        }
        assert!((st.g() - brute_tecusum(&inc)).abs() < 1e-9);
    }

    #[test]
    fn fma_sequences() {
        let mut st = FmaState::new(3).unwrap();
        let zs: Vec<f64> = [1.0; 4].iter().map(|&v| st.update(v)).collect();
        assert_eq!(zs, vec![1.0, 2.0, 3.0, 3.0]);

        let mut one = FmaState::new(1).unwrap();
        for v in [0.5, -2.0, 3.25] {
            assert_eq!(one.update(v), v);
        }
        assert_eq!(FmaState::new(0), Err(StateError::ZeroWindow));
    }

    #[test]
    fn fma_matches_trailing_window_sums() {
        let inc = random_increments(5, 10_000, 0.0);
        let w = 50;
        let mut st = FmaState::new(w).unwrap();
        for (i, &v) in inc.iter().enumerate() {
            let z = st.update(v);
            let direct: f64 = inc[(i + 1).saturating_sub(w)..=i].iter().sum();
            assert!((z - direct).abs() < 1e-9, "n={}", i + 1);
            assert!(st.len() <= w);
        }
        let contents: Vec<f64> = st.contents().collect();
        assert_eq!(contents, inc[inc.len() - w..].to_vec());
    }

    #[test]
    fn fma_sum_stays_exact_over_long_streams() {
        let mut st = FmaState::new(37).unwrap();
        let mut rng = seed::rng(8);
        for _ in 0..1_000_000 {
            st.update(rng.sample::<f64, _>(StandardNormal) * 3.0);
        }
        let resum: f64 = st.contents().sum();
        assert!((st.z() - resum).abs() <= 1e-9);
    }

    #[test]
    fn change_point_latest_minimiser() {
        // S = [0, -1, -0.5, 2]
        let mut st = CusumState::new();
        for v in [-1.0, 0.5, 2.5] {
            st.update(v);
        }
        assert_eq!(st.estimate_change_point().unwrap().nu_hat, 1);

        // S = [0, -1, -1, 3]
        let mut st = CusumState::new();
        for v in [-1.0, 0.0, 4.0] {
            st.update(v);
        }
        assert_eq!(st.estimate_change_point().unwrap().nu_hat, 2);

        assert_eq!(
            CusumState::new().estimate_change_point(),
            Err(StateError::Empty)
        );
    }

    #[test]
    fn change_point_is_strictly_before_current_sample() {
        let mut st = CusumState::new();
        for v in random_increments(12, 400, 0.0) {
            st.update(v);
            assert!(st.estimate_change_point().unwrap().nu_hat < st.samples());
        }
    }

    #[test]
    fn tecusum_reports_end_estimate() {
        let mut st = TeCusumState::new();
        for v in [-1.0, 2.0, 1.0, -5.0, 0.5] {
            st.update(v);
        }
        let est = st.estimate_change_point().unwrap();
        assert_eq!(est.n_hat, Some(3));
        assert_eq!(st.g(), 3.0);
    }

    #[test]
    fn reset_matches_fresh_state() {
        let inc = random_increments(9, 64, 0.3);
        let mut c = CusumState::new();
        let mut t = TeCusumState::new();
        let mut f = FmaState::new(7).unwrap();
        for &v in &inc {
            c.update(v);
            t.update(v);
            f.update(v);
        }
        c.reset();
        t.reset();
        f.reset();
        assert_eq!(c, CusumState::new());
        assert_eq!(t, TeCusumState::new());
        assert_eq!(f, FmaState::new(7).unwrap());

        let (mut fresh_c, mut fresh_f) = (CusumState::new(), FmaState::new(7).unwrap());
        assert_eq!(c.update(0.7), fresh_c.update(0.7));
        assert_eq!(f.update(0.7), fresh_f.update(0.7));
        assert_eq!(c, fresh_c);
        assert_eq!(f, fresh_f);
    }

    #[test]
    fn non_finite_increments_are_rejected() {
        assert_eq!(
            CusumState::new()
                .try_update(f64::NAN)
                .map_err(|e| e.to_string()),
            Err("non-finite increment NaN".to_string())
        );
        assert!(TeCusumState::new().try_update(f64::INFINITY).is_err());
        assert!(FmaState::new(2)
            .unwrap()
            .try_update(f64::NEG_INFINITY)
            .is_err());
    }

    #[test]
    fn footprints_do_not_grow_with_history() {
        let before = std::mem::size_of::<TeCusumState>();
        let mut st = TeCusumState::new();
        for v in random_increments(1, 10_000, 0.0) {
            st.update(v);
        }
        assert_eq!(std::mem::size_of_val(&st), before);
        let fma = FmaState::new(200).unwrap();
        assert_eq!(fma.capacity(), 200);
        assert_eq!(fma.stored_reals(), 201);
    }

    proptest! {
        #[test]
        fn duality_and_running_max(inc in prop::collection::vec(-3.0f64..3.0, 1..200)) {
            let mut st = TeCusumState::new();
            let (mut s, mut min_prev) = (0.0f64, f64::INFINITY);
            let mut max_w = 0.0f64;
            let mut last_g = 0.0f64;
            for &v in &inc {
                min_prev = min_prev.min(s);
                s += v;
                let g = st.update(v);
                let w = st.w();
                max_w = max_w.max(w);
                prop_assert!((w - (s - min_prev)).abs() < 1e-9);
                prop_assert!(w <= g);
                prop_assert!(g >= last_g);
                prop_assert!((g - max_w).abs() < 1e-12);
                last_g = g;
            }
        }

        #[test]
        fn first_crossings_of_w_and_g_coincide(
            inc in prop::collection::vec(-2.0f64..2.0, 1..300),
            h in 0.01f64..5.0,
        ) {
            let mut st = TeCusumState::new();
            let (mut first_w, mut first_g) = (None, None);
            for (i, &v) in inc.iter().enumerate() {
                let g = st.update(v);
                if first_w.is_none() && st.w() > h { first_w = Some(i); }
                if first_g.is_none() && g > h { first_g = Some(i); }
            }
            prop_assert_eq!(first_w, first_g);
        }
    }
}
