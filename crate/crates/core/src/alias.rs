//! Vose's alias method for O(1) draws from a fixed discrete distribution.

use rand::Rng;

/// Fills `prob` and `alias` for the distribution proportional to `weights`.
///
/// All three slices must have the same length, and every weight must be
/// positive and finite. Slot `i` keeps itself with probability `prob[i]`
/// and otherwise yields `alias[i]`.
pub(crate) fn build_into(weights: &[f64], prob: &mut [f64], alias: &mut [u32]) {
    let n = weights.len();
    debug_assert!(prob.len() == n && alias.len() == n);
    if n == 0 {
        return;
    }
    let total: f64 = weights.iter().sum();
    let mut small = Vec::with_capacity(n);
    let mut large = Vec::with_capacity(n);
    for (i, &w) in weights.iter().enumerate() {
        prob[i] = w * n as f64 / total;
        alias[i] = i as u32;
        if prob[i] < 1.0 {
            small.push(i);
        } else {
            large.push(i);
        }
    }
    while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
        small.pop();
        alias[s] = l as u32;
        prob[l] -= 1.0 - prob[s];
        if prob[l] < 1.0 {
            large.pop();
            small.push(l);
        }
    }
    // leftovers are 1 up to rounding
    for i in small.into_iter().chain(large) {
        prob[i] = 1.0;
    }
}

#[inline]
pub(crate) fn draw<R: Rng + ?Sized>(prob: &[f64], alias: &[u32], rng: &mut R) -> usize {
    let slot = rng.random_range(0..prob.len());
    if rng.random::<f64>() < prob[slot] {
        slot
    } else {
        alias[slot] as usize
    }
}

/// Alias table over a single distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasSampler {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasSampler {
    /// `None` if `weights` is empty or has a non-positive or non-finite entry.
    pub fn new(weights: &[f64]) -> Option<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return None;
        }
        let mut prob = vec![0.0; weights.len()];
        let mut alias = vec![0; weights.len()];
        build_into(weights, &mut prob, &mut alias);
        Some(AliasSampler { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.prob, &self.alias, rng)
    }

    /// Exact probability of each outcome implied by the table.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut p = vec![0.0; self.len()];
        for (i, (&keep, &a)) in self.prob.iter().zip(&self.alias).enumerate() {
            p[i] += keep / n;
            p[a as usize] += (1.0 - keep) / n;
        }
        p
    }
}
