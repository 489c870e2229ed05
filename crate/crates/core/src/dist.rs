//! Categorical distributions over a finite indexed support, the smoothed
//! session estimator and Kullback-Leibler divergence.
//!
//! Divergences are reported in nats (natural log throughout).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::catalog::{Catalog, GlobalModel};
use crate::error::Error;
use crate::math;
use crate::session::Session;

/// Tolerance for the "probabilities sum to 1" invariant.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability distribution over a finite support `0..support_size()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    /// Builds a distribution from probabilities that must already sum to 1
    /// within [`SUM_TOLERANCE`]. Entries are kept bit-for-bit as given.
    pub fn new(probs: Vec<f64>) -> Result<Self, Error> {
        if probs.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut sum = 0.0;
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidProbability { index, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::ProbabilitySum { sum });
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self, Error> {
        if weights.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut sum = 0.0;
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidProbability { index, value: w });
            }
            sum += w;
        }
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroWeightSum);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(support_size: usize) -> Self {
        let p = 1.0 / support_size as f64;
        Self {
            probs: vec![p; support_size.max(1)],
        }
    }

    /// Point mass at `index`.
    pub fn point(support_size: usize, index: usize) -> Self {
        let mut probs = vec![0.0; support_size.max(1)];
        probs[index] = 1.0;
        Self { probs }
    }

    /// Reweights a single value by `ratio` and renormalizes. Used to build
    /// planted targets that deviate from a base distribution at one value.
    pub fn tilt_value(&self, index: usize, ratio: f64) -> Result<Self, Error> {
        if !ratio.is_finite() || ratio <= 0.0 {
            return Err(Error::InvalidRatio { value: ratio });
        }
        let mut weights = self.probs.clone();
        weights[index] *= ratio;
        Self::from_weights(&weights)
    }

    /// Mixes with the uniform distribution: `(1 - epsilon) * p + epsilon / n`.
    pub fn mix_uniform(&self, epsilon: f64) -> Self {
        if epsilon == 0.0 {
            return self.clone();
        }
        let u = epsilon / self.probs.len() as f64;
        Self {
            probs: self.probs.iter().map(|p| (1.0 - epsilon) * p + u).collect(),
        }
    }

    #[inline]
    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Precomputes the CDF for repeated sampling.
    pub fn sampler(&self) -> CatSampler {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        CatSampler { cdf }
    }
}

/// Inverse-CDF sampler for a [`Categorical`].
#[derive(Debug, Clone)]
pub struct CatSampler {
    cdf: Vec<f64>,
}

impl CatSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

/// KL(p || q) over raw probability slices. Callers guarantee equal lengths.
pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> Result<f64, Error> {
    let mut sum = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        // 0 * ln(0 / q) is zero by convention, decided by branch.
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::InfiniteDivergence { index });
            }
            sum += pi * math::ln(pi / qi);
        }
    }
    // Guard against -1e-17-style roundoff when p is essentially q.
    if sum < 0.0 && sum > -1e-12 {
        sum = 0.0;
    }
    Ok(sum)
}

/// Kullback-Leibler divergence KL(p || q) in nats.
///
/// Zero iff `p == q`; errors when q has a zero where p does not, which
/// signals an unsmoothed reference distribution.
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64, Error> {
    if p.support_size() != q.support_size() {
        return Err(Error::SupportMismatch {
            left: p.support_size(),
            right: q.support_size(),
        });
    }
    kl_raw(p.probs(), q.probs())
}

/// Frequency of each value of property `prop` among the session's items:
/// `f^s_k(v) = #{ j : f(s_j, k) = v } / m`.
pub fn empirical_value_distribution(
    session: &Session,
    prop: usize,
    catalog: &Catalog,
) -> Result<Categorical, Error> {
    if session.is_empty() {
        return Err(Error::EmptySession);
    }
    let support = catalog.schema().property(prop).len();
    let mut counts = vec![0u32; support];
    for item_id in &session.items {
        let idx = catalog
            .item_index(item_id)
            .ok_or_else(|| Error::UnknownItem {
                id: item_id.clone(),
            })?;
        counts[catalog.value_of(idx, prop)] += 1;
    }
    let m = session.len() as f64;
    Categorical::new(counts.iter().map(|&c| c as f64 / m).collect())
}

/// Blends an empirical frequency distribution with the global reference:
/// with `lambda = exp(-alpha * m)`, returns `(1 - lambda) * f + lambda * g`.
///
/// Longer sessions put more trust in the empirical frequencies.
pub fn smoothed_blend(
    freq: &Categorical,
    global_k: &Categorical,
    alpha: f64,
    m: usize,
) -> Result<Categorical, Error> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::NegativeAlpha { value: alpha });
    }
    if m == 0 {
        return Err(Error::EmptySession);
    }
    if freq.support_size() != global_k.support_size() {
        return Err(Error::SupportMismatch {
            left: freq.support_size(),
            right: global_k.support_size(),
        });
    }
    let lambda = math::exp(-alpha * m as f64);
    let probs = freq
        .probs()
        .iter()
        .zip(global_k.probs())
        .map(|(&f, &g)| (1.0 - lambda) * f + lambda * g)
        .collect();
    Categorical::new(probs)
}

/// The smoothed session estimate of the property-`prop` value distribution.
pub fn smoothed_session_estimate(
    session: &Session,
    prop: usize,
    alpha: f64,
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<Categorical, Error> {
    let freq = empirical_value_distribution(session, prop, catalog)?;
    smoothed_blend(&freq, global.value_dist(prop), alpha, session.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::tests::two_color_catalog;

    fn cat(probs: &[f64]) -> Categorical {
        Categorical::new(probs.to_vec()).unwrap()
    }

    #[test]
    fn new_rejects_bad_input() {
        assert_eq!(Categorical::new(vec![]), Err(Error::EmptySupport));
        assert!(matches!(
            Categorical::new(vec![0.5, -0.5, 1.0]),
            Err(Error::InvalidProbability { index: 1, .. })
        ));
        assert!(matches!(
            Categorical::new(vec![0.5, 0.6]),
            Err(Error::ProbabilitySum { .. })
        ));
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = cat(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_matches_term_by_term_sum() {
        // Independent oracle: explicit two-term sum.
        let p = cat(&[0.5, 0.5]);
        let q = cat(&[0.25, 0.75]);
        let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        let got = kl_divergence(&p, &q).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn kl_single_surviving_term() {
        let p = cat(&[1.0, 0.0]);
        let q = cat(&[0.5, 0.5]);
        let got = kl_divergence(&p, &q).unwrap();
        assert!((got - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_support_mismatch() {
        let p = cat(&[1.0]);
        let q = cat(&[0.5, 0.5]);
        assert_eq!(
            kl_divergence(&p, &q),
            Err(Error::SupportMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn kl_infinite_on_unsmoothed_reference() {
        let p = cat(&[0.5, 0.5]);
        let q = cat(&[1.0, 0.0]);
        assert_eq!(
            kl_divergence(&p, &q),
            Err(Error::InfiniteDivergence { index: 1 })
        );
    }

    #[test]
    fn empirical_counts_values() {
        let (catalog, _global) = two_color_catalog();
        // two red views, one blue view
        let session = Session::from_items("u", vec!["r1".into(), "r1".into(), "b1".into()]);
        let f = empirical_value_distribution(&session, 0, &catalog).unwrap();
        assert!((f.prob(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.prob(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_point_mass_for_single_event() {
        let (catalog, _) = two_color_catalog();
        let session = Session::from_items("u", vec!["b1".into()]);
        let f = empirical_value_distribution(&session, 0, &catalog).unwrap();
        assert_eq!(f.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn empirical_rejects_empty_session() {
        let (catalog, _) = two_color_catalog();
        let session = Session::from_items("u", vec![]);
        assert_eq!(
            empirical_value_distribution(&session, 0, &catalog),
            Err(Error::EmptySession)
        );
    }

    #[test]
    fn blend_alpha_zero_returns_global() {
        let f = cat(&[1.0, 0.0]);
        let g = cat(&[0.5, 0.5]);
        let blended = smoothed_blend(&f, &g, 0.0, 4).unwrap();
        // lambda = 1 exactly
        assert_eq!(blended.probs(), g.probs());
    }

    #[test]
    fn blend_matches_direct_oracle() {
        // lambda = e^{-0.5 * 4} = e^{-2}
        let f = cat(&[1.0, 0.0]);
        let g = cat(&[0.5, 0.5]);
        let lambda = (-2.0f64).exp();
        let expect0 = (1.0 - lambda) + lambda * 0.5;
        let expect1 = lambda * 0.5;
        let blended = smoothed_blend(&f, &g, 0.5, 4).unwrap();
        assert!((blended.prob(0) - expect0).abs() < 1e-15);
        assert!((blended.prob(1) - expect1).abs() < 1e-15);
        assert!((blended.prob(0) - 0.93233).abs() < 1e-5);
        assert!((blended.prob(1) - 0.06767).abs() < 1e-5);
    }

    #[test]
    fn blend_large_alpha_returns_frequency() {
        let f = cat(&[0.25, 0.75]);
        let g = cat(&[0.5, 0.5]);
        let blended = smoothed_blend(&f, &g, 50.0, 1).unwrap();
        assert!((blended.prob(0) - 0.25).abs() < 1e-9);
        assert!((blended.prob(1) - 0.75).abs() < 1e-9);
    }

    #[test]
    fn blend_rejects_negative_alpha() {
        let f = cat(&[1.0, 0.0]);
        let g = cat(&[0.5, 0.5]);
        assert_eq!(
            smoothed_blend(&f, &g, -0.1, 1),
            Err(Error::NegativeAlpha { value: -0.1 })
        );
    }

    #[test]
    fn sampler_respects_zero_mass() {
        use rand::SeedableRng;
        let d = cat(&[0.5, 0.0, 0.5]);
        let sampler = d.sampler();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            assert_ne!(sampler.sample(&mut rng), 1);
        }
    }

    #[test]
    fn tilt_value_reweights_one_entry() {
        let g = Categorical::uniform(4);
        let t = g.tilt_value(2, 3.0).unwrap();
        // weights (1,1,3,1)/6
        assert!((t.prob(2) - 0.5).abs() < 1e-15);
        assert!((t.prob(0) - 1.0 / 6.0).abs() < 1e-15);
    }
}
