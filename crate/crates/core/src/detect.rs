//! Interest detection: Monte Carlo calibration of length-dependent
//! thresholds and the per-property decision rule.
//!
//! For each property k the null hypothesis is that the session's values are
//! i.i.d. draws from G_k. The test statistic is the divergence of the
//! smoothed session estimate from G_k. Thresholds are the empirical
//! (1 - significance)-quantile of that statistic under the null, computed
//! separately per session length m because the null distribution shrinks as
//! m grows.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::catalog::{Catalog, GlobalModel, PropertySchema};
use crate::dist::{kl_raw, smoothed_session_estimate, Categorical};
use crate::error::Error;
use crate::math;
use crate::session::Session;

/// Smallest Monte Carlo sample count accepted by calibration.
pub const MIN_CALIBRATION_SAMPLES: usize = 1000;

/// Calibrated thresholds eps(k, m) for every property and session length
/// `1..=m_max`, plus the calibration metadata needed to reuse them safely.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    keys: Vec<String>,
    alpha: Vec<f64>,
    /// `thresholds[k][m - 1]` holds eps for property k at length m.
    thresholds: Vec<Vec<f64>>,
    significance: f64,
    n_samples: usize,
    m_max: usize,
    seed: u64,
}

impl ThresholdTable {
    /// Rebuilds a table from stored parts, re-validating every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        keys: Vec<String>,
        alpha: Vec<f64>,
        thresholds: Vec<Vec<f64>>,
        significance: f64,
        n_samples: usize,
        m_max: usize,
        seed: u64,
    ) -> Result<Self, Error> {
        if !(significance > 0.0 && significance < 1.0) {
            return Err(Error::InvalidSignificance {
                value: significance,
            });
        }
        if m_max == 0 {
            return Err(Error::InvalidMMax);
        }
        if alpha.len() != keys.len() {
            return Err(Error::PropertyCountMismatch {
                expected: keys.len(),
                got: alpha.len(),
            });
        }
        if thresholds.len() != keys.len() {
            return Err(Error::PropertyCountMismatch {
                expected: keys.len(),
                got: thresholds.len(),
            });
        }
        for (k, row) in thresholds.iter().enumerate() {
            if row.len() != m_max {
                return Err(Error::TableSchemaMismatch {
                    detail: alloc::format!(
                        "property {:?} has {} thresholds, M_max is {}",
                        keys[k],
                        row.len(),
                        m_max
                    ),
                });
            }
            for (i, &eps) in row.iter().enumerate() {
                if !eps.is_finite() || eps < 0.0 {
                    return Err(Error::InvalidThreshold {
                        key: keys[k].clone(),
                        m: i + 1,
                        value: eps,
                    });
                }
            }
        }
        for (k, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::NegativeAlpha { value: alpha[k] });
            }
        }
        Ok(Self {
            keys,
            alpha,
            thresholds,
            significance,
            n_samples,
            m_max,
            seed,
        })
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn thresholds_for(&self, prop: usize) -> &[f64] {
        &self.thresholds[prop]
    }

    pub fn significance(&self) -> f64 {
        self.significance
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// eps(k, m); sessions longer than `m_max` reuse the `m_max` cell,
    /// which only errs on the conservative side because the null statistic
    /// shrinks with m.
    pub fn threshold(&self, prop: usize, m: usize) -> f64 {
        let m = m.clamp(1, self.m_max);
        self.thresholds[prop][m - 1]
    }

    /// Pins a property's threshold to a fixed value for every length,
    /// overriding the calibrated cells (the meta-parameter route).
    pub fn set_override(&mut self, key: &str, eps: f64) -> Result<(), Error> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidThreshold {
                key: key.to_string(),
                m: 0,
                value: eps,
            });
        }
        let prop = self
            .keys
            .iter()
            .position(|k| k == key)
            .ok_or_else(|| Error::UnknownProperty { key: key.into() })?;
        for cell in &mut self.thresholds[prop] {
            *cell = eps;
        }
        Ok(())
    }
}

/// Detection outcome for one session: the interest set plus the evidence
/// it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestReport {
    pub session_length: usize,
    /// Ascending property indices with divergence above threshold (U^s).
    pub interests: Vec<usize>,
    /// Divergence per property, in nats.
    pub divergences: Vec<f64>,
    /// Threshold applied per property.
    pub thresholds_applied: Vec<f64>,
}

impl InterestReport {
    /// A no-interest report; the enhanced scorer degenerates to the base.
    pub fn empty(session_length: usize, n_props: usize) -> Self {
        Self {
            session_length,
            interests: Vec::new(),
            divergences: vec![0.0; n_props],
            thresholds_applied: vec![f64::INFINITY; n_props],
        }
    }

    pub fn is_interest(&self, prop: usize) -> bool {
        self.interests.binary_search(&prop).is_ok()
    }
}

/// 1-based rank of the `(1 - significance)`-quantile order statistic in an
/// ascending sort of `n` samples: `ceil((1 - significance) * n)`.
///
/// The product is snapped to the nearest integer when within 1e-6 so that
/// float representation noise (e.g. `(1 - 0.999) * 20000 = 20.000000000000018`)
/// cannot shift the rank off the exact-arithmetic value.
pub fn quantile_rank(n: usize, significance: f64) -> usize {
    let raw = (1.0 - significance) * n as f64;
    let snapped = math::round(raw);
    let rank = if (raw - snapped).abs() < 1e-6 {
        snapped
    } else {
        math::ceil(raw)
    } as usize;
    rank.clamp(1, n)
}

/// Deterministic RNG for one calibration cell, independent of the order
/// cells are computed in.
fn cell_rng(seed: u64, prop: usize, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((prop as u64) << 32) | m as u64);
    rng
}

/// Calibrates one (property, length) cell: draws `n_samples` null sessions
/// of `m` i.i.d. values from `global_k`, computes the smoothed-blend
/// divergence for each, and returns the empirical
/// `(1 - significance)`-quantile.
pub fn calibrate_cell(
    global_k: &Categorical,
    alpha: f64,
    m: usize,
    n_samples: usize,
    significance: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let gk = global_k.probs();
    let sampler = global_k.sampler();
    let lambda = math::exp(-alpha * m as f64);
    let inv_m = 1.0 / m as f64;

    let mut counts = vec![0u32; gk.len()];
    let mut deltas = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..m {
            counts[sampler.sample(rng)] += 1;
        }
        let mut delta = 0.0;
        for (&c, &g) in counts.iter().zip(gk) {
            let p = (1.0 - lambda) * (c as f64 * inv_m) + lambda * g;
            if p > 0.0 {
                delta += p * math::ln(p / g);
            }
        }
        deltas.push(delta.max(0.0));
    }
    deltas.sort_unstable_by(|a, b| a.total_cmp(b));
    deltas[quantile_rank(n_samples, significance) - 1]
}

/// Calibrates eps(k, m) for every property and m in `1..=m_max` by sampling
/// from G_k. Each cell draws from an RNG seeded by `(seed, k, m)`, so the
/// table is identical however the cells are scheduled.
pub fn calibrate_thresholds(
    schema: &PropertySchema,
    global: &GlobalModel,
    alphas: &[f64],
    significance: f64,
    n_samples: usize,
    m_max: usize,
    seed: u64,
) -> Result<ThresholdTable, Error> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidSignificance {
            value: significance,
        });
    }
    if n_samples < MIN_CALIBRATION_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n_samples,
            min: MIN_CALIBRATION_SAMPLES,
        });
    }
    if m_max == 0 {
        return Err(Error::InvalidMMax);
    }
    if alphas.len() != schema.len() {
        return Err(Error::PropertyCountMismatch {
            expected: schema.len(),
            got: alphas.len(),
        });
    }
    for &a in alphas {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::NegativeAlpha { value: a });
        }
    }

    let cells: Vec<(usize, usize)> = (0..schema.len())
        .flat_map(|k| (1..=m_max).map(move |m| (k, m)))
        .collect();
    let run = |&(k, m): &(usize, usize)| {
        let mut rng = cell_rng(seed, k, m);
        calibrate_cell(
            global.value_dist(k),
            alphas[k],
            m,
            n_samples,
            significance,
            &mut rng,
        )
    };

    #[cfg(feature = "parallel")]
    let eps: Vec<f64> = cells.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let eps: Vec<f64> = cells.iter().map(run).collect();

    let thresholds = (0..schema.len())
        .map(|k| eps[k * m_max..(k + 1) * m_max].to_vec())
        .collect();
    ThresholdTable::from_parts(
        schema.keys().map(String::from).collect(),
        alphas.to_vec(),
        thresholds,
        significance,
        n_samples,
        m_max,
        seed,
    )
}

/// The test statistic for one property:
/// `KL(smoothed_session_estimate || G_k)` in nats.
pub fn session_divergence(
    session: &Session,
    prop: usize,
    alpha: f64,
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<f64, Error> {
    let estimate = smoothed_session_estimate(session, prop, alpha, global, catalog)?;
    kl_raw(estimate.probs(), global.value_dist(prop).probs())
}

/// Applies the decision rule to every property: k enters U^s iff its
/// divergence exceeds the calibrated threshold at length `min(m, m_max)`.
///
/// `alphas` must be exactly the rates the table was calibrated with;
/// anything else would compare the statistic against a quantile from a
/// different null, so it is rejected.
pub fn detect_interest(
    session: &Session,
    table: &ThresholdTable,
    alphas: &[f64],
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<InterestReport, Error> {
    if session.is_empty() {
        return Err(Error::EmptySession);
    }
    let schema = catalog.schema();
    if alphas.len() != schema.len() {
        return Err(Error::PropertyCountMismatch {
            expected: schema.len(),
            got: alphas.len(),
        });
    }
    if table.keys().len() != schema.len() {
        return Err(Error::TableSchemaMismatch {
            detail: alloc::format!(
                "table has {} properties, catalog has {}",
                table.keys().len(),
                schema.len()
            ),
        });
    }
    for (k, key) in schema.keys().enumerate() {
        if table.keys()[k] != key {
            return Err(Error::TableSchemaMismatch {
                detail: alloc::format!(
                    "property {} is {:?} in the catalog but {:?} in the table",
                    k,
                    key,
                    table.keys()[k]
                ),
            });
        }
        if table.alpha()[k].to_bits() != alphas[k].to_bits() {
            return Err(Error::AlphaMismatch { key: key.into() });
        }
    }

    let m = session.len();
    let mut interests = Vec::new();
    let mut divergences = Vec::with_capacity(schema.len());
    let mut thresholds_applied = Vec::with_capacity(schema.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        let delta = session_divergence(session, k, alpha, global, catalog)?;
        let eps = table.threshold(k, m);
        if delta > eps {
            interests.push(k);
        }
        divergences.push(delta);
        thresholds_applied.push(eps);
    }
    Ok(InterestReport {
        session_length: m,
        interests,
        divergences,
        thresholds_applied,
    })
}
