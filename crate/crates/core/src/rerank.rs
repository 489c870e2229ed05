//! Base weight functions, the interest coefficient and the enhanced
//! arg-topN recommender.
//!
//! The enhanced score of item j is `c(j) * w(j)` where w is the base weight
//! and c multiplies, over every detected property, the ratio of the
//! estimated session value distribution to the global one at j's value.
//! With popularity weights this rescales the prior G into the posterior
//! item distribution given the session.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::catalog::{Catalog, GlobalModel};
use crate::detect::InterestReport;
use crate::dist::{smoothed_session_estimate, Categorical};
use crate::error::Error;
use crate::session::Session;

/// The base recommender's weight function w.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseScorer {
    /// w(j) = 1.
    Uniform,
    /// w(j) = G(j).
    Popularity,
    /// w(j) = cosine of the one-hot feature vectors of the anchor and j.
    StaticCosine,
}

impl BaseScorer {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaseScorer::Uniform => "uniform",
            BaseScorer::Popularity => "popularity",
            BaseScorer::StaticCosine => "static",
        }
    }
}

/// Base weight per item. `anchor` is the session's last item and is
/// required by the static-cosine scorer.
pub fn base_weights(
    scorer: BaseScorer,
    anchor: Option<usize>,
    catalog: &Catalog,
    global: &GlobalModel,
) -> Result<Vec<f64>, Error> {
    match scorer {
        BaseScorer::Uniform => Ok(vec![1.0; catalog.len()]),
        BaseScorer::Popularity => Ok(global.item_dist().probs().to_vec()),
        BaseScorer::StaticCosine => {
            let anchor = anchor.ok_or(Error::MissingAnchor)?;
            Ok((0..catalog.len())
                .map(|j| catalog.cosine_static(anchor, j))
                .collect())
        }
    }
}

/// Per-value likelihood ratios for each detected property, precomputed so
/// that scoring an item is a handful of lookups.
#[derive(Debug, Clone)]
pub struct InterestProfile {
    /// (property index, ratio per value index) pairs.
    factors: Vec<(usize, Vec<f64>)>,
}

impl InterestProfile {
    /// No detected interest: every coefficient is 1.
    pub fn empty() -> Self {
        Self {
            factors: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    fn ratios(estimate: &Categorical, global_k: &Categorical) -> Vec<f64> {
        estimate
            .probs()
            .iter()
            .zip(global_k.probs())
            .map(|(&e, &g)| {
                if g > 0.0 {
                    e / g
                } else if e > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Builds the profile for the report's detected properties, estimating
    /// each session value distribution with the given smoothing rates.
    pub fn from_report(
        session: &Session,
        report: &InterestReport,
        alphas: &[f64],
        global: &GlobalModel,
        catalog: &Catalog,
    ) -> Result<Self, Error> {
        let mut factors = Vec::with_capacity(report.interests.len());
        for &k in &report.interests {
            let estimate = smoothed_session_estimate(session, k, alphas[k], global, catalog)?;
            factors.push((k, Self::ratios(&estimate, global.value_dist(k))));
        }
        Ok(Self { factors })
    }

    /// Builds the profile from explicit session value distributions, one
    /// per property. Used when the estimates are known exactly.
    pub fn from_distributions(
        pairs: &[(usize, Categorical)],
        global: &GlobalModel,
    ) -> Result<Self, Error> {
        let mut factors = Vec::with_capacity(pairs.len());
        for (k, estimate) in pairs {
            let global_k = global.value_dist(*k);
            if estimate.support_size() != global_k.support_size() {
                return Err(Error::SupportMismatch {
                    left: estimate.support_size(),
                    right: global_k.support_size(),
                });
            }
            factors.push((*k, Self::ratios(estimate, global_k)));
        }
        Ok(Self { factors })
    }

    /// The interest coefficient of one item: the product over detected
    /// properties of the ratio at the item's value. Empty product is 1.
    pub fn coefficient(&self, catalog: &Catalog, item: usize) -> Result<f64, Error> {
        let mut c = 1.0;
        for (k, ratios) in &self.factors {
            let r = ratios[catalog.value_of(item, *k)];
            if !r.is_finite() {
                return Err(Error::ZeroReference {
                    key: catalog.schema().property(*k).key().into(),
                });
            }
            c *= r;
        }
        Ok(c)
    }
}

/// The interest coefficient c(j) for a single item given a session and its
/// detection report.
pub fn interest_coefficient(
    session: &Session,
    report: &InterestReport,
    item_id: &str,
    alphas: &[f64],
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<f64, Error> {
    let item = catalog
        .item_index(item_id)
        .ok_or_else(|| Error::UnknownItem { id: item_id.into() })?;
    let profile = InterestProfile::from_report(session, report, alphas, global, catalog)?;
    profile.coefficient(catalog, item)
}

/// A ranked recommendation list, scores non-increasing, ties broken by
/// ascending item id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of an item, if present.
    pub fn rank_of(&self, item_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|(id, _)| id == item_id)
            .map(|p| p + 1)
    }
}

/// Sorts `(item, score)` candidates into a top-`n` list: score descending,
/// ascending item id on exact score ties, `exclude` dropped.
pub fn rank_items(
    catalog: &Catalog,
    scores: impl IntoIterator<Item = (usize, f64)>,
    exclude: Option<usize>,
    n: usize,
) -> RankedList {
    let mut scored: Vec<(usize, f64)> = scores
        .into_iter()
        .filter(|&(j, _)| Some(j) != exclude)
        .collect();
    scored.sort_unstable_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| catalog.item(a.0).id().cmp(catalog.item(b.0).id()))
    });
    scored.truncate(n);
    RankedList {
        entries: scored
            .into_iter()
            .map(|(j, s)| (catalog.item(j).id().into(), s))
            .collect(),
    }
}

/// Enhanced top-N: ranks every item j other than the session's last item
/// by `c(j) * w(j)`.
pub fn recommend(
    session: &Session,
    scorer: BaseScorer,
    report: &InterestReport,
    n: usize,
    alphas: &[f64],
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<RankedList, Error> {
    recommend_with_candidates(session, scorer, report, n, None, alphas, global, catalog)
}

/// Like [`recommend`] but optionally rescoring only the base scorer's top
/// `candidates` items instead of the whole catalog. `None` keeps the exact
/// full-catalog semantics.
#[allow(clippy::too_many_arguments)]
pub fn recommend_with_candidates(
    session: &Session,
    scorer: BaseScorer,
    report: &InterestReport,
    n: usize,
    candidates: Option<usize>,
    alphas: &[f64],
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<RankedList, Error> {
    if n == 0 {
        return Err(Error::InvalidTopN);
    }
    let anchor_id = session.last_item().ok_or(Error::EmptySession)?;
    let anchor = catalog.item_index(anchor_id).ok_or_else(|| Error::UnknownItem {
        id: anchor_id.into(),
    })?;

    let weights = base_weights(scorer, Some(anchor), catalog, global)?;
    let profile = InterestProfile::from_report(session, report, alphas, global, catalog)?;

    let pool: Vec<usize> = match candidates {
        None => (0..catalog.len()).collect(),
        Some(c) => {
            let base = rank_items(
                catalog,
                weights.iter().copied().enumerate(),
                Some(anchor),
                c,
            );
            base.entries
                .iter()
                .map(|(id, _)| catalog.item_index(id).expect("ranked item exists"))
                .collect()
        }
    };

    let mut scores = Vec::with_capacity(pool.len());
    for j in pool {
        let c = profile.coefficient(catalog, j)?;
        scores.push((j, c * weights[j]));
    }
    Ok(rank_items(catalog, scores, Some(anchor), n))
}
