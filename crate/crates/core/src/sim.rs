//! Synthetic catalogs and sessions under the generative model: a session's
//! items are i.i.d. draws from a tilted item distribution.
//!
//! The tilt multiplies the global prior G by per-property likelihood
//! ratios, which is exactly the generative inverse of the posterior
//! re-scoring the recommender applies, so end-to-end lift experiments are
//! well-posed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::catalog::{fit_global_model, Catalog, GlobalModel, PropertySchema};
use crate::dist::Categorical;
use crate::error::Error;
use crate::session::{Event, EventType, Session, SessionEnd};

/// Spacing between events inside one synthetic session, in seconds.
pub const EVENT_SPACING_SECONDS: i64 = 10;

/// One property of a synthetic schema.
#[derive(Debug, Clone)]
pub struct SynthProperty {
    pub key: String,
    pub cardinality: usize,
    /// Distribution item values are drawn from; uniform when `None`.
    pub value_dist: Option<Categorical>,
}

impl SynthProperty {
    pub fn uniform(key: &str, cardinality: usize) -> Self {
        Self {
            key: key.into(),
            cardinality,
            value_dist: None,
        }
    }
}

/// Schema spec for [`synth_catalog`].
#[derive(Debug, Clone)]
pub struct SynthSchema {
    pub properties: Vec<SynthProperty>,
}

impl SynthSchema {
    pub fn uniform(props: &[(&str, usize)]) -> Self {
        Self {
            properties: props
                .iter()
                .map(|&(k, n)| SynthProperty::uniform(k, n))
                .collect(),
        }
    }
}

/// Generates a catalog of `n_items` with independently drawn property
/// values and fits a uniform-G global model over it. Deterministic in
/// `seed`.
pub fn synth_catalog(
    n_items: usize,
    schema: &SynthSchema,
    smoothing_epsilon: f64,
    seed: u64,
) -> Result<(Catalog, GlobalModel), Error> {
    if n_items < 2 {
        return Err(Error::TooFewItems { got: n_items });
    }
    let mut props = Vec::with_capacity(schema.properties.len());
    for p in &schema.properties {
        if p.cardinality < 2 {
            return Err(Error::DegenerateSchema { key: p.key.clone() });
        }
        if let Some(d) = &p.value_dist {
            if d.support_size() != p.cardinality {
                return Err(Error::SupportMismatch {
                    left: d.support_size(),
                    right: p.cardinality,
                });
            }
        }
        let labels = (0..p.cardinality).map(|v| format!("v{v}")).collect();
        props.push((p.key.clone(), labels));
    }
    let prop_schema = PropertySchema::new(props)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers: Vec<_> = schema
        .properties
        .iter()
        .map(|p| {
            p.value_dist
                .clone()
                .unwrap_or_else(|| Categorical::uniform(p.cardinality))
                .sampler()
        })
        .collect();
    let items = (0..n_items)
        .map(|i| {
            let values = samplers.iter().map(|s| s.sample(&mut rng) as u32).collect();
            (format!("i{i:06}"), values)
        })
        .collect();

    let catalog = Catalog::new(prop_schema, items)?;
    let global = fit_global_model(&catalog, &[], smoothing_epsilon)?.model;
    Ok((catalog, global))
}

/// The ground truth for one simulated session: target value distributions
/// for a chosen set of properties plus the session length. Empty targets
/// model the null (no interest) regime.
#[derive(Debug, Clone)]
pub struct PlantedInterest {
    /// (property index, target distribution over V_k) pairs.
    pub targets: Vec<(usize, Categorical)>,
    pub session_length: usize,
}

impl PlantedInterest {
    pub fn null(session_length: usize) -> Self {
        Self {
            targets: Vec::new(),
            session_length,
        }
    }

    pub fn new(targets: Vec<(usize, Categorical)>, session_length: usize) -> Self {
        Self {
            targets,
            session_length,
        }
    }
}

/// The tilted item distribution the session is drawn from:
/// `Psi(i) ∝ G(i) * prod_k target_k(f(i,k)) / G_k(f(i,k))`.
///
/// Exposed so tests can compare the sampler's weights against brute force.
pub fn tilted_item_distribution(
    catalog: &Catalog,
    global: &GlobalModel,
    targets: &[(usize, Categorical)],
) -> Result<Categorical, Error> {
    for (k, target) in targets {
        let support = catalog.schema().property(*k).len();
        if target.support_size() != support {
            return Err(Error::SupportMismatch {
                left: target.support_size(),
                right: support,
            });
        }
    }
    let mut weights = Vec::with_capacity(catalog.len());
    for i in 0..catalog.len() {
        let mut w = global.item_dist().prob(i);
        for (k, target) in targets {
            let v = catalog.value_of(i, *k);
            let g = global.value_dist(*k).prob(v);
            if g > 0.0 {
                w *= target.prob(v) / g;
            } else {
                // An item carries this value, so the unsmoothed pushforward
                // cannot be zero here unless the model mismatches the
                // catalog; treat as no mass.
                w = 0.0;
            }
        }
        weights.push(w);
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroTiltMass);
    }
    Categorical::from_weights(&weights)
}

/// Draws one session of `planted.session_length` i.i.d. items from the
/// tilted distribution, timestamps spaced [`EVENT_SPACING_SECONDS`] apart.
pub fn synth_session_with_rng<R: Rng + ?Sized>(
    catalog: &Catalog,
    global: &GlobalModel,
    planted: &PlantedInterest,
    user_id: &str,
    start_ts: i64,
    rng: &mut R,
) -> Result<Session, Error> {
    if planted.session_length == 0 {
        return Err(Error::EmptySession);
    }
    let tilt = tilted_item_distribution(catalog, global, &planted.targets)?;
    let sampler = tilt.sampler();
    let mut items = Vec::with_capacity(planted.session_length);
    let mut timestamps = Vec::with_capacity(planted.session_length);
    for j in 0..planted.session_length {
        let i = sampler.sample(rng);
        items.push(catalog.item(i).id().into());
        timestamps.push(start_ts + j as i64 * EVENT_SPACING_SECONDS);
    }
    Ok(Session {
        user_id: user_id.into(),
        items,
        timestamps,
        ended_by: SessionEnd::EndOfLog,
    })
}

/// [`synth_session_with_rng`] with its own RNG seeded from `seed`.
pub fn synth_session(
    catalog: &Catalog,
    global: &GlobalModel,
    planted: &PlantedInterest,
    user_id: &str,
    start_ts: i64,
    seed: u64,
) -> Result<Session, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth_session_with_rng(catalog, global, planted, user_id, start_ts, &mut rng)
}

/// Batch session generation config.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_sessions: usize,
    pub length_min: usize,
    pub length_max: usize,
    /// When set, each session plants one uniformly chosen property whose
    /// target is G_k with one uniformly chosen value reweighted by this
    /// ratio. `None` generates null sessions.
    pub planted_ratio: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        // Typical sessions run 5-10 events.
        Self {
            n_sessions: 1000,
            length_min: 5,
            length_max: 10,
            planted_ratio: None,
            seed: 0,
        }
    }
}

fn session_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 is the catalog generator's; sessions start at 1.
    rng.set_stream(1 + index as u64);
    rng
}

fn one_session(
    catalog: &Catalog,
    global: &GlobalModel,
    cfg: &SimConfig,
    index: usize,
) -> Result<Session, Error> {
    let mut rng = session_rng(cfg.seed, index);
    let m = rng.random_range(cfg.length_min..=cfg.length_max);
    let planted = match cfg.planted_ratio {
        None => PlantedInterest::null(m),
        Some(ratio) => {
            let k = rng.random_range(0..catalog.schema().len());
            let v = rng.random_range(0..catalog.schema().property(k).len());
            let target = global.value_dist(k).tilt_value(v, ratio)?;
            PlantedInterest::new(alloc::vec![(k, target)], m)
        }
    };
    synth_session_with_rng(
        catalog,
        global,
        &planted,
        &format!("u{index:06}"),
        index as i64 * 1_000_000,
        &mut rng,
    )
}

/// Generates `cfg.n_sessions` independent sessions, each from an RNG
/// stream derived from `(seed, session index)`, so output is identical
/// however the work is scheduled.
pub fn synth_sessions(
    catalog: &Catalog,
    global: &GlobalModel,
    cfg: &SimConfig,
) -> Result<Vec<Session>, Error> {
    if catalog.schema().is_empty() && cfg.planted_ratio.is_some() {
        return Err(Error::ZeroTiltMass);
    }
    if cfg.length_min == 0 || cfg.length_min > cfg.length_max {
        return Err(Error::InvalidLengthRange {
            min: cfg.length_min,
            max: cfg.length_max,
        });
    }
    if let Some(ratio) = cfg.planted_ratio {
        if !ratio.is_finite() || ratio <= 0.0 {
            return Err(Error::InvalidRatio { value: ratio });
        }
    }

    let indices: Vec<usize> = (0..cfg.n_sessions).collect();
    #[cfg(feature = "parallel")]
    let sessions: Result<Vec<Session>, Error> = indices
        .par_iter()
        .map(|&i| one_session(catalog, global, cfg, i))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let sessions: Result<Vec<Session>, Error> = indices
        .iter()
        .map(|&i| one_session(catalog, global, cfg, i))
        .collect();
    sessions
}

/// Flattens sessions into a view-event log in the same order and format
/// the sessionizer consumes.
pub fn sessions_to_events(sessions: &[Session]) -> Vec<Event> {
    let mut events = Vec::with_capacity(sessions.iter().map(Session::len).sum());
    for s in sessions {
        for (item, &ts) in s.items.iter().zip(&s.timestamps) {
            events.push(Event {
                user_id: s.user_id.clone(),
                item_id: item.clone(),
                timestamp: ts,
                event_type: EventType::View,
            });
        }
    }
    events
}
