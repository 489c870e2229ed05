//! Property tests for the crate's structural invariants: Gibbs inequality,
//! estimator bounds, pushforward consistency, sessionization partition
//! laws, tilt correctness and ranking identities.

use proptest::prelude::*;

use klboost_core::catalog::fit_global_model;
use klboost_core::detect::{calibrate_thresholds, detect_interest, InterestReport};
use klboost_core::dist::{
    empirical_value_distribution, kl_divergence, smoothed_blend, smoothed_session_estimate,
    Categorical,
};
use klboost_core::rerank::{base_weights, rank_items, recommend, BaseScorer};
use klboost_core::session::{sort_events, split_sessions, Event, EventType, Session, SessionEnd};
use klboost_core::sim::{synth_catalog, tilted_item_distribution, SynthSchema};

// ---------------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------------

fn categorical(support: usize) -> impl Strategy<Value = Categorical> {
    proptest::collection::vec(0.01f64..1.0, support)
        .prop_map(|w| Categorical::from_weights(&w).unwrap())
}

fn categorical_pair() -> impl Strategy<Value = (Categorical, Categorical)> {
    (2usize..=50).prop_flat_map(|n| (categorical(n), categorical(n)))
}

prop_compose! {
    fn random_events(max_len: usize)(
        rows in proptest::collection::vec(
            (0u8..5, 0i64..5_000, 0u8..10, 0u8..200),
            0..max_len,
        )
    ) -> Vec<Event> {
        rows.into_iter()
            .map(|(user, ts, ty, item)| Event {
                user_id: format!("u{user}"),
                item_id: format!("i{item}"),
                timestamp: ts,
                event_type: if ty < 2 { EventType::Purchase } else { EventType::View },
            })
            .collect()
    }
}

/// Independent KL oracle: different formula arrangement (ln p - ln q) and
/// std's ln rather than the crate's libm path.
fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            total += pi * (pi.ln() - qi.ln());
        }
    }
    total
}

fn tv_distance(a: &Categorical, b: &Categorical) -> f64 {
    0.5 * a
        .probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// distributions
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn gibbs_inequality_and_oracle_agreement((p, q) in categorical_pair()) {
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        let oracle = kl_oracle(p.probs(), q.probs());
        prop_assert!((kl - oracle).abs() < 1e-12, "kl={kl} oracle={oracle}");
    }

    #[test]
    fn kl_self_is_exactly_zero(p in (2usize..=50).prop_flat_map(categorical)) {
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn smoothed_blend_stays_within_bounds(
        (f, g) in categorical_pair(),
        alpha in 0.0f64..5.0,
        m in 1usize..30,
    ) {
        let blended = smoothed_blend(&f, &g, alpha, m).unwrap();
        let mut sum = 0.0;
        for v in 0..blended.support_size() {
            let lo = f.prob(v).min(g.prob(v));
            let hi = f.prob(v).max(g.prob(v));
            prop_assert!(blended.prob(v) >= lo - 1e-12);
            prop_assert!(blended.prob(v) <= hi + 1e-12);
            sum += blended.prob(v);
        }
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empirical_distribution_matches_counting_oracle(
        seed in 0u64..300,
        picks in proptest::collection::vec(0usize..30, 1..25),
    ) {
        let schema = SynthSchema::uniform(&[("color", 7)]);
        let (catalog, _) = synth_catalog(30, &schema, 1e-6, seed).unwrap();
        let items: Vec<String> = picks
            .iter()
            .map(|&i| catalog.item(i).id().to_string())
            .collect();
        let session = Session::from_items("u", items.clone());
        let dist = empirical_value_distribution(&session, 0, &catalog).unwrap();

        // independent oracle: hash-map label counting
        let mut counts: std::collections::HashMap<usize, usize> = Default::default();
        for id in &items {
            let idx = catalog.item_index(id).unwrap();
            *counts.entry(catalog.value_of(idx, 0)).or_default() += 1;
        }
        let mut total = 0.0;
        for v in 0..dist.support_size() {
            let expected = *counts.get(&v).unwrap_or(&0) as f64 / items.len() as f64;
            prop_assert!((dist.prob(v) - expected).abs() < 1e-15);
            total += dist.prob(v);
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn monotone_trust_in_session_length() {
    // Repeating a session's contents keeps the empirical profile but grows
    // m, which must pull the estimate monotonically toward the profile.
    let schema = SynthSchema::uniform(&[("color", 4)]);
    let (catalog, global) = synth_catalog(40, &schema, 1e-6, 11).unwrap();
    let base: Vec<String> = ["i000000", "i000001", "i000002"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let freq = empirical_value_distribution(
        &Session::from_items("u", base.clone()),
        0,
        &catalog,
    )
    .unwrap();
    let mut last = f64::INFINITY;
    for repeats in 1..=5 {
        let items: Vec<String> = base
            .iter()
            .cycle()
            .take(base.len() * repeats)
            .cloned()
            .collect();
        let session = Session::from_items("u", items);
        let estimate = smoothed_session_estimate(&session, 0, 0.5, &global, &catalog).unwrap();
        let tv = tv_distance(&estimate, &freq);
        assert!(tv <= last + 1e-15, "tv grew: {tv} > {last}");
        last = tv;
    }
}

// ---------------------------------------------------------------------------
// catalog / global model
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pushforward_consistency_and_determinism(
        n_items in 2usize..40,
        n_values in 2usize..8,
        seed in 0u64..500,
        events in random_events(60),
    ) {
        let schema = SynthSchema::uniform(&[("a", n_values), ("b", 3)]);
        let (catalog, _) = synth_catalog(n_items, &schema, 0.0, seed).unwrap();
        // keep only events whose items exist to exercise the clean path too
        let fit = fit_global_model(&catalog, &events, 0.0).unwrap();
        let again = fit_global_model(&catalog, &events, 0.0).unwrap();
        prop_assert_eq!(&fit.model, &again.model);

        for k in 0..catalog.schema().len() {
            let gk = fit.model.value_dist(k);
            for v in 0..gk.support_size() {
                // brute-force pushforward oracle
                let direct: f64 = (0..catalog.len())
                    .filter(|&i| catalog.value_of(i, k) == v)
                    .map(|i| fit.model.item_dist().prob(i))
                    .sum();
                prop_assert!((gk.prob(v) - direct).abs() < 1e-12);
            }
        }

        let smoothed = fit_global_model(&catalog, &events, 1e-6).unwrap();
        for k in 0..catalog.schema().len() {
            for v in 0..smoothed.model.value_dist(k).support_size() {
                prop_assert!(smoothed.model.value_dist(k).prob(v) > 0.0);
            }
        }
    }

    #[test]
    fn property_values_always_in_range(
        n_items in 2usize..60,
        seed in 0u64..500,
    ) {
        let schema = SynthSchema::uniform(&[("a", 5), ("b", 2), ("c", 9)]);
        let (catalog, _) = synth_catalog(n_items, &schema, 1e-6, seed).unwrap();
        for item in catalog.items() {
            for (k, def) in catalog.schema().iter().enumerate() {
                let v = catalog.property_value(item.id(), def.key()).unwrap();
                prop_assert!(v < def.len());
                prop_assert_eq!(v, item.value(k));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sessionization
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn split_partitions_the_log(
        mut events in random_events(200),
        max_gap in 1i64..500,
    ) {
        sort_events(&mut events);
        let sessions = split_sessions(&events, max_gap).unwrap();

        // reconstruction: sessions concatenate back to each user's events
        let mut rebuilt: Vec<(String, String, i64)> = Vec::new();
        for s in &sessions {
            prop_assert!(!s.is_empty());
            prop_assert_eq!(s.items.len(), s.timestamps.len());
            for (item, &ts) in s.items.iter().zip(&s.timestamps) {
                rebuilt.push((s.user_id.clone(), item.clone(), ts));
            }
        }
        let original: Vec<(String, String, i64)> = events
            .iter()
            .map(|e| (e.user_id.clone(), e.item_id.clone(), e.timestamp))
            .collect();
        prop_assert_eq!(rebuilt, original);

        // gap bound inside each session
        for s in &sessions {
            for w in s.timestamps.windows(2) {
                prop_assert!(w[1] - w[0] <= max_gap);
                prop_assert!(w[1] >= w[0]);
            }
        }

        // purchase terminality: a purchase can only be the last event
        for s in &sessions {
            for (i, (item, &ts)) in s.items.iter().zip(&s.timestamps).enumerate() {
                let is_purchase = events.iter().any(|e| {
                    e.user_id == s.user_id
                        && &e.item_id == item
                        && e.timestamp == ts
                        && e.event_type == EventType::Purchase
                });
                if is_purchase && i + 1 < s.len() {
                    // ambiguous duplicate rows aside, a flagged purchase mid
                    // session must have a view twin at the same (item, ts)
                    let has_view_twin = events.iter().any(|e| {
                        e.user_id == s.user_id
                            && &e.item_id == item
                            && e.timestamp == ts
                            && e.event_type == EventType::View
                    });
                    prop_assert!(has_view_twin, "purchase not terminal in {s:?}");
                }
            }
        }

        // ended_by purchase iff the closing event was a purchase
        for s in &sessions {
            if s.ended_by == SessionEnd::Purchase {
                let last = (s.items.last().unwrap(), *s.timestamps.last().unwrap());
                let is_purchase = events.iter().any(|e| {
                    e.user_id == s.user_id
                        && &e.item_id == last.0
                        && e.timestamp == last.1
                        && e.event_type == EventType::Purchase
                });
                prop_assert!(is_purchase);
            }
        }
    }

    #[test]
    fn sort_is_permutation_invariant_for_unique_keys(
        perm in proptest::collection::vec((0u8..5, 0u16..2000, 0u8..50), 1..100),
    ) {
        // build events with unique (user, ts) keys
        let mut seen = std::collections::BTreeSet::new();
        let mut events = Vec::new();
        for (user, ts, item) in perm {
            if seen.insert((user, ts)) {
                events.push(Event {
                    user_id: format!("u{user}"),
                    item_id: format!("i{item}"),
                    timestamp: ts as i64,
                    event_type: EventType::View,
                });
            }
        }
        let mut sorted = events.clone();
        sort_events(&mut sorted);
        let mut shuffled = events;
        shuffled.reverse();
        sort_events(&mut shuffled);
        prop_assert_eq!(sorted, shuffled);
    }
}

// ---------------------------------------------------------------------------
// simulator
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn null_tilt_is_exactly_the_prior(
        n_items in 2usize..20,
        seed in 0u64..300,
    ) {
        let schema = SynthSchema::uniform(&[("a", 3)]);
        let (catalog, global) = synth_catalog(n_items, &schema, 1e-6, seed).unwrap();
        let tilt = tilted_item_distribution(&catalog, &global, &[]).unwrap();
        for i in 0..catalog.len() {
            prop_assert!((tilt.prob(i) - global.item_dist().prob(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn tilt_matches_brute_force(
        n_items in 4usize..30,
        seed in 0u64..300,
        w in proptest::collection::vec(0.05f64..1.0, 4),
    ) {
        let schema = SynthSchema::uniform(&[("a", 4), ("b", 2)]);
        let (catalog, global) = synth_catalog(n_items, &schema, 1e-6, seed).unwrap();
        let target = Categorical::from_weights(&w).unwrap();
        let tilt = tilted_item_distribution(&catalog, &global, &[(0, target.clone())]).unwrap();

        let weights: Vec<f64> = (0..catalog.len())
            .map(|i| {
                let v = catalog.value_of(i, 0);
                global.item_dist().prob(i) * target.prob(v) / global.value_dist(0).prob(v)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for (i, w) in weights.iter().enumerate() {
            prop_assert!((tilt.prob(i) - w / total).abs() < 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// re-ranking
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ranking_is_scale_invariant(
        n_items in 3usize..40,
        seed in 0u64..200,
        scale in prop_oneof![Just(2.0f64), Just(0.5), Just(1024.0), Just(3.0)],
    ) {
        let schema = SynthSchema::uniform(&[("a", 4)]);
        let (catalog, global) = synth_catalog(n_items, &schema, 1e-6, seed).unwrap();
        let weights = base_weights(BaseScorer::Popularity, None, &catalog, &global).unwrap();
        let base = rank_items(&catalog, weights.iter().copied().enumerate(), Some(0), 10);
        let scaled = rank_items(
            &catalog,
            weights.iter().map(|w| w * scale).enumerate(),
            Some(0),
            10,
        );
        let base_ids: Vec<&str> = base.item_ids().collect();
        let scaled_ids: Vec<&str> = scaled.item_ids().collect();
        prop_assert_eq!(base_ids, scaled_ids);
    }

    #[test]
    fn anchor_never_recommended(
        n_items in 3usize..40,
        seed in 0u64..200,
        anchor_pick in 0usize..40,
    ) {
        let schema = SynthSchema::uniform(&[("a", 4)]);
        let (catalog, global) = synth_catalog(n_items, &schema, 1e-6, seed).unwrap();
        let anchor = catalog.item(anchor_pick % n_items).id().to_string();
        let session = Session::from_items("u", vec![anchor.clone()]);
        let report = InterestReport::empty(1, 1);
        let top = recommend(
            &session,
            BaseScorer::StaticCosine,
            &report,
            n_items,
            &[0.5],
            &global,
            &catalog,
        )
        .unwrap();
        prop_assert!(top.item_ids().all(|id| id != anchor));
        prop_assert_eq!(top.len(), n_items - 1);
    }
}

#[test]
fn empty_interest_recommendations_match_base_for_all_scorers() {
    use rand::{Rng, SeedableRng};
    let schema = SynthSchema::uniform(&[("color", 6), ("brand", 4)]);
    let (catalog, global) = synth_catalog(80, &schema, 1e-6, 23).unwrap();
    let alphas = vec![0.0, 0.0];
    let table = calibrate_thresholds(
        catalog.schema(),
        &global,
        &alphas,
        0.05,
        1000,
        12,
        99,
    )
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let m = rng.random_range(1..=10);
        let items: Vec<String> = (0..m)
            .map(|_| catalog.item(rng.random_range(0..catalog.len())).id().to_string())
            .collect();
        let session = Session::from_items("u", items);
        let report = detect_interest(&session, &table, &alphas, &global, &catalog).unwrap();
        assert!(report.interests.is_empty(), "alpha 0 must never flag");
        let anchor = catalog.item_index(session.last_item().unwrap()).unwrap();
        for scorer in [
            BaseScorer::Uniform,
            BaseScorer::Popularity,
            BaseScorer::StaticCosine,
        ] {
            let enhanced =
                recommend(&session, scorer, &report, 10, &alphas, &global, &catalog).unwrap();
            let weights = base_weights(scorer, Some(anchor), &catalog, &global).unwrap();
            let base = rank_items(
                &catalog,
                weights.iter().copied().enumerate(),
                Some(anchor),
                10,
            );
            assert_eq!(enhanced, base);
        }
    }
}
