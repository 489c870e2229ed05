//! The item universe: property schema, per-item property values and the
//! global distributions G (over items) and G_k (over property values).
//!
//! Value labels map bijectively to dense indices `0..|V_k|`; all numeric
//! code works on indices and resolves labels only at the edges.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dist::Categorical;
use crate::error::Error;
use crate::session::Event;

/// One categorical property: key plus its ordered, finite value space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDef {
    key: String,
    values: Vec<String>,
    by_label: BTreeMap<String, usize>,
}

impl PropertyDef {
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    /// Number of possible values |V_k|.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    pub fn value_label(&self, index: usize) -> &str {
        &self.values[index]
    }
}

/// Ordered set of properties K. File order is authoritative for indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySchema {
    props: Vec<PropertyDef>,
    by_key: BTreeMap<String, usize>,
}

impl PropertySchema {
    pub fn new(props: Vec<(String, Vec<String>)>) -> Result<Self, Error> {
        let mut defs = Vec::with_capacity(props.len());
        let mut by_key = BTreeMap::new();
        for (pos, (key, values)) in props.into_iter().enumerate() {
            if values.is_empty() {
                return Err(Error::EmptyValueSpace { key });
            }
            if by_key.insert(key.clone(), pos).is_some() {
                return Err(Error::DuplicateProperty { key });
            }
            let mut by_label = BTreeMap::new();
            for (i, v) in values.iter().enumerate() {
                if by_label.insert(v.clone(), i).is_some() {
                    return Err(Error::DuplicateValue {
                        key,
                        value: v.clone(),
                    });
                }
            }
            defs.push(PropertyDef {
                key,
                values,
                by_label,
            });
        }
        Ok(Self {
            props: defs,
            by_key,
        })
    }

    /// Number of properties |K|.
    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn property(&self, index: usize) -> &PropertyDef {
        &self.props[index]
    }

    pub fn property_index(&self, key: &str) -> Option<usize> {
        self.by_key.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PropertyDef> {
        self.props.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.props.iter().map(|p| p.key.as_str())
    }

    /// Total one-hot feature dimension, sum over k of |V_k|.
    pub fn feature_dim(&self) -> usize {
        self.props.iter().map(|p| p.len()).sum()
    }
}

/// An item with its id and one dense value index per schema property.
/// Storing one index per property makes f(i, k) total by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    id: String,
    values: Vec<u32>,
}

impl Item {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// f(i, k) as a dense value index.
    pub fn value(&self, prop: usize) -> usize {
        self.values[prop] as usize
    }
}

/// The item universe I with its property schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    schema: PropertySchema,
    items: Vec<Item>,
    by_id: BTreeMap<String, u32>,
}

impl Catalog {
    /// Builds a catalog from `(item_id, value indices)` pairs. Items keep
    /// their given order; every item must define exactly one in-range value
    /// per schema property.
    pub fn new(schema: PropertySchema, items: Vec<(String, Vec<u32>)>) -> Result<Self, Error> {
        let mut out = Vec::with_capacity(items.len());
        let mut by_id = BTreeMap::new();
        for (pos, (id, values)) in items.into_iter().enumerate() {
            if values.len() != schema.len() {
                return Err(Error::ItemArity {
                    id,
                    expected: schema.len(),
                    got: values.len(),
                });
            }
            for (k, &v) in values.iter().enumerate() {
                let def = schema.property(k);
                if v as usize >= def.len() {
                    return Err(Error::ValueOutOfRange {
                        id,
                        key: def.key().into(),
                        index: v as usize,
                        size: def.len(),
                    });
                }
            }
            if by_id.insert(id.clone(), pos as u32).is_some() {
                return Err(Error::DuplicateItem { id });
            }
            out.push(Item { id, values });
        }
        Ok(Self {
            schema,
            items: out,
            by_id,
        })
    }

    pub fn schema(&self) -> &PropertySchema {
        &self.schema
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Number of items |I|.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, index: usize) -> &Item {
        &self.items[index]
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).map(|&i| i as usize)
    }

    /// f(i, k) by position, the hot path.
    #[inline]
    pub fn value_of(&self, item: usize, prop: usize) -> usize {
        self.items[item].values[prop] as usize
    }

    /// f(i, k) by item id and property key.
    pub fn property_value(&self, item_id: &str, key: &str) -> Result<usize, Error> {
        let item = self
            .item_index(item_id)
            .ok_or_else(|| Error::UnknownItem { id: item_id.into() })?;
        let prop = self
            .schema
            .property_index(key)
            .ok_or_else(|| Error::UnknownProperty { key: key.into() })?;
        Ok(self.value_of(item, prop))
    }

    /// Concatenated one-hot encoding of the item's property values, in
    /// schema order. This is the "static feature" vector.
    pub fn one_hot(&self, item: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.schema.feature_dim()];
        let mut offset = 0;
        for k in 0..self.schema.len() {
            v[offset + self.value_of(item, k)] = 1.0;
            offset += self.schema.property(k).len();
        }
        v
    }

    /// Cosine similarity of the one-hot feature vectors of two items.
    ///
    /// Each vector has exactly one 1 per property, so this reduces to the
    /// fraction of properties on which the items agree. Returns 0 for an
    /// empty schema (all-zero vectors).
    pub fn cosine_static(&self, a: usize, b: usize) -> f64 {
        let k = self.schema.len();
        if k == 0 {
            return 0.0;
        }
        let matches = (0..k)
            .filter(|&p| self.value_of(a, p) == self.value_of(b, p))
            .count();
        matches as f64 / k as f64
    }
}

/// The global distributions: G over items and G_k over each V_k.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    item_dist: Categorical,
    value_dists: Vec<Categorical>,
}

impl GlobalModel {
    /// G, the prior probability of each item appearing in an event.
    pub fn item_dist(&self) -> &Categorical {
        &self.item_dist
    }

    /// G_k for the property at `prop`.
    pub fn value_dist(&self, prop: usize) -> &Categorical {
        &self.value_dists[prop]
    }

    pub fn value_dists(&self) -> &[Categorical] {
        &self.value_dists
    }

    /// Uniform G over the catalog (the no-training-events case).
    pub fn uniform(catalog: &Catalog, smoothing_epsilon: f64) -> Result<Self, Error> {
        Ok(fit_global_model(catalog, &[], smoothing_epsilon)?.model)
    }
}

/// A fitted [`GlobalModel`] plus dirty-input counters.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: GlobalModel,
    /// Events referencing items absent from the catalog, skipped.
    pub skipped_events: usize,
}

/// Estimates G from event counts with add-one Laplace smoothing (uniform
/// over I when `events` is empty), then derives each G_k as the pushforward
/// of G through f(., k) mixed with the uniform distribution by weight
/// `smoothing_epsilon` so that every G_k(v) > 0 when epsilon > 0.
pub fn fit_global_model(
    catalog: &Catalog,
    events: &[Event],
    smoothing_epsilon: f64,
) -> Result<ModelFit, Error> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    if !(0.0..1.0).contains(&smoothing_epsilon) || !smoothing_epsilon.is_finite() {
        return Err(Error::InvalidEpsilon {
            value: smoothing_epsilon,
        });
    }

    let mut counts = vec![1.0f64; catalog.len()];
    let mut skipped = 0usize;
    for event in events {
        match catalog.item_index(&event.item_id) {
            Some(i) => counts[i] += 1.0,
            None => skipped += 1,
        }
    }
    let item_dist = Categorical::from_weights(&counts)?;

    let mut value_dists = Vec::with_capacity(catalog.schema().len());
    for k in 0..catalog.schema().len() {
        let mut push = vec![0.0f64; catalog.schema().property(k).len()];
        for (i, p) in item_dist.probs().iter().enumerate() {
            push[catalog.value_of(i, k)] += p;
        }
        value_dists.push(Categorical::new(push)?.mix_uniform(smoothing_epsilon));
    }

    Ok(ModelFit {
        model: GlobalModel {
            item_dist,
            value_dists,
        },
        skipped_events: skipped,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::session::EventType;
    use alloc::string::ToString;

    /// Two red items and one blue item over a single "color" property.
    pub(crate) fn two_color_catalog() -> (Catalog, GlobalModel) {
        let schema = PropertySchema::new(vec![(
            "color".to_string(),
            vec!["red".to_string(), "blue".to_string()],
        )])
        .unwrap();
        let catalog = Catalog::new(
            schema,
            vec![
                ("r1".to_string(), vec![0]),
                ("r2".to_string(), vec![0]),
                ("b1".to_string(), vec![1]),
            ],
        )
        .unwrap();
        let global = GlobalModel::uniform(&catalog, 1e-6).unwrap();
        (catalog, global)
    }

    fn view(user: &str, item: &str, ts: i64) -> Event {
        Event {
            user_id: user.into(),
            item_id: item.into(),
            timestamp: ts,
            event_type: EventType::View,
        }
    }

    #[test]
    fn minimal_catalog_counts() {
        let schema =
            PropertySchema::new(vec![("color".into(), vec!["red".into(), "blue".into()])])
                .unwrap();
        let catalog = Catalog::new(
            schema,
            vec![("a".into(), vec![0]), ("b".into(), vec![1])],
        )
        .unwrap();
        assert_eq!(catalog.len(), 2);
        assert_eq!(catalog.schema().len(), 1);
    }

    #[test]
    fn item_arity_enforced() {
        let schema =
            PropertySchema::new(vec![("color".into(), vec!["red".into(), "blue".into()])])
                .unwrap();
        let err = Catalog::new(schema, vec![("a".into(), vec![])]).unwrap_err();
        assert!(matches!(err, Error::ItemArity { expected: 1, got: 0, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let schema =
            PropertySchema::new(vec![("color".into(), vec!["red".into(), "blue".into()])])
                .unwrap();
        let err = Catalog::new(
            schema,
            vec![("a".into(), vec![0]), ("a".into(), vec![1])],
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicateItem { id: "a".into() });
    }

    #[test]
    fn uniform_prior_without_events() {
        let (catalog, _) = two_color_catalog();
        let fit = fit_global_model(&catalog, &[], 0.0).unwrap();
        for i in 0..catalog.len() {
            assert!((fit.model.item_dist().prob(i) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_of_point_support() {
        // Both items red, epsilon 0 yields G_color(red) = 1.
        let schema =
            PropertySchema::new(vec![("color".into(), vec!["red".into(), "blue".into()])])
                .unwrap();
        let catalog = Catalog::new(
            schema,
            vec![("a".into(), vec![0]), ("b".into(), vec![0])],
        )
        .unwrap();
        let fit = fit_global_model(&catalog, &[], 0.0).unwrap();
        assert_eq!(fit.model.value_dist(0).prob(0), 1.0);
        assert_eq!(fit.model.value_dist(0).prob(1), 0.0);
    }

    #[test]
    fn laplace_event_counts() {
        // events = [a, a, b] over items {a, b}: G = (3/5, 2/5).
        let schema =
            PropertySchema::new(vec![("color".into(), vec!["red".into(), "blue".into()])])
                .unwrap();
        let catalog = Catalog::new(
            schema,
            vec![("a".into(), vec![0]), ("b".into(), vec![1])],
        )
        .unwrap();
        let events = vec![view("u", "a", 0), view("u", "a", 1), view("u", "b", 2)];
        let fit = fit_global_model(&catalog, &events, 0.0).unwrap();
        assert!((fit.model.item_dist().prob(0) - 0.6).abs() < 1e-12);
        assert!((fit.model.item_dist().prob(1) - 0.4).abs() < 1e-12);
        assert_eq!(fit.skipped_events, 0);
    }

    #[test]
    fn unknown_event_items_are_skipped_and_counted() {
        let (catalog, _) = two_color_catalog();
        let events = vec![view("u", "r1", 0), view("u", "ghost", 1)];
        let fit = fit_global_model(&catalog, &events, 1e-6).unwrap();
        assert_eq!(fit.skipped_events, 1);
    }

    #[test]
    fn epsilon_range_enforced() {
        let (catalog, _) = two_color_catalog();
        assert!(matches!(
            fit_global_model(&catalog, &[], 1.0),
            Err(Error::InvalidEpsilon { .. })
        ));
        assert!(matches!(
            fit_global_model(&catalog, &[], -0.1),
            Err(Error::InvalidEpsilon { .. })
        ));
    }

    #[test]
    fn empty_catalog_rejected() {
        let schema =
            PropertySchema::new(vec![("color".into(), vec!["red".into(), "blue".into()])])
                .unwrap();
        let catalog = Catalog::new(schema, vec![]).unwrap();
        assert_eq!(
            fit_global_model(&catalog, &[], 0.0).unwrap_err(),
            Error::EmptyCatalog
        );
    }

    #[test]
    fn property_value_lookup() {
        let (catalog, _) = two_color_catalog();
        assert_eq!(catalog.property_value("r1", "color").unwrap(), 0);
        assert_eq!(catalog.property_value("b1", "color").unwrap(), 1);
        assert!(matches!(
            catalog.property_value("nope", "color"),
            Err(Error::UnknownItem { .. })
        ));
        assert!(matches!(
            catalog.property_value("r1", "size"),
            Err(Error::UnknownProperty { .. })
        ));
    }

    #[test]
    fn one_hot_layout() {
        let schema = PropertySchema::new(vec![
            ("color".into(), vec!["red".into(), "blue".into()]),
            ("size".into(), vec!["s".into(), "m".into(), "l".into()]),
        ])
        .unwrap();
        let catalog = Catalog::new(schema, vec![("a".into(), vec![1, 2])]).unwrap();
        assert_eq!(catalog.one_hot(0), vec![0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cosine_is_zero_for_empty_schema() {
        let schema = PropertySchema::new(vec![]).unwrap();
        let catalog = Catalog::new(
            schema,
            vec![("a".into(), vec![]), ("b".into(), vec![])],
        )
        .unwrap();
        // all-zero feature vectors
        assert_eq!(catalog.cosine_static(0, 1), 0.0);
    }

    #[test]
    fn cosine_matches_dot_product_oracle() {
        let schema = PropertySchema::new(vec![
            ("color".into(), vec!["red".into(), "blue".into()]),
            ("size".into(), vec!["s".into(), "m".into()]),
        ])
        .unwrap();
        // agree on color, disagree on size
        let catalog = Catalog::new(
            schema,
            vec![("a".into(), vec![0, 0]), ("b".into(), vec![0, 1])],
        )
        .unwrap();
        let (va, vb) = (catalog.one_hot(0), catalog.one_hot(1));
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        let oracle = dot / (na * nb);
        assert!((catalog.cosine_static(0, 1) - oracle).abs() < 1e-15);
        assert!((catalog.cosine_static(0, 1) - 0.5).abs() < 1e-15);
    }
}
