//! File formats: catalog JSON, events CSV, threshold-table JSON, the
//! detect JSON-lines stream and the evaluation report CSV.
//!
//! Catalog JSON: `{"properties": {"<key>": ["<v1>", ...], ...},
//! "items": [{"id": "...", "props": {"<key>": "<label>", ...}}, ...]}`.
//! Property and value order in the file is authoritative for index
//! assignment, so parsing goes through an order-preserving map reader
//! rather than a sorted one.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use klboost_core::catalog::{Catalog, PropertySchema};
use klboost_core::detect::{InterestReport, ThresholdTable};
use klboost_core::eval::EvalSummary;
use klboost_core::session::{sort_events, Event, EventType};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: header must be exactly `user_id,item_id,timestamp,event_type`")]
    BadHeader { path: String },
    #[error("{path}: item {id:?} (entry {entry}): {detail}")]
    BadItem {
        path: String,
        id: String,
        entry: usize,
        detail: String,
    },
    #[error("{path}: {detail}")]
    BadDocument { path: String, detail: String },
    #[error("{path}: {source}")]
    Core {
        path: String,
        source: klboost_core::Error,
    },
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// order-preserving JSON maps
// ---------------------------------------------------------------------------

/// JSON object deserialized as a vector of pairs in document order.
/// Duplicate keys survive parsing and are rejected by later validation
/// instead of being silently collapsed.
struct OrderedMap<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for OrderedMap<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for MapVisitor<V> {
            type Value = OrderedMap<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((key, value)) = access.next_entry::<String, V>()? {
                    entries.push((key, value));
                }
                Ok(OrderedMap(entries))
            }
        }

        deserializer.deserialize_map(MapVisitor(PhantomData))
    }
}

// ---------------------------------------------------------------------------
// catalog JSON
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    properties: OrderedMap<Vec<String>>,
    items: Vec<ItemDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemDoc {
    id: String,
    props: OrderedMap<String>,
}

pub fn load_catalog(path: &Path) -> Result<Catalog, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Read {
        path: path_str(path),
        source,
    })?;
    let doc: CatalogDoc = serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path_str(path),
        source,
    })?;

    let schema = PropertySchema::new(doc.properties.0).map_err(|source| FormatError::Core {
        path: path_str(path),
        source,
    })?;

    let mut items = Vec::with_capacity(doc.items.len());
    for (entry, item) in doc.items.into_iter().enumerate() {
        let bad = |detail: String| FormatError::BadItem {
            path: path_str(path),
            id: item.id.clone(),
            entry,
            detail,
        };
        let mut given: BTreeMap<String, String> = BTreeMap::new();
        for (key, label) in item.props.0 {
            if given.insert(key.clone(), label).is_some() {
                return Err(bad(format!("duplicate property {key:?}")));
            }
        }
        let mut values = Vec::with_capacity(schema.len());
        for def in schema.iter() {
            let label = given
                .remove(def.key())
                .ok_or_else(|| bad(format!("missing property {:?}", def.key())))?;
            let v = def.value_index(&label).ok_or_else(|| {
                bad(format!(
                    "unknown value {label:?} for property {:?}",
                    def.key()
                ))
            })?;
            values.push(v as u32);
        }
        if let Some((key, _)) = given.into_iter().next() {
            return Err(bad(format!("unknown property {key:?}")));
        }
        items.push((item.id, values));
    }

    Catalog::new(schema, items).map_err(|source| FormatError::Core {
        path: path_str(path),
        source,
    })
}

struct CatalogOut<'a>(&'a Catalog);

impl Serialize for CatalogOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut doc = serializer.serialize_struct("Catalog", 2)?;
        doc.serialize_field("properties", &PropertiesOut(self.0.schema()))?;
        doc.serialize_field("items", &ItemsOut(self.0))?;
        doc.end()
    }
}

struct PropertiesOut<'a>(&'a PropertySchema);

impl Serialize for PropertiesOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for def in self.0.iter() {
            map.serialize_entry(def.key(), def.values())?;
        }
        map.end()
    }
}

struct ItemsOut<'a>(&'a Catalog);

impl Serialize for ItemsOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for i in 0..self.0.len() {
            seq.serialize_element(&ItemOut(self.0, i))?;
        }
        seq.end()
    }
}

struct ItemOut<'a>(&'a Catalog, usize);

impl Serialize for ItemOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut item = serializer.serialize_struct("Item", 2)?;
        item.serialize_field("id", self.0.item(self.1).id())?;
        item.serialize_field("props", &ItemPropsOut(self.0, self.1))?;
        item.end()
    }
}

struct ItemPropsOut<'a>(&'a Catalog, usize);

impl Serialize for ItemPropsOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let schema = self.0.schema();
        let mut map = serializer.serialize_map(Some(schema.len()))?;
        for (k, def) in schema.iter().enumerate() {
            map.serialize_entry(def.key(), def.value_label(self.0.value_of(self.1, k)))?;
        }
        map.end()
    }
}

pub fn save_catalog(catalog: &Catalog, path: &Path) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(|source| FormatError::Write {
        path: path_str(path),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &CatalogOut(catalog)).map_err(|source| {
        FormatError::Json {
            path: path_str(path),
            source,
        }
    })?;
    w.write_all(b"\n").map_err(|source| FormatError::Write {
        path: path_str(path),
        source,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// events CSV
// ---------------------------------------------------------------------------

const EVENT_HEADER: [&str; 4] = ["user_id", "item_id", "timestamp", "event_type"];

/// Parses an events CSV, skipping unparsable rows with a count, and returns
/// the events sorted by `(user_id, timestamp, input order)`.
pub fn load_events(path: &Path) -> Result<(Vec<Event>, usize), FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|source| FormatError::Csv {
            path: path_str(path),
            source,
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|source| FormatError::Csv {
            path: path_str(path),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != EVENT_HEADER {
        return Err(FormatError::BadHeader {
            path: path_str(path),
        });
    }

    let mut events = Vec::new();
    let mut skipped = 0usize;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if record.len() != 4 {
            skipped += 1;
            continue;
        }
        let timestamp: i64 = match record[2].trim().parse() {
            Ok(t) if t >= 0 => t,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let event_type: EventType = match record[3].trim().parse() {
            Ok(t) => t,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        events.push(Event {
            user_id: record[0].to_string(),
            item_id: record[1].to_string(),
            timestamp,
            event_type,
        });
    }
    sort_events(&mut events);
    Ok((events, skipped))
}

pub fn save_events(events: &[Event], path: &Path) -> Result<(), FormatError> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| FormatError::Csv {
        path: path_str(path),
        source,
    })?;
    let wrap = |source: csv::Error| FormatError::Csv {
        path: path_str(path),
        source,
    };
    writer.write_record(EVENT_HEADER).map_err(wrap)?;
    for e in events {
        writer
            .write_record([
                e.user_id.as_str(),
                e.item_id.as_str(),
                &e.timestamp.to_string(),
                e.event_type.as_str(),
            ])
            .map_err(wrap)?;
    }
    writer.flush().map_err(|source| FormatError::Write {
        path: path_str(path),
        source,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// threshold table JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdDoc {
    significance: f64,
    n_samples: usize,
    seed: u64,
    #[serde(rename = "M_max")]
    m_max: usize,
    alpha: BTreeMap<String, f64>,
    thresholds: BTreeMap<String, Vec<f64>>,
}

pub fn save_thresholds(table: &ThresholdTable, path: &Path) -> Result<(), FormatError> {
    let doc = ThresholdDoc {
        significance: table.significance(),
        n_samples: table.n_samples(),
        seed: table.seed(),
        m_max: table.m_max(),
        alpha: table
            .keys()
            .iter()
            .zip(table.alpha())
            .map(|(k, &a)| (k.clone(), a))
            .collect(),
        thresholds: table
            .keys()
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), table.thresholds_for(i).to_vec()))
            .collect(),
    };
    let file = fs::File::create(path).map_err(|source| FormatError::Write {
        path: path_str(path),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|source| FormatError::Json {
        path: path_str(path),
        source,
    })?;
    w.write_all(b"\n").map_err(|source| FormatError::Write {
        path: path_str(path),
        source,
    })?;
    Ok(())
}

/// Loads a threshold table and aligns it with the catalog schema. Every
/// schema property must be present and no extra property may appear.
pub fn load_thresholds(path: &Path, schema: &PropertySchema) -> Result<ThresholdTable, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Read {
        path: path_str(path),
        source,
    })?;
    let doc: ThresholdDoc = serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path_str(path),
        source,
    })?;

    let bad = |detail: String| FormatError::BadDocument {
        path: path_str(path),
        detail,
    };
    let mut keys = Vec::with_capacity(schema.len());
    let mut alpha = Vec::with_capacity(schema.len());
    let mut thresholds = Vec::with_capacity(schema.len());
    for def in schema.iter() {
        let a = doc
            .alpha
            .get(def.key())
            .ok_or_else(|| bad(format!("missing alpha for property {:?}", def.key())))?;
        let row = doc
            .thresholds
            .get(def.key())
            .ok_or_else(|| bad(format!("missing thresholds for property {:?}", def.key())))?;
        keys.push(def.key().to_string());
        alpha.push(*a);
        thresholds.push(row.clone());
    }
    for key in doc.alpha.keys().chain(doc.thresholds.keys()) {
        if schema.property_index(key).is_none() {
            return Err(bad(format!("property {key:?} is not in the catalog")));
        }
    }

    ThresholdTable::from_parts(
        keys,
        alpha,
        thresholds,
        doc.significance,
        doc.n_samples,
        doc.m_max,
        doc.seed,
    )
    .map_err(|source| FormatError::Core {
        path: path_str(path),
        source,
    })
}

// ---------------------------------------------------------------------------
// detect output (JSON lines)
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ReportLine<'a> {
    user_id: &'a str,
    session_length: usize,
    interests: Vec<&'a str>,
    divergences: BTreeMap<&'a str, f64>,
    thresholds: BTreeMap<&'a str, f64>,
}

/// One line of JSON per report, in input order.
pub fn write_report_lines<W: Write>(
    out: &mut W,
    reports: &[(String, InterestReport)],
    schema: &PropertySchema,
) -> std::io::Result<()> {
    for (user_id, report) in reports {
        let line = ReportLine {
            user_id,
            session_length: report.session_length,
            interests: report
                .interests
                .iter()
                .map(|&k| schema.property(k).key())
                .collect(),
            divergences: schema
                .iter()
                .enumerate()
                .map(|(k, def)| (def.key(), report.divergences[k]))
                .collect(),
            thresholds: schema
                .iter()
                .enumerate()
                .map(|(k, def)| (def.key(), report.thresholds_applied[k]))
                .collect(),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluation report CSV
// ---------------------------------------------------------------------------

pub fn save_report(summaries: &[EvalSummary], path: &Path) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(|source| FormatError::Write {
        path: path_str(path),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let wrap = |source: std::io::Error| FormatError::Write {
        path: path_str(path),
        source,
    };
    writeln!(w, "algorithm,N,sessions,mean_dcg,mean_hit").map_err(wrap)?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6}",
            s.algorithm, s.n, s.sessions, s.mean_dcg, s.mean_hit
        )
        .map_err(wrap)?;
    }
    w.flush().map_err(wrap)?;
    Ok(())
}
