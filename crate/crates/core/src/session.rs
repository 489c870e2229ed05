//! Event logs and their split into sessions.
//!
//! A session is one user's event run, cut when the gap between adjacent
//! events exceeds `max_gap` or when a purchase finalizes it.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventType {
    View,
    Purchase,
}

impl EventType {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventType::View => "view",
            EventType::Purchase => "purchase",
        }
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "view" => Ok(EventType::View),
            "purchase" => Ok(EventType::Purchase),
            other => Err(Error::UnknownEventType {
                value: other.into(),
            }),
        }
    }
}

/// One row of an implicit-feedback log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub user_id: String,
    pub item_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub event_type: EventType,
}

/// Why a session was closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    /// The next event of the same user arrived after more than `max_gap`.
    Gap,
    /// The last event was a purchase.
    Purchase,
    /// The user's event stream ended.
    EndOfLog,
}

impl SessionEnd {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionEnd::Gap => "gap",
            SessionEnd::Purchase => "purchase",
            SessionEnd::EndOfLog => "end-of-log",
        }
    }
}

/// An ordered item-event run for one user pursuing one goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub user_id: String,
    pub items: Vec<String>,
    pub timestamps: Vec<i64>,
    pub ended_by: SessionEnd,
}

impl Session {
    /// Builds a session from bare item ids, timestamps spaced 10 s apart.
    pub fn from_items(user_id: &str, items: Vec<String>) -> Self {
        let timestamps = (0..items.len() as i64).map(|i| i * 10).collect();
        Self {
            user_id: user_id.into(),
            items,
            timestamps,
            ended_by: SessionEnd::EndOfLog,
        }
    }

    /// Session length m.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The anchor item for re-ranking.
    pub fn last_item(&self) -> Option<&str> {
        self.items.last().map(|s| s.as_str())
    }
}

/// Stable sort by `(user_id, timestamp)`; ties keep input order.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
}

fn is_sorted(events: &[Event]) -> bool {
    events.windows(2).all(|w| {
        (&w[0].user_id, w[0].timestamp) <= (&w[1].user_id, w[1].timestamp)
    })
}

struct Builder {
    user_id: String,
    items: Vec<String>,
    timestamps: Vec<i64>,
    last_was_purchase: bool,
}

impl Builder {
    fn start(event: &Event) -> Self {
        Self {
            user_id: event.user_id.clone(),
            items: alloc::vec![event.item_id.clone()],
            timestamps: alloc::vec![event.timestamp],
            last_was_purchase: event.event_type == EventType::Purchase,
        }
    }

    fn push(&mut self, event: &Event) {
        self.items.push(event.item_id.clone());
        self.timestamps.push(event.timestamp);
        self.last_was_purchase = event.event_type == EventType::Purchase;
    }

    fn finish(self, cause: SessionEnd) -> Session {
        // A purchase always finalizes, whatever else triggered the cut.
        let ended_by = if self.last_was_purchase {
            SessionEnd::Purchase
        } else {
            cause
        };
        Session {
            user_id: self.user_id,
            items: self.items,
            timestamps: self.timestamps,
            ended_by,
        }
    }
}

/// Splits a `(user_id, timestamp)`-sorted event list into sessions.
///
/// Per user, a new session starts when the gap to the previous event
/// exceeds `max_gap` seconds or when the previous event was a purchase;
/// the purchase stays in the session it ends.
pub fn split_sessions(events: &[Event], max_gap: i64) -> Result<Vec<Session>, Error> {
    if max_gap <= 0 {
        return Err(Error::InvalidMaxGap { value: max_gap });
    }
    if !is_sorted(events) {
        return Err(Error::UnsortedEvents);
    }

    let mut sessions = Vec::new();
    let mut current: Option<Builder> = None;
    for event in events {
        if let Some(cur) = current.take() {
            if cur.user_id != event.user_id {
                sessions.push(cur.finish(SessionEnd::EndOfLog));
            } else if cur.last_was_purchase {
                sessions.push(cur.finish(SessionEnd::Purchase));
            } else if event.timestamp - *cur.timestamps.last().unwrap() > max_gap {
                sessions.push(cur.finish(SessionEnd::Gap));
            } else {
                let mut cur = cur;
                cur.push(event);
                current = Some(cur);
                continue;
            }
        }
        current = Some(Builder::start(event));
    }
    if let Some(cur) = current {
        sessions.push(cur.finish(SessionEnd::EndOfLog));
    }
    Ok(sessions)
}
