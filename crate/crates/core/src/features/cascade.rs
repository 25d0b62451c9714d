use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One infection: `user` retweeted from `parent` at time `t` (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(rename = "u")]
    pub user: String,
    #[serde(rename = "p")]
    pub parent: Option<String>,
    pub t: f64,
}

impl Event {
    pub fn new(user: impl Into<String>, parent: Option<&str>, t: f64) -> Self {
        Self {
            user: user.into(),
            parent: parent.map(str::to_string),
            t,
        }
    }
}

/// A retweet tree in infection order. The first event is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub id: String,
    pub events: Vec<Event>,
}

impl Cascade {
    pub fn new(id: impl Into<String>, events: Vec<Event>) -> Self {
        Self { id: id.into(), events }
    }

    pub fn size(&self) -> usize {
        self.events.len()
    }

    pub fn root(&self) -> Option<&Event> {
        self.events.first()
    }

    pub fn start_time(&self) -> f64 {
        self.events.first().map_or(0.0, |e| e.t)
    }

    pub fn last_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t)
    }

    /// Checks the tree invariants and returns each event's parent position.
    pub fn parent_positions(&self) -> Result<Vec<Option<usize>>> {
        let fail = |msg: String| Err(Error::Input(format!("cascade {}: {msg}", self.id)));
        if self.events.is_empty() {
            return fail("no events".into());
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(self.events.len());
        let mut parents = Vec::with_capacity(self.events.len());
        let mut last_t = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if !e.t.is_finite() {
                return fail(format!("event {i} has non-finite time"));
            }
            if e.t < last_t {
                return fail(format!("event {i} ({}) is out of time order", e.user));
            }
            last_t = e.t;
            match (&e.parent, i) {
                (None, 0) => parents.push(None),
                (None, _) => return fail(format!("event {i} ({}) has no parent but is not the root", e.user)),
                (Some(_), 0) => return fail("root event has a parent".into()),
                (Some(p), _) => match seen.get(p.as_str()) {
                    Some(&j) => parents.push(Some(j)),
                    None => return fail(format!("event {i} ({}) references unknown parent {p}", e.user)),
                },
            }
            if seen.insert(e.user.as_str(), i).is_some() {
                return fail(format!("user {} appears twice", e.user));
            }
        }
        Ok(parents)
    }

    pub fn validate(&self) -> Result<()> {
        self.parent_positions().map(|_| ())
    }

    /// The first `count` events.
    pub fn prefix(&self, count: usize) -> Cascade {
        Cascade {
            id: self.id.clone(),
            events: self.events[..count.min(self.events.len())].to_vec(),
        }
    }

    /// Events with `t <= t_limit`.
    pub fn observed_until(&self, t_limit: f64) -> Cascade {
        let n = self.events.partition_point(|e| e.t <= t_limit);
        self.prefix(n)
    }

    /// Number of events with `t <= t`.
    pub fn size_at(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.t <= t)
    }
}

/// Keeps cascades with at least `min_size` events.
pub fn filter_cascades(cascades: &[Cascade], min_size: usize) -> Vec<Cascade> {
    cascades.iter().filter(|c| c.size() >= min_size).cloned().collect()
}
