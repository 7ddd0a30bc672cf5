use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Result, TopicError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLabel {
    pub topic: usize,
    pub label: String,
    pub author: String,
    pub timestamp: DateTime<Utc>,
}

/// Active label per topic plus the full labelling history (oldest first).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLabels {
    pub active: BTreeMap<usize, TopicLabel>,
    pub history: Vec<TopicLabel>,
}

impl TopicLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn label_topic(&mut self, n_topics: usize, topic: usize, label: &str, author: &str) -> Result<TopicLabel> {
        self.label_topic_at(n_topics, topic, label, author, Utc::now())
    }

    /// Sets the active label of `topic`; the previous one stays in the history.
    pub fn label_topic_at(
        &mut self,
        n_topics: usize,
        topic: usize,
        label: &str,
        author: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<TopicLabel> {
        if topic >= n_topics {
            return Err(TopicError::TopicOutOfRange { topic, topics: n_topics });
        }
        if label.trim().is_empty() {
            return Err(TopicError::EmptyLabel);
        }
        let entry = TopicLabel { topic, label: label.to_string(), author: author.to_string(), timestamp };
        self.history.push(entry.clone());
        self.active.insert(topic, entry.clone());
        Ok(entry)
    }

    pub fn get(&self, topic: usize) -> Option<&str> {
        self.active.get(&topic).map(|l| l.label.as_str())
    }

    pub fn history_of(&self, topic: usize) -> impl Iterator<Item = &TopicLabel> {
        self.history.iter().filter(move |l| l.topic == topic)
    }
}
