use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonControversial,
    Controversial,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::NonControversial => 0,
            Label::Controversial => 1,
        }
    }

    pub fn from_index(i: u64) -> Option<Label> {
        match i {
            0 => Some(Label::NonControversial),
            1 => Some(Label::Controversial),
            _ => None,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index() as u8)
    }
}

impl<'de> serde::Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        Label::from_index(v).ok_or_else(|| serde::de::Error::custom("label must be 0 or 1"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Comment {
    pub comment_id: String,
    pub parent_id: String,
    pub author: String,
    pub created_utc: i64,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub post_id: String,
    pub subreddit: String,
    pub author: String,
    pub created_utc: i64,
    pub title: String,
    pub selftext: String,
    pub label: Label,
    pub comments: Vec<Comment>,
}

// Field order is part of the JSONL format, so serialize by hand.
impl Serialize for Thread {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Thread", 8)?;
        st.serialize_field("post_id", &self.post_id)?;
        st.serialize_field("subreddit", &self.subreddit)?;
        st.serialize_field("author", &self.author)?;
        st.serialize_field("created_utc", &self.created_utc)?;
        st.serialize_field("title", &self.title)?;
        st.serialize_field("selftext", &self.selftext)?;
        st.serialize_field("label", &self.label)?;
        st.serialize_field("comments", &self.comments)?;
        st.end()
    }
}

impl Thread {
    /// Checks id uniqueness and that every parent chain ends at the post.
    pub fn validate(&self) -> Result<()> {
        let mut index: HashMap<&str, usize> = HashMap::with_capacity(self.comments.len());
        for (k, c) in self.comments.iter().enumerate() {
            if c.comment_id == self.post_id || index.insert(&c.comment_id, k).is_some() {
                return Err(Error::Structural(format!(
                    "thread {}: duplicate id `{}`",
                    self.post_id, c.comment_id
                )));
            }
        }
        for c in &self.comments {
            if c.parent_id != self.post_id && !index.contains_key(c.parent_id.as_str()) {
                return Err(Error::Structural(format!(
                    "thread {}: comment `{}` has dangling parent `{}`",
                    self.post_id, c.comment_id, c.parent_id
                )));
            }
        }
        // Cycle check: every chain must reach the post within `len` hops.
        let mut rooted = vec![false; self.comments.len()];
        for start in 0..self.comments.len() {
            let mut seen = HashSet::new();
            let mut cur = start;
            loop {
                if rooted[cur] {
                    break;
                }
                if !seen.insert(cur) {
                    return Err(Error::Structural(format!(
                        "thread {}: reply cycle through comment `{}`",
                        self.post_id, self.comments[cur].comment_id
                    )));
                }
                let parent = &self.comments[cur].parent_id;
                if *parent == self.post_id {
                    break;
                }
                cur = index[parent.as_str()];
            }
            for k in seen {
                rooted[k] = true;
            }
        }
        Ok(())
    }

    pub fn comment_count(&self) -> usize {
        self.comments.len()
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str, line: usize) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::Parse {
        line,
        field: format!("{path}{name}"),
        message: "missing".into(),
    })
}

fn string_field(obj: &Map<String, Value>, name: &str, path: &str, line: usize) -> Result<String> {
    match field(obj, name, path, line)? {
        Value::String(s) => Ok(s.clone()),
        other => Err(Error::Parse {
            line,
            field: format!("{path}{name}"),
            message: format!("expected string, found {}", kind(other)),
        }),
    }
}

fn int_field(obj: &Map<String, Value>, name: &str, path: &str, line: usize) -> Result<i64> {
    let v = field(obj, name, path, line)?;
    v.as_i64().ok_or_else(|| Error::Parse {
        line,
        field: format!("{path}{name}"),
        message: format!("expected integer, found {}", kind(v)),
    })
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Parses one JSONL record. `line` is 1-based and only used for diagnostics.
pub fn parse_thread_line(text: &str, line: usize) -> Result<Thread> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(Error::Parse {
            line,
            field: "<record>".into(),
            message: format!("expected object, found {}", kind(&value)),
        });
    };

    let label_raw = field(&obj, "label", "", line)?;
    let label = label_raw
        .as_u64()
        .and_then(Label::from_index)
        .ok_or_else(|| Error::Parse {
            line,
            field: "label".into(),
            message: "expected 0 or 1".into(),
        })?;

    let comments_raw = match field(&obj, "comments", "", line)? {
        Value::Array(items) => items,
        other => {
            return Err(Error::Parse {
                line,
                field: "comments".into(),
                message: format!("expected array, found {}", kind(other)),
            })
        }
    };
    let mut comments = Vec::with_capacity(comments_raw.len());
    for (k, raw) in comments_raw.iter().enumerate() {
        let path = format!("comments[{k}].");
        let Value::Object(c) = raw else {
            return Err(Error::Parse {
                line,
                field: format!("comments[{k}]"),
                message: format!("expected object, found {}", kind(raw)),
            });
        };
        comments.push(Comment {
            comment_id: string_field(c, "comment_id", &path, line)?,
            parent_id: string_field(c, "parent_id", &path, line)?,
            author: string_field(c, "author", &path, line)?,
            created_utc: int_field(c, "created_utc", &path, line)?,
            body: string_field(c, "body", &path, line)?,
        });
    }

    let thread = Thread {
        post_id: string_field(&obj, "post_id", "", line)?,
        subreddit: string_field(&obj, "subreddit", "", line)?,
        author: string_field(&obj, "author", "", line)?,
        created_utc: int_field(&obj, "created_utc", "", line)?,
        title: string_field(&obj, "title", "", line)?,
        selftext: string_field(&obj, "selftext", "", line)?,
        label,
        comments,
    };
    thread.validate()?;
    Ok(thread)
}

/// Parses a thread JSONL stream. Blank lines are skipped.
pub fn parse_threads<R: BufRead>(reader: R) -> Result<Vec<Thread>> {
    let mut threads = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        threads.push(parse_thread_line(&line, k + 1)?);
    }
    Ok(threads)
}

pub fn write_threads<W: Write>(mut writer: W, threads: &[Thread]) -> Result<()> {
    for t in threads {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
