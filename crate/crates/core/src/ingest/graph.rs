use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::{Label, Thread};

/// Literal Reddit uses for removed authors and bodies.
pub const DELETED: &str = "[deleted]";

/// Undirected interaction edge between `users[i]` and `users[j]`, `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Number of reply interactions between the pair.
    pub w: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserGraph {
    pub post_id: String,
    pub label: Label,
    pub users: Vec<String>,
    pub edges: Vec<Edge>,
    pub features: Option<FeatureMatrix>,
}

/// How edge multiplicities enter the adjacency matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    #[default]
    Binary,
    Weighted,
}

impl UserGraph {
    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    /// Number of distinct neighbours per node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.users.len()];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.w as u64).sum()
    }

    /// Dense symmetric adjacency with zero diagonal.
    pub fn adjacency(&self, mode: AdjacencyMode) -> Tensor {
        let n = self.users.len();
        let mut a = Tensor::zeros(n, n);
        for e in &self.edges {
            let v = match mode {
                AdjacencyMode::Binary => 1.0,
                AdjacencyMode::Weighted => e.w as f64,
            };
            a.set(e.i, e.j, v);
            a.set(e.j, e.i, v);
        }
        a
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.users.len();
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.i >= e.j || e.j >= n || e.w == 0 {
                return Err(Error::Structural(format!(
                    "graph {}: invalid edge ({}, {}, {})",
                    self.post_id, e.i, e.j, e.w
                )));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::Structural(format!(
                    "graph {}: duplicate edge ({}, {})",
                    self.post_id, e.i, e.j
                )));
            }
        }
        if let Some(f) = &self.features {
            if f.rows() != n {
                return Err(Error::Structural(format!(
                    "graph {}: {} feature rows for {} users",
                    self.post_id,
                    f.rows(),
                    n
                )));
            }
        }
        Ok(())
    }

    /// Graph with node `perm[k]` of `self` moved to position `k`.
    pub fn permuted(&self, perm: &[usize]) -> UserGraph {
        let n = self.users.len();
        assert_eq!(perm.len(), n);
        let mut inverse = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (inverse[e.i], inverse[e.j]);
                Edge {
                    i: a.min(b),
                    j: a.max(b),
                    w: e.w,
                }
            })
            .collect();
        edges.sort();
        UserGraph {
            post_id: self.post_id.clone(),
            label: self.label,
            users: perm.iter().map(|&p| self.users[p].clone()).collect(),
            edges,
            features: self.features.as_ref().map(|f| f.permute_rows(perm)),
        }
    }
}

/// Node keys of the post author and of each comment's author.
///
/// Deleted authors become distinct synthetic users so that unrelated people are
/// never merged into one node.
pub fn author_keys(thread: &Thread) -> (String, Vec<String>) {
    let post_key = if thread.author == DELETED {
        "deleted#post".to_string()
    } else {
        thread.author.clone()
    };
    let comment_keys = thread
        .comments
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if c.author == DELETED || c.body == DELETED {
                format!("deleted#{k}")
            } else {
                c.author.clone()
            }
        })
        .collect();
    (post_key, comment_keys)
}

/// One node per distinct author, one weighted edge per interacting pair.
///
/// A reply to the post links the replier to the post author; a reply to a
/// comment links the replier to that comment's author. Self-replies add nothing.
pub fn build_user_graph(thread: &Thread) -> UserGraph {
    let (post_key, comment_keys) = author_keys(thread);

    let mut users: Vec<String> = Vec::new();
    let mut node_of: HashMap<String, usize> = HashMap::new();
    let mut intern = |key: &str, users: &mut Vec<String>| -> usize {
        if let Some(&k) = node_of.get(key) {
            return k;
        }
        users.push(key.to_string());
        node_of.insert(key.to_string(), users.len() - 1);
        users.len() - 1
    };

    let post_node = intern(&post_key, &mut users);
    let comment_nodes: Vec<usize> = comment_keys.iter().map(|k| intern(k, &mut users)).collect();
    let node_by_comment: HashMap<&str, usize> = thread
        .comments
        .iter()
        .zip(&comment_nodes)
        .map(|(c, &n)| (c.comment_id.as_str(), n))
        .collect();

    let mut weights: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for (c, &replier) in thread.comments.iter().zip(&comment_nodes) {
        let target = if c.parent_id == thread.post_id {
            post_node
        } else {
            match node_by_comment.get(c.parent_id.as_str()) {
                Some(&n) => n,
                None => continue,
            }
        };
        if target == replier {
            continue;
        }
        *weights.entry((target.min(replier), target.max(replier))).or_insert(0) += 1;
    }

    UserGraph {
        post_id: thread.post_id.clone(),
        label: thread.label,
        users,
        edges: weights.into_iter().map(|((i, j), w)| Edge { i, j, w }).collect(),
        features: None,
    }
}

/// Message ids authored by each user: comment ids, plus the post id for the
/// post author when `include_post` is set.
pub fn message_index(thread: &Thread, include_post: bool) -> HashMap<String, Vec<String>> {
    let (post_key, comment_keys) = author_keys(thread);
    let mut index: HashMap<String, Vec<String>> = HashMap::new();
    index.entry(post_key.clone()).or_default();
    if include_post {
        index.entry(post_key).or_default().push(thread.post_id.clone());
    }
    for (c, key) in thread.comments.iter().zip(comment_keys) {
        index.entry(key).or_default().push(c.comment_id.clone());
    }
    index
}

/// On-disk form: `{"post_id", "label", "n", "users", "edges": [[i,j,w]], "features_ref"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserGraphRecord {
    pub post_id: String,
    pub label: Label,
    pub n: usize,
    pub users: Vec<String>,
    pub edges: Vec<(usize, usize, u32)>,
    pub features_ref: Option<String>,
}

impl UserGraphRecord {
    pub fn from_graph(g: &UserGraph, features_ref: Option<String>) -> Self {
        UserGraphRecord {
            post_id: g.post_id.clone(),
            label: g.label,
            n: g.users.len(),
            users: g.users.clone(),
            edges: g.edges.iter().map(|e| (e.i, e.j, e.w)).collect(),
            features_ref,
        }
    }

    /// Graph without features; `features_ref` is left for the caller to resolve.
    pub fn into_graph(self) -> Result<UserGraph> {
        if self.n != self.users.len() {
            return Err(Error::Structural(format!(
                "graph {}: n = {} but {} users listed",
                self.post_id,
                self.n,
                self.users.len()
            )));
        }
        let g = UserGraph {
            post_id: self.post_id,
            label: self.label,
            users: self.users,
            edges: self
                .edges
                .into_iter()
                .map(|(i, j, w)| Edge { i, j, w })
                .collect(),
            features: None,
        };
        g.validate()?;
        Ok(g)
    }
}
