//! Seeded generator of labelled synthetic threads.
//!
//! Polarized threads split their authors into two communities that argue in two
//! top-level chains; the rare cross-community replies arrive late. Consensus
//! threads are stars around the post author with shallow reply chains.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Comment, Label, Thread};

pub const MIN_SYNTH_USERS: usize = 4;
pub const MIN_SYNTH_COMMENTS: usize = 30;

const BASE_UTC: i64 = 1_262_304_000;
const WORDS: &[&str] = &[
    "i", "think", "this", "is", "wrong", "right", "totally", "agree", "disagree", "because",
    "people", "never", "always", "really", "the", "point", "source", "evidence", "thanks",
    "great", "post", "nonsense", "exactly", "maybe", "not", "sure", "honestly", "lol",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Polarized,
    Consensus,
}

impl SynthKind {
    pub fn label(self) -> Label {
        match self {
            SynthKind::Polarized => Label::Controversial,
            SynthKind::Consensus => Label::NonControversial,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SynthKind::Polarized => "polarized",
            SynthKind::Consensus => "consensus",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polarized" => Ok(SynthKind::Polarized),
            "consensus" => Ok(SynthKind::Consensus),
            other => Err(Error::Argument(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

/// Number of users in the first community of a polarized thread. The post author
/// (user 0) belongs to it.
pub fn polarized_split(n_users: usize) -> usize {
    n_users / 2
}

pub fn user_name(k: usize) -> String {
    format!("u{k}")
}

struct Builder {
    post_id: String,
    comments: Vec<Comment>,
    authors: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn push(&mut self, author: usize, parent: Option<usize>) -> usize {
        let k = self.comments.len();
        // Two minutes apart on average, strictly increasing.
        let offset = 120 * (k as i64 + 1) + self.rng.gen_range(0..60);
        let len = self.rng.gen_range(3..25);
        let body: Vec<&str> = (0..len)
            .map(|_| *WORDS.choose(&mut self.rng).expect("non-empty"))
            .collect();
        self.comments.push(Comment {
            comment_id: format!("{}_c{k}", self.post_id),
            parent_id: match parent {
                None => self.post_id.clone(),
                Some(p) => self.comments[p].comment_id.clone(),
            },
            author: user_name(author),
            created_utc: BASE_UTC + offset,
            body: body.join(" "),
        });
        self.authors.push(author);
        k
    }

    /// A recent comment whose author is in `pool`, preferring a different author.
    fn pick_parent(&mut self, candidates: &[usize], author: usize) -> usize {
        let recent = &candidates[candidates.len().saturating_sub(6)..];
        for _ in 0..4 {
            let p = *recent.choose(&mut self.rng).expect("non-empty");
            if self.authors[p] != author {
                return p;
            }
        }
        *recent.choose(&mut self.rng).expect("non-empty")
    }
}

pub fn generate_synthetic(kind: SynthKind, n_users: usize, seed: u64) -> Result<Thread> {
    if n_users < MIN_SYNTH_USERS {
        return Err(Error::Argument(format!(
            "synthetic threads need at least {MIN_SYNTH_USERS} users, got {n_users}"
        )));
    }
    let salt = match kind {
        SynthKind::Polarized => 0x9e37_79b9_7f4a_7c15,
        SynthKind::Consensus => 0xc2b2_ae3d_27d4_eb4f,
    };
    let post_id = format!("synth_{}_{seed}", kind.name());
    let mut b = Builder {
        post_id: post_id.clone(),
        comments: Vec::new(),
        authors: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed ^ salt),
    };
    let n_comments = MIN_SYNTH_COMMENTS.max(3 * n_users) + b.rng.gen_range(0..n_users);

    match kind {
        SynthKind::Polarized => polarized(&mut b, n_users, n_comments),
        SynthKind::Consensus => consensus(&mut b, n_users, n_comments),
    }

    Ok(Thread {
        post_id,
        subreddit: "synthetic".into(),
        author: user_name(0),
        created_utc: BASE_UTC,
        title: format!("synthetic {} thread", kind.name()),
        selftext: String::new(),
        label: kind.label(),
        comments: b.comments,
    })
}

fn polarized(b: &mut Builder, n_users: usize, n_comments: usize) {
    let split = polarized_split(n_users);
    // The post author stays out of the argument so it does not become a hub.
    let sides: [Vec<usize>; 2] = [(1..split).collect(), (split..n_users).collect()];
    let mut by_side: [Vec<usize>; 2] = [Vec::new(), Vec::new()];

    for side in 0..2 {
        let author = *sides[side].choose(&mut b.rng).expect("community is non-empty");
        let k = b.push(author, None);
        by_side[side].push(k);
    }

    let late_start = n_comments - n_comments / 5;
    let n_cross = (n_comments / 30).max(1);
    let mut cross_at: Vec<usize> = (late_start..n_comments).collect();
    cross_at.shuffle(&mut b.rng);
    cross_at.truncate(n_cross);

    for k in 2..n_comments {
        let side = b.rng.gen_range(0..2);
        let author = *sides[side].choose(&mut b.rng).expect("community is non-empty");
        let target_side = if cross_at.contains(&k) { 1 - side } else { side };
        let candidates = by_side[target_side].clone();
        let parent = b.pick_parent(&candidates, author);
        let c = b.push(author, Some(parent));
        by_side[side].push(c);
    }
}

fn consensus(b: &mut Builder, n_users: usize, n_comments: usize) {
    // Every participant answers the post once first, so the post author is the hub.
    let mut order: Vec<usize> = (1..n_users).collect();
    order.shuffle(&mut b.rng);
    let mut top_level = Vec::new();
    for &author in &order {
        top_level.push(b.push(author, None));
    }
    for _ in order.len()..n_comments {
        let author = b.rng.gen_range(1..n_users);
        if b.rng.gen_bool(0.7) {
            top_level.push(b.push(author, None));
        } else {
            let parent = *top_level.choose(&mut b.rng).expect("non-empty");
            b.push(author, Some(parent));
        }
    }
}

/// `per_kind` polarized and `per_kind` consensus threads, interleaved, with
/// distinct seeds derived from `seed`.
pub fn synthetic_corpus(per_kind: usize, n_users: usize, seed: u64) -> Result<Vec<Thread>> {
    let mut out = Vec::with_capacity(2 * per_kind);
    for k in 0..per_kind as u64 {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(k);
        out.push(generate_synthetic(SynthKind::Polarized, n_users, s)?);
        out.push(generate_synthetic(SynthKind::Consensus, n_users, s)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_user_graph, write_threads};

    #[test]
    fn rejects_tiny_user_counts() {
        assert!(matches!(
            generate_synthetic(SynthKind::Polarized, 3, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic(SynthKind::Polarized, 20, 7).unwrap();
        let b = generate_synthetic(SynthKind::Polarized, 20, 7).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_threads(&mut ba, &[a]).unwrap();
        write_threads(&mut bb, &[b]).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn threads_are_valid_and_long_enough() {
        for seed in 0..20 {
            for kind in [SynthKind::Polarized, SynthKind::Consensus] {
                for n in [4, 5, 12, 40] {
                    let t = generate_synthetic(kind, n, seed).unwrap();
                    t.validate().unwrap();
                    assert!(t.comments.len() >= MIN_SYNTH_COMMENTS);
                    assert!(t.comments.windows(2).all(|w| w[0].created_utc < w[1].created_utc));
                    assert_eq!(t.label, kind.label());
                }
            }
        }
    }

    #[test]
    fn consensus_hub_is_post_author() {
        let t = generate_synthetic(SynthKind::Consensus, 20, 7).unwrap();
        let g = build_user_graph(&t);
        let deg = g.degrees();
        // Brute-force degree scan over every other node.
        let post = g.users.iter().position(|u| *u == t.author).unwrap();
        for (k, &d) in deg.iter().enumerate() {
            if k != post {
                assert!(d < deg[post], "node {k} degree {d} vs hub {}", deg[post]);
            }
        }
    }

    #[test]
    fn polarized_halves_are_nearly_disconnected() {
        let t = generate_synthetic(SynthKind::Polarized, 20, 7).unwrap();
        let g = build_user_graph(&t);
        let split = polarized_split(20);
        let side = |u: &str| u[1..].parse::<usize>().unwrap() < split;
        let (mut cut_w, mut cut_e) = (0u64, 0usize);
        for e in &g.edges {
            if side(&g.users[e.i]) != side(&g.users[e.j]) {
                cut_w += e.w as u64;
                cut_e += 1;
            }
        }
        assert!(cut_w as f64 <= 0.1 * g.total_weight() as f64, "{cut_w}/{}", g.total_weight());
        assert!(cut_e as f64 <= 0.1 * g.edges.len() as f64, "{cut_e}/{}", g.edges.len());
    }
}
