use std::collections::HashMap;

use super::Thread;

/// Keep threads with at least `min` comments.
pub fn filter_min_comments(thread: &Thread, min: usize) -> bool {
    thread.comments.len() >= min
}

/// Comments posted within `cutoff_minutes` of the post, minus any whose
/// ancestor falls outside the window.
pub fn time_slice(thread: &Thread, cutoff_minutes: u64) -> Thread {
    let limit = thread
        .created_utc
        .saturating_add((cutoff_minutes.min(i64::MAX as u64 / 60) as i64) * 60);
    let index: HashMap<&str, usize> = thread
        .comments
        .iter()
        .enumerate()
        .map(|(k, c)| (c.comment_id.as_str(), k))
        .collect();

    // Parents may appear after their children in file order, so resolve by walk.
    let mut keep: Vec<Option<bool>> = vec![None; thread.comments.len()];
    for start in 0..thread.comments.len() {
        let mut chain = Vec::new();
        let mut cur = Some(start);
        let verdict = loop {
            let Some(k) = cur else { break true };
            if let Some(v) = keep[k] {
                break v;
            }
            let c = &thread.comments[k];
            if c.created_utc > limit {
                keep[k] = Some(false);
                break false;
            }
            chain.push(k);
            cur = if c.parent_id == thread.post_id {
                None
            } else {
                index.get(c.parent_id.as_str()).copied()
            };
            if cur.is_none() && c.parent_id != thread.post_id {
                break false;
            }
        };
        for k in chain {
            keep[k] = Some(verdict);
        }
    }

    Thread {
        comments: thread
            .comments
            .iter()
            .zip(&keep)
            .filter(|(_, k)| k.unwrap_or(false))
            .map(|(c, _)| c.clone())
            .collect(),
        ..thread.clone()
    }
}
