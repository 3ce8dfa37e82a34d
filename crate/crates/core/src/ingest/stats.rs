use serde::{Deserialize, Serialize};

use super::{build_user_graph, Thread};

/// Token threshold for the long-comment ratio.
pub const LONG_COMMENT_TOKENS: usize = 256;

/// Where the per-comment token counts came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenSource {
    #[default]
    Whitespace,
    Exporter,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub post_count: usize,
    pub avg_users_per_post: f64,
    pub avg_comments_per_post: f64,
    pub avg_words_per_comment: f64,
    pub pct_comments_tokens_ge_256: f64,
    pub tokenizer: TokenSource,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Whitespace token counts for every comment of `thread`, in comment order.
pub fn whitespace_token_counts(thread: &Thread) -> Vec<usize> {
    thread.comments.iter().map(|c| word_count(&c.body)).collect()
}

/// Corpus statistics. `items` pairs each thread with one token count per comment.
///
/// Per-comment averages are pooled over all comments of the corpus.
pub fn dataset_stats(items: &[(Thread, Vec<usize>)], tokenizer: TokenSource) -> DatasetStats {
    if items.is_empty() {
        return DatasetStats {
            tokenizer,
            ..DatasetStats::default()
        };
    }
    let posts = items.len();
    let mut users = 0usize;
    let mut comments = 0usize;
    let mut words = 0usize;
    let mut long = 0usize;
    for (thread, tokens) in items {
        users += build_user_graph(thread).users.len();
        comments += thread.comments.len();
        words += thread.comments.iter().map(|c| word_count(&c.body)).sum::<usize>();
        long += tokens.iter().filter(|&&t| t >= LONG_COMMENT_TOKENS).count();
    }
    let per_comment = |x: usize| {
        if comments == 0 {
            0.0
        } else {
            x as f64 / comments as f64
        }
    };
    DatasetStats {
        post_count: posts,
        avg_users_per_post: users as f64 / posts as f64,
        avg_comments_per_post: comments as f64 / posts as f64,
        avg_words_per_comment: per_comment(words),
        pct_comments_tokens_ge_256: 100.0 * per_comment(long),
        tokenizer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Comment, Label};

    fn thread(id: &str, replies: usize) -> Thread {
        Thread {
            post_id: id.into(),
            subreddit: "s".into(),
            author: "op".into(),
            created_utc: 0,
            title: String::new(),
            selftext: String::new(),
            label: Label::Controversial,
            comments: (0..replies)
                .map(|k| Comment {
                    comment_id: format!("{id}-{k}"),
                    parent_id: id.into(),
                    author: "fan".into(),
                    created_utc: 1,
                    body: "two words".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_dataset_is_all_zero() {
        let s = dataset_stats(&[], TokenSource::Whitespace);
        assert_eq!(s, DatasetStats::default());
    }

    #[test]
    fn hand_computed_means() {
        let items: Vec<_> = [thread("a", 1), thread("b", 3)]
            .into_iter()
            .map(|t| {
                let tokens = whitespace_token_counts(&t);
                (t, tokens)
            })
            .collect();
        let s = dataset_stats(&items, TokenSource::Whitespace);
        assert_eq!(s.post_count, 2);
        assert_eq!(s.avg_comments_per_post, 2.0);
        assert_eq!(s.avg_users_per_post, 2.0);
        assert_eq!(s.avg_words_per_comment, 2.0);
        assert_eq!(s.pct_comments_tokens_ge_256, 0.0);
    }

    #[test]
    fn long_comment_ratio_uses_supplied_counts() {
        let t = thread("a", 4);
        let s = dataset_stats(&[(t, vec![300, 256, 255, 1])], TokenSource::Exporter);
        assert_eq!(s.pct_comments_tokens_ge_256, 50.0);
        assert_eq!(s.tokenizer, TokenSource::Exporter);
    }
}
