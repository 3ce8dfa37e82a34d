//! Thread parsing, filtering, time slicing, user-graph construction, corpus
//! statistics, and the synthetic thread generator.

mod graph;
mod slice;
mod stats;
mod synth;
mod thread;

pub use graph::{
    author_keys, build_user_graph, message_index, AdjacencyMode, Edge, UserGraph,
    UserGraphRecord, DELETED,
};
pub use slice::{filter_min_comments, time_slice};
pub use stats::{
    dataset_stats, whitespace_token_counts, word_count, DatasetStats, TokenSource,
    LONG_COMMENT_TOKENS,
};
pub use synth::{
    generate_synthetic, polarized_split, synthetic_corpus, user_name, SynthKind, MIN_SYNTH_COMMENTS,
    MIN_SYNTH_USERS,
};
pub use thread::{parse_thread_line, parse_threads, write_threads, Comment, Label, Thread};
