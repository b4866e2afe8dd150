use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the crate. Parse errors carry the 1-based line
/// number of the offending input line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("edge {index} ({src} -> {dst}) references a node outside 0..{node_count}")]
    EdgeOutOfRange {
        index: usize,
        src: u32,
        dst: u32,
        node_count: usize,
    },

    #[error("node {node} is outside 0..{node_count}")]
    NodeOutOfRange { node: u32, node_count: usize },

    #[error("node {node} has an empty lemma list")]
    EmptyLemmas { node: u32 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate synset id {id} at {path}:{line} (first seen at line {first_line})")]
    DuplicateSynset {
        path: PathBuf,
        line: usize,
        first_line: usize,
        id: String,
    },

    #[error("word list {name:?} is empty")]
    EmptyWordList { name: String },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("all {sample_size} samples were degenerate (descendant sets below {min_size} nodes); the graph has no reachable core at this threshold")]
    AllSamplesDegenerate { sample_size: usize, min_size: usize },

    #[error("ancestor-set computation needs about {needed} bytes of bitsets (cap {cap}); use the sampled core instead")]
    MemoryCapExceeded { needed: usize, cap: usize },

    #[error("no short-loop components: every edge in scope has girth above {filter_length}")]
    NoComponents { filter_length: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
