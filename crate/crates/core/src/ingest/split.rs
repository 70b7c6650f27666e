use super::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Train,
    Val,
    Test,
}

impl Segment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Segment::Train => "train",
            Segment::Val => "val",
            Segment::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Segment::Train),
            "val" | "validation" => Some(Segment::Val),
            "test" => Some(Segment::Test),
            _ => None,
        }
    }
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-user boundaries: train is `[0, train_end)`, val `[train_end, val_end)`,
/// test `[val_end, len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitBounds {
    pub train_end: usize,
    pub val_end: usize,
    pub len: usize,
}

impl SplitBounds {
    pub fn segment_of(&self, position: usize) -> Segment {
        if position < self.train_end {
            Segment::Train
        } else if position < self.val_end {
            Segment::Val
        } else {
            Segment::Test
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.train_end,
            self.val_end - self.train_end,
            self.len - self.val_end,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub bounds: Vec<SplitBounds>,
    pub num_users: usize,
    pub num_pois: usize,
}

/// First `floor(0.8T)` check-ins train, up to `floor(0.9T)` validate, the
/// rest test.
pub fn chronological_split(len: usize) -> SplitBounds {
    SplitBounds {
        train_end: len * 8 / 10,
        val_end: len * 9 / 10,
        len,
    }
}

pub fn split_corpus(corpus: &Corpus) -> CorpusSplit {
    CorpusSplit {
        bounds: corpus
            .histories
            .iter()
            .map(|h| chronological_split(h.len()))
            .collect(),
        num_users: corpus.num_users(),
        num_pois: corpus.num_pois(),
    }
}
