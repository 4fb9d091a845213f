//! The fixed emotion label set.

use core::fmt;

/// Number of emotion classes.
pub const NUM_EMOTIONS: usize = 10;

/// Discrete emotion classes, in the fixed order used for one-hot encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Emotion {
    Neutral,
    Happy,
    Sad,
    Angry,
    Excited,
    Frustrated,
    Fearful,
    Surprised,
    Distressed,
    Other,
}

impl Emotion {
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Neutral,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Excited,
        Emotion::Frustrated,
        Emotion::Fearful,
        Emotion::Surprised,
        Emotion::Distressed,
        Emotion::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Excited => "excited",
            Emotion::Frustrated => "frustrated",
            Emotion::Fearful => "fearful",
            Emotion::Surprised => "surprised",
            Emotion::Distressed => "distressed",
            Emotion::Other => "other",
        }
    }

    /// Position in [`Emotion::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Emotion::ALL.get(index).copied()
    }

    /// Exact, case-sensitive lookup by lowercase name.
    pub fn from_name(name: &str) -> Option<Emotion> {
        Emotion::ALL.iter().copied().find(|e| e.name() == name)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
