use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which attention channels accompany the RGB input, and whether GrabCut runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum VariantTag {
    Sem0CNone,
    Sem1CRand,
    Sem1CGt,
    Sem2CRand,
    Sem2CMean,
    Sem2CNeg,
    Oracle,
    NoGrabcut,
}

/// Source of one attention channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelSource {
    /// Proxies of the target label.
    Target,
    /// Labels drawn uniformly from the vocabulary.
    RandomLabels,
    /// The classifier's own top-ranked classes.
    ClassifierTop,
    /// Confusable labels the classifier ranks high but that are not proxies.
    Negatives,
    GroundTruth,
}

impl VariantTag {
    pub const ALL: [VariantTag; 8] = [
        VariantTag::Sem0CNone,
        VariantTag::Sem1CRand,
        VariantTag::Sem1CGt,
        VariantTag::Sem2CRand,
        VariantTag::Sem2CMean,
        VariantTag::Sem2CNeg,
        VariantTag::Oracle,
        VariantTag::NoGrabcut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantTag::Sem0CNone => "SEM-0-C-NONE",
            VariantTag::Sem1CRand => "SEM-1-C-RAND",
            VariantTag::Sem1CGt => "SEM-1-C-GT",
            VariantTag::Sem2CRand => "SEM-2-C-RAND",
            VariantTag::Sem2CMean => "SEM-2-C-MEAN",
            VariantTag::Sem2CNeg => "SEM-2-C-NEG",
            VariantTag::Oracle => "ORACLE",
            VariantTag::NoGrabcut => "NO-GRABCUT",
        }
    }

    /// (positive, negative) channel sources.
    pub fn channel_sources(self) -> (Option<ChannelSource>, Option<ChannelSource>) {
        use ChannelSource::*;
        match self {
            VariantTag::Sem0CNone => (None, None),
            VariantTag::Sem1CRand => (Some(RandomLabels), None),
            VariantTag::Sem1CGt => (Some(Target), None),
            VariantTag::Sem2CRand => (Some(Target), Some(RandomLabels)),
            VariantTag::Sem2CMean => (Some(Target), Some(ClassifierTop)),
            VariantTag::Sem2CNeg | VariantTag::NoGrabcut => (Some(Target), Some(Negatives)),
            VariantTag::Oracle => (Some(GroundTruth), Some(Negatives)),
        }
    }

    /// Segmentation-network input channels: RGB plus attention maps.
    pub fn input_channels(self) -> usize {
        let (p, n) = self.channel_sources();
        3 + usize::from(p.is_some()) + usize::from(n.is_some())
    }

    pub fn uses_grabcut(self) -> bool {
        self != VariantTag::NoGrabcut
    }

    /// The variant whose trained weights this one evaluates with.
    pub fn training_variant(self) -> VariantTag {
        match self {
            VariantTag::NoGrabcut => VariantTag::Sem2CNeg,
            v => v,
        }
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    /// Case-insensitive; dashes and underscores are ignored, so `sem-2c-neg` works.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_uppercase();
        VariantTag::ALL
            .into_iter()
            .find(|v| v.as_str().replace('-', "") == key)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

impl From<VariantTag> for String {
    fn from(v: VariantTag) -> String {
        v.as_str().to_string()
    }
}

impl TryFrom<String> for VariantTag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
