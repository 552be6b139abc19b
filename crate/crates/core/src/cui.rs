use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Literal used in files and reports for a span with no adequate vocabulary entry.
pub const CUI_LESS: &str = "CUI-less";

/// A Concept Unique Identifier: `C` followed by at least seven ASCII digits.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cui(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid CUI {0:?}: expected 'C' followed by 7 or more digits")]
pub struct InvalidCui(pub String);

impl Cui {
    pub fn new(raw: &str) -> Result<Self, InvalidCui> {
        let digits = raw.strip_prefix('C').unwrap_or("");
        if digits.len() >= 7 && digits.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Cui(raw.to_string()))
        } else {
            Err(InvalidCui(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Cui {
    type Err = InvalidCui;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cui::new(s)
    }
}

impl fmt::Display for Cui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Cui {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for Cui {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Cui {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Cui::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// A normalization label: either a concrete CUI or the CUI-less marker.
///
/// Sorted so that every `Cui` precedes `CuiLess`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Cui(Cui),
    CuiLess,
}

impl Label {
    pub fn cui(&self) -> Option<&Cui> {
        match self {
            Label::Cui(c) => Some(c),
            Label::CuiLess => None,
        }
    }
}

impl FromStr for Label {
    type Err = InvalidCui;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == CUI_LESS {
            Ok(Label::CuiLess)
        } else {
            Cui::new(s).map(Label::Cui)
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Cui(c) => c.fmt(f),
            Label::CuiLess => f.write_str(CUI_LESS),
        }
    }
}

impl From<Cui> for Label {
    fn from(c: Cui) -> Self {
        Label::Cui(c)
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
