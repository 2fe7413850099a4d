use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity level of a group's references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityBin {
    Low,
    Medium,
    High,
}

/// Finer split of the High bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HighSubcategory {
    /// sim_p in [med_hi, 0.9)
    #[serde(rename = "0.85_to_0.9")]
    Close,
    /// sim_p in [0.9, 1.0)
    #[serde(rename = "0.9_to_1.0")]
    NearIdentical,
    /// sim_p == 1.0
    #[serde(rename = "exactly_1.0")]
    Identical,
}

impl SimilarityBin {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityBin::Low => "low",
            SimilarityBin::Medium => "medium",
            SimilarityBin::High => "high",
        }
    }
}

impl HighSubcategory {
    pub const ALL: [HighSubcategory; 3] = [
        HighSubcategory::Identical,
        HighSubcategory::NearIdentical,
        HighSubcategory::Close,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HighSubcategory::Close => "0.85_to_0.9",
            HighSubcategory::NearIdentical => "0.9_to_1.0",
            HighSubcategory::Identical => "exactly_1.0",
        }
    }
}

impl fmt::Display for SimilarityBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for HighSubcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityBin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(SimilarityBin::Low),
            "medium" => Ok(SimilarityBin::Medium),
            "high" => Ok(SimilarityBin::High),
            _ => Err(Error::invalid(format!("unknown similarity bin `{s}`"))),
        }
    }
}

impl FromStr for HighSubcategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HighSubcategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown high subcategory `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub low_hi: f64,
    pub med_hi: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            low_hi: 0.45,
            med_hi: 0.85,
        }
    }
}

impl Thresholds {
    pub fn new(low_hi: f64, med_hi: f64) -> Result<Self> {
        let t = Thresholds { low_hi, med_hi };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |x: f64| x > -1.0 && x < 1.0;
        if !(inside(self.low_hi) && inside(self.med_hi) && self.low_hi < self.med_hi) {
            return Err(Error::invalid(format!(
                "thresholds must satisfy -1 < low_hi < med_hi < 1 (got {}, {})",
                self.low_hi, self.med_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinAssignment {
    pub bin: SimilarityBin,
    pub high_subcategory: Option<HighSubcategory>,
}

/// Half-open binning: Low `[-1, low_hi)`, Medium `[low_hi, med_hi)`,
/// High `[med_hi, 1]`.
pub fn assign_bin(score: f64, thresholds: &Thresholds) -> Result<BinAssignment> {
    if !(-1.0..=1.0).contains(&score) {
        return Err(Error::ScoreOutOfRange(score));
    }
    let assignment = if score < thresholds.low_hi {
        BinAssignment {
            bin: SimilarityBin::Low,
            high_subcategory: None,
        }
    } else if score < thresholds.med_hi {
        BinAssignment {
            bin: SimilarityBin::Medium,
            high_subcategory: None,
        }
    } else {
        let sub = if score == 1.0 {
            HighSubcategory::Identical
        } else if score >= 0.9 {
            HighSubcategory::NearIdentical
        } else {
            HighSubcategory::Close
        };
        BinAssignment {
            bin: SimilarityBin::High,
            high_subcategory: Some(sub),
        }
    };
    Ok(assignment)
}
