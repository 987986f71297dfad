//! Shared vocabulary: CFA domain codes and answer letters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One of the ten CFA topic categories used for routing.
///
/// The string form is the category code exactly as the classification
/// instruction spells it, trailing dots included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainCode {
    Ethics,
    QuantMeth,
    Economics,
    FinReporting,
    CorpIssuers,
    EquityInvest,
    FixedIncome,
    Derivatives,
    AlterInvest,
    PortManage,
}

impl DomainCode {
    /// All ten codes in the order the classification instruction lists them.
    pub const ALL: [DomainCode; 10] = [
        DomainCode::Ethics,
        DomainCode::QuantMeth,
        DomainCode::Economics,
        DomainCode::FinReporting,
        DomainCode::CorpIssuers,
        DomainCode::EquityInvest,
        DomainCode::FixedIncome,
        DomainCode::Derivatives,
        DomainCode::AlterInvest,
        DomainCode::PortManage,
    ];

    /// The nine domains that carry a reasoning blueprint, in the fixed
    /// concatenation order used when every blueprint is embedded.
    pub const BLUEPRINTED: [DomainCode; 9] = [
        DomainCode::Economics,
        DomainCode::FixedIncome,
        DomainCode::QuantMeth,
        DomainCode::EquityInvest,
        DomainCode::PortManage,
        DomainCode::Derivatives,
        DomainCode::FinReporting,
        DomainCode::AlterInvest,
        DomainCode::CorpIssuers,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainCode::Ethics => "Ethics",
            DomainCode::QuantMeth => "Quant.Meth.",
            DomainCode::Economics => "Economics",
            DomainCode::FinReporting => "Fin.Reporting",
            DomainCode::CorpIssuers => "Corp.Issuers",
            DomainCode::EquityInvest => "EquityInvest.",
            DomainCode::FixedIncome => "FixedIncome",
            DomainCode::Derivatives => "Derivatives",
            DomainCode::AlterInvest => "Alter.Invest.",
            DomainCode::PortManage => "Port.Manage.",
        }
    }

    /// Filesystem- and key-safe form: lowercase, dots become underscores.
    ///
    /// `Quant.Meth.` becomes `quant_meth`, `FixedIncome` becomes `fixedincome`.
    pub fn slug(self) -> String {
        self.as_str()
            .to_ascii_lowercase()
            .replace('.', "_")
            .trim_matches('_')
            .to_string()
    }

    pub fn from_slug(slug: &str) -> Option<DomainCode> {
        DomainCode::ALL.into_iter().find(|d| d.slug() == slug)
    }

    pub fn has_blueprint(self) -> bool {
        self != DomainCode::Ethics
    }
}

impl fmt::Display for DomainCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized domain code {0:?}")]
pub struct UnknownDomain(pub String);

impl FromStr for DomainCode {
    type Err = UnknownDomain;

    /// Exact, case-sensitive match against the ten codes. No trimming.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainCode::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownDomain(s.to_string()))
    }
}

impl Serialize for DomainCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DomainCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A multiple-choice answer option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerLetter {
    A,
    B,
    C,
}

impl AnswerLetter {
    pub const ALL: [AnswerLetter; 3] = [AnswerLetter::A, AnswerLetter::B, AnswerLetter::C];

    pub fn as_char(self) -> char {
        match self {
            AnswerLetter::A => 'A',
            AnswerLetter::B => 'B',
            AnswerLetter::C => 'C',
        }
    }

    pub fn from_char(c: char) -> Option<AnswerLetter> {
        match c {
            'A' => Some(AnswerLetter::A),
            'B' => Some(AnswerLetter::B),
            'C' => Some(AnswerLetter::C),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<AnswerLetter> {
        AnswerLetter::ALL.get(i).copied()
    }
}

impl fmt::Display for AnswerLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}
