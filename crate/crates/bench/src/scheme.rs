use std::fmt;
use std::str::FromStr;

use slp_core::solvers::SlpKind;

use crate::error::BenchError;

/// A precoding scheme evaluated by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Blp,
    Slp(SlpKind),
    Dnet(SlpKind),
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::Blp,
        SchemeId::Slp(SlpKind::Strict),
        SchemeId::Slp(SlpKind::Relaxed),
        SchemeId::Slp(SlpKind::Robust),
        SchemeId::Dnet(SlpKind::Strict),
        SchemeId::Dnet(SlpKind::Relaxed),
        SchemeId::Dnet(SlpKind::Robust),
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Blp => "BLP",
            SchemeId::Slp(SlpKind::Strict) => "SLP-strict",
            SchemeId::Slp(SlpKind::Relaxed) => "SLP-relaxed",
            SchemeId::Slp(SlpKind::Robust) => "Robust-SLP",
            SchemeId::Dnet(SlpKind::Strict) => "SLP-DNet-strict",
            SchemeId::Dnet(SlpKind::Relaxed) => "SLP-DNet-relaxed",
            SchemeId::Dnet(SlpKind::Robust) => "Robust-SLP-DNet",
        }
    }

    /// Whether the scheme is evaluated on instances carrying the CSI error bound.
    pub fn is_robust(self) -> bool {
        matches!(self, SchemeId::Slp(SlpKind::Robust) | SchemeId::Dnet(SlpKind::Robust))
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        SchemeId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| BenchError::Config(format!("unknown scheme {s:?}")))
    }
}
