//! Command implementations shared by the `chronoens` binary and its tests.

pub mod error;
pub mod files;
pub mod report;
pub mod trace;

use clap::ValueEnum;

/// Phase reference subtracted before AVAR estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Reference {
    Truth,
    GacMean,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Reference::Truth => "truth",
            Reference::GacMean => "gac_mean",
        }
    }
}
