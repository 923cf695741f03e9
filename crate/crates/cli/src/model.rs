use std::str::FromStr;

use clap::{Args, ValueEnum};
use pll_core::rvdist::{Family, PiecewisePolynomial};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    PowerLaw,
    Uniform,
    Gap,
    Piecewise,
}

/// Two values written `a:b` on the command line and `[a, b]` in files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pair<T>(pub [T; 2]);

impl<T: FromStr> FromStr for Pair<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `a:b`, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<T>().map_err(|e| format!("`{v}`: {e}"));
        Ok(Pair([parse(a)?, parse(b)?]))
    }
}

/// Distribution flags shared by the simulation subcommands. Flattened into
/// each subcommand section; unknown keys are caught by the section check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct ModelArgs {
    /// Distribution family
    #[arg(long = "model", value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    /// Power-law exponent: F(x) = x^alpha on [0, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Uniform lower end
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Uniform upper end
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Gap model: density on [0, g1] and [g2, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<f64>,
    /// Piecewise model breakpoints, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    /// Piecewise segment masses, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Piecewise segment exponents `p:q`, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<Pair<u32>>>,
}

fn need(v: Option<f64>, key: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::missing(key))
}

impl ModelArgs {
    /// Fills family defaults in place and builds the family.
    pub fn resolve(&mut self, default: Option<FamilyName>) -> Result<Family> {
        let family = self.family.or(default).ok_or_else(|| CliError::missing("model"))?;
        self.family = Some(family);
        let out = match family {
            FamilyName::PowerLaw => {
                let alpha = *self.alpha.get_or_insert(1.0);
                Family::PowerLaw { alpha }
            }
            FamilyName::Uniform => {
                let a = *self.a.get_or_insert(0.0);
                let b = *self.b.get_or_insert(1.0);
                Family::Uniform { a, b }
            }
            FamilyName::Gap => Family::Gap { g1: need(self.g1, "g1")?, g2: need(self.g2, "g2")? },
            FamilyName::Piecewise => {
                let bp = self.breakpoints.clone().ok_or_else(|| CliError::missing("breakpoints"))?;
                let w = self.weights.clone().ok_or_else(|| CliError::missing("weights"))?;
                let ex = self.exponents.clone().ok_or_else(|| CliError::missing("exponents"))?;
                let poly = PiecewisePolynomial::new(bp, w, ex.iter().map(|p| (p.0[0], p.0[1])).collect())
                    .map_err(|e| CliError::invalid("breakpoints", e.to_string()))?;
                Family::Piecewise(poly)
            }
        };
        let irrelevant: &[(&str, bool)] = &[
            ("alpha", self.alpha.is_some() && family != FamilyName::PowerLaw),
            ("a", self.a.is_some() && family != FamilyName::Uniform),
            ("b", self.b.is_some() && family != FamilyName::Uniform),
            ("g1", self.g1.is_some() && family != FamilyName::Gap),
            ("g2", self.g2.is_some() && family != FamilyName::Gap),
            ("breakpoints", self.breakpoints.is_some() && family != FamilyName::Piecewise),
        ];
        if let Some((key, _)) = irrelevant.iter().find(|(_, bad)| *bad) {
            return Err(CliError::invalid(key, format!("not a parameter of the {} model", family.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())));
        }
        Ok(out)
    }
}
