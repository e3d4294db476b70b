//! Named experiment configurations.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Billiard;
use crate::error::{Error, Result};
use crate::geometry::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// θ = π/4, a = √2/4, r = 0.05: axis and diagonal type II corridors.
    Tail,
    /// θ = π/4, a = 0.4, r = 0.1.
    Canonical,
    /// θ = π/4, a = 0.4, r = 0.25: every corridor closed. The grown
    /// scatterers overlap, so orbits stay inside one pocket.
    Finite,
    /// Disks of radius 0.3 grown by r = 0.1.
    Lorentz,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Tail, Preset::Canonical, Preset::Finite, Preset::Lorentz];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tail => "tail",
            Preset::Canonical => "canonical",
            Preset::Finite => "finite",
            Preset::Lorentz => "lorentz",
        }
    }

    pub fn params(self) -> ModelParams {
        match self {
            Preset::Tail => ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05),
            Preset::Canonical => ModelParams::wind_tree_rational(1, 1, 0.4, 0.1),
            Preset::Finite => ModelParams::wind_tree_rational(1, 1, 0.4, 0.25),
            Preset::Lorentz => ModelParams::lorentz(0.3, 0.1),
        }
    }

    /// Whether the preset needs overlapping scatterers to be accepted.
    pub fn allow_overlap(self) -> bool {
        self == Preset::Finite
    }

    pub fn billiard(self) -> Result<Billiard> {
        if self.allow_overlap() {
            Billiard::new_allow_overlap(self.params())
        } else {
            Billiard::new(self.params())
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown preset `{s}` (tail, canonical, finite, lorentz)")))
    }
}
