use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

const BUNDLED: &str = include_str!("../../data/materials.toml");

/// Elastic, strength and fatigue constants of a flexure material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    /// Young's modulus E, Pa.
    pub youngs_modulus: f64,
    /// Yield strength, Pa.
    pub yield_strength: f64,
    /// Basquin coefficient σ'_f, Pa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatigue_strength_coeff: Option<f64>,
    /// Basquin exponent b (< 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatigue_exponent: Option<f64>,
    /// Fully reversed endurance limit, Pa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endurance_limit: Option<f64>,
    pub safety_factor: f64,
}

impl MaterialSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("Young's modulus", self.youngs_modulus)?;
        ensure_positive("yield strength", self.yield_strength)?;
        ensure_finite("safety factor", self.safety_factor)?;
        if self.safety_factor < 1.0 {
            return Err(Error::Validation(format!(
                "safety factor must be ≥ 1, got {}",
                self.safety_factor
            )));
        }
        if let Some(sf) = self.fatigue_strength_coeff {
            ensure_positive("fatigue strength coefficient", sf)?;
        }
        if let Some(b) = self.fatigue_exponent {
            ensure_finite("fatigue exponent", b)?;
            if b >= 0.0 {
                return Err(Error::Validation(format!("Basquin exponent must be < 0, got {b}")));
            }
        }
        if let Some(e) = self.endurance_limit {
            ensure_positive("endurance limit", e)?;
        }
        Ok(())
    }

    pub fn basquin(&self) -> Option<(f64, f64)> {
        self.fatigue_strength_coeff.zip(self.fatigue_exponent)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    material: Vec<MaterialSpec>,
}

/// Named collection of materials.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLibrary {
    materials: BTreeMap<String, MaterialSpec>,
}

impl MaterialLibrary {
    /// The library shipped with the crate (ABS, Al 7075, spring steel).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED, Path::new("<bundled materials.toml>")).expect("bundled material library is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: LibraryFile = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        let mut materials = BTreeMap::new();
        for m in file.material {
            m.validate()
                .map_err(|e| Error::format(origin, format!("material `{}`: {e}", m.name)))?;
            if materials.insert(m.name.clone(), m.clone()).is_some() {
                return Err(Error::format(origin, format!("duplicate material `{}`", m.name)));
            }
        }
        Ok(Self { materials })
    }

    pub fn get(&self, name: &str) -> Result<&MaterialSpec> {
        self.materials.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown material `{name}` (known: {})",
                self.materials.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_library_has_the_three_materials() {
        let lib = MaterialLibrary::bundled();
        let names: Vec<_> = lib.names().collect();
        assert_eq!(names, ["abs", "al7075", "steel"]);
        assert!(lib.get("steel").unwrap().endurance_limit.is_some());
        assert!(lib.get("abs").unwrap().endurance_limit.is_none());
        assert!(lib.get("titanium").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[[material]]\nname='x'\nyoungs_modulus=1e9\nyield_strength=1e6\nsafety_factor=1.0\ncolour='red'\n";
        assert!(MaterialLibrary::parse(text, Path::new("t")).is_err());
    }
}
