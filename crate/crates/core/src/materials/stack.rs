use serde::{Deserialize, Serialize};

use super::{builtin, MaterialModel, Metal};
use crate::error::{Error, Result};

pub const ITO_THICKNESS_NM: f64 = 200.0;
pub const SIO2_THICKNESS_NM: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub material: MaterialModel,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(name: impl Into<String>, material: MaterialModel, thickness_nm: f64) -> Self {
        Self {
            name: name.into(),
            material,
            thickness_nm,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Illumination {
    #[default]
    FromAmbient,
}

/// Planar multilayer between two semi-infinite half-spaces. Layers are listed
/// in the order the incident light meets them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub ambient: MaterialModel,
    pub layers: Vec<Layer>,
    pub substrate: MaterialModel,
    #[serde(default)]
    pub illumination: Illumination,
}

impl StackSpec {
    pub fn new(
        ambient: MaterialModel,
        layers: Vec<Layer>,
        substrate: MaterialModel,
    ) -> Result<Self> {
        let stack = Self {
            ambient,
            layers,
            substrate,
            illumination: Illumination::FromAmbient,
        };
        stack.validate()?;
        Ok(stack)
    }

    /// Air on both sides, no layers.
    pub fn empty() -> Self {
        Self {
            ambient: MaterialModel::vacuum(),
            layers: Vec::new(),
            substrate: MaterialModel::vacuum(),
            illumination: Illumination::FromAmbient,
        }
    }

    /// air / ITO 200 nm / metal / SiO₂ 500 nm / air, lit from the ITO side.
    pub fn plasmonic(metal: Metal, metal_thickness_nm: f64) -> Result<Self> {
        Self::new(
            MaterialModel::vacuum(),
            vec![
                Layer::new("ito", builtin("ito")?, ITO_THICKNESS_NM),
                Layer::new(metal.key(), metal.model(), metal_thickness_nm),
                Layer::new("sio2", builtin("sio2")?, SIO2_THICKNESS_NM),
            ],
            MaterialModel::vacuum(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.ambient.validate()?;
        self.substrate.validate()?;
        if self.ambient.is_lossy() || self.substrate.is_lossy() {
            return Err(Error::InvalidArgument(
                "ambient and substrate half-spaces must be lossless".into(),
            ));
        }
        for layer in &self.layers {
            if !(layer.thickness_nm > 0.0) || !layer.thickness_nm.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "layer '{}' thickness must be > 0, got {}",
                    layer.name, layer.thickness_nm
                )));
            }
            layer.material.validate()?;
        }
        Ok(())
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// Index of the first layer named `name`.
    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// The same structure lit from the other side.
    pub fn reversed(&self) -> Self {
        Self {
            ambient: self.substrate.clone(),
            layers: self.layers.iter().rev().cloned().collect(),
            substrate: self.ambient.clone(),
            illumination: self.illumination,
        }
    }

    /// Copy of the stack without the layer at `index`.
    pub fn without_layer(&self, index: usize) -> Self {
        let mut s = self.clone();
        s.layers.remove(index);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plasmonic_stack_layout() {
        let s = StackSpec::plasmonic(Metal::Au, 20.0).unwrap();
        let names: Vec<_> = s.layers.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["ito", "au", "sio2"]);
        assert_eq!(s.total_thickness_nm(), 720.0);
    }

    #[test]
    fn non_positive_thickness_rejected() {
        assert!(StackSpec::plasmonic(Metal::Ag, 0.0).is_err());
        assert!(StackSpec::plasmonic(Metal::Ag, -5.0).is_err());
    }

    #[test]
    fn lossy_half_space_rejected() {
        let err = StackSpec::new(Metal::Au.model(), vec![], MaterialModel::vacuum());
        assert!(err.is_err());
    }
}
