//! Placement of the stack, source and monitor planes on the grid, and
//! filling-fraction rasterization of the layers along the propagation axis.
//!
//! Node `i` sits at x = i·Δ and owns the interval [x − Δ/2, x + Δ/2]. A node's
//! material parameters are the overlap-weighted average of every segment
//! (ambient, each layer, substrate) that intersects its interval.

use serde::{Deserialize, Serialize};

use super::SimConfig;
use crate::error::{Error, Result};
use crate::materials::{MaterialModel, StackSpec};
use crate::units::NM_PER_UM;

/// Distance from the inner PML edge to the source plane.
pub const SOURCE_OFFSET_UM: f64 = 0.1;
/// Distance from the inner PML edge to the reflection monitor plane.
pub const REFLECTION_OFFSET_UM: f64 = 0.2;
/// Distance from the inner PML edge to the first stack interface.
pub const STACK_OFFSET_UM: f64 = 0.4;
/// Distance from the far PML edge back to the transmission monitor plane.
pub const TRANSMISSION_OFFSET_UM: f64 = 0.1;
/// Minimum clearance between the last interface and the transmission plane.
pub const REAR_CLEARANCE_UM: f64 = 0.05;

/// Node indices of the fixed planes. Every placement is independent of the
/// stack, so the empty-stack normalization run shares the same planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub nx: usize,
    pub ny: usize,
    pub pml_cells: usize,
    pub source: usize,
    pub reflection: usize,
    pub transmission: usize,
}

impl Layout {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let [nx, ny] = config.grid_shape();
        let res = config.resolution;
        let cells = |um: f64| (um * res).round() as usize;
        let pml_cells = cells(config.pml_thickness_um);
        let layout = Self {
            nx,
            ny,
            pml_cells,
            source: pml_cells + cells(SOURCE_OFFSET_UM).max(1),
            reflection: pml_cells + cells(REFLECTION_OFFSET_UM).max(2),
            transmission: nx.saturating_sub(1 + pml_cells + cells(TRANSMISSION_OFFSET_UM).max(1)),
        };
        if !(layout.source < layout.reflection
            && layout.stack_front_um(config) < layout.transmission as f64 * config.dx_um())
        {
            return Err(Error::Geometry(format!(
                "cell of {:?} μm at {res} cells/μm leaves no room between the PML regions for source, monitors and stack",
                config.cell_size_um
            )));
        }
        Ok(layout)
    }

    /// Position of the first stack interface in μm.
    pub fn stack_front_um(&self, config: &SimConfig) -> f64 {
        (self.pml_cells as f64 * config.dx_um()) + STACK_OFFSET_UM
    }

    /// First and last node outside the PML.
    pub fn interior(&self) -> (usize, usize) {
        (self.pml_cells, self.nx - 1 - self.pml_cells)
    }
}

/// One homogeneous slab of the rasterized stack, in μm along x.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub material: MaterialModel,
    pub start_um: f64,
    pub end_um: f64,
}

/// Ambient, layers and substrate laid out from `front_um`. The half-spaces
/// extend to ±∞.
pub fn segments(stack: &StackSpec, front_um: f64) -> Vec<Segment> {
    let mut out = vec![Segment {
        name: "ambient".into(),
        material: stack.ambient.clone(),
        start_um: f64::NEG_INFINITY,
        end_um: front_um,
    }];
    let mut x = front_um;
    for layer in &stack.layers {
        let end = x + layer.thickness_nm / NM_PER_UM;
        out.push(Segment {
            name: layer.name.clone(),
            material: layer.material.clone(),
            start_um: x,
            end_um: end,
        });
        x = end;
    }
    out.push(Segment {
        name: "substrate".into(),
        material: stack.substrate.clone(),
        start_um: x,
        end_um: f64::INFINITY,
    });
    out
}

/// Fraction of node `i`'s interval covered by [start, end).
pub fn overlap_fraction(i: usize, dx: f64, start: f64, end: f64) -> f64 {
    let lo = (i as f64 - 0.5) * dx;
    let hi = (i as f64 + 0.5) * dx;
    ((hi.min(end) - lo.max(start)).max(0.0) / dx).clamp(0.0, 1.0)
}

/// Overlap fractions of every segment with every node: `fractions[s][i]`.
/// Each node's fractions sum to one.
pub fn fill_fractions(segments: &[Segment], nx: usize, dx: f64) -> Vec<Vec<f64>> {
    segments
        .iter()
        .map(|s| {
            (0..nx)
                .map(|i| overlap_fraction(i, dx, s.start_um, s.end_um))
                .collect()
        })
        .collect()
}

/// Checks that the stack ends before the transmission plane and returns the
/// segments plus their fill fractions.
pub fn rasterize(
    stack: &StackSpec,
    config: &SimConfig,
    layout: &Layout,
) -> Result<(Vec<Segment>, Vec<Vec<f64>>)> {
    stack.validate()?;
    let dx = config.dx_um();
    let front = layout.stack_front_um(config);
    let limit = layout.transmission as f64 * dx - REAR_CLEARANCE_UM;
    let end = front + stack.total_thickness_nm() / NM_PER_UM;
    if end > limit + 1e-12 {
        return Err(Error::Geometry(format!(
            "stack of {:.1} nm does not fit: it would end at {end:.4} μm but must end before {limit:.4} μm",
            stack.total_thickness_nm()
        )));
    }
    let segs = segments(stack, front);
    let fractions = fill_fractions(&segs, layout.nx, dx);
    Ok((segs, fractions))
}
