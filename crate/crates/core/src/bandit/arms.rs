use serde::{Deserialize, Serialize};

use crate::gp::InputPoint;

use super::BanditError;

/// One axis of the arm grid, an open interval `(lower, upper)` sampled every
/// `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl GridDim {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, step: f64) -> Self {
        Self { name: name.into(), lower, upper, step }
    }

    fn values(&self) -> Result<Vec<f64>, BanditError> {
        let Self { name, lower, upper, step } = self;
        if !(lower.is_finite() && upper.is_finite() && step.is_finite()) {
            return Err(BanditError::InvalidArgument(format!("dimension {name}: non-finite bounds")));
        }
        let ordered = *step > 0.0 && lower < upper;
        if !ordered {
            return Err(BanditError::InvalidArgument(format!(
                "dimension {name}: need step > 0 and lower < upper, got ({lower}, {upper}) step {step}"
            )));
        }
        // Snap to 1e-12 so that e.g. 3 * 0.05 reads back as 0.15.
        let snap = |v: f64| (v * 1e12).round() / 1e12;
        let mut out = Vec::new();
        let mut k = 1u64;
        loop {
            let v = snap(lower + k as f64 * step);
            if v >= upper - step * 1e-9 {
                break;
            }
            if v > *lower {
                out.push(v);
            }
            k += 1;
        }
        if out.is_empty() {
            return Err(BanditError::InvalidArgument(format!(
                "dimension {name}: step {step} leaves no point inside ({lower}, {upper})"
            )));
        }
        Ok(out)
    }
}

/// Finite grid of arms: the Cartesian product of the per-dimension grids in
/// lexicographic order, first dimension most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpace {
    dims: Vec<GridDim>,
    arms: Vec<InputPoint>,
}

/// An arm together with its position in the arm space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm<'a> {
    pub index: usize,
    pub point: &'a InputPoint,
}

pub fn make_grid(dims: Vec<GridDim>) -> Result<ArmSpace, BanditError> {
    if dims.is_empty() {
        return Err(BanditError::InvalidArgument("arm space has no dimensions".into()));
    }
    let axes = dims.iter().map(GridDim::values).collect::<Result<Vec<_>, _>>()?;
    let mut arms: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        arms = arms
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    let arms = arms.into_iter().map(|c| InputPoint::new(c).expect("grid coordinates are finite")).collect();
    Ok(ArmSpace { dims, arms })
}

impl ArmSpace {
    pub fn dims(&self) -> &[GridDim] {
        &self.dims
    }

    pub fn names(&self) -> Vec<String> {
        self.dims.iter().map(|d| d.name.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn arms(&self) -> &[InputPoint] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arm(&self, index: usize) -> Option<Arm<'_>> {
        self.arms.get(index).map(|point| Arm { index, point })
    }

    pub fn index_of(&self, point: &InputPoint) -> Option<usize> {
        self.arms.iter().position(|a| a == point)
    }
}
