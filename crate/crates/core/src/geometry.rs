use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Result};

/// Channel `(0, L)² × (0, h)`, periodic in the two horizontal directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Horizontal period `L`.
    pub length: f64,
    /// Wall separation `h`.
    pub height: f64,
}

impl Geometry {
    pub fn new(length: f64, height: f64) -> Result<Self> {
        let g = Geometry { length, height };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("length", self.length)?;
        ensure_positive("height", self.height)?;
        Ok(())
    }

    /// `|D| = L²h`.
    pub fn volume(&self) -> f64 {
        self.length * self.length * self.height
    }

    pub fn wall_area(&self) -> f64 {
        self.length * self.length
    }
}
