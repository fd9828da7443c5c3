use serde::{Deserialize, Serialize};

/// Every numerical tolerance used by the library, in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed `| |f(p)| - eps |` for traced points (scaled by `max(1, eps)`).
    pub trace: f64,
    /// Band in which a critical point counts as lying on a level.
    pub vertex: f64,
    /// Power-identity residual allowed for the conformal map.
    pub phi: f64,
    /// Signed-distance slack for hull containment (scaled by the zero scale).
    pub hull: f64,
    /// A level this close (relative) to a critical value is snapped onto it.
    pub snap: f64,
    /// Minimum angular gap between arcs leaving a vertex.
    pub angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trace: 1e-9,
            vertex: 1e-7,
            phi: 1e-8,
            hull: 1e-8,
            snap: 1e-12,
            angle: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::Result<()> {
        let all = [
            ("trace", self.trace),
            ("vertex", self.vertex),
            ("phi", self.phi),
            ("hull", self.hull),
            ("snap", self.snap),
            ("angle", self.angle),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::Error::InvalidInput(format!(
                    "tolerance {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}
