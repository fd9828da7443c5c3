use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::rational::{FnKind, RationalFn};
use crate::{Error, Result};

/// The open set `G` on which level curves are studied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    WholePlane,
    UnitDisk,
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl DomainSpec {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "rectangle needs x0 < x1 and y0 < y1, got {x0},{y0},{x1},{y1}"
            )));
        }
        Ok(DomainSpec::Rectangle { x0, y0, x1, y1 })
    }

    /// Parse `plane`, `disk` or `rect:x0,y0,x1,y1`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "plane" => Ok(DomainSpec::WholePlane),
            "disk" => Ok(DomainSpec::UnitDisk),
            _ => {
                let body = s
                    .strip_prefix("rect:")
                    .ok_or_else(|| Error::Parse(format!("unknown domain {s:?}")))?;
                let v: Vec<f64> = body
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse(format!("bad rectangle {body:?}")))?;
                if v.len() != 4 {
                    return Err(Error::Parse("rect needs four numbers".into()));
                }
                Self::rectangle(v[0], v[1], v[2], v[3])
            }
        }
    }

    /// Open-set membership.
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            DomainSpec::WholePlane => z.is_finite(),
            DomainSpec::UnitDisk => z.norm() < 1.0,
            DomainSpec::Rectangle { x0, y0, x1, y1 } => {
                z.re > x0 && z.re < x1 && z.im > y0 && z.im < y1
            }
        }
    }

    /// Distance from an interior point to the boundary (infinite for the plane).
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match *self {
            DomainSpec::WholePlane => f64::INFINITY,
            DomainSpec::UnitDisk => 1.0 - z.norm(),
            DomainSpec::Rectangle { x0, y0, x1, y1 } => {
                (z.re - x0).min(x1 - z.re).min(z.im - y0).min(y1 - z.im)
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DomainSpec::WholePlane)
    }

    /// Legal pairings: the unit disk is reserved for Blaschke ratios.
    pub fn validate_for(&self, f: &RationalFn) -> Result<()> {
        if matches!(self, DomainSpec::UnitDisk) && f.kind() != FnKind::Blaschke {
            return Err(Error::InvalidInput(
                "the unit-disk domain requires a Blaschke ratio".into(),
            ));
        }
        if let DomainSpec::Rectangle { x0, y0, x1, y1 } = *self {
            for p in f.poles() {
                let on_x = (p.z.re == x0 || p.z.re == x1) && p.z.im >= y0 && p.z.im <= y1;
                let on_y = (p.z.im == y0 || p.z.im == y1) && p.z.re >= x0 && p.z.re <= x1;
                if on_x || on_y {
                    return Err(Error::InvalidInput(format!(
                        "pole {} lies on the rectangle boundary",
                        p.z
                    )));
                }
            }
        }
        Ok(())
    }

    /// The constant value of `|f|` on `dG`, when there is one.
    pub fn boundary_level(&self) -> Option<f64> {
        match self {
            DomainSpec::UnitDisk => Some(1.0),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DomainSpec::WholePlane => "plane".into(),
            DomainSpec::UnitDisk => "disk".into(),
            DomainSpec::Rectangle { x0, y0, x1, y1 } => format!("rect:{x0},{y0},{x1},{y1}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_domains() {
        assert_eq!(DomainSpec::parse("plane").unwrap(), DomainSpec::WholePlane);
        assert_eq!(DomainSpec::parse("disk").unwrap(), DomainSpec::UnitDisk);
        let r = DomainSpec::parse("rect:-2,-2,2,2").unwrap();
        assert!(r.contains(Complex64::new(1.9, 0.0)));
        assert!(!r.contains(Complex64::new(2.0, 0.0)));
        assert!(DomainSpec::parse("rect:1,0,0,1").is_err());
        assert!(DomainSpec::parse("torus").is_err());
    }

    #[test]
    fn disk_requires_blaschke() {
        let f = crate::parse_rational("poly:1,0").unwrap();
        assert!(DomainSpec::UnitDisk.validate_for(&f).is_err());
        let b = crate::parse_rational("blaschke:0.5/").unwrap();
        assert!(DomainSpec::UnitDisk.validate_for(&b).is_ok());
    }
}
