//! Implicit surface representation and its nodal piecewise-linear sampling.
//!
//! The surface provides the exact signed distance, closest-point map and
//! normal; the nodal sample of the signed distance defines the discrete
//! surface and domain as the zero set / negative set of the piecewise-linear
//! interpolant on the background mesh.

use crate::error::{CutFemError, Result};
use crate::mesh::BackgroundMesh;
use nalgebra::{Point3, Vector3};

/// Closed implicit surface. Only the sphere is provided; the enumeration
/// leaves room for further smooth shapes behind the same queries.
#[derive(Debug, Clone, Copy)]
pub enum Surface {
    Sphere { center: Point3<f64>, radius: f64 },
}

impl Surface {
    pub fn sphere(center: Point3<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(CutFemError::InvalidArgument(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Surface::Sphere { center, radius })
    }

    pub fn unit_sphere() -> Self {
        Surface::Sphere {
            center: Point3::origin(),
            radius: 1.0,
        }
    }

    /// Signed distance to the surface, negative inside the enclosed domain.
    pub fn signed_distance(&self, x: &Point3<f64>) -> f64 {
        match self {
            Surface::Sphere { center, radius } => (x - center).norm() - radius,
        }
    }

    /// Closest point on the surface. Fails on the medial set (the center).
    pub fn closest_point(&self, x: &Point3<f64>) -> Result<Point3<f64>> {
        match self {
            Surface::Sphere { center, radius } => {
                let d = x - center;
                let len = d.norm();
                if len == 0.0 {
                    return Err(CutFemError::DegeneratePoint(
                        "closest point undefined at the sphere center".into(),
                    ));
                }
                Ok(center + d * (radius / len))
            }
        }
    }

    /// Exterior unit normal at a point on the surface.
    pub fn normal_at(&self, x: &Point3<f64>) -> Result<Vector3<f64>> {
        if self.signed_distance(x).abs() > 1e-10 {
            return Err(CutFemError::Precondition(format!(
                "normal requested {} away from the surface",
                self.signed_distance(x).abs()
            )));
        }
        match self {
            Surface::Sphere { center, .. } => {
                let d = x - center;
                Ok(d / d.norm())
            }
        }
    }

    /// Closest-point extension of a surface function: constant along normals.
    pub fn extend<F: Fn(&Point3<f64>) -> f64>(&self, f: F, x: &Point3<f64>) -> Result<f64> {
        Ok(f(&self.closest_point(x)?))
    }
}

/// Per-vertex values of the signed distance; negative marks the inside.
#[derive(Debug, Clone)]
pub struct NodalLevelSet {
    pub values: Vec<f64>,
}

impl NodalLevelSet {
    /// Samples the exact signed distance at the mesh vertices.
    ///
    /// Fails when all values have one sign (the discrete surface would be
    /// empty) or any value is not finite.
    pub fn sample(surface: &Surface, mesh: &BackgroundMesh) -> Result<Self> {
        let values: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|v| surface.signed_distance(v))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CutFemError::NonFinite {
                stage: "level_set",
                detail: "non-finite nodal level set value".into(),
            });
        }
        let any_neg = values.iter().any(|&v| v < 0.0);
        let any_pos = values.iter().any(|&v| v > 0.0);
        if !any_neg || !any_pos {
            return Err(CutFemError::Geometry(
                "nodal level set has one sign only; the surface misses the mesh".into(),
            ));
        }
        Ok(Self { values })
    }
}
