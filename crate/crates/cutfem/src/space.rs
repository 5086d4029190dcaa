//! Continuous piecewise-linear spaces on the bulk and surface element sets.
//!
//! Bulk degrees of freedom live on all vertices of elements meeting the
//! discrete domain, surface degrees of freedom on all vertices of cut
//! elements. The surface quotient by constants is realized through the
//! weights of the mean-zero constraint, not by eliminating a vertex.

use crate::cut::{CutGeometry, ElementClass};
use crate::error::{CutFemError, Result};
use crate::mesh::BackgroundMesh;
use crate::quadrature::triangle_degree2;
use nalgebra::{Matrix3, Point3, Vector3};

/// Vertex-to-index maps for the bulk and surface spaces.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Bulk index per mesh vertex, dense on the bulk vertex set.
    pub bulk_of_vertex: Vec<Option<usize>>,
    /// Surface index per mesh vertex.
    pub surf_of_vertex: Vec<Option<usize>>,
    /// Inverse map: vertex of each bulk DOF, ascending in vertex index.
    pub bulk_vertices: Vec<usize>,
    /// Inverse map: vertex of each surface DOF.
    pub surf_vertices: Vec<usize>,
}

impl DofMap {
    pub fn n_bulk(&self) -> usize {
        self.bulk_vertices.len()
    }

    pub fn n_surf(&self) -> usize {
        self.surf_vertices.len()
    }
}

/// Numbers the vertices incident to bulk and cut elements, in global vertex
/// order so the numbering is deterministic.
pub fn build_dofmaps(mesh: &BackgroundMesh, classes: &[ElementClass]) -> Result<DofMap> {
    let nv = mesh.vertices.len();
    let mut in_bulk = vec![false; nv];
    let mut in_surf = vec![false; nv];
    for (t, class) in classes.iter().enumerate() {
        match class {
            ElementClass::Inside => {
                for &v in &mesh.tets[t] {
                    in_bulk[v] = true;
                }
            }
            ElementClass::Cut => {
                for &v in &mesh.tets[t] {
                    in_bulk[v] = true;
                    in_surf[v] = true;
                }
            }
            ElementClass::Outside => {}
        }
    }

    let mut bulk_of_vertex = vec![None; nv];
    let mut surf_of_vertex = vec![None; nv];
    let mut bulk_vertices = Vec::new();
    let mut surf_vertices = Vec::new();
    for v in 0..nv {
        if in_bulk[v] {
            bulk_of_vertex[v] = Some(bulk_vertices.len());
            bulk_vertices.push(v);
        }
        if in_surf[v] {
            surf_of_vertex[v] = Some(surf_vertices.len());
            surf_vertices.push(v);
        }
    }
    if bulk_vertices.is_empty() || surf_vertices.is_empty() {
        return Err(CutFemError::Geometry(
            "empty bulk or surface element set".into(),
        ));
    }
    Ok(DofMap {
        bulk_of_vertex,
        surf_of_vertex,
        bulk_vertices,
        surf_vertices,
    })
}

/// Constant gradients of the four barycentric shape functions of a tet.
pub fn shape_gradients(verts: &[Point3<f64>; 4]) -> Result<[Vector3<f64>; 4]> {
    let e = Matrix3::from_columns(&[
        verts[1] - verts[0],
        verts[2] - verts[0],
        verts[3] - verts[0],
    ]);
    let inv = e.try_inverse().ok_or_else(|| {
        CutFemError::DegenerateElement("zero-volume tet has no shape gradients".into())
    })?;
    // rows of E^{-1} are the gradients of the barycentric coordinates 1..3
    let g1 = Vector3::new(inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]);
    let g2 = Vector3::new(inv[(1, 0)], inv[(1, 1)], inv[(1, 2)]);
    let g3 = Vector3::new(inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]);
    Ok([-(g1 + g2 + g3), g1, g2, g3])
}

/// Barycentric coordinates of `x` in the tet, via the shape gradients.
pub fn barycentric(verts: &[Point3<f64>; 4], grads: &[Vector3<f64>; 4], x: &Point3<f64>) -> [f64; 4] {
    let rel = x - verts[0];
    [
        1.0 + grads[0].dot(&rel),
        grads[1].dot(&rel),
        grads[2].dot(&rel),
        grads[3].dot(&rel),
    ]
}

/// Integral of every surface basis function over the discrete surface,
/// realizing the mean-zero constraint row.
#[derive(Debug, Clone)]
pub struct MeanConstraint {
    /// One weight per surface DOF.
    pub weights: Vec<f64>,
    /// Total measure of the discrete surface (the sum of the weights).
    pub total_area: f64,
}

/// Computes the constraint weights with an edge-midpoint triangle rule,
/// exact for the linear traces being integrated.
pub fn mean_weights(mesh: &BackgroundMesh, cut: &CutGeometry, dofs: &DofMap) -> MeanConstraint {
    let rule = triangle_degree2();
    let mut weights = vec![0.0; dofs.n_surf()];
    let mut total_area = 0.0;
    for cell in &cut.cells {
        let verts = mesh.tet_vertices(cell.tet);
        let grads = shape_gradients(&verts).expect("cut cell tets are non-degenerate");
        let tet = mesh.tets[cell.tet];
        for tri in &cell.surface {
            total_area += tri.area;
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = Point3::from(
                    tri.vertices[0].coords * bary[0]
                        + tri.vertices[1].coords * bary[1]
                        + tri.vertices[2].coords * bary[2],
                );
                let lam = barycentric(&verts, &grads, &x);
                for local in 0..4 {
                    let dof = dofs.surf_of_vertex[tet[local]]
                        .expect("cut tet vertices carry surface DOFs");
                    weights[dof] += w * tri.area * lam[local];
                }
            }
        }
    }
    MeanConstraint {
        weights,
        total_area,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level_set::{NodalLevelSet, Surface};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn reference_tet() -> [Point3<f64>; 4] {
        [
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ]
    }

    #[test]
    fn reference_shape_gradients() {
        let g = shape_gradients(&reference_tet()).unwrap();
        assert!((g[0] - Vector3::new(-1.0, -1.0, -1.0)).norm() < 1e-14);
        assert!((g[1] - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!((g[2] - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-14);
        assert!((g[3] - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
        let sum: Vector3<f64> = g.iter().sum();
        assert!(sum.norm() < 1e-14);
    }

    #[test]
    fn gradients_reject_degenerate_tet() {
        let verts = [
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ];
        assert!(matches!(
            shape_gradients(&verts),
            Err(CutFemError::DegenerateElement(_))
        ));
    }

    #[test]
    fn partition_of_unity_and_affine_reproduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let verts = [
            Point3::new(0.2, 0.1, -0.3),
            Point3::new(1.3, 0.2, 0.1),
            Point3::new(0.4, 1.1, 0.0),
            Point3::new(0.1, 0.3, 1.2),
        ];
        let grads = shape_gradients(&verts).unwrap();
        // delta property
        for i in 0..4 {
            let lam = barycentric(&verts, &grads, &verts[i]);
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((lam[j] - expect).abs() < 1e-13);
            }
        }
        let affine = |p: &Point3<f64>| 0.7 * p.x - 1.3 * p.y + 0.4 * p.z + 2.0;
        let grad_affine = Vector3::new(0.7, -1.3, 0.4);
        for _ in 0..100 {
            let x = Point3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let lam = barycentric(&verts, &grads, &x);
            assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            // nodal interpolation reproduces the affine function
            let interp: f64 = (0..4).map(|i| affine(&verts[i]) * lam[i]).sum();
            assert!((interp - affine(&x)).abs() < 1e-12);
        }
        // gradient of the interpolant of an affine function is its gradient
        let g_interp: Vector3<f64> = (0..4).map(|i| grads[i] * affine(&verts[i])).sum();
        assert!((g_interp - grad_affine).norm() < 1e-12);
    }

    #[test]
    fn dof_counts_on_tiny_meshes() {
        // single cut tet
        let mesh = BackgroundMesh::from_parts(reference_tet().to_vec(), vec![[0, 1, 2, 3]]).unwrap();
        let dofs = build_dofmaps(&mesh, &[ElementClass::Cut]).unwrap();
        assert_eq!(dofs.n_bulk(), 4);
        assert_eq!(dofs.n_surf(), 4);

        // one cut tet plus an inside neighbor
        let vertices = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let mesh = BackgroundMesh::from_parts(vertices, vec![[0, 1, 2, 3], [1, 2, 3, 4]]).unwrap();
        let dofs = build_dofmaps(&mesh, &[ElementClass::Inside, ElementClass::Cut]).unwrap();
        assert_eq!(dofs.n_bulk(), 5);
        assert_eq!(dofs.n_surf(), 4);

        // every surface DOF vertex is also a bulk DOF vertex
        for &v in &dofs.surf_vertices {
            assert!(dofs.bulk_of_vertex[v].is_some());
        }
    }

    #[test]
    fn dof_maps_deterministic_and_consistent_with_brute_force() {
        let mesh = BackgroundMesh::build_box(
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            0.375,
        )
        .unwrap();
        let nodal = NodalLevelSet::sample(&Surface::unit_sphere(), &mesh).unwrap();
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let dofs = build_dofmaps(&mesh, &cut.classes).unwrap();
        let again = build_dofmaps(&mesh, &cut.classes).unwrap();
        assert_eq!(dofs.bulk_vertices, again.bulk_vertices);
        assert_eq!(dofs.surf_vertices, again.surf_vertices);
        assert!(dofs.n_surf() < dofs.n_bulk());
        assert!(dofs.n_bulk() < mesh.vertices.len());

        // brute-force vertex sets
        let mut bulk = std::collections::BTreeSet::new();
        let mut surf = std::collections::BTreeSet::new();
        for (t, class) in cut.classes.iter().enumerate() {
            if *class != ElementClass::Outside {
                bulk.extend(mesh.tets[t]);
            }
            if *class == ElementClass::Cut {
                surf.extend(mesh.tets[t]);
            }
        }
        assert_eq!(dofs.bulk_vertices, bulk.into_iter().collect::<Vec<_>>());
        assert_eq!(dofs.surf_vertices, surf.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn mean_weights_single_triangle() {
        // cut the reference tet so the surface is one triangle of known area
        let mesh = BackgroundMesh::from_parts(reference_tet().to_vec(), vec![[0, 1, 2, 3]]).unwrap();
        let nodal = NodalLevelSet {
            values: vec![-0.5, 0.5, 0.5, 0.5],
        };
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let dofs = build_dofmaps(&mesh, &cut.classes).unwrap();
        let mc = mean_weights(&mesh, &cut, &dofs);
        let area = 3.0f64.sqrt() / 8.0;
        assert!((mc.total_area - area).abs() < 1e-14);
        assert!((mc.weights.iter().sum::<f64>() - area).abs() < 1e-14);
    }

    #[test]
    fn mean_weights_midpoint_cut_exact_integrals() {
        let mesh = BackgroundMesh::from_parts(reference_tet().to_vec(), vec![[0, 1, 2, 3]]).unwrap();
        let nodal = NodalLevelSet {
            values: vec![-1.0, 1.0, 1.0, 1.0],
        };
        // crossings at edge midpoints: the trace of the vertex-0 basis is the
        // constant 1/2 on the cut triangle, the other traces integrate to a
        // third of the rest, so the exact weights are area * (1/2, 1/6, 1/6, 1/6)
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let dofs = build_dofmaps(&mesh, &cut.classes).unwrap();
        let mc = mean_weights(&mesh, &cut, &dofs);
        let area = mc.total_area;
        let expect = [0.5 * area, area / 6.0, area / 6.0, area / 6.0];
        for (v, e) in mc.weights.iter().zip(expect) {
            assert!((v - e).abs() < 1e-14, "{v} vs {e}");
        }
    }

    #[test]
    fn mean_weights_face_coincident_triangle_splits_evenly() {
        use crate::cut::{CutCell, SurfaceTriangle};
        use crate::mesh::triangle_area_normal;

        // snapping never produces a cut through a mesh face, so build the
        // geometry by hand: the surface triangle is the tet face (1,2,3)
        let verts = reference_tet();
        let mesh = BackgroundMesh::from_parts(verts.to_vec(), vec![[0, 1, 2, 3]]).unwrap();
        let (area, normal) = triangle_area_normal(&verts[1], &verts[2], &verts[3]);
        let cut = CutGeometry {
            classes: vec![ElementClass::Cut],
            snapped: vec![-1.0, 1e-12, 1e-12, 1e-12],
            cells: vec![CutCell {
                tet: 0,
                normal,
                surface: vec![SurfaceTriangle {
                    vertices: [verts[1], verts[2], verts[3]],
                    area,
                }],
                inside: vec![verts],
                outside: vec![],
            }],
            cell_of_tet: vec![Some(0)],
        };
        let dofs = build_dofmaps(&mesh, &cut.classes).unwrap();
        let mc = mean_weights(&mesh, &cut, &dofs);
        assert!(mc.weights[0].abs() < 1e-14);
        for dof in 1..4 {
            assert!((mc.weights[dof] - area / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_weights_sum_matches_sphere_area_measure() {
        let mesh = BackgroundMesh::build_box(
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            0.375,
        )
        .unwrap();
        let nodal = NodalLevelSet::sample(&Surface::unit_sphere(), &mesh).unwrap();
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let dofs = build_dofmaps(&mesh, &cut.classes).unwrap();
        let mc = mean_weights(&mesh, &cut, &dofs);
        let (_, area) = cut.measure(&mesh);
        assert!((mc.weights.iter().sum::<f64>() - area).abs() < 1e-12 * area);
        assert!((mc.total_area - area).abs() < 1e-12 * area);
    }
}
