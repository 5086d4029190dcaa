//! Assembly of the stabilized symmetric system.
//!
//! Global unknowns are ordered bulk DOFs first, then surface DOFs. All
//! element contributions are pushed in element index order and merged with a
//! stable sort, so the assembled matrix is reproducible bit for bit and
//! symmetric exactly (mirrored entries receive identical floating point
//! values in identical order).

use crate::cut::{CutGeometry, ElementClass, StabilizedFaceSets};
use crate::error::{CutFemError, Result};
use crate::mesh::BackgroundMesh;
use crate::quadrature::{tet_degree5, triangle_degree4, triangle_degree2};
use crate::space::{barycentric, shape_gradients, DofMap, MeanConstraint};
use crate::sparse::CsrMatrix;
use nalgebra::{Point3, Vector3};

/// Physical and stabilization constants of the model.
#[derive(Debug, Clone, Copy)]
pub struct ModelCoefficients {
    pub k_bulk: f64,
    pub k_surf: f64,
    pub b_bulk: f64,
    pub b_surf: f64,
    pub tau_bulk: f64,
    pub tau_surf: f64,
}

impl Default for ModelCoefficients {
    fn default() -> Self {
        Self {
            k_bulk: 1.0,
            k_surf: 1.0,
            b_bulk: 1.0,
            b_surf: 1.0,
            tau_bulk: 1e-2,
            tau_surf: 1e-2,
        }
    }
}

impl ModelCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_bulk", self.k_bulk),
            ("k_surf", self.k_surf),
            ("b_bulk", self.b_bulk),
            ("b_surf", self.b_surf),
            ("tau_bulk", self.tau_bulk),
            ("tau_surf", self.tau_surf),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CutFemError::InvalidArgument(format!(
                    "coefficient {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Allows `tau = 0` for the diagnostic unstabilized mode.
    pub fn validate_allow_zero_tau(&self) -> Result<()> {
        for (name, v) in [
            ("k_bulk", self.k_bulk),
            ("k_surf", self.k_surf),
            ("b_bulk", self.b_bulk),
            ("b_surf", self.b_surf),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CutFemError::InvalidArgument(format!(
                    "coefficient {name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("tau_bulk", self.tau_bulk), ("tau_surf", self.tau_surf)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CutFemError::InvalidArgument(format!(
                    "coefficient {name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Assembled symmetric operator with right-hand side, constraint row and
/// the surface scaling data.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub n_bulk: usize,
    pub n_surf: usize,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Mean-zero constraint weights embedded as a full-length vector
    /// (zero on the bulk block).
    pub constraint: Vec<f64>,
    pub coeffs: ModelCoefficients,
    pub h: f64,
    /// Measure of the discrete surface.
    pub area: f64,
    /// Measure of the discrete domain.
    pub volume: f64,
}

impl AssembledSystem {
    pub fn n_total(&self) -> usize {
        self.n_bulk + self.n_surf
    }

    /// Analytic kernel of the unscaled operator: constants `(b_surf, b_bulk)`.
    pub fn kernel_vector(&self) -> Vec<f64> {
        let mut z = vec![self.coeffs.b_surf; self.n_total()];
        z[self.n_bulk..].fill(self.coeffs.b_bulk);
        z
    }

    /// Diagonal of the preconditioning scaling: identity on the bulk block,
    /// `sqrt(h)` on the surface block.
    pub fn scaling_diagonal(&self) -> Vec<f64> {
        let mut d = vec![1.0; self.n_total()];
        d[self.n_bulk..].fill(self.h.sqrt());
        d
    }

    /// Scaled operator `D A D`; the solution transforms as `u = D v`.
    pub fn scaled_matrix(&self) -> CsrMatrix {
        self.matrix.scale_symmetric(&self.scaling_diagonal())
    }

    /// Kernel of the scaled operator, `D^{-1} z`.
    pub fn scaled_kernel(&self) -> Vec<f64> {
        let d = self.scaling_diagonal();
        self.kernel_vector()
            .iter()
            .zip(&d)
            .map(|(z, s)| z / s)
            .collect()
    }
}

type Triplets = Vec<(usize, usize, f64)>;

fn push_symmetric(out: &mut Triplets, dofs: &[usize], local: &[[f64; 4]; 4], n: usize) {
    for a in 0..n {
        for b in a..n {
            let v = local[a][b];
            if v != 0.0 {
                out.push((dofs[a], dofs[b], v));
                if a != b {
                    out.push((dofs[b], dofs[a], v));
                }
            }
        }
    }
}

/// Bulk stiffness: gradient-gradient terms over the discrete domain, using
/// the parent tet's constant shape gradients on every sub-cell (one-point
/// quadrature is exact).
pub fn assemble_bulk_stiffness(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    dofs: &DofMap,
    coeffs: &ModelCoefficients,
) -> Result<Triplets> {
    let scale = coeffs.b_bulk * coeffs.k_bulk;
    let mut out = Triplets::new();
    for (t, class) in cut.classes.iter().enumerate() {
        if *class == ElementClass::Outside {
            continue;
        }
        let verts = mesh.tet_vertices(t);
        let grads = shape_gradients(&verts)?;
        let volume = match class {
            ElementClass::Inside => mesh.tet_volume(t),
            ElementClass::Cut => {
                let cell = &cut.cells[cut.cell_of_tet[t].expect("cut tet has a cell")];
                cell.inside
                    .iter()
                    .map(|s| crate::mesh::signed_volume(&s[0], &s[1], &s[2], &s[3]).abs())
                    .sum()
            }
            ElementClass::Outside => unreachable!(),
        };
        let mut local = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let v = scale * volume * grads[a].dot(&grads[b]);
                local[a][b] = v;
                local[b][a] = v;
            }
        }
        let gdofs: Vec<usize> = mesh.tets[t]
            .iter()
            .map(|&v| {
                dofs.bulk_of_vertex[v].ok_or_else(|| {
                    CutFemError::Internal(format!("bulk DOF missing for vertex {v}"))
                })
            })
            .collect::<Result<_>>()?;
        push_symmetric(&mut out, &gdofs, &local, 4);
    }
    Ok(out)
}

/// Surface stiffness: tangential gradient terms over the discrete surface,
/// with the tangential projection of each triangle's own normal.
pub fn assemble_surface_stiffness(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    dofs: &DofMap,
    coeffs: &ModelCoefficients,
) -> Result<Triplets> {
    let scale = coeffs.b_surf * coeffs.k_surf;
    let offset = dofs.n_bulk();
    let mut out = Triplets::new();
    for cell in &cut.cells {
        if (cell.normal.norm() - 1.0).abs() > 1e-12 {
            return Err(CutFemError::Internal(format!(
                "non-unit surface normal on tet {}",
                cell.tet
            )));
        }
        let verts = mesh.tet_vertices(cell.tet);
        let grads = shape_gradients(&verts)?;
        let n = cell.normal;
        let tangential: Vec<Vector3<f64>> =
            grads.iter().map(|g| g - n * n.dot(g)).collect();
        let area: f64 = cell.surface.iter().map(|s| s.area).sum();
        let mut local = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let v = scale * area * tangential[a].dot(&tangential[b]);
                local[a][b] = v;
                local[b][a] = v;
            }
        }
        let gdofs: Vec<usize> = mesh.tets[cell.tet]
            .iter()
            .map(|&v| {
                dofs.surf_of_vertex[v]
                    .map(|d| offset + d)
                    .ok_or_else(|| {
                        CutFemError::Internal(format!("surface DOF missing for vertex {v}"))
                    })
            })
            .collect::<Result<_>>()?;
        push_symmetric(&mut out, &gdofs, &local, 4);
    }
    Ok(out)
}

/// Coupling term: the mass-type form of the flux condition over the
/// discrete surface, filling all four blocks with signs
/// `(+b_bulk^2, -b_bulk b_surf, -b_bulk b_surf, +b_surf^2)`.
/// An edge-midpoint rule integrates the quadratic trace products exactly.
pub fn assemble_coupling(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    dofs: &DofMap,
    coeffs: &ModelCoefficients,
) -> Result<Triplets> {
    let rule = triangle_degree2();
    let offset = dofs.n_bulk();
    let (bb, bs) = (coeffs.b_bulk, coeffs.b_surf);
    let mut out = Triplets::new();
    for cell in &cut.cells {
        let verts = mesh.tet_vertices(cell.tet);
        let grads = shape_gradients(&verts)?;
        let tet = mesh.tets[cell.tet];

        // triangle mass matrix of the parent P1 traces
        let mut mass = [[0.0; 4]; 4];
        for tri in &cell.surface {
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = Point3::from(
                    tri.vertices[0].coords * bary[0]
                        + tri.vertices[1].coords * bary[1]
                        + tri.vertices[2].coords * bary[2],
                );
                let lam = barycentric(&verts, &grads, &x);
                let scale = w * tri.area;
                for a in 0..4 {
                    for b in a..4 {
                        let v = scale * lam[a] * lam[b];
                        mass[a][b] += v;
                        if a != b {
                            mass[b][a] += v;
                        }
                    }
                }
            }
        }

        let bulk: Vec<usize> = tet
            .iter()
            .map(|&v| dofs.bulk_of_vertex[v].expect("cut tet vertex has bulk DOF"))
            .collect();
        let surf: Vec<usize> = tet
            .iter()
            .map(|&v| offset + dofs.surf_of_vertex[v].expect("cut tet vertex has surface DOF"))
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let m = mass[a][b];
                if m == 0.0 {
                    continue;
                }
                out.push((bulk[a], bulk[b], bb * bb * m));
                out.push((surf[a], surf[b], bs * bs * m));
                out.push((bulk[a], surf[b], -bb * bs * m));
                out.push((surf[b], bulk[a], -bb * bs * m));
            }
        }
    }
    Ok(out)
}

/// Ghost penalty: normal-gradient jumps over the stabilized face sets. The
/// jump of a P1 gradient is constant on a face, so the face integral is the
/// face area times the product of jumps. Bulk faces are weighted by
/// `tau_bulk h^3`, surface faces by `tau_surf`.
pub fn assemble_ghost_penalty(
    mesh: &BackgroundMesh,
    face_sets: &StabilizedFaceSets,
    dofs: &DofMap,
    coeffs: &ModelCoefficients,
    h: f64,
) -> Result<Triplets> {
    let mut out = Triplets::new();
    let mut add_faces = |faces: &[usize], weight: f64, to_surface: bool| -> Result<()> {
        for &f in faces {
            let face = &mesh.faces[f];
            let neighbor = face.neighbor.ok_or_else(|| {
                CutFemError::Topology(format!("stabilized face {f} has one neighbor"))
            })?;
            // jump coefficients per involved vertex: owner minus neighbor side
            let mut vertex_coeff: Vec<(usize, f64)> = Vec::with_capacity(5);
            let mut accumulate = |tet_idx: usize, sign: f64| -> Result<()> {
                let verts = mesh.tet_vertices(tet_idx);
                let grads = shape_gradients(&verts)?;
                for (local, &v) in mesh.tets[tet_idx].iter().enumerate() {
                    let c = sign * face.normal.dot(&grads[local]);
                    match vertex_coeff.iter_mut().find(|(vv, _)| *vv == v) {
                        Some((_, acc)) => *acc += c,
                        None => vertex_coeff.push((v, c)),
                    }
                }
                Ok(())
            };
            accumulate(face.owner, 1.0)?;
            accumulate(neighbor, -1.0)?;

            let gdof = |v: usize| -> Result<usize> {
                if to_surface {
                    dofs.surf_of_vertex[v]
                        .map(|d| dofs.n_bulk() + d)
                        .ok_or_else(|| {
                            CutFemError::Internal(format!("surface DOF missing for vertex {v}"))
                        })
                } else {
                    dofs.bulk_of_vertex[v].ok_or_else(|| {
                        CutFemError::Internal(format!("bulk DOF missing for vertex {v}"))
                    })
                }
            };
            for a in 0..vertex_coeff.len() {
                let (va, ca) = vertex_coeff[a];
                let da = gdof(va)?;
                for b in a..vertex_coeff.len() {
                    let (vb, cb) = vertex_coeff[b];
                    let v = weight * face.area * ca * cb;
                    if v != 0.0 {
                        let db = gdof(vb)?;
                        out.push((da, db, v));
                        if a != b {
                            out.push((db, da, v));
                        }
                    }
                }
            }
        }
        Ok(())
    };
    add_faces(&face_sets.bulk_faces, coeffs.tau_bulk * h * h * h, false)?;
    add_faces(&face_sets.surf_faces, coeffs.tau_surf, true)?;
    Ok(out)
}

/// Load vector. The data functions are evaluated exactly at the quadrature
/// points: a degree-five simplex rule over the inside sub-cells and a
/// degree-four triangle rule over the surface triangles (the surface datum
/// is evaluated through its closest-point composition supplied by the caller).
pub fn assemble_rhs(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    dofs: &DofMap,
    coeffs: &ModelCoefficients,
    f_bulk: &dyn Fn(&Point3<f64>) -> f64,
    f_surf: &dyn Fn(&Point3<f64>) -> f64,
) -> Result<Vec<f64>> {
    let tet_rule = tet_degree5();
    let tri_rule = triangle_degree4();
    let mut rhs = vec![0.0; dofs.n_bulk() + dofs.n_surf()];

    for (t, class) in cut.classes.iter().enumerate() {
        if *class == ElementClass::Outside {
            continue;
        }
        let verts = mesh.tet_vertices(t);
        let grads = shape_gradients(&verts)?;
        let tet = mesh.tets[t];
        let full = [verts];
        let regions: &[[Point3<f64>; 4]] = match class {
            ElementClass::Inside => &full,
            ElementClass::Cut => &cut.cells[cut.cell_of_tet[t].unwrap()].inside,
            ElementClass::Outside => unreachable!(),
        };
        for sub in regions {
            let vol = crate::mesh::signed_volume(&sub[0], &sub[1], &sub[2], &sub[3]).abs();
            if vol == 0.0 {
                continue;
            }
            for (bary, w) in tet_rule.points.iter().zip(&tet_rule.weights) {
                let x = Point3::from(
                    sub[0].coords * bary[0]
                        + sub[1].coords * bary[1]
                        + sub[2].coords * bary[2]
                        + sub[3].coords * bary[3],
                );
                let fx = coeffs.b_bulk * w * vol * f_bulk(&x);
                let lam = barycentric(&verts, &grads, &x);
                for local in 0..4 {
                    let dof = dofs.bulk_of_vertex[tet[local]].ok_or_else(|| {
                        CutFemError::Internal(format!("bulk DOF missing for vertex {}", tet[local]))
                    })?;
                    rhs[dof] += fx * lam[local];
                }
            }
        }
    }

    let offset = dofs.n_bulk();
    for cell in &cut.cells {
        let verts = mesh.tet_vertices(cell.tet);
        let grads = shape_gradients(&verts)?;
        let tet = mesh.tets[cell.tet];
        for tri in &cell.surface {
            for (bary, w) in tri_rule.points.iter().zip(&tri_rule.weights) {
                let x = Point3::from(
                    tri.vertices[0].coords * bary[0]
                        + tri.vertices[1].coords * bary[1]
                        + tri.vertices[2].coords * bary[2],
                );
                let fx = coeffs.b_surf * w * tri.area * f_surf(&x);
                let lam = barycentric(&verts, &grads, &x);
                for local in 0..4 {
                    let dof = dofs.surf_of_vertex[tet[local]].ok_or_else(|| {
                        CutFemError::Internal(format!(
                            "surface DOF missing for vertex {}",
                            tet[local]
                        ))
                    })?;
                    rhs[offset + dof] += fx * lam[local];
                }
            }
        }
    }
    Ok(rhs)
}

/// Assembles the full system: stiffness blocks, coupling, ghost penalties,
/// load vector and the embedded mean-zero constraint.
#[allow(clippy::too_many_arguments)]
pub fn assemble_system(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    face_sets: &StabilizedFaceSets,
    dofs: &DofMap,
    constraint: &MeanConstraint,
    coeffs: &ModelCoefficients,
    f_bulk: &dyn Fn(&Point3<f64>) -> f64,
    f_surf: &dyn Fn(&Point3<f64>) -> f64,
) -> Result<AssembledSystem> {
    coeffs.validate_allow_zero_tau()?;
    let n = dofs.n_bulk() + dofs.n_surf();

    let mut triplets = assemble_bulk_stiffness(mesh, cut, dofs, coeffs)?;
    triplets.extend(assemble_surface_stiffness(mesh, cut, dofs, coeffs)?);
    triplets.extend(assemble_coupling(mesh, cut, dofs, coeffs)?);
    triplets.extend(assemble_ghost_penalty(mesh, face_sets, dofs, coeffs, mesh.h)?);
    let matrix = CsrMatrix::from_triplets(n, n, triplets);

    let rhs = assemble_rhs(mesh, cut, dofs, coeffs, f_bulk, f_surf)?;

    if matrix.values.iter().any(|v| !v.is_finite()) {
        return Err(CutFemError::NonFinite {
            stage: "assembly",
            detail: "non-finite matrix entry".into(),
        });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(CutFemError::NonFinite {
            stage: "assembly",
            detail: "non-finite right-hand side entry".into(),
        });
    }

    let mut full_constraint = vec![0.0; n];
    full_constraint[dofs.n_bulk()..].copy_from_slice(&constraint.weights);

    let (volume, area) = cut.measure(mesh);
    Ok(AssembledSystem {
        n_bulk: dofs.n_bulk(),
        n_surf: dofs.n_surf(),
        matrix,
        rhs,
        constraint: full_constraint,
        coeffs: *coeffs,
        h: mesh.h,
        area,
        volume,
    })
}

/// Quadratic form `x^T A x` of a CSR matrix.
pub fn quadratic_form(matrix: &CsrMatrix, x: &[f64]) -> f64 {
    let mut y = vec![0.0; matrix.n_rows];
    matrix.matvec(x, &mut y);
    x.iter().zip(&y).map(|(a, b)| a * b).sum()
}
