//! Discrete-domain error norms, gauge alignment, estimated orders of
//! convergence and the geometry-assumption measurements.
//!
//! Errors are integrated over the discrete domain and surface against the
//! extended exact solution. Both exact components are first shifted by the
//! kernel representative that gives the exact surface trace zero mean over
//! the discrete surface, matching the gauge the constrained solve imposes
//! on the discrete solution.

use crate::cut::{CutGeometry, ElementClass};
use crate::error::Result;
use crate::level_set::Surface;
use crate::mesh::{signed_volume, BackgroundMesh};
use crate::quadrature::{tet_degree5, triangle_degree4};
use crate::space::{barycentric, shape_gradients, DofMap};
use nalgebra::{Point3, Vector3};

/// Kernel shift subtracted from the exact fields before comparing with the
/// mean-zero discrete solution.
#[derive(Debug, Clone, Copy)]
pub struct GaugeShift {
    pub bulk: f64,
    pub surf: f64,
}

impl GaugeShift {
    pub fn none() -> Self {
        Self {
            bulk: 0.0,
            surf: 0.0,
        }
    }

    /// Shift `(b_surf t, b_bulk t)` with `t` chosen so the shifted exact
    /// surface trace has zero mean over the discrete surface.
    pub fn align(
        cut: &CutGeometry,
        exact_surf: &dyn Fn(&Point3<f64>) -> f64,
        b_bulk: f64,
        b_surf: f64,
    ) -> Self {
        let rule = triangle_degree4();
        let mut integral = 0.0;
        let mut area = 0.0;
        for cell in &cut.cells {
            for tri in &cell.surface {
                area += tri.area;
                for (bary, w) in rule.points.iter().zip(&rule.weights) {
                    let x = Point3::from(
                        tri.vertices[0].coords * bary[0]
                            + tri.vertices[1].coords * bary[1]
                            + tri.vertices[2].coords * bary[2],
                    );
                    integral += w * tri.area * exact_surf(&x);
                }
            }
        }
        let t = integral / (area * b_bulk);
        Self {
            bulk: b_surf * t,
            surf: b_bulk * t,
        }
    }
}

/// L2 and H1-seminorm errors of the bulk component over the discrete domain.
pub fn bulk_errors(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    dofs: &DofMap,
    u_bulk: &[f64],
    exact: &dyn Fn(&Point3<f64>) -> f64,
    exact_gradient: &dyn Fn(&Point3<f64>) -> Vector3<f64>,
    shift: f64,
) -> Result<(f64, f64)> {
    let rule = tet_degree5();
    let mut l2_sq = 0.0;
    let mut h1_sq = 0.0;
    for (t, class) in cut.classes.iter().enumerate() {
        if *class == ElementClass::Outside {
            continue;
        }
        let verts = mesh.tet_vertices(t);
        let grads = shape_gradients(&verts)?;
        let tet = mesh.tets[t];
        let nodal: Vec<f64> = tet
            .iter()
            .map(|&v| u_bulk[dofs.bulk_of_vertex[v].expect("bulk DOF present")])
            .collect();
        let grad_h: Vector3<f64> = (0..4).map(|i| grads[i] * nodal[i]).sum();

        let full = [verts];
        let regions: &[[Point3<f64>; 4]] = match class {
            ElementClass::Inside => &full,
            ElementClass::Cut => &cut.cells[cut.cell_of_tet[t].unwrap()].inside,
            ElementClass::Outside => unreachable!(),
        };
        for sub in regions {
            let vol = signed_volume(&sub[0], &sub[1], &sub[2], &sub[3]).abs();
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = Point3::from(
                    sub[0].coords * bary[0]
                        + sub[1].coords * bary[1]
                        + sub[2].coords * bary[2]
                        + sub[3].coords * bary[3],
                );
                let lam = barycentric(&verts, &grads, &x);
                let uh: f64 = (0..4).map(|i| nodal[i] * lam[i]).sum();
                let diff = exact(&x) - shift - uh;
                l2_sq += w * vol * diff * diff;
                let gdiff = exact_gradient(&x) - grad_h;
                h1_sq += w * vol * gdiff.norm_squared();
            }
        }
    }
    Ok((l2_sq.sqrt(), h1_sq.sqrt()))
}

/// L2 and tangential H1-seminorm errors of the surface component over the
/// discrete surface. Exact data are pulled back through the closest-point
/// map and the exact tangential gradient is projected onto the discrete
/// tangent plane before comparison.
pub fn surface_errors(
    mesh: &BackgroundMesh,
    cut: &CutGeometry,
    dofs: &DofMap,
    u_surf: &[f64],
    surface: &Surface,
    exact_trace: &dyn Fn(&Point3<f64>) -> f64,
    exact_tangential_gradient: &dyn Fn(&Point3<f64>) -> Vector3<f64>,
    shift: f64,
) -> Result<(f64, f64)> {
    let rule = triangle_degree4();
    let mut l2_sq = 0.0;
    let mut h1_sq = 0.0;
    for cell in &cut.cells {
        let verts = mesh.tet_vertices(cell.tet);
        let grads = shape_gradients(&verts)?;
        let tet = mesh.tets[cell.tet];
        let nodal: Vec<f64> = tet
            .iter()
            .map(|&v| u_surf[dofs.surf_of_vertex[v].expect("surface DOF present")])
            .collect();
        let n = cell.normal;
        let grad_full: Vector3<f64> = (0..4).map(|i| grads[i] * nodal[i]).sum();
        let grad_h = grad_full - n * n.dot(&grad_full);

        for tri in &cell.surface {
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = Point3::from(
                    tri.vertices[0].coords * bary[0]
                        + tri.vertices[1].coords * bary[1]
                        + tri.vertices[2].coords * bary[2],
                );
                let cp = surface.closest_point(&x)?;
                let lam = barycentric(&verts, &grads, &x);
                let uh: f64 = (0..4).map(|i| nodal[i] * lam[i]).sum();
                let diff = exact_trace(&cp) - shift - uh;
                l2_sq += w * tri.area * diff * diff;
                let ge = exact_tangential_gradient(&cp);
                let ge_proj = ge - n * n.dot(&ge);
                h1_sq += w * tri.area * (ge_proj - grad_h).norm_squared();
            }
        }
    }
    Ok((l2_sq.sqrt(), h1_sq.sqrt()))
}

/// Maxima of |signed distance| and |exact normal minus discrete normal|
/// over the surface quadrature points: the measurable forms of the two
/// geometry approximation assumptions.
pub fn geometry_assumption_report(cut: &CutGeometry, surface: &Surface) -> Result<(f64, f64)> {
    let rule = triangle_degree4();
    let mut rho_max: f64 = 0.0;
    let mut normal_dev: f64 = 0.0;
    for cell in &cut.cells {
        for tri in &cell.surface {
            for bary in &rule.points {
                let x = Point3::from(
                    tri.vertices[0].coords * bary[0]
                        + tri.vertices[1].coords * bary[1]
                        + tri.vertices[2].coords * bary[2],
                );
                rho_max = rho_max.max(surface.signed_distance(&x).abs());
                let cp = surface.closest_point(&x)?;
                let n_exact = surface.normal_at(&cp)?;
                normal_dev = normal_dev.max((n_exact - cell.normal).norm());
            }
        }
    }
    Ok((rho_max, normal_dev))
}

/// Pairwise estimated orders of convergence; the first entry is `None`.
pub fn eoc(hs: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(hs.len(), errors.len());
    let mut out = vec![None; hs.len()];
    for k in 1..hs.len() {
        if errors[k] > 0.0 && errors[k - 1] > 0.0 {
            out[k] = Some((errors[k - 1] / errors[k]).ln() / (hs[k - 1] / hs[k]).ln());
        }
    }
    out
}

/// Least-squares slope of `log error` against `log h` (the fitted order).
pub fn fit_order(hs: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(hs.len(), errors.len());
    assert!(hs.len() >= 2);
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::CutGeometry;
    use crate::level_set::NodalLevelSet;
    use crate::space::build_dofmaps;

    fn sphere_setup(h: f64) -> (BackgroundMesh, CutGeometry, DofMap) {
        let mesh = BackgroundMesh::build_box(
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            h,
        )
        .unwrap();
        let nodal = NodalLevelSet::sample(&Surface::unit_sphere(), &mesh).unwrap();
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let dofs = build_dofmaps(&mesh, &cut.classes).unwrap();
        (mesh, cut, dofs)
    }

    #[test]
    fn affine_interpolant_is_exact() {
        let (mesh, cut, dofs) = sphere_setup(0.5);
        let f = |p: &Point3<f64>| 0.4 * p.x - 0.9 * p.y + 0.2 * p.z + 1.0;
        let grad = Vector3::new(0.4, -0.9, 0.2);
        let u: Vec<f64> = dofs
            .bulk_vertices
            .iter()
            .map(|&v| f(&mesh.vertices[v]))
            .collect();
        let (l2, h1) = bulk_errors(&mesh, &cut, &dofs, &u, &f, &|_| grad, 0.0).unwrap();
        assert!(l2 < 1e-13, "L2 {l2}");
        assert!(h1 < 1e-13, "H1 {h1}");
    }

    #[test]
    fn constant_surface_error_vanishes_after_alignment() {
        let (mesh, cut, dofs) = sphere_setup(0.5);
        let surface = Surface::unit_sphere();
        let c = 3.7;
        let exact = |_: &Point3<f64>| c;
        // discrete zero function against exact constant: alignment removes it
        let u = vec![0.0; dofs.n_surf()];
        let shift = GaugeShift::align(&cut, &exact, 1.0, 1.0);
        assert!((shift.surf - c).abs() < 1e-12);
        let (l2, h1) =
            surface_errors(&mesh, &cut, &dofs, &u, &surface, &exact, &|_| Vector3::zeros(), shift.surf)
                .unwrap();
        assert!(l2 < 1e-12);
        assert!(h1 < 1e-12);
    }

    #[test]
    fn quadratic_interpolation_rates() {
        // nodal interpolation of x^2: L2 error order 2, H1 order 1
        let f = |p: &Point3<f64>| p.x * p.x;
        let grad = |p: &Point3<f64>| Vector3::new(2.0 * p.x, 0.0, 0.0);
        let mut hs = Vec::new();
        let mut l2s = Vec::new();
        let mut h1s = Vec::new();
        for h in [0.5, 0.25, 0.125] {
            let (mesh, cut, dofs) = sphere_setup(h);
            let u: Vec<f64> = dofs
                .bulk_vertices
                .iter()
                .map(|&v| f(&mesh.vertices[v]))
                .collect();
            let (l2, h1) = bulk_errors(&mesh, &cut, &dofs, &u, &f, &grad, 0.0).unwrap();
            hs.push(mesh.h);
            l2s.push(l2);
            h1s.push(h1);
        }
        let l2_order = fit_order(&hs, &l2s);
        let h1_order = fit_order(&hs, &h1s);
        assert!(l2_order > 1.8, "L2 order {l2_order}");
        assert!(h1_order > 0.9, "H1 order {h1_order}");
    }

    #[test]
    fn surface_interpolation_rate_for_linear_trace() {
        // exact u = x on the sphere: interpolant of the extension converges
        // at second order in L2 over the discrete surface
        let surface = Surface::unit_sphere();
        let trace = |p: &Point3<f64>| p.x;
        let tangential = move |p: &Point3<f64>| {
            let n = p.coords / p.coords.norm();
            let e = Vector3::new(1.0, 0.0, 0.0);
            e - n * n.dot(&e)
        };
        let mut hs = Vec::new();
        let mut l2s = Vec::new();
        for h in [0.5, 0.25, 0.125] {
            let (mesh, cut, dofs) = sphere_setup(h);
            let u: Vec<f64> = dofs
                .surf_vertices
                .iter()
                .map(|&v| {
                    let cp = surface.closest_point(&mesh.vertices[v]).unwrap();
                    trace(&cp)
                })
                .collect();
            let (l2, _) =
                surface_errors(&mesh, &cut, &dofs, &u, &surface, &trace, &tangential, 0.0).unwrap();
            hs.push(mesh.h);
            l2s.push(l2);
        }
        let order = fit_order(&hs, &l2s);
        assert!(order > 1.7, "surface L2 order {order}");
    }

    #[test]
    fn geometry_assumptions_hold_on_sphere() {
        let surface = Surface::unit_sphere();
        let mut hs = Vec::new();
        let mut rhos = Vec::new();
        let mut devs = Vec::new();
        for h in [0.5, 0.25, 0.125] {
            let (mesh, cut, _) = sphere_setup(h);
            let (rho, dev) = geometry_assumption_report(&cut, &surface).unwrap();
            hs.push(mesh.h);
            rhos.push(rho);
            devs.push(dev);
        }
        // distance bounded by h^2 with the observed constant near 1/(2r)
        assert!(rhos[0] <= hs[0] * hs[0]);
        let rho_order = fit_order(&hs, &rhos);
        let dev_order = fit_order(&hs, &devs);
        assert!(rho_order > 1.8, "distance order {rho_order}");
        assert!(dev_order > 0.9, "normal order {dev_order}");
    }

    #[test]
    fn plane_level_set_is_reproduced_exactly() {
        // a half-space test surface: the linear level set is reproduced by
        // the piecewise-linear interpolant, so the distance residual vanishes
        let mesh = BackgroundMesh::build_box(
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            0.5,
        )
        .unwrap();
        // plane z = 0.1 as nodal data (avoids vertex hits)
        let nodal = NodalLevelSet {
            values: mesh.vertices.iter().map(|v| v.z - 0.1).collect(),
        };
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let rule = triangle_degree4();
        let mut max_res: f64 = 0.0;
        for cell in &cut.cells {
            for tri in &cell.surface {
                for bary in &rule.points {
                    let x = Point3::from(
                        tri.vertices[0].coords * bary[0]
                            + tri.vertices[1].coords * bary[1]
                            + tri.vertices[2].coords * bary[2],
                    );
                    max_res = max_res.max((x.z - 0.1).abs());
                }
            }
        }
        assert!(max_res < 1e-13, "plane residual {max_res}");
    }

    #[test]
    fn eoc_and_fit_order_formulas() {
        let hs = [0.4, 0.2, 0.1];
        let errors = [0.16, 0.04, 0.01];
        let rates = eoc(&hs, &errors);
        assert!(rates[0].is_none());
        assert!((rates[1].unwrap() - 2.0).abs() < 1e-12);
        assert!((rates[2].unwrap() - 2.0).abs() < 1e-12);
        assert!((fit_order(&hs, &errors) - 2.0).abs() < 1e-12);
    }
}
