//! Legacy ASCII VTK export of the background mesh and the discrete surface.

use crate::cut::CutGeometry;
use crate::error::Result;
use crate::mesh::BackgroundMesh;
use nalgebra::Point3;
use std::io::Write;
use std::path::Path;

const HEADER: &str = "# vtk DataFile Version 3.0";

fn write_points(out: &mut impl Write, points: &[Point3<f64>]) -> std::io::Result<()> {
    writeln!(out, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn write_scalars(out: &mut impl Write, name: &str, data: &[f64]) -> std::io::Result<()> {
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in data {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Writes the tetrahedral mesh (cell type 10) with optional per-vertex
/// scalar fields.
pub fn write_mesh_vtk(
    path: &Path,
    mesh: &BackgroundMesh,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{HEADER}")?;
    writeln!(out, "background mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    write_points(&mut out, &mesh.vertices)?;
    writeln!(out, "CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len())?;
    for tet in &mesh.tets {
        writeln!(out, "4 {} {} {} {}", tet[0], tet[1], tet[2], tet[3])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.tets.len())?;
    for _ in &mesh.tets {
        writeln!(out, "10")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.vertices.len())?;
        for (name, data) in fields {
            write_scalars(&mut out, name, data)?;
        }
    }
    Ok(())
}

/// Writes the discrete surface triangles (cell type 5) with an optional
/// scalar sampled at the triangle vertices.
pub fn write_surface_vtk(
    path: &Path,
    cut: &CutGeometry,
    field: Option<(&str, &dyn Fn(usize, &Point3<f64>) -> f64)>,
) -> Result<()> {
    let mut points = Vec::new();
    let mut tris = Vec::new();
    let mut values = Vec::new();
    for cell in &cut.cells {
        for tri in &cell.surface {
            let base = points.len();
            for v in &tri.vertices {
                points.push(*v);
                if let Some((_, f)) = field {
                    values.push(f(cell.tet, v));
                }
            }
            tris.push([base, base + 1, base + 2]);
        }
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{HEADER}")?;
    writeln!(out, "discrete surface")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    write_points(&mut out, &points)?;
    writeln!(out, "CELLS {} {}", tris.len(), 4 * tris.len())?;
    for t in &tris {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {}", tris.len())?;
    for _ in &tris {
        writeln!(out, "5")?;
    }
    if let Some((name, _)) = field {
        writeln!(out, "POINT_DATA {}", points.len())?;
        write_scalars(&mut out, name, &values)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level_set::{NodalLevelSet, Surface};
    use nalgebra::Vector3;

    #[test]
    fn vtk_files_have_legacy_headers_and_cell_types() {
        let mesh = BackgroundMesh::build_box(
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            0.75,
        )
        .unwrap();
        let nodal = NodalLevelSet::sample(&Surface::unit_sphere(), &mesh).unwrap();
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("mesh.vtk");
        write_mesh_vtk(&mesh_path, &mesh, &[("levelset", &nodal.values)]).unwrap();
        let text = std::fs::read_to_string(&mesh_path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("CELL_TYPES"));
        assert!(text.lines().any(|l| l == "10"));
        assert!(text.contains("SCALARS levelset double 1"));

        let surf_path = dir.path().join("surface.vtk");
        write_surface_vtk(&surf_path, &cut, Some(("xcoord", &|_, p| p.x))).unwrap();
        let text = std::fs::read_to_string(&surf_path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.lines().any(|l| l == "5"));
        assert!(text.contains("SCALARS xcoord double 1"));
    }
}
