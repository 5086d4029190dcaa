//! Structured tetrahedral background mesh of a box domain.
//!
//! The mesh is a uniform lattice of box cells, each split into six
//! tetrahedra by the Kuhn (Freudenthal) subdivision around the cell's main
//! diagonal. All cells carry the identical split, so face triangulations of
//! adjacent cells match without parity alternation.

use crate::error::{CutFemError, Result};
use nalgebra::{Matrix3, Point3, Vector3};

/// The six axis permutations of the Kuhn subdivision, each with its parity.
/// A cell vertex is addressed by offsets `(dx, dy, dz)`; the tetrahedron of
/// permutation `p` is the path `0 -> e_p0 -> e_p0 + e_p1 -> (1,1,1)`.
const KUHN_PERMUTATIONS: [([usize; 3], bool); 6] = [
    ([0, 1, 2], true),
    ([1, 2, 0], true),
    ([2, 0, 1], true),
    ([0, 2, 1], false),
    ([2, 1, 0], false),
    ([1, 0, 2], false),
];

/// A mesh face: sorted vertex triple with its one or two incident tets.
#[derive(Debug, Clone)]
pub struct Face {
    /// Vertex indices, sorted ascending.
    pub vertices: [usize; 3],
    pub owner: usize,
    /// `None` marks a boundary face.
    pub neighbor: Option<usize>,
    pub area: f64,
    /// Unit normal pointing from owner towards neighbor (outward on the boundary).
    pub normal: Vector3<f64>,
}

/// Background tetrahedral partition of the box that embeds the physical domain.
#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    pub vertices: Vec<Point3<f64>>,
    /// Positively oriented vertex index quadruples.
    pub tets: Vec<[usize; 4]>,
    pub faces: Vec<Face>,
    /// Mesh parameter: the largest lattice spacing across the three axes.
    pub h: f64,
    origin: Point3<f64>,
    spacing: Vector3<f64>,
    cells: [usize; 3],
}

impl BackgroundMesh {
    /// Builds the structured mesh of the box `[origin, origin + extents]`.
    ///
    /// Each axis is divided into `ceil(extent / h)` cells so the lattice
    /// spacing never exceeds the requested `h`; the realized spacing is
    /// recorded as the mesh parameter. Vertex coordinates are computed from
    /// integer lattice indices for bitwise reproducibility.
    pub fn build_box(origin: Point3<f64>, extents: Vector3<f64>, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(CutFemError::InvalidArgument(format!(
                "mesh parameter h must be positive, got {h}"
            )));
        }
        if extents.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(CutFemError::InvalidArgument(format!(
                "box extents must be positive, got {extents:?}"
            )));
        }

        let cells = [
            (extents.x / h).ceil().max(1.0) as usize,
            (extents.y / h).ceil().max(1.0) as usize,
            (extents.z / h).ceil().max(1.0) as usize,
        ];
        let spacing = Vector3::new(
            extents.x / cells[0] as f64,
            extents.y / cells[1] as f64,
            extents.z / cells[2] as f64,
        );
        let np = [cells[0] + 1, cells[1] + 1, cells[2] + 1];

        let mut vertices = Vec::with_capacity(np[0] * np[1] * np[2]);
        for k in 0..np[2] {
            for j in 0..np[1] {
                for i in 0..np[0] {
                    vertices.push(Point3::new(
                        origin.x + i as f64 * spacing.x,
                        origin.y + j as f64 * spacing.y,
                        origin.z + k as f64 * spacing.z,
                    ));
                }
            }
        }

        let vid = |i: usize, j: usize, k: usize| i + np[0] * (j + np[1] * k);
        let mut tets = Vec::with_capacity(6 * cells[0] * cells[1] * cells[2]);
        for k in 0..cells[2] {
            for j in 0..cells[1] {
                for i in 0..cells[0] {
                    for (perm, even) in KUHN_PERMUTATIONS {
                        let mut off = [[0usize; 3]; 4];
                        for step in 0..3 {
                            off[step + 1] = off[step];
                            off[step + 1][perm[step]] = 1;
                        }
                        let mut tet = [
                            vid(i + off[0][0], j + off[0][1], k + off[0][2]),
                            vid(i + off[1][0], j + off[1][1], k + off[1][2]),
                            vid(i + off[2][0], j + off[2][1], k + off[2][2]),
                            vid(i + off[3][0], j + off[3][1], k + off[3][2]),
                        ];
                        if !even {
                            tet.swap(1, 2);
                        }
                        tets.push(tet);
                    }
                }
            }
        }

        let faces = face_table(&vertices, &tets)?;
        let mesh = Self {
            vertices,
            tets,
            faces,
            h: spacing.max(),
            origin,
            spacing,
            cells,
        };
        mesh.check_orientation()?;
        Ok(mesh)
    }

    /// Builds a mesh from explicit vertices and tets (small hand-made meshes
    /// in tests and tools). Orientation is fixed up where needed.
    pub fn from_parts(vertices: Vec<Point3<f64>>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        if vertices.is_empty() || tets.is_empty() {
            return Err(CutFemError::InvalidArgument(
                "mesh needs at least one vertex and one tet".into(),
            ));
        }
        for tet in &mut tets {
            let vol = signed_volume(
                &vertices[tet[0]],
                &vertices[tet[1]],
                &vertices[tet[2]],
                &vertices[tet[3]],
            );
            if vol == 0.0 {
                return Err(CutFemError::DegenerateElement(format!(
                    "zero-volume tet {tet:?}"
                )));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        let mut h: f64 = 0.0;
        for tet in &tets {
            for a in 0..4 {
                for b in (a + 1)..4 {
                    h = h.max((vertices[tet[a]] - vertices[tet[b]]).norm());
                }
            }
        }
        let faces = face_table(&vertices, &tets)?;
        Ok(Self {
            vertices,
            tets,
            faces,
            h,
            origin: Point3::origin(),
            spacing: Vector3::zeros(),
            cells: [0; 3],
        })
    }

    pub fn tet_vertices(&self, t: usize) -> [Point3<f64>; 4] {
        let tet = self.tets[t];
        [
            self.vertices[tet[0]],
            self.vertices[tet[1]],
            self.vertices[tet[2]],
            self.vertices[tet[3]],
        ]
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_vertices(t);
        signed_volume(&a, &b, &c, &d)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    /// Index of the tet containing `x`, or `None` outside the box.
    /// Only available for lattice-built meshes.
    pub fn locate(&self, x: &Point3<f64>) -> Option<usize> {
        if self.cells[0] == 0 {
            return None;
        }
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let rel = x - self.origin;
        for d in 0..3 {
            let s = rel[d] / self.spacing[d];
            if !(-1e-12..=self.cells[d] as f64 + 1e-12).contains(&s) {
                return None;
            }
            let c = (s.floor() as isize).clamp(0, self.cells[d] as isize - 1) as usize;
            cell[d] = c;
            frac[d] = (s - c as f64).clamp(0.0, 1.0);
        }
        // Kuhn tet of permutation p holds points with frac[p0] >= frac[p1] >= frac[p2].
        let local = KUHN_PERMUTATIONS
            .iter()
            .position(|(p, _)| frac[p[0]] >= frac[p[1]] && frac[p[1]] >= frac[p[2]])
            .expect("descending permutation always exists");
        let cube = cell[0] + self.cells[0] * (cell[1] + self.cells[1] * cell[2]);
        Some(6 * cube + local)
    }

    fn check_orientation(&self) -> Result<()> {
        for t in 0..self.tets.len() {
            if self.tet_volume(t) <= 0.0 {
                return Err(CutFemError::Internal(format!(
                    "tet {t} is not positively oriented"
                )));
            }
        }
        Ok(())
    }
}

/// Signed volume of the tet `(a, b, c, d)`.
pub fn signed_volume(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>, d: &Point3<f64>) -> f64 {
    Matrix3::from_columns(&[b - a, c - a, d - a]).determinant() / 6.0
}

/// Area and (unoriented) unit normal of a triangle.
pub fn triangle_area_normal(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (f64, Vector3<f64>) {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len == 0.0 {
        (0.0, Vector3::zeros())
    } else {
        (0.5 * len, n / len)
    }
}

/// Builds the face adjacency table: every unordered vertex triple shared by
/// two tets is listed once with both owners; boundary faces are flagged.
pub fn face_table(vertices: &[Point3<f64>], tets: &[[usize; 4]]) -> Result<Vec<Face>> {
    // (sorted triple, tet, local opposite vertex)
    let mut slots: Vec<([usize; 3], usize, usize)> = Vec::with_capacity(4 * tets.len());
    for (t, tet) in tets.iter().enumerate() {
        for skip in 0..4 {
            let mut tri = [0usize; 3];
            let mut w = 0;
            for (local, &v) in tet.iter().enumerate() {
                if local != skip {
                    tri[w] = v;
                    w += 1;
                }
            }
            tri.sort_unstable();
            slots.push((tri, t, tet[skip]));
        }
    }
    slots.sort_unstable();

    let mut faces = Vec::with_capacity(slots.len() / 2 + tets.len());
    let mut i = 0;
    while i < slots.len() {
        let mut j = i + 1;
        while j < slots.len() && slots[j].0 == slots[i].0 {
            j += 1;
        }
        let count = j - i;
        if count > 2 {
            return Err(CutFemError::Topology(format!(
                "face {:?} is shared by {count} tets",
                slots[i].0
            )));
        }
        let (tri, owner, opposite) = slots[i];
        let neighbor = if count == 2 { Some(slots[i + 1].1) } else { None };
        let (area, mut normal) = triangle_area_normal(
            &vertices[tri[0]],
            &vertices[tri[1]],
            &vertices[tri[2]],
        );
        if area == 0.0 {
            return Err(CutFemError::DegenerateElement(format!(
                "zero-area face {tri:?}"
            )));
        }
        // orient away from the owner's interior
        if normal.dot(&(vertices[opposite] - vertices[tri[0]])) > 0.0 {
            normal = -normal;
        }
        faces.push(Face {
            vertices: tri,
            owner,
            neighbor,
            area,
            normal,
        });
        i = j;
    }
    Ok(faces)
}
