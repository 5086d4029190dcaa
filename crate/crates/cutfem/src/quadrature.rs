//! Quadrature rules on reference simplices in barycentric coordinates.
//!
//! Weights sum to one; physical integrals multiply by the cell measure.

/// Rule on a triangle: barycentric points and weights.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Rule on a tetrahedron: barycentric points and weights.
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

/// Edge-midpoint rule, exact for polynomials of degree 2.
pub fn triangle_degree2() -> TriangleRule {
    TriangleRule {
        points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
        weights: vec![1.0 / 3.0; 3],
    }
}

/// Six-point Dunavant rule, exact for polynomials of degree 4.
pub fn triangle_degree4() -> TriangleRule {
    let mut points = Vec::with_capacity(6);
    let mut weights = Vec::with_capacity(6);
    for (a, w) in [
        (0.445948490915965, 0.223381589678011),
        (0.091576213509771, 0.109951743655322),
    ] {
        let b = 1.0 - 2.0 * a;
        points.push([a, a, b]);
        points.push([a, b, a]);
        points.push([b, a, a]);
        weights.extend_from_slice(&[w, w, w]);
    }
    TriangleRule { points, weights }
}

/// Centroid rule, exact for affine integrands.
pub fn tet_degree1() -> TetRule {
    TetRule {
        points: vec![[0.25; 4]],
        weights: vec![1.0],
    }
}

/// Keast fourteen-point rule, exact for polynomials of degree 5
/// (used wherever at least degree-4 exactness is required).
pub fn tet_degree5() -> TetRule {
    let mut points = Vec::with_capacity(14);
    let mut weights = Vec::with_capacity(14);
    for (a, w) in [
        (0.3108859192633005, 0.1126879257180162),
        (0.09273525031089123, 0.07349304311636194),
    ] {
        let b = 1.0 - 3.0 * a;
        points.push([a, a, a, b]);
        points.push([a, a, b, a]);
        points.push([a, b, a, a]);
        points.push([b, a, a, a]);
        weights.extend_from_slice(&[w; 4]);
    }
    let c = 0.04550370412564964;
    let d = 0.5 - c;
    let w = 0.04254602077708147;
    for p in [
        [c, c, d, d],
        [c, d, c, d],
        [c, d, d, c],
        [d, c, c, d],
        [d, c, d, c],
        [d, d, c, c],
    ] {
        points.push(p);
        weights.push(w);
    }
    TetRule { points, weights }
}
