// debug: discrete measures vs Monte Carlo on the P1 interpolant
use cutfem::cut::CutGeometry;
use cutfem::level_set::{NodalLevelSet, Surface};
use cutfem::mesh::BackgroundMesh;
use cutfem::space::{barycentric, shape_gradients};
use nalgebra::{Point3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() {
    for h in [0.75, 0.5, 0.375, 0.25] {
        let mesh = BackgroundMesh::build_box(
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            h,
        )
        .unwrap();
        let nodal = NodalLevelSet::sample(&Surface::unit_sphere(), &mesh).unwrap();
        let cut = CutGeometry::build(&mesh, &nodal).unwrap();
        let (vol, area) = cut.measure(&mesh);

        // MC estimate of the volume where the P1 interpolant is negative
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = 0usize;
        let n = 400_000;
        for _ in 0..n {
            let p = Point3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            if let Some(t) = mesh.locate(&p) {
                let verts = mesh.tet_vertices(t);
                let grads = shape_gradients(&verts).unwrap();
                let lam = barycentric(&verts, &grads, &p);
                let tet = mesh.tets[t];
                let phi: f64 = (0..4).map(|i| cut.snapped[tet[i]] * lam[i]).sum();
                if phi < 0.0 {
                    hits += 1;
                }
            }
        }
        let mc_vol = 27.0 * hits as f64 / n as f64;
        println!(
            "h={:7.4} vol={:.6} mc_vol={:.6} area={:.6}  (exact 4.18879 / 12.56637)",
            mesh.h, vol, mc_vol, area
        );
    }
}
