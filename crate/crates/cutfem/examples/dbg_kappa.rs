// debug: lambda_max / lambda_min scaling of the rescaled operator
use cutfem::problem::ManufacturedProblem;
use cutfem::solver::{condition_number, CondMethod};
use cutfem::study::solve_manufactured_level;
use cutfem::assembly::ModelCoefficients;
use nalgebra::{Point3, Vector3};

fn main() {
    let problem = ManufacturedProblem::standard();
    let coeffs = ModelCoefficients::default();
    println!("      h        N     lam_max      lam_2        kappa     kappa*h^2");
    for h in [0.75, 0.5, 0.375, 0.25, 0.1875, 0.13125, 0.125] {
        let art = solve_manufactured_level(
            &problem,
            Point3::new(-1.5, -1.5, -1.5),
            Vector3::new(3.0, 3.0, 3.0),
            h,
            &coeffs,
        )
        .unwrap();
        let scaled = art.system.scaled_matrix();
        let kernel = art.system.scaled_kernel();
        let est = condition_number(&scaled, &kernel, CondMethod::Dense).unwrap();
        println!(
            "{:9.5} {:7} {:.5e} {:.5e} {:.5e} {:.4}",
            art.mesh.h,
            art.system.n_total(),
            est.lambda_max,
            est.lambda_min_nonzero,
            est.kappa,
            est.kappa * art.mesh.h * art.mesh.h
        );
    }
}
