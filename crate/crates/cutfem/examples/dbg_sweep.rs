// debug: full manufactured sweep with condition numbers
use cutfem::study::{run_convergence_study, CondSetting, RunConfig};
use std::time::Instant;

fn main() {
    let t = Instant::now();
    let config = RunConfig {
        h0: 0.525,
        levels: 3,
        cond: CondSetting::Dense,
        ..Default::default()
    };
    let records = run_convergence_study(&config).unwrap();
    println!("elapsed: {:?}", t.elapsed());
    for r in &records {
        println!(
            "h={:.6} N={} kappa={:?}",
            r.h,
            r.n_bulk + r.n_surf,
            r.kappa
        );
    }
}
