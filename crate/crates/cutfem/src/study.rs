//! Experiment driver: refinement sweeps, interface-position robustness
//! sweeps, and the CSV/VTK artifacts they produce.

use crate::analysis::{self, GaugeShift};
use crate::assembly::{assemble_system, AssembledSystem, ModelCoefficients};
use crate::cut::{build_face_sets, CutGeometry};
use crate::error::{CutFemError, Result};
use crate::level_set::NodalLevelSet;
use crate::mesh::BackgroundMesh;
use crate::problem::ManufacturedProblem;
use crate::solver::{condition_number, solve, CondMethod, SolutionPair, DENSE_EIGEN_LIMIT};
use crate::space::{barycentric, build_dofmaps, mean_weights, shape_gradients, DofMap};
use crate::vtk;
use nalgebra::{Point3, Vector3};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Condition number computation requested for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondSetting {
    Off,
    Dense,
    Iterative,
}

/// Full configuration of an experiment run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Requested mesh parameter of the coarsest level.
    pub h0: f64,
    /// Number of refinement levels (each halves the requested h).
    pub levels: usize,
    pub coeffs: ModelCoefficients,
    pub center: Point3<f64>,
    pub radius: f64,
    pub box_origin: Point3<f64>,
    pub box_extents: Vector3<f64>,
    pub jitter_seed: u64,
    pub jitter_amplitude: f64,
    pub jitter_trials: usize,
    pub csv_path: Option<PathBuf>,
    pub vtk_prefix: Option<String>,
    pub matrix_prefix: Option<String>,
    pub cond: CondSetting,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            h0: 0.525,
            levels: 3,
            coeffs: ModelCoefficients::default(),
            center: Point3::origin(),
            radius: 1.0,
            box_origin: Point3::new(-1.5, -1.5, -1.5),
            box_extents: Vector3::new(3.0, 3.0, 3.0),
            jitter_seed: 0,
            jitter_amplitude: 0.0,
            jitter_trials: 10,
            csv_path: None,
            vtk_prefix: None,
            matrix_prefix: None,
            cond: CondSetting::Off,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h0 > 0.0) {
            return Err(CutFemError::InvalidArgument(format!(
                "h0 must be positive, got {}",
                self.h0
            )));
        }
        if self.levels < 1 {
            return Err(CutFemError::InvalidArgument(
                "at least one refinement level is required".into(),
            ));
        }
        if (self.radius - 1.0).abs() > 1e-12 {
            return Err(CutFemError::InvalidArgument(
                "the manufactured solution is defined on a unit sphere; radius must be 1".into(),
            ));
        }
        let amp_ok = self.jitter_amplitude == 0.0
            || (self.jitter_amplitude > 0.0 && self.jitter_amplitude < self.h0 / 2.0);
        if !amp_ok {
            return Err(CutFemError::InvalidArgument(format!(
                "jitter amplitude must lie in [0, h0/2), got {}",
                self.jitter_amplitude
            )));
        }
        self.coeffs.validate_allow_zero_tau()
    }
}

/// Per-mesh results of a convergence run.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRecord {
    pub h: f64,
    #[serde(rename = "N_B")]
    pub n_bulk: usize,
    #[serde(rename = "N_S")]
    pub n_surf: usize,
    #[serde(rename = "errL2_B")]
    pub err_l2_bulk: f64,
    #[serde(rename = "errL2_S")]
    pub err_l2_surf: f64,
    #[serde(rename = "errH1_B")]
    pub err_h1_bulk: f64,
    #[serde(rename = "errH1_S")]
    pub err_h1_surf: f64,
    pub kappa: Option<f64>,
    #[serde(rename = "eocL2_B")]
    pub eoc_l2_bulk: Option<f64>,
    #[serde(rename = "eocL2_S")]
    pub eoc_l2_surf: Option<f64>,
    #[serde(rename = "eocH1_B")]
    pub eoc_h1_bulk: Option<f64>,
    #[serde(rename = "eocH1_S")]
    pub eoc_h1_surf: Option<f64>,
}

/// Everything produced while solving the manufactured problem on one mesh.
pub struct LevelArtifacts {
    pub mesh: BackgroundMesh,
    pub cut: CutGeometry,
    pub dofs: DofMap,
    pub system: AssembledSystem,
    pub solution: SolutionPair,
    pub err_l2_bulk: f64,
    pub err_l2_surf: f64,
    pub err_h1_bulk: f64,
    pub err_h1_surf: f64,
}

/// Builds, assembles, solves and measures the manufactured problem at one
/// requested mesh parameter. Every pipeline stage tags its failures.
pub fn solve_manufactured_level(
    problem: &ManufacturedProblem,
    box_origin: Point3<f64>,
    box_extents: Vector3<f64>,
    h_request: f64,
    coeffs: &ModelCoefficients,
) -> Result<LevelArtifacts> {
    let mesh = BackgroundMesh::build_box(box_origin, box_extents, h_request)
        .map_err(|e| e.in_stage("mesh"))?;
    let surface = problem.surface();
    let nodal = NodalLevelSet::sample(&surface, &mesh).map_err(|e| e.in_stage("level_set"))?;
    let cut = CutGeometry::build(&mesh, &nodal).map_err(|e| e.in_stage("cut_geometry"))?;
    let dofs = build_dofmaps(&mesh, &cut.classes).map_err(|e| e.in_stage("fe_space"))?;
    let constraint = mean_weights(&mesh, &cut, &dofs);
    let sets = build_face_sets(&mesh, &cut.classes);

    let f_bulk = |p: &Point3<f64>| problem.forcing_bulk(p);
    let f_surf = |p: &Point3<f64>| {
        problem
            .forcing_surface_extended(p)
            .expect("surface quadrature points avoid the medial set")
    };
    let system = assemble_system(
        &mesh, &cut, &sets, &dofs, &constraint, coeffs, &f_bulk, &f_surf,
    )
    .map_err(|e| e.in_stage("assembly"))?;

    let solution = solve(&system).map_err(|e| e.in_stage("solve"))?;

    let shift = GaugeShift::align(
        &cut,
        &|p| {
            problem
                .surface_solution_extended(p)
                .expect("surface quadrature points avoid the medial set")
        },
        coeffs.b_bulk,
        coeffs.b_surf,
    );
    let (err_l2_bulk, err_h1_bulk) = analysis::bulk_errors(
        &mesh,
        &cut,
        &dofs,
        &solution.bulk,
        &|p| problem.bulk_solution(p),
        &|p| problem.bulk_gradient(p),
        shift.bulk,
    )
    .map_err(|e| e.in_stage("error_analysis"))?;
    let (err_l2_surf, err_h1_surf) = analysis::surface_errors(
        &mesh,
        &cut,
        &dofs,
        &solution.surf,
        &surface,
        &|p| problem.surface_solution(p),
        &|p| {
            problem
                .surface_gradient_tangential(p)
                .expect("quadrature closest points lie on the sphere")
        },
        shift.surf,
    )
    .map_err(|e| e.in_stage("error_analysis"))?;

    for (name, v) in [
        ("errL2_B", err_l2_bulk),
        ("errL2_S", err_l2_surf),
        ("errH1_B", err_h1_bulk),
        ("errH1_S", err_h1_surf),
    ] {
        if !v.is_finite() {
            return Err(CutFemError::NonFinite {
                stage: "error_analysis",
                detail: format!("{name} is not finite"),
            });
        }
    }

    Ok(LevelArtifacts {
        mesh,
        cut,
        dofs,
        system,
        solution,
        err_l2_bulk,
        err_l2_surf,
        err_h1_bulk,
        err_h1_surf,
    })
}

fn compute_kappa(system: &AssembledSystem, setting: CondSetting) -> Result<Option<f64>> {
    let method = match setting {
        CondSetting::Off => return Ok(None),
        CondSetting::Dense if system.n_total() <= DENSE_EIGEN_LIMIT => CondMethod::Dense,
        // dense request beyond the dense limit falls through to Lanczos
        CondSetting::Dense | CondSetting::Iterative => CondMethod::Iterative,
    };
    let scaled = system.scaled_matrix();
    let kernel = system.scaled_kernel();
    let est = condition_number(&scaled, &kernel, method).map_err(|e| e.in_stage("condition"))?;
    if !est.converged {
        return Err(CutFemError::NonConvergence(
            "iterative condition number estimate did not converge; partial value untrusted".into(),
        ));
    }
    Ok(Some(est.kappa))
}

/// Evaluates the discrete surface solution at a point of a given cut tet,
/// for VTK output of the surface field.
fn surface_field_value(
    mesh: &BackgroundMesh,
    dofs: &DofMap,
    solution: &SolutionPair,
    tet: usize,
    p: &Point3<f64>,
) -> f64 {
    let verts = mesh.tet_vertices(tet);
    let grads = shape_gradients(&verts).expect("cut tets are non-degenerate");
    let lam = barycentric(&verts, &grads, p);
    mesh.tets[tet]
        .iter()
        .enumerate()
        .map(|(i, &v)| solution.surf[dofs.surf_of_vertex[v].expect("surface DOF")] * lam[i])
        .sum()
}

fn write_level_artifacts(
    config: &RunConfig,
    level: usize,
    artifacts: &LevelArtifacts,
) -> Result<()> {
    if let Some(prefix) = &config.vtk_prefix {
        let mut bulk_field = vec![0.0; artifacts.mesh.vertices.len()];
        for (dof, &v) in artifacts.dofs.bulk_vertices.iter().enumerate() {
            bulk_field[v] = artifacts.solution.bulk[dof];
        }
        vtk::write_mesh_vtk(
            Path::new(&format!("{prefix}_mesh_{level}.vtk")),
            &artifacts.mesh,
            &[("u_bulk", &bulk_field)],
        )?;
        let mesh = &artifacts.mesh;
        let dofs = &artifacts.dofs;
        let solution = &artifacts.solution;
        vtk::write_surface_vtk(
            Path::new(&format!("{prefix}_gamma_{level}.vtk")),
            &artifacts.cut,
            Some(("u_surf", &|tet, p| {
                surface_field_value(mesh, dofs, solution, tet, p)
            })),
        )?;
    }
    if let Some(prefix) = &config.matrix_prefix {
        artifacts
            .system
            .matrix
            .write_matrix_market(Path::new(&format!("{prefix}_{level}.mtx")))?;
        artifacts
            .system
            .scaled_matrix()
            .write_matrix_market(Path::new(&format!("{prefix}_scaled_{level}.mtx")))?;
    }
    Ok(())
}

/// Runs the refinement sweep: one constrained solve per level, errors and
/// optional condition numbers, a CSV row per mesh (flushed as soon as the
/// level completes, so partial output survives a failing level) and the
/// EOC table on standard output.
pub fn run_convergence_study(config: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let problem = ManufacturedProblem::translated(config.center);
    let mut writer = match &config.csv_path {
        Some(path) => Some(
            csv::Writer::from_path(path)
                .map_err(|e| CutFemError::Io(std::io::Error::other(e)))?,
        ),
        None => None,
    };

    let mut records: Vec<ConvergenceRecord> = Vec::new();
    for level in 0..config.levels {
        let h_request = config.h0 / 2f64.powi(level as i32);
        let artifacts = solve_manufactured_level(
            &problem,
            config.box_origin,
            config.box_extents,
            h_request,
            &config.coeffs,
        )?;
        let kappa = compute_kappa(&artifacts.system, config.cond)?;
        write_level_artifacts(config, level, &artifacts)?;

        let previous = records.last();
        let rate = |prev: Option<f64>, now: f64| -> Option<f64> {
            previous.map(|p| {
                let e_prev = prev.unwrap();
                (e_prev / now).ln() / (p.h / artifacts.mesh.h).ln()
            })
        };
        let record = ConvergenceRecord {
            h: artifacts.mesh.h,
            n_bulk: artifacts.dofs.n_bulk(),
            n_surf: artifacts.dofs.n_surf(),
            err_l2_bulk: artifacts.err_l2_bulk,
            err_l2_surf: artifacts.err_l2_surf,
            err_h1_bulk: artifacts.err_h1_bulk,
            err_h1_surf: artifacts.err_h1_surf,
            kappa,
            eoc_l2_bulk: rate(previous.map(|p| p.err_l2_bulk), artifacts.err_l2_bulk),
            eoc_l2_surf: rate(previous.map(|p| p.err_l2_surf), artifacts.err_l2_surf),
            eoc_h1_bulk: rate(previous.map(|p| p.err_h1_bulk), artifacts.err_h1_bulk),
            eoc_h1_surf: rate(previous.map(|p| p.err_h1_surf), artifacts.err_h1_surf),
        };
        if let Some(w) = writer.as_mut() {
            w.serialize(&record)
                .and_then(|_| w.flush().map_err(csv::Error::from))
                .map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
        }
        records.push(record);
    }

    println!("{}", format_eoc_table(&records));
    Ok(records)
}

/// Formats the per-level error and EOC table.
pub fn format_eoc_table(records: &[ConvergenceRecord]) -> String {
    let mut out = String::new();
    out.push_str(
        "       h      N_B    N_S     errL2_B (eoc)      errL2_S (eoc)      errH1_B (eoc)      errH1_S (eoc)      kappa\n",
    );
    for r in records {
        let fmt = |e: f64, eoc: Option<f64>| match eoc {
            Some(v) => format!("{e:.3e} ({v:+.2})"),
            None => format!("{e:.3e} (  -  )"),
        };
        out.push_str(&format!(
            "{:8.5} {:8} {:6} {:>18} {:>18} {:>18} {:>18} {}\n",
            r.h,
            r.n_bulk,
            r.n_surf,
            fmt(r.err_l2_bulk, r.eoc_l2_bulk),
            fmt(r.err_l2_surf, r.eoc_l2_surf),
            fmt(r.err_h1_bulk, r.eoc_h1_bulk),
            fmt(r.err_h1_surf, r.eoc_h1_surf),
            r.kappa.map_or("-".to_string(), |k| format!("{k:.4e}")),
        ));
    }
    out
}

/// Writes convergence records to CSV with the pinned column layout.
pub fn write_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(CutFemError::InvalidArgument(
            "no records to write".into(),
        ));
    }
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
    for r in records {
        writer
            .serialize(r)
            .map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// One interface-position trial of the robustness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessRecord {
    pub trial: usize,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub h: f64,
    #[serde(rename = "N_B")]
    pub n_bulk: usize,
    #[serde(rename = "N_S")]
    pub n_surf: usize,
    #[serde(rename = "errL2_B")]
    pub err_l2_bulk: f64,
    #[serde(rename = "errL2_S")]
    pub err_l2_surf: f64,
    #[serde(rename = "errH1_B")]
    pub err_h1_bulk: f64,
    #[serde(rename = "errH1_S")]
    pub err_h1_surf: f64,
    pub kappa: Option<f64>,
}

/// Summary of a robustness sweep.
#[derive(Debug, Clone)]
pub struct RobustnessReport {
    pub records: Vec<RobustnessRecord>,
    /// max/min ratio of the condition numbers across trials.
    pub kappa_ratio: Option<f64>,
    /// max/min ratios of the L2 errors across trials (bulk, surface).
    pub err_l2_spread: (f64, f64),
}

/// Runs seeded random sphere-center offsets at fixed mesh parameter and
/// records errors and condition numbers per interface position.
pub fn run_robustness_sweep(config: &RunConfig) -> Result<RobustnessReport> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    config.validate()?;
    if config.jitter_trials == 0 {
        return Err(CutFemError::InvalidArgument(
            "robustness sweep needs at least one trial".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.jitter_seed);
    let mut records = Vec::new();
    for trial in 0..config.jitter_trials {
        let offset = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ) * config.jitter_amplitude;
        let center = config.center + offset;
        let problem = ManufacturedProblem::translated(center);
        let artifacts = solve_manufactured_level(
            &problem,
            config.box_origin,
            config.box_extents,
            config.h0,
            &config.coeffs,
        )?;
        let kappa = compute_kappa(&artifacts.system, config.cond)?;
        records.push(RobustnessRecord {
            trial,
            cx: center.x,
            cy: center.y,
            cz: center.z,
            h: artifacts.mesh.h,
            n_bulk: artifacts.dofs.n_bulk(),
            n_surf: artifacts.dofs.n_surf(),
            err_l2_bulk: artifacts.err_l2_bulk,
            err_l2_surf: artifacts.err_l2_surf,
            err_h1_bulk: artifacts.err_h1_bulk,
            err_h1_surf: artifacts.err_h1_surf,
            kappa,
        });
    }

    if let Some(path) = &config.csv_path {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
        for r in &records {
            writer
                .serialize(r)
                .map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
        }
        writer
            .flush()
            .map_err(|e| CutFemError::Io(std::io::Error::other(e)))?;
    }

    let spread = |get: &dyn Fn(&RobustnessRecord) -> f64| {
        let min = records.iter().map(|r| get(r)).fold(f64::INFINITY, f64::min);
        let max = records.iter().map(|r| get(r)).fold(0.0, f64::max);
        max / min
    };
    let kappa_ratio = if records.iter().all(|r| r.kappa.is_some()) {
        Some(spread(&|r| r.kappa.unwrap()))
    } else {
        None
    };
    Ok(RobustnessReport {
        kappa_ratio,
        err_l2_spread: (spread(&|r| r.err_l2_bulk), spread(&|r| r.err_l2_surf)),
        records,
    })
}
