use std::path::PathBuf;

use clap::Args;
use fueterlab::floer::{
    floer_energy_residual, floer_trajectory, multistart, solve_critical, CriticalPoint, FloerProblem, GalerkinField,
    GalerkinProblem, HamiltonianSpec, MultistartOptions, NewtonOptions,
};
use fueterlab::frame::FrameJson;
use fueterlab::{FrameSpec, FueterError};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;
use crate::run::{num, parse_json, read_input, Csv};
use crate::{svg, with_run, Output};

#[derive(Args)]
pub struct FloerArgs {
    /// Problem JSON with frame, hamiltonian, grid and optional tolerances, search and trajectory.
    pub problem: PathBuf,
    /// Override the multistart seed of the problem file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the Newton tolerance on the critical-point residual.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianInput {
    /// `eps Σ_q cos(2π x_q)` on `copies` quaternion copies.
    Cosine { copies: usize, separable_cosine: f64 },
    Terms(HamiltonianSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub newton: f64,
    pub sigma: f64,
    pub dedupe: f64,
    pub max_newton: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let m = MultistartOptions::default();
        Self { newton: m.newton.tol, sigma: m.sigma_tol, dedupe: m.dedupe_tol, max_newton: m.newton.max_iter }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Search {
    pub random_starts: usize,
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for Search {
    fn default() -> Self {
        let m = MultistartOptions::default();
        Self { random_starts: m.random_starts, seed: m.seed, amplitude: m.random_amplitude }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryInput {
    /// Mean value of the upper critical point; refined by Newton from the constant field.
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    pub half_length: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloerInput {
    pub frame: FrameJson,
    pub hamiltonian: HamiltonianInput,
    /// Grid points per torus direction.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub search: Search,
    #[serde(default)]
    pub trajectory: Option<TrajectoryInput>,
}

fn default_grid() -> usize {
    4
}

fn describe(c: &CriticalPoint, index: usize, kind: &str) -> Vec<String> {
    let mut row = vec![index.to_string(), kind.to_string()];
    row.extend(c.field.mean().into_iter().map(num));
    row.extend([num(c.residual), num(c.sigma_min), num(c.action), c.iterations.to_string()]);
    row
}

pub fn run(args: FloerArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let mut input: FloerInput = parse_json(&read_input(&args.problem, &mut inputs)?, "problem JSON")?;
    if let Some(s) = args.seed {
        input.search.seed = s;
    }
    if let Some(t) = args.tol {
        input.tolerances.newton = t;
    }
    let frame = FrameSpec::from_json(&input.frame)?;
    let hamiltonian = match &input.hamiltonian {
        HamiltonianInput::Cosine { copies, separable_cosine } => HamiltonianSpec::separable_cosine(*copies, *separable_cosine),
        HamiltonianInput::Terms(h) => h.clone(),
    };
    hamiltonian.validate()?;
    let problem = GalerkinProblem::new(&frame, &hamiltonian, input.grid)?;
    let newton = NewtonOptions { tol: input.tolerances.newton, max_iter: input.tolerances.max_newton };
    let options = MultistartOptions {
        random_starts: input.search.random_starts,
        seed: input.search.seed,
        random_amplitude: input.search.amplitude,
        sigma_tol: input.tolerances.sigma,
        dedupe_tol: input.tolerances.dedupe,
        newton,
    };
    if let Some(t) = &input.trajectory {
        if t.minus.len() != problem.dim() || t.plus.len() != problem.dim() {
            return Err(CliError::Input(format!("trajectory endpoints need {} components", problem.dim())));
        }
    }
    let config = serde_json::to_value(&input).map_err(|e| CliError::Input(e.to_string()))?;
    with_run(&args.output, "floer", config, inputs, |run| {
        let report = multistart(&problem, &options);
        let dim = problem.dim();
        let mut columns = vec!["solution".to_string(), "kind".to_string()];
        columns.extend((1..=dim).map(|q| format!("mean_x{q}")));
        columns.extend(["residual", "sigma_min", "action", "newton_iterations"].map(String::from));
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut crit = Csv::new(
            &[
                "critical points of the Galerkin action functional, deduplicated modulo the integer lattice",
                "mean_x: field average in lattice units; residual: sup-norm of the discrete equation; \
                 sigma_min: smallest singular value of the linearization; action: dimensionless",
            ],
            &columns,
        );
        let (solutions, degenerate) = (&report.solutions, &report.degenerate);
        for (i, c) in solutions.iter().enumerate() {
            crit.row(&describe(c, i, "nondegenerate"));
        }
        for (i, c) in degenerate.iter().enumerate() {
            crit.row(&describe(c, solutions.len() + i, "degenerate"));
        }
        run.csv("critical_points.csv", crit)?;

        let mut dump_cols = vec!["solution".to_string(), "grid_index".to_string(), "y1".into(), "y2".into(), "y3".into()];
        dump_cols.extend((1..=dim).map(|q| format!("x{q}")));
        let dump_cols: Vec<&str> = dump_cols.iter().map(String::as_str).collect();
        let mut dump = Csv::new(
            &["grid values of each critical point listed in critical_points.csv", "y: torus coordinates in [0,1); x: lattice units"],
            &dump_cols,
        );
        let grid = problem.grid();
        for (i, c) in solutions.iter().chain(degenerate).enumerate() {
            let values = c.field.values(grid);
            for (g, y) in grid.points().iter().enumerate() {
                let mut row = vec![i.to_string(), g.to_string(), num(y[0]), num(y[1]), num(y[2])];
                row.extend(values.row(g).iter().map(|v| num(*v)));
                dump.row(&row);
            }
        }
        run.csv("solutions.csv", dump)?;

        println!(
            "starts: {}, failures: {}, nondegenerate: {}, degenerate: {}",
            report.starts,
            report.failures,
            solutions.len(),
            degenerate.len()
        );
        let count = report.count();
        run.json(
            "summary.json",
            &json!({
                "starts": report.starts,
                "failures": report.failures,
                "nondegenerate": solutions.len(),
                "degenerate": degenerate.len(),
                "count": count,
            }),
        )?;
        let Some(count) = count else {
            let sigma_min = degenerate.iter().map(|c| c.sigma_min).fold(f64::INFINITY, f64::min);
            return Err(FueterError::DegenerateSolution { sigma_min }.into());
        };
        println!("critical points: {count}");

        if let Some(t) = &input.trajectory {
            let endpoint = |x: &[f64]| -> Result<GalerkinField, CliError> {
                Ok(solve_critical(&problem, &GalerkinField::constant(grid, x), newton)?.field)
            };
            let (minus, plus) = (endpoint(&t.minus)?, endpoint(&t.plus)?);
            let fp = FloerProblem::new(problem.clone(), minus, plus, t.half_length, t.nodes);
            let traj = floer_trajectory(&fp)?;
            let residual = floer_energy_residual(&traj);
            let mut csv = Csv::new(
                &[
                    "trajectory of the gradient flow between two critical points",
                    "s: flow time; action: dimensionless; energy_density: |du/ds|^2 integrated over the torus",
                ],
                &["s", "action", "energy_density"],
            );
            for i in 0..traj.s.len() {
                csv.row(&[num(traj.s[i]), num(traj.action[i]), num(traj.energy_density[i])]);
            }
            run.csv("trajectory.csv", csv)?;
            let line: Vec<_> = traj.s.iter().copied().zip(traj.action.iter().copied()).collect();
            run.write("trajectory.svg", &svg::plot("action along the trajectory", "s", "action", &[line]))?;
            run.json(
                "trajectory.json",
                &json!({
                    "energy": traj.energy(),
                    "action_minus": traj.action_minus,
                    "action_plus": traj.action_plus,
                    "energy_residual": residual,
                    "max_action_increase": traj.max_action_increase(),
                    "discrete_residual": traj.residual,
                    "newton_iterations": traj.newton_iterations,
                    "krylov_iterations": traj.krylov_iterations,
                }),
            )?;
            println!(
                "trajectory: energy {:.12}, action drop {:.12}, energy residual {residual:.3e}",
                traj.energy(),
                traj.action_minus - traj.action_plus
            );
        }
        Ok(())
    })
}
