use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fueterlab::field::{half_lattice, FieldExpansion};
use fueterlab::spectral::{verify_dd2, BlockLabel};
use fueterlab::variational::{energy_identity_residual, isoperimetric_check, s1s2_identity_residual, FourierLoop};
use fueterlab::{FrameSpec, Manifold, ManifoldPoint};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::run::{num, Csv};
use crate::spectrum::load_frame;
use crate::{with_run, Output};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Identity {
    /// Dirichlet energy = Fueter energy minus pullback action (normal frames).
    Energy,
    /// Square of the block operator against minus Laplacian minus bracket term.
    Dd2,
    /// Symplectic area of a loop bounded by its kinetic energy.
    Isoperimetric,
    /// Energy identity of the product frame on S1 x S2.
    S1s2,
    /// Coframe evaluated on the frame gives the identity.
    Duality,
    /// Frame fields are divergence free.
    Divergence,
}

#[derive(Args)]
pub struct VerifyArgs {
    pub identity: Identity,
    /// Frame JSON. Without it energy uses the standard sphere and dd2, duality and
    /// divergence draw a random sphere frame per sample.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the default tolerance of the identity.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

impl Identity {
    fn default_tol(self, manifold: Manifold) -> f64 {
        match self {
            Identity::Energy | Identity::S1s2 => 1e-8,
            Identity::Dd2 => 1e-10,
            Identity::Isoperimetric | Identity::Duality => 1e-12,
            // sphere divergences come from finite differences of the flow
            Identity::Divergence if manifold == Manifold::Torus3 => 1e-12,
            Identity::Divergence => 1e-8,
        }
    }

    fn takes_frame(self) -> bool {
        !matches!(self, Identity::Isoperimetric | Identity::S1s2)
    }

    fn meaning(self) -> &'static str {
        match self {
            Identity::Energy => "residual: |Dirichlet - Fueter + pullback| / max(1, Dirichlet), dimensionless",
            Identity::Dd2 => "residual: max entry of D^2 + L + W over the scanned blocks, inverse length squared",
            Identity::Isoperimetric => "residual: area term minus kinetic term of a random loop (passes when <= tol)",
            Identity::S1s2 => "residual: relative defect of the product energy identity, dimensionless",
            Identity::Duality => "residual: max |alpha_i(v_j) - delta_ij| at a random point, dimensionless",
            Identity::Divergence => "residual: max |div v_i| at a random point, inverse length",
        }
    }
}

fn random_gl_plus<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let mut u = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if u.determinant() < 0.0 {
            u.set_column(0, &(-u.column(0)));
        }
        if u.singular_values().min() > 0.1 {
            return u;
        }
    }
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (0.1..=1.0).contains(&n) {
            return v.map(|x| x / n);
        }
    }
}

fn dd2_residual(frame: &FrameSpec) -> Result<f64, CliError> {
    let labels: Vec<BlockLabel> = match frame.manifold() {
        Manifold::Torus3 => std::iter::once([0; 3]).chain(half_lattice(2)).map(BlockLabel::Torus).collect(),
        Manifold::Sphere3 => (0..=6).map(BlockLabel::Spin).collect(),
        Manifold::ProductS1S2 => {
            return Err(CliError::Input("dd2 is available on Torus3 and Sphere3 frames".into()));
        }
    };
    let mut worst = 0.0f64;
    for l in labels {
        worst = worst.max(verify_dd2(frame, l)?);
    }
    Ok(worst)
}

fn duality_residual(frame: &FrameSpec, p: &ManifoldPoint) -> Result<f64, CliError> {
    let (v, alpha) = (frame.frame_vectors(p)?, frame.dual_coframe(p)?);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((alpha[i].dot(&v[j]) - delta).abs());
        }
    }
    Ok(worst)
}

pub fn run(args: VerifyArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let id = args.identity;
    let given = match &args.frame {
        Some(_) if !id.takes_frame() => {
            return Err(CliError::Input(format!("identity {id:?} does not take a frame")));
        }
        Some(path) => Some(load_frame(path, &mut inputs)?),
        None => None,
    };
    if args.samples == 0 {
        return Err(CliError::Input("--samples must be positive".into()));
    }
    let manifold = match (&given, id) {
        (Some((_, f)), _) => f.manifold(),
        (None, Identity::S1s2 | Identity::Isoperimetric) => Manifold::ProductS1S2,
        (None, _) => Manifold::Sphere3,
    };
    let tol = args.tol.unwrap_or_else(|| id.default_tol(manifold));
    let config = json!({
        "identity": id,
        "frame": given.as_ref().map(|(j, _)| j),
        "samples": args.samples,
        "seed": args.seed,
        "tol": tol,
    });
    with_run(&args.output, "verify", config, inputs, |run| {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let frame_for = |rng: &mut ChaCha8Rng| -> Result<FrameSpec, CliError> {
            Ok(match &given {
                Some((_, f)) => f.clone(),
                None if matches!(id, Identity::Energy) => FrameSpec::standard_sphere(),
                None => FrameSpec::sphere3(random_gl_plus(rng))?,
            })
        };
        let mut residuals = Vec::with_capacity(args.samples);
        for _ in 0..args.samples {
            let r = match id {
                Identity::Energy => {
                    let f = frame_for(&mut rng)?;
                    let degree = if f.manifold() == Manifold::Torus3 { 2 } else { 3 };
                    energy_identity_residual(&f, &FieldExpansion::random(f.manifold(), degree, &mut rng))?
                }
                Identity::Dd2 => dd2_residual(&frame_for(&mut rng)?)?,
                Identity::Isoperimetric => {
                    let y = random_unit(&mut rng);
                    let (lhs, rhs) = isoperimetric_check(y, &FourierLoop::random(5, &mut rng))?;
                    lhs - rhs
                }
                Identity::S1s2 => s1s2_identity_residual(&FieldExpansion::random(Manifold::ProductS1S2, 3, &mut rng))?,
                Identity::Duality => {
                    let f = frame_for(&mut rng)?;
                    duality_residual(&f, &ManifoldPoint::random(f.manifold(), &mut rng))?
                }
                Identity::Divergence => {
                    let f = frame_for(&mut rng)?;
                    let p = ManifoldPoint::random(f.manifold(), &mut rng);
                    (0..3).map(|i| f.divergence_at(i, &p).abs()).fold(0.0, f64::max)
                }
            };
            residuals.push(r);
        }

        let mut csv = Csv::new(&[&format!("identity {id:?} on random samples"), id.meaning()], &["sample", "residual"]);
        for (i, r) in residuals.iter().enumerate() {
            csv.row(&[i.to_string(), num(*r)]);
        }
        run.csv("residuals.csv", csv)?;

        let max = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let passed = max.is_finite() && max <= tol;
        let mut summary = json!({ "identity": id, "samples": args.samples, "max_residual": max, "tol": tol, "pass": passed });
        println!("{:<14} {:>8} {:>14} {:>10}  result", "identity", "samples", "max residual", "tol");
        println!(
            "{:<14} {:>8} {:>14.3e} {:>10.1e}  {}",
            format!("{id:?}").to_lowercase(),
            args.samples,
            max,
            tol,
            if passed { "PASS" } else { "FAIL" }
        );
        if let Identity::Isoperimetric = id {
            let y = random_unit(&mut rng);
            let (lhs, rhs) = isoperimetric_check(y, &FourierLoop::extremal(y))?;
            println!("equality witness at y = ({:.6}, {:.6}, {:.6}): area {lhs:.15}, kinetic {rhs:.15}", y[0], y[1], y[2]);
            summary["witness"] = json!({ "y": y, "area": lhs, "kinetic": rhs, "gap": (lhs - rhs).abs() });
        }
        run.json("summary.json", &summary)?;
        if passed {
            Ok(())
        } else {
            Err(CliError::Failed(format!("max residual {max:.3e} exceeds {tol:.1e}")))
        }
    })
}
