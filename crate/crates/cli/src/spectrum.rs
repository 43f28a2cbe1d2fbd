use std::path::PathBuf;

use clap::Args;
use fueterlab::frame::FrameJson;
use fueterlab::spectral::{count_kernel, spectra, truncation_bound, Cutoff, DEFAULT_TOL, GAP_FACTOR};
use fueterlab::{FrameSpec, FueterError};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::run::{num, parse_json, read_input, Csv};
use crate::{with_run, Output};

#[derive(Args)]
pub struct SpectrumArgs {
    /// Frame JSON: {"manifold": "Torus3" | "Sphere3" | "ProductS1S2", "U": [9 reals, row-major]}.
    #[arg(long)]
    pub frame: PathBuf,
    #[command(flatten)]
    pub cutoff: CutoffArgs,
    /// Kernel tolerance on |eigenvalue|.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone)]
pub struct CutoffArgs {
    /// Torus modes with |k|_inf <= kmax.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Sphere blocks with spin j <= jmax (integer or half-integer).
    #[arg(long)]
    pub jmax: Option<f64>,
    /// Spherical harmonic degree cutoff on S1 x S2.
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Circle Fourier cutoff on S1 x S2.
    #[arg(long)]
    pub mmax: Option<usize>,
}

impl CutoffArgs {
    pub fn resolve(&self, base: Cutoff) -> Result<Cutoff, CliError> {
        let mut c = base;
        if let Some(k) = self.kmax {
            c.kmax = k;
        }
        if let Some(j) = self.jmax {
            let n = 2.0 * j;
            if !(n >= 0.0 && (n - n.round()).abs() < 1e-12) {
                return Err(CliError::Input(format!("--jmax must be a non-negative multiple of 1/2, got {j}")));
            }
            c.nmax = n.round() as usize;
        }
        if let Some(l) = self.lmax {
            c.lmax = l;
        }
        if let Some(m) = self.mmax {
            c.mmax = m;
        }
        Ok(c)
    }
}

pub fn load_frame(path: &PathBuf, inputs: &mut Vec<(String, Vec<u8>)>) -> Result<(FrameJson, FrameSpec), CliError> {
    let text = read_input(path, inputs)?;
    let json: FrameJson = parse_json(&text, "frame JSON")?;
    let frame = FrameSpec::from_json(&json)?;
    Ok((json, frame))
}

#[derive(Serialize)]
struct Summary {
    manifold: String,
    verdict: &'static str,
    kernel_dimension: usize,
    kernel_blocks: Vec<(String, usize)>,
    tol: f64,
    cluster_max: f64,
    next_eigenvalue: f64,
    truncation_bound: Option<f64>,
    spinc_lambda: f64,
}

pub fn run(args: SpectrumArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (json, frame) = load_frame(&args.frame, &mut inputs)?;
    let cutoff = args.cutoff.resolve(Cutoff::default())?;
    if !(args.tol > 0.0) {
        return Err(CliError::Input(format!("--tol must be positive, got {}", args.tol)));
    }
    let config = json!({ "frame": json, "cutoff": cutoff, "tol": args.tol });
    with_run(&args.output, "spectrum", config, inputs, |run| {
        let blocks = spectra(&frame, &cutoff)?;
        let mut csv = Csv::new(
            &[
                "eigenvalues of the Fueter operator restricted to each invariant block",
                "eigenvalue: inverse length in the frame metric; weight: multiplicity of the block in the full operator",
            ],
            &["block", "weight", "index", "eigenvalue"],
        );
        for b in &blocks {
            for (i, e) in b.eigenvalues.iter().enumerate() {
                csv.row(&[b.label.to_string(), num(b.weight), i.to_string(), num(*e)]);
            }
        }
        run.csv("spectrum.csv", csv)?;

        let bound = truncation_bound(&frame, &cutoff);
        if let Some(b) = bound {
            if b <= args.tol * GAP_FACTOR {
                return Err(FueterError::UncertifiedTruncation { bound: b, tol: args.tol }.into());
            }
        }
        let report = count_kernel(&blocks, args.tol)?;
        let summary = Summary {
            manifold: format!("{:?}", frame.manifold()),
            verdict: if report.dimension == 4 { "Regular" } else { "Singular" },
            kernel_dimension: report.dimension,
            kernel_blocks: report.blocks.iter().map(|(l, n)| (l.to_string(), *n)).collect(),
            tol: args.tol,
            cluster_max: report.cluster_max,
            next_eigenvalue: report.next,
            truncation_bound: bound,
            spinc_lambda: frame.spinc_lambda_constant(),
        };
        run.json("summary.json", &summary)?;
        println!("verdict: {}", summary.verdict);
        println!("kernel dimension: {}", summary.kernel_dimension);
        println!("spin-c lambda: {}", summary.spinc_lambda);
        println!("cluster max: {:.3e}, next eigenvalue: {:.3e}", report.cluster_max, report.next);
        match bound {
            Some(b) => println!("truncation bound: {b:.6}"),
            None => println!("truncation bound: none (no a-priori bound for this manifold)"),
        }
        Ok(())
    })
}
