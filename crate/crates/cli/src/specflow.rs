use std::path::PathBuf;

use clap::Args;
use fueterlab::flow::{spectral_flow, FlowOptions, FramePath};
use fueterlab::frame::FrameJson;
use fueterlab::spectral::{block_labels, Cutoff};
use fueterlab::{FrameSpec, Manifold};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;
use crate::run::{num, parse_json, read_input, Csv};
use crate::spectrum::{load_frame, CutoffArgs};
use crate::{svg, with_run, Output};

/// Curves drawn in the SVG, nearest to zero first.
const PLOTTED_CURVES: usize = 16;

#[derive(Args)]
pub struct SpecflowArgs {
    /// Path JSON, tagged by "kind": singular_approach {range}, linear {manifold, from, to},
    /// constant {frame, range} or bracket {U, range}.
    #[arg(long, conflicts_with = "frame", required_unless_present = "frame")]
    pub path: Option<PathBuf>,
    /// Frame JSON for a constant path.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// Parameter range of the constant path given by --frame.
    #[arg(long, num_args = 2, default_values_t = [0.0, 1.0], allow_negative_numbers = true)]
    pub range: Vec<f64>,
    /// Traverse the path backwards.
    #[arg(long)]
    pub reverse: bool,
    /// Grid intervals used for crossing detection.
    #[arg(long, default_value_t = 240)]
    pub intervals: usize,
    #[command(flatten)]
    pub cutoff: CutoffArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSpec {
    SingularApproach {
        range: [f64; 2],
    },
    Linear {
        manifold: Manifold,
        from: Vec<f64>,
        to: Vec<f64>,
    },
    Constant {
        frame: FrameJson,
        range: [f64; 2],
    },
    Bracket {
        #[serde(rename = "U")]
        u: Vec<f64>,
        range: [f64; 2],
    },
}

impl PathSpec {
    fn build(&self) -> Result<FramePath, CliError> {
        let frame = |manifold, u: &Vec<f64>| FrameSpec::from_json(&FrameJson { manifold, u: u.clone() });
        Ok(match self {
            PathSpec::SingularApproach { range } => FramePath::singular_approach((range[0], range[1]))?,
            PathSpec::Linear { manifold, from, to } => {
                FramePath::linear(*manifold, *frame(*manifold, from)?.matrix(), *frame(*manifold, to)?.matrix())?
            }
            PathSpec::Constant { frame: f, range } => FramePath::constant(&FrameSpec::from_json(f)?, (range[0], range[1]))?,
            PathSpec::Bracket { u, range } => {
                FramePath::bracket_perturbation(*frame(Manifold::Sphere3, u)?.matrix(), (range[0], range[1]))?
            }
        })
    }
}

/// Blocks scanned by default; the flow only involves low modes on the catalog paths.
fn default_cutoff() -> Cutoff {
    Cutoff { kmax: 2, nmax: 6, lmax: 4, mmax: 2 }
}

pub fn run(args: SpecflowArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let spec = match (&args.path, &args.frame) {
        (Some(p), _) => parse_json::<PathSpec>(&read_input(p, &mut inputs)?, "path JSON")?,
        (None, Some(f)) => {
            let (json, _) = load_frame(f, &mut inputs)?;
            PathSpec::Constant { frame: json, range: [args.range[0], args.range[1]] }
        }
        (None, None) => return Err(CliError::Input("one of --path or --frame is required".into())),
    };
    if args.intervals < 2 {
        return Err(CliError::Input("--intervals must be at least 2".into()));
    }
    let mut path = spec.build()?;
    if args.reverse {
        path = path.reversed();
    }
    let cutoff = args.cutoff.resolve(default_cutoff())?;
    let labels = block_labels(path.manifold(), &cutoff);
    let options = FlowOptions { intervals: args.intervals, ..FlowOptions::default() };
    let config = json!({
        "path": spec,
        "reverse": args.reverse,
        "intervals": args.intervals,
        "cutoff": cutoff,
    });
    with_run(&args.output, "specflow", config, inputs, |run| {
        let report = spectral_flow(&path, &labels, &options)?;

        let mut csv = Csv::new(
            &[
                "eigenvalue curves of the Fueter operator along the path, matched by continuity",
                "s: path parameter (dimensionless); eigenvalue: inverse length in the frame metric",
            ],
            &["block", "weight", "curve", "s", "eigenvalue"],
        );
        let mut nearest = Vec::new();
        for c in &report.curves {
            let label = c.label.map(|l| l.to_string()).unwrap_or_default();
            for (k, values) in c.values.iter().enumerate() {
                for (s, v) in c.s.iter().zip(values) {
                    csv.row(&[label.clone(), num(c.weight), k.to_string(), num(*s), num(*v)]);
                }
                let closest = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                nearest.push((closest, c.s.iter().copied().zip(values.iter().copied()).collect::<Vec<_>>()));
            }
        }
        run.csv("curves.csv", csv)?;
        run.json("crossings.json", &report.crossings)?;
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0));
        let series: Vec<_> = nearest.into_iter().take(PLOTTED_CURVES).map(|(_, line)| line).collect();
        run.write("curves.svg", &svg::plot("eigenvalue curves nearest to zero", "s", "eigenvalue", &series))?;
        run.json("flow.json", &json!({ "flow": report.flow, "curve_count": report.curve_count }))?;

        for c in &report.crossings {
            let label = c.label.map(|l| l.to_string()).unwrap_or_default();
            println!(
                "crossing at s = {:.9} in block {label}: signature {}, weight {}",
                c.s_star, c.signature, c.weight
            );
        }
        if report.flow != report.curve_count {
            return Err(CliError::Failed(format!(
                "crossing forms give {} but eigencurve counting gives {}",
                report.flow, report.curve_count
            )));
        }
        println!("flow: {}", report.flow);
        Ok(())
    })
}
