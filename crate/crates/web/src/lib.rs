//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Every function returns a JSON string, or an error message.

use fueterlab::ample::{convex_decompose, is_nondegenerate, nondegenerate_oracle, AmpleData};
use fueterlab::flow::{spectral_flow, FlowOptions, FramePath};
use fueterlab::frame::FrameJson;
use fueterlab::spectral::{block_labels, count_kernel, spectra, truncation_bound, Cutoff, BlockLabel, DEFAULT_TOL, GAP_FACTOR};
use fueterlab::{FrameSpec, FueterError, Manifold};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

const SHOWN_EIGENVALUES: usize = 16;
const SHOWN_CURVES: usize = 12;

fn message(e: FueterError) -> String {
    e.to_string()
}

/// Kernel dimension and verdict of a frame. `cutoff` is `kmax` on the torus
/// and the largest degree `2j` on the sphere.
#[wasm_bindgen]
pub fn frame_spectrum(manifold: &str, u: Vec<f64>, cutoff: usize) -> Result<String, String> {
    let manifold = match manifold {
        "Torus3" => Manifold::Torus3,
        "Sphere3" => Manifold::Sphere3,
        other => return Err(format!("unknown manifold {other:?}")),
    };
    if cutoff > 24 {
        return Err("cutoff above 24 is too slow for the browser".into());
    }
    let frame = FrameSpec::from_json(&FrameJson { manifold, u }).map_err(message)?;
    let c = Cutoff { kmax: cutoff, nmax: cutoff, ..Cutoff::default() };
    let blocks = spectra(&frame, &c).map_err(message)?;
    let bound = truncation_bound(&frame, &c);
    let mut smallest: Vec<(f64, String)> = blocks
        .iter()
        .flat_map(|b| b.eigenvalues.iter().map(move |e| (*e, b.label.to_string())))
        .collect();
    smallest.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    smallest.truncate(SHOWN_EIGENVALUES);
    let certified = bound.is_none_or(|b| b > DEFAULT_TOL * GAP_FACTOR);
    let kernel = if certified { count_kernel(&blocks, DEFAULT_TOL).map_err(message)?.dimension } else { 0 };
    Ok(json!({
        "certified": certified,
        "kernel_dimension": kernel,
        "verdict": match (certified, kernel) {
            (false, _) => "uncertified",
            (true, 4) => "Regular",
            _ => "Singular",
        },
        "spinc_lambda": frame.spinc_lambda_constant(),
        "truncation_bound": bound,
        "smallest": smallest.iter().map(|(e, l)| json!({ "block": l, "eigenvalue": e })).collect::<Vec<_>>(),
    })
    .to_string())
}

/// Spectral flow along the sphere path through the singular frame at `s = 1`,
/// with the eigencurves nearest to zero for plotting.
#[wasm_bindgen]
pub fn singular_path_flow(lo: f64, hi: f64, reverse: bool) -> Result<String, String> {
    let mut path = FramePath::singular_approach((lo, hi)).map_err(message)?;
    if reverse {
        path = path.reversed();
    }
    let labels: Vec<BlockLabel> = block_labels(Manifold::Sphere3, &Cutoff { nmax: 4, ..Cutoff::default() });
    let report = spectral_flow(&path, &labels, &FlowOptions { intervals: 120, ..FlowOptions::default() }).map_err(message)?;
    let mut curves: Vec<(f64, Vec<[f64; 2]>)> = report
        .curves
        .iter()
        .flat_map(|c| {
            c.values.iter().map(|v| {
                let closest = v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
                (closest, c.s.iter().zip(v).map(|(s, x)| [*s, *x]).collect())
            })
        })
        .collect();
    curves.sort_by(|a, b| a.0.total_cmp(&b.0));
    curves.truncate(SHOWN_CURVES);
    let crossings: Vec<_> = report
        .crossings
        .iter()
        .map(|c| json!({ "s": c.s_star, "block": c.label.map(|l| l.to_string()), "signature": c.signature }))
        .collect();
    Ok(json!({
        "flow": report.flow,
        "curve_count": report.curve_count,
        "crossings": crossings,
        "curves": curves.into_iter().map(|(_, c)| c).collect::<Vec<_>>(),
    })
    .to_string())
}

/// One random ample instance: determinant test, span oracle and the convex
/// decomposition for both signs.
#[wasm_bindgen]
pub fn ample_sample(seed: u32) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let d = if seed == 0 { AmpleData::canonical() } else { AmpleData::random(&mut rng) };
    let oracle = nondegenerate_oracle(&d, 16, &mut rng);
    let mut parts = Vec::new();
    for sign in [1i8, -1] {
        let r = convex_decompose(&d, sign).map_err(message)?;
        parts.push(json!({
            "sign": sign,
            "t": r.t,
            "det_first": r.det_first,
            "det_second": r.det_second,
            "midpoint_error": r.midpoint_error(&d),
        }));
    }
    Ok(json!({
        "determinant": d.determinant(),
        "sign": is_nondegenerate(&d),
        "oracle": oracle,
        "decompositions": parts,
    })
    .to_string())
}
