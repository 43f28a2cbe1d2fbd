use clap::{Args, ValueEnum};
use fueterlab::ample::{convex_decompose, is_nondegenerate, nondegenerate_oracle, AmpleData, Decomposition};
use fueterlab::FueterError;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::run::{num, Csv};
use crate::{with_run, Output};

/// Extra random pairs `(u, v)` fed to the span oracle.
const ORACLE_PAIRS: usize = 16;
/// Every `DEGENERATE_EVERY`-th equivalence sample has coplanar torsion.
const DEGENERATE_EVERY: usize = 8;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Determinant test against the span of sampled torsion vectors.
    Equivalence,
    /// Split the data into two of prescribed determinant sign with the same midpoint.
    Decompose,
}

#[derive(Args)]
pub struct AmpleArgs {
    pub mode: Mode,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

/// Replace `τ_23` by a combination of `τ_31` and `τ_12`.
fn make_coplanar<R: Rng>(d: &mut AmpleData, rng: &mut R) {
    let [t23, t31, t12] = d.tau();
    let target = t31 * rng.random_range(-1.0..1.0) + t12 * rng.random_range(-1.0..1.0);
    d.s[0] += target - t23;
}

#[derive(Serialize)]
struct Counterexample {
    instance: usize,
    data: AmpleData,
    determinant: f64,
    oracle: bool,
}

fn equivalence(run: &mut crate::run::Run, samples: usize, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
    let mut csv = Csv::new(
        &[
            "determinant test of the torsion triple against a sampled span oracle",
            "determinant: det(tau_23, tau_31, tau_12) in units of the data cubed; sign: -1, 0 or 1; oracle: 1 when the sampled torsions span R^3",
        ],
        &["instance", "determinant", "sign", "oracle", "agree"],
    );
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    let mut bad = Vec::new();
    for i in 0..samples {
        let mut d = AmpleData::random(rng);
        if i % DEGENERATE_EVERY == DEGENERATE_EVERY - 1 {
            make_coplanar(&mut d, rng);
        }
        let sign = is_nondegenerate(&d);
        let oracle = nondegenerate_oracle(&d, ORACLE_PAIRS, rng);
        let agree = (sign != 0) == oracle;
        match sign {
            1 => pos += 1,
            -1 => neg += 1,
            _ => zero += 1,
        }
        csv.row(&[i.to_string(), num(d.determinant()), sign.to_string(), u8::from(oracle).to_string(), u8::from(agree).to_string()]);
        if !agree {
            bad.push(Counterexample { instance: i, data: d, determinant: d.determinant(), oracle });
        }
    }
    run.csv("equivalence.csv", csv)?;
    let passes = samples - bad.len();
    run.json("summary.json", &json!({ "samples": samples, "passes": passes, "positive": pos, "negative": neg, "degenerate": zero }))?;
    println!("equivalence: {passes}/{samples} passes ({pos} positive, {neg} negative, {zero} degenerate)");
    if bad.is_empty() {
        return Ok(());
    }
    run.json("counterexamples.json", &bad)?;
    Err(CliError::Failed(format!("{} counterexamples written to counterexamples.json", bad.len())))
}

/// Failure description for a decomposition that misses its contract.
fn audit(d: &AmpleData, sign: i8, r: &Decomposition) -> Option<String> {
    let s = f64::from(sign);
    let mid = r.midpoint_error(d);
    if s * r.det_first < 1.0 || s * r.det_second < 1.0 {
        return Some(format!("determinants {} and {} miss sign {sign}", r.det_first, r.det_second));
    }
    if mid > 1e-12 * r.t.max(1.0) {
        return Some(format!("midpoint error {mid:.3e}"));
    }
    if r.first.restriction() != d.restriction() || r.second.restriction() != d.restriction() {
        return Some("restriction to the slice changed".into());
    }
    None
}

fn decompose(run: &mut crate::run::Run, samples: usize, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
    let mut instances = vec![("canonical".to_string(), AmpleData::canonical())];
    instances.extend((0..samples).map(|i| (format!("random-{i}"), AmpleData::random(rng))));
    let mut empty = AmpleData::random(rng);
    empty.s[0] = Vector3::zeros();
    empty.l[1][2] = empty.l[2][1];
    instances.push(("empty-slice".to_string(), empty));

    let mut csv = Csv::new(
        &[
            "convex decomposition of ample data into two members of prescribed determinant sign",
            "t: shift size along the slice; det_first, det_second: torsion determinants of the two members; midpoint_error: max entry of the midpoint defect",
        ],
        &["instance", "target_sign", "status", "t", "det_first", "det_second", "midpoint_error"],
    );
    let (mut ok, mut empty_rows) = (0, 0);
    let mut failures = Vec::new();
    for (name, d) in &instances {
        for sign in [1i8, -1] {
            match convex_decompose(d, sign) {
                Ok(r) => {
                    if let Some(why) = audit(d, sign, &r) {
                        failures.push(json!({ "instance": name, "sign": sign, "reason": why, "data": d }));
                    } else {
                        ok += 1;
                    }
                    csv.row(&[
                        name.clone(),
                        sign.to_string(),
                        "ok".into(),
                        num(r.t),
                        num(r.det_first),
                        num(r.det_second),
                        num(r.midpoint_error(d)),
                    ]);
                }
                Err(FueterError::EmptyIntersection) => {
                    empty_rows += 1;
                    csv.row(&[name.clone(), sign.to_string(), "empty_intersection".into(), "".into(), "".into(), "".into(), "".into()]);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    run.csv("decompose.csv", csv)?;
    let canonical = convex_decompose(&instances[0].1, 1)?;
    println!(
        "canonical: t = {}, determinants ({}, {}), midpoint error {:.3e}",
        canonical.t,
        canonical.det_first,
        canonical.det_second,
        canonical.midpoint_error(&instances[0].1)
    );
    println!("decompose: {ok} successful, {empty_rows} empty-intersection rows, {} failures", failures.len());
    run.json("summary.json", &json!({ "successful": ok, "empty_intersection": empty_rows, "failures": failures.len() }))?;
    if failures.is_empty() {
        return Ok(());
    }
    run.json("counterexamples.json", &failures)?;
    Err(CliError::Failed(format!("{} decompositions missed their contract", failures.len())))
}

pub fn run(args: AmpleArgs) -> Result<(), CliError> {
    let config = json!({ "mode": args.mode, "samples": args.samples, "seed": args.seed });
    with_run(&args.output, "ample", config, Vec::new(), |run| {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        match args.mode {
            Mode::Equivalence => equivalence(run, args.samples, &mut rng),
            Mode::Decompose => decompose(run, args.samples, &mut rng),
        }
    })
}
