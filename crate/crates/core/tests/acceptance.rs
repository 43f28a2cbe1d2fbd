//! End-to-end acceptance checks. Run with
//! `cargo test --release -p fueterlab --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use fueterlab::ample::{convex_decompose, is_nondegenerate, nondegenerate_oracle, AmpleData};
use fueterlab::field::{half_lattice, FieldExpansion};
use fueterlab::floer::{
    arnold_count, floer_energy_residual, floer_trajectory, FloerProblem, GalerkinField, GalerkinProblem,
    HamiltonianSpec, MultistartOptions,
};
use fueterlab::flow::{crossings, slope_vs_gamma, spectral_flow, BlockFamily, FlowOptions, FramePath};
use fueterlab::spectral::{
    block, classify, count_kernel, dirac_spectrum_shift, kernel_dimension, spectra, sphere_term_vector,
    truncation_bound, verify_dd2, BlockLabel, Cutoff, Verdict, DEFAULT_TOL,
};
use fueterlab::variational::{energy_identity_residual, energy_terms, isoperimetric_check, FourierLoop};
use fueterlab::linalg::sym_eigen;
use fueterlab::{FrameSpec, FueterError, ManifoldPoint};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
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

fn torus_regularity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cutoff = Cutoff { kmax: 3, ..Cutoff::default() };
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let u = random_gl_plus(&mut rng);
        let f = FrameSpec::torus(u).map_err(err)?;
        let k = kernel_dimension(&f, &cutoff, DEFAULT_TOL).map_err(err)?;
        ensure(k.dimension == 4, format!("kernel {}", k.dimension))?;
        for m in half_lattice(cutoff.kmax) {
            let r = 2.0 * PI * (u.transpose() * Vector3::new(m[0] as f64, m[1] as f64, m[2] as f64)).norm();
            let e = block(&f, BlockLabel::Torus(m)).map_err(err)?.eigenvalues();
            for (i, v) in e.iter().enumerate() {
                let expected = if i < 4 { -r } else { r };
                worst = worst.max((v - expected).abs());
            }
        }
    }
    ensure(worst < 1e-10, format!("spectrum error {worst:.2e}"))?;
    Ok(format!("20 frames, kernel 4, max |eig - ±2π|U^T k|| = {worst:.1e}"))
}

fn sphere_standard() -> Check {
    let f = FrameSpec::standard_sphere();
    let cutoff = Cutoff { nmax: 12, ..Cutoff::default() };
    let k = kernel_dimension(&f, &cutoff, DEFAULT_TOL).map_err(err)?;
    let bound = truncation_bound(&f, &cutoff).ok_or("no truncation bound")?;
    ensure(k.dimension == 4, format!("kernel {}", k.dimension))?;
    ensure(bound > DEFAULT_TOL * 100.0, "truncation not certified")?;
    let half = block(&f, BlockLabel::Spin(1)).map_err(err)?.eigenvalues();
    let mult = half.iter().filter(|e| (*e + 3.0).abs() < 1e-10).count();
    ensure(mult >= 4, format!("eigenvalue -3 multiplicity {mult}"))?;
    Ok(format!("kernel 4 for j ≤ 6, neglected blocks ≥ {bound:.2}, eigenvalue -3 ×{mult}"))
}

fn sphere_singular() -> Check {
    let f = FrameSpec::singular_sphere();
    let cutoff = Cutoff { nmax: 12, ..Cutoff::default() };
    let k = kernel_dimension(&f, &cutoff, DEFAULT_TOL).map_err(err)?;
    ensure(k.dimension >= 8, format!("kernel {}", k.dimension))?;
    ensure(classify(&f, &cutoff, DEFAULT_TOL).map_err(err)? == Verdict::Singular, "not singular")?;
    let b = block(&f, BlockLabel::Spin(1)).map_err(err)?;
    let eig = sym_eigen(&b.matrix);
    let cols: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i].abs() < DEFAULT_TOL).collect();
    let kernel = eig.vectors.select_columns(&cols);
    let FieldExpansion::Sphere3(terms) = FieldExpansion::sphere_inclusion() else {
        return Err("inclusion is not an S^3 field".into());
    };
    let v = sphere_term_vector(&terms[0]).map_err(err)?.normalize();
    // kernel vector closest to the inclusion
    let w = (&kernel * (kernel.transpose() * &v)).normalize();
    let diff = (&w - &v).amax();
    ensure(diff < 1e-10, format!("kernel vector differs from f(y) = y by {diff:.2e}"))?;
    Ok(format!("kernel {}, singular, |kernel vector - y| = {diff:.1e}", k.dimension))
}

fn product_frame() -> Check {
    let f = FrameSpec::product_s1s2();
    let mut maxima = Vec::new();
    let mut nexts = Vec::new();
    for lmax in [6, 8, 10] {
        let cutoff = Cutoff { lmax, mmax: 3, ..Cutoff::default() };
        let s = spectra(&f, &cutoff).map_err(err)?;
        let k = count_kernel(&s, DEFAULT_TOL).map_err(err)?;
        ensure(k.dimension == 4, format!("L={lmax}: {} small eigenvalues", k.dimension))?;
        ensure(k.next >= 0.1, format!("L={lmax}: next eigenvalue {}", k.next))?;
        maxima.push(k.cluster_max);
        nexts.push(k.next);
    }
    // The cluster sits at rounding level; shrinking is checked above that floor.
    let floor = 1e3 * f64::EPSILON;
    ensure(maxima.iter().all(|m| *m < floor), format!("cluster above rounding floor: {maxima:?}"))?;
    ensure(maxima.windows(2).all(|w| w[1] <= w[0].max(floor)), format!("cluster grows: {maxima:?}"))?;
    Ok(format!("4 eigenvalues in band at L = 6, 8, 10; cluster max {}; next {:.4}", sci(&maxima), nexts[0]))
}

fn operator_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let u = random_gl_plus(&mut rng);
        let t = FrameSpec::torus(u).map_err(err)?;
        for k in std::iter::once([0, 0, 0]).chain(half_lattice(3)) {
            worst = worst.max(verify_dd2(&t, BlockLabel::Torus(k)).map_err(err)?);
        }
        let s = FrameSpec::sphere3(u).map_err(err)?;
        for n in 0..=4 {
            worst = worst.max(verify_dd2(&s, BlockLabel::Spin(n)).map_err(err)?);
        }
    }
    ensure(worst < 1e-10, format!("residual {worst:.2e}"))?;
    Ok(format!("max |D^2 + L + W| = {worst:.1e}"))
}

fn energy_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let frames = [
        (FrameSpec::standard_torus(), 2),
        (FrameSpec::standard_sphere(), 3),
        (FrameSpec::singular_sphere(), 3),
        (FrameSpec::product_s1s2(), 3),
    ];
    let mut worst = 0.0_f64;
    for (f, degree) in frames {
        for _ in 0..10 {
            let g = FieldExpansion::random(f.manifold(), degree, &mut rng);
            worst = worst.max(energy_identity_residual(&f, &g).map_err(err)?);
        }
    }
    ensure(worst < 1e-8, format!("residual {worst:.2e}"))?;
    let t = energy_terms(&FrameSpec::standard_sphere(), &FieldExpansion::sphere_inclusion()).map_err(err)?;
    let target = 3.0 * PI * PI;
    let (lhs, rhs) = (t.dirichlet, t.fueter - t.pullback);
    ensure((lhs - target).abs() < 1e-12 && (rhs - target).abs() < 1e-12, format!("hand case {lhs} vs {rhs}"))?;
    Ok(format!("40 fields, max residual {worst:.1e}; g(y) = y gives {lhs:.12} = {rhs:.12}"))
}

fn isoperimetric() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let points: Vec<[f64; 3]> = (0..20)
        .map(|_| {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            [v[0], v[1], v[2]]
        })
        .collect();
    let mut slack = f64::INFINITY;
    for _ in 0..100 {
        let f = FourierLoop::random(5, &mut rng);
        for y in &points {
            let (lhs, rhs) = isoperimetric_check(*y, &f).map_err(err)?;
            slack = slack.min(rhs - lhs);
        }
    }
    ensure(slack >= -1e-12, format!("violated by {slack:.2e}"))?;
    let mut gap = 0.0_f64;
    for y in &points {
        let (lhs, rhs) = isoperimetric_check(*y, &FourierLoop::extremal(*y)).map_err(err)?;
        gap = gap.max((lhs - rhs).abs());
    }
    ensure(gap < 1e-10, format!("extremal gap {gap:.2e}"))?;
    Ok(format!("2000 pairs, min slack {slack:.3e}; extremal gap {gap:.1e}"))
}

fn spinc_shift() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = 0.0_f64;
    for (f, expected) in
        [(FrameSpec::standard_torus(), 0.0), (FrameSpec::standard_sphere(), 1.5), (FrameSpec::product_s1s2(), 1.0)]
    {
        for _ in 0..100 {
            let p = ManifoldPoint::random(f.manifold(), &mut rng);
            worst = worst.max((f.spinc_lambda(&p).map_err(err)? - expected).abs());
        }
    }
    ensure(worst < 1e-10, format!("lambda error {worst:.2e}"))?;
    let shifted = dirac_spectrum_shift(&FrameSpec::standard_sphere(), BlockLabel::Spin(1)).map_err(err)?;
    ensure(shifted.iter().any(|e| (e + 1.5).abs() < 1e-10), "no -3/2 in the shifted j = 1/2 block")?;
    Ok(format!("λ = 0, 3/2, 1 within {worst:.1e}; shifted j = 1/2 eigenvalue -3/2 present"))
}

fn spectral_flow_check() -> Check {
    let path = FramePath::singular_approach((0.0, 1.2)).map_err(err)?;
    let family = BlockFamily::new(&path, BlockLabel::Spin(1)).map_err(err)?;
    let found = crossings(&family, &path.grid(240)).map_err(err)?;
    ensure(found.len() == 1, format!("{} crossings in j = 1/2", found.len()))?;
    let c = &found[0];
    ensure((c.s_star - 1.0).abs() < 1e-6, format!("crossing at {}", c.s_star))?;
    ensure(c.signature.abs() == 4, format!("signature {}", c.signature))?;
    let slope = slope_vs_gamma(&family, c, 1e-4).map_err(err)?;
    ensure(slope < 1e-5, format!("slope mismatch {slope:.2e}"))?;
    let labels: Vec<BlockLabel> = (0..=6).map(BlockLabel::Spin).collect();
    let fwd = spectral_flow(&path, &labels, &FlowOptions::default()).map_err(err)?;
    let back = spectral_flow(&path.reversed(), &labels, &FlowOptions::default()).map_err(err)?;
    ensure(fwd.flow == fwd.curve_count, format!("signatures {} vs curves {}", fwd.flow, fwd.curve_count))?;
    ensure(back.flow == -fwd.flow, format!("reversed flow {}", back.flow))?;
    Ok(format!(
        "s* = {:.9}, Γ eigenvalues {:.4?}, slope gap {slope:.1e}, flow {} = curve count, reversed {}",
        c.s_star, c.gamma_eigenvalues, fwd.flow, back.flow
    ))
}

fn arnold() -> Check {
    let mut counts = Vec::new();
    for eps in [1e-3, 1e-2, 1e-1] {
        let h = HamiltonianSpec::separable_cosine(1, eps);
        let p = GalerkinProblem::new(&FrameSpec::standard_torus(), &h, 4).map_err(err)?;
        let n = arnold_count(&p, &MultistartOptions::default()).map_err(err)?;
        ensure(n == 16, format!("ε = {eps}: {n} solutions"))?;
        counts.push(n);
    }
    Ok(format!("counts {counts:?} for ε = 1e-3, 1e-2, 1e-1 at N = 4"))
}

fn floer_energy() -> Check {
    let eps = 0.05;
    let mut residuals = Vec::new();
    for nodes in [301, 601, 1201] {
        let h = HamiltonianSpec::separable_cosine(1, eps);
        let g = GalerkinProblem::new(&FrameSpec::standard_torus(), &h, 4).map_err(err)?;
        let minus = GalerkinField::constant(g.grid(), &[0.5, 0.0, 0.0, 0.0]);
        let plus = GalerkinField::constant(g.grid(), &[0.0; 4]);
        let t = floer_trajectory(&FloerProblem::new(g, minus, plus, 6.0, nodes)).map_err(err)?;
        let rise = t.max_action_increase();
        ensure(rise <= 0.0, format!("N_s = {nodes}: action rises by {rise:.2e}"))?;
        let r = floer_energy_residual(&t);
        ensure(r < 1e-4, format!("N_s = {nodes}: residual {r:.2e}"))?;
        residuals.push(r);
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    ensure(ratios.iter().all(|q| *q >= 2.0), format!("refinement ratios {ratios:?}"))?;
    Ok(format!("S = 6, N_s = 301/601/1201: residuals {}, ratios {ratios:.2?}, action monotone", sci(&residuals)))
}

fn ampleness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let (mut plus, mut minus) = (0, 0);
    for i in 0..1000 {
        let d = AmpleData::random(&mut rng);
        let sign = is_nondegenerate(&d);
        ensure((sign != 0) == nondegenerate_oracle(&d, 16, &mut rng), format!("instance {i} disagrees"))?;
        match sign {
            1 => plus += 1,
            -1 => minus += 1,
            _ => {}
        }
    }
    ensure(plus > 0 && minus > 0, "one sign class never sampled")?;
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let d = AmpleData::random(&mut rng);
        let sign = if i % 2 == 0 { 1 } else { -1 };
        let dec = convex_decompose(&d, sign).map_err(err)?;
        ensure(is_nondegenerate(&dec.first) == sign && is_nondegenerate(&dec.second) == sign, "wrong sign")?;
        ensure(dec.first.restriction() == d.restriction() && dec.second.restriction() == d.restriction(), "left slice")?;
        worst = worst.max(dec.midpoint_error(&d));
    }
    ensure(worst < 1e-12, format!("midpoint error {worst:.2e}"))?;
    let mut empty = AmpleData::canonical();
    empty.l[1][2] = -empty.s[0];
    ensure(convex_decompose(&empty, 1) == Err(FueterError::EmptyIntersection), "empty slice accepted")?;
    Ok(format!("1000 instances agree ({plus} +, {minus} -); 100 splits, midpoint error {worst:.1e}; empty slice rejected"))
}

fn main() {
    let criteria: [(&str, fn() -> Check, u64); 12] = [
        ("torus regularity", torus_regularity, 5),
        ("standard sphere", sphere_standard, 10),
        ("singular sphere", sphere_singular, 10),
        ("product frame", product_frame, 60),
        ("square of the operator", operator_identity, 10),
        ("energy identity", energy_identity, 10),
        ("isoperimetric inequality", isoperimetric, 5),
        ("spin-c shift", spinc_shift, 5),
        ("spectral flow", spectral_flow_check, 60),
        ("Arnold count", arnold, 120),
        ("trajectory energy", floer_energy, 120),
        ("ampleness", ampleness, 5),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let over = took > Duration::from_secs(*budget);
        let (status, detail) = match (&out, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d} (over the {budget} s budget)")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        println!("{status} {:>2} {name} [{:.2} s]: {detail}", i + 1, took.as_secs_f64());
        if status == "FAIL" {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria passed", criteria.len());
}
