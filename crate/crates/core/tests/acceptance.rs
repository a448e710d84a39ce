//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! verdict lines are always printed; exits nonzero if any check fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use greenpot::continuum::{ball_kernel_integral, green_constant, riesz_params, KernelSpec, Transform};
use greenpot::domain::{cubic_open_set, exterior_grid, grid_points, interior_grid, DomainSpec, GridSpec};
use greenpot::harness::cmp_functional_samples;
use greenpot::lattice::{killed_green_matrix, whole_space_table, KilledGreenMatrix, LatticeSet};
use greenpot::montecarlo::{
    estimate_riesz_potential, ks_two_sample, sample_half_stable, sample_stable_increment, McEstimate,
    RieszMcConfig, RngStream,
};
use greenpot::operator::{ball_indicator, converge_disk_kernel, green_dominated, DiscreteOperator};
use greenpot::potential::{
    classify, hadamard_exp, hadamard_power, is_inverse_m_matrix, potential_population, sample_cmp, Verdict,
};
use nalgebra::DMatrix;
use rand::SeedableRng;

const SEED: u64 = 20_240_601;

/// `(pass, detail)` for one criterion.
type Check = Result<(bool, String), String>;

fn population() -> Vec<KilledGreenMatrix> {
    potential_population(&[2, 3], 200, (2, 40), SEED).expect("population")
}

fn lattice_asymptotics() -> Check {
    let t = whole_space_table(3).map_err(|e| e.to_string())?;
    let oracle = |x: &[i64]| {
        let r = x.iter().map(|k| (k * k) as f64).sum::<f64>().sqrt();
        3.0 / (2.0 * PI) / r
    };
    let mut worst: f64 = 0.0;
    for k in 10..=16i64 {
        for x in [vec![k, 0, 0], vec![k, 3, 0], vec![k, k, 0], vec![k, k, k], vec![k, 5, 2]] {
            worst = worst.max((t.value(&x) / oracle(&x) - 1.0).abs());
        }
    }
    let dev = |x: [i64; 3]| (t.value(&x) / oracle(&x) - 1.0).abs();
    let (d5, d15) = (dev([5, 0, 0]), dev([15, 0, 0]));
    Ok((
        worst <= 0.05 && d15 <= 0.5 * d5,
        format!("max |ratio-1| at |x|>=10 is {worst:.2e}; deviation {d5:.3e} at |x|=5, {d15:.3e} at |x|=15"),
    ))
}

fn hadamard_power_stability() -> Check {
    let pop = population();
    let mut total = 0;
    let mut passed = 0;
    for g in &pop {
        for beta in [1.0, 1.5, 2.0, 3.0, 3.7] {
            let t = hadamard_power(&g.entries, beta).map_err(|e| e.to_string())?;
            total += 1;
            passed += usize::from(is_inverse_m_matrix(&t, 1e-8).verdict == Verdict::Potential);
        }
    }
    Ok((passed == total, format!("{passed}/{total} Hadamard powers are potentials")))
}

fn hadamard_exp_stability() -> Check {
    let pop = population();
    let mut total = 0;
    let mut passed = 0;
    for g in &pop {
        for alpha in [0.1, 0.5, 1.0] {
            let t = hadamard_exp(&g.entries, alpha).map_err(|e| e.to_string())?;
            total += 1;
            passed += usize::from(is_inverse_m_matrix(&t, 1e-8).verdict == Verdict::Potential);
        }
    }
    Ok((passed == total, format!("{passed}/{total} Hadamard exponentials are potentials")))
}

fn cmp_inequality() -> Check {
    let pop = population();
    let mut worst = f64::INFINITY;
    for (k, g) in pop.iter().enumerate() {
        let s = sample_cmp(&g.entries, 10_000, SEED + k as u64).map_err(|e| e.to_string())?;
        worst = worst.min(s.min_value / g.entries.amax());
    }
    Ok((worst >= -1e-10, format!("smallest sampled value / matrix scale = {worst:.3e} over 200 x 10^4 vectors")))
}

fn non_potential_detection() -> Check {
    let u = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let report = classify(&u, 1e-8, 10_000, SEED).map_err(|e| e.to_string())?;
    let s = sample_cmp(&u, 10_000, SEED).map_err(|e| e.to_string())?;
    Ok((
        report.verdict == Verdict::NotPotential && s.min_value < 0.0,
        format!("verdict {:?}, CMP certificate value {:.4} at v = {:?}", report.verdict, s.min_value, s.argmin),
    ))
}

fn discrete_cmp_positivity() -> Check {
    let mut settings: Vec<(String, DomainSpec, GridSpec, Transform)> = Vec::new();
    let ball3 = DomainSpec::ball(vec![0.0; 3], 1.0).map_err(|e| e.to_string())?;
    let cubes3 = cubic_open_set(3, vec![vec![0, 0, 0], vec![1, 0, 0]]).map_err(|e| e.to_string())?;
    let disk = DomainSpec::ball(vec![0.0; 2], 1.0).map_err(|e| e.to_string())?;
    let cubes2 = cubic_open_set(2, vec![vec![0, 0], vec![1, 0]]).map_err(|e| e.to_string())?;
    let g3 = GridSpec::new(3, 27).unwrap();
    let g2 = GridSpec::new(2, 162).unwrap();
    for (name, dom) in [("ball", &ball3), ("two cubes", &cubes3)] {
        for beta in [1.0, 1.5, 2.0] {
            settings.push((format!("d=3 {name} beta={beta}"), dom.clone(), g3, Transform::Power(beta)));
        }
    }
    for (name, dom) in [("disk", &disk), ("two squares", &cubes2)] {
        for beta in [1.0, 2.0, 4.0] {
            settings.push((format!("d=2 {name} beta={beta}"), dom.clone(), g2, Transform::Power(beta)));
        }
        for alpha in [1.0, 3.0, 6.0] {
            settings.push((format!("d=2 {name} alpha={alpha}"), dom.clone(), g2, Transform::Exp(alpha)));
        }
    }
    let mut failures = Vec::new();
    let mut worst_ratio = f64::INFINITY;
    let mut crossing = 0usize;
    for (k, (name, dom, grid, t)) in settings.iter().enumerate() {
        let op = DiscreteOperator::killed(dom, *grid, *t).map_err(|e| e.to_string())?;
        let samples = cmp_functional_samples(&op, 20, SEED + 100 * k as u64).map_err(|e| e.to_string())?;
        for s in &samples {
            crossing += usize::from(s.value > 0.0);
            if s.value < s.threshold {
                failures.push(format!("{name} #{}: {:.3e}", s.index, s.value));
            }
            if s.threshold < 0.0 {
                worst_ratio = worst_ratio.min(s.value / -s.threshold);
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "{} settings x 20 functions, {crossing} with K f crossing 1, min value/|threshold| = {worst_ratio:.3e}{}",
            settings.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    ))
}

fn disk_convergence() -> Check {
    let rep = converge_disk_kernel(&[0.2, 0.0], &[-0.3, 0.1], 2, 4).map_err(|e| e.to_string())?;
    let errs: Vec<String> = rep.levels.iter().map(|l| format!("n={}: {:.4}", l.n, l.rel_err)).collect();
    let last = rep.final_rel_err().unwrap();
    Ok((
        rep.is_monotone() && last <= 0.05,
        format!("reference {:.6}, relative errors [{}], monotone {}", rep.reference, errs.join(", "), rep.is_monotone()),
    ))
}

fn free_space_convergence() -> Check {
    let c = green_constant(3);
    // radial integrals of (C/r)^beta over the unit ball
    let oracle = |beta: f64| c.powf(beta) * 4.0 * PI / (3.0 - beta);
    let mut ok = (oracle(1.0) - 1.0).abs() < 1e-14;
    let grid = GridSpec::new(3, 3 * 81).unwrap();
    let ball = DomainSpec::ball(vec![0.0; 3], 1.0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for beta in [1.0, 1.5] {
        let spec = KernelSpec::free_power(3, beta).map_err(|e| e.to_string())?;
        let quad = ball_kernel_integral(&spec, &[0.0; 3], &[0.0; 3], 1.0, 1e-10).map_err(|e| e.to_string())?;
        let op = DiscreteOperator::free(&ball, grid, Transform::Power(beta)).map_err(|e| e.to_string())?;
        let v = op.apply(ball_indicator(&[0.0; 3], 1.0), &[0.0; 3]).map_err(|e| e.to_string())?;
        let rel = (v / oracle(beta) - 1.0).abs();
        ok &= (quad / oracle(beta) - 1.0).abs() < 1e-8 && rel <= 0.03;
        parts.push(format!("beta={beta}: operator {v:.5} vs {:.5} (rel {rel:.4})", oracle(beta)));
    }
    Ok((ok, parts.join("; ")))
}

fn riesz_monte_carlo() -> Check {
    let p = riesz_params(3, 2.0).map_err(|e| e.to_string())?;
    let oracle = 1.0 / PI; // C(3)^2 * 4 pi * radius
    let spec = KernelSpec::free_power(3, 2.0).map_err(|e| e.to_string())?;
    let quad = ball_kernel_integral(&spec, &[0.0; 3], &[0.0; 3], 1.0, 1e-10).map_err(|e| e.to_string())?;
    let cfg = RieszMcConfig {
        d: 3,
        beta: 2.0,
        center: vec![0.0; 3],
        radius: 1.0,
        x: vec![0.0; 3],
        time_step: 0.01,
        horizon: 6.0,
        trials: 100_000,
        max_tail_bound: None,
    };
    let e = estimate_riesz_potential(&cfg, RngStream::new(SEED, 1)).map_err(|e| e.to_string())?;
    let tail = e.tail_bound.unwrap();
    let ok = (p.alpha - 1.0).abs() < 1e-12
        && (p.d_const - 2f64.sqrt() / 4.0).abs() < 1e-12
        && (quad - oracle).abs() < 1e-8
        && (e.mean - oracle).abs() <= 3.0 * e.stderr + tail
        && e.stderr <= 0.05 * oracle;
    Ok((
        ok,
        format!(
            "estimate {:.5} +- {:.5}, tail bound {:.5}, oracle {:.5}, |diff| {:.5}",
            e.mean,
            e.stderr,
            tail,
            oracle,
            (e.mean - oracle).abs()
        ),
    ))
}

fn subordinator_law() -> Check {
    let n = 1_000_000;
    let mut r1 = RngStream::new(SEED, 10).rng();
    let mut r2 = RngStream::new(SEED, 11).rng();
    let a: Vec<f64> = (0..n).map(|_| sample_half_stable(1.0, &mut r1).unwrap()).collect();
    let b: Vec<f64> = (0..n).map(|_| sample_stable_increment(1.0, 1.0, &mut r2).unwrap()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for lam in [0.5f64, 1.0, 2.0] {
        let exact = (-lam.sqrt()).exp();
        for (name, s) in [("passage", &a), ("kanter", &b)] {
            let vals: Vec<f64> = s.iter().map(|v| (-lam * v).exp()).collect();
            let e = McEstimate::from_samples(&vals, SEED).unwrap();
            let z = (e.mean - exact) / e.stderr;
            ok &= z.abs() <= 4.0;
            parts.push(format!("{name} lambda={lam} z={z:.2}"));
        }
    }
    let (stat, p) = ks_two_sample(&a[..200_000], &b[..200_000]).map_err(|e| e.to_string())?;
    ok &= p > 0.01;
    Ok((ok, format!("{}; KS D={stat:.4} p={p:.3}", parts.join(", "))))
}

fn dominated_chain(sets: &[LatticeSet]) -> Result<bool, String> {
    let mats: Vec<Option<KilledGreenMatrix>> = sets
        .iter()
        .map(|s| if s.is_empty() { Ok(None) } else { killed_green_matrix(s).map(Some) })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok(mats.windows(2).all(|w| match (&w[0], &w[1]) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(a), Some(b)) => green_dominated(a, b, 1e-10),
    }))
}

fn domain_squeeze() -> Check {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SEED);
    let mut balls = vec![DomainSpec::ball(vec![0.0; 2], 1.0).unwrap(), DomainSpec::ball(vec![0.0; 3], 1.0).unwrap()];
    for _ in 0..8 {
        let d = rng.random_range(2..=3);
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        balls.push(DomainSpec::ball(c, rng.random_range(0.6..1.4)).unwrap());
    }
    let mut ok = true;
    let mut checked = 0;
    for ball in &balls {
        let levels: &[u64] = if ball.d == 2 { &[2, 18, 162] } else { &[3, 27] };
        for &n in levels {
            let g = GridSpec::new(ball.d, n).unwrap();
            let sets = [
                interior_grid(ball, &g).map_err(|e| e.to_string())?,
                grid_points(ball, &g).map_err(|e| e.to_string())?,
                exterior_grid(ball, &g).map_err(|e| e.to_string())?,
            ];
            ok &= dominated_chain(&sets)?;
            checked += 1;
        }
    }
    let grid = GridSpec::new(2, 18).unwrap();
    let strip = DomainSpec::axis_box(vec![-1.0, f64::NEG_INFINITY], vec![1.0, f64::INFINITY]).unwrap();
    let truncated: Vec<LatticeSet> = (1..=5)
        .map(|r| grid_points(&strip.clone().intersect_with_ball(r as f64).unwrap(), &grid))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let strip_ok = dominated_chain(&truncated)?;
    Ok((
        ok && strip_ok,
        format!("{checked} ball/level triples interior <= grid <= exterior: {ok}; strip truncations R=1..5 increasing: {strip_ok}"),
    ))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("lattice asymptotics", lattice_asymptotics),
        ("Hadamard power stability", hadamard_power_stability),
        ("Hadamard exponential stability", hadamard_exp_stability),
        ("CMP inequality on potentials", cmp_inequality),
        ("non-potential detection", non_potential_detection),
        ("discrete CMP positivity", discrete_cmp_positivity),
        ("2D disk convergence", disk_convergence),
        ("free-space operator convergence", free_space_convergence),
        ("Riesz Monte Carlo", riesz_monte_carlo),
        ("subordinator law", subordinator_law),
        ("monotone domain squeeze", domain_squeeze),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let num = i + 1;
        if !only.is_empty() && !only.contains(&num) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        println!("criterion {num:>2} [{name}]: {} ({detail}) [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(num);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
