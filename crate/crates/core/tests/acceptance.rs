//! Acceptance criteria 1–9. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured numbers and then asserts.

use cqbm_core::channel::{build_projection, smearing_weight, PhaseSpaceRegion, SmearingWidths};
use cqbm_core::exact_collision::Particle;
use cqbm_core::moments::{artifact_diffusion, friction_constant};
use cqbm_core::packets::classical_collision_map;
use cqbm_core::trajectories::run;
use cqbm_core::{
    compare_to_analytic, CollisionChannel, CollisionPair64, CollisionTiming, EnsembleSpec, ExactCollision64, GridParams,
    HilbertGrid, OperatorGrid, PairLabels, ThermalGasSpec64, TrajectoryParams64,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

fn fig1() -> ExactCollision64 {
    let pair = CollisionPair64::matched(1.0, 0.3, 4.0, 1.0).unwrap();
    ExactCollision64::centre_of_mass(pair, 10.0, -2.0).unwrap()
}

/// Heavy slow particle in a light gas: α = 0.01, ħ = 0.01, σ = 0.1.
fn slow_params(n_g: f64, delta: f64, horizon: f64, timing: CollisionTiming, seed: u64) -> TrajectoryParams64 {
    let pair = CollisionPair64::matched(1.0, 0.01, 0.1, 0.01).unwrap();
    let gas = ThermalGasSpec64::with_units(1.0, n_g, 0.01, pair.gas_width, 0.01, 1.0).unwrap();
    TrajectoryParams64 { pair, gas, delta, horizon, timing, seed }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn criterion_1_grid_oracle_certifies_exact_solution() {
    let exact = fig1();
    let tc = exact.collision_time();
    let params = GridParams::covering(&exact, 3.0 * tc, 1024);
    let errors: Vec<f64> = [0.0, tc, 3.0 * tc]
        .iter()
        .map(|&t| compare_to_analytic(&exact, t, params).unwrap().relative_l2_error)
        .collect();
    // Refinement is visible only on an under-resolved grid; at 1024² both
    // sides already sit at rounding level.
    let coarse = GridParams { n_com: 48, n_rel: 47, enforce_nyquist: false, ..params };
    let e1 = compare_to_analytic(&exact, tc, coarse).unwrap().relative_l2_error;
    let e2 = compare_to_analytic(&exact, tc, coarse.refined(2)).unwrap().relative_l2_error;
    let pass = errors.iter().all(|&e| e < 1e-3) && e2 < e1;
    report(1, pass, format!("L2 errors at 0, tc, 3tc on 1024²: {errors:?}; refinement {e1:.3e} -> {e2:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_2_unitarity() {
    let exact = fig1();
    let tc = exact.collision_time();
    let worst = (0..=10)
        .map(|i| (exact.norm(0.5 * i as f64 * tc, 1e-10).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = worst < 1e-6;
    report(2, pass, format!("max |norm − 1| over [0, 5tc] = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_3_continuous_position_jumping_momentum() {
    let exact = fig1();
    let tc = exact.collision_time();
    let dx = 0.05;
    let xs: Vec<f64> = (0..=1200).map(|i| -30.0 + i as f64 * dx).collect();
    let marginal = |t: f64| -> Vec<f64> { xs.iter().map(|&x| exact.position_marginal(t, x).unwrap()).collect() };
    let bases: Vec<f64> = (0..10).map(|i| 0.5 * i as f64 * tc).collect();
    let steps = [0.2, 0.1, 0.05];
    let mut worst_tv = Vec::new();
    for &h in &steps {
        let tv = bases
            .iter()
            .map(|&t| {
                let (a, b) = (marginal(t), marginal(t + h));
                0.5 * dx * a.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max);
        worst_tv.push(tv);
    }
    let logs_h: Vec<f64> = steps.iter().map(|h: &f64| h.ln()).collect();
    let logs_tv: Vec<f64> = worst_tv.iter().map(|v| v.ln()).collect();
    let order = least_squares_slope(&logs_h, &logs_tv);
    let c = worst_tv.last().unwrap() / steps.last().unwrap();
    let continuous = (order - 1.0).abs() < 0.1 && c.is_finite();

    let p_mean = |t: f64| exact.mean_momentum(Particle::Brownian, t).unwrap();
    let (start, end) = (p_mean(0.0), p_mean(5.0 * tc));
    // Width between the levels −2 + 4Φ(∓2) of the transition.
    let crossing = |level: f64| {
        let (mut lo, mut hi) = (0.0, 5.0 * tc);
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if p_mean(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let width = crossing(-2.0 + 4.0 * normal_cdf(2.0)) - crossing(-2.0 + 4.0 * normal_cdf(-2.0));
    let jumps = (start + 2.0).abs() < 1e-2 && (end - 2.0).abs() < 1e-2 && (width / tc - 1.0).abs() <= 0.15;
    let pass = continuous && jumps;
    report(
        3,
        pass,
        format!(
            "TV order {order:.3} (C ≈ {c:.3}); <p> {start:.4} -> {end:.4}, window {width:.3} vs t_c {tc:.3} (ratio {:.3})",
            width / tc
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_outgoing_product_state() {
    let exact = fig1();
    let fidelity = exact.outgoing_fidelity(5.0 * exact.collision_time()).unwrap();
    let pass = fidelity >= 0.99;
    report(4, pass, format!("fidelity at 5t_c = {fidelity:.6}"));
    assert!(pass);
}

#[test]
fn criterion_5_channel_certification() {
    let alpha = 0.3;
    let pair = CollisionPair64::matched(1.0, alpha, 1.0, 1.0).unwrap();
    let grid = HilbertGrid::centred(128, 0.125, 1.0, 1.0).unwrap();
    let ch = CollisionChannel::new(pair, grid.clone(), 6.0).unwrap();
    let (x, p, gas, t) = (0.0, 0.0, (-3.0, 1.0), 1.0);
    let rho = OperatorGrid::pure_state(grid.clone(), &grid.coherent_state(x, p));
    let out = ch.apply(&rho, gas, t).unwrap();
    let xb = (2.0 * alpha * gas.0 + (1.0 - alpha) * x) / (1.0 + alpha);
    let pb = (2.0 * gas.1 + (1.0 - alpha) * p) / (1.0 + alpha);
    let mut target: Vec<_> = grid.coherent_state(xb, pb).iter().copied().collect();
    grid.evolve(&mut target, t, 1.0);
    let fidelity = out.rho.expectation(&DVector::from_vec(target)).re;
    // Completeness on rows well inside the x̃ mesh.
    let total = ch.integrated_effects((-8.0, 8.0));
    let completeness = total.distance_to_scalar(1.0, 40..88);
    let pass = fidelity >= 0.95 && out.trace_error < 1e-3 && completeness < 1e-3;
    report(
        5,
        pass,
        format!(
            "N = {}, fidelity {fidelity:.5}, trace error {:.2e}, completeness {completeness:.2e}",
            grid.n, out.trace_error
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_thermalization_and_friction() {
    let base = slow_params(0.003, 2.0, 0.0, CollisionTiming::Uniform, 61);
    let f = friction_constant(&base.gas, base.pair.brownian_mass).unwrap();
    let horizon = 1.5 / f;
    let decay = run(
        &EnsembleSpec { n: 10_000, mean_x: 0.0, mean_p: 1.5, var_x: 0.01, var_p: 1.0 },
        &TrajectoryParams64 { horizon, ..base },
    )
    .unwrap();
    let ts: Vec<f64> = decay.iter().map(|s| s.t).collect();
    let logs: Vec<f64> = decay.iter().map(|s| s.mean_p.ln()).collect();
    let fitted = -least_squares_slope(&ts, &logs);
    let rel = (fitted / f - 1.0).abs();

    let stationary = run(
        &EnsembleSpec { n: 10_000, mean_x: 0.0, mean_p: 0.0, var_x: 0.01, var_p: 1.0 },
        &TrajectoryParams64 { horizon: 3.0 / f, seed: 62, ..base },
    )
    .unwrap();
    let last = stationary.last().unwrap();
    let mkt = base.pair.brownian_mass * base.gas.thermal_energy();
    let z = (last.mean_p2 - mkt) / last.se_p2;
    let pass = rel < 0.05 && z.abs() < 3.0;
    report(
        6,
        pass,
        format!(
            "fitted f {fitted:.4e} vs {f:.4e} (rel {rel:.3}); stationary <p²> {:.4} ± {:.4} vs {mkt} ({z:.2} se)",
            last.mean_p2, last.se_p2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_artifact_position_diffusion() {
    let deltas = [0.4, 1.6f64.sqrt(), 4.0];
    let horizon = 1200.0;
    let spec = EnsembleSpec { n: 20_000, mean_x: 0.0, mean_p: 0.0, var_x: 0.005, var_p: 1.0 };
    let mut rates = Vec::new();
    let mut ratios = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        let p = slow_params(0.001, delta, horizon, CollisionTiming::Midpoint, 70 + i as u64);
        let s = run(&spec, &p).unwrap();
        let last = s.last().unwrap();
        let rate = last.excess_x2 / last.t;
        rates.push(rate);
        ratios.push(rate / artifact_diffusion(&p.gas, delta));
    }
    let slope = least_squares_slope(
        &deltas.iter().map(|d| d.ln()).collect::<Vec<_>>(),
        &rates.iter().map(|r| r.ln()).collect::<Vec<_>>(),
    );
    let scaling = (slope - 2.0).abs() <= 0.2;
    let magnitude = ratios.iter().all(|r| (0.5..=2.0).contains(r));
    let pass = scaling && magnitude;
    report(
        7,
        pass,
        format!(
            "log-log slope {slope:.3}; measured/nominal coefficient ratios {:?} (factor-2 band required; \
             (α/(1+α))² = {:.4e})",
            ratios.iter().map(|r| format!("{r:.4e}")).collect::<Vec<_>>(),
            (0.01f64 / 1.01).powi(2)
        ),
    );
    assert!(scaling, "slope {slope}");
    assert!(magnitude, "ratios {ratios:?}");
}

#[test]
fn criterion_8_thermal_decomposition() {
    let spec = ThermalGasSpec64::new(1.3, 0.01, 0.3, 10.0).unwrap();
    let identity =
        (spec.total_momentum_variance() - spec.gas_mass * spec.thermal_energy()).abs() / spec.total_momentum_variance();
    let sd = spec.mixing_momentum_variance().unwrap().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let mut ps: Vec<f64> = (0..n).map(|_| spec.sample_gas_state((-5.0, 5.0), &mut rng).unwrap().1).collect();
    ps.sort_by(f64::total_cmp);
    let d = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let c = normal_cdf(p / sd);
            (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
        })
        .fold(0.0, f64::max);
    let critical = 1.628 / (n as f64).sqrt();
    let pass = identity < 1e-12 && d < critical;
    report(8, pass, format!("variance identity rel err {identity:.2e}; KS {d:.5} vs 1% critical {critical:.5}"));
    assert!(pass);
}

#[test]
fn criterion_9_property_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_p: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(0.01..5.0);
        let l = PairLabels {
            x_g: rng.random_range(-10.0..10.0),
            p_g: rng.random_range(-10.0..10.0),
            x: rng.random_range(-10.0..10.0),
            p: rng.random_range(-10.0..10.0),
        };
        let o = classical_collision_map(alpha, l);
        let (p0, p1) = (l.p_g + l.p, o.p_g + o.p);
        let (e0, e1) = (l.p_g * l.p_g / alpha + l.p * l.p, o.p_g * o.p_g / alpha + o.p * o.p);
        worst_p = worst_p.max((p1 - p0).abs() / (l.p_g.abs() + l.p.abs()));
        worst_e = worst_e.max((e1 - e0).abs() / e0);
    }

    let mut worst_w: f64 = 0.0;
    for &alpha in &[0.1, 0.3, 0.9] {
        let s = SmearingWidths::new(alpha, 1.3, 0.7);
        let (nx, np) = (600, 600);
        let (hx, hp) = (24.0 * s.x / nx as f64, 24.0 * s.p / np as f64);
        let mut total = 0.0;
        for i in 0..=nx {
            for j in 0..=np {
                let (x, p) = (-12.0 * s.x + i as f64 * hx, -12.0 * s.p + j as f64 * hp);
                let wx = if i == 0 || i == nx { 0.5 } else { 1.0 };
                let wp = if j == 0 || j == np { 0.5 } else { 1.0 };
                total += wx * wp * smearing_weight(alpha, 1.3, 0.7, x, p).unwrap();
            }
        }
        worst_w = worst_w.max((total * hx * hp - 1.0).abs());
    }

    let pair = CollisionPair64::matched(1.0, 0.3, 1.0, 1.0).unwrap();
    let ch = CollisionChannel::new(pair, HilbertGrid::centred(128, 0.125, 1.0, 1.0).unwrap(), 6.0).unwrap();
    let effect_min = ch.effect_operator(0.7, -0.4).spectrum_bounds().min;
    let rho = OperatorGrid::pure_state(ch.grid.clone(), &ch.grid.coherent_state(0.0, 0.0));
    let output_min = ch.apply(&rho, (-3.0, 1.0), 1.0).unwrap().min_eigenvalue;
    let g = HilbertGrid::centred(256, 0.25, 2.0, 1.0).unwrap();
    let gamma = build_projection(&PhaseSpaceRegion::new(-20.0, 3.0, 0.1, 1.0, 1.0).unwrap(), &g).unwrap();
    let gb = gamma.spectrum_bounds();

    let pass = worst_p < 1e-12
        && worst_e < 1e-12
        && worst_w < 1e-8
        && effect_min > -1e-8
        && output_min > -1e-6
        && gb.min > -1e-8
        && gb.max < 1.0 + 1e-3;
    report(
        9,
        pass,
        format!(
            "map momentum {worst_p:.1e}, energy {worst_e:.1e}; w norm {worst_w:.1e}; floors: effect {effect_min:.1e}, \
             channel output {output_min:.1e}, projection [{:.1e}, {:.6}]",
            gb.min, gb.max
        ),
    );
    assert!(pass);
}
