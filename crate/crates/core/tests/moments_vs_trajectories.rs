use cqbm_core::moments::{compare_to_trajectories, integrate_at};
use cqbm_core::trajectories::run;
use cqbm_core::{
    CollisionPair64, CollisionTiming, EnsembleSpec, FrictionParams64, MomentState64, ThermalGasSpec64,
    TrajectoryParams64,
};

fn params(n_g: f64, horizon: f64) -> TrajectoryParams64 {
    let pair = CollisionPair64::matched(1.0, 0.01, 0.1, 0.01).unwrap();
    let gas = ThermalGasSpec64::with_units(1.0, n_g, 0.01, pair.gas_width, 0.01, 1.0).unwrap();
    TrajectoryParams64 { pair, gas, delta: 2.0, horizon, timing: CollisionTiming::Uniform, seed: 5 }
}

fn ode_on_mc_grid(
    p: &TrajectoryParams64,
    spec: &EnsembleSpec<f64>,
) -> (Vec<cqbm_core::EnsembleStats64>, cqbm_core::MomentSeries64) {
    let mc = run(spec, p).unwrap();
    let fp = FrictionParams64::from_gas(&p.gas, p.pair.brownian_mass, p.delta, false).unwrap();
    let times: Vec<f64> = mc.iter().map(|s| s.t).collect();
    let dt = if fp.f > 0.0 { 0.01 / fp.f } else { 1.0 };
    let ode = integrate_at(&MomentState64::from_stats(&mc[0]), &fp, &times, dt).unwrap();
    (mc, ode)
}

#[test]
fn free_ballistics_agree_exactly() {
    let p = params(0.0, 200.0);
    let spec = EnsembleSpec { n: 4000, mean_x: 0.5, mean_p: 0.3, var_x: 0.2, var_p: 0.5 };
    let (mc, ode) = ode_on_mc_grid(&p, &spec);
    let report = compare_to_trajectories(&ode, &mc).unwrap();
    assert!(report.worst() < 1e-6, "{report:?}");
    assert!(!report.slow_particle_violation);
}

#[test]
fn slow_thermal_particle_within_three_standard_errors() {
    let p = params(0.003, 1000.0);
    let spec = EnsembleSpec { n: 10_000, mean_x: 0.0, mean_p: 0.0, var_x: 0.01, var_p: 1.0 };
    let (mc, ode) = ode_on_mc_grid(&p, &spec);
    let report = compare_to_trajectories(&ode, &mc).unwrap();
    assert!(!report.slow_particle_violation);
    for (k, d) in report.max_deviation_in_se.iter().enumerate() {
        assert!(*d < 3.0, "moment {k}: {d} standard errors ({report:?})");
    }
}

#[test]
fn fast_particle_is_flagged() {
    let p = params(0.003, 20.0);
    let spec = EnsembleSpec { n: 2000, mean_x: 0.0, mean_p: 5.0, var_x: 0.01, var_p: 1.0 };
    let (mc, ode) = ode_on_mc_grid(&p, &spec);
    let report = compare_to_trajectories(&ode, &mc).unwrap();
    assert!(report.slow_particle_violation);
    assert!(report.slow_particle_ratio > 0.3);
}
