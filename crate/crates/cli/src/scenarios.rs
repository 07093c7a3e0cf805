//! Scenario runners. Each one validates its whole configuration, computes,
//! and returns the artifacts; nothing is written before computation ends.

use cqbm_core::moments::{
    artifact_diffusion, asymptotic_spreading_rate, compare_to_trajectories, integrate_at, MomentSeries,
};
use cqbm_core::trajectories::run;
use cqbm_core::{
    compare_to_analytic, CollisionChannel, CollisionPair64, CollisionTiming, EnsembleSpec, EnsembleStats64,
    ExactCollision64, FrictionParams64, GridParams, HilbertGrid, MomentState64, OperatorGrid, PairLabels,
    ThermalGasSpec64, TrajectoryParams64,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::*;
use crate::error::CliError;
use crate::output::{Artifacts, Check, Table};

fn pair(p: &Physics) -> Result<CollisionPair64, CliError> {
    Ok(CollisionPair64::matched(p.brownian_mass, p.alpha, p.brownian_width, p.hbar)?)
}

fn gas_spec(p: &Physics, pair: &CollisionPair64, g: &Gas) -> Result<ThermalGasSpec64, CliError> {
    Ok(ThermalGasSpec64::with_units(g.temperature, g.number_density, pair.gas_mass, pair.gas_width, p.hbar, p.k_b)?)
}

fn lab_labels(pair: &CollisionPair64, l: &Labels) -> Result<PairLabels<f64>, CliError> {
    match (l.x_g, l.p_g) {
        (None, None) => Ok(PairLabels { x_g: -l.x / pair.alpha, p_g: -l.p, x: l.x, p: l.p }),
        (Some(x_g), Some(p_g)) => Ok(PairLabels { x_g, p_g, x: l.x, p: l.p }),
        _ => Err(CliError::invalid("labels", "give both x_g and p_g or neither")),
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn timing(t: Timing) -> CollisionTiming {
    match t {
        Timing::Uniform => CollisionTiming::Uniform,
        Timing::Midpoint => CollisionTiming::Midpoint,
    }
}

fn trapezoid(h: f64, ys: &[f64]) -> f64 {
    let inner: f64 = ys.iter().sum();
    h * (inner - 0.5 * (ys[0] + ys[ys.len() - 1]))
}

fn validity_json(v: &cqbm_core::ValidityReport64) -> Value {
    json!({
        "overlap_ratio": v.overlap_ratio,
        "momentum_ratio": v.momentum_ratio,
        "collision_time": v.collision_time,
        "ldht_number": v.ldht_number,
        "coarse_graining_ratio": v.coarse_graining_ratio,
        "step_collision_probability": v.step_collision_probability,
    })
}

/// `collide` and `fig1`: position and momentum marginals of the Brownian
/// particle on a time grid.
pub fn collide(c: &CollideConfig) -> Result<Artifacts, CliError> {
    let pair = pair(&c.physics)?;
    let labels = lab_labels(&pair, &c.labels)?;
    let exact = ExactCollision64::from_lab(pair, labels)?;
    let tc = exact.collision_time();
    let t_max = c.times.t_max.unwrap_or(5.0 * tc);
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(CliError::invalid("times.t_max", "must be non-negative and finite"));
    }
    if c.times.points == 0 {
        return Err(CliError::invalid("times.points", "must be at least 1"));
    }
    c.position.validate("position")?;
    c.momentum.validate("momentum")?;
    positive("marginal_tolerance", c.marginal_tolerance)?;
    let validity = match (&c.gas, c.delta) {
        (Some(g), Some(d)) => {
            positive("delta", d)?;
            Some(validity_json(&pair.validity_report(&labels, &gas_spec(&c.physics, &pair, g)?, d)))
        }
        (None, None) => None,
        _ => return Err(CliError::invalid("gas", "the validity report needs both `gas` and `delta`")),
    };

    let times = Axis { min: 0.0, max: t_max, points: c.times.points };
    let times = if c.times.points == 1 { vec![0.0] } else { times.values() };
    let xs = c.position.values();
    let ps = c.momentum.values();
    let frames: Vec<(Vec<f64>, Vec<f64>)> = times
        .par_iter()
        .map(|&t| -> Result<_, CliError> {
            let pos = xs.iter().map(|&x| exact.position_marginal(t, x)).collect::<Result<Vec<_>, _>>()?;
            let mom = ps.iter().map(|&p| exact.momentum_marginal(t, p)).collect::<Result<Vec<_>, _>>()?;
            Ok((pos, mom))
        })
        .collect::<Result<_, _>>()?;
    let fidelity = exact.outgoing_fidelity(t_max)?;

    let mut position = Table::new("position_marginal", &["t", "x_prime", "density"]);
    let mut momentum = Table::new("momentum_marginal", &["t", "p_prime", "density"]);
    let mut observables =
        Table::new("observables", &["t", "position_integral", "momentum_integral", "mean_x", "mean_p"]);
    let (hx, hp) = (c.position.spacing(), c.momentum.spacing());
    let mut worst_pos: f64 = 0.0;
    let mut worst_mom: f64 = 0.0;
    for (&t, (pos, mom)) in times.iter().zip(&frames) {
        for (&x, &d) in xs.iter().zip(pos) {
            position.push(vec![t, x, d]);
        }
        for (&p, &d) in ps.iter().zip(mom) {
            momentum.push(vec![t, p, d]);
        }
        let np = trapezoid(hx, pos);
        let nm = trapezoid(hp, mom);
        let weighted = |axis: &[f64], ys: &[f64], h: f64| {
            trapezoid(h, &axis.iter().zip(ys).map(|(a, y)| a * y).collect::<Vec<_>>())
        };
        observables.push(vec![t, np, nm, weighted(&xs, pos, hx) / np, weighted(&ps, mom, hp) / nm]);
        worst_pos = worst_pos.max((np - 1.0).abs());
        worst_mom = worst_mom.max((nm - 1.0).abs());
    }
    let mut diagnostics = json!({
        "collision_time": tc,
        "classical_collision_instant": exact.classical_collision_instant(),
        "t_max": t_max,
        "outgoing_fidelity_at_t_max": fidelity,
        "lab_labels": { "x_g": labels.x_g, "p_g": labels.p_g, "x": labels.x, "p": labels.p },
    });
    if let Some(v) = validity {
        diagnostics["validity"] = v;
    }
    Ok(Artifacts {
        tables: vec![position, momentum, observables],
        diagnostics,
        checks: vec![
            Check::at_most("position_marginal_normalization", worst_pos, c.marginal_tolerance),
            Check::at_most("momentum_marginal_normalization", worst_mom, c.marginal_tolerance),
        ],
    })
}

/// `oracle-verify`: relative L2 distance between the grid oracle and the
/// closed form along a refinement ladder.
pub fn oracle_verify(c: &OracleConfig) -> Result<Artifacts, CliError> {
    let pair = pair(&c.physics)?;
    let labels = lab_labels(&pair, &c.labels)?;
    let exact = ExactCollision64::from_lab(pair, labels)?;
    if c.grid.points < 4 {
        return Err(CliError::invalid("grid.points", "must be at least 4"));
    }
    if c.grid.levels == 0 || c.grid.levels > 6 {
        return Err(CliError::invalid("grid.levels", "must be between 1 and 6"));
    }
    if c.times_in_collision_times.is_empty()
        || c.times_in_collision_times.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
    {
        return Err(CliError::invalid("times_in_collision_times", "needs non-negative finite entries"));
    }
    positive("l2_tolerance", c.l2_tolerance)?;
    let tc = exact.collision_time();
    let times: Vec<f64> = c.times_in_collision_times.iter().map(|k| k * tc).collect();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let base =
        GridParams { enforce_nyquist: c.grid.enforce_nyquist, ..GridParams::covering(&exact, t_max, c.grid.points) };
    let ladder: Vec<GridParams> = (0..c.grid.levels).map(|l| base.refined(1 << l)).collect();

    let mut table = Table::new(
        "oracle_errors",
        &["level", "n_com", "n_rel", "t", "relative_l2_error", "norm_drift", "energy_drift", "truncated_mass"],
    );
    let mut errors = vec![vec![0.0; times.len()]; ladder.len()];
    for (l, g) in ladder.iter().enumerate() {
        for (k, &t) in times.iter().enumerate() {
            let r = compare_to_analytic(&exact, t, *g)?;
            errors[l][k] = r.relative_l2_error;
            table.push(vec![
                l as f64,
                g.n_com as f64,
                g.n_rel as f64,
                t,
                r.relative_l2_error,
                r.norm_drift,
                r.energy_drift,
                r.discretization.truncated_mass,
            ]);
        }
    }
    let finest = errors.last().unwrap().iter().copied().fold(0.0, f64::max);
    // error(level) / error(level − 1) for each time.
    let ratios: Vec<Vec<f64>> =
        (1..errors.len()).map(|l| (0..times.len()).map(|k| errors[l][k] / errors[l - 1][k]).collect()).collect();
    Ok(Artifacts {
        tables: vec![table],
        diagnostics: json!({
            "collision_time": tc,
            "com_extent": base.com_extent,
            "rel_extent": base.rel_extent,
            "finest_max_error": finest,
            "refinement_ratios": ratios,
        }),
        checks: vec![Check::at_most("finest_relative_l2_error", finest, c.l2_tolerance)],
    })
}

/// `channel-verify`: one application of the collision channel to a coherent
/// state, against the classical outcome.
pub fn channel_verify(c: &ChannelConfig) -> Result<Artifacts, CliError> {
    let pair = pair(&c.physics)?;
    let grid = HilbertGrid::centred(c.grid.points, c.grid.spacing, c.physics.brownian_width, c.physics.hbar)?;
    positive("points_per_sd", c.points_per_sd)?;
    positive("min_fidelity", c.min_fidelity)?;
    positive("trace_tolerance", c.trace_tolerance)?;
    positive("completeness_tolerance", c.completeness_tolerance)?;
    if !(c.t >= 0.0 && c.t.is_finite()) {
        return Err(CliError::invalid("t", "must be non-negative and finite"));
    }
    let margin = c.completeness_margin * c.physics.brownian_width;
    let half = 0.5 * grid.length();
    let rows: Vec<usize> = (0..grid.n).filter(|&j| (grid.position(j) - grid.centre()).abs() <= half - margin).collect();
    if rows.is_empty() {
        return Err(CliError::invalid("completeness_margin", "leaves no interior grid points"));
    }
    let channel = CollisionChannel::new(pair, grid.clone(), c.points_per_sd)?;

    let input = grid.coherent_state(c.state.x, c.state.p);
    let rho = OperatorGrid::pure_state(grid.clone(), &input);
    let gas = (c.gas_packet.x, c.gas_packet.p);
    let out = channel.apply(&rho, gas, c.t)?;
    let a = pair.alpha;
    let xb = (2.0 * a * gas.0 + (1.0 - a) * c.state.x) / (1.0 + a);
    let pb = (2.0 * gas.1 + (1.0 - a) * c.state.p) / (1.0 + a);
    let mut target: Vec<_> = grid.coherent_state(xb, pb).iter().copied().collect();
    grid.evolve(&mut target, c.t, pair.brownian_mass);
    let mut fidelity = 0.0;
    for i in 0..grid.n {
        for j in 0..grid.n {
            fidelity += (target[i].conj() * out.rho.matrix[(i, j)] * target[j]).re;
        }
    }
    let range = (grid.position(0), grid.position(grid.n - 1));
    let completeness = channel.integrated_effects(range).distance_to_scalar(1.0, rows[0]..rows[rows.len() - 1] + 1);

    let mut table = Table::new("channel_density", &["x", "input_density", "output_density", "target_density"]);
    for j in 0..grid.n {
        table.push(vec![
            grid.position(j),
            input[j].norm_sqr() / grid.dx,
            out.rho.matrix[(j, j)].re / grid.dx,
            target[j].norm_sqr() / grid.dx,
        ]);
    }
    Ok(Artifacts {
        tables: vec![table],
        diagnostics: json!({
            "classical_outcome": { "x": xb, "p": pb },
            "output_mean_position": out.rho.mean_position(),
            "output_mean_momentum": out.rho.mean_momentum(),
            "mesh_points": out.mesh_points,
            "min_eigenvalue": out.min_eigenvalue,
            "clamped_eigenvalue": channel.clamped_eigenvalue,
            "completeness_rows": [rows[0], rows[rows.len() - 1]],
        }),
        checks: vec![
            Check::at_least("fidelity", fidelity, c.min_fidelity),
            Check::at_most("trace_error", out.trace_error, c.trace_tolerance),
            Check::at_most("completeness", completeness, c.completeness_tolerance),
        ],
    })
}

fn trajectory_params(
    physics: &Physics,
    gas: &Gas,
    delta: f64,
    horizon: f64,
    t: Timing,
    seed: u64,
) -> Result<TrajectoryParams64, CliError> {
    let pair = pair(physics)?;
    let gas = gas_spec(physics, &pair, gas)?;
    let p = TrajectoryParams64 { pair, gas, delta, horizon, timing: timing(t), seed };
    p.validate()?;
    Ok(p)
}

fn ensemble(e: &Ensemble) -> Result<EnsembleSpec<f64>, CliError> {
    if e.n < 2 {
        return Err(CliError::invalid("ensemble.n", "need at least two trajectories"));
    }
    Ok(EnsembleSpec { n: e.n, mean_x: e.mean_x, mean_p: e.mean_p, var_x: e.var_x, var_p: e.var_p })
}

fn stats_table(name: &str, series: &[EnsembleStats64]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "t", "mean_x", "mean_p", "mean_x2", "mean_xp", "mean_p2", "se_x", "se_p", "se_x2", "se_xp", "se_p2",
            "excess_x2", "se_excess_x2",
        ],
    );
    for s in series {
        t.push(vec![
            s.t,
            s.mean_x,
            s.mean_p,
            s.mean_x2,
            s.mean_xp,
            s.mean_p2,
            s.se_x,
            s.se_p,
            s.se_x2,
            s.se_xp,
            s.se_p2,
            s.excess_x2,
            s.se_excess_x2,
        ]);
    }
    t
}

fn ode_table(name: &str, series: &MomentSeries<f64>) -> Table {
    let mut t = Table::new(name, &["t", "mean_x", "mean_p", "mean_x2", "mean_xp", "mean_p2"]);
    for s in &series.states {
        t.push(vec![s.t, s.mean_x, s.mean_p, s.mean_x2, s.mean_xp, s.mean_p2]);
    }
    t
}

fn floors_check(p: &TrajectoryParams64, spec: &EnsembleSpec<f64>) -> Result<(), CliError> {
    // Initial states are drawn in the run; check the floors here so a bad
    // ensemble fails before any computation.
    let s2 = p.pair.brownian_width * p.pair.brownian_width;
    let (fx, fp) = (0.5 * s2, p.pair.hbar * p.pair.hbar / (2.0 * s2));
    if spec.var_x < fx * (1.0 - 1e-12) || spec.var_p < fp * (1.0 - 1e-12) {
        return Err(CliError::invalid(
            "ensemble",
            format!("variances must be at least the coherent-state floor σ²/2 = {fx}, ħ²/2σ² = {fp}"),
        ));
    }
    Ok(())
}

/// `trajectories`: Monte Carlo ensemble statistics.
pub fn trajectories(c: &TrajectoriesConfig, seed: u64) -> Result<Artifacts, CliError> {
    let p = trajectory_params(&c.physics, &c.gas, c.delta, c.horizon, c.timing, seed)?;
    let spec = ensemble(&c.ensemble)?;
    floors_check(&p, &spec)?;
    let series = run(&spec, &p)?;
    let f = cqbm_core::friction_constant(&p.gas, p.pair.brownian_mass)?;
    let last = series.last().copied().unwrap_or(series[0]);
    Ok(Artifacts {
        tables: vec![stats_table("moments", &series)],
        diagnostics: json!({
            "friction_constant": f,
            "artifact_coefficient": artifact_diffusion(&p.gas, p.delta),
            "steps": p.steps(),
            "final": { "t": last.t, "mean_p": last.mean_p, "mean_p2": last.mean_p2, "position_variance": last.position_variance() },
        }),
        checks: Vec::new(),
    })
}

/// `moments`: the moment equations, optionally against Monte Carlo.
pub fn moments(c: &MomentsConfig, seed: u64) -> Result<Artifacts, CliError> {
    let pair = pair(&c.physics)?;
    let gas = gas_spec(&c.physics, &pair, &c.gas)?;
    let fp = FrictionParams64::from_gas(&gas, pair.brownian_mass, c.delta, c.include_artifact)?;
    let i = &c.initial;
    let initial =
        MomentState64 { mean_x: i.mean_x, mean_p: i.mean_p, mean_x2: i.mean_x2, mean_xp: i.mean_xp, mean_p2: i.mean_p2, t: 0.0 };
    initial.validate()?;
    positive("horizon", c.horizon)?;
    let dt = match c.dt {
        Some(dt) => dt,
        None if fp.f > 0.0 => 1e-3 / fp.f,
        None => c.horizon / 1000.0,
    };
    let every = c.record_every.unwrap_or(c.delta);
    positive("record_every", every)?;
    let steps = (c.horizon / every).round() as usize;
    let record: Vec<f64> = (1..=steps).map(|k| k as f64 * every).collect();
    let compare = match &c.compare {
        Some(cmp) => {
            let spec = ensemble(&Ensemble {
                n: cmp.n,
                mean_x: i.mean_x,
                mean_p: i.mean_p,
                var_x: i.mean_x2 - i.mean_x * i.mean_x,
                var_p: i.mean_p2 - i.mean_p * i.mean_p,
            })?;
            let p = trajectory_params(&c.physics, &c.gas, c.delta, c.horizon, cmp.timing, seed)?;
            floors_check(&p, &spec)?;
            positive("compare.tolerance_se", cmp.tolerance_se)?;
            Some((spec, p, cmp.tolerance_se))
        }
        None => None,
    };

    let series = integrate_at(&initial, &fp, &record, dt)?;
    let mut tables = vec![ode_table("moments", &series)];
    let mut diagnostics = json!({
        "friction_constant": fp.f,
        "artifact_diffusion": fp.diffusion_coefficient,
        "spectral_abscissa": fp.spectral_abscissa(),
        "asymptotic_spreading_rate": asymptotic_spreading_rate(&fp),
        "dt": dt,
        "slow_particle_ratio": series.slow_particle_ratio,
        "slow_particle_warning": series.slow_particle_warning,
    });
    let mut checks = Vec::new();
    if let Some((spec, p, tolerance)) = compare {
        let mc = run(&spec, &p)?;
        let times: Vec<f64> = mc.iter().map(|s| s.t).collect();
        // The ODE for the comparison starts from the sampled initial moments.
        let ode = integrate_at(&MomentState64::from_stats(&mc[0]), &fp, &times, dt)?;
        let report = compare_to_trajectories(&ode, &mc)?;
        tables.push(stats_table("mc_moments", &mc));
        tables.push(ode_table("ode_on_mc_grid", &ode));
        diagnostics["comparison"] = json!({
            "max_deviation_in_se": {
                "mean_x": report.max_deviation_in_se[0],
                "mean_p": report.max_deviation_in_se[1],
                "mean_x2": report.max_deviation_in_se[2],
                "mean_xp": report.max_deviation_in_se[3],
                "mean_p2": report.max_deviation_in_se[4],
            },
            "slow_particle_violation": report.slow_particle_violation,
            "agreement_asserted": !report.slow_particle_violation,
        });
        if !report.slow_particle_violation {
            checks.push(Check::at_most("max_deviation_in_se", report.worst(), tolerance));
        }
    }
    Ok(Artifacts { tables, diagnostics, checks })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `delta-scan`: growth rate of the position-jump contribution to `⟨x²⟩`
/// against the coarse-graining time.
pub fn delta_scan(c: &DeltaScanConfig, seed: u64) -> Result<Artifacts, CliError> {
    if c.deltas.len() < 2 {
        return Err(CliError::invalid("deltas", "need at least two values"));
    }
    let spec = ensemble(&c.ensemble)?;
    let params: Vec<TrajectoryParams64> = c
        .deltas
        .iter()
        .map(|&d| trajectory_params(&c.physics, &c.gas, d, c.horizon, c.timing, seed))
        .collect::<Result<_, _>>()?;
    floors_check(&params[0], &spec)?;
    if let Some(tol) = c.slope_tolerance {
        positive("slope_tolerance", tol)?;
    }
    // The collision rate is largest for the fastest trajectory; reject
    // steps that are too long already for a 6-sd momentum.
    for (p, &d) in params.iter().zip(&c.deltas) {
        let p_fast = spec.mean_p.abs() + 6.0 * spec.var_p.sqrt();
        let rate = cqbm_core::trajectories::collision_rate(p_fast, &p.gas, &p.pair)?;
        if rate * d > cqbm_core::trajectories::MAX_STEP_PROBABILITY {
            return Err(CliError::Validation(cqbm_core::Error::StepTooLarge {
                rate_delta: rate * d,
                limit: cqbm_core::trajectories::MAX_STEP_PROBABILITY,
            }));
        }
    }

    let mut table =
        Table::new("delta_scan", &["delta", "excess_rate", "se_excess_rate", "nominal_coefficient", "ratio"]);
    let mut logs = (Vec::new(), Vec::new());
    for p in &params {
        let series = run(&spec, p)?;
        let last = series.last().unwrap();
        let rate = last.excess_x2 / last.t;
        let nominal = artifact_diffusion(&p.gas, p.delta);
        table.push(vec![p.delta, rate, last.se_excess_x2 / last.t, nominal, rate / nominal]);
        if rate > 0.0 {
            logs.0.push(p.delta.ln());
            logs.1.push(rate.ln());
        }
    }
    let slope = if logs.0.len() >= 2 { least_squares_slope(&logs.0, &logs.1) } else { f64::NAN };
    let mut checks = Vec::new();
    if let Some(tol) = c.slope_tolerance {
        checks.push(Check::at_most("slope_minus_two", (slope - 2.0).abs(), tol));
    }
    let f = cqbm_core::friction_constant(&params[0].gas, params[0].pair.brownian_mass)?;
    Ok(Artifacts {
        tables: vec![table],
        diagnostics: json!({ "log_log_slope": slope, "friction_constant": f }),
        checks,
    })
}
