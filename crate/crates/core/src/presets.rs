//! The preset experiment catalog.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convergence::{eigfun_distance, jump_scan, pullback_scale, radius_grid, spectrum_curve, JUMP_TOL};
use crate::elliptic::{excess_field, h1_error, h1_norm, penalized_projection, PoissonProblem};
use crate::error::{Error, Result};
use crate::fem::{assemble, build_mesh, Convention, MassKind, Mesh};
use crate::mmspace::{BallSpec, SpaceDescriptor};
use crate::report::{Check, ExperimentReport, ExperimentSpec, Metadata, Provenance, Table};
use crate::spectral::{dirichlet_spectrum, HeatFlow};

/// Preset ids with one-line descriptions.
pub const PRESETS: [(&str, &str); 11] = [
    ("example1-halfline", "half-line balls touching the boundary point: lambda_1 is 4 under H0 and 1 under Hhat0"),
    ("circle-hhat-counterexample", "full-circle ball under Hhat0 versus balls on slightly larger circles"),
    ("jump-scan-halfline", "exceptional radii on the half-line (center 1) and an interval control"),
    ("jump-scan-circle", "exceptional radii on the circle of length 2 pi"),
    ("cone-distance-squared", "Poisson solve of the squared distance on a cone with source 2N"),
    ("cone-scaling-pullback", "radial pullback by (1 - eps) on a cone"),
    ("excess-replacement", "harmonic replacement of the excess field as N decreases to 1"),
    ("heat-bounds", "energy and Laplacian bounds of the Dirichlet heat flow, Markov check"),
    ("apriori-bounds", "a-priori estimates of the Dirichlet problem on random data"),
    ("nonextension-demo", "penalized projection of arc data with a jump on the circle"),
    ("eigenfunction-tracking", "L2 convergence of eigenfunctions along the half-line family"),
];

pub fn preset_ids() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(id, _)| *id)
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    tables: Vec<Table>,
    checks: Vec<Check>,
    mesh_sizes: Vec<f64>,
    node_counts: Vec<usize>,
    notes: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn new(spec: &'a ExperimentSpec) -> Self {
        Self {
            spec,
            tables: Vec::new(),
            checks: Vec::new(),
            mesh_sizes: Vec::new(),
            node_counts: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.spec.get_scalar(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(out_of_range(key, format!("must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.spec.get_scalar(key, default as f64)?;
        if !(v >= 1.0 && v.fract() == 0.0 && v < 1e7) {
            return Err(out_of_range(key, format!("must be an integer >= 1, got {v}")));
        }
        Ok(v as usize)
    }

    fn list_in(&self, key: &str, default: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
        let v = self.spec.get_list(key, default);
        if v.is_empty() {
            return Err(out_of_range(key, "list is empty".into()));
        }
        if let Some(bad) = v.iter().find(|x| !(**x > lo && **x < hi)) {
            return Err(out_of_range(key, format!("value {bad} outside ({lo}, {hi})")));
        }
        Ok(v)
    }

    fn mesh(&mut self, space: &SpaceDescriptor, ball: &BallSpec, h: f64) -> Result<Mesh> {
        let m = build_mesh(space, ball, h)?;
        if !self.mesh_sizes.contains(&h) {
            self.mesh_sizes.push(h);
        }
        self.node_counts.push(m.len());
        Ok(m)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.spec.seed)
    }
}

fn out_of_range(name: &str, reason: String) -> Error {
    Error::ParameterOutOfRange {
        name: name.into(),
        reason,
    }
}

/// Runs a preset and evaluates its checks.
pub fn run_preset(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut ctx = Ctx::new(spec);
    match spec.preset.as_str() {
        "example1-halfline" => example1(&mut ctx)?,
        "circle-hhat-counterexample" => circle_counterexample(&mut ctx)?,
        "jump-scan-halfline" => jump_scan_halfline(&mut ctx)?,
        "jump-scan-circle" => jump_scan_circle(&mut ctx)?,
        "cone-distance-squared" => cone_distance_squared(&mut ctx)?,
        "cone-scaling-pullback" => cone_scaling_pullback(&mut ctx)?,
        "excess-replacement" => excess_replacement(&mut ctx)?,
        "heat-bounds" => heat_bounds(&mut ctx)?,
        "apriori-bounds" => apriori_bounds(&mut ctx)?,
        "nonextension-demo" => nonextension(&mut ctx)?,
        "eigenfunction-tracking" => eigenfunction_tracking(&mut ctx)?,
        other => return Err(Error::UnknownPreset(other.to_string())),
    }
    Ok(ExperimentReport {
        preset: spec.preset.clone(),
        parameters: spec.parameters.clone(),
        tables: ctx.tables,
        checks: ctx.checks,
        provenance: Provenance {
            mesh_sizes: ctx.mesh_sizes,
            node_counts: ctx.node_counts,
            seed: spec.seed,
            notes: ctx.notes,
        },
        metadata: Metadata {
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn example1(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 5e-4)?;
    let mut eps = ctx.list_in("eps", &[0.3, 0.2, 0.1, 0.05], 0.0, PI / 4.0)?;
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let space = SpaceDescriptor::half_line(0.0)?;
    let ball = BallSpec::new(PI / 4.0, PI / 4.0);
    let mesh = ctx.mesh(&space, &ball, h)?;
    let l_h0 = dirichlet_spectrum(&space, &mesh, &ball, Convention::H0, 1)?.eigenvalues[0];
    let l_hat = dirichlet_spectrum(&space, &mesh, &ball, Convention::Hhat0, 1)?.eigenvalues[0];
    ctx.checks.push(Check::rel("limit_h0_lambda1", 4.0, l_h0, 1e-3));
    ctx.checks.push(Check::rel("limit_hhat0_lambda1", 1.0, l_hat, 1e-3));

    let sp = space.clone();
    let curve = spectrum_curve(
        &eps,
        move |e| Ok((sp.clone(), BallSpec::new(PI / 4.0 - e, PI / 4.0))),
        Convention::H0,
        1,
        h,
    );
    let mut table = Table::new("curve", &["param", "lambda_1", "exact", "rel_error"]);
    let mut by_eps_desc = Vec::new();
    for &e in &eps {
        let row = curve.rows.iter().find(|r| r.param == e).unwrap();
        if let Some(err) = &row.error {
            return Err(Error::Solver(format!("eps = {e}: {err}")));
        }
        let l = row.lambdas[0];
        let exact = (PI / (PI - 2.0 * e)).powi(2);
        table.push(vec![e, l, exact, (l - exact).abs() / exact]);
        ctx.checks.push(Check::rel(format!("eps_{e}_lambda1"), exact, l, 1e-3));
        by_eps_desc.push(l);
    }
    let toward_one = strictly_decreasing(&by_eps_desc) && by_eps_desc.iter().all(|&l| l > 1.0);
    ctx.checks.push(Check::new(
        "curve_monotone_toward_1",
        "decreasing as eps decreases, above 1",
        by_eps_desc.clone(),
        0.0,
        toward_one,
    ));
    ctx.tables.push(table);
    let mut limits = Table::new("limit", &["h0_lambda_1", "hhat0_lambda_1"]);
    limits.push(vec![l_h0, l_hat]);
    ctx.tables.push(limits);
    Ok(())
}

fn circle_counterexample(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 1e-3)?;
    let mut deltas = ctx.list_in("delta", &[0.1, 0.05, 0.01], 0.0, 1.0)?;
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let space = SpaceDescriptor::circle(2.0 * PI)?;
    let ball = BallSpec::new(0.0, PI);
    let mesh = ctx.mesh(&space, &ball, h)?;
    let lim_hat = dirichlet_spectrum(&space, &mesh, &ball, Convention::Hhat0, 1)?.eigenvalues[0];
    let lim_h0 = dirichlet_spectrum(&space, &mesh, &ball, Convention::H0, 1)?.eigenvalues[0];
    ctx.checks.push(Check::at_most("limit_hhat0_lambda1", 1e-8, lim_hat));
    ctx.checks.push(Check::rel("limit_h0_lambda1", 0.25, lim_h0, 1e-3));

    let curve = spectrum_curve(
        &deltas,
        |d| Ok((SpaceDescriptor::circle(2.0 * PI * (1.0 + d))?, BallSpec::new(0.0, PI))),
        Convention::Hhat0,
        1,
        h,
    );
    let mut table = Table::new("approximants", &["param", "lambda_1"]);
    let mut last = f64::NAN;
    for &d in &deltas {
        let row = curve.rows.iter().find(|r| r.param == d).unwrap();
        if let Some(err) = &row.error {
            return Err(Error::Solver(format!("delta = {d}: {err}")));
        }
        let l = row.lambdas[0];
        table.push(vec![d, l]);
        ctx.checks.push(Check::rel(format!("delta_{d}_lambda1"), 0.25, l, 1e-3));
        last = l;
    }
    ctx.tables.push(table);
    let gap = (last - lim_hat).abs();
    ctx.checks.push(Check::new(
        "non_convergence_flagged",
        "approximant limit differs from the Hhat0 limit",
        gap,
        0.1,
        gap > 0.1,
    ));
    ctx.notes.push(format!(
        "approximants tend to {last}, the Hhat0 limit ball has lambda_1 = {lim_hat}, the H0 limit ball {lim_h0}"
    ));
    Ok(())
}

struct ScanSetup {
    tag: &'static str,
    space: SpaceDescriptor,
    center: f64,
    lo: f64,
    hi: f64,
    expected: Vec<f64>,
}

fn scan_into(ctx: &mut Ctx, setup: ScanSetup) -> Result<()> {
    let h = ctx.positive("mesh_h", 0.005)?;
    let k = ctx.count("k", 3)?;
    let k_env = ctx.count("k_envelope", 5)?;
    let points = ctx.count("points", 200)?;
    let tol = ctx.positive("tol", JUMP_TOL)?;
    let radii = radius_grid(setup.lo, setup.hi, points);
    let scan = jump_scan(&setup.space, setup.center, &radii, k, k_env, h, tol)?;
    if !ctx.mesh_sizes.contains(&h) {
        ctx.mesh_sizes.push(h);
    }
    let tag = setup.tag;
    let same = scan.exceptional.len() == setup.expected.len()
        && scan
            .exceptional
            .iter()
            .zip(&setup.expected)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
    ctx.checks.push(Check::new(
        format!("{tag}_exceptional_set"),
        setup.expected.clone(),
        scan.exceptional.clone(),
        1e-12,
        same,
    ));
    ctx.checks
        .push(Check::at_most(format!("{tag}_regular_agreement"), 1e-10, scan.max_regular_gap()));
    ctx.checks
        .push(Check::none(format!("{tag}_ordering"), scan.ordering_violations(1e-10)));
    ctx.checks.push(Check::none(
        format!("{tag}_monotone_in_radius"),
        scan.monotonicity_violations(1e-10),
    ));
    ctx.checks
        .push(Check::at_most(format!("{tag}_right_continuity"), 1e-8, scan.max_envelope_gap()));
    let mut table = Table::new(
        format!("{tag}_scan"),
        &["radius", "rel_gap", "exceptional", "h0_lambda_1", "hhat0_lambda_1", "h0_right_lambda_1"],
    );
    for p in &scan.points {
        table.push(vec![
            p.radius,
            p.rel_gap,
            p.exceptional as u8 as f64,
            p.lambda_h0[0],
            p.lambda_hhat0[0],
            p.lambda_h0_right[0],
        ]);
    }
    ctx.tables.push(table);
    ctx.notes.push(format!(
        "{tag}: {} radii scanned, {} excluded near candidates, envelope step {:e}",
        scan.points.len(),
        scan.excluded.len(),
        scan.right_step
    ));
    Ok(())
}

fn jump_scan_halfline(ctx: &mut Ctx) -> Result<()> {
    let center = ctx.positive("center", 1.0)?;
    scan_into(
        ctx,
        ScanSetup {
            tag: "halfline",
            space: SpaceDescriptor::half_line(0.0)?,
            center,
            lo: 0.2 * center,
            hi: 1.8 * center,
            expected: vec![center],
        },
    )?;
    scan_into(
        ctx,
        ScanSetup {
            tag: "interval",
            space: SpaceDescriptor::interval(0.0, 10.0)?,
            center: 5.0,
            lo: 0.5,
            hi: 4.5,
            expected: vec![],
        },
    )
}

fn jump_scan_circle(ctx: &mut Ctx) -> Result<()> {
    let length = ctx.positive("circumference", 2.0 * PI)?;
    scan_into(
        ctx,
        ScanSetup {
            tag: "circle",
            space: SpaceDescriptor::circle(length)?,
            center: 0.0,
            lo: 0.5,
            hi: 0.5 * length,
            expected: vec![0.5 * length],
        },
    )
}

fn cone_distance_squared(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.positive("dimension", 3.0)?;
    let r = ctx.positive("radius", 1.0)?;
    let mut hs = ctx.list_in("mesh_h", &[1e-2, 5e-3, 2.5e-3], 0.0, r)?;
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut deltas = ctx.list_in("delta", &[0.2, 0.1, 0.05], 0.0, r)?;
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let space = SpaceDescriptor::cone(n)?;
    let source = 2.0 * n;
    let mut worst_residual = 0.0f64;

    let ball = BallSpec::new(0.0, r);
    let mut table = Table::new("refinement", &["h", "h1_error", "order"]);
    let mut errors = Vec::new();
    for &h in &hs {
        let mesh = ctx.mesh(&space, &ball, h)?;
        let f = mesh.sample(|t| t * t);
        let g = vec![source; mesh.len()];
        let sol = PoissonProblem::new(&space, &mesh, &ball, Convention::H0)?.solve(&f, &g)?;
        worst_residual = worst_residual.max(sol.diagnostics.galerkin_residual);
        errors.push(h1_error(&space, &mesh, &sol.solution, |t| t * t, |t| 2.0 * t, -r, r));
    }
    for i in 0..hs.len() {
        let order = if i == 0 {
            f64::NAN
        } else {
            (errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln()
        };
        table.push(vec![hs[i], errors[i], order]);
        if i > 0 {
            ctx.checks.push(Check::at_least(format!("order_h_{}", hs[i]), 0.9, order));
        }
    }
    ctx.tables.push(table);

    let h = *hs.last().unwrap();
    let mut moving = Table::new("moving_center", &["delta", "h1_error"]);
    let mut merr = Vec::new();
    for &d in &deltas {
        let ball = BallSpec::new(d, r);
        let mesh = ctx.mesh(&space, &ball, h)?;
        let f = mesh.sample(|t| (t - d) * (t - d));
        let g = vec![source; mesh.len()];
        let sol = PoissonProblem::new(&space, &mesh, &ball, Convention::H0)?.solve(&f, &g)?;
        worst_residual = worst_residual.max(sol.diagnostics.galerkin_residual);
        let e = h1_error(&space, &mesh, &sol.solution, |t| (t - d) * (t - d), |t| 2.0 * (t - d), d - r, d + r);
        moving.push(vec![d, e]);
        merr.push(e);
    }
    ctx.tables.push(moving);
    ctx.checks.push(Check::new(
        "moving_center_error_decreasing",
        "decreasing as delta decreases",
        merr.clone(),
        0.0,
        strictly_decreasing(&merr),
    ));
    ctx.checks.push(Check::at_most("galerkin_residual", 1e-10, worst_residual));
    ctx.notes
        .push("moving center: data and reference are the squared distance to the ball center".into());
    Ok(())
}

fn cone_scaling_pullback(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.positive("dimension", 3.0)?;
    let r = ctx.positive("radius", 1.0)?;
    let h = ctx.positive("mesh_h", 2.5e-3)?;
    let mut eps = ctx.list_in("eps", &[0.2, 0.1, 0.05, 0.025], 0.0, 0.5)?;
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let space = SpaceDescriptor::cone(n)?;
    // room for the dilated support r / (1 − ε)
    let ball = BallSpec::new(0.0, 2.0 * r);
    let mesh = ctx.mesh(&space, &ball, h)?;
    let forms = assemble(&space, &mesh)?;
    let f = mesh.sample(|t| if t.abs() < r { (0.5 * PI * t / r).cos().powi(2) } else { 0.0 });

    let id = pullback_scale(&space, &mesh, &f, 0.0)?;
    let id_err = id.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ctx.checks.push(Check::at_most("identity_at_eps_0", 1e-12, id_err));
    let lin = mesh.sample(|t| t);
    let lin_pb = pullback_scale(&space, &mesh, &lin, 0.25)?;
    let lin_err = mesh
        .nodes()
        .iter()
        .zip(&lin_pb)
        .fold(0.0f64, |m, (t, v)| m.max((v - 0.75 * t).abs()));
    ctx.checks.push(Check::at_most("linear_exactness", 1e-12, lin_err));

    let mut table = Table::new("pullback", &["eps", "h1_distance", "support_radius"]);
    let mut dists = Vec::new();
    for &e in &eps {
        let g = pullback_scale(&space, &mesh, &f, e)?;
        let diff: Vec<f64> = g.iter().zip(&f).map(|(a, b)| a - b).collect();
        let d = h1_norm(&forms, &diff);
        let support = mesh
            .nodes()
            .iter()
            .zip(&g)
            .filter(|(_, v)| v.abs() > 0.0)
            .fold(0.0f64, |m, (t, _)| m.max(t.abs()));
        table.push(vec![e, d, support]);
        dists.push(d);
    }
    ctx.tables.push(table);
    ctx.checks.push(Check::new(
        "h1_distance_decreasing",
        "decreasing as eps decreases",
        dists.clone(),
        0.0,
        strictly_decreasing(&dists),
    ));
    ctx.notes
        .push("the pullback of a field supported in B_R is supported in B_{R/(1-eps)}".into());
    Ok(())
}

fn excess_replacement(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 1e-3)?;
    let l = ctx.positive("distance", 3.0)?;
    let mut dims = ctx.list_in("dimension", &[1.5, 1.25, 1.1, 1.01], 1.0, 10.0)?;
    dims.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if l <= 1.0 {
        return Err(out_of_range("distance", "the unit ball must avoid the pole".into()));
    }
    let ball = BallSpec::new(l, 1.0);
    let mut worst_residual = 0.0f64;
    let mut run = |ctx: &mut Ctx, n: f64| -> Result<f64> {
        let space = SpaceDescriptor::cone(n)?;
        let mesh = ctx.mesh(&space, &ball, h)?;
        let e = excess_field(&space, &mesh, 0.0, l)?;
        let problem = PoissonProblem::new(&space, &mesh, &ball, Convention::H0)?;
        let zero = vec![0.0; mesh.len()];
        let sol = problem.solve(&e, &zero)?;
        worst_residual = worst_residual.max(sol.diagnostics.galerkin_residual);
        let diff: Vec<f64> = sol.solution.iter().zip(&e).map(|(a, b)| a - b).collect();
        Ok(h1_norm(problem.ball_forms(), &diff))
    };
    let base = run(ctx, 1.0)?;
    let mut table = Table::new("excess", &["dimension", "h1_error"]);
    let mut errs = Vec::new();
    for &n in &dims {
        let e = run(ctx, n)?;
        table.push(vec![n, e]);
        errs.push(e);
    }
    ctx.tables.push(table);
    ctx.checks.push(Check::at_most("unweighted_base_case", 1e-10, base));
    ctx.checks.push(Check::new(
        "error_decreasing_as_n_to_1",
        "decreasing",
        errs.clone(),
        0.0,
        strictly_decreasing(&errs),
    ));
    let first = errs[0];
    let lastv = *errs.last().unwrap();
    ctx.checks.push(Check::at_most("error_ratio_last_to_first", 0.2, lastv / first));
    ctx.checks.push(Check::at_most("galerkin_residual", 1e-10, worst_residual));
    ctx.notes
        .push(format!("excess field e(z) = d(0, {l}) - d(0, z) on B_1({l}), pole at 0"));
    Ok(())
}

/// The unit-scale model balls shared by the bound checks.
fn model_balls() -> Result<Vec<(&'static str, SpaceDescriptor, BallSpec, Convention)>> {
    Ok(vec![
        ("interval", SpaceDescriptor::interval(0.0, 1.0)?, BallSpec::new(0.5, 0.5), Convention::H0),
        ("half_line", SpaceDescriptor::half_line(0.0)?, BallSpec::new(PI / 4.0, PI / 4.0), Convention::Hhat0),
        ("circle", SpaceDescriptor::circle(2.0 * PI)?, BallSpec::new(0.0, 2.0), Convention::H0),
        ("cone", SpaceDescriptor::cone(3.0)?, BallSpec::new(0.0, 1.0), Convention::H0),
    ])
}

fn heat_bounds(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 0.01)?;
    let samples = ctx.count("samples", 10)?;
    let mut times = ctx.list_in("times", &[0.01, 0.1, 1.0], 0.0, f64::INFINITY)?;
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rng = ctx.rng();
    let mut table = Table::new(
        "heat",
        &["space", "t", "max_energy_ratio", "max_laplacian_ratio", "first_power_violations"],
    );
    let (mut v_energy, mut v_lap, mut v_markov, mut v_mono, mut first_power) = (0, 0, 0, 0, 0);
    let mut decay_err = 0.0f64;
    for (si, (_, space, ball, conv)) in model_balls()?.into_iter().enumerate() {
        let mesh = ctx.mesh(&space, &ball, h)?;
        let heat = HeatFlow::from_problem(&space, &mesh, &ball, conv, MassKind::Consistent)?;
        let free = heat.spectrum().sets.free.clone();
        let mut stats = vec![(0.0f64, 0.0f64, 0usize); times.len()];
        for _ in 0..samples {
            let mut f0 = vec![0.0; mesh.len()];
            for &i in &free {
                f0[i] = rng.gen_range(-1.0..1.0);
            }
            let n0 = heat.l2_norm(&f0);
            let mut prev = heat.l2_norm(&heat.evolve(&f0, 0.0)?);
            for (ti, &t) in times.iter().enumerate() {
                let energy = heat.energy(&f0, t)?;
                let lap = heat.laplacian_norm(&f0, t)?;
                let (re, rl) = (energy / (n0 * n0 / t), lap / (n0 / t));
                stats[ti].0 = stats[ti].0.max(re);
                stats[ti].1 = stats[ti].1.max(rl);
                v_energy += (re > 1.0) as usize;
                v_lap += (rl > 1.0) as usize;
                if energy > n0 / t {
                    stats[ti].2 += 1;
                    first_power += 1;
                }
                let norm = heat.l2_norm(&heat.evolve(&f0, t)?);
                v_mono += (norm > prev * (1.0 + 1e-12)) as usize;
                prev = norm;
            }
        }
        for (ti, &t) in times.iter().enumerate() {
            table.push(vec![si as f64, t, stats[ti].0, stats[ti].1, stats[ti].2 as f64]);
        }

        let u1 = &heat.spectrum().eigenvectors[0];
        let l1 = heat.spectrum().eigenvalues[0];
        for &t in &times {
            let u = heat.evolve(u1, t)?;
            for (a, b) in u.iter().zip(u1) {
                decay_err = decay_err.max((a - (-l1 * t).exp() * b).abs());
            }
        }

        let lumped = HeatFlow::from_problem(&space, &mesh, &ball, conv, MassKind::Lumped)?;
        for _ in 0..samples {
            let mut f0 = vec![0.0; mesh.len()];
            for &i in &free {
                f0[i] = rng.gen_range(0.0..1.0);
            }
            for &t in &times {
                let u = lumped.evolve(&f0, t)?;
                v_markov += u.iter().filter(|&&x| !(-1e-10..=1.0 + 1e-10).contains(&x)).count();
            }
        }
    }
    ctx.tables.push(table);
    ctx.checks.push(Check::none("energy_bound_squared_violations", v_energy));
    ctx.checks.push(Check::none("laplacian_bound_violations", v_lap));
    ctx.checks.push(Check::none("markov_violations", v_markov));
    ctx.checks.push(Check::none("l2_monotone_violations", v_mono));
    ctx.checks.push(Check::at_most("eigenvector_decay_error", 1e-10, decay_err));
    ctx.notes.push(format!(
        "first-power reading 2Ch(u(t)) <= |f0|/t fails in {first_power} of {} cases",
        4 * samples * times.len()
    ));
    ctx.notes
        .push("spaces: 0 interval, 1 half_line, 2 circle, 3 cone".into());
    Ok(())
}

fn random_smooth(rng: &mut ChaCha8Rng, mesh: &Mesh, center: f64, radius: f64) -> Vec<f64> {
    let a0: f64 = rng.gen_range(-1.0..1.0);
    let coeffs: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    mesh.sample(|t| {
        let s = (t - center) / radius;
        a0 + coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let w = (j + 1) as f64 * PI * 0.5;
                a * (w * s).cos() + b * (w * s).sin()
            })
            .sum::<f64>()
    })
}

fn apriori_bounds(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 0.01)?;
    let samples = ctx.count("samples", 100)?;
    let mut rng = ctx.rng();
    let mut table = Table::new(
        "apriori",
        &[
            "space",
            "lambda_1",
            "gradient_violations",
            "l2_violations",
            "gradient_scaled_violations",
            "l2_scaled_violations",
            "max_gradient_ratio",
            "max_l2_ratio",
        ],
    );
    let mut totals = [0usize; 4];
    let mut worst_residual = 0.0f64;
    for (si, (_, space, ball, conv)) in model_balls()?.into_iter().enumerate() {
        let mesh = ctx.mesh(&space, &ball, h)?;
        let problem = PoissonProblem::new(&space, &mesh, &ball, conv)?;
        let center = space.chart_center(&ball);
        let mut counts = [0usize; 4];
        let (mut rg, mut rl) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let f = random_smooth(&mut rng, &mesh, center, ball.radius);
            let g: Vec<f64> = (0..mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sol = problem.solve(&f, &g)?;
            let b = sol.diagnostics.bound_checks;
            worst_residual = worst_residual.max(sol.diagnostics.galerkin_residual);
            for (c, chk) in counts.iter_mut().zip([b.gradient, b.l2, b.gradient_scaled, b.l2_scaled]) {
                *c += !chk.holds as usize;
            }
            rg = rg.max(b.gradient.lhs / b.gradient.rhs);
            rl = rl.max(b.l2.lhs / b.l2.rhs);
        }
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
        table.push(vec![
            si as f64,
            problem.lambda1(),
            counts[0] as f64,
            counts[1] as f64,
            counts[2] as f64,
            counts[3] as f64,
            rg,
            rl,
        ]);
    }
    ctx.tables.push(table);
    ctx.checks.push(Check::none("gradient_bound_violations", totals[0]));
    ctx.checks.push(Check::none("l2_bound_violations", totals[1]));
    ctx.checks.push(Check::none("gradient_bound_scaled_violations", totals[2]));
    ctx.checks.push(Check::none("l2_bound_scaled_violations", totals[3]));
    ctx.checks.push(Check::at_most("galerkin_residual", 1e-10, worst_residual));
    ctx.notes
        .push("spaces: 0 interval, 1 half_line, 2 circle, 3 cone; norms over the closed ball".into());
    Ok(())
}

fn nonextension(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 1e-3)?;
    let tau = ctx.positive("tau", 1e-3)?;
    let mut ss = ctx.list_in("s", &[0.9, 0.95, 0.99], 0.0, 1.0)?;
    ss.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let space = SpaceDescriptor::circle(2.0 * PI)?;
    let norm_at = |ctx: &mut Ctx, s: f64, h: f64, tau: f64| -> Result<f64> {
        let half = PI * s;
        let mesh = ctx.mesh(&space, &BallSpec::new(0.0, half), h)?;
        // scaled chart: the arc carries data rising from 0 to 1
        let g = mesh.sample(|t| ((t + half) / (2.0 * half)).clamp(0.0, 1.0));
        Ok(penalized_projection(&space, &mesh, -half, half, &g, tau)?.1)
    };
    let mut table = Table::new("nonextension", &["s", "h1_norm", "h1_norm_half_h"]);
    let mut norms = Vec::new();
    let mut worst_mesh_dep = 0.0f64;
    for &s in &ss {
        let a = norm_at(ctx, s, h, tau)?;
        let b = norm_at(ctx, s, 0.5 * h, tau)?;
        worst_mesh_dep = worst_mesh_dep.max((a - b).abs() / b);
        table.push(vec![s, a, b]);
        norms.push(a);
    }
    ctx.tables.push(table);
    let (s_lo, s_hi) = (ss[0], *ss.last().unwrap());
    let ratio = norms.last().unwrap() / norms[0];
    ctx.checks.push(Check::at_least(format!("ratio_s_{s_hi}_to_s_{s_lo}"), 3.0, ratio));
    ctx.checks.push(Check::new(
        "norm_increasing_in_s",
        "increasing",
        norms.clone(),
        0.0,
        norms.windows(2).all(|w| w[1] > w[0]),
    ));
    ctx.checks.push(Check::at_most("mesh_independence", 1e-2, worst_mesh_dep));
    let vanishing = norm_at(ctx, s_hi, h, 1e8)?;
    ctx.checks.push(Check::at_most("large_tau_norm", 1e-4, vanishing));

    let mesh = ctx.mesh(&space, &BallSpec::new(0.0, PI * s_hi), h)?;
    let smooth = mesh.sample(|t| t.cos());
    let (_, sn) = penalized_projection(&space, &mesh, -PI * s_hi, PI * s_hi, &smooth, tau)?;
    let global = h1_norm(&assemble(&space, &mesh)?, &smooth);
    ctx.checks
        .push(Check::at_most("smooth_data_bounded_by_global_norm", global * (1.0 + 1e-12), sn));
    ctx.notes.push(format!(
        "circle of length 2 pi, data on the arc B_(pi s)(0), penalty tau = {tau}"
    ));
    Ok(())
}

/// `L²` distance between the normalized profiles `cos(π t / (2ℓ))` on
/// `[0, ℓ]` and `cos t` on `[0, π/2]`, both extended by zero.
pub fn halfline_profile_distance(ell: f64) -> f64 {
    let a = PI / (2.0 * ell);
    let prim = |t: f64| {
        let m = if (a - 1.0).abs() < 1e-14 {
            0.5 * t
        } else {
            ((a - 1.0) * t).sin() / (2.0 * (a - 1.0))
        };
        m + ((a + 1.0) * t).sin() / (2.0 * (a + 1.0))
    };
    let cross = prim(ell.min(PI / 2.0)) - prim(0.0);
    let inner = cross / ((ell / 2.0).sqrt() * (PI / 4.0).sqrt());
    (2.0 - 2.0 * inner).max(0.0).sqrt()
}

fn eigenfunction_tracking(ctx: &mut Ctx) -> Result<()> {
    let h = ctx.positive("mesh_h", 1e-3)?;
    let mut eps = ctx.list_in("eps", &[0.3, 0.2, 0.1, 0.05], 0.0, PI / 4.0)?;
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let space = SpaceDescriptor::half_line(0.0)?;
    let limit_ball = BallSpec::new(PI / 4.0, PI / 4.0);
    let limit_mesh = ctx.mesh(&space, &limit_ball, h)?;
    let limit = dirichlet_spectrum(&space, &limit_mesh, &limit_ball, Convention::Hhat0, 1)?;

    let mut table = Table::new("tracking", &["eps", "lambda_1", "distance", "closed_form"]);
    let mut dists = Vec::new();
    for &e in &eps {
        let ball = BallSpec::new(PI / 4.0 - e, PI / 4.0);
        let mesh = ctx.mesh(&space, &ball, h)?;
        let sp = dirichlet_spectrum(&space, &mesh, &ball, Convention::Hhat0, 1)?;
        let d = eigfun_distance(&sp, &limit, 1)?;
        let exact = halfline_profile_distance(PI / 2.0 - e);
        let l = sp.eigenvalues[0];
        table.push(vec![e, l, d, exact]);
        ctx.checks.push(Check::rel(format!("eps_{e}_distance"), exact, d, 1e-2));
        ctx.checks
            .push(Check::rel(format!("eps_{e}_lambda1"), (PI / (PI - 2.0 * e)).powi(2), l, 1e-3));
        dists.push(d);
    }
    ctx.tables.push(table);
    ctx.checks.push(Check::new(
        "distance_decreasing",
        "decreasing as eps decreases",
        dists.clone(),
        0.0,
        strictly_decreasing(&dists),
    ));
    ctx.checks
        .push(Check::at_most("identical_spectra", 1e-12, eigfun_distance(&limit, &limit, 1)?));
    let mut flipped = limit.clone();
    flipped.eigenvectors[0].iter_mut().for_each(|x| *x = -*x);
    ctx.checks
        .push(Check::at_most("sign_flipped_copy", 1e-12, eigfun_distance(&limit, &flipped, 1)?));

    // a double eigenvalue is tracked through its spectral projection
    let circle = SpaceDescriptor::circle(2.0 * PI)?;
    let cball = BallSpec::new(0.0, PI);
    let coarse_mesh = ctx.mesh(&circle, &cball, 20.0 * h)?;
    let fine_mesh = ctx.mesh(&circle, &cball, 10.0 * h)?;
    let coarse = dirichlet_spectrum(&circle, &coarse_mesh, &cball, Convention::Hhat0, 3)?;
    let fine = dirichlet_spectrum(&circle, &fine_mesh, &cball, Convention::Hhat0, 3)?;
    let pd = eigfun_distance(&coarse, &fine, 2)?;
    ctx.checks.push(Check::at_most("circle_double_eigenvalue_projection", 1e-2, pd));
    Ok(())
}
