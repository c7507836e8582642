use std::f64::consts::PI;

use serde_json::{json, Value};
use wannier_stark::asymptotics::{
    adiabatic_bands, bm_bands, limiting_a, limiting_dispersion, strong_field_exponent, AdiabaticOptions,
    StrongFieldOptions,
};
use wannier_stark::lattice::{dirac_points, BlochGrid, Orientation, Rational};
use wannier_stark::lz::{
    autocorrelation, bz_population_map, drive_period, mean_upper_population, population_trace,
    tunneling_period, InitialCondition,
};
use wannier_stark::magnus::MagnusOptions;
use wannier_stark::wavepacket::{
    ballistic_rate, count_peaks, dispersion_scan, moments, propagate_with, Domain, Moments,
    PropagationOptions, RealSpaceLattice, ScanLattice, PEAK_PROMINENCE,
};
use wannier_stark::ws::chain::circular_diff;
use wannier_stark::ws::sweep::{band_sweep, kappa_grid, spreading_rate_a, ws_fan, SweepMethod, SweepOptions};
use wannier_stark::ws::{fold, ChainOptions};

use crate::config::{parse_range, RunConfig};
use crate::output::{num, Table};
use crate::CliError;

pub type Output = (Vec<Table>, Value);

fn sweep_opts(method: &str) -> SweepOptions {
    SweepOptions {
        method: method.parse().unwrap_or(SweepMethod::Chain),
        ..SweepOptions::default()
    }
}

fn common_meta(t: &mut Table, cfg: &RunConfig) {
    let p = cfg.params();
    t.meta("J1", p.j1).meta("J2", p.j2).meta("delta", p.delta);
}

fn field_meta(t: &mut Table, cfg: &RunConfig) {
    let f = &cfg.field;
    match (&f.orient, f.theta, f.beta) {
        (Some(o), _, _) => t.meta("orientation", format!("({o})")),
        (_, Some(th), _) => t.meta("theta", th),
        (_, _, Some(b)) => t.meta("beta", b),
        _ => t,
    };
}

fn domain(kind: &str, half_width: f64) -> Domain {
    match kind {
        "strip" => Domain::Strip { half_width },
        _ => Domain::Square,
    }
}

pub fn bloch(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let n = cfg.bloch.grid;
    let g = BlochGrid::compute(&p, n, n)?;
    let mut t = Table::new("bloch", &["kx", "ky", "e_minus", "e_plus"]);
    common_meta(&mut t, cfg);
    t.meta("frame", "primary axes, a = sqrt(2)");
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let i = iy * g.nx + ix;
            t.push(vec![num(g.kx[ix]), num(g.ky[iy]), num(g.e_minus[i]), num(g.e_plus[i])]);
        }
    }
    let mut d = Table::new("dirac_points", &["kx", "ky"]);
    common_meta(&mut d, cfg);
    let dirac = dirac_points(&p);
    for (x, y) in &dirac {
        d.push(vec![num(*x), num(*y)]);
    }
    let res = json!({ "min_gap": g.min_gap(), "dirac_points": dirac.len() });
    Ok((vec![t, d], res))
}

pub fn ws_bands(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let o = cfg.rational()?;
    let f = cfg.field.f;
    let grid = kappa_grid(o, cfg.ws.kappa_points, cfg.ws.full_window);
    let s = band_sweep(&p, f, o, &grid, &sweep_opts(&cfg.ws.method))?;
    let mut t = Table::new(
        "ws_bands",
        &["ladder", "kappa", "d_kappa_over_2pi", "energy", "folded", "velocity"],
    );
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("F", f).meta("ladder_step", num(s.ladder_step)).meta("method", &cfg.ws.method);
    for b in &s.bands {
        for k in 0..b.kappa.len() {
            t.push(vec![
                b.ladder.as_str().into(),
                num(b.kappa[k]),
                num(b.kappa[k] * o.d() / (2.0 * PI)),
                num(b.energy[k]),
                num(fold(b.energy[k], s.ladder_step)),
                num(b.velocity[k]),
            ]);
        }
    }
    let res = json!({
        "ladder_step": s.ladder_step,
        "bandwidth": { "minus": s.bands[0].bandwidth, "plus": s.bands[1].bandwidth },
        "ambiguous_points": s.ambiguous,
        "degenerate_points": s.degenerate,
    });
    Ok((vec![t], res))
}

pub fn ws_fan_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let o = cfg.rational()?;
    let fields = parse_range(&cfg.fan.f_range, 2, "fan.F_range")?;
    let kappa = 2.0 * PI * cfg.fan.kappa_frac / o.d();
    let fan = ws_fan(&p, o, kappa, &fields, cfg.fan.window, &ChainOptions::default())?;
    let mut t = Table::new("ws_fan", &["F", "energy"]);
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("d_kappa_over_2pi", cfg.fan.kappa_frac).meta("window", cfg.fan.window);
    for c in &fan {
        for e in &c.energies {
            t.push(vec![num(c.field), num(*e)]);
        }
    }
    let gaps = wannier_stark::ws::sweep::fan_gaps(&fan, o);
    Ok((vec![t], json!({ "avoided_crossings": gaps })))
}

pub fn rate_scan(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let o = cfg.rational()?;
    let inv = parse_range(&cfg.rate.inv_f_range, cfg.rate.points, "rate.invF_range")?;
    let grid = kappa_grid(o, cfg.rate.kappa_points, false);
    let opts = sweep_opts(&cfg.rate.method);
    let mut t = Table::new("rate_scan", &["inv_F", "F", "A_minus", "A_plus", "A", "bandwidth"]);
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("method", &cfg.rate.method);
    for &x in &inv {
        let f = 1.0 / x;
        let s = band_sweep(&p, f, o, &grid, &opts)?;
        let a = spreading_rate_a(&s)?;
        let bw = s.bands[0].bandwidth.max(s.bands[1].bandwidth);
        t.push(vec![num(x), num(f), num(a.minus), num(a.plus), num(a.mean), num(bw)]);
    }
    Ok((vec![t], json!({ "points": inv.len() })))
}

pub fn asymptotics(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let a = &cfg.asymptotics;
    let has = |name: &str| a.parts.iter().any(|x| x == name);
    let mut tables = Vec::new();
    let mut res = serde_json::Map::new();

    if has("nu") {
        let o = cfg.rational()?;
        let law = strong_field_exponent(
            &p,
            o,
            &StrongFieldOptions {
                f_min: a.f_min,
                f_max: a.f_max,
                points: a.nu_points,
                kappa_points: a.nu_kappa_points,
                ..StrongFieldOptions::default()
            },
        )?;
        let mut t = Table::new("strong_field", &["F", "bandwidth"]);
        common_meta(&mut t, cfg);
        field_meta(&mut t, cfg);
        t.meta("nu_fit", num(law.raw_exponent));
        for (f, b) in law.fields.iter().zip(&law.bandwidths) {
            t.push(vec![num(*f), num(*b)]);
        }
        tables.push(t);
        res.insert(
            "strong_field".into(),
            json!({
                "nu": law.nu, "raw_exponent": law.raw_exponent, "prefactor": law.prefactor,
                "r_squared": law.fit.r_squared, "flagged": law.flagged,
            }),
        );
    }

    if has("bm") {
        let o = cfg.rational()?;
        let grid = kappa_grid(o, a.bm_kappa_points, false);
        let mut t = Table::new(
            "bm_bands",
            &["F", "kappa", "numeric_minus", "numeric_plus", "bm_minus", "bm_plus"],
        );
        common_meta(&mut t, cfg);
        field_meta(&mut t, cfg);
        t.meta("bm_cutoff", a.bm_cutoff);
        let mut errors = Vec::new();
        for &f in &a.bm_fields {
            let bm = bm_bands(&p, f, o, &grid, a.bm_cutoff)?;
            let s = band_sweep(&p, f, o, &grid, &sweep_opts("monodromy"))?;
            let step = s.ladder_step;
            let delta = s.bands[0].bandwidth.max(s.bands[1].bandwidth);
            let mut worst: f64 = 0.0;
            for k in 0..grid.len() {
                let n = [fold(s.bands[0].energy[k], step), fold(s.bands[1].energy[k], step)];
                for b in 0..2 {
                    worst = worst.max(circular_diff(n[b], bm[b][k], step).abs());
                }
                t.push(vec![num(f), num(grid[k]), num(n[0]), num(n[1]), num(bm[0][k]), num(bm[1][k])]);
            }
            errors.push(json!({ "F": f, "max_error": worst, "bandwidth": delta }));
        }
        tables.push(t);
        res.insert("bm".into(), Value::Array(errors));
    }

    if has("adiabatic") {
        let o = cfg.rational()?;
        let f = cfg.field.f;
        let grid = kappa_grid(o, a.adiabatic_kappa_points, false);
        let ad = adiabatic_bands(
            &p,
            f,
            o,
            &grid,
            &AdiabaticOptions {
                theta_points: a.theta_points,
                ..AdiabaticOptions::default()
            },
        )?;
        let mut t = Table::new(
            "adiabatic",
            &["kappa", "C_minus", "C_plus", "c_minus", "c_plus", "E_minus", "E_plus", "line_average"],
        );
        common_meta(&mut t, cfg);
        field_meta(&mut t, cfg);
        t.meta("F", f);
        for (k, &kappa) in grid.iter().enumerate() {
            t.push(vec![
                num(kappa),
                num(ad.dynamical[0][k]),
                num(ad.dynamical[1][k]),
                num(ad.geometric[0][k]),
                num(ad.geometric[1][k]),
                num(ad.energies[0][k]),
                num(ad.energies[1][k]),
                num(limiting_dispersion(&p, o, kappa, a.line_points)),
            ]);
        }
        tables.push(t);
        res.insert(
            "adiabatic".into(),
            json!({ "min_gap": ad.min_gap, "phase_sum_defect": ad.phase_sum_defect }),
        );
    }

    if has("limiting") {
        let mut t = Table::new("limiting_a", &["r", "q", "A"]);
        common_meta(&mut t, cfg);
        for &q in &a.limiting_q {
            for r in 1..=a.limiting_r_max {
                if gcd(r, q) != 1 {
                    continue;
                }
                let o = Rational::new(r, q)?;
                let v = limiting_a(&p, o, a.limiting_kappa_points, a.line_points);
                t.push(vec![r.to_string(), q.to_string(), num(v)]);
            }
        }
        tables.push(t);
        let mut d = Table::new("limiting_dispersion", &["r", "q", "d_kappa_over_2pi", "energy"]);
        common_meta(&mut d, cfg);
        let mut set = vec![(1, 0), (1, 1), (2, 1)];
        if let Ok(o) = cfg.rational() {
            if !set.contains(&(o.r(), o.q())) {
                set.push((o.r(), o.q()));
            }
        }
        for (r, q) in set {
            let o = Rational::new(r, q)?;
            for k in 0..=a.limiting_kappa_points {
                let x = k as f64 / a.limiting_kappa_points as f64;
                let kappa = 2.0 * PI * x / o.d();
                d.push(vec![
                    r.to_string(),
                    q.to_string(),
                    num(x),
                    num(limiting_dispersion(&p, o, kappa, a.line_points)),
                ]);
            }
        }
        tables.push(d);
    }
    Ok((tables, Value::Object(res)))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn wavepacket(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let w = &cfg.wavepacket;
    let fs = cfg.field_spec(cfg.field.f)?;
    let lat = RealSpaceLattice::build(&p, &fs, w.size, domain(&w.domain, w.half_width))?;
    let psi0 = match w.initial.as_str() {
        "gaussian" => lat.gaussian(w.width)?,
        _ => lat.single_site(0, 0)?,
    };
    let period = 2.0 * PI;
    let times: Vec<f64> = (0..=w.samples)
        .map(|k| w.t_max * period * k as f64 / w.samples as f64)
        .collect();
    let mut trace: Vec<Moments> = Vec::with_capacity(times.len());
    let mut last = Vec::new();
    propagate_with(&lat, &psi0, &times, &PropagationOptions::default(), |t, psi| {
        trace.push(moments(&lat, psi, t));
        if t == times[times.len() - 1] {
            last = psi.to_vec();
        }
        Ok(())
    })?;
    let m2: Vec<f64> = trace.iter().map(|m| m.m2).collect();
    let fit = ballistic_rate(&times, &m2)?;
    let mut t = Table::new(
        "wavepacket",
        &["t", "t_over_T", "m2", "sigma", "var_parallel", "var_perpendicular", "norm", "energy", "boundary"],
    );
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("F", cfg.field.f).meta("L", w.size).meta("domain", &w.domain);
    for m in &trace {
        t.push(vec![
            num(m.time),
            num(m.time / period),
            num(m.m2),
            num(m.sigma()),
            num(m.var_parallel),
            num(m.var_perpendicular),
            num(m.norm),
            num(m.energy),
            num(m.boundary),
        ]);
    }
    let mut tables = vec![t];
    if w.snapshot {
        let mut d = Table::new("wavepacket_density", &["x", "y", "probability"]);
        common_meta(&mut d, cfg);
        d.meta("t", num(times[times.len() - 1]));
        for ((x, y), a) in lat.coords().iter().zip(&last) {
            d.push(vec![x.to_string(), y.to_string(), num(a.norm_sqr())]);
        }
        tables.push(d);
    }
    let mut res = json!({ "ballistic_fit": fit });
    if let Some(o) = fs.as_rational() {
        let s = band_sweep(&p, cfg.field.f, o, &kappa_grid(o, 256, false), &sweep_opts("monodromy"))?;
        res["spreading_rate_a"] = json!(spreading_rate_a(&s)?);
    }
    Ok((tables, res))
}

pub fn fractal_scan(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let fr = &cfg.fractal;
    if fr.theta_points < 2 {
        return Err(CliError::Config("fractal.theta_points: need at least 2".into()));
    }
    let thetas: Vec<f64> = (0..fr.theta_points)
        .map(|i| 0.5 * PI * i as f64 / (fr.theta_points - 1) as f64)
        .collect();
    let period = 2.0 * PI;
    let cps: Vec<f64> = fr.checkpoints.iter().map(|c| c * period).collect();
    let lat = ScanLattice {
        size: fr.size,
        domain: domain(&fr.domain, fr.half_width),
    };
    let rows = dispersion_scan(&p, cfg.field.f, &thetas, &cps, lat, &PropagationOptions::default());
    let mut t = Table::new("fractal_scan", &["theta", "t_over_T", "sigma", "error"]);
    common_meta(&mut t, cfg);
    t.meta("F", cfg.field.f).meta("L", fr.size).meta("domain", &fr.domain);
    for r in &rows {
        for (c, s) in fr.checkpoints.iter().zip(&r.sigma) {
            t.push(vec![
                num(r.theta),
                num(*c),
                s.map(num).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
    }
    let peaks: Vec<usize> = (0..cps.len())
        .map(|c| {
            let col: Vec<f64> = rows.iter().map(|r| r.sigma[c].unwrap_or(f64::NAN)).collect();
            count_peaks(&col, PEAK_PROMINENCE)
        })
        .collect();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok((vec![t], json!({ "peaks": peaks, "failed_angles": failed })))
}

fn lz_opts(cfg: &RunConfig) -> MagnusOptions {
    MagnusOptions {
        tol: cfg.lz.tol,
        ..MagnusOptions::default()
    }
}

pub fn lz_map(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let fs = cfg.field_spec(cfg.field.f)?;
    let tj = tunneling_period(&p)?;
    let snaps: Vec<f64> = cfg.lz.snapshots.iter().map(|s| s * tj).collect();
    let map = bz_population_map(&p, &fs, &snaps, cfg.lz.map_grid, &lz_opts(cfg))?;
    let mut t = Table::new("lz_map", &["t_over_TJ", "kx", "ky", "p_plus"]);
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("F", cfg.field.f).meta("grid", cfg.lz.map_grid);
    for (s, row) in cfg.lz.snapshots.iter().zip(&map.p_plus) {
        for (k, v) in map.kappa.iter().zip(row) {
            t.push(vec![num(*s), num(k.0), num(k.1), num(*v)]);
        }
    }
    Ok((vec![t], json!({ "failures": map.failures.len() })))
}

pub fn lz_mean(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let fields = parse_range(&cfg.lz.f_range, 2, "lz.F_range")?;
    let mut t = Table::new("lz_mean", &["F", "inv_F", "mean_p_plus"]);
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("t_total_TJ", cfg.lz.t_total).meta("grid", cfg.lz.mean_grid);
    for &f in &fields {
        let fs = cfg.field_spec(f)?;
        let m = mean_upper_population(&p, &fs, cfg.lz.t_total, cfg.lz.mean_grid, cfg.lz.mean_samples, &lz_opts(cfg))?;
        t.push(vec![num(f), num(1.0 / f), num(m)]);
    }
    Ok((vec![t], json!({ "points": fields.len() })))
}

pub fn lz_trace(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.params();
    let fs = cfg.field_spec(cfg.field.f)?;
    let initial: InitialCondition = cfg.lz.initial.parse()?;
    let n = (cfg.lz.t_total * cfg.lz.samples_per_tj as f64).round() as usize;
    if n < 2 {
        return Err(CliError::Config("lz: t_total * samples_per_tj must be at least 2".into()));
    }
    let grid: Vec<f64> = (0..=n).map(|k| cfg.lz.t_total * k as f64 / n as f64).collect();
    let tr = population_trace(&p, &fs, initial, &grid, cfg.lz.trace_grid, &lz_opts(cfg))?;
    let mut t = Table::new("lz_trace", &["t_over_TJ", "p_plus", "p_minus"]);
    common_meta(&mut t, cfg);
    field_meta(&mut t, cfg);
    t.meta("F", cfg.field.f)
        .meta("initial", &cfg.lz.initial)
        .meta("rational", tr.rational);
    for k in 0..tr.t.len() {
        t.push(vec![num(tr.t[k]), num(tr.p_plus[k]), num(tr.p_minus[k])]);
    }
    // drive period of an exactly rational direction, also when given as an angle
    let exact = match fs.orientation {
        Orientation::Rational(o) => Some(o),
        o => o.rationalize(16).ok().filter(|r| (r.theta() - o.theta()).abs() < 1e-12),
    };
    let mut res = json!({ "rational": exact.is_some() });
    if let Some(o) = exact {
        let rat = wannier_stark::FieldSpec::new(cfg.field.f, Orientation::Rational(o))?;
        let period = drive_period(&rat).expect("rational");
        let tj = tunneling_period(&p)?;
        let lag = period / tj * cfg.lz.samples_per_tj as f64;
        res["drive_period"] = json!(period);
        res["orientation"] = json!([o.r(), o.q()]);
        res["revival"] = json!(autocorrelation(&tr.p_plus, lag.round() as usize));
    }
    Ok((vec![t], res))
}
