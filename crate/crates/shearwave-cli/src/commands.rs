//! Subcommands.

use crate::config::RunConfig;
use crate::output::{num, write_json, Cell, Csv};
use rayon::prelude::*;
use serde_json::{json, Value};
use shearwave::dispersion::{
    continue_branch, find_all_modes, find_modes, semicircle_excess, thresholds, BranchLabel, EigenBranch, FoundMode,
    Rect,
};
use shearwave::evolution::{
    asymptotic_profiles, evolve, fit_decay, lambda_residual, reconstruction_error, singular_mode_scan, EvolveOptions,
    Evolver,
};
use shearwave::rayleigh::{solve_y_minus, WaveContext};
use shearwave::{Error, Result, C64};
use std::path::Path;

fn cval(c: C64) -> Value {
    json!([num(c.re), num(c.im)])
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

fn seed_roots(ctx: &WaveContext, ks: &[f64], max_roots: usize) -> Result<(Option<(f64, C64)>, Option<(f64, C64)>)> {
    let p = &ctx.profile;
    let mut plus = None;
    let mut minus = None;
    for &k in ks {
        let modes = find_all_modes(&ctx.with_k(k), max_roots)?;
        if plus.is_none() {
            plus = modes.iter().filter(|m| m.c.im == 0.0 && m.c.re > p.u_max).map(|m| (k, m.c)).next_back();
        }
        if minus.is_none() {
            minus = modes.iter().find(|m| m.c.im == 0.0 && m.c.re < p.u_min).map(|m| (k, m.c));
        }
        if plus.is_some() && minus.is_some() {
            break;
        }
    }
    Ok((plus, minus))
}

fn branch_json(b: &EigenBranch) -> Value {
    json!({
        "label": match b.label {
            BranchLabel::CPlus => "c_plus",
            BranchLabel::CMinus => "c_minus",
            BranchLabel::Bifurcated => "bifurcated",
            BranchLabel::InflectionFamily => "inflection_family",
        },
        "samples": b.samples.len(),
        "events": b.events.iter().map(|e| json!({"kind": e.kind.name(), "k_at": num(e.k_at)})).collect::<Vec<_>>(),
    })
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<()> {
    let profile = cfg.build_profile()?;
    let s = &cfg.spectrum;
    let ctx = cfg.context(profile.clone(), s.k_min, cfg.bc()?)?;
    let ks = geometric(s.k_min, s.k_max, s.k_count);
    let (plus_seed, minus_seed) = seed_roots(&ctx, &ks, s.max_roots)?;
    let run = |seed: Option<(f64, C64)>, label| seed.map(|sd| continue_branch(&ctx, &ks, sd, label)).transpose();
    let (plus, minus) = rayon::join(|| run(plus_seed, BranchLabel::CPlus), || run(minus_seed, BranchLabel::CMinus));
    let (plus, minus) = (plus?, minus?);

    let mut csv = Csv::new(
        "spectrum",
        &["k", "re_c_plus", "im_c_plus", "re_c_minus", "im_c_minus", "abs_df_dc_plus", "abs_df_dc_minus"],
    );
    let find = |b: &Option<EigenBranch>, k: f64| {
        b.as_ref().and_then(|b| b.samples.iter().find(|s| s.k == k)).map(|s| (s.c, s.df_dc.norm()))
    };
    let nan = (C64::new(f64::NAN, f64::NAN), f64::NAN);
    for &k in &ks {
        let (cp, dp) = find(&plus, k).unwrap_or(nan);
        let (cm, dm) = find(&minus, k).unwrap_or(nan);
        csv.row(&[Cell::F(k), Cell::F(cp.re), Cell::F(cp.im), Cell::F(cm.re), Cell::F(cm.im), Cell::F(dp), Cell::F(dm)]);
    }
    csv.write(&out.join("spectrum.csv"))?;

    let mut ev = Csv::new("events", &["branch", "kind", "k_at"]);
    for (name, b) in [("c_plus", &plus), ("c_minus", &minus)] {
        if let Some(b) = b {
            for e in &b.events {
                ev.row(&[Cell::S(name.into()), Cell::S(e.kind.name().into()), Cell::F(e.k_at)]);
            }
        }
    }
    ev.write(&out.join("events.csv"))?;

    // root census over the whole k grid
    let census: Vec<Vec<FoundMode>> = ks.par_iter().map(|&k| find_all_modes(&ctx.with_k(k), s.max_roots)).collect::<Result<_>>()?;
    let mut semicircle_checked = 0usize;
    let mut semicircle_violations = 0usize;
    let mut max_excess = f64::NEG_INFINITY;
    let mut counts = Vec::new();
    for (k, modes) in ks.iter().zip(&census) {
        for m in modes.iter().filter(|m| m.c.im > 0.0) {
            semicircle_checked += 1;
            let excess = semicircle_excess(&profile, m.c);
            if excess > 1e-8 * (profile.u_max - profile.u_min) {
                semicircle_violations += 1;
            }
            max_excess = max_excess.max(excess);
        }
        counts.push(json!({
            "k": num(*k),
            "count": modes.iter().map(|m| m.multiplicity).sum::<usize>(),
            "roots": modes.iter().map(|m| cval(m.c)).collect::<Vec<_>>(),
        }));
    }

    let mode_k = if s.mode_k.is_empty() { vec![s.k_min] } else { s.mode_k.clone() };
    let grid = ctx.grid();
    let mut modes_csv = Csv::new("modes", &["k", "re_c", "im_c", "x2", "re_y", "im_y", "re_dy", "im_dy"]);
    let mut rect_scans = Vec::new();
    for &k in &mode_k {
        let kc = ctx.with_k(k);
        let modes = find_all_modes(&kc, s.max_roots)?;
        for m in &modes {
            let t = solve_y_minus(&kc, m.c, &grid)?;
            let scale = t.y.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
            for (i, &x) in grid.iter().enumerate() {
                let (y, dy) = (t.y[i] / scale, t.dy[i] / scale);
                modes_csv.row(&[
                    Cell::F(k),
                    Cell::F(m.c.re),
                    Cell::F(m.c.im),
                    Cell::F(x),
                    Cell::F(y.re),
                    Cell::F(y.im),
                    Cell::F(dy.re),
                    Cell::F(dy.im),
                ]);
            }
        }
        if let Some(r) = s.rect {
            let rect = Rect::new(r[0], r[1], r[2], r[3]);
            let found = find_modes(&kc, &rect, s.max_roots)?;
            rect_scans.push(json!({
                "k": num(k),
                "count": found.iter().map(|m| m.multiplicity).sum::<usize>(),
                "roots": found.iter().map(|m| cval(m.c)).collect::<Vec<_>>(),
            }));
        }
    }
    modes_csv.write(&out.join("modes.csv"))?;

    let summary = json!({
        "k_grid": {"k_min": num(s.k_min), "k_max": num(s.k_max), "k_count": s.k_count},
        "branches": [plus.as_ref().map(branch_json), minus.as_ref().map(branch_json)],
        "root_counts": counts,
        "rect_scans": rect_scans,
        "semicircle": {
            "checked": semicircle_checked,
            "violations": semicircle_violations,
            "max_excess": if semicircle_checked > 0 { num(max_excess) } else { Value::Null },
        },
    });
    write_json(&out.join("summary.json"), &summary)
}

pub fn thresholds_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let profile = cfg.build_profile()?;
    let r = thresholds(profile, cfg.physics.g, cfg.physics.sigma, cfg.thresholds.k_max, cfg.numerics())?;
    let v = json!({
        "sigma_threshold": num(r.sigma_threshold),
        "g_sharp": num(r.g_sharp),
        "k_star": num(r.k_star),
        "k_sharp": r.k_sharp.map(num),
        "k_sharp_minus": r.k_sharp_band.map(|b| num(b.0)),
        "k_sharp_plus": r.k_sharp_band.map(|b| num(b.1)),
        "c0_plus": num(r.c0_plus),
        "c0_minus": num(r.c0_minus),
        "mono_plus": num(r.mono_condition_plus),
        "mono_minus": num(r.mono_condition_minus),
    });
    write_json(&out.join("thresholds.json"), &v)
}

pub fn evolve_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let profile = cfg.build_profile()?;
    let e = &cfg.evolve;
    let bc = match &e.init.bc {
        Some(b) => b.parse()?,
        None => cfg.bc()?,
    };
    let ctx = cfg.context(profile, e.k, bc)?;
    if ctx.k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let checkpoints = cfg.checkpoints()?;
    let state0 = cfg.initial_state(&ctx)?;
    if let Some(c_r) = singular_mode_scan(&ctx)? {
        return Err(Error::SingularModePresent { c_r });
    }
    let catalog = find_all_modes(&ctx, e.max_roots)?;
    let prof = asymptotic_profiles(&ctx, &state0)?;
    let opts = EvolveOptions { dt: e.dt, crosscheck: true, richardson: e.richardson, omega_c: Some(prof.omega_c.clone()) };
    let run = evolve(&ctx, &state0, &catalog, &checkpoints, &opts)?;

    let mut csv = Csv::new("damping", &["t", "norm_v2c", "norm_v1c", "abs_etac", "scatter_err", "split_crosscheck"]);
    for c in &run.checkpoints {
        csv.row(&[
            Cell::F(c.t),
            Cell::F(c.norm_v2c),
            Cell::F(c.norm_v1c),
            Cell::F(c.abs_etac),
            Cell::F(c.scatter_err),
            Cell::F(c.split_crosscheck),
        ]);
    }
    csv.write(&out.join("damping.csv"))?;

    let mut pcsv = Csv::new(
        "profiles",
        &["x2", "re_omega_c", "im_omega_c", "re_lambda_t", "im_lambda_t", "re_lambda_b", "im_lambda_b"],
    );
    for (i, &x) in prof.grid.iter().enumerate() {
        pcsv.row(&[
            Cell::F(x),
            Cell::F(prof.omega_c[i].re),
            Cell::F(prof.omega_c[i].im),
            Cell::F(prof.lambda_t[i].re),
            Cell::F(prof.lambda_t[i].im),
            Cell::F(prof.lambda_b[i].re),
            Cell::F(prof.lambda_b[i].im),
        ]);
    }
    pcsv.write(&out.join("profiles.csv"))?;

    let t_final = *checkpoints.last().unwrap();
    let window = e.fit_window.map(|w| (w[0], w[1])).unwrap_or((0.1 * t_final, t_final));
    let ts: Vec<f64> = run.checkpoints.iter().map(|c| c.t).collect();
    let fit = |vals: Vec<f64>| -> Value {
        if run.split.degenerate {
            return json!({"disabled": "degenerate root in catalog"});
        }
        match fit_decay(&ts, &vals, window) {
            Ok(f) => json!({"exponent": num(f.exponent), "band": [num(f.band.0), num(f.band.1)], "points": f.points}),
            Err(err) => json!({"error": err.to_string()}),
        }
    };
    let reconstruction = match e.t_profile.or(if t_final >= 100.0 { Some(100.0) } else { None }) {
        Some(tp) if tp > 0.0 => {
            let ev = Evolver::new(&ctx)?;
            let dt = run.dt;
            let s = ev.advance(&run.split.continuous, tp, dt)?;
            let (v2, _) = ev.velocity(&s);
            json!({"t": num(tp), "relative_error": num(reconstruction_error(&ctx, &prof, &v2, tp))})
        }
        _ => Value::Null,
    };
    let report = json!({
        "k": num(ctx.k),
        "bc": cfg.physics.bc,
        "dt": num(run.dt),
        "catalog": catalog.iter().map(|m| json!({"c": cval(m.c), "multiplicity": m.multiplicity})).collect::<Vec<_>>(),
        "point_modes": run.split.point_modes.len(),
        "degenerate": run.split.degenerate,
        "fit_window": [num(window.0), num(window.1)],
        "exponents": {
            "norm_v2c": fit(run.checkpoints.iter().map(|c| c.norm_v2c).collect()),
            "norm_v1c": fit(run.checkpoints.iter().map(|c| c.norm_v1c).collect()),
            "abs_etac": fit(run.checkpoints.iter().map(|c| c.abs_etac).collect()),
        },
        "scatter_errors": run.checkpoints.iter().map(|c| json!({"t": num(c.t), "value": num(c.scatter_err)})).collect::<Vec<_>>(),
        "max_split_crosscheck": num(run.checkpoints.iter().map(|c| c.split_crosscheck).fold(0.0, f64::max)),
        "lambda_residuals": {
            "lambda_t": num(lambda_residual(&ctx, &prof.lambda_t, true, 0.05)),
            "lambda_b": num(lambda_residual(&ctx, &prof.lambda_b, false, 0.05)),
        },
        "omega_c_side_difference": num(prof.side_difference()),
        "reconstruction": reconstruction,
        "richardson_change": run.richardson_change.map(num),
    });
    write_json(&out.join("report.json"), &report)
}

pub use crate::verify::verify_cmd;
