//! Self-check suites run by the `verify` subcommand.

use crate::config::RunConfig;
use crate::output::{num, write_json};
use serde_json::{json, Map};
use shearwave::dispersion::{
    big_f, big_f_wronskian, count_roots_rect, default_regions, eval_dispersion, find_all_modes, find_modes,
    HilbertTable,
};
use shearwave::oracles::{couette_modes, fd_newton};
use shearwave::profile::ProfileKind;
use shearwave::rayleigh::{solve_y_minus, solve_y_plus, wronskian_drift, BcKind, WaveContext};
use shearwave::{Error, Result, C64};
use std::path::Path;

pub const SUITES: [&str; 6] = ["wronskian", "conjugacy", "index", "couette", "hilbert", "fd_determinant"];

struct Outcome {
    metric: f64,
    tol: f64,
    note: Option<String>,
}

impl Outcome {
    fn new(metric: f64, tol: f64) -> Self {
        Self { metric, tol, note: None }
    }
    fn skipped(why: &str) -> Self {
        Self { metric: 0.0, tol: 0.0, note: Some(why.into()) }
    }
    fn pass(&self) -> bool {
        self.note.is_some() || self.metric <= self.tol
    }
}

fn probe_points(ctx: &WaveContext) -> Vec<C64> {
    let p = &ctx.profile;
    let (a, b) = (p.u_min, p.u_max);
    let w = b - a;
    vec![
        C64::new(0.5 * (a + b), 0.3 * w),
        C64::new(a + 0.2 * w, 0.05 * w),
        C64::new(b + 0.7 * w, 0.4 * w),
        C64::new(a - 0.6 * w, -0.2 * w),
    ]
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn scaled_rel(a: (C64, f64), b: (C64, f64)) -> f64 {
    let m = a.1.max(b.1);
    rel(a.0 * (a.1 - m).exp(), b.0 * (b.1 - m).exp())
}

fn wronskian(ctx: &WaveContext) -> Result<Outcome> {
    let grid = ctx.grid();
    let mut worst: f64 = 0.0;
    for c in probe_points(ctx) {
        let tm = solve_y_minus(ctx, c, &grid)?;
        let tp = solve_y_plus(ctx, c, &grid)?;
        worst = worst.max(wronskian_drift(&tm, &tp).max_rel_drift);
        worst = worst.max(scaled_rel(big_f_wronskian(ctx, c)?, big_f(ctx, c)?));
    }
    Ok(Outcome::new(worst, 1e-7))
}

fn conjugacy(ctx: &WaveContext) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for c in probe_points(ctx) {
        let (f, ln) = big_f(ctx, c)?;
        let (fc, lnc) = big_f(ctx, c.conj())?;
        worst = worst.max(scaled_rel((fc, lnc), (f.conj(), ln)));
    }
    Ok(Outcome::new(worst, 1e-9))
}

fn index(ctx: &WaveContext, max_roots: usize) -> Result<Outcome> {
    let mut mismatch = 0usize;
    for r in default_regions(ctx) {
        let n = count_roots_rect(ctx, &r)?;
        let found: usize = find_modes(ctx, &r, max_roots)?.iter().map(|m| m.multiplicity).sum();
        mismatch += n.abs_diff(found);
    }
    Ok(Outcome::new(mismatch as f64, 0.0))
}

fn couette(cfg: &RunConfig, ctx: &WaveContext, max_roots: usize) -> Result<Outcome> {
    let spec = cfg.profile_spec()?;
    let slope = spec.params.get("slope").copied().unwrap_or(1.0);
    let offset = spec.params.get("offset").copied().unwrap_or(0.0);
    if spec.kind != ProfileKind::Couette || slope != 1.0 || ctx.bc != BcKind::FreeSurface {
        return Ok(Outcome::skipped("needs a unit-slope couette profile with a free surface"));
    }
    let exact = couette_modes(ctx.k, ctx.h(), ctx.g, ctx.sigma)?;
    let modes = find_all_modes(ctx, max_roots)?;
    if modes.len() != 2 {
        return Ok(Outcome::new(f64::INFINITY, 1e-9));
    }
    let err = (modes[0].c - (exact.c_minus + offset)).norm() / exact.c_minus.abs()
        + (modes[1].c - (exact.c_plus + offset)).norm() / exact.c_plus.abs();
    Ok(Outcome::new(err, 1e-9))
}

fn hilbert(ctx: &WaveContext) -> Result<Outcome> {
    if ctx.bc != BcKind::FreeSurface {
        return Ok(Outcome::skipped("free surface only"));
    }
    let table = HilbertTable::new(ctx)?;
    let mut worst: f64 = 0.0;
    for c in probe_points(ctx) {
        worst = worst.max(rel(table.eval(ctx, c)?, eval_dispersion(ctx, c)?.y));
    }
    Ok(Outcome::new(worst, 1e-6))
}

fn fd_determinant(ctx: &WaveContext, max_roots: usize) -> Result<Outcome> {
    if ctx.bc != BcKind::FreeSurface {
        return Ok(Outcome::skipped("free surface only"));
    }
    let modes = find_all_modes(ctx, max_roots)?;
    let scale = ctx.profile.u_max - ctx.profile.u_min;
    let mut worst: f64 = 0.0;
    for m in modes.iter().filter(|m| m.c.im >= 0.0) {
        let c = fd_newton(ctx, m.c, 800)?;
        worst = worst.max((c - m.c).norm() / (m.c.norm() + scale));
    }
    Ok(Outcome::new(worst, 1e-4))
}

pub fn verify_cmd(cfg: &RunConfig, out: &Path, requested: &[String]) -> Result<()> {
    let suites: Vec<String> = if !requested.is_empty() {
        requested.to_vec()
    } else if !cfg.verify.suites.is_empty() {
        cfg.verify.suites.clone()
    } else {
        SUITES.iter().map(|s| s.to_string()).collect()
    };
    if let Some(bad) = suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
        return Err(Error::InvalidSpec(format!("unknown suite '{bad}' (known: {})", SUITES.join(", "))));
    }
    let profile = cfg.build_profile()?;
    let ctx = cfg.context(profile, cfg.verify.k, cfg.bc()?)?;
    let max_roots = cfg.spectrum.max_roots;
    let mut results = Map::new();
    let mut failed = Vec::new();
    for name in &suites {
        let r = match name.as_str() {
            "wronskian" => wronskian(&ctx),
            "conjugacy" => conjugacy(&ctx),
            "index" => index(&ctx, max_roots),
            "couette" => couette(cfg, &ctx, max_roots),
            "hilbert" => hilbert(&ctx),
            _ => fd_determinant(&ctx, max_roots),
        };
        let v = match r {
            Ok(o) => {
                if !o.pass() {
                    failed.push(name.clone());
                }
                json!({"pass": o.pass(), "metric": num(o.metric), "tol": num(o.tol), "skipped": o.note})
            }
            Err(e) => {
                failed.push(name.clone());
                json!({"pass": false, "error": e.to_string()})
            }
        };
        eprintln!("{name}: {}", if v["pass"] == true { "pass" } else { "FAIL" });
        results.insert(name.clone(), v);
    }
    write_json(&out.join("verify.json"), &json!({"k": num(ctx.k), "suites": results}))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("verification failed: {}", failed.join(", "))))
    }
}
