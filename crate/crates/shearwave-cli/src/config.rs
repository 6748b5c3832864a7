//! Run configuration: sectioned key-value files (TOML) or the same layout
//! as JSON.

use serde::Deserialize;
use shearwave::evolution::ModeState;
use shearwave::profile::{build_profile, ProfileKind, ProfileSpec, ShearProfile};
use shearwave::rayleigh::{BcKind, Numerics, WaveContext};
use shearwave::{Error, Result, C64};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub thresholds: ThresholdsSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// (x2, U) samples for tabulated profiles
    #[serde(default)]
    pub table: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "one")]
    pub h: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { h: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "free_surface")]
    pub bc: String,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self { g: 1.0, sigma: 1.0, bc: free_surface() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub grid_n: Option<usize>,
    pub ode_tol: Option<f64>,
    pub delta_cl: Option<f64>,
    pub eps_seq: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "k_min_default")]
    pub k_min: f64,
    #[serde(default = "k_max_default")]
    pub k_max: f64,
    #[serde(default = "k_count_default")]
    pub k_count: usize,
    #[serde(default = "max_roots_default")]
    pub max_roots: usize,
    /// wavenumbers at which eigenfunction traces are written
    #[serde(default)]
    pub mode_k: Vec<f64>,
    /// [re_min, re_max, im_min, im_max] scanned at each mode_k
    pub rect: Option<[f64; 4]>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            k_min: k_min_default(),
            k_max: k_max_default(),
            k_count: k_count_default(),
            max_roots: max_roots_default(),
            mode_k: Vec::new(),
            rect: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsSection {
    #[serde(default = "thr_k_max_default")]
    pub k_max: f64,
}

impl Default for ThresholdsSection {
    fn default() -> Self {
        Self { k_max: thr_k_max_default() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(default = "one")]
    pub k: f64,
    pub dt: Option<f64>,
    #[serde(default = "t_final_default")]
    pub t_final: f64,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    #[serde(default = "checkpoint_count_default")]
    pub checkpoint_count: usize,
    pub fit_window: Option<[f64; 2]>,
    /// time of the t^2 v2 reconstruction check
    pub t_profile: Option<f64>,
    #[serde(default)]
    pub richardson: bool,
    #[serde(default = "max_roots_default")]
    pub max_roots: usize,
    #[serde(default)]
    pub init: InitSection,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            k: 1.0,
            dt: None,
            t_final: t_final_default(),
            checkpoints: Vec::new(),
            checkpoint_count: checkpoint_count_default(),
            fit_window: None,
            t_profile: None,
            richardson: false,
            max_roots: max_roots_default(),
            init: InitSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// "gaussian" or "table"
    #[serde(default = "gaussian")]
    pub omega0: String,
    #[serde(default = "center_default")]
    pub center: f64,
    #[serde(default = "width_default")]
    pub width: f64,
    #[serde(default = "unit")]
    pub amplitude: [f64; 2],
    /// (x2, re, im) samples, linearly interpolated onto the grid
    #[serde(default)]
    pub table: Vec<[f64; 3]>,
    #[serde(default)]
    pub eta0: [f64; 2],
    #[serde(default)]
    pub b0: [f64; 2],
    /// overrides physics.bc for this run
    pub bc: Option<String>,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            omega0: gaussian(),
            center: center_default(),
            width: width_default(),
            amplitude: unit(),
            table: Vec::new(),
            eta0: [0.0; 2],
            b0: [0.0; 2],
            bc: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default = "one")]
    pub k: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { suites: Vec::new(), k: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}
fn free_surface() -> String {
    "free_surface".into()
}
fn k_min_default() -> f64 {
    0.1
}
fn k_max_default() -> f64 {
    50.0
}
fn k_count_default() -> usize {
    48
}
fn max_roots_default() -> usize {
    16
}
fn thr_k_max_default() -> f64 {
    100.0
}
fn t_final_default() -> f64 {
    200.0
}
fn checkpoint_count_default() -> usize {
    40
}
fn gaussian() -> String {
    "gaussian".into()
}
fn center_default() -> f64 {
    -0.5
}
fn width_default() -> f64 {
    0.2
}
fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be finite")))
    }
}

impl RunConfig {
    /// Parse a config file; JSON when the text starts with '{', TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (k, v) in &self.profile.params {
            check_finite(&format!("profile.params.{k}"), *v)?;
        }
        for row in &self.profile.table {
            check_finite("profile.table", row[0])?;
            check_finite("profile.table", row[1])?;
        }
        check_finite("domain.h", self.domain.h)?;
        check_finite("physics.g", self.physics.g)?;
        check_finite("physics.sigma", self.physics.sigma)?;
        let s = &self.spectrum;
        check_finite("spectrum.k_min", s.k_min)?;
        check_finite("spectrum.k_max", s.k_max)?;
        if !(s.k_min > 0.0 && s.k_max > s.k_min && s.k_count >= 2) {
            return Err(Error::InvalidSpec("spectrum needs 0 < k_min < k_max and k_count >= 2".into()));
        }
        if let Some(r) = s.rect {
            if r.iter().any(|v| !v.is_finite()) || !(r[1] > r[0] && r[3] > r[2]) {
                return Err(Error::InvalidSpec("spectrum.rect must be a nonempty finite rectangle".into()));
            }
        }
        check_finite("thresholds.k_max", self.thresholds.k_max)?;
        let e = &self.evolve;
        check_finite("evolve.k", e.k)?;
        check_finite("evolve.t_final", e.t_final)?;
        if !(e.t_final > 0.0) {
            return Err(Error::InvalidSpec("evolve.t_final must be positive".into()));
        }
        if let Some(dt) = e.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidSpec("evolve.dt must be positive".into()));
            }
        }
        for t in &e.checkpoints {
            check_finite("evolve.checkpoints", *t)?;
        }
        for v in e.init.amplitude.iter().chain(&e.init.eta0).chain(&e.init.b0) {
            check_finite("evolve.init", *v)?;
        }
        check_finite("evolve.init.center", e.init.center)?;
        check_finite("evolve.init.width", e.init.width)?;
        Ok(())
    }

    pub fn profile_spec(&self) -> Result<ProfileSpec> {
        let kind: ProfileKind = self.profile.kind.parse()?;
        let mut spec = ProfileSpec::new(kind, self.domain.h);
        spec.params = self.profile.params.clone();
        spec.table = self.profile.table.iter().map(|r| (r[0], r[1])).collect();
        Ok(spec)
    }

    pub fn build_profile(&self) -> Result<Arc<ShearProfile>> {
        Ok(Arc::new(build_profile(&self.profile_spec()?)?))
    }

    pub fn numerics(&self) -> Numerics {
        let d = Numerics::default();
        let n = &self.numerics;
        Numerics {
            grid_n: n.grid_n.unwrap_or(d.grid_n),
            ode_tol: n.ode_tol.unwrap_or(d.ode_tol),
            delta_cl: n.delta_cl.unwrap_or(d.delta_cl),
            eps_seq: n.eps_seq.clone().unwrap_or(d.eps_seq),
        }
    }

    pub fn bc(&self) -> Result<BcKind> {
        self.physics.bc.parse()
    }

    pub fn context(&self, profile: Arc<ShearProfile>, k: f64, bc: BcKind) -> Result<WaveContext> {
        WaveContext::new(profile, k, self.physics.g, self.physics.sigma, bc, self.numerics())
    }

    /// Checkpoint times: explicit list or `checkpoint_count` uniform points.
    pub fn checkpoints(&self) -> Result<Vec<f64>> {
        let e = &self.evolve;
        let cps = if e.checkpoints.is_empty() {
            if e.checkpoint_count == 0 {
                return Err(Error::InvalidSpec("evolve.checkpoint_count must be positive".into()));
            }
            (1..=e.checkpoint_count).map(|i| e.t_final * i as f64 / e.checkpoint_count as f64).collect()
        } else {
            e.checkpoints.clone()
        };
        if cps.windows(2).any(|w| !(w[1] > w[0])) || cps[0] <= 0.0 || *cps.last().unwrap() > e.t_final + 1e-12 {
            return Err(Error::InvalidSpec("checkpoints must increase within (0, t_final]".into()));
        }
        Ok(cps)
    }

    /// Initial state on the context grid.
    pub fn initial_state(&self, ctx: &WaveContext) -> Result<ModeState> {
        let init = &self.evolve.init;
        let grid = ctx.grid();
        let omega = match init.omega0.as_str() {
            "gaussian" => {
                if !(init.width > 0.0) {
                    return Err(Error::InvalidSpec("evolve.init.width must be positive".into()));
                }
                let a = C64::new(init.amplitude[0], init.amplitude[1]);
                grid.iter().map(|&x| a * (-((x - init.center) / init.width).powi(2)).exp()).collect()
            }
            "table" => interpolate_table(&init.table, &grid)?,
            other => return Err(Error::InvalidSpec(format!("unknown omega0 kind '{other}'"))),
        };
        let (eta, b) = if ctx.bc == BcKind::Channel {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (C64::new(init.eta0[0], init.eta0[1]), C64::new(init.b0[0], init.b0[1]))
        };
        Ok(ModeState { omega, eta, b })
    }
}

fn interpolate_table(table: &[[f64; 3]], grid: &[f64]) -> Result<Vec<C64>> {
    if table.len() < 2 || table.windows(2).any(|w| !(w[1][0] > w[0][0])) {
        return Err(Error::InvalidSpec("omega0 table needs at least two rows with increasing x2".into()));
    }
    if table.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("omega0 table must be finite".into()));
    }
    let lo = table[0][0];
    let hi = table[table.len() - 1][0];
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        if x < lo - 1e-12 || x > hi + 1e-12 {
            return Err(Error::InvalidSpec(format!("omega0 table does not cover x2 = {x}")));
        }
        let j = table.partition_point(|r| r[0] <= x).clamp(1, table.len() - 1);
        let (a, b) = (table[j - 1], table[j]);
        let t = ((x - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
        out.push(C64::new(a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])));
    }
    Ok(out)
}
