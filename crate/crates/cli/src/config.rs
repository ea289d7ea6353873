//! Run configuration read from a TOML file.

use std::path::Path;
use std::sync::Arc;

use geoptics::forcing::Forcing;
use geoptics::linalg::RMat;
use geoptics::profile::{HyperbolicOptions, ProfileGrid};
use geoptics::singular::{SingularOptions, SolveMethod};
use geoptics::system::{AffineModel, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemConfig,
    pub beta: Vec<f64>,
    pub forcing: Forcing,
    pub grid: GridConfig,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub resonance: ResonanceConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub singular: SingularConfig,
    #[serde(default)]
    pub checks: CheckConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemConfig {
    Euler2d {
        k: f64,
        gamma: f64,
        base: Vec<f64>,
    },
    Euler3d {
        k: f64,
        gamma: f64,
        base: Vec<f64>,
    },
    /// Affine coefficients `A_j(v) = a[j] + sum_i v_i da[j][i]`, `j = 0..=d`.
    Custom {
        d: usize,
        a: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        da: Vec<Vec<Vec<Vec<f64>>>>,
        b0: Vec<Vec<f64>>,
        #[serde(default)]
        f0: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_final: f64,
    pub dt: f64,
    pub x_len: f64,
    pub dx: f64,
    #[serde(default = "one")]
    pub ny: usize,
    #[serde(default = "unit")]
    pub y_len: f64,
    pub n_theta: i64,
    pub depth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConfig {
    pub bound: i64,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self { bound: 12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub picard: f64,
    pub max_iter: usize,
    /// Leading Picard iterates kept for the simultaneous diagnostic.
    pub keep: usize,
    pub truncation: f64,
    pub singular: f64,
    pub stability_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { picard: 1e-8, max_iter: 50, keep: 3, truncation: 1e-6, singular: 1e-6, stability_margin: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingularConfig {
    pub resolution: f64,
    pub n_theta0: usize,
    pub cfl: f64,
    pub cap: f64,
    pub method: SolveMethod,
}

impl Default for SingularConfig {
    fn default() -> Self {
        let o = SingularOptions::default();
        Self { resolution: o.resolution, n_theta0: o.n_theta0, cfl: o.cfl, cap: o.cap, method: o.method }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub multiplicity_samples: usize,
    pub sample_radius: f64,
    pub stability_samples: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { multiplicity_samples: 100, sample_radius: 0.05, stability_samples: 400 }
    }
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        let g = &self.grid;
        for (name, v) in [("t_final", g.t_final), ("dt", g.dt), ("x_len", g.x_len), ("dx", g.dx), ("y_len", g.y_len), ("depth", g.depth)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("grid.{name} must be positive, got {v}"));
            }
        }
        if g.ny == 0 || g.n_theta < 1 {
            return bad("grid.ny and grid.n_theta must be at least 1".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("epsilons must be a non-empty list of positive numbers".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be sorted strictly descending".into());
        }
        let s = &self.singular;
        if !(s.resolution > 0.0 && s.cfl > 0.0 && s.cap > 0.0) || s.n_theta0 < 4 {
            return bad("singular.resolution, cfl and cap must be positive and n_theta0 >= 4".into());
        }
        let t = &self.tolerances;
        if !(t.picard > 0.0 && t.truncation >= 0.0 && t.singular > 0.0) || t.max_iter == 0 {
            return bad("tolerances must be positive".into());
        }
        let d = self.dimension();
        if self.beta.len() != d {
            return bad(format!("beta has {} entries, expected {d}", self.beta.len()));
        }
        if let SystemConfig::Euler2d { base, .. } | SystemConfig::Euler3d { base, .. } = &self.system {
            if base.len() != d + 1 || !(base[0] > 0.0 && base[0].is_finite()) {
                return bad(format!("euler base state needs {} entries with positive density", d + 1));
            }
        }
        let sys = self.system_spec()?;
        self.forcing.validate(sys.p).map_err(|e| RunError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match &self.system {
            SystemConfig::Euler2d { .. } => 2,
            SystemConfig::Euler3d { .. } => 3,
            SystemConfig::Custom { d, .. } => *d,
        }
    }

    pub fn system_spec(&self) -> Result<SystemSpec, RunError> {
        let spec = match &self.system {
            SystemConfig::Euler2d { k, gamma, base } => SystemSpec::euler(2, *k, *gamma, base.clone()),
            SystemConfig::Euler3d { k, gamma, base } => SystemSpec::euler(3, *k, *gamma, base.clone()),
            SystemConfig::Custom { d, a, da, b0, f0 } => {
                if a.len() != d + 1 {
                    return Err(RunError::Config(format!("custom system needs {} matrices A_0..A_d", d + 1)));
                }
                let n = a[0].len();
                let a: Vec<RMat> = a.iter().map(|m| matrix(m, n)).collect::<Result<_, _>>()?;
                let da: Vec<Vec<RMat>> = da.iter().map(|ms| ms.iter().map(|m| matrix(m, n)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
                let p = b0.len();
                let b0 = if p == 0 { RMat::zeros(0, n) } else { rows(b0, n)? };
                let f0 = match f0 {
                    Some(f) => matrix(f, n)?,
                    None => RMat::zeros(n, n),
                };
                SystemSpec::new("custom", Arc::new(AffineModel { d: *d, a, da }), f0, b0, vec![0.0; n])
            }
        };
        spec.map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn profile_grid(&self) -> Result<ProfileGrid, RunError> {
        let g = &self.grid;
        ProfileGrid::new(g.t_final, g.dt, g.x_len, g.dx, g.ny, g.y_len, g.n_theta, g.depth).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn hyperbolic_options(&self) -> HyperbolicOptions {
        let t = &self.tolerances;
        HyperbolicOptions { tol: t.picard, max_iter: t.max_iter, keep: t.keep, ..HyperbolicOptions::default() }
    }

    pub fn singular_options(&self) -> SingularOptions {
        let s = &self.singular;
        SingularOptions {
            cfl: s.cfl,
            resolution: s.resolution,
            n_theta0: s.n_theta0,
            tol: self.tolerances.singular,
            max_iter: self.tolerances.max_iter,
            keep: self.tolerances.keep,
            cap: s.cap,
            method: s.method,
        }
    }
}

fn rows(m: &[Vec<f64>], n: usize) -> Result<RMat, RunError> {
    if m.iter().any(|r| r.len() != n) {
        return Err(RunError::Config(format!("matrix rows must have {n} entries")));
    }
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    Ok(RMat::from_row_slice(m.len(), n, &flat))
}

fn matrix(m: &[Vec<f64>], n: usize) -> Result<RMat, RunError> {
    if m.len() != n {
        return Err(RunError::Config(format!("expected a {n}x{n} matrix")));
    }
    rows(m, n)
}
