//! Elliptic amplitudes: boundary traces, a wave equation in which `x_d` plays
//! the role of time, and the shifted, cut-off profile
//! `sigma(t, y, x_d) = chi(x_d) s(t - x_d, y, x_d)`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::numerics::{diff4, extend_reflect, smooth_cutoff, Spectral};
use crate::profile::{picard_solve_hyperbolic, HyperbolicOptions, Key, ProfileContext, ProfileSet};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Boundary value `a` and normal derivative `b` of one elliptic amplitude,
/// sampled at the profile time levels (`[level * ny + iy]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePair {
    pub slot: usize,
    pub mode: usize,
    pub comp: usize,
    pub harmonic: i64,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
}

/// Traces of every elliptic slot. `cur` supplies the hyperbolic traces; the
/// first factor of each quadratic term is taken from `prev` (the previous
/// iterate), or from the current traces when `prev` is `None`.
pub fn extract_traces(ctx: &ProfileContext, forcing: &Forcing, cur: &ProfileSet, prev: Option<&ProfileSet>) -> Result<Vec<TracePair>> {
    let grid = &ctx.grid;
    if cur.grid.nt != grid.nt || cur.grid.points() != grid.points() {
        return Err(Error::MissingTrace("profile levels do not match the grid".into()));
    }
    let (nx, ny, nt) = (grid.nx, grid.ny, grid.nt);
    let np = grid.points();
    let ns = ctx.layout.nslots();
    let elliptic: Vec<usize> = (0..ns).filter(|&s| !ctx.layout.is_hyperbolic_key(ctx.layout.slot_key[s].0)).collect();
    // boundary states, [level][slot][iy]
    let mut cur_b = vec![ZERO; nt * ns * ny];
    let mut prev_b = vec![ZERO; nt * ns * ny];
    for it in 0..nt {
        let level = cur.level(it);
        let base = it * ns * ny;
        for s in 0..ns {
            if ctx.layout.is_hyperbolic_key(ctx.layout.slot_key[s].0) {
                for iy in 0..ny {
                    cur_b[base + s * ny + iy] = level[s * np + iy * nx];
                }
            }
        }
        for (s, ip, v) in ctx.boundary_traces(level, forcing, grid.t(it)) {
            if !ctx.layout.is_hyperbolic_key(ctx.layout.slot_key[s].0) {
                cur_b[base + s * ny + ip / nx] = v;
            }
        }
        match prev {
            Some(p) => {
                let pl = p.level(it);
                for s in 0..ns {
                    for iy in 0..ny {
                        prev_b[base + s * ny + iy] = pl[s * np + iy * nx];
                    }
                }
            }
            None => prev_b[base..base + ns * ny].copy_from_slice(&cur_b[base..base + ns * ny]),
        }
    }
    let mut f = vec![ZERO; nt * ns * ny];
    for it in 0..nt {
        let r = it * ns * ny..(it + 1) * ns * ny;
        ctx.plan.eval(&ctx.layout, &prev_b[r.clone()], &cur_b[r.clone()], ny, &ctx.elliptic_targets, true, &mut f[r]);
    }
    let yspec = (ny > 1).then(|| Spectral::new(ny, grid.y_len));
    let mut out = Vec::new();
    for &s in &elliptic {
        let (ki, k) = ctx.layout.slot_key[s];
        let Key::Wave { m, j } = ctx.layout.keys[ki] else { continue };
        let c0 = ctx.mt.modes[m].x_field[0];
        let c1 = ctx.mt.modes[m].x_field[1];
        let a: Vec<C64> = (0..nt * ny).map(|i| cur_b[(i / ny) * ns * ny + s * ny + i % ny]).collect();
        let mut b = vec![ZERO; nt * ny];
        for iy in 0..ny {
            let line: Vec<C64> = (0..nt).map(|it| a[it * ny + iy]).collect();
            let dt_line = time_derivative(grid.dt, &line);
            for it in 0..nt {
                b[it * ny + iy] = f[it * ns * ny + s * ny + iy] - c0 * dt_line[it];
            }
        }
        if let Some(ys) = &yspec {
            for it in 0..nt {
                let mut line: Vec<C64> = (0..ny).map(|iy| a[it * ny + iy]).collect();
                ys.derivative(&mut line);
                for iy in 0..ny {
                    b[it * ny + iy] -= c1 * line[iy];
                }
            }
        }
        // traces vanish identically before the data switches on
        for iy in 0..ny {
            b[iy] = ZERO;
        }
        out.push(TracePair { slot: s, mode: m, comp: k, harmonic: j, a, b });
    }
    Ok(out)
}

/// `d/dt` along the time levels; zero at the initial level, where the data
/// vanish to high order.
fn time_derivative(h: f64, line: &[C64]) -> Vec<C64> {
    let mut d: Vec<C64> = (0..line.len()).map(|i| diff4(line.len(), h, i, |k| line[k])).collect();
    if let Some(d0) = d.first_mut() {
        *d0 = ZERO;
    }
    d
}

/// Extends data given on `t <= T` by `extra` levels using a third-order
/// reflection blended to zero.
pub fn extend_past_t(f: &[C64], extra: usize) -> Vec<C64> {
    extend_reflect(f, extra, (f.len() / 3).max(1))
}

/// Smooth cutoff with `chi = 1` on `[0, D/2]` and `chi = 0` on `[0.9 D, inf)`.
pub fn cutoff(x: f64, depth: f64) -> f64 {
    smooth_cutoff((x - 0.5 * depth) / (0.4 * depth))
}

/// Solution of `s_xx = s_tt - mass2 s` on a uniform `t` grid, one row per
/// `x_d` level.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    /// `t` coordinate of the first column.
    pub t0: f64,
    pub h: f64,
    pub levels: Vec<Vec<C64>>,
    /// Discrete energy at each half level.
    pub energy: Vec<f64>,
}

impl WaveSolution {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        if e0 == 0.0 {
            return 0.0;
        }
        self.energy.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max)
    }

    /// Value at `(t, level)` with `t` on the grid.
    pub fn at(&self, t: f64, level: usize) -> C64 {
        let i = ((t - self.t0) / self.h).round();
        if i < 0.0 || i as usize >= self.levels[level].len() {
            return ZERO;
        }
        self.levels[level][i as usize]
    }
}

/// Leapfrog in `x_d` with step equal to the `t` spacing and time-averaged
/// mass term. `a`, `b` hold the data on the grid `t0 + i h`, `da`, `dda` their
/// first and second `t` derivatives; data are `s|0 = a`, `s_x|0 = b + da`.
pub fn wave_solve(a: &[C64], b: &[C64], da: &[C64], dda: &[C64], t0: f64, h: f64, mass2: f64, steps: usize) -> WaveSolution {
    let n = a.len();
    let mu = 0.25 * h * h * mass2;
    let mut levels = Vec::with_capacity(steps + 1);
    let s0: Vec<C64> = a.to_vec();
    let mut s1 = vec![ZERO; n];
    for i in 1..n.saturating_sub(1) {
        s1[i] = a[i] + (b[i] + da[i]) * h + (dda[i] - a[i] * mass2) * (0.5 * h * h);
    }
    let energy_of = |u1: &[C64], u0: &[C64]| -> f64 {
        let mut e = 0.0;
        for i in 0..n {
            e += (u1[i] - u0[i]).norm_sqr() + mu * (u1[i] + u0[i]).norm_sqr();
        }
        for i in 0..n - 1 {
            e += ((u1[i + 1] - u1[i]) * (u0[i + 1] - u0[i]).conj()).re;
        }
        e
    };
    let mut energy = vec![energy_of(&s1, &s0)];
    levels.push(s0);
    if steps >= 1 {
        levels.push(s1);
    }
    for lvl in 1..steps {
        let (um, u) = (&levels[lvl - 1], &levels[lvl]);
        let mut next = vec![ZERO; n];
        for i in 1..n - 1 {
            let lap = u[i + 1] - u[i] * 2.0 + u[i - 1];
            next[i] = (u[i] * 2.0 - um[i] + lap - (u[i] * 2.0 + um[i]) * mu) / (1.0 + mu);
        }
        energy.push(energy_of(&next, u));
        levels.push(next);
    }
    WaveSolution { t0, h, levels, energy }
}

fn second_derivative(f: &[C64], h: f64, i: usize) -> C64 {
    let n = f.len();
    if i < 2 || i + 2 >= n {
        return ZERO;
    }
    (-f[i - 2] + f[i - 1] * 16.0 - f[i] * 30.0 + f[i + 1] * 16.0 - f[i + 2]) / (12.0 * h * h)
}

fn first_derivative(f: &[C64], h: f64, i: usize) -> C64 {
    let n = f.len();
    if i < 2 || i + 2 >= n {
        return ZERO;
    }
    (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) / (12.0 * h)
}

/// Builds the wave data on the extended grid `[-pad h, T + pad h]` from
/// traces on `[0, T]` and solves to `steps` levels.
pub fn wave_from_traces(a: &[C64], b: &[C64], h: f64, mass2: f64, steps: usize) -> WaveSolution {
    let pad = steps + 2;
    let ae = extend_past_t(a, pad);
    let be = extend_past_t(b, pad);
    let n = pad + ae.len();
    let mut av = vec![ZERO; n];
    let mut bv = vec![ZERO; n];
    av[pad..].copy_from_slice(&ae);
    bv[pad..].copy_from_slice(&be);
    let mut da = vec![ZERO; n];
    let mut dda = vec![ZERO; n];
    for i in pad + 1..n {
        da[i] = first_derivative(&av, h, i);
        dda[i] = second_derivative(&av, h, i);
    }
    wave_solve(&av, &bv, &da, &dda, -(pad as f64) * h, h, mass2, steps)
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticBuild {
    /// Largest relative energy drift over all wave solves.
    pub energy_drift: f64,
    /// Largest `|sigma|` at `t <= 0`.
    pub support_leak: f64,
}

/// Fills the elliptic slots of `out` from the traces:
/// `sigma(t, y, x_d) = chi(x_d) s(t - x_d, y, x_d)`.
pub fn build_elliptic_profile(ctx: &ProfileContext, traces: &[TracePair], out: &mut ProfileSet) -> Result<EllipticBuild> {
    let grid = &ctx.grid;
    if traces.is_empty() {
        return Ok(EllipticBuild { energy_drift: 0.0, support_leak: 0.0 });
    }
    if (grid.dx - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(Error::InvalidInput("the elliptic construction needs dx = dt".into()));
    }
    let (nx, ny, nt) = (grid.nx, grid.ny, grid.nt);
    let np = grid.points();
    let h = grid.dt;
    let yspec = (ny > 1).then(|| Spectral::new(ny, grid.y_len));
    let mut drift: f64 = 0.0;
    for tp in traces {
        // Fourier in y
        let mut ah = vec![vec![ZERO; nt]; ny];
        let mut bh = vec![vec![ZERO; nt]; ny];
        for it in 0..nt {
            let mut la: Vec<C64> = (0..ny).map(|iy| tp.a[it * ny + iy]).collect();
            let mut lb: Vec<C64> = (0..ny).map(|iy| tp.b[it * ny + iy]).collect();
            if let Some(ys) = &yspec {
                ys.forward(&mut la);
                ys.forward(&mut lb);
            }
            for ky in 0..ny {
                ah[ky][it] = la[ky];
                bh[ky][it] = lb[ky];
            }
        }
        let mut field = vec![vec![ZERO; nx]; nt * ny];
        for ky in 0..ny {
            let kw = yspec.as_ref().map(|s| s.wavenumber(ky)).unwrap_or(0.0);
            let mass2 = (tp.harmonic * tp.harmonic) as f64 + kw * kw;
            let ws = wave_from_traces(&ah[ky], &bh[ky], h, mass2, nx - 1);
            drift = drift.max(ws.energy_drift());
            for it in 0..nt {
                for ix in 0..nx {
                    let x = grid.x(ix);
                    let chi = cutoff(x, grid.depth);
                    field[it * ny + ky][ix] = ws.at(grid.t(it) - x, ix) * chi;
                }
            }
        }
        for it in 0..nt {
            for ix in 0..nx {
                let mut line: Vec<C64> = (0..ny).map(|ky| field[it * ny + ky][ix]).collect();
                if let Some(ys) = &yspec {
                    ys.inverse(&mut line);
                }
                let lvl = out.level_mut(it);
                for iy in 0..ny {
                    lvl[tp.slot * np + iy * nx + ix] = line[iy];
                }
            }
        }
    }
    let mut leak: f64 = 0.0;
    for tp in traces {
        leak = leak.max(out.slot_field(0, tp.slot).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    if leak > 1e-13 {
        return Err(Error::SupportLeak(leak));
    }
    Ok(EllipticBuild { energy_drift: drift, support_leak: leak })
}

/// `R = sum_{P u N} (X_phi sigma - f) r` evaluated slot-wise on the grid.
#[derive(Debug, Clone)]
pub struct EllipticResidual {
    /// `(slot, values [level * points + ip])`.
    pub slots: Vec<(usize, Vec<C64>)>,
    pub boundary_max: f64,
    pub max: f64,
}

/// Evaluates the elliptic transport residual of `cur` with quadratic first
/// factors from `prev` (`None`: from `cur`).
pub fn residual(ctx: &ProfileContext, cur: &ProfileSet, prev: Option<&ProfileSet>) -> EllipticResidual {
    let grid = &ctx.grid;
    let (nx, ny, nt) = (grid.nx, grid.ny, grid.nt);
    let np = grid.points();
    let ns = ctx.layout.nslots();
    let prev = prev.unwrap_or(cur);
    let mut f = vec![ZERO; nt * ns * np];
    for it in 0..nt {
        ctx.plan.eval(&ctx.layout, prev.level(it), cur.level(it), np, &ctx.elliptic_targets, true, &mut f[it * ns * np..(it + 1) * ns * np]);
    }
    let yspec = (ny > 1).then(|| Spectral::new(ny, grid.y_len));
    let mut slots = Vec::new();
    let (mut bmax, mut max): (f64, f64) = (0.0, 0.0);
    for s in 0..ns {
        let (ki, _) = ctx.layout.slot_key[s];
        let Key::Wave { m, .. } = ctx.layout.keys[ki] else { continue };
        if ctx.layout.classes[m].is_hyperbolic() {
            continue;
        }
        let c = &ctx.mt.modes[m].x_field;
        let mut r = vec![ZERO; nt * np];
        for ip in 0..np {
            let line: Vec<C64> = (0..nt).map(|it| cur.slot_field(it, s)[ip]).collect();
            for it in 0..nt {
                r[it * np + ip] += c[0] * diff4(nt, grid.dt, it, |k| line[k]);
            }
        }
        for it in 0..nt {
            let fld = cur.slot_field(it, s);
            for iy in 0..ny {
                for ix in 0..nx {
                    let ip = iy * nx + ix;
                    r[it * np + ip] += diff4(nx, grid.dx, ix, |k| fld[iy * nx + k]) - f[it * ns * np + s * np + ip];
                }
            }
            if let Some(ys) = &yspec {
                for ix in 0..nx {
                    let mut line: Vec<C64> = (0..ny).map(|iy| fld[iy * nx + ix]).collect();
                    ys.derivative(&mut line);
                    for iy in 0..ny {
                        r[it * np + iy * nx + ix] += c[1] * line[iy];
                    }
                }
            }
        }
        for it in 0..nt {
            for iy in 0..ny {
                bmax = bmax.max(r[it * np + iy * nx].norm());
            }
        }
        max = max.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        slots.push((s, r));
    }
    EllipticResidual { slots, boundary_max: bmax, max }
}

/// Hyperbolic and elliptic profiles, with the leading Picard iterates.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub profile: ProfileSet,
    /// Full iterates `1..=keep`.
    pub iterates: Vec<ProfileSet>,
    pub changes: Vec<f64>,
    pub traces: Vec<TracePair>,
    pub build: EllipticBuild,
    pub residual_boundary: f64,
}

/// Solves the profile equations: Picard iteration for the mean and
/// hyperbolic amplitudes, then the elliptic amplitudes from their traces.
pub fn solve_profiles(ctx: &ProfileContext, forcing: &Forcing, opts: &HyperbolicOptions) -> Result<ProfileSolution> {
    let hyp = picard_solve_hyperbolic(ctx, forcing, opts)?;
    let mut iterates = Vec::with_capacity(opts.keep);
    let mut prev: Option<ProfileSet> = None;
    let mut build = EllipticBuild { energy_drift: 0.0, support_leak: 0.0 };
    // once the hyperbolic part has converged its iterates repeat
    for n in 0..opts.keep {
        let h = hyp.iterates.get(n).unwrap_or(&hyp.profile);
        let traces = extract_traces(ctx, forcing, h, Some(prev.as_ref().unwrap_or(&ProfileSet::zeros(&ctx.grid, &ctx.layout))))?;
        let mut full = h.clone();
        let b = build_elliptic_profile(ctx, &traces, &mut full)?;
        build.energy_drift = build.energy_drift.max(b.energy_drift);
        build.support_leak = build.support_leak.max(b.support_leak);
        prev = Some(full.clone());
        iterates.push(full);
    }
    let traces = extract_traces(ctx, forcing, &hyp.profile, None)?;
    let mut profile = hyp.profile.clone();
    let b = build_elliptic_profile(ctx, &traces, &mut profile)?;
    build.energy_drift = build.energy_drift.max(b.energy_drift);
    build.support_leak = build.support_leak.max(b.support_leak);
    let res = residual(ctx, &profile, None);
    if res.boundary_max > BOUNDARY_RESIDUAL_RATIO * res.max + 1e-12 {
        return Err(Error::BoundaryResidualNonzero(res.boundary_max));
    }
    Ok(ProfileSolution { profile, iterates, changes: hyp.changes, traces, build, residual_boundary: res.boundary_max })
}

/// Largest accepted ratio of the boundary residual (truncation error of the
/// wave solve) to the interior residual.
pub const BOUNDARY_RESIDUAL_RATIO: f64 = 0.25;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_in_depth() {
        // a = 1 everywhere, b = 0, no t dependence: s = cos(x)
        let n = 400;
        let h = 0.01;
        let a = vec![C64::new(1.0, 0.0); n];
        let z = vec![ZERO; n];
        let ws = wave_solve(&a, &z, &z, &z, 0.0, h, 1.0, 100);
        let x = 100.0 * h;
        let v = ws.levels[100][200];
        assert!((v.re - x.cos()).abs() < 1e-3, "{v}");
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0, 4.0), 1.0);
        assert_eq!(cutoff(2.0, 4.0), 1.0);
        assert_eq!(cutoff(3.7, 4.0), 0.0);
    }
}
