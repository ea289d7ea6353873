//! Assembly of `U^0_eps(x, theta_0) = V(x, theta_0 + omega xi_d)` at
//! `xi_d = x_d / eps` on the fine grid, error norms against the singular
//! solution, the decay test for elliptically polarized residuals and the
//! Picard diagnostic.

use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::corrector::{build_corrector, truncate_to_polynomial, CorrectorSolution, CorrectorSummary};
use crate::elliptic::{EllipticResidual, ProfileSolution};
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::modes::ModeTable;
use crate::numerics::{cubic_weights, Spectral};
use crate::profile::{Key, ProfileContext, ProfileGrid};
use crate::singular::{solve_singular, ENorm, FieldSpectrum, SingularGrid, SingularOptions, SingularSolution};
use crate::trig::TrigPolynomial;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Evaluates `sum V_alpha e^{i (sum alpha) theta_0} e^{i (alpha . omega) x_d / eps}`
/// on the fine grid, as `theta_0`-Fourier data. `v` lives on the profile
/// grid (`it * points + ip`); `V_alpha` is interpolated in `x_d` by cubics.
/// Harmonics outside the resolved band of the fine grid are dropped.
pub fn substitute_to_grid(v: &TrigPolynomial, mt: &ModeTable, pgrid: &ProfileGrid, sgrid: &SingularGrid) -> Result<FieldSpectrum> {
    v.check_spectrum(&mt.classes())?;
    if pgrid.nt != sgrid.nt || pgrid.ny != sgrid.ny {
        return Err(Error::InvalidInput("profile and fine grids have different t or y levels".into()));
    }
    let n = v.n;
    let (pnx, np) = (pgrid.nx, pgrid.points());
    let nth = sgrid.n_theta0;
    let mut out = FieldSpectrum::zeros(sgrid, n);
    let weights: Vec<(usize, [f64; 4])> = (0..sgrid.nx).map(|ix| cubic_weights(0.0, pgrid.dx, pnx, sgrid.x(ix))).collect();
    for (a, val) in &v.terms {
        let s: i64 = a.iter().sum();
        if 2 * s.unsigned_abs() >= nth as u64 {
            continue;
        }
        let bin = s.rem_euclid(nth as i64) as usize;
        let aw: C64 = a.iter().zip(&mt.modes).map(|(x, m)| m.omega * *x as f64).sum();
        let phases: Vec<C64> = (0..sgrid.nx).map(|ix| (C64::new(0.0, 1.0) * aw * (sgrid.x(ix) / sgrid.eps)).exp()).collect();
        for it in 0..pgrid.nt {
            for iy in 0..pgrid.ny {
                for ix in 0..sgrid.nx {
                    let (i0, w) = weights[ix];
                    for i in 0..n {
                        let mut acc = ZERO;
                        for (q, wq) in w.iter().enumerate() {
                            if *wq != 0.0 && i0 + q < pnx {
                                acc += val[(it * np + iy * pnx + i0 + q) * n + i] * *wq;
                            }
                        }
                        let j = out.index(it, ix, iy, i, bin);
                        out.data[j] += acc * phases[ix];
                    }
                }
            }
        }
    }
    if sgrid.ny > 1 {
        let ys = Spectral::new(sgrid.ny, sgrid.y_len);
        let mut line = vec![ZERO; sgrid.ny];
        for it in 0..sgrid.nt {
            for ix in 0..sgrid.nx {
                for i in 0..n {
                    for k in 0..nth {
                        for iy in 0..sgrid.ny {
                            line[iy] = out.data[out.index(it, ix, iy, i, k)];
                        }
                        ys.forward(&mut line);
                        for iy in 0..sgrid.ny {
                            let j = out.index(it, ix, iy, i, k);
                            out.data[j] = line[iy];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One group `C_{j,k}`: the multi-indices sharing `sum alpha = j` and
/// `alpha . omega = z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGroup {
    pub j: i64,
    pub z: C64,
    pub alphas: Vec<Vec<i64>>,
}

/// Groups the spectrum of `v` by total harmonic and `xi_d` frequency.
pub fn phase_groups(v: &TrigPolynomial, mt: &ModeTable) -> Vec<PhaseGroup> {
    let scale = mt.omegas().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut out: Vec<PhaseGroup> = Vec::new();
    for a in v.terms.keys() {
        let j: i64 = a.iter().sum();
        let z: C64 = a.iter().zip(&mt.modes).map(|(x, m)| m.omega * *x as f64).sum();
        match out.iter_mut().find(|g| g.j == j && (g.z - z).norm() <= 1e-10 * scale) {
            Some(g) => g.alphas.push(a.clone()),
            None => out.push(PhaseGroup { j, z, alphas: vec![a.clone()] }),
        }
    }
    out
}

/// Result of one `eps` in a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonResult {
    pub eps: f64,
    pub nx: usize,
    /// `|U_eps - U^0_eps|` in the discrete `E^1` norm.
    pub error: ENorm,
    /// `L^inf` error of the physical fields.
    pub physical: f64,
    /// `|U_eps|` in the discrete `E^2` norm.
    pub solution_norm: ENorm,
    /// Boundary-trace `H^3` norm of `U_eps`.
    pub boundary_norm: f64,
    /// `|U^n_eps - U^{0,n}_{p,eps} - eps U^1_{p,eps}|` in `E^1`, `n = 1..`.
    pub picard: Vec<f64>,
    #[serde(skip)]
    pub runtime_s: f64,
}

/// Least-squares fit `e(eps) = a + b eps` of one Picard index.
#[derive(Debug, Clone, Serialize)]
pub struct PicardFit {
    pub n: usize,
    pub errors: Vec<f64>,
    pub a: f64,
    pub b: f64,
    /// Root-mean-square misfit relative to the largest error.
    pub residual: f64,
    pub decreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub results: Vec<EpsilonResult>,
    pub error_decreasing: bool,
    pub physical_decreasing: bool,
    pub picard: Vec<PicardFit>,
    pub correctors: Vec<CorrectorSummary>,
    pub truncation: f64,
}

/// Strictly decreasing along the list.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Least-squares `a + b x`; returns `(a, b, rms residual)`.
pub fn fit_affine(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return (y.first().copied().unwrap_or(0.0), 0.0, 0.0);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(a_, b_)| (b_ - a - b * a_).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Options of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyOptions {
    pub epsilons: Vec<f64>,
    pub singular: SingularOptions,
    /// Truncation tolerance for the finite partial sums.
    pub truncation: f64,
}

/// Truncated leading profile, truncated Picard iterates and their
/// correctors, shared by every `eps` of a study.
#[derive(Debug, Clone)]
pub struct StudyInputs {
    pub leading: TrigPolynomial,
    pub iterates: Vec<TrigPolynomial>,
    pub correctors: Vec<CorrectorSolution>,
}

/// Truncates the profiles and builds one corrector per kept iterate.
pub fn study_inputs(ctx: &ProfileContext, profiles: &ProfileSolution, keep: usize, truncation: f64) -> Result<StudyInputs> {
    let mt = &ctx.mt;
    let leading = truncate_to_polynomial(&profiles.profile, mt, truncation);
    let keep = keep.min(profiles.iterates.len());
    let mut iterates: Vec<TrigPolynomial> = Vec::with_capacity(keep);
    let mut correctors = Vec::with_capacity(keep);
    let zero = TrigPolynomial::new(leading.m, leading.n, leading.points);
    for n in 0..keep {
        let cur = truncate_to_polynomial(&profiles.iterates[n], mt, truncation);
        let prev = if n == 0 { zero.clone() } else { iterates[n - 1].clone() };
        let c = build_corrector(&ctx.sys, mt, &ctx.rs, &ctx.grid, &cur, &prev)?;
        correctors.push(c.solution);
        iterates.push(cur);
    }
    Ok(StudyInputs { leading, iterates, correctors })
}

/// Distances between one singular solution and the assembled profiles.
pub fn measure(ctx: &ProfileContext, inputs: &StudyInputs, sgrid: &SingularGrid, sol: &SingularSolution) -> Result<EpsilonResult> {
    let (mt, grid, eps) = (&ctx.mt, &ctx.grid, sgrid.eps);
    let u = sol.field.spectrum();
    let u0 = substitute_to_grid(&inputs.leading, mt, grid, sgrid)?;
    let diff = u.sub(&u0);
    let error = diff.e_norm(1);
    let physical = diff.physical_sup(&mt.beta);
    let solution_norm = u.e_norm(2);
    let boundary_norm = u.boundary_norm(3);
    drop(diff);
    drop(u0);
    drop(u);
    let count = inputs.iterates.len().min(sol.iterates.len());
    let mut picard = Vec::with_capacity(count);
    for n in 0..count {
        let un = sol.iterates[n].spectrum();
        let mut approx = inputs.iterates[n].clone();
        for (a, val) in &inputs.correctors[n].v1.terms {
            let scaled: Vec<C64> = val.iter().map(|x| x * eps).collect();
            approx.add(a.clone(), &scaled);
        }
        let an = substitute_to_grid(&approx, mt, grid, sgrid)?;
        picard.push(un.sub(&an).e_norm(1).total);
    }
    Ok(EpsilonResult { eps, nx: sgrid.nx, error, physical, solution_norm, boundary_norm, picard, runtime_s: 0.0 })
}

/// Monotonicity flags and Picard fits over a family of results.
pub fn summarize(inputs: &StudyInputs, results: Vec<EpsilonResult>, truncation: f64) -> ConvergenceReport {
    let epsilons: Vec<f64> = results.iter().map(|r| r.eps).collect();
    let errs: Vec<f64> = results.iter().map(|r| r.error.total).collect();
    let phys: Vec<f64> = results.iter().map(|r| r.physical).collect();
    let mut fits = Vec::new();
    for n in 0..inputs.iterates.len() {
        let e: Vec<f64> = results.iter().map(|r| r.picard.get(n).copied().unwrap_or(f64::NAN)).collect();
        let (a, b, rms) = fit_affine(&epsilons, &e);
        let top = e.iter().cloned().fold(0.0, f64::max);
        fits.push(PicardFit { n: n + 1, decreasing: strictly_decreasing(&e), errors: e, a, b, residual: if top > 0.0 { rms / top } else { 0.0 } });
    }
    ConvergenceReport {
        epsilons,
        error_decreasing: strictly_decreasing(&errs),
        physical_decreasing: strictly_decreasing(&phys),
        results,
        picard: fits,
        correctors: inputs.correctors.iter().map(CorrectorSummary::of).collect(),
        truncation,
    }
}

/// Runs the singular solver for every `eps` and measures the distance to the
/// assembled profiles, plus the Picard diagnostic on the leading iterates.
pub fn convergence_study(ctx: &ProfileContext, forcing: &Forcing, profiles: &ProfileSolution, opts: &StudyOptions) -> Result<ConvergenceReport> {
    let inputs = study_inputs(ctx, profiles, opts.singular.keep, opts.truncation)?;
    let mut sopts = opts.singular.clone();
    sopts.keep = inputs.iterates.len();
    let mut results = Vec::new();
    for &eps in &opts.epsilons {
        let start = Instant::now();
        let sgrid = SingularGrid::new(eps, &ctx.grid, sopts.resolution, sopts.n_theta0)?;
        let sol = solve_singular(&ctx.sys, &ctx.mt.beta, forcing, &sgrid, &sopts)?;
        let mut r = measure(ctx, &inputs, &sgrid, &sol)?;
        r.runtime_s = start.elapsed().as_secs_f64();
        results.push(r);
    }
    Ok(summarize(&inputs, results, opts.truncation))
}

/// Norms of a substituted elliptic residual for a family of `eps`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub epsilons: Vec<f64>,
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    /// Log-log slope of the `L^2` part against `eps`.
    pub l2_slope: f64,
    pub sup_decreasing: bool,
}

/// Substitutes an elliptically polarized `R` at `xi_d = x_d / eps` and
/// splits its discrete `E^1` norm.
pub fn decay_check(r: &TrigPolynomial, mt: &ModeTable, pgrid: &ProfileGrid, epsilons: &[f64], resolution: f64, n_theta0: usize) -> Result<DecayReport> {
    let mut sup = Vec::new();
    let mut l2 = Vec::new();
    for &eps in epsilons {
        let sgrid = SingularGrid::new(eps, pgrid, resolution, n_theta0)?;
        let f = substitute_to_grid(r, mt, pgrid, &sgrid)?;
        let e = f.e_norm(1);
        sup.push(e.sup);
        l2.push(e.l2);
    }
    let lx: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = l2.iter().map(|e| e.max(1e-300).ln()).collect();
    let (_, slope, _) = fit_affine(&lx, &ly);
    Ok(DecayReport { epsilons: epsilons.to_vec(), sup_decreasing: strictly_decreasing(&sup), sup, l2, l2_slope: slope })
}

/// The elliptic residual as a polynomial: slot values times `r_{m,k}`.
pub fn residual_polynomial(ctx: &ProfileContext, res: &EllipticResidual) -> TrigPolynomial {
    let n = ctx.layout.n;
    let pts = ctx.grid.nt * ctx.grid.points();
    let mut out = TrigPolynomial::new(ctx.layout.modes, n, pts);
    for (s, vals) in &res.slots {
        let (ki, k) = ctx.layout.slot_key[*s];
        let Key::Wave { m, .. } = ctx.layout.keys[ki] else { continue };
        let r = &ctx.mt.modes[m].r[k];
        let mut v = vec![ZERO; pts * n];
        for (p, x) in vals.iter().enumerate() {
            for i in 0..n {
                v[p * n + i] = x * r[i];
            }
        }
        out.add(ctx.layout.alpha(ki), &v);
    }
    out
}
