//! Reference solver for the singular system in `(t, y, x_d, theta_0)`:
//!
//! `U_t + (beta_0/eps) U_theta + A_1(eps V)(U_y + (beta_1/eps) U_theta)
//!  + A_d(eps V) U_x = A_d(eps V) F(0) W`, `B U = G` at `x_d = 0`,
//!
//! with `V = W = U` (direct solve) or `V = W = U^n` (one Picard step).
//! Fourth-order SBP in `x_d` with characteristic penalties, spectral in
//! `theta_0` and `y`, classical Runge-Kutta in `t`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::linalg::{self, RMat};
use crate::numerics::{cubic_weights, diff4, signed_harmonic, trapezoid, wavenumber, Sbp4, Spectral};
use crate::profile::ProfileGrid;
use crate::system::{check_solver_support, CharacteristicSplit, SystemSpec};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Fine grid for one `eps`. Snapshots share the profile time levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularGrid {
    pub eps: f64,
    pub t_final: f64,
    pub dt_snap: f64,
    pub nt: usize,
    pub x_len: f64,
    pub dx: f64,
    pub nx: usize,
    pub ny: usize,
    pub y_len: f64,
    pub n_theta0: usize,
}

impl SingularGrid {
    /// `dx = resolution * eps`, rounded so that `x_len` is a grid point.
    pub fn new(eps: f64, profile: &ProfileGrid, resolution: f64, n_theta0: usize) -> Result<Self> {
        if !(eps > 0.0) || !(resolution > 0.0) {
            return Err(Error::InvalidInput("eps and resolution must be positive".into()));
        }
        if n_theta0 < 4 || !n_theta0.is_multiple_of(2) {
            return Err(Error::InvalidInput("theta_0 points must be even and at least 4".into()));
        }
        let nx = ((profile.x_len / (resolution * eps)).ceil() as usize + 1).max(8);
        Ok(Self {
            eps,
            t_final: profile.t_final,
            dt_snap: profile.dt,
            nt: profile.nt,
            x_len: profile.x_len,
            dx: profile.x_len / (nx - 1) as f64,
            nx,
            ny: profile.ny,
            y_len: profile.y_len,
            n_theta0,
        })
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.y_len / self.ny as f64
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.n_theta0 as f64
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt_snap
    }

    /// Values per snapshot: `[ix][iy][component][theta]`.
    pub fn level_len(&self, n: usize) -> usize {
        self.nx * self.ny * n * self.n_theta0
    }
}

/// Real snapshots of `U` at the time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularField {
    pub grid: SingularGrid,
    pub n: usize,
    pub snapshots: Vec<Vec<f64>>,
}

impl SingularField {
    pub fn zeros(grid: &SingularGrid, n: usize) -> Self {
        Self { grid: grid.clone(), n, snapshots: vec![vec![0.0; grid.level_len(n)]; grid.nt] }
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, i: usize, k: usize) -> usize {
        ((ix * self.grid.ny + iy) * self.n + i) * self.grid.n_theta0 + k
    }

    pub fn max_abs(&self) -> f64 {
        self.snapshots.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Cubic interpolation in time.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let (i0, w) = cubic_weights(0.0, self.grid.dt_snap, self.grid.nt, t);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (a, wa) in w.iter().enumerate() {
            if *wa == 0.0 || i0 + a >= self.grid.nt {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.snapshots[i0 + a]) {
                *o += wa * v;
            }
        }
    }

    /// Fourier coefficients in `(theta_0, y)` of every snapshot.
    pub fn spectrum(&self) -> FieldSpectrum {
        let g = &self.grid;
        let ts = Spectral::new(g.n_theta0, 2.0 * std::f64::consts::PI);
        let ys = Spectral::new(g.ny, g.y_len);
        let mut out = FieldSpectrum::zeros(g, self.n);
        let mut line = vec![ZERO; g.n_theta0];
        let mut yl = vec![ZERO; g.ny];
        for it in 0..g.nt {
            let snap = &self.snapshots[it];
            for ix in 0..g.nx {
                for i in 0..self.n {
                    for iy in 0..g.ny {
                        let b = self.index(ix, iy, i, 0);
                        for k in 0..g.n_theta0 {
                            line[k] = C64::new(snap[b + k], 0.0);
                        }
                        ts.forward(&mut line);
                        for k in 0..g.n_theta0 {
                            let j = out.index(it, ix, iy, i, k);
                            out.data[j] = line[k];
                        }
                    }
                    if g.ny > 1 {
                        for k in 0..g.n_theta0 {
                            for iy in 0..g.ny {
                                yl[iy] = out.data[out.index(it, ix, iy, i, k)];
                            }
                            ys.forward(&mut yl);
                            for iy in 0..g.ny {
                                let j = out.index(it, ix, iy, i, k);
                                out.data[j] = yl[iy];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Coefficients `f^(t, x_d; k_y, s)`, indexed `[it][ix][ky][i][theta bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpectrum {
    pub grid: SingularGrid,
    pub n: usize,
    pub data: Vec<C64>,
}

impl FieldSpectrum {
    pub fn zeros(grid: &SingularGrid, n: usize) -> Self {
        Self { grid: grid.clone(), n, data: vec![ZERO; grid.nt * grid.level_len(n)] }
    }

    #[inline]
    pub fn index(&self, it: usize, ix: usize, ky: usize, i: usize, k: usize) -> usize {
        let g = &self.grid;
        (((it * g.nx + ix) * g.ny + ky) * self.n + i) * g.n_theta0 + k
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// Bins compared: harmonics with `|s| < n_theta0 / 2`.
    fn compared(&self, k: usize) -> bool {
        2 * signed_harmonic(k, self.grid.n_theta0).unsigned_abs() < self.grid.n_theta0 as u64
    }

    /// `sum_{ky, s, i} sum_{a <= r} (1 + s^2 + ky^2)^{r - a} int |d_t^a f^|^2 dt`
    /// at one `x_d` index.
    pub fn tangential_sq(&self, ix: usize, r: usize) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        let mut line = vec![ZERO; g.nt];
        let mut vals = vec![0.0; g.nt];
        for ky in 0..g.ny {
            let kw = wavenumber(ky, g.ny, g.y_len);
            for i in 0..self.n {
                for k in 0..g.n_theta0 {
                    if !self.compared(k) {
                        continue;
                    }
                    let s = signed_harmonic(k, g.n_theta0) as f64;
                    let w = 1.0 + s * s + kw * kw;
                    for it in 0..g.nt {
                        line[it] = self.data[self.index(it, ix, ky, i, k)];
                    }
                    for a in 0..=r {
                        for it in 0..g.nt {
                            vals[it] = line[it].norm_sqr();
                        }
                        total += w.powi((r - a) as i32) * trapezoid(&vals, g.dt_snap);
                        if a < r {
                            let d: Vec<C64> = (0..g.nt).map(|it| diff4(g.nt, g.dt_snap, it, |j| line[j])).collect();
                            line.copy_from_slice(&d);
                        }
                    }
                }
            }
        }
        total
    }

    /// Discrete `E^r = C(x_d, H^r) cap L^2(x_d, H^{r+1})` norm.
    pub fn e_norm(&self, r: usize) -> ENorm {
        let g = &self.grid;
        let mut sup: f64 = 0.0;
        let mut l2 = vec![0.0; g.nx];
        for (ix, l) in l2.iter_mut().enumerate() {
            sup = sup.max(self.tangential_sq(ix, r).sqrt());
            *l = self.tangential_sq(ix, r + 1);
        }
        let l2 = trapezoid(&l2, g.dx).sqrt();
        ENorm { sup, l2, total: sup + l2 }
    }

    /// Boundary-trace `H^{r}` norm, used as a proxy for the trace term of
    /// the linear estimate.
    pub fn boundary_norm(&self, r: usize) -> f64 {
        self.tangential_sq(0, r).sqrt()
    }

    /// Real part of `sum_s f^_s e^{i s theta_0}` at the physical phase
    /// `theta_0 = (beta_0 t + beta_1 y) / eps`; largest modulus over the grid.
    pub fn physical_sup(&self, beta: &[f64]) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for it in 0..g.nt {
            for iy in 0..g.ny {
                let y = g.y(iy);
                let th = (beta[0] * g.t(it) + beta.get(1).copied().unwrap_or(0.0) * y) / g.eps;
                for ix in 0..g.nx {
                    for i in 0..self.n {
                        let mut v = ZERO;
                        for ky in 0..g.ny {
                            let ey = C64::new(0.0, wavenumber(ky, g.ny, g.y_len) * y).exp();
                            for k in 0..g.n_theta0 {
                                if !self.compared(k) {
                                    continue;
                                }
                                let s = signed_harmonic(k, g.n_theta0) as f64;
                                v += self.data[self.index(it, ix, ky, i, k)] * ey * C64::new(0.0, s * th).exp();
                            }
                        }
                        worst = worst.max(v.re.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Split of the discrete `E^r` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ENorm {
    pub sup: f64,
    pub l2: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularOptions {
    pub cfl: f64,
    /// `dx / eps` on the fine grid.
    pub resolution: f64,
    pub n_theta0: usize,
    /// Picard tolerance on the relative `E^1` change.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of leading Picard iterates to keep.
    pub keep: usize,
    /// Largest `|U|` tolerated before reporting blow-up.
    pub cap: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Direct,
    Picard,
}

impl Default for SingularOptions {
    fn default() -> Self {
        Self { cfl: 0.6, resolution: 0.04, n_theta0: 24, tol: 1e-6, max_iter: 50, keep: 3, cap: 1e3, method: SolveMethod::Direct }
    }
}

/// Source of the frozen coefficient and source state.
#[derive(Clone, Copy)]
enum Frozen<'a> {
    Zero,
    Field(&'a SingularField),
    Current,
}

struct Problem<'a> {
    sys: &'a SystemSpec,
    beta: &'a [f64],
    split: CharacteristicSplit,
    forcing: &'a Forcing,
    grid: SingularGrid,
    sbp: Sbp4,
    theta: Spectral,
    yspec: Option<Spectral>,
    a1: RMat,
    ad: RMat,
    f0: RMat,
    nonlinear_source: bool,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.sys.n
    }

    fn speed_bound(&self) -> f64 {
        let g = &self.grid;
        let ad = linalg::eigenvalues(&self.ad).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lam1 = linalg::eigenvalues(&self.a1);
        let rot = lam1.iter().map(|z| (self.beta[0] + self.beta[1] * z).norm()).fold(0.0, f64::max);
        let a1 = lam1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let ky = if g.ny > 1 { std::f64::consts::PI * g.ny as f64 / g.y_len } else { 0.0 };
        1.1 * ad * 2.9 / g.dx + 1.1 * rot * (g.n_theta0 / 2) as f64 / g.eps + a1 * ky
    }

    /// Spectral derivative along every `theta_0` line.
    fn theta_derivative(&self, u: &[f64], out: &mut [f64]) {
        let nth = self.grid.n_theta0;
        let mut line = vec![ZERO; nth];
        for (src, dst) in u.chunks(nth).zip(out.chunks_mut(nth)) {
            for k in 0..nth {
                line[k] = C64::new(src[k], 0.0);
            }
            self.theta.derivative(&mut line);
            for k in 0..nth {
                dst[k] = line[k].re;
            }
        }
    }

    fn y_derivative(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = self.n();
        let Some(ys) = &self.yspec else {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        };
        let mut line = vec![ZERO; g.ny];
        let stride = n * g.n_theta0;
        for ix in 0..g.nx {
            for r in 0..stride {
                for iy in 0..g.ny {
                    line[iy] = C64::new(u[(ix * g.ny + iy) * stride + r], 0.0);
                }
                ys.derivative(&mut line);
                for iy in 0..g.ny {
                    out[(ix * g.ny + iy) * stride + r] = line[iy].re;
                }
            }
        }
    }

    fn dealias(&self, u: &mut [f64]) {
        let nth = self.grid.n_theta0;
        let mut line = vec![ZERO; nth];
        for chunk in u.chunks_mut(nth) {
            for k in 0..nth {
                line[k] = C64::new(chunk[k], 0.0);
            }
            self.theta.dealias(&mut line);
            for k in 0..nth {
                chunk[k] = line[k].re;
            }
        }
    }

    /// Right-hand side at time `t`. `v` holds the frozen state (ignored
    /// when `None`, i.e. coefficients at the base state and zero source).
    fn eval(&self, t: f64, u: &[f64], v: Option<&[f64]>, work: &mut Work, out: &mut [f64]) {
        let g = &self.grid;
        let n = self.n();
        let nth = g.n_theta0;
        let eps = g.eps;
        self.theta_derivative(u, &mut work.dth);
        self.y_derivative(u, &mut work.dy);
        let stride_x = g.ny * n * nth;
        let mut a1 = vec![0.0; n * n];
        let mut ad = vec![0.0; n * n];
        let mut vp = vec![0.0; n];
        let mut ux = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut src = vec![0.0; n];
        let base_a1: Vec<f64> = (0..n * n).map(|q| self.a1[(q / n, q % n)]).collect();
        let base_ad: Vec<f64> = (0..n * n).map(|q| self.ad[(q / n, q % n)]).collect();
        let (b0, b1) = (self.beta[0] / eps, self.beta[1] / eps);
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let base = (ix * g.ny + iy) * n * nth;
                for k in 0..nth {
                    for i in 0..n {
                        let off = base + i * nth + k;
                        ux[i] = self.sbp.row(ix, |j| u[off - ix * stride_x + j * stride_x]);
                    }
                    let frozen = match v {
                        Some(vv) => {
                            for i in 0..n {
                                vp[i] = eps * vv[base + i * nth + k];
                            }
                            self.sys.model.a_into(1, &vp, &mut a1);
                            self.sys.model.a_into(self.sys.d, &vp, &mut ad);
                            true
                        }
                        None => false,
                    };
                    let (m1, md) = if frozen { (&a1, &ad) } else { (&base_a1, &base_ad) };
                    for i in 0..n {
                        z[i] = work.dy[base + i * nth + k] + b1 * work.dth[base + i * nth + k];
                    }
                    if let (Some(vv), true) = (v, self.nonlinear_source) {
                        for i in 0..n {
                            src[i] = (0..n).map(|c| self.f0[(i, c)] * vv[base + c * nth + k]).sum();
                        }
                    }
                    for r in 0..n {
                        let mut acc = -b0 * work.dth[base + r * nth + k];
                        for c in 0..n {
                            acc -= m1[r * n + c] * z[c] + md[r * n + c] * ux[c];
                            if v.is_some() && self.nonlinear_source {
                                acc += md[r * n + c] * src[c];
                            }
                        }
                        out[base + r * nth + k] = acc;
                    }
                }
            }
        }
        self.dealias(out);
        // characteristic penalties
        let h00 = self.sbp.norm_weight(0) * g.dx;
        let mut uu = vec![0.0; n];
        let mut pen = vec![0.0; n];
        for iy in 0..g.ny {
            for k in 0..nth {
                let gv = self.forcing.value(t, self.grid.theta(k), self.sys.p);
                let base = iy * n * nth;
                for i in 0..n {
                    uu[i] = u[base + i * nth + k];
                }
                self.split.left_penalty(&uu, &gv, &mut pen);
                for i in 0..n {
                    out[base + i * nth + k] -= pen[i] / h00;
                }
                let base = ((g.nx - 1) * g.ny + iy) * n * nth;
                for i in 0..n {
                    uu[i] = u[base + i * nth + k];
                }
                self.split.right_penalty(&uu, &mut pen);
                for i in 0..n {
                    out[base + i * nth + k] -= pen[i] / h00;
                }
            }
        }
    }
}

struct Work {
    dth: Vec<f64>,
    dy: Vec<f64>,
}

fn stage_state<'b>(frozen: Frozen, interpolated: &'b [Vec<f64>; 3], stage: usize, cur: &'b [f64]) -> Option<&'b [f64]> {
    match frozen {
        Frozen::Zero => None,
        Frozen::Field(_) => Some(&interpolated[stage]),
        Frozen::Current => Some(cur),
    }
}

fn march(problem: &Problem, frozen: Frozen, opts: &SingularOptions) -> Result<SingularField> {
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::CflViolation(format!("cfl factor {} outside (0, 1]", opts.cfl)));
    }
    let g = &problem.grid;
    let n = problem.n();
    let len = g.level_len(n);
    let dt_max = opts.cfl * 2.5 / problem.speed_bound();
    let sub = (g.dt_snap / dt_max).ceil().max(1.0) as usize;
    let h = g.dt_snap / sub as f64;
    let mut out = SingularField::zeros(g, n);
    let mut u = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let mut k = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut fz = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut work = Work { dth: vec![0.0; len], dy: vec![0.0; len] };
    for it in 0..g.nt - 1 {
        for s in 0..sub {
            let t = g.t(it) + s as f64 * h;
            let times = [t, t + 0.5 * h, t + h];
            if let Frozen::Field(f) = frozen {
                for (buf, tt) in fz.iter_mut().zip(times) {
                    f.interpolate(tt, buf);
                }
            }
            problem.eval(t, &u, stage_state(frozen, &fz, 0, &u), &mut work, &mut k[0]);
            for i in 0..len {
                tmp[i] = u[i] + 0.5 * h * k[0][i];
            }
            problem.eval(t + 0.5 * h, &tmp, stage_state(frozen, &fz, 1, &tmp), &mut work, &mut k[1]);
            for i in 0..len {
                tmp[i] = u[i] + 0.5 * h * k[1][i];
            }
            problem.eval(t + 0.5 * h, &tmp, stage_state(frozen, &fz, 1, &tmp), &mut work, &mut k[2]);
            for i in 0..len {
                tmp[i] = u[i] + h * k[2][i];
            }
            problem.eval(t + h, &tmp, stage_state(frozen, &fz, 2, &tmp), &mut work, &mut k[3]);
            for i in 0..len {
                u[i] += h / 6.0 * (k[0][i] + 2.0 * (k[1][i] + k[2][i]) + k[3][i]);
            }
        }
        let mx = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !mx.is_finite() || mx > opts.cap {
            return Err(Error::BlowUp(mx));
        }
        out.snapshots[it + 1].copy_from_slice(&u);
    }
    Ok(out)
}

fn problem<'a>(sys: &'a SystemSpec, beta: &'a [f64], forcing: &'a Forcing, grid: &SingularGrid) -> Result<Problem<'a>> {
    check_solver_support(sys)?;
    forcing.validate(sys.p)?;
    if beta.len() != 2 {
        return Err(Error::InvalidInput("the singular solver needs beta = (beta_0, beta_1)".into()));
    }
    let split = CharacteristicSplit::new(sys)?;
    let ad = sys.a(sys.d).clone();
    Ok(Problem {
        sys,
        beta,
        split,
        forcing,
        grid: grid.clone(),
        sbp: Sbp4::new(grid.nx, grid.dx),
        theta: Spectral::new(grid.n_theta0, 2.0 * std::f64::consts::PI),
        yspec: (grid.ny > 1).then(|| Spectral::new(grid.ny, grid.y_len)),
        a1: sys.a(1).clone(),
        ad,
        f0: sys.f0.clone(),
        nonlinear_source: sys.f0.iter().any(|x| *x != 0.0),
    })
}

/// One Picard step: coefficients and source frozen at `prev` (zero state
/// when `None`).
pub fn picard_step(
    sys: &SystemSpec,
    beta: &[f64],
    forcing: &Forcing,
    grid: &SingularGrid,
    prev: Option<&SingularField>,
    opts: &SingularOptions,
) -> Result<SingularField> {
    let p = problem(sys, beta, forcing, grid)?;
    march(&p, prev.map(Frozen::Field).unwrap_or(Frozen::Zero), opts)
}

/// Nonlinear solve with coefficients evaluated at the current state.
pub fn solve_direct(sys: &SystemSpec, beta: &[f64], forcing: &Forcing, grid: &SingularGrid, opts: &SingularOptions) -> Result<SingularField> {
    let p = problem(sys, beta, forcing, grid)?;
    march(&p, Frozen::Current, opts)
}

#[derive(Debug, Clone)]
pub struct SingularSolution {
    pub field: SingularField,
    /// Picard iterates `1..=keep`.
    pub iterates: Vec<SingularField>,
    /// Relative `E^1` changes of the Picard sequence (empty for direct).
    pub changes: Vec<f64>,
    pub method: SolveMethod,
}

/// Solves the singular system with the configured method. The first `keep`
/// Picard iterates are always computed.
pub fn solve_singular(sys: &SystemSpec, beta: &[f64], forcing: &Forcing, grid: &SingularGrid, opts: &SingularOptions) -> Result<SingularSolution> {
    let p = problem(sys, beta, forcing, grid)?;
    let mut iterates = Vec::new();
    let mut changes = Vec::new();
    let mut prev: Option<SingularField> = None;
    let picard_len = match opts.method {
        SolveMethod::Picard => opts.max_iter,
        SolveMethod::Direct => opts.keep,
    };
    for it in 1..=picard_len {
        let cur = march(&p, prev.as_ref().map(Frozen::Field).unwrap_or(Frozen::Zero), opts)?;
        if opts.method == SolveMethod::Picard {
            let cn = cur.spectrum();
            let scale = cn.e_norm(1).total;
            let diff = match &prev {
                Some(pv) => cn.sub(&pv.spectrum()).e_norm(1).total,
                None => scale,
            };
            let change = if scale > 0.0 { diff / scale } else { 0.0 };
            changes.push(change);
            if it <= opts.keep {
                iterates.push(cur.clone());
            }
            if change < opts.tol {
                return Ok(SingularSolution { field: cur, iterates, changes, method: opts.method });
            }
        } else {
            iterates.push(cur.clone());
        }
        prev = Some(cur);
    }
    match opts.method {
        SolveMethod::Picard => {
            Err(Error::NoConvergence { iterations: opts.max_iter, last_change: changes.last().copied().unwrap_or(f64::NAN), t0_suggestion: grid.t_final / 2.0 })
        }
        SolveMethod::Direct => {
            let field = march(&p, Frozen::Current, opts)?;
            Ok(SingularSolution { field, iterates, changes, method: opts.method })
        }
    }
}
