//! First corrector: solves `L(d_theta) V1 = H` term by term for finite
//! trigonometric polynomials, with `H = -(I - E_flat) G` assembled from the
//! leading profile on the grid.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::modes::ModeTable;
use crate::numerics::{diff4, Spectral};
use crate::profile::{q_apply, q_basis, ProfileGrid, ProfileSet};
use crate::resonance::ResonanceSet;
use crate::system::SystemSpec;
use crate::trig::{project_e, project_e_flat, TrigPolynomial};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Condition number above which a non-characteristic symbol is rejected.
pub const CONDITION_CAP: f64 = 1e10;

/// `i Ltilde((sum alpha) beta, alpha . omega)`: the action of `L(d_theta)` on
/// the coefficient of `e^{i alpha . theta}`.
pub fn symbol(sys: &SystemSpec, mt: &ModeTable, alpha: &[i64]) -> CMat {
    let total: i64 = alpha.iter().sum();
    let aw: C64 = alpha.iter().zip(&mt.modes).map(|(a, m)| m.omega * *a as f64).sum();
    let s = total as f64;
    let mut xi: Vec<C64> = mt.beta[1..].iter().map(|b| C64::new(b * s, 0.0)).collect();
    xi.push(aw);
    sys.l_tilde(C64::new(mt.beta[0] * s, 0.0), &xi) * C64::new(0.0, 1.0)
}

fn apply_mat(mat: &CMat, v: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for (o, src) in out.chunks_mut(n).zip(v.chunks(n)) {
        for i in 0..n {
            o[i] = (0..n).map(|j| mat[(i, j)] * src[j]).sum();
        }
    }
    out
}

/// `L(d_theta) V`.
pub fn apply_l_theta(sys: &SystemSpec, mt: &ModeTable, v: &TrigPolynomial) -> TrigPolynomial {
    let mut out = TrigPolynomial::new(v.m, v.n, v.points);
    for (a, val) in &v.terms {
        out.add(a.clone(), &apply_mat(&symbol(sys, mt, a), val, v.n));
    }
    out
}

/// `Ltilde(d_x) V = A_d^{-1}(d_t + A_1 d_y) V + d_x V` on profile grid points
/// (`it * points + ip`).
pub fn apply_l_x(sys: &SystemSpec, grid: &ProfileGrid, v: &TrigPolynomial) -> TrigPolynomial {
    let n = v.n;
    let (nx, ny, nt) = (grid.nx, grid.ny, grid.nt);
    let np = grid.points();
    assert_eq!(v.points, nt * np);
    let a0 = linalg::to_complex(&sys.tilde_a(0));
    let a1 = linalg::to_complex(&sys.tilde_a(1));
    let yspec = (ny > 1).then(|| Spectral::new(ny, grid.y_len));
    let mut out = TrigPolynomial::new(v.m, v.n, v.points);
    for (a, val) in &v.terms {
        let at = |it: usize, ip: usize, i: usize| val[(it * np + ip) * n + i];
        let mut dt = vec![ZERO; val.len()];
        let mut dy = vec![ZERO; val.len()];
        let mut dx = vec![ZERO; val.len()];
        for ip in 0..np {
            for i in 0..n {
                for it in 0..nt {
                    dt[(it * np + ip) * n + i] = diff4(nt, grid.dt, it, |k| at(k, ip, i));
                }
            }
        }
        for it in 0..nt {
            for iy in 0..ny {
                for i in 0..n {
                    for ix in 0..nx {
                        dx[(it * np + iy * nx + ix) * n + i] = diff4(nx, grid.dx, ix, |k| at(it, iy * nx + k, i));
                    }
                }
            }
            if let Some(ys) = &yspec {
                for ix in 0..nx {
                    for i in 0..n {
                        let mut line: Vec<C64> = (0..ny).map(|iy| at(it, iy * nx + ix, i)).collect();
                        ys.derivative(&mut line);
                        for iy in 0..ny {
                            dy[(it * np + iy * nx + ix) * n + i] = line[iy];
                        }
                    }
                }
            }
        }
        let mut r = apply_mat(&a0, &dt, n);
        let ry = apply_mat(&a1, &dy, n);
        for ((x, y), z) in r.iter_mut().zip(&ry).zip(&dx) {
            *x += y + z;
        }
        out.add(a.clone(), &r);
    }
    out
}

/// `M(U) d_theta V = sum Q(U_a) i (sum b) V_b e^{i (a + b) . theta}`.
pub fn apply_interaction(sys: &SystemSpec, mt: &ModeTable, u: &TrigPolynomial, v: &TrigPolynomial) -> TrigPolynomial {
    let q = q_basis(sys, &mt.beta);
    let n = v.n;
    let mut out = TrigPolynomial::new(v.m, v.n, v.points);
    for (a, ua) in &u.terms {
        for (b, vb) in &v.terms {
            let sb: i64 = b.iter().sum();
            if sb == 0 {
                continue;
            }
            let f = C64::new(0.0, sb as f64);
            let mut acc = vec![ZERO; vb.len()];
            for pt in 0..v.points {
                let w = q_apply(&q, &ua[pt * n..(pt + 1) * n], &vb[pt * n..(pt + 1) * n]);
                for i in 0..n {
                    acc[pt * n + i] = w[i] * f;
                }
            }
            let ab: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            out.add(ab, &acc);
        }
    }
    out
}

/// `F(0) V`.
pub fn apply_source(sys: &SystemSpec, v: &TrigPolynomial) -> TrigPolynomial {
    let f0 = linalg::to_complex(&sys.f0);
    let mut out = TrigPolynomial::new(v.m, v.n, v.points);
    for (a, val) in &v.terms {
        out.add(a.clone(), &apply_mat(&f0, val, v.n));
    }
    out
}

/// `G = Ltilde(d_x) V + M(V_prev) d_theta V - F(0) V_prev`.
pub fn assemble_g(sys: &SystemSpec, mt: &ModeTable, grid: &ProfileGrid, v: &TrigPolynomial, v_prev: &TrigPolynomial) -> TrigPolynomial {
    let lx = apply_l_x(sys, grid, v);
    let m = apply_interaction(sys, mt, v_prev, v);
    let f = apply_source(sys, v_prev);
    let mut g = lx;
    for (a, val) in &m.terms {
        g.add(a.clone(), val);
    }
    g.sub(&f)
}

/// `H = -(I - E_flat) G`.
pub fn corrector_rhs(g: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable) -> Result<TrigPolynomial> {
    let flat = project_e_flat(g, rs, mt)?;
    Ok(flat.sub(g))
}

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub v1: TrigPolynomial,
    /// Largest condition number met among non-characteristic symbols.
    pub amplification: f64,
    /// `max |L(d_theta) V1 - H|` over all coefficients.
    pub defect: f64,
}

/// Solves `L(d_theta) V = H`. `H` must satisfy `E_flat H = 0`.
pub fn solve_corrector(sys: &SystemSpec, mt: &ModeTable, rs: &ResonanceSet, h: &TrigPolynomial) -> Result<CorrectorSolution> {
    let scale = h.max_abs();
    let flat = project_e_flat(h, rs, mt)?;
    let defect = flat.max_abs();
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::NotSolvable(defect));
    }
    let n = h.n;
    let mut v1 = TrigPolynomial::new(h.m, h.n, h.points);
    let mut amplification: f64 = 0.0;
    for (a, val) in &h.terms {
        if val.iter().all(|x| *x == ZERO) || a.iter().all(|x| *x == 0) {
            continue;
        }
        let sol = match rs.lookup(a)? {
            Some((m, nn)) => {
                let mut phase = vec![0; h.m];
                phase[m] = 1;
                let l = symbol(sys, mt, &phase);
                let pinv = l.svd(true, true).pseudo_inverse(1e-12).map_err(|e| Error::InvalidInput(e.to_string()))?;
                let w = apply_mat(&pinv, val, n);
                w.iter().map(|x| x / nn as f64).collect::<Vec<_>>()
            }
            None => {
                let l = symbol(sys, mt, a);
                let sv = linalg::singular_values_c(&l);
                let smin = sv.last().copied().unwrap_or(0.0);
                let cond = if smin > 0.0 { sv[0] / smin } else { f64::INFINITY };
                if cond > CONDITION_CAP {
                    return Err(Error::NearSingular { alpha: a.iter().map(|x| *x as i32).collect(), cond });
                }
                amplification = amplification.max(cond);
                let inv = linalg::inverse_c(&l).ok_or(Error::NearSingular { alpha: a.iter().map(|x| *x as i32).collect(), cond })?;
                apply_mat(&inv, val, n)
            }
        };
        v1.add(a.clone(), &sol);
    }
    let defect = apply_l_theta(sys, mt, &v1).sub(h).max_abs();
    Ok(CorrectorSolution { v1, amplification, defect })
}

/// Finite partial sum of a profile: drops the smallest single-phase terms,
/// ranked by `max |V_alpha| (1 + |alpha|_1)^2`, while the dropped total stays
/// below `delta`.
pub fn truncate_to_polynomial(v: &ProfileSet, mt: &ModeTable, delta: f64) -> TrigPolynomial {
    let full = v.to_trig(mt, |_| true);
    truncate(&full, delta)
}

/// As [`truncate_to_polynomial`] on a polynomial.
pub fn truncate(full: &TrigPolynomial, delta: f64) -> TrigPolynomial {
    let mut ranked: Vec<(f64, &Vec<i64>)> = full
        .terms
        .iter()
        .map(|(a, v)| {
            let l1: i64 = a.iter().map(|x| x.abs()).sum();
            let w = v.iter().map(|x| x.norm()).fold(0.0, f64::max) * ((1 + l1) as f64).powi(2);
            (w, a)
        })
        .collect();
    ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(y.1)));
    let mut dropped = 0.0;
    let mut out = full.clone();
    for (w, a) in ranked {
        if dropped + w >= delta {
            break;
        }
        dropped += w;
        out.terms.remove(a);
    }
    out
}

/// Right-hand side and solution of the corrector equation.
#[derive(Debug, Clone)]
pub struct CorrectorBuild {
    pub h: TrigPolynomial,
    pub solution: CorrectorSolution,
}

/// Builds `H` from truncated profiles on the grid and solves for `V1`.
pub fn build_corrector(
    sys: &SystemSpec,
    mt: &ModeTable,
    rs: &ResonanceSet,
    grid: &ProfileGrid,
    v: &TrigPolynomial,
    v_prev: &TrigPolynomial,
) -> Result<CorrectorBuild> {
    let g = assemble_g(sys, mt, grid, v, v_prev);
    let h = corrector_rhs(&g, rs, mt)?;
    let solution = solve_corrector(sys, mt, rs, &h)?;
    Ok(CorrectorBuild { h, solution })
}

/// `max |Phi((I - E_flat) V) - Phi((I - E) V)|` over the sample points.
pub fn substitution_identity_defect(v: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable, samples: &[(f64, f64)]) -> Result<f64> {
    let a = v.sub(&project_e_flat(v, rs, mt)?);
    let b = v.sub(&project_e(v, rs, mt)?);
    let om = mt.omegas();
    let mut worst: f64 = 0.0;
    for &(th, xi) in samples {
        let x = a.substitute(&om, th, xi);
        let y = b.substitute(&om, th, xi);
        for (p, q) in x.iter().zip(&y) {
            worst = worst.max((p - q).norm());
        }
    }
    Ok(worst)
}

/// Norm summary of a corrector for reports.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorSummary {
    pub terms: usize,
    pub max_abs: f64,
    pub amplification: f64,
    pub defect: f64,
}

impl CorrectorSummary {
    pub fn of(s: &CorrectorSolution) -> Self {
        Self { terms: s.v1.terms.len(), max_abs: s.v1.max_abs(), amplification: s.amplification, defect: s.defect }
    }
}

/// Groups the terms of a polynomial by `sum alpha`.
pub fn by_total_harmonic(v: &TrigPolynomial) -> BTreeMap<i64, Vec<&Vec<i64>>> {
    let mut out: BTreeMap<i64, Vec<&Vec<i64>>> = BTreeMap::new();
    for a in v.terms.keys() {
        out.entry(a.iter().sum()).or_default().push(a);
    }
    out
}
