//! Multi-phase trigonometric polynomials, the projectors onto characteristic
//! single-phase components, and scalar Fourier series utilities (preparation
//! map, prepared interaction integrals).

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::modes::{ModeClass, ModeTable};
use crate::resonance::ResonanceSet;

/// `sum_alpha V_alpha(x) e^{i alpha . theta}` with `V_alpha` sampled at
/// `points` locations, stored point-major (`V[pt * n + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub m: usize,
    pub n: usize,
    pub points: usize,
    pub terms: BTreeMap<Vec<i64>, Vec<C64>>,
}

impl TrigPolynomial {
    pub fn new(m: usize, n: usize, points: usize) -> Self {
        Self { m, n, points, terms: BTreeMap::new() }
    }

    pub fn zero_value(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.n * self.points]
    }

    /// Adds `v` to the coefficient of `alpha`.
    pub fn add(&mut self, alpha: Vec<i64>, v: &[C64]) {
        assert_eq!(alpha.len(), self.m);
        assert_eq!(v.len(), self.n * self.points);
        let len = self.n * self.points;
        let e = self.terms.entry(alpha).or_insert_with(|| vec![C64::new(0.0, 0.0); len]);
        for (a, b) in e.iter_mut().zip(v) {
            *a += b;
        }
    }

    pub fn get(&self, alpha: &[i64]) -> Option<&Vec<C64>> {
        self.terms.get(alpha)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            v.iter_mut().for_each(|x| *x *= s);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, v) in &other.terms {
            let neg: Vec<C64> = v.iter().map(|x| -x).collect();
            out.add(a.clone(), &neg);
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().flat_map(|v| v.iter().map(|x| x.norm())).fold(0.0, f64::max)
    }

    /// Checks `spec` lies in the sign lattice with at most two active phases.
    pub fn check_spectrum(&self, classes: &[ModeClass]) -> Result<()> {
        for a in self.terms.keys() {
            let nnz = a.iter().filter(|x| **x != 0).count();
            let ok = nnz <= 2 && a.iter().enumerate().all(|(m, &x)| classes[m].admits(x));
            if !ok {
                return Err(Error::SpectrumViolation(a.iter().map(|x| *x as i32).collect()));
            }
        }
        Ok(())
    }

    /// Applies the matrix `mat` to `V_alpha` at every point.
    fn apply(&self, mat: &linalg::CMat, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for pt in 0..self.points {
            let src = &v[pt * n..(pt + 1) * n];
            for i in 0..n {
                out[pt * n + i] = (0..n).map(|j| mat[(i, j)] * src[j]).sum();
            }
        }
        out
    }

    /// Values at `theta = (theta_0 + omega_m xi_d)_m`, one `N`-vector per point.
    pub fn substitute(&self, omegas: &[C64], theta0: f64, xid: f64) -> Vec<C64> {
        let mut out = self.zero_value();
        for (a, v) in &self.terms {
            let total: i64 = a.iter().sum();
            let aw: C64 = a.iter().zip(omegas).map(|(x, w)| w * *x as f64).sum();
            let ph = (C64::new(0.0, total as f64 * theta0) + C64::new(0.0, 1.0) * aw * xid).exp();
            for (o, x) in out.iter_mut().zip(v) {
                *o += ph * x;
            }
        }
        out
    }

    /// As [`substitute`](Self::substitute) after checking the spectrum.
    pub fn substitute_checked(&self, mt: &ModeTable, theta0: f64, xid: f64) -> Result<Vec<C64>> {
        self.check_spectrum(&mt.classes())?;
        Ok(self.substitute(&mt.omegas(), theta0, xid))
    }
}

/// Which single-phase sectors a projector keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    All,
    Hyperbolic,
    Elliptic,
}

fn keeps(sector: Sector, class: ModeClass, mean: bool) -> bool {
    match sector {
        Sector::All => true,
        Sector::Hyperbolic => mean || class.is_hyperbolic(),
        Sector::Elliptic => !mean && class.is_elliptic(),
    }
}

fn unit(m: usize, idx: usize, n: i64) -> Vec<i64> {
    let mut a = vec![0; m];
    a[idx] = n;
    a
}

fn project(v: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable, sector: Sector, flat: bool) -> Result<TrigPolynomial> {
    let mut out = TrigPolynomial::new(v.m, v.n, v.points);
    for (a, val) in &v.terms {
        if a.iter().all(|x| *x == 0) {
            if keeps(sector, ModeClass::Incoming, true) {
                out.add(a.clone(), val);
            }
            continue;
        }
        if let Some((m, n)) = rs.lookup(a)? {
            if !keeps(sector, mt.modes[m].class, false) {
                continue;
            }
            let pv = v.apply(&mt.projectors[m], val);
            let key = if flat { a.clone() } else { unit(v.m, m, n) };
            out.add(key, &pv);
        }
    }
    Ok(out)
}

/// `E V = V_0 + sum_m sum_{alpha in C_m \ 0} P_m V_alpha e^{i n_alpha theta_m}`.
pub fn project_e(v: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable) -> Result<TrigPolynomial> {
    project(v, rs, mt, Sector::All, false)
}

/// As [`project_e`] restricted to a sector (mean + hyperbolic, or elliptic).
pub fn project_e_sector(v: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable, sector: Sector) -> Result<TrigPolynomial> {
    project(v, rs, mt, sector, false)
}

/// `E_flat V = V_0 + sum_m sum_{alpha in C_m \ 0} P_m V_alpha e^{i alpha . theta}`.
pub fn project_e_flat(v: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable) -> Result<TrigPolynomial> {
    project(v, rs, mt, Sector::All, true)
}

/// `E_{m,k} V`: the scalar coefficient series `l_{m,k} . (E_m V)` in `theta_m`,
/// keyed by harmonic, one value per point.
pub fn project_component(v: &TrigPolynomial, rs: &ResonanceSet, mt: &ModeTable, m: usize, k: usize) -> Result<BTreeMap<i64, Vec<C64>>> {
    let mut out: BTreeMap<i64, Vec<C64>> = BTreeMap::new();
    let l = &mt.modes[m].l[k];
    for (a, val) in &v.terms {
        if let Some((mm, n)) = rs.lookup(a)? {
            if mm != m {
                continue;
            }
            let e = out.entry(n).or_insert_with(|| vec![C64::new(0.0, 0.0); v.points]);
            for pt in 0..v.points {
                e[pt] += linalg::dot_nc(l, &val[pt * v.n..(pt + 1) * v.n]);
            }
        }
    }
    Ok(out)
}

/// Scalar Fourier series with harmonics `-kmax..=kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub kmax: i64,
    pub c: Vec<C64>,
}

impl Series {
    pub fn zeros(kmax: i64) -> Self {
        Self { kmax, c: vec![C64::new(0.0, 0.0); (2 * kmax + 1) as usize] }
    }

    pub fn from_fn(kmax: i64, f: impl Fn(i64) -> C64) -> Self {
        Self { kmax, c: (-kmax..=kmax).map(f).collect() }
    }

    pub fn get(&self, k: i64) -> C64 {
        if k.abs() > self.kmax {
            C64::new(0.0, 0.0)
        } else {
            self.c[(k + self.kmax) as usize]
        }
    }

    pub fn set(&mut self, k: i64, v: C64) {
        self.c[(k + self.kmax) as usize] = v;
    }

    pub fn eval(&self, theta: C64) -> C64 {
        (-self.kmax..=self.kmax).map(|k| self.get(k) * (C64::new(0.0, 1.0) * theta * k as f64).exp()).sum()
    }

    /// `d/d theta`.
    pub fn derivative(&self) -> Self {
        Self::from_fn(self.kmax, |k| self.get(k) * C64::new(0.0, k as f64))
    }
}

/// Preparation map: keeps the coefficients at multiples of `nq`.
pub fn prepare(f: &Series, nq: i64) -> Series {
    assert!(nq != 0, "preparation index must be nonzero");
    Series::from_fn(f.kmax, |k| if k % nq == 0 { f.get(k) } else { C64::new(0.0, 0.0) })
}

/// Prepared interaction integral `J_{p,nq,nr}` of `a` (mode q) and `b`
/// (mode r): coefficient `a_{j nq} b_{j nr} i j nr` at harmonic `j np`.
pub fn interaction_integral(a: &Series, b: &Series, np: i64, nq: i64, nr: i64) -> Series {
    let jmax = (a.kmax / nq.abs()).min(b.kmax / nr.abs());
    let mut out = Series::zeros(jmax * np.abs());
    for j in -jmax..=jmax {
        if j == 0 {
            continue;
        }
        let v = a.get(j * nq) * b.get(j * nr) * C64::new(0.0, (j * nr) as f64);
        let k = j * np;
        let cur = out.get(k);
        out.set(k, cur + v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_keeps_multiples() {
        let f = Series::from_fn(4, |k| if k == 1 || k == 2 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let g = prepare(&f, 2);
        assert_eq!(g.get(1), C64::new(0.0, 0.0));
        assert_eq!(g.get(2), C64::new(1.0, 0.0));
        assert_eq!(prepare(&f, 1), f);
    }

    #[test]
    fn single_harmonic_interaction() {
        let e1 = Series::from_fn(3, |k| if k == 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let j = interaction_integral(&e1, &e1, 2, 1, 1);
        for k in -j.kmax..=j.kmax {
            let want = if k == 2 { C64::new(0.0, 1.0) } else { C64::new(0.0, 0.0) };
            assert_eq!(j.get(k), want);
        }
    }
}
