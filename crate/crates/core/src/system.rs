//! Quasilinear hyperbolic systems at a constant state and numerical checks of
//! the structural hypotheses (constant multiplicity, noncharacteristic
//! boundary, uniform Lopatinski stability).

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

/// Coefficients `A_j(v)` of the perturbation system, where `v` is the
/// deviation from the base state.
pub trait CoefficientModel: Send + Sync + Debug {
    fn n(&self) -> usize;
    fn d(&self) -> usize;

    /// Writes `A_j(v)` row-major into `out` (length `n*n`).
    fn a_into(&self, j: usize, v: &[f64], out: &mut [f64]);

    /// Writes `(dA_j(0) . w)` row-major into `out`. Defaults to a central
    /// difference with step `1e-6`.
    fn da_into(&self, j: usize, w: &[f64], out: &mut [f64]) {
        let n = self.n();
        let h = 1e-6;
        let vp: Vec<f64> = w.iter().map(|x| h * x).collect();
        let vm: Vec<f64> = w.iter().map(|x| -h * x).collect();
        let mut ap = vec![0.0; n * n];
        let mut am = vec![0.0; n * n];
        self.a_into(j, &vp, &mut ap);
        self.a_into(j, &vm, &mut am);
        for i in 0..n * n {
            out[i] = (ap[i] - am[i]) / (2.0 * h);
        }
    }

    /// Whether `da_into` is exact (used only for reporting).
    fn analytic_derivative(&self) -> bool {
        false
    }
}

/// Isentropic Euler in primitive variables `(rho, u_1..u_d)` with pressure
/// law `p = K rho^gamma`.
#[derive(Debug, Clone, Serialize)]
pub struct EulerModel {
    pub d: usize,
    pub k: f64,
    pub gamma: f64,
    pub base: Vec<f64>,
}

impl EulerModel {
    pub fn new(d: usize, k: f64, gamma: f64, base: Vec<f64>) -> Self {
        assert_eq!(base.len(), d + 1, "Euler base state is (rho, u_1..u_d)");
        Self { d, k, gamma, base }
    }

    /// Squared sound speed at density `rho`.
    pub fn c2(&self, rho: f64) -> f64 {
        self.k * self.gamma * rho.powf(self.gamma - 1.0)
    }

    pub fn sound_speed(&self) -> f64 {
        self.c2(self.base[0]).sqrt()
    }

    /// `d/d rho (c^2 / rho)`.
    fn dc2_over_rho(&self, rho: f64) -> f64 {
        self.k * self.gamma * (self.gamma - 2.0) * rho.powf(self.gamma - 3.0)
    }
}

impl CoefficientModel for EulerModel {
    fn n(&self) -> usize {
        self.d + 1
    }
    fn d(&self) -> usize {
        self.d
    }

    fn a_into(&self, j: usize, v: &[f64], out: &mut [f64]) {
        let n = self.d + 1;
        out.iter_mut().for_each(|x| *x = 0.0);
        if j == 0 {
            for i in 0..n {
                out[i * n + i] = 1.0;
            }
            return;
        }
        let rho = self.base[0] + v[0];
        let uj = self.base[j] + v[j];
        for i in 0..n {
            out[i * n + i] = uj;
        }
        out[j] = rho;
        out[j * n] = self.c2(rho) / rho;
    }

    fn da_into(&self, j: usize, w: &[f64], out: &mut [f64]) {
        let n = self.d + 1;
        out.iter_mut().for_each(|x| *x = 0.0);
        if j == 0 {
            return;
        }
        for i in 0..n {
            out[i * n + i] = w[j];
        }
        out[j] = w[0];
        out[j * n] = self.dc2_over_rho(self.base[0]) * w[0];
    }

    fn analytic_derivative(&self) -> bool {
        true
    }
}

/// Affine coefficients `A_j(v) = A_j + sum_i v_i D_{j,i}`.
#[derive(Debug, Clone)]
pub struct AffineModel {
    pub d: usize,
    pub a: Vec<RMat>,
    /// `da[j][i]` is the derivative of `A_j` along the `i`-th state component.
    pub da: Vec<Vec<RMat>>,
}

impl CoefficientModel for AffineModel {
    fn n(&self) -> usize {
        self.a[0].nrows()
    }
    fn d(&self) -> usize {
        self.d
    }
    fn a_into(&self, j: usize, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        for r in 0..n {
            for c in 0..n {
                let mut x = self.a[j][(r, c)];
                if let Some(ds) = self.da.get(j) {
                    for (i, di) in ds.iter().enumerate() {
                        x += v[i] * di[(r, c)];
                    }
                }
                out[r * n + c] = x;
            }
        }
    }
    fn da_into(&self, j: usize, w: &[f64], out: &mut [f64]) {
        let n = self.n();
        out.iter_mut().for_each(|x| *x = 0.0);
        if let Some(ds) = self.da.get(j) {
            for (i, di) in ds.iter().enumerate() {
                for r in 0..n {
                    for c in 0..n {
                        out[r * n + c] += w[i] * di[(r, c)];
                    }
                }
            }
        }
    }
    fn analytic_derivative(&self) -> bool {
        true
    }
}

/// The system at its base state together with the boundary operator.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub model: Arc<dyn CoefficientModel>,
    /// Linearized source `F(0) = A_d(0)^{-1} F_cal(0)`.
    pub f0: RMat,
    pub b0: RMat,
    pub u0: Vec<f64>,
    a0: Vec<RMat>,
    ad_inv: RMat,
}

impl SystemSpec {
    pub fn new(name: &str, model: Arc<dyn CoefficientModel>, f0: RMat, b0: RMat, u0: Vec<f64>) -> Result<Self> {
        let n = model.n();
        let d = model.d();
        if d < 1 {
            return Err(Error::InvalidInput("space dimension must be >= 1".into()));
        }
        if b0.ncols() != n || f0.nrows() != n || f0.ncols() != n {
            return Err(Error::InvalidInput("matrix shapes do not match the state dimension".into()));
        }
        let zero = vec![0.0; n];
        let a0: Vec<RMat> = (0..=d)
            .map(|j| {
                let mut buf = vec![0.0; n * n];
                model.a_into(j, &zero, &mut buf);
                RMat::from_row_slice(n, n, &buf)
            })
            .collect();
        let ad_inv = linalg::inverse(&a0[d]).unwrap_or_else(|| RMat::from_element(n, n, f64::NAN));
        Ok(Self { name: name.to_string(), n, d, p: b0.nrows(), model, f0, b0, u0, a0, ad_inv })
    }

    /// Built-in isentropic Euler system with the boundary matrix chosen from
    /// the flow regime at the boundary `x_d = 0`.
    pub fn euler(d: usize, k: f64, gamma: f64, base: Vec<f64>) -> Result<Self> {
        let model = EulerModel::new(d, k, gamma, base.clone());
        let b0 = euler_boundary_matrix(&model);
        let n = d + 1;
        Self::new(&format!("euler{d}d"), Arc::new(model), RMat::zeros(n, n), b0, base)
    }

    /// `A_j(0)`.
    pub fn a(&self, j: usize) -> &RMat {
        &self.a0[j]
    }

    /// `A_j(v)` at the deviation `v`.
    pub fn a_at(&self, j: usize, v: &[f64]) -> RMat {
        let mut buf = vec![0.0; self.n * self.n];
        self.model.a_into(j, v, &mut buf);
        RMat::from_row_slice(self.n, self.n, &buf)
    }

    /// `dA_j(0) . w`.
    pub fn da(&self, j: usize, w: &[f64]) -> RMat {
        let mut buf = vec![0.0; self.n * self.n];
        self.model.da_into(j, w, &mut buf);
        RMat::from_row_slice(self.n, self.n, &buf)
    }

    pub fn ad_inv(&self) -> &RMat {
        &self.ad_inv
    }

    /// `A_d(0)^{-1} A_j(0)`.
    pub fn tilde_a(&self, j: usize) -> RMat {
        &self.ad_inv * &self.a0[j]
    }

    /// `dÃ_j(0) . w` for `Ã_j = A_d^{-1} A_j`.
    pub fn d_tilde_a(&self, j: usize, w: &[f64]) -> RMat {
        let daj = self.da(j, w);
        let dad = self.da(self.d, w);
        &self.ad_inv * daj - &self.ad_inv * dad * &self.ad_inv * &self.a0[j]
    }

    /// Symbol `sum_{j>=1} xi_j A_j(v)` for a spatial covector `xi` (length d).
    pub fn symbol(&self, v: &[f64], xi: &[f64]) -> RMat {
        let mut m = RMat::zeros(self.n, self.n);
        for (j, x) in xi.iter().enumerate() {
            m += self.a_at(j + 1, v) * *x;
        }
        m
    }

    /// `L(tau, xi) = tau I + sum xi_j A_j(0)` evaluated at complex covectors.
    pub fn l_symbol(&self, tau: C64, xi: &[C64]) -> CMat {
        let mut m = CMat::identity(self.n, self.n) * tau;
        for (j, x) in xi.iter().enumerate() {
            m += linalg::to_complex(&self.a0[j + 1]) * *x;
        }
        m
    }

    /// `Ltilde(tau, xi) = A_d^{-1} L(tau, xi)`.
    pub fn l_tilde(&self, tau: C64, xi: &[C64]) -> CMat {
        linalg::to_complex(&self.ad_inv) * self.l_symbol(tau, xi)
    }
}

/// Boundary matrix for Euler at `x_d = 0` by regime (Euler example cases).
pub fn euler_boundary_matrix(model: &EulerModel) -> RMat {
    let d = model.d;
    let n = d + 1;
    let c = model.sound_speed();
    let ud = model.base[d];
    let rho = model.base[0];
    if ud >= c {
        RMat::identity(n, n)
    } else if ud > 0.0 {
        // b(rho, u) = (rho u_d, u_1, .., u_{d-1})
        let mut b = RMat::zeros(d, n);
        b[(0, 0)] = ud;
        b[(0, d)] = rho;
        for i in 1..d {
            b[(i, i)] = 1.0;
        }
        b
    } else if ud > -c {
        let mut b = RMat::zeros(1, n);
        b[(0, d)] = 1.0;
        b
    } else {
        RMat::zeros(0, n)
    }
}

/// A point of the frequency set `Xi`: `zeta = (tau - i gamma, eta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub tau: f64,
    pub gamma: f64,
    pub eta: Vec<f64>,
}

impl FrequencyPoint {
    pub fn new(tau: f64, gamma: f64, eta: Vec<f64>) -> Result<Self> {
        if gamma < 0.0 {
            return Err(Error::InvalidInput("gamma must be nonnegative".into()));
        }
        if tau == 0.0 && gamma == 0.0 && eta.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidInput("zeta = 0 is not a frequency".into()));
        }
        Ok(Self { tau, gamma, eta })
    }

    pub fn norm(&self) -> f64 {
        (self.tau * self.tau + self.gamma * self.gamma + self.eta.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityReport {
    pub q: usize,
    pub multiplicities: Vec<usize>,
    /// Distinct eigenvalues per sample, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
    pub pass: bool,
}

/// Checks that `sum xi_j A_j(u)` has a constant pattern of semisimple real
/// eigenvalues over the samples `(u, xi)`.
pub fn check_constant_multiplicity(sys: &SystemSpec, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<MultiplicityReport> {
    let mut pattern: Option<Vec<usize>> = None;
    let mut eigs = Vec::with_capacity(samples.len());
    for (u, xi) in samples {
        let m = sys.symbol(u, xi);
        let ev = linalg::eigenvalues(&m);
        let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let cl = linalg::cluster(&ev, 1e-8 * scale);
        let mut vals = Vec::new();
        let mut mults = Vec::new();
        let cm = linalg::to_complex(&m);
        for c in &cl {
            if c.value.im.abs() > 1e-8 * scale {
                return Err(Error::InvalidInput(format!("non-real eigenvalue {} of the symbol", c.value)));
            }
            let shifted = &cm - CMat::identity(sys.n, sys.n) * C64::new(c.value.re, 0.0);
            let rank = linalg::rank_c(&shifted, 1e-8);
            let nullity = sys.n - rank;
            if nullity < c.count {
                return Err(Error::NotSemisimple { value: format!("{}", c.value.re), deficit: c.count - nullity });
            }
            vals.push(c.value.re);
            mults.push(c.count);
        }
        match &pattern {
            None => pattern = Some(mults),
            Some(p) if *p != mults => {
                return Err(Error::MultiplicityDrift { first: p.clone(), other: mults });
            }
            _ => {}
        }
        eigs.push(vals);
    }
    let multiplicities = pattern.unwrap_or_default();
    Ok(MultiplicityReport { q: multiplicities.len(), multiplicities, eigenvalues: eigs, pass: true })
}

/// Random samples of states within `radius` of the base state and unit
/// spatial directions, reproducible from `seed`.
pub fn random_samples(sys: &SystemSpec, count: usize, radius: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..sys.n).map(|_| radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let mut xi: Vec<f64> = (0..sys.d).map(|_| gaussian(&mut rng)).collect();
            let nrm = xi.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            xi.iter_mut().for_each(|x| *x /= nrm);
            (u, xi)
        })
        .collect()
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

#[derive(Debug, Clone, Serialize)]
pub struct NoncharacteristicReport {
    pub eigenvalues: Vec<f64>,
    pub positive_count: usize,
    pub rank_b0: usize,
    pub p: usize,
    pub condition: f64,
    pub pass: bool,
}

/// Checks that `A_d(0)` is invertible and that `B(0)` has full rank equal to
/// the number of positive eigenvalues of `A_d(0)`.
pub fn check_noncharacteristic(sys: &SystemSpec) -> Result<NoncharacteristicReport> {
    check_noncharacteristic_with(sys, 1e8)
}

pub fn check_noncharacteristic_with(sys: &SystemSpec, max_condition: f64) -> Result<NoncharacteristicReport> {
    let ad = sys.a(sys.d);
    let det = ad.determinant();
    let scale = ad.norm().max(1e-300);
    if det.abs() < 1e-12 * scale.powi(sys.n as i32) {
        return Err(Error::CharacteristicBoundary { det });
    }
    let mut ev: Vec<f64> = linalg::eigenvalues(ad).iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let positive_count = ev.iter().filter(|x| **x > 0.0).count();
    let sv = linalg::singular_values(ad);
    let condition = sv[0] / sv[sv.len() - 1];
    let rank_b0 = if sys.p == 0 { 0 } else { linalg::rank_c(&linalg::to_complex(&sys.b0), 1e-10) };
    let pass = condition < max_condition && rank_b0 == sys.p && sys.p == positive_count;
    Ok(NoncharacteristicReport { eigenvalues: ev, positive_count, rank_b0, p: sys.p, condition, pass })
}

/// `calA(zeta) = -i A_d^{-1} ((tau - i gamma) I + sum eta_j A_j(0))`.
pub fn calligraphic_a(sys: &SystemSpec, z: &FrequencyPoint) -> CMat {
    let tau = C64::new(z.tau, -z.gamma);
    let mut m = CMat::identity(sys.n, sys.n) * tau;
    for (j, e) in z.eta.iter().enumerate() {
        m += linalg::to_complex(sys.a(j + 1)) * C64::new(*e, 0.0);
    }
    linalg::to_complex(sys.ad_inv()) * m * C64::new(0.0, -1.0)
}

/// Orthonormal basis of the stable subspace `E^s(zeta)` for `gamma > 0`.
///
/// The generalized stable eigenspace is the range of the product of
/// `(calA - lambda)` over the unstable eigenvalues (Cayley-Hamilton).
pub fn stable_subspace_interior(sys: &SystemSpec, z: &FrequencyPoint, tol: f64) -> Result<CMat> {
    if z.gamma <= 0.0 {
        return Err(Error::InvalidInput("interior stable subspace needs gamma > 0".into()));
    }
    let a = calligraphic_a(sys, z);
    let ev = linalg::eigenvalues_c(&a);
    let scale = ev.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
    if let Some(e) = ev.iter().find(|e| e.re.abs() < tol * scale) {
        return Err(Error::GlancingOrSingular(format!("eigenvalue {e} on the imaginary axis")));
    }
    let dim = ev.iter().filter(|e| e.re < 0.0).count();
    let mut prod = CMat::identity(sys.n, sys.n);
    for e in ev.iter().filter(|e| e.re > 0.0) {
        prod = (&a - CMat::identity(sys.n, sys.n) * *e) * prod;
        let nrm = prod.norm();
        if nrm > 0.0 {
            prod /= C64::new(nrm, 0.0);
        }
    }
    let svd = prod.svd(true, false);
    let u = svd.u.expect("u requested");
    let mut order: Vec<usize> = (0..sys.n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let mut out = CMat::zeros(sys.n, dim);
    for (c, &i) in order.iter().take(dim).enumerate() {
        out.set_column(c, &u.column(i));
    }
    Ok(out)
}

/// Stable subspace for any `zeta` in `Xi`; on `gamma = 0` it is the sum of
/// the kernels of incoming and decaying modes.
pub fn stable_subspace(sys: &SystemSpec, z: &FrequencyPoint) -> Result<CMat> {
    if z.gamma > 0.0 {
        return stable_subspace_interior(sys, z, 1e-10);
    }
    let mut beta = vec![z.tau];
    beta.extend_from_slice(&z.eta);
    let mt = crate::modes::compute_modes(sys, &beta)?;
    Ok(linalg::orthonormalize(&mt.stable_basis()))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub samples_used: usize,
    pub samples_skipped: usize,
    pub min_sigma: f64,
    pub argmin: Vec<f64>,
    pub margin: f64,
    pub pass: bool,
}

/// Options for the uniform-stability sweep over the unit hemisphere.
#[derive(Debug, Clone)]
pub struct StabilityOptions {
    pub margin: f64,
    /// Samples closer than this to glancing (or to the imaginary axis) are
    /// skipped.
    pub glancing_radius: f64,
    /// Below this `gamma` the boundary value on `gamma = 0` is used.
    pub gamma_floor: f64,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { margin: 1e-3, glancing_radius: 1e-2, gamma_floor: 1e-6, seed: 7 }
    }
}

/// Quasi-uniform points on the unit hemisphere `{(tau, gamma, eta) : gamma >= 0}`.
pub fn hemisphere_samples(d: usize, count: usize, seed: u64) -> Vec<FrequencyPoint> {
    if d == 2 {
        // Fibonacci lattice with gamma as the polar coordinate.
        let golden = PI * (3.0 - 5f64.sqrt());
        return (0..count)
            .map(|i| {
                let g = (i as f64 + 0.5) / count as f64;
                let r = (1.0 - g * g).sqrt();
                let phi = golden * i as f64;
                FrequencyPoint { tau: r * phi.cos(), gamma: g, eta: vec![r * phi.sin()] }
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..d + 1).map(|_| gaussian(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            FrequencyPoint { tau: v[0], gamma: v[1].abs(), eta: v[2..].to_vec() }
        })
        .collect()
}

/// Samples `Sigma` and reports `min sigma_min(B(0) E^s(zeta))` over the
/// samples that are not within the glancing exclusion zone.
pub fn check_uniform_stability(sys: &SystemSpec, n_samples: usize, opts: &StabilityOptions) -> Result<StabilityReport> {
    if sys.p == 0 {
        return Ok(StabilityReport { samples_used: 0, samples_skipped: 0, min_sigma: f64::INFINITY, argmin: vec![], margin: opts.margin, pass: true });
    }
    let pts = hemisphere_samples(sys.d, n_samples, opts.seed);
    let b = linalg::to_complex(&sys.b0);
    let mut best = (f64::INFINITY, vec![]);
    let (mut used, mut skipped) = (0, 0);
    for z in pts {
        let basis = if z.gamma > opts.gamma_floor {
            stable_subspace_interior(sys, &z, opts.glancing_radius).ok()
        } else {
            let mut beta = vec![z.tau];
            beta.extend_from_slice(&z.eta);
            match crate::modes::compute_modes(sys, &beta) {
                Ok(mt) if mt.min_glancing_distance() > opts.glancing_radius => Some(linalg::orthonormalize(&mt.stable_basis())),
                _ => None,
            }
        };
        let Some(basis) = basis else {
            skipped += 1;
            continue;
        };
        if basis.ncols() != sys.p {
            return Err(Error::StabilityFail { zeta: vec![z.tau, z.gamma], sigma_min: 0.0 });
        }
        let s = linalg::singular_values_c(&(&b * &basis));
        let smin = s.last().copied().unwrap_or(0.0);
        used += 1;
        if smin < best.0 {
            let mut zz = vec![z.tau, z.gamma];
            zz.extend_from_slice(&z.eta);
            best = (smin, zz);
        }
    }
    let pass = best.0 > opts.margin;
    if !pass {
        return Err(Error::StabilityFail { zeta: best.1, sigma_min: best.0 });
    }
    Ok(StabilityReport { samples_used: used, samples_skipped: skipped, min_sigma: best.0, argmin: best.1, margin: opts.margin, pass })
}

/// `det(tau I + sum xi_j A_j(u))`, used by the factorization invariant.
pub fn characteristic_determinant(sys: &SystemSpec, u: &[f64], tau: f64, xi: &[f64]) -> f64 {
    let m = sys.symbol(u, xi) + DMatrix::identity(sys.n, sys.n) * tau;
    m.determinant()
}

/// Eigen-splitting of `A_d(0)` for boundary closures: components with positive
/// speed enter at `x_d = 0`, the others at the far end of a truncated domain.
#[derive(Debug, Clone)]
pub struct CharacteristicSplit {
    pub lambda: Vec<f64>,
    pub e: RMat,
    pub e_inv: RMat,
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    /// `(B E_in)^{-1}`.
    pub bc_inv: RMat,
    /// `B E_out`.
    pub b_out: RMat,
}

impl CharacteristicSplit {
    pub fn new(sys: &SystemSpec) -> Result<Self> {
        let n = sys.n;
        let ad = sys.a(sys.d);
        let ev = linalg::eigenvalues(ad);
        let scale = ev.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        let mut lambda = Vec::with_capacity(n);
        let mut e = RMat::zeros(n, n);
        let mut col = 0;
        for c in linalg::cluster(&ev, 1e-9 * scale) {
            if c.value.im.abs() > 1e-9 * scale {
                return Err(Error::InvalidInput("A_d(0) has nonreal eigenvalues".into()));
            }
            let shifted = linalg::to_complex(&(ad - RMat::identity(n, n) * c.value.re));
            let basis = linalg::canonical_basis(&linalg::nullspace_c(&shifted, c.count));
            for k in 0..c.count {
                let v: Vec<f64> = (0..n).map(|i| basis[(i, k)].re).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for i in 0..n {
                    e[(i, col)] = v[i] / norm;
                }
                lambda.push(c.value.re);
                col += 1;
            }
        }
        if col != n {
            return Err(Error::NotSemisimple { value: "A_d(0)".into(), deficit: n - col });
        }
        let e_inv = linalg::inverse(&e).ok_or(Error::CharacteristicBoundary { det: e.determinant() })?;
        let incoming: Vec<usize> = (0..n).filter(|&i| lambda[i] > 0.0).collect();
        let outgoing: Vec<usize> = (0..n).filter(|&i| lambda[i] <= 0.0).collect();
        if incoming.len() != sys.p {
            return Err(Error::InvalidInput(format!("{} incoming characteristics but {} boundary rows", incoming.len(), sys.p)));
        }
        let bin = RMat::from_fn(sys.p, incoming.len(), |i, k| (0..n).map(|l| sys.b0[(i, l)] * e[(l, incoming[k])]).sum());
        let b_out = RMat::from_fn(sys.p, outgoing.len(), |i, k| (0..n).map(|l| sys.b0[(i, l)] * e[(l, outgoing[k])]).sum());
        let svals = linalg::singular_values(&bin);
        let smin = svals.last().copied().unwrap_or(1.0);
        let bc_inv = linalg::inverse(&bin).ok_or(Error::DegenerateBasis { sigma_min: smin })?;
        Ok(Self { lambda, e, e_inv, incoming, outgoing, bc_inv, b_out })
    }

    pub fn max_speed(&self) -> f64 {
        self.lambda.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    /// `E_in L_in (w_in - w_in*)` with `B u* = g`, outgoing parts kept.
    pub fn left_penalty(&self, u: &[f64], g: &[f64], out: &mut [f64]) {
        let n = self.lambda.len();
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|l| self.e_inv[(i, l)] * u[l]).sum()).collect();
        let mut rhs = g.to_vec();
        for (r, row) in rhs.iter_mut().enumerate() {
            for (k, &o) in self.outgoing.iter().enumerate() {
                *row -= self.b_out[(r, k)] * w[o];
            }
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for (k, &i) in self.incoming.iter().enumerate() {
            let target: f64 = (0..rhs.len()).map(|r| self.bc_inv[(k, r)] * rhs[r]).sum();
            let amp = self.lambda[i] * (w[i] - target);
            for l in 0..n {
                out[l] += self.e[(l, i)] * amp;
            }
        }
    }

    /// Complex counterpart of [`left_penalty`](Self::left_penalty).
    pub fn left_penalty_c(&self, u: &[C64], g: &[C64], out: &mut [C64]) {
        let n = self.lambda.len();
        let w: Vec<C64> = (0..n).map(|i| (0..n).map(|l| u[l] * self.e_inv[(i, l)]).sum()).collect();
        let mut rhs = g.to_vec();
        for (r, row) in rhs.iter_mut().enumerate() {
            for (k, &o) in self.outgoing.iter().enumerate() {
                *row -= w[o] * self.b_out[(r, k)];
            }
        }
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (k, &i) in self.incoming.iter().enumerate() {
            let target: C64 = (0..rhs.len()).map(|r| rhs[r] * self.bc_inv[(k, r)]).sum();
            let amp = (w[i] - target) * self.lambda[i];
            for l in 0..n {
                out[l] += amp * self.e[(l, i)];
            }
        }
    }

    /// `E_out |L_out| w_out`: drives the components entering at the far end to zero.
    pub fn right_penalty(&self, u: &[f64], out: &mut [f64]) {
        let n = self.lambda.len();
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in &self.outgoing {
            let w: f64 = (0..n).map(|l| self.e_inv[(i, l)] * u[l]).sum();
            let amp = self.lambda[i].abs() * w;
            for l in 0..n {
                out[l] += self.e[(l, i)] * amp;
            }
        }
    }

    pub fn right_penalty_c(&self, u: &[C64], out: &mut [C64]) {
        let n = self.lambda.len();
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for &i in &self.outgoing {
            let w: C64 = (0..n).map(|l| u[l] * self.e_inv[(i, l)]).sum();
            let amp = w * self.lambda[i].abs();
            for l in 0..n {
                out[l] += amp * self.e[(l, i)];
            }
        }
    }
}

/// Checks the solvers' standing restrictions: two space dimensions and
/// `A_0(v) = I` for all states.
pub fn check_solver_support(sys: &SystemSpec) -> Result<()> {
    if sys.d != 2 {
        return Err(Error::InvalidInput(format!("solvers support d = 2 only, got d = {}", sys.d)));
    }
    let n = sys.n;
    let mut probe = vec![0.0; n];
    for (i, p) in probe.iter_mut().enumerate() {
        *p = 0.01 * (i as f64 + 1.0);
    }
    for v in [vec![0.0; n], probe] {
        let a0 = sys.a_at(0, &v);
        if (a0 - RMat::identity(n, n)).abs().max() > 1e-12 {
            return Err(Error::InvalidInput("solvers require A_0 = I".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler2d() -> SystemSpec {
        SystemSpec::euler(2, 1.0, 1.0, vec![1.0, 0.5, -0.4]).unwrap()
    }

    #[test]
    fn euler2d_noncharacteristic() {
        let r = check_noncharacteristic(&euler2d()).unwrap();
        let expect = [-1.4, -0.4, 0.6];
        for (a, b) in r.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.p, 1);
        assert!(r.pass);
    }

    #[test]
    fn analytic_derivative_matches_difference() {
        let sys = euler2d();
        let model = EulerModel::new(2, 0.7, 1.4, vec![1.2, 0.5, -0.4]);
        let w = [0.3, -0.2, 0.7];
        for j in 0..3 {
            let mut exact = vec![0.0; 9];
            model.da_into(j, &w, &mut exact);
            let h = 1e-6;
            let mut ap = vec![0.0; 9];
            let mut am = vec![0.0; 9];
            model.a_into(j, &w.map(|x| h * x), &mut ap);
            model.a_into(j, &w.map(|x| -h * x), &mut am);
            for i in 0..9 {
                assert!(((ap[i] - am[i]) / (2.0 * h) - exact[i]).abs() < 1e-7);
            }
        }
        assert_eq!(sys.p, 1);
    }

    #[test]
    fn zero_frequency_rejected() {
        assert!(FrequencyPoint::new(0.0, 0.0, vec![0.0]).is_err());
    }

    #[test]
    fn stable_dimension_off_axis() {
        let sys = euler2d();
        let z = FrequencyPoint::new(1.0, 0.1, vec![0.0]).unwrap();
        assert_eq!(stable_subspace(&sys, &z).unwrap().ncols(), 1);
    }
}
