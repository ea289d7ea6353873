//! Modes of a boundary frequency: eigenvalues of `-A_d^{-1}(tau I + sum eta_j A_j)`,
//! their classification, and the projector algebra they induce on `C^N`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::system::SystemSpec;

/// Class of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModeClass {
    /// Real, group velocity pointing into the domain.
    Incoming,
    /// Real, group velocity pointing out of the domain.
    Outgoing,
    /// `Im omega > 0`: decays into the interior.
    Decaying,
    /// `Im omega < 0`.
    Growing,
}

impl ModeClass {
    pub fn is_hyperbolic(self) -> bool {
        matches!(self, ModeClass::Incoming | ModeClass::Outgoing)
    }
    pub fn is_elliptic(self) -> bool {
        !self.is_hyperbolic()
    }
    pub fn label(self) -> &'static str {
        match self {
            ModeClass::Incoming => "I",
            ModeClass::Outgoing => "O",
            ModeClass::Decaying => "P",
            ModeClass::Growing => "N",
        }
    }
    /// Whether `n` lies in the sign lattice `{n : n Im omega >= 0}`.
    pub fn admits(self, n: i64) -> bool {
        match self {
            ModeClass::Incoming | ModeClass::Outgoing => true,
            ModeClass::Decaying => n >= 0,
            ModeClass::Growing => n <= 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mode {
    pub omega: C64,
    pub multiplicity: usize,
    pub class: ModeClass,
    /// Right eigenvectors `r_{m,k}` (kernel of `L(d phi_m)`).
    pub r: Vec<Vec<C64>>,
    /// Left vectors with `l_{m,k} . r_{m',k'} = delta` (no conjugation).
    pub l: Vec<Vec<C64>>,
    /// Coefficients `c_j` of `X = d_{x_d} + sum_{j<d} c_j d_{x_j}`, `j = 0` being time.
    pub x_field: Vec<C64>,
    /// `(1, grad lambda_{k_m})` for real modes.
    pub group_velocity: Option<Vec<f64>>,
    /// `d lambda_{k_m} / d xi_d` for real modes.
    pub slope: Option<f64>,
    /// Index of the branch with `lambda_k(eta, omega) = -tau` (0-based).
    pub branch: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTable {
    pub beta: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub modes: Vec<Mode>,
    #[serde(skip)]
    pub projectors: Vec<CMat>,
}

impl ModeTable {
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn omegas(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.omega).collect()
    }
    pub fn classes(&self) -> Vec<ModeClass> {
        self.modes.iter().map(|m| m.class).collect()
    }
    pub fn indices_of(&self, pred: impl Fn(ModeClass) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&m| pred(self.modes[m].class)).collect()
    }

    /// Group velocity of mode `m`, defined for real modes only.
    pub fn group_velocity(&self, m: usize) -> Result<Vec<f64>> {
        self.modes.get(m).ok_or_else(|| Error::InvalidInput(format!("no mode {m}")))?.group_velocity.clone().ok_or(Error::NotHyperbolicMode(m))
    }

    /// `(m, k)` pairs in the canonical order used for stacked bases.
    pub fn components(&self, pred: impl Fn(ModeClass) -> bool) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (m, mode) in self.modes.iter().enumerate() {
            if pred(mode.class) {
                for k in 0..mode.multiplicity {
                    out.push((m, k));
                }
            }
        }
        out
    }

    /// Columns `r_{m,k}` for `m` incoming or decaying: a basis of the stable
    /// subspace on the boundary frequency.
    pub fn stable_basis(&self) -> CMat {
        let comps = self.components(|c| matches!(c, ModeClass::Incoming | ModeClass::Decaying));
        self.stack(&comps)
    }

    pub fn stack(&self, comps: &[(usize, usize)]) -> CMat {
        let mut out = CMat::zeros(self.n, comps.len());
        for (c, &(m, k)) in comps.iter().enumerate() {
            for i in 0..self.n {
                out[(i, c)] = self.modes[m].r[k][i];
            }
        }
        out
    }

    /// `P_{m,k} v = (l_{m,k} . v) r_{m,k}` as a matrix.
    pub fn component_projector(&self, m: usize, k: usize) -> CMat {
        let r = &self.modes[m].r[k];
        let l = &self.modes[m].l[k];
        CMat::from_fn(self.n, self.n, |i, j| r[i] * l[j])
    }

    /// Smallest distance to glancing: `|d lambda/d xi_d|` for real modes and
    /// relative `|Im omega|` for nonreal ones.
    pub fn min_glancing_distance(&self) -> f64 {
        let scale = self.modes.iter().map(|m| m.omega.norm()).fold(1e-300, f64::max);
        self.modes
            .iter()
            .map(|m| match m.slope {
                Some(s) => s.abs(),
                None => m.omega.im.abs() / scale,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `L(d phi_m) = tau I + sum eta_j A_j + omega_m A_d`.
    pub fn l_of_phase(&self, sys: &SystemSpec, m: usize) -> CMat {
        let mut xi: Vec<C64> = self.beta[1..].iter().map(|x| C64::new(*x, 0.0)).collect();
        xi.push(self.modes[m].omega);
        sys.l_symbol(C64::new(self.beta[0], 0.0), &xi)
    }
}

/// `-A_d^{-1}(tau I + sum eta_j A_j)` for `beta = (tau, eta)`.
pub fn boundary_matrix(sys: &SystemSpec, beta: &[f64]) -> crate::linalg::RMat {
    let mut m = crate::linalg::RMat::identity(sys.n, sys.n) * beta[0];
    for (j, e) in beta[1..].iter().enumerate() {
        m += sys.a(j + 1) * *e;
    }
    -(sys.ad_inv() * m)
}

struct RawCluster {
    omega: C64,
    mult: usize,
    real: bool,
}

fn clusters_at(sys: &SystemSpec, beta: &[f64]) -> Result<Vec<RawCluster>> {
    let m = boundary_matrix(sys, beta);
    let ev = linalg::eigenvalues(&m);
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-8 * scale;
    let mut out = Vec::new();
    for c in linalg::cluster(&ev, tol) {
        let real = c.value.im.abs() <= tol;
        let omega = if real { C64::new(c.value.re, 0.0) } else { c.value };
        out.push(RawCluster { omega, mult: c.count, real });
    }
    Ok(out)
}

fn pattern(cl: &[RawCluster]) -> Vec<(usize, bool)> {
    let mut p: Vec<(usize, bool)> = cl.iter().map(|c| (c.mult, c.real)).collect();
    p.sort();
    p
}

/// Realifies a basis of a real subspace: the RREF of any spanning set of a
/// real subspace is real, so only rounding noise is removed.
fn real_basis(k: &CMat) -> CMat {
    let b = linalg::canonical_basis(k);
    b.map(|z| C64::new(z.re, 0.0))
}

/// Computes the mode table at the boundary frequency `beta = (tau, eta)`.
pub fn compute_modes(sys: &SystemSpec, beta: &[f64]) -> Result<ModeTable> {
    compute_modes_with(sys, beta, 1e-6, 4, 11)
}

/// As [`compute_modes`] with explicit glancing tolerance and number of random
/// perturbation directions used to test local constancy of the multiplicities.
pub fn compute_modes_with(sys: &SystemSpec, beta: &[f64], glancing_tol: f64, perturbations: usize, seed: u64) -> Result<ModeTable> {
    if beta.len() != sys.d {
        return Err(Error::InvalidInput(format!("beta must have length {}", sys.d)));
    }
    if beta.iter().all(|x| *x == 0.0) {
        return Err(Error::InvalidInput("beta must be nonzero".into()));
    }
    let n = sys.n;
    let mb = linalg::to_complex(&boundary_matrix(sys, beta));
    let raw = clusters_at(sys, beta)?;

    // Local constancy of the multiplicity pattern under small perturbations.
    let base_pattern = pattern(&raw);
    let bnorm = beta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..perturbations {
        let pb: Vec<f64> = beta.iter().map(|b| b + 1e-5 * bnorm * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        let p = pattern(&clusters_at(sys, &pb)?);
        if p != base_pattern {
            return Err(Error::IrregularFrequency(format!("multiplicity pattern {base_pattern:?} changes to {p:?} near beta")));
        }
    }

    // Right bases; pairs of conjugate modes share a conjugated basis.
    let mut rbases: Vec<CMat> = Vec::with_capacity(raw.len());
    for (i, c) in raw.iter().enumerate() {
        let shifted = &mb - CMat::identity(n, n) * c.omega;
        let rank = linalg::rank_c(&shifted, 1e-8);
        if n - rank < c.mult {
            return Err(Error::NotSemisimple { value: format!("{}", c.omega), deficit: c.mult - (n - rank) });
        }
        let basis = if c.real {
            real_basis(&linalg::nullspace_c(&shifted, c.mult))
        } else if c.omega.im < 0.0 {
            // Conjugate of the partner with positive imaginary part.
            let partner = raw.iter().position(|o| !o.real && (o.omega - c.omega.conj()).norm() <= 1e-6 * (1.0 + c.omega.norm()));
            match partner {
                Some(j) if j < i => rbases[j].map(|z| z.conj()),
                _ => {
                    let sh = &mb - CMat::identity(n, n) * c.omega.conj();
                    linalg::canonical_basis(&linalg::nullspace_c(&sh, c.mult)).map(|z| z.conj())
                }
            }
        } else {
            linalg::canonical_basis(&linalg::nullspace_c(&shifted, c.mult))
        };
        rbases.push(basis);
    }

    let mut all = CMat::zeros(n, n);
    let mut col = 0;
    for b in &rbases {
        for k in 0..b.ncols() {
            all.set_column(col, &b.column(k));
            col += 1;
        }
    }
    if col != n {
        return Err(Error::NotSemisimple { value: "total".into(), deficit: n - col });
    }
    let inv = linalg::inverse_c(&all).ok_or(Error::NotSemisimple { value: "basis".into(), deficit: 1 })?;

    let tilde: Vec<CMat> = (0..sys.d).map(|j| if j == 0 { linalg::to_complex(sys.ad_inv()) } else { linalg::to_complex(&sys.tilde_a(j)) }).collect();

    let mut modes = Vec::with_capacity(raw.len());
    let mut projectors = Vec::with_capacity(raw.len());
    let mut col = 0;
    for (c, basis) in raw.iter().zip(&rbases) {
        let r: Vec<Vec<C64>> = (0..c.mult).map(|k| basis.column(k).iter().copied().collect()).collect();
        let l: Vec<Vec<C64>> = (0..c.mult).map(|k| inv.row(col + k).iter().copied().collect()).collect();
        col += c.mult;
        let mut p = CMat::zeros(n, n);
        for k in 0..c.mult {
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] += r[k][i] * l[k][j];
                }
            }
        }
        let x_field: Vec<C64> = tilde.iter().map(|t| linalg::dot_nc(&l[0], &linalg::mat_vec_c(t, &r[0]))).collect();

        let (class, group_velocity, slope, branch) = if c.real {
            let slope = 1.0 / x_field[0].re;
            if !slope.is_finite() || slope.abs() < glancing_tol {
                return Err(Error::GlancingMode { omega: c.omega.re, slope });
            }
            let mut gv = vec![1.0];
            for j in 1..sys.d {
                gv.push(x_field[j].re * slope);
            }
            gv.push(slope);
            let class = if slope > 0.0 { ModeClass::Incoming } else { ModeClass::Outgoing };
            (class, Some(gv), Some(slope), Some(branch_index(sys, beta, c.omega.re)?))
        } else if c.omega.im > 0.0 {
            (ModeClass::Decaying, None, None, None)
        } else {
            (ModeClass::Growing, None, None, None)
        };
        modes.push(Mode { omega: c.omega, multiplicity: c.mult, class, r, l, x_field, group_velocity, slope, branch });
        projectors.push(p);
    }
    Ok(ModeTable { beta: beta.to_vec(), n, d: sys.d, modes, projectors })
}

/// Index `k` of the eigenvalue `lambda_k(eta, omega) = -tau` among the
/// ascending distinct eigenvalues of `sum eta_j A_j + omega A_d`.
fn branch_index(sys: &SystemSpec, beta: &[f64], omega: f64) -> Result<usize> {
    let mut xi = beta[1..].to_vec();
    xi.push(omega);
    let sym = sys.symbol(&vec![0.0; sys.n], &xi);
    let ev = linalg::eigenvalues(&sym);
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(beta[0].abs()).max(1e-300);
    let cl = linalg::cluster(&ev, 1e-8 * scale);
    cl.iter()
        .position(|c| (c.value.re + beta[0]).abs() <= 1e-8 * scale)
        .ok_or_else(|| Error::InvalidInput(format!("no branch with lambda = -tau at omega = {omega}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub sum_identity: f64,
    pub idempotent: f64,
    pub orthogonal: f64,
    pub biorthogonal: f64,
    pub kernel: f64,
    /// Max over modes of `|rank(A_d^{-1} L(d phi_m)) + rank(P_m) - N|`.
    pub range_kernel_rank_gap: usize,
    /// Distance between the range of `A_d^{-1} L(d phi_m)` and `ker P_m`.
    pub range_kernel: f64,
    pub real_bases: f64,
    pub conjugate_pairs: f64,
}

impl DecompositionReport {
    pub fn max_error(&self) -> f64 {
        [self.sum_identity, self.idempotent, self.orthogonal, self.biorthogonal, self.kernel, self.range_kernel, self.real_bases, self.conjugate_pairs]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Measures every identity of the `C^N` decomposition for a mode table.
pub fn decomposition_report(sys: &SystemSpec, mt: &ModeTable) -> DecompositionReport {
    let n = mt.n;
    let id = CMat::identity(n, n);
    let sum: CMat = mt.projectors.iter().fold(CMat::zeros(n, n), |a, p| a + p);
    let sum_identity = (sum - &id).camax();
    let mut idempotent: f64 = 0.0;
    let mut orthogonal: f64 = 0.0;
    for (i, p) in mt.projectors.iter().enumerate() {
        idempotent = idempotent.max((p * p - p).camax());
        for (j, q) in mt.projectors.iter().enumerate() {
            if i != j {
                orthogonal = orthogonal.max((p * q).camax());
            }
        }
    }
    let comps = mt.components(|_| true);
    let mut biorthogonal: f64 = 0.0;
    for &(m, k) in &comps {
        for &(m2, k2) in &comps {
            let v = linalg::dot_nc(&mt.modes[m].l[k], &mt.modes[m2].r[k2]);
            let target = if (m, k) == (m2, k2) { 1.0 } else { 0.0 };
            biorthogonal = biorthogonal.max((v - target).norm());
        }
    }
    let mut kernel: f64 = 0.0;
    let mut range_kernel: f64 = 0.0;
    let mut gap = 0usize;
    let mut real_bases: f64 = 0.0;
    let ad_inv = linalg::to_complex(sys.ad_inv());
    for (m, mode) in mt.modes.iter().enumerate() {
        let l = mt.l_of_phase(sys, m);
        let scale = l.norm().max(1.0);
        for r in &mode.r {
            kernel = kernel.max(linalg::vec_norm(&linalg::mat_vec_c(&l, r)) / scale);
            if mode.class.is_hyperbolic() {
                real_bases = real_bases.max(r.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
            }
        }
        let img = &ad_inv * &l;
        let rank_img = linalg::rank_c(&img, 1e-8);
        let rank_p = linalg::rank_c(&mt.projectors[m], 1e-8);
        gap = gap.max((rank_img + rank_p).abs_diff(n));
        // P_m annihilates the range of A_d^{-1} L(d phi_m).
        range_kernel = range_kernel.max((&mt.projectors[m] * &img).camax() / img.camax().max(1e-300));
    }
    let mut conjugate_pairs: f64 = 0.0;
    for mode in mt.modes.iter().filter(|m| m.class == ModeClass::Decaying) {
        match mt.modes.iter().find(|o| o.class == ModeClass::Growing && (o.omega - mode.omega.conj()).norm() < 1e-8 * (1.0 + mode.omega.norm())) {
            Some(o) => {
                for (a, b) in mode.r.iter().zip(&o.r) {
                    for (x, y) in a.iter().zip(b) {
                        conjugate_pairs = conjugate_pairs.max((x.conj() - y).norm());
                    }
                }
            }
            None => conjugate_pairs = f64::INFINITY,
        }
    }
    DecompositionReport { sum_identity, idempotent, orthogonal, biorthogonal, kernel, range_kernel_rank_gap: gap, range_kernel, real_bases, conjugate_pairs }
}

/// Condition data for the boundary bases `{B r_{m,k}}`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryBasisReport {
    pub plus_count: usize,
    pub minus_count: usize,
    pub sigma_min_plus: f64,
    pub sigma_min_minus: f64,
    pub cond_plus: f64,
    pub cond_minus: f64,
}

/// Checks that `{B r_{m,k}}` over incoming+decaying modes, and over
/// incoming+growing modes, are bases of `C^p`.
pub fn boundary_basis_check(mt: &ModeTable, sys: &SystemSpec, margin: f64) -> Result<BoundaryBasisReport> {
    let b = linalg::to_complex(&sys.b0);
    let plus = mt.components(|c| matches!(c, ModeClass::Incoming | ModeClass::Decaying));
    let minus = mt.components(|c| matches!(c, ModeClass::Incoming | ModeClass::Growing));
    let measure = |comps: &[(usize, usize)]| -> Result<(f64, f64)> {
        if comps.len() != sys.p {
            return Err(Error::DegenerateBasis { sigma_min: 0.0 });
        }
        if sys.p == 0 {
            return Ok((f64::INFINITY, 1.0));
        }
        let m = &b * mt.stack(comps);
        let s = linalg::singular_values_c(&m);
        let smin = *s.last().unwrap();
        Ok((smin, s[0] / smin))
    };
    let (sp, cp) = measure(&plus)?;
    let (sm, cm) = measure(&minus)?;
    if sp < margin || sm < margin {
        return Err(Error::DegenerateBasis { sigma_min: sp.min(sm) });
    }
    Ok(BoundaryBasisReport { plus_count: plus.len(), minus_count: minus.len(), sigma_min_plus: sp, sigma_min_minus: sm, cond_plus: cp, cond_minus: cm })
}

/// `Im omega_m(tau - i gamma, eta)` for the eigenvalue continuing `omega_m`.
pub fn damped_imaginary_part(sys: &SystemSpec, mt: &ModeTable, m: usize, gamma: f64) -> f64 {
    let mut a = CMat::identity(sys.n, sys.n) * C64::new(mt.beta[0], -gamma);
    for (j, e) in mt.beta[1..].iter().enumerate() {
        a += linalg::to_complex(sys.a(j + 1)) * C64::new(*e, 0.0);
    }
    let m_mat = -(linalg::to_complex(sys.ad_inv()) * a);
    let ev = linalg::eigenvalues_c(&m_mat);
    let target = mt.modes[m].omega;
    ev.into_iter().min_by(|x, y| (x - target).norm().partial_cmp(&(y - target).norm()).unwrap()).map(|z| z.im).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler2d() -> SystemSpec {
        SystemSpec::euler(2, 1.0, 1.0, vec![1.0, 0.5, -0.4]).unwrap()
    }

    #[test]
    fn hyperbolic_fixture_is_all_real() {
        let mt = compute_modes(&euler2d(), &[2.0, 1.0]).unwrap();
        assert_eq!(mt.len(), 3);
        assert!(mt.modes.iter().all(|m| m.class.is_hyperbolic()));
        assert_eq!(mt.indices_of(|c| c == ModeClass::Incoming).len(), 1);
    }

    #[test]
    fn elliptic_fixture_has_pair() {
        let mt = compute_modes(&euler2d(), &[0.0, 1.0]).unwrap();
        let classes = mt.classes();
        assert!(classes.contains(&ModeClass::Decaying));
        assert!(classes.contains(&ModeClass::Growing));
        assert_eq!(classes.iter().filter(|c| c.is_hyperbolic()).count(), 1);
    }

    #[test]
    fn decomposition_holds() {
        let sys = euler2d();
        for beta in [[2.0, 1.0], [0.0, 1.0], [-1.0, 0.3]] {
            let mt = compute_modes(&sys, &beta).unwrap();
            let r = decomposition_report(&sys, &mt);
            assert!(r.max_error() < 1e-10, "{beta:?}: {r:?}");
            assert_eq!(r.range_kernel_rank_gap, 0);
        }
    }
}
