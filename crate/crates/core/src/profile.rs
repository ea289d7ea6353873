//! Leading profile: the mean `v(x)` and single-phase amplitudes
//! `sigma_{m,k}(x, theta_m) = sum_j a_j(x) e^{i j theta_m}` on a uniform
//! `(t, y, x_d)` grid, the interaction plan obtained by projecting the
//! quadratic terms, the boundary traces, and the Picard iteration for the
//! hyperbolic subsystem.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::linalg::{self, CMat, RMat};
use crate::modes::{ModeClass, ModeTable};
use crate::numerics::{cubic_weights, Sbp4, Spectral};
use crate::resonance::ResonanceSet;
use crate::system::{check_solver_support, CharacteristicSplit, SystemSpec};
use crate::trig::TrigPolynomial;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Uniform grid shared by all profile fields: `t in [0, t_final]`,
/// periodic `y` of length `y_len`, `x_d in [0, x_len]`, harmonics up to
/// `n_theta`, elliptic cutoff depth `depth`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileGrid {
    pub t_final: f64,
    pub dt: f64,
    pub nt: usize,
    pub x_len: f64,
    pub dx: f64,
    pub nx: usize,
    pub ny: usize,
    pub y_len: f64,
    pub n_theta: i64,
    pub depth: f64,
}

impl ProfileGrid {
    pub fn new(t_final: f64, dt: f64, x_len: f64, dx: f64, ny: usize, y_len: f64, n_theta: i64, depth: f64) -> Result<Self> {
        for (name, v) in [("t_final", t_final), ("dt", dt), ("x_len", x_len), ("dx", dx), ("y_len", y_len), ("depth", depth)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if ny == 0 || n_theta < 1 {
            return Err(Error::InvalidInput("need ny >= 1 and n_theta >= 1".into()));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidInput("dt must divide t_final".into()));
        }
        let cells = (x_len / dx).round();
        if (cells * dx - x_len).abs() > 1e-9 * x_len {
            return Err(Error::InvalidInput("dx must divide x_len".into()));
        }
        let nx = cells as usize + 1;
        if nx < 8 {
            return Err(Error::InvalidInput("need at least 8 points in x_d".into()));
        }
        Ok(Self { t_final, dt, nt: steps as usize + 1, x_len, dx, nx, ny, y_len, n_theta, depth })
    }

    /// Points per time level.
    pub fn points(&self) -> usize {
        self.nx * self.ny
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.y_len / self.ny as f64
    }
}

/// A single-phase sector: the mean or harmonic `j` of phase `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Key {
    Mean,
    Wave { m: usize, j: i64 },
}

/// Enumeration of the scalar fields ("slots") making up a profile: the `N`
/// mean components, then `a_{m,k,j}` for every mode, component and admissible
/// harmonic.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n: usize,
    pub modes: usize,
    pub n_theta: i64,
    pub keys: Vec<Key>,
    pub key_slots: Vec<Vec<usize>>,
    /// `(key index, component)` of each slot.
    pub slot_key: Vec<(usize, usize)>,
    pub classes: Vec<ModeClass>,
    index: BTreeMap<Key, usize>,
}

impl Layout {
    pub fn new(mt: &ModeTable, n_theta: i64) -> Self {
        let mut keys = vec![Key::Mean];
        for (m, mode) in mt.modes.iter().enumerate() {
            for j in -n_theta..=n_theta {
                if j != 0 && mode.class.admits(j) {
                    keys.push(Key::Wave { m, j });
                }
            }
        }
        let mut key_slots = Vec::new();
        let mut slot_key = Vec::new();
        let mut index = BTreeMap::new();
        for (ki, key) in keys.iter().enumerate() {
            let count = match key {
                Key::Mean => mt.n,
                Key::Wave { m, .. } => mt.modes[*m].multiplicity,
            };
            let mut slots = Vec::new();
            for k in 0..count {
                slots.push(slot_key.len());
                slot_key.push((ki, k));
            }
            key_slots.push(slots);
            index.insert(*key, ki);
        }
        Self { n: mt.n, modes: mt.len(), n_theta, keys, key_slots, slot_key, classes: mt.classes(), index }
    }

    pub fn nslots(&self) -> usize {
        self.slot_key.len()
    }

    pub fn key_index(&self, key: Key) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn slot(&self, m: usize, k: usize, j: i64) -> Option<usize> {
        self.key_index(Key::Wave { m, j }).and_then(|ki| self.key_slots[ki].get(k).copied())
    }

    pub fn mean_slot(&self, i: usize) -> usize {
        self.key_slots[0][i]
    }

    /// Multi-index of a key: `0` or `j e_m`.
    pub fn alpha(&self, ki: usize) -> Vec<i64> {
        let mut a = vec![0; self.modes];
        if let Key::Wave { m, j } = self.keys[ki] {
            a[m] = j;
        }
        a
    }

    pub fn is_hyperbolic_key(&self, ki: usize) -> bool {
        match self.keys[ki] {
            Key::Mean => true,
            Key::Wave { m, .. } => self.classes[m].is_hyperbolic(),
        }
    }

    /// Vectors multiplying the slot amplitudes of a key (`e_i` or `r_{m,k}`).
    pub fn basis(&self, mt: &ModeTable, ki: usize) -> Vec<Vec<C64>> {
        match self.keys[ki] {
            Key::Mean => (0..self.n).map(|i| (0..self.n).map(|l| C64::new(if l == i { 1.0 } else { 0.0 }, 0.0)).collect()).collect(),
            Key::Wave { m, .. } => mt.modes[m].r.clone(),
        }
    }

    /// Vectors extracting slot amplitudes (`e_i` or `l_{m,k}`).
    pub fn dual(&self, mt: &ModeTable, ki: usize) -> Vec<Vec<C64>> {
        match self.keys[ki] {
            Key::Mean => self.basis(mt, ki),
            Key::Wave { m, .. } => mt.modes[m].l.clone(),
        }
    }
}

/// `Q(u) = sum_{j<d} beta_j dÃ_j(0) . u` on the canonical basis.
pub fn q_basis(sys: &SystemSpec, beta: &[f64]) -> Vec<RMat> {
    (0..sys.n)
        .map(|i| {
            let mut e = vec![0.0; sys.n];
            e[i] = 1.0;
            let mut q = RMat::zeros(sys.n, sys.n);
            for (j, b) in beta.iter().enumerate().take(sys.d) {
                q += sys.d_tilde_a(j, &e) * *b;
            }
            q
        })
        .collect()
}

/// `Q(u) v` for complex `u`, `v`.
pub fn q_apply(q: &[RMat], u: &[C64], v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let mut out = vec![ZERO; n];
    for (i, qi) in q.iter().enumerate() {
        if u[i] == ZERO {
            continue;
        }
        for r in 0..n {
            let s: C64 = (0..n).map(|c| v[c] * qi[(r, c)]).sum();
            out[r] += u[i] * s;
        }
    }
    out
}

/// A quadratic contribution `-dual_t . Q(V_first) (d_theta V_second)` whose
/// frequency sum lands on the single-phase sector `target`.
#[derive(Debug, Clone)]
pub struct PairTerm {
    pub first: usize,
    pub second: usize,
    pub target: usize,
    /// `[target comp][first comp][second comp]`, including the factor `i s`.
    pub coeff: Vec<C64>,
}

/// `dual_t . F(0) basis` within one key.
#[derive(Debug, Clone)]
pub struct LinearTerm {
    pub key: usize,
    pub coeff: Vec<C64>,
}

/// Right-hand sides of the projected profile equations, obtained by applying
/// the single-phase projectors to every product of two single-phase terms.
#[derive(Debug, Clone)]
pub struct InteractionPlan {
    pub pairs: Vec<PairTerm>,
    pub linear: Vec<LinearTerm>,
}

impl InteractionPlan {
    pub fn build(sys: &SystemSpec, mt: &ModeTable, rs: &ResonanceSet, layout: &Layout) -> Result<Self> {
        let q = q_basis(sys, &mt.beta);
        let nk = layout.keys.len();
        let bases: Vec<Vec<Vec<C64>>> = (0..nk).map(|k| layout.basis(mt, k)).collect();
        let duals: Vec<Vec<Vec<C64>>> = (0..nk).map(|k| layout.dual(mt, k)).collect();
        let alphas: Vec<Vec<i64>> = (0..nk).map(|k| layout.alpha(k)).collect();
        let mut pairs = Vec::new();
        for k1 in 0..nk {
            for k2 in 1..nk {
                let alpha: Vec<i64> = alphas[k1].iter().zip(&alphas[k2]).map(|(a, b)| a + b).collect();
                let target = if alpha.iter().all(|a| *a == 0) {
                    Some(0)
                } else {
                    match rs.lookup(&alpha)? {
                        Some((m, n)) => layout.key_index(Key::Wave { m, j: n }),
                        None => None,
                    }
                };
                let Some(target) = target else { continue };
                let s2: i64 = alphas[k2].iter().sum();
                let fac = C64::new(0.0, s2 as f64);
                let (nt, n1, n2) = (duals[target].len(), bases[k1].len(), bases[k2].len());
                let mut coeff = vec![ZERO; nt * n1 * n2];
                let mut any = false;
                for a in 0..n1 {
                    for b in 0..n2 {
                        let w = q_apply(&q, &bases[k1][a], &bases[k2][b]);
                        for t in 0..nt {
                            let c = linalg::dot_nc(&duals[target][t], &w) * fac;
                            if c.norm() > 1e-15 {
                                any = true;
                            }
                            coeff[(t * n1 + a) * n2 + b] = c;
                        }
                    }
                }
                if any {
                    pairs.push(PairTerm { first: k1, second: k2, target, coeff });
                }
            }
        }
        let f0 = linalg::to_complex(&sys.f0);
        let mut linear = Vec::new();
        if sys.f0.abs().max() > 0.0 {
            for k in 0..nk {
                let nb = bases[k].len();
                let mut coeff = vec![ZERO; nb * nb];
                for a in 0..nb {
                    let w = linalg::mat_vec_c(&f0, &bases[k][a]);
                    for t in 0..nb {
                        coeff[t * nb + a] = linalg::dot_nc(&duals[k][t], &w);
                    }
                }
                linear.push(LinearTerm { key: k, coeff });
            }
        }
        Ok(Self { pairs, linear })
    }

    /// `out[slot] = F(0) prev - sum Q(prev) d_theta cur` on the slots of keys
    /// flagged in `targets`. Arrays are slot-major with `np` points per slot.
    pub fn eval(&self, layout: &Layout, prev: &[C64], cur: &[C64], np: usize, targets: &[bool], interactions: bool, out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = ZERO);
        for lt in &self.linear {
            if !targets[lt.key] {
                continue;
            }
            let slots = &layout.key_slots[lt.key];
            let nb = slots.len();
            for (t, &st) in slots.iter().enumerate() {
                for (a, &sa) in slots.iter().enumerate() {
                    let c = lt.coeff[t * nb + a];
                    if c == ZERO {
                        continue;
                    }
                    for ip in 0..np {
                        out[st * np + ip] += c * prev[sa * np + ip];
                    }
                }
            }
        }
        if !interactions {
            return;
        }
        for pt in &self.pairs {
            if !targets[pt.target] {
                continue;
            }
            let ts = &layout.key_slots[pt.target];
            let s1 = &layout.key_slots[pt.first];
            let s2 = &layout.key_slots[pt.second];
            let (n1, n2) = (s1.len(), s2.len());
            for (t, &st) in ts.iter().enumerate() {
                for (a, &sa) in s1.iter().enumerate() {
                    for (b, &sb) in s2.iter().enumerate() {
                        let c = pt.coeff[(t * n1 + a) * n2 + b];
                        if c == ZERO {
                            continue;
                        }
                        let (p1, p2) = (&prev[sa * np..(sa + 1) * np], &cur[sb * np..(sb + 1) * np]);
                        let o = &mut out[st * np..(st + 1) * np];
                        for ip in 0..np {
                            o[ip] -= c * p1[ip] * p2[ip];
                        }
                    }
                }
            }
        }
    }
}

/// Solves the boundary condition for the traces entering the domain at each
/// `theta_0` harmonic: `B [r_{I u P}] sigma = G_n - B [r_O] sigma_out` for
/// `n > 0`, with `N` in place of `P` for `n < 0`.
#[derive(Debug, Clone)]
pub struct BoundarySolver {
    pub plus: Vec<(usize, usize)>,
    pub minus: Vec<(usize, usize)>,
    pub outgoing: Vec<(usize, usize)>,
    plus_inv: CMat,
    minus_inv: CMat,
    b_out: CMat,
    pub p: usize,
}

impl BoundarySolver {
    pub fn new(sys: &SystemSpec, mt: &ModeTable) -> Result<Self> {
        let plus = mt.components(|c| matches!(c, ModeClass::Incoming | ModeClass::Decaying));
        let minus = mt.components(|c| matches!(c, ModeClass::Incoming | ModeClass::Growing));
        let outgoing = mt.components(|c| c == ModeClass::Outgoing);
        let b = linalg::to_complex(&sys.b0);
        let inv = |comps: &[(usize, usize)]| -> Result<CMat> {
            let m = &b * mt.stack(comps);
            if m.nrows() != m.ncols() {
                return Err(Error::DegenerateBasis { sigma_min: 0.0 });
            }
            let sv = linalg::singular_values_c(&m);
            let smin = sv.last().copied().unwrap_or(0.0);
            if smin <= 1e-10 * sv.first().copied().unwrap_or(1.0).max(1e-300) {
                return Err(Error::DegenerateBasis { sigma_min: smin });
            }
            linalg::inverse_c(&m).ok_or(Error::DegenerateBasis { sigma_min: smin })
        };
        let (plus_inv, minus_inv) = if sys.p == 0 { (CMat::zeros(0, 0), CMat::zeros(0, 0)) } else { (inv(&plus)?, inv(&minus)?) };
        let b_out = &b * mt.stack(&outgoing);
        Ok(Self { plus, minus, outgoing, plus_inv, minus_inv, b_out, p: sys.p })
    }

    /// Components solved for at harmonic `n`.
    pub fn unknowns(&self, n: i64) -> &[(usize, usize)] {
        if n > 0 {
            &self.plus
        } else {
            &self.minus
        }
    }

    /// Traces of [`unknowns`](Self::unknowns) given `G_n` and the outgoing
    /// traces (ordered as `self.outgoing`).
    pub fn solve(&self, n: i64, g: &[C64], outgoing: &[C64]) -> Vec<C64> {
        let mut rhs = g.to_vec();
        for r in 0..self.p {
            for (k, o) in outgoing.iter().enumerate() {
                rhs[r] -= self.b_out[(r, k)] * o;
            }
        }
        let inv = if n > 0 { &self.plus_inv } else { &self.minus_inv };
        linalg::mat_vec_c(inv, &rhs)
    }
}

/// Data of a profile: slot-major values at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub grid: ProfileGrid,
    pub layout: Layout,
    /// `[level][slot][point]`, points ordered `iy * nx + ix`.
    pub data: Vec<C64>,
}

impl ProfileSet {
    pub fn zeros(grid: &ProfileGrid, layout: &Layout) -> Self {
        let len = grid.nt * layout.nslots() * grid.points();
        Self { grid: grid.clone(), layout: layout.clone(), data: vec![ZERO; len] }
    }

    pub fn level_len(&self) -> usize {
        self.layout.nslots() * self.grid.points()
    }

    pub fn level(&self, it: usize) -> &[C64] {
        let l = self.level_len();
        &self.data[it * l..(it + 1) * l]
    }

    pub fn level_mut(&mut self, it: usize) -> &mut [C64] {
        let l = self.level_len();
        &mut self.data[it * l..(it + 1) * l]
    }

    pub fn slot_field(&self, it: usize, slot: usize) -> &[C64] {
        let np = self.grid.points();
        &self.level(it)[slot * np..(slot + 1) * np]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Values at time `t` by cubic interpolation between levels.
    pub fn interpolate_level(&self, t: f64, out: &mut [C64]) {
        let (i0, w) = cubic_weights(0.0, self.grid.dt, self.grid.nt, t);
        let l = self.level_len();
        out.iter_mut().for_each(|x| *x = ZERO);
        for (a, wa) in w.iter().enumerate() {
            if *wa == 0.0 || i0 + a >= self.grid.nt {
                continue;
            }
            let lv = &self.data[(i0 + a) * l..(i0 + a + 1) * l];
            for (o, v) in out.iter_mut().zip(lv) {
                *o += v * *wa;
            }
        }
    }

    /// `V^0 = v + sum sigma_{m,k} r_{m,k}` as a trigonometric polynomial over
    /// all grid points (`it * points + ip`). Slots with `keep(key) == false`
    /// are skipped.
    pub fn to_trig(&self, mt: &ModeTable, keep: impl Fn(usize) -> bool) -> TrigPolynomial {
        let np = self.grid.points();
        let n = self.layout.n;
        let pts = self.grid.nt * np;
        let mut out = TrigPolynomial::new(self.layout.modes, n, pts);
        for ki in 0..self.layout.keys.len() {
            if !keep(ki) {
                continue;
            }
            let basis = self.layout.basis(mt, ki);
            let slots = &self.layout.key_slots[ki];
            let mut v = vec![ZERO; pts * n];
            let mut nonzero = false;
            for it in 0..self.grid.nt {
                for (k, &s) in slots.iter().enumerate() {
                    let f = self.slot_field(it, s);
                    for ip in 0..np {
                        let a = f[ip];
                        if a == ZERO {
                            continue;
                        }
                        nonzero = true;
                        let base = (it * np + ip) * n;
                        for i in 0..n {
                            v[base + i] += a * basis[k][i];
                        }
                    }
                }
            }
            if nonzero {
                out.add(self.layout.alpha(ki), &v);
            }
        }
        out
    }
}

/// What is fixed once per run: mode data, layout, plan, boundary closures.
#[derive(Debug, Clone)]
pub struct ProfileContext {
    pub sys: SystemSpec,
    pub mt: ModeTable,
    pub rs: ResonanceSet,
    pub grid: ProfileGrid,
    pub layout: Layout,
    pub plan: InteractionPlan,
    pub boundary: BoundarySolver,
    pub split: CharacteristicSplit,
    /// Per-slot `(v_y, v_d)` for hyperbolic slots.
    pub speeds: Vec<Option<(f64, f64)>>,
    pub hyperbolic_targets: Vec<bool>,
    pub elliptic_targets: Vec<bool>,
}

impl ProfileContext {
    pub fn new(sys: &SystemSpec, mt: &ModeTable, rs: &ResonanceSet, grid: &ProfileGrid) -> Result<Self> {
        check_solver_support(sys)?;
        if rs.bound < grid.n_theta {
            return Err(Error::InvalidInput(format!("resonance bound {} is below the harmonic cutoff {}", rs.bound, grid.n_theta)));
        }
        let layout = Layout::new(mt, grid.n_theta);
        let plan = InteractionPlan::build(sys, mt, rs, &layout)?;
        let boundary = BoundarySolver::new(sys, mt)?;
        let split = CharacteristicSplit::new(sys)?;
        let mut speeds = vec![None; layout.nslots()];
        for (s, &(ki, _)) in layout.slot_key.iter().enumerate() {
            if let Key::Wave { m, .. } = layout.keys[ki] {
                let mode = &mt.modes[m];
                if mode.class.is_hyperbolic() {
                    let c0 = mode.x_field[0].re;
                    let c1 = mode.x_field[1].re;
                    speeds[s] = Some((c1 / c0, 1.0 / c0));
                }
            }
        }
        let nk = layout.keys.len();
        let hyperbolic_targets = (0..nk).map(|k| layout.is_hyperbolic_key(k)).collect();
        let elliptic_targets = (0..nk).map(|k| !layout.is_hyperbolic_key(k)).collect();
        Ok(Self {
            sys: sys.clone(),
            mt: mt.clone(),
            rs: rs.clone(),
            grid: grid.clone(),
            layout,
            plan,
            boundary,
            split,
            speeds,
            hyperbolic_targets,
            elliptic_targets,
        })
    }

    fn max_speed(&self) -> f64 {
        let ky = if self.grid.ny > 1 { std::f64::consts::PI * self.grid.ny as f64 / self.grid.y_len } else { 0.0 };
        let a1 = linalg::eigenvalues(self.sys.a(1)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut s = self.split.max_speed() * 2.9 / self.grid.dx + a1 * ky;
        for (vy, vd) in self.speeds.iter().flatten() {
            s = s.max(vd.abs() * 2.9 / self.grid.dx + vy.abs() * ky);
        }
        s
    }

    /// Boundary harmonics of the outgoing traces at point `ip` of a level.
    fn outgoing_traces(&self, level: &[C64], ip: usize, n: i64) -> Vec<C64> {
        let np = self.grid.points();
        self.boundary.outgoing.iter().map(|&(m, k)| self.layout.slot(m, k, n).map(|s| level[s * np + ip]).unwrap_or(ZERO)).collect()
    }

    /// Solves the boundary condition at every boundary point of a level;
    /// returns `(slot, point, value)` for every solved component.
    pub fn boundary_traces(&self, level: &[C64], forcing: &Forcing, t: f64) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        let nx = self.grid.nx;
        for n in -self.grid.n_theta..=self.grid.n_theta {
            if n == 0 {
                continue;
            }
            let g = forcing.harmonic(n, t, self.sys.p);
            for iy in 0..self.grid.ny {
                let ip = iy * nx;
                let outv = self.outgoing_traces(level, ip, n);
                let sol = self.boundary.solve(n, &g, &outv);
                for (c, &(m, k)) in self.boundary.unknowns(n).iter().enumerate() {
                    if let Some(s) = self.layout.slot(m, k, n) {
                        out.push((s, ip, sol[c]));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub cfl: f64,
    /// Number of leading iterates to keep.
    pub keep: usize,
    /// Quadratic interaction terms on/off.
    pub interactions: bool,
}

impl Default for HyperbolicOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, cfl: 0.6, keep: 4, interactions: true }
    }
}

#[derive(Debug, Clone)]
pub struct HyperbolicSolution {
    pub profile: ProfileSet,
    /// Iterates `1..=keep`.
    pub iterates: Vec<ProfileSet>,
    pub changes: Vec<f64>,
}

fn y_derivative(spec: Option<&Spectral>, field: &[C64], nx: usize, ny: usize, out: &mut [C64]) {
    match spec {
        None => out.iter_mut().for_each(|x| *x = ZERO),
        Some(s) => {
            let mut line = vec![ZERO; ny];
            for ix in 0..nx {
                for iy in 0..ny {
                    line[iy] = field[iy * nx + ix];
                }
                s.derivative(&mut line);
                for iy in 0..ny {
                    out[iy * nx + ix] = line[iy];
                }
            }
        }
    }
}

struct HypRhs<'a> {
    ctx: &'a ProfileContext,
    forcing: &'a Forcing,
    sbp: Sbp4,
    yspec: Option<Spectral>,
    interactions: bool,
    ad: CMat,
    a1: CMat,
}

impl HypRhs<'_> {
    fn eval(&self, t: f64, state: &[C64], prev: &[C64], out: &mut [C64]) {
        let ctx = self.ctx;
        let (nx, ny) = (ctx.grid.nx, ctx.grid.ny);
        let np = nx * ny;
        let n = ctx.layout.n;
        let ns = ctx.layout.nslots();
        let mut f = vec![ZERO; ns * np];
        ctx.plan.eval(&ctx.layout, prev, state, np, &ctx.hyperbolic_targets, self.interactions, &mut f);
        out.iter_mut().for_each(|x| *x = ZERO);
        let h00 = self.sbp.norm_weight(0) * ctx.grid.dx;
        // mean: dv/dt = -A_1 dv/dy - A_d dv/dx + A_d f
        let mean_slots: Vec<usize> = (0..n).map(|i| ctx.layout.mean_slot(i)).collect();
        let mut dy = vec![vec![ZERO; np]; n];
        for i in 0..n {
            let s = mean_slots[i];
            y_derivative(self.yspec.as_ref(), &state[s * np..(s + 1) * np], nx, ny, &mut dy[i]);
        }
        for iy in 0..ny {
            for ix in 0..nx {
                let ip = iy * nx + ix;
                let dxv: Vec<C64> = mean_slots.iter().map(|&s| self.sbp.row(ix, |k| state[s * np + iy * nx + k])).collect();
                for r in 0..n {
                    let mut acc = ZERO;
                    for c in 0..n {
                        acc -= self.a1[(r, c)] * dy[c][ip] + self.ad[(r, c)] * dxv[c];
                        acc += self.ad[(r, c)] * f[mean_slots[c] * np + ip];
                    }
                    out[mean_slots[r] * np + ip] = acc;
                }
            }
            let u0: Vec<C64> = mean_slots.iter().map(|&s| state[s * np + iy * nx]).collect();
            let g0 = self.forcing.harmonic(0, t, ctx.sys.p);
            let mut pen = vec![ZERO; n];
            ctx.split.left_penalty_c(&u0, &g0, &mut pen);
            for r in 0..n {
                out[mean_slots[r] * np + iy * nx] -= pen[r] / h00;
            }
            let un: Vec<C64> = mean_slots.iter().map(|&s| state[s * np + iy * nx + nx - 1]).collect();
            ctx.split.right_penalty_c(&un, &mut pen);
            for r in 0..n {
                out[mean_slots[r] * np + iy * nx + nx - 1] -= pen[r] / h00;
            }
        }
        // transported amplitudes
        let mut dyf = vec![ZERO; np];
        for (s, sp) in ctx.speeds.iter().enumerate() {
            let Some((vy, vd)) = *sp else { continue };
            let field = &state[s * np..(s + 1) * np];
            y_derivative(self.yspec.as_ref(), field, nx, ny, &mut dyf);
            for iy in 0..ny {
                for ix in 0..nx {
                    let ip = iy * nx + ix;
                    let dxs = self.sbp.row(ix, |k| field[iy * nx + k]);
                    out[s * np + ip] = -dyf[ip] * vy - dxs * vd + f[s * np + ip] * vd;
                }
                if vd < 0.0 {
                    let ip = iy * nx + nx - 1;
                    out[s * np + ip] -= field[ip] * (vd.abs() / h00);
                }
            }
        }
        for (s, ip, g) in ctx.boundary_traces(state, self.forcing, t) {
            if let Some((_, vd)) = ctx.speeds[s] {
                if vd > 0.0 {
                    out[s * np + ip] -= (state[s * np + ip] - g) * (vd / h00);
                }
            }
        }
    }
}

/// One iterate of the hyperbolic subsystem with coefficients frozen at `prev`.
pub fn hyperbolic_iterate(ctx: &ProfileContext, forcing: &Forcing, prev: Option<&ProfileSet>, opts: &HyperbolicOptions) -> Result<ProfileSet> {
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::CflViolation(format!("cfl factor {} outside (0, 1]", opts.cfl)));
    }
    let grid = &ctx.grid;
    let rhs = HypRhs {
        ctx,
        forcing,
        sbp: Sbp4::new(grid.nx, grid.dx),
        yspec: (grid.ny > 1).then(|| Spectral::new(grid.ny, grid.y_len)),
        interactions: opts.interactions,
        ad: linalg::to_complex(ctx.sys.a(ctx.sys.d)),
        a1: linalg::to_complex(ctx.sys.a(1)),
    };
    let dt_max = opts.cfl * 2.5 / ctx.max_speed().max(1e-300);
    let sub = (grid.dt / dt_max).ceil().max(1.0) as usize;
    let h = grid.dt / sub as f64;
    let mut out = ProfileSet::zeros(grid, &ctx.layout);
    let len = out.level_len();
    let mut u = vec![ZERO; len];
    let mut pv = [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]];
    let mut k = [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]];
    let mut tmp = vec![ZERO; len];
    for it in 0..grid.nt - 1 {
        for s in 0..sub {
            let t = grid.t(it) + s as f64 * h;
            if let Some(p) = prev {
                p.interpolate_level(t, &mut pv[0]);
                p.interpolate_level(t + 0.5 * h, &mut pv[1]);
                p.interpolate_level(t + h, &mut pv[2]);
            }
            rhs.eval(t, &u, &pv[0], &mut k[0]);
            tmp.par_iter_mut().enumerate().for_each(|(i, x)| *x = u[i] + k[0][i] * (0.5 * h));
            rhs.eval(t + 0.5 * h, &tmp, &pv[1], &mut k[1]);
            tmp.par_iter_mut().enumerate().for_each(|(i, x)| *x = u[i] + k[1][i] * (0.5 * h));
            rhs.eval(t + 0.5 * h, &tmp, &pv[1], &mut k[2]);
            tmp.par_iter_mut().enumerate().for_each(|(i, x)| *x = u[i] + k[2][i] * h);
            rhs.eval(t + h, &tmp, &pv[2], &mut k[3]);
            for i in 0..len {
                u[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (h / 6.0);
            }
        }
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BlowUp(grid.t(it + 1)));
        }
        out.level_mut(it + 1).copy_from_slice(&u);
    }
    Ok(out)
}

/// Picard iteration for the mean and the hyperbolic amplitudes, starting
/// from zero, until successive iterates agree to `opts.tol` (relative).
pub fn picard_solve_hyperbolic(ctx: &ProfileContext, forcing: &Forcing, opts: &HyperbolicOptions) -> Result<HyperbolicSolution> {
    forcing.validate(ctx.sys.p)?;
    let mut prev: Option<ProfileSet> = None;
    let mut iterates = Vec::new();
    let mut changes = Vec::new();
    for n in 1..=opts.max_iter {
        let cur = hyperbolic_iterate(ctx, forcing, prev.as_ref(), opts)?;
        let scale = cur.max_abs();
        let diff = match &prev {
            Some(p) => cur.max_abs_diff(p),
            None => scale,
        };
        let change = if scale > 0.0 { diff / scale } else { 0.0 };
        changes.push(change);
        if n <= opts.keep {
            iterates.push(cur.clone());
        }
        if change < opts.tol {
            return Ok(HyperbolicSolution { profile: cur, iterates, changes });
        }
        prev = Some(cur);
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, last_change: changes.last().copied().unwrap_or(f64::NAN), t0_suggestion: ctx.grid.t_final / 2.0 })
}
