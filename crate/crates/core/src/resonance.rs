//! Characteristic multi-indices and resonant triples of phases over the
//! sign-constrained lattices.

use std::collections::BTreeSet;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::gcd;
use crate::modes::{ModeClass, ModeTable};

/// Relative coincidence tolerance after scaling the modes to unit max-modulus.
pub const COINCIDENCE_TOL: f64 = 1e-10;
/// Relations closer than this but above the coincidence tolerance are
/// reported as near-resonances.
pub const NEAR_TOL: f64 = 1e-6;

/// A normalized triple `n_p phi_p = n_q phi_q + n_r phi_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Triple {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub np: i64,
    pub nq: i64,
    pub nr: i64,
}

impl Triple {
    /// The relation as a signed coefficient vector on three modes, up to sign:
    /// `(index, coefficient)` sorted by index with the first coefficient positive.
    pub fn relation_key(&self) -> [(usize, i64); 3] {
        relation_key([(self.p, self.np), (self.q, -self.nq), (self.r, -self.nr)])
    }
}

fn relation_key(mut c: [(usize, i64); 3]) -> [(usize, i64); 3] {
    c.sort();
    if c[0].1 < 0 {
        for e in c.iter_mut() {
            e.1 = -e.1;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResonanceKind {
    Hyperbolic,
    Elliptic,
}

/// A characteristic multi-index `alpha` with `alpha . phi = n phi_m`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CharacteristicIndex {
    pub alpha: Vec<i64>,
    pub n: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NearResonance {
    pub relation: [(usize, i64); 3],
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSet {
    pub bound: i64,
    pub triples: Vec<Triple>,
    /// Characteristic indices grouped by the mode they map to.
    pub characteristic: Vec<Vec<CharacteristicIndex>>,
    /// More than one equivalence class of triples was found; interactions of
    /// all families are summed.
    pub multiple_families: bool,
    pub near_resonances: Vec<NearResonance>,
}

impl ResonanceSet {
    pub fn m(&self) -> usize {
        self.characteristic.len()
    }

    /// `(m, n_alpha)` when `alpha` is characteristic, `None` otherwise.
    /// Errors when a nonzero `alpha` exceeds the enumerated bound.
    pub fn lookup(&self, alpha: &[i64]) -> Result<Option<(usize, i64)>> {
        let nnz = alpha.iter().filter(|a| **a != 0).count();
        if nnz == 0 {
            return Ok(None);
        }
        if alpha.iter().any(|a| a.abs() > self.bound) || nnz > 2 {
            return Err(Error::UnindexedMode(alpha.iter().map(|x| *x as i32).collect()));
        }
        for (m, list) in self.characteristic.iter().enumerate() {
            if let Ok(i) = list.binary_search_by(|c| c.alpha.as_slice().cmp(alpha)) {
                return Ok(Some((m, list[i].n)));
            }
        }
        Ok(None)
    }
}

fn scale(omegas: &[C64]) -> f64 {
    omegas.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300)
}

fn admits(classes: &[ModeClass], m: usize, n: i64) -> bool {
    classes[m].admits(n)
}

/// Every `alpha` with at most two nonzero components in the sign lattice and
/// `|alpha|_inf <= bound` such that `alpha . phi = n phi_m`.
pub fn find_characteristic_modes(omegas: &[C64], classes: &[ModeClass], bound: i64) -> Vec<Vec<CharacteristicIndex>> {
    let mm = omegas.len();
    let s = scale(omegas);
    let w: Vec<C64> = omegas.iter().map(|z| z / s).collect();
    let mut out: Vec<Vec<CharacteristicIndex>> = vec![Vec::new(); mm];
    for m in 0..mm {
        for n in -bound..=bound {
            if n != 0 && admits(classes, m, n) {
                let mut alpha = vec![0; mm];
                alpha[m] = n;
                out[m].push(CharacteristicIndex { alpha, n });
            }
        }
    }
    for q in 0..mm {
        for r in (q + 1)..mm {
            for a in -bound..=bound {
                if a == 0 || !admits(classes, q, a) {
                    continue;
                }
                for b in -bound..=bound {
                    if b == 0 || !admits(classes, r, b) {
                        continue;
                    }
                    let n = a + b;
                    if n == 0 {
                        continue;
                    }
                    let z = (w[q] * a as f64 + w[r] * b as f64) / n as f64;
                    for m in 0..mm {
                        if m == q || m == r {
                            continue;
                        }
                        if ((z - w[m]) * n as f64).norm() <= COINCIDENCE_TOL {
                            let mut alpha = vec![0; mm];
                            alpha[q] = a;
                            alpha[r] = b;
                            out[m].push(CharacteristicIndex { alpha, n });
                        }
                    }
                }
            }
        }
    }
    for list in out.iter_mut() {
        list.sort();
    }
    out
}

/// Orientations of a relation `c` (sum zero, `c . omega = 0`) that form a
/// normalized triple, target first by preference.
fn orientations(c: [(usize, i64); 3], classes: &[ModeClass]) -> Vec<Triple> {
    let mut out = Vec::new();
    for t in 0..3 {
        let (p, cp) = c[t];
        let others: Vec<(usize, i64)> = (0..3).filter(|&i| i != t).map(|i| c[i]).collect();
        for sign in [1i64, -1] {
            let np = sign * cp;
            let (q, nq) = (others[0].0, -sign * others[0].1);
            let (r, nr) = (others[1].0, -sign * others[1].1);
            if classes[p].is_hyperbolic() && np < 0 {
                continue;
            }
            if !admits(classes, q, nq) || !admits(classes, r, nr) {
                continue;
            }
            out.push(Triple { p, q, r, np, nq, nr });
        }
    }
    out
}

/// Chooses the stored representative of an equivalence class: the target
/// whose coefficient has the sign opposite to the other two, then the lowest
/// target index.
fn representative(c: [(usize, i64); 3], classes: &[ModeClass]) -> Option<Triple> {
    let mut cands = orientations(c, classes);
    let odd = |t: &Triple| {
        let sp = t.np.signum();
        t.nq.signum() == sp && t.nr.signum() == sp
    };
    cands.sort_by_key(|t| (!odd(t), t.p, t.np < 0, t.q, t.r));
    cands.into_iter().next()
}

/// Enumerates normalized resonant triples with all coefficients bounded by
/// `bound`, deduplicated up to rearrangement.
pub fn find_resonances(omegas: &[C64], classes: &[ModeClass], bound: i64) -> ResonanceSet {
    let mm = omegas.len();
    let s = scale(omegas);
    let w: Vec<C64> = omegas.iter().map(|z| z / s).collect();
    let mut keys: BTreeSet<[(usize, i64); 3]> = BTreeSet::new();
    let mut near = Vec::new();
    for i in 0..mm {
        for j in (i + 1)..mm {
            for k in (j + 1)..mm {
                for ci in 1..=bound {
                    for cj in -bound..=bound {
                        let ck = -ci - cj;
                        if cj == 0 || ck == 0 || ck.abs() > bound {
                            continue;
                        }
                        if gcd(gcd(ci, cj), ck) != 1 {
                            continue;
                        }
                        let defect = (w[i] * ci as f64 + w[j] * cj as f64 + w[k] * ck as f64).norm();
                        let c = [(i, ci), (j, cj), (k, ck)];
                        if defect <= COINCIDENCE_TOL {
                            if !orientations(c, classes).is_empty() {
                                keys.insert(relation_key(c));
                            }
                        } else if defect <= NEAR_TOL {
                            near.push(NearResonance { relation: relation_key(c), defect });
                        }
                    }
                }
            }
        }
    }
    let triples: Vec<Triple> = keys.iter().filter_map(|c| representative(*c, classes)).collect();
    ResonanceSet {
        bound,
        multiple_families: triples.len() > 1,
        characteristic: find_characteristic_modes(omegas, classes, bound),
        triples,
        near_resonances: near,
    }
}

pub fn resonances_of(mt: &ModeTable, bound: i64) -> ResonanceSet {
    find_resonances(&mt.omegas(), &mt.classes(), bound)
}

/// Hyperbolic when the target phase is real; checks the pairing rules.
pub fn classify_resonance(t: &Triple, classes: &[ModeClass]) -> Result<ResonanceKind> {
    let (cp, cq, cr) = (classes[t.p], classes[t.q], classes[t.r]);
    if cp.is_hyperbolic() {
        if cq.is_elliptic() || cr.is_elliptic() {
            return Err(Error::ClassificationContradiction(format!("hyperbolic target {} paired with an elliptic phase", t.p)));
        }
        Ok(ResonanceKind::Hyperbolic)
    } else {
        if cq.is_hyperbolic() && cr.is_hyperbolic() {
            return Err(Error::ClassificationContradiction(format!("elliptic target {} formed by two hyperbolic phases", t.p)));
        }
        Ok(ResonanceKind::Elliptic)
    }
}
