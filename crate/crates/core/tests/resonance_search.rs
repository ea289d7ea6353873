use std::collections::BTreeSet;

use geoptics::modes::ModeClass;
use geoptics::resonance::{find_characteristic_modes, find_resonances, ResonanceSet};
use geoptics::C64;
use proptest::prelude::*;

type Key = [(usize, i64); 3];

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn normalize(mut c: Key) -> Key {
    c.sort();
    if c[0].1 < 0 {
        c.iter_mut().for_each(|e| e.1 = -e.1);
    }
    c
}

/// Whether some arrangement `n_p phi_p = n_q phi_q + n_r phi_r` of the
/// relation respects the sign lattices, with `n_p > 0` for a real target.
fn admissible(c: Key, classes: &[ModeClass]) -> bool {
    (0..3).any(|t| {
        [1i64, -1].iter().any(|s| {
            let np = s * c[t].1;
            let rest: Vec<(usize, i64)> = (0..3).filter(|&i| i != t).map(|i| (c[i].0, -s * c[i].1)).collect();
            (classes[c[t].0].is_elliptic() || np > 0) && rest.iter().all(|(m, n)| classes[*m].admits(*n))
        })
    })
}

/// Every primitive coefficient vector on every triple of modes.
fn brute_force(omegas: &[C64], classes: &[ModeClass], bound: i64) -> BTreeSet<Key> {
    let s = omegas.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut out = BTreeSet::new();
    let m = omegas.len();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if !(i < j && j < k) {
                    continue;
                }
                for a in -bound..=bound {
                    for b in -bound..=bound {
                        for c in -bound..=bound {
                            if a == 0 || b == 0 || c == 0 || a + b + c != 0 || gcd(gcd(a, b), c) != 1 {
                                continue;
                            }
                            let defect = (omegas[i] * a as f64 + omegas[j] * b as f64 + omegas[k] * c as f64).norm() / s;
                            let key = [(i, a), (j, b), (k, c)];
                            if defect <= 1e-10 && admissible(key, classes) {
                                out.insert(normalize(key));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn keys(rs: &ResonanceSet) -> BTreeSet<Key> {
    rs.triples.iter().map(|t| t.relation_key()).collect()
}

fn real(ws: &[f64]) -> Vec<C64> {
    ws.iter().map(|w| C64::new(*w, 0.0)).collect()
}

fn mode_sets() -> Vec<(Vec<C64>, Vec<ModeClass>)> {
    use ModeClass::*;
    vec![
        (real(&[1.0, 2.0, 3.0]), vec![Incoming, Outgoing, Incoming]),
        (real(&[1.0, 2f64.sqrt(), 3f64.sqrt()]), vec![Incoming, Incoming, Outgoing]),
        (real(&[1.0, 2.0, 3.0, 5.0]), vec![Incoming, Outgoing, Incoming, Outgoing]),
        (real(&[-1.0, 0.5, 2.0, 3.5]), vec![Outgoing, Incoming, Incoming, Outgoing]),
        (vec![C64::new(1.0, 0.0), C64::new(0.5, 1.0), C64::new(0.5, -1.0), C64::new(1.5, 1.0)], vec![Incoming, Decaying, Growing, Decaying]),
        (vec![C64::new(-2.0, 0.0), C64::new(1.0, 0.5), C64::new(1.0, -0.5), C64::new(3.0, 0.0)], vec![Outgoing, Decaying, Growing, Incoming]),
    ]
}

#[test]
fn search_equals_brute_force() {
    for (w, cl) in mode_sets() {
        for bound in [4, 6, 8] {
            let rs = find_resonances(&w, &cl, bound);
            assert_eq!(keys(&rs), brute_force(&w, &cl, bound), "{w:?} bound {bound}");
        }
    }
}

#[test]
fn one_two_three_has_a_single_family() {
    let (w, cl) = &mode_sets()[0];
    for bound in [4, 6, 8] {
        let rs = find_resonances(w, cl, bound);
        assert_eq!(rs.triples.len(), 1);
        assert!(!rs.multiple_families);
        let t = rs.triples[0];
        // 2 phi_2 = phi_1 + phi_3
        assert_eq!((t.p, t.np, t.nq, t.nr), (1, 2, 1, 1));
    }
}

#[test]
fn independent_phases_do_not_resonate() {
    let (w, cl) = &mode_sets()[1];
    assert!(find_resonances(w, cl, 8).triples.is_empty());
}

#[test]
fn characteristic_indices_equal_brute_force() {
    for (w, cl) in mode_sets() {
        let bound = 5;
        let got = find_characteristic_modes(&w, &cl, bound);
        let s = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let m = w.len();
        for target in 0..m {
            let mut want = BTreeSet::new();
            for q in 0..m {
                for r in q..m {
                    for a in -bound..=bound {
                        for b in -bound..=bound {
                            let mut alpha = vec![0i64; m];
                            alpha[q] += a;
                            if r != q {
                                alpha[r] += b;
                            } else if b != 0 {
                                continue;
                            }
                            let n: i64 = alpha.iter().sum();
                            let nnz = alpha.iter().filter(|x| **x != 0).count();
                            if n == 0 || nnz == 0 || !alpha.iter().enumerate().all(|(i, x)| cl[i].admits(*x)) {
                                continue;
                            }
                            // single-phase indices sit on the target, pairs avoid it
                            if (nnz == 1) != (alpha[target] != 0) {
                                continue;
                            }
                            let z: C64 = alpha.iter().zip(&w).map(|(x, o)| o * *x as f64).sum();
                            if ((z - w[target] * n as f64) / s).norm() <= 1e-10 {
                                want.insert((alpha, n));
                            }
                        }
                    }
                }
            }
            let have: BTreeSet<(Vec<i64>, i64)> = got[target].iter().map(|c| (c.alpha.clone(), c.n)).collect();
            assert_eq!(have, want, "{w:?} target {target}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn larger_bound_only_adds(nums in proptest::collection::vec(-6i64..=6, 4), den in 1i64..4) {
        let w: Vec<f64> = nums.iter().map(|x| *x as f64 / den as f64).collect();
        let distinct: BTreeSet<i64> = nums.iter().copied().collect();
        prop_assume!(distinct.len() == 4);
        let cl = vec![ModeClass::Incoming; 4];
        let small = keys(&find_resonances(&real(&w), &cl, 4));
        let large = keys(&find_resonances(&real(&w), &cl, 8));
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn found_relations_hold(nums in proptest::collection::vec(-6i64..=6, 4)) {
        let w = real(&nums.iter().map(|x| *x as f64).collect::<Vec<_>>());
        let cl = vec![ModeClass::Incoming; 4];
        for t in find_resonances(&w, &cl, 6).triples {
            let lhs = w[t.p] * t.np as f64;
            let rhs = w[t.q] * t.nq as f64 + w[t.r] * t.nr as f64;
            prop_assert!((lhs - rhs).norm() < 1e-9);
            prop_assert_eq!(t.np, t.nq + t.nr);
        }
    }
}
