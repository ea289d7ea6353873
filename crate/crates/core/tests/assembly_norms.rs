mod common;

use common::{Fixture, ELLIPTIC, HYPERBOLIC};
use geoptics::assembly::{decay_check, fit_affine, phase_groups, strictly_decreasing, substitute_to_grid};
use geoptics::modes::ModeClass;
use geoptics::profile::ProfileGrid;
use geoptics::singular::SingularGrid;
use geoptics::trig::TrigPolynomial;
use geoptics::C64;

fn coarse() -> ProfileGrid {
    ProfileGrid::new(0.4, 0.02, 0.5, 0.02, 1, 1.0, 4, 4.0).unwrap()
}

#[test]
fn substitution_matches_closed_form() {
    let fx = Fixture::with_grid(HYPERBOLIC, coarse());
    let pgrid = &fx.grid;
    let (n, pts) = (fx.sys.n, pgrid.nt * pgrid.points());
    let mut v = TrigPolynomial::new(fx.mt.len(), n, pts);
    let c1: Vec<C64> = (0..pts * n).map(|j| C64::new(0.3 + 0.1 * (j % n) as f64, -0.2)).collect();
    let c2: Vec<C64> = (0..pts * n).map(|j| C64::new(-0.1, 0.05 * (j % n) as f64)).collect();
    v.add(vec![1, 0, 0], &c1);
    v.add(vec![0, 2, 0], &c2);
    let sgrid = SingularGrid::new(0.1, pgrid, 0.1, 8).unwrap();
    let f = substitute_to_grid(&v, &fx.mt, pgrid, &sgrid).unwrap();
    let w = fx.mt.omegas();
    for it in [0, 7, pgrid.nt - 1] {
        for ix in 0..sgrid.nx {
            let x = sgrid.x(ix) / sgrid.eps;
            for i in 0..n {
                let want1 = c1[i] * (C64::new(0.0, 1.0) * w[0] * x).exp();
                let want2 = c2[i] * (C64::new(0.0, 2.0) * w[1] * x).exp();
                assert!((f.data[f.index(it, ix, 0, i, 1)] - want1).norm() < 1e-12);
                assert!((f.data[f.index(it, ix, 0, i, 2)] - want2).norm() < 1e-12);
                assert_eq!(f.data[f.index(it, ix, 0, i, 0)], C64::new(0.0, 0.0));
            }
        }
    }
}

#[test]
fn decay_of_a_boundary_layer() {
    let fx = Fixture::with_grid(ELLIPTIC, coarse());
    let pgrid = &fx.grid;
    let m = fx.mt.classes().iter().position(|c| *c == ModeClass::Decaying).unwrap();
    let r = &fx.mt.modes[m].r[0];
    let (n, np) = (fx.sys.n, pgrid.points());
    let mut vals = vec![C64::new(0.0, 0.0); pgrid.nt * np * n];
    for it in 0..pgrid.nt {
        let t = pgrid.t(it);
        let bump = (-((t - 0.2) / 0.08f64).powi(2)).exp();
        for ix in 0..pgrid.nx {
            for i in 0..n {
                vals[(it * np + ix) * n + i] = r[i] * (pgrid.x(ix) * bump);
            }
        }
    }
    let mut alpha = vec![0; fx.mt.len()];
    alpha[m] = 1;
    let mut poly = TrigPolynomial::new(fx.mt.len(), n, pgrid.nt * np);
    poly.add(alpha, &vals);
    let rep = decay_check(&poly, &fx.mt, pgrid, &[0.2, 0.1, 0.05], 0.05, 8).unwrap();
    assert!(rep.sup_decreasing, "{rep:?}");
    // |x e^{-a x / eps}|_{L^2} scales like eps^{3/2}
    assert!((rep.l2_slope - 1.5).abs() < 0.15, "{rep:?}");
}

#[test]
fn affine_fit_recovers_a_line() {
    let x = [0.2, 0.1, 0.05, 0.025];
    let y: Vec<f64> = x.iter().map(|e| 0.3 + 2.5 * e).collect();
    let (a, b, res) = fit_affine(&x, &y);
    assert!((a - 0.3).abs() < 1e-12 && (b - 2.5).abs() < 1e-12 && res < 1e-12);
    assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
    assert!(!strictly_decreasing(&[3.0, 3.0, 1.0]));
}

#[test]
fn phase_groups_partition_the_spectrum() {
    let fx = Fixture::new(ELLIPTIC);
    let m = fx.mt.len();
    let n = fx.sys.n;
    let one = vec![C64::new(1.0, 0.0); n];
    let mut v = TrigPolynomial::new(m, n, 1);
    let classes = fx.mt.classes();
    for q in 0..m {
        for a in -2i64..=2 {
            let mut alpha = vec![0; m];
            alpha[q] = a;
            if a != 0 && classes[q].admits(a) {
                v.add(alpha, &one);
            }
        }
    }
    let w = fx.mt.omegas();
    let groups = phase_groups(&v, &fx.mt);
    let total: usize = groups.iter().map(|g| g.alphas.len()).sum();
    assert_eq!(total, v.terms.len());
    for g in &groups {
        for a in &g.alphas {
            let z: C64 = a.iter().zip(&w).map(|(x, o)| o * *x as f64).sum();
            assert_eq!(a.iter().sum::<i64>(), g.j);
            assert!((z - g.z).norm() < 1e-9);
        }
    }
    for (i, g) in groups.iter().enumerate() {
        for h in &groups[i + 1..] {
            assert!(g.j != h.j || (g.z - h.z).norm() > 1e-9);
        }
    }
}
