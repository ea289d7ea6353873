mod common;

use common::{pulse, Fixture, ELLIPTIC, HYPERBOLIC};
use geoptics::elliptic::solve_profiles;
use geoptics::forcing::Forcing;
use geoptics::profile::{hyperbolic_iterate, HyperbolicOptions, ProfileGrid};
use geoptics::C64;

#[test]
fn zero_forcing_gives_zero_profile() {
    for beta in [HYPERBOLIC, ELLIPTIC] {
        let fx = Fixture::new(beta);
        let sol = solve_profiles(&fx.context(), &Forcing::zero(), &HyperbolicOptions::default()).unwrap();
        assert_eq!(sol.profile.max_abs(), 0.0);
    }
}

#[test]
fn linear_iterate_scales_with_the_data() {
    let fx = Fixture::new(HYPERBOLIC);
    let ctx = fx.context();
    let opts = HyperbolicOptions { interactions: false, ..HyperbolicOptions::default() };
    let one = hyperbolic_iterate(&ctx, &pulse(0.05), None, &opts).unwrap();
    let two = hyperbolic_iterate(&ctx, &pulse(0.1), None, &opts).unwrap();
    let mut doubled = one.clone();
    for it in 0..fx.grid.nt {
        doubled.level_mut(it).iter_mut().for_each(|x| *x *= 2.0);
    }
    assert!(one.max_abs() > 1e-3);
    assert!(two.max_abs_diff(&doubled) < 1e-12 * two.max_abs());
}

#[test]
fn picard_contracts() {
    let fx = Fixture::new(HYPERBOLIC);
    let sol = solve_profiles(&fx.context(), &pulse(0.05), &HyperbolicOptions::default()).unwrap();
    assert!(*sol.changes.last().unwrap() < 1e-8);
    for w in sol.changes.windows(2).skip(1) {
        assert!(w[1] < w[0], "{:?}", sol.changes);
    }
    assert_eq!(sol.iterates.len(), 4.min(sol.changes.len()));
}

/// Largest `|B(0) U(t, 0, theta_0) - G(t, theta_0)|` over the time levels.
fn boundary_defect(beta: [f64; 2], h: f64) -> (f64, f64) {
    let fx = Fixture::with_grid(beta, ProfileGrid::new(1.0, h, 1.5, h, 1, 1.0, 6, 4.0).unwrap());
    let g = pulse(0.05);
    let sol = solve_profiles(&fx.context(), &g, &HyperbolicOptions::default()).unwrap();
    let v = sol.profile.to_trig(&fx.mt, |_| true);
    let w = fx.mt.omegas();
    let (n, np) = (fx.sys.n, fx.grid.points());
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for it in 0..fx.grid.nt {
        let t = fx.grid.t(it);
        for k in 0..16 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let u = v.substitute(&w, th, 0.0);
            let u: Vec<C64> = u[it * np * n..it * np * n + n].to_vec();
            let want = g.value(t, th, fx.sys.p);
            for (r, w) in want.iter().enumerate() {
                let bu: C64 = (0..n).map(|c| u[c] * fx.sys.b0[(r, c)]).sum();
                worst = worst.max((bu - C64::new(*w, 0.0)).norm());
                scale = scale.max(w.abs());
            }
        }
    }
    (worst, scale)
}

#[test]
fn boundary_condition_holds() {
    for beta in [HYPERBOLIC, ELLIPTIC] {
        let (d, s) = boundary_defect(beta, 0.02);
        let (d2, _) = boundary_defect(beta, 0.01);
        // imposed weakly, so the defect is a truncation error
        assert!(d < 2e-2 * s, "{beta:?}: {d:e}");
        assert!(d2 <= 0.25 * d + 1e-15, "{beta:?}: {d:e} -> {d2:e}");
    }
}
