//! End-to-end acceptance checks, one line per criterion.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use geoptics::assembly::decay_check;
use geoptics::corrector::{apply_l_theta, assemble_g, corrector_rhs, solve_corrector, substitution_identity_defect, truncate_to_polynomial};
use geoptics::elliptic::{solve_profiles, wave_from_traces};
use geoptics::forcing::{Forcing, ForcingTerm};
use geoptics::linalg::RMat;
use geoptics::modes::{compute_modes, decomposition_report, ModeClass, ModeTable};
use geoptics::numerics::smooth_cutoff;
use geoptics::profile::{HyperbolicOptions, ProfileContext, ProfileGrid};
use geoptics::resonance::{find_resonances, resonances_of, ResonanceSet};
use geoptics::system::{check_constant_multiplicity, random_samples, AffineModel, SystemSpec};
use geoptics::trig::{interaction_integral, project_e_flat, Series, TrigPolynomial};
use geoptics::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const HYPERBOLIC: [f64; 2] = [2.0, 1.0];
const ELLIPTIC: [f64; 2] = [0.0, 1.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn euler2d() -> SystemSpec {
    SystemSpec::euler(2, 1.0, 1.0, vec![1.0, 0.5, -0.4]).unwrap()
}

fn fixture_grid() -> ProfileGrid {
    ProfileGrid::new(1.0, 0.02, 1.5, 0.02, 1, 1.0, 6, 4.0).unwrap()
}

fn pulse() -> Forcing {
    Forcing { terms: vec![ForcingTerm { center: 0.45, width: 0.12, harmonic: 1, amplitude: vec![0.05], phase: 0.0 }], onset: 0.2 }
}

struct Fixture {
    sys: SystemSpec,
    mt: ModeTable,
    rs: ResonanceSet,
    grid: ProfileGrid,
}

impl Fixture {
    fn new(beta: [f64; 2], grid: ProfileGrid) -> Self {
        let sys = euler2d();
        let mt = compute_modes(&sys, &beta).unwrap();
        let rs = resonances_of(&mt, 12);
        Self { sys, mt, rs, grid }
    }

    fn context(&self) -> ProfileContext {
        ProfileContext::new(&self.sys, &self.mt, &self.rs, &self.grid).unwrap()
    }
}

fn euler_structure() -> Outcome {
    let t = Instant::now();
    let base = [1.3, 0.2, -0.1, 0.4];
    let (k, gamma) = (0.8, 1.4);
    let sys = SystemSpec::euler(3, k, gamma, base.to_vec()).unwrap();
    let samples = random_samples(&sys, 100, 0.05, 11);
    let rep = check_constant_multiplicity(&sys, &samples).unwrap();
    let mut worst: f64 = 0.0;
    for ((u, xi), got) in samples.iter().zip(&rep.eigenvalues) {
        let rho: f64 = base[0] + u[0];
        let c = (k * gamma * rho.powf(gamma - 1.0)).sqrt();
        let ux: f64 = (1..4).map(|j| (base[j] + u[j]) * xi[j - 1]).sum();
        let nx = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (g, w) in got.iter().zip([ux - c * nx, ux, ux + c * nx]) {
            worst = worst.max((g - w).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        rep.multiplicities == [1, 2, 1] && worst < 1e-10 && secs < 1.0,
        format!("multiplicities {:?}, max eigenvalue error {worst:.2e}, {secs:.3} s", rep.multiplicities),
    )
}

fn decomposition_suite() -> Outcome {
    let t = Instant::now();
    let sys3 = SystemSpec::euler(3, 0.8, 1.4, vec![1.3, 0.2, -0.1, 0.4]).unwrap();
    let tables = [(euler2d(), vec![2.0, 1.0]), (euler2d(), vec![0.0, 1.0]), (sys3, vec![2.0, 0.7, -0.3])];
    let mut worst: f64 = 0.0;
    let mut gap = 0;
    for (sys, beta) in &tables {
        let r = decomposition_report(sys, &compute_modes(sys, beta).unwrap());
        worst = worst.max(r.max_error());
        gap = gap.max(r.range_kernel_rank_gap);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst < 1e-10 && gap == 0 && secs < 1.0, format!("{} tables, max identity error {worst:.2e}, rank gap {gap}, {secs:.3} s", tables.len()))
}

fn classifier_region() -> Outcome {
    let t = Instant::now();
    let sys = euler2d();
    let (u1, u2, c) = (0.5f64, -0.4f64, 1.0f64);
    let (mut checked, mut wrong) = (0, 0);
    for i in 0..50 {
        for j in 0..50 {
            let beta = [-2.0 + 4.0 * (i as f64 + 0.5) / 50.0, -2.0 + 4.0 * (j as f64 + 0.5) / 50.0];
            let s = (beta[0] + u1 * beta[1]).abs();
            let edge = (c * c - u2 * u2).sqrt() * beta[1].abs();
            if (s - edge).abs() < 1e-2 {
                continue;
            }
            let mt = compute_modes(&sys, &beta).unwrap();
            if mt.modes.iter().all(|m| m.class.is_hyperbolic()) != (s > edge) {
                wrong += 1;
            }
            checked += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(wrong == 0 && secs < 10.0, format!("{checked} points, {wrong} disagreements, {secs:.2} s"))
}

type Key = [(usize, i64); 3];

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn brute_force(omegas: &[C64], classes: &[ModeClass], bound: i64) -> BTreeSet<Key> {
    let s = omegas.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let m = omegas.len();
    let mut out = BTreeSet::new();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                for a in -bound..=bound {
                    for b in -bound..=bound {
                        let c = -a - b;
                        if a == 0 || b == 0 || c == 0 || c.abs() > bound || gcd(gcd(a, b), c) != 1 {
                            continue;
                        }
                        if (omegas[i] * a as f64 + omegas[j] * b as f64 + omegas[k] * c as f64).norm() > 1e-10 * s {
                            continue;
                        }
                        let key = [(i, a), (j, b), (k, c)];
                        let ok = (0..3).any(|t| {
                            [1i64, -1].iter().any(|sg| {
                                let np = sg * key[t].1;
                                (classes[key[t].0].is_elliptic() || np > 0) && (0..3).filter(|&x| x != t).all(|x| classes[key[x].0].admits(-sg * key[x].1))
                            })
                        });
                        if ok {
                            let mut kk = key;
                            if kk[0].1 < 0 {
                                kk.iter_mut().for_each(|e| e.1 = -e.1);
                            }
                            out.insert(kk);
                        }
                    }
                }
            }
        }
    }
    out
}

fn resonance_oracle() -> Outcome {
    use ModeClass::*;
    let t = Instant::now();
    let real = |w: &[f64]| w.iter().map(|x| C64::new(*x, 0.0)).collect::<Vec<_>>();
    let sets = vec![
        (real(&[1.0, 2.0, 3.0]), vec![Incoming, Outgoing, Incoming]),
        (real(&[1.0, 2f64.sqrt(), 3f64.sqrt()]), vec![Incoming, Incoming, Outgoing]),
        (real(&[1.0, 2.0, 3.0, 5.0]), vec![Incoming, Outgoing, Incoming, Outgoing]),
        (real(&[-1.0, 0.5, 2.0, 3.5]), vec![Outgoing, Incoming, Incoming, Outgoing]),
        (vec![C64::new(1.0, 0.0), C64::new(0.5, 1.0), C64::new(0.5, -1.0), C64::new(1.5, 1.0)], vec![Incoming, Decaying, Growing, Decaying]),
        (vec![C64::new(-2.0, 0.0), C64::new(1.0, 0.5), C64::new(1.0, -0.5), C64::new(3.0, 0.0)], vec![Outgoing, Decaying, Growing, Incoming]),
    ];
    let mut mismatches = 0;
    for (w, cl) in &sets {
        for bound in [4, 6, 8] {
            let got: BTreeSet<Key> = find_resonances(w, cl, bound).triples.iter().map(|t| t.relation_key()).collect();
            if got != brute_force(w, cl, bound) {
                mismatches += 1;
            }
        }
    }
    let unique = find_resonances(&sets[0].0, &sets[0].1, 8);
    let family = unique.triples.len() == 1 && {
        let t = unique.triples[0];
        (t.p, t.np, t.nq, t.nr) == (1, 2, 1, 1)
    };
    let empty = find_resonances(&sets[1].0, &sets[1].1, 8).triples.is_empty();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && family && empty && secs < 30.0,
        format!("{} sets x 3 bounds, {mismatches} mismatches, unique family {family}, independent set empty {empty}, {secs:.2} s", sets.len()),
    )
}

fn random_series(rng: &mut ChaCha8Rng, kmax: i64) -> Series {
    let mut s = Series::zeros(kmax);
    for k in -kmax..=kmax {
        s.set(k, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    s
}

/// Trapezoid rule over `theta_r` of the prepared profile times the
/// derivative of the other one.
fn quadrature(a: &Series, b: &Series, np: i64, nq: i64, nr: i64, tp: f64) -> C64 {
    let nodes = 8 * (a.kmax + b.kmax + 1) as usize * (nr.unsigned_abs() as usize + 1);
    let mut acc = C64::new(0.0, 0.0);
    for s in 0..nodes {
        let tr = 2.0 * PI * s as f64 / nodes as f64;
        let mut prepared = C64::new(0.0, 0.0);
        for k in (-a.kmax..=a.kmax).filter(|k| k % nq == 0) {
            let j = k / nq;
            prepared += a.get(k) * (I * ((j * np) as f64 * tp - (j * nr) as f64 * tr)).exp();
        }
        let db: C64 = (-b.kmax..=b.kmax).map(|k| b.get(k) * I * k as f64 * (I * k as f64 * tr).exp()).sum();
        acc += prepared * db;
    }
    acc / nodes as f64
}

fn interaction_law() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let triples = [(2, 1, 1), (3, 1, 2), (3, 2, 1), (1, 2, -1), (5, 3, 2), (-1, 1, -2)];
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let (np, nq, nr) = triples[case % triples.len()];
        let (ka, kb) = (rng.gen_range(1..7), rng.gen_range(1..7));
        let a = random_series(&mut rng, ka);
        let b = random_series(&mut rng, kb);
        let j = interaction_integral(&a, &b, np, nq, nr);
        for s in 0..7 {
            let tp = -1.3 + 0.9 * s as f64;
            worst = worst.max((j.eval(C64::new(tp, 0.0)) - quadrature(&a, &b, np, nq, nr, tp)).norm());
        }
    }
    let unit = Series::from_fn(1, |k| C64::new(if k == 1 { 1.0 } else { 0.0 }, 0.0));
    let single = interaction_integral(&unit, &unit, 2, 1, 1);
    let exact = (-single.kmax..=single.kmax).all(|k| single.get(k) == if k == 2 { I } else { C64::new(0.0, 0.0) });
    let secs = t.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && exact && secs < 5.0, format!("50 pairs, max deviation {worst:.2e}, single harmonic exact {exact}, {secs:.2} s"))
}

/// Diagonal system with `omega = (1, 2, 3)` at `beta = (1, 1)`, so that
/// `2 phi_2 = phi_1 + phi_3`.
fn resonant_table() -> (SystemSpec, ModeTable, ResonanceSet) {
    let diag = |d: [f64; 3]| RMat::from_fn(3, 3, |r, c| if r == c { d[r] } else { 0.0 });
    let a = vec![diag([1.0, 1.0, 1.0]), diag([0.0, 1.0, -4.0]), diag([-1.0, -1.0, 1.0])];
    let model = AffineModel { d: 2, a, da: Vec::new() };
    let b0 = RMat::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
    let sys = SystemSpec::new("diagonal", Arc::new(model), RMat::zeros(3, 3), b0, vec![0.0; 3]).unwrap();
    let mt = compute_modes(&sys, &[1.0, 1.0]).unwrap();
    let rs = resonances_of(&mt, 8);
    assert!(!rs.triples.is_empty());
    (sys, mt, rs)
}

/// Random coefficients on every index with at most two active phases.
fn random_polynomial(mt: &ModeTable, rng: &mut ChaCha8Rng) -> TrigPolynomial {
    let m = mt.len();
    let n = mt.n;
    let classes = mt.classes();
    let mut v = TrigPolynomial::new(m, n, 1);
    for q in 0..m {
        for r in q + 1..m {
            for a in -3i64..=3 {
                for b in -3i64..=3 {
                    let mut alpha = vec![0; m];
                    alpha[q] = a;
                    alpha[r] = b;
                    if alpha.iter().enumerate().all(|(i, x)| classes[i].admits(*x)) {
                        let val: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                        v.add(alpha, &val);
                    }
                }
            }
        }
    }
    v
}

fn corrector_exactness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut residual, mut identity): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    for beta in [HYPERBOLIC, ELLIPTIC] {
        let fx = Fixture::new(beta, fixture_grid());
        let sol = solve_profiles(&fx.context(), &pulse(), &HyperbolicOptions::default()).unwrap();
        let mut prev = TrigPolynomial::new(fx.mt.len(), fx.sys.n, fx.grid.nt * fx.grid.points());
        for it in sol.iterates.iter().take(3) {
            let cur = truncate_to_polynomial(it, &fx.mt, 1e-6);
            let g = assemble_g(&fx.sys, &fx.mt, &fx.grid, &cur, &prev);
            let h = corrector_rhs(&g, &fx.rs, &fx.mt).unwrap();
            let v1 = solve_corrector(&fx.sys, &fx.mt, &fx.rs, &h).unwrap().v1;
            let nonres = g.sub(&project_e_flat(&g, &fx.rs, &fx.mt).unwrap());
            residual = residual.max(apply_l_theta(&fx.sys, &fx.mt, &v1).sub(&nonres.scaled(C64::new(-1.0, 0.0))).max_abs());
            let samples: Vec<(f64, f64)> = (0..100).map(|_| (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..3.0))).collect();
            identity = identity.max(substitution_identity_defect(&g, &fx.rs, &fx.mt, &samples).unwrap());
            count += 1;
            prev = cur;
        }
    }
    // a resonant table, where collapsed and multi-phase exponentials differ
    let (sys, mt, rs) = resonant_table();
    let v = random_polynomial(&mt, &mut rng);
    let samples: Vec<(f64, f64)> = (0..100).map(|_| (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..3.0))).collect();
    identity = identity.max(substitution_identity_defect(&v, &rs, &mt, &samples).unwrap());
    let h = corrector_rhs(&v, &rs, &mt).unwrap();
    let v1 = solve_corrector(&sys, &mt, &rs, &h).unwrap().v1;
    let nonres = v.sub(&project_e_flat(&v, &rs, &mt).unwrap());
    residual = residual.max(apply_l_theta(&sys, &mt, &v1).sub(&nonres.scaled(C64::new(-1.0, 0.0))).max_abs());
    count += 1;
    let secs = t.elapsed().as_secs_f64();
    outcome(
        residual < 1e-10 && identity < 1e-10,
        format!("{count} right-hand sides (one on a resonant table), max residual {residual:.2e}, substitution identity defect {identity:.2e}, {secs:.2} s"),
    )
}

fn window(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        1.0 - smooth_cutoff(t / 0.3)
    }
}

fn trace_error(h: f64) -> f64 {
    let af = |t: f64| window(t) * (-0.5 * ((t - 0.5) / 0.12f64).powi(2)).exp();
    let bf = |t: f64| window(t) * 0.5 * (-0.5 * ((t - 0.45) / 0.1f64).powi(2)).exp();
    let nt = (1.0 / h).round() as usize + 1;
    let a: Vec<C64> = (0..nt).map(|i| C64::new(af(i as f64 * h), 0.0)).collect();
    let b: Vec<C64> = (0..nt).map(|i| C64::new(bf(i as f64 * h), 0.0)).collect();
    let ws = wave_from_traces(&a, &b, h, 1.0, 10);
    let mut err: f64 = 0.0;
    for i in 0..nt {
        let t = i as f64 * h;
        let s = |k: usize| ws.at(t - k as f64 * h, k);
        let d = (s(0) * -3.0 + s(1) * 4.0 - s(2)) / (2.0 * h);
        err = err.max((s(0) - a[i]).norm()).max((d - b[i]).norm());
    }
    err
}

fn elliptic_layer() -> Outcome {
    let t = Instant::now();
    let errs: Vec<f64> = [0.01, 0.005, 0.0025].iter().map(|h| trace_error(*h)).collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    let fx = Fixture::new(ELLIPTIC, fixture_grid());
    let sol = solve_profiles(&fx.context(), &pulse(), &HyperbolicOptions::default()).unwrap();
    let (leak, drift) = (sol.build.support_leak, sol.build.energy_drift);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        order >= 1.8 && leak < 1e-13 && drift < 1e-6,
        format!("trace order {order:.2}, max |sigma| at t <= 0 {leak:.1e}, energy drift {drift:.1e}, {secs:.2} s"),
    )
}

fn decay_law() -> Outcome {
    let t = Instant::now();
    let fx = Fixture::new(ELLIPTIC, ProfileGrid::new(0.4, 0.02, 0.5, 0.02, 1, 1.0, 4, 4.0).unwrap());
    let g = &fx.grid;
    let m = fx.mt.classes().iter().position(|c| *c == ModeClass::Decaying).unwrap();
    let r = &fx.mt.modes[m].r[0];
    let (n, np) = (fx.sys.n, g.points());
    let mut vals = vec![C64::new(0.0, 0.0); g.nt * np * n];
    for it in 0..g.nt {
        let bump = (-((g.t(it) - 0.2) / 0.08f64).powi(2)).exp();
        for ix in 0..g.nx {
            for i in 0..n {
                vals[(it * np + ix) * n + i] = r[i] * (g.x(ix) * bump);
            }
        }
    }
    let mut alpha = vec![0; fx.mt.len()];
    alpha[m] = 1;
    let mut poly = TrigPolynomial::new(fx.mt.len(), n, g.nt * np);
    poly.add(alpha, &vals);
    let rep = decay_check(&poly, &fx.mt, g, &[0.2, 0.1, 0.05, 0.025], 0.05, 8).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        (rep.l2_slope - 0.5).abs() <= 0.1 && rep.sup_decreasing && secs < 60.0,
        format!("L2 log-log slope {:.3} (target 0.5 +- 0.1), sup strictly decreasing {}, {secs:.2} s", rep.l2_slope, rep.sup_decreasing),
    )
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_pipeline(cfg: &Path, out: &Path) -> i32 {
    geoptics_cli::main_with_args(["geoptics", "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

struct Study {
    label: &'static str,
    errors: Vec<f64>,
    physical: Vec<f64>,
    error_decreasing: bool,
    physical_decreasing: bool,
    picard: Vec<(Vec<f64>, f64, bool)>,
}

fn convergence_studies() -> (Vec<Study>, f64) {
    let t = Instant::now();
    let mut out = Vec::new();
    for (label, file) in [("hyperbolic", "euler2d_hyperbolic.toml"), ("elliptic", "euler2d_elliptic.toml")] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_pipeline(&config(file), dir.path()), 0, "{label} run failed");
        let rep: Value = serde_json::from_slice(&fs::read(dir.path().join("convergence.json")).unwrap()).unwrap();
        let results = rep["results"].as_array().unwrap();
        out.push(Study {
            label,
            errors: results.iter().map(|r| r["error"]["total"].as_f64().unwrap()).collect(),
            physical: results.iter().map(|r| r["physical"].as_f64().unwrap()).collect(),
            error_decreasing: rep["error_decreasing"].as_bool().unwrap(),
            physical_decreasing: rep["physical_decreasing"].as_bool().unwrap(),
            picard: rep["picard"]
                .as_array()
                .unwrap()
                .iter()
                .map(|f| (floats(&f["errors"]), f["residual"].as_f64().unwrap(), f["decreasing"].as_bool().unwrap()))
                .collect(),
        });
    }
    (out, t.elapsed().as_secs_f64())
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn main_convergence(studies: &[Study], secs: f64) -> Outcome {
    let pass = studies.iter().all(|s| s.error_decreasing && s.physical_decreasing) && secs < 1800.0;
    let detail: Vec<String> = studies.iter().map(|s| format!("{}: E^1 {} physical {}", s.label, list(&s.errors), list(&s.physical))).collect();
    outcome(pass, format!("{}; {secs:.0} s", detail.join("; ")))
}

fn picard_diagnostic(studies: &[Study]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for s in studies {
        pass &= s.picard.len() == 3 && s.picard.iter().all(|p| p.2);
        let fits: Vec<String> = s.picard.iter().enumerate().map(|(n, p)| format!("n={} {} fit residual {:.2e}", n + 1, list(&p.0), p.1)).collect();
        detail.push(format!("{}: {}", s.label, fits.join(", ")));
    }
    outcome(pass, detail.join("; "))
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let codes = (run_pipeline(&config("golden.toml"), a.path()), run_pipeline(&config("golden.toml"), b.path()));
    let (fa, fb) = (collect(a.path()), collect(b.path()));
    let same = codes == (0, 0) && !fa.is_empty() && fa == fb;
    let secs = t.elapsed().as_secs_f64();
    outcome(same, format!("{} artifacts compared, identical {same}, {secs:.1} s", fa.len()))
}

fn collect(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.file_name().unwrap() == ".cache" {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn report(id: usize, name: &str, o: &Outcome) -> bool {
    println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut all = true;
    all &= report(1, "euler structure", &euler_structure());
    all &= report(2, "decomposition suite", &decomposition_suite());
    all &= report(3, "regular-frequency classifier", &classifier_region());
    all &= report(4, "resonance oracle", &resonance_oracle());
    all &= report(5, "interaction integral", &interaction_law());
    all &= report(6, "corrector exactness", &corrector_exactness());
    all &= report(7, "elliptic layer", &elliptic_layer());
    all &= report(8, "decay law", &decay_law());
    let (studies, secs) = convergence_studies();
    all &= report(9, "main convergence", &main_convergence(&studies, secs));
    all &= report(10, "simultaneous Picard diagnostic", &picard_diagnostic(&studies));
    all &= report(11, "determinism", &determinism());
    if !all {
        std::process::exit(1);
    }
}
