//! Stage implementations. Each stage writes its artifacts and a summary
//! fragment into its cache directory; upstream results are read back from
//! the cache or rebuilt from the config when they are cheap and exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use geoptics::assembly::{measure, study_inputs, summarize, ConvergenceReport};
use geoptics::elliptic::{solve_profiles, EllipticBuild, ProfileSolution};
use geoptics::modes::{boundary_basis_check, compute_modes, decomposition_report, ModeTable};
use geoptics::profile::{Key, ProfileContext, ProfileSet};
use geoptics::resonance::{classify_resonance, resonances_of, ResonanceSet};
use geoptics::singular::{solve_singular, SingularField, SingularGrid, SingularSolution};
use geoptics::system::{
    check_constant_multiplicity, check_noncharacteristic, check_solver_support, check_uniform_stability, random_samples, StabilityOptions, SystemSpec,
};
use geoptics::C64;
use log::info;
use serde::Serialize;
use serde_json::json;

use crate::cache::{read_arrays, write_arrays, Cache, Stage};
use crate::config::RunConfig;
use crate::output::{float, write_bytes, write_json, Table};
use crate::RunError;

/// Largest number of `x` rows written per snapshot table.
const MAX_ROWS_X: usize = 201;

pub struct Pipeline {
    pub cfg: RunConfig,
    pub cache: Cache,
    sys: Option<SystemSpec>,
    mt: Option<ModeTable>,
    rs: Option<ResonanceSet>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, cache_root: PathBuf) -> Self {
        let cache = Cache::new(cache_root, &cfg);
        Self { cfg, cache, sys: None, mt: None, rs: None }
    }

    /// Runs `stage`. With `build_upstream` missing upstream stages are run
    /// first; otherwise they must already be cached.
    pub fn run_stage(&mut self, stage: Stage, build_upstream: bool) -> Result<(), RunError> {
        for &up in stage.upstream() {
            if !self.cache.is_complete(up) {
                if build_upstream {
                    self.execute(up)?;
                } else {
                    return Err(RunError::MissingUpstream { stage, missing: up });
                }
            }
        }
        if build_upstream && self.cache.is_complete(stage) {
            info!("{stage}: cached");
            return Ok(());
        }
        self.execute(stage)
    }

    fn execute(&mut self, stage: Stage) -> Result<(), RunError> {
        info!("{stage}: running");
        let dir = self.cache.begin(stage)?;
        let summary = match stage {
            Stage::CheckAssumptions => self.check_assumptions(&dir)?,
            Stage::AnalyzeModes => self.analyze_modes(&dir)?,
            Stage::FindResonances => self.find_resonances(&dir)?,
            Stage::SolveProfiles => self.solve_profiles(&dir)?,
            Stage::SolveSingular => self.solve_singular(&dir)?,
            Stage::ConvergenceStudy => self.convergence_study(&dir)?,
        };
        write_bytes(&dir.join("summary.txt"), summary.as_bytes())?;
        self.cache.finish(stage)?;
        info!("{stage}: done");
        Ok(())
    }

    fn sys(&mut self) -> Result<&SystemSpec, RunError> {
        if self.sys.is_none() {
            self.sys = Some(self.cfg.system_spec()?);
        }
        Ok(self.sys.as_ref().unwrap())
    }

    fn modes(&mut self) -> Result<&ModeTable, RunError> {
        if self.mt.is_none() {
            let beta = self.cfg.beta.clone();
            let mt = compute_modes(self.sys()?, &beta).map_err(|e| stage_err(Stage::AnalyzeModes, e))?;
            self.mt = Some(mt);
        }
        Ok(self.mt.as_ref().unwrap())
    }

    fn resonances(&mut self) -> Result<&ResonanceSet, RunError> {
        if self.rs.is_none() {
            let bound = self.cfg.resonance.bound;
            let rs = resonances_of(self.modes()?, bound);
            self.rs = Some(rs);
        }
        Ok(self.rs.as_ref().unwrap())
    }

    fn context(&mut self) -> Result<ProfileContext, RunError> {
        let grid = self.cfg.profile_grid()?;
        self.resonances()?;
        let (sys, mt, rs) = (self.sys.as_ref().unwrap(), self.mt.as_ref().unwrap(), self.rs.as_ref().unwrap());
        check_solver_support(sys).map_err(|e| stage_err(Stage::SolveProfiles, e))?;
        ProfileContext::new(sys, mt, rs, &grid).map_err(|e| stage_err(Stage::SolveProfiles, e))
    }

    fn check_assumptions(&mut self, dir: &Path) -> Result<String, RunError> {
        let s = Stage::CheckAssumptions;
        let checks = self.cfg.checks.clone();
        let (seed, margin) = (self.cfg.seed, self.cfg.tolerances.stability_margin);
        let sys = self.sys()?;
        let nonchar = check_noncharacteristic(sys).map_err(|e| stage_err(s, e))?;
        let samples = random_samples(sys, checks.multiplicity_samples, checks.sample_radius, seed);
        let mult = check_constant_multiplicity(sys, &samples).map_err(|e| stage_err(s, e))?;
        let opts = StabilityOptions { margin, seed, ..StabilityOptions::default() };
        let stab = check_uniform_stability(sys, checks.stability_samples, &opts).map_err(|e| stage_err(s, e))?;
        let trivial = sys.p == sys.n;
        let report = json!({
            "system": sys.name,
            "n": sys.n,
            "d": sys.d,
            "p": sys.p,
            "trivial": trivial,
            "noncharacteristic": nonchar,
            "multiplicity": { "samples": samples.len(), "pattern": mult.multiplicities, "pass": mult.pass },
            "stability": stab,
        });
        write_json(&dir.join("artifacts/assumptions.json"), &report)?;
        if !nonchar.pass {
            return Err(RunError::Assumption { stage: s, detail: format!("noncharacteristic check failed: {nonchar:?}") });
        }
        if !stab.pass {
            return Err(RunError::Assumption { stage: s, detail: format!("uniform stability fails (sigma_min {:e})", stab.min_sigma) });
        }
        let mut out = String::new();
        writeln!(out, "[{s}]").unwrap();
        writeln!(out, "system {} (N = {}, d = {}, p = {}){}", sys.name, sys.n, sys.d, sys.p, if trivial { ", all characteristics incoming" } else { "" })
            .unwrap();
        writeln!(out, "A_d(0) eigenvalues {}", list(&nonchar.eigenvalues)).unwrap();
        writeln!(out, "multiplicities {:?} over {} samples", mult.multiplicities, samples.len()).unwrap();
        writeln!(out, "stability: min sigma {} over {} samples ({} skipped)", float(stab.min_sigma), stab.samples_used, stab.samples_skipped).unwrap();
        Ok(out)
    }

    fn analyze_modes(&mut self, dir: &Path) -> Result<String, RunError> {
        let s = Stage::AnalyzeModes;
        let margin = self.cfg.tolerances.stability_margin;
        self.modes()?;
        let (sys, mt) = (self.sys.as_ref().unwrap(), self.mt.as_ref().unwrap());
        let dec = decomposition_report(sys, mt);
        let basis = boundary_basis_check(mt, sys, margin).map_err(|e| stage_err(s, e))?;
        let classes: Vec<&str> = mt.modes.iter().map(|m| m.class.label()).collect();
        let report = json!({
            "beta": mt.beta,
            "count": mt.len(),
            "classes": classes,
            "modes": mt.modes,
            "decomposition": dec,
            "decomposition_max_error": dec.max_error(),
            "boundary_basis": basis,
        });
        write_json(&dir.join("artifacts/modes.json"), &report)?;
        let mut out = String::new();
        writeln!(out, "[{s}]").unwrap();
        writeln!(out, "beta {} : M = {}, classes {}", list(&mt.beta), mt.len(), classes.join(" ")).unwrap();
        for (i, m) in mt.modes.iter().enumerate() {
            writeln!(out, "  mode {i}: omega = {} {} i, multiplicity {}, class {}", float(m.omega.re), float(m.omega.im), m.multiplicity, m.class.label())
                .unwrap();
        }
        writeln!(out, "decomposition max error {}", float(dec.max_error())).unwrap();
        Ok(out)
    }

    fn find_resonances(&mut self, dir: &Path) -> Result<String, RunError> {
        let s = Stage::FindResonances;
        self.resonances()?;
        let (mt, rs) = (self.mt.as_ref().unwrap(), self.rs.as_ref().unwrap());
        let classes = mt.classes();
        let kinds = rs.triples.iter().map(|t| classify_resonance(t, &classes)).collect::<Result<Vec<_>, _>>().map_err(|e| stage_err(s, e))?;
        #[derive(Serialize)]
        struct Entry<'a> {
            triple: &'a geoptics::resonance::Triple,
            kind: geoptics::resonance::ResonanceKind,
        }
        let entries: Vec<Entry> = rs.triples.iter().zip(&kinds).map(|(triple, kind)| Entry { triple, kind: *kind }).collect();
        let report = json!({
            "bound": rs.bound,
            "triples": entries,
            "multiple_families": rs.multiple_families,
            "characteristic": rs.characteristic,
            "near_resonances": rs.near_resonances,
        });
        write_json(&dir.join("artifacts/resonances.json"), &report)?;
        let mut out = String::new();
        writeln!(out, "[{s}]").unwrap();
        writeln!(out, "bound {}: {} triples, {} near-resonances", rs.bound, rs.triples.len(), rs.near_resonances.len()).unwrap();
        for (t, k) in rs.triples.iter().zip(&kinds) {
            writeln!(out, "  {} phi_{} = {} phi_{} + {} phi_{} ({k:?})", t.np, t.p, t.nq, t.q, t.nr, t.r).unwrap();
        }
        Ok(out)
    }

    fn solve_profiles(&mut self, dir: &Path) -> Result<String, RunError> {
        let s = Stage::SolveProfiles;
        let ctx = self.context()?;
        let sol = solve_profiles(&ctx, &self.cfg.forcing, &self.cfg.hyperbolic_options()).map_err(|e| stage_err(s, e))?;
        let art = dir.join("artifacts/profiles");
        let mut picard = Table::new(&["iteration", "change"]);
        for (i, c) in sol.changes.iter().enumerate() {
            picard.push(vec![(i + 1).to_string(), float(*c)]);
        }
        picard.write(&art.join("picard.csv"))?;
        profile_table(&ctx, &sol.profile, Snapshot::Boundary).write(&art.join("boundary.csv"))?;
        profile_table(&ctx, &sol.profile, Snapshot::Final).write(&art.join("final.csv"))?;
        let mut traces = Table::new(&["t", "y", "mode", "component", "harmonic", "a_re", "a_im", "b_re", "b_im"]);
        let g = &ctx.grid;
        for tr in &sol.traces {
            for it in 0..g.nt {
                for iy in 0..g.ny {
                    let (a, b) = (tr.a[it * g.ny + iy], tr.b[it * g.ny + iy]);
                    traces.push(vec![
                        float(g.t(it)),
                        float(g.y(iy)),
                        tr.mode.to_string(),
                        tr.comp.to_string(),
                        tr.harmonic.to_string(),
                        float(a.re),
                        float(a.im),
                        float(b.re),
                        float(b.im),
                    ]);
                }
            }
        }
        if !traces.is_empty() {
            traces.write(&art.join("elliptic_traces.csv"))?;
        }
        let stats = json!({
            "iterations": sol.changes.len(),
            "kept_iterates": sol.iterates.len(),
            "max_abs": sol.profile.max_abs(),
            "energy_drift": sol.build.energy_drift,
            "support_leak": sol.build.support_leak,
            "boundary_residual": sol.residual_boundary,
            "slots": ctx.layout.nslots(),
        });
        write_json(&art.join("stats.json"), &stats)?;
        let mut arrays: Vec<Vec<f64>> = vec![sol.changes.clone(), vec![sol.build.energy_drift, sol.build.support_leak, sol.residual_boundary]];
        arrays.push(interleave(&sol.profile.data));
        for it in &sol.iterates {
            arrays.push(interleave(&it.data));
        }
        let refs: Vec<&[f64]> = arrays.iter().map(|a| a.as_slice()).collect();
        write_arrays(&dir.join("profiles.bin"), &refs)?;
        let mut out = String::new();
        writeln!(out, "[{s}]").unwrap();
        writeln!(out, "Picard iterations {}, last change {}", sol.changes.len(), float(sol.changes.last().copied().unwrap_or(0.0))).unwrap();
        writeln!(out, "max |profile| {}", float(sol.profile.max_abs())).unwrap();
        writeln!(
            out,
            "elliptic layer: energy drift {}, support leak {}, boundary residual {}",
            float(sol.build.energy_drift),
            float(sol.build.support_leak),
            float(sol.residual_boundary)
        )
        .unwrap();
        Ok(out)
    }

    fn load_profiles(&mut self, ctx: &ProfileContext) -> Result<ProfileSolution, RunError> {
        let arrays = read_arrays(&self.cache.dir(Stage::SolveProfiles).join("profiles.bin"))?;
        let set = |a: &[f64]| -> Result<ProfileSet, RunError> {
            let mut p = ProfileSet::zeros(&ctx.grid, &ctx.layout);
            if a.len() != 2 * p.data.len() {
                return Err(RunError::CorruptCache(Stage::SolveProfiles));
            }
            p.data = a.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
            Ok(p)
        };
        if arrays.len() < 3 || arrays[1].len() != 3 {
            return Err(RunError::CorruptCache(Stage::SolveProfiles));
        }
        let profile = set(&arrays[2])?;
        let iterates = arrays[3..].iter().map(|a| set(a)).collect::<Result<Vec<_>, _>>()?;
        Ok(ProfileSolution {
            profile,
            iterates,
            changes: arrays[0].clone(),
            traces: Vec::new(),
            build: EllipticBuild { energy_drift: arrays[1][0], support_leak: arrays[1][1] },
            residual_boundary: arrays[1][2],
        })
    }

    fn singular_grid(&self, eps: f64) -> Result<SingularGrid, RunError> {
        let o = self.cfg.singular_options();
        SingularGrid::new(eps, &self.cfg.profile_grid()?, o.resolution, o.n_theta0).map_err(|e| stage_err(Stage::SolveSingular, e))
    }

    fn solve_singular(&mut self, dir: &Path) -> Result<String, RunError> {
        let s = Stage::SolveSingular;
        let forcing = self.cfg.forcing.clone();
        let opts = self.cfg.singular_options();
        let beta = self.cfg.beta.clone();
        let epsilons = self.cfg.epsilons.clone();
        let mut out = String::new();
        writeln!(out, "[{s}] method {:?}", opts.method).unwrap();
        for (i, &eps) in epsilons.iter().enumerate() {
            let grid = self.singular_grid(eps)?;
            let sys = self.sys()?;
            check_solver_support(sys).map_err(|e| stage_err(s, e))?;
            info!("{s}: eps = {eps}, nx = {}", grid.nx);
            let sol = solve_singular(sys, &beta, &forcing, &grid, &opts).map_err(|e| stage_err(s, e))?;
            let art = dir.join(format!("artifacts/singular/eps_{eps}"));
            field_table(&sol.field, Snapshot::Boundary).write(&art.join("boundary.csv"))?;
            field_table(&sol.field, Snapshot::Final).write(&art.join("final.csv"))?;
            let mut picard = Table::new(&["iteration", "max_abs", "change"]);
            for (k, f) in sol.iterates.iter().enumerate() {
                let change = sol.changes.get(k).map(|c| float(*c)).unwrap_or_default();
                picard.push(vec![(k + 1).to_string(), float(f.max_abs()), change]);
            }
            picard.write(&art.join("picard.csv"))?;
            let mut arrays: Vec<&[f64]> = Vec::new();
            let meta = [sol.iterates.len() as f64];
            arrays.push(&meta);
            arrays.push(&sol.changes);
            for f in std::iter::once(&sol.field).chain(&sol.iterates) {
                arrays.extend(f.snapshots.iter().map(|v| v.as_slice()));
            }
            write_arrays(&dir.join(format!("singular_{i}.bin")), &arrays)?;
            writeln!(out, "eps {}: nx {}, max |U| {}, Picard iterates {}", float(eps), grid.nx, float(sol.field.max_abs()), sol.iterates.len()).unwrap();
        }
        Ok(out)
    }

    fn load_singular(&mut self, i: usize, eps: f64) -> Result<SingularSolution, RunError> {
        let grid = self.singular_grid(eps)?;
        let n = self.sys()?.n;
        let arrays = read_arrays(&self.cache.dir(Stage::SolveSingular).join(format!("singular_{i}.bin")))?;
        let bad = || RunError::CorruptCache(Stage::SolveSingular);
        let count = arrays.first().and_then(|m| m.first()).ok_or_else(bad)?.round() as usize;
        if arrays.len() != 2 + (count + 1) * grid.nt {
            return Err(bad());
        }
        let mut fields = arrays[2..].chunks_exact(grid.nt).map(|c| SingularField { grid: grid.clone(), n, snapshots: c.to_vec() });
        let field = fields.next().ok_or_else(bad)?;
        Ok(SingularSolution { field, iterates: fields.collect(), changes: arrays[1].clone(), method: self.cfg.singular.method })
    }

    fn convergence_study(&mut self, dir: &Path) -> Result<String, RunError> {
        let s = Stage::ConvergenceStudy;
        let ctx = self.context()?;
        let profiles = self.load_profiles(&ctx)?;
        let truncation = self.cfg.tolerances.truncation;
        let inputs = study_inputs(&ctx, &profiles, self.cfg.tolerances.keep, truncation).map_err(|e| stage_err(s, e))?;
        let mut results = Vec::new();
        for (i, eps) in self.cfg.epsilons.clone().into_iter().enumerate() {
            let sol = self.load_singular(i, eps)?;
            results.push(measure(&ctx, &inputs, &sol.field.grid, &sol).map_err(|e| stage_err(s, e))?);
        }
        let report = summarize(&inputs, results, truncation);
        let art = dir.join("artifacts");
        convergence_table(&report).write(&art.join("convergence.csv"))?;
        write_json(&art.join("convergence.json"), &report)?;
        let mut out = String::new();
        writeln!(out, "[{s}] truncation {}", float(truncation)).unwrap();
        for r in &report.results {
            writeln!(
                out,
                "eps {}: E^1 error {}, physical error {}, |U| in E^2 {}",
                float(r.eps),
                float(r.error.total),
                float(r.physical),
                float(r.solution_norm.total)
            )
            .unwrap();
        }
        writeln!(out, "E^1 error strictly decreasing: {}", report.error_decreasing).unwrap();
        writeln!(out, "physical error strictly decreasing: {}", report.physical_decreasing).unwrap();
        for f in &report.picard {
            writeln!(
                out,
                "Picard n = {}: errors {}, fit a = {} b = {} residual {}, decreasing {}",
                f.n,
                list(&f.errors),
                float(f.a),
                float(f.b),
                float(f.residual),
                f.decreasing
            )
            .unwrap();
        }
        Ok(out)
    }
}

fn stage_err(stage: Stage, source: geoptics::Error) -> RunError {
    RunError::Stage { stage, source }
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| float(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn interleave(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

#[derive(Clone, Copy)]
enum Snapshot {
    /// Every time level at `x_d = 0`.
    Boundary,
    /// The last time level, subsampled in `x_d`.
    Final,
}

fn stride(nx: usize) -> usize {
    nx.div_ceil(MAX_ROWS_X).max(1)
}

fn profile_table(ctx: &ProfileContext, p: &ProfileSet, which: Snapshot) -> Table {
    let g = &ctx.grid;
    let l = &ctx.layout;
    let mut t = Table::new(&["t", "y", "x", "mode", "component", "harmonic", "re", "im"]);
    let (levels, xs): (Vec<usize>, Vec<usize>) = match which {
        Snapshot::Boundary => ((0..g.nt).collect(), vec![0]),
        Snapshot::Final => (vec![g.nt - 1], (0..g.nx).step_by(stride(g.nx)).collect()),
    };
    for &it in &levels {
        for (slot, &(ki, k)) in l.slot_key.iter().enumerate() {
            let (mode, harmonic) = match l.keys[ki] {
                Key::Mean => ("mean".to_string(), 0),
                Key::Wave { m, j } => (m.to_string(), j),
            };
            let field = p.slot_field(it, slot);
            for iy in 0..g.ny {
                for &ix in &xs {
                    let v = field[iy * g.nx + ix];
                    t.push(vec![float(g.t(it)), float(g.y(iy)), float(g.x(ix)), mode.clone(), k.to_string(), harmonic.to_string(), float(v.re), float(v.im)]);
                }
            }
        }
    }
    t
}

fn field_table(f: &SingularField, which: Snapshot) -> Table {
    let g = &f.grid;
    let mut header: Vec<String> = ["t", "y", "x", "theta0"].iter().map(|s| s.to_string()).collect();
    header.extend((0..f.n).map(|i| format!("u{i}")));
    let mut t = Table::new(&header);
    let (levels, xs): (Vec<usize>, Vec<usize>) = match which {
        Snapshot::Boundary => ((0..g.nt).collect(), vec![0]),
        Snapshot::Final => (vec![g.nt - 1], (0..g.nx).step_by(stride(g.nx)).collect()),
    };
    for &it in &levels {
        let snap = &f.snapshots[it];
        for &ix in &xs {
            for iy in 0..g.ny {
                for k in 0..g.n_theta0 {
                    let mut row = vec![float(g.t(it)), float(g.y(iy)), float(g.x(ix)), float(g.theta(k))];
                    row.extend((0..f.n).map(|i| float(snap[f.index(ix, iy, i, k)])));
                    t.push(row);
                }
            }
        }
    }
    t
}

fn convergence_table(r: &ConvergenceReport) -> Table {
    let keep = r.picard.len();
    let mut header: Vec<String> =
        ["eps", "nx", "error_sup", "error_l2", "error_e1", "physical", "solution_e2", "boundary_h3"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=keep).map(|n| format!("picard_{n}")));
    let mut t = Table::new(&header);
    for e in &r.results {
        let mut row = vec![
            float(e.eps),
            e.nx.to_string(),
            float(e.error.sup),
            float(e.error.l2),
            float(e.error.total),
            float(e.physical),
            float(e.solution_norm.total),
            float(e.boundary_norm),
        ];
        row.extend((0..keep).map(|n| e.picard.get(n).map(|x| float(*x)).unwrap_or_default()));
        t.push(row);
    }
    t
}
