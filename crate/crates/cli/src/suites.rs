use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ultrametriclab::cells::CellGroup;
use ultrametriclab::group::{CosetWindow, GroupDescriptor, GroupElement};
use ultrametriclab::kernels::{
    character_sphere_integral, convolve_radial, convolve_radial_tail, fundamental_solution_profile,
    fundamental_solution_via_heat, graded_residual, heat_estimate_ratio, heat_profile_abelian, pair,
    radial_convolution_shell, riesz_pair, riesz_potential, riesz_profile, write_fundamental_table, write_heat_table,
    Setting, ShellLaw,
};
use ultrametriclab::padic::{frac_p_f64, p_pow};
use ultrametriclab::spectral::{
    self, directional_symbol_quadrature, engel_heat_kernel, engel_operator, schrodinger_operator, symbol_matrix,
    EngelTruncation, HeisenbergSpectral, RepPoint, RepWindow, SymbolOp, Truncation,
};
use ultrametriclab::testfn::TestFunction;
use ultrametriclab::vt::{directional_vt_at, jump_kernel, jump_kernel_series, vt_apply, vt_compact_apply};

use crate::config::{GroupChoice, Suite, SuiteConfig};
use crate::report::{CheckResult, Report};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Accumulates one check: the worst error, the number of failed exact
/// conditions, and the first failure verbatim.
pub struct Probe {
    tol: f64,
    worst: f64,
    failures: usize,
    first: Option<String>,
    notes: Vec<String>,
}

impl Probe {
    fn new(tol: f64) -> Self {
        Probe { tol, worst: 0.0, failures: 0, first: None, notes: Vec::new() }
    }

    /// Records an error; NaN counts as infinite.
    pub fn err(&mut self, e: f64, at: impl FnOnce() -> String) {
        let e = if e.is_nan() { f64::INFINITY } else { e };
        self.worst = self.worst.max(e);
        if e > self.tol && self.first.is_none() {
            self.first = Some(format!("{} (error {e:.3e})", at()));
        }
    }

    pub fn require(&mut self, ok: bool, at: impl FnOnce() -> String) {
        if !ok {
            self.failures += 1;
            self.first.get_or_insert_with(at);
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

enum Kind {
    /// Worst error against a tolerance that --tol overrides.
    Error(f64),
    /// A fixed bound on a measured ratio.
    Bound(f64),
    /// Exact: the measured value is the number of failed conditions.
    Count,
}

struct Runner<'a> {
    cfg: &'a SuiteConfig,
    rng: ChaCha8Rng,
    report: Report,
}

impl<'a> Runner<'a> {
    fn run(&mut self, name: impl Into<String>, kind: Kind, body: impl FnOnce(&mut Probe, &mut ChaCha8Rng) -> Result<()>) -> Result<()> {
        let tol = match kind {
            Kind::Error(t) => self.cfg.tol.unwrap_or(t),
            Kind::Bound(b) => b,
            Kind::Count => 0.0,
        };
        let mut probe = Probe::new(tol);
        let start = Instant::now();
        body(&mut probe, &mut self.rng)?;
        let runtime = start.elapsed();
        let measured = match kind {
            Kind::Count => probe.failures as f64,
            _ if probe.failures > 0 => f64::INFINITY,
            _ => probe.worst,
        };
        let mut detail: Vec<String> = probe.first.into_iter().map(|f| format!("first failure: {f}")).collect();
        detail.extend(probe.notes);
        self.report.checks.push(CheckResult {
            name: name.into(),
            measured,
            tolerance: tol,
            passed: measured <= tol,
            runtime,
            detail: (!detail.is_empty()).then(|| detail.join("; ")),
        });
        Ok(())
    }

    fn error(&mut self, name: impl Into<String>, tol: f64, body: impl FnOnce(&mut Probe, &mut ChaCha8Rng) -> Result<()>) -> Result<()> {
        self.run(name, Kind::Error(tol), body)
    }

    fn bound(&mut self, name: impl Into<String>, bound: f64, body: impl FnOnce(&mut Probe, &mut ChaCha8Rng) -> Result<()>) -> Result<()> {
        self.run(name, Kind::Bound(bound), body)
    }

    fn count(&mut self, name: impl Into<String>, body: impl FnOnce(&mut Probe, &mut ChaCha8Rng) -> Result<()>) -> Result<()> {
        self.run(name, Kind::Count, body)
    }

    fn table(&mut self, name: String, bytes: Vec<u8>) {
        self.report.tables.push((name, bytes));
    }
}

/// Runs `suite` under `cfg`. Randomized checks draw from one ChaCha stream
/// seeded by `cfg.seed`, in check order, so reports are reproducible.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Report> {
    cfg.validate()?;
    let mut r = Runner { cfg, rng: ChaCha8Rng::seed_from_u64(cfg.seed), report: Report::new(suite, cfg.seed) };
    match suite {
        Suite::GroupAxioms => group_axioms(&mut r)?,
        Suite::FundamentalCompact => fundamental_compact(&mut r)?,
        Suite::FundamentalLc => fundamental_lc(&mut r)?,
        Suite::FundamentalGraded => fundamental_graded(&mut r)?,
        Suite::RieszSemigroup => riesz_semigroup(&mut r)?,
        Suite::HeatAbelian => heat_abelian(&mut r)?,
        Suite::Potentials => potentials(&mut r)?,
        Suite::JumpKernel => jump_kernels(&mut r)?,
        Suite::Representations => representations(&mut r)?,
        Suite::HeatHeisenberg => heat_heisenberg(&mut r)?,
        Suite::HeatEngel => heat_engel(&mut r)?,
        Suite::Homogeneity => homogeneity(&mut r)?,
        Suite::CrossValidation => cross_validation(&mut r)?,
        Suite::Plancherel => plancherel(&mut r)?,
    }
    Ok(r.report)
}

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn random_real(window: CosetWindow, rng: &mut ChaCha8Rng) -> Result<TestFunction> {
    let v: Vec<f64> = (0..window.cell_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(TestFunction::from_real(window, &v)?)
}

fn random_element(desc: GroupDescriptor, rng: &mut ChaCha8Rng, bound: i64) -> Result<GroupElement> {
    let c: Vec<i64> = (0..desc.dim()).map(|_| rng.gen_range(-bound..=bound)).collect();
    Ok(GroupElement::from_ints(desc, &c)?)
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Tag for file names: 0.5 → "0.5", 2 → "2".
fn tag(x: f64) -> String {
    format!("{x}")
}

/// Largest |diff| per shell {|x| = p^m}; the identity cell stands for the
/// innermost ball and is filed under shell −L_in.
fn shell_errors(diff: &TestFunction) -> Result<BTreeMap<i64, f64>> {
    let w = diff.window();
    let mut out = BTreeMap::new();
    for (g, v) in w.reps()?.iter().zip(diff.values()) {
        let m = g.level().map_or(-w.l_in(), |n| -n);
        let e = out.entry(m).or_insert(0.0f64);
        *e = e.max(v.norm());
    }
    Ok(out)
}

fn fundamental_table(profile: &ultrametriclab::kernels::RadialProfile, errors: &BTreeMap<i64, f64>) -> Result<Vec<u8>> {
    let rows: Vec<(i64, f64, f64)> = errors.iter().map(|(&m, &e)| (m, profile.shell(m), e)).collect();
    let mut buf = Vec::new();
    write_fundamental_table(&mut buf, &rows)?;
    Ok(buf)
}

fn merge_max(into: &mut BTreeMap<i64, f64>, from: BTreeMap<i64, f64>) {
    for (m, e) in from {
        let slot = into.entry(m).or_insert(0.0);
        *slot = slot.max(e);
    }
}

fn heisenberg_only(cfg: &SuiteConfig, what: &str) -> Result<()> {
    match (cfg.group, cfg.d) {
        (Some(GroupChoice::Qp | GroupChoice::Engel), _) => {
            Err(CliError::Invalid(format!("{what} runs on the Heisenberg group only")))
        }
        (_, Some(d)) if d != 1 => Err(CliError::Invalid(format!("{what} is implemented for ℍ_1 only (got d = {d})"))),
        _ => Ok(()),
    }
}

fn group_axioms(r: &mut Runner) -> Result<()> {
    let descs = match r.cfg.descriptor(if r.cfg.group == Some(GroupChoice::Engel) { 5 } else { 3 })? {
        Some(d) => vec![d],
        None => vec![GroupDescriptor::abelian(3, 3)?, GroupDescriptor::heisenberg(3, 1)?, GroupDescriptor::engel(5)?],
    };
    let trials = r.cfg.trials.unwrap_or(1000);
    let dens = [1i64, 2, 3, 4, 5, 7, 9, 25, 27];
    for desc in descs {
        r.count(format!("associativity, identity and inverses on {desc} ({trials} triples)"), |c, rng| {
            let e = GroupElement::identity(desc);
            let mut sample = || -> Result<GroupElement> {
                let coords =
                    (0..desc.dim()).map(|_| rat(rng.gen_range(-60..=60), dens[rng.gen_range(0..dens.len())])).collect();
                Ok(GroupElement::new(desc, coords)?)
            };
            for _ in 0..trials {
                let (a, b, g) = (sample()?, sample()?, sample()?);
                let left = a.mul(&b)?.mul(&g)?;
                let right = a.mul(&b.mul(&g)?)?;
                c.require(left == right, || format!("(ab)g ≠ a(bg) for a = {a}, b = {b}, g = {g}"));
                c.require(a.mul(&e)? == a && e.mul(&a)? == a, || format!("identity fails at {a}"));
                c.require(a.mul(&a.inverse())?.is_identity(), || format!("right inverse fails at {a}"));
                c.require(a.inverse().mul(&a)?.is_identity(), || format!("left inverse fails at {a}"));
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn fundamental_compact(r: &mut Runner) -> Result<()> {
    let level = r.cfg.level.unwrap_or(3);
    for p in r.cfg.primes_or(&[3]) {
        let d = GroupDescriptor::abelian(p, 1)?;
        let w = CosetWindow::new(d, 0, level)?;
        for alpha in r.cfg.alphas_or(&[0.5, 1.0, 2.3]) {
            let e = fundamental_solution_profile(alpha, Setting::Compact, d)?;
            let mut shells = BTreeMap::new();
            r.error(format!("max|D^α(f*E_α) − f| on Z_{p}, α = {alpha}, level {level}"), 1e-8, |c, _| {
                for (i, f) in TestFunction::basis_mean_zero(w).iter().enumerate() {
                    let u = convolve_radial(f, &e)?.values;
                    let diff = vt_compact_apply(&u, alpha, 0)?.sub(f)?;
                    let errs = shell_errors(&diff)?;
                    c.err(errs.values().copied().fold(0.0, f64::max), || format!("basis function {i}"));
                    merge_max(&mut shells, errs);
                }
                Ok(())
            })?;
            r.table(format!("fundamental_compact_p{p}_alpha{}.csv", tag(alpha)), fundamental_table(&e, &shells)?);
        }
    }
    Ok(())
}

fn fundamental_lc(r: &mut Runner) -> Result<()> {
    let (l_out, l_in) = (r.cfg.level_out.unwrap_or(0), r.cfg.level.unwrap_or(2));
    for p in r.cfg.primes_or(&[2, 3]) {
        let d = GroupDescriptor::abelian(p, 1)?;
        let w = CosetWindow::new(d, l_out, l_in)?;
        for alpha in r.cfg.alphas_or(&[0.7]) {
            let e = fundamental_solution_profile(alpha, Setting::LocallyCompact, d)?;
            let mut shells = BTreeMap::new();
            r.error(format!("max|f * D^α E_α − f| on Q_{p}, α = {alpha}, mean-zero basis"), 1e-8, |c, _| {
                for (i, f) in TestFunction::basis_mean_zero(w).iter().enumerate() {
                    let g = vt_apply(f, alpha, None)?;
                    let errs = shell_errors(&convolve_radial_tail(&g, &e, None)?.sub(f)?)?;
                    c.err(errs.values().copied().fold(0.0, f64::max), || format!("basis function {i}"));
                    merge_max(&mut shells, errs);
                }
                Ok(())
            })?;
            r.error(format!("truncated reconstruction error = residual term on Q_{p}, α = {alpha}"), 1e-8, |c, rng| {
                for (name, f) in [("1_{G_0}", TestFunction::indicator_subgroup(w, l_out)?), ("random", random_real(w, rng)?)] {
                    let g = vt_apply(&f, alpha, None)?;
                    for l in [l_out, l_out - 1, l_out - 3] {
                        let part = convolve_radial_tail(&g, &e, Some(l))?;
                        let res = graded_residual(&f, alpha, l)?;
                        for v in f.sub(&part)?.values() {
                            c.err((v - res).norm(), || format!("f = {name}, cutoff l = {l}"));
                        }
                    }
                }
                Ok(())
            })?;
            r.table(format!("fundamental_lc_p{p}_alpha{}.csv", tag(alpha)), fundamental_table(&e, &shells)?);
        }
    }
    Ok(())
}

fn fundamental_graded(r: &mut Runner) -> Result<()> {
    let desc = r.cfg.descriptor(3)?.unwrap_or(GroupDescriptor::heisenberg(r.cfg.prime_or(3), r.cfg.d.unwrap_or(1))?);
    let w = CosetWindow::new(desc, r.cfg.level_out.unwrap_or(0), r.cfg.level.unwrap_or(2))?;
    let mut samples = Vec::new();
    for _ in 0..r.cfg.trials.unwrap_or(2) {
        samples.push(("random", random_real(w, &mut r.rng)?.project_mean_zero()));
    }
    if w.depth() > 0 {
        samples.push(("1_{G_(L_out+1)}", TestFunction::indicator_subgroup(w, w.l_out() + 1)?.project_mean_zero()));
    }
    samples.push(("cell indicator", TestFunction::indicator_cell(w, w.cell_count() * 2 / 3)?.project_mean_zero()));
    for alpha in r.cfg.alphas_or(&[1.2, 2.0]) {
        let e = fundamental_solution_profile(alpha, Setting::Graded, desc)?;
        let mut shells = BTreeMap::new();
        r.error(format!("max|f * D^α E_α − f| on {desc}, α = {alpha}, window {w}"), 1e-6, |c, _| {
            for (name, f) in &samples {
                let g = vt_apply(f, alpha, None)?;
                let errs = shell_errors(&convolve_radial_tail(&g, &e, None)?.sub(f)?)?;
                c.err(errs.values().copied().fold(0.0, f64::max), || format!("f = {name}"));
                merge_max(&mut shells, errs);
            }
            Ok(())
        })?;
        r.table(format!("fundamental_graded_{}_alpha{}.csv", desc.tag(), tag(alpha)), fundamental_table(&e, &shells)?);
    }
    Ok(())
}

fn riesz_semigroup(r: &mut Runner) -> Result<()> {
    let orders = r.cfg.alphas_or(&[0.3, 0.6, 1.7]);
    for p in r.cfg.primes_or(&[3]) {
        let d = GroupDescriptor::abelian(p, 1)?;
        let w = CosetWindow::new(d, 0, r.cfg.level.unwrap_or(3))?;
        let basis = TestFunction::basis_mean_zero(w);
        r.error(format!("⟨r_s * r_t, f⟩ = ⟨r_(s+t), f⟩ on Z_{p}, s, t ∈ {orders:?}"), 1e-9, |c, _| {
            for &s in &orders {
                let rs = riesz_profile(s, d)?;
                for &t in &orders {
                    let rt = riesz_profile(t, d)?;
                    for (i, f) in basis.iter().enumerate() {
                        let g = convolve_radial(f, &rs)?.values;
                        let e = (pair(&rt, &g)? - riesz_pair(s + t, f)?).norm();
                        c.err(e, || format!("s = {s}, t = {t}, basis function {i}"));
                    }
                }
            }
            Ok(())
        })?;
        let trials = r.cfg.trials.unwrap_or(5);
        r.error(format!("⟨r_1e-6, f⟩ ≈ f(e) on Z_{p}, {trials} random f"), 1e-4, |c, rng| {
            for i in 0..trials {
                let f = random_real(w, rng)?;
                c.err((riesz_pair(1e-6, &f)? - f.values()[0]).norm(), || format!("random f #{i}"));
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// S_k(x) by summing the character over the shell p^{−k}Z_p^d ∖ p^{1−k}Z_p^d
/// in cosets of p^n Z_p^d.
fn brute_sphere(p: u64, x: &[BigRational], k: i64, n: i64) -> f64 {
    let d = x.len();
    let per = (p as i64).pow((k + n) as u32);
    let cell = (p as f64).powf(-(n as f64) * d as f64);
    let scale = p_pow(p, -k);
    let mut total = 0.0;
    let mut idx = vec![0i64; d];
    loop {
        if idx.iter().any(|&j| j % p as i64 != 0) {
            let dot: BigRational = idx.iter().zip(x).map(|(&j, xi)| rat(j, 1) * &scale * xi).sum();
            total += (std::f64::consts::TAU * frac_p_f64(&dot, p)).cos() * cell;
        }
        let mut c = 0;
        loop {
            if c == d {
                return total;
            }
            idx[c] += 1;
            if idx[c] < per {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

fn heat_abelian(r: &mut Runner) -> Result<()> {
    let primes = r.cfg.primes_or(&[2, 3]);
    let dims = r.cfg.d.map_or(vec![1, 2], |d| vec![d]);
    let alphas = r.cfg.alphas_or(&[0.5, 1.0, 2.0]);
    r.error("S_k(x) closed form vs brute-force character sums (level ≤ 4)", 1e-10, |c, _| {
        for &p in &primes {
            for &dim in &dims {
                for m in -2i64..=2 {
                    let mut x = vec![BigRational::zero(); dim];
                    x[0] = p_pow(p, -m) * rat(1 + p as i64, 1);
                    for k in -2i64..=3 {
                        if k + 3.max(m) > 4 {
                            continue;
                        }
                        let n = 3.max(m).max(1 - k);
                        let e = (brute_sphere(p, &x, k, n) - character_sphere_integral(p, dim as u32, Some(m), k)).abs();
                        c.err(e, || format!("p = {p}, d = {dim}, ‖x‖ = {p}^{m}, k = {k}"));
                    }
                }
            }
        }
        Ok(())
    })?;
    for &p in &primes {
        for &dim in &dims {
            let desc = GroupDescriptor::abelian(p, dim)?;
            for &alpha in &alphas {
                let label = format!("Q_{p}^{dim}, α = {alpha}");
                let times: Vec<f64> = (-4..=4).map(|j| (p as f64).powi(j)).collect();
                let mut rows = Vec::new();
                r.error(format!("∫h(t, x)dx = 1 on {label}"), 1e-10, |c, _| {
                    for &t in &times {
                        let h = heat_profile_abelian(t, alpha, desc)?;
                        let mass = h.ball_integral(40)?
                            + h.weighted_outer_sum(-40, ShellLaw { coeff: 1.0, exponent: 0.0 }, None)?;
                        c.err((mass - 1.0).abs(), || format!("t = {t}"));
                    }
                    Ok(())
                })?;
                r.bound(format!("estimate ratio spread c2/c1 on {label}"), 100.0, |c, _| {
                    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                    for &t in &times {
                        let h = heat_profile_abelian(t, alpha, desc)?;
                        for m in -4..=4 {
                            let q = heat_estimate_ratio(&h, m)?;
                            rows.push((t, m, h.shell(m), q));
                            lo = lo.min(q);
                            hi = hi.max(q);
                        }
                    }
                    c.require(lo > 0.0, || format!("nonpositive ratio {lo}"));
                    c.err(hi / lo, || format!("ratios in [{lo:.4e}, {hi:.4e}]"));
                    c.note(format!("h/estimate ∈ [{lo:.4e}, {hi:.4e}]"));
                    Ok(())
                })?;
                r.error(format!("h(t) * h(s) = h(t + s) on {label}"), 1e-6, |c, _| {
                    let (t, s) = (0.4, 1.3);
                    let a = heat_profile_abelian(t, alpha, desc)?;
                    let b = heat_profile_abelian(s, alpha, desc)?;
                    let ab = heat_profile_abelian(t + s, alpha, desc)?;
                    for m in -3..=3 {
                        c.err((radial_convolution_shell(&a, &b, m)? - ab.shell(m)).abs(), || format!("shell {m}"));
                    }
                    Ok(())
                })?;
                let mut buf = Vec::new();
                write_heat_table(&mut buf, &rows)?;
                r.table(format!("heat_abelian_p{p}_d{dim}_alpha{}.csv", tag(alpha)), buf);
            }
        }
    }
    Ok(())
}

fn potentials(r: &mut Runner) -> Result<()> {
    let dim = r.cfg.d.unwrap_or(1);
    for p in r.cfg.primes_or(&[3]) {
        let d = GroupDescriptor::abelian(p, dim)?;
        for alpha in r.cfg.alphas_or(&[0.5]) {
            let closed = fundamental_solution_profile(alpha, Setting::LocallyCompact, d)?;
            let mut rows = Vec::new();
            r.error(format!("∫h dt vs closed-form E_α on {d}, α = {alpha} (relative)"), 1e-6, |c, _| {
                let e = fundamental_solution_via_heat(alpha, d, -3..=3)?;
                for m in -3..=3 {
                    let rel = (e.shell(m) - closed.shell(m)).abs() / closed.shell(m).abs();
                    rows.push((m, e.shell(m), rel));
                    c.err(rel, || format!("shell {m}"));
                }
                Ok(())
            })?;
            let mut buf = Vec::new();
            write_fundamental_table(&mut buf, &rows)?;
            r.table(format!("potential_E_p{p}_alpha{}.csv", tag(alpha)), buf);
            for beta in r.cfg.betas_or(&[0.3, 0.5, 0.8]) {
                r.error(format!("I_β shell ratio = p^(β−d) on {d}, β = {beta}, α = {alpha}"), 1e-6, |c, _| {
                    let i = riesz_potential(beta, alpha, d, -2..=2)?;
                    let want = (p as f64).powf(beta - dim as f64);
                    for m in -2..2 {
                        c.err((i.shell(m + 1) / i.shell(m) / want - 1.0).abs(), || format!("shells {m}, {}", m + 1));
                    }
                    Ok(())
                })?;
            }
        }
    }
    Ok(())
}

fn jump_kernels(r: &mut Runner) -> Result<()> {
    let descs = match r.cfg.descriptor(3)? {
        Some(d) => vec![d],
        None => vec![
            GroupDescriptor::abelian(2, 1)?,
            GroupDescriptor::abelian(3, 2)?,
            GroupDescriptor::heisenberg(3, 1)?,
            GroupDescriptor::engel(5)?,
        ],
    };
    let trials = r.cfg.trials.unwrap_or(50);
    let alphas = r.cfg.alpha.clone();
    r.error(format!("jump kernel closed form vs series at {trials} random (x, y, α)"), 1e-10, |c, rng| {
        let mut cases = 0;
        while cases < trials {
            let desc = descs[cases % descs.len()];
            let p = desc.p() as i64;
            let scale = rat(1, p.pow(rng.gen_range(0..3)));
            let mut coords = || -> Result<GroupElement> {
                let v = (0..desc.dim()).map(|_| rat(rng.gen_range(-40..=40), 1) * &scale).collect();
                Ok(GroupElement::new(desc, v)?)
            };
            let (x, y) = (coords()?, coords()?);
            let Some(n) = y.inverse().mul(&x)?.level() else { continue };
            let alpha = if alphas.is_empty() { rng.gen_range(0.1..3.0) } else { alphas[cases % alphas.len()] };
            let closed = jump_kernel(&x, &y, alpha)?;
            let series = jump_kernel_series(desc.p() as f64, desc.homogeneous_dim() as f64, alpha, -n, 600);
            c.err((closed - series).abs() / closed.abs(), || format!("{desc}: x = {x}, y = {y}, α = {alpha}"));
            cases += 1;
        }
        Ok(())
    })
}

fn representations(r: &mut Runner) -> Result<()> {
    if r.cfg.group == Some(GroupChoice::Engel) {
        return engel_homomorphism(r);
    }
    heisenberg_only(r.cfg, "representations")?;
    let p = r.cfg.prime_or(3);
    let desc = GroupDescriptor::heisenberg(p, 1)?;
    let w = RepWindow::new(p, 1, r.cfg.trunc_k.unwrap_or(2))?;
    let pi = p as i64;
    let lambdas = [rat(1, 1), rat(2, pi * pi), rat(2 * pi, 1), rat(-5, pi), rat(7, pi * pi)];
    let trials = r.cfg.trials.unwrap_or(100);
    let mut pairs = Vec::new();
    for i in 0..trials {
        pairs.push((i, random_element(desc, &mut r.rng, 50)?, random_element(desc, &mut r.rng, 50)?));
    }
    let mut unresolved = 0;
    r.error(format!("π(g)π(h) = π(gh) on {trials} random pairs, K = {}", w.k()), 1e-12, |c, _| {
        for (i, g, h) in &pairs {
            let lam = &lambdas[i % lambdas.len()];
            let mg = schrodinger_operator(lam, g, &w)?;
            let mh = schrodinger_operator(lam, h, &w)?;
            if mg.is_zero() || mh.is_zero() {
                unresolved += 1;
                continue;
            }
            let mgh = schrodinger_operator(lam, &g.mul(h)?, &w)?;
            c.err(max_diff(&(mg.matrix() * mh.matrix()), &mgh.matrix()), || format!("λ = {lam}, g = {g}, h = {h}"));
        }
        Ok(())
    })?;
    r.count("sampled pairs resolved by the window", |c, _| {
        c.require(unresolved == 0, || format!("{unresolved} pairs compressed to zero"));
        Ok(())
    })?;
    r.error("‖π(g)φ‖ = ‖φ‖ on random φ", 1e-12, |c, rng| {
        for (i, g, _) in &pairs {
            let lam = &lambdas[i % lambdas.len()];
            let mg = schrodinger_operator(lam, g, &w)?;
            if mg.is_zero() {
                continue;
            }
            let phi: Vec<Complex64> =
                (0..w.cell_count()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            c.err((w.norm(&mg.apply(&phi)?) - w.norm(&phi)).abs(), || format!("λ = {lam}, g = {g}"));
        }
        Ok(())
    })?;
    let n = w.cell_count();
    for alpha in r.cfg.alphas_or(&[0.5, 1.0, 2.0]) {
        r.error(format!("directional symbols vs quadrature, α = {alpha}"), 1e-8, |c, _| {
            for lam in &lambdas {
                let pt = RepPoint::heisenberg(p, lam.clone())?;
                for k in [1usize, 2] {
                    let sym = symbol_matrix(SymbolOp::Directional(k), &pt, alpha, &w)?;
                    let quad = directional_symbol_quadrature(&pt, k, alpha, &w)?;
                    let off = sym
                        .matrix()
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i % (n + 1) != 0)
                        .map(|(_, v)| v.abs())
                        .fold(0.0, f64::max);
                    c.err(off, || format!("off-diagonal entry, λ = {lam}, direction {k}"));
                    for (i, q) in quad.iter().enumerate() {
                        c.err((sym.matrix()[(i, i)] - q).abs(), || format!("λ = {lam}, direction {k}, cell {i}"));
                    }
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn engel_homomorphism(r: &mut Runner) -> Result<()> {
    let p = r.cfg.prime_or(3);
    let desc = GroupDescriptor::engel(p)?;
    let w = RepWindow::new(p, 1, r.cfg.trunc_k.unwrap_or(2))?;
    let trials = r.cfg.trials.unwrap_or(40);
    r.error(format!("π_(λ,μ)(g)π_(λ,μ)(h) = π_(λ,μ)(gh) on {desc}, {trials} pairs"), 1e-12, |c, rng| {
        for i in 0..trials as i64 {
            let pt = RepPoint::engel(p, rat(1 + i % 5, 1), rat(i - 20, 1))?;
            let g = random_element(desc, rng, 30)?;
            let h = random_element(desc, rng, 30)?;
            let mg = engel_operator(&pt, &g, &w, 2)?.matrix();
            let mh = engel_operator(&pt, &h, &w, 2)?.matrix();
            let mgh = engel_operator(&pt, &g.mul(&h)?, &w, 2)?.matrix();
            c.err(max_diff(&(mg * mh), &mgh), || format!("λ = {}, μ = {}, g = {g}, h = {h}", 1 + i % 5, i - 20));
        }
        Ok(())
    })
}

fn heat_heisenberg(r: &mut Runner) -> Result<()> {
    heisenberg_only(r.cfg, "heat-heisenberg")?;
    let p = r.cfg.prime_or(3);
    let (m, k) = (r.cfg.trunc_m.unwrap_or(3), r.cfg.trunc_k.unwrap_or(2));
    if k < 2 || m < 1 {
        return Err(CliError::Invalid(format!("heat-heisenberg compares (M−1, K−1) with (M, K) and needs M ≥ 1, K ≥ 2 (got M = {m}, K = {k})")));
    }
    let desc = GroupDescriptor::heisenberg(p, 1)?;
    let pf = p as f64;
    let pi = p as i64;
    let points = [
        GroupElement::new(desc, vec![rat(1, pi), rat(2, 1), rat(1, pi * pi)])?,
        GroupElement::from_ints(desc, &[1, -1, 4])?,
        GroupElement::from_ints(desc, &[0, pi, 2])?,
    ];
    let e = GroupElement::identity(desc);
    for alpha in r.cfg.alphas_or(&[2.0]) {
        let sp = HeisenbergSpectral::new(p, alpha, SymbolOp::Laplacian, Truncation::new(m, k))?;
        let label = format!("α = {alpha}, M = {m}, K = {k}");
        r.error(format!("h(t, g⁻¹) = conj h(t, g), {label}"), 1e-10, |c, _| {
            for g in &points {
                for t in [0.3, 1.0, 2.5] {
                    let a = sp.heat_kernel(t, g)?.value;
                    let b = sp.heat_kernel(t, &g.inverse())?.value;
                    c.err((a - b.conj()).norm(), || format!("t = {t}, g = {g}"));
                }
            }
            Ok(())
        })?;
        r.error(format!("p^Q h(p^α t, D_(1/p) g) = h(t, g), {label} (relative)"), 1e-6, |c, _| {
            let shifted = HeisenbergSpectral::new(p, alpha, SymbolOp::Laplacian, Truncation::new(m, k).shifted(-2))?;
            let gamma = rat(1, pi);
            for g in &points {
                for t in [0.3, 1.0, 2.5] {
                    let a = sp.heat_kernel(t, g)?.value;
                    let hd = shifted.heat_kernel(pf.powf(alpha) * t, &g.dilate(&gamma)?)?.value;
                    c.err((hd * pf.powi(4) - a).norm() / a.norm(), || format!("t = {t}, g = {g}"));
                }
            }
            Ok(())
        })?;
        let levels = [(m - 1, k - 1), (m, k), (m + 1, k + 1)]
            .iter()
            .map(|&(mm, kk)| HeisenbergSpectral::new(p, alpha, SymbolOp::Laplacian, Truncation::new(mm, kk)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        r.error(format!("h(t) * h(s) = h(t + s) at (M−1, K−1) and (M, K), α = {alpha} (relative)"), 1e-3, |c, _| {
            for s in &levels[..2] {
                for g in [&points[0], &e] {
                    let (conv, direct) = s.semigroup_pair(0.5, 0.7, g)?;
                    let tr = s.truncation();
                    c.err((conv - direct).norm() / direct.norm(), || format!("M = {}, K = {}, g = {g}", tr.m(), tr.k));
                }
            }
            Ok(())
        })?;
        for g in [&points[0], &e] {
            r.bound(format!("truncation change shrinks as (M, K) grow, g = {g}, α = {alpha}"), 1.0, |c, _| {
                let h: Vec<Complex64> =
                    levels.iter().map(|s| s.heat_kernel(1.2, g).map(|v| v.value)).collect::<std::result::Result<_, _>>()?;
                let (d1, d2) = ((h[1] - h[0]).norm(), (h[2] - h[1]).norm());
                c.note(format!("|Δh| {d1:.3e} → {d2:.3e}"));
                c.require(d2 < d1, || format!("|Δh| did not shrink: {d1:e} → {d2:e}"));
                c.err(d2 / d1, || format!("|Δh| {d1:e} → {d2:e}"));
                Ok(())
            })?;
        }
        let mut rows = Vec::new();
        r.bound(format!("t^(Q/α) h(t, e) spread over t = p^-2..p^2, {label}"), 10.0, |c, _| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for j in -2..=2 {
                let t = pf.powi(j);
                let h = sp.heat_kernel(t, &e)?;
                let q = t.powf(4.0 / alpha) * h.value.re;
                rows.push((t, e.clone(), h));
                lo = lo.min(q);
                hi = hi.max(q);
            }
            c.require(lo > 0.0, || format!("nonpositive diagonal value {lo}"));
            c.err(hi / lo, || format!("ratios in [{lo:.4e}, {hi:.4e}]"));
            c.note(format!("t^(Q/α) h(t, e) ∈ [{lo:.6}, {hi:.6}]"));
            Ok(())
        })?;
        for g in &points {
            for j in -1..=1 {
                let t = pf.powi(j);
                rows.push((t, g.clone(), sp.heat_kernel(t, g)?));
            }
        }
        let mut buf = Vec::new();
        spectral::write_heat_table(&mut buf, &rows)?;
        r.table(format!("heat_heisenberg_p{p}_alpha{}.csv", tag(alpha)), buf);
        let mut buf = Vec::new();
        spectral::write_spectrum(&mut buf, &[sp.base_symbol(0).clone(), sp.base_symbol(1).clone()])?;
        r.table(format!("spectrum_heisenberg_p{p}_alpha{}.csv", tag(alpha)), buf);
    }
    Ok(())
}

fn heat_engel(r: &mut Runner) -> Result<()> {
    if matches!(r.cfg.group, Some(GroupChoice::Qp | GroupChoice::Heisenberg)) {
        return Err(CliError::Invalid("heat-engel runs on the Engel group only".into()));
    }
    let p = r.cfg.prime_or(3);
    let desc = GroupDescriptor::engel(p)?;
    engel_homomorphism(r)?;
    let w1 = RepWindow::new(p, 1, 1)?;
    let samples = r.cfg.trials.unwrap_or(20);
    let pi = p as i64;
    for alpha in r.cfg.alphas_or(&[2.0]) {
        let mut symbols = Vec::new();
        r.error(format!("Engel Laplacian symbol is symmetric, α = {alpha}, {samples} (λ, μ)"), 1e-12, |c, rng| {
            for _ in 0..samples {
                let lam = rat(rng.gen_range(1..60), pi.pow(rng.gen_range(0..3)));
                let mu = rat(rng.gen_range(-40..40), pi.pow(rng.gen_range(0..2)));
                let s = symbol_matrix(SymbolOp::EngelLaplacian, &RepPoint::engel(p, lam.clone(), mu.clone())?, alpha, &w1)?;
                c.err((s.matrix() - s.matrix().transpose()).amax(), || format!("λ = {lam}, μ = {mu}"));
                symbols.push((lam, mu, s));
            }
            Ok(())
        })?;
        r.count(format!("Engel Laplacian ground eigenvalue > 0, α = {alpha}"), |c, _| {
            for (lam, mu, s) in &symbols {
                c.require(s.eigenvalues()[0] > 0.0, || format!("λ = {lam}, μ = {mu}: ground eigenvalue {}", s.eigenvalues()[0]));
            }
            Ok(())
        })?;
        let trunc = EngelTruncation { m: r.cfg.trunc_m.unwrap_or(1), ..EngelTruncation::default() };
        r.error(format!("h(t, g⁻¹) = conj h(t, g) on {desc}, α = {alpha}, M = {}", trunc.m), 1e-8, |c, _| {
            for coords in [[1i64, 2, -1, 1], [0, 1, 1, -2]] {
                let g = GroupElement::from_ints(desc, &coords)?;
                let a = engel_heat_kernel(0.8, &g, alpha, trunc)?.value;
                let b = engel_heat_kernel(0.8, &g.inverse(), alpha, trunc)?.value;
                c.err((a - b.conj()).norm(), || format!("g = {g}"));
            }
            Ok(())
        })?;
        let mut buf = Vec::new();
        let mats: Vec<_> = symbols.into_iter().map(|(_, _, s)| s).collect();
        spectral::write_spectrum(&mut buf, &mats)?;
        r.table(format!("spectrum_engel_p{p}_alpha{}.csv", tag(alpha)), buf);
    }
    r.count(format!("|G_0/G_1| = p^7 by coset count on {desc}"), |c, rng| {
        let cg = CellGroup::new(desc, 1)?;
        let reps: Vec<Vec<u64>> = (0..cg.count()).map(|i| cg.decode(i)).collect();
        c.require(reps.len() == p.pow(7) as usize, || format!("{} cells", reps.len()));
        if reps.len() <= 3usize.pow(7) {
            for (i, a) in reps.iter().enumerate() {
                let ai = cg.inv(a);
                for b in &reps[i + 1..] {
                    c.require(cg.level(&cg.mul(&ai, b)) < 1, || format!("{a:?} and {b:?} share a coset"));
                }
            }
        } else {
            // pairwise is quadratic; distinct canonical indices give the same conclusion
            for (i, a) in reps.iter().enumerate() {
                c.require(cg.canonical_index(a) == i, || format!("{a:?} is not canonical"));
            }
        }
        let ring = cg.ring().m;
        for _ in 0..200 {
            let x: Vec<u64> = (0..4).map(|_| rng.gen_range(0..ring)).collect();
            let hits = reps.iter().filter(|r| cg.level(&cg.mul(&cg.inv(r), &x)) >= 1).count();
            c.require(hits == 1, || format!("{x:?} meets {hits} cosets"));
        }
        Ok(())
    })
}

fn homogeneity(r: &mut Runner) -> Result<()> {
    let p = r.cfg.prime_or(3);
    let descs = match r.cfg.descriptor(3)? {
        Some(d) => vec![d],
        None => vec![GroupDescriptor::heisenberg(p, 1)?, GroupDescriptor::engel(p)?],
    };
    let level = r.cfg.level.unwrap_or(1);
    for alpha in r.cfg.alphas_or(&[0.9]) {
        for &desc in &descs {
            let w = CosetWindow::new(desc, 0, level)?;
            let f = random_real(w, &mut r.rng)?;
            r.error(format!("(∂_k^α (f∘D_γ))(x) = |γ|^(αν_k) (∂_k^α f)(D_γ x) on {desc}, γ = p, α = {alpha}"), 1e-10, |c, _| {
                let gamma = rat(desc.p() as i64, 1);
                let fd = f.compose_dilation(&gamma)?;
                let points: Vec<GroupElement> = fd.window().reps()?.into_iter().step_by(37).collect();
                let dilated = points.iter().map(|x| x.dilate(&gamma)).collect::<std::result::Result<Vec<_>, _>>()?;
                for (k, nu) in desc.weights().into_iter().enumerate() {
                    let lhs = directional_vt_at(&fd, k, alpha, &points)?;
                    let rhs = directional_vt_at(&f, k, alpha, &dilated)?;
                    let scale = (desc.p() as f64).powf(-alpha * nu as f64);
                    for ((l, rv), x) in lhs.iter().zip(&rhs).zip(&points) {
                        c.err((l - rv * scale).norm() / (1.0 + rv.norm()), || format!("direction {k}, x = {x}"));
                    }
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn cross_validation(r: &mut Runner) -> Result<()> {
    heisenberg_only(r.cfg, "cross-validation")?;
    let p = r.cfg.prime_or(3);
    let trunc = Truncation::new(r.cfg.trunc_m.unwrap_or(3), r.cfg.trunc_k.unwrap_or(2));
    let w = CosetWindow::new(GroupDescriptor::heisenberg(p, 1)?, r.cfg.level_out.unwrap_or(0), r.cfg.level.unwrap_or(1))?;
    let trials = r.cfg.trials.unwrap_or(4);
    for alpha in r.cfg.alphas_or(&[2.0]) {
        let sp = HeisenbergSpectral::new(p, alpha, SymbolOp::Laplacian, trunc)?;
        r.error(format!("symbol-inverse vs heat-integral pairing, α = {alpha}, M = {}, K = {} (relative)", trunc.m(), trunc.k), 1e-3, |c, rng| {
            for i in 0..trials {
                let f = random_real(w, rng)?.project_mean_zero();
                let a = sp.formal_pair(&f)?;
                let b = sp.heat_route_pair(&f)?;
                c.err((a - b).norm() / a.norm(), || format!("random mean-zero f #{i}"));
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn plancherel(r: &mut Runner) -> Result<()> {
    heisenberg_only(r.cfg, "plancherel")?;
    let p = r.cfg.prime_or(3);
    let trunc = Truncation::new(r.cfg.trunc_m.unwrap_or(2), r.cfg.trunc_k.unwrap_or(2));
    let w = CosetWindow::new(GroupDescriptor::heisenberg(p, 1)?, r.cfg.level_out.unwrap_or(0), r.cfg.level.unwrap_or(1))?;
    let sp = HeisenbergSpectral::new(p, 2.0, SymbolOp::Laplacian, trunc)?;
    let mut consts = Vec::new();
    for _ in 0..r.cfg.trials.unwrap_or(4) {
        let (l, rhs) = sp.plancherel(&random_real(w, &mut r.rng)?)?;
        consts.push(l / rhs);
    }
    r.error(format!("‖f‖² / ∫‖f̂(λ)‖²_HS |λ|dλ is independent of f, M = {}, K = {}", trunc.m(), trunc.k), 1e-3, |c, _| {
        for (i, k) in consts.iter().enumerate() {
            c.err((k / consts[0] - 1.0).abs(), || format!("sample {i}: constant {k}"));
        }
        c.note(format!("constant {:.15}", consts[0]));
        Ok(())
    })?;
    r.error("Plancherel constant = 1", 1e-9, |c, _| {
        for (i, k) in consts.iter().enumerate() {
            c.err((k - 1.0).abs(), || format!("sample {i}: constant {k}"));
        }
        Ok(())
    })
}
