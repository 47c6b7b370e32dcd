//! Radial kernels: Riesz kernels, fundamental solutions, the abelian heat
//! kernel and Riesz potentials, with exact window/tail convolution.
//!
//! Shell m is {|x|_G = p^m}, of measure μ(m) = p^{Qm}(1 − p^{−Q}). Power laws
//! are stored in base p: c·p^{mσ}. A Vilenkin power |x|_𝒢^s = ϰ^{ms} is
//! therefore σ = Qs. On a compact group only shells m ≤ 0 exist.

use std::io::Write;

use num_complex::Complex64;
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};
use crate::testfn::TestFunction;
use crate::vt::{level_kernel_apply, VTResult};

/// c·p^{mσ} on shell m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellLaw {
    pub coeff: f64,
    pub exponent: f64,
}

impl ShellLaw {
    pub fn at(&self, p: u64, m: i64) -> f64 {
        self.coeff * (p as f64).powf(m as f64 * self.exponent)
    }
}

/// A shell law bound to its prime.
#[derive(Debug, Clone, Copy)]
struct PLaw {
    p: f64,
    coeff: f64,
    exponent: f64,
}

impl PLaw {
    fn at(&self, m: i64) -> f64 {
        self.coeff * self.p.powf(m as f64 * self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// G = G_0 with the Vilenkin norm, operator 𝔻^α.
    Compact,
    /// Vilenkin norm on the whole group, operator D^α.
    LocallyCompact,
    /// Homogeneous quasi-norm, operator 𝒟^α.
    Graded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileParams {
    Fundamental { alpha: f64, setting: Setting },
    Riesz { s: f64 },
    Heat { t: f64, alpha: f64 },
    Potential { beta: f64, alpha: f64, remainder: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Power { coeff: f64, exponent: f64 },
    /// coeff·m
    Log { coeff: f64 },
    /// Σ_k e^{−t p^{kα}} S_k on ℚ_p^d.
    AbelianHeat { t: f64, alpha: f64 },
    Table { m_min: i64, values: Vec<f64>, inner: ShellLaw, outer: ShellLaw },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    desc: GroupDescriptor,
    shape: Shape,
    compact: bool,
    params: ProfileParams,
}

fn geometric_sum(r: f64, a: i64, b: i64) -> f64 {
    // Σ_{m=a}^{b} r^m
    if a > b {
        return 0.0;
    }
    if (r - 1.0).abs() < 1e-15 {
        return (b - a + 1) as f64;
    }
    (r.powf((b + 1) as f64) - r.powf(a as f64)) / (r - 1.0)
}

impl RadialProfile {
    fn new(desc: GroupDescriptor, shape: Shape, compact: bool, params: ProfileParams) -> Self {
        RadialProfile { desc, shape, compact, params }
    }

    /// Profile from explicit shell values on [m_min, m_min + len) with power
    /// laws below and above.
    pub fn from_table(
        desc: GroupDescriptor,
        m_min: i64,
        values: Vec<f64>,
        inner: ShellLaw,
        outer: ShellLaw,
        compact: bool,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("empty shell table"));
        }
        Ok(Self::new(desc, Shape::Table { m_min, values, inner, outer }, compact, ProfileParams::Custom))
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.desc
    }
    pub fn params(&self) -> &ProfileParams {
        &self.params
    }
    pub fn is_compact(&self) -> bool {
        self.compact
    }

    fn p(&self) -> f64 {
        self.desc.p() as f64
    }
    fn q(&self) -> f64 {
        self.desc.homogeneous_dim() as f64
    }
    fn law(&self, l: ShellLaw) -> PLaw {
        PLaw { p: self.p(), coeff: l.coeff, exponent: l.exponent }
    }

    pub fn shell_measure(&self, m: i64) -> f64 {
        let (p, q) = (self.p(), self.q());
        p.powf(q * m as f64) * (1.0 - p.powf(-q))
    }

    /// Value on shell m; zero beyond G_0 on a compact group.
    pub fn shell(&self, m: i64) -> f64 {
        if self.compact && m > 0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Power { coeff, exponent } => coeff * self.p().powf(m as f64 * exponent),
            Shape::Log { coeff } => coeff * m as f64,
            Shape::AbelianHeat { t, alpha } => abelian_heat_shell(self.desc.p(), self.q(), *t, *alpha, m),
            Shape::Table { m_min, values, inner, outer } => {
                let i = m - m_min;
                if i < 0 {
                    self.law(*inner).at(m)
                } else if (i as usize) < values.len() {
                    values[i as usize]
                } else {
                    self.law(*outer).at(m)
                }
            }
        }
    }

    /// Value at g ≠ e.
    pub fn eval(&self, g: &GroupElement) -> Result<f64> {
        match g.level() {
            Some(l) => Ok(self.shell(-l)),
            None => match self.shape {
                Shape::AbelianHeat { t, alpha } => Ok(abelian_heat_origin(self.desc.p(), self.q(), t, alpha)),
                _ => Err(Error::domain("radial kernel is singular at the identity")),
            },
        }
    }

    /// Σ_{m ≤ top} law(m)·μ(m) for a power law.
    fn law_ball(&self, law: PLaw, top: i64) -> Result<f64> {
        let r = self.p().powf(law.exponent + self.q());
        if r <= 1.0 {
            return Err(Error::domain(format!(
                "shell law p^{{m·{}}} not integrable at the identity",
                law.exponent
            )));
        }
        Ok(law.coeff * (1.0 - self.p().powf(-self.q())) * r.powf(top as f64) / (1.0 - 1.0 / r))
    }

    /// Σ_{a ≤ m ≤ b} law(m)·μ(m).
    fn law_range(&self, law: PLaw, a: i64, b: i64) -> f64 {
        let r = self.p().powf(law.exponent + self.q());
        law.coeff * (1.0 - self.p().powf(-self.q())) * geometric_sum(r, a, b)
    }

    /// Σ_{m > bottom} law(m)·μ(m) over the whole group.
    fn law_outer(&self, law: PLaw, bottom: i64) -> Result<f64> {
        let r = self.p().powf(law.exponent + self.q());
        if r >= 1.0 {
            return Err(Error::domain(format!(
                "shell law p^{{m·{}}} not integrable at infinity",
                law.exponent
            )));
        }
        Ok(law.coeff * (1.0 - self.p().powf(-self.q())) * r.powf((bottom + 1) as f64) / (1.0 - r))
    }

    /// ∫_{G_n} K.
    pub fn ball_integral(&self, n: i64) -> Result<f64> {
        let top = -n;
        if self.compact && top > 0 {
            return self.ball_integral(0);
        }
        let (p, q) = (self.p(), self.q());
        match &self.shape {
            Shape::Power { coeff, exponent } => {
                self.law_ball(PLaw { p, coeff: *coeff, exponent: *exponent }, top)
            }
            Shape::Log { coeff } => {
                let r = p.powf(q);
                let m = top as f64;
                Ok(coeff * (1.0 - 1.0 / r) * r.powf(m) * (m / (1.0 - 1.0 / r) - (1.0 / r) / (1.0 - 1.0 / r).powi(2)))
            }
            Shape::AbelianHeat { t, alpha } => {
                // p^{−nQ} ∫_{‖ξ‖ ≤ p^n} e^{−t‖ξ‖^α} dξ
                let mut s = 0.0;
                let mut k = n;
                loop {
                    let w = p.powf(q * (k - n) as f64);
                    let a = p.powf(k as f64 * alpha);
                    s += (-t * a).exp() * w;
                    if (t * a < 1e-3 && w <= 1e-20 * s) || w < 1e-300 {
                        break;
                    }
                    k -= 1;
                }
                Ok(s * (1.0 - p.powf(-q)))
            }
            Shape::Table { m_min, values, inner, outer } => {
                let m_max = m_min + values.len() as i64 - 1;
                let below = self.law_ball(self.law(*inner), top.min(m_min - 1))?;
                let table: f64 = (*m_min..=top.min(m_max))
                    .map(|m| values[(m - m_min) as usize] * self.shell_measure(m))
                    .sum();
                let above = if top > m_max { self.law_range(self.law(*outer), m_max + 1, top) } else { 0.0 };
                Ok(below + table + above)
            }
        }
    }

    /// Σ_{bottom < m ≤ cap} K(m)·w(m)·μ(m), cap = ∞ (0 on a compact group)
    /// when `None`.
    pub fn weighted_outer_sum(&self, bottom: i64, weight: ShellLaw, cap: Option<i64>) -> Result<f64> {
        let cap = match (cap, self.compact) {
            (Some(c), true) => Some(c.min(0)),
            (None, true) => Some(0),
            (c, false) => c,
        };
        let w = self.law(weight);
        if let Some(c) = cap {
            return Ok((bottom + 1..=c).map(|m| self.shell(m) * w.at(m) * self.shell_measure(m)).sum());
        }
        let p = self.p();
        match &self.shape {
            Shape::Power { coeff, exponent } => {
                self.law_outer(PLaw { p, coeff: coeff * w.coeff, exponent: exponent + w.exponent }, bottom)
            }
            Shape::Log { coeff } => {
                let r = p.powf(w.exponent + self.q());
                if r >= 1.0 {
                    return Err(Error::domain("logarithmic kernel not integrable at infinity"));
                }
                let m = (bottom + 1) as f64;
                let series = r.powf(m) * (m / (1.0 - r) + r / (1.0 - r).powi(2));
                Ok(coeff * w.coeff * (1.0 - p.powf(-self.q())) * series)
            }
            Shape::AbelianHeat { alpha, .. } => {
                if w.exponent >= *alpha {
                    return Err(Error::domain("weight grows too fast against the heat kernel tail"));
                }
                let mut s = 0.0;
                let mut small = 0;
                let mut m = bottom + 1;
                while small < 8 {
                    let term = self.shell(m) * w.at(m) * self.shell_measure(m);
                    s += term;
                    small = if term.abs() <= 1e-18 * s.abs() { small + 1 } else { 0 };
                    m += 1;
                    if m - bottom > 100_000 {
                        return Err(Error::Convergence("heat tail sum did not converge".into()));
                    }
                }
                Ok(s)
            }
            Shape::Table { m_min, values, outer, .. } => {
                let m_max = m_min + values.len() as i64 - 1;
                let start = bottom + 1;
                let table: f64 = (start.max(*m_min)..=m_max)
                    .map(|m| self.shell(m) * w.at(m) * self.shell_measure(m))
                    .sum();
                let below: f64 = (start..(*m_min).min(m_max + 1))
                    .map(|m| self.shell(m) * w.at(m) * self.shell_measure(m))
                    .sum();
                let o = self.law(*outer);
                let law = PLaw { p, coeff: o.coeff * w.coeff, exponent: o.exponent + w.exponent };
                Ok(below + table + self.law_outer(law, m_max.max(bottom))?)
            }
        }
    }

    /// Shell values on an inclusive range.
    pub fn shells(&self, m_min: i64, m_max: i64) -> Vec<(i64, f64)> {
        (m_min..=m_max).map(|m| (m, self.shell(m))).collect()
    }
}

fn abelian_heat_shell(p: u64, q: f64, t: f64, alpha: f64, m: i64) -> f64 {
    // Σ_{k ≤ −m} e^{−t a_k} μ_k − e^{−t a_{1−m}} p^{−mQ} with a_k = p^{kα}. The
    // coefficients sum to zero, so for small t the expm1 form avoids the
    // cancellation; for large t every term but the last is already small.
    let p = p as f64;
    let a_top = p.powf((1 - m) as f64 * alpha);
    let small_t = t * a_top < 1.0;
    let g = |x: f64| if small_t { (-x).exp_m1() } else { (-x).exp() };
    let mut s = -g(t * a_top) * p.powf(-q * m as f64);
    let mut k = -m;
    loop {
        let a = p.powf(k as f64 * alpha);
        let mu = p.powf(q * k as f64) * (1.0 - p.powf(-q));
        let term = g(t * a) * mu;
        s += term;
        let settled = if small_t { term.abs() <= 1e-20 * s.abs() } else { t * a < 1e-3 && mu <= 1e-20 * s.abs() };
        if settled || mu < 1e-300 {
            break;
        }
        k -= 1;
    }
    s
}

/// h(t, 0) = Σ_k e^{−t p^{kα}} μ_k, summed downwards from where the terms
/// are below e^{−60}.
fn abelian_heat_origin(p: u64, q: f64, t: f64, alpha: f64) -> f64 {
    let p = p as f64;
    let mut k = 0i64;
    while t * p.powf(k as f64 * alpha) - q * k as f64 * p.ln() < 60.0 {
        k += 1;
    }
    let mut s = 0.0;
    loop {
        let a = p.powf(k as f64 * alpha);
        let mu = p.powf(q * k as f64) * (1.0 - p.powf(-q));
        s += (-t * a).exp() * mu;
        if (t * a < 1e-3 && mu <= 1e-20 * s) || mu < 1e-300 {
            break;
        }
        k -= 1;
    }
    s
}

/// Q(s, x), extended by Q(s, 0) = 1 and Q(s, ∞) = 0 for under/overflowed x.
fn upper_regularized(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_finite() {
        gamma_ur(s, x)
    } else {
        0.0
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} must be positive")))
    }
}

/// Γ_𝒢(s) = (1 − ϰ^{s−1})/(1 − ϰ^{−s}).
pub fn riesz_gamma(s: f64, kappa: f64) -> Result<f64> {
    if s == 0.0 {
        return Err(Error::domain("Γ_𝒢 has a pole at s = 0"));
    }
    if s == 1.0 {
        return Err(Error::domain("Γ_𝒢 vanishes at s = 1, where the Riesz kernel has its pole"));
    }
    Ok((1.0 - kappa.powf(s - 1.0)) / (1.0 - kappa.powf(-s)))
}

/// r_s = (1 − ϰ^{−s})/(1 − ϰ^{s−1})·|x|_𝒢^{s−1} on the compact group G_0,
/// locally integrable for s > 0.
pub fn riesz_profile(s: f64, desc: GroupDescriptor) -> Result<RadialProfile> {
    let kappa = desc.kappa();
    if s == 1.0 {
        return Err(Error::domain("the Riesz kernel has a pole at s = 1"));
    }
    let coeff = (1.0 - kappa.powf(-s)) / (1.0 - kappa.powf(s - 1.0));
    let q = desc.homogeneous_dim() as f64;
    Ok(RadialProfile::new(desc, Shape::Power { coeff, exponent: q * (s - 1.0) }, true, ProfileParams::Riesz { s }))
}

/// ⟨r_s, f⟩ by the meromorphic continuation
/// (1 − ϰ^{−1})/(1 − ϰ^{s−1}) f(e) + (1 − ϰ^{−s})/(1 − ϰ^{s−1}) ∫ |x|_𝒢^{s−1}(f(x) − f(e)) dx,
/// exact because f − f(e) vanishes on the identity cell.
pub fn riesz_pair(s: f64, f: &TestFunction) -> Result<Complex64> {
    let w = f.window();
    if w.l_out() < 0 {
        return Err(Error::window("Riesz pairing needs f supported in G_0"));
    }
    let desc = f.descriptor();
    let kappa = desc.kappa();
    if (s - 1.0).abs() < 1e-300 {
        return Err(Error::domain("the Riesz kernel has a pole at s = 1"));
    }
    let a = (1.0 - 1.0 / kappa) / (1.0 - kappa.powf(s - 1.0));
    let b = (1.0 - kappa.powf(-s)) / (1.0 - kappa.powf(s - 1.0));
    let shell = |m: i64| kappa.powf(m as f64 * (s - 1.0)) * kappa.powf(m as f64) * (1.0 - 1.0 / kappa);
    let cells = f.cells()?;
    let cg = cells.cells();
    let cell_mu = f.cell_measure_f64();
    let fe = f.values()[0];
    let depth = cg.depth();
    let mut integral = Complex64::new(0.0, 0.0);
    for (i, v) in f.values().iter().enumerate() {
        let rel = cg.level(&cg.decode(i));
        if rel < depth {
            let m = -(rel as i64 + w.l_out());
            integral += (v - fe) * kappa.powf(m as f64 * (s - 1.0)) * cell_mu;
        }
    }
    // G_0 ∖ G_{L_out}, where f = 0
    let outside: f64 = (-w.l_out() + 1..=0).map(shell).sum();
    integral -= fe * outside;
    Ok(fe * a + integral * b)
}

/// E_α as a radial profile.
pub fn fundamental_solution_profile(alpha: f64, setting: Setting, desc: GroupDescriptor) -> Result<RadialProfile> {
    check_positive("α", alpha)?;
    let q = desc.homogeneous_dim() as f64;
    let kappa = desc.kappa();
    let p = desc.p() as f64;
    let params = ProfileParams::Fundamental { alpha, setting };
    match setting {
        Setting::Compact if alpha == 1.0 => {
            // (1 − ϰ)/(ϰ ln ϰ)·ln|x|_𝒢 = (1 − ϰ)/ϰ·m
            Ok(RadialProfile::new(desc, Shape::Log { coeff: (1.0 - kappa) / kappa }, true, params))
        }
        Setting::Compact | Setting::LocallyCompact => {
            if alpha == 1.0 {
                return Err(Error::domain("α = 1 has no fundamental solution of power type on a non-compact group"));
            }
            let coeff = (1.0 - kappa.powf(-alpha)) / (1.0 - kappa.powf(alpha - 1.0));
            let shape = Shape::Power { coeff, exponent: q * (alpha - 1.0) };
            Ok(RadialProfile::new(desc, shape, setting == Setting::Compact, params))
        }
        Setting::Graded => {
            if alpha == q {
                return Err(Error::domain(format!("α = Q = {q} is not supported in the graded setting")));
            }
            let coeff = (1.0 - p.powf(-alpha)) / (1.0 - p.powf(alpha - q));
            Ok(RadialProfile::new(desc, Shape::Power { coeff, exponent: alpha - q }, false, params))
        }
    }
}

/// f * K for f supported in its window: exact cellwise on the window, and
/// (∫f)·K(|x|) off it.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialConvolution {
    pub values: TestFunction,
    pub mass: Complex64,
    profile: RadialProfile,
}

impl RadialConvolution {
    pub fn eval(&self, g: &GroupElement) -> Result<Complex64> {
        if let Some(i) = self.values.cells()?.locate(g)? {
            return Ok(self.values.values()[i]);
        }
        Ok(self.mass * self.profile.eval(g)?)
    }
}

/// Level-indexed weights of K on f's window: W[ℓ] = K(−(ℓ+L))·|cell|,
/// W[D] = 0 and the identity cell contributes ∫_{G_{L_in}} K.
fn window_weights(f: &TestFunction, k: &RadialProfile) -> Result<(Vec<f64>, f64)> {
    let w = f.window();
    let cell = f.cell_measure_f64();
    let mut weights: Vec<f64> = (0..w.depth()).map(|l| k.shell(-(l as i64 + w.l_out())) * cell).collect();
    weights.push(0.0);
    Ok((weights, k.ball_integral(w.l_in())?))
}

pub fn convolve_radial(f: &TestFunction, profile: &RadialProfile) -> Result<RadialConvolution> {
    if f.descriptor() != profile.descriptor() {
        return Err(Error::domain("profile and function live on different groups"));
    }
    if profile.is_compact() && f.window().l_out() < 0 {
        return Err(Error::window("function not supported in the compact group G_0"));
    }
    let (weights, diag) = window_weights(f, profile)?;
    Ok(RadialConvolution {
        values: level_kernel_apply(f, &weights, diag)?,
        mass: f.integrate(),
        profile: profile.clone(),
    })
}

/// (window + radial tail) * K on the window of `g`, integrating y over G_l
/// when `cutoff = Some(l)` and over the whole group otherwise.
pub fn convolve_radial_tail(g: &VTResult, profile: &RadialProfile, cutoff: Option<i64>) -> Result<TestFunction> {
    let w = g.values.window();
    if let Some(l) = cutoff {
        if l > w.l_out() {
            return Err(Error::window(format!("cutoff G_{l} smaller than the window G_{}", w.l_out())));
        }
    }
    let inner = convolve_radial(&g.values, profile)?.values;
    let Some(tail) = g.tail else {
        return Ok(inner);
    };
    if tail.coeff.norm() == 0.0 {
        return Ok(inner);
    }
    // for |y| > |x|: |y⁻¹x| = |y|, so the tail integrates shell by shell
    let law = ShellLaw { coeff: 1.0, exponent: -tail.exponent };
    let s = profile.weighted_outer_sum(-w.l_out(), law, cutoff.map(|l| -l))?;
    let add = tail.coeff * s;
    let values = inner.values().iter().map(|v| v + add).collect();
    TestFunction::new(w, values)
}

/// The part of (𝒟^α f) * E_α coming from outside G_l, for x ∈ G_l:
/// C_α·c_E·p^{Q(l−1)}·∫f with E_α = c_E|x|_G^{α−Q}.
pub fn graded_residual(f: &TestFunction, alpha: f64, l: i64) -> Result<Complex64> {
    let desc = f.descriptor();
    let p = desc.p() as f64;
    let q = desc.homogeneous_dim() as f64;
    let e = fundamental_solution_profile(alpha, Setting::Graded, desc)?;
    let Shape::Power { coeff, .. } = e.shape else { unreachable!() };
    let c = crate::vt::vt_constant(p, alpha, q);
    Ok(f.integrate() * c * coeff * p.powf(q * (l - 1) as f64))
}

/// ∫ K f over f's window (f vanishes elsewhere).
pub fn pair(profile: &RadialProfile, f: &TestFunction) -> Result<Complex64> {
    let w = f.window();
    let cg = f.cells()?;
    let cg = cg.cells();
    let cell = f.cell_measure_f64();
    let depth = cg.depth();
    let mut s = f.values()[0] * profile.ball_integral(w.l_in())?;
    for (i, v) in f.values().iter().enumerate().skip(1) {
        let rel = cg.level(&cg.decode(i));
        debug_assert!(rel < depth);
        s += v * profile.shell(-(rel as i64 + w.l_out())) * cell;
    }
    Ok(s)
}

/// (a * b) on shell m for radial a, b: split y by |y| against |x| = p^m.
pub fn radial_convolution_shell(a: &RadialProfile, b: &RadialProfile, m: i64) -> Result<f64> {
    if a.descriptor() != b.descriptor() {
        return Err(Error::domain("profiles live on different groups"));
    }
    let compact = a.is_compact() || b.is_compact();
    if compact && m > 0 {
        return Ok(0.0);
    }
    let p = a.p();
    let q = a.q();
    let inner = b.shell(m) * a.ball_integral(1 - m)?;
    let same = a.shell(m) * (b.ball_integral(1 - m)? + b.shell(m) * p.powf(q * m as f64) * (1.0 - 2.0 * p.powf(-q)));
    let cap = if compact { Some(0) } else { None };
    let outer = match (&a.shape, &b.shape) {
        (_, Shape::Power { coeff, exponent }) => {
            a.weighted_outer_sum(m, ShellLaw { coeff: *coeff, exponent: *exponent }, cap)?
        }
        (Shape::Power { coeff, exponent }, _) => {
            b.weighted_outer_sum(m, ShellLaw { coeff: *coeff, exponent: *exponent }, cap)?
        }
        _ => shell_pair_sum(a, b, m, cap)?,
    };
    Ok(inner + same + outer)
}

/// Σ_{bottom < m ≤ cap} a(m)·b(m)·μ(m), summed until the terms die out.
pub fn shell_pair_sum(a: &RadialProfile, b: &RadialProfile, bottom: i64, cap: Option<i64>) -> Result<f64> {
    let top = cap.unwrap_or(i64::MAX);
    let mut s = 0.0;
    let mut small = 0;
    let mut k = bottom + 1;
    while k <= top && small < 8 {
        let term = a.shell(k) * b.shell(k) * a.shell_measure(k);
        s += term;
        small = if term.abs() <= 1e-18 * s.abs() { small + 1 } else { 0 };
        k += 1;
        if k - bottom > 100_000 {
            return Err(Error::Convergence("shell sum did not converge".into()));
        }
    }
    Ok(s)
}

/// S_k(x) = ∫_{‖ξ‖ = p^k} e^{2πi{x·ξ}} dξ on ℚ_p^d with ‖x‖ = p^m (m = None
/// for x = 0).
pub fn character_sphere_integral(p: u64, d: u32, m: Option<i64>, k: i64) -> f64 {
    let p = p as f64;
    let d = d as f64;
    let full = p.powf(k as f64 * d) * (1.0 - p.powf(-d));
    match m {
        None => full,
        Some(m) if k <= -m => full,
        Some(m) if k == 1 - m => -p.powf((k - 1) as f64 * d),
        Some(_) => 0.0,
    }
}

/// h_α(t, ·) on ℚ_p^d.
pub fn heat_profile_abelian(t: f64, alpha: f64, desc: GroupDescriptor) -> Result<RadialProfile> {
    check_positive("t", t)?;
    check_positive("α", alpha)?;
    if !desc.is_abelian() {
        return Err(Error::domain("the radial heat series is for ℚ_p^d"));
    }
    Ok(RadialProfile::new(desc, Shape::AbelianHeat { t, alpha }, false, ProfileParams::Heat { t, alpha }))
}

/// t/(t^{1/α} + ‖x‖)^{α+d}.
pub fn heat_estimate(t: f64, norm: f64, alpha: f64, d: f64) -> f64 {
    t / (t.powf(1.0 / alpha) + norm).powf(alpha + d)
}

/// h(t, x)/estimate at ‖x‖ = p^m.
pub fn heat_estimate_ratio(h: &RadialProfile, m: i64) -> Result<f64> {
    let ProfileParams::Heat { t, alpha } = *h.params() else {
        return Err(Error::domain("not a heat profile"));
    };
    let norm = h.p().powf(m as f64);
    Ok(h.shell(m) / heat_estimate(t, norm, alpha, h.q()))
}

/// ∫_0^∞ t^{β/α−1} h_α(t, ·) dt / Γ(β/α) on the shells of `shells`, by the
/// trapezoid rule in ln t on t = p^{j/4}, with the ends cut where the
/// analytic bounds drop below 1e−13 of the value. Outside the computed
/// shells the profile continues by (β−d)-homogeneity from the end shells.
pub fn riesz_potential(
    beta: f64,
    alpha: f64,
    desc: GroupDescriptor,
    shells: std::ops::RangeInclusive<i64>,
) -> Result<RadialProfile> {
    check_positive("α", alpha)?;
    let q = desc.homogeneous_dim() as f64;
    if !(beta > 0.0 && beta < q) {
        return Err(Error::domain(format!("β = {beta} must lie in (0, Q = {q})")));
    }
    if !desc.is_abelian() {
        return Err(Error::domain("the radial heat series is for ℚ_p^d"));
    }
    let (m_min, m_max) = (*shells.start(), *shells.end());
    if m_min > m_max {
        return Err(Error::domain("empty shell range"));
    }
    let p = desc.p() as f64;
    let s = beta / alpha;
    let h = (p.ln()) / 4.0;
    let mut remainder: f64 = 0.0;
    let mut values = Vec::new();
    for m in m_min..=m_max {
        // |h(t,x)| ≤ t·B for the small-t end
        let b: f64 = {
            let mut acc = p.powf((1 - m) as f64 * alpha) * p.powf(-q * m as f64);
            let mut k = -m;
            loop {
                let term = p.powf(k as f64 * (alpha + q)) * (1.0 - p.powf(-q));
                acc += term;
                if term < 1e-20 * acc {
                    break;
                }
                k -= 1;
            }
            acc
        };
        let scale = p.powf(m as f64 * (beta - q));
        let tol = 1e-13 * scale;
        // small end: B t0^{s+1}/(s+1) ≤ tol
        let t0 = (tol * (s + 1.0) / b).powf(1.0 / (s + 1.0));
        let j_lo = (t0.ln() / h).floor() as i64;
        let mut j_hi = j_lo;
        let large_bound = |t_end: f64| -> f64 {
            // ∫_T^∞ t^{s−1} h(t,0) dt = Σ_k μ_k a_k^{−s} Γ(s) Q(s, T a_k)
            let mut acc = 0.0;
            let mut k = 0i64;
            loop {
                let a = p.powf(k as f64 * alpha);
                let term = p.powf(k as f64 * (q - alpha * s)) * (1.0 - p.powf(-q)) * gamma(s) * upper_regularized(s, t_end * a);
                acc += term;
                if (t_end * a < 1e-3 && term <= 1e-22 * acc) || k < -20_000 {
                    break;
                }
                k -= 1;
            }
            let mut k = 1i64;
            loop {
                let a = p.powf(k as f64 * alpha);
                let term = p.powf(k as f64 * (q - alpha * s)) * (1.0 - p.powf(-q)) * gamma(s) * upper_regularized(s, t_end * a);
                acc += term;
                if term <= 1e-22 * acc.max(1e-300) || k > 2000 {
                    break;
                }
                k += 1;
            }
            acc
        };
        while large_bound((j_hi as f64 * h).exp()) > tol {
            j_hi += 4;
            if j_hi as f64 * h > 700.0 {
                return Err(Error::Convergence("potential quadrature range did not close".into()));
            }
        }
        let mut acc = 0.0;
        for j in j_lo..=j_hi {
            let t = (j as f64 * h).exp();
            let wgt = if j == j_lo || j == j_hi { 0.5 } else { 1.0 };
            acc += wgt * t.powf(s) * abelian_heat_shell(desc.p(), q, t, alpha, m);
        }
        let v = acc * h / gamma(s);
        remainder = remainder.max(2.0 * tol / (gamma(s) * scale));
        values.push(v);
    }
    let sigma = beta - q;
    let inner = ShellLaw { coeff: values[0] * p.powf(-(m_min as f64) * sigma), exponent: sigma };
    let outer = ShellLaw { coeff: values[values.len() - 1] * p.powf(-(m_max as f64) * sigma), exponent: sigma };
    let mut prof = RadialProfile::from_table(desc, m_min, values, inner, outer, false)?;
    prof.params = ProfileParams::Potential { beta, alpha, remainder };
    Ok(prof)
}

/// E_α = ∫_0^∞ h_α(t, ·) dt, defined for 0 < α < Q.
pub fn fundamental_solution_via_heat(
    alpha: f64,
    desc: GroupDescriptor,
    shells: std::ops::RangeInclusive<i64>,
) -> Result<RadialProfile> {
    let q = desc.homogeneous_dim() as f64;
    if alpha >= q {
        return Err(Error::domain(format!("the heat semigroup is not transient for α = {alpha} ≥ Q = {q}")));
    }
    riesz_potential(alpha, alpha, desc, shells)
}

/// CSV `t,shell,value,estimate_ratio`.
pub fn write_heat_table<W: Write>(out: W, rows: &[(f64, i64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "shell", "value", "estimate_ratio"])?;
    for (t, m, v, r) in rows {
        w.write_record([format!("{t:.16e}"), m.to_string(), format!("{v:.16e}"), format!("{r:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `shell,E_alpha,reconstruction_error`.
pub fn write_fundamental_table<W: Write>(out: W, rows: &[(i64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shell", "E_alpha", "reconstruction_error"])?;
    for (m, e, r) in rows {
        w.write_record([m.to_string(), format!("{e:.16e}"), format!("{r:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::CosetWindow;
    use crate::padic::frac_p_f64;
    use crate::vt::{vt_apply, vt_compact_apply};
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zp(p: u64) -> GroupDescriptor {
        GroupDescriptor::abelian(p, 1).unwrap()
    }

    fn random_real(window: CosetWindow, seed: u64) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..window.cell_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TestFunction::from_real(window, &v).unwrap()
    }

    /// e^{2πi{a·x}} on ℤ_p with a = j/p^k.
    fn character(p: u64, j: i64, k: u32) -> TestFunction {
        let w = CosetWindow::new(zp(p), 0, k as i64).unwrap();
        let a = BigRational::new(j.into(), (p as i64).pow(k).into());
        TestFunction::from_fn(w, |x| {
            let phase = frac_p_f64(&(&a * &x.coords()[0]), p);
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase)
        })
        .unwrap()
    }

    #[test]
    fn riesz_gamma_values() {
        assert!((riesz_gamma(0.5, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((riesz_gamma(2.0, 3.0).unwrap() + 9.0 / 4.0).abs() < 1e-15);
        for s in [-1.7, -0.3, 0.2, 0.7, 1.4, 2.9] {
            for kappa in [2.0, 3.0, 27.0] {
                let g = riesz_gamma(s, kappa).unwrap() * riesz_gamma(1.0 - s, kappa).unwrap();
                assert!((g - 1.0).abs() < 1e-12);
            }
        }
        assert!(riesz_gamma(0.0, 3.0).is_err());
        assert!(riesz_gamma(1.0, 3.0).is_err());
    }

    #[test]
    fn riesz_pairing_examples() {
        for p in [2u64, 3, 5] {
            let kappa = p as f64;
            let one = TestFunction::indicator_subgroup(CosetWindow::new(zp(p), 0, 2).unwrap(), 0).unwrap();
            for s in [-0.8, 0.3, 1.6, 2.5] {
                let got = riesz_pair(s, &one).unwrap();
                // shell series Σ_{m≤0} of the kernel against 1, continued
                let want = (1.0 - 1.0 / kappa) / (1.0 - kappa.powf(s - 1.0));
                assert!((got.re - want).abs() < 1e-13 && got.im.abs() < 1e-15);
            }
        }
        // direct integral agrees with the continuation for s > 0
        let d = zp(3);
        let f = random_real(CosetWindow::new(d, 0, 3).unwrap(), 7);
        for s in [0.3, 0.9, 1.7] {
            let a = riesz_pair(s, &f).unwrap();
            let b = pair(&riesz_profile(s, d).unwrap(), &f).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
        // s → 0 is δ_e
        let a = riesz_pair(1e-6, &f).unwrap();
        assert!((a - f.values()[0]).norm() < 1e-4);
        assert!(riesz_pair(1.0, &f).is_err());
    }

    #[test]
    fn riesz_on_characters() {
        // ⟨r_s, χ⟩ = ⟨χ⟩^{−s} for nontrivial χ
        for p in [2u64, 3] {
            for k in 1..=3u32 {
                for j in [1i64, (p as i64).pow(k) - 1] {
                    let chi = character(p, j, k);
                    for s in [0.3, 0.6, 1.7, -0.4] {
                        let got = riesz_pair(s, &chi).unwrap();
                        let want = (p as f64).powf(-s * k as f64);
                        assert!((got - want).norm() < 1e-9, "p={p} k={k} s={s}: {got}");
                    }
                }
            }
        }
    }

    #[test]
    fn riesz_semigroup_on_mean_zero() {
        let d = zp(3);
        let w = CosetWindow::new(d, 0, 3).unwrap();
        let basis = TestFunction::basis_mean_zero(w);
        for s in [0.3, 0.6, 1.7] {
            for t in [0.3, 0.6, 1.7] {
                let rs = riesz_profile(s, d).unwrap();
                let rt = riesz_profile(t, d).unwrap();
                for f in basis.iter().step_by(3) {
                    // ⟨r_s * r_t, f⟩ = ⟨r_t, f * r_s⟩
                    let g = convolve_radial(f, &rs).unwrap().values;
                    let lhs = pair(&rt, &g).unwrap();
                    let want = riesz_pair(s + t, f).unwrap();
                    assert!((lhs - want).norm() < 1e-9, "s={s} t={t}: {lhs} vs {want}");
                    // oracle: shell profile of r_s * r_t, paired through the
                    // continuation with the identity cell removed
                    let fe = f.values()[0];
                    let cells = f.cells().unwrap();
                    let cg = cells.cells();
                    let mut o = fe * rs.ball_integral(0).unwrap() * rt.ball_integral(0).unwrap();
                    for (i, v) in f.values().iter().enumerate().skip(1) {
                        let m = -(cg.level(&cg.decode(i)) as i64);
                        o += (v - fe) * radial_convolution_shell(&rs, &rt, m).unwrap() * f.cell_measure_f64();
                    }
                    assert!((o - want).norm() < 1e-9, "oracle s={s} t={t}: {o} vs {want}");
                }
            }
        }
    }

    #[test]
    fn fundamental_solution_constants() {
        let e = fundamental_solution_profile(0.5, Setting::LocallyCompact, zp(3)).unwrap();
        assert!((e.shell(2) - 3f64.powf(-1.0)).abs() < 1e-15);
        let h = GroupDescriptor::heisenberg(3, 1).unwrap();
        let e = fundamental_solution_profile(2.0, Setting::Graded, h).unwrap();
        assert!((e.shell(1) - 1.0 / 9.0).abs() < 1e-15);
        assert!(fundamental_solution_profile(4.0, Setting::Graded, h).is_err());
        let e = fundamental_solution_profile(1.0, Setting::Compact, zp(3)).unwrap();
        let x = GroupElement::from_ints(zp(3), &[9]).unwrap();
        let want = (1.0 - 3.0) / (3.0 * 3f64.ln()) * (1.0f64 / 9.0).ln();
        assert!((e.eval(&x).unwrap() - want).abs() < 1e-14);
        assert!(fundamental_solution_profile(1.0, Setting::LocallyCompact, zp(3)).is_err());
    }

    /// Σ_{m ≤ top} K(m)μ(m) by direct summation, for ball-integral checks.
    fn ball_by_sum(k: &RadialProfile, n: i64) -> f64 {
        (-n - 400..=-n).map(|m| k.shell(m) * k.shell_measure(m)).sum()
    }

    #[test]
    fn ball_integrals_match_sums() {
        let d = zp(3);
        for prof in [
            fundamental_solution_profile(0.5, Setting::Compact, d).unwrap(),
            fundamental_solution_profile(1.0, Setting::Compact, d).unwrap(),
            fundamental_solution_profile(0.7, Setting::LocallyCompact, d).unwrap(),
            heat_profile_abelian(0.3, 1.0, d).unwrap(),
        ] {
            for n in [0, 2, 5] {
                let a = prof.ball_integral(n).unwrap();
                let b = ball_by_sum(&prof, n);
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} {b}");
            }
        }
    }

    #[test]
    fn compact_fundamental_solution() {
        let d = zp(3);
        let w = CosetWindow::new(d, 0, 3).unwrap();
        for alpha in [0.5, 1.0, 2.3] {
            let e = fundamental_solution_profile(alpha, Setting::Compact, d).unwrap();
            for f in TestFunction::basis_mean_zero(w) {
                let u = convolve_radial(&f, &e).unwrap().values;
                let back = vt_compact_apply(&u, alpha, 0).unwrap();
                assert!(back.max_abs_diff(&f).unwrap() < 1e-8, "α={alpha}");
            }
        }
    }

    #[test]
    fn lc_fundamental_solution_and_residual() {
        let alpha = 0.7;
        for p in [2u64, 3] {
            let d = zp(p);
            let w = CosetWindow::new(d, 0, 2).unwrap();
            let e = fundamental_solution_profile(alpha, Setting::LocallyCompact, d).unwrap();
            for f in TestFunction::basis_mean_zero(w) {
                let g = vt_apply(&f, alpha, None).unwrap();
                let back = convolve_radial_tail(&g, &e, None).unwrap();
                assert!(back.max_abs_diff(&f).unwrap() < 1e-8);
            }
            let one = TestFunction::indicator_subgroup(w, 0).unwrap();
            let g = vt_apply(&one, alpha, None).unwrap();
            let full = convolve_radial_tail(&g, &e, None).unwrap();
            assert!(full.max_abs_diff(&one).unwrap() < 1e-8);
            for l in [0, -1, -3, -6] {
                let part = convolve_radial_tail(&g, &e, Some(l)).unwrap();
                let res = graded_residual(&one, alpha, l).unwrap();
                let err = one.sub(&part).unwrap();
                for v in err.values() {
                    assert!((v - res).norm() < 1e-8, "l={l}: {v} vs {res}");
                }
            }
        }
    }

    #[test]
    fn graded_fundamental_solution_on_heisenberg() {
        let h = GroupDescriptor::heisenberg(3, 1).unwrap();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let f = random_real(w, 4).project_mean_zero();
        for alpha in [1.2, 2.0] {
            let e = fundamental_solution_profile(alpha, Setting::Graded, h).unwrap();
            let g = vt_apply(&f, alpha, None).unwrap();
            let back = convolve_radial_tail(&g, &e, None).unwrap();
            assert!(back.max_abs_diff(&f).unwrap() < 1e-8);
        }
    }

    #[test]
    fn convolution_with_delta_profile() {
        // a kernel concentrated in G_{L_in} with unit mass reproduces f
        let d = zp(3);
        let w = CosetWindow::new(d, -1, 2).unwrap();
        let f = random_real(w, 11);
        // 1 on shells m ≤ −4 (the ball G_4), 0 outside; normalized by its mass below
        let zero = ShellLaw { coeff: 0.0, exponent: 1.0 };
        let delta = RadialProfile::from_table(d, -3, vec![0.0], ShellLaw { coeff: 1.0, exponent: 0.0 }, zero, false).unwrap();
        let mass = delta.ball_integral(2).unwrap();
        let u = convolve_radial(&f, &delta).unwrap().values.scale(Complex64::new(1.0 / mass, 0.0));
        assert!(u.max_abs_diff(&f).unwrap() < 1e-14);
    }

    /// S_k(x) by summing the character over ξ ∈ p^{−k}ℤ_p^d∖p^{1−k}ℤ_p^d in
    /// cosets of p^N ℤ_p^d.
    fn brute_sphere(p: u64, x: &[BigRational], k: i64, n: i64) -> f64 {
        let d = x.len();
        let per = (p as i64).pow((k + n) as u32);
        let cell = (p as f64).powf(-(n as f64) * d as f64);
        let mut total = 0.0;
        let mut idx = vec![0i64; d];
        loop {
            let xi: Vec<BigRational> = idx
                .iter()
                .map(|&j| BigRational::new(j.into(), 1.into()) * crate::padic::p_pow(p, -k))
                .collect();
            let on_shell = idx.iter().any(|&j| j % p as i64 != 0);
            if on_shell {
                let dot: BigRational = xi.iter().zip(x).map(|(a, b)| a * b).fold(BigRational::from_integer(0.into()), |s, v| s + v);
                total += (2.0 * std::f64::consts::PI * frac_p_f64(&dot, p)).cos() * cell;
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

    #[test]
    fn sphere_integrals_match_brute_force() {
        for (p, dim) in [(3u64, 1usize), (2, 2), (3, 2)] {
            let desc = GroupDescriptor::abelian(p, dim).unwrap();
            for m in -2i64..=2 {
                let mut coords = vec![BigRational::from_integer(0.into()); dim];
                coords[0] = crate::padic::p_pow(p, -m) * BigRational::from_integer((1 + p as i64).into());
                let x = GroupElement::new(desc, coords.clone()).unwrap();
                assert_eq!(x.level(), Some(-m));
                for k in -2i64..=3 {
                    if k + 3.max(m) > 4 {
                        continue;
                    }
                    let n = 3.max(m).max(1 - k);
                    let brute = brute_sphere(p, &coords, k, n);
                    let closed = character_sphere_integral(p, dim as u32, Some(m), k);
                    assert!((brute - closed).abs() < 1e-10, "p={p} d={dim} m={m} k={k}: {brute} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn heat_kernel_mass_estimates_semigroup() {
        for p in [2u64, 3] {
            for dim in [1usize, 2] {
                let desc = GroupDescriptor::abelian(p, dim).unwrap();
                for alpha in [0.5, 1.0, 2.0] {
                    let mut lo = f64::INFINITY;
                    let mut hi: f64 = 0.0;
                    for j in -4..=4 {
                        let t = (p as f64).powi(j);
                        let h = heat_profile_abelian(t, alpha, desc).unwrap();
                        let mass = h.ball_integral(40).unwrap()
                            + h.weighted_outer_sum(-40, ShellLaw { coeff: 1.0, exponent: 0.0 }, None).unwrap();
                        assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
                        let far = h.ball_integral(-200).unwrap();
                        assert!((far - 1.0).abs() < 1e-10);
                        for m in -4..=4 {
                            let r = heat_estimate_ratio(&h, m).unwrap();
                            lo = lo.min(r);
                            hi = hi.max(r);
                        }
                    }
                    assert!(lo > 0.0 && hi / lo <= 100.0, "p={p} d={dim} α={alpha}: [{lo}, {hi}]");
                    let (t, s) = (0.4, 1.3);
                    let a = heat_profile_abelian(t, alpha, desc).unwrap();
                    let b = heat_profile_abelian(s, alpha, desc).unwrap();
                    let c = heat_profile_abelian(t + s, alpha, desc).unwrap();
                    for m in -3..=3 {
                        let conv = radial_convolution_shell(&a, &b, m).unwrap();
                        assert!((conv - c.shell(m)).abs() < 1e-6 * c.shell(m).abs().max(1e-3));
                    }
                }
            }
        }
    }

    #[test]
    fn heat_semigroup_on_window() {
        // h_t·𝟙_{G_L} convolved cellwise, plus the shells of h_t beyond G_L,
        // where |y⁻¹x| = |y|; only the identity cell is sampled inexactly
        let desc = zp(3);
        let (t, s, alpha) = (0.5, 0.8, 1.0);
        let ht = heat_profile_abelian(t, alpha, desc).unwrap();
        let hs = heat_profile_abelian(s, alpha, desc).unwrap();
        let w = CosetWindow::new(desc, -3, 4).unwrap();
        let f = TestFunction::from_fn(w, |x| Complex64::new(ht.eval(x).unwrap(), 0.0)).unwrap();
        let conv = convolve_radial(&f, &hs).unwrap();
        let c = heat_profile_abelian(t + s, alpha, desc).unwrap();
        for m in -2..=2 {
            let x = GroupElement::new(desc, vec![crate::padic::p_pow(3, -m)]).unwrap();
            let got = conv.eval(&x).unwrap().re + shell_pair_sum(&ht, &hs, 3, None).unwrap();
            assert!((got - c.shell(m)).abs() < 1e-6, "m={m}: {got} vs {}", c.shell(m));
        }
    }

    #[test]
    fn potentials_via_heat() {
        let d = zp(3);
        let alpha = 0.5;
        let e = fundamental_solution_via_heat(alpha, d, -3..=3).unwrap();
        let closed = fundamental_solution_profile(alpha, Setting::LocallyCompact, d).unwrap();
        for m in -3..=3 {
            let rel = (e.shell(m) - closed.shell(m)).abs() / closed.shell(m);
            assert!(rel < 1e-6, "m={m}: {} vs {}", e.shell(m), closed.shell(m));
        }
        assert!(fundamental_solution_via_heat(1.0, d, 0..=0).is_err());
        for (beta, a) in [(0.3, 0.5), (0.8, 2.0), (0.5, 1.0)] {
            let i = riesz_potential(beta, a, d, -2..=2).unwrap();
            for m in -2..2 {
                let ratio = i.shell(m + 1) / i.shell(m);
                let want = 3f64.powf(beta - 1.0);
                assert!((ratio / want - 1.0).abs() < 1e-6, "β={beta}: {ratio} vs {want}");
            }
        }
        let d2 = GroupDescriptor::abelian(2, 2).unwrap();
        let i = riesz_potential(1.5, 1.0, d2, -1..=1).unwrap();
        assert!((i.shell(1) / i.shell(0) / 2f64.powf(-0.5) - 1.0).abs() < 1e-6);
        assert!(riesz_potential(2.0, 1.0, d2, 0..=0).is_err());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_heat_table(&mut buf, &[(1.0, 0, 0.5, 1.0)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,shell,value,estimate_ratio\n"));
        let mut buf = Vec::new();
        write_fundamental_table(&mut buf, &[(0, 1.0, 0.0)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("shell,E_alpha,reconstruction_error\n"));
    }

    #[test]
    fn cell_measure_matches_rational() {
        let w = CosetWindow::new(zp(3), 0, 2).unwrap();
        assert_eq!(w.cell_measure().to_f64().unwrap(), 1.0 / 9.0);
    }
}
