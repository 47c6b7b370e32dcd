//! Schrödinger representations, operator symbols and Plancherel heat traces.
//!
//! A representation space L²(ℚ_p^d) is discretized by a [`RepWindow`] and every
//! operator is compressed to it. For ℍ_d the compression of π_λ(g) is exact:
//! either a phase times a cyclic shift of cells, or zero, because the shift
//! leaves p^{s−K}ℤ_p^d or the phase is a nontrivial character on a cell and
//! averages out.
//!
//! Heat traces on ℍ_1 use π_{εμ²} ≅ π_ε∘D_μ. The symbol of a homogeneous
//! operator then depends on λ only through |ε| and the scale |μ|^α, so two
//! eigendecompositions serve the whole λ-integral. Within a μ-shell the
//! integrand depends on the unit part of μ through finitely many digits, and the
//! shell average is an exact finite sum.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::group::{CosetWindow, GroupDescriptor, GroupElement, GroupKind};
use crate::padic::{self, frac_p_f64, p_pow, residue_u64, smallest_nonresidue, vp, PadicScalar, SquareClass};
use crate::par;
use crate::testfn::TestFunction;
use crate::vt::{vt_constant, vt_window_weights};

const MAX_REP_CELLS: usize = 1 << 13;

fn cis(turns: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * turns)
}

/// e^{2πi{r}_p}.
fn character(r: &BigRational, p: u64) -> Complex64 {
    cis(frac_p_f64(r, p))
}

fn abs_p(r: &BigRational, p: u64) -> f64 {
    vp(r, p).map_or(0.0, |v| (p as f64).powf(-v as f64))
}

fn rational(n: u64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("order α = {alpha} must be positive")))
    }
}

/// v_p of a nonzero residue below p^64.
fn vp_u64(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

/// Units of ℤ/p^r (just {1} for r = 0).
fn units(p: u64, r: u32) -> impl Iterator<Item = u64> {
    let m = p.pow(r);
    (1..m.max(2)).filter(move |e| r == 0 || e % p != 0)
}

/// L²(ℚ_p^d) cut down to functions on p^{s−K}ℤ_p^d that are constant on cosets
/// of p^{s+K}ℤ_p^d. Cell J ∈ [0, p^{2K})^d has representative u = p^{s−K}J,
/// first coordinate varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RepWindow {
    p: u64,
    d: usize,
    k: u32,
    shift: i64,
}

impl RepWindow {
    pub fn new(p: u64, d: usize, k: u32) -> Result<Self> {
        padic::check_prime(p)?;
        if d == 0 || k == 0 {
            return Err(Error::domain("representation window needs d ≥ 1 and K ≥ 1"));
        }
        let total = p
            .checked_pow(2 * k * d as u32)
            .filter(|&n| n as usize <= MAX_REP_CELLS)
            .ok_or_else(|| Error::window(format!("p^{{2Kd}} cells exceed {MAX_REP_CELLS}")))?;
        debug_assert!(total > 0);
        Ok(RepWindow { p, d, k, shift: 0 })
    }

    /// The same cell pattern scaled by p^s.
    pub fn with_shift(self, shift: i64) -> Self {
        RepWindow { shift, ..self }
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn shift(&self) -> i64 {
        self.shift
    }
    /// p^{2K}, the number of cells per coordinate.
    pub fn side(&self) -> usize {
        self.p.pow(2 * self.k) as usize
    }
    pub fn cell_count(&self) -> usize {
        self.side().pow(self.d as u32)
    }
    /// p^{−(s+K)d}.
    pub fn cell_measure(&self) -> f64 {
        (self.p as f64).powf(-((self.shift + self.k as i64) * self.d as i64) as f64)
    }

    pub fn digits(&self, mut idx: usize) -> Vec<u64> {
        let side = self.side();
        (0..self.d)
            .map(|_| {
                let j = idx % side;
                idx /= side;
                j as u64
            })
            .collect()
    }

    pub fn index(&self, digits: &[u64]) -> usize {
        let side = self.side() as u64;
        digits.iter().rev().fold(0, |acc, &j| acc * side as usize + (j % side) as usize)
    }

    pub fn rep(&self, idx: usize) -> Vec<BigRational> {
        let scale = p_pow(self.p, self.shift - self.k as i64);
        self.digits(idx).into_iter().map(|j| &scale * rational(j)).collect()
    }

    /// L² norm with the cell measure.
    pub fn norm(&self, phi: &[Complex64]) -> f64 {
        (phi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.cell_measure()).sqrt()
    }

    /// X with x ∈ p^{s−K}X + p^{s+K}ℤ_p, or `None` when x ∉ p^{s−K}ℤ_p.
    pub fn shift_index(&self, x: &BigRational) -> Result<Option<u64>> {
        let lo = self.shift - self.k as i64;
        match vp(x, self.p) {
            None => Ok(Some(0)),
            Some(v) if v < lo => Ok(None),
            Some(_) => residue_u64(&(x * p_pow(self.p, -lo)), self.p, 2 * self.k).map(Some),
        }
    }

    /// Whether u ↦ e(a·u) is constant on every cell: a·p^{s+K} ∈ ℤ_p.
    pub fn resolves(&self, a: &BigRational) -> bool {
        vp(a, self.p).is_none_or(|v| v + self.shift + self.k as i64 >= 0)
    }

    fn check(&self, phi: &[Complex64]) -> Result<()> {
        if phi.len() != self.cell_count() {
            return Err(Error::DimensionMismatch { expected: self.cell_count(), got: phi.len() });
        }
        Ok(())
    }
}

/// A compressed representation operator, (Aφ)[J] = weight[J]·φ[source[J]], or
/// zero when the window does not resolve the group element.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOperator {
    n: usize,
    action: Option<(Vec<usize>, Vec<Complex64>)>,
}

impl RepOperator {
    fn zero(n: usize) -> Self {
        RepOperator { n, action: None }
    }

    pub fn is_zero(&self) -> bool {
        self.action.is_none()
    }

    pub fn apply(&self, phi: &[Complex64]) -> Result<Vec<Complex64>> {
        if phi.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: phi.len() });
        }
        Ok(match &self.action {
            None => vec![Complex64::zero(); self.n],
            Some((src, w)) => src.iter().zip(w).map(|(&s, w)| w * phi[s]).collect(),
        })
    }

    /// Matrix in the orthonormal basis of normalized cell indicators.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        if let Some((src, w)) = &self.action {
            for (j, (&s, w)) in src.iter().zip(w).enumerate() {
                m[(j, s)] += w;
            }
        }
        m
    }
}

/// A point of the unitary dual: λ for ℍ_d, (λ, μ) for 𝔼_4, with the square
/// class of λ for dilation reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct RepPoint {
    p: u64,
    lambda: BigRational,
    mu: Option<BigRational>,
    class: SquareClass,
    root: PadicScalar,
}

impl RepPoint {
    const ROOT_DIGITS: u32 = 24;

    fn build(p: u64, lambda: BigRational, mu: Option<BigRational>) -> Result<Self> {
        if lambda.is_zero() {
            return Err(Error::domain("λ = 0 is not in the support of the Plancherel measure"));
        }
        let (class, root) = padic::square_class(&PadicScalar::from_rational(&lambda, p, Self::ROOT_DIGITS)?)?;
        Ok(RepPoint { p, lambda, mu, class, root })
    }

    pub fn heisenberg(p: u64, lambda: BigRational) -> Result<Self> {
        Self::build(p, lambda, None)
    }

    pub fn engel(p: u64, lambda: BigRational, mu: BigRational) -> Result<Self> {
        Self::build(p, lambda, Some(mu))
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }
    pub fn mu(&self) -> Option<&BigRational> {
        self.mu.as_ref()
    }
    pub fn is_engel(&self) -> bool {
        self.mu.is_some()
    }
    /// λ = ε·root² with ε one of 1, u₀, p, p·u₀.
    pub fn class(&self) -> SquareClass {
        self.class
    }
    pub fn root(&self) -> &PadicScalar {
        &self.root
    }
    pub fn lambda_valuation(&self) -> i64 {
        vp(&self.lambda, self.p).expect("λ ≠ 0")
    }
}

fn heisenberg_d(g: &GroupElement) -> Result<usize> {
    match g.descriptor().kind() {
        GroupKind::Heisenberg { d } => Ok(d),
        _ => Err(Error::domain(format!("{} is not a Heisenberg group", g.descriptor()))),
    }
}

/// Compressed π_λ(x,y,z)φ(u) = e(λ(z + ½x·y + y·u))·φ(u+x).
pub fn schrodinger_operator(lambda: &BigRational, g: &GroupElement, window: &RepWindow) -> Result<RepOperator> {
    let d = heisenberg_d(g)?;
    if lambda.is_zero() {
        return Err(Error::domain("λ = 0"));
    }
    if d != window.d || g.descriptor().p() != window.p {
        return Err(Error::domain("window does not match the group"));
    }
    let n = window.cell_count();
    let c = g.coords();
    let mut shifts = Vec::with_capacity(d);
    for x in &c[..d] {
        match window.shift_index(x)? {
            Some(s) => shifts.push(s),
            None => return Ok(RepOperator::zero(n)),
        }
    }
    let a: Vec<BigRational> = c[d..2 * d].iter().map(|y| lambda * y).collect();
    if !a.iter().all(|a| window.resolves(a)) {
        return Ok(RepOperator::zero(n));
    }
    let xy: BigRational = (0..d).map(|j| &c[j] * &c[d + j]).sum();
    let base = frac_p_f64(&(lambda * (&c[2 * d] + half() * xy)), window.p);
    // e(a_j·u_j) = e(J_j·{a_j p^{s−K}}) because J_j is an integer.
    let step = p_pow(window.p, window.shift - window.k as i64);
    let steps: Vec<f64> = a.iter().map(|a| frac_p_f64(&(a * &step), window.p)).collect();
    let (src, w) = (0..n)
        .map(|idx| {
            let j = window.digits(idx);
            let turns = base + j.iter().zip(&steps).map(|(&j, s)| j as f64 * s).sum::<f64>();
            let moved: Vec<u64> = j.iter().zip(&shifts).map(|(j, s)| j + s).collect();
            (window.index(&moved), cis(turns.fract()))
        })
        .unzip();
    Ok(RepOperator { n, action: Some((src, w)) })
}

pub fn schrodinger_apply(
    lambda: &BigRational,
    g: &GroupElement,
    phi: &[Complex64],
    window: &RepWindow,
) -> Result<Vec<Complex64>> {
    window.check(phi)?;
    schrodinger_operator(lambda, g, window)?.apply(phi)
}

/// Compressed π_{λ,μ}(x,y₁,y₂,y₃)φ(u) = e(−(μ/2λ)y₁ + λy₃ − λy₂u + (λ/2)y₁u²)·φ(u+x).
/// The quadratic phase is averaged over p^`refine` sub-cells of each cell,
/// which is exact once the phase is constant on the sub-cells.
pub fn engel_operator(point: &RepPoint, g: &GroupElement, window: &RepWindow, refine: u32) -> Result<RepOperator> {
    if g.descriptor().kind() != GroupKind::Engel {
        return Err(Error::domain("π_{λ,μ} acts on the Engel group"));
    }
    let mu = point.mu().ok_or_else(|| Error::domain("Engel representation needs (λ, μ)"))?;
    if window.d != 1 || window.p != point.p || g.descriptor().p() != point.p {
        return Err(Error::domain("Engel representations live on a one-dimensional window"));
    }
    let n = window.cell_count();
    let c = g.coords();
    let Some(shift) = window.shift_index(&c[0])? else {
        return Ok(RepOperator::zero(n));
    };
    let lam = &point.lambda;
    let two = rational(2);
    let constant = -(mu / (&two * lam)) * &c[1] + lam * &c[3];
    let lin = -(lam * &c[2]);
    let quad = lam / &two * &c[1];
    let sub = p_pow(window.p, window.shift + window.k as i64);
    let count = window.p.pow(refine);
    let (src, w) = par::map_indices(n, |idx| {
        let u0 = &window.rep(idx)[0];
        let mut acc = Complex64::zero();
        for j in 0..count {
            let u = u0 + &sub * rational(j);
            acc += character(&(&constant + &lin * &u + &quad * &u * &u), window.p);
        }
        let j = window.digits(idx)[0];
        (window.index(&[j + shift]), acc / count as f64)
    })
    .into_iter()
    .unzip();
    Ok(RepOperator { n, action: Some((src, w)) })
}

pub fn engel_rep_apply(
    point: &RepPoint,
    g: &GroupElement,
    phi: &[Complex64],
    window: &RepWindow,
    refine: u32,
) -> Result<Vec<Complex64>> {
    window.check(phi)?;
    engel_operator(point, g, window, refine)?.apply(phi)
}

/// f̂(λ) = ∫ f(g) π_λ(g)* dg on the window, by sampling f's cells refined
/// `refine` levels further. Exact for the compressed representation once the
/// refined cells resolve it.
pub fn fourier_group(f: &TestFunction, lambda: &BigRational, window: &RepWindow, refine: u32) -> Result<DMatrix<Complex64>> {
    if lambda.is_zero() {
        return Err(Error::domain("λ = 0"));
    }
    let fine = f.refine(f.window().l_in() + refine as i64)?;
    let cells = fine.cells()?;
    let m = fine.cell_measure_f64();
    let n = window.cell_count();
    let samples: Vec<usize> = (0..fine.values().len()).filter(|&i| !fine.values()[i].is_zero()).collect();
    let chunks = samples.len().div_ceil(256).max(1);
    let parts = par::map_indices(chunks, |c| -> Result<DMatrix<Complex64>> {
        let mut acc = DMatrix::zeros(n, n);
        for &i in samples.iter().skip(c * 256).take(256) {
            let op = schrodinger_operator(lambda, &cells.rep(i), window)?;
            if let Some((src, w)) = &op.action {
                let coeff = fine.values()[i] * m;
                for (j, (&s, w)) in src.iter().zip(w).enumerate() {
                    acc[(s, j)] += coeff * w.conj();
                }
            }
        }
        Ok(acc)
    });
    parts.into_iter().try_fold(DMatrix::zeros(n, n), |acc, part| Ok(acc + part?))
}

/// Operators with a symbol on the representation windows. `Directional(k)`
/// is ∂_{e_k}^α for coordinate k of the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolOp {
    Laplacian,
    SubLaplacian,
    EngelLaplacian,
    Directional(usize),
}

/// Σ_j D_{u_j}^α compressed to the window (VT along each coordinate, with the
/// exterior of the window folded into the diagonal).
fn kinetic_matrix(window: &RepWindow, alpha: f64, coords: &[usize]) -> Result<DMatrix<f64>> {
    let k = window.k as i64;
    let line = CosetWindow::new(GroupDescriptor::abelian(window.p, 1)?, window.shift - k, window.shift + k)?;
    let (w, diag) = vt_window_weights(line, alpha)?;
    let n = window.cell_count();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        let da = window.digits(a);
        for &j in coords {
            m[(a, a)] += diag;
            let mut db = da.clone();
            for t in 0..window.side() as u64 {
                if t == da[j] {
                    continue;
                }
                db[j] = t;
                let diff = da[j].abs_diff(t);
                m[(a, window.index(&db))] += w[vp_u64(diff, window.p) as usize];
            }
        }
    }
    Ok(m)
}

/// A symbol compressed to a window, with its eigendecomposition (eigenvalues
/// ascending, orthonormal eigenvectors as columns). The compression is real
/// symmetric.
#[derive(Debug, Clone)]
pub struct SymbolMatrix {
    point: RepPoint,
    window: RepWindow,
    op: SymbolOp,
    alpha: f64,
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SymbolMatrix {
    pub fn point(&self) -> &RepPoint {
        &self.point
    }
    pub fn window(&self) -> &RepWindow {
        &self.window
    }
    pub fn op(&self) -> SymbolOp {
        self.op
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// F(σ) = V F(Λ) Vᵀ.
    pub fn functional(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(i).scale_mut(f(e));
        }
        scaled * v.transpose()
    }
}

fn potential(op: SymbolOp, point: &RepPoint, alpha: f64, u: &[BigRational]) -> Result<f64> {
    let p = point.p;
    let lam = &point.lambda;
    let la = abs_p(lam, p);
    let d = u.len();
    let pot = |j: usize| (la * abs_p(&u[j], p)).powf(alpha);
    Ok(match (op, point.mu()) {
        (SymbolOp::Laplacian, None) => (0..d).map(pot).sum::<f64>() + la.powf(alpha / 2.0),
        (SymbolOp::SubLaplacian, None) => (0..d).map(pot).sum(),
        (SymbolOp::Directional(k), None) if k < d => 0.0,
        (SymbolOp::Directional(k), None) if k < 2 * d => pot(k - d),
        (SymbolOp::Directional(k), None) if k == 2 * d => la.powf(alpha),
        (SymbolOp::EngelLaplacian, Some(mu)) | (SymbolOp::Directional(1), Some(mu)) => {
            let two = rational(2);
            let quad = abs_p(&(lam / &two * &u[0] * &u[0] - mu / (&two * lam)), p);
            if op == SymbolOp::Directional(1) {
                quad.powf(alpha)
            } else {
                quad.powf(alpha) + pot(0).powf(0.5) + la.powf(alpha / 3.0)
            }
        }
        (SymbolOp::Directional(0), Some(_)) => 0.0,
        (SymbolOp::Directional(2), Some(_)) => pot(0),
        (SymbolOp::Directional(3), Some(_)) => la.powf(alpha),
        _ => return Err(Error::domain(format!("{op:?} does not match the representation"))),
    })
}

/// Symbol of `op` at `point` compressed to `window`: the VT part in u as an
/// exact window matrix plus the potential at cell representatives.
pub fn symbol_matrix(op: SymbolOp, point: &RepPoint, alpha: f64, window: &RepWindow) -> Result<SymbolMatrix> {
    check_alpha(alpha)?;
    if point.p != window.p {
        return Err(Error::domain("window over a different prime"));
    }
    if point.is_engel() && window.d != 1 {
        return Err(Error::domain("Engel symbols act on a one-dimensional window"));
    }
    let kinetic: Vec<usize> = match (op, point.is_engel()) {
        (SymbolOp::Laplacian | SymbolOp::SubLaplacian, false) | (SymbolOp::EngelLaplacian, true) => {
            (0..window.d).collect()
        }
        (SymbolOp::Directional(k), false) if k < window.d => vec![k],
        (SymbolOp::Directional(0), true) => vec![0],
        (SymbolOp::Directional(_), _) => vec![],
        _ => return Err(Error::domain(format!("{op:?} does not match the representation"))),
    };
    let mut matrix =
        if kinetic.is_empty() { DMatrix::zeros(window.cell_count(), window.cell_count()) } else { kinetic_matrix(window, alpha, &kinetic)? };
    for i in 0..window.cell_count() {
        matrix[(i, i)] += potential(op, point, alpha, &window.rep(i))?;
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(&matrix);
    Ok(SymbolMatrix { point: point.clone(), window: *window, op, alpha, matrix, eigenvalues, eigenvectors })
}

/// Eigenvalues ascending with orthonormal eigenvectors as columns.
fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let evd = faer::Mat::from_fn(n, n, |i, j| m[(i, j)]).selfadjoint_eigendecomposition(faer::Side::Lower);
    let (s, u) = (evd.s().column_vector(), evd.u());
    ((0..n).map(|i| s.read(i)).collect(), DMatrix::from_fn(n, n, |i, j| u.read(i, j)))
}

pub fn heat_semigroup_symbol(sigma: &SymbolMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("heat time t = {t} must be nonnegative")));
    }
    Ok(sigma.functional(|s| (-t * s).exp()))
}

/// The central or y_j-directional symbol of ℍ_d evaluated from its defining
/// integral C_α∫(e(−a·t) − 1)|t|^{−α−1}dt (a = λ or λ·u_j) by exact character
/// sums over the shells where e(a·t) is not constant, one value per cell.
pub fn directional_symbol_quadrature(point: &RepPoint, k: usize, alpha: f64, window: &RepWindow) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let d = window.d;
    if point.is_engel() || !(d..=2 * d).contains(&k) {
        return Err(Error::domain("quadrature covers the y_j and z directions of ℍ_d"));
    }
    let p = point.p;
    let pf = p as f64;
    let c = vt_constant(pf, alpha, 1.0);
    let integral = |a: &BigRational| -> f64 {
        let Some(v) = vp(a, p) else { return 0.0 };
        // shells m ≤ v see a constant character; brute force the next three
        let mut total = 0.0;
        for m in v + 1..=v + 3 {
            let r = (m - v) as u32;
            let cell = pf.powf((m - r as i64) as f64);
            let s: f64 = units(p, r)
                .map(|e| character(&(-(a * p_pow(p, -m)) * rational(e)), p).re * cell)
                .sum();
            let shell = pf.powf(m as f64) * (1.0 - 1.0 / pf);
            total += (s - shell) * pf.powf(-(m as f64) * (alpha + 1.0));
        }
        total -= (1.0 - 1.0 / pf) * pf.powf(-((v + 4) as f64) * alpha) / (1.0 - pf.powf(-alpha));
        c * total
    };
    Ok((0..window.cell_count())
        .map(|i| {
            let a = if k == 2 * d { point.lambda.clone() } else { &point.lambda * &window.rep(i)[k - d] };
            integral(&a)
        })
        .collect())
}

/// Truncation of the Plancherel integral: log_p|λ| ∈ [lambda_lo, lambda_hi],
/// representation window K, and a cap on the unit digits of μ a shell may need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Truncation {
    pub lambda_lo: i64,
    pub lambda_hi: i64,
    pub k: u32,
    pub max_digits: u32,
}

impl Truncation {
    pub fn new(m: i64, k: u32) -> Self {
        Truncation { lambda_lo: -m, lambda_hi: m, k, max_digits: 12 }
    }

    /// The λ-range moved by `by` in log_p|λ| (λ ↦ p^{−by}λ).
    pub fn shifted(self, by: i64) -> Self {
        Truncation { lambda_lo: self.lambda_lo + by, lambda_hi: self.lambda_hi + by, ..self }
    }

    /// Largest |log_p|λ|| covered.
    pub fn m(&self) -> i64 {
        self.lambda_lo.abs().max(self.lambda_hi.abs())
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::new(3, 2)
    }
}

/// A truncated Plancherel integral; `remainder` is the summed magnitude of
/// the outermost λ-shells at both ends, a heuristic for the cut-off tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatValue {
    pub value: Complex64,
    pub remainder: f64,
    pub trunc_m: i64,
    pub trunc_k: u32,
}

/// A μ-shell |μ| = p^w of square class ε.
#[derive(Debug, Clone, Copy)]
struct Shell {
    class: SquareClass,
    w: i64,
    /// ½|ε|²·p^{3w}·vol{|μ| = p^w}: the pushforward of |λ|dλ.
    weight: f64,
    /// p^{wα}: σ(εμ²) = |μ|^α σ(ε).
    scale: f64,
    edge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Digits {
    v: i64,
    unit: u64,
}

/// Per-shell spectral coefficients c_i: the λ-integral of an operator function
/// F(σ) is Σ_shells weight·Σ_i F(scale·s_i)·c_i.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    terms: Vec<(Shell, Vec<Complex64>)>,
    trunc: Truncation,
}

/// The Plancherel-side calculus of 𝔏^α or 𝔏_sub^α on ℍ_1 at fixed truncation.
#[derive(Debug, Clone)]
pub struct HeisenbergSpectral {
    p: u64,
    alpha: f64,
    op: SymbolOp,
    trunc: Truncation,
    window: RepWindow,
    /// Base symbols at ε = 1 and ε = p (σ depends on |ε| only).
    spectra: [SymbolMatrix; 2],
    half: u64,
    roots: Vec<Complex64>,
}

impl SpectralMeasure {
    fn eval_with(&self, spec: &HeisenbergSpectral, f: impl Fn(f64) -> f64) -> HeatValue {
        let mut value = Complex64::zero();
        let mut remainder = 0.0;
        for (sh, c) in &self.terms {
            let eig = spec.spectra[sh.class.valuation() as usize].eigenvalues();
            let term: Complex64 = eig.iter().zip(c).map(|(&s, c)| c * f(sh.scale * s)).sum::<Complex64>() * sh.weight;
            value += term;
            if sh.edge {
                remainder += term.norm();
            }
        }
        HeatValue { value, remainder, trunc_m: self.trunc.m(), trunc_k: self.trunc.k }
    }

    /// Smallest and largest eigenvalue over all shells.
    fn spectral_range(&self, spec: &HeisenbergSpectral) -> (f64, f64) {
        self.terms.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (sh, _)| {
            let eig = spec.spectra[sh.class.valuation() as usize].eigenvalues();
            (lo.min(sh.scale * eig[0]), hi.max(sh.scale * eig[eig.len() - 1]))
        })
    }
}

/// ∫₀^∞ t^{power−1} g(t) dt for g(t) = Σ c e^{−ts} with s ∈ [s_min, s_max]:
/// trapezoid in ln t with step ln p/4, ends where the integrand is below 1e−13
/// of its scale.
fn log_time_quadrature(p: u64, power: f64, (s_min, s_max): (f64, f64), g: impl Fn(f64) -> Complex64) -> Complex64 {
    let h = (p as f64).ln() / 4.0;
    let lo = (1e-13f64.ln() / power) - s_max.ln();
    let hi = (60.0 + 10.0 * power).ln() - s_min.ln();
    let steps = ((hi - lo) / h).ceil() as usize;
    (0..=steps)
        .map(|i| {
            let t = (lo + i as f64 * h).exp();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            g(t) * (w * h * t.powf(power))
        })
        .sum()
}

impl HeisenbergSpectral {
    pub fn new(p: u64, alpha: f64, op: SymbolOp, trunc: Truncation) -> Result<Self> {
        check_alpha(alpha)?;
        if p == 2 {
            return Err(Error::domain("square-class reduction needs odd p"));
        }
        if !matches!(op, SymbolOp::Laplacian | SymbolOp::SubLaplacian) {
            return Err(Error::domain("heat traces are built for 𝔏^α and 𝔏_sub^α"));
        }
        if trunc.lambda_lo > trunc.lambda_hi {
            return Err(Error::domain("empty λ-range"));
        }
        let cap = (63.0 / (p as f64).log2()).floor() as u32 / 2;
        if trunc.max_digits > cap || 2 * trunc.k > cap {
            return Err(Error::Precision(format!("digit cap {} too large for p = {p}", trunc.max_digits)));
        }
        let window = RepWindow::new(p, 1, trunc.k)?;
        let base = |eps: u64| -> Result<SymbolMatrix> {
            symbol_matrix(op, &RepPoint::heisenberg(p, rational(eps))?, alpha, &window)
        };
        let n = window.side() as u64;
        Ok(HeisenbergSpectral {
            p,
            alpha,
            op,
            trunc,
            window,
            spectra: [base(1)?, base(p)?],
            half: n.div_ceil(2),
            roots: (0..n).map(|j| cis(j as f64 / n as f64)).collect(),
        })
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }
    pub fn window(&self) -> &RepWindow {
        &self.window
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn op(&self) -> SymbolOp {
        self.op
    }
    /// Base symbol for |ε| = 1 (`class_valuation` 0) or |ε| = 1/p.
    pub fn base_symbol(&self, class_valuation: usize) -> &SymbolMatrix {
        &self.spectra[class_valuation]
    }

    fn shells(&self) -> Vec<Shell> {
        let pf = self.p as f64;
        let mut out = Vec::new();
        for class in SquareClass::ALL {
            let ve = class.valuation();
            // log_p|λ| = 2w − v(ε)
            let w_lo = (self.trunc.lambda_lo + ve).div_euclid(2) + i64::from((self.trunc.lambda_lo + ve).rem_euclid(2) != 0);
            let w_hi = (self.trunc.lambda_hi + ve).div_euclid(2);
            for w in w_lo..=w_hi {
                let l = 2 * w - ve;
                out.push(Shell {
                    class,
                    w,
                    weight: 0.5 * pf.powf(-2.0 * ve as f64) * pf.powf(4.0 * w as f64) * (1.0 - 1.0 / pf),
                    scale: pf.powf(w as f64 * self.alpha),
                    edge: l <= self.trunc.lambda_lo + 1 || l >= self.trunc.lambda_hi - 1,
                });
            }
        }
        out
    }

    fn digits_of(&self, g: &GroupElement) -> Result<[Option<Digits>; 3]> {
        if g.descriptor() != GroupDescriptor::heisenberg(self.p, 1)? {
            return Err(Error::domain("heat traces are computed on ℍ_1 over the same prime"));
        }
        let prec = self.trunc.max_digits.max(2 * self.trunc.k);
        let mut out = [None; 3];
        for (o, c) in out.iter_mut().zip(g.coords()) {
            if let Some(v) = vp(c, self.p) {
                *o = Some(Digits { v, unit: residue_u64(&(c * p_pow(self.p, -v)), self.p, prec)? });
            }
        }
        Ok(out)
    }

    /// Unit digits of μ that fix D_μ g at window resolution on the shell, or
    /// `None` when D_μ g is not resolved there (the compressed operator is 0).
    fn needed_digits(&self, g: &[Option<Digits>; 3], sh: &Shell) -> Result<Option<u32>> {
        let k = self.trunc.k as i64;
        let ve = sh.class.valuation();
        // exponents of p in p^K·μ·x, p^K·ε·μ·y and ε·μ²·z
        let ex = g[0].map(|c| k - sh.w + c.v);
        let ey = g[1].map(|c| k + ve - sh.w + c.v);
        let ez = g[2].map(|c| ve - 2 * sh.w + c.v);
        if ex.is_some_and(|e| e < 0) || ey.is_some_and(|e| e < 0) {
            return Ok(None);
        }
        let need = |e: Option<i64>| e.map_or(0, |e| (2 * k - e).max(0));
        let r = need(ex).max(need(ey)).max(ez.map_or(0, |e| (-e).max(0)));
        if r > self.trunc.max_digits as i64 {
            return Err(Error::Precision(format!("μ-shell needs {r} unit digits (cap {})", self.trunc.max_digits)));
        }
        Ok(Some(r as u32))
    }

    /// Window coordinates (X, Y) of D_μ g, with Y read off ε·μ·y, and the
    /// central phase e(εμ²z), averaged over the unit part of μ on the shell
    /// and accumulated into `acc` with weight `coeff`.
    fn accumulate_shell(
        &self,
        g: &[Option<Digits>; 3],
        sh: &Shell,
        coeff: Complex64,
        acc: &mut BTreeMap<(u64, u64), Complex64>,
    ) -> Result<()> {
        let Some(r) = self.needed_digits(g, sh)? else { return Ok(()) };
        let count = if r == 0 { 1.0 } else { ((self.p - 1) * self.p.pow(r - 1)) as f64 };
        for eta in units(self.p, r) {
            self.accumulate_at(g, sh, eta, coeff / count, acc);
        }
        Ok(())
    }

    /// The contribution of D_μ g for μ = p^{−w}η; g must be resolved on the
    /// shell and η given to at least [`Self::needed_digits`] digits.
    fn accumulate_at(
        &self,
        g: &[Option<Digits>; 3],
        sh: &Shell,
        eta: u64,
        coeff: Complex64,
        acc: &mut BTreeMap<(u64, u64), Complex64>,
    ) {
        let p = self.p;
        let k = self.trunc.k as i64;
        let n = self.window.side() as u64;
        let ve = sh.class.valuation();
        let eu = if matches!(sh.class, SquareClass::One | SquareClass::P) { 1 } else { smallest_nonresidue(p) };
        let coord = |c: Option<Digits>, e: i64, mult: u64| -> u64 {
            match c {
                Some(c) if e < 2 * k => {
                    let m = p.pow((2 * k - e) as u32) as u128;
                    let v = (eta as u128 * c.unit as u128 % m) * mult as u128 % m;
                    (v as u64 * p.pow(e as u32)) % n
                }
                _ => 0,
            }
        };
        let x = g[0].map_or(0, |c| coord(Some(c), k - sh.w + c.v, 1));
        let y = g[1].map_or(0, |c| coord(Some(c), k + ve - sh.w + c.v, eu));
        let phase = match g[2] {
            Some(c) if ve - 2 * sh.w + c.v < 0 => {
                let m = p.pow((2 * sh.w - ve - c.v) as u32) as u128;
                let e2 = eta as u128 * eta as u128 % m;
                cis((e2 * (c.unit as u128 % m) % m * eu as u128 % m) as f64 / m as f64)
            }
            _ => Complex64::new(1.0, 0.0),
        };
        *acc.entry((x, y)).or_insert(Complex64::zero()) += coeff * phase;
    }

    /// Phases e((h·X·Y + Y·J)/N) of the window operator at (X, Y).
    fn phases(&self, x: u64, y: u64) -> Vec<Complex64> {
        let n = self.window.side() as u64;
        let base = (self.half as u128 * x as u128 % n as u128 * y as u128 % n as u128) as u64;
        (0..n).map(|j| self.roots[((base + y * j) % n) as usize]).collect()
    }

    /// c_i = Σ_{(X,Y)} a_{XY}·Σ_J phase_J v_i[J] w_i[J+X].
    fn coefficients(&self, acc: &BTreeMap<(u64, u64), Complex64>, v: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<Complex64> {
        let n = self.window.side();
        let mut c = vec![Complex64::zero(); n];
        for (&(x, y), &a) in acc {
            if a.is_zero() {
                continue;
            }
            let ph = self.phases(x, y);
            for (i, ci) in c.iter_mut().enumerate() {
                let (vi, wi) = (v.column(i), w.column(i));
                let s: Complex64 = (0..n).map(|j| ph[j] * (vi[j] * wi[(j + x as usize) % n])).sum();
                *ci += a * s;
            }
        }
        c
    }

    /// Coefficients for point evaluation at g: F ↦ ∫Tr[π_λ(g)F(σ(λ))]|λ|dλ.
    pub fn point_measure(&self, g: &GroupElement) -> Result<SpectralMeasure> {
        let digits = self.digits_of(g)?;
        let shells = self.shells();
        let terms = par::map_indices(shells.len(), |i| -> Result<(Shell, Vec<Complex64>)> {
            let sh = shells[i];
            let mut acc = BTreeMap::new();
            self.accumulate_shell(&digits, &sh, Complex64::new(1.0, 0.0), &mut acc)?;
            let v = self.spectra[sh.class.valuation() as usize].eigenvectors();
            Ok((sh, self.coefficients(&acc, v, v)))
        });
        Ok(SpectralMeasure { terms: terms.into_iter().collect::<Result<_>>()?, trunc: self.trunc })
    }

    /// ∫_{G_n} π_ε(D_μ k) dk compressed to the window, in closed form: the
    /// z-integral is an indicator, the y-integral confines (u+v)/2 to a ball,
    /// and cells are intersected with balls exactly.
    fn cell_average(&self, sh: &Shell, n_level: i64) -> DMatrix<f64> {
        let p = self.p;
        let pf = p as f64;
        let k = self.trunc.k as i64;
        let side = self.window.side();
        let ve = sh.class.valuation();
        if 2 * sh.w - ve > 2 * n_level {
            return DMatrix::zeros(side, side);
        }
        let overlap = |diff: u64, r: i64| -> f64 {
            if diff == 0 {
                return pf.powf(r.min(-k) as f64);
            }
            let norm = k - vp_u64(diff, p) as i64;
            if r >= -k && norm <= r {
                pf.powf(-k as f64)
            } else {
                0.0
            }
        };
        let c = pf.powf((-3 * n_level - sh.w + k) as f64);
        let (rx, ry) = (sh.w - n_level, ve - sh.w + n_level);
        DMatrix::from_fn(side, side, |a, b| {
            let diff = ((b + side - a) % side) as u64;
            let sum = ((a + b) % side) as u64;
            c * overlap(diff, rx) * overlap(sum, ry)
        })
    }

    /// Coefficients for pairing against f: F ↦ ∫ f(g)·∫Tr[π_λ(g)F(σ(λ))]|λ|dλ dg,
    /// integrating each cell aG_n exactly through π(D_μ a)·∫_{G_n}π(D_μ k)dk.
    pub fn pairing_measure(&self, f: &TestFunction) -> Result<SpectralMeasure> {
        let cells = f.cells()?;
        let reps: Vec<(Complex64, [Option<Digits>; 3])> = f
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| Ok((v, self.digits_of(&cells.rep(i))?)))
            .collect::<Result<_>>()?;
        let n_level = f.window().l_in();
        let shells = self.shells();
        let terms = par::map_indices(shells.len(), |i| -> Result<(Shell, Vec<Complex64>)> {
            let sh = shells[i];
            let mut acc = BTreeMap::new();
            for (v, d) in &reps {
                self.accumulate_shell(d, &sh, *v, &mut acc)?;
            }
            let vecs = self.spectra[sh.class.valuation() as usize].eigenvectors();
            let w = self.cell_average(&sh, n_level) * vecs;
            Ok((sh, self.coefficients(&acc, vecs, &w)))
        });
        Ok(SpectralMeasure { terms: terms.into_iter().collect::<Result<_>>()?, trunc: self.trunc })
    }

    /// h(t, g) = ∫ Tr[π_λ(g) e^{−tσ(λ)}] |λ| dλ over the truncated λ-range.
    pub fn heat_kernel(&self, t: f64, g: &GroupElement) -> Result<HeatValue> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("heat time t = {t} must be positive")));
        }
        Ok(self.point_measure(g)?.eval_with(self, |s| (-t * s).exp()))
    }

    pub fn eval_measure(&self, m: &SpectralMeasure, f: impl Fn(f64) -> f64) -> HeatValue {
        m.eval_with(self, f)
    }

    /// ∫₀^∞ t^{power−1}·(measure applied to e^{−tσ}) dt by log-time quadrature.
    pub fn time_integral(&self, m: &SpectralMeasure, power: f64) -> Complex64 {
        let range = m.spectral_range(self);
        log_time_quadrature(self.p, power, range, |t| m.eval_with(self, |s| (-t * s).exp()).value)
    }

    /// (h(t,·) * h(s,·))(g) from the window traces by the exact group
    /// convolution of the truncated kernels, next to h(t+s, g).
    pub fn semigroup_pair(&self, t: f64, s: f64, g: &GroupElement) -> Result<(Complex64, Complex64)> {
        if !(t > 0.0 && s > 0.0) {
            return Err(Error::domain("heat times must be positive"));
        }
        let digits = self.digits_of(g)?;
        let shells = self.shells();
        let side = self.window.side();
        let parts = par::map_indices(shells.len(), |i| -> Result<(Complex64, Complex64)> {
            let sh = shells[i];
            let mut acc = BTreeMap::new();
            self.accumulate_shell(&digits, &sh, Complex64::new(1.0, 0.0), &mut acc)?;
            if acc.is_empty() {
                return Ok((Complex64::zero(), Complex64::zero()));
            }
            let spec = &self.spectra[sh.class.valuation() as usize];
            let table = |time: f64| -> Vec<Complex64> {
                let e = spec.functional(|x| (-time * sh.scale * x).exp());
                let mut a = vec![Complex64::zero(); side * side];
                for x in 0..side {
                    for y in 0..side {
                        let ph = self.phases(x as u64, y as u64);
                        a[x * side + y] = (0..side).map(|j| ph[j] * e[((j + x) % side, j)]).sum();
                    }
                }
                a
            };
            let (at, as_, ats) = (table(t), table(s), table(t + s));
            let n = side as u64;
            let mut conv = Complex64::zero();
            let mut direct = Complex64::zero();
            for (&(x, y), &wgt) in &acc {
                let mut sum = Complex64::zero();
                for x1 in 0..n {
                    for y1 in 0..n {
                        let twist = (self.half as u128 * ((y1 * x % n + n - x1 * y % n) % n) as u128 % n as u128) as usize;
                        let other = (((x + n - x1) % n) * n + (y + n - y1) % n) as usize;
                        sum += self.roots[twist] * at[(x1 * n + y1) as usize] * as_[other];
                    }
                }
                conv += wgt * sum / n as f64;
                direct += wgt * ats[(x * n + y) as usize];
            }
            Ok((conv * sh.weight, direct * sh.weight))
        });
        parts.into_iter().try_fold((Complex64::zero(), Complex64::zero()), |(a, b), r| {
            let (c, d) = r?;
            Ok((a + c, b + d))
        })
    }

    /// (‖f‖², ∫‖f̂(λ)‖²_HS |λ| dλ). With f = Σ c_a 𝟙_{aG_n} and A = ∫_{G_n}π,
    /// A² = |G_n|A gives ‖f̂‖²_HS = |G_n| Σ c̄_a c_b Tr[π(b⁻¹a)A], so each
    /// product is compressed once and the trace is exact on the window.
    pub fn plancherel(&self, f: &TestFunction) -> Result<(f64, f64)> {
        let cells = f.cells()?;
        let terms: Vec<(Complex64, GroupElement)> = f
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| (v, cells.rep(i)))
            .collect();
        let mut products: BTreeMap<[Option<Digits>; 3], Complex64> = BTreeMap::new();
        for (ca, a) in &terms {
            for (cb, b) in &terms {
                let d = self.digits_of(&b.inverse().mul(a)?)?;
                *products.entry(d).or_insert(Complex64::zero()) += ca.conj() * cb;
            }
        }
        let lhs = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * f.cell_measure_f64();
        let n_level = f.window().l_in();
        let g_n = self.p as f64;
        let g_n = g_n.powi(-4 * n_level as i32);
        let n = self.window.side();
        let shells = self.shells();
        let parts = par::map_indices(shells.len(), |i| -> Result<f64> {
            let sh = shells[i];
            let avg = self.cell_average(&sh, n_level);
            if avg.iter().all(|v| *v == 0.0) {
                return Ok(0.0);
            }
            // A's range: scale p^{w−n}, support radius p^{v(ε)−w+n}
            let need = (n_level - sh.w).max(sh.class.valuation() - sh.w + n_level);
            if need > self.trunc.k as i64 {
                return Err(Error::window(format!("λ-shell w = {} needs K ≥ {need}", sh.w)));
            }
            let mut acc = BTreeMap::new();
            for (d, c) in &products {
                self.accumulate_shell(d, &sh, *c, &mut acc)?;
            }
            let mut tr = Complex64::zero();
            for (&(x, y), &a) in &acc {
                let ph = self.phases(x, y);
                tr += a * (0..n).map(|j| ph[j] * avg[((j + x as usize) % n, j)]).sum::<Complex64>();
            }
            Ok(sh.weight * g_n * tr.re)
        });
        let rhs = parts.into_iter().sum::<Result<f64>>()? + self.low_tail(f, &terms)?;
        Ok((lhs, rhs))
    }

    /// ∫_{|λ|<p^lo} ‖f̂(λ)‖²_HS |λ| dλ. Once e(λz) ≡ 1 on the support of f,
    /// ‖f̂(λ)‖²_HS |λ| = ‖∫f dz‖²_{L²(x,y)}, and the z-fibre of every cell
    /// aG_n has length |G_n|/p^{−2n}.
    fn low_tail(&self, f: &TestFunction, terms: &[(Complex64, GroupElement)]) -> Result<f64> {
        let win = f.window();
        if self.trunc.lambda_lo - 1 > 2 * win.l_out() {
            return Err(Error::window("λ-range starts above the scale where f is z-flat"));
        }
        let n = win.l_in();
        let modulus = p_pow(self.p, n);
        let mut fibres: BTreeMap<(BigRational, BigRational), Complex64> = BTreeMap::new();
        for (c, a) in terms {
            let key = |t: &BigRational| {
                let r = t / &modulus;
                (r.clone() - r.floor()) * &modulus
            };
            let xy = (key(&a.coords()[0]), key(&a.coords()[1]));
            *fibres.entry(xy).or_insert(Complex64::zero()) += c;
        }
        let pf = self.p as f64;
        let fibre = pf.powi(-2 * n as i32);
        let norm: f64 = fibres.values().map(|v| (v * fibre).norm_sqr()).sum::<f64>() * pf.powi(-2 * n as i32);
        Ok(norm * pf.powi(self.trunc.lambda_lo as i32 - 1))
    }

    /// Direct compression of f̂(λ) to the window, then its HS norm. Cells
    /// whose phase oscillates are dropped, so this sits below the exact
    /// value and approaches it as K grows.
    pub fn compressed_plancherel(&self, f: &TestFunction) -> Result<(f64, f64)> {
        let cells = f.cells()?;
        let reps: Vec<(Complex64, [Option<Digits>; 3])> = f
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| Ok((v.conj(), self.digits_of(&cells.rep(i))?)))
            .collect::<Result<_>>()?;
        let lhs = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * f.cell_measure_f64();
        let n_level = f.window().l_in();
        let side = self.window.side();
        let shells = self.shells();
        let parts = par::map_indices(shells.len(), |i| -> Result<f64> {
            let sh = shells[i];
            let avg = self.cell_average(&sh, n_level);
            if avg.iter().all(|v| *v == 0.0) {
                return Ok(0.0);
            }
            let mut r = Some(0u32);
            for (_, d) in &reps {
                r = match (r, self.needed_digits(d, &sh)?) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            let Some(r) = r else {
                return Err(Error::window("a cell of f is not resolved on a λ-shell with nonzero average"));
            };
            let mut total = 0.0;
            let mut count = 0.0;
            for eta in units(self.p, r) {
                let mut acc = BTreeMap::new();
                for (v, d) in &reps {
                    self.accumulate_at(d, &sh, eta, *v, &mut acc);
                }
                let mut op = DMatrix::<Complex64>::zeros(side, side);
                for (&(x, y), &a) in &acc {
                    let ph = self.phases(x, y);
                    for j in 0..side {
                        op[(j, (j + x as usize) % side)] += a * ph[j];
                    }
                }
                let prod = op * avg.map(|v| Complex64::new(v, 0.0));
                total += prod.iter().map(|c| c.norm_sqr()).sum::<f64>();
                count += 1.0;
            }
            Ok(sh.weight * total / count)
        });
        let rhs = parts.into_iter().sum::<Result<f64>>()?;
        Ok((lhs, rhs))
    }

    /// Symbol-inverse pairing ⟨E, f⟩ = ∫Tr[(f∘ι)^(λ) σ(λ)^{−1}]|λ|dλ.
    pub fn formal_pair(&self, f: &TestFunction) -> Result<Complex64> {
        let m = self.pairing_measure(f)?;
        if let Some(bad) = self.spectra.iter().find(|s| !(s.eigenvalues()[0] > 0.0)) {
            return Err(Error::domain(format!("singular symbol: ground eigenvalue {}", bad.eigenvalues()[0])));
        }
        Ok(m.eval_with(self, |s| 1.0 / s).value)
    }

    /// ⟨∫₀^∞ h(t,·)dt, f⟩ by time quadrature of the heat pairings.
    pub fn heat_route_pair(&self, f: &TestFunction) -> Result<Complex64> {
        let m = self.pairing_measure(f)?;
        Ok(self.time_integral(&m, 1.0))
    }

    /// ℐ_β(g) = Γ(β/α)^{−1}∫₀^∞ t^{β/α−1} h(t,g) dt.
    pub fn riesz_potential(&self, beta: f64, g: &GroupElement) -> Result<Complex64> {
        if !(beta > 0.0 && beta < 4.0) {
            return Err(Error::domain(format!("β = {beta} outside (0, Q) = (0, 4)")));
        }
        let m = self.point_measure(g)?;
        let power = beta / self.alpha;
        Ok(self.time_integral(&m, power) / gamma(power))
    }
}

fn check_mean_zero(f: &TestFunction) -> Result<()> {
    let mean = f.integrate().norm();
    let scale = f.values().iter().map(|v| v.norm()).sum::<f64>() * f.cell_measure_f64();
    if mean > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::domain(format!("f must have mean zero (∫f = {mean:e})")));
    }
    Ok(())
}

pub fn heisenberg_heat_kernel(t: f64, g: &GroupElement, alpha: f64, trunc: Truncation) -> Result<HeatValue> {
    HeisenbergSpectral::new(g.descriptor().p(), alpha, SymbolOp::Laplacian, trunc)?.heat_kernel(t, g)
}

/// ⟨E_T, f⟩ through the inverse symbol, T = 𝔏^α or 𝔏_sub^α on ℍ_1.
pub fn formal_fundamental_solution_pair(f: &TestFunction, op: SymbolOp, alpha: f64, trunc: Truncation) -> Result<Complex64> {
    check_mean_zero(f)?;
    HeisenbergSpectral::new(f.descriptor().p(), alpha, op, trunc)?.formal_pair(f)
}

/// ⟨∫₀^∞ h dt, f⟩, the heat-integral route to the same pairing.
pub fn heat_route_fundamental_pair(f: &TestFunction, op: SymbolOp, alpha: f64, trunc: Truncation) -> Result<Complex64> {
    check_mean_zero(f)?;
    HeisenbergSpectral::new(f.descriptor().p(), alpha, op, trunc)?.heat_route_pair(f)
}

pub fn riesz_potential_group(beta: f64, alpha: f64, g: &GroupElement, trunc: Truncation) -> Result<Complex64> {
    HeisenbergSpectral::new(g.descriptor().p(), alpha, SymbolOp::Laplacian, trunc)?.riesz_potential(beta, g)
}

/// Truncation of the Engel Plancherel integral over (λ, μ) with weight |λ|:
/// log_p|λ| ∈ [−m, m] at `digits` unit digits, μ ∈ p^{−mu_levels}ℤ_p modulo
/// p^{mu_levels}, representation window K and phase sub-sampling `refine`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EngelTruncation {
    pub m: i64,
    pub digits: u32,
    pub mu_levels: i64,
    pub k: u32,
    pub refine: u32,
}

impl Default for EngelTruncation {
    fn default() -> Self {
        EngelTruncation { m: 1, digits: 1, mu_levels: 1, k: 1, refine: 1 }
    }
}

/// h(t, g) = ∫∫ Tr[π_{λ,μ}(g) e^{−tσ(λ,μ)}] |λ| dλ dμ by midpoint sums over
/// (λ, μ)-cells.
pub fn engel_heat_kernel(t: f64, g: &GroupElement, alpha: f64, trunc: EngelTruncation) -> Result<HeatValue> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("heat time t = {t} must be positive")));
    }
    check_alpha(alpha)?;
    let p = g.descriptor().p();
    let window = RepWindow::new(p, 1, trunc.k)?;
    let pf = p as f64;
    let mut grid = Vec::new();
    for v in -trunc.m..=trunc.m {
        for eta in units(p, trunc.digits) {
            for j in 0..p.pow(2 * trunc.mu_levels as u32) {
                grid.push((v, eta, j));
            }
        }
    }
    let parts = par::map_indices(grid.len(), |i| -> Result<(i64, Complex64)> {
        let (v, eta, j) = grid[i];
        let lambda = p_pow(p, -v) * rational(eta);
        let mu = p_pow(p, -trunc.mu_levels) * rational(j);
        let point = RepPoint::engel(p, lambda, mu)?;
        let sigma = symbol_matrix(SymbolOp::EngelLaplacian, &point, alpha, &window)?;
        let e = heat_semigroup_symbol(&sigma, t)?;
        let tr = match engel_operator(&point, g, &window, trunc.refine)?.action {
            None => Complex64::zero(),
            Some((src, w)) => src.iter().zip(&w).enumerate().map(|(jj, (&s, w))| w * e[(s, jj)]).sum(),
        };
        let cell = pf.powf(v as f64 - trunc.digits as f64) * pf.powf(-trunc.mu_levels as f64);
        Ok((v, tr * (pf.powf(v as f64) * cell)))
    });
    let mut value = Complex64::zero();
    let mut remainder = 0.0;
    let mut edges = [Complex64::zero(); 2];
    for r in parts {
        let (v, c) = r?;
        value += c;
        if v == -trunc.m {
            edges[0] += c;
        } else if v == trunc.m {
            edges[1] += c;
        }
    }
    remainder += edges[0].norm() + edges[1].norm();
    Ok(HeatValue { value, remainder, trunc_m: trunc.m, trunc_k: trunc.k })
}

fn class_name(c: SquareClass) -> &'static str {
    match c {
        SquareClass::One => "1",
        SquareClass::NonResidue => "u0",
        SquareClass::P => "p",
        SquareClass::PNonResidue => "p*u0",
    }
}

/// CSV `t,x,y,z,re,im,trunc_M,trunc_K`.
pub fn write_heat_table<W: Write>(out: W, rows: &[(f64, GroupElement, HeatValue)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "z", "re", "im", "trunc_M", "trunc_K"])?;
    for (t, g, h) in rows {
        let mut rec = vec![format!("{t:.16e}")];
        rec.extend(g.coords().iter().take(3).map(padic::format_rational));
        rec.extend([format!("{:.16e}", h.value.re), format!("{:.16e}", h.value.im), h.trunc_m.to_string(), h.trunc_k.to_string()]);
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `lambda_valuation,class,eig_index,eigenvalue`.
pub fn write_spectrum<W: Write>(out: W, symbols: &[SymbolMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda_valuation", "class", "eig_index", "eigenvalue"])?;
    for s in symbols {
        for (i, e) in s.eigenvalues().iter().enumerate() {
            w.write_record([
                s.point().lambda_valuation().to_string(),
                class_name(s.point().class()).to_string(),
                i.to_string(),
                format!("{e:.16e}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
