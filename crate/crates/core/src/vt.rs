//! Vladimirov–Taibleson operators.
//!
//! Everything radial goes through [`level_kernel_apply`]: on a window the
//! operator is Σ_c W[level(x⁻¹c)] f(c) + diag·f(x), exact because f is
//! constant on cells and |x⁻¹c| depends only on the two cells. The part of the
//! integral beyond the window is a closed-form geometric series.
//!
//! Orders: `vt_apply`, `jump_kernel` and the directional operators use the
//! graded order (|·|_G with exponent −(α+Q)); `vt_compact_apply` and
//! `vt_split_decompose` use the Vilenkin order (|·|_𝒢 = |·|_G^Q, exponent −(α+1)).

use num_complex::Complex64;
use num_traits::Zero;

use crate::cells::CellGroup;
use crate::error::{Error, Result};
use crate::group::{CosetWindow, GroupDescriptor, GroupElement, GroupKind};
use crate::par;
use crate::testfn::TestFunction;

/// The radial part of an operator outside its window: value(x) =
/// coeff·|x|_G^{−exponent}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTail {
    pub coeff: Complex64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTResult {
    pub values: TestFunction,
    /// `None` for the directional operators, whose output off the window is
    /// not radial.
    pub tail: Option<RadialTail>,
}

impl VTResult {
    /// Output at g: window value, or the radial tail outside.
    pub fn eval(&self, g: &GroupElement) -> Result<Complex64> {
        let wc = self.values.cells()?;
        if let Some(i) = wc.locate(g)? {
            return Ok(self.values.values()[i]);
        }
        let tail = self
            .tail
            .ok_or_else(|| Error::window("point outside the window of a non-radial output"))?;
        let r = g.quasi_norm().to_f64();
        Ok(tail.coeff * r.powf(-tail.exponent))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("order α = {alpha} must be positive")))
    }
}

/// (1 − q^α)/(1 − q^{−(α+Q)}).
pub fn vt_constant(q: f64, alpha: f64, big_q: f64) -> f64 {
    (1.0 - q.powf(alpha)) / (1.0 - q.powf(-(alpha + big_q)))
}

/// Number of cells at relative level ℓ from a fixed cell in a depth-n window.
pub(crate) fn shell_cell_count(p: u64, q: u32, depth: u32, level: u32) -> f64 {
    let kappa = (p as f64).powi(q as i32);
    if level >= depth {
        1.0
    } else {
        kappa.powi((depth - level) as i32) * (1.0 - 1.0 / kappa)
    }
}

/// out(x) = Σ_c W[level(x⁻¹c)] f(c) + diag·f(x), W indexed by relative level
/// 0..=depth.
pub fn level_kernel_apply(f: &TestFunction, weights: &[f64], diag: f64) -> Result<TestFunction> {
    let window = f.window();
    let depth = window.depth() as usize;
    if weights.len() != depth + 1 {
        return Err(Error::DimensionMismatch { expected: depth + 1, got: weights.len() });
    }
    let cg = CellGroup::new(window.descriptor(), window.depth())?;
    let n = cg.count();
    let table = cg.level_table();
    let vals = f.values();
    let out = par::map_indices(n, |x| {
        let row = &table[x * n..(x + 1) * n];
        let mut buckets = vec![Complex64::zero(); depth + 1];
        for (l, v) in row.iter().zip(vals) {
            buckets[*l as usize] += v;
        }
        let s: Complex64 = buckets.iter().zip(weights).map(|(b, w)| b * w).sum();
        s + vals[x] * diag
    });
    TestFunction::new(window, out)
}

/// ∫_{G∖G_L} |y|_G^{−(α+Q)} dy = (1 − p^{−Q}) p^{(L−1)α}/(1 − p^{−α}).
fn outer_integral(p: f64, q: f64, alpha: f64, l: i64) -> f64 {
    (1.0 - p.powf(-q)) * p.powf((l - 1) as f64 * alpha) / (1.0 - p.powf(-alpha))
}

/// Level weights W[0..=depth] and diagonal of 𝒟^α compressed to `window`;
/// the diagonal carries the whole integral over the complement of the window.
pub fn vt_window_weights(window: CosetWindow, alpha: f64) -> Result<(Vec<f64>, f64)> {
    check_alpha(alpha)?;
    let desc = window.descriptor();
    let p = desc.p() as f64;
    let q = desc.homogeneous_dim() as f64;
    let c = vt_constant(p, alpha, q);
    let depth = window.depth();
    let m = p.powf(-q * window.l_in() as f64);
    let mut w: Vec<f64> = (0..depth)
        .map(|l| c * m * p.powf((l as i64 + window.l_out()) as f64 * (alpha + q)))
        .collect();
    w.push(0.0);
    let row_sum: f64 = (0..depth)
        .map(|l| shell_cell_count(desc.p(), desc.homogeneous_dim(), depth, l) * w[l as usize])
        .sum();
    Ok((w, -(row_sum + c * outer_integral(p, q, alpha, window.l_out()))))
}

/// 𝒟^α f = C_α ∫ (f(xy⁻¹) − f(x)) |y|_G^{−(α+Q)} dy on `out_window`
/// (default: f's window) plus the radial tail C_α·∫f·|x|_G^{−(α+Q)} off it.
pub fn vt_apply(f: &TestFunction, alpha: f64, out_window: Option<CosetWindow>) -> Result<VTResult> {
    check_alpha(alpha)?;
    let out = out_window.unwrap_or(f.window());
    if out.l_in() < f.window().l_in() {
        return Err(Error::domain("output window coarser than the input's constancy index"));
    }
    if out.l_out() > f.window().l_out() {
        return Err(Error::domain("output window must contain the support window of f"));
    }
    let f = f.resample(out)?;
    let (w, diag) = vt_window_weights(out, alpha)?;
    let p = out.descriptor().p() as f64;
    let q = out.descriptor().homogeneous_dim() as f64;
    let c = vt_constant(p, alpha, q);
    let values = level_kernel_apply(&f, &w, diag)?;
    Ok(VTResult {
        tail: Some(RadialTail { coeff: f.integrate() * c, exponent: alpha + q }),
        values,
    })
}

/// 𝔻_k^α f = c₁ f + C_α ∫_{G_k} (f(xy⁻¹) − f(x)) |y|_{𝒢_k}^{−α−1} d_k y with the
/// normalized measure d_k y = ϰ^k dy (Vilenkin order α).
pub fn vt_compact_apply(f: &TestFunction, alpha: f64, k: i64) -> Result<TestFunction> {
    check_alpha(alpha)?;
    if k > f.window().l_in() {
        return Err(Error::window(format!("subgroup level {k} finer than the constancy index")));
    }
    let window = f.window().with_levels(k, f.window().l_in())?;
    let f = f
        .resample(window)
        .map_err(|_| Error::window(format!("support of f is not inside G_{k}")))?;
    let desc = window.descriptor();
    let kappa = desc.kappa();
    let depth = window.depth();
    let c = (1.0 - kappa.powf(alpha)) / (1.0 - kappa.powf(-alpha - 1.0));
    let c1 = (1.0 - 1.0 / kappa) / (1.0 - kappa.powf(-alpha - 1.0));
    let m = kappa.powi(-(depth as i32));
    let mut w: Vec<f64> = (0..depth).map(|l| c * m * kappa.powf(l as f64 * (alpha + 1.0))).collect();
    w.push(0.0);
    let row_sum: f64 = (0..depth)
        .map(|l| shell_cell_count(desc.p(), desc.homogeneous_dim(), depth, l) * w[l as usize])
        .sum();
    level_kernel_apply(&f, &w, c1 - row_sum)
}

/// D^α f = ϰ^{lα} 𝔻_l^α f on G_l plus tail_coeff·|x|_𝒢^{−(α+1)}·∫f off G_l.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDecomposition {
    pub main: TestFunction,
    pub tail_coeff: f64,
    pub mass: Complex64,
    pub alpha: f64,
}

impl SplitDecomposition {
    pub fn eval(&self, g: &GroupElement) -> Result<Complex64> {
        if let Some(i) = self.main.cells()?.locate(g)? {
            return Ok(self.main.values()[i]);
        }
        let r = g.vilenkin_norm().to_f64();
        Ok(self.mass * self.tail_coeff * r.powf(-(self.alpha + 1.0)))
    }
}

pub fn vt_split_decompose(f: &TestFunction, alpha: f64, l: i64) -> Result<SplitDecomposition> {
    check_alpha(alpha)?;
    if l > f.window().l_out() {
        return Err(Error::domain(format!("l = {l} exceeds the support level {}", f.window().l_out())));
    }
    let kappa = f.descriptor().kappa();
    let main = vt_compact_apply(f, alpha, l)?.scale(Complex64::new(kappa.powf(l as f64 * alpha), 0.0));
    Ok(SplitDecomposition {
        main,
        tail_coeff: (1.0 - kappa.powf(alpha)) / (1.0 - kappa.powf(-(alpha + 1.0))),
        mass: f.integrate(),
        alpha,
    })
}

/// Residue vector of exp(−t e_k) for t = j in the normalized frame.
fn orbit_step(cg: &CellGroup, dim: usize, k: usize, j: u64) -> Vec<u64> {
    let m = cg.ring().m;
    let mut v = vec![0u64; dim];
    v[k] = (m - j % m) % m;
    v
}

/// ∂_{e_k}^α f at the given points, each of which must lie in G_{L_out} of f.
///
/// Exact: along the orbit t ↦ x·exp(−t e_k) the integrand is constant on the
/// cosets of p^{ν_k L_in}ℤ_p, finitely many of which meet the support; beyond
/// |t| = p^{−ν_k L_out} only −f(x) survives and integrates in closed form.
pub fn directional_vt_at(
    f: &TestFunction,
    k: usize,
    alpha: f64,
    points: &[GroupElement],
) -> Result<Vec<Complex64>> {
    check_alpha(alpha)?;
    let desc = f.descriptor();
    if k >= desc.dim() {
        return Err(Error::DimensionMismatch { expected: desc.dim(), got: k + 1 });
    }
    let wc = f.cells()?;
    let cg = wc.cells();
    let nu = desc.weights()[k];
    let p = desc.p() as f64;
    let window = f.window();
    let t_cells = desc.p().pow(nu * window.depth());
    let c1 = vt_constant(p, alpha, 1.0);
    let a = (nu as i64 * window.l_out()) as f64;
    let tail = c1 * (1.0 - 1.0 / p) * p.powf((a - 1.0) * alpha) / (1.0 - p.powf(-alpha));
    let cell_t = p.powf(-(nu as f64) * window.l_in() as f64);
    // |t_j| for j ≥ 1 and the weight of each t-cell
    let weights: Vec<f64> = (1..t_cells)
        .map(|j| {
            let mut v = 0;
            let mut jj = j;
            while jj % desc.p() == 0 {
                jj /= desc.p();
                v += 1;
            }
            let abs_t = p.powf(-(a + v as f64));
            c1 * cell_t * abs_t.powf(-(alpha + 1.0))
        })
        .collect();
    let steps: Vec<Vec<u64>> = (1..t_cells).map(|j| orbit_step(cg, desc.dim(), k, j)).collect();
    let vals = f.values();
    let residues = points
        .iter()
        .map(|x| {
            if !window.contains(x) {
                return Err(Error::window(format!("{x} is outside G_{}", window.l_out())));
            }
            cg.residues_of(wc.normalize(x)?.coords())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(par::map_indices(points.len(), |i| {
        let x = &residues[i];
        let fx = vals[cg.canonical_index(x)];
        let s: Complex64 = steps
            .iter()
            .zip(&weights)
            .map(|(step, w)| (vals[cg.canonical_index(&cg.mul(x, step))] - fx) * w)
            .sum();
        s - fx * tail
    }))
}

/// Constancy depth multiplier of the directional output: the orbit of a
/// non-central direction conjugates G_n into G_{n/ν_max}.
fn directional_refinement(desc: GroupDescriptor, k: usize) -> i64 {
    if desc.is_central(k) {
        1
    } else {
        desc.max_weight() as i64
    }
}

/// ∂_{e_k}^α f on `out_window` (default: f's support window at the constancy
/// depth the output needs). The output is not compactly supported, so no
/// radial tail is attached; use [`directional_vt_at`] elsewhere.
pub fn directional_vt_apply(
    f: &TestFunction,
    k: usize,
    alpha: f64,
    out_window: Option<CosetWindow>,
) -> Result<VTResult> {
    let desc = f.descriptor();
    let w = f.window();
    let out = match out_window {
        Some(o) => o,
        None => w.with_levels(w.l_out(), w.l_out() + w.depth() as i64 * directional_refinement(desc, k))?,
    };
    let f = if out.l_out() < w.l_out() { f.extend(out.l_out())? } else { f.clone() };
    let reps = out.reps()?;
    let values = directional_vt_at(&f, k, alpha, &reps)?;
    Ok(VTResult { values: TestFunction::new(out, values)?, tail: None })
}

/// Orders of the terms of 𝔏^α: α/ν_k in direction k, sub-Laplacian keeps
/// only the first layer.
fn laplacian_terms(desc: GroupDescriptor, alpha: f64, sub: bool) -> Vec<(usize, f64)> {
    desc.weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| !sub || w == 1)
        .map(|(k, &w)| (k, alpha / w as f64))
        .collect()
}

pub fn vladimirov_laplacian_at(f: &TestFunction, alpha: f64, points: &[GroupElement]) -> Result<Vec<Complex64>> {
    sum_terms(f, &laplacian_terms(f.descriptor(), alpha, false), points)
}

pub fn sub_laplacian_at(f: &TestFunction, alpha: f64, points: &[GroupElement]) -> Result<Vec<Complex64>> {
    require_heisenberg(f.descriptor())?;
    sum_terms(f, &laplacian_terms(f.descriptor(), alpha, true), points)
}

fn require_heisenberg(desc: GroupDescriptor) -> Result<()> {
    match desc.kind() {
        GroupKind::Heisenberg { .. } => Ok(()),
        _ => Err(Error::domain("the sub-Laplacian is defined on ℍ_d only")),
    }
}

fn sum_terms(f: &TestFunction, terms: &[(usize, f64)], points: &[GroupElement]) -> Result<Vec<Complex64>> {
    let mut acc = vec![Complex64::zero(); points.len()];
    for &(k, a) in terms {
        for (s, v) in acc.iter_mut().zip(directional_vt_at(f, k, a, points)?) {
            *s += v;
        }
    }
    Ok(acc)
}

fn laplacian_window(f: &TestFunction, out_window: Option<CosetWindow>) -> Result<CosetWindow> {
    let w = f.window();
    match out_window {
        Some(o) => Ok(o),
        None => {
            let desc = f.descriptor();
            let m = if desc.is_abelian() { 1 } else { desc.max_weight() as i64 };
            w.with_levels(w.l_out(), w.l_out() + w.depth() as i64 * m)
        }
    }
}

/// 𝔏^α = Σ_k ∂_{e_k}^{α/ν_k} on a window.
pub fn vladimirov_laplacian_apply(
    f: &TestFunction,
    alpha: f64,
    out_window: Option<CosetWindow>,
) -> Result<VTResult> {
    check_alpha(alpha)?;
    let out = laplacian_window(f, out_window)?;
    let f = if out.l_out() < f.window().l_out() { f.extend(out.l_out())? } else { f.clone() };
    let values = vladimirov_laplacian_at(&f, alpha, &out.reps()?)?;
    Ok(VTResult { values: TestFunction::new(out, values)?, tail: None })
}

/// 𝔏^α_sub = Σ_j ∂_{X_j}^α + ∂_{Y_j}^α on ℍ_d.
pub fn sub_laplacian_apply(f: &TestFunction, alpha: f64, out_window: Option<CosetWindow>) -> Result<VTResult> {
    check_alpha(alpha)?;
    require_heisenberg(f.descriptor())?;
    let out = laplacian_window(f, out_window)?;
    let f = if out.l_out() < f.window().l_out() { f.extend(out.l_out())? } else { f.clone() };
    let values = sub_laplacian_at(&f, alpha, &out.reps()?)?;
    Ok(VTResult { values: TestFunction::new(out, values)?, tail: None })
}

/// J_α(x, y) = −C_α |y⁻¹x|_G^{−(α+Q)}, the jump kernel of 𝒟^α (graded order).
pub fn jump_kernel(x: &GroupElement, y: &GroupElement, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let d = y.inverse().mul(x)?;
    let Some(n) = d.level() else {
        return Err(Error::domain("jump kernel is singular on the diagonal"));
    };
    let desc = x.descriptor();
    let p = desc.p() as f64;
    let q = desc.homogeneous_dim() as f64;
    Ok(-vt_constant(p, alpha, q) * p.powf(n as f64 * (alpha + q)))
}

/// The jump kernel as the telescoping series
/// Σ_{n≥0} q^{−Q(n+k)} (q^α q^{−α(k+n)} − q^α q^{−α(k+n+1)}) with |y⁻¹x|_G = q^k,
/// truncated after `terms` terms.
pub fn jump_kernel_series(q: f64, big_q: f64, alpha: f64, k: i64, terms: usize) -> f64 {
    (0..terms)
        .map(|n| {
            let e = (n as i64 + k) as f64;
            q.powf(-big_q * e) * (q.powf(alpha) * q.powf(-alpha * e) - q.powf(alpha) * q.powf(-alpha * (e + 1.0)))
        })
        .sum()
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_real(window: CosetWindow, seed: u64) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..window.cell_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TestFunction::from_real(window, &v).unwrap()
    }

    /// Oracle: 𝒟^α f(x) = C ∫ (f(z) − f(x)) |z⁻¹x|^{−(α+Q)} dz by enumerating
    /// z over the window in exact rational arithmetic, plus the tail integral
    /// ∫_{|z⁻¹x| > p^{−L}} … = −f(x)·(outer integral) when x ∈ G_L.
    fn brute_vt(f: &TestFunction, alpha: f64, x: &GroupElement) -> Complex64 {
        let d = f.descriptor();
        let w = f.window();
        let p = d.p() as f64;
        let q = d.homogeneous_dim() as f64;
        let cst = vt_constant(p, alpha, q);
        let m = w.cell_measure().to_f64().unwrap();
        let fx = f.eval(x).unwrap();
        let mut s = Complex64::zero();
        for z in w.reps().unwrap() {
            let diff = z.inverse().mul(x).unwrap();
            match diff.level() {
                Some(l) if l < w.l_in() => {
                    s += (f.eval(&z).unwrap() - fx) * m * p.powf(l as f64 * (alpha + q));
                }
                _ => {}
            }
        }
        let mut outer = 0.0;
        for n in (w.l_out() - 200)..w.l_out() {
            outer += p.powf(n as f64 * alpha) * (1.0 - p.powf(-q));
        }
        cst * (s - fx * outer)
    }

    #[test]
    fn qp2_indicator_example() {
        let d = GroupDescriptor::abelian(2, 1).unwrap();
        let w = CosetWindow::new(d, 0, 0).unwrap();
        let f = TestFunction::indicator_subgroup(w, 0).unwrap();
        let r = vt_apply(&f, 1.0, None).unwrap();
        assert!((r.values.values()[0] - c(2.0 / 3.0)).norm() < 1e-14);
        let x = GroupElement::new(d, vec![BigRational::new(1.into(), 2.into())]).unwrap();
        assert!((r.eval(&x).unwrap() - c(-1.0 / 3.0)).norm() < 1e-14);
        // a larger output window reproduces the tail value cellwise
        let big = vt_apply(&f, 1.0, Some(CosetWindow::new(d, -3, 0).unwrap())).unwrap();
        assert!((big.eval(&x).unwrap() - c(-1.0 / 3.0)).norm() < 1e-14);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let cases = [
            (GroupDescriptor::abelian(2, 1).unwrap(), -2, 2),
            (GroupDescriptor::abelian(3, 2).unwrap(), -1, 1),
            (GroupDescriptor::heisenberg(3, 1).unwrap(), 0, 1),
            (GroupDescriptor::heisenberg(3, 1).unwrap(), -1, 0),
        ];
        for (d, lo, hi) in cases {
            let w = CosetWindow::new(d, lo, hi).unwrap();
            let f = random_real(w, 99);
            for alpha in [0.5, 1.3] {
                let r = vt_apply(&f, alpha, None).unwrap();
                for x in w.reps().unwrap().iter().step_by(7) {
                    let got = r.eval(x).unwrap();
                    let want = brute_vt(&f, alpha, x);
                    assert!((got - want).norm() < 1e-10 * (1.0 + want.norm()), "{d} {x}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn engel_matches_oracle_on_samples() {
        let d = GroupDescriptor::engel(3).unwrap();
        let w = CosetWindow::new(d, 0, 1).unwrap();
        let f = random_real(w, 5);
        let r = vt_apply(&f, 0.9, None).unwrap();
        for x in w.reps().unwrap().iter().step_by(211) {
            let want = brute_vt(&f, 0.9, x);
            let got = r.eval(x).unwrap();
            assert!((got - want).norm() < 1e-10 * (1.0 + want.norm()), "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn homogeneity() {
        for d in [GroupDescriptor::abelian(3, 1).unwrap(), GroupDescriptor::heisenberg(3, 1).unwrap()] {
            let w = CosetWindow::new(d, 0, 1).unwrap();
            let f = random_real(w, 3);
            let alpha = 0.8;
            let p = d.p() as f64;
            let gamma = BigRational::from_integer(3.into());
            let lhs = vt_apply(&f.compose_dilation(&gamma).unwrap(), alpha, None).unwrap();
            let rhs = vt_apply(&f, alpha, None).unwrap();
            for x in lhs.values.window().reps().unwrap() {
                let l = lhs.eval(&x).unwrap();
                let r = rhs.eval(&x.dilate(&gamma).unwrap()).unwrap() * p.powf(-alpha);
                assert!((l - r).norm() < 1e-10 * (1.0 + r.norm()));
            }
        }
    }

    #[test]
    fn compact_examples() {
        let d = GroupDescriptor::abelian(3, 1).unwrap();
        let w = CosetWindow::new(d, 0, 2).unwrap();
        let one = TestFunction::indicator_subgroup(w, 0).unwrap();
        let alpha = 1.0;
        let kappa: f64 = 3.0;
        let c1 = (1.0 - 1.0 / kappa) / (1.0 - kappa.powf(-alpha - 1.0));
        let r = vt_compact_apply(&one, alpha, 0).unwrap();
        assert!(r.max_abs_diff(&one.scale(c(c1))).unwrap() < 1e-14);
        // brute-force coset oracle at level 4 for a mean-zero level-1 function
        let w1 = CosetWindow::new(d, 0, 1).unwrap();
        let f = TestFunction::basis_mean_zero(w1)[0].clone();
        let r = vt_compact_apply(&f, alpha, 0).unwrap();
        let fine = CosetWindow::new(d, 0, 4).unwrap();
        let cst = (1.0 - kappa.powf(alpha)) / (1.0 - kappa.powf(-alpha - 1.0));
        let m = fine.cell_measure().to_f64().unwrap();
        for x in w1.reps().unwrap() {
            let fx = f.eval(&x).unwrap();
            let mut s = Complex64::zero();
            for y in fine.reps().unwrap() {
                if let Some(l) = y.level() {
                    let xy = x.mul(&y.inverse()).unwrap();
                    s += (f.eval(&xy).unwrap() - fx) * m * kappa.powf(l as f64 * (alpha + 1.0));
                }
            }
            let want = fx * c1 + s * cst;
            assert!((r.eval(&x).unwrap() - want).norm() < 1e-12);
        }
        assert!(vt_compact_apply(&one.extend(-1).unwrap().translate(
            &GroupElement::new(d, vec![BigRational::new(1.into(), 3.into())]).unwrap(),
            crate::testfn::Side::Left).unwrap(), alpha, 0).is_err());
    }

    #[test]
    fn scaling_relation_graded_vs_compact() {
        // D^{Qα} f = ϰ^{nα} 𝔻_n^α f on G_n, for every f supported in G_n
        for (d, n) in [(GroupDescriptor::abelian(3, 1).unwrap(), -1), (GroupDescriptor::heisenberg(3, 1).unwrap(), 1)] {
            let w = CosetWindow::new(d, n, n + 1).unwrap();
            let f = random_real(w, 8);
            let alpha_v = 0.6;
            let q = d.homogeneous_dim() as f64;
            let graded = vt_apply(&f, q * alpha_v, None).unwrap().values;
            let compact = vt_compact_apply(&f, alpha_v, n).unwrap();
            let s = d.kappa().powf(n as f64 * alpha_v);
            assert!(graded.max_abs_diff(&compact.scale(c(s))).unwrap() < 1e-10);
        }
    }

    #[test]
    fn split_decomposition() {
        let d = GroupDescriptor::abelian(3, 1).unwrap();
        let w = CosetWindow::new(d, 0, 0).unwrap();
        let f = TestFunction::indicator_subgroup(w, 0).unwrap();
        let alpha = 0.7;
        let s = vt_split_decompose(&f, alpha, 0).unwrap();
        assert!((s.tail_coeff - vt_constant(3.0, alpha, 1.0)).abs() < 1e-15);
        let big = CosetWindow::new(d, -4, 2).unwrap();
        let g = random_real(CosetWindow::new(d, 0, 2).unwrap(), 1);
        for f in [f, g.clone(), g.project_mean_zero()] {
            let direct = vt_apply(&f, alpha, Some(big)).unwrap();
            for l in [0, -1, -2] {
                let s = vt_split_decompose(&f, alpha, l).unwrap();
                for x in big.reps().unwrap() {
                    let a = direct.eval(&x).unwrap();
                    let b = s.eval(&x).unwrap();
                    assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()), "l={l} x={x}: {a} {b}");
                }
            }
        }
        assert!(vt_split_decompose(&g, alpha, 1).is_err());
    }

    #[test]
    fn directional_abelian_matches_vt() {
        let d = GroupDescriptor::abelian(3, 1).unwrap();
        let w = CosetWindow::new(d, -1, 1).unwrap();
        let f = random_real(w, 12);
        let a = directional_vt_apply(&f, 0, 0.9, None).unwrap().values;
        let b = vt_apply(&f, 0.9, None).unwrap().values;
        assert!(a.max_abs_diff(&b).unwrap() < 1e-11);
    }

    #[test]
    fn central_direction_reduces_to_qp() {
        // f = g(z) on ℍ_1 with x, y ∈ ℤ_3: ∂_Z^α f = (∂^α g)(z) on ℚ_3
        let h = GroupDescriptor::heisenberg(3, 1).unwrap();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let a = GroupDescriptor::abelian(3, 1).unwrap();
        let wz = CosetWindow::new(a, 0, 2).unwrap();
        let g = random_real(wz, 4);
        let f = TestFunction::from_fn(w, |x| g.eval(&GroupElement::new(a, vec![x.coords()[2].clone()]).unwrap()).unwrap()).unwrap();
        let alpha = 0.75;
        let dz = directional_vt_apply(&f, 2, alpha, None).unwrap();
        let dg = vt_apply(&g, alpha, None).unwrap();
        for x in dz.values.window().reps().unwrap() {
            let want = dg.eval(&GroupElement::new(a, vec![x.coords()[2].clone()]).unwrap()).unwrap();
            assert!((dz.values.eval(&x).unwrap() - want).norm() < 1e-11);
        }
    }

    #[test]
    fn laplacian_symmetric_and_abelian_sum() {
        let d = GroupDescriptor::abelian(3, 2).unwrap();
        let w = CosetWindow::new(d, 0, 1).unwrap();
        let f = random_real(w, 1);
        let lap = vladimirov_laplacian_apply(&f, 1.1, None).unwrap().values;
        let sum = directional_vt_apply(&f, 0, 1.1, None).unwrap().values.add(
            &directional_vt_apply(&f, 1, 1.1, None).unwrap().values).unwrap();
        assert!(lap.max_abs_diff(&sum).unwrap() < 1e-12);
        let h = GroupDescriptor::heisenberg(3, 1).unwrap();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let (f, g) = (random_real(w, 2), random_real(w, 3));
        for sub in [false, true] {
            let apply = |u: &TestFunction| if sub { sub_laplacian_apply(u, 1.0, None) } else { vladimirov_laplacian_apply(u, 1.0, None) };
            let lf = apply(&f).unwrap().values;
            let lg = apply(&g).unwrap().values;
            let a = lf.inner(&g).unwrap();
            let b = f.inner(&lg).unwrap();
            assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()), "{a} {b}");
        }
        assert!(sub_laplacian_apply(&random_real(CosetWindow::new(d, 0, 1).unwrap(), 1), 1.0, None).is_err());
    }

    #[test]
    fn jump_kernel_examples() {
        let d = GroupDescriptor::abelian(2, 1).unwrap();
        let x = GroupElement::from_ints(d, &[1]).unwrap();
        let e = GroupElement::identity(d);
        let j = jump_kernel(&x, &e, 1.0).unwrap();
        assert!((j - 4.0 / 3.0).abs() < 1e-14);
        assert!((jump_kernel_series(2.0, 1.0, 1.0, 0, 200) - 4.0 / 3.0).abs() < 1e-12);
        assert!(jump_kernel(&x, &x, 1.0).is_err());
        let h = GroupDescriptor::heisenberg(3, 1).unwrap();
        let x = GroupElement::from_ints(h, &[1, 2, 5]).unwrap();
        let y = GroupElement::from_ints(h, &[0, 1, 1]).unwrap();
        let g = BigRational::from_integer(3.into());
        let a = jump_kernel(&x.dilate(&g).unwrap(), &y.dilate(&g).unwrap(), 0.5).unwrap();
        let b = jump_kernel(&x, &y, 0.5).unwrap();
        assert!((a - 3f64.powf(4.5) * b).abs() < 1e-12 * a.abs());
        assert!(b > 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn compact_quadratic_form_nonnegative(seed in 0u64..10_000, alpha in 0.1f64..3.0, p in prop::sample::select(vec![2u64, 3, 5])) {
                let d = GroupDescriptor::abelian(p, 1).unwrap();
                let w = CosetWindow::new(d, 0, 2).unwrap();
                let f = random_real(w, seed);
                let form = vt_compact_apply(&f, alpha, 0).unwrap().inner(&f).unwrap();
                prop_assert!(form.re >= -1e-12);
            }

            #[test]
            fn jump_series_matches_closed_form(alpha in 0.2f64..3.0, k in -3i64..4, p in prop::sample::select(vec![2u64, 3, 5])) {
                let q = p as f64;
                let closed = -vt_constant(q, alpha, 1.0) * q.powf(-(alpha + 1.0) * k as f64);
                let series = jump_kernel_series(q, 1.0, alpha, k, 400);
                prop_assert!((closed - series).abs() <= 1e-12 * closed.abs());
            }
        }
    }
}
