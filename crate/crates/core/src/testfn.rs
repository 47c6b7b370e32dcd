//! Compactly supported locally constant functions on a coset window.
//!
//! A [`TestFunction`] vanishes off G_{L_out} and is right-G_{L_in}-invariant
//! (constant on the left cosets xG_{L_in}); it stores one complex value per
//! cell in the order of [`crate::cells::CellGroup`]. Binary operations first
//! co-refine both operands onto the common window (min L_out, max L_in).

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::io::{Read, Write};

use crate::cells::WindowCells;
use crate::error::{Error, Result};
use crate::group::{CosetWindow, GroupDescriptor, GroupElement};
use crate::padic::{format_rational, p_pow, parse_rational};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    window: CosetWindow,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl TestFunction {
    pub fn new(window: CosetWindow, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != window.cell_count() {
            return Err(Error::DimensionMismatch { expected: window.cell_count(), got: values.len() });
        }
        Ok(TestFunction { window, values })
    }

    pub fn zeros(window: CosetWindow) -> Self {
        TestFunction { window, values: vec![Complex64::zero(); window.cell_count()] }
    }

    pub fn from_real(window: CosetWindow, values: &[f64]) -> Result<Self> {
        Self::new(window, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Sample `f` at the canonical representative of every cell.
    pub fn from_fn<F>(window: CosetWindow, f: F) -> Result<Self>
    where
        F: Fn(&GroupElement) -> Complex64 + Sync + Send,
    {
        let wc = WindowCells::new(window)?;
        let values = par::map_indices(window.cell_count(), |i| f(&wc.rep(i)));
        Ok(TestFunction { window, values })
    }

    /// 𝟙_{G_m} on `window`, L_out ≤ m ≤ L_in.
    pub fn indicator_subgroup(window: CosetWindow, m: i64) -> Result<Self> {
        if m < window.l_out() || m > window.l_in() {
            return Err(Error::window(format!("level {m} outside {window}")));
        }
        Self::from_fn(window, |x| {
            let inside = x.level().is_none_or(|l| l >= m);
            Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// 𝟙 of the single cell `idx`.
    pub fn indicator_cell(window: CosetWindow, idx: usize) -> Result<Self> {
        let mut f = Self::zeros(window);
        *f.values.get_mut(idx).ok_or_else(|| Error::window("cell index out of range"))? =
            Complex64::new(1.0, 0.0);
        Ok(f)
    }

    /// p^{Q L_in}·𝟙_{G_{L_in}}, the δ-approximant of unit mass.
    pub fn delta_approximant(window: CosetWindow) -> Self {
        let mut f = Self::zeros(window);
        f.values[0] = Complex64::new(1.0 / window.cell_measure().to_f64().unwrap_or(f64::NAN), 0.0);
        f
    }

    pub fn window(&self) -> CosetWindow {
        self.window
    }
    pub fn descriptor(&self) -> GroupDescriptor {
        self.window.descriptor()
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn cells(&self) -> Result<WindowCells> {
        WindowCells::new(self.window)
    }

    pub fn cell_measure_f64(&self) -> f64 {
        self.window.cell_measure().to_f64().unwrap_or(f64::NAN)
    }

    /// f(g); zero off the window.
    pub fn eval(&self, g: &GroupElement) -> Result<Complex64> {
        Ok(self.cells()?.locate(g)?.map_or(Complex64::zero(), |i| self.values[i]))
    }

    /// ∫ f = (Σ values)·|G_{L_in}|, the exact Haar weight applied last.
    pub fn integrate(&self) -> Complex64 {
        let s: Complex64 = self.values.iter().sum();
        s * self.cell_measure_f64()
    }

    /// Re-express f on `target`, which must be at least as fine; points of
    /// the support outside `target` are an error, target cells outside the
    /// support get zero.
    pub fn resample(&self, target: CosetWindow) -> Result<Self> {
        if target.descriptor() != self.descriptor() {
            return Err(Error::domain("descriptor mismatch"));
        }
        if target == self.window {
            return Ok(self.clone());
        }
        if target.l_in() < self.window.l_in() {
            return self.coarsen(target);
        }
        if target.l_out() > self.window.l_out() {
            let src = self.cells()?;
            let dst = WindowCells::new(target)?;
            let lost = (0..self.values.len())
                .any(|i| self.values[i] != Complex64::zero() && dst.transfer_from(&src, i).is_none());
            if lost {
                return Err(Error::window(format!("support of f is not inside {target}")));
            }
        }
        let src = self.cells()?;
        let dst = WindowCells::new(target)?;
        let values = par::map_indices(target.cell_count(), |i| {
            src.transfer_from(&dst, i).map_or(Complex64::zero(), |j| self.values[j])
        });
        Ok(TestFunction { window: target, values })
    }

    pub fn refine(&self, l_in: i64) -> Result<Self> {
        self.resample(self.window.with_levels(self.window.l_out(), l_in)?)
    }

    pub fn extend(&self, l_out: i64) -> Result<Self> {
        self.resample(self.window.with_levels(l_out, self.window.l_in())?)
    }

    /// Inverse of `refine`: requires f to be constant on the coarser cells.
    pub fn coarsen(&self, target: CosetWindow) -> Result<Self> {
        let fine = self.window.with_levels(target.l_out(), self.window.l_in())?;
        let f = self.resample(fine)?;
        let src = WindowCells::new(fine)?;
        let dst = WindowCells::new(target)?;
        let mut values: Vec<Option<Complex64>> = vec![None; target.cell_count()];
        for (i, v) in f.values.iter().enumerate() {
            let j = dst
                .transfer_from(&src, i)
                .ok_or_else(|| Error::window("coarsening target does not cover the support"))?;
            match values[j] {
                None => values[j] = Some(*v),
                Some(w) if (w - v).norm() <= 1e-12 * (1.0 + w.norm()) => {}
                Some(_) => {
                    return Err(Error::window(format!("f is not constant on the cells of {target}")))
                }
            }
        }
        Ok(TestFunction {
            window: target,
            values: values.into_iter().map(|v| v.unwrap_or_default()).collect(),
        })
    }

    fn common_window(&self, other: &Self) -> Result<CosetWindow> {
        if self.descriptor() != other.descriptor() {
            return Err(Error::domain("descriptor mismatch"));
        }
        CosetWindow::new(
            self.descriptor(),
            self.window.l_out().min(other.window.l_out()),
            self.window.l_in().max(other.window.l_in()),
        )
    }

    /// Both operands on their common window.
    pub fn co_refine(&self, other: &Self) -> Result<(Self, Self)> {
        let w = self.common_window(other)?;
        Ok((self.resample(w)?, other.resample(w)?))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        TestFunction { window: self.window, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.co_refine(other)?;
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
        Ok(TestFunction { window: a.window, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// sup |f − g| over the common window.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let (a, b) = self.co_refine(other)?;
        Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ⟨f, g⟩ = ∫ f ḡ.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        let (a, b) = self.co_refine(other)?;
        let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y.conj()).sum();
        Ok(s * a.cell_measure_f64())
    }

    /// Left: x ↦ f(y⁻¹x). Right: x ↦ f(xy). The window grows to contain y;
    /// right translation on a non-abelian group refines the constancy index
    /// to ν_max·depth so that the output is still right-invariant.
    pub fn translate(&self, y: &GroupElement, side: Side) -> Result<Self> {
        let desc = self.descriptor();
        if y.descriptor() != desc {
            return Err(Error::domain("descriptor mismatch"));
        }
        let l_out = y.level().map_or(self.window.l_out(), |l| l.min(self.window.l_out()));
        let depth = self.window.l_in() - l_out;
        let l_in = match side {
            Side::Left => self.window.l_in(),
            Side::Right => l_out + depth * desc.max_weight() as i64,
        };
        let target = CosetWindow::new(desc, l_out, l_in)?;
        let src = self.cells()?;
        let y_inv = y.inverse();
        Self::from_fn(target, |x| {
            let pt = match side {
                Side::Left => y_inv.mul(x),
                Side::Right => x.mul(y),
            }
            .expect("same group");
            src.locate(&pt).ok().flatten().map_or(Complex64::zero(), |i| self.values[i])
        })
    }

    /// ι∘f: x ↦ f(x⁻¹), on a window refined to ν_max·depth when non-abelian.
    pub fn reflect(&self) -> Result<Self> {
        let desc = self.descriptor();
        let depth = self.window.depth() as i64 * desc.max_weight() as i64;
        let target = CosetWindow::new(desc, self.window.l_out(), self.window.l_out() + depth)?;
        let src = self.cells()?;
        Self::from_fn(target, |x| {
            src.locate(&x.inverse()).ok().flatten().map_or(Complex64::zero(), |i| self.values[i])
        })
    }

    /// f∘D_γ: x ↦ f(D_γ x). Exact; for γ = p^e it only relabels the window.
    pub fn compose_dilation(&self, gamma: &BigRational) -> Result<Self> {
        let desc = self.descriptor();
        let e = crate::padic::vp(gamma, desc.p()).ok_or_else(|| Error::domain("γ = 0"))?;
        let target = CosetWindow::new(desc, self.window.l_out() - e, self.window.l_in() - e)?;
        if *gamma == p_pow(desc.p(), e) {
            return Ok(TestFunction { window: target, values: self.values.clone() });
        }
        let src = self.cells()?;
        Self::from_fn(target, |x| {
            let pt = x.dilate(gamma).expect("γ ≠ 0");
            src.locate(&pt).ok().flatten().map_or(Complex64::zero(), |i| self.values[i])
        })
    }

    /// f − (∫f)·𝟙_{G_{L_out}}/|G_{L_out}|.
    pub fn project_mean_zero(&self) -> Self {
        let mean: Complex64 = self.values.iter().sum::<Complex64>() / self.values.len() as f64;
        TestFunction { window: self.window, values: self.values.iter().map(|v| v - mean).collect() }
    }

    /// 𝟙_{c} − 𝟙_{c_0} for every cell c ≠ c_0 (c_0 the identity cell): a basis
    /// of the mean-zero functions on the window.
    pub fn basis_mean_zero(window: CosetWindow) -> Vec<TestFunction> {
        (1..window.cell_count())
            .map(|c| {
                let mut f = Self::zeros(window);
                f.values[0] = Complex64::new(-1.0, 0.0);
                f.values[c] = Complex64::new(1.0, 0.0);
                f
            })
            .collect()
    }

    /// Write as CSV: a `group,p,L_out,L_in` header and its row, then one row
    /// `coords…,re,im` per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let d = self.descriptor();
        w.write_record(["group", "p", "L_out", "L_in"])?;
        w.write_record([
            d.tag(),
            d.p().to_string(),
            self.window.l_out().to_string(),
            self.window.l_in().to_string(),
        ])?;
        let wc = self.cells()?;
        for (i, v) in self.values.iter().enumerate() {
            let mut rec: Vec<String> = wc.rep(i).coords().iter().map(format_rational).collect();
            rec.push(format!("{:.16e}", v.re));
            rec.push(format!("{:.16e}", v.im));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(input);
        let mut records = r.records();
        let mut next = || -> Result<csv::StringRecord> {
            records.next().ok_or_else(|| Error::Parse("truncated CSV".into()))?.map_err(Error::from)
        };
        let header = next()?;
        if header.iter().collect::<Vec<_>>() != ["group", "p", "L_out", "L_in"] {
            return Err(Error::Parse("bad CSV header".into()));
        }
        let meta = next()?;
        let field = |i: usize| meta.get(i).ok_or_else(|| Error::Parse("short meta row".into()));
        let int = |s: &str| s.parse::<i64>().map_err(|_| Error::Parse(format!("bad integer {s:?}")));
        let p = int(field(1)?)? as u64;
        let desc = GroupDescriptor::from_tag(field(0)?, p)?;
        let window = CosetWindow::new(desc, int(field(2)?)?, int(field(3)?)?)?;
        let wc = WindowCells::new(window)?;
        let mut values = vec![None; window.cell_count()];
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != desc.dim() + 2 {
                return Err(Error::Parse("bad row length".into()));
            }
            let coords = (0..desc.dim()).map(|k| parse_rational(&rec[k])).collect::<Result<_>>()?;
            let g = GroupElement::new(desc, coords)?;
            let idx = wc.locate(&g)?.ok_or_else(|| Error::Parse(format!("{g} outside window")))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad float {s:?}")));
            values[idx] = Some(Complex64::new(num(&rec[desc.dim()])?, num(&rec[desc.dim() + 1])?));
        }
        let values = values
            .into_iter()
            .map(|v| v.ok_or_else(|| Error::Parse("missing cell".into())))
            .collect::<Result<_>>()?;
        Ok(TestFunction { window, values })
    }
}

/// Residues of G_D/G_{D+r} in the normalized frame modulo p^{ν_max D}: the
/// finite set over which an average over G_D of a function of k·w is exact.
fn subgroup_residues(wc: &WindowCells) -> Vec<Vec<u64>> {
    let cg = wc.cells();
    let desc = cg.descriptor();
    let p = desc.p();
    let depth = cg.depth();
    let vmax = desc.max_weight();
    let weights = desc.weights();
    let radix: Vec<u64> = weights.iter().map(|&w| p.pow((vmax - w) * depth)).collect();
    let total: u64 = radix.iter().product();
    (0..total)
        .map(|mut i| {
            weights
                .iter()
                .zip(&radix)
                .map(|(&w, &r)| {
                    let m = i % r;
                    i /= r;
                    m * p.pow(w * depth)
                })
                .collect()
        })
        .collect()
}

/// (f*g)(x) = ∫ f(y) g(y⁻¹x) dy, exact on the common window.
///
/// Over a cell cG_n the integrand is g(k c⁻¹x) averaged over k ∈ G_n; that
/// average is a finite one over the residues of G_n because G_n is not normal.
pub fn convolve(f: &TestFunction, g: &TestFunction) -> Result<TestFunction> {
    let (f, g) = f.co_refine(g)?;
    let wc = f.cells()?;
    let cg = wc.cells();
    let n = cg.count();
    let ks = subgroup_residues(&wc);
    let weight = f.cell_measure_f64() / ks.len() as f64;
    let reps: Vec<Vec<u64>> = (0..n).map(|i| cg.decode(i)).collect();
    let inv_reps: Vec<Vec<u64>> = reps.iter().map(|r| cg.inv(r)).collect();
    let support: Vec<usize> = (0..n).filter(|&c| f.values[c] != Complex64::zero()).collect();
    let values = par::map_indices(n, |x| {
        let mut acc = Complex64::zero();
        for &c in &support {
            let w = cg.mul(&inv_reps[c], &reps[x]);
            let inner: Complex64 = ks.iter().map(|k| g.values[cg.canonical_index(&cg.mul(k, &w))]).sum();
            acc += f.values[c] * inner;
        }
        acc * weight
    });
    TestFunction::new(f.window, values)
}

pub fn integrate(f: &TestFunction) -> Complex64 {
    f.integrate()
}

pub fn translate(f: &TestFunction, y: &GroupElement, side: Side) -> Result<TestFunction> {
    f.translate(y, side)
}

pub fn reflect(f: &TestFunction) -> Result<TestFunction> {
    f.reflect()
}

pub fn project_mean_zero(f: &TestFunction) -> TestFunction {
    f.project_mean_zero()
}

pub fn basis_mean_zero(window: CosetWindow) -> Vec<TestFunction> {
    TestFunction::basis_mean_zero(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_fn(window: CosetWindow, seed: u64) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..window.cell_count())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        TestFunction::new(window, values).unwrap()
    }

    fn h1() -> GroupDescriptor {
        GroupDescriptor::heisenberg(3, 1).unwrap()
    }

    /// Oracle: (f*g)(x) by brute force over a grid fine enough that y ↦ g(y⁻¹x)
    /// is constant on its cells, in exact rational arithmetic.
    fn brute_convolve(f: &TestFunction, g: &TestFunction, x: &GroupElement) -> Complex64 {
        let d = f.descriptor();
        let w = f.window();
        let fine = CosetWindow::new(d, w.l_out(), w.l_out() + w.depth() as i64 * d.max_weight() as i64).unwrap();
        let m = fine.cell_measure().to_f64().unwrap();
        fine.reps()
            .unwrap()
            .iter()
            .map(|y| f.eval(y).unwrap() * g.eval(&y.inverse().mul(x).unwrap()).unwrap() * m)
            .sum()
    }

    #[test]
    fn integrals() {
        let h = h1();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        assert!((TestFunction::indicator_subgroup(w, 0).unwrap().integrate() - c(1.0)).norm() < 1e-15);
        let i1 = TestFunction::indicator_subgroup(w, 1).unwrap().integrate();
        assert!((i1 - c(1.0 / 81.0)).norm() < 1e-16);
        let f = random_fn(w, 1).project_mean_zero();
        assert!(f.integrate().norm() < 1e-15);
    }

    #[test]
    fn refine_coarsen_roundtrip() {
        for d in [GroupDescriptor::abelian(2, 2).unwrap(), h1(), GroupDescriptor::engel(3).unwrap()] {
            let w = CosetWindow::new(d, -1, 0).unwrap();
            let f = random_fn(w, 7);
            let finer = if d.homogeneous_dim() > 4 { 0 } else { 1 };
            let g = f.refine(finer).unwrap().extend(-2).unwrap();
            assert!((g.integrate() - f.integrate()).norm() < 1e-12);
            let back = g.resample(w).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn coarsen_rejects_nonconstant() {
        let w = CosetWindow::new(h1(), 0, 2).unwrap();
        let f = random_fn(w, 3);
        assert!(f.resample(CosetWindow::new(h1(), 0, 1).unwrap()).is_err());
    }

    #[test]
    fn translations() {
        let h = h1();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let f = random_fn(w, 11);
        let e = GroupElement::identity(h);
        assert_eq!(f.translate(&e, Side::Left).unwrap(), f);
        let y = GroupElement::from_ints(h, &[1, 2, 1]).unwrap();
        for side in [Side::Left, Side::Right] {
            let t = f.translate(&y, side).unwrap();
            assert!((t.integrate() - f.integrate()).norm() < 1e-12);
        }
        // far translate grows the window
        let far = GroupElement::new(h, vec![BigRational::new(1.into(), 3.into()), BigRational::zero(), BigRational::zero()]).unwrap();
        let t = f.translate(&far, Side::Left).unwrap();
        assert_eq!(t.window().l_out(), -1);
        assert!((t.integrate() - f.integrate()).norm() < 1e-12);
        // oracle pointwise
        let yinv = far.inverse();
        for x in t.window().reps().unwrap().iter().step_by(37) {
            assert_eq!(t.eval(x).unwrap(), f.eval(&yinv.mul(x).unwrap()).unwrap());
        }
    }

    #[test]
    fn reflections() {
        let a = GroupDescriptor::abelian(3, 1).unwrap();
        let w = CosetWindow::new(a, 0, 2).unwrap();
        let f = random_fn(w, 5);
        let r = f.reflect().unwrap();
        for x in w.reps().unwrap() {
            let neg = GroupElement::new(a, vec![-x.coords()[0].clone()]).unwrap();
            assert_eq!(r.eval(&x).unwrap(), f.eval(&neg).unwrap());
        }
        let h = h1();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let f = random_fn(w, 9);
        // ι∘ι = id; the doubly refined result coarsens back exactly
        let r = f.reflect().unwrap();
        let rr = TestFunction::from_fn(w, |x| r.eval(&x.inverse()).unwrap()).unwrap();
        assert_eq!(rr, f);
        // indicator of aG_1 reflects to the indicator of G_1 a⁻¹
        let idx = 40;
        let ind = TestFunction::indicator_cell(w, idx).unwrap();
        let r = ind.reflect().unwrap();
        let a_rep = w.reps().unwrap()[idx].clone();
        let a_inv = a_rep.inverse();
        for x in r.window().reps().unwrap().iter().step_by(13) {
            // x ∈ G_1 a⁻¹ ⇔ x a ∈ G_1
            let inside = x.mul(&a_rep).unwrap().level().is_none_or(|l| l >= 1);
            assert_eq!(r.eval(x).unwrap(), c(if inside { 1.0 } else { 0.0 }), "{x} {a_inv}");
        }
    }

    #[test]
    fn convolution_examples() {
        let h = h1();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let f = random_fn(w, 21);
        let delta = TestFunction::delta_approximant(w);
        assert!(convolve(&f, &delta).unwrap().max_abs_diff(&f).unwrap() < 1e-12);
        // non-commutativity witness
        let reps = w.reps().unwrap();
        let wc = f.cells().unwrap();
        let ia = wc.locate(&GroupElement::from_ints(h, &[1, 0, 0]).unwrap()).unwrap().unwrap();
        let ib = wc.locate(&GroupElement::from_ints(h, &[0, 1, 0]).unwrap()).unwrap().unwrap();
        let fa = TestFunction::indicator_cell(w, ia).unwrap();
        let fb = TestFunction::indicator_cell(w, ib).unwrap();
        let ab = convolve(&fa, &fb).unwrap();
        let ba = convolve(&fb, &fa).unwrap();
        assert!(ab.max_abs_diff(&ba).unwrap() > 1e-3);
        for x in reps.iter().step_by(5) {
            assert!((ab.eval(x).unwrap() - brute_convolve(&fa, &fb, x)).norm() < 1e-12);
        }
        let a = GroupDescriptor::abelian(3, 1).unwrap();
        let w = CosetWindow::new(a, -1, 1).unwrap();
        let (f, g) = (random_fn(w, 1), random_fn(w, 2));
        assert!(convolve(&f, &g).unwrap().max_abs_diff(&convolve(&g, &f).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn convolution_matches_oracle_and_invariants() {
        for d in [h1(), GroupDescriptor::abelian(2, 2).unwrap()] {
            let w = CosetWindow::new(d, 0, 1).unwrap();
            let (f, g, k) = (random_fn(w, 31), random_fn(w, 32), random_fn(w, 33));
            let fg = convolve(&f, &g).unwrap();
            for x in w.reps().unwrap().iter().step_by(7) {
                assert!((fg.eval(x).unwrap() - brute_convolve(&f, &g, x)).norm() < 1e-12);
            }
            assert!((fg.integrate() - f.integrate() * g.integrate()).norm() < 1e-12);
            let lhs = convolve(&fg, &k).unwrap();
            let rhs = convolve(&f, &convolve(&g, &k).unwrap()).unwrap();
            assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        }
    }

    #[test]
    fn mean_zero() {
        let a = GroupDescriptor::abelian(3, 1).unwrap();
        let w = CosetWindow::new(a, 0, 1).unwrap();
        let basis = basis_mean_zero(w);
        assert_eq!(basis.len(), 2);
        assert!(basis.iter().all(|b| b.integrate().norm() == 0.0));
        let one = TestFunction::indicator_subgroup(w, 0).unwrap();
        assert_eq!(one.project_mean_zero().sup_norm(), 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        for d in [h1(), GroupDescriptor::abelian(2, 1).unwrap()] {
            let w = CosetWindow::new(d, -1, 0).unwrap();
            let f = random_fn(w, 77);
            let mut buf = Vec::new();
            f.write_csv(&mut buf).unwrap();
            let g = TestFunction::read_csv(buf.as_slice()).unwrap();
            assert_eq!(f, g);
        }
        assert!(TestFunction::read_csv("nope\n".as_bytes()).is_err());
    }

    #[test]
    fn dilation_composition() {
        let h = h1();
        let w = CosetWindow::new(h, 0, 1).unwrap();
        let f = random_fn(w, 4);
        for gamma in [BigRational::from_integer(3.into()), BigRational::from_integer(2.into())] {
            let g = f.compose_dilation(&gamma).unwrap();
            for x in g.window().reps().unwrap().iter().step_by(11) {
                assert_eq!(g.eval(x).unwrap(), f.eval(&x.dilate(&gamma).unwrap()).unwrap());
            }
        }
    }
}
