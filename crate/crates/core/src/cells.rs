//! Integer model of the finite coset space G_0 / G_n.
//!
//! A window G_{L_out}/G_{L_in} is the dilate D_{p^{L_out}} of G_0/G_n with
//! n = L_in − L_out, so all cell arithmetic happens on residues mod p^{ν n}
//! in this normalized frame. Cells are left cosets aG_n; the canonical
//! representative has coordinate k reduced into [0, p^{ν_k n}).

use num_rational::BigRational;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::group::{self, CoordRing, CosetWindow, GroupDescriptor, GroupElement, GroupKind, ModRing};
use crate::padic::{p_pow, residue_u64};
use crate::par;

fn pow_mod(b: u64, e: u64, m: u64) -> u64 {
    let r = ModRing::new(m);
    (0..e).fold(1 % m, |acc, _| r.mul(&acc, &(b % m)))
}

#[derive(Debug, Clone)]
pub struct CellGroup {
    desc: GroupDescriptor,
    depth: u32,
    weights: Vec<u32>,
    /// p^{ν_k n}
    moduli: Vec<u64>,
    ring: ModRing,
    /// p^{ν_max n}
    big_exp: u32,
    strides: Vec<usize>,
    count: usize,
}

impl CellGroup {
    pub fn new(desc: GroupDescriptor, depth: u32) -> Result<Self> {
        let p = desc.p();
        let weights = desc.weights();
        let big_exp = desc.max_weight() * depth;
        if big_exp as f64 * (p as f64).log2() > 62.0 {
            return Err(Error::Precision("window too deep for 64-bit residues".into()));
        }
        let moduli: Vec<u64> = weights.iter().map(|&w| p.pow(w * depth)).collect();
        let mut strides = Vec::with_capacity(moduli.len());
        let mut count = 1usize;
        for &m in &moduli {
            strides.push(count);
            count = count
                .checked_mul(m as usize)
                .filter(|&c| c <= 1 << 26)
                .ok_or_else(|| Error::window("too many cells"))?;
        }
        Ok(CellGroup {
            desc,
            depth,
            weights,
            moduli,
            ring: ModRing::new(p.pow(big_exp).max(1)),
            big_exp,
            strides,
            count,
        })
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.desc
    }
    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn ring(&self) -> &ModRing {
        &self.ring
    }

    /// Canonical residues of cell `idx`.
    pub fn decode(&self, mut idx: usize) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|&m| {
                let r = idx as u64 % m;
                idx /= m as usize;
                r
            })
            .collect()
    }

    fn encode_canonical(&self, r: &[u64]) -> usize {
        r.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }

    /// Index of the left coset g·G_n, g given by residues mod p^{ν_max n}.
    pub fn canonical_index(&self, g: &[u64]) -> usize {
        let r = &self.ring;
        let m = &self.moduli;
        match self.desc.kind() {
            GroupKind::Abelian { .. } => {
                let c: Vec<u64> = g.iter().zip(m).map(|(v, mk)| v % mk).collect();
                self.encode_canonical(&c)
            }
            GroupKind::Heisenberg { d } => {
                let mut c = vec![0u64; 2 * d + 1];
                let mut sym = 0u64;
                let mut delta = vec![0u64; 2 * d];
                for j in 0..2 * d {
                    c[j] = g[j] % m[j];
                    delta[j] = r.sub(&g[j], &c[j]);
                }
                // z_a = z_g − ½(x_a·δy − y_a·δx)
                for j in 0..d {
                    sym = r.add(&sym, &r.mul(&c[j], &delta[d + j]));
                    sym = r.sub(&sym, &r.mul(&c[d + j], &delta[j]));
                }
                c[2 * d] = r.sub(&g[2 * d], &r.half(&sym)) % m[2 * d];
                self.encode_canonical(&c)
            }
            GroupKind::Engel => {
                let xa = g[0] % m[0];
                let y1a = g[1] % m[1];
                let k1 = r.sub(&g[1], &y1a);
                let t2 = r.add(&g[2], &r.mul(&xa, &k1));
                let y2a = t2 % m[2];
                let k2 = r.sub(&t2, &y2a);
                let t3 = r.sub(&r.add(&g[3], &r.mul(&xa, &k2)), &r.half(&r.mul(&r.mul(&xa, &xa), &k1)));
                let y3a = t3 % m[3];
                self.encode_canonical(&[xa, y1a, y2a, y3a])
            }
        }
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        group::law(self.desc.kind(), &self.ring, a, b)
    }

    pub fn inv(&self, a: &[u64]) -> Vec<u64> {
        group::inverse(self.desc.kind(), &self.ring, a)
    }

    /// Level of an element of G_0 given mod p^{ν_max n}, capped at n.
    pub fn level(&self, g: &[u64]) -> u32 {
        let p = self.desc.p();
        let mut lvl = self.depth;
        for (&v, &w) in g.iter().zip(&self.weights) {
            if v == 0 {
                continue;
            }
            let mut val = 0u32;
            let mut x = v;
            while x % p == 0 && val < self.big_exp {
                x /= p;
                val += 1;
            }
            lvl = lvl.min(val / w);
            if lvl == 0 {
                return 0;
            }
        }
        lvl
    }

    /// Residues of a normalized element (coordinates in ℤ_p).
    pub fn residues_of(&self, coords: &[BigRational]) -> Result<Vec<u64>> {
        coords.iter().map(|c| residue_u64(c, self.desc.p(), self.big_exp)).collect()
    }

    /// L[x·count + c] = level(x⁻¹c) ∈ [0, n].
    pub fn level_table(&self) -> Arc<Vec<u8>> {
        type Tables = HashMap<(GroupDescriptor, u32), Arc<Vec<u8>>>;
        static CACHE: OnceLock<Mutex<Tables>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = (self.desc, self.depth);
        if let Some(t) = cache.lock().expect("cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let table = Arc::new(self.build_level_table());
        cache.lock().expect("cache poisoned").insert(key, Arc::clone(&table));
        table
    }

    fn build_level_table(&self) -> Vec<u8> {
        let n = self.count;
        let reps: Vec<Vec<u64>> = (0..n).map(|i| self.decode(i)).collect();
        let mut table = vec![0u8; n * n];
        par::fill_rows(&mut table, n, |x, row| {
            let xi = self.inv(&reps[x]);
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = self.level(&self.mul(&xi, &reps[c])) as u8;
            }
        });
        table
    }
}

/// Cell-level view of a window: the normalized [`CellGroup`] plus the scaling.
#[derive(Debug, Clone)]
pub struct WindowCells {
    window: CosetWindow,
    cells: CellGroup,
}

impl WindowCells {
    pub fn new(window: CosetWindow) -> Result<Self> {
        Ok(WindowCells { window, cells: CellGroup::new(window.descriptor(), window.depth())? })
    }

    pub fn window(&self) -> CosetWindow {
        self.window
    }
    pub fn cells(&self) -> &CellGroup {
        &self.cells
    }

    /// D_{p^{−L_out}} g, whose coordinates lie in ℤ_p when g ∈ G_{L_out}.
    pub fn normalize(&self, g: &GroupElement) -> Result<GroupElement> {
        g.dilate(&p_pow(self.window.descriptor().p(), -self.window.l_out()))
    }

    /// Cell index of g, or `None` when g ∉ G_{L_out}.
    pub fn locate(&self, g: &GroupElement) -> Result<Option<usize>> {
        if g.descriptor() != self.window.descriptor() {
            return Err(Error::domain("element of another group"));
        }
        if !self.window.contains(g) {
            return Ok(None);
        }
        let r = self.cells.residues_of(self.normalize(g)?.coords())?;
        Ok(Some(self.cells.canonical_index(&r)))
    }

    /// Index in `self` of the canonical representative of cell `idx` of
    /// `other` (same group), or `None` when that point lies outside `self`.
    /// Exact: the representative is moved between normalized frames in integers.
    pub fn transfer_from(&self, other: &WindowCells, idx: usize) -> Option<usize> {
        let p = self.window.descriptor().p();
        let shift = self.window.l_out() - other.window.l_out();
        let ring = self.cells.ring();
        let mut r = other.cells.decode(idx);
        for (v, &w) in r.iter_mut().zip(&self.cells.weights) {
            if *v == 0 {
                continue;
            }
            let e = w as i64 * shift.abs();
            if shift >= 0 {
                let f = p.checked_pow(e as u32)?;
                if *v % f != 0 {
                    return None;
                }
                *v /= f;
            } else {
                let f = pow_mod(p, e as u64, ring.m);
                *v = ring.mul(&(*v % ring.m), &f);
            }
            *v %= ring.m;
        }
        Some(self.cells.canonical_index(&r))
    }

    /// Canonical representative of cell `idx` as a group element.
    pub fn rep(&self, idx: usize) -> GroupElement {
        let desc = self.window.descriptor();
        let coords = self
            .cells
            .decode(idx)
            .into_iter()
            .zip(desc.weights())
            .map(|(r, w)| {
                BigRational::from_integer(r.into()) * p_pow(desc.p(), w as i64 * self.window.l_out())
            })
            .collect();
        GroupElement::new(desc, coords).expect("dimension matches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_descs() -> Vec<GroupDescriptor> {
        vec![
            GroupDescriptor::abelian(2, 2).unwrap(),
            GroupDescriptor::heisenberg(3, 1).unwrap(),
            GroupDescriptor::engel(3).unwrap(),
        ]
    }

    #[test]
    fn decode_matches_enumeration() {
        for d in all_descs() {
            let w = CosetWindow::new(d, -1, 0).unwrap();
            let wc = WindowCells::new(w).unwrap();
            for (i, rep) in w.reps().unwrap().iter().enumerate() {
                assert_eq!(&wc.rep(i), rep);
                assert_eq!(wc.locate(rep).unwrap(), Some(i));
            }
        }
    }

    /// Oracle: a and g are in the same left coset iff a⁻¹g ∈ G_n, checked in
    /// exact rational arithmetic.
    #[test]
    fn canonical_rep_is_left_coset_rep() {
        for d in all_descs() {
            let cg = CellGroup::new(d, 1).unwrap();
            let w = CosetWindow::new(d, 0, 1).unwrap();
            let wc = WindowCells::new(w).unwrap();
            let p = d.p() as i64;
            // pseudo-random integral elements
            let mut s = 12345u64;
            for _ in 0..400 {
                let coords: Vec<i64> = (0..d.dim())
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        ((s >> 33) % (p as u64).pow(4)) as i64 - 7
                    })
                    .collect();
                let g = GroupElement::from_ints(d, &coords).unwrap();
                let idx = wc.locate(&g).unwrap().unwrap();
                assert!(idx < cg.count());
                let a = wc.rep(idx);
                let k = a.inverse().mul(&g).unwrap();
                assert!(k.level().is_none_or(|l| l >= 1), "{a} vs {g}");
            }
        }
    }

    #[test]
    fn level_table_symmetric_and_correct() {
        for d in all_descs() {
            let depth = if d.homogeneous_dim() > 4 { 1 } else { 2 };
            let w = CosetWindow::new(d, 0, depth).unwrap();
            let wc = WindowCells::new(w).unwrap();
            let cg = wc.cells();
            let t = cg.level_table();
            let n = cg.count();
            let step = (n / 40).max(1);
            for x in (0..n).step_by(step) {
                for c in (0..n).step_by(step) {
                    assert_eq!(t[x * n + c], t[c * n + x]);
                    let e = wc.rep(x).inverse().mul(&wc.rep(c)).unwrap();
                    let lvl = e.level().map_or(depth, |l| l.min(depth));
                    assert_eq!(t[x * n + c] as i64, lvl);
                }
                assert_eq!(t[x * n + x] as i64, depth);
            }
        }
    }

    #[test]
    fn shell_counts() {
        // number of cells at relative level ℓ from the identity: (1 − p^{−Q})p^{Q(n−ℓ)} … for ℓ < n
        for d in all_descs() {
            let cg = CellGroup::new(d, 1).unwrap();
            let t = cg.level_table();
            let zeros = t[..cg.count()].iter().filter(|&&l| l == 0).count();
            assert_eq!(zeros, cg.count() - 1);
        }
    }
}
