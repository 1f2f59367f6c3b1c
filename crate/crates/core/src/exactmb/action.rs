//! Matrix-free Hamiltonian action with exact fermionic signs.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::basis::{apply_ladders, FockBasis, Ladder, Sector};
use crate::error::{Error, Result};
use crate::lattice::{ImpuritySpec, ImpurityVariant, QuadraticHamiltonian};

/// Below this dimension the matvec runs on the calling thread.
const PARALLEL_MIN_DIM: usize = 1 << 14;

/// One operator string with its coefficient: `coeff · ops[0] ops[1] ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub ops: Vec<Ladder>,
}

impl Term {
    pub fn new(coeff: C64, ops: Vec<Ladder>) -> Self {
        Self { coeff, ops }
    }

    /// Conjugate term: reversed string of adjoint operators.
    pub fn adjoint(&self) -> Self {
        Self { coeff: self.coeff.conj(), ops: self.ops.iter().rev().map(|o| o.adjoint()).collect() }
    }

    /// Created minus annihilated particles.
    pub fn charge(&self) -> i64 {
        self.ops.iter().map(|o| if o.dagger { 1 } else { -1 }).sum()
    }

    fn max_site(&self) -> usize {
        self.ops.iter().map(|o| o.site).max().unwrap_or(0)
    }

    fn flips_parity(&self) -> bool {
        self.ops.len() % 2 == 1
    }
}

/// `Δ` times the operator strings of an impurity, Hermitian conjugates included.
pub fn impurity_terms(imp: &ImpuritySpec) -> Vec<Term> {
    let i = imp.site();
    let d = C64::new(imp.strength(), 0.0);
    let n = |s: usize| [Ladder::create(s), Ladder::annihilate(s)];
    match imp.variant() {
        ImpurityVariant::Density2 => vec![Term::new(d, [n(i), n(i + 1)].concat())],
        ImpurityVariant::Density3 => vec![Term::new(d, [n(i), n(i + 1), n(i + 2)].concat())],
        ImpurityVariant::Raise3 => {
            let t = Term::new(d, raise3_ops(i).to_vec());
            vec![t.adjoint(), t]
        }
        ImpurityVariant::ParityBreaking => {
            let t = Term::new(d, vec![Ladder::create(i), Ladder::create(i + 1), Ladder::annihilate(i + 2)]);
            vec![t.adjoint(), t]
        }
    }
}

/// `c†_i c†_{i+1} c†_{i+2} c_{i+3}`.
pub fn raise3_ops(i: usize) -> [Ladder; 4] {
    [Ladder::create(i), Ladder::create(i + 1), Ladder::create(i + 2), Ladder::annihilate(i + 3)]
}

/// `Σ h_jk c†_j c_k`.
pub fn quadratic_terms(h: &QuadraticHamiltonian) -> Result<Vec<Term>> {
    if !h.is_number_conserving() {
        return Err(Error::UnsupportedHamiltonian("pairing terms are not supported in the Fock engine".into()));
    }
    let m = h.hopping();
    let mut terms = Vec::new();
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            let c = m[(j, k)];
            if c != C64::new(0.0, 0.0) {
                terms.push(Term::new(c, vec![Ladder::create(j + 1), Ladder::annihilate(k + 1)]));
            }
        }
    }
    Ok(terms)
}

/// Adjoint of a term in a form that is cheap to apply to a word.
#[derive(Clone, Debug)]
enum Gather {
    /// Products of number operators: keeps words containing `mask`.
    Diagonal {
        coeff: C64,
        mask: u64,
    },
    /// `c†_a c_b` with `a != b`: needs bit `b` set and bit `a` clear; the
    /// sign counts occupied sites strictly between them.
    Hop {
        coeff: C64,
        take: u64,
        put: u64,
        between: u64,
    },
    General {
        coeff: C64,
        ops: Vec<Ladder>,
    },
}

impl Gather {
    /// Compiles the adjoint of `t`; `coeff` already carries the conjugation.
    fn compile(t: &Term) -> Self {
        let adj = t.adjoint();
        let coeff = t.coeff.conj();
        let ops = &adj.ops;
        let pairs =
            ops.len().is_multiple_of(2) && ops.chunks(2).all(|p| p[0].dagger && !p[1].dagger && p[0].site == p[1].site);
        if pairs {
            let mask = ops.iter().fold(0u64, |m, o| m | 1 << (o.site - 1));
            return Gather::Diagonal { coeff, mask };
        }
        if ops.len() == 2 && ops[0].dagger && !ops[1].dagger {
            let (a, b) = (ops[0].site, ops[1].site);
            let (lo, hi) = (a.min(b), a.max(b));
            let between = ((1u64 << (hi - 1)) - 1) & !((1u64 << lo) - 1);
            return Gather::Hop { coeff, take: 1 << (b - 1), put: 1 << (a - 1), between };
        }
        Gather::General { coeff, ops: ops.clone() }
    }

    /// Coefficient and source word of `⟨w|term|src⟩`.
    #[inline]
    fn source(&self, w: u64) -> Option<(C64, u64)> {
        match self {
            Gather::Diagonal { coeff, mask } => (w & mask == *mask).then_some((*coeff, w)),
            Gather::Hop { coeff, take, put, between } => {
                if w & take == 0 || w & put != 0 {
                    return None;
                }
                let c = if (w & between).count_ones() & 1 == 1 { -*coeff } else { *coeff };
                Some((c, w ^ take ^ put))
            }
            Gather::General { coeff, ops } => apply_ladders(w, ops).map(|(s, src)| (coeff * s, src)),
        }
    }
}

/// `½ Σ Δ_jk c†_j c†_k + h.c.` for the pairing block of `h`, if any.
pub fn pairing_terms(h: &QuadraticHamiltonian) -> Vec<Term> {
    let mut terms = Vec::new();
    if let Some(p) = h.pairing() {
        for j in 0..p.nrows() {
            for k in 0..p.ncols() {
                let d = p[(j, k)] * 0.5;
                if d != C64::new(0.0, 0.0) {
                    let t = Term::new(d, vec![Ladder::create(j + 1), Ladder::create(k + 1)]);
                    terms.push(t.adjoint());
                    terms.push(t);
                }
            }
        }
    }
    terms
}

/// Hamiltonian as a list of operator strings, applied on the fly.
#[derive(Clone, Debug)]
pub struct SparseAction {
    basis: Arc<FockBasis>,
    /// Adjoint strings, used to gather the source word of each output word.
    gather: Vec<Gather>,
    /// Hopping terms split out of `gather` as `(coeff, take, put, between)`.
    hops: Vec<(C64, u64, u64, u64)>,
}

impl SparseAction {
    /// Checks that every term fits on the chain and stays inside the sector.
    pub fn new(basis: impl Into<Arc<FockBasis>>, terms: Vec<Term>) -> Result<Self> {
        let basis = basis.into();
        for t in &terms {
            if t.max_site() > basis.len() || t.ops.iter().any(|o| o.site == 0) {
                return Err(Error::InvalidSpec(format!("term on sites {:?} outside chain of {}", t.ops, basis.len())));
            }
            if t.flips_parity() && basis.sector() != Sector::Full {
                return Err(Error::SectorViolation(format!(
                    "parity-changing term requires the full basis, got {:?}",
                    basis.sector()
                )));
            }
        }
        let (mut gather, mut hops) = (Vec::new(), Vec::new());
        for t in &terms {
            match Gather::compile(t) {
                Gather::Hop { coeff, take, put, between } => hops.push((coeff, take, put, between)),
                g => gather.push(g),
            }
        }
        Ok(Self { basis, gather, hops })
    }

    /// `H_0 + H_imp` on the given basis.
    pub fn from_model(
        basis: impl Into<Arc<FockBasis>>,
        h0: &QuadraticHamiltonian,
        imp: Option<&ImpuritySpec>,
    ) -> Result<Self> {
        let basis = basis.into();
        if h0.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: h0.len() });
        }
        let mut terms = quadratic_terms(h0)?;
        if let Some(imp) = imp {
            terms.extend(impurity_terms(imp));
        }
        Self::new(basis, terms)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `out = H psi`.
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) {
        assert_eq!(psi.len(), self.dim(), "apply: state dimension mismatch");
        assert_eq!(out.len(), self.dim(), "apply: output dimension mismatch");
        let states = self.basis.states();
        let shift = self.basis.shift();
        let row = |(w, o): (&u64, &mut C64)| {
            let mut acc = C64::new(0.0, 0.0);
            // branch-free hopping: the flipped word always stays in the sector
            for &(coeff, take, put, between) in &self.hops {
                let live = ((w & take != 0) & (w & put == 0)) as u8 as f64;
                let sign = if between == 0 { 1.0 } else { 1.0 - 2.0 * ((w & between).count_ones() & 1) as f64 };
                acc += coeff * (live * sign) * psi[((w ^ take ^ put) >> shift) as usize];
            }
            for t in &self.gather {
                // H|w'⟩ has amplitude coeff·s on |w⟩ when t†|w⟩ = s|w'⟩
                if let Some((c, src)) = t.source(*w) {
                    acc += c * psi[self.basis.index(src)];
                }
            }
            *o = acc;
        };
        if self.dim() >= PARALLEL_MIN_DIM {
            states.par_iter().zip(out.par_iter_mut()).for_each(row);
        } else {
            states.iter().zip(out.iter_mut()).for_each(row);
        }
    }

    /// Calls `f(src, h)` for every `h = ⟨w|H|src⟩`; repeated sources are not merged.
    pub fn row_entries(&self, w: u64, mut f: impl FnMut(u64, C64)) {
        for &(coeff, take, put, between) in &self.hops {
            if w & take != 0 && w & put == 0 {
                let odd = (w & between).count_ones() & 1 == 1;
                f(w ^ take ^ put, if odd { -coeff } else { coeff });
            }
        }
        for t in &self.gather {
            if let Some((c, src)) = t.source(w) {
                f(src, c);
            }
        }
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut out);
        out
    }

    /// `⟨psi|H|psi⟩`.
    pub fn expectation(&self, psi: &[C64]) -> C64 {
        let h = self.apply(psi);
        psi.iter().zip(&h).map(|(a, b)| a.conj() * b).sum()
    }
}

/// `⟨psi| ops |psi⟩` for one operator string.
pub fn string_expectation(basis: &FockBasis, psi: &[C64], ops: &[Ladder]) -> C64 {
    let adj: Vec<Ladder> = ops.iter().rev().map(|o| o.adjoint()).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (k, &w) in basis.states().iter().enumerate() {
        if let Some((s, src)) = apply_ladders(w, &adj) {
            if let Some(j) = basis.find(src) {
                acc += psi[k].conj() * s * psi[j];
            }
        }
    }
    acc
}
