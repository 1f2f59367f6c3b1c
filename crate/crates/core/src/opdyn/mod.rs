//! Heisenberg dynamics of dense operators at small `L`: local weight
//! decomposition, operator entanglement, Floquet stroboscopic maps and
//! weight-one Majorana evolution for paired chains.

mod majorana;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use majorana::{majorana_free_evolve, majorana_generator, MajoranaVector, MajoranaWeights};

use crate::error::{Error, Result};
use crate::exactmb::{
    enumerate_basis, fock_operator, impurity_terms, pairing_terms, quadratic_terms, Ladder, Sector, SparseAction, Term,
};
use crate::freeprop::{finite_size_time, time_grid};
use crate::lattice::{build_hopping, ChainSpec, ImpuritySpec, ImpurityVariant, QuadraticHamiltonian};
use crate::linalg::{frobenius_sq, zgemm, HermitianEigen, Op};
use crate::monitored::Placement;

/// Largest chain for interacting operator evolution.
pub const OPERATOR_MAX_SITES: usize = 12;
/// Largest chain for operator-entanglement sweeps.
pub const ENTANGLEMENT_MAX_SITES: usize = 10;

fn dense_bytes(len: usize) -> u128 {
    let dim = 1u128 << len;
    // operator, its conjugated copy and one propagator
    3 * dim * dim * 16
}

fn check_cap(len: usize, cap: usize, what: &str) -> Result<()> {
    if len > cap {
        return Err(Error::Resource {
            what: format!("{what} on {len} sites (cap {cap})"),
            required_bytes: dense_bytes(len),
        });
    }
    Ok(())
}

/// A dense operator on `2^L` basis words; site `j` is bit `j - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    len: usize,
    mat: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(len: usize, mat: DMatrix<C64>) -> Result<Self> {
        check_cap(len, OPERATOR_MAX_SITES, "dense operator")?;
        let dim = 1usize << len;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: mat.nrows() });
        }
        Ok(Self { len, mat })
    }

    /// Operator string `ops[0] ops[1] ...`.
    pub fn from_ops(len: usize, ops: &[Ladder]) -> Result<Self> {
        check_cap(len, OPERATOR_MAX_SITES, "dense operator")?;
        let dim = 1usize << len;
        let mut mat = DMatrix::zeros(dim, dim);
        for w in 0..dim as u64 {
            if let Some((s, out)) = crate::exactmb::apply_ladders(w, ops) {
                mat[(out as usize, w as usize)] = C64::new(s, 0.0);
            }
        }
        Ok(Self { len, mat })
    }

    /// `N_site`.
    pub fn number(len: usize, site: usize) -> Result<Self> {
        if site == 0 || site > len {
            return Err(Error::InvalidSpec(format!("site {site} outside chain of {len}")));
        }
        Self::from_ops(len, &[Ladder::create(site), Ladder::annihilate(site)])
    }

    pub fn total_number(len: usize) -> Result<Self> {
        check_cap(len, OPERATOR_MAX_SITES, "dense operator")?;
        let dim = 1usize << len;
        let diag = nalgebra::DVector::from_fn(dim, |w, _| C64::new(w.count_ones() as f64, 0.0));
        Ok(Self { len, mat: DMatrix::from_diagonal(&diag) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn mat(&self) -> &DMatrix<C64> {
        &self.mat
    }

    /// `Tr(O†O) / 2^L`.
    pub fn hs_norm_sq(&self) -> f64 {
        frobenius_sq(&self.mat) / self.mat.nrows() as f64
    }

    /// Scaled to unit Hilbert–Schmidt norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.hs_norm_sq();
        if n == 0.0 {
            return Err(Error::Domain("cannot normalise the zero operator".into()));
        }
        Ok(Self { len: self.len, mat: &self.mat * C64::new(1.0 / n.sqrt(), 0.0) })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::max_abs_diff(&self.mat, &self.mat.adjoint())
    }
}

/// Which quantity the Hamiltonian conserves, used to block-diagonalise it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Charge {
    Number,
    Parity,
    Nothing,
}

impl Charge {
    /// Finest label conserved by every term.
    pub fn of_terms<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Self {
        let mut out = Charge::Number;
        for t in terms {
            let q = t.charge();
            if q % 2 != 0 {
                return Charge::Nothing;
            }
            if q != 0 {
                out = Charge::Parity;
            }
        }
        out
    }

    fn label(self, word: usize) -> usize {
        match self {
            Charge::Number => word.count_ones() as usize,
            Charge::Parity => word.count_ones() as usize % 2,
            Charge::Nothing => 0,
        }
    }

    /// Basis words grouped by label, ascending within each group.
    fn partition(self, len: usize) -> Vec<Vec<usize>> {
        let groups = match self {
            Charge::Number => len + 1,
            Charge::Parity => 2,
            Charge::Nothing => 1,
        };
        let mut out = vec![Vec::new(); groups];
        for w in 0..1usize << len {
            out[self.label(w)].push(w);
        }
        out
    }
}

/// Block-diagonal unitary over a fixed partition of basis words.
#[derive(Clone, Debug)]
pub struct BlockUnitary {
    len: usize,
    blocks: Vec<(Vec<usize>, DMatrix<C64>)>,
}

impl BlockUnitary {
    pub fn len(&self) -> usize {
        self.len
    }

    /// `self · other`; both must share the partition.
    pub fn then_apply(&self, other: &BlockUnitary) -> Result<BlockUnitary> {
        if self.blocks.len() != other.blocks.len() || self.blocks.iter().zip(&other.blocks).any(|(a, b)| a.0 != b.0) {
            return Err(Error::InvalidSpec("unitaries use different block partitions".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|((w, a), (_, b))| (w.clone(), zgemm(a, Op::Plain, b, Op::Plain)))
            .collect();
        Ok(BlockUnitary { len: self.len, blocks })
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.len;
        let mut m = DMatrix::zeros(dim, dim);
        for (words, u) in &self.blocks {
            for (a, &r) in words.iter().enumerate() {
                for (b, &c) in words.iter().enumerate() {
                    m[(r, c)] = u[(a, b)];
                }
            }
        }
        m
    }

    /// `U† O U`, skipping blocks of `O` that vanish.
    pub fn conjugate(&self, op: &OperatorMatrix) -> Result<OperatorMatrix> {
        if op.len != self.len {
            return Err(Error::DimensionMismatch { expected: self.len, got: op.len });
        }
        let dim = 1usize << self.len;
        let mut out = DMatrix::zeros(dim, dim);
        for (rows, ua) in &self.blocks {
            for (cols, ub) in &self.blocks {
                let sub = DMatrix::from_fn(rows.len(), cols.len(), |a, b| op.mat[(rows[a], cols[b])]);
                if sub.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let left = zgemm(ua, Op::Adjoint, &sub, Op::Plain);
                let new = zgemm(&left, Op::Plain, ub, Op::Plain);
                for (a, &r) in rows.iter().enumerate() {
                    for (b, &c) in cols.iter().enumerate() {
                        out[(r, c)] = new[(a, b)];
                    }
                }
            }
        }
        Ok(OperatorMatrix { len: self.len, mat: out })
    }
}

/// Block spectral decomposition of a Hamiltonian given as operator strings.
#[derive(Clone, Debug)]
pub struct Spectrum {
    len: usize,
    charge: Charge,
    blocks: Vec<(Vec<usize>, HermitianEigen)>,
}

impl Spectrum {
    /// Blocks by `charge`, which must be conserved by every term.
    pub fn new(len: usize, terms: Vec<Term>, charge: Charge) -> Result<Self> {
        check_cap(len, OPERATOR_MAX_SITES, "operator evolution")?;
        let finest = Charge::of_terms(&terms);
        let compatible = match charge {
            Charge::Nothing => true,
            Charge::Parity => finest != Charge::Nothing,
            Charge::Number => finest == Charge::Number,
        };
        if !compatible {
            return Err(Error::SectorViolation(format!("Hamiltonian does not conserve {charge:?}")));
        }
        let action = SparseAction::new(enumerate_basis(len, Sector::Full)?, terms)?;
        let mut blocks = Vec::new();
        for words in charge.partition(len) {
            let mut pos = vec![usize::MAX; 1 << len];
            for (k, &w) in words.iter().enumerate() {
                pos[w] = k;
            }
            let mut h = DMatrix::zeros(words.len(), words.len());
            for (r, &w) in words.iter().enumerate() {
                action.row_entries(w as u64, |src, c| h[(r, pos[src as usize])] += c);
            }
            blocks.push((words, HermitianEigen::new(&h)));
        }
        Ok(Self { len, charge, blocks })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn charge(&self) -> Charge {
        self.charge
    }

    /// `exp(-iHt)`.
    pub fn unitary(&self, t: f64) -> BlockUnitary {
        let blocks =
            self.blocks.iter().map(|(w, eig)| (w.clone(), eig.apply_fn(|e| C64::from_polar(1.0, -e * t)))).collect();
        BlockUnitary { len: self.len, blocks }
    }
}

/// Hopping chain plus an optional impurity, with the pieces kept apart for
/// Floquet splitting.
#[derive(Clone, Debug)]
pub struct OperatorModel {
    pub h0: QuadraticHamiltonian,
    pub impurity: Option<ImpuritySpec>,
}

impl OperatorModel {
    pub fn new(h0: QuadraticHamiltonian, impurity: Option<ImpuritySpec>) -> Result<Self> {
        if let Some(imp) = &impurity {
            if imp.support().end() > &h0.len() {
                return Err(Error::InvalidSpec("impurity support leaves the chain".into()));
            }
        }
        Ok(Self { h0, impurity })
    }

    pub fn len(&self) -> usize {
        self.h0.len()
    }

    fn free_terms(&self) -> Result<Vec<Term>> {
        let mut t = quadratic_terms(&QuadraticHamiltonian::new(self.h0.hopping().clone(), None, self.h0.chemical())?)?;
        t.extend(pairing_terms(&self.h0));
        Ok(t)
    }

    fn impurity_terms(&self) -> Vec<Term> {
        self.impurity.as_ref().map(impurity_terms).unwrap_or_default()
    }

    /// Finest charge conserved by both pieces.
    pub fn charge(&self) -> Result<Charge> {
        let mut all = self.free_terms()?;
        all.extend(self.impurity_terms());
        Ok(Charge::of_terms(&all))
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let mut all = self.free_terms()?;
        all.extend(self.impurity_terms());
        let charge = Charge::of_terms(&all);
        Spectrum::new(self.len(), all, charge)
    }

    /// `U_F = exp(-iH_0/ω) exp(-iH_imp/ω)`.
    pub fn floquet_unitary(&self, spec: FloquetSpec) -> Result<BlockUnitary> {
        let charge = self.charge()?;
        let u0 = Spectrum::new(self.len(), self.free_terms()?, charge)?.unitary(1.0 / spec.omega);
        let ui = Spectrum::new(self.len(), self.impurity_terms(), charge)?.unitary(1.0 / spec.omega);
        u0.then_apply(&ui)
    }
}

/// `O(t) = e^{iHt} O e^{-iHt}` reached in steps of at most `dt`.
pub fn heisenberg_evolve(op: &OperatorMatrix, model: &OperatorModel, t: f64, dt: f64) -> Result<OperatorMatrix> {
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need t >= 0 and dt > 0, got t={t}, dt={dt}")));
    }
    if op.hermiticity_defect() > 1e-12 {
        return Err(Error::InvalidSpec("Heisenberg evolution expects a Hermitian operator".into()));
    }
    let spectrum = model.spectrum()?;
    let steps = (t / dt).ceil() as usize;
    let mut out = op.clone();
    if steps > 0 {
        let u = spectrum.unitary(t / steps as f64);
        for _ in 0..steps {
            out = u.conjugate(&out)?;
        }
    }
    Ok(out)
}

/// Evolves `op` through the ascending `times`, calling `f` at each of them.
pub fn heisenberg_series(
    op: &OperatorMatrix,
    spectrum: &Spectrum,
    times: &[f64],
    mut f: impl FnMut(f64, &OperatorMatrix) -> Result<()>,
) -> Result<()> {
    let mut current = op.clone();
    let mut now = 0.0;
    let mut cached: Option<(f64, BlockUnitary)> = None;
    for &t in times {
        let step = t - now;
        if step < -1e-12 {
            return Err(Error::InvalidSpec("times must be ascending from zero".into()));
        }
        if step > 1e-12 {
            let reuse = cached.as_ref().is_some_and(|(s, _)| (s - step).abs() < 1e-12);
            if !reuse {
                cached = Some((step, spectrum.unitary(step)));
            }
            current = cached.as_ref().map(|(_, u)| u).unwrap().conjugate(&current)?;
            now = t;
        }
        f(t, &current)?;
    }
    Ok(())
}

/// Squared overlaps of the site reduction with `{𝕀/√2, η/√2, σ⁺, σ⁻}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalWeights {
    pub w_i: f64,
    pub w_eta: f64,
    pub w_plus: f64,
    pub w_minus: f64,
}

impl LocalWeights {
    /// Ladder-sector weight `w_+ + w_-`.
    pub fn w(&self) -> f64 {
        self.w_plus + self.w_minus
    }

    pub fn sum(&self) -> f64 {
        self.w_i + self.w_eta + self.w_plus + self.w_minus
    }
}

/// Local weights on `site`, relative to `norm_sq = Tr(O†O)/2^L`.
pub fn local_weights_with_norm(op: &OperatorMatrix, site: usize, norm_sq: f64) -> Result<LocalWeights> {
    if site == 0 || site > op.len {
        return Err(Error::InvalidSpec(format!("site {site} outside chain of {}", op.len)));
    }
    let bit = 1usize << (site - 1);
    let dim = op.mat.nrows();
    // blocks O_{ab} with a, b the occupation of `site` in row and column
    let (mut same_sum, mut same_diff, mut plus, mut minus) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..dim {
        if c & bit != 0 {
            continue;
        }
        let c1 = c | bit;
        for r in 0..dim {
            if r & bit != 0 {
                continue;
            }
            let r1 = r | bit;
            let o00 = op.mat[(r, c)];
            let o11 = op.mat[(r1, c1)];
            same_sum += (o00 + o11).norm_sqr();
            same_diff += (o00 - o11).norm_sqr();
            plus += op.mat[(r1, c)].norm_sqr();
            minus += op.mat[(r, c1)].norm_sqr();
        }
    }
    let total = norm_sq * dim as f64;
    Ok(LocalWeights {
        w_i: same_sum / 2.0 / total,
        w_eta: same_diff / 2.0 / total,
        w_plus: plus / total,
        w_minus: minus / total,
    })
}

/// Local weights of an operator normalised to unit Hilbert–Schmidt norm.
pub fn local_weights(op: &OperatorMatrix, site: usize) -> Result<LocalWeights> {
    let n = op.hs_norm_sq();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("operator must be normalised, has norm² {n}")));
    }
    local_weights_with_norm(op, site, 1.0)
}

/// Entanglement entropy (natural log) of the vectorised operator across the
/// bond after site `cut`.
pub fn operator_entanglement(op: &OperatorMatrix, cut: usize) -> Result<f64> {
    check_cap(op.len, ENTANGLEMENT_MAX_SITES, "operator entanglement")?;
    if cut == 0 || cut >= op.len {
        return Err(Error::InvalidSpec(format!("cut {cut} must lie strictly inside 1..{}", op.len)));
    }
    // site j is bit j-1, so the left block is the low `cut` bits
    let da = 1usize << cut;
    let db = 1usize << (op.len - cut);
    let m = DMatrix::from_fn(da * da, db * db, |a, b| {
        let (ra, ca) = (a % da, a / da);
        let (rb, cb) = (b % db, b / db);
        op.mat[(ra | rb << cut, ca | cb << cut)]
    });
    // the smaller Gram matrix has the same nonzero spectrum
    let gram = if da <= db { zgemm(&m, Op::Plain, &m, Op::Adjoint) } else { zgemm(&m, Op::Adjoint, &m, Op::Plain) };
    let eig = HermitianEigen::new(&gram);
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    if total == 0.0 {
        return Err(Error::Domain("zero operator has no entanglement".into()));
    }
    Ok(eig.values.iter().map(|v| v.max(0.0) / total).filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloquetSpec {
    pub omega: f64,
}

impl FloquetSpec {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain(format!("Floquet frequency must be positive, got {omega}")));
        }
        Ok(Self { omega })
    }

    /// `T_F = 2/ω`.
    pub fn period(&self) -> f64 {
        2.0 / self.omega
    }
}

/// One stroboscopic step `O ← U_F† O U_F`.
pub fn floquet_step(op: &OperatorMatrix, model: &OperatorModel, spec: FloquetSpec) -> Result<OperatorMatrix> {
    model.floquet_unitary(spec)?.conjugate(op)
}

/// `w(t)` of `N_site` under a parity-breaking impurity anchored at `site`.
pub fn parity_breaking_w(site: usize, strength: f64, len: usize, times: &[f64]) -> Result<Vec<f64>> {
    let chain = ChainSpec::new(len)?;
    let imp = ImpuritySpec::new(ImpurityVariant::ParityBreaking, strength, site, &chain)?;
    let model = OperatorModel::new(build_hopping(&chain), Some(imp))?;
    weight_series(&model, site, times)
}

/// `w(t)` of `N_site` under `model`.
pub fn weight_series(model: &OperatorModel, site: usize, times: &[f64]) -> Result<Vec<f64>> {
    let op = OperatorMatrix::number(model.len(), site)?.normalized()?;
    let spectrum = model.spectrum()?;
    let mut out = Vec::with_capacity(times.len());
    heisenberg_series(&op, &spectrum, times, |_, o| {
        out.push(local_weights_with_norm(o, site, 1.0)?.w());
        Ok(())
    })?;
    Ok(out)
}

/// Settings of one operator run starting from `N_i` at the impurity anchor.
#[derive(Clone, Debug)]
pub struct OperatorConfig {
    pub chain: ChainSpec,
    pub impurity: ImpuritySpec,
    pub dt: f64,
    pub t_max: f64,
    /// Stroboscopic evolution instead of static; `dt` is then ignored.
    pub floquet: Option<FloquetSpec>,
    /// Bond for the entanglement column, `None` to skip it.
    pub cut: Option<usize>,
}

impl OperatorConfig {
    pub fn new(len: usize, variant: ImpurityVariant, strength: f64, placement: Placement) -> Result<Self> {
        let chain = ChainSpec::new(len)?;
        let site = match placement {
            Placement::Boundary => 1,
            Placement::Bulk => len / 2,
        };
        let impurity = ImpuritySpec::new(variant, strength, site, &chain)?;
        Ok(Self {
            chain,
            impurity,
            dt: 0.1,
            t_max: finite_size_time(len, site),
            floquet: None,
            cut: (len <= ENTANGLEMENT_MAX_SITES).then_some(len / 2),
        })
    }
}

/// One row per sampled time.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorRow {
    pub t: f64,
    pub weights: LocalWeights,
    pub entropy: Option<f64>,
    pub hs_norm_sq: f64,
}

pub fn run_operator(cfg: &OperatorConfig) -> Result<Vec<OperatorRow>> {
    let len = cfg.chain.len();
    if let Some(cut) = cfg.cut {
        check_cap(len, ENTANGLEMENT_MAX_SITES, "operator entanglement")?;
        if cut == 0 || cut >= len {
            return Err(Error::InvalidSpec(format!("cut {cut} must lie strictly inside 1..{len}")));
        }
    }
    let site = cfg.impurity.site();
    let model = OperatorModel::new(build_hopping(&cfg.chain), Some(cfg.impurity))?;
    let op = OperatorMatrix::number(len, site)?.normalized()?;
    let mut rows = Vec::new();
    let mut record = |t: f64, o: &OperatorMatrix| -> Result<()> {
        rows.push(OperatorRow {
            t,
            weights: local_weights_with_norm(o, site, 1.0)?,
            entropy: cfg.cut.map(|c| operator_entanglement(o, c)).transpose()?,
            hs_norm_sq: o.hs_norm_sq(),
        });
        Ok(())
    };
    match cfg.floquet {
        Some(spec) => {
            let u = model.floquet_unitary(spec)?;
            let periods = (cfg.t_max / spec.period()).floor() as usize;
            let mut o = op;
            record(0.0, &o)?;
            for n in 1..=periods {
                o = u.conjugate(&o)?;
                record(n as f64 * spec.period(), &o)?;
            }
        }
        None => {
            if !(cfg.dt > 0.0) {
                return Err(Error::Domain(format!("dt must be positive, got {}", cfg.dt)));
            }
            heisenberg_series(&op, &model.spectrum()?, &time_grid(cfg.t_max, cfg.dt), |t, o| record(t, o))?;
        }
    }
    Ok(rows)
}

/// Dense matrix of `Σ h_jk c†_j c_k` plus pairing, for checks.
pub fn dense_hamiltonian(h: &QuadraticHamiltonian) -> Result<DMatrix<C64>> {
    let len = h.len();
    let mut terms = quadratic_terms(&QuadraticHamiltonian::new(h.hopping().clone(), None, h.chemical())?)?;
    terms.extend(pairing_terms(h));
    let mut out = DMatrix::zeros(1 << len, 1 << len);
    for t in &terms {
        out += fock_operator(len, &t.ops)? * t.coeff;
    }
    Ok(out)
}
