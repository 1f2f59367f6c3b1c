//! Brute-force many-body reference built from explicit Kronecker products.
//!
//! Site 1 is the leftmost tensor factor; `c_j = Z ⊗ ... ⊗ Z ⊗ a ⊗ 1 ⊗ ... ⊗ 1`
//! with `a = |0⟩⟨1|`. Nothing here shares code with the library's Fock
//! engine.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    DMatrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

pub struct Fock {
    pub len: usize,
    /// Annihilation operators, index `j - 1` for site `j`.
    pub ann: Vec<DMatrix<C64>>,
}

impl Fock {
    pub fn new(len: usize) -> Self {
        let id = DMatrix::<C64>::identity(2, 2);
        let z = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let a = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let ann = (0..len)
            .map(|j| {
                let mut m = DMatrix::<C64>::identity(1, 1);
                for k in 0..len {
                    let f = if k < j {
                        &z
                    } else if k == j {
                        &a
                    } else {
                        &id
                    };
                    m = kron(&m, f);
                }
                m
            })
            .collect();
        Self { len, ann }
    }

    pub fn dim(&self) -> usize {
        1 << self.len
    }

    pub fn cdag(&self, site: usize) -> DMatrix<C64> {
        self.ann[site - 1].adjoint()
    }

    pub fn c(&self, site: usize) -> &DMatrix<C64> {
        &self.ann[site - 1]
    }

    pub fn n(&self, site: usize) -> DMatrix<C64> {
        self.cdag(site) * self.c(site)
    }

    pub fn total_number(&self) -> DMatrix<C64> {
        (1..=self.len).fold(DMatrix::zeros(self.dim(), self.dim()), |acc, j| acc + self.n(j))
    }

    pub fn vacuum(&self) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = c(1.0);
        v
    }

    /// `Σ_jk h_jk c†_j c_k`.
    pub fn quadratic(&self, h: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for j in 1..=self.len {
            for k in 1..=self.len {
                let v = h[(j - 1, k - 1)];
                if v != c(0.0) {
                    out += (self.cdag(j) * self.c(k)) * v;
                }
            }
        }
        out
    }

    /// `Π_k (Σ_j Φ_jk c†_j) |0⟩`, applied in column order.
    pub fn slater(&self, orbitals: &DMatrix<C64>) -> DVector<C64> {
        let mut psi = self.vacuum();
        for k in 0..orbitals.ncols() {
            let mut op = DMatrix::zeros(self.dim(), self.dim());
            for j in 1..=self.len {
                op += self.cdag(j) * orbitals[(j - 1, k)];
            }
            psi = op * psi;
        }
        psi
    }

    /// `C_jk = ⟨ψ| c†_j c_k |ψ⟩`.
    pub fn correlation(&self, psi: &DVector<C64>) -> DMatrix<C64> {
        let l = self.len;
        DMatrix::from_fn(l, l, |j, k| psi.dotc(&(self.cdag(j + 1) * (self.c(k + 1) * psi))))
    }

    pub fn correlation_rho(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let l = self.len;
        DMatrix::from_fn(l, l, |j, k| (rho * self.cdag(j + 1) * self.c(k + 1)).trace())
    }

    /// Gaussian density matrix with the given correlation matrix, assumed to
    /// have spectrum strictly inside (0, 1).
    pub fn gaussian_rho(&self, corr: &DMatrix<C64>) -> DMatrix<C64> {
        // ρ ∝ exp(-Σ K_jk c†_j c_k) has C^T = (e^K + 1)^{-1}.
        let ct = corr.transpose();
        let eig = nalgebra::SymmetricEigen::new(ct);
        let k = hermitian_fn(&eig.eigenvectors, &eig.eigenvalues, |x| c((1.0 / x - 1.0).ln()));
        let hk = self.quadratic(&k);
        let mut rho = expm_hermitian(&hk, |e| c((-e).exp()));
        let z = rho.trace();
        rho /= z;
        rho
    }

    /// `P(n)` of a pure state.
    pub fn number_distribution(&self, psi: &DVector<C64>) -> Vec<f64> {
        let mut p = vec![0.0; self.len + 1];
        for (idx, a) in psi.iter().enumerate() {
            p[idx.count_ones() as usize] += a.norm_sqr();
        }
        p
    }

    pub fn number_distribution_rho(&self, rho: &DMatrix<C64>) -> Vec<f64> {
        let mut p = vec![0.0; self.len + 1];
        for idx in 0..self.dim() {
            p[idx.count_ones() as usize] += rho[(idx, idx)].re;
        }
        p
    }

    /// `tr(ρ e^{iθN})`.
    pub fn characteristic_rho(&self, rho: &DMatrix<C64>, theta: f64) -> C64 {
        (0..self.dim()).map(|idx| rho[(idx, idx)] * C64::from_polar(1.0, theta * idx.count_ones() as f64)).sum()
    }
}

pub fn hermitian_fn(vectors: &DMatrix<C64>, values: &DVector<f64>, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let mut scaled = vectors.clone();
    for (k, &e) in values.iter().enumerate() {
        let fe = f(e);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= fe;
        }
    }
    scaled * vectors.adjoint()
}

/// `f(H)` for a Hermitian matrix via its eigendecomposition.
pub fn expm_hermitian(h: &DMatrix<C64>, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    hermitian_fn(&eig.eigenvectors, &eig.eigenvalues, f)
}

/// `exp(-i H t)`.
pub fn unitary(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    expm_hermitian(h, |e| C64::from_polar(1.0, -e * t))
}

pub fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Orthonormal `L × n` columns from a seeded Gram–Schmidt of pseudo-random entries.
pub fn random_orbitals<R: rand::Rng>(len: usize, n: usize, rng: &mut R) -> DMatrix<C64> {
    let mut m = DMatrix::from_fn(len, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    for k in 0..n {
        for q in 0..k {
            let proj = m.column(q).dotc(&m.column(k));
            let qcol = m.column(q).clone_owned();
            m.column_mut(k).axpy(-proj, &qcol, c(1.0));
        }
        let norm = m.column(k).norm();
        m.column_mut(k).unscale_mut(norm);
    }
    m
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian<R: rand::Rng>(len: usize, rng: &mut R) -> DMatrix<C64> {
    let a = DMatrix::from_fn(len, len, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * c(0.5)
}

/// Worst deviations seen while replaying one random sequence of
/// evolve / measure / measure-and-reset operations.
#[derive(Debug, Default, Clone, Copy)]
pub struct InterleavingReport {
    pub gaussian: f64,
    pub slater: f64,
    pub probability: f64,
    pub operations: usize,
}

/// Replays a seeded random operation sequence on a random Slater state with
/// `len ≤ 6` sites through both library engines and the brute-force reference.
pub fn run_interleaving(seed: u64) -> InterleavingReport {
    use impuritylab::freeprop::propagator;
    use impuritylab::gaussian::{GaussianState, SlaterState};
    use impuritylab::lattice::{build_hopping, ChainSpec, ImpurityRegion, QuadraticHamiltonian};
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let len = rng.random_range(2..=6usize);
    let spec = ChainSpec::new(len).unwrap();
    let fock = Fock::new(len);
    let h = if rng.random::<bool>() {
        build_hopping(&spec)
    } else {
        QuadraticHamiltonian::new(random_hermitian(len, &mut rng), None, 0.0).unwrap()
    };
    let h_mb = fock.quadratic(h.hopping());
    let particles = rng.random_range(0..=len);
    let orbitals = random_orbitals(len, particles, &mut rng);

    let mut psi = fock.slater(&orbitals);
    let mut slater = SlaterState::from_orbitals(orbitals).unwrap();
    let mut gauss = GaussianState::from_correlation(slater.correlation()).unwrap();
    let mut report = InterleavingReport::default();

    let measure = |site: usize,
                   psi: &mut DVector<C64>,
                   gauss: &mut GaussianState,
                   slater: &mut SlaterState,
                   rng: &mut rand_chacha::ChaCha8Rng,
                   report: &mut InterleavingReport|
     -> bool {
        let n = fock.n(site);
        let p = psi.dotc(&(&n * &*psi)).re;
        let occupied = if p < 1e-6 {
            false
        } else if p > 1.0 - 1e-6 {
            true
        } else {
            rng.random::<f64>() < p
        };
        let prob = if occupied { p } else { 1.0 - p };
        let projected = if occupied { &n * &*psi } else { &*psi - &n * &*psi };
        *psi = projected.unscale(prob.sqrt());
        let pg = gauss.project(site, occupied).unwrap();
        let ps = slater.project(site, occupied).unwrap();
        report.probability = report.probability.max((pg - prob).abs()).max((ps - prob).abs());
        occupied
    };

    for _ in 0..10 {
        match rng.random_range(0..3) {
            0 => {
                let t = rng.random::<f64>() * 2.0;
                let u = propagator(&h, t).unwrap();
                gauss.evolve(&u).unwrap();
                slater.evolve(&u).unwrap();
                psi = unitary(&h_mb, t) * psi;
            }
            1 => {
                let site = rng.random_range(1..=len);
                measure(site, &mut psi, &mut gauss, &mut slater, &mut rng, &mut report);
            }
            _ => {
                let size = rng.random_range(1..=len);
                let start = rng.random_range(1..=len - size + 1);
                let region = ImpurityRegion::new(start, size, &spec).unwrap();
                let mut empty = Vec::new();
                for site in region.sites() {
                    if !measure(site, &mut psi, &mut gauss, &mut slater, &mut rng, &mut report) {
                        empty.push(site);
                    }
                }
                for site in empty {
                    psi = fock.cdag(site) * psi;
                }
                gauss.reset_cluster(&region);
                slater.reset_cluster(&region).unwrap();
            }
        }
        let exact = fock.correlation(&psi);
        report.gaussian = report.gaussian.max(max_diff(gauss.corr(), &exact));
        report.slater = report.slater.max(max_diff(&slater.correlation(), &exact));
        report.operations += 1;
    }
    report
}
