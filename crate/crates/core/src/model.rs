//! Lattice Hamiltonians for one and two bosons.
//!
//! Three generators are built here, all real symmetric:
//!
//! * the single-particle Wannier-Stark chain, `H[n][n±1] = -κ`, `H[n][n] = Fd·(n - n₀)`;
//! * the two-boson Fock-space lattice, i.e. one walker on an `N×N` square lattice
//!   whose site `(n, m)` holds the amplitude `c(n, m)` of finding one boson on `n`
//!   and the other on `m`;
//! * the effective bound-pair chain, a single-particle chain with `κ → κ_eff` and
//!   `Fd → 2Fd`.
//!
//! The tilt origin `n₀` is the central site `⌊N/2⌋` in every builder, so the
//! injected waveguide carries zero tilt energy.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest operator dimension the builders accept unless overridden.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Environment variable that overrides [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "FRACBLOCH_DIM_CAP";

/// Reads the dimension cap from [`DIM_CAP_ENV`], falling back to the default.
pub fn dimension_cap_from_env() -> Result<usize> {
    match std::env::var(DIM_CAP_ENV) {
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&cap| cap > 0)
            .ok_or_else(|| Error::invalid(format!("{DIM_CAP_ENV}={raw:?} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_DIM_CAP),
    }
}

/// Which nearest-neighbour bonds of the Fock lattice carry the corrected rate `κ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kappa1Rule {
    /// Bonds with at least one end on the main diagonal `n = m`.
    #[default]
    MainDiagonalIncident,
    /// Bonds with at least one end on one of the three diagonals `|n - m| ≤ 1`.
    ThreeDiagonalIncident,
}

/// Physical rates of the lattice model, in cm⁻¹ (propagation distance plays the role of time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub kappa1: f64,
    pub rho: f64,
    /// Signed on-site interaction; negative is attractive.
    pub u0: f64,
    pub eps: Option<f64>,
    pub j_hop: Option<f64>,
    /// Tilt energy step per site.
    pub fd: f64,
    pub n_sites: usize,
    /// Explicit energy of the `|n - m| = 1` diagonals. When absent it is `2ε²U₀`
    /// if `eps` is known and zero otherwise.
    pub near_diagonal_defect: Option<f64>,
    pub kappa1_rule: Kappa1Rule,
}

impl ModelParams {
    /// Rates given directly, as measured on a waveguide array. `κ₁ = κ` and no
    /// near-diagonal defect.
    pub fn photonic(kappa: f64, rho: f64, u0: f64, fd: f64, n_sites: usize) -> Self {
        ModelParams {
            kappa,
            kappa1: kappa,
            rho,
            u0,
            eps: None,
            j_hop: None,
            fd,
            n_sites,
            near_diagonal_defect: None,
            kappa1_rule: Kappa1Rule::default(),
        }
    }

    /// Rates derived from the bare hopping `J` and attenuation `ε`:
    /// `κ = εJ/2`, `κ₁ = κ - U₀ε^{3/2}`, `ρ = -2U₀ε²`, near-diagonal defect `2ε²U₀`.
    pub fn from_ebh(j_hop: f64, eps: f64, u0: f64, fd: f64, n_sites: usize) -> Self {
        let kappa = eps * j_hop / 2.0;
        ModelParams {
            kappa,
            kappa1: kappa - u0 * eps.powf(1.5),
            rho: -2.0 * u0 * eps * eps,
            u0,
            eps: Some(eps),
            j_hop: Some(j_hop),
            fd,
            n_sites,
            near_diagonal_defect: None,
            kappa1_rule: Kappa1Rule::default(),
        }
    }

    pub fn with_fd(mut self, fd: f64) -> Self {
        self.fd = fd;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn near_diagonal_energy(&self) -> f64 {
        match (self.near_diagonal_defect, self.eps) {
            (Some(e), _) => e,
            (None, Some(eps)) => 2.0 * eps * eps * self.u0,
            (None, None) => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa, self.kappa1, self.rho, self.u0, self.fd]
            .iter()
            .chain(self.eps.iter())
            .chain(self.j_hop.iter())
            .chain(self.near_diagonal_defect.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        if self.n_sites < 2 {
            return Err(Error::invalid(format!("n_sites must be ≥ 2, got {}", self.n_sites)));
        }
        if self.kappa < 0.0 {
            return Err(Error::invalid(format!("kappa must be ≥ 0, got {}", self.kappa)));
        }
        if self.fd < 0.0 {
            return Err(Error::invalid(format!("fd must be ≥ 0, got {}", self.fd)));
        }
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
            }
        }
        if let (Some(eps), Some(j)) = (self.eps, self.j_hop) {
            let expect = ModelParams::from_ebh(j, eps, self.u0, self.fd, self.n_sites);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
            let checks = [
                ("kappa", self.kappa, expect.kappa),
                ("kappa1", self.kappa1, expect.kappa1),
                ("rho", self.rho, expect.rho),
                (
                    "near_diagonal_defect",
                    self.near_diagonal_energy(),
                    2.0 * eps * eps * self.u0,
                ),
            ];
            for (name, got, want) in checks {
                if !close(got, want) {
                    return Err(Error::invalid(format!(
                        "{name} = {got} is inconsistent with eps = {eps}, j_hop = {j} (expected {want})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A real symmetric generator `H` of the evolution `i dψ/dz = Hψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<f64>,
    label: String,
}

impl HermitianOperator {
    /// Wraps a matrix after checking that it is square, finite and exactly symmetric.
    pub fn from_matrix(matrix: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::invalid(format!(
                "operator must be square and non-empty, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dim = matrix.nrows();
        for i in 0..dim {
            for j in 0..dim {
                if !matrix[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::invalid(format!("operator is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(HermitianOperator {
            matrix,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        Complex64::new(self.matrix[(row, col)], 0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Provenance tag describing how the operator was built.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// `⟨ψ|H|ψ⟩` for a complex amplitude vector.
    pub fn expectation(&self, amplitudes: &[Complex64]) -> f64 {
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            let mut row = Complex64::new(0.0, 0.0);
            for (j, a) in amplitudes.iter().enumerate().take(dim) {
                let h = self.matrix[(i, j)];
                if h != 0.0 {
                    row += a * h;
                }
            }
            acc += amplitudes[i].conj() * row;
        }
        acc.re
    }
}

/// Coordinate `(n, m)` on the two-boson Fock lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteIndex2D {
    pub n: usize,
    pub m: usize,
}

impl SiteIndex2D {
    pub fn new(n: usize, m: usize) -> Self {
        SiteIndex2D { n, m }
    }

    pub fn flatten(self, n_sites: usize) -> usize {
        self.n * n_sites + self.m
    }

    pub fn unflatten(index: usize, n_sites: usize) -> Self {
        SiteIndex2D {
            n: index / n_sites,
            m: index % n_sites,
        }
    }

    pub fn swapped(self) -> Self {
        SiteIndex2D { n: self.m, m: self.n }
    }

    pub fn is_diagonal(self) -> bool {
        self.n == self.m
    }
}

impl fmt::Display for SiteIndex2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n, self.m)
    }
}

/// Index of the central site, the origin of the tilt.
pub fn center_site(n_sites: usize) -> usize {
    n_sites / 2
}

fn offset(site: usize, n_sites: usize) -> f64 {
    site as f64 - center_site(n_sites) as f64
}

fn tilt(fd: f64, site: usize, n_sites: usize) -> f64 {
    fd * offset(site, n_sites)
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::DimensionCap { dim, cap })
    } else {
        Ok(())
    }
}

/// Tilted tight-binding chain with open ends.
pub fn build_single_particle_hamiltonian(n_sites: usize, kappa: f64, fd: f64) -> Result<HermitianOperator> {
    if !(kappa >= 0.0) {
        return Err(Error::invalid(format!("kappa must be ≥ 0, got {kappa}")));
    }
    tilted_chain(
        n_sites,
        kappa,
        fd,
        format!("single(N={n_sites}, kappa={kappa}, fd={fd})"),
    )
}

fn tilted_chain(n_sites: usize, hopping: f64, fd: f64, label: String) -> Result<HermitianOperator> {
    if n_sites < 2 {
        return Err(Error::invalid(format!("n_sites must be ≥ 2, got {n_sites}")));
    }
    if !hopping.is_finite() || !fd.is_finite() {
        return Err(Error::invalid(format!(
            "need finite hopping and fd, got {hopping}, {fd}"
        )));
    }
    check_cap(n_sites, DEFAULT_DIM_CAP)?;
    let mut h = DMatrix::zeros(n_sites, n_sites);
    for n in 0..n_sites {
        h[(n, n)] = tilt(fd, n, n_sites);
        if n + 1 < n_sites {
            h[(n, n + 1)] = -hopping;
            h[(n + 1, n)] = -hopping;
        }
    }
    HermitianOperator::from_matrix(h, label)
}

/// Two-boson Fock lattice with the default dimension cap.
pub fn build_fock_hamiltonian(params: &ModelParams) -> Result<HermitianOperator> {
    build_fock_hamiltonian_with_cap(params, DEFAULT_DIM_CAP)
}

/// Two-boson Fock lattice on `N²` sites.
///
/// Diagonal: `Fd·((n-n₀)+(m-n₀)) + U₀·[n=m] + V·[|n-m|=1]` with `V` the
/// near-diagonal defect. Nearest-neighbour bonds carry `-κ`, or `-κ₁` when
/// selected by [`Kappa1Rule`]. The main diagonal is additionally linked
/// `(n,n)↔(n+1,n+1)` with `-ρ`.
pub fn build_fock_hamiltonian_with_cap(params: &ModelParams, cap: usize) -> Result<HermitianOperator> {
    params.validate()?;
    let n_sites = params.n_sites;
    let dim = n_sites
        .checked_mul(n_sites)
        .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
    check_cap(dim, cap)?;

    let near_diag = params.near_diagonal_energy();
    let on_corrected = |n: usize, m: usize| match params.kappa1_rule {
        Kappa1Rule::MainDiagonalIncident => n == m,
        Kappa1Rule::ThreeDiagonalIncident => n.abs_diff(m) <= 1,
    };
    let idx = |n: usize, m: usize| SiteIndex2D::new(n, m).flatten(n_sites);

    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..n_sites {
        for m in 0..n_sites {
            let mut energy = params.fd * (offset(n, n_sites) + offset(m, n_sites));
            match n.abs_diff(m) {
                0 => energy += params.u0,
                1 => energy += near_diag,
                _ => {}
            }
            h[(idx(n, m), idx(n, m))] = energy;

            for (a, b) in [(n + 1, m), (n, m + 1)] {
                if a >= n_sites || b >= n_sites {
                    continue;
                }
                let rate = if on_corrected(n, m) || on_corrected(a, b) {
                    params.kappa1
                } else {
                    params.kappa
                };
                h[(idx(n, m), idx(a, b))] = -rate;
                h[(idx(a, b), idx(n, m))] = -rate;
            }
        }
        if n + 1 < n_sites {
            h[(idx(n, n), idx(n + 1, n + 1))] = -params.rho;
            h[(idx(n + 1, n + 1), idx(n, n))] = -params.rho;
        }
    }

    HermitianOperator::from_matrix(
        h,
        format!(
            "fock(N={}, kappa={}, kappa1={}, rho={}, u0={}, near_diag={}, fd={})",
            n_sites, params.kappa, params.kappa1, params.rho, params.u0, near_diag, params.fd
        ),
    )
}

/// Hopping rate of a bound pair: second-order tunnelling `-2κ²/U₀` plus direct pair hopping `ρ`.
pub fn kappa_eff(kappa: f64, rho: f64, u0: f64) -> Result<f64> {
    if u0 == 0.0 {
        return Err(Error::SingularParameter(
            "u0 = 0: second-order pair tunnelling diverges".into(),
        ));
    }
    Ok(-2.0 * kappa * kappa / u0 + rho)
}

/// Single-particle chain with `κ → κ_eff` and `Fd → 2Fd`.
pub fn build_effective_hamiltonian(params: &ModelParams) -> Result<HermitianOperator> {
    params.validate()?;
    let k_eff = kappa_eff(params.kappa, params.rho, params.u0)?;
    let fd2 = 2.0 * params.fd;
    tilted_chain(
        params.n_sites,
        k_eff,
        fd2,
        format!("effective(N={}, kappa_eff={k_eff}, fd2={fd2})", params.n_sites),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(h: &HermitianOperator) -> Vec<Vec<f64>> {
        let d = h.dim();
        (0..d).map(|i| (0..d).map(|j| h.matrix()[(i, j)]).collect()).collect()
    }

    #[test]
    fn single_particle_without_tilt() {
        let h = build_single_particle_hamiltonian(3, 1.0, 0.0).unwrap();
        assert_eq!(
            dense(&h),
            vec![vec![0.0, -1.0, 0.0], vec![-1.0, 0.0, -1.0], vec![0.0, -1.0, 0.0]]
        );
    }

    #[test]
    fn single_particle_pure_tilt_is_centered() {
        let h = build_single_particle_hamiltonian(3, 0.0, 1.0).unwrap();
        assert_eq!(
            dense(&h),
            vec![vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]
        );
    }

    #[test]
    fn single_particle_rejects_bad_sizes() {
        assert!(matches!(
            build_single_particle_hamiltonian(0, 1.0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_single_particle_hamiltonian(1, 1.0, 0.0).is_err());
        assert!(build_single_particle_hamiltonian(4, -0.1, 0.0).is_err());
    }

    #[test]
    fn fock_two_by_two_hand_enumerated() {
        let mut p = ModelParams::photonic(1.0, 0.0, 5.0, 0.0, 2);
        p.kappa1 = 1.0;
        let h = build_fock_hamiltonian(&p).unwrap();
        // sites: 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1)
        assert_eq!(
            dense(&h),
            vec![
                vec![5.0, -1.0, -1.0, 0.0],
                vec![-1.0, 0.0, 0.0, -1.0],
                vec![-1.0, 0.0, 0.0, -1.0],
                vec![0.0, -1.0, -1.0, 5.0],
            ]
        );
    }

    #[test]
    fn fock_rho_links_diagonal_neighbours() {
        let p = ModelParams::photonic(0.5, 0.3, -4.0, 0.0, 3);
        let h = build_fock_hamiltonian(&p).unwrap();
        let i = |n, m| SiteIndex2D::new(n, m).flatten(3);
        assert_eq!(h.matrix()[(i(0, 0), i(1, 1))], -0.3);
        assert_eq!(h.matrix()[(i(2, 2), i(1, 1))], -0.3);
        assert_eq!(h.matrix()[(i(0, 1), i(1, 2))], 0.0);
        assert_eq!(h.matrix()[(i(1, 1), i(1, 1))], -4.0);
    }

    #[test]
    fn kappa1_rules_differ_only_off_the_main_diagonal() {
        let mut p = ModelParams::from_ebh(2.0, 0.1, 1.5, 0.2, 5);
        let main = build_fock_hamiltonian(&p).unwrap();
        p.kappa1_rule = Kappa1Rule::ThreeDiagonalIncident;
        let three = build_fock_hamiltonian(&p).unwrap();
        let i = |n, m| SiteIndex2D::new(n, m).flatten(5);
        assert_eq!(main.matrix()[(i(1, 1), i(1, 2))], -p.kappa1);
        assert_eq!(three.matrix()[(i(1, 1), i(1, 2))], -p.kappa1);
        assert_eq!(main.matrix()[(i(1, 2), i(1, 3))], -p.kappa);
        assert_eq!(three.matrix()[(i(1, 2), i(1, 3))], -p.kappa1);
        assert_eq!(three.matrix()[(i(0, 3), i(0, 4))], -p.kappa);
    }

    #[test]
    fn fock_respects_dimension_cap() {
        let p = ModelParams::photonic(1.0, 0.0, 1.0, 0.0, 10);
        match build_fock_hamiltonian_with_cap(&p, 99) {
            Err(Error::DimensionCap { dim, cap }) => assert_eq!((dim, cap), (100, 99)),
            other => panic!("expected cap error, got {other:?}"),
        }
        assert!(build_fock_hamiltonian_with_cap(&p, 100).is_ok());
    }

    #[test]
    fn ebh_parameterization_is_self_consistent() {
        let p = ModelParams::from_ebh(3.0, 0.2, -2.0, 0.1, 6);
        p.validate().unwrap();
        assert!((p.kappa - 0.3).abs() < 1e-15);
        assert!((p.rho - 0.16).abs() < 1e-15);
        assert!((p.near_diagonal_energy() - 2.0 * 0.04 * -2.0).abs() < 1e-15);

        let mut bad = p.clone();
        bad.rho = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.near_diagonal_defect = Some(1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn photonic_mode_has_no_near_diagonal_defect() {
        let p = ModelParams::photonic(0.95, 0.3, -4.0, 0.0, 15);
        assert_eq!(p.near_diagonal_energy(), 0.0);
        let mut q = p.clone();
        q.near_diagonal_defect = Some(-0.1);
        assert_eq!(q.near_diagonal_energy(), -0.1);
    }

    #[test]
    fn kappa_eff_values() {
        let k = kappa_eff(0.95, 0.3, -4.0).unwrap();
        assert!((k - 0.75125).abs() < 1e-12);
        assert_eq!(kappa_eff(0.0, 0.3, -4.0).unwrap(), 0.3);
        assert!(matches!(kappa_eff(1.0, 0.3, 0.0), Err(Error::SingularParameter(_))));

        // J = U₀ in the ε-parameterization collapses to -(5/2)U₀ε².
        let (u0, eps) = (1.7, 0.08);
        let p = ModelParams::from_ebh(u0, eps, u0, 0.0, 4);
        let k = kappa_eff(p.kappa, p.rho, p.u0).unwrap();
        assert!((k - (-2.5 * u0 * eps * eps)).abs() < 1e-15);
        // and in general to -ε²J²/(2U₀) - 2U₀ε²
        let (j, u0, eps) = (2.3, -0.9, 0.11);
        let p = ModelParams::from_ebh(j, eps, u0, 0.0, 4);
        let expect = -eps * eps * j * j / (2.0 * u0) - 2.0 * u0 * eps * eps;
        assert!((kappa_eff(p.kappa, p.rho, p.u0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn effective_hamiltonian_paper_values() {
        let p = ModelParams::photonic(0.95, 0.3, -4.0, 0.4833, 15);
        let h = build_effective_hamiltonian(&p).unwrap();
        assert_eq!(h.dim(), 15);
        assert!((h.matrix()[(3, 4)] + 0.75125).abs() < 1e-12);
        assert!((h.matrix()[(8, 8)] - h.matrix()[(7, 7)] - 0.9666).abs() < 1e-12);

        let q = ModelParams::photonic(0.0, 0.3, -4.0, 0.0, 15);
        let h = build_effective_hamiltonian(&q).unwrap();
        assert_eq!(h.matrix()[(0, 1)], -0.3);

        let zero = ModelParams::photonic(0.95, 0.3, 0.0, 0.0, 15);
        assert!(matches!(
            build_effective_hamiltonian(&zero),
            Err(Error::SingularParameter(_))
        ));
    }

    #[test]
    fn site_index_round_trip() {
        for n_sites in [2usize, 3, 7] {
            for index in 0..n_sites * n_sites {
                let s = SiteIndex2D::unflatten(index, n_sites);
                assert!(s.n < n_sites && s.m < n_sites);
                assert_eq!(s.flatten(n_sites), index);
            }
        }
    }

    #[test]
    fn from_matrix_rejects_asymmetric_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(HermitianOperator::from_matrix(m, "x").is_err());
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 0.0]);
        assert!(matches!(
            HermitianOperator::from_matrix(m, "x"),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
    }
}
