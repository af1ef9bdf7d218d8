//! Closed-form and brute-force oracles.
//!
//! These are deliberately separate code paths from `model` and `propagator`,
//! so simulations can be checked against them at run time as well as in tests.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Kappa1Rule, ModelParams, SiteIndex2D};

/// Inputs of the analytic Wannier-Stark breathing solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOracleParams {
    pub kappa: f64,
    pub fd: f64,
    pub z: f64,
    /// Site offset from the excited site.
    pub n: i64,
}

/// Bessel function of the first kind `J_n(x)` for integer order.
///
/// Miller's downward recurrence, normalized with `J₀ + 2ΣJ_{2k} = 1`.
pub fn bessel_j(order: i64, x: f64) -> f64 {
    if order < 0 {
        let v = bessel_j(-order, x);
        return if order % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(order, -x);
        return if order % 2 == 0 { v } else { -v };
    }
    let n = order as usize;
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }

    let top = n.max(x.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;

    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut wanted = 0.0;
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds the unnormalized J_{k-1}
        if k - 1 == n {
            wanted = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            sum += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            wanted *= 1e-250;
            sum *= 1e-250;
        }
    }
    sum += cur;
    wanted / sum
}

/// `|A_n(z)| = |J_n(ζ)|`, `ζ = (4κ/Fd)·|sin(Fd·z/2)|`, for an infinite tilted chain
/// excited on a single site.
pub fn analytic_ws_amplitude(p: &BesselOracleParams) -> Result<f64> {
    if !(p.fd > 0.0) {
        return Err(Error::invalid(format!(
            "analytic breathing solution needs fd > 0, got {}",
            p.fd
        )));
    }
    Ok(bessel_j(p.n, breathing_argument(p.kappa, p.fd, p.z)).abs())
}

/// Bessel argument `ζ(z)` of the breathing solution.
pub fn breathing_argument(kappa: f64, fd: f64, z: f64) -> f64 {
    4.0 * kappa / fd * (fd * z / 2.0).sin().abs()
}

/// Populations `(cos²κz, sin²κz)` of a directional coupler launched in one arm.
pub fn two_site_coupler(kappa: f64, z: f64) -> (f64, f64) {
    let c = (kappa * z).cos();
    let p_in = c * c;
    (p_in, 1.0 - p_in)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bond {
    pub a: SiteIndex2D,
    pub b: SiteIndex2D,
    pub amplitude: f64,
}

/// Non-zero bonds and all on-site energies of the Fock lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockBondList {
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    pub energies: Vec<(SiteIndex2D, f64)>,
}

impl FockBondList {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let dim = self.n_sites * self.n_sites;
        let mut h = DMatrix::zeros(dim, dim);
        for &(site, e) in &self.energies {
            let i = site.flatten(self.n_sites);
            h[(i, i)] += e;
        }
        for bond in &self.bonds {
            let (i, j) = (bond.a.flatten(self.n_sites), bond.b.flatten(self.n_sites));
            h[(i, j)] += bond.amplitude;
            h[(j, i)] += bond.amplitude;
        }
        h
    }
}

/// Lists every Fock-lattice coupling by testing all unordered site pairs against
/// the lattice rules.
pub fn enumerate_fock_bonds(params: &ModelParams) -> Result<FockBondList> {
    params.validate()?;
    let n_sites = params.n_sites;
    let origin = (n_sites / 2) as f64;
    let near_diag = params
        .near_diagonal_defect
        .unwrap_or_else(|| params.eps.map_or(0.0, |e| 2.0 * params.u0 * e * e));

    let sites: Vec<SiteIndex2D> = (0..n_sites)
        .flat_map(|n| (0..n_sites).map(move |m| SiteIndex2D::new(n, m)))
        .collect();

    let energies = sites
        .iter()
        .map(|s| {
            let gap = (s.n as i64 - s.m as i64).abs();
            let defect = match gap {
                0 => params.u0,
                1 => near_diag,
                _ => 0.0,
            };
            (*s, params.fd * ((s.n as f64 - origin) + (s.m as f64 - origin)) + defect)
        })
        .collect();

    let corrected = |s: &SiteIndex2D| {
        let gap = (s.n as i64 - s.m as i64).abs();
        match params.kappa1_rule {
            Kappa1Rule::MainDiagonalIncident => gap == 0,
            Kappa1Rule::ThreeDiagonalIncident => gap <= 1,
        }
    };

    let mut bonds = Vec::new();
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            let dn = b.n as i64 - a.n as i64;
            let dm = b.m as i64 - a.m as i64;
            let amplitude = if dn.abs() + dm.abs() == 1 {
                if corrected(a) || corrected(b) {
                    -params.kappa1
                } else {
                    -params.kappa
                }
            } else if dn.abs() == 1 && dn == dm && a.is_diagonal() {
                -params.rho
            } else {
                continue;
            };
            if amplitude != 0.0 {
                bonds.push(Bond {
                    a: *a,
                    b: *b,
                    amplitude,
                });
            }
        }
    }

    Ok(FockBondList {
        n_sites,
        bonds,
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::f64::consts::PI;

    /// Σ_k (-1)^k (x/2)^{2k+n} / (k! (k+n)!)
    fn bessel_series(n: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..200 {
            term *= -half * half / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for n in 0..25u32 {
            for &x in &[0.01, 0.5, 1.0, 2.404825557695773, 5.0, 7.863, 10.0] {
                let a = bessel_j(n as i64, x);
                let b = bessel_series(n, x);
                assert!((a - b).abs() < 1e-12, "J_{n}({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn bessel_known_values() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert!(bessel_j(0, 2.404825557695773).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.44005058574493355).abs() < 1e-15);
        assert!((bessel_j(-1, 1.0) + 0.44005058574493355).abs() < 1e-15);
        assert!((bessel_j(2, -1.0) - bessel_j(2, 1.0)).abs() < 1e-16);
    }

    #[test]
    fn breathing_amplitude_revives() {
        let (kappa, fd) = (0.95, 0.4833);
        let at = |z: f64, n: i64| analytic_ws_amplitude(&BesselOracleParams { kappa, fd, z, n }).unwrap();
        assert_eq!(at(0.0, 0), 1.0);
        assert_eq!(at(0.0, 2), 0.0);
        let period = 2.0 * PI / fd;
        assert!((at(period, 0) - 1.0).abs() < 1e-12);
        assert!(at(period, 1) < 1e-12);

        let zeta = breathing_argument(kappa, fd, 6.5);
        assert!((zeta - 4.0 * 0.95 / 0.4833 * (0.4833f64 * 3.25).sin()).abs() < 1e-15);
        assert!((zeta - 7.863).abs() < 1e-3);
        assert!((at(6.5, 0) - bessel_series(0, zeta).abs()).abs() < 1e-12);

        assert!(analytic_ws_amplitude(&BesselOracleParams {
            kappa,
            fd: 0.0,
            z: 1.0,
            n: 0
        })
        .is_err());
    }

    #[test]
    fn coupler_closed_form() {
        assert_eq!(two_site_coupler(0.0, 3.0), (1.0, 0.0));
        let (a, b) = two_site_coupler(1.0, PI / 4.0);
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let (a, b) = two_site_coupler(0.95, 1.0);
        assert!((a - 0.95f64.cos().powi(2)).abs() < 1e-15);
        assert!((b - 0.95f64.sin().powi(2)).abs() < 1e-15);
        assert_eq!(a + b, 1.0);
    }

    #[test]
    fn bonds_of_two_by_two_lattice() {
        let list = enumerate_fock_bonds(&ModelParams::photonic(1.0, 0.0, 0.0, 0.0, 2)).unwrap();
        assert_eq!(list.bonds.len(), 4);
        assert!(list.bonds.iter().all(|b| b.amplitude == -1.0));
        assert_eq!(list.energies.len(), 4);
        assert!(list.energies.iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn bonds_of_three_by_three_lattice() {
        let list = enumerate_fock_bonds(&ModelParams::photonic(0.5, 0.1, 1.0, 0.0, 3)).unwrap();
        let s = SiteIndex2D::new;
        for (a, b) in [(s(0, 0), s(1, 1)), (s(1, 1), s(2, 2))] {
            assert!(list.bonds.contains(&Bond { a, b, amplitude: -0.1 }));
        }
        for n in 0..3 {
            assert!(list.energies.contains(&(s(n, n), 1.0)));
        }
        // 12 nearest-neighbour bonds plus 2 pair bonds
        assert_eq!(list.bonds.len(), 14);
    }

    #[test]
    fn each_bond_is_listed_once() {
        let list = enumerate_fock_bonds(&ModelParams::photonic(0.95, 0.3, -4.0, 0.2, 6)).unwrap();
        let mut seen = HashSet::new();
        for b in &list.bonds {
            let key = if b.a < b.b { (b.a, b.b) } else { (b.b, b.a) };
            assert!(seen.insert(key), "duplicate bond {key:?}");
        }
        let h = list.to_matrix();
        assert_eq!(h, h.transpose());
    }
}
