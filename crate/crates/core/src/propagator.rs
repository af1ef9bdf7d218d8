//! Exact evolution `ψ(z) = exp(-iHz)·ψ(0)` by spectral synthesis.
//!
//! The generator is diagonalized once (`H = V·diag(E)·Vᵀ`, V real orthogonal),
//! the initial state is projected onto the eigenbasis, and every sample is
//! rebuilt as `V·(e^{-iE z} ⊙ Vᵀψ₀)`. There is no step error: the samples are
//! unitary to rounding and independent of the sampling step.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::HermitianOperator;
use crate::observables::ObservableSeries;

/// Accepted deviation of `Σ|a|²` from one.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Complex amplitudes over lattice sites (flattened `n·N + m` for the Fock lattice).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("state vector must be non-empty"));
        }
        let norm = norm_sqr(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector { amplitudes })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        StateVector::new(amplitudes)
    }

    /// Single-site excitation `δ_{i,site}`.
    pub fn basis(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::invalid(format!("site {site} outside dimension {dim}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        StateVector::new(amplitudes)
    }

    /// Equal-weight, equal-phase superposition of the given sites.
    pub fn superposition(dim: usize, sites: &[usize]) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("no excitation sites given"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        for &site in sites {
            if site >= dim {
                return Err(Error::invalid(format!("site {site} outside dimension {dim}")));
            }
            amplitudes[site] += Complex64::new(1.0, 0.0);
        }
        StateVector::normalized(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn norm_sqr(amplitudes: &[Complex64]) -> f64 {
    amplitudes.iter().map(|a| a.norm_sqr()).sum()
}

/// Sampled evolution along the propagation distance.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub z_samples: Vec<f64>,
    pub states: Vec<StateVector>,
    pub generator_id: String,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.z_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_samples.is_empty()
    }

    pub fn initial(&self) -> &StateVector {
        &self.states[0]
    }
}

/// Sample positions `0, dz, 2dz, …` up to and including `z_max` (within 10⁻⁹·dz).
pub fn z_grid(z_max: f64, dz: f64) -> Result<Vec<f64>> {
    if !(dz > 0.0) || !(dz <= z_max) || !z_max.is_finite() {
        return Err(Error::invalid(format!(
            "need 0 < dz ≤ z_max, got dz = {dz}, z_max = {z_max}"
        )));
    }
    let steps = (z_max / dz + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dz).collect())
}

/// Eigendecomposition of a generator, reusable for any initial state and distance.
#[derive(Debug, Clone)]
pub struct PropagationPlan {
    energies: DVector<f64>,
    basis: DMatrix<f64>,
    label: String,
}

impl PropagationPlan {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        let m = h.matrix();
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::NonFinite {
                row: pos % m.nrows(),
                col: pos / m.nrows(),
            });
        }
        let eig = m
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::Numeric(format!("eigendecomposition of {} did not converge", h.label())))?;
        Ok(PropagationPlan {
            energies: eig.eigenvalues,
            basis: eig.eigenvectors,
            label: h.label().to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    fn project(&self, psi0: &StateVector) -> Result<(DVector<f64>, DVector<f64>)> {
        if psi0.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                operator: self.dim(),
                state: psi0.dim(),
            });
        }
        let re = DVector::from_iterator(psi0.dim(), psi0.amplitudes().iter().map(|a| a.re));
        let im = DVector::from_iterator(psi0.dim(), psi0.amplitudes().iter().map(|a| a.im));
        Ok((self.basis.tr_mul(&re), self.basis.tr_mul(&im)))
    }

    fn synthesize(&self, coeff: &(DVector<f64>, DVector<f64>), z: f64) -> StateVector {
        let (cr, ci) = coeff;
        let dim = self.dim();
        let mut wr = DVector::zeros(dim);
        let mut wi = DVector::zeros(dim);
        for k in 0..dim {
            let (s, c) = (-self.energies[k] * z).sin_cos();
            wr[k] = c * cr[k] - s * ci[k];
            wi[k] = c * ci[k] + s * cr[k];
        }
        let re = &self.basis * wr;
        let im = &self.basis * wi;
        StateVector {
            amplitudes: re.iter().zip(im.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect(),
        }
    }

    /// `exp(-iHz)·ψ₀` at a single distance.
    pub fn state_at(&self, psi0: &StateVector, z: f64) -> Result<StateVector> {
        let coeff = self.project(psi0)?;
        Ok(self.synthesize(&coeff, z))
    }

    /// Evolves `psi0` to each of the given distances.
    pub fn evolve(&self, psi0: &StateVector, z_samples: &[f64]) -> Result<Trajectory> {
        let coeff = self.project(psi0)?;
        let states = z_samples
            .iter()
            .map(|&z| {
                if z == 0.0 {
                    psi0.clone()
                } else {
                    self.synthesize(&coeff, z)
                }
            })
            .collect();
        Ok(Trajectory {
            z_samples: z_samples.to_vec(),
            states,
            generator_id: self.label.clone(),
        })
    }
}

/// Samples `exp(-iHz)·ψ₀` on the grid `0, dz, …, z_max`.
pub fn propagate(h: &HermitianOperator, psi0: &StateVector, z_max: f64, dz: f64) -> Result<Trajectory> {
    if h.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch {
            operator: h.dim(),
            state: psi0.dim(),
        });
    }
    let grid = z_grid(z_max, dz)?;
    PropagationPlan::new(h)?.evolve(psi0, &grid)
}

/// `|ψ_site(z)|²` along the trajectory.
pub fn return_probability(traj: &Trajectory, site: usize) -> Result<ObservableSeries> {
    if site >= traj.dim() {
        return Err(Error::invalid(format!("site {site} outside dimension {}", traj.dim())));
    }
    let values = traj
        .states
        .iter()
        .map(|s| s.amplitudes()[site].norm_sqr().min(1.0))
        .collect();
    ObservableSeries::new(traj.z_samples.clone(), values, format!("return_probability[{site}]"))
}
