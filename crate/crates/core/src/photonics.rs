//! Waveguide-array geometry ↔ lattice-model rates.
//!
//! Coupling constants come from a calibration at a reference spacing. The
//! propagation-constant detuning of the main-diagonal guides plays the role of
//! the on-site interaction, and a constant bend of radius `R` in the plane of the
//! array's main diagonal produces a transverse index gradient, i.e. a tilt
//! `Fd ∝ d_Y / R` where `d_Y` is the site pitch projected on the bending plane.
//!
//! The square array is rotated 45° so that its main diagonal lies in the bending
//! plane: a unit step along either lattice axis moves a guide by `d/√2` in that
//! plane. A planar 1D array bent in its own plane has `d_Y = d`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "n", rename_all = "kebab-case")]
pub enum ArrayShape {
    /// `N×N` guides simulating two bosons on `N` sites.
    Square(usize),
    /// `N` guides in a plane simulating one particle.
    Linear(usize),
}

impl ArrayShape {
    pub fn n_sites(self) -> usize {
        match self {
            ArrayShape::Square(n) | ArrayShape::Linear(n) => n,
        }
    }

    /// Ratio of the in-plane pitch to the guide spacing.
    fn pitch_factor(self) -> f64 {
        match self {
            ArrayShape::Square(_) => 1.0 / SQRT_2,
            ArrayShape::Linear(_) => 1.0,
        }
    }
}

/// Fabrication description of a waveguide array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideArraySpec {
    pub shape: ArrayShape,
    pub spacing_um: f64,
    /// Bend radius in cm; `f64::INFINITY` for straight guides.
    pub bend_radius_cm: f64,
    pub length_cm: f64,
    /// `β - β'` of the main-diagonal guides, cm⁻¹. Negative is attractive.
    pub detuning: f64,
    pub wavelength_nm: f64,
    pub n_eff: f64,
}

impl WaveguideArraySpec {
    pub fn validate(&self) -> Result<()> {
        if self.shape.n_sites() < 2 {
            return Err(Error::invalid("an array needs at least 2 sites per side"));
        }
        if !(self.spacing_um > 0.0 && self.spacing_um.is_finite()) {
            return Err(Error::invalid(format!("spacing must be > 0, got {}", self.spacing_um)));
        }
        if !(self.length_cm > 0.0 && self.length_cm.is_finite()) {
            return Err(Error::invalid(format!("length must be > 0, got {}", self.length_cm)));
        }
        if !(self.bend_radius_cm > 0.0) {
            return Err(Error::invalid(format!(
                "bend radius must be > 0 or infinite, got {}",
                self.bend_radius_cm
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        if !(self.wavelength_nm > 0.0) || !(self.n_eff > 0.0) {
            return Err(Error::invalid("wavelength and effective index must be > 0"));
        }
        Ok(())
    }

    /// Site pitch projected on the bending plane, µm.
    pub fn bending_plane_pitch_um(&self) -> f64 {
        self.spacing_um * self.shape.pitch_factor()
    }

    pub fn is_straight(&self) -> bool {
        self.bend_radius_cm.is_infinite()
    }
}

/// Measured couplings at one spacing, with an optional exponential decay model
/// for other spacings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCalibration {
    pub reference_spacing_um: f64,
    /// Nearest-neighbour coupling, cm⁻¹.
    pub kappa_ref: f64,
    /// Second-neighbour (diagonal) coupling, cm⁻¹.
    pub rho_ref: f64,
    /// Decay constant of the coupling with guide separation, µm⁻¹.
    pub decay_gamma: Option<f64>,
}

impl CouplingCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_spacing_um > 0.0) {
            return Err(Error::invalid("calibration spacing must be > 0"));
        }
        if !(self.kappa_ref >= 0.0) || !(self.rho_ref >= 0.0) {
            return Err(Error::invalid("calibrated couplings must be ≥ 0"));
        }
        if let Some(g) = self.decay_gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("decay_gamma must be > 0, got {g}")));
            }
        }
        Ok(())
    }

    pub fn requires_extrapolation(&self, spacing_um: f64) -> bool {
        (spacing_um - self.reference_spacing_um).abs() > 1e-9 * self.reference_spacing_um
    }

    /// `(κ, ρ)` at the given spacing. Second neighbours of a square array sit at
    /// `d√2`, so `ρ` decays `√2` times faster with `d` than `κ`.
    pub fn couplings(&self, spacing_um: f64) -> Result<(f64, f64)> {
        if !self.requires_extrapolation(spacing_um) {
            return Ok((self.kappa_ref, self.rho_ref));
        }
        let gamma = self.decay_gamma.ok_or_else(|| {
            Error::invalid(format!(
                "spacing {spacing_um} µm differs from the calibrated {} µm and no decay_gamma is set",
                self.reference_spacing_um
            ))
        })?;
        let dd = spacing_um - self.reference_spacing_um;
        Ok((
            self.kappa_ref * (-gamma * dd).exp(),
            self.rho_ref * (-gamma * SQRT_2 * dd).exp(),
        ))
    }
}

/// A measured refocusing length of the bound pair in a bent square array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceCalibration {
    pub l_foc_cm: f64,
    pub bend_radius_cm: f64,
    pub spacing_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ForceMode {
    /// Scale from a measured pair refocus: the pair tilt `2Fd` makes it revive
    /// after `2π/(2Fd) = L_foc`.
    Calibrated(ForceCalibration),
    /// `Fd = 2π·n_eff·d_Y/(λ·R)`, uncalibrated against any measurement.
    FirstPrinciples,
}

/// Tilt per site `Fd` (cm⁻¹) produced by the array's bend. Zero for straight arrays.
pub fn curvature_to_force(spec: &WaveguideArraySpec, mode: &ForceMode) -> Result<f64> {
    spec.validate()?;
    if spec.is_straight() {
        return Ok(0.0);
    }
    let r = spec.bend_radius_cm;
    match mode {
        ForceMode::Calibrated(cal) => {
            if !(cal.l_foc_cm > 0.0)
                || !(cal.bend_radius_cm > 0.0 && cal.bend_radius_cm.is_finite())
                || !(cal.spacing_um > 0.0)
            {
                return Err(Error::invalid(
                    "force calibration needs a positive L_foc, finite radius and spacing",
                ));
            }
            let fd_cal = PI / cal.l_foc_cm;
            let pitch_cal = cal.spacing_um * ArrayShape::Square(2).pitch_factor();
            Ok(fd_cal * (cal.bend_radius_cm / r) * (spec.bending_plane_pitch_um() / pitch_cal))
        }
        ForceMode::FirstPrinciples => {
            let pitch_cm = spec.bending_plane_pitch_um() * 1e-4;
            let lambda_cm = spec.wavelength_nm * 1e-7;
            Ok(2.0 * PI * spec.n_eff * pitch_cm / (lambda_cm * r))
        }
    }
}

/// Bend radius giving a planar array the same per-site force as a square array
/// bent along its diagonal with radius `r_square`.
pub fn project_single_particle_radius(r_square: f64) -> Result<f64> {
    if !(r_square > 0.0 && r_square.is_finite()) {
        return Err(Error::invalid(format!("radius must be finite and > 0, got {r_square}")));
    }
    Ok(r_square * SQRT_2)
}

/// Lattice-model rates of a fabricated array.
///
/// Square arrays map `κ̄ → κ = κ₁`, `ρ̄ → ρ`, `Δβ → U₀`; planar arrays keep only `κ`.
pub fn waveguide_to_model(
    spec: &WaveguideArraySpec,
    cal: &CouplingCalibration,
    force: &ForceMode,
) -> Result<ModelParams> {
    spec.validate()?;
    cal.validate()?;
    let (kappa, rho) = cal.couplings(spec.spacing_um)?;
    let fd = curvature_to_force(spec, force)?;
    let params = match spec.shape {
        ArrayShape::Square(n) => ModelParams::photonic(kappa, rho, spec.detuning, fd, n),
        ArrayShape::Linear(n) => ModelParams::photonic(kappa, 0.0, 0.0, fd, n),
    };
    params.validate()?;
    Ok(params)
}
