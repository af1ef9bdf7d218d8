//! Scenario configs, built-in presets and the batch runner.
//!
//! A scenario is a TOML file with a `[scenario]` section and exactly one
//! parameter source: either `[params]` (rates given directly, or derived from
//! `j_hop`/`eps`) or `[waveguide]` + `[calibration]` + `[force]` (fabrication
//! geometry). Unknown keys are rejected. See `docs/config.md` for the schema.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_effective_hamiltonian, build_fock_hamiltonian_with_cap, build_single_particle_hamiltonian, center_site,
    kappa_eff, HermitianOperator, Kappa1Rule, ModelParams, SiteIndex2D,
};
use crate::observables::{
    breathing_width, diagonal_confinement, edge_population, find_refocus, participation_ratio,
    period_from_width_maximum, site_population, wannier_stark_spacing, Geometry, ObservableSeries, Populations,
    RefocusReport, DEFAULT_REFOCUS_THRESHOLD, DEFAULT_TRUNCATION_TOLERANCE,
};
use crate::output::{write_observables_csv, write_trajectory_csv};
use crate::photonics::{
    project_single_particle_radius, waveguide_to_model, ArrayShape, CouplingCalibration, ForceCalibration, ForceMode,
    WaveguideArraySpec,
};
use crate::propagator::{propagate, StateVector, Trajectory};
use crate::reference::{analytic_ws_amplitude, enumerate_fock_bonds, BesselOracleParams};
use crate::render::{render_heatmap, HeatmapAxis, Normalization};

pub const DEFAULT_DZ_CM: f64 = 0.01;
pub const DEFAULT_N_EFF: f64 = 1.45;
pub const DEFAULT_WAVELENGTH_NM: f64 = 633.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Two bosons on the Fock lattice.
    Fock,
    /// One particle on a chain.
    Single,
    /// Bound pair as one particle with `κ_eff` and `2Fd`.
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    Return,
    Confinement,
    Width,
    Participation,
    Edge,
    Spectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub model: ModelKind,
    /// Defaults to the array length when the source is a waveguide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_cm: Option<f64>,
    /// Excited sites: `[n]` on a chain, `[n, m]` on the Fock lattice. Defaults to
    /// the central site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<ObservableKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd: Option<f64>,
    pub n_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_hop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_diagonal_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1_rule: Option<Kappa1Rule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Square,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideSection {
    pub shape: ShapeKind,
    pub n: usize,
    pub spacing_um: f64,
    /// `inf` for straight guides.
    pub bend_radius_cm: f64,
    pub length_cm: f64,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub reference_spacing_um: f64,
    pub kappa: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceModeKind {
    Calibrated,
    FirstPrinciples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    pub mode: ForceModeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_foc_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_um: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_diagonal_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1_rule: Option<Kappa1Rule>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refocus_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    /// Distances at which full `N×N` frames of the Fock lattice are written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices_cm: Option<Vec<f64>>,
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveguide: Option<WaveguideSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<ForceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<OverridesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderSection>,
}

/// Line (1-based) of `key` inside `[section]`, else of the section header, else 0.
fn key_line(src: Option<&str>, section: &str, key: Option<&str>) -> usize {
    let Some(src) = src else { return 0 };
    let mut current = String::new();
    let mut header = 0;
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some(rest) = key.and_then(|k| t.strip_prefix(k)) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    header
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl ScenarioConfig {
    /// Parses and validates a scenario. Errors carry the offending line.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(src).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of_offset(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        config.resolve_with_source(Some(src))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.resolve_with_source(None)
    }

    fn resolve_with_source(&self, src: Option<&str>) -> Result<ResolvedScenario> {
        let err = |section: &str, key: Option<&str>, message: String| Error::Config {
            line: key_line(src, section, key),
            message,
        };
        let s = &self.scenario;

        let (mut params, extrapolated, length) = match (&self.params, &self.waveguide) {
            (Some(_), Some(_)) => {
                return Err(err(
                    "waveguide",
                    None,
                    "give exactly one parameter source: [params] or [waveguide], not both".into(),
                ))
            }
            (None, None) => {
                return Err(err(
                    "scenario",
                    None,
                    "missing parameter source: add a [params] or [waveguide] section".into(),
                ))
            }
            (Some(p), None) => {
                if self.calibration.is_some() || self.force.is_some() {
                    return Err(err(
                        "params",
                        None,
                        "[calibration] and [force] only apply to a [waveguide] source".into(),
                    ));
                }
                (self.direct_params(p, &err)?, false, None)
            }
            (None, Some(w)) => {
                let (spec, cal, force) = self.waveguide_parts(w, &err)?;
                if matches!((s.model, spec.shape), (ModelKind::Single, ArrayShape::Square(_))) {
                    return Err(err(
                        "waveguide",
                        Some("shape"),
                        "model 'single' needs a linear array".into(),
                    ));
                }
                if s.model != ModelKind::Single && matches!(spec.shape, ArrayShape::Linear(_)) {
                    return Err(err(
                        "waveguide",
                        Some("shape"),
                        "pair models need a square array".into(),
                    ));
                }
                let params =
                    waveguide_to_model(&spec, &cal, &force).map_err(|e| err("waveguide", None, e.to_string()))?;
                let extrapolated = cal.requires_extrapolation(spec.spacing_um);
                (params, extrapolated, Some(spec.length_cm))
            }
        };

        if let Some(o) = &self.overrides {
            if let Some(rho) = o.rho {
                params.rho = rho;
            }
            if let Some(k1) = o.kappa1 {
                params.kappa1 = k1;
            }
            if let Some(v) = o.near_diagonal_defect {
                params.near_diagonal_defect = Some(v);
            }
            if let Some(rule) = o.kappa1_rule {
                params.kappa1_rule = rule;
            }
        }
        params.validate().map_err(|e| {
            err(
                if self.params.is_some() { "params" } else { "overrides" },
                None,
                e.to_string(),
            )
        })?;
        if s.model == ModelKind::Effective && params.u0 == 0.0 {
            return Err(err("scenario", Some("model"), "model 'effective' needs u0 ≠ 0".into()));
        }

        let z_max = s
            .z_max_cm
            .or(length)
            .ok_or_else(|| err("scenario", None, "z_max_cm is required with a [params] source".into()))?;
        let dz = s.dz_cm.unwrap_or(DEFAULT_DZ_CM);
        if !(z_max > 0.0 && z_max.is_finite()) {
            return Err(err(
                "scenario",
                Some("z_max_cm"),
                format!("z_max_cm must be > 0, got {z_max}"),
            ));
        }
        if !(dz > 0.0 && dz <= z_max) {
            return Err(err(
                "scenario",
                Some("dz_cm"),
                format!("need 0 < dz_cm ≤ z_max_cm, got {dz}"),
            ));
        }

        let n = params.n_sites;
        let excitation = match &s.excitation {
            None => vec![match s.model {
                ModelKind::Fock => SiteIndex2D::new(center_site(n), center_site(n)).flatten(n),
                _ => center_site(n),
            }],
            Some(sites) if sites.is_empty() => {
                return Err(err("scenario", Some("excitation"), "excitation list is empty".into()))
            }
            Some(sites) => sites
                .iter()
                .map(|site| match (s.model, site.as_slice()) {
                    (ModelKind::Fock, &[a, b]) if a < n && b < n => Ok(SiteIndex2D::new(a, b).flatten(n)),
                    (ModelKind::Single | ModelKind::Effective, &[a]) if a < n => Ok(a),
                    _ => Err(err(
                        "scenario",
                        Some("excitation"),
                        format!("excitation site {site:?} is not a valid site of this {n}-site lattice"),
                    )),
                })
                .collect::<Result<_>>()?,
        };

        let applicable = |o: &ObservableKind| match o {
            ObservableKind::Confinement => s.model == ModelKind::Fock,
            ObservableKind::Spectrum => s.model != ModelKind::Fock,
            _ => true,
        };
        let observables = match &s.observables {
            None => [
                ObservableKind::Return,
                ObservableKind::Confinement,
                ObservableKind::Width,
                ObservableKind::Participation,
                ObservableKind::Edge,
                ObservableKind::Spectrum,
            ]
            .into_iter()
            .filter(applicable)
            .collect(),
            Some(list) => {
                if let Some(bad) = list.iter().find(|o| !applicable(o)) {
                    return Err(err(
                        "scenario",
                        Some("observables"),
                        format!("observable {bad:?} does not apply to model {:?}", s.model),
                    ));
                }
                list.clone()
            }
        };

        let analysis = self.analysis.clone().unwrap_or_default();
        let threshold = analysis.refocus_threshold.unwrap_or(DEFAULT_REFOCUS_THRESHOLD);
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(err(
                "analysis",
                Some("refocus_threshold"),
                format!("must lie in (0, 1), got {threshold}"),
            ));
        }
        let tolerance = analysis.truncation_tolerance.unwrap_or(DEFAULT_TRUNCATION_TOLERANCE);
        if !(tolerance > 0.0) {
            return Err(err(
                "analysis",
                Some("truncation_tolerance"),
                format!("must be > 0, got {tolerance}"),
            ));
        }
        let render = self.render.clone().unwrap_or_default();
        let slices = render.slices_cm.unwrap_or_default();
        if slices.iter().any(|z| !(*z >= 0.0 && *z <= z_max)) {
            return Err(err(
                "render",
                Some("slices_cm"),
                format!("slices must lie in [0, {z_max}]"),
            ));
        }
        if !slices.is_empty() && s.model != ModelKind::Fock {
            return Err(err("render", Some("slices_cm"), "full slices need model 'fock'".into()));
        }

        Ok(ResolvedScenario {
            name: s.name.clone(),
            model: s.model,
            params,
            extrapolated,
            excitation,
            z_max,
            dz,
            observables,
            refocus_threshold: threshold,
            truncation_tolerance: tolerance,
            normalization: render.normalization.unwrap_or_default(),
            slices_cm: slices,
        })
    }

    fn direct_params(
        &self,
        p: &ParamsSection,
        err: &impl Fn(&str, Option<&str>, String) -> Error,
    ) -> Result<ModelParams> {
        let u0 = p.u0.unwrap_or(0.0);
        let fd = p.fd.unwrap_or(0.0);
        let mut params = match (p.j_hop, p.eps) {
            (Some(j), Some(eps)) => {
                let mut derived = ModelParams::from_ebh(j, eps, u0, fd, p.n_sites);
                // explicit rates must agree with the derived ones; validate() checks
                derived.kappa = p.kappa.unwrap_or(derived.kappa);
                derived.kappa1 = p.kappa1.unwrap_or(derived.kappa1);
                derived.rho = p.rho.unwrap_or(derived.rho);
                derived
            }
            (None, None) => {
                let kappa = p.kappa.ok_or_else(|| {
                    err(
                        "params",
                        None,
                        "kappa is required unless j_hop and eps are given".into(),
                    )
                })?;
                let mut direct = ModelParams::photonic(kappa, p.rho.unwrap_or(0.0), u0, fd, p.n_sites);
                direct.kappa1 = p.kappa1.unwrap_or(kappa);
                direct
            }
            _ => {
                return Err(err(
                    "params",
                    Some(if p.eps.is_some() { "eps" } else { "j_hop" }),
                    "j_hop and eps must be given together".into(),
                ))
            }
        };
        params.near_diagonal_defect = p.near_diagonal_defect;
        params.kappa1_rule = p.kappa1_rule.unwrap_or_default();
        params.validate().map_err(|e| err("params", None, e.to_string()))?;
        Ok(params)
    }

    fn waveguide_parts(
        &self,
        w: &WaveguideSection,
        err: &impl Fn(&str, Option<&str>, String) -> Error,
    ) -> Result<(WaveguideArraySpec, CouplingCalibration, ForceMode)> {
        let spec = WaveguideArraySpec {
            shape: match w.shape {
                ShapeKind::Square => ArrayShape::Square(w.n),
                ShapeKind::Linear => ArrayShape::Linear(w.n),
            },
            spacing_um: w.spacing_um,
            bend_radius_cm: w.bend_radius_cm,
            length_cm: w.length_cm,
            detuning: w.detuning,
            wavelength_nm: w.wavelength_nm.unwrap_or(DEFAULT_WAVELENGTH_NM),
            n_eff: w.n_eff.unwrap_or(DEFAULT_N_EFF),
        };
        spec.validate().map_err(|e| err("waveguide", None, e.to_string()))?;
        let c = self.calibration.as_ref().ok_or_else(|| {
            err(
                "waveguide",
                None,
                "a [waveguide] source needs a [calibration] section".into(),
            )
        })?;
        let cal = CouplingCalibration {
            reference_spacing_um: c.reference_spacing_um,
            kappa_ref: c.kappa,
            rho_ref: c.rho,
            decay_gamma: c.decay_gamma,
        };
        cal.validate().map_err(|e| err("calibration", None, e.to_string()))?;
        if cal.requires_extrapolation(spec.spacing_um) && cal.decay_gamma.is_none() {
            return Err(err(
                "waveguide",
                Some("spacing_um"),
                format!(
                    "spacing {} µm is outside the calibration ({} µm) and no decay_gamma is set",
                    spec.spacing_um, cal.reference_spacing_um
                ),
            ));
        }
        let force = match &self.force {
            None if spec.is_straight() => ForceMode::FirstPrinciples,
            None => {
                return Err(err(
                    "waveguide",
                    Some("bend_radius_cm"),
                    "a bent array needs a [force] section".into(),
                ))
            }
            Some(f) => match f.mode {
                ForceModeKind::FirstPrinciples => ForceMode::FirstPrinciples,
                ForceModeKind::Calibrated => {
                    let missing = |key: &str| err("force", Some("mode"), format!("calibrated force needs {key}"));
                    let l_foc = f.l_foc_cm.ok_or_else(|| missing("l_foc_cm"))?;
                    let radius = f.radius_cm.ok_or_else(|| missing("radius_cm"))?;
                    if !(l_foc > 0.0) {
                        return Err(err("force", Some("l_foc_cm"), format!("must be > 0, got {l_foc}")));
                    }
                    if !(radius > 0.0 && radius.is_finite()) {
                        return Err(err(
                            "force",
                            Some("radius_cm"),
                            format!("must be finite and > 0, got {radius}"),
                        ));
                    }
                    ForceMode::Calibrated(ForceCalibration {
                        l_foc_cm: l_foc,
                        bend_radius_cm: radius,
                        spacing_um: f.spacing_um.unwrap_or(spec.spacing_um),
                    })
                }
            },
        };
        Ok((spec, cal, force))
    }
}

/// A validated scenario with its model rates fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub name: String,
    pub model: ModelKind,
    pub params: ModelParams,
    pub extrapolated: bool,
    /// Flattened indices of the excited sites.
    pub excitation: Vec<usize>,
    pub z_max: f64,
    pub dz: f64,
    pub observables: Vec<ObservableKind>,
    pub refocus_threshold: f64,
    pub truncation_tolerance: f64,
    pub normalization: Normalization,
    pub slices_cm: Vec<f64>,
}

impl ResolvedScenario {
    pub fn geometry(&self) -> Geometry {
        match self.model {
            ModelKind::Fock => Geometry::SquareDiagonal {
                n_sites: self.params.n_sites,
            },
            _ => Geometry::Linear,
        }
    }

    pub fn build_operator(&self, cap: usize) -> Result<HermitianOperator> {
        match self.model {
            ModelKind::Fock => build_fock_hamiltonian_with_cap(&self.params, cap),
            ModelKind::Single | ModelKind::Effective if self.params.n_sites > cap => Err(Error::DimensionCap {
                dim: self.params.n_sites,
                cap,
            }),
            ModelKind::Single => {
                build_single_particle_hamiltonian(self.params.n_sites, self.params.kappa, self.params.fd)
            }
            ModelKind::Effective => build_effective_hamiltonian(&self.params),
        }
    }

    /// Hopping and tilt step of the chain the Bessel oracle applies to, if any.
    fn chain_rates(&self) -> Option<(f64, f64)> {
        match self.model {
            ModelKind::Fock => None,
            ModelKind::Single => Some((self.params.kappa, self.params.fd)),
            ModelKind::Effective => kappa_eff(self.params.kappa, self.params.rho, self.params.u0)
                .ok()
                .map(|k| (k.abs(), 2.0 * self.params.fd)),
        }
    }

    pub fn simulate(&self, cap: usize) -> Result<(HermitianOperator, Trajectory)> {
        let h = self.build_operator(cap)?;
        let psi0 = StateVector::superposition(h.dim(), &self.excitation)?;
        let traj = propagate(&h, &psi0, self.z_max, self.dz)?;
        Ok((h, traj))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub z_cm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

/// Scalar findings of a trajectory, independent of how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub excitation_site: usize,
    pub return_probability: Range,
    pub refocus: RefocusReport,
    /// Highest interior local maximum of the return probability, any height.
    pub strongest_return: Option<Peak>,
    pub confinement: Option<Range>,
    pub confinement_min_at_cm: Option<f64>,
    pub width_max: Option<Peak>,
    /// Twice the position of maximum width.
    pub width_period_estimate: Option<f64>,
    pub frequency_estimate: Option<f64>,
    pub participation_max: Option<f64>,
    pub edge_population_max: f64,
    pub truncated: bool,
}

/// Series computed alongside [`Diagnostics`].
#[derive(Debug, Clone)]
pub struct DiagnosticSeries {
    pub return_probability: ObservableSeries,
    pub confinement: Option<ObservableSeries>,
    pub width: ObservableSeries,
    pub participation: ObservableSeries,
    pub edge: ObservableSeries,
}

/// Reduces populations to the standard diagnostics.
///
/// The frequency estimate comes from refocusing when at least one refocus is
/// found; otherwise, on a chain, from twice the width-maximum position.
pub fn analyze_populations<P: Populations + ?Sized>(
    pops: &P,
    geometry: Geometry,
    excitation_site: usize,
    refocus_threshold: f64,
    truncation_tolerance: f64,
) -> Result<(Diagnostics, DiagnosticSeries)> {
    let edge = edge_population(pops, geometry)?;
    let ret = site_population(pops, excitation_site)?.with_truncation_guard(&edge, truncation_tolerance);
    let width = breathing_width(pops, geometry)?.with_truncation_guard(&edge, truncation_tolerance);
    let confinement = match geometry {
        Geometry::SquareDiagonal { n_sites } => Some(diagonal_confinement(pops, n_sites)?),
        Geometry::Linear => None,
    };
    let participation = participation_ratio(pops)?;

    let refocus = find_refocus(&ret, refocus_threshold)?;
    let all_peaks = find_refocus(&ret, f64::MIN_POSITIVE)?;
    let strongest_return = all_peaks
        .refocus_positions
        .iter()
        .zip(&all_peaks.peak_values)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(&z_cm, &value)| Peak { z_cm, value });

    let width_max = width.refined_argmax().map(|(z_cm, value)| Peak { z_cm, value });
    let width_period = period_from_width_maximum(&width)?.period_estimate;
    let frequency_estimate = refocus.frequency_estimate.or_else(|| match geometry {
        Geometry::Linear if refocus.refocus_positions.is_empty() => {
            width_period.map(|p| 2.0 * std::f64::consts::PI / p)
        }
        _ => None,
    });

    let diagnostics = Diagnostics {
        excitation_site,
        return_probability: Range {
            min: ret.min().unwrap_or(f64::NAN),
            max: ret.max().unwrap_or(f64::NAN),
        },
        refocus,
        strongest_return,
        confinement: confinement.as_ref().map(|c| Range {
            min: c.min().unwrap_or(f64::NAN),
            max: c.max().unwrap_or(f64::NAN),
        }),
        confinement_min_at_cm: confinement.as_ref().and_then(|c| {
            c.values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| c.z_samples[k])
        }),
        width_max,
        width_period_estimate: width_period,
        frequency_estimate,
        participation_max: participation.max(),
        edge_population_max: edge.max().unwrap_or(0.0),
        truncated: ret.truncated,
    };
    Ok((
        diagnostics,
        DiagnosticSeries {
            return_probability: ret,
            confinement,
            width,
            participation,
            edge,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub interior_fraction: f64,
    pub mean_spacing: f64,
    pub spread: f64,
}

/// Oracle-vs-simulation deltas recorded with every run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleChecks {
    /// Max over samples and sites of `||A_n| - |J_n(ζ)||` (chains with a tilt).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bessel_max_error: Option<f64>,
    /// Max entrywise difference between the builder and the bond enumerator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bond_enumerator_max_diff: Option<f64>,
    pub max_norm_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub model: ModelKind,
    pub generator: String,
    pub params: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_eff: Option<f64>,
    pub coupling_extrapolated: bool,
    pub dim: usize,
    pub z_max_cm: f64,
    pub dz_cm: f64,
    pub samples: usize,
    pub excitation: Vec<usize>,
    pub refocus_threshold: f64,
    pub truncation_tolerance: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Spectrum>,
    pub oracles: OracleChecks,
    pub files: Vec<String>,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs a scenario and writes its artifacts into `out_dir`:
/// `trajectory.csv`, `observables.csv`, `heatmap.pgm`, `slice_z<z>.pgm` (Fock
/// lattice only) and `summary.json`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path, cap: usize) -> Result<RunSummary> {
    let sc = config.resolve()?;
    let (h, traj) = sc.simulate(cap)?;
    let geometry = sc.geometry();
    let (diagnostics, series) = analyze_populations(
        &traj,
        geometry,
        sc.excitation[0],
        sc.refocus_threshold,
        sc.truncation_tolerance,
    )?;

    let spectrum = if sc.observables.contains(&ObservableKind::Spectrum) {
        let interior_fraction = 1.0 / 3.0;
        let (mean_spacing, spread) = wannier_stark_spacing(&h, interior_fraction)?;
        Some(Spectrum {
            interior_fraction,
            mean_spacing,
            spread,
        })
    } else {
        None
    };

    let oracles = OracleChecks {
        bessel_max_error: match sc.chain_rates() {
            Some((kappa, fd)) if fd > 0.0 && sc.excitation.len() == 1 => {
                Some(bessel_error(&traj, sc.excitation[0], kappa, fd)?)
            }
            _ => None,
        },
        bond_enumerator_max_diff: match sc.model {
            ModelKind::Fock => {
                let m = enumerate_fock_bonds(&sc.params)?.to_matrix();
                Some((m - h.matrix()).amax())
            }
            _ => None,
        },
        max_norm_error: traj
            .states
            .iter()
            .map(|s| (s.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max),
    };

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();

    write_trajectory_csv(&traj, geometry, &out_dir.join("trajectory.csv"))?;
    files.push("trajectory.csv".to_string());

    let mut columns: Vec<&ObservableSeries> = Vec::new();
    for kind in &sc.observables {
        match kind {
            ObservableKind::Return => columns.push(&series.return_probability),
            ObservableKind::Confinement => columns.extend(series.confinement.as_ref()),
            ObservableKind::Width => columns.push(&series.width),
            ObservableKind::Participation => columns.push(&series.participation),
            ObservableKind::Edge => columns.push(&series.edge),
            ObservableKind::Spectrum => {}
        }
    }
    if !columns.is_empty() {
        write_observables_csv(&columns, &out_dir.join("observables.csv"))?;
        files.push("observables.csv".to_string());
    }

    let axis = match geometry {
        Geometry::Linear => HeatmapAxis::LinearVsZ,
        Geometry::SquareDiagonal { .. } => HeatmapAxis::DiagonalVsZ,
    };
    render_heatmap(&traj, geometry, axis, sc.normalization)?.write_pgm(&out_dir.join("heatmap.pgm"))?;
    files.push("heatmap.pgm".to_string());
    for z in &sc.slices_cm {
        let name = format!("slice_z{z:.2}.pgm");
        render_heatmap(
            &traj,
            geometry,
            HeatmapAxis::FullSlice { z_cm: *z },
            Normalization::Global,
        )?
        .write_pgm(&out_dir.join(&name))?;
        files.push(name);
    }
    files.push("summary.json".to_string());

    let summary = RunSummary {
        name: sc.name.clone(),
        model: sc.model,
        generator: h.label().to_string(),
        kappa_eff: match sc.model {
            ModelKind::Single => None,
            _ => kappa_eff(sc.params.kappa, sc.params.rho, sc.params.u0).ok(),
        },
        params: sc.params.clone(),
        coupling_extrapolated: sc.extrapolated,
        dim: h.dim(),
        z_max_cm: sc.z_max,
        dz_cm: sc.dz,
        samples: traj.len(),
        excitation: sc.excitation.clone(),
        refocus_threshold: sc.refocus_threshold,
        truncation_tolerance: sc.truncation_tolerance,
        diagnostics,
        spectrum,
        oracles,
        files,
    };
    write_json(&summary, &out_dir.join("summary.json"))?;
    Ok(summary)
}

fn bessel_error(traj: &Trajectory, origin: usize, kappa: f64, fd: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (z, state) in traj.z_samples.iter().zip(&traj.states) {
        for (site, a) in state.amplitudes().iter().enumerate() {
            let n = site as i64 - origin as i64;
            let exact = analytic_ws_amplitude(&BesselOracleParams { kappa, fd, z: *z, n })?;
            worst = worst.max((a.norm() - exact).abs());
        }
    }
    Ok(worst)
}

/// A built-in scenario reproducing one of the reference experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Where each parameter value comes from.
    pub provenance: BTreeMap<&'static str, String>,
    pub config: ScenarioConfig,
}

/// Guide spacing of the fabricated arrays, µm.
pub const ARRAY_SPACING_UM: f64 = 19.0;
/// Measured nearest- and second-neighbour couplings at that spacing, cm⁻¹.
pub const MEASURED_KAPPA: f64 = 0.95;
pub const MEASURED_RHO: f64 = 0.3;
/// Propagation-constant detuning of the diagonal guides, cm⁻¹.
pub const DIAGONAL_DETUNING: f64 = -4.0;
/// Bend radius of the curved square array, cm.
pub const BEND_RADIUS_CM: f64 = 400.0;
/// Measured refocusing length of the pair in the curved array, cm.
pub const MEASURED_L_FOC_CM: f64 = 6.5;

fn measured_calibration() -> CalibrationSection {
    CalibrationSection {
        reference_spacing_um: ARRAY_SPACING_UM,
        kappa: MEASURED_KAPPA,
        rho: MEASURED_RHO,
        decay_gamma: None,
    }
}

fn measured_force() -> ForceSection {
    ForceSection {
        mode: ForceModeKind::Calibrated,
        l_foc_cm: Some(MEASURED_L_FOC_CM),
        radius_cm: Some(BEND_RADIUS_CM),
        spacing_um: Some(ARRAY_SPACING_UM),
    }
}

fn waveguide_config(
    name: &str,
    model: ModelKind,
    shape: ShapeKind,
    n: usize,
    radius: f64,
    length: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        scenario: ScenarioSection {
            name: name.to_string(),
            model,
            z_max_cm: None,
            dz_cm: Some(DEFAULT_DZ_CM),
            excitation: None,
            observables: None,
            output_dir: None,
        },
        params: None,
        waveguide: Some(WaveguideSection {
            shape,
            n,
            spacing_um: ARRAY_SPACING_UM,
            bend_radius_cm: radius,
            length_cm: length,
            detuning: if shape == ShapeKind::Square {
                DIAGONAL_DETUNING
            } else {
                0.0
            },
            wavelength_nm: Some(DEFAULT_WAVELENGTH_NM),
            n_eff: Some(DEFAULT_N_EFF),
        }),
        calibration: Some(measured_calibration()),
        force: Some(measured_force()),
        overrides: None,
        analysis: None,
        render: None,
    }
}

fn provenance(entries: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
    let mut map: BTreeMap<&'static str, String> = [
        ("spacing", "d = 19 µm (fabricated array)"),
        ("couplings", "κ̄ = 0.95 cm⁻¹, ρ̄ = 0.3 cm⁻¹ (measured at d = 19 µm)"),
        ("force", "calibrated: L_foc = 6.5 cm at R = 400 cm ⇒ Fd = π/6.5 cm⁻¹"),
    ]
    .into_iter()
    .map(|(k, v)| (k, v.to_string()))
    .collect();
    for (k, v) in entries {
        map.insert(k, v.to_string());
    }
    map
}

/// The five built-in scenarios.
pub fn presets() -> Vec<Preset> {
    let r_single = project_single_particle_radius(BEND_RADIUS_CM).expect("positive radius");

    let fig3 = waveguide_config(
        "fig3-delocalization",
        ModelKind::Fock,
        ShapeKind::Square,
        15,
        f64::INFINITY,
        2.5,
    );
    let mut fig3c = waveguide_config(
        "fig3c-bh-only",
        ModelKind::Fock,
        ShapeKind::Square,
        15,
        f64::INFINITY,
        2.5,
    );
    fig3c.overrides = Some(OverridesSection {
        rho: Some(0.0),
        ..Default::default()
    });
    let mut fig4a = waveguide_config(
        "fig4a-fractional-bo",
        ModelKind::Fock,
        ShapeKind::Square,
        15,
        BEND_RADIUS_CM,
        8.5,
    );
    fig4a.render = Some(RenderSection {
        normalization: None,
        slices_cm: Some(vec![3.25, MEASURED_L_FOC_CM]),
    });
    let fig4b = waveguide_config(
        "fig4b-single-bo",
        ModelKind::Single,
        ShapeKind::Linear,
        23,
        r_single,
        8.5,
    );
    let effective = waveguide_config(
        "effective-pair",
        ModelKind::Effective,
        ShapeKind::Square,
        15,
        BEND_RADIUS_CM,
        8.5,
    );

    vec![
        Preset {
            name: "fig3-delocalization",
            description: "straight 15×15 array, pair tunnelling on: bound-pair spreading without force",
            provenance: provenance(&[
                ("lattice", "15×15 square array, central guide excited"),
                ("detuning", "Δβ = −4 cm⁻¹ on the diagonal (attractive)"),
                ("geometry", "R = ∞ (straight), L = 2.5 cm"),
            ]),
            config: fig3,
        },
        Preset {
            name: "fig3c-bh-only",
            description: "as fig3-delocalization with ρ = 0: second-order pair tunnelling only",
            provenance: provenance(&[
                ("lattice", "15×15 square array, central guide excited"),
                ("detuning", "Δβ = −4 cm⁻¹ on the diagonal (attractive)"),
                ("geometry", "R = ∞ (straight), L = 2.5 cm"),
                ("override", "ρ = 0 (direct pair tunnelling removed)"),
            ]),
            config: fig3c,
        },
        Preset {
            name: "fig4a-fractional-bo",
            description: "curved 15×15 array: bound-pair Bloch oscillation at twice the single-particle frequency",
            provenance: provenance(&[
                ("lattice", "15×15 square array, central guide excited"),
                ("detuning", "Δβ = −4 cm⁻¹ on the diagonal (attractive)"),
                (
                    "geometry",
                    "R = 400 cm, L = 8.5 cm; sections at L_max = 3.25 cm and L_foc = 6.5 cm",
                ),
            ]),
            config: fig4a,
        },
        Preset {
            name: "fig4b-single-bo",
            description: "curved planar array of 23 guides: single-particle Bloch oscillation under the same force",
            provenance: provenance(&[
                ("lattice", "23 guides, d' = d = 19 µm, central guide excited"),
                ("geometry", "R' = R√2 = 400√2 cm, L' = 8.5 cm"),
            ]),
            config: fig4b,
        },
        Preset {
            name: "effective-pair",
            description: "bound pair as one particle with κ_eff = −2κ²/U₀ + ρ and force 2F",
            provenance: provenance(&[
                ("lattice", "15 sites (diagonal of the 15×15 array)"),
                ("detuning", "U₀ = Δβ = −4 cm⁻¹"),
                ("geometry", "R = 400 cm, L = 8.5 cm"),
            ]),
            config: effective,
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

/// Row of the preset table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub model: ModelKind,
    pub description: &'static str,
    pub provenance: BTreeMap<&'static str, String>,
    pub params: ModelParams,
    pub z_max_cm: f64,
}

pub fn list_presets() -> Vec<PresetInfo> {
    presets()
        .into_iter()
        .map(|p| {
            let resolved = p.config.resolve().expect("built-in presets are valid");
            PresetInfo {
                name: p.name,
                model: p.config.scenario.model,
                description: p.description,
                provenance: p.provenance,
                params: resolved.params,
                z_max_cm: resolved.z_max,
            }
        })
        .collect()
}

/// Summary of several preset runs sharing an output root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub runs: Vec<RunSummary>,
    /// Pair over single-particle frequency for fig4a-fractional-bo vs fig4b-single-bo.
    pub frequency_ratio: Option<f64>,
    pub frequency_ratio_note: String,
}

/// Runs the named presets into `out_root/<name>/` and writes `out_root/batch.json`.
pub fn run_presets(names: &[&str], out_root: &Path, cap: usize) -> Result<BatchSummary> {
    let mut runs = Vec::new();
    for name in names {
        let p = preset(name).ok_or_else(|| Error::invalid(format!("unknown preset {name:?}")))?;
        runs.push(run_scenario(&p.config, &out_root.join(name), cap)?);
    }
    let find = |n: &str| runs.iter().find(|r| r.name == n);
    let (frequency_ratio, note) = match (find("fig4a-fractional-bo"), find("fig4b-single-bo")) {
        (Some(pair), Some(single)) => match (
            pair.diagnostics.frequency_estimate,
            single.diagnostics.frequency_estimate,
        ) {
            (Some(p), Some(s)) => (
                Some(p / s),
                "pair refocus frequency / single-particle width-maximum frequency".into(),
            ),
            (None, _) => (
                None,
                format!(
                    "pair run has no refocus above threshold {}; strongest return {:?}",
                    pair.refocus_threshold, pair.diagnostics.strongest_return
                ),
            ),
            (_, None) => (None, "single-particle run has no frequency estimate".into()),
        },
        _ => (None, "needs both fig4a-fractional-bo and fig4b-single-bo".into()),
    };
    let batch = BatchSummary {
        runs,
        frequency_ratio,
        frequency_ratio_note: note,
    };
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    write_json(&batch, &out_root.join("batch.json"))?;
    Ok(batch)
}

/// `R'` of the single-particle preset, cm.
pub fn single_particle_radius() -> f64 {
    BEND_RADIUS_CM * SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
name = "t"
model = "single"
z_max_cm = 1.0
dz_cm = 0.5

[params]
kappa = 1.0
n_sites = 5
"#;

    #[test]
    fn minimal_config_resolves() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.excitation, vec![2]);
        assert_eq!(r.params.fd, 0.0);
        assert_eq!(r.observables.len(), 5);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let src = MINIMAL.replace("n_sites = 5", "n_sites = 5\nkapa = 2.0");
        match ScenarioConfig::from_toml_str(&src) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 11, "{message}");
                assert!(message.contains("kapa"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_report_lines() {
        let src = MINIMAL.replace("z_max_cm = 1.0", "z_max_cm = -1.0");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&src),
            Err(Error::Config { line: 5, .. })
        ));
        let src = MINIMAL.replace("kappa = 1.0", "kappa = -1.0");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&src),
            Err(Error::Config { line: 8, .. })
        ));
        let src = format!("{MINIMAL}excitation = [[7]]\n");
        assert!(ScenarioConfig::from_toml_str(&src).is_err());
    }

    #[test]
    fn two_sources_are_rejected() {
        let mut c = preset("fig4a-fractional-bo").unwrap().config;
        c.params = Some(ParamsSection {
            kappa: Some(1.0),
            n_sites: 3,
            ..Default::default()
        });
        assert!(matches!(c.resolve(), Err(Error::Config { .. })));
        let mut c = preset("fig4a-fractional-bo").unwrap().config;
        c.waveguide = None;
        assert!(matches!(c.resolve(), Err(Error::Config { .. })));
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for p in presets() {
            let text = p.config.to_toml_string();
            let back = ScenarioConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", p.name));
            assert_eq!(back, p.config);
        }
    }

    #[test]
    fn preset_parameters() {
        let info = list_presets();
        assert_eq!(info.len(), 5);
        let get = |n: &str| info.iter().find(|i| i.name == n).unwrap().clone();
        let fig3 = get("fig3-delocalization");
        assert_eq!(
            (fig3.params.kappa, fig3.params.rho, fig3.params.u0, fig3.params.fd),
            (0.95, 0.3, -4.0, 0.0)
        );
        assert_eq!(fig3.z_max_cm, 2.5);
        assert_eq!(get("fig3c-bh-only").params.rho, 0.0);
        let fig4a = get("fig4a-fractional-bo");
        assert!((fig4a.params.fd - std::f64::consts::PI / 6.5).abs() < 1e-15);
        let fig4b = get("fig4b-single-bo");
        assert_eq!(fig4b.params.n_sites, 23);
        assert!((fig4b.params.fd - fig4a.params.fd).abs() < 1e-14);
        assert!((single_particle_radius() - 565.685).abs() < 1e-3);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let c = preset("fig3-delocalization").unwrap().config;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_scenario(&c, dir.path(), 100),
            Err(Error::DimensionCap { dim: 225, cap: 100 })
        ));
    }

    #[test]
    fn ebh_params_source() {
        let src = r#"
[scenario]
name = "ebh"
model = "fock"
z_max_cm = 1.0

[params]
j_hop = 4.0
eps = 0.1
u0 = 2.0
n_sites = 5
"#;
        let r = ScenarioConfig::from_toml_str(src).unwrap().resolve().unwrap();
        assert!((r.params.kappa - 0.2).abs() < 1e-15);
        assert!((r.params.near_diagonal_energy() - 0.04).abs() < 1e-15);
        let bad = src.replace("n_sites = 5", "n_sites = 5\nrho = 1.0");
        assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(Error::Config { .. })));
    }
}
