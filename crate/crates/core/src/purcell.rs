//! Purcell factor, lifetime reduction versus cavity length and the
//! τ0 / quantum-efficiency fit.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{
    frequency_ghz, DEBYE_WALLER, DIAMOND_INDEX, ENSEMBLE_LINEWIDTH_GHZ, IMPLANT_DEPTH_NM, ZPL_CD_NM,
};
use crate::error::{Error, Result};
use crate::fit::{lm_fit, CurveModel, CurveProblem, FitResult, LmOptions, ParamSpec};
use crate::metrics::{finesse_from_losses, mode_volume, mode_waist_um, quality_factor, LossBudget};
use crate::optics::CavityAssembly;
use crate::tmm::{effective_length, field_profile, CavityModel, FieldProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterParams {
    pub zpl_wavelength_nm: f64,
    pub host_index: f64,
    pub debye_waller: f64,
    pub emitter_quality: f64,
    /// Depth below the fiber-facing membrane surface.
    pub implant_depth_nm: f64,
    #[serde(default)]
    pub dipole_angle_rad: f64,
}

impl EmitterParams {
    /// SiV- C/D line of the implanted ensemble.
    pub fn cd_line() -> Self {
        Self {
            zpl_wavelength_nm: ZPL_CD_NM,
            host_index: DIAMOND_INDEX,
            debye_waller: DEBYE_WALLER,
            emitter_quality: emitter_quality_from_linewidth(ZPL_CD_NM, ENSEMBLE_LINEWIDTH_GHZ),
            implant_depth_nm: IMPLANT_DEPTH_NM,
            dipole_angle_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be > 0")))
            }
        };
        pos("zpl_wavelength_nm", self.zpl_wavelength_nm)?;
        pos("emitter_quality", self.emitter_quality)?;
        if !(self.host_index.is_finite() && self.host_index >= 1.0) {
            return Err(Error::NonPhysicalIndex {
                material: "host".into(),
                n: self.host_index,
            });
        }
        if !(self.debye_waller > 0.0 && self.debye_waller <= 1.0) {
            return Err(Error::invalid(
                "debye_waller",
                format!("{} must be in (0, 1]", self.debye_waller),
            ));
        }
        if !(self.implant_depth_nm.is_finite() && self.implant_depth_nm >= 0.0) {
            return Err(Error::invalid("implant_depth_nm", "must be >= 0"));
        }
        if !self.dipole_angle_rad.is_finite() {
            return Err(Error::invalid("dipole_angle_rad", "must be finite"));
        }
        Ok(())
    }
}

impl Default for EmitterParams {
    fn default() -> Self {
        Self::cd_line()
    }
}

/// Q_em = ν/Δν for an ensemble of FWHM `linewidth_ghz`.
pub fn emitter_quality_from_linewidth(wavelength_nm: f64, linewidth_ghz: f64) -> f64 {
    frequency_ghz(wavelength_nm) / linewidth_ghz
}

/// |E(z)| relative to the largest |E| inside `layer`, times |cos θ|.
/// `depth_nm` is measured from the layer's entry-side edge.
pub fn xi_overlap(
    profile: &FieldProfile,
    layer: usize,
    depth_nm: f64,
    dipole_angle_rad: f64,
) -> Result<f64> {
    let span = profile
        .spans
        .get(layer)
        .ok_or_else(|| Error::invalid("layer", format!("{layer} is outside the profile")))?;
    let thickness = span.end_nm - span.start_nm;
    let e = profile
        .field_in_layer(layer, depth_nm)
        .ok_or(Error::OutsideEmitterLayer {
            depth_nm,
            thickness_nm: thickness,
        })?;
    if !(span.peak_intensity > 0.0) {
        return Err(Error::DegenerateData(
            "no field in the emitter layer".into(),
        ));
    }
    let rel = (e.norm_sqr() / span.peak_intensity).sqrt().min(1.0);
    Ok(rel * dipole_angle_rad.cos().abs())
}

pub fn effective_q(q_em: f64, q_c: f64) -> Result<f64> {
    if !(q_em > 0.0 && q_c > 0.0) {
        return Err(Error::invalid(
            "quality factor",
            format!("Q_em = {q_em}, Q_c = {q_c} must be > 0"),
        ));
    }
    Ok(1.0 / (1.0 / q_em + 1.0 / q_c))
}

/// F_p = ξ² · 3(λ/n)³ Q_eff / (4π² V_m). λ and V_m in µm and µm³.
pub fn purcell_factor(
    xi: f64,
    wavelength_um: f64,
    n: f64,
    q_eff: f64,
    volume_um3: f64,
) -> Result<f64> {
    if !(xi >= 0.0 && wavelength_um > 0.0 && n > 0.0 && q_eff > 0.0 && volume_um3 > 0.0) {
        return Err(Error::invalid(
            "purcell inputs",
            "ξ >= 0 and λ, n, Q_eff, V_m > 0",
        ));
    }
    Ok(xi * xi * 3.0 * (wavelength_um / n).powi(3) * q_eff / (4.0 * PI * PI * volume_um3))
}

/// τ0/τc = 1 + η ζ F_p.
pub fn lifetime_ratio(f_p: f64, eta_qe: f64, zeta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta_qe) {
        return Err(Error::invalid(
            "eta_qe",
            format!("{eta_qe} must be in [0, 1]"),
        ));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::invalid(
            "debye_waller",
            format!("{zeta} must be in (0, 1]"),
        ));
    }
    if !(f_p >= 0.0) {
        return Err(Error::invalid("f_p", "must be >= 0"));
    }
    Ok(1.0 + eta_qe * zeta * f_p)
}

pub fn beta_collection(f_p: f64) -> f64 {
    f_p / (1.0 + f_p)
}

/// Decay rates in 1/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDecomposition {
    pub gamma_tot: f64,
    pub gamma_nr: f64,
    pub gamma_r_fs: f64,
    pub gamma_r_c: f64,
    pub gamma_r_zpl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurcellResult {
    pub f_p: f64,
    pub q_eff: f64,
    pub xi: f64,
    pub beta_collection: f64,
    pub tau_ratio: f64,
    pub tau_c_ns: f64,
    pub rates: RateDecomposition,
}

impl PurcellResult {
    pub fn new(
        f_p: f64,
        q_eff: f64,
        xi: f64,
        tau0_ns: f64,
        eta_qe: f64,
        zeta: f64,
    ) -> Result<Self> {
        if !(tau0_ns > 0.0) {
            return Err(Error::invalid("tau0_ns", "must be > 0"));
        }
        let tau_ratio = lifetime_ratio(f_p, eta_qe, zeta)?;
        let g0 = 1.0 / tau0_ns;
        let gamma_r = eta_qe * g0;
        let rates = RateDecomposition {
            gamma_nr: (1.0 - eta_qe) * g0,
            gamma_r_fs: gamma_r,
            gamma_r_c: zeta * f_p * gamma_r,
            gamma_r_zpl: zeta * gamma_r,
            gamma_tot: g0 + zeta * f_p * gamma_r,
        };
        Ok(Self {
            f_p,
            q_eff,
            xi,
            beta_collection: beta_collection(f_p),
            tau_ratio,
            tau_c_ns: tau0_ns / tau_ratio,
            rates,
        })
    }
}

/// Everything the Purcell factor depends on at one resonant cavity length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub gap_nm: f64,
    pub resonance_nm: f64,
    pub l_eff_um: f64,
    pub waist_um: f64,
    pub volume_um3: f64,
    pub q_c: f64,
    pub q_eff: f64,
    pub xi: f64,
    pub f_p: f64,
}

/// Purcell factor of `emitter` in `assembly`, which must already be resonant
/// at the emitter wavelength.
pub fn operating_point(
    assembly: &CavityAssembly,
    emitter: &EmitterParams,
    budget: &LossBudget,
) -> Result<OperatingPoint> {
    emitter.validate()?;
    let lam = emitter.zpl_wavelength_nm;
    let l = effective_length(assembly, lam)?;
    let membrane = assembly
        .layout()
        .membrane
        .ok_or_else(|| Error::invalid("assembly", "emitter needs a diamond membrane"))?;
    let profile = field_profile(&assembly.flatten(), l.resonance_nm, 2)?;
    let xi = xi_overlap(
        &profile,
        membrane,
        emitter.implant_depth_nm,
        emitter.dipole_angle_rad,
    )?;
    let waist_um = mode_waist_um(assembly.beam_length_nm() * 1e-3, assembly.r_c_um(), lam)?;
    let v = mode_volume(waist_um, l.l_eff_um, lam)?;
    let q_c = quality_factor(l.l_eff_um, lam, finesse_from_losses(budget)?)?;
    let q_eff = effective_q(emitter.emitter_quality, q_c)?;
    let f_p = purcell_factor(xi, lam * 1e-3, emitter.host_index, q_eff, v.um3)?;
    Ok(OperatingPoint {
        gap_nm: assembly.gap_nm(),
        resonance_nm: l.resonance_nm,
        l_eff_um: l.l_eff_um,
        waist_um,
        volume_um3: v.um3,
        q_c,
        q_eff,
        xi,
        f_p,
    })
}

/// Re-tune the fiber gap near `gap_guess_nm` to the emitter line and evaluate.
pub fn retuned_operating_point(
    template: &CavityAssembly,
    gap_guess_nm: f64,
    emitter: &EmitterParams,
    budget: &LossBudget,
) -> Result<OperatingPoint> {
    let a = template.with_gap(gap_guess_nm)?;
    let g = CavityModel::new(&a).resonant_gap_near(emitter.zpl_wavelength_nm, gap_guess_nm)?;
    operating_point(&a.with_gap(g)?, emitter, budget)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimePoint {
    pub requested_gap_nm: f64,
    pub point: Option<OperatingPoint>,
    pub result: Option<PurcellResult>,
    /// Why this point has no prediction.
    pub flag: Option<String>,
}

/// τc(L) over a list of fiber gaps, each re-tuned to the emitter line.
/// Points that cannot be evaluated are kept and flagged.
pub fn predict_lifetime_curve(
    template: &CavityAssembly,
    gaps_nm: &[f64],
    emitter: &EmitterParams,
    budget: &LossBudget,
    tau0_ns: f64,
    eta_qe: f64,
) -> Result<Vec<LifetimePoint>> {
    if gaps_nm.is_empty() {
        return Err(Error::InsufficientData("empty gap list".into()));
    }
    emitter.validate()?;
    budget.validate()?;
    lifetime_ratio(0.0, eta_qe, emitter.debye_waller)?;
    if !(tau0_ns > 0.0) {
        return Err(Error::invalid("tau0_ns", "must be > 0"));
    }
    Ok(gaps_nm
        .par_iter()
        .map(|&g| {
            let eval = retuned_operating_point(template, g, emitter, budget).and_then(|p| {
                let r = PurcellResult::new(
                    p.f_p,
                    p.q_eff,
                    p.xi,
                    tau0_ns,
                    eta_qe,
                    emitter.debye_waller,
                )?;
                Ok((p, r))
            });
            match eval {
                Ok((p, r)) => LifetimePoint {
                    requested_gap_nm: g,
                    point: Some(p),
                    result: Some(r),
                    flag: None,
                },
                Err(e) => LifetimePoint {
                    requested_gap_nm: g,
                    point: None,
                    result: None,
                    flag: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// F_p as a function of effective length.
pub trait PurcellCurve: Sync {
    fn purcell_at(&self, l_eff_um: f64) -> Result<f64>;
}

/// F_p = f_ref · l_ref / L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseLength {
    pub f_ref: f64,
    pub l_ref_um: f64,
}

impl PurcellCurve for InverseLength {
    fn purcell_at(&self, l_eff_um: f64) -> Result<f64> {
        if !(l_eff_um > 0.0) {
            return Err(Error::invalid("l_eff_um", "must be > 0"));
        }
        Ok(self.f_ref * self.l_ref_um / l_eff_um)
    }
}

/// Interpolates F_p·L linearly between tabulated operating points and holds
/// it constant outside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedPurcell {
    l_eff_um: Vec<f64>,
    f_times_l: Vec<f64>,
}

impl TabulatedPurcell {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        if pts.iter().any(|p| !(p.0 > 0.0 && p.1 >= 0.0)) {
            return Err(Error::invalid("purcell table", "need L > 0 and F_p >= 0"));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.is_empty() {
            return Err(Error::InsufficientData("empty purcell table".into()));
        }
        Ok(Self {
            l_eff_um: pts.iter().map(|p| p.0).collect(),
            f_times_l: pts.iter().map(|p| p.1 * p.0).collect(),
        })
    }

    pub fn from_points(points: &[OperatingPoint]) -> Result<Self> {
        Self::new(
            &points
                .iter()
                .map(|p| (p.l_eff_um, p.f_p))
                .collect::<Vec<_>>(),
        )
    }

    /// Every resonance of the emitter line with a fiber gap in `gap_range_nm`.
    pub fn scan(
        template: &CavityAssembly,
        gap_range_nm: (f64, f64),
        emitter: &EmitterParams,
        budget: &LossBudget,
    ) -> Result<Self> {
        let (lo, hi) = gap_range_nm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::invalid("gap_range_nm", "need 0 < lo < hi"));
        }
        let half = emitter.zpl_wavelength_nm / 2.0;
        let a = template.with_gap(lo)?;
        let mut g0 = CavityModel::new(&a).resonant_gap_near(emitter.zpl_wavelength_nm, lo)?;
        while g0 < lo {
            g0 += half;
        }
        let gaps: Vec<f64> = (0..)
            .map(|k| g0 + k as f64 * half)
            .take_while(|&g| g <= hi)
            .collect();
        let points = gaps
            .par_iter()
            .map(|&g| {
                template
                    .with_gap(g)
                    .and_then(|a| operating_point(&a, emitter, budget))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(&points)
    }

    pub fn lengths_um(&self) -> &[f64] {
        &self.l_eff_um
    }
}

impl PurcellCurve for TabulatedPurcell {
    fn purcell_at(&self, l: f64) -> Result<f64> {
        if !(l > 0.0) {
            return Err(Error::invalid("l_eff_um", "must be > 0"));
        }
        let (x, y) = (&self.l_eff_um, &self.f_times_l);
        let fl = match x.partition_point(|&v| v < l) {
            0 => y[0],
            i if i == x.len() => y[x.len() - 1],
            i => y[i - 1] + (y[i] - y[i - 1]) * (l - x[i - 1]) / (x[i] - x[i - 1]),
        };
        Ok(fl / l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSample {
    pub l_eff_um: f64,
    pub tau_ns: f64,
    pub sigma_ns: f64,
}

/// τc = τ0 / (1 + η ζ F_p) with F_p as the abscissa.
struct LifetimeModel {
    zeta: f64,
}

impl CurveModel for LifetimeModel {
    fn name(&self) -> &'static str {
        "purcell_lifetime"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["tau0", "eta_qe"]
    }

    fn value(&self, f_p: f64, p: &[f64]) -> f64 {
        p[0] / (1.0 + p[1] * self.zeta * f_p)
    }

    fn gradient(&self, f_p: f64, p: &[f64], out: &mut [f64]) {
        let d = 1.0 + p[1] * self.zeta * f_p;
        out[0] = 1.0 / d;
        out[1] = -p[0] * self.zeta * f_p / (d * d);
    }
}

/// Weighted fit of τ0 and η_QE (bounded to [0, 1]) to lifetimes measured
/// at several effective lengths. `eta_fixed` pins η.
pub fn fit_lifetime_model(
    data: &[LifetimeSample],
    curve: &dyn PurcellCurve,
    zeta: f64,
    eta_fixed: Option<f64>,
) -> Result<FitResult> {
    if data.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} lifetimes, need 3",
            data.len()
        )));
    }
    if data
        .iter()
        .any(|d| !(d.l_eff_um > 0.0 && d.tau_ns > 0.0 && d.sigma_ns > 0.0))
    {
        return Err(Error::invalid(
            "lifetime data",
            "L_eff, tau and sigma must be > 0",
        ));
    }
    let (lmin, lmax) = data.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.l_eff_um), hi.max(d.l_eff_um))
    });
    if lmax < 2.0 * lmin {
        return Err(Error::InsufficientData(format!(
            "lengths span {lmin}..{lmax} um, need a factor of 2"
        )));
    }
    lifetime_ratio(0.0, eta_fixed.unwrap_or(0.5), zeta)?;
    let f: Vec<f64> = data
        .iter()
        .map(|d| curve.purcell_at(d.l_eff_um))
        .collect::<Result<_>>()?;
    let tau: Vec<f64> = data.iter().map(|d| d.tau_ns).collect();
    let model = LifetimeModel { zeta };
    let problem = CurveProblem {
        model: &model,
        x: &f,
        y: &tau,
        weights: Some(data.iter().map(|d| 1.0 / d.sigma_ns).collect()),
    };
    let tau_start = data
        .iter()
        .max_by(|a, b| a.l_eff_um.total_cmp(&b.l_eff_um))
        .map_or(1.0, |d| d.tau_ns);
    let specs = [
        ParamSpec::new("tau0", tau_start).bounded(0.0, f64::INFINITY),
        ParamSpec::new("eta_qe", eta_fixed.unwrap_or(0.5))
            .bounded(0.0, 1.0)
            .fixed(eta_fixed.is_some()),
    ];
    let opts = LmOptions {
        absolute_sigma: true,
        ..Default::default()
    };
    let mut r = lm_fit(model.name(), &problem, &specs, &opts)?;
    let f_max = f.iter().cloned().fold(0.0, f64::max);
    let reduction = 1.0 - 1.0 / lifetime_ratio(f_max, r.value("eta_qe"), zeta)?;
    r.push_derived("max_reduction", reduction, f64::NAN);
    Ok(r)
}

/// Lifetimes from the model, each with Gaussian noise of relative size `rel_noise`.
pub fn synthesize_lifetimes<R: Rng + ?Sized>(
    curve: &dyn PurcellCurve,
    lengths_um: &[f64],
    tau0_ns: f64,
    eta_qe: f64,
    zeta: f64,
    rel_noise: f64,
    rng: &mut R,
) -> Result<Vec<LifetimeSample>> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    lengths_um
        .iter()
        .map(|&l| {
            let tau = tau0_ns / lifetime_ratio(curve.purcell_at(l)?, eta_qe, zeta)?;
            let sigma = rel_noise * tau;
            let noisy = tau + sigma * unit.sample(rng);
            Ok(LifetimeSample {
                l_eff_um: l,
                tau_ns: noisy,
                sigma_ns: if sigma > 0.0 { sigma } else { 1e-3 * tau },
            })
        })
        .collect()
}
