//! Gaussian-mode geometry, loss budgets, finesse and quality factor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{
    COATING_TRANSMISSION_PPM, MEMBRANE_EXCESS_LOSS_PPM, MIRROR_EXCESS_LOSS_PPM,
};
use crate::error::{Error, Result};
use crate::optics::CavityAssembly;
use crate::tmm::{effective_length, solve_field, CavityModel};

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be > 0")))
    }
}

/// Plano-concave waist: w0² = (λ/π)·√(L (r_c − L)). Lengths in µm.
pub fn mode_waist_um(length_um: f64, r_c_um: f64, wavelength_nm: f64) -> Result<f64> {
    positive("length_um", length_um)?;
    positive("r_c_um", r_c_um)?;
    positive("wavelength_nm", wavelength_nm)?;
    if length_um >= r_c_um {
        return Err(Error::UnstableResonator { length_um, r_c_um });
    }
    let lam_um = wavelength_nm * 1e-3;
    Ok((lam_um / PI * (length_um * (r_c_um - length_um)).sqrt()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVolume {
    pub um3: f64,
    pub lambda_cubed: f64,
}

/// V = (π/4)·w0²·L_eff, also expressed in units of λ³.
pub fn mode_volume(waist_um: f64, l_eff_um: f64, wavelength_nm: f64) -> Result<ModeVolume> {
    positive("waist_um", waist_um)?;
    positive("l_eff_um", l_eff_um)?;
    positive("wavelength_nm", wavelength_nm)?;
    let um3 = 0.25 * PI * waist_um * waist_um * l_eff_um;
    Ok(ModeVolume {
        um3,
        lambda_cubed: um3 / (wavelength_nm * 1e-3).powi(3),
    })
}

/// Scattering from a rough interface inside the cavity, ppm per round trip.
///
/// Each pass scatters (2π σ Δn / λ)² of the local intensity. A round trip
/// crosses the interface twice, and the standing wave doubles the local
/// intensity relative to the travelling-wave average, giving the factor 4.
/// `relative_intensity` is |E|² at the interface over the antinode |E|² of
/// the adjacent air standing wave, so 1 is an antinode and 0 a node.
pub fn roughness_loss_ppm(
    sigma_rms_nm: f64,
    n_left: f64,
    n_right: f64,
    wavelength_nm: f64,
    relative_intensity: f64,
) -> Result<f64> {
    if !(sigma_rms_nm >= 0.0) {
        return Err(Error::invalid("sigma_rms_nm", "must be >= 0"));
    }
    positive("wavelength_nm", wavelength_nm)?;
    if !(0.0..=1.0).contains(&relative_intensity) {
        return Err(Error::invalid(
            "relative_intensity",
            format!("{relative_intensity} outside [0, 1]"),
        ));
    }
    let phase = 2.0 * PI * sigma_rms_nm * (n_left - n_right).abs() / wavelength_nm;
    Ok(4.0 * relative_intensity * phase * phase * 1e6)
}

/// Relative intensity at the fiber-facing membrane surface and the
/// resulting scattering loss, evaluated at the resonance near `wavelength_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceLoss {
    pub resonance_nm: f64,
    pub relative_intensity: f64,
    pub loss_ppm: f64,
}

pub fn membrane_roughness_loss(
    assembly: &CavityAssembly,
    wavelength_nm: f64,
) -> Result<InterfaceLoss> {
    let layout = assembly.layout();
    let (Some(m), Some(gap)) = (layout.membrane, layout.fiber_gap) else {
        return Err(Error::invalid(
            "assembly",
            "needs a fiber gap and a membrane",
        ));
    };
    let membrane = assembly.membrane().expect("layout has a membrane");
    let sigma = membrane.rough_top_nm().unwrap_or(0.0);
    let res = CavityModel::new(assembly).resonance_near(wavelength_nm)?;
    let field = solve_field(&assembly.flatten(), res.wavelength_nm)?;
    let air = &field.waves[gap];
    let edge = field.waves[m].intensity(0.0);
    let w = (edge / air.peak_intensity()).min(1.0);
    Ok(InterfaceLoss {
        resonance_nm: res.wavelength_nm,
        relative_intensity: w,
        loss_ppm: roughness_loss_ppm(sigma, membrane.material.n(), 1.0, res.wavelength_nm, w)?,
    })
}

/// Round-trip loss contributions, all in ppm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    pub t1_ppm: f64,
    pub t2_ppm: f64,
    pub loss1_ppm: f64,
    pub loss2_ppm: f64,
    #[serde(default)]
    pub scattering_ppm: f64,
    #[serde(default)]
    pub other_ppm: f64,
}

impl LossBudget {
    /// Two fixture coatings, empty cavity.
    pub fn coating() -> Self {
        Self {
            t1_ppm: COATING_TRANSMISSION_PPM,
            t2_ppm: COATING_TRANSMISSION_PPM,
            loss1_ppm: MIRROR_EXCESS_LOSS_PPM,
            loss2_ppm: MIRROR_EXCESS_LOSS_PPM,
            scattering_ppm: 0.0,
            other_ppm: 0.0,
        }
    }

    /// Coatings plus the measured membrane excess loss.
    pub fn with_membrane() -> Self {
        Self {
            scattering_ppm: MEMBRANE_EXCESS_LOSS_PPM,
            ..Self::coating()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t1_ppm,
            self.t2_ppm,
            self.loss1_ppm,
            self.loss2_ppm,
            self.scattering_ppm,
            self.other_ppm,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "loss budget",
                "entries must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn total_ppm(&self) -> f64 {
        self.t1_ppm
            + self.t2_ppm
            + self.loss1_ppm
            + self.loss2_ppm
            + self.scattering_ppm
            + self.other_ppm
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            t1_ppm: self.t1_ppm * k,
            t2_ppm: self.t2_ppm * k,
            loss1_ppm: self.loss1_ppm * k,
            loss2_ppm: self.loss2_ppm * k,
            scattering_ppm: self.scattering_ppm * k,
            other_ppm: self.other_ppm * k,
        }
    }
}

/// F = 2π / (total fractional round-trip loss).
pub fn finesse_from_losses(budget: &LossBudget) -> Result<f64> {
    budget.validate()?;
    let total = budget.total_ppm() * 1e-6;
    if total <= 0.0 {
        return Err(Error::invalid("loss budget", "total loss is zero"));
    }
    Ok(2.0 * PI / total)
}

/// Q = 2·L_eff·F/λ.
pub fn quality_factor(l_eff_um: f64, wavelength_nm: f64, finesse: f64) -> Result<f64> {
    positive("l_eff_um", l_eff_um)?;
    positive("wavelength_nm", wavelength_nm)?;
    positive("finesse", finesse)?;
    Ok(2.0 * l_eff_um * 1e3 * finesse / wavelength_nm)
}

/// Transverse and longitudinal mode figures of an assembly at a resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeGeometry {
    pub resonance_nm: f64,
    pub waist_um: f64,
    pub volume_um3: f64,
    pub volume_lambda3: f64,
    pub l_eff_um: f64,
    pub mode_order: i64,
    pub finesse: f64,
    pub quality_factor: f64,
}

/// The waist uses the beam length t_g + t_d/n_d + t_g2; volume and Q use the
/// effective length.
pub fn mode_geometry(
    assembly: &CavityAssembly,
    wavelength_nm: f64,
    budget: &LossBudget,
) -> Result<ModeGeometry> {
    let l = effective_length(assembly, wavelength_nm)?;
    let lam = l.resonance_nm;
    let waist_um = mode_waist_um(assembly.beam_length_nm() * 1e-3, assembly.r_c_um(), lam)?;
    let v = mode_volume(waist_um, l.l_eff_um, lam)?;
    let finesse = finesse_from_losses(budget)?;
    Ok(ModeGeometry {
        resonance_nm: lam,
        waist_um,
        volume_um3: v.um3,
        volume_lambda3: v.lambda_cubed,
        l_eff_um: l.l_eff_um,
        mode_order: CavityModel::new(assembly).phase_count(lam)?.round() as i64,
        finesse,
        quality_factor: quality_factor(l.l_eff_um, lam, finesse)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn waist_limits_and_identity() {
        let small: Vec<f64> = [1.0, 1e-4, 1e-8, 1e-16]
            .iter()
            .map(|&l| mode_waist_um(l, 45.0, 736.0).unwrap())
            .collect();
        assert!(small.windows(2).all(|w| w[1] < w[0]) && small[3] < 1e-3);
        let w = mode_waist_um(22.5, 45.0, 736.0).unwrap();
        assert!((w * w - 0.736 / PI * 22.5).abs() < 1e-12);
        assert!(matches!(
            mode_waist_um(45.0, 45.0, 736.0),
            Err(Error::UnstableResonator { .. })
        ));
        assert!(matches!(
            mode_waist_um(50.0, 45.0, 736.0),
            Err(Error::UnstableResonator { .. })
        ));
        assert!(
            mode_waist_um(10.0, 45.0, 800.0).unwrap() > mode_waist_um(10.0, 45.0, 700.0).unwrap()
        );
    }

    #[test]
    fn volume_scaling() {
        let a = mode_volume(1.4, 1.6, 736.0).unwrap();
        let b = mode_volume(1.4, 3.2, 736.0).unwrap();
        let c = mode_volume(2.8, 1.6, 736.0).unwrap();
        assert!((b.um3 / a.um3 - 2.0).abs() < 1e-12);
        assert!((c.um3 / a.um3 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn finesse_definition_and_errors() {
        let b = LossBudget {
            t1_ppm: 1500.0,
            t2_ppm: 1500.0,
            loss1_ppm: 0.0,
            loss2_ppm: 0.0,
            scattering_ppm: 0.0,
            other_ppm: 0.0,
        };
        assert!((finesse_from_losses(&b).unwrap() - 2.0 * PI / 0.003).abs() < 1e-9);
        assert!(finesse_from_losses(&b.scaled(0.0)).is_err());
        let neg = LossBudget {
            other_ppm: -1.0,
            ..b
        };
        assert!(finesse_from_losses(&neg).is_err());
    }

    #[test]
    fn quality_factor_direct() {
        let q = quality_factor(10.0, 737.0, 2200.0).unwrap();
        assert!((q - 5.97e4).abs() / 5.97e4 < 1e-3);
        assert!((quality_factor(20.0, 737.0, 2200.0).unwrap() / q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn roughness_zero_and_range() {
        assert_eq!(
            roughness_loss_ppm(0.0, 2.417, 1.0, 736.0, 1.0).unwrap(),
            0.0
        );
        assert!(roughness_loss_ppm(1.0, 2.417, 1.0, 736.0, 1.5).is_err());
        assert!(roughness_loss_ppm(-1.0, 2.417, 1.0, 736.0, 0.5).is_err());
    }

    #[test]
    fn membrane_interface_weight_is_a_fraction() {
        let a = CavityAssembly::reference(10_000.0).unwrap();
        let r = membrane_roughness_loss(&a, 737.0).unwrap();
        assert!((0.0..=1.0).contains(&r.relative_intensity));
        assert!(r.loss_ppm >= 0.0);
    }

    proptest! {
        #[test]
        fn finesse_scales_inversely(k in 0.01f64..100.0) {
            let b = LossBudget::with_membrane();
            let f = finesse_from_losses(&b).unwrap();
            prop_assert!((finesse_from_losses(&b.scaled(k)).unwrap() * k / f - 1.0).abs() < 1e-12);
        }

        #[test]
        fn roughness_monotone(s1 in 0.0f64..10.0, ds in 0.0f64..5.0, dn in 0.0f64..2.0, ddn in 0.0f64..1.0, w in 0.01f64..1.0) {
            let a = roughness_loss_ppm(s1, 1.0 + dn, 1.0, 736.0, w).unwrap();
            prop_assert!(roughness_loss_ppm(s1 + ds, 1.0 + dn, 1.0, 736.0, w).unwrap() >= a);
            prop_assert!(roughness_loss_ppm(s1, 1.0 + dn + ddn, 1.0, 736.0, w).unwrap() >= a);
        }

        #[test]
        fn quality_factor_linear(l in 0.5f64..50.0, f in 10.0f64..1e5, k in 0.1f64..10.0) {
            let q = quality_factor(l, 737.0, f).unwrap();
            prop_assert!((quality_factor(l * k, 737.0, f).unwrap() / q - k).abs() < 1e-9 * k);
            prop_assert!((quality_factor(l, 737.0, f * k).unwrap() / q - k).abs() < 1e-9 * k);
        }

        #[test]
        fn waist_never_nan(l in 0.0f64..100.0) {
            match mode_waist_um(l, 45.0, 736.0) {
                Ok(w) => prop_assert!(l > 0.0 && l < 45.0 && w.is_finite() && w > 0.0),
                Err(_) => prop_assert!(l <= 0.0 || l >= 45.0),
            }
        }
    }
}
