use serde::Serialize;

use super::field::solve_field;
use super::resonance::CavityModel;
use crate::error::{Error, Result};
use crate::optics::CavityAssembly;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveLength {
    pub l_eff_um: f64,
    /// Wavelength the field was evaluated at (the nearby phase root).
    pub resonance_nm: f64,
    pub linewidth_nm: f64,
    /// Index of the normalising layer in the flattened stack.
    pub emitter_layer: usize,
    /// Depth of the first |E|^2 maximum inside the normalising layer.
    pub first_antinode_nm: Option<f64>,
}

/// Energy-weighted mode length.
///
/// Sums n^2 |E|^2 over every finite layer of the flattened stack (coatings
/// included, so penetration counts) and divides by n^2 |E|^2_max of the
/// emitter layer: the membrane, or the fiber gap for an empty cavity. The
/// integral is doubled so that a standing wave between hard mirrors returns
/// its geometric length.
///
/// `wavelength_nm` must lie within half a linewidth of a resonance (or 1e-9
/// relative for lossless mirrors).
pub fn effective_length(assembly: &CavityAssembly, wavelength_nm: f64) -> Result<EffectiveLength> {
    let res = CavityModel::new(assembly).resonance_near(wavelength_nm)?;
    let tol = (0.5 * res.linewidth_nm).max(1e-9 * res.wavelength_nm);
    if (wavelength_nm - res.wavelength_nm).abs() > tol {
        return Err(Error::OffResonance {
            wavelength_nm,
            resonance_nm: res.wavelength_nm,
            half_width_nm: tol,
        });
    }
    let layout = assembly.layout();
    let emitter = layout
        .emitter_layer()
        .ok_or_else(|| Error::invalid("assembly", "no gap or membrane to normalise against"))?;
    let field = solve_field(&assembly.flatten(), res.wavelength_nm)?;
    let w = &field.waves[emitter];
    let peak = w.index.re.powi(2) * w.peak_intensity();
    if !(peak > 0.0) {
        return Err(Error::DegenerateData(
            "zero field in the emitter layer".into(),
        ));
    }
    Ok(EffectiveLength {
        l_eff_um: 2.0 * field.energy_integral() / peak / 1000.0,
        resonance_nm: res.wavelength_nm,
        linewidth_nm: res.linewidth_nm,
        emitter_layer: emitter,
        first_antinode_nm: w.first_antinode_nm(),
    })
}
