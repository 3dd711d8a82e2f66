use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optics::{LayerStack, Medium};

/// Amplitude and power coefficients of a stack at one wavelength.
///
/// `r` and `t` are referenced to the entry and exit interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StackResponse {
    pub r: Complex64,
    pub t: Complex64,
    pub reflectance: f64,
    pub transmittance: f64,
    pub absorptance: f64,
}

/// Tangential (E, H) at a plane, with H in units of the vacuum admittance.
pub(crate) type State = (Complex64, Complex64);

pub(crate) fn check_wavelength(wavelength_nm: f64) -> Result<()> {
    if wavelength_nm.is_finite() && wavelength_nm > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "wavelength_nm",
            format!("{wavelength_nm} must be > 0"),
        ))
    }
}

/// State just inside the exit medium for a unit transmitted wave.
pub(crate) fn exit_state(exit: &Medium) -> State {
    match exit {
        Medium::Dielectric(m) => (Complex64::new(1.0, 0.0), m.complex_index()),
        Medium::PerfectConductor => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
    }
}

/// Characteristic matrix of one layer applied to the state at its right edge.
#[inline]
pub(crate) fn through_layer(
    n: Complex64,
    thickness_nm: f64,
    wavelength_nm: f64,
    s: State,
) -> State {
    let delta = n * (2.0 * std::f64::consts::PI * thickness_nm / wavelength_nm);
    let (sin, cos) = (delta.sin(), delta.cos());
    let i = Complex64::i();
    (
        cos * s.0 - i * sin / n * s.1,
        -i * n * sin * s.0 + cos * s.1,
    )
}

/// States at the left edge of every layer, plus the exit state at the end.
pub(crate) fn left_edge_states(stack: &LayerStack, wavelength_nm: f64) -> Vec<State> {
    let layers = stack.layers();
    let mut states = vec![exit_state(&stack.exit); layers.len() + 1];
    for (j, layer) in layers.iter().enumerate().rev() {
        states[j] = through_layer(
            layer.material.complex_index(),
            layer.thickness_nm(),
            wavelength_nm,
            states[j + 1],
        );
    }
    states
}

fn entry_state(stack: &LayerStack, wavelength_nm: f64) -> State {
    stack
        .layers()
        .iter()
        .rev()
        .fold(exit_state(&stack.exit), |s, l| {
            through_layer(
                l.material.complex_index(),
                l.thickness_nm(),
                wavelength_nm,
                s,
            )
        })
}

/// Split the entry-side state into incident and reflected amplitudes.
fn entry_amplitudes(stack: &LayerStack, s: State) -> Result<(Complex64, Complex64, Complex64)> {
    let n0 = match &stack.entry {
        Medium::Dielectric(m) => m.complex_index(),
        Medium::PerfectConductor => {
            return Err(Error::invalid(
                "entry",
                "a perfect conductor cannot be the incidence medium",
            ))
        }
    };
    let incident = (s.0 + s.1 / n0) * 0.5;
    let reflected = (s.0 - s.1 / n0) * 0.5;
    Ok((n0, incident, reflected))
}

/// Complex reflection amplitude seen from the entry medium.
pub fn reflection_coefficient(stack: &LayerStack, wavelength_nm: f64) -> Result<Complex64> {
    check_wavelength(wavelength_nm)?;
    let (_, a, b) = entry_amplitudes(stack, entry_state(stack, wavelength_nm))?;
    Ok(b / a)
}

pub fn stack_response(stack: &LayerStack, wavelength_nm: f64) -> Result<StackResponse> {
    check_wavelength(wavelength_nm)?;
    let (n0, a, b) = entry_amplitudes(stack, entry_state(stack, wavelength_nm))?;
    let r = b / a;
    let (t, transmittance) = match &stack.exit {
        Medium::Dielectric(m) => {
            let t = Complex64::new(1.0, 0.0) / a;
            (t, m.n() / n0.re * t.norm_sqr())
        }
        Medium::PerfectConductor => (Complex64::new(0.0, 0.0), 0.0),
    };
    let reflectance = r.norm_sqr();
    Ok(StackResponse {
        r,
        t,
        reflectance,
        transmittance,
        absorptance: 1.0 - reflectance - transmittance,
    })
}
