use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::response::{check_wavelength, reflection_coefficient, stack_response};
use crate::error::{Error, Result};
use crate::optics::{CavityAssembly, LayerStack};

/// Relative slope |dλ/dt_g| / (λ/t_g) above which a mode counts as air-like.
pub const AIR_LIKE_SLOPE: f64 = 0.6;
/// Relative slope below which a mode counts as diamond-like.
pub const DIAMOND_LIKE_SLOPE: f64 = 0.25;

const PHASE_STEP_NM: f64 = 1e-4;

fn wrap(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeCharacter {
    AirLike,
    DiamondLike,
    Mixed,
}

impl ModeCharacter {
    pub fn from_relative_slope(s: f64) -> Self {
        if s > AIR_LIKE_SLOPE {
            Self::AirLike
        } else if s < DIAMOND_LIKE_SLOPE {
            Self::DiamondLike
        } else {
            Self::Mixed
        }
    }
}

/// A root of the round-trip phase condition in the fiber gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub wavelength_nm: f64,
    /// Round-trip phase count; fixed along a continuous mode.
    pub order: i64,
    /// FWHM from the mirror amplitudes and the phase slope.
    pub linewidth_nm: f64,
    /// |r_left r_right| seen from inside the gap.
    pub mirror_product: f64,
    /// dΦ/dλ in rad/nm.
    pub phase_slope: f64,
}

/// The fiber gap as a two-mirror resonator: the fiber coating on one side and
/// the membrane plus plane mirror on the other, both seen from the gap.
#[derive(Debug, Clone)]
pub struct CavityModel {
    gap_nm: f64,
    left: LayerStack,
    right: LayerStack,
}

impl CavityModel {
    pub fn new(assembly: &CavityAssembly) -> Self {
        Self {
            gap_nm: assembly.gap_nm(),
            left: assembly.left_reflector(),
            right: assembly.right_reflector(),
        }
    }

    pub fn gap_nm(&self) -> f64 {
        self.gap_nm
    }

    pub fn reflections(&self, wavelength_nm: f64) -> Result<(Complex64, Complex64)> {
        Ok((
            reflection_coefficient(&self.left, wavelength_nm)?,
            reflection_coefficient(&self.right, wavelength_nm)?,
        ))
    }

    /// Round-trip phase in the gap, wrapped to (-π, π]. Zero on resonance.
    pub fn wrapped_phase(&self, wavelength_nm: f64) -> Result<f64> {
        let (rl, rr) = self.reflections(wavelength_nm)?;
        Ok(wrap(
            4.0 * PI * self.gap_nm / wavelength_nm + (rl * rr).arg(),
        ))
    }

    /// Continuous-valued mode count; an integer on resonance.
    pub fn phase_count(&self, wavelength_nm: f64) -> Result<f64> {
        let (rl, rr) = self.reflections(wavelength_nm)?;
        let phi =
            4.0 * PI * self.gap_nm / wavelength_nm + wrap(rl.arg() - PI) + wrap(rr.arg() - PI);
        Ok(phi / (2.0 * PI))
    }

    pub fn phase_slope(&self, wavelength_nm: f64) -> Result<f64> {
        let h = PHASE_STEP_NM;
        let up = self.wrapped_phase(wavelength_nm + h)?;
        let down = self.wrapped_phase(wavelength_nm - h)?;
        Ok(wrap(up - down) / (2.0 * h))
    }

    /// Newton iteration on the wrapped phase from `guess`.
    pub fn resonance_near(&self, guess_nm: f64) -> Result<Resonance> {
        check_wavelength(guess_nm)?;
        let mut lam = guess_nm;
        for _ in 0..60 {
            let s = self.wrapped_phase(lam)?;
            let slope = self.phase_slope(lam)?;
            if slope == 0.0 || !slope.is_finite() {
                break;
            }
            let step = (s / slope).clamp(-0.05 * lam, 0.05 * lam);
            lam -= step;
            check_wavelength(lam)
                .map_err(|_| Error::NoPeak(format!("iteration left λ > 0 from {guess_nm} nm")))?;
            if step.abs() < 1e-12 * lam {
                let order = self.phase_count(lam)?.round() as i64;
                return self.describe(lam, order);
            }
        }
        Err(Error::NoPeak(format!(
            "phase condition did not converge near {guess_nm} nm"
        )))
    }

    /// arg(r_L r_R) with the hard-mirror value 2π removed, in (-2π, 2π].
    fn mirror_phase(&self, lam: f64) -> Result<f64> {
        let (rl, rr) = self.reflections(lam)?;
        Ok(wrap(rl.arg() - PI) + wrap(rr.arg() - PI))
    }

    fn describe(&self, lam: f64, order: i64) -> Result<Resonance> {
        let (rl, rr) = self.reflections(lam)?;
        let rho = (rl * rr).norm();
        let slope = self.phase_slope(lam)?;
        let linewidth_nm = if rho >= 1.0 {
            0.0
        } else {
            2.0 * (1.0 - rho) / (rho.sqrt() * slope.abs())
        };
        Ok(Resonance {
            wavelength_nm: lam,
            order,
            linewidth_nm,
            mirror_product: rho,
            phase_slope: slope,
        })
    }

    /// Bracket every zero of the round-trip phase in [lo, hi] with an
    /// adaptive step that keeps the phase change per step below π/4.
    ///
    /// Orders come from the mirror phase unwrapped upwards from `lo`, so every
    /// root in the window gets its own label even where a reflector phase
    /// wraps. The mirror phases do not depend on the gap, so labels from the
    /// same window are comparable across gaps.
    pub fn resonances_in(&self, lo_nm: f64, hi_nm: f64) -> Result<Vec<Resonance>> {
        check_wavelength(lo_nm)?;
        if !(hi_nm > lo_nm) {
            return Err(Error::invalid(
                "wavelength_window",
                format!("[{lo_nm}, {hi_nm}] is empty"),
            ));
        }
        let max_step = (hi_nm - lo_nm) / 8.0;
        let count = |lam: f64, mirror: f64| (4.0 * PI * self.gap_nm / lam + mirror) / (2.0 * PI);
        let mut out = Vec::new();
        let mut lam = lo_nm;
        let mut s = self.wrapped_phase(lam)?;
        let mut mp_raw = self.mirror_phase(lam)?;
        let mut mp = mp_raw;
        let mut step = ((PI / 4.0) / self.phase_slope(lam)?.abs()).min(max_step);
        if s == 0.0 {
            out.push(self.describe(lam, count(lam, mp).round() as i64)?);
        }
        while lam < hi_nm {
            let next = (lam + step).min(hi_nm);
            let s_next = self.wrapped_phase(next)?;
            let dphi = wrap(s_next - s);
            if dphi.abs() > PI / 2.0 && next - lam > 1e-9 {
                step *= 0.5;
                continue;
            }
            let mp_next_raw = self.mirror_phase(next)?;
            let mp_next = mp + wrap(mp_next_raw - mp_raw);
            if s_next == 0.0 {
                out.push(self.describe(next, count(next, mp_next).round() as i64)?);
            } else if s * s_next < 0.0 && (s - s_next).abs() < PI {
                let root = self.bracketed_root(lam, next, s, s_next)?;
                let mp_root = mp + wrap(self.mirror_phase(root)? - mp_raw);
                out.push(self.describe(root, count(root, mp_root).round() as i64)?);
            }
            let h = next - lam;
            lam = next;
            s = s_next;
            mp = mp_next;
            mp_raw = mp_next_raw;
            step = if dphi.abs() > 0.0 {
                (h * (PI / 4.0) / dphi.abs()).min(max_step)
            } else {
                max_step
            };
        }
        Ok(out)
    }

    /// Illinois regula falsi on the wrapped phase.
    fn bracketed_root(&self, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64> {
        let mut side = 0;
        for _ in 0..200 {
            let c = (a * fb - b * fa) / (fb - fa);
            if (b - a).abs() < 1e-13 * b {
                return Ok(c);
            }
            let fc = self.wrapped_phase(c)?;
            if fc == 0.0 {
                return Ok(c);
            }
            if fc * fb < 0.0 {
                a = b;
                fa = fb;
                side = 0;
            } else {
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            b = c;
            fb = fc;
        }
        Ok(0.5 * (a + b))
    }

    /// Resonant fiber gap closest to `gap_guess_nm` at a fixed wavelength.
    /// The mirror phases do not depend on the gap, so this is closed form.
    pub fn resonant_gap_near(&self, wavelength_nm: f64, gap_guess_nm: f64) -> Result<f64> {
        let (rl, rr) = self.reflections(wavelength_nm)?;
        let mirror_phase = (rl * rr).arg();
        let k4 = 4.0 * PI / wavelength_nm;
        let m = ((k4 * gap_guess_nm + mirror_phase) / (2.0 * PI)).round();
        let mut gap = (2.0 * PI * m - mirror_phase) / k4;
        if gap < 0.0 {
            gap += 2.0 * PI / k4;
        }
        Ok(gap)
    }
}

/// Tuning for [`find_resonances`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSearch {
    /// Peaks below this fraction of the strongest peak in the window are dropped.
    pub min_relative_transmission: f64,
    /// Grid points across ±1.5 linewidths for the log-T refinement.
    pub refine_points: usize,
}

impl Default for ResonanceSearch {
    fn default() -> Self {
        Self {
            min_relative_transmission: 1e-3,
            refine_points: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonancePoint {
    pub gap_nm: f64,
    pub wavelength_nm: f64,
    pub mode_order: i64,
    pub character: ModeCharacter,
    pub transmission: f64,
    pub linewidth_nm: f64,
    /// |dλ/dt_g| relative to the empty-cavity value λ/t_g.
    pub relative_slope: f64,
}

fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let h = x[1] - x[0];
    let denom = y[0] - 2.0 * y[1] + y[2];
    if denom >= 0.0 {
        return None;
    }
    let off = 0.5 * h * (y[0] - y[2]) / denom;
    Some((x[1] + off, y[1] - 0.25 * (y[0] - y[2]) * off / h))
}

/// Transmission peak located by a local grid that puts several points inside
/// the linewidth, refined by a parabola through log T.
fn refine_peak(stack_at: &LayerStack, res: &Resonance, points: usize) -> Result<(f64, f64)> {
    let t_at = |lam: f64| stack_response(stack_at, lam).map(|r| r.transmittance);
    let w = res.linewidth_nm;
    if !(w > 0.0) || points < 3 {
        return Ok((res.wavelength_nm, t_at(res.wavelength_nm)?));
    }
    let h = 3.0 * w / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|i| res.wavelength_nm - 1.5 * w + h * i as f64)
        .collect();
    let t: Vec<f64> = grid.iter().map(|&l| t_at(l)).collect::<Result<_>>()?;
    let (imax, &tmax) = t
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if imax == 0 || imax == points - 1 || tmax <= 0.0 || t[imax - 1] <= 0.0 || t[imax + 1] <= 0.0 {
        return Ok((grid[imax], tmax));
    }
    let x = [grid[imax - 1], grid[imax], grid[imax + 1]];
    let y = [t[imax - 1].ln(), tmax.ln(), t[imax + 1].ln()];
    Ok(parabolic_vertex(x, y).map_or((grid[imax], tmax), |(xv, yv)| (xv, yv.exp())))
}

/// Transmission resonances of the full assembly at one gap.
///
/// Candidates come from the round-trip phase condition in the fiber gap; each
/// is then refined on the transmission of the flattened stack. Orders are the
/// round-trip phase count, which at fixed wavelength steps by one per λ/2 of
/// gap.
pub fn find_resonances(
    assembly: &CavityAssembly,
    wavelength_window: (f64, f64),
    search: &ResonanceSearch,
) -> Result<Vec<ResonancePoint>> {
    let (lo, hi) = wavelength_window;
    let model = CavityModel::new(assembly);
    let stack = assembly.flatten();
    let gap = assembly.gap_nm();
    let mut points = Vec::new();
    for res in model.resonances_in(lo, hi)? {
        let (lam, t) = refine_peak(&stack, &res, search.refine_points)?;
        if !(lo..=hi).contains(&lam) {
            continue;
        }
        let dlam_dgap = -(4.0 * PI / res.wavelength_nm) / res.phase_slope;
        let relative_slope = if gap > 0.0 {
            dlam_dgap.abs() / (res.wavelength_nm / gap)
        } else {
            0.0
        };
        points.push(ResonancePoint {
            gap_nm: gap,
            wavelength_nm: lam,
            mode_order: res.order,
            character: ModeCharacter::from_relative_slope(relative_slope),
            transmission: t,
            linewidth_nm: res.linewidth_nm,
            relative_slope,
        });
    }
    let tmax = points.iter().map(|p| p.transmission).fold(0.0, f64::max);
    points.retain(|p| {
        p.transmission > 0.0 && p.transmission >= search.min_relative_transmission * tmax
    });
    Ok(points)
}

/// Relabel resonances for continuity across a gap sweep.
///
/// The row at the largest gap keeps its phase-count labels. Each following
/// row (in decreasing gap) inherits the label of the nearest resonance of the
/// previous row when it lies within half the local mode spacing; unmatched
/// points keep their own label.
pub fn track_mode_orders(points: &mut [ResonancePoint]) {
    let mut gaps: Vec<f64> = points.iter().map(|p| p.gap_nm).collect();
    gaps.sort_by(|a, b| b.total_cmp(a));
    gaps.dedup();
    let mut prev: Vec<(f64, i64)> = Vec::new();
    for g in gaps {
        let mut row: Vec<&mut ResonancePoint> =
            points.iter_mut().filter(|p| p.gap_nm == g).collect();
        row.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        if !prev.is_empty() {
            let spacing = if prev.len() > 1 {
                prev.windows(2)
                    .map(|w| w[1].0 - w[0].0)
                    .fold(f64::INFINITY, f64::min)
            } else {
                f64::INFINITY
            };
            for p in row.iter_mut() {
                let nearest = prev
                    .iter()
                    .min_by(|a, b| {
                        (a.0 - p.wavelength_nm)
                            .abs()
                            .total_cmp(&(b.0 - p.wavelength_nm).abs())
                    })
                    .expect("non-empty");
                if (nearest.0 - p.wavelength_nm).abs() < 0.5 * spacing {
                    p.mode_order = nearest.1;
                }
            }
        }
        prev = row
            .iter()
            .map(|p| (p.wavelength_nm, p.mode_order))
            .collect();
    }
}
