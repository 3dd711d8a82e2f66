use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::lm::{lm_fit, FitResult, LmOptions, ParamSpec};
use super::models::{CurveModel, CurveProblem};
use super::special::erfcx;
use crate::error::{Error, Result};

/// Binned photon arrival times after the excitation pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub t_ns: Vec<f64>,
    pub counts: Vec<f64>,
    pub bin_width_ns: f64,
}

impl DecayTrace {
    /// Validates a uniform time grid and non-negative counts.
    pub fn new(t_ns: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if t_ns.len() != counts.len() {
            return Err(Error::invalid("trace", "t and counts lengths differ"));
        }
        if t_ns.len() < 8 {
            return Err(Error::InsufficientData(format!("{} bins", t_ns.len())));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("counts", "must be finite and >= 0"));
        }
        let bin = (t_ns[t_ns.len() - 1] - t_ns[0]) / (t_ns.len() - 1) as f64;
        if !(bin > 0.0)
            || t_ns
                .windows(2)
                .any(|w| ((w[1] - w[0]) - bin).abs() > 1e-6 * bin)
        {
            return Err(Error::NonUniformSampling(
                "decay bins must be equally spaced".into(),
            ));
        }
        Ok(Self {
            t_ns,
            counts,
            bin_width_ns: bin,
        })
    }

    fn peak_index(&self) -> usize {
        self.counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Poisson weights 1/σ with σ = √max(counts, 1).
    fn weights(&self, from: usize) -> Vec<f64> {
        self.counts[from..]
            .iter()
            .map(|c| 1.0 / c.max(1.0).sqrt())
            .collect()
    }
}

/// A exp(-(t - t0)/τ) + bg, for t ≥ t0. Parameters [tau, amplitude, background].
pub struct MonoExp {
    pub t0: f64,
}

impl CurveModel for MonoExp {
    fn name(&self) -> &'static str {
        "mono_exponential"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["tau", "amplitude", "background"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[1] * (-(t - self.t0) / p[0]).exp() + p[2]
    }
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let e = (-(t - self.t0) / p[0]).exp();
        out[0] = p[1] * e * (t - self.t0) / (p[0] * p[0]);
        out[1] = e;
        out[2] = 1.0;
    }
}

/// A exp(-((t - t0)/τ)^β) + bg, for t ≥ t0.
/// Parameters [tau, beta, amplitude, background].
pub struct Kohlrausch {
    pub t0: f64,
}

impl CurveModel for Kohlrausch {
    fn name(&self) -> &'static str {
        "kohlrausch"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["tau", "beta", "amplitude", "background"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        let u = ((t - self.t0) / p[0]).max(0.0);
        p[2] * (-u.powf(p[1])).exp() + p[3]
    }
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let u = ((t - self.t0) / p[0]).max(0.0);
        let ub = u.powf(p[1]);
        let e = (-ub).exp();
        out[0] = p[2] * e * p[1] * ub / p[0];
        out[1] = if u > 0.0 {
            -p[2] * e * ub * u.ln()
        } else {
            0.0
        };
        out[2] = e;
        out[3] = 1.0;
    }
}

/// Exponential decay convolved with a Gaussian instrument response.
/// Parameters [tau, mu_irf, sigma_irf, amplitude, background]; for σ → 0 the
/// amplitude is the height just after μ.
pub struct Emg;

struct EmgTerms {
    /// e^a erfc(x)
    g: f64,
    /// ∂g/∂a and ∂g/∂x
    dg_da: f64,
    dg_dx: f64,
    a_parts: (f64, f64, f64),
    x_parts: (f64, f64, f64),
}

fn emg_terms(t: f64, tau: f64, mu: f64, sigma: f64) -> EmgTerms {
    let lam = 1.0 / tau;
    let a = lam * (mu - t) + 0.5 * lam * lam * sigma * sigma;
    let x = (mu + lam * sigma * sigma - t) / (SQRT_2 * sigma);
    // a - x² = -(t - μ)² / 2σ², finite for every t.
    let gauss = (-(t - mu) * (t - mu) / (2.0 * sigma * sigma)).exp();
    let g = if x > 0.0 {
        gauss * erfcx(x)
    } else {
        a.exp() * erfc(x)
    };
    let dg_dx = -2.0 / PI.sqrt() * gauss;
    EmgTerms {
        g,
        dg_da: g,
        dg_dx,
        // ∂a/∂λ, ∂a/∂μ, ∂a/∂σ
        a_parts: ((mu - t) + lam * sigma * sigma, lam, lam * lam * sigma),
        // ∂x/∂λ, ∂x/∂μ, ∂x/∂σ
        x_parts: (
            sigma / SQRT_2,
            1.0 / (SQRT_2 * sigma),
            -(mu - t) / (SQRT_2 * sigma * sigma) + lam / SQRT_2,
        ),
    }
}

impl CurveModel for Emg {
    fn name(&self) -> &'static str {
        "emg"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["tau", "mu_irf", "sigma_irf", "amplitude", "background"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        0.5 * p[3] * emg_terms(t, p[0], p[1], p[2]).g + p[4]
    }
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let e = emg_terms(t, p[0], p[1], p[2]);
        let h = 0.5 * p[3];
        let d = |ia: f64, ix: f64| h * (e.dg_da * ia + e.dg_dx * ix);
        let dlam = d(e.a_parts.0, e.x_parts.0);
        out[0] = -dlam / (p[0] * p[0]);
        out[1] = d(e.a_parts.1, e.x_parts.1);
        out[2] = d(e.a_parts.2, e.x_parts.2);
        out[3] = 0.5 * e.g;
        out[4] = 1.0;
    }
}

/// Starting values for a tail fit from the peak bin onwards.
struct TailGuess {
    peak: usize,
    tau: f64,
    amplitude: f64,
    background: f64,
}

fn tail_guess(trace: &DecayTrace) -> Result<TailGuess> {
    let c = &trace.counts;
    let n = c.len();
    let peak = trace.peak_index();
    let tail_len = n - peak;
    if tail_len < 6 {
        return Err(Error::NotDecaying("peak is at the end of the trace".into()));
    }
    let cmax = c[peak];
    let last: Vec<f64> = c[n - (tail_len / 5).max(2)..].to_vec();
    let bg = last.iter().sum::<f64>() / last.len() as f64;
    if !(cmax > 0.0) || cmax - bg <= 0.2 * cmax.max(1.0) || cmax - bg < 3.0 * bg.max(1.0).sqrt() {
        return Err(Error::NotDecaying(format!(
            "peak {cmax} is not above the late level {bg:.3}"
        )));
    }
    // log-linear slope while counts stay well above background
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in peak..n {
        let s = c[i] - bg;
        if s < 0.1 * (cmax - bg) {
            break;
        }
        let (x, y) = (trace.t_ns[i] - trace.t_ns[peak], s.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1.0;
    }
    let slope = if m >= 2.0 {
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    } else {
        f64::NAN
    };
    let span = trace.t_ns[n - 1] - trace.t_ns[peak];
    let tau = if slope < 0.0 && slope.is_finite() {
        (-1.0 / slope).min(span)
    } else {
        span / 5.0
    };
    Ok(TailGuess {
        peak,
        tau,
        amplitude: cmax - bg,
        background: bg.max(0.0),
    })
}

fn poisson_opts() -> LmOptions {
    LmOptions {
        absolute_sigma: true,
        ..Default::default()
    }
}

fn coverage_warning(res: &mut FitResult, trace: &DecayTrace, from: usize) {
    let span = trace.t_ns[trace.t_ns.len() - 1] - trace.t_ns[from];
    let tau = res.value("tau");
    if span < 3.0 * tau {
        res.warnings.push(format!(
            "trace covers {:.2} τ after the peak, less than 3",
            span / tau
        ));
    }
}

fn fit_tail<M: CurveModel>(
    trace: &DecayTrace,
    model: &M,
    specs: &[ParamSpec],
    from: usize,
) -> Result<FitResult> {
    let problem = CurveProblem {
        model,
        x: &trace.t_ns[from..],
        y: &trace.counts[from..],
        weights: Some(trace.weights(from)),
    };
    let mut res = lm_fit(model.name(), &problem, specs, &poisson_opts())?;
    coverage_warning(&mut res, trace, from);
    Ok(res)
}

fn decay_specs(g: &TailGuess, span: f64) -> (ParamSpec, ParamSpec, ParamSpec) {
    (
        ParamSpec::new("tau", g.tau).bounded(1e-6 * span, 100.0 * span),
        ParamSpec::new("amplitude", g.amplitude).bounded(0.0, f64::INFINITY),
        ParamSpec::new("background", g.background).bounded(0.0, f64::INFINITY),
    )
}

/// Mono-exponential tail fit starting at the peak bin.
pub fn fit_decay_mono(trace: &DecayTrace) -> Result<FitResult> {
    let g = tail_guess(trace)?;
    let span = trace.t_ns[trace.t_ns.len() - 1] - trace.t_ns[0];
    let (tau, amp, bg) = decay_specs(&g, span);
    fit_tail(
        trace,
        &MonoExp {
            t0: trace.t_ns[g.peak],
        },
        &[tau, amp, bg],
        g.peak,
    )
}

/// Stretched-exponential tail fit; `beta_fixed` pins the stretch exponent.
pub fn fit_decay_kohlrausch_with(trace: &DecayTrace, beta_fixed: Option<f64>) -> Result<FitResult> {
    let g = tail_guess(trace)?;
    let span = trace.t_ns[trace.t_ns.len() - 1] - trace.t_ns[0];
    let (tau, amp, bg) = decay_specs(&g, span);
    let beta = ParamSpec::new("beta", beta_fixed.unwrap_or(1.0))
        .bounded(0.1, 1.5)
        .fixed(beta_fixed.is_some());
    fit_tail(
        trace,
        &Kohlrausch {
            t0: trace.t_ns[g.peak],
        },
        &[tau, beta, amp, bg],
        g.peak,
    )
}

pub fn fit_decay_kohlrausch(trace: &DecayTrace) -> Result<FitResult> {
    fit_decay_kohlrausch_with(trace, None)
}

/// Full-trace fit of the exponentially modified Gaussian; σ_irf is bounded
/// below by a tenth of the bin width.
pub fn fit_decay_emg(trace: &DecayTrace) -> Result<FitResult> {
    let g = tail_guess(trace)?;
    let span = trace.t_ns[trace.t_ns.len() - 1] - trace.t_ns[0];
    let bin = trace.bin_width_ns;
    let (tau, _, bg) = decay_specs(&g, span);
    // Rising edge: first bin above half the peak.
    let c = &trace.counts;
    let half = g.background + 0.5 * g.amplitude;
    let rise = (0..=g.peak).find(|&i| c[i] >= half).unwrap_or(g.peak);
    let sigma0 = ((trace.t_ns[g.peak] - trace.t_ns[rise]) / 2.0).max(bin);
    let mu0 = trace.t_ns[rise];
    let specs = [
        tau,
        ParamSpec::new("mu_irf", mu0).bounded(trace.t_ns[0] - span, trace.t_ns[0] + span),
        ParamSpec::new("sigma_irf", sigma0).bounded(0.1 * bin, span),
        ParamSpec::new("amplitude", g.amplitude * 1.2).bounded(0.0, f64::INFINITY),
        bg,
    ];
    let emg = Emg;
    let problem = CurveProblem {
        model: &emg,
        x: &trace.t_ns,
        y: &trace.counts,
        weights: Some(trace.weights(0)),
    };
    let mut res = lm_fit(emg.name(), &problem, &specs, &poisson_opts())?;
    coverage_warning(&mut res, trace, g.peak);
    Ok(res)
}

/// Lifetime from all three models with the spread as a conservative range.
#[derive(Debug, Clone, Serialize)]
pub struct ConservativeLifetime {
    /// Kohlrausch value.
    pub tau_best: Option<f64>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub mono: std::result::Result<FitResult, String>,
    pub kohlrausch: std::result::Result<FitResult, String>,
    pub emg: std::result::Result<FitResult, String>,
}

impl ConservativeLifetime {
    pub fn all_converged(&self) -> bool {
        self.mono.is_ok() && self.kohlrausch.is_ok() && self.emg.is_ok()
    }

    pub fn failures(&self) -> Vec<(&'static str, &str)> {
        [
            ("mono", &self.mono),
            ("kohlrausch", &self.kohlrausch),
            ("emg", &self.emg),
        ]
        .into_iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| (n, e.as_str())))
        .collect()
    }
}

/// Runs all three fits. Failures are kept per model rather than aborting;
/// bounds use whichever models converged.
pub fn lifetime_with_conservative_bounds(trace: &DecayTrace) -> ConservativeLifetime {
    let s = |r: Result<FitResult>| r.map_err(|e| e.to_string());
    let mono = s(fit_decay_mono(trace));
    let kohlrausch = s(fit_decay_kohlrausch(trace));
    let emg = s(fit_decay_emg(trace));
    let taus: Vec<f64> = [&mono, &kohlrausch, &emg]
        .iter()
        .filter_map(|r| r.as_ref().ok().map(|f| f.value("tau")))
        .collect();
    ConservativeLifetime {
        tau_best: kohlrausch.as_ref().ok().map(|f| f.value("tau")),
        tau_min: taus.iter().cloned().reduce(f64::min),
        tau_max: taus.iter().cloned().reduce(f64::max),
        mono,
        kohlrausch,
        emg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::lm::numeric_jacobian;
    use crate::fit::lm::Residuals;
    use crate::fit::synth::{synthesize_decay, DecaySynth};

    fn noiseless(tau: f64, sigma_irf: f64, bg: f64) -> DecayTrace {
        synthesize_decay::<rand_chacha::ChaCha8Rng>(
            &DecaySynth {
                tau_ns: tau,
                sigma_irf_ns: sigma_irf,
                background: bg,
                ..Default::default()
            },
            None,
        )
        .unwrap()
    }

    #[test]
    fn mono_round_trip() {
        let r = fit_decay_mono(&noiseless(1.3, 0.0, 0.0)).unwrap();
        assert!(
            (r.value("tau") / 1.3 - 1.0).abs() < 1e-6,
            "{}",
            r.value("tau")
        );
        let r = fit_decay_mono(&noiseless(1.3, 0.0, 25.0)).unwrap();
        assert!((r.value("tau") / 1.3 - 1.0).abs() < 1e-6);
        assert!((r.value("background") - 25.0).abs() < 1e-4);
    }

    #[test]
    fn kohlrausch_reduces_to_mono() {
        let t = noiseless(1.36, 0.0, 5.0);
        let m = fit_decay_mono(&t).unwrap();
        let k = fit_decay_kohlrausch_with(&t, Some(1.0)).unwrap();
        assert!((m.value("tau") / k.value("tau") - 1.0).abs() < 1e-6);
    }

    #[test]
    fn emg_never_overflows_far_before_the_pulse() {
        let p = [0.3, 50.0, 0.01, 1.0, 0.0];
        for t in [-1e4, -100.0, 0.0, 49.0] {
            let v = Emg.value(t, &p);
            assert!(v.is_finite() && v.abs() < 1e-12, "{t}: {v}");
        }
        let mut g = [0.0; 5];
        Emg.gradient(-1e4, &p, &mut g);
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn emg_gradient_matches_differences() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let y = vec![0.0; t.len()];
        for p in [
            [1.36, 2.0, 0.15, 1000.0, 3.0],
            [0.5, 1.0, 0.6, 10.0, 0.0],
            [2.0, 3.0, 0.02, 50.0, 1.0],
        ] {
            let prob = CurveProblem {
                model: &Emg,
                x: &t,
                y: &y,
                weights: None,
            };
            let a = prob.jacobian(&p).unwrap().unwrap();
            let n = numeric_jacobian(&prob, &p, 1e-7).unwrap();
            for (u, v) in a.iter().zip(n.iter()) {
                assert!((u - v).abs() <= 1e-6 * a.amax(), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn flat_trace_is_not_decaying() {
        let t =
            DecayTrace::new((0..100).map(|i| i as f64 * 0.1).collect(), vec![50.0; 100]).unwrap();
        assert!(matches!(fit_decay_mono(&t), Err(Error::NotDecaying(_))));
        let report = lifetime_with_conservative_bounds(&t);
        assert!(!report.all_converged());
        assert_eq!(report.failures().len(), 3);
        assert!(report.tau_min.is_none());
    }

    #[test]
    fn non_uniform_bins_rejected() {
        let mut t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        t[5] = 5.5;
        assert!(matches!(
            DecayTrace::new(t, vec![1.0; 20]),
            Err(Error::NonUniformSampling(_))
        ));
    }
}
