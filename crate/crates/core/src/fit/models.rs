use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{lm_fit, FitResult, LmOptions, ParamSpec, Residuals};
use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};

/// A scalar model y(x; p) with an analytic gradient.
pub trait CurveModel: Sync {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> &'static [&'static str];
    fn value(&self, x: f64, p: &[f64]) -> f64;
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]);
}

/// Weighted residuals (model - y) * w for a [`CurveModel`].
pub struct CurveProblem<'a, M: CurveModel> {
    pub model: &'a M,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub weights: Option<Vec<f64>>,
}

impl<M: CurveModel> CurveProblem<'_, M> {
    fn w(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

impl<M: CurveModel> Residuals for CurveProblem<'_, M> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.model.value(self.x[i], p) - self.y[i]) * self.w(i);
        }
        Ok(())
    }

    fn jacobian(&self, p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let mut j = DMatrix::zeros(self.x.len(), p.len());
        let mut g = vec![0.0; p.len()];
        for i in 0..self.x.len() {
            self.model.gradient(self.x[i], p, &mut g);
            let w = self.w(i);
            for (k, gk) in g.iter().enumerate() {
                j[(i, k)] = gk * w;
            }
        }
        Some(Ok(j))
    }
}

/// Abscissa unit of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumUnit {
    #[default]
    Nanometer,
    Gigahertz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub unit: SpectrumUnit,
}

impl SpectrumTrace {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let t = Self {
            x,
            y,
            sigma: None,
            unit: SpectrumUnit::Nanometer,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        self.sigma = Some(sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::invalid("trace", "x and y lengths differ"));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("sigma", "must match x and be > 0"));
            }
        }
        if self.y.iter().chain(&self.x).any(|v| !v.is_finite()) {
            return Err(Error::invalid("trace", "non-finite value"));
        }
        let inc = self.x.windows(2).all(|w| w[1] > w[0]);
        let dec = self.x.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return Err(Error::invalid("x", "must be strictly monotonic"));
        }
        Ok(())
    }

    fn weights(&self) -> Option<Vec<f64>> {
        self.sigma
            .as_ref()
            .map(|s| s.iter().map(|v| 1.0 / v).collect())
    }
}

/// A (γ/2)² / ((x - c)² + (γ/2)²) + offset.
pub struct Lorentzian;

fn lorentz_shape(x: f64, c: f64, fwhm: f64) -> (f64, f64, f64) {
    let h2 = 0.25 * fwhm * fwhm;
    let d = x - c;
    let den = d * d + h2;
    let l = h2 / den;
    // dL/dc, dL/dfwhm
    (
        l,
        2.0 * d * h2 / (den * den),
        0.5 * fwhm * d * d / (den * den),
    )
}

impl CurveModel for Lorentzian {
    fn name(&self) -> &'static str {
        "lorentzian"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["center", "fwhm", "amplitude", "offset"]
    }
    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[2] * lorentz_shape(x, p[0], p[1]).0 + p[3]
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let (l, dc, dw) = lorentz_shape(x, p[0], p[1]);
        out[0] = p[2] * dc;
        out[1] = p[2] * dw;
        out[2] = l;
        out[3] = 1.0;
    }
}

/// Two Lorentzians sharing one width: [c1, c2, fwhm, a1, a2, offset].
pub struct DoubleLorentzian;

impl CurveModel for DoubleLorentzian {
    fn name(&self) -> &'static str {
        "double_lorentzian"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &[
            "center1",
            "center2",
            "fwhm",
            "amplitude1",
            "amplitude2",
            "offset",
        ]
    }
    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[3] * lorentz_shape(x, p[0], p[2]).0 + p[4] * lorentz_shape(x, p[1], p[2]).0 + p[5]
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let (l1, dc1, dw1) = lorentz_shape(x, p[0], p[2]);
        let (l2, dc2, dw2) = lorentz_shape(x, p[1], p[2]);
        out[0] = p[3] * dc1;
        out[1] = p[4] * dc2;
        out[2] = p[3] * dw1 + p[4] * dw2;
        out[3] = l1;
        out[4] = l2;
        out[5] = 1.0;
    }
}

/// v(T) = v0 + c T³.
pub struct CubicLaw;

impl CurveModel for CubicLaw {
    fn name(&self) -> &'static str {
        "cubic_temperature"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["value_at_0", "cubic_coeff"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * t.powi(3)
    }
    fn gradient(&self, t: f64, _p: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = t.powi(3);
    }
}

fn specs(names: &[&str], init: &[f64]) -> Vec<ParamSpec> {
    names
        .iter()
        .zip(init)
        .map(|(n, &v)| ParamSpec::new(*n, v))
        .collect()
}

/// Offset from the lower decile, peak from the maximum, width from the
/// half-maximum crossings around it.
fn peak_guess(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let offset = sorted[sorted.len() / 10];
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let half = offset + 0.5 * (ymax - offset);
    let mut lo = imax;
    while lo > 0 && y[lo] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < y.len() && y[hi] > half {
        hi += 1;
    }
    let span = (x[x.len() - 1] - x[0]).abs();
    let width = (x[hi] - x[lo]).abs().max(span / x.len() as f64 * 2.0);
    (x[imax], width, ymax - offset, offset)
}

fn check_peak(trace: &SpectrumTrace) -> Result<()> {
    trace.validate()?;
    let min = trace.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = trace.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if trace.x.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} spectrum points",
            trace.x.len()
        )));
    }
    if !(max - min > 1e-12 * max.abs().max(min.abs()).max(1e-300)) {
        return Err(Error::NoPeak("flat spectrum".into()));
    }
    Ok(())
}

pub fn fit_lorentzian(trace: &SpectrumTrace) -> Result<FitResult> {
    check_peak(trace)?;
    let (c, w, a, off) = peak_guess(&trace.x, &trace.y);
    let model = Lorentzian;
    let mut s = specs(model.param_names(), &[c, w, a, off]);
    s[1] = s[1].clone().bounded(0.0, f64::INFINITY);
    let problem = CurveProblem {
        model: &model,
        x: &trace.x,
        y: &trace.y,
        weights: trace.weights(),
    };
    let opts = LmOptions {
        absolute_sigma: trace.sigma.is_some(),
        ..Default::default()
    };
    let res = lm_fit(model.name(), &problem, &s, &opts)?;
    let amp = res.param("amplitude").expect("amplitude");
    if !(amp.value > 0.0) || amp.value < 2.0 * amp.uncertainty {
        return Err(Error::NoPeak(format!(
            "amplitude {:.3e} ± {:.3e} is not significant",
            amp.value, amp.uncertainty
        )));
    }
    Ok(res)
}

/// Splitting in GHz between two centers given in the trace unit.
fn splitting_ghz(unit: SpectrumUnit, c1: f64, c2: f64) -> (f64, f64, f64) {
    match unit {
        // ν = c/λ: returns value and ∂/∂c1, ∂/∂c2
        SpectrumUnit::Nanometer => {
            let k = SPEED_OF_LIGHT;
            let v = k / c1 - k / c2;
            (
                v.abs(),
                -k / (c1 * c1) * v.signum(),
                k / (c2 * c2) * v.signum(),
            )
        }
        SpectrumUnit::Gigahertz => ((c2 - c1).abs(), -(c2 - c1).signum(), (c2 - c1).signum()),
    }
}

/// Two largest local maxima of a lightly smoothed trace.
fn two_peaks(x: &[f64], y: &[f64]) -> Option<(usize, usize)> {
    let n = y.len();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut maxima: Vec<usize> = (1..n - 1)
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let first = *maxima.first()?;
    let second = maxima
        .iter()
        .skip(1)
        .find(|&&i| (x[i] - x[first]).abs() > 0.0)
        .copied()?;
    Some(if x[first] < x[second] {
        (first, second)
    } else {
        (second, first)
    })
}

/// Equal-width doublet. Centers are returned ordered, center1 < center2.
/// Adds `splitting_ghz` to the derived quantities.
pub fn fit_double_lorentzian_equal_width(trace: &SpectrumTrace) -> Result<FitResult> {
    check_peak(trace)?;
    let (c, w, a, off) = peak_guess(&trace.x, &trace.y);
    let (c1, c2, a1, a2, w0) = match two_peaks(&trace.x, &trace.y) {
        Some((i, j)) if (trace.y[i] - off) > 0.1 * a && (trace.y[j] - off) > 0.1 * a => {
            let sep = (trace.x[j] - trace.x[i]).abs();
            (
                trace.x[i],
                trace.x[j],
                trace.y[i] - off,
                trace.y[j] - off,
                (0.5 * sep).min(w),
            )
        }
        _ => (c - 0.25 * w, c + 0.25 * w, 0.5 * a, 0.5 * a, 0.5 * w),
    };
    let model = DoubleLorentzian;
    let mut s = specs(model.param_names(), &[c1, c2, w0, a1, a2, off]);
    s[2] = s[2].clone().bounded(0.0, f64::INFINITY);
    let problem = CurveProblem {
        model: &model,
        x: &trace.x,
        y: &trace.y,
        weights: trace.weights(),
    };
    let opts = LmOptions {
        absolute_sigma: trace.sigma.is_some(),
        ..Default::default()
    };
    let mut res = match lm_fit(model.name(), &problem, &s, &opts) {
        Ok(r) => r,
        Err(Error::SingularJacobian { .. }) => {
            return Err(Error::DegenerateData(
                "doublet fit is degenerate: peaks are merged".into(),
            ))
        }
        Err(e) => return Err(e),
    };
    if res.params[0].value > res.params[1].value {
        res.params.swap(0, 1);
        res.params.swap(3, 4);
        res.params[0].name = "center1".into();
        res.params[1].name = "center2".into();
        res.params[3].name = "amplitude1".into();
        res.params[4].name = "amplitude2".into();
        for row in res.covariance.iter_mut() {
            row.swap(0, 1);
            row.swap(3, 4);
        }
        res.covariance.swap(0, 1);
        res.covariance.swap(3, 4);
    }
    let (c1, c2) = (res.params[0].value, res.params[1].value);
    let (split, d1, d2) = splitting_ghz(trace.unit, c1, c2);
    let cv = &res.covariance;
    let var = d1 * d1 * cv[0][0] + d2 * d2 * cv[1][1] + 2.0 * d1 * d2 * cv[0][1];
    let var_x = cv[0][0] + cv[1][1] - 2.0 * cv[0][1];
    res.push_derived("splitting_ghz", split, var.max(0.0).sqrt());
    res.push_derived("splitting", (c2 - c1).abs(), var_x.max(0.0).sqrt());
    let fwhm = res.value("fwhm");
    if (c2 - c1).abs() < 0.25 * fwhm {
        res.warnings.push(format!(
            "degenerate doublet: splitting {:.4} below a quarter of the width {:.4}",
            (c2 - c1).abs(),
            fwhm
        ));
    }
    Ok(res)
}

/// v(T) = v0 + c T³ over a temperature series.
pub fn fit_cubic_temperature(series: &[(f64, f64)], sigma: Option<&[f64]>) -> Result<FitResult> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} temperatures, need 3",
            series.len()
        )));
    }
    let t: Vec<f64> = series.iter().map(|p| p.0).collect();
    let v: Vec<f64> = series.iter().map(|p| p.1).collect();
    if t.iter().all(|&x| x == t[0]) {
        return Err(Error::DegenerateData("all temperatures are equal".into()));
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let model = CubicLaw;
    let weights = sigma.map(|s| s.iter().map(|v| 1.0 / v).collect());
    let problem = CurveProblem {
        model: &model,
        x: &t,
        y: &v,
        weights,
    };
    let opts = LmOptions {
        absolute_sigma: sigma.is_some(),
        ..Default::default()
    };
    lm_fit(
        model.name(),
        &problem,
        &specs(model.param_names(), &[mean, 0.0]),
        &opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::lm::numeric_jacobian;
    use proptest::prelude::*;

    fn trace(model: &impl CurveModel, p: &[f64], lo: f64, hi: f64, n: usize) -> SpectrumTrace {
        let x: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let y = x.iter().map(|&x| model.value(x, p)).collect();
        SpectrumTrace::new(x, y).unwrap()
    }

    #[test]
    fn lorentzian_round_trip_and_symmetry() {
        let t = trace(&Lorentzian, &[738.7, 5.0, 100.0, 3.0], 720.0, 760.0, 401);
        let r = fit_lorentzian(&t).unwrap();
        assert!((r.value("center") - 738.7).abs() < 1e-8);
        assert!((r.value("fwhm") / 5.0 - 1.0).abs() < 1e-6);
        let t = trace(&Lorentzian, &[740.0, 3.0, 1.0, 0.0], 730.0, 750.0, 201);
        assert!((fit_lorentzian(&t).unwrap().value("center") - 740.0).abs() < 1e-9);
    }

    #[test]
    fn flat_trace_is_no_peak() {
        let t = SpectrumTrace::new((0..50).map(|i| i as f64).collect(), vec![4.0; 50]).unwrap();
        assert!(matches!(fit_lorentzian(&t), Err(Error::NoPeak(_))));
    }

    #[test]
    fn doublet_ordering_and_splitting() {
        let t = trace(
            &DoubleLorentzian,
            &[737.25, 736.57, 0.3, 1.0, 0.8, 0.05],
            735.0,
            739.0,
            400,
        );
        let r = fit_double_lorentzian_equal_width(&t).unwrap();
        assert!(r.value("center1") < r.value("center2"));
        assert!((r.value("center1") - 736.57).abs() < 1e-7);
        assert!((r.value("amplitude1") - 0.8).abs() < 1e-6);
        let expect = SPEED_OF_LIGHT / 736.57 - SPEED_OF_LIGHT / 737.25;
        assert!((r.value("splitting_ghz") - expect).abs() < 1e-3);
    }

    #[test]
    fn single_peak_doublet_is_flagged() {
        let t = trace(&Lorentzian, &[737.0, 0.4, 1.0, 0.0], 735.0, 739.0, 400);
        match fit_double_lorentzian_equal_width(&t) {
            Ok(r) => assert!(!r.warnings.is_empty(), "{r:?}"),
            Err(e) => assert!(
                matches!(e, Error::DegenerateData(_) | Error::NotConverged { .. }),
                "{e}"
            ),
        }
    }

    #[test]
    fn doublet_unit_equivariance() {
        let p = [736.57, 737.25, 0.3, 1.0, 0.8, 0.05];
        let a = fit_double_lorentzian_equal_width(&trace(&DoubleLorentzian, &p, 735.0, 739.0, 400))
            .unwrap();
        let shift = 12.5;
        let q = [p[0] + shift, p[1] + shift, p[2], p[3], p[4], p[5]];
        let b = fit_double_lorentzian_equal_width(&trace(
            &DoubleLorentzian,
            &q,
            735.0 + shift,
            739.0 + shift,
            400,
        ))
        .unwrap();
        assert!((b.value("center1") - a.value("center1") - shift).abs() < 1e-8);
        assert!((b.value("fwhm") - a.value("fwhm")).abs() < 1e-9);
    }

    #[test]
    fn cubic_fits() {
        let s: Vec<(f64, f64)> = [4.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0]
            .iter()
            .map(|&t| (t, 736.86 + 7e-8 * t * t * t))
            .collect();
        let r = fit_cubic_temperature(&s, None).unwrap();
        assert!(
            (r.value("value_at_0") - 736.86).abs() < 1e-9,
            "{:?} {} {:?}",
            r.params,
            r.iterations,
            r.warnings
        );
        let flat: Vec<(f64, f64)> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&t| (t, 2.0 + 0.01 * (t / 10.0 - 2.5)))
            .collect();
        let r = fit_cubic_temperature(&[(10.0, 1.0), (20.0, 1.0), (30.0, 1.0)], None).unwrap();
        assert!(r.value("cubic_coeff").abs() < 1e-15);
        assert!(fit_cubic_temperature(&flat[..2], None).is_err());
        assert!(fit_cubic_temperature(&[(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)], None).is_err());
    }

    #[test]
    fn non_monotonic_axis_rejected() {
        assert!(SpectrumTrace::new(vec![0.0, 2.0, 1.0], vec![1.0; 3]).is_err());
    }

    fn check_gradient(model: &impl CurveModel, p: &[f64], x: &[f64]) {
        let y = vec![0.0; x.len()];
        let prob = CurveProblem {
            model,
            x,
            y: &y,
            weights: None,
        };
        let a = prob.jacobian(p).unwrap().unwrap();
        let n = numeric_jacobian(&prob, p, 1e-6).unwrap();
        for k in 0..p.len() {
            let scale = a.column(k).amax().max(1e-300);
            for (u, v) in a.column(k).iter().zip(n.column(k).iter()) {
                assert!((u - v).abs() <= 1e-6 * scale, "column {k}: {u} vs {v}");
            }
        }
    }

    proptest! {
        #[test]
        fn analytic_gradients_match_differences(
            c in 730.0f64..740.0, w in 0.2f64..5.0, a in 0.1f64..10.0, off in -1.0f64..1.0,
            d in 0.1f64..2.0,
        ) {
            let x: Vec<f64> = (0..40).map(|i| 728.0 + 0.4 * i as f64).collect();
            check_gradient(&Lorentzian, &[c, w, a, off], &x);
            check_gradient(&DoubleLorentzian, &[c, c + d, w, a, 0.5 * a, off], &x);
            check_gradient(&CubicLaw, &[c, a * 1e-6], &[4.0, 77.0, 150.0]);
        }
    }
}
