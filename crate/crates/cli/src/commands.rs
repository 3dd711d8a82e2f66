use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use membrane_cavity::constants::ZPL_LOW_T_NM;
use membrane_cavity::fit::synth::{
    synthesize_cubic_series, synthesize_decay, synthesize_doublet, DecaySynth, DoubletSynth,
};
use membrane_cavity::fit::{
    fit_cubic_temperature, fit_decay_emg, fit_decay_kohlrausch, fit_decay_mono,
    fit_double_lorentzian_equal_width, fit_lorentzian, lifetime_with_conservative_bounds,
    FitResult,
};
use membrane_cavity::io;
use membrane_cavity::metrics::{
    finesse_from_losses, membrane_roughness_loss, mode_geometry, roughness_loss_ppm, LossBudget,
};
use membrane_cavity::optics::{AssemblyConfig, CavityAssembly};
use membrane_cavity::purcell::{
    beta_collection, fit_lifetime_model, lifetime_ratio, predict_lifetime_curve,
    synthesize_lifetimes, EmitterParams, PurcellCurve, TabulatedPurcell,
};
use membrane_cavity::scan::{
    detect_scan_resonances, finesse_from_scan, fundamental_peaks, length_deviation, noise_spectrum,
    suppression, suppression_band_edge, synthesize_lock_traces, synthesize_scan, LockMeta,
    LockState, LockSynth, ScanSynth,
};
use membrane_cavity::tmm::{
    dispersion_map, find_resonances, fit_dispersion, synthesize_dispersion, track_mode_orders,
    CavityModel, DispersionGuess, DispersionPoint, ResonanceSearch,
};
use membrane_cavity::Error as CoreError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{Outputs, Provenance};
use crate::{
    Cli, Command, DecayModel, DispersionArgs, LockArgs, ModelFiles, PurcellArgs, SpectrumModel,
    SynthArgs, SynthKind,
};

/// Bad flags or configuration, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub struct Report {
    pub outputs: Outputs,
    pub summary: String,
    pub converged: bool,
}

impl Report {
    fn new(outputs: Outputs, summary: String) -> Self {
        Self {
            outputs,
            summary,
            converged: true,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Report> {
    let seed = cli.common.seed;
    match &cli.command {
        Command::Metrics { files, wavelength } => metrics(files, *wavelength),
        Command::Dispersion(a) => dispersion(a, seed),
        Command::Purcell(a) => purcell(a),
        Command::FitSpectrum { data, model } => fit_spectrum(data, *model),
        Command::FitDecay { data, model } => fit_decay(data, *model),
        Command::FitTdep { data } => fit_tdep(data),
        Command::FitLifetime {
            data,
            files,
            eta_fixed,
        } => fit_lifetime(data, files, *eta_fixed),
        Command::AnalyzeScan {
            data,
            prominence,
            rel_height,
        } => analyze_scan(data, *prominence, *rel_height),
        Command::AnalyzeLock(a) => analyze_lock(a),
        Command::Synth(a) => synth(a, seed),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!(usage(format!(
            "{what} file {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    require_file(path, what)?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        usage(format!(
            "invalid {what} {}: {e} (schema: see README)",
            path.display()
        ))
    })
}

/// Assembly, emitter and loss budget with the files they came from.
struct Model {
    config: AssemblyConfig,
    assembly: CavityAssembly,
    emitter: EmitterParams,
    budget: LossBudget,
    inputs: Vec<PathBuf>,
}

impl Model {
    fn load(files: &ModelFiles, default_gap_nm: f64) -> Result<Self> {
        let mut inputs = Vec::new();
        let config = match &files.config {
            Some(p) => {
                let c: AssemblyConfig = read_json(p, "assembly config")?;
                inputs.push(p.clone());
                c
            }
            None => AssemblyConfig::reference(default_gap_nm),
        };
        let assembly = config
            .build()
            .map_err(|e| usage(format!("invalid assembly config: {e} (schema: see README)")))?;
        let emitter = match &files.emitter {
            Some(p) => {
                inputs.push(p.clone());
                read_json(p, "emitter config")?
            }
            None => EmitterParams {
                implant_depth_nm: assembly.implant_depth_nm(),
                host_index: assembly.host_index(),
                ..EmitterParams::cd_line()
            },
        };
        emitter
            .validate()
            .map_err(|e| usage(format!("invalid emitter config: {e}")))?;
        let budget = match &files.budget {
            Some(p) => {
                inputs.push(p.clone());
                read_json(p, "loss budget")?
            }
            None => LossBudget::with_membrane(),
        };
        budget
            .validate()
            .map_err(|e| usage(format!("invalid loss budget: {e}")))?;
        Ok(Self {
            config,
            assembly,
            emitter,
            budget,
            inputs,
        })
    }

    fn provenance(&self, command: &str, args: Value, seed: Option<u64>) -> Result<Provenance> {
        let resolved = json!({ "assembly": self.config, "emitter": self.emitter, "budget": self.budget, "args": args });
        let mut p = Provenance::new(command, &resolved, seed)?;
        for i in &self.inputs {
            p.add_input(i)?;
        }
        Ok(p)
    }
}

fn data_provenance(command: &str, data: &[&Path], args: Value) -> Result<Provenance> {
    let mut p = Provenance::new(command, &args, None)?;
    for d in data {
        p.add_input(d)?;
    }
    Ok(p)
}

/// JSON for a fit and whether it converged; non-convergence is reported, not raised.
fn fit_outcome(r: Result<FitResult, CoreError>) -> Result<(Value, bool)> {
    match r {
        Ok(f) => {
            let ok = f.converged;
            Ok((serde_json::to_value(&f)?, ok))
        }
        Err(CoreError::NotConverged {
            iterations,
            chi_squared,
            best,
        }) => Ok((
            json!({ "converged": false, "iterations": iterations, "chi_squared": chi_squared, "best": best }),
            false,
        )),
        Err(e) => Err(e.into()),
    }
}

fn metrics(files: &ModelFiles, wavelength: Option<f64>) -> Result<Report> {
    let m = Model::load(files, 10_000.0)?;
    let lam = wavelength.unwrap_or(m.emitter.zpl_wavelength_nm);
    let a = &m.assembly;
    let gap = CavityModel::new(a).resonant_gap_near(lam, a.gap_nm())?;
    let tuned = a.with_gap(gap)?;
    let geom = mode_geometry(&tuned, lam, &m.budget)?;
    let membrane = match tuned.membrane() {
        Some(layer) => {
            let sigma = layer.rough_top_nm().unwrap_or(0.0);
            let interface = membrane_roughness_loss(&tuned, lam)?;
            Some(json!({
                "sigma_rms_nm": sigma,
                "interface": interface,
                "worst_case_loss_ppm": roughness_loss_ppm(sigma, tuned.host_index(), 1.0, lam, 1.0)?,
            }))
        }
        None => None,
    };
    let result = json!({
        "wavelength_nm": lam,
        "tuned_gap_nm": gap,
        "geometry": geom,
        "budget_total_ppm": m.budget.total_ppm(),
        "finesse_coating_only": finesse_from_losses(&LossBudget::coating())?,
        "finesse_with_membrane": finesse_from_losses(&LossBudget::with_membrane())?,
        "membrane_roughness": membrane,
    });
    let prov = m.provenance("metrics", json!({ "wavelength_nm": lam }), None)?;
    let mut out = Outputs::new();
    out.json("metrics.json", &prov, &result)?;
    let summary = format!(
        "gap {gap:.1} nm: w0 = {:.3} um, L_eff = {:.3} um, V = {:.2} lambda^3, F = {:.0}, Q = {:.3e}\n",
        geom.waist_um, geom.l_eff_um, geom.volume_lambda3, geom.finesse, geom.quality_factor
    );
    Ok(Report::new(out, summary))
}

fn dispersion(a: &DispersionArgs, seed: u64) -> Result<Report> {
    let m = Model::load(&a.files, a.gap_start)?;
    if a.gap_steps < 2
        || a.lambda_steps < 2
        || !(a.gap_stop > a.gap_start)
        || !(a.lambda_max > a.lambda_min)
    {
        bail!(usage(
            "need gap_stop > gap_start, lambda_max > lambda_min and at least 2 steps each"
        ));
    }
    if let Some(d) = &a.data {
        require_file(d, "resonance data")?;
    }
    let window = (a.lambda_min, a.lambda_max);
    let map = dispersion_map(
        &m.assembly,
        (a.gap_start, a.gap_stop),
        a.gap_steps,
        window,
        a.lambda_steps,
    )?;
    let mut resonances = Vec::new();
    for &g in &map.gaps_nm {
        resonances.extend(find_resonances(
            &m.assembly.with_gap(g)?,
            window,
            &ResonanceSearch::default(),
        )?);
    }
    track_mode_orders(&mut resonances);

    let args = json!({
        "gap_range_nm": [a.gap_start, a.gap_stop, a.gap_steps],
        "window_nm": [a.lambda_min, a.lambda_max, a.lambda_steps],
        "no_second_gap": a.no_second_gap,
        "guess": [a.guess_membrane_nm, a.guess_gap2_nm],
        "synth": [a.synth_noise_nm, a.synth_offset_nm],
    });
    let mut prov = m.provenance("dispersion", args, a.data.is_none().then_some(seed))?;
    if let Some(d) = &a.data {
        prov.add_input(d)?;
    }
    let mut out = Outputs::new();
    out.csv(
        "map.csv",
        &prov,
        &["gap_nm", "wavelength_nm", "T"],
        map.gaps_nm
            .iter()
            .enumerate()
            .flat_map(|(i, &g)| {
                map.wavelengths_nm
                    .iter()
                    .enumerate()
                    .map(move |(j, &l)| (i, j, g, l))
            })
            .map(|(i, j, g, l)| vec![g, l, map.get(i, j)]),
    );
    out.json("resonances.json", &prov, &resonances)?;
    let mut summary = format!(
        "{} resonances over {} gaps\n",
        resonances.len(),
        map.gaps_nm.len()
    );
    let mut converged = true;

    if !a.no_fit {
        let (points, truth) = match &a.data {
            Some(d) => (io::read_dispersion_points(d)?, None),
            None => {
                let truth = DispersionGuess {
                    membrane_nm: m.assembly.membrane_thickness_nm(),
                    gap2_nm: m.assembly.gap2_nm(),
                    gap_offset_nm: a.synth_offset_nm,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pts = synthesize_dispersion(
                    &m.assembly,
                    &truth,
                    &map.gaps_nm,
                    window,
                    a.synth_noise_nm,
                    &mut rng,
                )?;
                (pts, Some(truth))
            }
        };
        let frozen_guess = DispersionGuess {
            membrane_nm: a.guess_membrane_nm,
            gap2_nm: 0.0,
            gap_offset_nm: 0.0,
        };
        let (frozen, frozen_ok) =
            fit_outcome(fit_dispersion(&m.assembly, &points, &frozen_guess, false))?;
        converged &= frozen_ok;
        let free = if a.no_second_gap {
            None
        } else {
            let g = DispersionGuess {
                membrane_nm: a.guess_membrane_nm,
                gap2_nm: a.guess_gap2_nm,
                gap_offset_nm: 0.0,
            };
            let (v, ok) = fit_outcome(fit_dispersion(&m.assembly, &points, &g, true))?;
            converged &= ok;
            Some(v)
        };
        let chi = |v: &Value| v.get("chi_squared").and_then(Value::as_f64);
        let ratio = free.as_ref().and_then(|f| Some(chi(&frozen)? / chi(f)?));
        let param = |v: &Value, name: &str| -> Option<f64> {
            v.get("params")?
                .as_array()?
                .iter()
                .find(|p| p["name"] == name)?
                .get("value")?
                .as_f64()
        };
        let primary = free.as_ref().unwrap_or(&frozen);
        let _ = writeln!(
            summary,
            "{} fit: t_d = {:.1} nm, t_g2 = {:.1} nm, chi2 = {:.4}{}",
            if a.no_second_gap {
                "frozen-gap"
            } else {
                "free-gap"
            },
            param(primary, "membrane_nm").unwrap_or(f64::NAN),
            param(primary, "gap2_nm").unwrap_or(f64::NAN),
            chi(primary).unwrap_or(f64::NAN),
            ratio.map_or(String::new(), |r| format!(
                ", frozen/free chi2 ratio {r:.1}"
            ))
        );
        let result = json!({
            "points_source": if a.data.is_some() { "file" } else { "synthetic" },
            "truth": truth,
            "n_points": points.len(),
            "primary": if a.no_second_gap { "without_second_gap" } else { "with_second_gap" },
            "with_second_gap": free,
            "without_second_gap": frozen,
            "chi2_ratio_frozen_over_free": ratio,
        });
        out.json("fit.json", &prov, &result)?;
    }
    Ok(Report {
        outputs: out,
        summary,
        converged,
    })
}

fn parse_gaps(a: &PurcellArgs) -> Result<Vec<f64>> {
    let gaps: Vec<f64> = match &a.gaps {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| usage(format!("bad gap `{s}`: {e}")))
            })
            .collect::<Result<_>>()?,
        None => {
            let parts: Vec<f64> = a
                .gap_range
                .split(':')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| usage(format!("bad --gap-range `{}`: {e}", a.gap_range)))?;
            let [lo, hi, step] = parts[..] else {
                bail!(usage("--gap-range takes start:stop:step"));
            };
            if !(step > 0.0) {
                bail!(usage("--gap-range step must be > 0"));
            }
            (0..)
                .map(|k| lo + k as f64 * step)
                .take_while(|g| *g <= hi + 1e-9)
                .collect()
        }
    };
    if gaps.is_empty() {
        bail!(usage("empty gap list"));
    }
    if gaps.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        bail!(usage("gaps must be positive"));
    }
    Ok(gaps)
}

fn purcell(a: &PurcellArgs) -> Result<Report> {
    if let Some(fp) = a.fp {
        if !(fp >= 0.0) {
            bail!(usage("--fp must be >= 0"));
        }
        let summary = format!("F_p = {fp}: beta = {:.2}%\n", 100.0 * beta_collection(fp));
        return Ok(Report::new(Outputs::new(), summary));
    }
    let gaps = parse_gaps(a)?;
    let m = Model::load(&a.files, gaps[0])?;
    let curve = predict_lifetime_curve(&m.assembly, &gaps, &m.emitter, &m.budget, a.tau0, a.eta)?;
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .filter_map(|p| {
            let (op, r) = (p.point.as_ref()?, p.result.as_ref()?);
            Some(vec![
                op.gap_nm,
                op.l_eff_um,
                op.waist_um,
                op.volume_um3,
                op.q_c,
                op.q_eff,
                op.xi,
                op.f_p,
                r.tau_c_ns,
            ])
        })
        .collect();
    if rows.is_empty() {
        bail!(
            "no gap could be evaluated: {}",
            curve[0].flag.clone().unwrap_or_default()
        );
    }
    let shortest = curve
        .iter()
        .filter(|p| p.point.is_some())
        .min_by(|x, y| {
            x.point
                .unwrap()
                .l_eff_um
                .total_cmp(&y.point.unwrap().l_eff_um)
        })
        .expect("rows is non-empty");
    let flagged: Vec<_> = curve.iter().filter(|p| p.flag.is_some()).collect();
    let prov = m.provenance(
        "purcell",
        json!({ "gaps_nm": gaps, "tau0_ns": a.tau0, "eta_qe": a.eta }),
        None,
    )?;
    let mut out = Outputs::new();
    out.csv(
        "purcell.csv",
        &prov,
        &[
            "gap_nm",
            "l_eff_um",
            "waist_um",
            "volume_um3",
            "q_c",
            "q_eff",
            "xi",
            "f_p",
            "tau_c_ns",
        ],
        rows,
    );
    out.json(
        "purcell.json",
        &prov,
        &json!({ "points": curve, "shortest": shortest, "flagged": flagged.len() }),
    )?;
    let sp = shortest.point.unwrap();
    let summary = format!(
        "{} of {} gaps evaluated; shortest L_eff = {:.3} um: F_p = {:.4}, tau_c = {:.4} ns\n",
        curve.len() - flagged.len(),
        curve.len(),
        sp.l_eff_um,
        sp.f_p,
        shortest.result.unwrap().tau_c_ns
    );
    Ok(Report::new(out, summary))
}

fn single_fit(
    command: &str,
    data: &Path,
    args: Value,
    name: &str,
    r: Result<FitResult, CoreError>,
) -> Result<Report> {
    let prov = data_provenance(command, &[data], args)?;
    let (v, ok) = fit_outcome(r)?;
    let mut summary = String::new();
    for section in ["params", "derived"] {
        for p in v
            .get(section)
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
        {
            let _ = writeln!(
                summary,
                "{} = {} +/- {}",
                p["name"].as_str().unwrap_or("?"),
                p["value"],
                p["uncertainty"]
            );
        }
    }
    let mut out = Outputs::new();
    out.json(name, &prov, &v)?;
    Ok(Report {
        outputs: out,
        summary,
        converged: ok,
    })
}

fn fit_spectrum(data: &Path, model: SpectrumModel) -> Result<Report> {
    require_file(data, "spectrum")?;
    let trace = io::read_spectrum(data)?;
    let r = match model {
        SpectrumModel::Lorentz => fit_lorentzian(&trace),
        SpectrumModel::Doublet => fit_double_lorentzian_equal_width(&trace),
    };
    single_fit(
        "fit-spectrum",
        data,
        json!({ "model": format!("{model:?}") }),
        "fit_spectrum.json",
        r,
    )
}

fn fit_decay(data: &Path, model: DecayModel) -> Result<Report> {
    require_file(data, "decay")?;
    let trace = io::read_decay(data)?;
    let args = json!({ "model": format!("{model:?}") });
    let r = match model {
        DecayModel::Mono => fit_decay_mono(&trace),
        DecayModel::Kohlrausch => fit_decay_kohlrausch(&trace),
        DecayModel::Emg => fit_decay_emg(&trace),
        DecayModel::All => {
            let c = lifetime_with_conservative_bounds(&trace);
            let prov = data_provenance("fit-decay", &[data], args)?;
            let mut summary = String::new();
            for (name, r) in [
                ("mono", &c.mono),
                ("kohlrausch", &c.kohlrausch),
                ("emg", &c.emg),
            ] {
                match r {
                    Ok(f) => writeln!(
                        summary,
                        "{name}: tau = {:.4} +/- {:.4} ns",
                        f.value("tau"),
                        f.uncertainty("tau")
                    )?,
                    Err(e) => writeln!(summary, "{name}: failed: {e}")?,
                }
            }
            if let (Some(lo), Some(hi)) = (c.tau_min, c.tau_max) {
                writeln!(summary, "conservative range {lo:.4} .. {hi:.4} ns")?;
            }
            if c.failures().len() == 3 {
                bail!("every decay model failed: {:?}", c.failures());
            }
            let converged = c.all_converged();
            let mut out = Outputs::new();
            out.json("fit_decay.json", &prov, &c)?;
            return Ok(Report {
                outputs: out,
                summary,
                converged,
            });
        }
    };
    single_fit("fit-decay", data, args, "fit_decay.json", r)
}

fn fit_tdep(data: &Path) -> Result<Report> {
    require_file(data, "temperature series")?;
    let (series, sigma) = io::read_series(data)?;
    let r = fit_cubic_temperature(&series, sigma.as_deref());
    single_fit("fit-tdep", data, json!({}), "fit_tdep.json", r)
}

fn fit_lifetime(data: &Path, files: &ModelFiles, eta_fixed: Option<f64>) -> Result<Report> {
    require_file(data, "lifetime data")?;
    let samples = io::read_lifetimes(data)?;
    let (lmin, lmax) = samples.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| {
        (lo.min(s.l_eff_um), hi.max(s.l_eff_um))
    });
    let m = Model::load(files, 10_000.0)?;
    // L_eff exceeds the gap by the membrane and penetration; scan a margin around the data.
    let range = (((lmin - 2.0) * 1e3).max(500.0), (lmax + 1.0) * 1e3);
    let curve = TabulatedPurcell::scan(&m.assembly, range, &m.emitter, &m.budget)?;
    let zeta = m.emitter.debye_waller;
    let r = fit_lifetime_model(&samples, &curve, zeta, eta_fixed);
    let (v, ok) = fit_outcome(r)?;
    let mut prov = m.provenance(
        "fit-lifetime",
        json!({ "eta_fixed": eta_fixed, "gap_scan_nm": range }),
        None,
    )?;
    prov.add_input(data)?;
    let param = |n: &str| {
        v.get("params")?
            .as_array()?
            .iter()
            .find(|p| p["name"] == n)?
            .get("value")?
            .as_f64()
    };
    let mut summary = String::new();
    let mut predictions = Vec::new();
    if let (Some(tau0), Some(eta)) = (param("tau0"), param("eta_qe")) {
        writeln!(summary, "tau0 = {tau0:.4} ns, eta_qe = {eta:.3}")?;
        for s in &samples {
            let f = curve.purcell_at(s.l_eff_um)?;
            predictions.push(json!({
                "l_eff_um": s.l_eff_um, "f_p": f, "tau_ns": s.tau_ns,
                "model_tau_ns": tau0 / lifetime_ratio(f, eta, zeta)?,
            }));
        }
    }
    let mut out = Outputs::new();
    out.json(
        "fit_lifetime.json",
        &prov,
        &json!({ "fit": v, "points": predictions }),
    )?;
    Ok(Report {
        outputs: out,
        summary,
        converged: ok,
    })
}

fn analyze_scan(data: &Path, prominence: f64, rel_height: f64) -> Result<Report> {
    require_file(data, "scan")?;
    let trace = io::read_scan(data)?;
    let peaks = detect_scan_resonances(&trace, prominence)?;
    let fundamentals = fundamental_peaks(&peaks, rel_height);
    let finesse = finesse_from_scan(&fundamentals)?;
    let prov = data_provenance(
        "analyze-scan",
        &[data],
        json!({ "prominence": prominence, "rel_height": rel_height }),
    )?;
    let mut out = Outputs::new();
    out.json(
        "scan.json",
        &prov,
        &json!({ "finesse": finesse, "fundamentals": fundamentals, "all_peaks": peaks }),
    )?;
    let summary = format!(
        "{} peaks, {} fundamentals, finesse {finesse:.1}\n",
        peaks.len(),
        fundamentals.len()
    );
    Ok(Report::new(out, summary))
}

#[derive(Serialize)]
struct DeviationSummary {
    sigma_pm: f64,
    mean_pm: f64,
    clipped_count: usize,
    samples: usize,
    linewidth_pm: f64,
    sigma_fraction_of_linewidth: f64,
}

fn analyze_lock(a: &LockArgs) -> Result<Report> {
    require_file(&a.locked, "locked trace")?;
    require_file(&a.unlocked, "unlocked trace")?;
    let meta = match &a.meta {
        Some(p) => read_json::<LockMeta>(p, "lock metadata")?,
        None => LockMeta::new(a.wavelength, a.finesse),
    };
    meta.validate().map_err(|e| usage(e.to_string()))?;
    let locked = io::read_lock(&a.locked, LockState::Locked, meta)?;
    let unlocked = io::read_lock(&a.unlocked, LockState::Unlocked, meta)?;
    let dl = length_deviation(&locked)?;
    let du = length_deviation(&unlocked)?;
    let s = suppression(&dl, &du)?;
    let sl = noise_spectrum(&dl.filled(), locked.sample_rate_hz())?;
    let su = noise_spectrum(&du.filled(), unlocked.sample_rate_hz())?;
    let edge = suppression_band_edge(&sl, &su);
    let lines: Vec<_> = su.lines(20.0, 64).into_iter().take(10).collect();
    let summarize = |d: &membrane_cavity::scan::LengthDeviation| DeviationSummary {
        sigma_pm: d.sigma_pm,
        mean_pm: d.mean_pm,
        clipped_count: d.clipped_count,
        samples: d.delta_pm.len(),
        linewidth_pm: d.linewidth_pm,
        sigma_fraction_of_linewidth: d.sigma_pm / d.linewidth_pm,
    };
    let mut inputs: Vec<&Path> = vec![&a.locked, &a.unlocked];
    if let Some(p) = &a.meta {
        inputs.push(p);
    }
    let prov = data_provenance("analyze-lock", &inputs, json!({ "meta": meta }))?;
    let mut warnings = Vec::new();
    for (name, d) in [("locked", &dl), ("unlocked", &du)] {
        if d.clipped_count > 0 {
            warnings.push(format!(
                "{name}: {} samples at or past the fringe peak were excluded",
                d.clipped_count
            ));
        }
    }
    if let Err(e) = &edge {
        warnings.push(format!("no suppression band edge: {e}"));
    }
    let result = json!({
        "meta": meta,
        "locked": summarize(&dl),
        "unlocked": summarize(&du),
        "suppression": s,
        "band_edge_hz": edge.as_ref().ok(),
        "unlocked_lines": lines,
        "parseval_ratio": { "locked": sl.integrated_power() / sl.variance, "unlocked": su.integrated_power() / su.variance },
        "resolution_hz": su.resolution_hz,
        "warnings": warnings,
    });
    let mut out = Outputs::new();
    out.json("lock.json", &prov, &result)?;
    for (name, sp) in [("asd_locked.csv", &sl), ("asd_unlocked.csv", &su)] {
        out.csv(
            name,
            &prov,
            &["freq_hz", "asd_pm_per_rthz"],
            sp.freq_hz.iter().zip(&sp.asd).map(|(f, a)| vec![*f, *a]),
        );
    }
    let mut summary = format!(
        "sigma unlocked {:.1} pm, locked {:.1} pm, suppression {:.1}%",
        du.sigma_pm,
        dl.sigma_pm,
        100.0 * s
    );
    if let Ok(e) = edge {
        write!(summary, ", band edge {e:.0} Hz")?;
    }
    summary.push('\n');
    for l in &lines {
        writeln!(
            summary,
            "line {:.2} Hz, amplitude {:.1} pm",
            l.freq_hz, l.amplitude
        )?;
    }
    Ok(Report::new(out, summary))
}

fn synth(a: &SynthArgs, seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outputs::new();
    let kind = format!("{:?}", a.kind).to_lowercase();
    let mut inputs: Vec<&Path> = Vec::new();
    let summary;
    match a.kind {
        SynthKind::Doublet => {
            let cfg = DoubletSynth::default();
            let t = synthesize_doublet(&cfg, &mut rng)?;
            let prov = Provenance::new("synth doublet", &cfg, Some(seed))?;
            out.csv(
                "doublet.csv",
                &prov,
                &["wavelength_nm", "intensity"],
                t.x.iter().zip(&t.y).map(|(x, y)| vec![*x, *y]),
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!("doublet at {} / {} nm\n", cfg.center1_nm, cfg.center2_nm);
        }
        SynthKind::Decay => {
            let cfg = DecaySynth {
                sigma_irf_ns: 0.05,
                background: 2.0,
                ..Default::default()
            };
            let t = synthesize_decay(&cfg, Some(&mut rng))?;
            let prov = Provenance::new("synth decay", &cfg, Some(seed))?;
            out.csv(
                "decay.csv",
                &prov,
                &["t_ns", "counts"],
                t.t_ns.iter().zip(&t.counts).map(|(x, y)| vec![*x, *y]),
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!("decay with tau = {} ns\n", cfg.tau_ns);
        }
        SynthKind::Tdep => {
            let (v0, cubic, noise) = (ZPL_LOW_T_NM, 1.85e-8, 0.02);
            let temps: Vec<f64> = (0..15).map(|i| 10.0 + 20.0 * i as f64).collect();
            let s = synthesize_cubic_series(v0, cubic, &temps, noise, &mut rng);
            let cfg = json!({ "value_at_0": v0, "cubic_coeff": cubic, "noise": noise, "temperatures_k": temps });
            let prov = Provenance::new("synth tdep", &cfg, Some(seed))?;
            out.csv(
                "tdep.csv",
                &prov,
                &["temperature_k", "center_nm", "sigma_nm"],
                s.iter().map(|(t, v)| vec![*t, *v, noise]),
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!("T^3 series with intercept {v0} nm\n");
        }
        SynthKind::Lifetimes => {
            let m = Model::load(
                &ModelFiles {
                    config: a.config.clone(),
                    emitter: None,
                    budget: None,
                },
                10_000.0,
            )?;
            if let Some(c) = &a.config {
                inputs.push(c);
            }
            let curve =
                TabulatedPurcell::scan(&m.assembly, (8_000.0, 42_000.0), &m.emitter, &m.budget)?;
            let lengths: Vec<f64> = (0..30).map(|i| 10.0 + 30.0 * i as f64 / 29.0).collect();
            let (tau0, eta, noise) = (1.36, 0.51, 0.02);
            let s = synthesize_lifetimes(
                &curve,
                &lengths,
                tau0,
                eta,
                m.emitter.debye_waller,
                noise,
                &mut rng,
            )?;
            let cfg = json!({ "tau0_ns": tau0, "eta_qe": eta, "rel_noise": noise, "assembly": m.config, "emitter": m.emitter });
            let mut prov = Provenance::new("synth lifetimes", &cfg, Some(seed))?;
            for i in &inputs {
                prov.add_input(i)?;
            }
            out.csv(
                "lifetimes.csv",
                &prov,
                &["l_eff_um", "tau_ns", "sigma_ns"],
                s.iter().map(|p| vec![p.l_eff_um, p.tau_ns, p.sigma_ns]),
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!("{} lifetimes from tau0 = {tau0} ns, eta = {eta}\n", s.len());
        }
        SynthKind::Scan => {
            let cfg = ScanSynth::default();
            let t = synthesize_scan(&cfg, &mut rng)?;
            let prov = Provenance::new("synth scan", &cfg, Some(seed))?;
            out.csv(
                "scan.csv",
                &prov,
                &["length_nm", "transmission"],
                t.x.iter().zip(&t.transmission).map(|(x, y)| vec![*x, *y]),
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!("scan with finesse {}\n", cfg.finesse);
        }
        SynthKind::Lock => {
            let mut cfg = LockSynth::default();
            if let Some(n) = a.samples {
                if n < 1024 {
                    bail!(usage("--samples must be >= 1024"));
                }
                cfg.samples = n.next_power_of_two();
            }
            let pair = synthesize_lock_traces(&cfg, &mut rng)?;
            let prov = Provenance::new("synth lock", &cfg, Some(seed))?;
            for (name, t) in [
                ("locked.csv", &pair.locked),
                ("unlocked.csv", &pair.unlocked),
            ] {
                out.csv(
                    name,
                    &prov,
                    &["t_s", "transmission"],
                    t.t_s.iter().zip(&t.transmission).map(|(x, y)| vec![*x, *y]),
                );
            }
            out.raw(
                "lock_meta.json",
                serde_json::to_string_pretty(&cfg.meta)? + "\n",
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!(
                "lock pair, {} samples at {} Hz\n",
                cfg.samples, cfg.sample_rate_hz
            );
        }
        SynthKind::Dispersion => {
            let m = Model::load(
                &ModelFiles {
                    config: a.config.clone(),
                    emitter: None,
                    budget: None,
                },
                11_000.0,
            )?;
            if let Some(c) = &a.config {
                inputs.push(c);
            }
            let truth = DispersionGuess {
                membrane_nm: m.assembly.membrane_thickness_nm(),
                gap2_nm: m.assembly.gap2_nm(),
                gap_offset_nm: 0.0,
            };
            let proxies: Vec<f64> = (0..31).map(|i| 11_000.0 + 50.0 * i as f64).collect();
            let (window, noise) = ((700.0, 780.0), 0.05);
            let pts: Vec<DispersionPoint> =
                synthesize_dispersion(&m.assembly, &truth, &proxies, window, noise, &mut rng)?;
            let cfg = json!({ "truth": truth, "gap_proxies_nm": proxies, "window_nm": window, "noise_nm": noise, "assembly": m.config });
            let mut prov = Provenance::new("synth dispersion", &cfg, Some(seed))?;
            for i in &inputs {
                prov.add_input(i)?;
            }
            out.csv(
                "dispersion_points.csv",
                &prov,
                &["gap_proxy_nm", "wavelength_nm"],
                pts.iter().map(|p| vec![p.gap_proxy_nm, p.wavelength_nm]),
            );
            out.json("synth.json", &prov, &cfg)?;
            summary = format!("{} resonances over {} gaps\n", pts.len(), proxies.len());
        }
    }
    Ok(Report::new(out, format!("synth {kind}: {summary}")))
}
