//! Subcommand bodies. Each returns a JSON summary and a CSV table.

use std::f64::consts::TAU;
use std::fs::File;
use std::path::Path;

use num_complex::Complex64;
use qmem_core::analysis::{fit_lorentzian, fit_lorentzian_complex, fit_ringdown, lorentzian};
use qmem_core::duffing::{
    backbone, bistable_range, fit_backbone, hysteresis_area, response_peak, sweep, DuffingParams, SweepDirection,
};
use qmem_core::electromech::{
    bvd_admittance, coupling_rate_gsm, fit_bvd, gsm_is_valid, scale_defects, BvdParams, DefectArraySpec, ShuntCircuit,
};
use qmem_core::io::{self, TraceKind};
use qmem_core::loss::{
    fit_loss_stack, total_q, ConstantChannel, LossStack, PowerLawChannel, QvsTDataset, ZenerChannel,
};
use qmem_core::phonon_chain::{
    bloch_decay, dispersion, find_band_gaps, find_defect_mode, mode_profile, transmission, ChainSpec, Segment,
    UnitCell,
};
use qmem_core::photoelastic::{
    detected_power, fresnel_amplitudes, mode_profile_scan, polarization_contrast, OpticalConfig, PhotoelasticTensor,
    StandingWaveMode,
};
use qmem_core::qdyn::{
    effective_coupling_chain, hybridized_decay, iswap, nominal_iswap_time, transfer_time, CouplingChain,
    DensityMatrix, Dims, DriveAmplitude, DriveSpec, GateKind, IswapOptions, ModeParams, TriModeSystem,
};
use qmem_core::{Frequency, Temperature};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use crate::config::{require, CellSection, ChainSection, DuffingSection, ProjectConfig, SegmentSection};
use crate::error::{compute, invalid, CliError};

pub struct Report {
    pub summary: Value,
    /// CSV with one header row.
    pub table: Vec<u8>,
}

fn table<I>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Compute(format!("formatting table: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Compute(e.to_string()))
}

fn hz(v: f64, pointer: &str) -> Result<Frequency, CliError> {
    Frequency::new(v).map_err(invalid(pointer))
}

pub struct Ctx {
    pub config: Option<ProjectConfig>,
    pub seed: u64,
}

impl Ctx {
    fn config(&self, command: &str) -> Result<&ProjectConfig, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("`{command}` needs --config <path>")))
    }
}

/// Circuit-derived system plus the numbers that went into it.
struct Assembled {
    sys: TriModeSystem,
    drive: DriveSpec,
    chain: CouplingChain,
    ledger: Value,
}

fn assemble(cfg: &ProjectConfig, command: &str, defects: Option<u32>) -> Result<Assembled, CliError> {
    let b = require(&cfg.bvd, "bvd", command)?;
    let sh = require(&cfg.shunt, "shunt", command)?;
    let s = require(&cfg.system, "system", command)?;
    let d = require(&cfg.drive, "drive", command)?;

    let mut bvd = BvdParams::with_resistance(b.c0, b.cm, b.lm, b.rm).map_err(invalid("/bvd"))?;
    if let Some(n) = defects {
        bvd = scale_defects(&bvd, DefectArraySpec::new(n).map_err(|e| CliError::Usage(e.to_string()))?);
    }
    let shunt = ShuntCircuit::new(sh.cr, sh.lr, sh.f_r).map_err(invalid("/shunt"))?;
    if !gsm_is_valid(&bvd, &shunt) {
        log::warn!("shunt capacitance is not ≫ C0 + Cm; the coupling formula is outside its range");
    }
    let f_m = hz(s.f_m, "/system/f_m_Hz")?;
    let g_sm_circuit = coupling_rate_gsm(&bvd, &shunt, f_m).hz();
    let g_sm = match s.g_sm {
        Some(g) => {
            log::info!("g_sm override {g} Hz replaces circuit value {g_sm_circuit} Hz");
            g
        }
        None => g_sm_circuit,
    };
    let f_s = s.f_s.unwrap_or_else(|| shunt.resonance().hz());
    let g_qs = match (s.g_qs, s.lambda_qs) {
        (Some(g), None) => g,
        (None, Some(l)) => l * (s.f_q - f_s),
        _ => {
            return Err(CliError::Config {
                pointer: "/system/g_qs_Hz".into(),
                message: "give exactly one of g_qs_Hz and lambda_qs".into(),
            })
        }
    };
    let qubit = ModeParams::new(s.f_q, s.gamma_q, s.anharmonicity_q)
        .and_then(|m| m.with_dephasing(s.dephasing_q))
        .map_err(invalid("/system"))?;
    let snail = ModeParams::linear(f_s, s.gamma_s).map_err(invalid("/system"))?;
    let mech = ModeParams::linear(s.f_m, s.gamma_m)
        .and_then(|m| m.with_dephasing(s.dephasing_m))
        .map_err(invalid("/system"))?;
    let sys = TriModeSystem::new(qubit, snail, mech, g_qs, g_sm, s.g3).map_err(invalid("/system"))?;

    let amplitude = match (d.n_s, d.epsilon) {
        (Some(n), None) => DriveAmplitude::Photons(n),
        (None, Some(e)) => DriveAmplitude::Epsilon(e),
        _ => {
            return Err(CliError::Config {
                pointer: "/drive/n_s".into(),
                message: "give exactly one of n_s and epsilon_Hz".into(),
            })
        }
    };
    let dressed = qmem_core::qdyn::dress(&sys).map_err(compute)?;
    let f_d = d.f_d.unwrap_or(dressed.f_q - dressed.f_m);
    let drive = DriveSpec::new(f_d, amplitude, d.phase, d.duration.unwrap_or(0.0)).map_err(invalid("/drive"))?;
    let chain = effective_coupling_chain(&sys, &drive).map_err(compute)?;

    let ledger = json!({
        "defects": defects.unwrap_or(1),
        "f_series_Hz": bvd.series_resonance().hz(),
        "f_s_Hz": f_s,
        "g_sm_circuit_Hz": g_sm_circuit,
        "g_qs_Hz": g_qs,
        "lambda_qs": chain.dressed.lambda_qs,
        "lambda_sm": chain.dressed.lambda_sm,
        "dressed_f_q_Hz": chain.dressed.f_q,
        "dressed_f_s_Hz": chain.dressed.f_s,
        "dressed_f_m_Hz": chain.dressed.f_m,
        "f_d_Hz": f_d,
        "eta_re": chain.eta.re,
        "eta_im": chain.eta.im,
        "eta_abs": chain.eta.norm(),
        "drive_phase_rad": chain.hamiltonian.drive_phase,
        "cross_kerr_Hz": chain.hamiltonian.cross_kerr,
    });
    Ok(Assembled {
        sys,
        drive,
        chain,
        ledger,
    })
}

pub fn couple(ctx: &Ctx, defects: Option<u32>) -> Result<Report, CliError> {
    let a = assemble(ctx.config("couple")?, "couple", defects)?;
    let g_eff = a.chain.hamiltonian.g_eff;
    let gamma = hybridized_decay(a.sys.mech.decay_rate, a.chain.dressed.lambda_sm, a.sys.snail.decay_rate);
    let t_iswap = nominal_iswap_time(g_eff);
    let t_transfer = transfer_time(g_eff);
    let summary = json!({
        "g_sm_Hz": a.sys.g_sm,
        "g_eff_Hz": g_eff,
        "T_iswap_s": t_iswap,
        "T_transfer_s": t_transfer,
        "Gamma_m_prime": gamma,
        "ledger": a.ledger,
    });
    let rows = [
        ("g_sm_Hz", a.sys.g_sm),
        ("g_eff_Hz", g_eff),
        ("T_iswap_s", t_iswap),
        ("T_transfer_s", t_transfer),
        ("Gamma_m_prime", gamma),
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::Compute(e.to_string());
    w.write_record(["quantity", "value"]).map_err(to_err)?;
    for (k, v) in rows {
        w.write_record([k.to_string(), v.to_string()]).map_err(to_err)?;
    }
    let table = w.into_inner().map_err(|e| CliError::Compute(e.to_string()))?;
    Ok(Report { summary, table })
}

pub struct IswapArgs {
    pub dissipation: bool,
    pub read: bool,
    pub duration: Option<f64>,
    pub samples: usize,
    pub qubit_levels: usize,
    pub mech_levels: usize,
    pub snail_levels: Option<usize>,
    pub cross_kerr: bool,
    pub defects: Option<u32>,
}

pub fn run_iswap(ctx: &Ctx, args: &IswapArgs) -> Result<Report, CliError> {
    let cfg = ctx.config("iswap")?;
    let a = assemble(cfg, "iswap", args.defects)?;
    let dims = Dims::new(args.qubit_levels, args.mech_levels, args.snail_levels)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let duration = args.duration.or(cfg.drive.as_ref().and_then(|d| d.duration));
    let opts = IswapOptions {
        dims,
        kind: if args.read { GateKind::Read } else { GateKind::Write },
        dissipation: args.dissipation,
        duration,
        samples: args.samples,
        include_cross_kerr: args.cross_kerr,
        ..IswapOptions::default()
    };
    let rho0 = if args.read {
        DensityMatrix::basis(dims, 0, 1, 0)
    } else {
        DensityMatrix::basis(dims, 1, 0, 0)
    }
    .map_err(compute)?;
    let out = iswap(&a.sys, &a.drive, &rho0, opts).map_err(compute)?;
    let series = |f: fn(&qmem_core::qdyn::GateSample) -> f64| out.samples.iter().map(f).collect::<Vec<f64>>();
    let summary = json!({
        "kind": if args.read { "read" } else { "write" },
        "dissipation": args.dissipation,
        "g_eff_Hz": out.g_eff,
        "duration_s": out.duration,
        "dt_s": out.dt,
        "fidelity": out.fidelity,
        "populations": {
            "g0": out.populations[0],
            "g1": out.populations[1],
            "e0": out.populations[2],
            "e1": out.populations[3],
        },
        "Gamma_m_prime": hybridized_decay(a.sys.mech.decay_rate, a.chain.dressed.lambda_sm, a.sys.snail.decay_rate),
        "series": {
            "t_s": series(|s| s.t),
            "pop_e0": series(|s| s.pop_e0),
            "pop_g1": series(|s| s.pop_g1),
            "fidelity": series(|s| s.fidelity),
        },
    });
    let table = table(
        &["t_s", "pop_e0", "pop_g1", "fidelity"],
        out.samples.iter().map(|s| vec![s.t, s.pop_e0, s.pop_g1, s.fidelity]),
    )?;
    Ok(Report { summary, table })
}

pub fn fit_resonance(path: &Path, force_magnitude: bool) -> Result<Report, CliError> {
    let (trace, kind) = io::read_frequency_trace_path(path)?;
    let magnitude = force_magnitude || kind == TraceKind::Magnitude;
    let fit = if magnitude {
        fit_lorentzian(&trace)
    } else {
        fit_lorentzian_complex(&trace)
    }
    .map_err(compute)?;
    let model: Vec<Complex64> = trace
        .frequencies()
        .iter()
        .map(|&f| lorentzian(f, fit.f0, fit.q, fit.amplitude, fit.background))
        .collect();
    let summary = json!({
        "model": if magnitude { "magnitude" } else { "complex" },
        "f0_Hz": fit.f0,
        "Q": fit.q,
        "linewidth_Hz": fit.linewidth(),
        "amplitude_re": fit.amplitude.re,
        "amplitude_im": fit.amplitude.im,
        "background_re": fit.background.re,
        "background_im": fit.background.im,
        "sigma_f0_Hz": fit.sigma_f0,
        "sigma_Q": fit.sigma_q,
        "sigma_amplitude": fit.sigma_amplitude,
        "sigma_background": fit.sigma_background,
        "residual_norm": fit.residual_norm,
    });
    let table = table(
        &["f_Hz", "data_mag", "model_mag"],
        trace
            .frequencies()
            .iter()
            .zip(trace.response())
            .zip(&model)
            .map(|((f, z), m)| vec![*f, z.norm(), m.norm()]),
    )?;
    Ok(Report { summary, table })
}

pub fn ringdown(path: &Path, f_hz: Option<f64>) -> Result<Report, CliError> {
    let trace = io::read_time_trace_path(path)?;
    let fit = fit_ringdown(&trace).map_err(compute)?;
    let mut summary = json!({
        "tau_s": fit.tau,
        "initial_amplitude": fit.initial_amplitude,
        "offset": fit.offset,
        "sigma_tau_s": fit.sigma[0],
        "sigma_amplitude": fit.sigma[1],
        "sigma_offset": fit.sigma[2],
        "residual_norm": fit.residual_norm,
    });
    if let Some(f) = f_hz {
        if !(f.is_finite() && f > 0.0) {
            return Err(CliError::Usage(format!("--f-hz must be positive, got {f}")));
        }
        let q = TAU * f * fit.tau;
        summary["f_Hz"] = json!(f);
        summary["Q"] = json!(q);
    }
    let table = table(
        &["t_s", "amp", "model"],
        trace
            .times()
            .iter()
            .zip(trace.amplitude())
            .map(|(&t, &y)| vec![t, y, fit.evaluate(t)]),
    )?;
    Ok(Report { summary, table })
}

fn read_dataset(path: &Path) -> Result<QvsTDataset, CliError> {
    let file = File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(file);
    QvsTDataset::from_csv_reader(&mut rdr).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// Starting stack built from the data range; restarts perturb it.
fn qvt_template(data: &QvsTDataset, f: Frequency, rng: Option<&mut ChaCha8Rng>) -> Result<LossStack, CliError> {
    let pts = data.points();
    let q_max = pts.iter().map(|p| p.q).fold(0.0, f64::max);
    let t_min = pts.iter().map(|p| p.t_k).fold(f64::INFINITY, f64::min);
    let t_max = pts.iter().map(|p| p.t_k).fold(0.0, f64::max);
    let q_hot = pts.iter().find(|p| p.t_k == t_max).map(|p| p.q).unwrap_or(q_max);
    let mut constant = 1.1 * q_max;
    let mut exponent = 4.0;
    let mut delta = 1.0 / q_max;
    let mut peak_t = (t_min * t_max).sqrt();
    let mut act_ratio = 6.0;
    if let Some(rng) = rng {
        let ln = Normal::new(0.0, 0.5).unwrap();
        constant *= f64::exp(ln.sample(rng) * 0.5);
        exponent += rng.gen_range(-0.5..0.5);
        delta *= f64::exp(ln.sample(rng) * 2.0);
        peak_t = rng.gen_range(t_min..t_max);
        act_ratio = rng.gen_range(3.0..10.0);
    }
    let coefficient = 0.5 / (q_hot * t_max.powf(exponent));
    let chans = vec![
        ConstantChannel::new(constant).map_err(compute)?.into(),
        PowerLawChannel::new(coefficient, exponent).map_err(compute)?.into(),
        ZenerChannel::peaked_at(delta, f, peak_t, act_ratio * peak_t).map_err(compute)?.into(),
    ];
    LossStack::new(chans).map_err(compute)
}

pub fn qvt(ctx: &Ctx, path: &Path, f_hz: f64, restarts: usize) -> Result<Report, CliError> {
    let data = read_dataset(path)?;
    let f = Frequency::new(f_hz).map_err(|e| CliError::Usage(format!("--f-hz: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut best = None;
    let mut last_err = None;
    for k in 0..=restarts {
        let template = if k == 0 {
            qvt_template(&data, f, None)?
        } else {
            qvt_template(&data, f, Some(&mut rng))?
        };
        match fit_loss_stack(&data, f, &template) {
            Ok(fit) => {
                log::debug!("start {k}: residual {}", fit.residual_norm);
                if best.as_ref().is_none_or(|b: &qmem_core::loss::LossFit| fit.residual_norm < b.residual_norm) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                log::debug!("start {k} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    let fit = best.ok_or_else(|| compute(last_err.map(|e| e.to_string()).unwrap_or_default()))?;
    let dof = data.len().saturating_sub(fit.parameters.len()).max(1);
    let params: Vec<Value> = fit
        .parameters
        .iter()
        .map(|p| json!({"channel": p.channel, "kind": p.kind, "name": p.name, "value": p.value, "sigma": p.sigma}))
        .collect();
    let q_at = |t: f64| Temperature::new(t).map(|t| total_q(&fit.stack, f, t)).unwrap_or(f64::NAN);
    let pts = data.points();
    let summary = json!({
        "f_Hz": f_hz,
        "seed": ctx.seed,
        "starts": restarts + 1,
        "parameters": params,
        "residual_norm": fit.residual_norm,
        "chi2_per_dof": fit.residual_norm.powi(2) / dof as f64,
        "Q_at_T_min": q_at(pts[0].t_k),
    });
    let table = table(
        &["T_K", "Q", "sigma_Q", "Q_fit"],
        pts.iter().map(|p| vec![p.t_k, p.q, p.sigma_q, q_at(p.t_k)]),
    )?;
    Ok(Report { summary, table })
}

pub fn bvd_fit(path: &Path, fit_rm: bool) -> Result<Report, CliError> {
    let (trace, kind) = io::read_frequency_trace_path(path)?;
    if kind == TraceKind::Magnitude {
        return Err(CliError::Format(format!(
            "{}: admittance fit needs complex data (f_Hz,ReY_S,ImY_S)",
            path.display()
        )));
    }
    let fit = fit_bvd(&trace, fit_rm).map_err(compute)?;
    let p = fit.params;
    let summary = json!({
        "C0_F": p.c0(),
        "Cm_F": p.cm(),
        "Lm_H": p.lm(),
        "Rm_Ohm": p.rm(),
        "f_s_Hz": p.series_resonance().hz(),
        "f_p_Hz": p.antiresonance().hz(),
        "Q": if p.rm() > 0.0 { json!(p.quality_factor()) } else { Value::Null },
        "residual_norm": fit.residual_norm,
    });
    let rows = trace
        .frequencies()
        .iter()
        .zip(trace.response())
        .map(|(&f, y)| {
            let m = Frequency::new(f).map(|fr| bvd_admittance(&p, fr)).unwrap_or_default();
            vec![f, y.re, y.im, m.re, m.im]
        })
        .collect::<Vec<_>>();
    let table = table(&["f_Hz", "ReY_S", "ImY_S", "ReY_fit_S", "ImY_fit_S"], rows)?;
    Ok(Report { summary, table })
}

fn duffing_params<'a>(cfg: &'a ProjectConfig, command: &str) -> Result<(DuffingParams, &'a DuffingSection), CliError> {
    let d = require(&cfg.duffing, "duffing", command)?;
    let p = DuffingParams::new(d.f0, d.q, d.beta, d.drive).map_err(invalid("/duffing"))?;
    Ok((p, d))
}

pub fn duffing_sweep(ctx: &Ctx, direction: SweepDirection) -> Result<Report, CliError> {
    let (p, d) = duffing_params(ctx.config("duffing-sweep")?, "duffing-sweep")?;
    let s = sweep(&p, d.f_start, d.f_end, d.points, direction).map_err(invalid("/duffing"))?;
    let area = hysteresis_area(&p, d.f_start, d.f_end, d.points).map_err(compute)?;
    let (peak_a, peak_f) = response_peak(&p);
    let summary = json!({
        "direction": match direction { SweepDirection::Forward => "forward", SweepDirection::Backward => "backward" },
        "points": s.frequencies.len(),
        "critical_drive_m_per_s2": if p.critical_drive().is_finite() { json!(p.critical_drive()) } else { Value::Null },
        "bistable_range_Hz": bistable_range(&p).map(|(a, b)| json!([a, b])).unwrap_or(Value::Null),
        "hysteresis_area": area,
        "peak": {"amp": peak_a, "f_Hz": peak_f},
        "max_swept_amp": s.amplitudes.iter().cloned().fold(0.0, f64::max),
    });
    let mut table = Vec::new();
    io::write_sweep(&mut table, &s)?;
    Ok(Report { summary, table })
}

pub fn run_backbone(ctx: &Ctx, file: Option<&Path>) -> Result<Report, CliError> {
    let (points, source) = match file {
        Some(path) => (io::read_backbone_path(path)?, "file"),
        None => {
            let (p, d) = duffing_params(ctx.config("backbone")?, "backbone")?;
            let levels = match &d.drive_levels {
                Some(l) => l.clone(),
                None if p.critical_drive().is_finite() => {
                    (1..=8).map(|k| 0.5 * k as f64 * p.critical_drive()).collect()
                }
                None => {
                    return Err(CliError::Config {
                        pointer: "/duffing/drive_levels_m_per_s2".into(),
                        message: "needed when beta is zero".into(),
                    })
                }
            };
            (backbone(&p, &levels).map_err(compute)?, "simulated")
        }
    };
    let fit = fit_backbone(&points).map_err(compute)?;
    let summary = json!({
        "source": source,
        "points": points.len(),
        "f0_Hz": fit.f0,
        "A": fit.a_coef,
        "n": fit.n,
        "sigma_f0_Hz": fit.sigma[0],
        "sigma_A": fit.sigma[1],
        "sigma_n": fit.sigma[2],
        "residual_norm": fit.residual_norm,
    });
    let table = table(
        &["amp", "f_Hz", "f_fit_Hz"],
        points.iter().map(|&(a, f)| vec![a, f, fit.frequency_at(a)]),
    )?;
    Ok(Report { summary, table })
}

fn segment(s: &SegmentSection, pointer: &str) -> Result<Segment, CliError> {
    Segment::new(s.length, s.speed, s.impedance).map_err(invalid(pointer))
}

fn cell(c: &CellSection, pointer: &str) -> Result<UnitCell, CliError> {
    Ok(UnitCell::new(
        segment(&c.narrow, &format!("{pointer}/narrow"))?,
        segment(&c.wide, &format!("{pointer}/wide"))?,
    ))
}

fn chain_spec(c: &ChainSection) -> Result<ChainSpec, CliError> {
    ChainSpec::new(
        c.mirror_cells_per_side,
        cell(&c.mirror, "/chain/mirror")?,
        cell(&c.defect, "/chain/defect")?,
        c.termination,
    )
    .map_err(invalid("/chain/termination_Z_Rayl"))
}

/// First gap that hosts a defect mode.
fn locate_defect(chain: &ChainSpec, gaps: &[qmem_core::phonon_chain::BandGap]) -> Option<qmem_core::phonon_chain::DefectMode> {
    gaps.iter().find_map(|g| match find_defect_mode(chain, g) {
        Ok(m) => Some(m),
        Err(e) => {
            log::info!("gap {:.4e}-{:.4e} Hz: {e}", g.f_low, g.f_high);
            None
        }
    })
}

pub fn bandgap(ctx: &Ctx) -> Result<Report, CliError> {
    let c = require(&ctx.config("bandgap")?.chain, "chain", "bandgap")?;
    let chain = chain_spec(c)?;
    let gaps = find_band_gaps(&chain.mirror_cell, c.f_min, c.f_max, c.resolution).map_err(invalid("/chain"))?;
    let mode = locate_defect(&chain, &gaps);
    let summary = json!({
        "cell_length_m": chain.mirror_cell.length(),
        "gaps": gaps.iter().map(|g| json!({
            "f_low_Hz": g.f_low,
            "f_high_Hz": g.f_high,
            "center_Hz": g.center(),
            "fractional_width": g.fractional_width(),
            "bloch_decay_center": bloch_decay(&chain.mirror_cell, g.center()),
        })).collect::<Vec<_>>(),
        "defect_mode": mode.map(|m| json!({
            "f_Hz": m.frequency,
            "radiative_Q": m.radiative_q,
            "localization_length_m": m.localization_length,
            "peak_transmission": m.peak_transmission,
        })).unwrap_or(Value::Null),
    });
    let n = ((c.f_max - c.f_min) / c.resolution).floor() as usize + 1;
    let table = table(
        &["f_Hz", "cos_qa", "transmission"],
        (0..n).map(|i| {
            let f = c.f_min + i as f64 * c.resolution;
            vec![f, dispersion(&chain.mirror_cell, f), transmission(&chain, f)]
        }),
    )?;
    Ok(Report { summary, table })
}

fn read_envelope(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let file = File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let fmt = |m: String| CliError::Format(format!("{}: {m}", path.display()));
    let header = rdr.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if header.iter().ne(["y_m", "amp"]) {
        return Err(fmt(format!("expected header y_m,amp, got {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt(format!("line {line}: column {} is not a finite number", i + 1)))
        };
        out.push((num(0)?, num(1)?));
    }
    Ok(out)
}

pub fn photoelastic_scan(ctx: &Ctx, envelope_file: Option<&Path>) -> Result<Report, CliError> {
    let cfg = ctx.config("photoelastic-scan")?;
    let o = require(&cfg.optics, "optics", "photoelastic-scan")?;
    let p = match &o.tensor {
        Some(t) => PhotoelasticTensor::trigonal(t.p11, t.p12, t.p13, t.p14, t.p31, t.p33, t.p41, t.p44),
        None => PhotoelasticTensor::quartz_default(),
    };
    let (c1d, c2d) = fresnel_amplitudes(o.n_o);
    let optics = OpticalConfig::new(
        o.wavelength,
        o.n_o,
        o.n_e,
        o.thickness,
        o.polarization,
        o.c1.unwrap_or(c1d),
        o.c2.unwrap_or(c2d),
    )
    .map_err(invalid("/optics"))?;
    let mode = StandingWaveMode::new(o.defect_width, o.u0, o.f_m).map_err(invalid("/optics"))?;
    let r = detected_power(&p, &optics, &mode, 0.0).map_err(compute)?;

    let (envelope, source) = match envelope_file {
        Some(path) => (read_envelope(path)?, "file"),
        None => {
            let c = require(&cfg.chain, "chain", "photoelastic-scan")?;
            let chain = chain_spec(c)?;
            let gaps = find_band_gaps(&chain.mirror_cell, c.f_min, c.f_max, c.resolution).map_err(invalid("/chain"))?;
            let m = locate_defect(&chain, &gaps).ok_or_else(|| compute("no defect mode in any band gap"))?;
            let a = chain.mirror_cell.length();
            let env = mode_profile(&chain, &m).into_iter().map(|(i, v)| (i as f64 * a, v)).collect();
            (env, "chain")
        }
    };
    let scan = mode_profile_scan(&envelope, &p, &optics, &mode).map_err(compute)?;
    let summary = json!({
        "M": r.m,
        "modulation_sign": r.modulation_sign,
        "delta0_rad": r.delta0,
        "dc_power": r.dc_power,
        "beat_amplitude": r.beat_amplitude,
        "single_sided": r.single_sided(),
        "contrast_dB": polarization_contrast(&p),
        "envelope_source": source,
        "scan": scan.iter().map(|(y, s)| json!({"y_m": y, "signal_norm": s})).collect::<Vec<_>>(),
    });
    let mut table = Vec::new();
    io::write_scan(&mut table, &scan)?;
    Ok(Report { summary, table })
}
