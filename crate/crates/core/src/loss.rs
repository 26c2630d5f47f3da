//! Dissipation channels and their composition into a total quality factor.
//!
//! Channels add in inverse: 1/Q = Σ 1/Qᵢ. Relaxation processes (phonon-bath
//! Zener damping, thermoelastic loss, impurity relaxation) are all
//! [`ZenerChannel`]s with an Arrhenius relaxation time; the low-temperature
//! phonon-phonon regime is a [`PowerLawChannel`]; gas, electrode and anchor
//! losses enter as fixed [`ConstantChannel`] floors.

use std::path::Path;

use thiserror::Error;

use crate::fit::{least_squares, FitError, FitOptions};
use crate::quantities::{Frequency, Temperature};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("{channel} parameter {field} out of range: {value}")]
    InvalidParameter {
        channel: &'static str,
        field: &'static str,
        value: f64,
    },
    #[error("loss stack must contain at least one channel")]
    EmptyStack,
    #[error("dataset row {row}: {reason}")]
    InvalidDataset { row: usize, reason: String },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("reading dataset: {0}")]
    Csv(#[from] csv::Error),
}

fn check(channel: &'static str, field: &'static str, value: f64, ok: bool) -> Result<(), LossError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(LossError::InvalidParameter { channel, field, value })
    }
}

/// Debye relaxation with τ(T) = tau0·exp(activation_temp/T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenerChannel {
    delta: f64,
    tau0: f64,
    activation_temp: f64,
}

impl ZenerChannel {
    pub fn new(delta: f64, tau0: f64, activation_temp: f64) -> Result<Self, LossError> {
        check("zener", "delta", delta, delta > 0.0)?;
        check("zener", "tau0", tau0, tau0 > 0.0)?;
        check("zener", "activation_temp", activation_temp, activation_temp >= 0.0)?;
        Ok(Self {
            delta,
            tau0,
            activation_temp,
        })
    }

    /// Channel whose Debye peak (ωτ = 1) sits at `peak_temp`.
    pub fn peaked_at(delta: f64, f: Frequency, peak_temp: f64, activation_temp: f64) -> Result<Self, LossError> {
        check("zener", "peak_temp", peak_temp, peak_temp > 0.0)?;
        let tau0 = (-activation_temp / peak_temp).exp() / f.angular();
        Self::new(delta, tau0, activation_temp)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn activation_temp(&self) -> f64 {
        self.activation_temp
    }

    /// Relaxation time τ(T); infinite at T = 0 when activated.
    pub fn tau(&self, t: Temperature) -> f64 {
        if t.kelvin() == 0.0 {
            return if self.activation_temp > 0.0 { f64::INFINITY } else { self.tau0 };
        }
        self.tau0 * (self.activation_temp / t.kelvin()).exp()
    }
}

/// Q⁻¹ = B·Tⁿ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawChannel {
    coefficient: f64,
    exponent: f64,
}

impl PowerLawChannel {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self, LossError> {
        check("power_law", "coefficient", coefficient, coefficient > 0.0)?;
        check("power_law", "exponent", exponent, true)?;
        Ok(Self { coefficient, exponent })
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantChannel {
    q_value: f64,
}

impl ConstantChannel {
    pub fn new(q_value: f64) -> Result<Self, LossError> {
        check("constant", "q_value", q_value, q_value > 0.0)?;
        Ok(Self { q_value })
    }

    pub fn q_value(&self) -> f64 {
        self.q_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Channel {
    Zener(ZenerChannel),
    PowerLaw(PowerLawChannel),
    Constant(ConstantChannel),
}

impl Channel {
    pub fn q_inverse(&self, f: Frequency, t: Temperature) -> f64 {
        match self {
            Channel::Zener(z) => zener_q_inverse(z, f, t),
            Channel::PowerLaw(p) => landau_rumer_q_inverse(p, t),
            Channel::Constant(c) => 1.0 / c.q_value,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Channel::Zener(_) => "zener",
            Channel::PowerLaw(_) => "power_law",
            Channel::Constant(_) => "constant",
        }
    }

    fn param_names(&self) -> &'static [&'static str] {
        match self {
            Channel::Zener(_) => &["delta", "tau0", "activation_temp"],
            Channel::PowerLaw(_) => &["coefficient", "exponent"],
            Channel::Constant(_) => &["q_value"],
        }
    }

    /// Fit coordinates: logs of positive scale parameters, raw otherwise.
    fn push_fit_coords(&self, out: &mut Vec<f64>) {
        match self {
            Channel::Zener(z) => out.extend([z.delta.ln(), z.tau0.ln(), z.activation_temp]),
            Channel::PowerLaw(p) => out.extend([p.coefficient.ln(), p.exponent]),
            Channel::Constant(c) => out.push(c.q_value.ln()),
        }
    }

    fn with_fit_coords(&self, p: &[f64]) -> Channel {
        // Construct directly: the optimizer may step the activation
        // temperature slightly negative, which the model tolerates.
        match self {
            Channel::Zener(_) => Channel::Zener(ZenerChannel {
                delta: p[0].exp(),
                tau0: p[1].exp(),
                activation_temp: p[2],
            }),
            Channel::PowerLaw(_) => Channel::PowerLaw(PowerLawChannel {
                coefficient: p[0].exp(),
                exponent: p[1],
            }),
            Channel::Constant(_) => Channel::Constant(ConstantChannel { q_value: p[0].exp() }),
        }
    }

    /// Natural-unit values and their σ from log/raw fit-coordinate σ.
    fn natural_values(&self) -> Vec<f64> {
        match self {
            Channel::Zener(z) => vec![z.delta, z.tau0, z.activation_temp],
            Channel::PowerLaw(p) => vec![p.coefficient, p.exponent],
            Channel::Constant(c) => vec![c.q_value],
        }
    }

    fn log_scaled(&self) -> &'static [bool] {
        match self {
            Channel::Zener(_) => &[true, true, false],
            Channel::PowerLaw(_) => &[true, false],
            Channel::Constant(_) => &[true],
        }
    }
}

impl From<ZenerChannel> for Channel {
    fn from(c: ZenerChannel) -> Self {
        Channel::Zener(c)
    }
}

impl From<PowerLawChannel> for Channel {
    fn from(c: PowerLawChannel) -> Self {
        Channel::PowerLaw(c)
    }
}

impl From<ConstantChannel> for Channel {
    fn from(c: ConstantChannel) -> Self {
        Channel::Constant(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossStack {
    channels: Vec<Channel>,
}

impl LossStack {
    pub fn new(channels: Vec<Channel>) -> Result<Self, LossError> {
        if channels.is_empty() {
            return Err(LossError::EmptyStack);
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn param_count(&self) -> usize {
        self.channels.iter().map(|c| c.param_names().len()).sum()
    }

    pub fn q_inverse(&self, f: Frequency, t: Temperature) -> f64 {
        self.channels.iter().map(|c| c.q_inverse(f, t)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvsTPoint {
    pub t_k: f64,
    pub q: f64,
    pub sigma_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QvsTDataset {
    points: Vec<QvsTPoint>,
}

impl QvsTDataset {
    pub fn new(points: Vec<QvsTPoint>) -> Result<Self, LossError> {
        for (row, p) in points.iter().enumerate() {
            let bad = |reason: &str| LossError::InvalidDataset {
                row,
                reason: reason.to_string(),
            };
            if !(p.t_k.is_finite() && p.t_k > 0.0) {
                return Err(bad("T_K must be > 0"));
            }
            if !(p.q.is_finite() && p.q > 0.0) {
                return Err(bad("Q must be > 0"));
            }
            if !(p.sigma_q.is_finite() && p.sigma_q > 0.0) {
                return Err(bad("sigma_Q must be > 0"));
            }
            if row > 0 && p.t_k <= points[row - 1].t_k {
                return Err(bad("T_K must be strictly increasing"));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[QvsTPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Read `T_K,Q,sigma_Q` CSV.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, LossError> {
        let mut rdr = csv::Reader::from_path(path)?;
        Self::from_csv_reader(&mut rdr)
    }

    pub fn from_csv_reader<R: std::io::Read>(rdr: &mut csv::Reader<R>) -> Result<Self, LossError> {
        let headers = rdr.headers()?.clone();
        let expected = ["T_K", "Q", "sigma_Q"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(LossError::InvalidDataset {
                row: 0,
                reason: format!("expected header T_K,Q,sigma_Q, got {}", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64, LossError> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| LossError::InvalidDataset {
                        row: row + 1,
                        reason: format!("column {} is not a number", expected[i]),
                    })
            };
            points.push(QvsTPoint {
                t_k: field(0)?,
                q: field(1)?,
                sigma_q: field(2)?,
            });
        }
        Self::new(points)
    }
}

/// Δ·ωτ/(1 + (ωτ)²) with τ = tau0·exp(activation_temp/T).
pub fn zener_q_inverse(ch: &ZenerChannel, f: Frequency, t: Temperature) -> f64 {
    let wt = f.angular() * ch.tau(t);
    if wt.is_infinite() {
        return 0.0;
    }
    ch.delta * wt / (1.0 + wt * wt)
}

/// B·Tⁿ.
pub fn landau_rumer_q_inverse(ch: &PowerLawChannel, t: Temperature) -> f64 {
    if t.kelvin() == 0.0 {
        return 0.0;
    }
    ch.coefficient * t.kelvin().powf(ch.exponent)
}

/// Q = (Σᵢ Qᵢ⁻¹)⁻¹.
pub fn total_q(stack: &LossStack, f: Frequency, t: Temperature) -> f64 {
    1.0 / stack.q_inverse(f, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParameter {
    pub channel: usize,
    pub kind: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct LossFit {
    pub stack: LossStack,
    pub parameters: Vec<FittedParameter>,
    /// Norm of the σ-weighted log residuals.
    pub residual_norm: f64,
}

impl LossFit {
    pub fn parameter(&self, channel: usize, name: &str) -> Option<&FittedParameter> {
        self.parameters.iter().find(|p| p.channel == channel && p.name == name)
    }
}

fn rebuild(template: &LossStack, p: &[f64]) -> LossStack {
    let mut offset = 0;
    let channels = template
        .channels
        .iter()
        .map(|c| {
            let k = c.param_names().len();
            let out = c.with_fit_coords(&p[offset..offset + k]);
            offset += k;
            out
        })
        .collect();
    LossStack { channels }
}

/// Weighted least squares of ln Q⁻¹ starting from the template's values.
///
/// Residuals are (ln Q⁻¹_model − ln Q⁻¹_data)/(σ_Q/Q), so uncertainties
/// are taken at face value and the covariance is not rescaled.
pub fn fit_loss_stack(data: &QvsTDataset, f: Frequency, template: &LossStack) -> Result<LossFit, LossError> {
    let n_params = template.param_count();
    if data.len() < 2 * n_params {
        return Err(FitError::InsufficientData {
            needed: 2 * n_params,
            got: data.len(),
        }
        .into());
    }
    let mut initial = Vec::with_capacity(n_params);
    for c in &template.channels {
        c.push_fit_coords(&mut initial);
    }

    let temps: Vec<Temperature> = data
        .points
        .iter()
        .map(|p| Temperature::new(p.t_k).expect("validated dataset"))
        .collect();
    let residual = |p: &[f64]| {
        let stack = rebuild(template, p);
        Some(
            data.points
                .iter()
                .zip(&temps)
                .map(|(pt, &t)| (stack.q_inverse(f, t).ln() + pt.q.ln()) / (pt.sigma_q / pt.q))
                .collect(),
        )
    };

    let opts = FitOptions {
        scale_covariance: false,
        ..FitOptions::default()
    };
    let out = least_squares(residual, &initial, opts)?;
    if out.jacobian_rank < n_params {
        return Err(FitError::DegenerateJacobian {
            rank: out.jacobian_rank,
            params: n_params,
        }
        .into());
    }

    let stack = rebuild(template, &out.params);
    let mut parameters = Vec::with_capacity(n_params);
    let mut offset = 0;
    for (idx, c) in stack.channels.iter().enumerate() {
        let values = c.natural_values();
        for (k, (&name, &logged)) in c.param_names().iter().zip(c.log_scaled()).enumerate() {
            let s = out.sigma[offset + k];
            let sigma = if logged { values[k] * s } else { s };
            parameters.push(FittedParameter {
                channel: idx,
                kind: c.kind(),
                name,
                value: values[k],
                sigma,
            });
        }
        offset += values.len();
    }
    log::debug!("loss fit converged after {} evaluations", out.evaluations);
    Ok(LossFit {
        stack,
        parameters,
        residual_norm: out.residual_norm,
    })
}
