//! Savings, production and drift functions for the model family.
//!
//! The variants share one parameter set, [`ModelParams`]:
//!
//! | variant         | state          | drift                                                     |
//! |-----------------|----------------|-----------------------------------------------------------|
//! | `Full4`         | (k, z, p, X)   | slow–fast system with delayed capital `z` and fast `p`     |
//! | `ThreeEq`       | (k, I, X)      | capital, investment and shock equations                   |
//! | `Reduced`       | (k, X)         | slow-time reduction of `Full4`                            |
//! | `Deterministic` | (k)            | `β s(k,γ) k^a − k`                                        |
//! | `Capital`       | (k)            | capital row of `ThreeEq` on its own                       |
//! | `LinearDecay`   | (k)            | `−ρ k`, used as an analytic test system                   |
//! | `Ou`            | (X)            | `−η_a X`, the shock process alone                         |
//!
//! `beta_mult` is the multiplier of the dimensionless slow equation,
//! `beta_inv` the capital–investment interaction rate; `gamma` is the
//! sigmoid steepness and, unless `gamma_inv` overrides it, also the attrition
//! rate of the investment equation.

use serde::{Deserialize, Serialize};

use crate::noise::NoiseConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavingsParams {
    pub s1: f64,
    pub s2: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl Default for SavingsParams {
    fn default() -> Self {
        SavingsParams {
            s1: 0.2,
            s2: 0.8,
            gamma: 0.5,
            phi: 1.0,
        }
    }
}

impl SavingsParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.s1 && self.s1 < self.s2 && self.s2 < 1.0) {
            return Err(Error::invalid(format!(
                "savings rates must satisfy 0 < s1 < s2 < 1, got s1={} s2={}",
                self.s1, self.s2
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "savings.gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::invalid(format!(
                "savings.phi must be > 0, got {}",
                self.phi
            )));
        }
        Ok(())
    }

    /// Ratio `s2 / s1`.
    pub fn psi(&self) -> f64 {
        self.s2 / self.s1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionParams {
    /// Total-factor coefficient.
    pub b: f64,
    /// Output elasticity of capital.
    pub a: f64,
}

impl Default for ProductionParams {
    fn default() -> Self {
        ProductionParams { b: 1.5, a: 0.33 }
    }
}

impl ProductionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!(
                "production.b must be > 0, got {}",
                self.b
            )));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::invalid(format!(
                "production.a must lie in (0, 1), got {}",
                self.a
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub savings: SavingsParams,
    pub production: ProductionParams,
    pub beta_mult: f64,
    pub rho: f64,
    pub beta_inv: f64,
    pub v: f64,
    pub eta_a: f64,
    pub epsilon_ts: f64,
    pub kappa: f64,
    /// Attrition rate in the investment equation; defaults to `savings.gamma`.
    pub gamma_inv: Option<f64>,
    /// Gaussian scale of the investment channel; defaults to `noise.lambda`.
    pub sigma_inv: Option<f64>,
    /// Gaussian scale of the shock channel in `ThreeEq`; defaults to `sqrt(rho·sigma)`.
    pub sigma_shock: Option<f64>,
    pub noise: NoiseConfig,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::figure5()
    }
}

impl ModelParams {
    /// Parameter set of the three-equation reproduction run: s1=0.2, s2=0.8,
    /// γ=0.5, φ=1, B=1.5, a=0.33, λ=0.01, ρ=0.02, v=0.02, β_inv=0.4,
    /// σ=0.1, η_a=0.1.
    pub fn figure5() -> Self {
        ModelParams {
            savings: SavingsParams {
                s1: 0.2,
                s2: 0.8,
                gamma: 0.5,
                phi: 1.0,
            },
            production: ProductionParams { b: 1.5, a: 0.33 },
            beta_mult: 2.0,
            rho: 0.02,
            beta_inv: 0.4,
            v: 0.02,
            eta_a: 0.1,
            epsilon_ts: 0.05,
            kappa: 1.0,
            gamma_inv: None,
            sigma_inv: None,
            sigma_shock: None,
            noise: NoiseConfig {
                sigma: 0.1,
                lambda: 0.01,
                ..NoiseConfig::default()
            },
        }
    }

    /// Slow–fast comparison set: s1=0.2, s2=0.8, β=2, a=0.3, κ=1, σ=0.1,
    /// Cauchy (α=1) shock driver, ε=0.05. Steepness γ=1 and η_a=0.1 are
    /// not pinned by the source and chosen here.
    pub fn figure1() -> Self {
        ModelParams {
            savings: SavingsParams {
                s1: 0.2,
                s2: 0.8,
                gamma: 1.0,
                phi: 1.0,
            },
            production: ProductionParams { b: 1.0, a: 0.3 },
            beta_mult: 2.0,
            epsilon_ts: 0.05,
            kappa: 1.0,
            eta_a: 0.1,
            noise: NoiseConfig {
                sigma: 0.1,
                lambda: 0.0,
                alpha_stable: 1.0,
                ..NoiseConfig::default()
            },
            ..ModelParams::figure5()
        }
    }

    /// Balanced bifurcation set: ψ=4 (s1=0.2, s2=0.8), a=0.3, β=2, φ=1,
    /// so that `β·s(1,γ) = 1` for every γ.
    pub fn balanced(gamma: f64) -> Self {
        ModelParams {
            savings: SavingsParams {
                s1: 0.2,
                s2: 0.8,
                gamma,
                phi: 1.0,
            },
            production: ProductionParams { b: 1.0, a: 0.3 },
            beta_mult: 2.0,
            ..ModelParams::figure5()
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.savings.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.savings.validate()?;
        self.production.validate()?;
        self.noise.validate()?;
        for (name, value) in [
            ("rho", self.rho),
            ("v", self.v),
            ("eta_a", self.eta_a),
            ("kappa", self.kappa),
            ("epsilon_ts", self.epsilon_ts),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {value}")));
            }
        }
        for (name, value) in [("beta_mult", self.beta_mult), ("beta_inv", self.beta_inv)] {
            if !value.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be finite, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("gamma_inv", self.gamma_inv),
            ("sigma_inv", self.sigma_inv),
            ("sigma_shock", self.sigma_shock),
        ] {
            if let Some(x) = value {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::invalid(format!("{name} must be >= 0, got {x}")));
                }
            }
        }
        Ok(())
    }

    pub fn attrition(&self) -> f64 {
        self.gamma_inv.unwrap_or(self.savings.gamma)
    }

    pub fn investment_noise_scale(&self) -> f64 {
        self.sigma_inv.unwrap_or(self.noise.lambda)
    }

    pub fn shock_noise_scale(&self) -> f64 {
        self.sigma_shock
            .unwrap_or_else(|| (self.rho * self.noise.sigma).sqrt())
    }
}

/// Model variant tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full4,
    ThreeEq,
    Reduced,
    Deterministic,
    Capital,
    LinearDecay,
    Ou,
}

/// Named state components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    K,
    I,
    X,
    Z,
    P,
}

impl Component {
    pub fn label(self) -> &'static str {
        match self {
            Component::K => "k",
            Component::I => "I",
            Component::X => "X",
            Component::Z => "z",
            Component::P => "p",
        }
    }
}

/// Where the noise of one channel enters the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    /// Index into the state vector.
    pub slot: usize,
    /// Gaussian / stable scale applied to the raw increment.
    pub scale: f64,
    /// Whether the Poisson jump measure acts on this channel.
    pub jumps: bool,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full4,
        Variant::ThreeEq,
        Variant::Reduced,
        Variant::Deterministic,
        Variant::Capital,
        Variant::LinearDecay,
        Variant::Ou,
    ];

    pub fn components(self) -> &'static [Component] {
        use Component::*;
        match self {
            Variant::Full4 => &[K, Z, P, X],
            Variant::ThreeEq => &[K, I, X],
            Variant::Reduced => &[K, X],
            Variant::Deterministic | Variant::Capital | Variant::LinearDecay => &[K],
            Variant::Ou => &[X],
        }
    }

    pub fn dim(self) -> usize {
        self.components().len()
    }

    pub fn slot(self, c: Component) -> Option<usize> {
        self.components().iter().position(|&x| x == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full4 => "full4",
            Variant::ThreeEq => "three_eq",
            Variant::Reduced => "reduced",
            Variant::Deterministic => "deterministic",
            Variant::Capital => "capital",
            Variant::LinearDecay => "linear_decay",
            Variant::Ou => "ou",
        }
    }

    /// Noise channels in channel-number order.
    pub fn noise_channels(self, mp: &ModelParams) -> Vec<NoiseChannel> {
        let sigma = mp.noise.sigma;
        match self {
            Variant::Deterministic => vec![],
            Variant::Capital | Variant::LinearDecay => {
                vec![NoiseChannel {
                    slot: 0,
                    scale: sigma,
                    jumps: true,
                }]
            }
            Variant::ThreeEq => vec![
                NoiseChannel {
                    slot: 0,
                    scale: sigma,
                    jumps: true,
                },
                NoiseChannel {
                    slot: 1,
                    scale: mp.investment_noise_scale(),
                    jumps: false,
                },
                NoiseChannel {
                    slot: 2,
                    scale: mp.shock_noise_scale(),
                    jumps: true,
                },
            ],
            Variant::Reduced => vec![NoiseChannel {
                slot: 1,
                scale: sigma,
                jumps: true,
            }],
            Variant::Full4 => vec![NoiseChannel {
                slot: 3,
                scale: sigma,
                jumps: true,
            }],
            Variant::Ou => vec![NoiseChannel {
                slot: 0,
                scale: sigma,
                jumps: true,
            }],
        }
    }
}

/// State of one variant; unused trailing slots are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec {
    variant: Variant,
    values: [f64; 4],
}

impl StateVec {
    pub fn from_slice(variant: Variant, values: &[f64]) -> Result<Self> {
        if values.len() != variant.dim() {
            return Err(Error::invalid(format!(
                "{} state needs {} components, got {}",
                variant.name(),
                variant.dim(),
                values.len()
            )));
        }
        let mut buf = [0.0; 4];
        buf[..values.len()].copy_from_slice(values);
        Ok(StateVec {
            variant,
            values: buf,
        })
    }

    fn raw(variant: Variant, values: [f64; 4]) -> Self {
        StateVec { variant, values }
    }

    pub fn full4(k: f64, z: f64, p: f64, x: f64) -> Self {
        Self::raw(Variant::Full4, [k, z, p, x])
    }

    pub fn three_eq(k: f64, i: f64, x: f64) -> Self {
        Self::raw(Variant::ThreeEq, [k, i, x, 0.0])
    }

    pub fn reduced(k: f64, x: f64) -> Self {
        Self::raw(Variant::Reduced, [k, x, 0.0, 0.0])
    }

    pub fn deterministic(k: f64) -> Self {
        Self::raw(Variant::Deterministic, [k, 0.0, 0.0, 0.0])
    }

    pub fn capital(k: f64) -> Self {
        Self::raw(Variant::Capital, [k, 0.0, 0.0, 0.0])
    }

    pub fn linear_decay(k: f64) -> Self {
        Self::raw(Variant::LinearDecay, [k, 0.0, 0.0, 0.0])
    }

    pub fn ou(x: f64) -> Self {
        Self::raw(Variant::Ou, [x, 0.0, 0.0, 0.0])
    }

    /// Starting point on the balanced path: k=1, z=1, p on the slaving
    /// manifold, I=1, X=0.
    pub fn default_init(variant: Variant, mp: &ModelParams) -> Self {
        match variant {
            Variant::Full4 => {
                let p = slaved_p(1.0, 0.0, mp).unwrap_or(0.0);
                Self::full4(1.0, 1.0, p, 0.0)
            }
            Variant::ThreeEq => Self::three_eq(1.0, 1.0, 0.0),
            Variant::Reduced => Self::reduced(1.0, 0.0),
            Variant::Deterministic => Self::deterministic(1.0),
            Variant::Capital => Self::capital(1.0),
            Variant::LinearDecay => Self::linear_decay(1.0),
            Variant::Ou => Self::ou(0.0),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.variant.dim()]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let d = self.variant.dim();
        &mut self.values[..d]
    }

    pub fn get(&self, c: Component) -> Option<f64> {
        self.variant.slot(c).map(|i| self.values[i])
    }

    pub fn k(&self) -> Option<f64> {
        self.get(Component::K)
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }
}

/// Sigmoid saving rate `s1 + (s2 − s1) / (1 + exp(−γ (k − φ)))`.
pub fn savings(k: f64, p: &SavingsParams) -> f64 {
    p.s1 + (p.s2 - p.s1) * logistic(p.gamma * (k - p.phi))
}

/// Exact derivative of [`savings`] in `k`.
pub fn savings_deriv(k: f64, p: &SavingsParams) -> f64 {
    let l = logistic(p.gamma * (k - p.phi));
    p.gamma * (p.s2 - p.s1) * l * (1.0 - l)
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cobb–Douglas output `B k^a`.
pub fn production(k: f64, p: &ProductionParams) -> Result<f64> {
    if k < 0.0 || k.is_nan() {
        return Err(Error::invalid(format!("production needs k >= 0, got {k}")));
    }
    Ok(p.b * k.powf(p.a))
}

fn cobb_douglas(k: f64, p: &ProductionParams) -> f64 {
    p.b * k.powf(p.a)
}

/// `β s(k,γ) k^a − k`.
pub fn rhs_deterministic(k: f64, mp: &ModelParams) -> f64 {
    mp.beta_mult * savings(k, &mp.savings) * k.powf(mp.production.a) - k
}

/// `d/dk` of [`rhs_deterministic`].
pub fn rhs_deterministic_deriv(k: f64, mp: &ModelParams) -> f64 {
    let a = mp.production.a;
    let ka = k.powf(a);
    mp.beta_mult * (savings_deriv(k, &mp.savings) * ka + savings(k, &mp.savings) * a * ka / k) - 1.0
}

/// Fast variable `p` on the slaving manifold.
pub fn slaved_p(k: f64, x: f64, mp: &ModelParams) -> Result<f64> {
    let bm = mp.beta_mult;
    if bm == 1.0 {
        return Err(Error::invalid(
            "beta_mult = 1 makes the fast p equation singular",
        ));
    }
    Ok((1.0 - savings(k, &mp.savings)) * bm / (bm - 1.0) * k.powf(mp.production.a) + x)
}

/// Drift of the slow–fast system `(k, z, p, X)`, with the `1/ε` factor
/// applied to the `z` and `p` rows.
pub fn rhs_full4(state: &[f64; 4], mp: &ModelParams) -> Result<[f64; 4]> {
    let [k, z, p, x] = *state;
    let bm = mp.beta_mult;
    if bm == 1.0 {
        return Err(Error::invalid(
            "beta_mult = 1 makes the fast p equation singular",
        ));
    }
    if !(mp.epsilon_ts > 0.0) {
        return Err(Error::invalid("epsilon_ts must be > 0"));
    }
    let a = mp.production.a;
    let za = z.powf(a);
    let eps = mp.epsilon_ts;
    Ok([
        bm * za - (bm - 1.0) * p - k,
        -mp.kappa * (z - k) / eps,
        (-p + (1.0 - savings(z, &mp.savings)) * bm / (bm - 1.0) * za + x) / eps,
        -mp.eta_a * x,
    ])
}

/// Drift of the reduced slow system `(k, X)`.
pub fn rhs_reduced(state: &[f64; 2], mp: &ModelParams) -> [f64; 2] {
    let [k, x] = *state;
    [
        rhs_deterministic(k, mp) - (mp.beta_mult - 1.0) * x,
        -mp.eta_a * x,
    ]
}

/// Drift of the capital row `s(k) f(k) − ρ k`.
pub fn rhs_capital(k: f64, mp: &ModelParams) -> f64 {
    savings(k, &mp.savings) * cobb_douglas(k, &mp.production) - mp.rho * k
}

/// Drift of the three-equation system `(k, I, X)`.
pub fn rhs_three_eq(state: &[f64; 3], mp: &ModelParams) -> [f64; 3] {
    let [k, i, x] = *state;
    [
        rhs_capital(k, mp),
        mp.beta_inv * k * i - (mp.v + mp.attrition()) * i,
        -mp.eta_a * x,
    ]
}

/// Drift of any variant.
pub fn drift(state: &StateVec, mp: &ModelParams) -> Result<StateVec> {
    let v = state.values;
    let out = match state.variant {
        Variant::Full4 => rhs_full4(&v, mp)?,
        Variant::ThreeEq => {
            let [a, b, c] = rhs_three_eq(&[v[0], v[1], v[2]], mp);
            [a, b, c, 0.0]
        }
        Variant::Reduced => {
            let [a, b] = rhs_reduced(&[v[0], v[1]], mp);
            [a, b, 0.0, 0.0]
        }
        Variant::Deterministic => [rhs_deterministic(v[0], mp), 0.0, 0.0, 0.0],
        Variant::Capital => [rhs_capital(v[0], mp), 0.0, 0.0, 0.0],
        Variant::LinearDecay => [-mp.rho * v[0], 0.0, 0.0, 0.0],
        Variant::Ou => [-mp.eta_a * v[0], 0.0, 0.0, 0.0],
    };
    Ok(StateVec::raw(state.variant, out))
}

/// Dimensionless threshold `β_inv B / (ρ (1 + γ))`.
pub fn threshold_xi(mp: &ModelParams) -> f64 {
    mp.beta_inv * mp.production.b / (mp.rho * (1.0 + mp.attrition()))
}
