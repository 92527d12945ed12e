//! Spatially linear stochastic interpolants
//! `a_t = α(t)·a0 + β(t)·a1 + γ(t)·z` with `γ(t) = d·sqrt(2t(1−t))` and the
//! sampling-noise schedule `ε(t) = c·(1−t)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A time in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(Self(t))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolantKind {
    /// `α = 1 − t`, `β = t`
    Linear,
    /// `α = (1 − t)^m`, `β = 1 − (1 − t)^m`
    Power3 { m: u32 },
}

/// Interpolant kind plus the γ/ε scales. Serializes as
/// `{kind, m, d, c, gamma_floor}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct InterpolantSpec {
    kind: InterpolantKind,
    gamma_scale: f64,
    epsilon_scale: f64,
    gamma_floor: f64,
}

pub const DEFAULT_GAMMA_FLOOR: f64 = 1e-4;
pub const DEFAULT_POWER: u32 = 3;

/// `(α, β, α̇, β̇)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_dot: f64,
    pub beta_dot: f64,
}

/// One draw of the interpolant path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub t: TimePoint,
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    pub z: Vec<f64>,
    pub a_t: Vec<f64>,
    pub x: Vec<f64>,
}

impl InterpolantSpec {
    pub fn new(kind: InterpolantKind, d: f64, c: f64, gamma_floor: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!("gamma scale d must be > 0, got {d}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("epsilon scale c must be >= 0, got {c}")));
        }
        if !(gamma_floor > 0.0 && gamma_floor <= 1e-2) {
            return Err(Error::invalid(format!(
                "gamma_floor must lie in (0, 1e-2], got {gamma_floor}"
            )));
        }
        if let InterpolantKind::Power3 { m } = kind {
            if m < 1 {
                return Err(Error::invalid("power exponent m must be >= 1"));
            }
        }
        Ok(Self {
            kind,
            gamma_scale: d,
            epsilon_scale: c,
            gamma_floor,
        })
    }

    pub fn linear(d: f64, c: f64) -> Result<Self> {
        Self::new(InterpolantKind::Linear, d, c, DEFAULT_GAMMA_FLOOR)
    }

    pub fn power3(d: f64, c: f64) -> Result<Self> {
        Self::new(
            InterpolantKind::Power3 { m: DEFAULT_POWER },
            d,
            c,
            DEFAULT_GAMMA_FLOOR,
        )
    }

    pub fn kind(&self) -> InterpolantKind {
        self.kind
    }

    pub fn gamma_scale(&self) -> f64 {
        self.gamma_scale
    }

    pub fn epsilon_scale(&self) -> f64 {
        self.epsilon_scale
    }

    pub fn gamma_floor(&self) -> f64 {
        self.gamma_floor
    }

    /// Short label such as `linear` or `power3`.
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            InterpolantKind::Linear => "linear",
            InterpolantKind::Power3 { .. } => "power3",
        }
    }

    /// Clamps `t` into `[gamma_floor, 1 − gamma_floor]`.
    #[inline]
    pub fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.gamma_floor, 1.0 - self.gamma_floor)
    }

    pub fn alpha_beta(&self, t: TimePoint) -> Coefficients {
        let t = t.get();
        match self.kind {
            InterpolantKind::Linear => Coefficients {
                alpha: 1.0 - t,
                beta: t,
                alpha_dot: -1.0,
                beta_dot: 1.0,
            },
            InterpolantKind::Power3 { m } => {
                let s = 1.0 - t;
                let pow = s.powi(m as i32);
                let rate = m as f64 * s.powi(m as i32 - 1);
                Coefficients {
                    alpha: pow,
                    beta: 1.0 - pow,
                    alpha_dot: -rate,
                    beta_dot: rate,
                }
            }
        }
    }

    /// `γ(t) = d·sqrt(2t(1−t))`; zero at both endpoints.
    #[inline]
    pub fn gamma(&self, t: TimePoint) -> f64 {
        let t = t.get();
        self.gamma_scale * (2.0 * t * (1.0 - t)).max(0.0).sqrt()
    }

    /// `γ̇(t) = d(1−2t)/sqrt(2t(1−t))`, evaluated at the clamped time.
    #[inline]
    pub fn gamma_dot(&self, t: TimePoint) -> f64 {
        let t = self.clamp(t.get());
        self.gamma_scale * (1.0 - 2.0 * t) / (2.0 * t * (1.0 - t)).sqrt()
    }

    /// `max(γ(clamp(t)), gamma_floor)`, the divisor used to recover the
    /// score from its reparameterized output.
    #[inline]
    pub fn gamma_tilde(&self, t: TimePoint) -> f64 {
        let tc = TimePoint(self.clamp(t.get()));
        self.gamma(tc).max(self.gamma_floor)
    }

    /// `ε(t) = c·(1−t)`.
    #[inline]
    pub fn epsilon(&self, t: TimePoint) -> f64 {
        self.epsilon_scale * (1.0 - t.get())
    }

    pub fn interpolate(
        &self,
        t: TimePoint,
        a0: &[f64],
        a1: &[f64],
        z: &[f64],
        x: &[f64],
    ) -> Result<PathSample> {
        check_dims(a0, a1)?;
        check_dims(a0, z)?;
        let Coefficients { alpha, beta, .. } = self.alpha_beta(t);
        let g = self.gamma(t);
        let a_t = a0
            .iter()
            .zip(a1)
            .zip(z)
            .map(|((p, q), n)| alpha * p + beta * q + g * n)
            .collect();
        Ok(PathSample {
            t,
            a0: a0.to_vec(),
            a1: a1.to_vec(),
            z: z.to_vec(),
            a_t,
            x: x.to_vec(),
        })
    }

    /// `∂_t I = α̇·a0 + β̇·a1`.
    pub fn d_interp_dt(&self, t: TimePoint, a0: &[f64], a1: &[f64]) -> Result<Vec<f64>> {
        check_dims(a0, a1)?;
        let c = self.alpha_beta(t);
        Ok(a0
            .iter()
            .zip(a1)
            .map(|(p, q)| c.alpha_dot * p + c.beta_dot * q)
            .collect())
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context: "interpolant action dimension",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    d: f64,
    c: f64,
    #[serde(default = "default_floor")]
    gamma_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_GAMMA_FLOOR
}

impl TryFrom<SpecRepr> for InterpolantSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let kind = match r.kind.as_str() {
            "linear" => InterpolantKind::Linear,
            "power3" | "power" => InterpolantKind::Power3 {
                m: r.m.unwrap_or(DEFAULT_POWER),
            },
            other => return Err(Error::invalid(format!("unknown interpolant kind `{other}`"))),
        };
        InterpolantSpec::new(kind, r.d, r.c, r.gamma_floor)
    }
}

impl From<InterpolantSpec> for SpecRepr {
    fn from(s: InterpolantSpec) -> Self {
        SpecRepr {
            kind: s.kind_name().to_string(),
            m: match s.kind {
                InterpolantKind::Linear => None,
                InterpolantKind::Power3 { m } => Some(m),
            },
            d: s.gamma_scale,
            c: s.epsilon_scale,
            gamma_floor: s.gamma_floor,
        }
    }
}
