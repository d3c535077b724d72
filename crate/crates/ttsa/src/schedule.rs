//! Step-size schedules and the explicit bound constants attached to them.
//!
//! Two regimes are supported:
//!
//! * `both_one_over_k`: `alpha_k = alpha/(k+K)`, `beta_k = beta/(k+K)`, with
//!   a constant time-scale ratio `gamma = beta/alpha` capped by `C1`.
//! * `fast_one_over_k_a`: `alpha_k = alpha/(k+K)^a` for `a in (0.5, 1)`,
//!   `beta_k = beta/(k+K)`, with `beta_k/alpha_k -> 0`.
//!
//! Every constant here is pure arithmetic in the declared problem data; the
//! golden-value tests pin the formulas.

use crate::error::{Result, TtsaError};
use crate::problem::{DerivedConstants, Problem};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Both step sizes decay like `1/k`; separation via the ratio `beta/alpha`.
    BothOneOverK,
    /// Fast step decays like `1/k^a`, slow like `1/k`; true separation.
    FastOneOverKa,
}

/// A concrete admissible step-size pair.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub regime: Regime,
    pub alpha_coef: f64,
    pub beta_coef: f64,
    /// `K1` or `K2` depending on regime.
    pub offset: f64,
    /// Fast-scale exponent; only present in `FastOneOverKa`.
    pub exponent_a: Option<f64>,
    /// Whether the offset satisfies the full floor (`C2` / `D1`). When false
    /// the bound curves are valid only for `k >= k0`.
    pub strict: bool,
    /// Side conditions violated at `k = 0`, surfaced informationally.
    pub warnings: Vec<String>,
}

impl Schedule {
    /// Fast step size at step `k`.
    pub fn alpha_at(&self, k: u64) -> f64 {
        match self.regime {
            Regime::BothOneOverK => self.alpha_coef / (k as f64 + self.offset),
            Regime::FastOneOverKa => {
                self.alpha_coef / (k as f64 + self.offset).powf(self.exponent_a.unwrap())
            }
        }
    }

    /// Slow step size at step `k`; `beta/(k+K)` in both regimes.
    pub fn beta_at(&self, k: u64) -> f64 {
        self.beta_coef / (k as f64 + self.offset)
    }

    /// Time-scale ratio `beta/alpha`; constant only in `BothOneOverK`.
    pub fn gamma(&self) -> f64 {
        self.beta_coef / self.alpha_coef
    }
}

/// Scalar problem data feeding the constant formulas.
#[derive(Debug, Clone, Copy)]
pub struct ConstantInputs {
    pub lambda: f64,
    pub mu: f64,
    pub lipschitz_l: f64,
    /// Affine noise bound over both scales.
    pub c1_noise: f64,
    pub x_star_norm2: f64,
    pub y_star_norm2: f64,
}

impl ConstantInputs {
    pub fn from_problem(p: &Problem) -> Self {
        ConstantInputs {
            lambda: p.lambda,
            mu: p.mu,
            lipschitz_l: p.lipschitz_l,
            c1_noise: p.c1_total(),
            x_star_norm2: p.x_star.norm_squared(),
            y_star_norm2: p.y_star.norm_squared(),
        }
    }

    fn derived(&self) -> DerivedConstants {
        DerivedConstants::new(self.lambda, self.mu, self.lipschitz_l)
    }
}

/// Explicit constants entering the mean-squared-error bound curves.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundConstants {
    Regime1 {
        /// Ceiling on the ratio `beta/alpha`.
        c1: f64,
        /// Offset floor for the bound to hold from `k = 0`.
        c2: f64,
        /// Combined-error curve numerator: bound is `c3/(k+K1)`.
        c3: f64,
        /// Fast-iterate curve numerator: `c4 = 2(L0^2+1) c3`.
        c4: f64,
        /// Iterate-boundedness constant.
        gamma2: f64,
        s0: f64,
        offset: f64,
    },
    Regime2 {
        /// Offset floor for the bound to hold from `k = 0`.
        d1: f64,
        /// Combined-error curve numerator: bound is `d2/(k+K2)^a`.
        d2: f64,
        /// Fast-iterate curve numerator: `d3 = 2(L0^2+1) d2`.
        d3: f64,
        /// Iterate-boundedness constant.
        gamma3: f64,
        s0: f64,
        offset: f64,
        exponent_a: f64,
    },
}

impl BoundConstants {
    pub fn regime(&self) -> Regime {
        match self {
            BoundConstants::Regime1 { .. } => Regime::BothOneOverK,
            BoundConstants::Regime2 { .. } => Regime::FastOneOverKa,
        }
    }

    /// Flat `key = value` text block for experiment manifests.
    pub fn to_key_values(&self) -> Vec<(String, f64)> {
        match *self {
            BoundConstants::Regime1 {
                c1,
                c2,
                c3,
                c4,
                gamma2,
                s0,
                offset,
            } => vec![
                ("C1".into(), c1),
                ("C2".into(), c2),
                ("C3".into(), c3),
                ("C4".into(), c4),
                ("Gamma2".into(), gamma2),
                ("S0".into(), s0),
                ("K1".into(), offset),
            ],
            BoundConstants::Regime2 {
                d1,
                d2,
                d3,
                gamma3,
                s0,
                offset,
                exponent_a,
            } => vec![
                ("D1".into(), d1),
                ("D2".into(), d2),
                ("D3".into(), d3),
                ("Gamma3".into(), gamma3),
                ("S0".into(), s0),
                ("K2".into(), offset),
                ("a".into(), exponent_a),
            ],
        }
    }
}

/// Ratio ceiling `C1 = lambda' mu' / (8 L L0 + 64 L0^2 + 4 + 14 L^2)`.
pub fn ratio_ceiling(inputs: &ConstantInputs) -> f64 {
    let d = inputs.derived();
    let l = inputs.lipschitz_l;
    d.lambda_prime * d.mu_prime / (8.0 * l * d.l0 + 64.0 * d.l0 * d.l0 + 4.0 + 14.0 * l * l)
}

/// Offset floor `C2` for the `both_one_over_k` regime.
pub fn offset_floor_regime1(inputs: &ConstantInputs, alpha: f64, beta: f64) -> f64 {
    let d = inputs.derived();
    let l = inputs.lipschitz_l;
    let l0 = d.l0;
    let gamma = beta / alpha;
    4.0 * alpha
        + 36.0 * l0 * l0 * beta * (l * l / d.lambda_prime + 4.0 / d.mu_prime + 1.0)
        + 16.0
            * inputs.c1_noise
            * beta
            * (2.0 * l0 * l0 + 1.0)
            * (4.0 / (d.mu_prime * gamma * gamma) + 1.0 + l0 * l0)
}

/// Iterate-boundedness constant for the `both_one_over_k` regime.
pub fn gamma2(inputs: &ConstantInputs, s0: f64) -> f64 {
    let l0 = inputs.derived().l0;
    2.0 + 4.0 * (4.0 * l0 * l0 + 2.0) * s0 + 8.0 * inputs.x_star_norm2 + 4.0 * inputs.y_star_norm2
}

/// Iterate-boundedness constant for the `fast_one_over_k_a` regime.
pub fn gamma3(inputs: &ConstantInputs, s0: f64) -> f64 {
    let l0 = inputs.derived().l0;
    2.0 + 12.0 * (4.0 * l0 * l0 + 2.0) * s0 + 8.0 * inputs.x_star_norm2 + 4.0 * inputs.y_star_norm2
}

/// Offset floor `D1` for the `fast_one_over_k_a` regime: the stated sum
/// raised to the power `1/(1-a)`. Implemented verbatim; it is loose.
pub fn offset_floor_regime2(inputs: &ConstantInputs, alpha: f64, beta: f64, a: f64) -> f64 {
    let d = inputs.derived();
    let l = inputs.lipschitz_l;
    let l0 = d.l0;
    let sum = 16.0
        * inputs.c1_noise
        * (2.0 * l0 * l0 + 1.0)
        * (70.0 * l * l / (d.lambda_prime * d.mu_prime * d.mu_prime)
            + 4.0 / d.lambda_prime
            + 1.0
            + l0 * l0)
        + 4.0 * alpha / d.lambda_prime
        + (8.0 * l * l0 + 64.0 * l0 * l0 + 5.0 + 82.0 * l * l) / (d.lambda_prime * d.mu_prime)
            * (beta / alpha)
        + beta / (alpha * alpha)
        + 36.0 * l0 * l0 * beta * (l * l / d.lambda_prime + 4.0 / d.mu_prime + 1.0);
    sum.powf(1.0 / (1.0 - a))
}

fn check_beta(inputs: &ConstantInputs, beta: f64) -> Result<()> {
    let floor = 2.0 / inputs.derived().mu_prime;
    if beta < floor {
        return Err(TtsaError::Inadmissible(format!(
            "beta = {beta} violates beta >= 2/(1-mu) = {floor}"
        )));
    }
    Ok(())
}

/// Evaluate `C1..C4` and `Gamma2` for a concrete schedule.
pub fn compute_constants_regime1(
    inputs: &ConstantInputs,
    alpha: f64,
    beta: f64,
    s0: f64,
    offset: f64,
) -> Result<BoundConstants> {
    check_beta(inputs, beta)?;
    let d = inputs.derived();
    let l0 = d.l0;
    let gamma = beta / alpha;
    let g2 = gamma2(inputs, s0);
    let c3 = 2.0 * s0 * offset
        + 16.0 * inputs.c1_noise * g2 * beta / (d.mu_prime * gamma * gamma)
        + 4.0 * inputs.c1_noise * g2 * beta * (1.0 + l0 * l0);
    Ok(BoundConstants::Regime1 {
        c1: ratio_ceiling(inputs),
        c2: offset_floor_regime1(inputs, alpha, beta),
        c3,
        c4: 2.0 * (l0 * l0 + 1.0) * c3,
        gamma2: g2,
        s0,
        offset,
    })
}

/// Evaluate `D1..D3` and `Gamma3` for a concrete schedule.
pub fn compute_constants_regime2(
    inputs: &ConstantInputs,
    alpha: f64,
    beta: f64,
    a: f64,
    s0: f64,
    offset: f64,
) -> Result<BoundConstants> {
    check_beta(inputs, beta)?;
    if !(0.5 < a && a < 1.0) {
        return Err(TtsaError::Inadmissible(format!(
            "exponent a = {a} must lie in (0.5, 1)"
        )));
    }
    let d = inputs.derived();
    let l = inputs.lipschitz_l;
    let l0 = d.l0;
    let g3 = gamma3(inputs, s0);
    let d2 = 4.0 * s0 * (offset + 4.0 * alpha / d.lambda_prime)
        + (280.0 * l * l / (d.lambda_prime * d.mu_prime * d.mu_prime)
            + 16.0 / d.lambda_prime
            + 4.0 * (1.0 + l0 * l0))
            * inputs.c1_noise
            * g3
            * alpha;
    Ok(BoundConstants::Regime2 {
        d1: offset_floor_regime2(inputs, alpha, beta, a),
        d2,
        d3: 2.0 * (l0 * l0 + 1.0) * d2,
        gamma3: g3,
        s0,
        offset,
        exponent_a: a,
    })
}

/// Theorem right-hand side for the combined error at step `k`.
pub fn bound_curve(c: &BoundConstants, s: &Schedule, k: u64) -> Result<f64> {
    if c.regime() != s.regime {
        return Err(TtsaError::Inadmissible(
            "bound constants and schedule disagree on regime".into(),
        ));
    }
    Ok(match *c {
        BoundConstants::Regime1 { c3, .. } => c3 / (k as f64 + s.offset),
        BoundConstants::Regime2 {
            d2, exponent_a, ..
        } => d2 / (k as f64 + s.offset).powf(exponent_a),
    })
}

/// Theorem right-hand side for `E|x_k - x*|^2` at step `k`.
pub fn bound_curve_fast(c: &BoundConstants, s: &Schedule, k: u64) -> Result<f64> {
    if c.regime() != s.regime {
        return Err(TtsaError::Inadmissible(
            "bound constants and schedule disagree on regime".into(),
        ));
    }
    Ok(match *c {
        BoundConstants::Regime1 { c4, .. } => c4 / (k as f64 + s.offset),
        BoundConstants::Regime2 {
            d3, exponent_a, ..
        } => d3 / (k as f64 + s.offset).powf(exponent_a),
    })
}

/// Offset policy for the schedule builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetMode {
    /// Offset at least the full floor (`C2` / `D1`); bound curves hold for
    /// all `k >= 0`.
    Strict,
    /// Offset at least the small-step floor only; curves hold for
    /// `k >= k0`. The floors here keep `lambda' alpha_0 <= 1/4` and
    /// `mu' beta_0 <= 1/4` (and `beta_0 <= alpha_0` in the separated regime).
    Relaxed,
}

/// Builds an admissible [`Schedule`] plus its [`BoundConstants`] from a
/// problem and a starting point (needed for `S0`).
#[derive(Debug, Clone)]
pub struct ScheduleBuilder {
    pub regime: Regime,
    pub alpha: f64,
    pub beta: f64,
    pub exponent_a: Option<f64>,
    /// Requested minimum offset; raised to the mode's floor if below it.
    pub offset_min: f64,
    pub mode: OffsetMode,
}

impl ScheduleBuilder {
    pub fn build(&self, p: &Problem, x0: &Vector, y0: &Vector) -> Result<(Schedule, BoundConstants)> {
        let inputs = ConstantInputs::from_problem(p);
        let d = inputs.derived();
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(TtsaError::Inadmissible(
                "alpha and beta coefficients must be positive".into(),
            ));
        }
        check_beta(&inputs, self.beta)?;

        let xs_y0 = p.fast_fixed_point(y0, None)?;
        let s0 = (x0 - xs_y0).norm_squared() + (y0 - &p.y_star).norm_squared();

        let (offset, constants) = match self.regime {
            Regime::BothOneOverK => {
                let c1 = ratio_ceiling(&inputs);
                let ratio = self.beta / self.alpha;
                if ratio > c1 * (1.0 + 1e-12) {
                    return Err(TtsaError::Inadmissible(format!(
                        "beta/alpha = {ratio} violates beta/alpha <= C1 = {c1}"
                    )));
                }
                let floor = match self.mode {
                    OffsetMode::Strict => offset_floor_regime1(&inputs, self.alpha, self.beta),
                    OffsetMode::Relaxed => relaxed_floor_regime1(&d, self.alpha, self.beta),
                };
                let offset = self.offset_min.max(floor);
                let constants =
                    compute_constants_regime1(&inputs, self.alpha, self.beta, s0, offset)?;
                (offset, constants)
            }
            Regime::FastOneOverKa => {
                let a = self.exponent_a.ok_or_else(|| {
                    TtsaError::Inadmissible("fast_one_over_k_a requires exponent_a".into())
                })?;
                if !(0.5 < a && a < 1.0) {
                    return Err(TtsaError::Inadmissible(format!(
                        "exponent a = {a} must lie in (0.5, 1)"
                    )));
                }
                let floor = match self.mode {
                    OffsetMode::Strict => offset_floor_regime2(&inputs, self.alpha, self.beta, a),
                    OffsetMode::Relaxed => relaxed_floor_regime2(&d, self.alpha, self.beta, a),
                };
                let offset = self.offset_min.max(floor);
                let constants =
                    compute_constants_regime2(&inputs, self.alpha, self.beta, a, s0, offset)?;
                (offset, constants)
            }
        };

        let mut schedule = Schedule {
            regime: self.regime,
            alpha_coef: self.alpha,
            beta_coef: self.beta,
            offset,
            exponent_a: self.exponent_a,
            strict: self.mode == OffsetMode::Strict,
            warnings: Vec::new(),
        };
        schedule.warnings = side_condition_warnings(&inputs, &schedule);
        Ok((schedule, constants))
    }
}

fn relaxed_floor_regime1(d: &DerivedConstants, alpha: f64, beta: f64) -> f64 {
    (4.0 * d.lambda_prime * alpha)
        .max(4.0 * d.mu_prime * beta)
        .max(1.0)
}

fn relaxed_floor_regime2(d: &DerivedConstants, alpha: f64, beta: f64, a: f64) -> f64 {
    (4.0 * d.lambda_prime * alpha)
        .powf(1.0 / a)
        .max(4.0 * d.mu_prime * beta)
        .max((beta / alpha).powf(1.0 / (1.0 - a)))
        .max(1.0)
}

/// Evaluate the scattered small-step side conditions at `k = 0` and return a
/// message for each one that fails.
fn side_condition_warnings(inputs: &ConstantInputs, s: &Schedule) -> Vec<String> {
    let d = inputs.derived();
    let l = inputs.lipschitz_l;
    let l0 = d.l0;
    let a0 = s.alpha_at(0);
    let b0 = s.beta_at(0);
    let mut w = Vec::new();
    if 9.0 * b0 / d.mu_prime > a0 / d.lambda_prime {
        w.push(format!(
            "side condition 9*beta_0/mu' <= alpha_0/lambda' fails at k=0 ({:.3e} > {:.3e})",
            9.0 * b0 / d.mu_prime,
            a0 / d.lambda_prime
        ));
    }
    if (2.0 * l * l0 + 16.0 * l0 * l0 / d.mu_prime + 1.0) * b0 > 0.25 * d.lambda_prime * a0 {
        w.push("side condition (2LL0 + 16L0^2/mu' + 1) beta_0 <= (lambda'/4) alpha_0 fails at k=0".into());
    }
    if 14.0 * l * l * b0 / d.lambda_prime > a0 {
        w.push("side condition 14 L^2 beta_0 / lambda' <= alpha_0 fails at k=0".into());
    }
    if d.lambda_prime * a0 > 0.25 {
        w.push("side condition lambda' alpha_0 <= 1/4 fails at k=0".into());
    }
    if d.mu_prime * b0 > 0.25 {
        w.push("side condition mu' beta_0 <= 1/4 fails at k=0".into());
    }
    w
}
