//! Problem abstraction: operator pair, declared constants, noise models.
//!
//! A [`Problem`] bundles the fast operator `f`, the slow operator `g`, their
//! declared contraction/Lipschitz constants, the ground-truth fixed point
//! `(x*, y*)`, and the martingale noise models for both scales. Constants are
//! declared inputs; [`validate_problem`] can only falsify them by sampling.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TtsaError};
use crate::{FastFixedPointMap, Operator, Vector};

/// Martingale difference noise generator.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// No noise; the iteration is deterministic.
    Zero,
    /// `M = sqrt(covariance_scale) * N(0, I)`; second moment is independent
    /// of the iterates.
    AdditiveGaussian { covariance_scale: f64 },
    /// Isotropic Gaussian whose second moment equals
    /// `c1 * (1 + |x|^2 + |y|^2)` exactly, realizing the affine bound with
    /// equality.
    MultiplicativeAffine { c1: f64 },
}

/// A noise model together with its declared conditional second-moment bound
/// `E[|M|^2 | F_k] <= c1_bound * (1 + |x|^2 + |y|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub c1_bound: f64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            kind: NoiseKind::Zero,
            c1_bound: 0.0,
        }
    }

    /// Additive Gaussian with per-coordinate variance `covariance_scale` in
    /// dimension `dim`. The implied bound is `covariance_scale * dim`.
    pub fn additive_gaussian(covariance_scale: f64, dim: usize) -> Self {
        assert!(covariance_scale >= 0.0);
        NoiseModel {
            kind: NoiseKind::AdditiveGaussian { covariance_scale },
            c1_bound: covariance_scale * dim as f64,
        }
    }

    /// Multiplicative-affine noise with exact affine scaling constant `c1`.
    pub fn multiplicative_affine(c1: f64) -> Self {
        assert!(c1 >= 0.0);
        NoiseModel {
            kind: NoiseKind::MultiplicativeAffine { c1 },
            c1_bound: c1,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    /// Draw one noise vector of dimension `dim` at the current iterates.
    pub fn sample<R: Rng>(&self, x: &Vector, y: &Vector, dim: usize, rng: &mut R) -> Vector {
        match &self.kind {
            NoiseKind::Zero => Vector::zeros(dim),
            NoiseKind::AdditiveGaussian { covariance_scale } => {
                let sd = covariance_scale.sqrt();
                Vector::from_fn(dim, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseKind::MultiplicativeAffine { c1 } => {
                let scale2 = c1 * (1.0 + x.norm_squared() + y.norm_squared()) / dim as f64;
                let sd = scale2.sqrt();
                Vector::from_fn(dim, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// Constants derived from the declared `(lambda, mu, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `1 - lambda`.
    pub lambda_prime: f64,
    /// `1 - mu`.
    pub mu_prime: f64,
    /// Lipschitz constant of `y -> x*(y)`: `L / (1 - lambda)`.
    pub l0: f64,
}

impl DerivedConstants {
    pub fn new(lambda: f64, mu: f64, lipschitz_l: f64) -> Self {
        let lambda_prime = 1.0 - lambda;
        DerivedConstants {
            lambda_prime,
            mu_prime: 1.0 - mu,
            l0: lipschitz_l / lambda_prime,
        }
    }
}

/// A two-time-scale fixed-point problem.
///
/// Operators must be pure functions of their inputs; `Problem` values are
/// immutable after construction and safely shareable across workers.
#[derive(Clone)]
pub struct Problem {
    pub dim_fast: usize,
    pub dim_slow: usize,
    pub f: Operator,
    pub g: Operator,
    /// Contraction factor of `f(., y)` in `x`.
    pub lambda: f64,
    /// Contraction factor of `y -> g(x*(y), y)`.
    pub mu: f64,
    /// Joint Lipschitz constant of `f` and `g` (each map separately, with
    /// respect to `|dx| + |dy|`).
    pub lipschitz_l: f64,
    pub x_star: Vector,
    pub y_star: Vector,
    pub noise_fast: NoiseModel,
    pub noise_slow: NoiseModel,
    /// Analytic `y -> x*(y)` when available; otherwise the Banach solver is
    /// used wherever `x*(y)` is needed.
    pub x_star_of_y: Option<FastFixedPointMap>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("Problem")
            .field("dim_fast", &self.dim_fast)
            .field("dim_slow", &self.dim_slow)
            .field("lambda", &self.lambda)
            .field("mu", &self.mu)
            .field("lipschitz_l", &self.lipschitz_l)
            .finish_non_exhaustive()
    }
}

impl Problem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim_fast: usize,
        dim_slow: usize,
        f: Operator,
        g: Operator,
        lambda: f64,
        mu: f64,
        lipschitz_l: f64,
        x_star: Vector,
        y_star: Vector,
        noise_fast: NoiseModel,
        noise_slow: NoiseModel,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(TtsaError::Inadmissible(format!(
                "lambda must be in [0,1), got {lambda}"
            )));
        }
        if !(0.0..1.0).contains(&mu) {
            return Err(TtsaError::Inadmissible(format!(
                "mu must be in [0,1), got {mu}"
            )));
        }
        if lipschitz_l <= 0.0 {
            return Err(TtsaError::Inadmissible(format!(
                "lipschitz_l must be positive, got {lipschitz_l}"
            )));
        }
        if x_star.len() != dim_fast {
            return Err(TtsaError::DimensionMismatch {
                context: "x_star".into(),
                expected: dim_fast,
                got: x_star.len(),
            });
        }
        if y_star.len() != dim_slow {
            return Err(TtsaError::DimensionMismatch {
                context: "y_star".into(),
                expected: dim_slow,
                got: y_star.len(),
            });
        }
        Ok(Problem {
            dim_fast,
            dim_slow,
            f,
            g,
            lambda,
            mu,
            lipschitz_l,
            x_star,
            y_star,
            noise_fast,
            noise_slow,
            x_star_of_y: None,
        })
    }

    pub fn with_fast_fixed_point_map(mut self, map: FastFixedPointMap) -> Self {
        self.x_star_of_y = Some(map);
        self
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants::new(self.lambda, self.mu, self.lipschitz_l)
    }

    /// Total affine noise bound over both scales, as used by the bound
    /// constants.
    pub fn c1_total(&self) -> f64 {
        self.noise_fast.c1_bound + self.noise_slow.c1_bound
    }

    /// `x*(y)` via the analytic map when present, otherwise Banach iteration.
    pub fn fast_fixed_point(&self, y: &Vector, warm_start: Option<&Vector>) -> Result<Vector> {
        if let Some(map) = &self.x_star_of_y {
            return Ok(map(y));
        }
        let x0 = warm_start.cloned().unwrap_or_else(|| self.x_star.clone());
        fixed_point_of_f_from(self, y, x0, DEFAULT_FP_TOL, self.default_fp_max_iter())
    }

    fn default_fp_max_iter(&self) -> usize {
        default_max_iter(self.lambda, DEFAULT_FP_TOL)
    }
}

pub const DEFAULT_FP_TOL: f64 = 1e-10;

/// `10 * ceil(log(tol) / log(lambda))`, the a-priori geometric-decay budget.
pub fn default_max_iter(lambda: f64, tol: f64) -> usize {
    if lambda <= 0.0 {
        return 10;
    }
    let sweeps = (tol.ln() / lambda.ln()).ceil().max(1.0);
    10 * sweeps as usize
}

/// Solve `x = f(x, y)` by Banach iteration starting from `x0`.
pub fn fixed_point_of_f_from(
    p: &Problem,
    y: &Vector,
    mut x: Vector,
    tol: f64,
    max_iter: usize,
) -> Result<Vector> {
    assert!(tol > 0.0, "tol must be positive");
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let fx = (p.f)(&x, y);
        residual = (&fx - &x).norm();
        x = fx;
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(TtsaError::NoConvergence {
        residual,
        iterations: max_iter,
        tol,
    })
}

/// Solve `x = f(x, y)` from the origin with default iteration budget.
pub fn fixed_point_of_f(p: &Problem, y: &Vector, tol: f64, max_iter: usize) -> Result<Vector> {
    fixed_point_of_f_from(p, y, Vector::zeros(p.dim_fast), tol, max_iter)
}

/// Outcome of randomized falsification probes against the declared constants.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Max sampled `|f(x1,y)-f(x2,y)| / |x1-x2|`.
    pub max_contraction_ratio_f: f64,
    /// Max sampled `|g(x*(y1),y1)-g(x*(y2),y2)| / |y1-y2|`.
    pub max_contraction_ratio_g: f64,
    /// Max sampled `|h(x1,y1)-h(x2,y2)| / (|x1-x2|+|y1-y2|)` over `h in {f,g}`.
    pub max_lipschitz_ratio: f64,
    pub fixed_point_residual_fast: f64,
    pub fixed_point_residual_slow: f64,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const VALIDATION_TOL: f64 = 1e-9;
const PROBE_RADII: [f64; 3] = [0.1, 1.0, 10.0];

fn gaussian_vec<R: Rng>(dim: usize, radius: f64, rng: &mut R) -> Vector {
    Vector::from_fn(dim, |_, _| radius * rng.sample::<f64, _>(StandardNormal))
}

/// Probe the declared `(lambda, mu, L)` and fixed-point residuals.
///
/// Deterministic given `seed`. Probes are Gaussian pairs scaled over radii
/// {0.1, 1, 10} to exercise near- and far-field behavior.
pub fn validate_problem(p: &Problem, probes: usize, seed: u64) -> Result<ValidationReport> {
    assert!(probes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Structural check: operator output dims.
    let x0 = Vector::zeros(p.dim_fast);
    let y0 = Vector::zeros(p.dim_slow);
    let f0 = (p.f)(&x0, &y0);
    if f0.len() != p.dim_fast {
        return Err(TtsaError::DimensionMismatch {
            context: "f output".into(),
            expected: p.dim_fast,
            got: f0.len(),
        });
    }
    let g0 = (p.g)(&x0, &y0);
    if g0.len() != p.dim_slow {
        return Err(TtsaError::DimensionMismatch {
            context: "g output".into(),
            expected: p.dim_slow,
            got: g0.len(),
        });
    }

    let mut max_f: f64 = 0.0;
    let mut max_g: f64 = 0.0;
    let mut max_l: f64 = 0.0;
    for _ in 0..probes {
        for radius in PROBE_RADII {
            let x1 = gaussian_vec(p.dim_fast, radius, &mut rng);
            let x2 = gaussian_vec(p.dim_fast, radius, &mut rng);
            let y1 = gaussian_vec(p.dim_slow, radius, &mut rng);
            let y2 = gaussian_vec(p.dim_slow, radius, &mut rng);

            let dx = (&x1 - &x2).norm();
            let dy = (&y1 - &y2).norm();
            if dx > 0.0 {
                let df = ((p.f)(&x1, &y1) - (p.f)(&x2, &y1)).norm();
                max_f = max_f.max(df / dx);
            }
            if dx + dy > 0.0 {
                let df = ((p.f)(&x1, &y1) - (p.f)(&x2, &y2)).norm();
                let dg = ((p.g)(&x1, &y1) - (p.g)(&x2, &y2)).norm();
                max_l = max_l.max(df / (dx + dy)).max(dg / (dx + dy));
            }
            if dy > 0.0 {
                let xs1 = p.fast_fixed_point(&y1, None)?;
                let xs2 = p.fast_fixed_point(&y2, None)?;
                let dgy = ((p.g)(&xs1, &y1) - (p.g)(&xs2, &y2)).norm();
                max_g = max_g.max(dgy / dy);
            }
        }
    }

    let res_fast = ((p.f)(&p.x_star, &p.y_star) - &p.x_star).norm();
    let res_slow = ((p.g)(&p.x_star, &p.y_star) - &p.y_star).norm();

    let mut violations = Vec::new();
    if max_f > p.lambda + VALIDATION_TOL {
        violations.push(format!(
            "f contraction ratio {max_f} exceeds declared lambda {}",
            p.lambda
        ));
    }
    if max_g > p.mu + VALIDATION_TOL {
        violations.push(format!(
            "g(x*(.), .) contraction ratio {max_g} exceeds declared mu {}",
            p.mu
        ));
    }
    if max_l > p.lipschitz_l + VALIDATION_TOL {
        violations.push(format!(
            "Lipschitz ratio {max_l} exceeds declared L {}",
            p.lipschitz_l
        ));
    }
    // Residual tolerance reflects the fixed-point solver, not probe noise.
    let fp_tol = 1e-6;
    if res_fast > fp_tol {
        violations.push(format!("f(x*, y*) - x* residual {res_fast} too large"));
    }
    if res_slow > fp_tol {
        violations.push(format!("g(x*, y*) - y* residual {res_slow} too large"));
    }

    Ok(ValidationReport {
        max_contraction_ratio_f: max_f,
        max_contraction_ratio_g: max_g,
        max_lipschitz_ratio: max_l,
        fixed_point_residual_fast: res_fast,
        fixed_point_residual_slow: res_slow,
        violations,
    })
}

/// Convenience constructor for a generic problem from closures.
#[allow(clippy::too_many_arguments)]
pub fn problem_from_closures<F, G>(
    dim_fast: usize,
    dim_slow: usize,
    f: F,
    g: G,
    lambda: f64,
    mu: f64,
    lipschitz_l: f64,
    x_star: Vector,
    y_star: Vector,
    noise_fast: NoiseModel,
    noise_slow: NoiseModel,
) -> Result<Problem>
where
    F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    G: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
{
    Problem::new(
        dim_fast,
        dim_slow,
        Arc::new(f),
        Arc::new(g),
        lambda,
        mu,
        lipschitz_l,
        x_star,
        y_star,
        noise_fast,
        noise_slow,
    )
}
