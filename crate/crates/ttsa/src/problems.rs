//! Built-in application problems with analytically known constants and
//! fixed points.
//!
//! Each constructor converts a strongly-monotone formulation to contractive
//! fixed-point form via an explicit step factor `zeta` (default: half its
//! admissibility threshold), computes `(lambda, mu, L)` from operator norms
//! of the induced affine maps, and attaches the analytic `y -> x*(y)` map.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TtsaError};
use crate::problem::{NoiseModel, Problem};
use crate::{Matrix, Vector};

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn solve(m: &Matrix, rhs: &Vector, what: &str) -> Result<Vector> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| TtsaError::Inadmissible(format!("{what} is singular")))
}

fn solve_mat(m: &Matrix, rhs: &Matrix, what: &str) -> Result<Matrix> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| TtsaError::Inadmissible(format!("{what} is singular")))
}

fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
}

fn check_spd(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(TtsaError::Inadmissible(format!("{what} must be square")));
    }
    if (m - m.transpose()).amax() > 1e-10 * (1.0 + m.amax()) {
        return Err(TtsaError::Inadmissible(format!("{what} must be symmetric")));
    }
    let min = symmetric_eigenvalues(m)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(TtsaError::Inadmissible(format!(
            "{what} must be positive definite (min eigenvalue {min})"
        )));
    }
    Ok(())
}

/// Eigenvalues of `m` with nonpositive real part; empty iff `-m` is Hurwitz.
pub fn hurwitz_offenders(m: &Matrix) -> Vec<(f64, f64)> {
    m.complex_eigenvalues()
        .iter()
        .filter(|e| e.re <= 0.0)
        .map(|e| (e.re, e.im))
        .collect()
}

fn require_neg_hurwitz(m: &Matrix, what: &str) -> Result<()> {
    let bad = hurwitz_offenders(m);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(TtsaError::Inadmissible(format!(
            "-{what} is not Hurwitz: eigenvalues of {what} with re <= 0: {bad:?}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Iterate averaging on a contractive base map
// ---------------------------------------------------------------------------

/// Base operator `F` with a slower averaging scale: `f(x, y) = F(x)`,
/// `g(x, y) = x`. Since `x*(y)` is the constant `x*`, the slow composed map
/// is constant and `mu = 0`.
pub struct PolyakSpec {
    pub base_map: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
    pub lambda_f: f64,
    pub x_star: Vector,
    pub noise_fast: NoiseModel,
    pub noise_slow: NoiseModel,
}

impl PolyakSpec {
    /// Affine base map `F(x) = M x + b`; `lambda_f` is the spectral norm of
    /// `M` and `x*` solves `(I - M) x = b`.
    pub fn affine(
        m: Matrix,
        b: Vector,
        noise_fast: NoiseModel,
        noise_slow: NoiseModel,
    ) -> Result<Self> {
        let d = b.len();
        if m.nrows() != d || m.ncols() != d {
            return Err(TtsaError::DimensionMismatch {
                context: "affine base matrix".into(),
                expected: d,
                got: m.nrows().max(m.ncols()),
            });
        }
        let lambda_f = spectral_norm(&m);
        let x_star = solve(&(Matrix::identity(d, d) - &m), &b, "I - M")?;
        let mc = m.clone();
        Ok(PolyakSpec {
            base_map: Arc::new(move |x: &Vector| &mc * x + &b),
            lambda_f,
            x_star,
            noise_fast,
            noise_slow,
        })
    }
}

pub fn make_polyak(spec: PolyakSpec) -> Result<Problem> {
    if !(0.0..1.0).contains(&spec.lambda_f) {
        return Err(TtsaError::Inadmissible(format!(
            "lambda_f must be in [0,1), got {}",
            spec.lambda_f
        )));
    }
    let d = spec.x_star.len();
    let base = Arc::clone(&spec.base_map);
    let x_star = spec.x_star.clone();
    let xs = spec.x_star.clone();
    Problem::new(
        d,
        d,
        Arc::new(move |x: &Vector, _y: &Vector| base(x)),
        Arc::new(|x: &Vector, _y: &Vector| x.clone()),
        spec.lambda_f,
        0.0,
        spec.lambda_f.max(1.0),
        spec.x_star.clone(),
        x_star,
        spec.noise_fast,
        spec.noise_slow,
    )
    .map(|p| p.with_fast_fixed_point_map(Arc::new(move |_y: &Vector| xs.clone())))
}

// ---------------------------------------------------------------------------
// Quadratic saddle problem
// ---------------------------------------------------------------------------

/// Quadratic `F(x, y) = -x'Px/2 + x'Cy + y'Ry/2` with gradient ascent in `x`
/// and descent in `y`:
///
/// ```text
/// f(x, y) = x + zeta (-Px + Cy)        = (I - zeta P) x + zeta C y
/// g(x, y) = y - zeta (C'x + Ry)        = -zeta C' x + (I - zeta R) y
/// ```
///
/// The stationary point is the origin.
pub struct SaddleQuadraticSpec {
    pub p_mat: Matrix,
    pub r_mat: Matrix,
    pub c_mat: Matrix,
    /// Monotone-to-contractive step factor; `None` picks half the threshold
    /// `2 m / (m^2 + Lg^2)`.
    pub step_zeta: Option<f64>,
    pub noise_fast: NoiseModel,
    pub noise_slow: NoiseModel,
}

/// Admissibility threshold `2 m / (m^2 + Lg^2)` for the saddle operator,
/// where `m = min eig(P, R)` and `Lg` is the norm of the full gradient block.
pub fn saddle_zeta_threshold(p: &Matrix, r: &Matrix, c: &Matrix) -> f64 {
    let m = symmetric_eigenvalues(p)
        .into_iter()
        .chain(symmetric_eigenvalues(r))
        .fold(f64::INFINITY, f64::min);
    let d1 = p.nrows();
    let d2 = r.nrows();
    let mut block = Matrix::zeros(d1 + d2, d1 + d2);
    block.view_mut((0, 0), (d1, d1)).copy_from(p);
    block.view_mut((0, d1), (d1, d2)).copy_from(&(-c));
    block.view_mut((d1, 0), (d2, d1)).copy_from(&c.transpose());
    block.view_mut((d1, d1), (d2, d2)).copy_from(r);
    let lg = spectral_norm(&block);
    2.0 * m / (m * m + lg * lg)
}

pub fn make_saddle(spec: SaddleQuadraticSpec) -> Result<Problem> {
    let p = spec.p_mat;
    let r = spec.r_mat;
    let c = spec.c_mat;
    check_spd(&p, "P")?;
    check_spd(&r, "R")?;
    let d1 = p.nrows();
    let d2 = r.nrows();
    if c.nrows() != d1 || c.ncols() != d2 {
        return Err(TtsaError::DimensionMismatch {
            context: "C".into(),
            expected: d1 * d2,
            got: c.nrows() * c.ncols(),
        });
    }
    let threshold = saddle_zeta_threshold(&p, &r, &c);
    let zeta = spec.step_zeta.unwrap_or(0.5 * threshold);
    if !(zeta > 0.0 && zeta < threshold) {
        return Err(TtsaError::Inadmissible(format!(
            "step_zeta = {zeta} must lie in (0, {threshold}) for contractive induced maps"
        )));
    }

    // x*(y) = P^{-1} C y; composed slow matrix I - zeta (R + C' P^{-1} C).
    let pinv_c = solve_mat(&p, &c, "P")?;
    let slow_sym = &r + c.transpose() * &pinv_c;
    let lambda = symmetric_eigenvalues(&p)
        .into_iter()
        .map(|e| (1.0 - zeta * e).abs())
        .fold(0.0, f64::max);
    let mu = symmetric_eigenvalues(&slow_sym)
        .into_iter()
        .map(|e| (1.0 - zeta * e).abs())
        .fold(0.0, f64::max);
    let zc = zeta * spectral_norm(&c);
    let mu_r = symmetric_eigenvalues(&r)
        .into_iter()
        .map(|e| (1.0 - zeta * e).abs())
        .fold(0.0, f64::max);
    let lipschitz_l = lambda.max(zc).max(mu_r);

    // Stationarity: Px = Cy, C'x + Ry = 0 -- homogeneous, solved explicitly
    // for clarity even though the solution is the origin.
    let mut stationarity = Matrix::zeros(d1 + d2, d1 + d2);
    stationarity.view_mut((0, 0), (d1, d1)).copy_from(&p);
    stationarity.view_mut((0, d1), (d1, d2)).copy_from(&(-&c));
    stationarity
        .view_mut((d1, 0), (d2, d1))
        .copy_from(&c.transpose());
    stationarity.view_mut((d1, d1), (d2, d2)).copy_from(&r);
    let sol = solve(&stationarity, &Vector::zeros(d1 + d2), "stationarity system")?;
    let x_star = sol.rows(0, d1).into_owned();
    let y_star = sol.rows(d1, d2).into_owned();

    let (pf, cf) = (p.clone(), c.clone());
    let (rf, cg) = (r.clone(), c.clone());
    let pinv_c_map = pinv_c.clone();
    Problem::new(
        d1,
        d2,
        Arc::new(move |x: &Vector, y: &Vector| x + zeta * (-(&pf * x) + &cf * y)),
        Arc::new(move |x: &Vector, y: &Vector| y - zeta * (cg.transpose() * x + &rf * y)),
        lambda,
        mu,
        lipschitz_l,
        x_star,
        y_star,
        spec.noise_fast,
        spec.noise_slow,
    )
    .map(|p| p.with_fast_fixed_point_map(Arc::new(move |y: &Vector| &pinv_c_map * y)))
}

// ---------------------------------------------------------------------------
// Equality-constrained concave maximization
// ---------------------------------------------------------------------------

/// Maximize `H(x) = -x'Qx/2 + q'x` subject to `Ax = b` by primal ascent /
/// dual ascent on the Lagrangian:
///
/// ```text
/// f(x, y) = x + zeta (q - Qx - A'y)
/// g(x, y) = y + zeta (Ax - b)
/// ```
///
/// The slow update uses exact constraint residuals, so its noise is zero.
pub struct LagrangianSpec {
    pub q_mat: Matrix,
    pub q_vec: Vector,
    pub a_mat: Matrix,
    pub b_vec: Vector,
    /// `None` picks half of `min(2/max eig(Q), 2/max eig(A Q^{-1} A'))`.
    pub step_zeta: Option<f64>,
    pub noise_fast: NoiseModel,
}

/// Admissibility threshold keeping both induced maps contractive.
pub fn lagrangian_zeta_threshold(q: &Matrix, a: &Matrix) -> Result<f64> {
    let dual = a * solve_mat(q, &a.transpose(), "Q")?;
    let qmax = symmetric_eigenvalues(q).into_iter().fold(0.0, f64::max);
    let dmax = symmetric_eigenvalues(&dual).into_iter().fold(0.0, f64::max);
    Ok((2.0 / qmax).min(2.0 / dmax))
}

pub fn make_lagrangian(spec: LagrangianSpec) -> Result<Problem> {
    let q = spec.q_mat;
    let a = spec.a_mat;
    check_spd(&q, "Q")?;
    let d1 = q.nrows();
    let d2 = a.nrows();
    if a.ncols() != d1 {
        return Err(TtsaError::DimensionMismatch {
            context: "A columns".into(),
            expected: d1,
            got: a.ncols(),
        });
    }
    if spec.q_vec.len() != d1 || spec.b_vec.len() != d2 {
        return Err(TtsaError::Config("q/b vector dimensions do not match Q/A".into()));
    }
    if a.rank(1e-10) != d2 {
        return Err(TtsaError::Inadmissible(
            "A must have full row rank".into(),
        ));
    }

    let threshold = lagrangian_zeta_threshold(&q, &a)?;
    let zeta = spec.step_zeta.unwrap_or(0.5 * threshold);
    if !(zeta > 0.0 && zeta < threshold) {
        return Err(TtsaError::Inadmissible(format!(
            "step_zeta = {zeta} must lie in (0, {threshold}) for contractive induced maps"
        )));
    }

    // KKT system: [Q A'; A 0] [x; y] = [q; b].
    let mut kkt = Matrix::zeros(d1 + d2, d1 + d2);
    kkt.view_mut((0, 0), (d1, d1)).copy_from(&q);
    kkt.view_mut((0, d1), (d1, d2)).copy_from(&a.transpose());
    kkt.view_mut((d1, 0), (d2, d1)).copy_from(&a);
    let mut rhs = Vector::zeros(d1 + d2);
    rhs.rows_mut(0, d1).copy_from(&spec.q_vec);
    rhs.rows_mut(d1, d2).copy_from(&spec.b_vec);
    let sol = solve(&kkt, &rhs, "KKT system")?;
    let x_star = sol.rows(0, d1).into_owned();
    let y_star = sol.rows(d1, d2).into_owned();

    let lambda = symmetric_eigenvalues(&q)
        .into_iter()
        .map(|e| (1.0 - zeta * e).abs())
        .fold(0.0, f64::max);
    let dual = &a * solve_mat(&q, &a.transpose(), "Q")?;
    let mu = symmetric_eigenvalues(&dual)
        .into_iter()
        .map(|e| (1.0 - zeta * e).abs())
        .fold(0.0, f64::max);
    // Slow map y -> y + zeta(Ax - b) has unit y-block.
    let lipschitz_l = lambda.max(zeta * spectral_norm(&a)).max(1.0);

    // x*(y) = Q^{-1} (q - A'y).
    let qinv_q = solve(&q, &spec.q_vec, "Q")?;
    let qinv_at = solve_mat(&q, &a.transpose(), "Q")?;

    let (qf, af, qv) = (q.clone(), a.clone(), spec.q_vec.clone());
    let (ag, bv) = (a.clone(), spec.b_vec.clone());
    Problem::new(
        d1,
        d2,
        Arc::new(move |x: &Vector, y: &Vector| {
            x + zeta * (&qv - &qf * x - af.transpose() * y)
        }),
        Arc::new(move |x: &Vector, y: &Vector| y + zeta * (&ag * x - &bv)),
        lambda,
        mu,
        lipschitz_l,
        x_star,
        y_star,
        spec.noise_fast,
        NoiseModel::zero(),
    )
    .map(|p| {
        p.with_fast_fixed_point_map(Arc::new(move |y: &Vector| &qinv_q - &qinv_at * y))
    })
}

// ---------------------------------------------------------------------------
// Two-block linear system
// ---------------------------------------------------------------------------

/// Solve `A11 x + A12 y = b1`, `A21 x + A22 y = b2` by the induced maps
///
/// ```text
/// f(x, y) = x + zeta (b1 - A11 x - A12 y)
/// g(x, y) = y + zeta (b2 - A21 x - A22 y)
/// ```
///
/// Requires `-A11` and `-Delta` Hurwitz, `Delta = A22 - A21 A11^{-1} A12`.
/// With `noise_sigma > 0` the blocks are observed through i.i.d. per-entry
/// Gaussian perturbations of variance `sigma^2`, which realizes the affine
/// second-moment bound with `c1 = zeta^2 sigma^2 dim` on each scale.
pub struct LinearTTSASpec {
    pub a11: Matrix,
    pub a12: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    pub b1: Vector,
    pub b2: Vector,
    pub step_zeta: f64,
    pub noise_sigma: f64,
}

pub fn make_linear_ttsa(spec: LinearTTSASpec) -> Result<Problem> {
    let d1 = spec.b1.len();
    let d2 = spec.b2.len();
    for (m, rows, cols, what) in [
        (&spec.a11, d1, d1, "A11"),
        (&spec.a12, d1, d2, "A12"),
        (&spec.a21, d2, d1, "A21"),
        (&spec.a22, d2, d2, "A22"),
    ] {
        if m.nrows() != rows || m.ncols() != cols {
            return Err(TtsaError::DimensionMismatch {
                context: what.into(),
                expected: rows * cols,
                got: m.nrows() * m.ncols(),
            });
        }
    }
    require_neg_hurwitz(&spec.a11, "A11")?;
    let a11_inv_a12 = solve_mat(&spec.a11, &spec.a12, "A11")?;
    let delta = &spec.a22 - &spec.a21 * &a11_inv_a12;
    require_neg_hurwitz(&delta, "Delta")?;

    let zeta = spec.step_zeta;
    if zeta <= 0.0 {
        return Err(TtsaError::Inadmissible(format!(
            "step_zeta must be positive, got {zeta}"
        )));
    }

    // Fixed point from the joint block solve.
    let mut block = Matrix::zeros(d1 + d2, d1 + d2);
    block.view_mut((0, 0), (d1, d1)).copy_from(&spec.a11);
    block.view_mut((0, d1), (d1, d2)).copy_from(&spec.a12);
    block.view_mut((d1, 0), (d2, d1)).copy_from(&spec.a21);
    block.view_mut((d1, d1), (d2, d2)).copy_from(&spec.a22);
    let mut rhs = Vector::zeros(d1 + d2);
    rhs.rows_mut(0, d1).copy_from(&spec.b1);
    rhs.rows_mut(d1, d2).copy_from(&spec.b2);
    let sol = solve(&block, &rhs, "joint block system")?;
    let x_star = sol.rows(0, d1).into_owned();
    let y_star = sol.rows(d1, d2).into_owned();

    let i1 = Matrix::identity(d1, d1);
    let i2 = Matrix::identity(d2, d2);
    let lambda = spectral_norm(&(&i1 - zeta * &spec.a11));
    let mu = spectral_norm(&(&i2 - zeta * &delta));
    let lipschitz_l = lambda
        .max(zeta * spectral_norm(&spec.a12))
        .max(zeta * spectral_norm(&spec.a21))
        .max(spectral_norm(&(&i2 - zeta * &spec.a22)));

    let (noise_fast, noise_slow) = if spec.noise_sigma > 0.0 {
        let s2 = zeta * zeta * spec.noise_sigma * spec.noise_sigma;
        (
            NoiseModel::multiplicative_affine(s2 * d1 as f64),
            NoiseModel::multiplicative_affine(s2 * d2 as f64),
        )
    } else {
        (NoiseModel::zero(), NoiseModel::zero())
    };

    let a11_inv_b1 = solve(&spec.a11, &spec.b1, "A11")?;
    let (a11f, a12f, b1f) = (spec.a11.clone(), spec.a12.clone(), spec.b1.clone());
    let (a21g, a22g, b2g) = (spec.a21.clone(), spec.a22.clone(), spec.b2.clone());
    Problem::new(
        d1,
        d2,
        Arc::new(move |x: &Vector, y: &Vector| x + zeta * (&b1f - &a11f * x - &a12f * y)),
        Arc::new(move |x: &Vector, y: &Vector| y + zeta * (&b2g - &a21g * x - &a22g * y)),
        lambda,
        mu,
        lipschitz_l,
        x_star,
        y_star,
        noise_fast,
        noise_slow,
    )
    .map(|p| {
        p.with_fast_fixed_point_map(Arc::new(move |y: &Vector| {
            &a11_inv_b1 - &a11_inv_a12 * y
        }))
    })
}

// ---------------------------------------------------------------------------
// Random test-instance generation
// ---------------------------------------------------------------------------

/// Deterministic matrix `M = margin I + G'G/dim + skew_scale (S - S')` whose
/// negation is Hurwitz with real-part margin at least `margin`.
pub fn generate_random_hurwitz_with_skew(
    dim: usize,
    seed: u64,
    margin: f64,
    skew_scale: f64,
) -> Matrix {
    assert!(margin > 0.0, "margin must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss =
        |r: &mut ChaCha8Rng| Matrix::from_fn(dim, dim, |_, _| r.sample::<f64, _>(StandardNormal));
    let g = gauss(&mut rng);
    let s = gauss(&mut rng);
    margin * Matrix::identity(dim, dim)
        + g.transpose() * &g / dim as f64
        + skew_scale * (&s - s.transpose())
}

/// `generate_random_hurwitz_with_skew` with a fixed skew scale of 0.5.
pub fn generate_random_hurwitz(dim: usize, seed: u64, margin: f64) -> Matrix {
    generate_random_hurwitz_with_skew(dim, seed, margin, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_trajectory_at, step, State, TrajectoryRng};
    use crate::problem::validate_problem;
    use crate::schedule::{Regime, Schedule};
    use approx::assert_relative_eq;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    fn schedule1(alpha: f64, beta: f64, offset: f64) -> Schedule {
        Schedule {
            regime: Regime::BothOneOverK,
            alpha_coef: alpha,
            beta_coef: beta,
            offset,
            exponent_a: None,
            strict: false,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn polyak_affine_scalar_instance() {
        // F(x) = 0.5 x + 0.5: fixed point 1.
        let spec = PolyakSpec::affine(
            mat(1, 1, &[0.5]),
            Vector::from_element(1, 0.5),
            NoiseModel::zero(),
            NoiseModel::zero(),
        )
        .unwrap();
        assert_eq!(spec.lambda_f, 0.5);
        let p = make_polyak(spec).unwrap();
        assert_eq!(p.x_star[0], 1.0);
        assert_eq!(p.y_star[0], 1.0);
        assert_eq!(p.lambda, 0.5);
        assert_eq!(p.mu, 0.0);
        assert_eq!(p.lipschitz_l, 1.0);
        let report = validate_problem(&p, 16, 1).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
        // g(x*(y), y) constant in y
        assert_eq!(report.max_contraction_ratio_g, 0.0);
    }

    #[test]
    fn polyak_slow_scale_is_exact_weighted_average() {
        // beta_k = 2/(k+1); replay the weight recursion directly and compare
        // y_100 against the weighted sum of the recorded x_k.
        let spec = PolyakSpec::affine(
            mat(1, 1, &[0.5]),
            Vector::from_element(1, 0.5),
            NoiseModel::additive_gaussian(0.3, 1),
            NoiseModel::zero(),
        )
        .unwrap();
        let p = make_polyak(spec).unwrap();
        let s = schedule1(0.5, 2.0, 1.0);
        let mut rng = TrajectoryRng::new(42);
        let mut st = State::initial(Vector::from_element(1, -2.0), Vector::from_element(1, 3.0));
        let horizon = 100u64;
        let mut weights = vec![0.0f64; horizon as usize + 1];
        let mut w_init = 1.0f64;
        let mut xs = Vec::new();
        for k in 0..horizon {
            let beta = s.beta_at(k);
            xs.push(st.x[0]);
            for w in weights.iter_mut().take(k as usize) {
                *w *= 1.0 - beta;
            }
            weights[k as usize] = beta;
            w_init *= 1.0 - beta;
            st = step(&p, &s, &st, &mut rng).unwrap();
        }
        let expected: f64 = w_init * 3.0
            + xs.iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum::<f64>();
        assert_relative_eq!(st.y[0], expected, epsilon = 1e-10);
    }

    #[test]
    fn saddle_decoupled_origin() {
        let p = make_saddle(SaddleQuadraticSpec {
            p_mat: Matrix::identity(2, 2),
            r_mat: Matrix::identity(2, 2),
            c_mat: Matrix::zeros(2, 2),
            step_zeta: None,
            noise_fast: NoiseModel::zero(),
            noise_slow: NoiseModel::zero(),
        })
        .unwrap();
        assert_eq!(p.x_star, Vector::zeros(2));
        assert_eq!(p.y_star, Vector::zeros(2));
        // decoupled: zeta defaults to half of 2/(1+1) = 1, so lambda = 0.5
        assert_relative_eq!(p.lambda, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn saddle_scalar_matches_direct_solve_and_eigen_oracle() {
        let zeta = 0.4;
        let c = 0.5;
        let p = make_saddle(SaddleQuadraticSpec {
            p_mat: mat(1, 1, &[1.0]),
            r_mat: mat(1, 1, &[1.0]),
            c_mat: mat(1, 1, &[c]),
            step_zeta: Some(zeta),
            noise_fast: NoiseModel::zero(),
            noise_slow: NoiseModel::zero(),
        })
        .unwrap();
        // direct solve of [P -C; C' R][x;y]=[0;0]
        let sol = mat(2, 2, &[1.0, -c, c, 1.0])
            .lu()
            .solve(&Vector::zeros(2))
            .unwrap();
        assert_eq!(p.x_star[0], sol[0]);
        assert_eq!(p.y_star[0], sol[1]);
        // induced fast contraction factor = |1 - zeta * eig(P)|
        assert_relative_eq!(p.lambda, (1.0 - zeta).abs(), epsilon = 1e-12);
        // composed slow matrix is 1 - zeta (R + c^2 / P)
        assert_relative_eq!(p.mu, (1.0 - zeta * (1.0 + c * c)).abs(), epsilon = 1e-12);
        let report = validate_problem(&p, 16, 2).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
    }

    #[test]
    fn saddle_rejects_zeta_above_threshold() {
        let threshold =
            saddle_zeta_threshold(&Matrix::identity(1, 1), &Matrix::identity(1, 1), &mat(1, 1, &[0.5]));
        let err = make_saddle(SaddleQuadraticSpec {
            p_mat: Matrix::identity(1, 1),
            r_mat: Matrix::identity(1, 1),
            c_mat: mat(1, 1, &[0.5]),
            step_zeta: Some(threshold * 1.01),
            noise_fast: NoiseModel::zero(),
            noise_slow: NoiseModel::zero(),
        })
        .unwrap_err();
        assert!(matches!(err, TtsaError::Inadmissible(_)), "{err}");
    }

    #[test]
    fn lagrangian_identity_row_at_origin() {
        // H = -|x|^2/2 (q = 0), constraint x_1 = 0.
        let p = make_lagrangian(LagrangianSpec {
            q_mat: Matrix::identity(2, 2),
            q_vec: Vector::zeros(2),
            a_mat: mat(1, 2, &[1.0, 0.0]),
            b_vec: Vector::zeros(1),
            step_zeta: None,
            noise_fast: NoiseModel::zero(),
        })
        .unwrap();
        assert_eq!(p.x_star, Vector::zeros(2));
        assert_eq!(p.y_star, Vector::zeros(1));
        assert_eq!(p.noise_slow, NoiseModel::zero());
    }

    #[test]
    fn lagrangian_generic_matches_schur_complement_oracle() {
        let q = mat(4, 4, &[
            2.0, 0.2, 0.0, 0.0, //
            0.2, 1.5, 0.1, 0.0, //
            0.0, 0.1, 1.0, 0.0, //
            0.0, 0.0, 0.0, 0.8,
        ]);
        let qv = Vector::from_row_slice(&[0.3, -0.7, 1.1, 0.4]);
        let a = mat(2, 4, &[1.0, 0.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.2]);
        let b = Vector::from_row_slice(&[0.5, -0.25]);
        let p = make_lagrangian(LagrangianSpec {
            q_mat: q.clone(),
            q_vec: qv.clone(),
            a_mat: a.clone(),
            b_vec: b.clone(),
            step_zeta: None,
            noise_fast: NoiseModel::zero(),
        })
        .unwrap();

        // Independent route: eliminate x via the Schur complement.
        let q_inv_at = q.clone().lu().solve(&a.transpose()).unwrap();
        let q_inv_q = q.clone().lu().solve(&qv).unwrap();
        let schur = &a * &q_inv_at;
        let y = schur.lu().solve(&(&a * &q_inv_q - &b)).unwrap();
        let x = q.lu().solve(&(&qv - a.transpose() * &y)).unwrap();
        assert_relative_eq!((&p.x_star - &x).norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!((&p.y_star - &y).norm(), 0.0, epsilon = 1e-10);
        // constraint residual at the optimum
        assert!((&a * &p.x_star - &b).norm() <= 1e-10);

        let report = validate_problem(&p, 16, 3).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
    }

    #[test]
    fn lagrangian_rejects_rank_deficient_constraints() {
        let err = make_lagrangian(LagrangianSpec {
            q_mat: Matrix::identity(2, 2),
            q_vec: Vector::zeros(2),
            a_mat: mat(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            b_vec: Vector::zeros(2),
            step_zeta: None,
            noise_fast: NoiseModel::zero(),
        })
        .unwrap_err();
        assert!(matches!(err, TtsaError::Inadmissible(_)), "{err}");
    }

    fn linear_spec_decoupled() -> LinearTTSASpec {
        LinearTTSASpec {
            a11: mat(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            a12: Matrix::zeros(2, 1),
            a21: Matrix::zeros(1, 2),
            a22: mat(1, 1, &[0.5]),
            b1: Vector::from_row_slice(&[1.0, 4.0]),
            b2: Vector::from_element(1, 1.0),
            step_zeta: 0.4,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn linear_decoupled_fixed_point_is_blockwise_solve() {
        let p = make_linear_ttsa(linear_spec_decoupled()).unwrap();
        assert_relative_eq!(p.x_star[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.x_star[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.y_star[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_delta_with_identity_a11() {
        // A11 = I: Delta = A22 - A21 A12. Pick values where mu changes iff
        // the product enters.
        let a21 = mat(1, 2, &[0.3, 0.1]);
        let a12 = mat(2, 1, &[0.2, 0.4]);
        let a22 = mat(1, 1, &[1.0]);
        let delta_expected: f64 = 1.0 - (0.3 * 0.2 + 0.1 * 0.4);
        let p = make_linear_ttsa(LinearTTSASpec {
            a11: Matrix::identity(2, 2),
            a12,
            a21,
            a22,
            b1: Vector::zeros(2),
            b2: Vector::zeros(1),
            step_zeta: 0.5,
            noise_sigma: 0.0,
        })
        .unwrap();
        assert_relative_eq!(p.mu, (1.0 - 0.5 * delta_expected).abs(), epsilon = 1e-12);
    }

    #[test]
    fn linear_random_instance_converges_to_block_solve() {
        let a11 = generate_random_hurwitz_with_skew(3, 1, 0.5, 0.1);
        let a22 = generate_random_hurwitz_with_skew(2, 2, 0.5, 0.1);
        let spec = LinearTTSASpec {
            a11,
            a12: mat(3, 2, &[0.1, 0.0, 0.0, 0.1, 0.05, 0.0]),
            a21: mat(2, 3, &[0.1, 0.0, 0.05, 0.0, 0.1, 0.0]),
            a22,
            b1: Vector::from_row_slice(&[1.0, -0.5, 0.25]),
            b2: Vector::from_row_slice(&[0.5, 0.5]),
            step_zeta: 0.3,
            noise_sigma: 0.0,
        };
        let p = make_linear_ttsa(spec).unwrap();
        assert!(p.lambda < 1.0 && p.mu < 1.0, "lambda={} mu={}", p.lambda, p.mu);

        // iterate the induced noiseless maps with unit steps
        let mut x = Vector::zeros(3);
        let mut y = Vector::zeros(2);
        for _ in 0..5000 {
            let xn = (p.f)(&x, &y);
            let yn = (p.g)(&x, &y);
            x = xn;
            y = yn;
        }
        assert!((&x - &p.x_star).norm() <= 1e-8, "{}", (&x - &p.x_star).norm());
        assert!((&y - &p.y_star).norm() <= 1e-8);

        let report = validate_problem(&p, 16, 4).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
    }

    #[test]
    fn linear_noise_bound_matches_entry_variance() {
        let mut spec = linear_spec_decoupled();
        spec.noise_sigma = 0.2;
        let p = make_linear_ttsa(spec).unwrap();
        let expected_fast = 0.4 * 0.4 * 0.2 * 0.2 * 2.0;
        assert_relative_eq!(p.noise_fast.c1_bound, expected_fast, epsilon = 1e-15);
        assert_relative_eq!(p.noise_slow.c1_bound, expected_fast / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn linear_rejects_non_hurwitz_blocks() {
        let mut spec = linear_spec_decoupled();
        spec.a11 = mat(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let err = make_linear_ttsa(spec).unwrap_err();
        assert!(matches!(err, TtsaError::Inadmissible(_)), "{err}");

        // Hurwitz A11 but sign-flipped Schur complement.
        let mut spec = linear_spec_decoupled();
        spec.a22 = mat(1, 1, &[-0.5]);
        let err = make_linear_ttsa(spec).unwrap_err();
        assert!(matches!(err, TtsaError::Inadmissible(_)), "{err}");
    }

    #[test]
    fn hurwitz_generator_scalar_and_spd_cases() {
        let m = generate_random_hurwitz(1, 7, 0.5);
        assert!(m[(0, 0)] >= 0.5);

        let sym = generate_random_hurwitz_with_skew(4, 3, 0.25, 0.0);
        assert!((&sym - sym.transpose()).amax() <= 1e-12);
        let min = symmetric_eigenvalues(&sym)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        assert!(min >= 0.25 - 1e-12);
    }

    #[test]
    fn hurwitz_generator_eigenvalue_sweep() {
        for seed in 0..100 {
            let m = generate_random_hurwitz(8, seed, 0.3);
            assert!(
                hurwitz_offenders(&m).is_empty(),
                "seed {seed} produced non-Hurwitz -M"
            );
        }
    }

    #[test]
    fn noiseless_trajectory_reaches_linear_fixed_point() {
        let p = make_linear_ttsa(linear_spec_decoupled()).unwrap();
        let s = schedule1(40.0, 20.0, 80.0);
        let idx = [0u64, 20_000];
        let t = run_trajectory_at(
            &p,
            &s,
            &Vector::zeros(2),
            &Vector::zeros(1),
            20_000,
            &idx,
            0,
            false,
        )
        .unwrap();
        let last = t.errors.last().unwrap();
        assert!(last.err_xy <= 1e-8, "err_xy {}", last.err_xy);
    }
}
