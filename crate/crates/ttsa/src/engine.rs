//! Coupled-iteration engine with proof-instrumentation sequences.
//!
//! Alongside the iterates `(x_k, y_k)` the engine maintains the averaged
//! slow-scale noise `U_{k+1} = (1-beta_k) U_k + beta_k M'_{k+1}` (`U_0 = 0`)
//! and the auxiliary iterate `z_k = y_k - U_k` (`z_0 = y_0`). These are
//! always updated; only recording is gated.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TtsaError};
use crate::problem::Problem;
use crate::schedule::Schedule;
use crate::Vector;

/// Per-step iterate bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub k: u64,
    pub x: Vector,
    pub y: Vector,
    /// Averaged slow-scale noise.
    pub u: Vector,
    /// Auxiliary iterate `z = y - u`.
    pub z: Vector,
}

impl State {
    pub fn initial(x0: Vector, y0: Vector) -> State {
        let u = Vector::zeros(y0.len());
        let z = y0.clone();
        State { k: 0, x: x0, y: y0, u, z }
    }
}

/// One counter-based stream per noise sequence so trials are reproducible
/// and order-independent.
pub struct TrajectoryRng {
    pub fast: ChaCha8Rng,
    pub slow: ChaCha8Rng,
}

impl TrajectoryRng {
    pub fn new(seed: u64) -> Self {
        let mut fast = ChaCha8Rng::seed_from_u64(seed);
        fast.set_stream(0);
        let mut slow = ChaCha8Rng::seed_from_u64(seed);
        slow.set_stream(1);
        TrajectoryRng { fast, slow }
    }
}

fn check_finite(v: &Vector, step: u64, what: &str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(TtsaError::NumericBlowup {
            step,
            what: what.into(),
            norm: v.norm(),
        })
    }
}

/// Advance one step, returning the new state and the slow-scale noise draw
/// (needed by the unrolled-average identity check).
pub fn step_with_noise(
    p: &Problem,
    s: &Schedule,
    st: &State,
    rng: &mut TrajectoryRng,
) -> Result<(State, Vector)> {
    let alpha = s.alpha_at(st.k);
    let beta = s.beta_at(st.k);

    let fv = (p.f)(&st.x, &st.y);
    check_finite(&fv, st.k, "f(x,y)")?;
    let gv = (p.g)(&st.x, &st.y);
    check_finite(&gv, st.k, "g(x,y)")?;

    // Exactly one draw per sequence per step, even when the model is zero,
    // to keep streams aligned across configurations.
    let m_fast = p.noise_fast.sample(&st.x, &st.y, p.dim_fast, &mut rng.fast);
    let m_slow = p.noise_slow.sample(&st.x, &st.y, p.dim_slow, &mut rng.slow);
    check_finite(&m_fast, st.k, "fast noise")?;
    check_finite(&m_slow, st.k, "slow noise")?;

    let x = &st.x + alpha * (fv - &st.x + &m_fast);
    let y = &st.y + beta * (gv - &st.y + &m_slow);
    check_finite(&x, st.k, "x")?;
    check_finite(&y, st.k, "y")?;

    let u = (1.0 - beta) * &st.u + beta * &m_slow;
    let z = &y - &u;

    Ok((
        State {
            k: st.k + 1,
            x,
            y,
            u,
            z,
        },
        m_slow,
    ))
}

/// Advance one step of the coupled iteration.
pub fn step(p: &Problem, s: &Schedule, st: &State, rng: &mut TrajectoryRng) -> Result<State> {
    step_with_noise(p, s, st, rng).map(|(st, _)| st)
}

/// Residual of the auxiliary recursion
/// `z_{k+1} = (1-beta_k) z_k + beta_k g(x_k, y_k)`.
///
/// Zero in exact arithmetic for any step; the contract is
/// `<= 1e-8 * (1 + |z_{k+1}|)` in floating point.
pub fn z_update_check(p: &Problem, before: &State, after: &State, beta_k: f64) -> f64 {
    let gv = (p.g)(&before.x, &before.y);
    let expected = (1.0 - beta_k) * &before.z + beta_k * gv;
    (&after.z - expected).norm()
}

/// Error functionals at one recorded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub k: u64,
    /// `|x_k - x*(y_k)|^2 + |y_k - y*|^2`.
    pub err_xy: f64,
    /// `|x_k - x*|^2`.
    pub err_x: f64,
    /// `|x_k - x*(z_k)|^2 + |z_k - y*|^2`.
    pub err_z: f64,
    /// `|U_k|^2`.
    pub norm_u2: f64,
}

/// Recorded slice of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub errors: Vec<ErrorRecord>,
    /// Slow-scale noise draws `M'_1, M'_2, ...` when logging is on
    /// (capped; used by the unrolled-average identity test).
    pub noise_log: Vec<Vector>,
}

impl Trajectory {
    /// CSV with exact header `k,err_xy,err_x,err_z,normU2`; values are
    /// shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,err_xy,err_x,err_z,normU2\n");
        for e in &self.errors {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.k, e.err_xy, e.err_x, e.err_z, e.norm_u2
            ));
        }
        out
    }
}

struct ErrorEvaluator<'a> {
    problem: &'a Problem,
    warm_y: Option<Vector>,
    warm_z: Option<Vector>,
}

impl<'a> ErrorEvaluator<'a> {
    fn new(problem: &'a Problem) -> Self {
        ErrorEvaluator {
            problem,
            warm_y: None,
            warm_z: None,
        }
    }

    fn eval(&mut self, st: &State) -> Result<ErrorRecord> {
        let xs_y = self.problem.fast_fixed_point(&st.y, self.warm_y.as_ref())?;
        let xs_z = self.problem.fast_fixed_point(&st.z, self.warm_z.as_ref())?;
        let err_xy =
            (&st.x - &xs_y).norm_squared() + (&st.y - &self.problem.y_star).norm_squared();
        let err_z =
            (&st.x - &xs_z).norm_squared() + (&st.z - &self.problem.y_star).norm_squared();
        let err_x = (&st.x - &self.problem.x_star).norm_squared();
        self.warm_y = Some(xs_y);
        self.warm_z = Some(xs_z);
        Ok(ErrorRecord {
            k: st.k,
            err_xy,
            err_x,
            err_z,
            norm_u2: st.u.norm_squared(),
        })
    }
}

/// Maximum number of slow-noise draws kept when logging is requested.
pub const NOISE_LOG_CAP: usize = 4096;

/// Run a trajectory recording at the given strictly increasing step indices
/// (each must be `<= horizon`). Deterministic given `seed`.
pub fn run_trajectory_at(
    p: &Problem,
    s: &Schedule,
    x0: &Vector,
    y0: &Vector,
    horizon: u64,
    indices: &[u64],
    seed: u64,
    log_noise: bool,
) -> Result<Trajectory> {
    assert!(horizon >= 1, "horizon must be >= 1");
    debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
    if x0.len() != p.dim_fast {
        return Err(TtsaError::DimensionMismatch {
            context: "x0".into(),
            expected: p.dim_fast,
            got: x0.len(),
        });
    }
    if y0.len() != p.dim_slow {
        return Err(TtsaError::DimensionMismatch {
            context: "y0".into(),
            expected: p.dim_slow,
            got: y0.len(),
        });
    }

    let mut rng = TrajectoryRng::new(seed);
    let mut evaluator = ErrorEvaluator::new(p);
    let mut st = State::initial(x0.clone(), y0.clone());
    let mut states = Vec::with_capacity(indices.len());
    let mut errors = Vec::with_capacity(indices.len());
    let mut noise_log = Vec::new();
    let mut next = indices.iter().copied().peekable();

    loop {
        if next.peek() == Some(&st.k) {
            next.next();
            states.push(st.clone());
            errors.push(evaluator.eval(&st)?);
        }
        if st.k >= horizon {
            break;
        }
        let (new_st, m_slow) = step_with_noise(p, s, &st, &mut rng)?;
        if log_noise && noise_log.len() < NOISE_LOG_CAP {
            noise_log.push(m_slow);
        }
        st = new_st;
    }

    Ok(Trajectory {
        states,
        errors,
        noise_log,
    })
}

/// Run a trajectory recording every `stride` steps (always including step 0
/// and the horizon).
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory(
    p: &Problem,
    s: &Schedule,
    x0: &Vector,
    y0: &Vector,
    horizon: u64,
    stride: u64,
    seed: u64,
) -> Result<Trajectory> {
    assert!(stride >= 1);
    let mut indices: Vec<u64> = (0..=horizon).step_by(stride as usize).collect();
    if *indices.last().unwrap() != horizon {
        indices.push(horizon);
    }
    run_trajectory_at(p, s, x0, y0, horizon, &indices, seed, false)
}

/// Recompute `U_m` from logged noise by the unrolled average
/// `U_m = sum_{i<m} beta_i prod_{j=i+1}^{m-1} (1-beta_j) M'_{i+1}`.
pub fn unrolled_averaged_noise(s: &Schedule, noise_log: &[Vector], m: usize) -> Vector {
    assert!(m <= noise_log.len());
    let dim = noise_log.first().map_or(0, Vector::len);
    let mut u = Vector::zeros(dim);
    for i in 0..m {
        let mut w = s.beta_at(i as u64);
        for j in (i + 1)..m {
            w *= 1.0 - s.beta_at(j as u64);
        }
        u += w * &noise_log[i];
    }
    u
}
