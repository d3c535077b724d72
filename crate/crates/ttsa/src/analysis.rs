//! Ensemble statistics, rate fitting, bound comparison, and brute-force
//! oracles for the supporting inequalities.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::engine::run_trajectory_at;
use crate::error::{Result, TtsaError};
use crate::problem::{fixed_point_of_f_from, Problem};
use crate::schedule::{bound_curve, bound_curve_fast, BoundConstants, Schedule};
use crate::Vector;

/// Monte Carlo error estimates over an ensemble of trajectories.
///
/// All series share `indices`. Half-widths are 95% normal-approximation
/// confidence intervals (`1.96 sd / sqrt(trials)`); trials >= 100
/// recommended since squared errors are skewed.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub indices: Vec<u64>,
    pub mean_err_xy: Vec<f64>,
    pub mean_err_x: Vec<f64>,
    pub mean_err_z: Vec<f64>,
    pub mean_norm_u2: Vec<f64>,
    pub hw_err_xy: Vec<f64>,
    pub hw_err_x: Vec<f64>,
    pub hw_err_z: Vec<f64>,
    pub hw_norm_u2: Vec<f64>,
    pub trials: usize,
}

impl EnsembleStats {
    /// CSV with mean and half-width columns alongside the shared index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,err_xy,err_x,err_z,normU2,hw_err_xy,hw_err_x,hw_err_z,hw_normU2\n",
        );
        for (i, k) in self.indices.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                k,
                self.mean_err_xy[i],
                self.mean_err_x[i],
                self.mean_err_z[i],
                self.mean_norm_u2[i],
                self.hw_err_xy[i],
                self.hw_err_x[i],
                self.hw_err_z[i],
                self.hw_norm_u2[i],
            ));
        }
        out
    }
}

/// Per-trial seed derived from `(base_seed, trial)` by a splitmix64 round so
/// nearby bases do not alias.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    let mut z = base_seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(trial as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Strictly increasing recording indices: 0 plus `points` log-spaced values
/// in `[1, horizon]` (always including the horizon).
pub fn log_spaced_indices(horizon: u64, points: usize) -> Vec<u64> {
    assert!(horizon >= 1 && points >= 2);
    let mut out = vec![0u64];
    let lh = (horizon as f64).ln();
    for i in 0..points {
        let k = (lh * i as f64 / (points - 1) as f64).exp().round() as u64;
        out.push(k.clamp(1, horizon));
    }
    out.dedup();
    out
}

fn mean_and_halfwidth(values: &[f64]) -> (f64, f64) {
    // Identical trials (noiseless runs, repeated seeds) must report exactly
    // zero spread, not summation rounding noise.
    if values.windows(2).all(|w| w[0] == w[1]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Run `trials` independent trajectories in parallel and aggregate error
/// series at the given indices.
///
/// Trial results are collected in trial order before aggregation, so the
/// output is identical for any parallel execution schedule.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    p: &Problem,
    s: &Schedule,
    x0: &Vector,
    y0: &Vector,
    horizon: u64,
    indices: &[u64],
    trials: usize,
    base_seed: u64,
) -> Result<EnsembleStats> {
    if trials < 2 {
        return Err(TtsaError::Domain(format!(
            "trials must be >= 2, got {trials}"
        )));
    }
    let per_trial: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(base_seed, t);
            run_trajectory_at(p, s, x0, y0, horizon, indices, seed, false)
                .map(|traj| traj.errors)
                .map_err(|e| TtsaError::TrialFailed {
                    trial: t,
                    seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = indices.len();
    let mut stats = EnsembleStats {
        indices: indices.to_vec(),
        mean_err_xy: Vec::with_capacity(m),
        mean_err_x: Vec::with_capacity(m),
        mean_err_z: Vec::with_capacity(m),
        mean_norm_u2: Vec::with_capacity(m),
        hw_err_xy: Vec::with_capacity(m),
        hw_err_x: Vec::with_capacity(m),
        hw_err_z: Vec::with_capacity(m),
        hw_norm_u2: Vec::with_capacity(m),
        trials,
    };
    let mut buf = vec![0.0f64; trials];
    for i in 0..m {
        for series in 0..4usize {
            for (t, errs) in per_trial.iter().enumerate() {
                let e = &errs[i];
                buf[t] = match series {
                    0 => e.err_xy,
                    1 => e.err_x,
                    2 => e.err_z,
                    _ => e.norm_u2,
                };
            }
            let (mean, hw) = mean_and_halfwidth(&buf);
            let (mv, hv) = match series {
                0 => (&mut stats.mean_err_xy, &mut stats.hw_err_xy),
                1 => (&mut stats.mean_err_x, &mut stats.hw_err_x),
                2 => (&mut stats.mean_err_z, &mut stats.hw_err_z),
                _ => (&mut stats.mean_norm_u2, &mut stats.hw_norm_u2),
            };
            mv.push(mean);
            hv.push(hw);
        }
    }
    Ok(stats)
}

/// Fitted log-log slope of an error series over a trimmed window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (u64, u64),
}

/// Ordinary least squares of `log(value)` on `log(k + offset)` over indices
/// in `[k_lo, k_hi]`. For series of the exact form `c/(k+offset)^r` the
/// fitted slope is `-r`.
pub fn fit_rate(
    indices: &[u64],
    values: &[f64],
    offset: f64,
    k_lo: u64,
    k_hi: u64,
) -> Result<RateFit> {
    assert_eq!(indices.len(), values.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&k, &v) in indices.iter().zip(values) {
        if k < k_lo || k > k_hi {
            continue;
        }
        if v <= 0.0 || !v.is_finite() {
            return Err(TtsaError::Domain(format!(
                "nonpositive value {v} at k={k} in fit window"
            )));
        }
        xs.push((k as f64 + offset).ln());
        ys.push(v.ln());
    }
    if xs.len() < 5 {
        return Err(TtsaError::Domain(format!(
            "need at least 5 points in [{k_lo}, {k_hi}], found {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(TtsaError::Domain(
            "fit window has no spread in log(k + offset)".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        window: (k_lo, k_hi),
    })
}

/// One bound-comparison failure: `mean + halfwidth > bound` at index `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub k: u64,
    pub lhs: f64,
    pub bound: f64,
    /// Which series: combined error vs fast-iterate error.
    pub fast_iterate: bool,
}

/// Report of the per-index comparison against the theorem curves.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub checked: usize,
    pub violations: Vec<BoundViolation>,
    /// Whether the schedule used a strict offset (violations expected to be
    /// empty) or a relaxed one (violations are informational for small k).
    pub strict: bool,
}

impl BoundReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compare `mean + halfwidth` of the combined error against the combined
/// curve and of the fast-iterate error against the fast curve, per index.
pub fn check_bound_domination(
    stats: &EnsembleStats,
    c: &BoundConstants,
    s: &Schedule,
) -> Result<BoundReport> {
    let mut violations = Vec::new();
    for (i, &k) in stats.indices.iter().enumerate() {
        let lhs = stats.mean_err_xy[i] + stats.hw_err_xy[i];
        let rhs = bound_curve(c, s, k)?;
        if lhs > rhs {
            violations.push(BoundViolation {
                k,
                lhs,
                bound: rhs,
                fast_iterate: false,
            });
        }
        let lhs = stats.mean_err_x[i] + stats.hw_err_x[i];
        let rhs = bound_curve_fast(c, s, k)?;
        if lhs > rhs {
            violations.push(BoundViolation {
                k,
                lhs,
                bound: rhs,
                fast_iterate: true,
            });
        }
    }
    Ok(BoundReport {
        checked: stats.indices.len(),
        violations,
        strict: s.strict,
    })
}

/// Brute-force check of the auxiliary step-size inequality.
///
/// With `eps_k = eps/(k+K)^q` and `beta_k = beta/(k+K)`, computes
/// `s_{k+1} = (1 - beta_k p) s_k + eps_k` from `s_0 = 0` and verifies
/// `s_k <= (2/p) eps_k / beta_k` for all `k <= k_max`. Returns whether it
/// held everywhere and the maximum of `s_k p beta_k / (2 eps_k)`.
///
/// Hypothesis failures (`beta < 2(q-1)/p`, `p beta / K > 1`, `q` outside
/// `(1, 2]`) are inadmissibility errors, not counterexamples.
pub fn oracle_aux_lemma(
    eps: f64,
    q: f64,
    p: f64,
    beta: f64,
    big_k: f64,
    k_max: u64,
) -> Result<(bool, f64)> {
    if !(1.0 < q && q <= 2.0) {
        return Err(TtsaError::Inadmissible(format!(
            "q = {q} must lie in (1, 2]"
        )));
    }
    if p <= 0.0 || big_k <= 0.0 || eps < 0.0 {
        return Err(TtsaError::Inadmissible(
            "p and K must be positive, eps nonnegative".into(),
        ));
    }
    if beta < 2.0 * (q - 1.0) / p {
        return Err(TtsaError::Inadmissible(format!(
            "beta = {beta} violates beta >= 2(q-1)/p = {}",
            2.0 * (q - 1.0) / p
        )));
    }
    if p * beta / big_k > 1.0 {
        return Err(TtsaError::Inadmissible(format!(
            "p beta / K = {} exceeds 1",
            p * beta / big_k
        )));
    }
    let mut s = 0.0f64;
    let mut holds = true;
    let mut max_ratio = 0.0f64;
    for k in 0..=k_max {
        let t = k as f64 + big_k;
        let eps_k = eps / t.powf(q);
        let beta_k = beta / t;
        if eps_k > 0.0 {
            let ratio = s * p * beta_k / (2.0 * eps_k);
            max_ratio = max_ratio.max(ratio);
            if ratio > 1.0 {
                holds = false;
            }
        } else if s > 0.0 {
            holds = false;
            max_ratio = f64::INFINITY;
        }
        s = (1.0 - beta_k * p) * s + eps_k;
    }
    Ok((holds, max_ratio))
}

/// Violation entry for the averaged-noise variance bound.
#[derive(Debug, Clone, Copy)]
pub struct NoiseVarianceViolation {
    pub k: u64,
    pub estimate: f64,
    pub halfwidth: f64,
    pub bound: f64,
}

/// Compare Monte Carlo `E|U_m|^2` against `2 c1 Gamma beta_m`, flagging
/// indices where the estimate exceeds the bound by more than its 95%
/// half-width. `gamma` is an a-priori iterate bound (`Gamma2`/`Gamma3` from
/// the schedule constants, or a measured sup-moment fallback).
#[allow(clippy::too_many_arguments)]
pub fn oracle_noise_variance(
    p: &Problem,
    s: &Schedule,
    gamma: f64,
    x0: &Vector,
    y0: &Vector,
    horizon: u64,
    indices: &[u64],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<NoiseVarianceViolation>> {
    let stats = run_ensemble(p, s, x0, y0, horizon, indices, trials, base_seed)?;
    let c1 = p.c1_total();
    let mut violations = Vec::new();
    for (i, &k) in stats.indices.iter().enumerate() {
        let bound = 2.0 * c1 * gamma * s.beta_at(k);
        if stats.mean_norm_u2[i] > bound + stats.hw_norm_u2[i] {
            violations.push(NoiseVarianceViolation {
                k,
                estimate: stats.mean_norm_u2[i],
                halfwidth: stats.hw_norm_u2[i],
                bound,
            });
        }
    }
    Ok(violations)
}

/// Sampled Lipschitz ratio of `y -> x*(y)` against its closed-form constant.
///
/// Returns `(max_ratio, L0)` with `L0 = L/(1-lambda)`; callers assert
/// `max_ratio <= L0 + 1e-6`.
pub fn oracle_xstar_lipschitz(p: &Problem, pairs: usize, seed: u64) -> Result<(f64, f64)> {
    assert!(pairs >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l0 = p.derived().l0;
    let mut max_ratio = 0.0f64;
    let solve = |y: &Vector, warm: Option<&Vector>| -> Result<Vector> {
        if p.x_star_of_y.is_some() {
            p.fast_fixed_point(y, warm)
        } else {
            let x0 = warm.cloned().unwrap_or_else(|| p.x_star.clone());
            fixed_point_of_f_from(p, y, x0, 1e-12, crate::problem::default_max_iter(p.lambda, 1e-12))
        }
    };
    let mut warm: Option<Vector> = None;
    for i in 0..pairs {
        // alternate radii to probe near- and far-field
        let radius = [0.1, 1.0, 10.0][i % 3];
        let y1 = Vector::from_fn(p.dim_slow, |_, _| {
            radius * rng.sample::<f64, _>(StandardNormal)
        });
        let y2 = Vector::from_fn(p.dim_slow, |_, _| {
            radius * rng.sample::<f64, _>(StandardNormal)
        });
        let dy = (&y1 - &y2).norm();
        if dy == 0.0 {
            continue;
        }
        let x1 = solve(&y1, warm.as_ref())?;
        let x2 = solve(&y2, Some(&x1))?;
        max_ratio = max_ratio.max((&x1 - &x2).norm() / dy);
        warm = Some(x2);
    }
    Ok((max_ratio, l0))
}
