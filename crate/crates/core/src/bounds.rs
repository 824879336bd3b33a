//! Lipschitz constants, the per-timestep mesh resolution schedule, and the
//! a-priori discretization error budget.
//!
//! With cost constant `L_c` and intersection-correspondence constant `L_theta`,
//! the stage-`t` value functions are Lipschitz with
//!
//! ```text
//! L_v(t) = L_c * sum_{k=1}^{T-t+1} (1 + L_theta)^k
//! ```
//!
//! and a mesh with resolutions `delta_0..delta_T` raises the game value by at most
//!
//! ```text
//! E(delta) = sum_{tau=1}^{T-1} (L_c + L_v(tau+1)) delta_tau + L_v(1) delta_0 + L_c delta_T.
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{euclidean, hausdorff_boxes, intersect_unchecked, reach_unchecked, Aabb};
use crate::instance::InstanceSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("timestep {t} outside 1..={horizon}")]
    BadTimestep { t: usize, horizon: usize },
    #[error("epsilon must be finite and positive, got {0}")]
    BadEpsilon(f64),
    #[error(
        "Lipschitz constants must be finite; L_c must be positive for a schedule (got L_c={l_c}, L_theta={l_theta})"
    )]
    BadConstants { l_c: f64, l_theta: f64 },
    #[error("schedule has {actual} entries, expected horizon + 1 = {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("resolution entries must be finite and nonnegative")]
    NegativeDelta,
    #[error("no valid sample pairs")]
    NoSamples,
}

/// Lipschitz constants of the box class: the 2-norm cost is 1-Lipschitz and
/// the clipped sup-norm reach correspondence intersected with a box is
/// 1-Lipschitz under the Hausdorff distance.
pub fn lipschitz_for_box_class() -> (f64, f64) {
    (1.0, 1.0)
}

pub fn lipschitz_v(t: usize, l_c: f64, l_theta: f64, horizon: usize) -> Result<f64, BoundsError> {
    if t == 0 || t > horizon {
        return Err(BoundsError::BadTimestep { t, horizon });
    }
    if !(l_c >= 0.0 && l_theta >= 0.0 && l_c.is_finite() && l_theta.is_finite()) {
        return Err(BoundsError::BadConstants { l_c, l_theta });
    }
    let terms = (horizon - t + 1) as i32;
    if l_theta == 0.0 {
        return Ok(l_c * terms as f64);
    }
    let r = 1.0 + l_theta;
    // r + r^2 + ... + r^n
    Ok(l_c * r * (r.powi(terms) - 1.0) / l_theta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzInfo {
    pub l_c: f64,
    pub l_theta: f64,
    /// `l_v[t - 1]` holds `L_v(t)` for `t = 1..=T`.
    pub l_v: Vec<f64>,
}

impl LipschitzInfo {
    pub fn new(l_c: f64, l_theta: f64, horizon: usize) -> Result<Self, BoundsError> {
        let l_v = (1..=horizon)
            .map(|t| lipschitz_v(t, l_c, l_theta, horizon))
            .collect::<Result<_, _>>()?;
        Ok(LipschitzInfo { l_c, l_theta, l_v })
    }

    pub fn horizon(&self) -> usize {
        self.l_v.len()
    }

    /// `L_v(t)` for `1 <= t <= T`.
    pub fn l_v(&self, t: usize) -> f64 {
        self.l_v[t - 1]
    }

    /// Per-stage weight multiplying `delta_t` in the error budget.
    fn weight(&self, t: usize) -> f64 {
        let horizon = self.horizon();
        if t == 0 {
            self.l_v(1)
        } else if t == horizon {
            self.l_c
        } else {
            self.l_c + self.l_v(t + 1)
        }
    }

    pub fn error_bound(&self, delta: &[f64]) -> Result<f64, BoundsError> {
        self.check_delta(delta)?;
        let horizon = self.horizon();
        // summation order: interior stages, then delta_0, then delta_T
        let interior: f64 = (1..horizon).map(|t| self.weight(t) * delta[t]).sum();
        Ok(interior + self.weight(0) * delta[0] + self.weight(horizon) * delta[horizon])
    }

    /// Tail bound `eps_t = sum_{tau=t}^{T-1} (L_c + L_v(tau+1)) delta_tau + L_c delta_T`
    /// for `1 <= t <= T`.
    pub fn stage_error(&self, delta: &[f64], t: usize) -> Result<f64, BoundsError> {
        self.check_delta(delta)?;
        let horizon = self.horizon();
        if t == 0 || t > horizon {
            return Err(BoundsError::BadTimestep { t, horizon });
        }
        let tail: f64 = (t..horizon).map(|tau| self.weight(tau) * delta[tau]).sum();
        Ok(tail + self.l_c * delta[horizon])
    }

    fn check_delta(&self, delta: &[f64]) -> Result<(), BoundsError> {
        let expected = self.horizon() + 1;
        if delta.len() != expected {
            return Err(BoundsError::LengthMismatch {
                expected,
                actual: delta.len(),
            });
        }
        if delta.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(BoundsError::NegativeDelta);
        }
        Ok(())
    }
}

/// Mesh resolutions `delta_0..delta_T` for a target suboptimality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSchedule {
    pub epsilon: f64,
    pub delta: Vec<f64>,
    pub lipschitz: LipschitzInfo,
}

impl DeltaSchedule {
    pub fn horizon(&self) -> usize {
        self.delta.len() - 1
    }

    pub fn error_bound(&self) -> f64 {
        self.lipschitz
            .error_bound(&self.delta)
            .expect("schedule is well formed")
    }

    pub fn stage_error(&self, t: usize) -> Result<f64, BoundsError> {
        self.lipschitz.stage_error(&self.delta, t)
    }

    /// A copy with every resolution scaled, keeping `epsilon` as the nominal target.
    pub fn scaled(&self, factor: f64) -> DeltaSchedule {
        DeltaSchedule {
            epsilon: self.epsilon,
            delta: self.delta.iter().map(|d| d * factor).collect(),
            lipschitz: self.lipschitz.clone(),
        }
    }
}

/// Splits `epsilon` evenly over the `T + 1` terms of the error budget.
pub fn delta_schedule(epsilon: f64, l_c: f64, l_theta: f64, horizon: usize) -> Result<DeltaSchedule, BoundsError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(BoundsError::BadEpsilon(epsilon));
    }
    if l_c.is_nan() || l_c <= 0.0 {
        return Err(BoundsError::BadConstants { l_c, l_theta });
    }
    let lipschitz = LipschitzInfo::new(l_c, l_theta, horizon)?;
    let share = epsilon / (horizon + 1) as f64;
    let delta = (0..=horizon).map(|t| share / lipschitz.weight(t)).collect();
    Ok(DeltaSchedule {
        epsilon,
        delta,
        lipschitz,
    })
}

pub fn error_bound(delta: &[f64], l_c: f64, l_theta: f64, horizon: usize) -> Result<f64, BoundsError> {
    LipschitzInfo::new(l_c, l_theta, horizon)?.error_bound(delta)
}

fn sample_in(rng: &mut ChaCha8Rng, b: &Aabb) -> Vec<f64> {
    (0..b.dim()).map(|k| rng.gen_range(b.lo()[k]..=b.hi()[k])).collect()
}

/// Empirical Hausdorff-Lipschitz ratio of `x -> reach(x) ∩ Q_t^(j)` over pairs
/// drawn from a common predecessor body `Q_{t-1}^(i)` with `j` a successor of `i`.
///
/// Advisory only: the error budget always uses the declared constants.
pub fn estimate_l_theta(spec: &InstanceSpec, samples: usize, seed: u64) -> Result<f64, BoundsError> {
    let pairs = sampling_pairs(spec);
    if pairs.is_empty() {
        return Err(BoundsError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let (src, dst) = pairs[rng.gen_range(0..pairs.len())];
        let x = sample_in(&mut rng, src);
        let y = sample_in(&mut rng, src);
        let dist = euclidean(&x, &y);
        let tx = intersect_unchecked(&reach_unchecked(&x, spec.rho(), spec.domain()), dst);
        let ty = intersect_unchecked(&reach_unchecked(&y, spec.rho(), spec.domain()), dst);
        let (Some(tx), Some(ty)) = (tx, ty) else { continue };
        let h = hausdorff_boxes(&tx, &ty).expect("same dimension");
        let ratio = if h == 0.0 {
            0.0
        } else if dist == 0.0 {
            continue;
        } else {
            h / dist
        };
        best = Some(best.map_or(ratio, |b| b.max(ratio)));
    }
    best.ok_or(BoundsError::NoSamples)
}

/// Empirical ratio `|c(x, y) - c(x', y')| / (|x - x'| + |y - y'|)` over domain samples.
pub fn estimate_l_c(spec: &InstanceSpec, samples: usize, seed: u64) -> Result<f64, BoundsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = spec.domain();
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let pts: Vec<Vec<f64>> = (0..4).map(|_| sample_in(&mut rng, domain)).collect();
        let denom = euclidean(&pts[0], &pts[2]) + euclidean(&pts[1], &pts[3]);
        if denom == 0.0 {
            continue;
        }
        let diff = (euclidean(&pts[0], &pts[1]) - euclidean(&pts[2], &pts[3])).abs();
        let ratio = diff / denom;
        best = Some(best.map_or(ratio, |b| b.max(ratio)));
    }
    best.ok_or(BoundsError::NoSamples)
}

fn sampling_pairs(spec: &InstanceSpec) -> Vec<(&Aabb, &Aabb)> {
    let mut pairs = Vec::new();
    for t in 1..=spec.horizon() {
        for (i, j) in spec.transitions(t - 1) {
            if let (Some(src), Some(dst)) = (spec.body(t - 1, i), spec.body(t, j)) {
                pairs.push((src, dst));
            }
        }
    }
    pairs
}
