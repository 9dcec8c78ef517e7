use nalgebra::{SMatrix, SVector};

use crate::bbox::BoundingBox;
use crate::error::{Result, TrackError};

type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat4x8 = SMatrix<f64, 4, 8>;

/// Constant-velocity filter state over (cx, cy, w, h) and their per-frame
/// velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: Vec8,
    pub covariance: Mat8,
}

/// Initial velocity uncertainty is an order of magnitude above positional
/// uncertainty, mirroring that a first detection says nothing about motion.
const INIT_POS_FACTOR: f64 = 2.0;
const INIT_VEL_FACTOR: f64 = 10.0;
/// Velocities carry an eighth of the positional noise scale.
const VEL_NOISE_RATIO: f64 = 8.0;

impl TrackState {
    /// State from a first detection: box center/extents, zero velocities,
    /// diagonal covariance scaled by box height.
    pub fn from_detection(bbox: &BoundingBox, q_scale: f64) -> Result<Self> {
        if !(q_scale > 0.0) {
            return Err(TrackError::config("track state", format!("q_scale {q_scale} must be positive")));
        }
        let [cx, cy, w, h] = bbox.to_cwh();
        let mean = Vec8::from_column_slice(&[cx, cy, w, h, 0.0, 0.0, 0.0, 0.0]);
        let pos_std = INIT_POS_FACTOR * q_scale * h;
        let vel_std = INIT_VEL_FACTOR * (q_scale / VEL_NOISE_RATIO) * h;
        let mut covariance = Mat8::zeros();
        for i in 0..4 {
            covariance[(i, i)] = pos_std * pos_std;
            covariance[(i + 4, i + 4)] = vel_std * vel_std;
        }
        Ok(TrackState { mean, covariance })
    }

    /// Checks the documented invariants: symmetric covariance, positive
    /// diagonal, positive box extents.
    pub fn validate(&self) -> Result<()> {
        for i in 0..8 {
            for j in 0..8 {
                if (self.covariance[(i, j)] - self.covariance[(j, i)]).abs() > 1e-9 {
                    return Err(TrackError::State("covariance not symmetric".into()));
                }
            }
            if !(self.covariance[(i, i)] > 0.0) {
                return Err(TrackError::State("covariance diagonal not positive".into()));
            }
        }
        if !(self.mean[2] > 0.0 && self.mean[3] > 0.0) {
            return Err(TrackError::State("non-positive box extents in mean".into()));
        }
        Ok(())
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        BoundingBox::from_cwh(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }
}

/// Advances one frame under the constant-velocity model. Process noise is
/// diagonal and scales with box height, so large (near) subjects absorb more
/// motion uncertainty than distant ones.
pub fn kalman_predict(state: &TrackState, q_scale: f64) -> Result<TrackState> {
    if q_scale < 0.0 {
        return Err(TrackError::config("kalman_predict", format!("q_scale {q_scale} must be non-negative")));
    }
    if state.covariance.cholesky().is_none() {
        return Err(TrackError::State("predict entered with non positive-definite covariance".into()));
    }

    let mut f = Mat8::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }

    let h = state.mean[3];
    let pos_std = q_scale * h;
    let vel_std = (q_scale / VEL_NOISE_RATIO) * h;
    let mut q = Mat8::zeros();
    for i in 0..4 {
        q[(i, i)] = pos_std * pos_std;
        q[(i + 4, i + 4)] = vel_std * vel_std;
    }

    let mean = f * state.mean;
    let covariance = f * state.covariance * f.transpose() + q;
    Ok(TrackState { mean, covariance })
}

/// Folds a box measurement into the state. The measurement model observes
/// (cx, cy, w, h) directly with diagonal noise scaled by box height. The
/// posterior covariance uses the Joseph product form, which equals
/// (I - KH)P for the optimal gain but stays positive-definite under
/// round-off even in the vanishing-noise limit; it is symmetrized afterwards.
pub fn kalman_update(state: &TrackState, z: &BoundingBox, r_scale: f64) -> Result<TrackState> {
    if r_scale < 0.0 {
        return Err(TrackError::config("kalman_update", format!("r_scale {r_scale} must be non-negative")));
    }
    let mut h = Mat4x8::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }

    let box_h = state.mean[3];
    let std = r_scale * box_h;
    let r = Mat4::identity() * (std * std);

    let s = h * state.covariance * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| TrackError::Numeric("singular innovation covariance".into()))?;
    let k = state.covariance * h.transpose() * s_inv;

    let [cx, cy, w, hh] = z.to_cwh();
    let innovation = Vec4::from_column_slice(&[cx, cy, w, hh]) - h * state.mean;
    let mean = state.mean + k * innovation;
    let i_kh = Mat8::identity() - k * h;
    let p = i_kh * state.covariance * i_kh.transpose() + k * r * k.transpose();
    let covariance = 0.5 * (p + p.transpose());
    Ok(TrackState { mean, covariance })
}
