"""Constant-velocity Kalman filter over box state (cx, cy, a, h) with Mahalanobis gating.

The 8-d state stacks the measured box (center-x, center-y, aspect w/h, height)
with its per-frame velocities. Process and measurement noise scale with the
box height through a NoiseProfile. All operations are value-in/value-out;
batched variants over stacked state arrays back the per-state API and the
tracker hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 95% quantile of the chi-square distribution with 4 degrees of freedom.
# Squared Mahalanobis distances above this gate are infeasible associations.
CHI2_GATE_95 = 9.487729036781154

_DIM = 8
_MDIM = 4


@dataclass(frozen=True)
class NoiseProfile:
    """Height-scaled standard deviations for process and measurement noise."""

    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160

    def __post_init__(self) -> None:
        if self.std_weight_position <= 0 or self.std_weight_velocity <= 0:
            raise ValueError("noise weights must be strictly positive")


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Gaussian box state: mean (8,) and covariance (8, 8)."""

    mean: np.ndarray
    covariance: np.ndarray


class KalmanFilter:
    """Constant-velocity filter with dt fixed at one frame per step.

    Frame subsampling is handled upstream by re-indexing the stream, so the
    transition matrix never changes.
    """

    def __init__(self, profile: NoiseProfile | None = None):
        self.profile = profile if profile is not None else NoiseProfile()

    # ------------------------------------------------------------------
    # Single-state API (wraps the batched forms below).

    def initiate(self, measurement: np.ndarray) -> KalmanState:
        """Create a track state from an unassociated (cx, cy, a, h) measurement.

        Velocities start at zero; the covariance is diagonal with position
        uncertainty scaled to the measured height.
        """
        z = np.asarray(measurement, dtype=float)
        h = z[3]
        if h <= 0:
            raise ValueError(f"measurement height must be positive, got {h}")
        mean = np.zeros(_DIM)
        mean[:_MDIM] = z
        wp, wv = self.profile.std_weight_position, self.profile.std_weight_velocity
        std = np.array(
            [
                2 * wp * h,
                2 * wp * h,
                1e-2,
                2 * wp * h,
                10 * wv * h,
                10 * wv * h,
                1e-5,
                10 * wv * h,
            ]
        )
        return KalmanState(mean=mean, covariance=np.diag(std * std))

    def predict(self, s: KalmanState) -> KalmanState:
        means, covs = self.predict_batch(s.mean[None], s.covariance[None])
        return KalmanState(mean=means[0], covariance=covs[0])

    def update(self, s: KalmanState, measurement: np.ndarray) -> KalmanState:
        z = np.asarray(measurement, dtype=float)
        if z[3] <= 0:
            raise ValueError(f"measurement height must be positive, got {z[3]}")
        means, covs = self.update_batch(s.mean[None], s.covariance[None], z[None])
        return KalmanState(mean=means[0], covariance=covs[0])

    def gating_distance(self, s: KalmanState, measurements: np.ndarray) -> np.ndarray:
        """Squared Mahalanobis distance from the projected state to each row of
        `measurements` (m, 4), under the innovation covariance."""
        zs = np.atleast_2d(np.asarray(measurements, dtype=float))
        if np.any(zs[:, 3] <= 0):
            raise ValueError("measurement heights must be positive")
        return self.gating_matrix(s.mean[None], s.covariance[None], zs)[0]

    # ------------------------------------------------------------------
    # Batched forms over n stacked states.

    def predict_batch(self, means: np.ndarray, covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        wp, wv = self.profile.std_weight_position, self.profile.std_weight_velocity
        h = means[:, 3]
        std = np.empty((means.shape[0], _DIM))
        std[:, 0] = std[:, 1] = std[:, 3] = wp * h
        std[:, 2] = 1e-2
        std[:, 4] = std[:, 5] = std[:, 7] = wv * h
        std[:, 6] = 1e-5
        new_means = means.copy()
        new_means[:, :_MDIM] += means[:, _MDIM:]
        # F = [[I, I], [0, I]] in 4x4 blocks, so F P F^T assembles from the
        # blocks of P without a general matrix product.
        pp = covs[:, :_MDIM, :_MDIM]
        pv = covs[:, :_MDIM, _MDIM:]
        vp = covs[:, _MDIM:, :_MDIM]
        vv = covs[:, _MDIM:, _MDIM:]
        new_covs = np.empty_like(covs)
        new_covs[:, :_MDIM, :_MDIM] = pp + pv + vp + vv
        new_covs[:, :_MDIM, _MDIM:] = pv + vv
        new_covs[:, _MDIM:, :_MDIM] = vp + vv
        new_covs[:, _MDIM:, _MDIM:] = vv
        new_covs[:, np.arange(_DIM), np.arange(_DIM)] += std * std
        return new_means, _symmetrize(new_covs)

    def project_batch(self, means: np.ndarray, covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Measurement-space mean (n, 4) and innovation covariance S (n, 4, 4)."""
        wp = self.profile.std_weight_position
        h = means[:, 3]
        std = np.empty((means.shape[0], _MDIM))
        std[:, 0] = std[:, 1] = std[:, 3] = wp * h
        std[:, 2] = 1e-1
        s = covs[:, :_MDIM, :_MDIM].copy()
        s[:, np.arange(_MDIM), np.arange(_MDIM)] += std * std
        return means[:, :_MDIM].copy(), s

    def update_batch(
        self, means: np.ndarray, covs: np.ndarray, zs: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Kalman correction of each state i with measurement zs[i].

        The innovation covariance is handled through its Cholesky factor; a
        non-positive-definite S (degenerate NoiseProfile) surfaces as
        numpy.linalg.LinAlgError.
        """
        proj_mean, s = self.project_batch(means, covs)
        chol = np.linalg.cholesky(s)
        b = covs[:, :, :_MDIM]  # P H^T
        # K = P H^T S^-1 via two triangular solves of the Cholesky factor.
        tmp = np.linalg.solve(chol, b.transpose(0, 2, 1))
        gain = np.linalg.solve(chol.transpose(0, 2, 1), tmp).transpose(0, 2, 1)
        innovation = zs - proj_mean
        new_means = means + (gain @ innovation[..., None])[..., 0]
        new_covs = covs - gain @ s @ gain.transpose(0, 2, 1)
        return new_means, _symmetrize(new_covs)

    def gating_matrix(self, means: np.ndarray, covs: np.ndarray, zs: np.ndarray) -> np.ndarray:
        """Squared Mahalanobis distances, shape (n_states, n_measurements)."""
        proj_mean, s = self.project_batch(means, covs)
        chol = np.linalg.cholesky(s)
        diff = zs[None, :, :] - proj_mean[:, None, :]
        # One triangular solve per state with all measurements as columns.
        y = np.linalg.solve(chol, diff.transpose(0, 2, 1))
        return np.einsum("nim,nim->nm", y, y)


def _symmetrize(covs: np.ndarray) -> np.ndarray:
    return (covs + covs.transpose(0, 2, 1)) / 2.0
