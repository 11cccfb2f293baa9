"""GPS/IMU fusion of the drone sensor log into per-frame camera poses.

Each sensor record carries a GPS position fix, an IMU velocity and the
gimbal attitude. Records are first linearly interpolated onto the frame
timestamps, then a constant-velocity Kalman filter over the 6-state
[position; velocity] smooths position and velocity. Attitude angles are
not filtered (the gimbal already stabilizes them); an optional
exponential moving average is available for noisy logs.

A record observes the full state directly (H = I6), with measurement
noise diag(gps_sigma^2 I3, imu_vel_sigma^2 I3) and discrete
white-acceleration process noise of strength process_accel_sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraPose


class FusionError(ValueError):
    """Sensor log unusable: empty, unsorted, or numerically singular."""


@dataclass(frozen=True)
class NoiseConfig:
    """Standard deviations of the sensor and process noise models.

    gps_sigma: m, per GPS position axis.
    imu_vel_sigma: m/s, per IMU velocity axis.
    process_accel_sigma: m/s^2, white-acceleration driving noise.
    """

    gps_sigma: float = 0.5
    imu_vel_sigma: float = 0.2
    process_accel_sigma: float = 1.0

    def __post_init__(self) -> None:
        for name in ("gps_sigma", "imu_vel_sigma", "process_accel_sigma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class SensorRecord:
    """One row of the drone log: GPS fix, IMU velocity, gimbal attitude."""

    frame: int
    t: float
    gps: tuple[float, float, float]
    vel: tuple[float, float, float]
    pitch: float
    yaw: float
    roll: float

    def __post_init__(self) -> None:
        vals = (self.t, *self.gps, *self.vel, self.pitch, self.yaw, self.roll)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"sensor record has non-finite fields: {self!r}")


@dataclass
class FusionState:
    """Kalman state: mean (6,) = [x y z vx vy vz], covariance (6, 6).

    The covariance is validated symmetric positive definite on
    construction, so every predict/update step re-checks the invariant.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(6)
        self.cov = np.asarray(self.cov, dtype=float).reshape(6, 6)
        if not np.all(np.isfinite(self.mean)) or not np.all(np.isfinite(self.cov)):
            raise FusionError("fusion state has non-finite entries")
        asym = np.max(np.abs(self.cov - self.cov.T))
        if asym > 1e-9:
            raise FusionError(f"covariance asymmetry {asym:.3e} exceeds 1e-9")
        try:
            np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise FusionError("covariance is not positive definite") from None


def _process_noise(dt: float, accel_sigma: float) -> np.ndarray:
    """Discrete white-acceleration covariance for one [pos; vel] axis pair."""
    q = np.zeros((6, 6))
    s2 = accel_sigma**2
    q_pp = s2 * dt**4 / 4.0
    q_pv = s2 * dt**3 / 2.0
    q_vv = s2 * dt**2
    for axis in range(3):
        q[axis, axis] = q_pp
        q[axis, axis + 3] = q_pv
        q[axis + 3, axis] = q_pv
        q[axis + 3, axis + 3] = q_vv
    return q


def kalman_predict(state: FusionState, dt: float, noise: NoiseConfig) -> FusionState:
    """Advance the constant-velocity model by dt seconds."""
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    f = np.eye(6)
    f[0, 3] = f[1, 4] = f[2, 5] = dt
    mean = f @ state.mean
    cov = f @ state.cov @ f.T + _process_noise(dt, noise.process_accel_sigma)
    cov = 0.5 * (cov + cov.T)
    return FusionState(mean, cov)


def _measurement_cov(noise: NoiseConfig) -> np.ndarray:
    r = np.zeros((6, 6))
    r[:3, :3] = noise.gps_sigma**2 * np.eye(3)
    r[3:, 3:] = noise.imu_vel_sigma**2 * np.eye(3)
    return r


def kalman_update(
    state: FusionState, record: SensorRecord, noise: NoiseConfig
) -> FusionState:
    """Condition the state on one sensor record (position + velocity)."""
    z = np.array([*record.gps, *record.vel], dtype=float)
    r = _measurement_cov(noise)
    # H = I6, so the innovation covariance is just P + R.
    s = state.cov + r
    try:
        s_chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise FusionError("singular innovation covariance") from None
    # Gain K = P S^-1 via the Cholesky factor.
    k = np.linalg.solve(s_chol.T, np.linalg.solve(s_chol, state.cov.T)).T
    mean = state.mean + k @ (z - state.mean)
    ident = np.eye(6)
    # Joseph form keeps the covariance PSD under roundoff.
    a = ident - k
    cov = a @ state.cov @ a.T + k @ r @ k.T
    cov = 0.5 * (cov + cov.T)
    return FusionState(mean, cov)


def initial_state(record: SensorRecord, noise: NoiseConfig) -> FusionState:
    """State anchored at the first record, with measurement-level spread."""
    mean = np.array([*record.gps, *record.vel], dtype=float)
    return FusionState(mean, _measurement_cov(noise))


def _check_log(log: list[SensorRecord]) -> None:
    if not log:
        raise FusionError("sensor log is empty")
    for a, b in zip(log, log[1:]):
        if b.t <= a.t:
            raise FusionError(
                f"sensor log timestamps must strictly increase "
                f"(t={a.t} then t={b.t})"
            )


def _unwrap_deg(values: np.ndarray) -> np.ndarray:
    return np.degrees(np.unwrap(np.radians(values)))


def resample_log_to_frames(
    log: list[SensorRecord], fps: float, n_frames: int | None = None
) -> list[SensorRecord]:
    """Linearly interpolate the log onto frame timestamps k/fps.

    Frames run from t=0 up to the last log timestamp (or ``n_frames``
    if given, which must stay within the log's time span). Attitude
    angles are unwrapped before interpolation so a 359 -> 1 deg yaw
    step does not sweep through 180.
    """
    _check_log(log)
    if not (math.isfinite(fps) and fps > 0):
        raise FusionError(f"fps must be positive, got {fps!r}")
    t = np.array([r.t for r in log])
    if n_frames is None:
        n_frames = int(math.floor((t[-1] - t[0]) * fps + 1e-9)) + 1
    frame_t = t[0] + np.arange(n_frames) / fps
    if frame_t[-1] > t[-1] + 1e-9:
        raise FusionError(
            f"{n_frames} frames at {fps} fps need {frame_t[-1]:.3f}s of log "
            f"but it ends at {t[-1]:.3f}s"
        )
    cols = {
        "gx": np.array([r.gps[0] for r in log]),
        "gy": np.array([r.gps[1] for r in log]),
        "gz": np.array([r.gps[2] for r in log]),
        "vx": np.array([r.vel[0] for r in log]),
        "vy": np.array([r.vel[1] for r in log]),
        "vz": np.array([r.vel[2] for r in log]),
        "pitch": _unwrap_deg(np.array([r.pitch for r in log])),
        "yaw": _unwrap_deg(np.array([r.yaw for r in log])),
        "roll": _unwrap_deg(np.array([r.roll for r in log])),
    }
    interp = {k: np.interp(frame_t, t, v) for k, v in cols.items()}
    out = []
    for i in range(n_frames):
        out.append(
            SensorRecord(
                frame=i,
                t=float(frame_t[i]),
                gps=(float(interp["gx"][i]), float(interp["gy"][i]), float(interp["gz"][i])),
                vel=(float(interp["vx"][i]), float(interp["vy"][i]), float(interp["vz"][i])),
                pitch=float(interp["pitch"][i]),
                yaw=float(interp["yaw"][i]),
                roll=float(interp["roll"][i]),
            )
        )
    return out


def _smooth_angles(frames: list[SensorRecord], alpha: float) -> np.ndarray:
    """EMA over unwrapped attitude angles; alpha=1 is pass-through."""
    if not (0 < alpha <= 1):
        raise FusionError(f"orientation alpha must be in (0, 1], got {alpha!r}")
    raw = np.stack(
        [
            _unwrap_deg(np.array([r.pitch for r in frames])),
            _unwrap_deg(np.array([r.yaw for r in frames])),
            _unwrap_deg(np.array([r.roll for r in frames])),
        ],
        axis=1,
    )
    if alpha == 1.0:
        return raw
    out = np.empty_like(raw)
    out[0] = raw[0]
    for i in range(1, len(frames)):
        out[i] = alpha * raw[i] + (1 - alpha) * out[i - 1]
    return out


def fuse_log(
    log: list[SensorRecord],
    noise: NoiseConfig,
    fps: float,
    n_frames: int | None = None,
    orientation_alpha: float = 1.0,
) -> list[CameraPose]:
    """Kalman-fused camera pose per frame.

    The filter is initialized from the first frame-aligned record and
    run predict/update at frame cadence. Returns one CameraPose per
    frame; position from the filter, attitude from the (optionally
    smoothed) log.
    """
    frames = resample_log_to_frames(log, fps, n_frames)
    angles = _smooth_angles(frames, orientation_alpha)
    dt = 1.0 / fps
    state = initial_state(frames[0], noise)
    poses = [_pose_from(state.mean, angles[0])]
    for i in range(1, len(frames)):
        state = kalman_predict(state, dt, noise)
        state = kalman_update(state, frames[i], noise)
        poses.append(_pose_from(state.mean, angles[i]))
    return poses


def gps_only_poses(
    log: list[SensorRecord], fps: float, n_frames: int | None = None
) -> list[CameraPose]:
    """Raw GPS positions per frame, attitude passed through. Baseline."""
    frames = resample_log_to_frames(log, fps, n_frames)
    angles = _smooth_angles(frames, 1.0)
    return [
        _pose_from(np.array([*r.gps, 0, 0, 0]), angles[i])
        for i, r in enumerate(frames)
    ]


def dead_reckoning_poses(
    log: list[SensorRecord], fps: float, n_frames: int | None = None
) -> list[CameraPose]:
    """IMU-only baseline: first GPS fix plus integrated velocity."""
    frames = resample_log_to_frames(log, fps, n_frames)
    angles = _smooth_angles(frames, 1.0)
    dt = 1.0 / fps
    pos = np.array(frames[0].gps, dtype=float)
    poses = [_pose_from(np.array([*pos, 0, 0, 0]), angles[0])]
    for i in range(1, len(frames)):
        # Trapezoidal velocity integration between consecutive frames.
        v0 = np.array(frames[i - 1].vel)
        v1 = np.array(frames[i].vel)
        pos = pos + 0.5 * (v0 + v1) * dt
        poses.append(_pose_from(np.array([*pos, 0, 0, 0]), angles[i]))
    return poses


def _pose_from(mean: np.ndarray, angles: np.ndarray) -> CameraPose:
    return CameraPose(
        x=float(mean[0]),
        y=float(mean[1]),
        z=float(mean[2]),
        pitch=float(angles[0]),
        yaw=float(angles[1]),
        roll=float(angles[2]),
    )
