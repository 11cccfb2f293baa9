"""Particle filter over soft segmentation masks with egomotion prediction.

The swarm's image position is tracked by a set of particles. Each frame
the particles are shifted by the egomotion-induced flow plus Gaussian
diffusion (the swarm's own motion model), weighted by the soft mask
value read bilinearly at their positions, and resampled with a roulette
wheel (inverse-CDF draw with independent uniforms).

Weights are set to the mask likelihood, not multiplied into the prior
weight; with per-frame resampling the two are equivalent, and this is
the update the tracker is specified to perform.

Pixel coordinates in this module are corner-origin: (0, 0) is the
center of the top-left pixel, x right, y down. The sampleable domain
is [0, w-1] x [0, h-1]; particles outside it have likelihood 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraMotion, CameraPose, Intrinsics, flow_field, motion_between_poses

logger = logging.getLogger(__name__)


class TrackLostError(RuntimeError):
    """Every particle fell on zero mask support; no posterior exists."""


@dataclass(frozen=True)
class TrackerConfig:
    """Tuning knobs of the particle filter.

    motion_noise_sigma is the per-axis Gaussian diffusion in pixels per
    frame, covering swarm self-motion on top of the egomotion flow.
    resample_every = k resamples on every k-th frame; 0 disables
    resampling. lost_reinit_after is the number of consecutive lost
    frames after which the particle cloud is re-spread uniformly.
    """

    n_particles: int = 1000
    motion_noise_sigma: float = 3.0
    resample_every: int = 1
    seed: int = 0
    likelihood_exponent: float = 1.0
    lost_reinit_after: int = 30

    def __post_init__(self) -> None:
        if self.n_particles < 2:
            raise ValueError(f"need at least 2 particles, got {self.n_particles}")
        if not (math.isfinite(self.motion_noise_sigma) and self.motion_noise_sigma >= 0):
            raise ValueError(
                f"motion_noise_sigma must be >= 0, got {self.motion_noise_sigma!r}"
            )
        if self.resample_every < 0:
            raise ValueError(f"resample_every must be >= 0, got {self.resample_every}")
        if not (math.isfinite(self.likelihood_exponent) and self.likelihood_exponent > 0):
            raise ValueError(
                f"likelihood_exponent must be positive, got {self.likelihood_exponent!r}"
            )
        if self.lost_reinit_after < 1:
            raise ValueError(
                f"lost_reinit_after must be >= 1, got {self.lost_reinit_after}"
            )


@dataclass
class SoftMask:
    """Per-pixel swarm presence in [0, 1], shape (height, width)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {self.values.shape}")
        if self.values.size == 0:
            raise ValueError("mask must be non-empty")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("mask contains non-finite values")
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"mask values must lie in [0, 1], got [{lo}, {hi}]")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass
class ParticleSet:
    """Particle cloud: positions (n, 2) corner-origin px, weights (n,).

    Each row of ``xy`` is one particle. Weights are kept normalized;
    the random generator travels with the set so a fixed seed fixes the
    whole trajectory of the filter.
    """

    xy: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator

    def __post_init__(self) -> None:
        self.xy = np.asarray(self.xy, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        n = self.xy.shape[0]
        if self.xy.ndim != 2 or self.xy.shape[1] != 2 or n < 1:
            raise ValueError(f"xy must be (n, 2), got shape {self.xy.shape}")
        if self.weights.shape != (n,):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match {n} particles"
            )
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and non-negative")
        total = float(self.weights.sum())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"weights must sum to 1, got {total}")


def init_uniform(intr: Intrinsics, config: TrackerConfig) -> ParticleSet:
    """Spread particles uniformly over the image, equal weights."""
    rng = np.random.default_rng(config.seed)
    xy = _uniform_cloud(intr.width, intr.height, config.n_particles, rng)
    w = np.full(config.n_particles, 1.0 / config.n_particles)
    return ParticleSet(xy, w, rng)


def _uniform_cloud(
    width: int, height: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    xy = np.empty((n, 2))
    xy[:, 0] = rng.uniform(0.0, width - 1.0, n)
    xy[:, 1] = rng.uniform(0.0, height - 1.0, n)
    return xy


def predict(
    ps: ParticleSet,
    motion: CameraMotion,
    intr: Intrinsics,
    z: float,
    sigma: float,
) -> ParticleSet:
    """Move particles by the induced flow plus Gaussian diffusion.

    ``z`` is the camera height over the scene for the flow model;
    ``sigma`` the per-axis diffusion in pixels. Weights are unchanged:
    prediction only transports the belief.
    """
    x_pp = ps.xy[:, 0] - intr.cx
    y_pp = ps.xy[:, 1] - intr.cy
    vx, vy = flow_field(x_pp, y_pp, motion, intr, z)
    xy = np.empty_like(ps.xy)
    xy[:, 0] = ps.xy[:, 0] + vx
    xy[:, 1] = ps.xy[:, 1] + vy
    if sigma > 0:
        xy += ps.rng.normal(0.0, sigma, size=xy.shape)
    return ParticleSet(xy, ps.weights.copy(), ps.rng)


def sample_bilinear(values: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear read of a (h, w) array at float positions, 0 outside.

    Positions are corner-origin pixels; integer coordinates hit pixel
    values exactly. Outside [0, w-1] x [0, h-1] the result is 0.
    """
    h, w = values.shape
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xc = np.clip(x, 0, w - 1)
    yc = np.clip(y, 0, h - 1)
    x0 = np.clip(np.floor(xc).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(yc).astype(int), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = values[y0, x0] * (1 - fx) + values[y0, x1] * fx
    bot = values[y1, x0] * (1 - fx) + values[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(inside, out, 0.0)


def update_weights(
    ps: ParticleSet, mask: SoftMask, exponent: float = 1.0
) -> ParticleSet:
    """Set weights to the (normalized) mask likelihood at each particle.

    Raises TrackLostError when the total likelihood is zero; the caller
    decides whether to flag the frame and keep a uniform belief.
    """
    like = sample_bilinear(mask.values, ps.xy[:, 0], ps.xy[:, 1])
    if exponent != 1.0:
        like = like**exponent
    total = float(like.sum())
    if total <= 0.0:
        raise TrackLostError("all particles have zero mask likelihood")
    return ParticleSet(ps.xy.copy(), like / total, ps.rng)


def resample_roulette(ps: ParticleSet) -> ParticleSet:
    """Roulette-wheel resampling: n independent inverse-CDF draws.

    Deliberately not systematic or stratified resampling; draws use
    independent uniforms against the weight CDF.
    """
    n = ps.xy.shape[0]
    cdf = np.cumsum(ps.weights)
    cdf[-1] = 1.0  # guard against cumulative roundoff at the top
    u = ps.rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    xy = ps.xy[idx].copy()
    w = np.full(n, 1.0 / n)
    return ParticleSet(xy, w, ps.rng)


def estimate_centroid(ps: ParticleSet) -> tuple[float, float]:
    """Weighted mean of the particle cloud, corner-origin pixels."""
    cx = float(np.dot(ps.weights, ps.xy[:, 0]))
    cy = float(np.dot(ps.weights, ps.xy[:, 1]))
    return cx, cy


def effective_sample_size(ps: ParticleSet) -> float:
    return 1.0 / float(np.dot(ps.weights, ps.weights))


@dataclass
class TrackResult:
    """Per-frame tracker output.

    centroids: (n_frames, 2) weighted centroid, corner-origin px.
    lost: (n_frames,) bool, True where the frame had zero support.
    particles: per-frame particle positions of the weighted posterior
    set (before resampling), for outline extraction downstream.
    weights: matching normalized weights, so downstream stages can
    restrict to the posterior support.
    """

    centroids: np.ndarray
    lost: np.ndarray
    particles: list[np.ndarray]
    weights: list[np.ndarray]
    config: TrackerConfig


def track_sequence(
    masks,
    poses: list[CameraPose],
    intr: Intrinsics,
    config: TrackerConfig,
    keep_particles: bool = True,
) -> TrackResult:
    """Run the filter over a mask sequence with per-frame camera poses.

    ``masks`` may be any iterable of SoftMask (a generator keeps memory
    flat for long sequences); ``poses`` must have one CameraPose per
    frame. On a lost frame the belief is re-spread uniform over the
    image and flagged; after lost_reinit_after consecutive lost frames
    the particle positions are re-drawn uniformly as well.
    """
    ps = init_uniform(intr, config)
    centroids = []
    lost_flags = []
    snapshots: list[np.ndarray] = []
    weight_snapshots: list[np.ndarray] = []
    lost_streak = 0
    ess_warned = False
    n_seen = 0
    prev_pose: CameraPose | None = None
    for t, mask in enumerate(masks):
        if t >= len(poses):
            raise ValueError(
                f"mask sequence has more frames than the {len(poses)} poses"
            )
        if mask.width != intr.width or mask.height != intr.height:
            raise ValueError(
                f"frame {t}: mask is {mask.width}x{mask.height}, intrinsics "
                f"say {intr.width}x{intr.height}"
            )
        pose = poses[t]
        if prev_pose is not None:
            motion = motion_between_poses(prev_pose, pose, 1.0)
            z_mid = 0.5 * (prev_pose.z + pose.z)
            ps = predict(ps, motion, intr, z_mid, config.motion_noise_sigma)
        try:
            ps = update_weights(ps, mask, config.likelihood_exponent)
            lost = False
            lost_streak = 0
        except TrackLostError:
            lost = True
            lost_streak += 1
            if lost_streak >= config.lost_reinit_after:
                xy = _uniform_cloud(intr.width, intr.height, config.n_particles, ps.rng)
                ps = ParticleSet(
                    xy, np.full(config.n_particles, 1.0 / config.n_particles), ps.rng
                )
                lost_streak = 0
            else:
                ps = ParticleSet(
                    ps.xy.copy(),
                    np.full(config.n_particles, 1.0 / config.n_particles),
                    ps.rng,
                )
        centroids.append(estimate_centroid(ps))
        lost_flags.append(lost)
        if keep_particles:
            # Snapshot the same weighted set the centroid came from;
            # resampling below only prepares the next frame.
            snapshots.append(ps.xy.copy())
            weight_snapshots.append(ps.weights.copy())
        if not lost and config.resample_every > 0 and (t + 1) % config.resample_every == 0:
            ps = resample_roulette(ps)
        elif not ess_warned and effective_sample_size(ps) < 0.05 * config.n_particles:
            logger.warning(
                "frame %d: effective sample size %.1f of %d, weights degenerate",
                t,
                effective_sample_size(ps),
                config.n_particles,
            )
            ess_warned = True
        prev_pose = pose
        n_seen += 1
    if n_seen != len(poses):
        raise ValueError(f"got {n_seen} masks for {len(poses)} poses")
    return TrackResult(
        centroids=np.array(centroids, dtype=float).reshape(n_seen, 2),
        lost=np.array(lost_flags, dtype=bool),
        particles=snapshots,
        weights=weight_snapshots,
        config=config,
    )
