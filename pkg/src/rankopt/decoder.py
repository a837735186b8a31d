"""Deterministic toy decoder: (latent, condition embedding) -> 2D path.

The concatenated input is projected through a fixed seeded matrix onto
low-order Fourier coefficients (H harmonics per axis, a sine and a cosine
weight each, i.e. amplitude and phase), and the path is the superposition of
those harmonics over T samples, squeezed into the unit box. The map from
input to raw path is linear, so nearby latents decode to visually nearby
paths and pathwise distance is a well-conditioned objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LENGTH = 120  # samples per path (6 s at 20 fps)
DEFAULT_HARMONICS = 6


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered 2D path on the unit box."""

    points: np.ndarray  # (T, 2)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"trajectory points must have shape (T, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("trajectory contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def length(self) -> int:
        return self.points.shape[0]

    def to_wire(self) -> dict:
        return {"points": self.points.tolist()}

    @staticmethod
    def from_wire(payload: dict) -> "Trajectory":
        return Trajectory(points=np.asarray(payload["points"], dtype=np.float64))


def coefficient_matrix(d: int, e: int, seed: int, harmonics: int = DEFAULT_HARMONICS) -> np.ndarray:
    """Fixed seeded projection from [z; c] to the 4*H Fourier weights
    (sin and cos weight per harmonic per axis)."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((4 * harmonics, d + e)) / np.sqrt(d + e)


def _basis(length: int, harmonics: int) -> np.ndarray:
    # (T, 2H): columns are sin(2*pi*h*t/T) then cos(2*pi*h*t/T), h = 1..H.
    t = np.arange(length)[:, None]
    h = np.arange(1, harmonics + 1)[None, :]
    angles = 2.0 * np.pi * h * t / length
    return np.hstack([np.sin(angles), np.cos(angles)])


def fourier_coefficients(
    z: np.ndarray, c: np.ndarray, seed: int, harmonics: int = DEFAULT_HARMONICS
) -> np.ndarray:
    """Raw coefficient vector (4H,), linear in [z; c]. Layout: x-axis sin
    weights, x-axis cos weights, then the same for the y axis."""
    z = np.asarray(z, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if z.ndim != 1 or c.ndim != 1:
        raise ValueError("latent and condition must be 1D vectors")
    w = coefficient_matrix(z.shape[0], c.shape[0], seed, harmonics)
    return w @ np.concatenate([z, c])


def latent_path_matrix(
    d: int, e: int, seed: int, length: int = DEFAULT_LENGTH, harmonics: int = DEFAULT_HARMONICS
) -> np.ndarray:
    """The (2T, d) linear map latent -> flattened raw path, holding the
    condition fixed. Its operator norm bounds how far the raw path can move
    per unit change of the latent."""
    w = coefficient_matrix(d, e, seed, harmonics)[:, :d]
    basis = _basis(length, harmonics)
    rows = []
    for axis in (0, 1):
        block = w[2 * harmonics * axis : 2 * harmonics * (axis + 1), :]
        rows.append(basis @ block)  # (T, d)
    # Interleave x and y rows to match flattened (T, 2) order.
    out = np.empty((2 * length, d))
    out[0::2] = rows[0]
    out[1::2] = rows[1]
    return out


def decode(
    z: np.ndarray,
    c: np.ndarray,
    seed: int,
    length: int = DEFAULT_LENGTH,
    harmonics: int = DEFAULT_HARMONICS,
    normalize: bool = True,
) -> Trajectory:
    """Decode a latent under a condition embedding into a 2D path.

    Deterministic: identical (z, c, seed) always yield the identical path.
    With ``normalize`` the path is scaled down (never up) so every
    coordinate lies in [-1, 1]; zero inputs decode to a constant path at the
    origin.
    """
    coeffs = fourier_coefficients(z, c, seed, harmonics)
    basis = _basis(length, harmonics)
    per_axis = coeffs.reshape(2, 2 * harmonics)
    points = np.stack([basis @ per_axis[0], basis @ per_axis[1]], axis=1)
    if normalize:
        peak = np.abs(points).max(initial=0.0)
        if peak > 1.0:
            points = points / peak
    return Trajectory(points=points)
