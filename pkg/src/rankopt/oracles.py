"""Scripted ranking oracles built from synthetic scalar objectives.

These stand in for human judgment in tests and benchmarks: lower score is
better, rankings sort noiseless (or noise-perturbed) scores ascending, and
ties go to the lowest candidate index so transcripts stay deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .decoder import Trajectory, decode
from .optimizer import CandidateSet, FeedbackKind, RankFeedback

Objective = Callable[[np.ndarray], float]


def _check_dim(z: np.ndarray, d: int, what: str) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (d,):
        raise ValueError(f"{what} expects a vector of length {d}, got shape {z.shape}")
    return z


@dataclass(frozen=True)
class SphereObjective:
    """f(z) = ||z - center||^2; global minimum 0 at the center."""

    center: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))

    @property
    def d(self) -> int:
        return self.center.shape[0]

    def __call__(self, z: np.ndarray) -> float:
        z = _check_dim(z, self.d, "sphere objective")
        diff = z - self.center
        return float(diff @ diff)


@dataclass(frozen=True)
class RosenbrockObjective:
    """Classic banana valley; minimum 0 at (1, ..., 1)."""

    d: int

    def __call__(self, z: np.ndarray) -> float:
        z = _check_dim(z, self.d, "rosenbrock objective")
        return float(np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (1.0 - z[:-1]) ** 2))


def projection_matrix(d: int, e: int, seed: int) -> np.ndarray:
    """Fixed seeded projection from embedding space to latent space.

    Orthonormalized (QR of a seeded Gaussian), so for d >= e it maps
    embedding distances isometrically: ||A u - A v|| = ||u - v||.
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((max(d, e), min(d, e)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))  # fix the sign convention for determinism
    return q if d >= e else q.T


@dataclass(frozen=True)
class EmbeddingQuadraticObjective:
    """f(z) = ||z - A c||^2 with A a fixed seeded projection of the
    condition embedding c; the unique minimizer is z = A c."""

    embedding: np.ndarray
    d: int
    projection_seed: int = 0
    scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding", np.asarray(self.embedding, dtype=np.float64))

    @property
    def target(self) -> np.ndarray:
        a = projection_matrix(self.d, self.embedding.shape[0], self.projection_seed)
        return self.scale * (a @ self.embedding)

    def __call__(self, z: np.ndarray) -> float:
        z = _check_dim(z, self.d, "embedding-quadratic objective")
        diff = z - self.target
        return float(diff @ diff)


@dataclass(frozen=True)
class TrajectoryDistanceObjective:
    """Mean squared pointwise distance between the decoded path of z and a
    target path, under a fixed condition embedding and decoder seed."""

    target: Trajectory
    condition: np.ndarray
    decoder_seed: int = 0
    d: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition", np.asarray(self.condition, dtype=np.float64))

    def __call__(self, z: np.ndarray) -> float:
        z = _check_dim(z, self.d, "trajectory-distance objective")
        path = decode(z, self.condition, self.decoder_seed, length=self.target.length)
        diff = path.points - self.target.points
        return float(np.mean(np.sum(diff * diff, axis=1)))


def evaluate(objective: Objective, z: np.ndarray) -> float:
    """Score a latent under an objective (pure, finite, lower is better)."""
    value = float(objective(np.asarray(z, dtype=np.float64)))
    if not np.isfinite(value):
        raise ValueError(f"objective produced a non-finite score: {value}")
    return value


def objective_from_spec(spec: Mapping) -> Objective:
    """Build an objective from the small JSON wire form
    {kind, params, ...}; used by the CLI and service."""
    kind = str(spec.get("kind", "")).lower()
    params = dict(spec.get("params", {}))
    if kind == "sphere":
        if "center" in params:
            center = np.asarray(params["center"], dtype=np.float64)
        else:
            d = int(params["d"])
            fill = float(params.get("center_fill", 0.0))
            center = np.full(d, fill)
        return SphereObjective(center=center)
    if kind == "rosenbrock":
        return RosenbrockObjective(d=int(params["d"]))
    if kind == "embedding_quadratic":
        return EmbeddingQuadraticObjective(
            embedding=np.asarray(params["embedding"], dtype=np.float64),
            d=int(params["d"]),
            projection_seed=int(params.get("projection_seed", 0)),
            scale=float(params.get("scale", 1.0)),
        )
    if kind == "trajectory_distance":
        target = Trajectory(points=np.asarray(params["target"], dtype=np.float64))
        return TrajectoryDistanceObjective(
            target=target,
            condition=np.asarray(params["condition"], dtype=np.float64),
            decoder_seed=int(params.get("decoder_seed", 0)),
            d=int(params["d"]),
        )
    raise ValueError(f"unknown objective kind: {kind!r}")


@dataclass
class ScriptedOracle:
    """Deterministic (m,k)-ranking oracle over a scalar objective.

    Gaussian noise of std ``noise_std`` is added to scores before sorting
    (modelling an inconsistent judge); the noise consumes this oracle's own
    stream, so optimizer determinism is untouched. With zero noise, rankings
    of any strictly increasing transform of the objective are identical.
    """

    objective: Objective
    k: int | None = None
    noise_std: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        self._rng = np.random.default_rng(self.seed)

    def scores(self, candidates: CandidateSet) -> np.ndarray:
        return np.array([evaluate(self.objective, z) for z in candidates.points])

    def best_objective(self, candidates: CandidateSet) -> float:
        """Noiseless best score over the fan; used for round logs."""
        return float(self.scores(candidates).min())

    def rank(self, candidates: CandidateSet, k: int | None = None) -> RankFeedback:
        depth = k if k is not None else (self.k if self.k is not None else candidates.m)
        if not 1 <= depth <= candidates.m:
            raise ValueError(f"ranking depth {depth} out of range for m={candidates.m}")
        scores = self.scores(candidates)
        if self.noise_std > 0:
            scores = scores + self.noise_std * self._rng.standard_normal(candidates.m)
        order = np.argsort(scores, kind="stable")  # stable: ties to lowest index
        top = tuple(int(i) for i in order[:depth])
        if depth == 1:
            return RankFeedback(FeedbackKind.BEST_ONLY, top)
        return RankFeedback(FeedbackKind.FULL_RANKING, top)
