"""Two-stage latent optimization driven by an (m,k)-ranking oracle.

A session maintains a reference point, a gradient memory (running mean of
rank-based gradient estimates) and a fan of m candidate latents. Stage 1
consumes full rankings: the reference moves to a softmax-weighted combination
of the candidates, the ranking is turned into a comparison DAG whose edge
average estimates an ascent direction, and a new fan is spread along the
negated memory with geometrically shrinking steps plus Gaussian exploration.
A best-only answer selects the incumbent and enters stage 2, which polishes it
with small Gaussian fans until an accept-and-exit answer freezes the result.

Every operation maps (state, input) -> new state; nothing is mutated in
place. All randomness flows through one seeded generator whose draw order is
fixed: the initial fan, then one (m, d) block per generated fan. Identical
config, seed and feedback sequence therefore reproduce bitwise-identical
trajectories, which is what makes transcripts replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Iterable, Protocol

import numpy as np

from .errors import (
    ConfigError,
    DegenerateFeedbackError,
    FeedbackError,
    ProtocolError,
    UnsupportedFeedbackError,
)


class Stage(str, Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    FINISHED = "finished"


class FeedbackKind(str, Enum):
    FULL_RANKING = "full_ranking"
    BEST_ONLY = "best_only"
    ACCEPT_AND_EXIT = "accept_and_exit"


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class OptimizerConfig:
    """Session hyperparameters.

    mu1/mu2/mu3 are per-coordinate standard deviations: mu1 spreads the
    initial fan, mu2 the stage-1 exploration noise, mu3 the stage-2 polish
    fans. gamma in (0, 1) shrinks the step geometrically across the fan.
    k is the stage-1 ranking depth and defaults to m (a full ranking).
    """

    d: int
    m: int = 4
    k: int | None = None
    eta: float = 1.0
    gamma: float = 0.5
    mu1: float = 0.8
    mu2: float = 0.4
    mu3: float = 0.1
    max_stage1_rounds: int = 10
    max_stage2_rounds: int = 5
    elitism: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ConfigError(f"latent dimension must be >= 1, got {self.d}")
        if self.m < 2:
            raise ConfigError(f"query count m must be >= 2, got {self.m}")
        k = self.ranking_depth
        if not 2 <= k <= self.m:
            raise ConfigError(f"ranking depth k must satisfy 2 <= k <= m, got k={k}, m={self.m}")
        if not self.eta > 0:
            raise ConfigError(f"stepsize eta must be > 0, got {self.eta}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"shrinking rate gamma must lie strictly in (0, 1), got {self.gamma}")
        for name, mu in (("mu1", self.mu1), ("mu2", self.mu2), ("mu3", self.mu3)):
            if not mu > 0:
                raise ConfigError(f"{name} must be > 0, got {mu}")
        if self.max_stage1_rounds < 1 or self.max_stage2_rounds < 1:
            raise ConfigError("stage round caps must be positive")

    @property
    def ranking_depth(self) -> int:
        return self.m if self.k is None else self.k

    def to_wire(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "k": self.k,
            "eta": self.eta,
            "gamma": self.gamma,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "mu3": self.mu3,
            "max_stage1_rounds": self.max_stage1_rounds,
            "max_stage2_rounds": self.max_stage2_rounds,
            "elitism": self.elitism,
            "seed": self.seed,
        }

    @staticmethod
    def from_wire(payload: dict) -> "OptimizerConfig":
        known = {f.name for f in fields(OptimizerConfig)}
        return OptimizerConfig(**{k: v for k, v in payload.items() if k in known})


@dataclass(frozen=True)
class RankFeedback:
    """Ordered answer of an (m,k)-ranking oracle, best first.

    full_ranking carries 2..m indices, best_only and accept_and_exit exactly
    one. accept_and_exit both selects the final candidate and ends the
    session.
    """

    kind: FeedbackKind
    ranking: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranking", tuple(int(i) for i in self.ranking))

    def validate(self, m: int) -> None:
        if len(set(self.ranking)) != len(self.ranking):
            raise FeedbackError(f"ranking contains duplicate indices: {self.ranking}")
        for i in self.ranking:
            if not 0 <= i < m:
                raise FeedbackError(f"candidate index {i} out of range for m={m}")
        n = len(self.ranking)
        if self.kind is FeedbackKind.FULL_RANKING:
            # A singleton "full" ranking only makes sense for m == 1.
            if n < 2 and m > 1:
                raise FeedbackError(f"full ranking needs at least 2 indices, got {n}")
            if n > m:
                raise FeedbackError(f"full ranking has {n} indices for m={m}")
        else:
            if n != 1:
                raise FeedbackError(f"{self.kind.value} feedback needs exactly 1 index, got {n}")

    @property
    def best(self) -> int:
        return self.ranking[0]


def full_ranking(ranking: Iterable[int]) -> RankFeedback:
    return RankFeedback(FeedbackKind.FULL_RANKING, tuple(ranking))


def best_only(index: int) -> RankFeedback:
    return RankFeedback(FeedbackKind.BEST_ONLY, (index,))


def accept_and_exit(index: int) -> RankFeedback:
    return RankFeedback(FeedbackKind.ACCEPT_AND_EXIT, (index,))


@dataclass(frozen=True)
class CandidateSet:
    """One fan of m candidate latents, as presented to the oracle."""

    points: np.ndarray  # (m, d), read-only
    round_index: int
    stage: Stage

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _frozen(np.atleast_2d(self.points)))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class ComparisonDag:
    """Pairwise comparison graph: edge (i, j) records that candidate i
    scored strictly better than candidate j."""

    node_count: int
    edges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class OptimizerState:
    """Full session state; immutable, cheap to snapshot and replay."""

    config: OptimizerConfig
    stage: Stage
    z_star: np.ndarray  # reference point, (d,)
    g_bar: np.ndarray  # gradient memory, (d,)
    tau: int  # completed stage-1 updates
    z_star_star: np.ndarray | None  # incumbent best, set on entering stage 2
    candidates: CandidateSet
    rng_state: dict = field(repr=False)
    stage2_rounds: int = 0  # completed stage-2 selections

    def __post_init__(self) -> None:
        object.__setattr__(self, "z_star", _frozen(self.z_star))
        object.__setattr__(self, "g_bar", _frozen(self.g_bar))
        if self.z_star_star is not None:
            object.__setattr__(self, "z_star_star", _frozen(self.z_star_star))

    @property
    def finished(self) -> bool:
        return self.stage is Stage.FINISHED

    def allowed_feedback(self) -> tuple[FeedbackKind, ...]:
        if self.stage is Stage.STAGE1:
            return (FeedbackKind.FULL_RANKING, FeedbackKind.BEST_ONLY)
        if self.stage is Stage.STAGE2:
            return (FeedbackKind.BEST_ONLY, FeedbackKind.ACCEPT_AND_EXIT)
        return ()


def _restore_rng(state: dict) -> np.random.Generator:
    gen = np.random.default_rng()
    gen.bit_generator.state = state
    return gen


def init_session(config: OptimizerConfig, z_init: np.ndarray | None = None) -> OptimizerState:
    """Start a stage-1 session.

    The reference point and gradient memory start at zero (or at ``z_init``
    for a warm start); the first fan is m i.i.d. draws around the reference
    with per-coordinate std mu1.
    """
    if z_init is None:
        z0 = np.zeros(config.d)
    else:
        z0 = np.asarray(z_init, dtype=np.float64)
        if z0.shape != (config.d,):
            raise ValueError(f"z_init has shape {z0.shape}, expected ({config.d},)")
    rng = np.random.default_rng(config.seed)
    points = z0 + config.mu1 * rng.standard_normal((config.m, config.d))
    return OptimizerState(
        config=config,
        stage=Stage.STAGE1,
        z_star=z0,
        g_bar=np.zeros(config.d),
        tau=0,
        z_star_star=None,
        candidates=CandidateSet(points, round_index=0, stage=Stage.STAGE1),
        rng_state=rng.bit_generator.state,
    )


def init_refinement_session(config: OptimizerConfig, z_warm: np.ndarray) -> OptimizerState:
    """Start directly in stage 2, polishing around a warm-start latent."""
    z = np.asarray(z_warm, dtype=np.float64)
    if z.shape != (config.d,):
        raise ValueError(f"z_warm has shape {z.shape}, expected ({config.d},)")
    rng = np.random.default_rng(config.seed)
    points = _stage2_fan(config, z, rng)
    return OptimizerState(
        config=config,
        stage=Stage.STAGE2,
        z_star=z,
        g_bar=np.zeros(config.d),
        tau=0,
        z_star_star=z,
        candidates=CandidateSet(points, round_index=0, stage=Stage.STAGE2),
        rng_state=rng.bit_generator.state,
    )


def build_comparison_dag(m: int, feedback: RankFeedback) -> ComparisonDag:
    """Expand ranking feedback into the full set of pairwise comparisons.

    Ranked candidates beat every candidate ranked after them and every
    unranked candidate; unranked candidates stay mutually incomparable. A
    ranking of length k over m candidates therefore yields
    k*(k-1)/2 + k*(m-k) edges.
    """
    if feedback.kind is FeedbackKind.ACCEPT_AND_EXIT:
        raise FeedbackError("accept_and_exit feedback carries no comparison information")
    feedback.validate(m)
    ranked = feedback.ranking
    unranked = [j for j in range(m) if j not in set(ranked)]
    edges: list[tuple[int, int]] = []
    for a, better in enumerate(ranked):
        for worse in ranked[a + 1 :]:
            edges.append((better, worse))
        for worse in unranked:
            edges.append((better, worse))
    return ComparisonDag(node_count=m, edges=tuple(edges))


def estimate_gradient(candidates: CandidateSet, dag: ComparisonDag, mu: float) -> np.ndarray:
    """Rank-based ascent estimate: average of (x_worse - x_better) / mu over
    all comparison edges.

    Only pairwise differences enter, so the estimate is invariant to
    translating every candidate by a common vector, and reversing all edges
    negates it exactly.
    """
    if mu <= 0:
        raise ValueError(f"smoothing parameter mu must be > 0, got {mu}")
    if dag.node_count != candidates.m:
        raise ValueError(f"dag covers {dag.node_count} nodes but candidate set has m={candidates.m}")
    if not dag.edges:
        raise DegenerateFeedbackError("comparison graph has no edges; nothing to estimate")
    x = candidates.points
    total = np.zeros(candidates.d)
    for better, worse in dag.edges:
        total += x[worse] - x[better]
    return total / (len(dag.edges) * mu)


def weighted_reference(candidates: CandidateSet, feedback: RankFeedback) -> np.ndarray:
    """Softmax-weighted combination of a fully ranked fan.

    The candidate ranked r-th from best scores k+1-r, so the best candidate
    gets the largest weight and the reference moves toward preferred
    candidates. Weights are a softmax: nonnegative, summing to 1, hence the
    result stays inside the candidates' convex hull.
    """
    if feedback.kind is not FeedbackKind.FULL_RANKING:
        raise UnsupportedFeedbackError("weighted reference requires a full ranking")
    feedback.validate(candidates.m)
    k = len(feedback.ranking)
    if k != candidates.m:
        raise UnsupportedFeedbackError(
            f"weighted reference requires a total order over all m={candidates.m} "
            f"candidates, got a partial ranking of {k}"
        )
    scores = np.empty(candidates.m)
    for r, idx in enumerate(feedback.ranking):
        scores[idx] = k - r  # best: k, worst: 1
    w = np.exp(scores - scores.max())
    w /= w.sum()
    return w @ candidates.points


def _stage1_fan(config: OptimizerConfig, z_star: np.ndarray, g_bar: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    psi = config.mu2 * rng.standard_normal((config.m, config.d))
    decay = config.gamma ** np.arange(config.m)
    return z_star - config.eta * decay[:, None] * g_bar + psi


def _stage2_fan(config: OptimizerConfig, z_best: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # The (m, d) block is drawn whether or not elitism is on, so the draw
    # order (and hence replays) do not depend on the flag.
    psi = config.mu3 * rng.standard_normal((config.m, config.d))
    points = z_best + psi
    if config.elitism:
        points[0] = z_best
    return points


def _enter_stage2(state: OptimizerState, best_index: int) -> OptimizerState:
    cfg = state.config
    z_best = np.asarray(state.candidates.points[best_index])
    rng = _restore_rng(state.rng_state)
    points = _stage2_fan(cfg, z_best, rng)
    return replace(
        state,
        stage=Stage.STAGE2,
        z_star_star=z_best,
        candidates=CandidateSet(points, round_index=state.candidates.round_index + 1, stage=Stage.STAGE2),
        rng_state=rng.bit_generator.state,
    )


def stage1_step(state: OptimizerState, feedback: RankFeedback) -> OptimizerState:
    """Apply one full-ranking round.

    Moves the reference to the weighted combination, folds the new gradient
    estimate into the running mean, and spreads a fresh fan. Once the
    stage-1 cap is reached the step instead forces the transition to stage 2
    using the best-ranked candidate.
    """
    if state.stage is not Stage.STAGE1:
        raise ProtocolError(f"stage1_step requires stage1, session is {state.stage.value}")
    if feedback.kind is not FeedbackKind.FULL_RANKING:
        raise ProtocolError(f"stage1_step requires full_ranking feedback, got {feedback.kind.value}")
    feedback.validate(state.candidates.m)
    cfg = state.config
    if state.tau >= cfg.max_stage1_rounds:
        return _enter_stage2(state, feedback.best)

    z_star = weighted_reference(state.candidates, feedback)
    dag = build_comparison_dag(state.candidates.m, feedback)
    mu = cfg.mu1 if state.tau == 0 else cfg.mu2
    g_tilde = estimate_gradient(state.candidates, dag, mu)
    g_bar = (state.tau * state.g_bar + g_tilde) / (state.tau + 1)

    rng = _restore_rng(state.rng_state)
    points = _stage1_fan(cfg, z_star, g_bar, rng)
    return replace(
        state,
        z_star=z_star,
        g_bar=g_bar,
        tau=state.tau + 1,
        candidates=CandidateSet(points, round_index=state.candidates.round_index + 1, stage=Stage.STAGE1),
        rng_state=rng.bit_generator.state,
    )


def transition_to_stage2(state: OptimizerState, feedback: RankFeedback) -> OptimizerState:
    """Select the incumbent best from the current stage-1 fan and enter the
    polish stage."""
    if state.stage is not Stage.STAGE1:
        raise ProtocolError(f"transition requires stage1, session is {state.stage.value}")
    if feedback.kind is not FeedbackKind.BEST_ONLY:
        raise ProtocolError(f"transition requires best_only feedback, got {feedback.kind.value}")
    feedback.validate(state.candidates.m)
    return _enter_stage2(state, feedback.best)


def stage2_step(state: OptimizerState, feedback: RankFeedback) -> OptimizerState:
    """Apply one stage-2 answer.

    best_only adopts the chosen candidate and spreads a new polish fan
    around it (index 0 is the incumbent itself when elitism is on);
    accept_and_exit adopts the chosen candidate and finishes. Exceeding the
    stage-2 cap auto-finishes with the current selection.
    """
    if state.stage is not Stage.STAGE2:
        raise ProtocolError(f"stage2_step requires stage2, session is {state.stage.value}")
    if feedback.kind is FeedbackKind.FULL_RANKING:
        raise ProtocolError("full rankings are not accepted in stage 2")
    feedback.validate(state.candidates.m)
    cfg = state.config
    z_best = np.asarray(state.candidates.points[feedback.best])
    rounds = state.stage2_rounds + 1
    if feedback.kind is FeedbackKind.ACCEPT_AND_EXIT or rounds >= cfg.max_stage2_rounds + 1:
        return replace(
            state,
            stage=Stage.FINISHED,
            z_star_star=z_best,
            stage2_rounds=rounds,
            candidates=replace(state.candidates, stage=Stage.FINISHED),
        )
    rng = _restore_rng(state.rng_state)
    points = _stage2_fan(cfg, z_best, rng)
    return replace(
        state,
        z_star_star=z_best,
        stage2_rounds=rounds,
        candidates=CandidateSet(points, round_index=state.candidates.round_index + 1, stage=Stage.STAGE2),
        rng_state=rng.bit_generator.state,
    )


def apply_feedback(state: OptimizerState, feedback: RankFeedback) -> OptimizerState:
    """Dispatch feedback to the step legal for the current stage."""
    if state.stage is Stage.STAGE1:
        if feedback.kind is FeedbackKind.FULL_RANKING:
            return stage1_step(state, feedback)
        if feedback.kind is FeedbackKind.BEST_ONLY:
            return transition_to_stage2(state, feedback)
        raise ProtocolError(f"{feedback.kind.value} feedback is not legal in stage 1")
    if state.stage is Stage.STAGE2:
        return stage2_step(state, feedback)
    raise ProtocolError("session is finished; no further feedback accepted")


class RankingOracle(Protocol):
    """Anything that can rank a candidate fan, human stand-in or scripted."""

    def rank(self, candidates: CandidateSet, k: int | None = None) -> RankFeedback: ...


@dataclass(frozen=True)
class StopRule:
    """Round budget for scripted runs: full-ranking rounds, then polish
    rounds (the last polish answer is submitted as accept-and-exit)."""

    stage1_rounds: int
    stage2_rounds: int

    def __post_init__(self) -> None:
        if self.stage1_rounds < 0 or self.stage2_rounds < 0:
            raise ConfigError("round counts must be >= 0")


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one round: the fan that was ranked, the answer, and
    the state reached after applying it."""

    round_index: int
    stage: Stage
    candidates: np.ndarray  # (m, d)
    feedback: RankFeedback
    z_star: np.ndarray
    g_bar: np.ndarray
    tau: int
    z_star_star: np.ndarray | None = None
    best_objective: float | None = None


@dataclass(frozen=True)
class ScriptedResult:
    final: np.ndarray  # the selected z**
    log: tuple[RoundRecord, ...]


def run_scripted(
    config: OptimizerConfig,
    oracle: RankingOracle,
    stop: StopRule,
    z_init: np.ndarray | None = None,
) -> ScriptedResult:
    """Drive a full session against a scripted oracle.

    Stage 1 is queried at full depth m; the transition and every stage-2
    round at depth 1. Stage caps are lifted to the requested budget so the
    stop rule alone decides the round counts.
    """
    cfg = replace(
        config,
        max_stage1_rounds=max(config.max_stage1_rounds, stop.stage1_rounds, 1),
        max_stage2_rounds=max(config.max_stage2_rounds, stop.stage2_rounds, 1),
    )
    state = init_session(cfg, z_init=z_init)
    log: list[RoundRecord] = []

    def record(prev: OptimizerState, fb: RankFeedback, new: OptimizerState) -> None:
        best_f = None
        evaluate = getattr(oracle, "best_objective", None)
        if callable(evaluate):
            best_f = float(evaluate(prev.candidates))
        log.append(
            RoundRecord(
                round_index=len(log),
                stage=prev.stage,
                candidates=np.asarray(prev.candidates.points),
                feedback=fb,
                z_star=np.asarray(new.z_star),
                g_bar=np.asarray(new.g_bar),
                tau=new.tau,
                z_star_star=None if new.z_star_star is None else np.asarray(new.z_star_star),
                best_objective=best_f,
            )
        )

    for _ in range(stop.stage1_rounds):
        fb = oracle.rank(state.candidates, k=cfg.m)
        new = stage1_step(state, fb)
        record(state, fb, new)
        state = new

    fb = oracle.rank(state.candidates, k=1)
    new = transition_to_stage2(state, fb)
    record(state, fb, new)
    state = new

    for i in range(stop.stage2_rounds):
        fb = oracle.rank(state.candidates, k=1)
        if i == stop.stage2_rounds - 1:
            fb = accept_and_exit(fb.best)
        new = stage2_step(state, fb)
        record(state, fb, new)
        state = new

    assert state.z_star_star is not None
    return ScriptedResult(final=np.asarray(state.z_star_star), log=tuple(log))
