"""Round transcripts: line-delimited JSON export and deterministic replay.

One record per round with fields {round, stage, candidates, feedback,
z_star, g_bar, tau}: the fan that was shown, the answer given, and the
reference/gradient-memory/counter reached after applying it. Python floats
round-trip exactly through JSON, so replaying a transcript against the same
config and seed reproduces the recorded run bitwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .optimizer import (
    FeedbackKind,
    OptimizerConfig,
    OptimizerState,
    RankFeedback,
    RoundRecord,
    apply_feedback,
    init_refinement_session,
    init_session,
)


@dataclass(frozen=True)
class SessionStart:
    """Where a session begins: a fresh stage-1 run from zero, a stage-1 run
    warm-started at a given latent, or a stage-2-only refinement around it."""

    kind: str = "zero"  # zero | warm | refine
    z: tuple[float, ...] | None = None

    def initial_state(self, config: OptimizerConfig) -> OptimizerState:
        if self.kind == "zero":
            return init_session(config)
        if self.z is None:
            raise ValueError(f"session start {self.kind!r} requires a latent")
        z = np.asarray(self.z, dtype=np.float64)
        if self.kind == "warm":
            return init_session(config, z_init=z)
        if self.kind == "refine":
            return init_refinement_session(config, z)
        raise ValueError(f"unknown session start kind: {self.kind!r}")

    def to_wire(self) -> dict:
        return {"kind": self.kind, "z": None if self.z is None else list(self.z)}

    @staticmethod
    def from_wire(payload: dict) -> "SessionStart":
        z = payload.get("z")
        return SessionStart(kind=payload["kind"], z=None if z is None else tuple(z))


def feedback_to_wire(feedback: RankFeedback) -> dict:
    return {"kind": feedback.kind.value, "ranking": list(feedback.ranking)}


def feedback_from_wire(payload: dict) -> RankFeedback:
    return RankFeedback(FeedbackKind(payload["kind"]), tuple(payload["ranking"]))


def record_to_wire(record: RoundRecord) -> dict:
    # Field order is part of the wire contract; keep it stable.
    return {
        "round": record.round_index,
        "stage": record.stage.value,
        "candidates": record.candidates.tolist(),
        "feedback": feedback_to_wire(record.feedback),
        "z_star": record.z_star.tolist(),
        "g_bar": record.g_bar.tolist(),
        "tau": record.tau,
    }


def transcript_lines(log: Iterable[RoundRecord]) -> list[str]:
    return [json.dumps(record_to_wire(r), separators=(",", ":")) for r in log]


def write_transcript(path: str | Path, log: Iterable[RoundRecord]) -> None:
    Path(path).write_text("".join(line + "\n" for line in transcript_lines(log)))


def read_transcript(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def replay_transcript(
    config: OptimizerConfig,
    records: Sequence[dict],
    start: SessionStart | None = None,
    check_candidates: bool = True,
) -> OptimizerState:
    """Re-run a recorded session: rebuild the initial state from config and
    seed, then apply the recorded feedback in order.

    With ``check_candidates`` each regenerated fan is compared bitwise
    against the recorded one, catching any config/seed mismatch at the round
    where the trajectories diverge.
    """
    state = (start or SessionStart()).initial_state(config)
    for i, rec in enumerate(records):
        if check_candidates:
            recorded = np.asarray(rec["candidates"], dtype=np.float64)
            if recorded.shape != state.candidates.points.shape or not np.array_equal(
                recorded, state.candidates.points
            ):
                raise ValueError(
                    f"replay diverged at round {i}: regenerated candidates do not "
                    "match the recorded ones (wrong config, seed, or start?)"
                )
        state = apply_feedback(state, feedback_from_wire(rec["feedback"]))
    return state
