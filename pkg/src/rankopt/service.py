"""HTTP/JSON orchestration of ranking sessions and prior stores.

Sessions persist as a meta JSON plus an append-only transcript JSONL per
session id; restarting (or crashing) the process loses nothing, since any
session can be rebuilt by replaying its transcript against the recorded
config and start. Candidates are served as decoded 2D paths because human
judges rank renderings; scripted clients can ask for the raw latents with
``?latents=true``.

Feedback submissions carry the round index they answer. Resubmitting the
round that was just processed with identical content returns the same
payload without advancing state; any other mismatch is a conflict.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .decoder import decode
from .errors import ConfigError, ConflictError, FeedbackError, NotFoundError, ProtocolError, RankOptError
from .optimizer import (
    FeedbackKind,
    OptimizerConfig,
    OptimizerState,
    RankFeedback,
    RoundRecord,
    Stage,
    apply_feedback,
)
from .priors import (
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_SIGMA,
    PriorStore,
    RepresentativeEntry,
    attach_optimum,
    cosine_similarity,
    sample_latent,
    select_prior,
    store_from_wire,
    store_to_wire,
    toy_embed,
    upsert_entry,
)
from .transcript import SessionStart, feedback_to_wire, record_to_wire, replay_transcript

PURPOSES = ("representative", "personalize", "style_aware")
PROMPT_KINDS = {Stage.STAGE1: "rank_best_to_worst", Stage.STAGE2: "pick_best"}


@dataclass
class ServiceSettings:
    data_dir: Path
    latent_dim: int = 256
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    decoder_seed: int = 0
    default_config: dict = field(default_factory=dict)


@dataclass
class Session:
    meta: dict
    state: OptimizerState
    rounds_completed: int


class SessionHub:
    """Owns persistence and per-id serialization of mutations."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.sessions_dir = settings.data_dir / "sessions"
        self.stores_dir = settings.data_dir / "stores"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.stores_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    # -- stores --

    def store_path(self, store_id: str) -> Path:
        return self.stores_dir / f"{store_id}.json"

    def list_stores(self) -> list[str]:
        return sorted(p.stem for p in self.stores_dir.glob("*.json"))

    def load_prior_store(self, store_id: str) -> PriorStore:
        path = self.store_path(store_id)
        if not path.exists():
            raise NotFoundError(f"no store with id {store_id!r}")
        return store_from_wire(json.loads(path.read_text()))

    def save_prior_store(self, store_id: str, store: PriorStore) -> None:
        self.store_path(store_id).write_text(json.dumps(store_to_wire(store), indent=2) + "\n")

    # -- sessions --

    def meta_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.json"

    def transcript_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.transcript.jsonl"

    def save_meta(self, meta: dict) -> None:
        self.meta_path(meta["id"]).write_text(json.dumps(meta, indent=2) + "\n")

    def append_record(self, session_id: str, record: RoundRecord) -> None:
        line = json.dumps(record_to_wire(record), separators=(",", ":"))
        with open(self.transcript_path(session_id), "a") as fh:
            fh.write(line + "\n")
            fh.flush()

    def get_session(self, session_id: str) -> Session:
        if session_id in self._sessions:
            return self._sessions[session_id]
        meta_path = self.meta_path(session_id)
        if not meta_path.exists():
            raise NotFoundError(f"no session with id {session_id!r}")
        meta = json.loads(meta_path.read_text())
        records = []
        tpath = self.transcript_path(session_id)
        if tpath.exists():
            with open(tpath) as fh:
                records = [json.loads(line) for line in fh if line.strip()]
        config = OptimizerConfig.from_wire(meta["config"])
        state = replay_transcript(config, records, start=SessionStart.from_wire(meta["start"]))
        session = Session(meta=meta, state=state, rounds_completed=len(records))
        self._sessions[session_id] = session
        return session

    def put_session(self, session: Session) -> None:
        self._sessions[session.meta["id"]] = session


class CreateSessionRequest(BaseModel):
    purpose: str
    condition_text: str
    condition_embedding: list[float] | None = None
    mode: str = "human"
    config: dict | None = None
    seed: int | None = None
    store_id: str | None = None
    warm_start_id: str | None = None
    full_two_stage: bool = False
    save_to_store: bool = True
    sigma: float | None = None


class FeedbackRequest(BaseModel):
    round: int
    kind: str
    ranking: list[int]


class CreateStoreRequest(BaseModel):
    id: str | None = None
    latent_dim: int | None = None
    embedding_dim: int | None = None
    entries: list[dict] | None = None


class QueryRequest(BaseModel):
    text: str | None = None
    embedding: list[float] | None = None


class GenerateRequest(QueryRequest):
    count: int = 1
    seed: int = 0
    entry_id: str | None = None


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="rankopt session service")
    hub = SessionHub(settings)
    app.state.hub = hub

    @app.exception_handler(RankOptError)
    def handle_domain_error(request: Request, exc: RankOptError):
        status = 500
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, ConflictError):
            status = 409
        elif isinstance(exc, (FeedbackError, ProtocolError)):
            status = 422
        elif isinstance(exc, ConfigError):
            status = 400
        return JSONResponse(
            status_code=status, content={"code": type(exc).__name__, "message": str(exc)}
        )

    @app.exception_handler(ValueError)
    def handle_value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"code": "ValueError", "message": str(exc)})

    def resolve_embedding(payload: QueryRequest | CreateSessionRequest, embedding_dim: int) -> np.ndarray:
        emb = getattr(payload, "condition_embedding", None)
        if emb is None:
            emb = getattr(payload, "embedding", None)
        if emb is not None:
            vec = np.asarray(emb, dtype=np.float64)
            if vec.shape != (embedding_dim,):
                raise ConfigError(
                    f"embedding has dimension {vec.shape}, expected ({embedding_dim},)"
                )
            return vec
        text = getattr(payload, "condition_text", None) or getattr(payload, "text", None)
        if not text:
            raise ConfigError("provide an embedding or a non-empty text")
        return toy_embed(text, dim=embedding_dim)

    def round_payload(session: Session, include_latents: bool = False) -> dict:
        state = session.state
        condition = np.asarray(session.meta["condition_embedding"], dtype=np.float64)
        seed = session.meta["decoder_seed"]
        cards = [
            decode(np.asarray(z), condition, seed).to_wire() for z in state.candidates.points
        ]
        payload = {
            "session_id": session.meta["id"],
            "round": session.rounds_completed,
            "stage": state.stage.value,
            "prompt_kind": PROMPT_KINDS[state.stage],
            "m": state.candidates.m,
            "candidates": cards,
            "allowed_feedback": [k.value for k in state.allowed_feedback()],
        }
        if include_latents:
            payload["latents"] = [np.asarray(z).tolist() for z in state.candidates.points]
        return payload

    def final_payload(session: Session) -> dict:
        z = np.asarray(session.state.z_star_star)
        condition = np.asarray(session.meta["condition_embedding"], dtype=np.float64)
        return {
            "latent": z.tolist(),
            "trajectory": decode(z, condition, session.meta["decoder_seed"]).to_wire(),
            "saved_entry_id": session.meta.get("saved_entry_id"),
        }

    def build_config(req: CreateSessionRequest) -> OptimizerConfig:
        wire = dict(settings.default_config)
        wire.setdefault("d", settings.latent_dim)
        # Human sessions keep the polish fan free of the incumbent (every
        # card is a fresh draw); scripted runs default to elitism so the
        # objective is monotone under a consistent judge.
        wire.setdefault("elitism", req.mode != "human")
        if req.config:
            wire.update(req.config)
        if req.seed is not None:
            wire["seed"] = req.seed
        wire.setdefault("seed", uuid.uuid4().int % (2**31))
        return OptimizerConfig.from_wire(wire)

    @app.get("/")
    def index():
        return {"service": "rankopt", "stores": hub.list_stores()}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        if req.purpose not in PURPOSES:
            raise ConfigError(f"purpose must be one of {PURPOSES}, got {req.purpose!r}")
        if req.mode not in ("human", "scripted"):
            raise ConfigError(f"mode must be 'human' or 'scripted', got {req.mode!r}")
        if req.purpose in ("representative", "style_aware") and req.warm_start_id:
            raise ConfigError(f"{req.purpose} sessions start from scratch; warm_start_id is not allowed")
        config = build_config(req)

        warm_entry = None
        embedding_dim = settings.embedding_dim
        if req.store_id:
            store = hub.load_prior_store(req.store_id)
            embedding_dim = store.embedding_dim
            if store.latent_dim != config.d:
                raise ConfigError(
                    f"store latent dimension {store.latent_dim} does not match session d={config.d}"
                )
        condition = resolve_embedding(req, embedding_dim)

        if req.purpose == "personalize":
            if not req.store_id:
                raise NotFoundError("personalize sessions need a store_id to resolve the warm start")
            if req.warm_start_id:
                warm_entry = store.get(req.warm_start_id)
            else:
                warm_entry = select_prior(store, condition)
            if warm_entry.z_star_star is None:
                raise NotFoundError(
                    f"entry {warm_entry.id!r} has no optimized latent to warm-start from"
                )
            start = SessionStart(
                kind="warm" if req.full_two_stage else "refine",
                z=tuple(warm_entry.z_star_star.tolist()),
            )
        else:
            start = SessionStart(kind="zero")

        session_id = uuid.uuid4().hex[:12]
        state = start.initial_state(config)
        meta = {
            "id": session_id,
            "mode": req.mode,
            "purpose": req.purpose,
            "condition_text": req.condition_text,
            "condition_embedding": condition.tolist(),
            "config": config.to_wire(),
            "start": start.to_wire(),
            "store_id": req.store_id,
            "target_entry_id": warm_entry.id if warm_entry is not None else None,
            "save_to_store": bool(req.save_to_store and req.store_id),
            "sigma": req.sigma if req.sigma is not None else DEFAULT_SIGMA,
            "decoder_seed": settings.decoder_seed,
            "created_at": _now(),
            "updated_at": _now(),
            "status": "in_progress",
            "final_latent": None,
            "saved_entry_id": None,
        }
        session = Session(meta=meta, state=state, rounds_completed=0)
        hub.save_meta(meta)
        hub.put_session(session)
        return {"id": session_id, "round": round_payload(session)}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = hub.get_session(session_id)
        meta = dict(session.meta)
        meta["rounds_completed"] = session.rounds_completed
        return meta

    @app.get("/sessions/{session_id}/round")
    def get_round(session_id: str, latents: bool = Query(default=False)):
        session = hub.get_session(session_id)
        if session.state.finished:
            return JSONResponse(
                status_code=409,
                content={
                    "code": "SessionFinished",
                    "message": "session is finished",
                    "final": final_payload(session),
                },
            )
        return round_payload(session, include_latents=latents)

    def save_result_to_store(session: Session) -> None:
        meta = session.meta
        if not meta.get("save_to_store") or not meta.get("store_id"):
            return
        store_id = meta["store_id"]
        z = np.asarray(session.state.z_star_star)
        sigma = float(meta.get("sigma") or DEFAULT_SIGMA)
        with hub.lock(f"store:{store_id}"):
            store = hub.load_prior_store(store_id)
            entry_id = meta.get("target_entry_id")
            if entry_id and store.has(entry_id):
                store = attach_optimum(store, entry_id, z, sigma=sigma)
            else:
                entry_id = entry_id or meta["id"]
                store = upsert_entry(
                    store,
                    RepresentativeEntry(
                        id=entry_id,
                        text=meta["condition_text"],
                        embedding=np.asarray(meta["condition_embedding"], dtype=np.float64),
                        z_star_star=z,
                        sigma=sigma,
                    ),
                )
            hub.save_prior_store(store_id, store)
        meta["saved_entry_id"] = entry_id

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, req: FeedbackRequest):
        with hub.lock(f"session:{session_id}"):
            session = hub.get_session(session_id)
            try:
                kind = FeedbackKind(req.kind)
            except ValueError:
                raise FeedbackError(f"unknown feedback kind {req.kind!r}")
            feedback = RankFeedback(kind, tuple(req.ranking))

            if session.rounds_completed > 0 and req.round == session.rounds_completed - 1:
                # Idempotent retry: same round, same content -> same answer.
                last = json.loads(
                    hub.transcript_path(session_id).read_text().strip().split("\n")[-1]
                )
                if last["feedback"] == feedback_to_wire(feedback):
                    return respond(session)
                raise ConflictError(
                    f"round {req.round} was already answered with different feedback"
                )
            if req.round != session.rounds_completed:
                raise ConflictError(
                    f"expected feedback for round {session.rounds_completed}, got {req.round}"
                )
            if session.state.finished:
                raise ConflictError("session is finished")

            prev = session.state
            new_state = apply_feedback(prev, feedback)
            record = RoundRecord(
                round_index=session.rounds_completed,
                stage=prev.stage,
                candidates=np.asarray(prev.candidates.points),
                feedback=feedback,
                z_star=np.asarray(new_state.z_star),
                g_bar=np.asarray(new_state.g_bar),
                tau=new_state.tau,
            )
            hub.append_record(session_id, record)
            session.state = new_state
            session.rounds_completed += 1
            session.meta["updated_at"] = _now()
            if new_state.finished:
                session.meta["status"] = "finished"
                session.meta["final_latent"] = np.asarray(new_state.z_star_star).tolist()
                save_result_to_store(session)
            hub.save_meta(session.meta)
            hub.put_session(session)
            return respond(session)

    def respond(session: Session) -> dict:
        if session.state.finished:
            return {"status": "finished", "final": final_payload(session)}
        return {"status": "in_progress", "round": round_payload(session)}

    @app.post("/stores", status_code=201)
    def create_store(req: CreateStoreRequest):
        store_id = req.id or uuid.uuid4().hex[:12]
        if hub.store_path(store_id).exists():
            raise ConflictError(f"store {store_id!r} already exists")
        if req.entries:
            store = store_from_wire(
                {
                    "format_version": 1,
                    "latent_dim": req.latent_dim or settings.latent_dim,
                    "embedding_dim": req.embedding_dim or settings.embedding_dim,
                    "entries": req.entries,
                }
            )
        else:
            store = PriorStore(
                entries=(),
                latent_dim=req.latent_dim or settings.latent_dim,
                embedding_dim=req.embedding_dim or settings.embedding_dim,
            )
        hub.save_prior_store(store_id, store)
        return {"id": store_id, "entries": len(store.entries)}

    @app.get("/stores")
    def list_stores():
        return {"stores": hub.list_stores()}

    @app.get("/stores/{store_id}")
    def get_store(store_id: str):
        return store_to_wire(hub.load_prior_store(store_id))

    @app.post("/stores/{store_id}/select")
    def select_from_store(store_id: str, req: QueryRequest):
        store = hub.load_prior_store(store_id)
        query = resolve_embedding(req, store.embedding_dim)
        entry = select_prior(store, query)
        return {
            "id": entry.id,
            "text": entry.text,
            "similarity": cosine_similarity(query, entry.embedding),
            "has_latent": entry.z_star_star is not None,
        }

    @app.post("/stores/{store_id}/generate")
    def generate_from_store(store_id: str, req: GenerateRequest):
        if req.count < 1:
            raise ConfigError("count must be >= 1")
        store = hub.load_prior_store(store_id)
        if req.entry_id is not None:
            entry = store.get(req.entry_id)
            query = entry.embedding
        else:
            query = resolve_embedding(req, store.embedding_dim)
            entry = select_prior(store, query)
        if entry.z_star_star is None:
            raise ConflictError(f"entry {entry.id!r} has no optimized latent to sample from")
        rng = np.random.default_rng(req.seed)
        items = []
        for _ in range(req.count):
            z = sample_latent(entry, rng)
            items.append(
                {
                    "latent": z.tolist(),
                    "trajectory": decode(z, query, settings.decoder_seed).to_wire(),
                }
            )
        return {"entry_id": entry.id, "items": items}

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    index_html = Path(__file__).resolve().parents[2] / "frontend" / "index.html"
    if ui_dir.exists() and index_html.exists():
        from fastapi.responses import FileResponse
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui/dist", StaticFiles(directory=ui_dir), name="ui-dist")

        @app.get("/ui")
        def ui_index():
            return FileResponse(index_html)

    return app
