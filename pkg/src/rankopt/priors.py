"""Store of representative conditions and their optimized latent priors.

Each entry pairs a condition text and its embedding with the latent selected
for it and a sampling spread sigma. Lookup picks the entry whose embedding
has the highest cosine similarity to a query (ties to the lowest index), and
sampling draws from an isotropic Gaussian centred on the entry's latent.
Representative conditions can be picked from a larger pool by K-means over
the raw embeddings, keeping each cluster's medoid text.

Stores are ordered lists, not sets, and the file format is versioned; saving
is deterministic so save -> load -> save round-trips byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotFoundError

STORE_FORMAT_VERSION = 1
DEFAULT_SIGMA = 0.2
DEFAULT_EMBEDDING_DIM = 768


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(a @ b) / (na * nb)


@dataclass(frozen=True)
class RepresentativeEntry:
    """A condition (text + embedding) with its optimized latent prior.

    ``z_star_star`` is None for stubs fresh out of representative selection,
    before an optimization session has been attached.
    """

    id: str
    text: str
    embedding: np.ndarray
    z_star_star: np.ndarray | None = None
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self) -> None:
        emb = np.asarray(self.embedding, dtype=np.float64)
        if emb.ndim != 1 or not np.all(np.isfinite(emb)):
            raise ValueError("embedding must be a finite 1D vector")
        if float(np.linalg.norm(emb)) == 0.0:
            raise ValueError("embedding must have nonzero norm")
        object.__setattr__(self, "embedding", emb)
        if self.z_star_star is not None:
            z = np.asarray(self.z_star_star, dtype=np.float64)
            if z.ndim != 1 or not np.all(np.isfinite(z)):
                raise ValueError("z_star_star must be a finite 1D vector")
            object.__setattr__(self, "z_star_star", z)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class PriorStore:
    entries: tuple[RepresentativeEntry, ...]
    latent_dim: int
    embedding_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("store entry ids must be unique")
        for e in self.entries:
            if e.embedding.shape != (self.embedding_dim,):
                raise ConfigError(
                    f"entry {e.id!r} embedding has dimension {e.embedding.shape[0]}, "
                    f"store expects {self.embedding_dim}"
                )
            if e.z_star_star is not None and e.z_star_star.shape != (self.latent_dim,):
                raise ConfigError(
                    f"entry {e.id!r} latent has dimension {e.z_star_star.shape[0]}, "
                    f"store expects {self.latent_dim}"
                )

    def get(self, entry_id: str) -> RepresentativeEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise NotFoundError(f"no entry with id {entry_id!r}")

    def has(self, entry_id: str) -> bool:
        return any(e.id == entry_id for e in self.entries)


def select_prior(store: PriorStore, query: np.ndarray) -> RepresentativeEntry:
    """Entry whose embedding is most cosine-similar to the query; exact ties
    resolve to the earliest entry."""
    if not store.entries:
        raise NotFoundError("cannot select from an empty store")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (store.embedding_dim,):
        raise ValueError(
            f"query has dimension {query.shape}, store expects ({store.embedding_dim},)"
        )
    sims = np.array([cosine_similarity(query, e.embedding) for e in store.entries])
    return store.entries[int(np.argmax(sims))]


def sample_latent(entry: RepresentativeEntry, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(z**, sigma^2 I)."""
    if entry.z_star_star is None:
        raise ValueError(f"entry {entry.id!r} has no optimized latent attached yet")
    return entry.z_star_star + entry.sigma * rng.standard_normal(entry.z_star_star.shape[0])


def attach_optimum(
    store: PriorStore, entry_id: str, z_star_star: np.ndarray, sigma: float = DEFAULT_SIGMA
) -> PriorStore:
    """Bind an optimized latent (and its sampling spread) to an entry."""
    z = np.asarray(z_star_star, dtype=np.float64)
    if z.shape != (store.latent_dim,):
        raise ValueError(f"latent has dimension {z.shape}, store expects ({store.latent_dim},)")
    if not store.has(entry_id):
        raise NotFoundError(f"no entry with id {entry_id!r}")
    entries = tuple(
        replace(e, z_star_star=z, sigma=float(sigma)) if e.id == entry_id else e
        for e in store.entries
    )
    return replace(store, entries=entries)


def upsert_entry(store: PriorStore, entry: RepresentativeEntry) -> PriorStore:
    """Replace the entry with the same id, or append a new one."""
    if store.has(entry.id):
        entries = tuple(entry if e.id == entry.id else e for e in store.entries)
    else:
        entries = store.entries + (entry,)
    return replace(store, entries=entries)


def lloyd_kmeans(
    points: np.ndarray, k: int, iters: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Plain Lloyd iteration with seeded random-point initialization.

    Returns (labels, centroids, per-iteration within-cluster sum of squares).
    Clusters that go empty keep their previous centroid. The WCSS sequence
    is non-increasing, which the tests assert.
    """
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must satisfy 1 <= k <= {n}, got {k}")
    centroids = x[rng.choice(n, size=k, replace=False)].copy()
    labels = np.zeros(n, dtype=int)
    wcss_history: list[float] = []
    for _ in range(max(1, iters)):
        dists = np.linalg.norm(x[:, None, :] - centroids[None, :, :], axis=2)
        labels = np.argmin(dists, axis=1)
        wcss_history.append(float(np.sum(dists[np.arange(n), labels] ** 2)))
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return labels, centroids, wcss_history


def kmeans_representatives(
    embeddings: np.ndarray,
    texts: list[str],
    k: int,
    iters: int = 25,
    rng: np.random.Generator | None = None,
) -> list[RepresentativeEntry]:
    """Pick k representative conditions by K-means over raw embeddings.

    A centroid is not a sentence, so each cluster is represented by its
    medoid: the member text nearest the cluster mean. Returns entry stubs
    (no latent attached), ordered by cluster index.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("embeddings must be a 2D array (n, e)")
    if len(texts) != x.shape[0]:
        raise ValueError(f"got {len(texts)} texts for {x.shape[0]} embeddings")
    if rng is None:
        rng = np.random.default_rng(0)
    labels, centroids, _ = lloyd_kmeans(x, k, iters, rng)
    reps: list[RepresentativeEntry] = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if len(members) == 0:
            continue
        dists = np.linalg.norm(x[members] - centroids[j], axis=1)
        medoid = int(members[int(np.argmin(dists))])
        reps.append(
            RepresentativeEntry(
                id=f"rt-{len(reps):03d}",
                text=texts[medoid],
                embedding=x[medoid],
            )
        )
    return reps


def toy_embed(text: str, dim: int = DEFAULT_EMBEDDING_DIM, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in embedder for tests and demos only.

    Hashes character trigrams into signed buckets and L2-normalizes, so
    identical texts map to identical vectors and texts sharing n-grams point
    in similar directions. No semantics beyond surface overlap.
    """
    if not text:
        raise ValueError("cannot embed empty text")
    if dim < 1:
        raise ValueError("embedding dimension must be >= 1")
    s = text.lower()
    grams = [s[i : i + 3] for i in range(len(s) - 2)] or [s]
    vec = np.zeros(dim)
    prefix = seed.to_bytes(8, "little", signed=True)
    for gram in grams:
        digest = hashlib.sha1(prefix + gram.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:8], "little") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # All buckets cancelled (possible for tiny texts); fall back to a
        # one-hot on the first gram's bucket.
        digest = hashlib.sha1(prefix + grams[0].encode("utf-8")).digest()
        vec[int.from_bytes(digest[:8], "little") % dim] = 1.0
        norm = 1.0
    return vec / norm


def store_to_wire(store: PriorStore) -> dict:
    return {
        "format_version": STORE_FORMAT_VERSION,
        "latent_dim": store.latent_dim,
        "embedding_dim": store.embedding_dim,
        "entries": [
            {
                "id": e.id,
                "text": e.text,
                "embedding": e.embedding.tolist(),
                "z_star_star": None if e.z_star_star is None else e.z_star_star.tolist(),
                "sigma": e.sigma,
            }
            for e in store.entries
        ],
    }


def store_from_wire(payload: dict) -> PriorStore:
    version = payload.get("format_version")
    if version != STORE_FORMAT_VERSION:
        raise ConfigError(f"unsupported store format_version: {version!r}")
    entries = tuple(
        RepresentativeEntry(
            id=item["id"],
            text=item["text"],
            embedding=np.asarray(item["embedding"], dtype=np.float64),
            z_star_star=(
                None
                if item.get("z_star_star") is None
                else np.asarray(item["z_star_star"], dtype=np.float64)
            ),
            sigma=float(item.get("sigma", DEFAULT_SIGMA)),
        )
        for item in payload["entries"]
    )
    return PriorStore(
        entries=entries,
        latent_dim=int(payload["latent_dim"]),
        embedding_dim=int(payload["embedding_dim"]),
    )


def save_store(store: PriorStore, path: str | Path) -> None:
    Path(path).write_text(json.dumps(store_to_wire(store), indent=2) + "\n")


def load_store(path: str | Path) -> PriorStore:
    return store_from_wire(json.loads(Path(path).read_text()))


def read_embeddings_jsonl(path: str | Path, dim: int | None = None) -> tuple[list[str], list[str], np.ndarray]:
    """Read an ingestion file of JSON lines {id, text, embedding}.

    Records without an embedding fall back to the toy embedder (handy for
    demos); ``dim`` sets the toy dimension and validates supplied vectors.
    Returns (ids, texts, embeddings).
    """
    ids: list[str] = []
    texts: list[str] = []
    vectors: list[np.ndarray] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            item = json.loads(line)
            text = item["text"]
            if "embedding" in item and item["embedding"] is not None:
                vec = np.asarray(item["embedding"], dtype=np.float64)
            else:
                vec = toy_embed(text, dim=dim or DEFAULT_EMBEDDING_DIM)
            if dim is not None and vec.shape != (dim,):
                raise ValueError(f"line {line_no}: embedding has dimension {vec.shape[0]}, expected {dim}")
            ids.append(str(item.get("id", f"item-{line_no:04d}")))
            texts.append(text)
            vectors.append(vec)
    if not vectors:
        raise ValueError(f"no records found in {path}")
    return ids, texts, np.stack(vectors)
