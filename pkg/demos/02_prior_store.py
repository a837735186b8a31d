"""Building a prior store end to end.

A pool of condition texts is embedded (toy trigram embedder), K-means picks
representative conditions, each representative gets a latent optimized for
it by ranking feedback, and finally new queries are answered by cosine
selection plus Gaussian sampling around the selected entry's latent.
"""

import numpy as np

from rankopt import (
    EmbeddingQuadraticObjective,
    OptimizerConfig,
    PriorStore,
    ScriptedOracle,
    StopRule,
    attach_optimum,
    kmeans_representatives,
    run_scripted,
    sample_latent,
    select_prior,
    toy_embed,
)

POOL = [
    "a person walks forward at an easy pace",
    "a person walks forward quickly",
    "someone strolls ahead slowly",
    "a person runs in a straight line",
    "a person jogs forward and slows down",
    "someone sprints a short distance",
    "a person jumps straight up",
    "someone hops twice on the left foot",
    "a person leaps over an obstacle",
    "a person waves with the right hand",
    "someone raises both arms and waves",
    "a person claps enthusiastically",
    "a person sits down on a chair",
    "someone crouches low to the ground",
    "a person kneels and stands back up",
]

E_DIM = 64
D_DIM = 8


def main():
    embeddings = np.stack([toy_embed(t, dim=E_DIM) for t in POOL])
    reps = kmeans_representatives(embeddings, POOL, k=5, rng=np.random.default_rng(0))
    store = PriorStore(entries=tuple(reps), latent_dim=D_DIM, embedding_dim=E_DIM)
    print("representatives chosen by k-means (cluster medoids):")
    for rep in reps:
        print(f"  {rep.id}: {rep.text!r}")

    # Optimize a latent for each representative via ranking feedback. The
    # synthetic objective's optimum depends on the condition embedding, so
    # nearby conditions end up with nearby latents.
    for i, rep in enumerate(store.entries):
        objective = EmbeddingQuadraticObjective(
            embedding=rep.embedding, d=D_DIM, projection_seed=7, scale=4.0
        )
        result = run_scripted(
            OptimizerConfig(d=D_DIM, seed=10 + i),
            ScriptedOracle(objective, seed=20 + i),
            StopRule(25, 5),
        )
        store = attach_optimum(store, rep.id, result.final, sigma=0.2)
        print(f"  optimized {rep.id}: final objective {objective(result.final):.4f}")

    print("\nqueries route to the most similar representative:")
    for query in ("a person walks ahead", "someone does a big jump", "a person waves hello"):
        entry = select_prior(store, toy_embed(query, dim=E_DIM))
        rng = np.random.default_rng(99)
        samples = np.stack([sample_latent(entry, rng) for _ in range(500)])
        spread = samples.std(axis=0).mean()
        print(f"  {query!r} -> {entry.id} ({entry.text!r}), sample spread {spread:.3f}")


if __name__ == "__main__":
    main()
