"""Interactive console session: you are the ranking oracle.

Each round prints m candidate paths as tiny ASCII sketches. In the first
stage, rank them from best to worst (e.g. "3 1 4 2") or enter a single id
to lock in a best candidate and move to the polish stage; in the second
stage, pick the best id each round or enter "a <id>" to accept and finish.

Run with --auto to let a scripted sphere oracle answer instead (useful for
a quick non-interactive look at the flow).
"""

import argparse

import numpy as np

from rankopt import (
    OptimizerConfig,
    ScriptedOracle,
    SphereObjective,
    Stage,
    accept_and_exit,
    apply_feedback,
    best_only,
    decode,
    full_ranking,
    init_session,
    toy_embed,
)

SKETCH_W, SKETCH_H = 31, 9


def sketch(points) -> list[str]:
    grid = [[" "] * SKETCH_W for _ in range(SKETCH_H)]
    for t, (x, y) in enumerate(points):
        col = int((x + 1) / 2 * (SKETCH_W - 1))
        row = int((1 - (y + 1) / 2) * (SKETCH_H - 1))
        shade = ".:*#"[min(3, 4 * t // len(points))]  # later samples darker
        grid[row][col] = shade
    return ["".join(r) for r in grid]


def show_round(state, condition, decoder_seed):
    blocks = []
    for i, z in enumerate(state.candidates.points):
        traj = decode(np.asarray(z), condition, decoder_seed, length=60)
        blocks.append([f"[{i + 1}]".center(SKETCH_W)] + sketch(traj.points))
    for lines in zip(*blocks):
        print("  ".join(lines))


def parse_stage1(text, m):
    ids = [int(tok) - 1 for tok in text.replace(",", " ").split()]
    if len(ids) == 1:
        return best_only(ids[0])
    if sorted(ids) != list(range(m)):
        raise ValueError(f"need a permutation of 1..{m} or a single id")
    return full_ranking(ids)


def parse_stage2(text):
    toks = text.replace(",", " ").split()
    if toks and toks[0].lower() == "a":
        return accept_and_exit(int(toks[1]) - 1)
    return best_only(int(toks[0]) - 1)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--auto", action="store_true", help="scripted oracle answers for you")
    parser.add_argument("--d", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    condition = toy_embed("a person walks forward", dim=16)
    config = OptimizerConfig(d=args.d, seed=args.seed, elitism=False, max_stage1_rounds=50)
    state = init_session(config)
    oracle = ScriptedOracle(SphereObjective(center=np.zeros(args.d)), seed=1)

    round_no = 0
    while not state.finished and round_no < 12:
        print(f"\n--- round {round_no} ({state.stage.value}) ---")
        show_round(state, condition, decoder_seed=3)
        if state.stage is Stage.STAGE1:
            prompt = "rank candidates best to worst (e.g. 3 1 4 2), or one id to pick the best: "
        else:
            prompt = "best candidate id (or 'a <id>' to accept and finish): "
        if args.auto:
            if state.stage is Stage.STAGE1 and round_no < 3:
                fb = oracle.rank(state.candidates, k=config.m)
                answer = " ".join(str(i + 1) for i in fb.ranking)
            elif round_no < 6:
                fb = oracle.rank(state.candidates, k=1)
                answer = str(fb.best + 1)
            else:
                fb = accept_and_exit(oracle.rank(state.candidates, k=1).best)
                answer = f"a {fb.best + 1}"
            print(prompt + answer + "   (auto)")
        else:
            try:
                text = input(prompt)
                fb = parse_stage1(text, config.m) if state.stage is Stage.STAGE1 else parse_stage2(text)
            except (ValueError, IndexError) as exc:
                print(f"  ({exc}; try again)")
                continue
        state = apply_feedback(state, fb)
        round_no += 1

    print("\nsession finished" if state.finished else "\nround budget reached")
    if state.z_star_star is not None:
        print("selected latent:", np.round(np.asarray(state.z_star_star), 3).tolist())


if __name__ == "__main__":
    main()
