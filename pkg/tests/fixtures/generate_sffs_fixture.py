"""Regenerate sffs_pools.json: exhaustive best-subset baselines for 50 seeded pools.

Each trial builds six synthetic classifiers of varying quality over 40
samples and 3 classes, enumerates all 63 non-empty subsets with the same
sum-rule criterion, and records the exhaustive optimum next to what the
floating-forward selection found. Run from the repository root:

    python tests/fixtures/generate_sffs_fixture.py
"""

import json
from itertools import combinations
from pathlib import Path

import numpy as np

from deepfuse.ensemble import pool_from_scores, sffs_select

N_TRIALS = 50
N_CLASSIFIERS = 6
N_SAMPLES = 40
N_CLASSES = 3


def make_pool_matrices(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, N_CLASSES, N_SAMPLES)
    matrices = []
    for _ in range(N_CLASSIFIERS):
        quality = rng.uniform(0.15, 0.6)
        raw = rng.random((N_SAMPLES, N_CLASSES)) + quality * np.eye(N_CLASSES)[labels]
        matrices.append(raw / raw.sum(axis=1, keepdims=True))
    return labels, matrices


def subset_accuracy(matrices, labels, subset):
    fused = sum(matrices[i] for i in subset) / len(subset)
    return float((fused.argmax(axis=1) == labels).mean())


def main():
    trials = []
    matches = 0
    for seed in range(N_TRIALS):
        labels, matrices = make_pool_matrices(seed)
        exhaustive_best = max(
            subset_accuracy(matrices, labels, subset)
            for size in range(1, N_CLASSIFIERS + 1)
            for subset in combinations(range(N_CLASSIFIERS), size)
        )
        best_single = max(
            subset_accuracy(matrices, labels, [i]) for i in range(N_CLASSIFIERS)
        )
        pool = pool_from_scores(
            [(f"layer{i}:m", matrices[i]) for i in range(N_CLASSIFIERS)]
        )
        selection = sffs_select(pool, labels, max_size=N_CLASSIFIERS)
        sffs_accuracy = selection.criterion_trace[-1]
        matched = abs(sffs_accuracy - exhaustive_best) < 1e-12
        matches += matched
        trials.append(
            {
                "seed": seed,
                "best_single": best_single,
                "exhaustive_best": exhaustive_best,
                "sffs_accuracy": sffs_accuracy,
                "matches_exhaustive": bool(matched),
            }
        )
    doc = {
        "n_trials": N_TRIALS,
        "n_classifiers": N_CLASSIFIERS,
        "n_samples": N_SAMPLES,
        "n_classes": N_CLASSES,
        "match_fraction": matches / N_TRIALS,
        "trials": trials,
    }
    out = Path(__file__).parent / "sffs_pools.json"
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out}: match fraction {doc['match_fraction']:.2f}")


if __name__ == "__main__":
    main()
