"""Desk-scale experiment grids shared by the acceptance tests."""

import yaml

OVERLAPS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
# narrower forest size range keeps the grid within a laptop budget
DESK_SPACE = {"random_forest": {"ntree": {"loguniform": [16, 64], "integer": True}}}


def desk_datasets(n=500, dim=4, rate=0.05):
    out = []
    for f, family in enumerate(("gaussians", "clusters")):
        for i, ov in enumerate(OVERLAPS):
            out.append({"name": f"{family[0]}{i}",
                        "synthetic": {"family": family, "n": n, "dim": dim, "overlap": ov,
                                      "rate": rate, "seed": 100 * f + i}})
    return out


def strong_config(output, seed=0, candidates=10):
    sols = []
    for clf in ("random_forest", "gradient_boosting"):
        for st in ("baseline", "class_weight", "smote", "underbagging"):
            s = {"strategy": st, "classifier": clf}
            if clf in DESK_SPACE:
                s["space"] = DESK_SPACE[clf]
            sols.append(s)
    return {"datasets": desk_datasets(), "rates": [0.05], "metrics": ["acc", "gmean", "bac"],
            "solutions": sols, "repetitions": 3, "candidates": candidates,
            "master_seed": seed, "output_path": str(output)}


def weak_config(output, seed=0, candidates=10):
    sols = [{"strategy": st, "classifier": clf}
            for clf in ("one_nn", "cart")
            for st in ("baseline", "class_weight", "smote", "underbagging")]
    sols.append({"strategy": "rusboost"})
    return {"datasets": desk_datasets(), "rates": [0.05], "metrics": ["auc"],
            "solutions": sols, "repetitions": 3, "candidates": candidates,
            "master_seed": seed, "output_path": str(output)}


def write_config(cfg, path):
    path.write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
    return path
