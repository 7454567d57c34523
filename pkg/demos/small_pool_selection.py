"""Train a small arithmetic pool, certify its PDT table and select agreeing models.

A scaled-down version of the acceptance run (4-input sum task, narrow nets)
that finishes in seconds. Run with
``python3 demos/small_pool_selection.py [out_dir]``.
"""

import json
import sys
from pathlib import Path

import numpy as np

from agreeset import Box, DistanceSpec, pdt
from agreeset.arith import TrainConfig, train_pool
from agreeset.distance import iter_pairs
from agreeset.select import Criterion, PdtTable, SelectionConfig, cluster_pdt_analysis, run_selection


def main(out_dir: str = "small_pool_out") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = range(6)
    pool = train_pool(seeds, TrainConfig(epochs=5, hidden=(6,)), n_train=4000, d=4, ood_range=(-100, 100),
                      n_eval=5000)
    ood = np.array([e.ood.max_abs_error for e in pool])
    for e in pool:
        print(f"seed {e.seed}: in-dist max err {e.in_dist.max_abs_error:7.3f}  OOD max err {e.ood.max_abs_error:7.3f}")

    box = Box.cube(4, -100, 100)
    values = np.zeros((len(pool), len(pool)))
    for i, j in iter_pairs(len(pool)):
        r = pdt(pool[i].net, pool[j].net, box, DistanceSpec.l1(), M=256, eps=1)
        values[i, j] = values[j, i] = r.upper
        print(f"PDT({i},{j}) in [{r.lower:.2f}, {r.upper:.2f}] {r.status.value}")

    table = PdtTable(values, names=[f"s{s}" for s in seeds])
    report = run_selection(table, SelectionConfig(Criterion.PERCENTILE, p=25, similarity_delta=1.0))
    print("survivors:", [table.names[i] for i in report.survivors], f"({report.termination.value})")

    good = np.zeros(len(pool), dtype=bool)
    good[np.argsort(ood)[: len(pool) // 2]] = True
    c = cluster_pdt_analysis(table, good)
    print(f"mean PDT best half {c.good_avg:.2f}, worst half {c.bad_avg:.2f}, ratio {c.ratio_percent:.1f}%")
    (out / "pdt_table.json").write_text(json.dumps(table.to_json(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main(*sys.argv[1:])
