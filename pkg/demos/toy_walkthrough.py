"""Walk through the toy network: evaluation, a verification query, and a PDT.

Run with ``python3 demos/toy_walkthrough.py``.
"""

import numpy as np

from agreeset import Box, DistanceSpec, OutputConstraint, Query, decide, evaluate, pdt, toy_network
from agreeset.attack import attack_pdt, sample_pdt
from agreeset.bounds import interval_propagate
from agreeset.net import scaled_output
from agreeset.oracle import exact_max_distance


def main() -> None:
    toy = toy_network()
    box = Box.cube(2, 0.0, 10.0)
    print("toy(2, 1) =", evaluate(toy, [2, 1])[0])

    b = interval_propagate(toy, box)
    print(f"interval output bounds on [0,10]^2: [{b.output_lower[0]:.3f}, {b.output_upper[0]:.3f}]")

    for t in (25.0, 103.0):
        v = decide(Query(toy, box, OutputConstraint([[1.0]], [t])))
        w = "" if v.witness is None else f" witness {np.round(v.witness, 3).tolist()} -> {evaluate(toy, v.witness)[0]:g}"
        print(f"exists x with toy(x) >= {t:g}? {v.kind.value}{w} ({v.stats.nodes} nodes)")

    doubled = scaled_output(toy, 2.0)
    r = pdt(toy, doubled, box, DistanceSpec.l1(), M=200, eps=1)
    print(f"PDT(toy, 2*toy) in [{r.lower:g}, {r.upper:g}] ({r.status.value}, {r.queries} queries)")
    print("oracle maximum:", exact_max_distance(toy, doubled, box).value)
    print("PGD estimate:", attack_pdt(toy, doubled, box).value)
    print("sampling estimate (1000 points):", round(sample_pdt(toy, doubled, box).value, 3))


if __name__ == "__main__":
    main()
