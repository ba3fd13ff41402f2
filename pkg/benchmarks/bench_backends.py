"""Time the numba kernels against their NumPy fallbacks.

    python benchmarks/bench_backends.py [--width 1024] [--repeat 5]

Each case runs once per backend to warm up (JIT compile), then ``--repeat``
times; the best wall time is reported together with the max abs difference
between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from tpslayout import fit, layout, postproc, synth, tps, warp
from tpslayout._accel import HAVE_NUMBA, use_backend
from tpslayout.tps import ControlGrid


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(width):
    height = width // 2
    rng = np.random.default_rng(0)
    ref = layout.reference_layout(width, height)
    room = synth.generate_one(synth.CorpusSpec(count=1, seed=3, resolution=(width, height)), 0)
    grid = ControlGrid.identity(4)
    grid = grid.with_targets(grid.source_points + rng.uniform(-0.03, 0.03, (16, 2)))
    coef = tps.solve_coefficients(grid)
    coords = rng.uniform(0, 1, (width * height, 2))
    stack = ref.stacked()
    upstream = rng.normal(size=(width * height, 4))
    objective = fit.WarpObjective(stack, room.maps.stacked(), grid, fit.FitConfig())
    blobs = room.maps.corner >= 0.5
    return {
        "tps evaluate": lambda: tps.make_sampling_grid(coef, grid, width, height),
        "bilinear sample": lambda: warp.sample_coords(stack, coords),
        "bilinear gradient": lambda: warp.sample_coords_gradient(stack, coords, upstream),
        "warp + huber + grad": lambda: objective.value_and_grad(np.array(grid.target_points)),
        "render maps": lambda: layout.render_maps(room.layout, width, height),
        "label components": lambda: postproc.connected_components(blobs).labels,
    }


def _flat(out):
    if isinstance(out, tuple):
        return np.concatenate([_flat(o) for o in out])
    if hasattr(out, "stacked"):
        return out.stacked().ravel()
    if hasattr(out, "coords"):
        return np.ravel(out.coords)
    return np.ravel(np.asarray(out, dtype=float))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 0
    print(f"{'kernel':<22}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}{'max diff':>11}")
    for name, fn in cases(args.width).items():
        row = {}
        for b in ("numba", "numpy"):
            with use_backend(b):
                row[b] = (_best(fn, args.repeat), _flat(fn()))
        diff = float(np.abs(row["numba"][1] - row["numpy"][1]).max())
        tn, tp = row["numba"][0], row["numpy"][0]
        print(f"{name:<22}{tn * 1e3:>10.2f}{tp * 1e3:>10.2f}{tp / tn:>9.1f}{diff:>11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
