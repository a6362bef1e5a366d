"""Compare the compiled ray-cast kernel against the numpy fallback.

Renders the same scenes through both implementations in separate
interpreters, checks the outputs agree bit for bit, and reports
wall-clock timings.

    python benchmarks/bench_render.py [--scenes N] [--res R] [--repeats K]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time


def time_renders(n_scenes: int, resolution: int, repeats: int) -> float:
    from relight.core import vector_light
    from relight.synth import active_backend, render, sample_scene

    label = active_backend()
    specs = [sample_scene(seed) for seed in range(n_scenes)]
    light = vector_light(pan=1.0, tilt=0.7, temperature=5200.0)

    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        for spec in specs:
            render(spec, light, resolution)
        best = min(best, time.perf_counter() - started)
    print(f"{label:>6}: {n_scenes} scenes at {resolution}x{resolution}, best of {repeats}: {best:.3f}s")
    return best


def run_forced_numpy(args) -> float:
    """Re-run the timing loop with the fallback forced, in a fresh interpreter."""
    env = dict(os.environ, RELIGHT_FORCE_NUMPY="1")
    cmd = [
        sys.executable, __file__,
        "--scenes", str(args.scenes),
        "--res", str(args.res),
        "--repeats", str(args.repeats),
        "--single-run",
    ]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    sys.stdout.write(proc.stdout)
    return float(proc.stdout.strip().splitlines()[-1].split()[-1].rstrip("s"))


def render_blob(n_scenes: int, resolution: int, force_numpy: bool) -> tuple[str, bytes]:
    """Backend name plus every rendered array, serialized in a fresh process."""
    env = dict(os.environ)
    if force_numpy:
        env["RELIGHT_FORCE_NUMPY"] = "1"
    else:
        env.pop("RELIGHT_FORCE_NUMPY", None)
    code = (
        "import sys, numpy as np\n"
        "from relight.core import vector_light\n"
        "from relight.synth import active_backend, render, sample_scene\n"
        "print(active_backend(), flush=True)\n"
        f"for s in range({n_scenes}):\n"
        f"    for a in render(sample_scene(s), vector_light(1.0, 0.7, temperature=5200.0), {resolution}):\n"
        "        np.save(sys.stdout.buffer, a)\n"
    )
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, check=True)
    header, _, blob = proc.stdout.partition(b"\n")
    return header.strip().decode(), blob


def check_parity(n_scenes: int, resolution: int) -> None:
    name_np, blob_np = render_blob(n_scenes, resolution, force_numpy=True)
    name_cy, blob_cy = render_blob(n_scenes, resolution, force_numpy=False)
    if name_cy != "cython":
        print("compiled backend unavailable; skipping parity check")
        return
    assert name_np == "numpy"
    if blob_np != blob_cy:
        raise SystemExit("backends disagree: rendered arrays are not bit-identical")
    print(f"parity: {n_scenes} scenes at {resolution}x{resolution} bit-identical across backends")


def main() -> None:
    parser = argparse.ArgumentParser(description="ray-cast backend benchmark")
    parser.add_argument("--scenes", type=int, default=4)
    parser.add_argument("--res", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--single-run", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.single_run:
        time_renders(args.scenes, args.res, args.repeats)
        return

    from relight.synth import active_backend

    if active_backend() == "numpy":
        print("compiled backend unavailable; timing the fallback only")
        time_renders(args.scenes, args.res, args.repeats)
        return

    compiled = time_renders(args.scenes, args.res, args.repeats)
    fallback = run_forced_numpy(args)
    print(f"speedup: {fallback / compiled:.1f}x")
    check_parity(min(args.scenes, 2), max(64, min(args.res, 128)))


if __name__ == "__main__":
    main()
