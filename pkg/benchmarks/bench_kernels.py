"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Every case is checked for identical output across backends before timing.
"""

import argparse
import json
import sys
import timeit
from dataclasses import replace

import numpy as np

from afb_screen import _kernels
from afb_screen.config import default_config
from afb_screen.pipeline import analyze_image, segment
from afb_screen.synthgen import corpus_params, generate_scene


def _fov_mask(size, seed):
    cfg = default_config()
    params = replace(cfg.synth, width=size, height=size, seed=seed,
                     n_rods=max(10, size * size // 6500), n_debris=max(5, size * size // 13000))
    img, _ = generate_scene(corpus_params(params, 0))
    return img, segment(img, cfg).merged.data


def _largest_blob(mask, backend):
    labels, n = backend.label8(mask)
    sizes = np.bincount(labels.ravel())[1:]
    return np.pad((labels == int(np.argmax(sizes)) + 1).astype(np.uint8), 1)


def _cases():
    rng = np.random.default_rng(0)
    img256, fov256 = _fov_mask(256, 1)
    img1024, fov1024 = _fov_mask(1024, 2)
    noise = rng.random((512, 512)) < 0.45
    disk = np.hypot(*np.mgrid[-150:151, -150:151]) <= 150
    cases = [
        ("label8", "FOV mask 256x256", fov256),
        ("label8", "FOV mask 1024x1024", fov1024),
        ("label8", "random mask 512x512, p=0.45", noise),
        ("trace_moore", "largest blob in random 512x512", _largest_blob(noise, _kernels.fallback)),
        ("trace_moore", "disk radius 150", np.pad(disk.astype(np.uint8), 1)),
    ]
    return cases, [("analyze_image", "FOV 256x256", img256), ("analyze_image", "FOV 1024x1024", img1024)]


def _time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 1000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def _use(backend):
    _kernels.label8 = backend.label8
    _kernels.trace_moore = backend.trace_moore


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", dest="json_path")
    args = ap.parse_args(argv)

    if _kernels.compiled is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    backends = {"python": _kernels.fallback, "compiled": _kernels.compiled}
    kernel_cases, pipeline_cases = _cases()
    cfg = default_config()
    rows = []

    for kernel, label, data in kernel_cases:
        outs = {name: getattr(b, kernel)(data) for name, b in backends.items()}
        a, b = outs["python"], outs["compiled"]
        same = (np.array_equal(a[0], b[0]) and a[1] == b[1]) if kernel == "label8" else np.array_equal(a, b)
        if not same:
            print(f"backends disagree on {kernel} / {label}", file=sys.stderr)
            return 2
        times = {name: _time(lambda f=getattr(bk, kernel): f(data), args.repeat) for name, bk in backends.items()}
        rows.append((kernel, label, times))

    original = (_kernels.label8, _kernels.trace_moore)
    try:
        for stage, label, img in pipeline_cases:
            reports = {}
            times = {}
            for name, bk in backends.items():
                _use(bk)
                reports[name] = analyze_image(img, cfg, "bench").to_json()
                times[name] = _time(lambda: analyze_image(img, cfg, "bench"), args.repeat)
            if reports["python"] != reports["compiled"]:
                print(f"backends disagree on {stage} / {label}", file=sys.stderr)
                return 2
            rows.append((stage, label, times))
    finally:
        _kernels.label8, _kernels.trace_moore = original

    print(f"{'operation':<14} {'input':<32} {'python ms':>11} {'compiled ms':>12} {'speedup':>8}")
    for op, label, t in rows:
        print(f"{op:<14} {label:<32} {t['python'] * 1e3:>11.2f} {t['compiled'] * 1e3:>12.2f} "
              f"{t['python'] / t['compiled']:>7.1f}x")
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump([{"operation": op, "input": label, "python_s": t["python"], "compiled_s": t["compiled"]}
                       for op, label, t in rows], fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
