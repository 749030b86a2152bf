"""Compare the compiled kernels with their plain-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Kernel timings run both paths in one process (every kernel exposes its
numpy path on ``.fallback``). ``--end-to-end`` additionally times
tagger training steps in two subprocesses, one with
``CLINNER_DISABLE_JIT=1``.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from clinner import kernels
from clinner._jit import JIT_ENABLED


def _inputs(rng):
    T, d_in, d_h, K = 20, 45, 50, 11
    W, U, b = rng.normal(size=(3, d_h, d_in)) * 0.1, rng.normal(size=(3, d_h, d_h)) * 0.1, np.zeros((3, d_h))
    X = rng.normal(size=(T, d_in))
    H, Z, R, C, HP = kernels.gru_seq_forward.fallback(X, W, U, b, False)
    N, Lc, dc, df = 20, 12, 10, 20
    Xc = rng.normal(size=(N, Lc, dc))
    lengths = rng.integers(3, Lc + 1, size=N).astype(np.int64)
    Fk, cb = rng.normal(size=(3, dc, df)), np.zeros(df)
    _, arg = kernels.char_conv_forward.fallback(Xc, lengths, Fk, cb)
    E, tr, st, sp = rng.normal(size=(T, K)), rng.normal(size=(K, K)), rng.normal(size=K), rng.normal(size=K)
    n = 20000
    return {
        "gru_seq_forward": (X, W, U, b, False),
        "gru_seq_backward": (rng.normal(size=(T, d_h)), X, W, U, Z, R, C, HP, False),
        "char_conv_forward": (Xc, lengths, Fk, cb),
        "char_conv_backward": (rng.normal(size=(N, df)), Xc, arg, Fk),
        "crf_marginals": (E, tr, st, sp),
        "crf_viterbi": (E, tr, st, sp),
        "adam_update": (rng.normal(size=n), rng.normal(size=n), np.zeros(n), np.zeros(n), 0.9, 0.999, 1e-3, 1e-8),
    }


def _time(fn, args, repeat):
    fn(*args)  # warm-up (compiles on first call)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for name, args in _inputs(rng).items():
        fn = getattr(kernels, name)
        py = _time(fn.fallback, args, repeat)
        jit = _time(fn, args, repeat) if JIT_ENABLED else float("nan")
        rows.append((name, py, jit))
    print(f"{'kernel':<20} {'numpy (us)':>12} {'numba (us)':>12} {'speedup':>8}")
    for name, py, jit in rows:
        print(f"{name:<20} {py * 1e6:12.1f} {jit * 1e6:12.1f} {py / jit:8.1f}x")
    if not JIT_ENABLED:
        print("numba path unavailable (CLINNER_DISABLE_JIT set or numba missing)")


_E2E = """
import time
from clinner.synth import SynthSpec, generate_corpus
from clinner.tagger import TaggerConfig, TaggerSystem, make_examples
c = generate_corpus(SynthSpec(n_docs=10, seed=0))
s = TaggerSystem(TaggerConfig())
m = s.new_model(c.docs)
pairs = [(fs, g) for ex in make_examples(m, c.docs) for fs, g in zip(ex.sentences, ex.gold)]
m.loss_and_grad(*pairs[0])
t0 = time.perf_counter()
for fs, g in pairs:
    m.zero_grad(); m.loss_and_grad(fs, g)
print((time.perf_counter() - t0) / len(pairs))
"""


def bench_end_to_end():
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, CLINNER_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        out[label] = float(res.stdout.strip().splitlines()[-1])
    print(f"\nloss+gradient per sentence: numpy {out['numpy'] * 1e3:.2f} ms, numba {out['numba'] * 1e3:.2f} ms "
          f"({out['numpy'] / out['numba']:.1f}x)")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)
    bench_kernels(args.repeat)
    if args.end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
