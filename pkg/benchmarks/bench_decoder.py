"""Compare the compiled and numpy BP kernels on one decoding campaign.

Runs the same batch of noisy codewords through both backends, checks
they return identical decisions, and reports blocks/second for each.

Usage: python3 benchmarks/bench_decoder.py [--n 512] [--rate 0.5]
       [--blocks 500] [--snr-db 3.0] [--max-iters 50]
"""

import argparse
import time

import numpy as np

from d2dsim.ldpc import _bp_numpy
from d2dsim.ldpc.code import encode, make_code
from d2dsim.ldpc.modem import Modulation, transmit_awgn

try:
    from d2dsim.ldpc import _bp
except ImportError:
    _bp = None


def run_kernel(kernel, code, llrs, max_iters, repeats):
    st = code.edge_structure()
    args = (llrs, st["edge_var"], st["check_edges"], st["var_edges"], max_iters)
    kernel.bp_decode_batch(*args)  # warm-up outside the timed region
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = kernel.bp_decode_batch(*args)
    elapsed = (time.perf_counter() - t0) / repeats
    return out, elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--rate", type=float, default=0.5)
    ap.add_argument("--blocks", type=int, default=500)
    ap.add_argument("--snr-db", type=float, default=3.0)
    ap.add_argument("--max-iters", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    code = make_code(args.n, args.rate, 7)
    rng = np.random.default_rng(42)
    msgs = rng.integers(0, 2, size=(args.blocks, code.k), dtype=np.uint8)
    llrs = transmit_awgn(encode(code, msgs), Modulation.QPSK, args.snr_db,
                         rng=rng)
    print(f"code n={code.n} k={code.k}, {args.blocks} blocks, "
          f"QPSK at {args.snr_db:g} dB, max {args.max_iters} iterations")

    (bits_np, conv_np, it_np), t_np = run_kernel(
        _bp_numpy, code, llrs, args.max_iters, args.repeats)
    print(f"numpy : {t_np:8.3f} s  ({args.blocks / t_np:8.1f} blocks/s, "
          f"mean iters {it_np.mean():.1f}, {conv_np.mean():.1%} converged)")

    if _bp is None:
        print("cython: extension not built; pure numpy is the active kernel")
        return

    (bits_cy, conv_cy, it_cy), t_cy = run_kernel(
        _bp, code, llrs, args.max_iters, args.repeats)
    print(f"cython: {t_cy:8.3f} s  ({args.blocks / t_cy:8.1f} blocks/s, "
          f"mean iters {it_cy.mean():.1f}, {conv_cy.mean():.1%} converged)")

    agree = (np.array_equal(bits_np, bits_cy)
             and np.array_equal(conv_np, conv_cy)
             and np.array_equal(it_np, it_cy))
    print(f"agreement: {'identical outputs' if agree else 'MISMATCH'}; "
          f"speedup {t_np / t_cy:.1f}x")
    if not agree:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
