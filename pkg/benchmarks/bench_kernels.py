#!/usr/bin/env python3
"""Benchmark the compiled propagation kernels against the NumPy fallback.

Workloads mirror the two hot paths: the annealer's figure-of-merit
evaluation (thermal channel blocks, one rotational period) and a GRAPE
iteration (single-state forward record + adjoint sweep).

Run:  python benchmarks/bench_kernels.py [--steps 2000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from rotorshape import _kernels_py
from rotorshape.core import BasisSpec, boltzmann_channels, make_coupling, \
    molecule
from rotorshape.propagator import _ChannelBlocks, _halfphase

try:
    from rotorshape import _kernels as _compiled
except ImportError:
    _compiled = None


def time_it(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_ensemble(backend, steps, repeats):
    """One annealer FoM evaluation: CO at 30 K, spline-like field."""
    mol = molecule("CO")
    ens = boltzmann_channels(mol, 30.0)
    blocks = _ChannelBlocks(ens)
    dt = mol.tr / steps
    rng = np.random.default_rng(0)
    efield = np.ascontiguousarray(rng.uniform(-1e-4, 1e-4, steps))
    mu_dt = mol.mu0 * dt

    def run():
        for blk in blocks.blocks:
            psi = blk["psi0"].copy()
            hp = _halfphase(mol, blk["basis"], dt)
            backend.strang_evolve(psi, hp, blk["vecs"], blk["vals"],
                                  efield, mu_dt)

    return time_it(run, repeats)


def bench_grape(backend, steps, repeats):
    """One GRAPE gradient: forward record plus adjoint sweep, j_max=9."""
    mol = molecule("OCS")
    basis = BasisSpec(9, 0)
    vals, vecs = make_coupling(basis).eig()
    dt = mol.tr / steps
    hp = _halfphase(mol, basis, dt)
    rng = np.random.default_rng(1)
    efield = np.ascontiguousarray(rng.uniform(-5e-4, 5e-4, steps))
    psi0 = np.zeros(basis.dim, dtype=np.complex128)
    psi0[0] = 1.0
    chi_t = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    chi_t /= np.linalg.norm(chi_t)
    traj = np.empty((steps + 1, basis.dim), dtype=np.complex128)
    grad = np.empty(steps)

    def run():
        psi = psi0.copy()
        backend.strang_evolve_record(psi, hp, vecs, vals, efield,
                                     mol.mu0 * dt, traj)
        chi = chi_t.copy()
        backend.grape_backward(traj, chi, hp, vecs, vals, efield,
                               mol.mu0 * dt, grad)

    return time_it(run, repeats)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = [("python", _kernels_py)]
    if _compiled is not None:
        backends.insert(0, ("compiled", _compiled))
    else:
        print("compiled kernels not available; benchmarking fallback only")

    results = {}
    for bench, fn in (("ensemble-fom", bench_ensemble),
                      ("grape-gradient", bench_grape)):
        print(f"\n{bench} ({args.steps} steps, best of {args.repeats}):")
        for name, mod in backends:
            elapsed = fn(mod, args.steps, args.repeats)
            results[(bench, name)] = elapsed
            print(f"  {name:9s} {elapsed * 1e3:9.2f} ms")
        if len(backends) == 2:
            ratio = results[(bench, "python")] / results[(bench, "compiled")]
            print(f"  speedup   {ratio:9.1f} x")


if __name__ == "__main__":
    main()
