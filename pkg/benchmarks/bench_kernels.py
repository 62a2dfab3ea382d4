"""Compare the compiled and pure-Python kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 3] [--json results.json]

Each workload is timed for every available kernel build; the table reports the
best of ``--repeat`` runs and the speedup over the pure-Python build.
"""

import argparse
import json
import time

import numpy as np

from crnpp import kernels
from crnpp.compiler import compile_program
from crnpp.crn import Crn, mass_action_odes, rxn
from crnpp.frontend import load
from crnpp.programs import read_directives, resolve


def corpus_network(name):
    src = resolve(name).read_text()
    cp = compile_program(load(src), read_directives(src).params)
    ode = mass_action_odes(cp.crn)
    init = cp.crn.concentrations()
    return ode, np.array([init[s] for s in ode.species])


def random_network(n_species=60, n_reactions=200, seed=1):
    rng = np.random.default_rng(seed)
    names = [f"s{i}" for i in range(n_species)]
    reactions = []
    for _ in range(n_reactions):
        r = list(rng.choice(names, size=rng.integers(1, 3)))
        p = list(rng.choice(names, size=rng.integers(0, 3)))
        reactions.append(rxn(r, p, float(rng.uniform(0.1, 1.0))))
    crn = Crn(tuple(reactions), {s: float(rng.uniform(0, 1)) for s in names})
    ode = mass_action_odes(crn)
    init = crn.concentrations()
    return ode, np.array([init[s] for s in ode.species])


def bench_rhs(impl, ode, y0, n=2000):
    for _ in range(n):
        impl.rhs(y0, ode.packed)


def bench_integrate(impl, ode, y0, t_end):
    res = impl.integrate(ode.packed, y0, 0.0, t_end, 1e-8, 1e-10, t_end / 50)
    if res.status != kernels.OK:
        raise RuntimeError(f"integration failed with status {res.status}")


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)

    gcd = corpus_network("gcd")
    pi = corpus_network("pi")
    rnd = random_network()
    workloads = {
        "rhs x2000 (gcd)": lambda impl: bench_rhs(impl, *gcd),
        "rhs x2000 (random 60x200)": lambda impl: bench_rhs(impl, *rnd),
        "integrate gcd t=600": lambda impl: bench_integrate(impl, *gcd, 600.0),
        "integrate pi t=400": lambda impl: bench_integrate(impl, *pi, 400.0),
        "integrate random t=20": lambda impl: bench_integrate(impl, *rnd, 20.0),
    }
    backends = kernels.available()
    results = {w: {b: best_of(lambda: fn(kernels.load(b)), args.repeat) for b in backends}
               for w, fn in workloads.items()}

    width = max(map(len, workloads))
    print(f"{'workload':<{width}}  " + "  ".join(f"{b:>10}" for b in backends) + "   speedup")
    for w, row in results.items():
        cells = "  ".join(f"{row[b]:>9.4f}s" for b in backends)
        speedup = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{w:<{width}}  {cells}   {speedup:7.1f}x")
    if "cython" not in backends:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
