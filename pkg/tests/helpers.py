"""Shared independent oracles for the test suite.

Everything here recomputes expectations through a path different from the
production code: finite differences instead of the dual algebra, explicit
graph traversal instead of the decoder walk, Python eval instead of the
program interpreter.
"""

import numpy as np

from cgpsr.duals import ARITY, KernelSet
from cgpsr.genotype import CgpParams

ALL_KERNELS = KernelSet.of("add", "sub", "mul", "div", "log", "sin")


def fd_grad_hess(f, c, h_scale=1e-4):
    """Central finite differences of a scalar function of the constants vector."""
    c = np.asarray(c, dtype=float)
    m = c.size
    grad = np.zeros(m)
    hess = np.zeros((m, m))
    steps = h_scale * np.maximum(1.0, np.abs(c))
    for j in range(m):
        e = np.zeros(m)
        e[j] = steps[j]
        grad[j] = (f(c + e) - f(c - e)) / (2 * steps[j])
        hess[j, j] = (f(c + e) - 2 * f(c) + f(c - e)) / steps[j] ** 2
    for j in range(m):
        for k in range(j + 1, m):
            ej = np.zeros(m)
            ek = np.zeros(m)
            ej[j] = steps[j]
            ek[k] = steps[k]
            hess[j, k] = hess[k, j] = (
                f(c + ej + ek) - f(c + ej - ek) - f(c - ej + ek) + f(c - ej - ek)
            ) / (4 * steps[j] * steps[k])
    return grad, hess


def rel_err(got, want):
    """Max elementwise deviation scaled by max(1, |want|)."""
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    if got.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.abs(want))
    return float(np.max(np.abs(got - want) / scale))


def random_params(rng, kernels=None, max_columns=6):
    columns = int(rng.integers(1, max_columns + 1))
    if kernels is None:
        names = list(ALL_KERNELS.names)
        rng.shuffle(names)
        kernels = KernelSet(tuple(names[: int(rng.integers(1, len(names) + 1))]))
    return CgpParams(
        n_features=int(rng.integers(1, 5)),
        n_constants=int(rng.integers(0, 4)),
        rows=int(rng.integers(1, 4)),
        columns=columns,
        levels_back=int(rng.integers(1, columns + 1)),
        kernels=kernels,
    )


def reachable_nodes_oracle(g, params):
    """Brute-force reachability over an explicit dependency graph."""
    n_in = params.n_inputs
    deps = {}
    for j in range(params.n_nodes):
        name = params.kernels.names[g.genes[3 * j]]
        conns = [int(g.genes[3 * j + 1])]
        if ARITY[name] == 2:
            conns.append(int(g.genes[3 * j + 2]))
        deps[n_in + j] = conns
    frontier = [int(g.genes[-1])]
    seen = set()
    while frontier:
        addr = frontier.pop()
        if addr < n_in or addr in seen:
            continue
        seen.add(addr)
        frontier.extend(deps[addr])
    return sorted(a - n_in for a in seen)


def eval_infix_oracle(expr, params, inputs, names=None):
    """Independent evaluation path: parse the decoded string with Python."""
    if names is None:
        names = [f"x{i}" for i in range(params.n_features)]
    env = {"log": np.log, "sin": np.sin, "__builtins__": {}}
    env.update({n: np.asarray(v, dtype=float) for n, v in zip(names, inputs)})
    with np.errstate(all="ignore"):
        return np.asarray(eval(expr, env), dtype=float)


def pairwise_fronts_oracle(points):
    """Non-dominated fronts by exhaustive pairwise domination tests.

    points: list of (loss, complexity) tuples.  Returns a list of fronts,
    each a sorted list of indices into points.  A finite loss dominates
    every infinite one; two infinite losses compare by complexity alone.
    """
    import math

    def dominates(a, b):
        a_fin, b_fin = math.isfinite(a[0]), math.isfinite(b[0])
        if a_fin and not b_fin:
            return True
        if not a_fin and b_fin:
            return False
        if not a_fin and not b_fin:
            return a[1] < b[1]
        return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])

    remaining = set(range(len(points)))
    fronts = []
    while remaining:
        front = [
            i
            for i in remaining
            if not any(dominates(points[j], points[i]) for j in remaining if j != i)
        ]
        fronts.append(sorted(front))
        remaining -= set(front)
    return fronts


def ols_oracle(X, y):
    """Closed-form least squares of y on [X | 1] via the normal equations."""
    A = np.column_stack([X, np.ones(len(y))])
    return np.linalg.solve(A.T @ A, A.T @ y)
