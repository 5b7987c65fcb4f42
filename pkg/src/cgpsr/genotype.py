"""Cartesian genetic program encoding: chromosome, decoding, mutation.

A program is a grid of function nodes addressed by integer connection
genes.  Input terminals come first in the address space: feature
terminals 0..n_features-1, then constant terminals.  Node j occupies
address n_inputs + j and lives in column j // rows.  Each node holds
three genes (kernel, two connections); one trailing output gene selects
the program result.  Unary kernels carry the second connection gene but
ignore it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .duals import ARITY, BINARY_SYMBOL, KERNEL_IMPL, KernelSet, d2_constant, d2_seed

ConstInit = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class CgpParams:
    """Shape of the program grid and its terminal/kernel alphabet."""

    n_features: int
    n_constants: int
    rows: int
    columns: int
    levels_back: int
    kernels: KernelSet
    n_outputs: int = 1

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.n_constants < 0:
            raise ValueError("n_constants must be >= 0")
        if self.rows < 1 or self.columns < 1:
            raise ValueError("rows and columns must be >= 1")
        if not 1 <= self.levels_back <= self.columns:
            raise ValueError("levels_back must be in [1, columns]")
        if self.n_outputs != 1:
            raise ValueError("only single-output programs are supported")

    @property
    def n_inputs(self) -> int:
        return self.n_features + self.n_constants

    @property
    def n_nodes(self) -> int:
        return self.rows * self.columns

    @property
    def n_genes(self) -> int:
        return 3 * self.n_nodes + 1


class Genotype:
    """Integer genes plus the constants vector; treated as an immutable value."""

    __slots__ = ("genes", "constants", "_active")

    def __init__(self, genes, constants):
        genes = np.array(genes, dtype=np.int64)
        constants = np.array(constants, dtype=float)
        genes.setflags(write=False)
        constants.setflags(write=False)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "constants", constants)
        object.__setattr__(self, "_active", None)

    def __setattr__(self, name, value):
        raise AttributeError("Genotype is immutable; build a new one")

    def __getstate__(self):
        return (self.genes, self.constants)

    def __setstate__(self, state):
        genes, constants = state
        genes.setflags(write=False)
        constants.setflags(write=False)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "constants", constants)
        object.__setattr__(self, "_active", None)

    def with_constants(self, constants) -> "Genotype":
        return Genotype(self.genes, constants)

    def __repr__(self) -> str:
        return f"Genotype(genes={self.genes.tolist()}, constants={self.constants.tolist()})"


def _conn_span(params: CgpParams, column: int) -> tuple[int, int]:
    """Addressable node range [start, stop) for a connection gene in `column`."""
    lo = max(0, column - params.levels_back)
    start = params.n_inputs + lo * params.rows
    stop = params.n_inputs + column * params.rows
    return start, stop


def _conn_size(params: CgpParams, column: int) -> int:
    start, stop = _conn_span(params, column)
    return params.n_inputs + (stop - start)


def _conn_decode(params: CgpParams, column: int, u: int) -> int:
    """Map a uniform index over the legal set to a terminal or node address."""
    if u < params.n_inputs:
        return u
    start, _ = _conn_span(params, column)
    return start + (u - params.n_inputs)


def _conn_encode(params: CgpParams, column: int, address: int) -> int:
    if address < params.n_inputs:
        return address
    start, _ = _conn_span(params, column)
    return params.n_inputs + (address - start)


def _gene_domain(params: CgpParams, pos: int):
    """(size, decode, encode) of the legal value set for gene position `pos`."""
    if pos == params.n_genes - 1:  # output gene: any terminal or node
        size = params.n_inputs + params.n_nodes
        ident = lambda u: u
        return size, ident, ident
    node, slot = divmod(pos, 3)
    if slot == 0:
        size = len(params.kernels)
        ident = lambda u: u
        return size, ident, ident
    column = node // params.rows
    return (
        _conn_size(params, column),
        lambda u: _conn_decode(params, column, u),
        lambda a: _conn_encode(params, column, a),
    )


def validate_genotype(g: Genotype, params: CgpParams) -> None:
    """Raise ValueError if any gene is outside its legal range or a constant is non-finite."""
    if g.genes.shape != (params.n_genes,):
        raise ValueError(f"expected {params.n_genes} genes, got {g.genes.shape}")
    if g.constants.shape != (params.n_constants,):
        raise ValueError(
            f"expected {params.n_constants} constants, got {g.constants.shape}"
        )
    if g.constants.size and not np.all(np.isfinite(g.constants)):
        raise ValueError("constants must be finite")
    n_in = params.n_inputs
    n_kernels = len(params.kernels)
    for node in range(params.n_nodes):
        base = 3 * node
        kernel = int(g.genes[base])
        if not 0 <= kernel < n_kernels:
            raise ValueError(f"node {node}: kernel gene {kernel} out of range")
        start, stop = _conn_span(params, node // params.rows)
        for slot in (1, 2):
            addr = int(g.genes[base + slot])
            if not (0 <= addr < n_in or start <= addr < stop):
                raise ValueError(f"node {node}: connection gene {addr} out of reach")
    out = int(g.genes[-1])
    if not 0 <= out < n_in + params.n_nodes:
        raise ValueError(f"output gene {out} out of range")


def random_genotype(
    params: CgpParams,
    rng: np.random.Generator,
    const_init: Optional[ConstInit] = None,
) -> Genotype:
    """Draw every gene uniformly over its legal set; constants from const_init
    (default uniform on [-1, 1])."""
    genes = np.empty(params.n_genes, dtype=np.int64)
    for pos in range(params.n_genes):
        size, decode, _ = _gene_domain(params, pos)
        genes[pos] = decode(int(rng.integers(0, size)))
    if const_init is None:
        constants = rng.uniform(-1.0, 1.0, params.n_constants)
    else:
        constants = np.asarray(const_init(rng, params.n_constants), dtype=float)
    return Genotype(genes, constants)


def _active_structure(g: Genotype, params: CgpParams) -> tuple[list[int], frozenset[int]]:
    """(active node indices in evaluation order, reachable terminal addresses)."""
    cached = g._active
    if cached is not None:
        return cached
    n_in = params.n_inputs
    genes = g.genes
    names = params.kernels.names
    seen_nodes: set[int] = set()
    terminals: set[int] = set()
    stack = [int(genes[-1])]
    while stack:
        addr = stack.pop()
        if addr < n_in:
            terminals.add(addr)
            continue
        node = addr - n_in
        if node in seen_nodes:
            continue
        seen_nodes.add(node)
        base = 3 * node
        stack.append(int(genes[base + 1]))
        if ARITY[names[genes[base]]] == 2:
            stack.append(int(genes[base + 2]))
    # connections only reach earlier columns, so ascending index order is
    # a valid evaluation order
    result = (sorted(seen_nodes), frozenset(terminals))
    object.__setattr__(g, "_active", result)
    return result


def active_nodes(g: Genotype, params: CgpParams) -> list[int]:
    """Node indices reachable backward from the output, in evaluation order."""
    return _active_structure(g, params)[0]


def active_terminals(g: Genotype, params: CgpParams) -> frozenset[int]:
    """Terminal addresses (features and constants) read by the expressed program."""
    return _active_structure(g, params)[1]


def uses_constants(g: Genotype, params: CgpParams) -> bool:
    return any(t >= params.n_features for t in _active_structure(g, params)[1])


def complexity(g: Genotype, params: CgpParams) -> int:
    """Number of active function nodes (terminals and the output gene do not count)."""
    return len(_active_structure(g, params)[0])


def mutate(
    g: Genotype, params: CgpParams, max_mutations: int, rng: np.random.Generator
) -> Genotype:
    """Redraw k ~ Uniform[1, max_mutations] distinct genes, each uniformly over
    its legal set excluding the current value.  Constants are copied unchanged;
    they evolve only through Newton steps."""
    if max_mutations < 1:
        raise ValueError("max_mutations must be >= 1")
    k = min(int(rng.integers(1, max_mutations + 1)), params.n_genes)
    positions: list[int] = []
    while len(positions) < k:  # k is tiny; rejection beats rng.choice here
        pos = int(rng.integers(0, params.n_genes))
        if pos not in positions:
            positions.append(pos)
    genes = g.genes.copy()
    n_in = params.n_inputs
    n_kernels = len(params.kernels)
    last = params.n_genes - 1
    for pos in positions:
        # legal set of this gene position, as (size, node-range start)
        if pos == last:
            size, start = n_in + params.n_nodes, n_in
        else:
            node, slot = divmod(pos, 3)
            if slot == 0:
                size, start = n_kernels, 0
            else:
                lo, hi = _conn_span(params, node // params.rows)
                size, start = n_in + hi - lo, lo
        if size < 2:
            continue
        cur = int(genes[pos])
        if pos != last and pos % 3 and cur >= n_in:
            cur = n_in + cur - start  # fold node address into the uniform index
        u = int(rng.integers(0, size - 1))
        if u >= cur:
            u += 1
        if pos != last and pos % 3 and u >= n_in:
            u = start + u - n_in
        genes[pos] = u
    return Genotype(genes, g.constants)


def _run_program(g: Genotype, params: CgpParams, terminal_value):
    """Walk the active nodes with terminal values supplied by `terminal_value`."""
    nodes, terminals = _active_structure(g, params)
    n_in = params.n_inputs
    genes = g.genes
    names = params.kernels.names
    values: dict[int, object] = {t: terminal_value(t) for t in terminals}
    for node in nodes:
        base = 3 * node
        name = names[genes[base]]
        a = values[genes[base + 1]]
        if ARITY[name] == 1:
            out = KERNEL_IMPL[name](a)
        else:
            out = KERNEL_IMPL[name](a, values[genes[base + 2]])
        values[n_in + node] = out
    return values[int(genes[-1])]


def evaluate(g: Genotype, params: CgpParams, inputs: Sequence) -> np.ndarray:
    """Evaluate the expressed program on plain values.

    `inputs` supplies one value per feature; entries may be scalars or
    equally-shaped arrays (vectorized evaluation).  Non-finite results
    propagate, nothing raises.
    """
    if len(inputs) != params.n_features:
        raise ValueError(f"expected {params.n_features} inputs, got {len(inputs)}")
    n_feat = params.n_features
    constants = g.constants

    def terminal(addr: int):
        if addr < n_feat:
            return np.asarray(inputs[addr], dtype=float)
        return np.float64(constants[addr - n_feat])

    with np.errstate(all="ignore"):
        return _run_program(g, params, terminal)


def evaluate_dual(
    g: Genotype,
    params: CgpParams,
    inputs: Sequence,
    seed_indices: Optional[Sequence[int]] = None,
):
    """Evaluate carrying gradient and Hessian w.r.t. the constants.

    Returns a D2Scalar whose value matches :func:`evaluate` bit for bit.
    `seed_indices` restricts differentiation to the given constants (the
    gradient axes then follow that order); constants outside it contribute
    like plain numbers, which is exact when they are unreachable.
    """
    if len(inputs) != params.n_features:
        raise ValueError(f"expected {params.n_features} inputs, got {len(inputs)}")
    n_feat = params.n_features
    constants = g.constants
    if seed_indices is None:
        seed_of = {j: j for j in range(params.n_constants)}
    else:
        seed_of = {int(j): pos for pos, j in enumerate(seed_indices)}
    m = params.n_constants if seed_indices is None else len(seed_of)

    def terminal(addr: int):
        if addr < n_feat:
            return d2_constant(np.asarray(inputs[addr], dtype=float), m)
        j = addr - n_feat
        pos = seed_of.get(j)
        if pos is None:
            return d2_constant(constants[j], m)
        return d2_seed(constants[j], pos, m)

    with np.errstate(all="ignore"):
        return _run_program(g, params, terminal)


def decode_infix(
    g: Genotype,
    params: CgpParams,
    names: Optional[Sequence[str]] = None,
    digits: int = 6,
) -> str:
    """Fully parenthesized infix form of the expressed program.

    Constants are rendered with `digits` significant digits; feature names
    default to x0..x{n-1}.
    """
    if names is None:
        names = [f"x{i}" for i in range(params.n_features)]
    elif len(names) != params.n_features:
        raise ValueError("one name per feature required")
    n_feat = params.n_features
    spec = f"#.{digits}g"

    def terminal(addr: int) -> str:
        if addr < n_feat:
            return str(names[addr])
        return format(g.constants[addr - n_feat], spec)

    nodes, terminals = _active_structure(g, params)
    strings: dict[int, str] = {t: terminal(t) for t in terminals}
    kernel_names = params.kernels.names
    genes = g.genes
    for node in nodes:
        base = 3 * node
        name = kernel_names[genes[base]]
        a = strings[genes[base + 1]]
        if ARITY[name] == 1:
            strings[params.n_inputs + node] = f"{name}({a})"
        else:
            b = strings[genes[base + 2]]
            strings[params.n_inputs + node] = f"({a} {BINARY_SYMBOL[name]} {b})"
    return strings[int(genes[-1])]


def params_to_dict(params: CgpParams) -> dict:
    return {
        "n_features": params.n_features,
        "n_constants": params.n_constants,
        "rows": params.rows,
        "columns": params.columns,
        "levels_back": params.levels_back,
        "kernels": list(params.kernels.names),
    }


def params_from_dict(d: dict) -> CgpParams:
    return CgpParams(
        n_features=int(d["n_features"]),
        n_constants=int(d["n_constants"]),
        rows=int(d["rows"]),
        columns=int(d["columns"]),
        levels_back=int(d["levels_back"]),
        kernels=KernelSet(tuple(d["kernels"])),
    )


def genotype_to_dict(g: Genotype, params: CgpParams) -> dict:
    """JSON-ready form: {params, genes, constants}."""
    return {
        "params": params_to_dict(params),
        "genes": [int(v) for v in g.genes],
        "constants": [float(c) for c in g.constants],
    }


def genotype_from_dict(d: dict) -> tuple[Genotype, CgpParams]:
    params = params_from_dict(d["params"])
    g = Genotype(d["genes"], d["constants"])
    validate_genotype(g, params)
    return g, params
