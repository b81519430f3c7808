"""Smolyak sparse-grid collocation: index sets, combination coefficients,
Clenshaw-Curtis / Gauss-Legendre node families, deduplicated quadrature rules,
sparse interpolation and expectation of black-box functionals.

Nodes are identified by exact integer keys, never by floating-point matching.
A Clenshaw-Curtis abscissa -cos(pi*k/m') is keyed by the fraction k/m' in
lowest terms, which makes nested-rule deduplication exact: the level-(j-1)
node -cos(pi*(k/2)/2^(j-1)) carries the same reduced fraction as the even
level-j node -cos(pi*k/2^j).  The single level-0 node is identified with the
midpoint fraction 1/2.  Gauss-Legendre families are non-nested; their keys
carry the node count so distinct levels never collide.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, IndexSetStructureError
from .stochastic_space import RandomSpace

__all__ = [
    "IndexSet",
    "NodeFamily",
    "SparseRule",
    "growth",
    "index_set",
    "combination_coeffs",
    "univariate_nodes",
    "univariate_weights",
    "assemble_rule",
    "integrate",
    "interpolate",
]

_FAMILY_CC = "clenshaw-curtis"
_FAMILY_GL = "gauss-legendre"
_GROWTHS = ("linear", "nested")
_KINDS = ("total-degree", "hyperbolic-cross", "full-tensor")


def growth(rule: str, j: int) -> int:
    """Polynomial degree p(j); the univariate node count at index j is p(j)+1."""
    if j < 0:
        raise ConfigurationError(f"growth index must be >= 0, got {j}")
    if rule == "linear":
        return j
    if rule == "nested":
        return 0 if j == 0 else 2**j
    raise ConfigurationError(f"unknown growth rule {rule!r}")


@dataclass(frozen=True)
class NodeFamily:
    """Univariate node family plus its growth rule."""

    kind: str = _FAMILY_CC
    growth: str = "nested"

    def __post_init__(self):
        if self.kind not in (_FAMILY_CC, _FAMILY_GL):
            raise ConfigurationError(f"unknown node family {self.kind!r}")
        if self.growth not in _GROWTHS:
            raise ConfigurationError(f"unknown growth rule {self.growth!r}")
        if self.kind == _FAMILY_GL and self.growth == "nested":
            raise ConfigurationError(
                "gauss-legendre is non-nested; use linear growth with it"
            )

    def node_count(self, j: int) -> int:
        return growth(self.growth, j) + 1


@dataclass(frozen=True)
class IndexSet:
    """Admissible multi-index set; always downward closed by construction."""

    kind: str
    level: int
    dim: int
    indices: tuple[tuple[int, ...], ...]

    def __contains__(self, j) -> bool:
        return tuple(j) in set(self.indices)

    def __len__(self) -> int:
        return len(self.indices)


def _enum_total_degree(dim: int, budget: int):
    if dim == 1:
        for j in range(budget + 1):
            yield (j,)
        return
    for j0 in range(budget + 1):
        for rest in _enum_total_degree(dim - 1, budget - j0):
            yield (j0,) + rest


def _enum_hyperbolic(dim: int, budget: int):
    # budget is the remaining product bound for (j_n + 1) factors
    if dim == 1:
        for j in range(budget):
            yield (j,)
        return
    j0 = 0
    while (j0 + 1) <= budget:
        for rest in _enum_hyperbolic(dim - 1, budget // (j0 + 1)):
            yield (j0,) + rest
        j0 += 1


def index_set(kind: str, level: int, dim: int) -> IndexSet:
    """Enumerate the multi-index set of the given kind at the given level."""
    if level < 0 or dim < 1:
        raise ConfigurationError(f"need level >= 0 and dim >= 1, got {level}, {dim}")
    if kind == "total-degree":
        members = _enum_total_degree(dim, level)
    elif kind == "hyperbolic-cross":
        members = _enum_hyperbolic(dim, level + 1)
    elif kind == "full-tensor":
        members = itertools.product(range(level + 1), repeat=dim)
    else:
        raise ConfigurationError(f"unknown index-set kind {kind!r}")
    return IndexSet(kind=kind, level=level, dim=dim, indices=tuple(sorted(members)))


def is_downward_closed(indices) -> bool:
    members = set(tuple(j) for j in indices)
    for j in members:
        for n in range(len(j)):
            if j[n] > 0:
                lower = j[:n] + (j[n] - 1,) + j[n + 1 :]
                if lower not in members:
                    return False
    return True


def combination_coeffs(iset: IndexSet | tuple) -> dict[tuple[int, ...], int]:
    """Combination-technique coefficients; indices with zero coefficient are dropped."""
    indices = iset.indices if isinstance(iset, IndexSet) else tuple(iset)
    if not is_downward_closed(indices):
        raise IndexSetStructureError("index set is not downward closed")
    members = set(indices)
    dim = len(indices[0])
    coeffs = {}
    for j in indices:
        c = 0
        for shift in itertools.product((0, 1), repeat=dim):
            if tuple(a + b for a, b in zip(j, shift)) in members:
                c += -1 if sum(shift) % 2 else 1
        if c != 0:
            coeffs[j] = c
    return coeffs


def univariate_nodes(family: str, m: int) -> np.ndarray:
    """m nodes in [-1, 1], sorted ascending."""
    if m < 1:
        raise ConfigurationError(f"node count must be >= 1, got {m}")
    if family == _FAMILY_CC:
        if m == 1:
            return np.zeros(1)
        k = np.arange(m)
        nodes = -np.cos(np.pi * k / (m - 1))
        # enforce exact symmetry and an exact-zero midpoint
        nodes = 0.5 * (nodes - nodes[::-1])
        return nodes
    if family == _FAMILY_GL:
        return np.polynomial.legendre.leggauss(m)[0]
    raise ConfigurationError(f"unknown node family {family!r}")


def _chebyshev_moments(m: int) -> np.ndarray:
    # (1/2) * integral of T_n over [-1, 1]: zero for odd n, 1/(1-n^2) for even n
    mom = np.zeros(m)
    for n in range(0, m, 2):
        mom[n] = 1.0 / (1.0 - n * n) if n else 1.0
    return mom


def univariate_weights(
    family: str, m: int, interval=(-1.0, 1.0), density: str = "uniform"
) -> np.ndarray:
    """Quadrature weights against the normalized uniform density.

    The weights integrate every Lagrange basis polynomial exactly against the
    density and sum to one.  Because the density is normalized, they are the
    same for any interval; `interval` is accepted for signature symmetry with
    the node mapping.
    """
    if density != "uniform":
        raise ConfigurationError(f"unsupported density {density!r}")
    if m < 1:
        raise ConfigurationError(f"node count must be >= 1, got {m}")
    if m == 1:
        return np.ones(1)
    if family == _FAMILY_GL:
        return np.polynomial.legendre.leggauss(m)[1] / 2.0
    if family == _FAMILY_CC:
        # Moment matching: V[n, k] = T_n(x_k) with x_k the CC abscissas.
        # Stable for the m <= 129 range used here (theta is a uniform grid,
        # so V is a cosine transform matrix).
        theta = np.pi * (m - 1 - np.arange(m)) / (m - 1)
        vander = np.cos(np.outer(np.arange(m), theta))
        return np.linalg.solve(vander, _chebyshev_moments(m))
    raise ConfigurationError(f"unknown node family {family!r}")


# ---------------------------------------------------------------------------
# canonical node keys


def _cc_key(m: int, k: int) -> tuple[int, int, int]:
    if m == 1:
        return (0, 1, 2)
    g = math.gcd(k, m - 1)
    return (0, k // g, (m - 1) // g)


def _gl_key(m: int, k: int) -> tuple[int, int, int]:
    return (1, m, k)


def node_key(family: str, m: int, k: int) -> tuple[int, int, int]:
    """Exact integer key of the k-th node of the m-point rule."""
    return _cc_key(m, k) if family == _FAMILY_CC else _gl_key(m, k)


def format_key(key) -> str:
    """Human-readable form of a full node key, for CSV dumps."""
    parts = []
    for fam, a, b in key:
        parts.append(f"{a}/{b}" if fam == 0 else f"gl{a}:{b}")
    return ";".join(parts)


@dataclass(frozen=True)
class SparseRule:
    """Deduplicated collocation nodes with combined quadrature weights."""

    keys: tuple
    points: np.ndarray  # (eta, N) coordinates in the random domain
    weights: np.ndarray  # (eta,)
    kind: str
    level: int
    family: str
    growth: str
    space: RandomSpace

    @property
    def node_count(self) -> int:
        return len(self.weights)


def assemble_rule(
    space: RandomSpace, kind: str, level: int, family: str = _FAMILY_CC,
    growth_rule: str = "nested",
) -> SparseRule:
    """Assemble the sparse quadrature rule for the given index set.

    For every multi-index with a nonzero combination coefficient, the full
    tensor grid of univariate rules is formed and its weights, scaled by the
    coefficient, are accumulated onto canonically keyed nodes.
    """
    fam = NodeFamily(kind=family, growth=growth_rule)
    iset = index_set(kind, level, space.dim)
    coeffs = combination_coeffs(iset)

    acc: dict[tuple, float] = {}
    ref_coord: dict[tuple, tuple] = {}
    for j in sorted(coeffs):
        c = coeffs[j]
        counts = [fam.node_count(jn) for jn in j]
        dim_nodes = [univariate_nodes(family, m) for m in counts]
        dim_weights = [univariate_weights(family, m) for m in counts]
        dim_keys = [[node_key(family, m, k) for k in range(m)] for m in counts]
        for combo in itertools.product(*(range(m) for m in counts)):
            key = tuple(dim_keys[n][k] for n, k in enumerate(combo))
            w = c * math.prod(dim_weights[n][k] for n, k in enumerate(combo))
            acc[key] = acc.get(key, 0.0) + w
            if key not in ref_coord:
                ref_coord[key] = tuple(dim_nodes[n][k] for n, k in enumerate(combo))

    keys = tuple(sorted(acc))
    ref = np.array([ref_coord[k] for k in keys])
    points = space.map_from_reference(ref)
    weights = np.array([acc[k] for k in keys])
    return SparseRule(
        keys=keys, points=points, weights=weights, kind=kind, level=level,
        family=family, growth=growth_rule, space=space,
    )


def integrate(rule: SparseRule, f, cache: dict | None = None) -> float:
    """Expectation sum(theta_k * f(y_k)); evaluations reusable via `cache`."""
    values = np.empty(rule.node_count)
    for i, key in enumerate(rule.keys):
        if cache is not None and key in cache:
            values[i] = cache[key]
        else:
            values[i] = f(rule.points[i])
            if cache is not None:
                cache[key] = values[i]
    return float(np.sum(rule.weights * values))


# ---------------------------------------------------------------------------
# sparse interpolation


def _barycentric_lambda(nodes: np.ndarray) -> np.ndarray:
    lam = np.ones(len(nodes))
    for k in range(len(nodes)):
        diff = nodes[k] - np.delete(nodes, k)
        lam[k] = 1.0 / np.prod(diff)
    return lam / np.max(np.abs(lam))


def _basis_at(nodes: np.ndarray, lam: np.ndarray, x: float) -> np.ndarray:
    diff = x - nodes
    exact = diff == 0.0
    if np.any(exact):
        basis = np.zeros(len(nodes))
        basis[np.argmax(exact)] = 1.0
        return basis
    t = lam / diff
    return t / np.sum(t)


def interpolate(
    space: RandomSpace, iset: IndexSet, family: str, growth_rule: str,
    f, y_eval, cache: dict | None = None,
) -> float:
    """Combination-formula evaluation of the sparse interpolant of f at y_eval."""
    fam = NodeFamily(kind=family, growth=growth_rule)
    coeffs = combination_coeffs(iset)
    xi = space.map_to_reference(np.asarray(y_eval, dtype=float))

    if cache is None:
        cache = {}
    total = 0.0
    for j in sorted(coeffs):
        counts = [fam.node_count(jn) for jn in j]
        dim_nodes = [univariate_nodes(family, m) for m in counts]
        dim_keys = [[node_key(family, m, k) for k in range(m)] for m in counts]
        values = np.empty(counts)
        for combo in itertools.product(*(range(m) for m in counts)):
            key = tuple(dim_keys[n][k] for n, k in enumerate(combo))
            if key not in cache:
                ref = np.array([dim_nodes[n][k] for n, k in enumerate(combo)])
                cache[key] = f(space.map_from_reference(ref))
            values[combo] = cache[key]
        part = values
        for n in range(len(j)):
            basis = _basis_at(dim_nodes[n], _barycentric_lambda(dim_nodes[n]), xi[n])
            part = np.tensordot(basis, part, axes=(0, 0))
        total += coeffs[j] * float(part)
    return total
