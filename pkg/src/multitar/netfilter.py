"""Statistical sparsification of dense directed weighted networks.

Each edge is scored under a Polya urn null: a node with degree ``k`` and
total incident strength ``s`` allocates weight across its edges by a
reinforced urn with parameter ``a``.  The survival probability of a weight
at least ``w`` is the Beta-Binomial tail, extended to continuous weights by
mixing the regularized incomplete beta over the urn's Beta share
distribution; ``a -> 0`` recovers the plain Binomial(s, 1/k) tail.

``polya_filter`` evaluates the urn on weight shares (each endpoint's weights
are rescaled so its strength equals its degree), which makes the resulting
p-values invariant under rescaling all of a node's weights.  Ranking by
p-value with deterministic tie-breaks then keeps the requested fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

_QUAD_ORDER = 128
_quad_cache: dict = {}


def _quad_nodes(order: int = _QUAD_ORDER):
    if order not in _quad_cache:
        x, w = leggauss(order)
        _quad_cache[order] = (0.5 * (x + 1.0), 0.5 * w)
    return _quad_cache[order]


@dataclass(frozen=True)
class WeightedDigraph:
    """Directed weighted graph over integer node ids ``0..n_nodes-1``.

    Parallel arrays hold one edge per entry; duplicate (source, target)
    pairs are rejected and weights may be negative (the filters act on
    magnitudes).
    """

    n_nodes: int
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.sources, dtype=np.int64)
        tgt = np.asarray(self.targets, dtype=np.int64)
        wts = np.asarray(self.weights, dtype=np.float64)
        if not (src.shape == tgt.shape == wts.shape) or src.ndim != 1:
            raise ValueError("sources, targets, weights must be 1-D and aligned")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if src.size and (src.min() < 0 or src.max() >= self.n_nodes
                         or tgt.min() < 0 or tgt.max() >= self.n_nodes):
            raise ValueError("edge endpoint out of range")
        if not np.all(np.isfinite(wts)):
            raise ValueError("weights must be finite")
        keys = src * self.n_nodes + tgt
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate (source, target) edge")
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "targets", tgt)
        object.__setattr__(self, "weights", wts)

    @property
    def n_edges(self) -> int:
        return int(self.sources.size)

    @classmethod
    def from_dense(cls, matrix) -> "WeightedDigraph":
        """All ordered pairs (including the diagonal) of a square weight matrix."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        n = m.shape[0]
        src, tgt = np.divmod(np.arange(n * n), n)
        return cls(n_nodes=n, sources=src, targets=tgt, weights=m.reshape(-1))


@dataclass(frozen=True)
class FilterResult:
    """Per-edge p-values and keep mask, aligned with the input edge order."""

    p_values: np.ndarray
    kept: np.ndarray
    threshold_used: float
    method: str


def _survival(w, s, k, a, order: int = _QUAD_ORDER) -> np.ndarray:
    """Vectorized urn survival probability P(W >= w | s, k, a)."""
    w, s, k = np.broadcast_arrays(
        np.asarray(w, dtype=np.float64),
        np.asarray(s, dtype=np.float64),
        np.asarray(k, dtype=np.float64),
    )
    out = np.ones(w.shape)
    active = (w > 0.0) & (k > 1.0)
    if not np.any(active):
        return out
    wa, sa, ka = w[active], s[active], k[active]
    if a == 0.0:
        out[active] = special.betainc(wa, sa - wa + 1.0, 1.0 / ka)
        return out
    nodes, quad_w = _quad_nodes(order)
    shares = special.betaincinv(1.0 / a, (ka[:, None] - 1.0) / a, nodes[None, :])
    tails = special.betainc(wa[:, None], sa[:, None] - wa[:, None] + 1.0, shares)
    out[active] = np.clip(tails @ quad_w, 0.0, 1.0)
    return out


def polya_pvalue(w: float, s: float, k: int, a: float) -> float:
    """Survival probability of weight >= ``w`` on one of ``k`` edges sharing
    total strength ``s`` under a Polya urn with reinforcement ``a``.

    ``w = 0`` and ``k = 1`` are certain events; the value decreases
    monotonically in ``w`` and approaches the Binomial(s, 1/k) tail as
    ``a -> 0``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if w < 0.0 or s < 0.0:
        raise ValueError("w and s must be nonnegative")
    if w > s:
        raise ValueError(f"w={w} exceeds total strength s={s}")
    if a < 0.0:
        raise ValueError("a must be >= 0")
    return float(_survival(w, s, float(k), a)[()])


def _keep_count(n_edges: int, retain_fraction: float) -> int:
    if not 0.0 < retain_fraction <= 1.0:
        raise ValueError("retain_fraction must lie in (0, 1]")
    return min(n_edges, math.ceil(retain_fraction * n_edges))


def _rank_and_keep(order_keys, n_edges: int, retain_fraction: float):
    order = np.lexsort(order_keys)
    n_keep = _keep_count(n_edges, retain_fraction)
    kept = np.zeros(n_edges, dtype=bool)
    kept[order[:n_keep]] = True
    return kept, order[n_keep - 1]


def polya_filter(g: WeightedDigraph, a: float, retain_fraction: float) -> FilterResult:
    """Keep the ``retain_fraction`` of edges with the smallest urn p-values.

    Each edge is scored from both endpoints - against the source's
    out-strength/out-degree and the target's in-strength/in-degree, on
    absolute weights rescaled to shares - and takes the smaller p-value.
    Ties break toward larger magnitude, then (source, target) order.
    """
    if g.n_edges == 0:
        raise ValueError("empty graph")
    if a < 0.0:
        raise ValueError("a must be >= 0")
    absw = np.abs(g.weights)
    out_strength = np.bincount(g.sources, weights=absw, minlength=g.n_nodes)
    in_strength = np.bincount(g.targets, weights=absw, minlength=g.n_nodes)
    out_degree = np.bincount(g.sources, minlength=g.n_nodes).astype(np.float64)
    in_degree = np.bincount(g.targets, minlength=g.n_nodes).astype(np.float64)

    p_src = _endpoint_pvalues(absw, out_strength[g.sources], out_degree[g.sources], a)
    p_tgt = _endpoint_pvalues(absw, in_strength[g.targets], in_degree[g.targets], a)
    p = np.minimum(p_src, p_tgt)

    kept, last = _rank_and_keep((g.targets, g.sources, -absw, p), g.n_edges,
                                retain_fraction)
    return FilterResult(p_values=p, kept=kept, threshold_used=float(p[last]),
                        method="polya")


def _endpoint_pvalues(absw, strength, degree, a):
    # Weights enter as shares of the endpoint strength scaled to its degree,
    # so multiplying a node's weights by a constant cannot move its p-values.
    shares = np.zeros_like(absw)
    pos = strength > 0.0
    shares[pos] = np.minimum(absw[pos] / strength[pos], 1.0) * degree[pos]
    return _survival(shares, degree, degree, a)


def hard_threshold_filter(g: WeightedDigraph, retain_fraction: float) -> FilterResult:
    """Keep the ``retain_fraction`` of edges with the largest magnitudes;
    ties break by (source, target) order.  P-values are not defined for this
    method and are reported as NaN."""
    if g.n_edges == 0:
        raise ValueError("empty graph")
    absw = np.abs(g.weights)
    kept, last = _rank_and_keep((g.targets, g.sources, -absw), g.n_edges,
                                retain_fraction)
    return FilterResult(
        p_values=np.full(g.n_edges, np.nan),
        kept=kept,
        threshold_used=float(absw[last]),
        method="hard_threshold",
    )
