"""Closed-form IRM analysis of LRU and the selection policy.

Cache states are ordered tuples of distinct 1-based content ids. Under
the independent reference model both policies share the product-form
stationary law

    pi(s) = prod_i q[s_i] / (1 - sum_{j<i} q[s_j])

LRU reaches it through move-to-front dynamics; the selection policy
through the order in which the first ``c`` distinct contents show up.
:func:`lru_stationary_oracle` recomputes the LRU law from the Markov
chain itself and :func:`simulate_irm_hit_ratio` measures both policies.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from selcache.replacement import LRUCache
from selcache.selection import Phase, SelectionCache, SelResult
from selcache.traffic import sample_contents

ENUMERATION_LIMIT = 10
ORACLE_MAX_N = 7
ORACLE_MAX_C = 3


def zipf_popularity(alpha: float, n: int) -> np.ndarray:
    """Zipf(alpha, n) probabilities for ranks 1..n."""
    if n < 1:
        raise ValueError("catalog size must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    w = np.arange(1, n + 1, dtype=float) ** -float(alpha)
    return w / w.sum()


def check_popularity(q: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("popularity must be a non-empty vector")
    if np.any(q < 0):
        raise ValueError("popularity entries must be non-negative")
    if abs(q.sum() - 1.0) > tol:
        raise ValueError(f"popularity sums to {q.sum()!r}, not 1")
    if np.any(np.diff(q) > 0):
        raise ValueError("popularity must be sorted non-increasing")
    return q


def _check_sigma(q, sigma) -> None:
    if len(set(sigma)) != len(sigma):
        raise ValueError(f"cache vector {sigma} has repeated contents")
    if len(sigma) > len(q):
        raise ValueError("cache vector longer than the catalog")
    for s in sigma:
        if not 1 <= s <= len(q):
            raise ValueError(f"content {s} outside 1..{len(q)}")


def _product_form(q, sigma) -> float:
    prob = 1.0
    used = 0.0
    for s in sigma:
        qs = q[s - 1]
        prob *= qs / (1.0 - used)
        used += qs
    return prob


def pi_lru(q: Sequence[float], sigma: Sequence[int]) -> float:
    """Stationary probability of LRU state ``sigma`` (most recent first)."""
    _check_sigma(q, sigma)
    return _product_form(q, sigma)


def pi_sel(q: Sequence[float], sigma: Sequence[int]) -> float:
    """Probability that a frozen selection cache holds ``sigma``.

    Slot ``i`` holds the ``i``-th distinct content seen after selection
    starts; each factor is the chance that the next new content is
    ``sigma[i]`` given the earlier ones, i.e. ``q`` renormalised over the
    contents not selected yet.
    """
    _check_sigma(q, sigma)
    prob = 1.0
    chosen: set[int] = set()
    for s in sigma:
        remaining = sum(q[j] for j in range(len(q)) if j + 1 not in chosen)
        prob *= q[s - 1] / remaining
        chosen.add(s)
    return prob


def cache_states(n: int, c: int):
    return itertools.permutations(range(1, n + 1), c)


def residency_probabilities(q: Sequence[float], c: int, policy: str = "LRU") -> np.ndarray:
    """P(content i is cached) for every i, by full state enumeration."""
    q = np.asarray(q, dtype=float)
    n = len(q)
    if c > n:
        raise ValueError("cache larger than the catalog")
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration refused for n={n} > {ENUMERATION_LIMIT}")
    pi = _policy_pi(policy)
    res = np.zeros(n)
    for sigma in cache_states(n, c):
        p = pi(q, sigma)
        for s in sigma:
            res[s - 1] += p
    return res


def _policy_pi(policy: str):
    policy = policy.upper()
    if policy == "LRU":
        return pi_lru
    if policy == "SEL":
        return pi_sel
    raise ValueError(f"unknown policy {policy!r}")


def hit_ratio_closed_form(q: Sequence[float], c: int, policy: str = "LRU") -> float:
    """h = sum_i q_i * P(i cached), enumerating all ordered c-tuples."""
    q = np.asarray(q, dtype=float)
    if c < 0:
        raise ValueError("capacity must be >= 0")
    if c == 0:
        return 0.0
    return float(q @ residency_probabilities(q, c, policy))


def lru_stationary_oracle(q: Sequence[float], c: int, tol: float = 1e-12,
                          max_iter: int = 1_000_000) -> dict[tuple[int, ...], float]:
    """Stationary law of the LRU move-to-front chain by power iteration.

    States are full caches (ordered c-tuples, most recent first). A
    request for a cached content moves it to the front; any other request
    pushes it in front and drops the last entry.
    """
    q = np.asarray(q, dtype=float)
    n = len(q)
    if n > ORACLE_MAX_N or c > ORACLE_MAX_C:
        raise ValueError(f"oracle limited to n <= {ORACLE_MAX_N}, c <= {ORACLE_MAX_C}")
    if not 1 <= c <= n:
        raise ValueError("need 1 <= c <= n")
    states = list(cache_states(n, c))
    index = {s: k for k, s in enumerate(states)}
    m = len(states)
    P = np.zeros((m, m))
    for k, s in enumerate(states):
        for j in range(1, n + 1):
            if j in s:
                nxt = (j,) + tuple(x for x in s if x != j)
            else:
                nxt = (j,) + s[:-1]
            P[k, index[nxt]] += q[j - 1]
    pi = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        new = pi @ P
        new /= new.sum()
        resid = np.abs(new - pi).sum()
        pi = new
        if resid < tol:
            break
    else:
        raise RuntimeError(f"power iteration did not converge: residual {resid:.3e}")
    return {s: float(pi[k]) for k, s in enumerate(states)}


def oracle_hit_ratio(q: Sequence[float], c: int) -> float:
    q = np.asarray(q, dtype=float)
    dist = lru_stationary_oracle(q, c)
    return float(sum(p * sum(q[s - 1] for s in sigma) for sigma, p in dist.items()))


def simulate_irm_hit_ratio(q: Sequence[float], c: int, policy: str, requests: int, seed: int,
                           frozen_period: int | None = None) -> float:
    """Measured hit ratio of one cache fed i.i.d. requests drawn from ``q``.

    For SEL the clock advances one unit per request, ``frozen_period``
    (default ``10 * c``) is in requests, and only requests arriving in
    frozen phases are counted.
    """
    q = np.asarray(q, dtype=float)
    if c == 0 or requests == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    stream = sample_contents(q, requests, rng).tolist()
    policy = policy.upper()
    if policy == "LRU":
        cache = LRUCache(c)
        hits = 0
        lookup = cache.lookup
        insert = cache.insert
        for x in stream:
            if lookup(x):
                hits += 1
            else:
                insert(x)
        return hits / requests
    if policy == "SEL":
        period = frozen_period if frozen_period is not None else 10 * c
        sel = SelectionCache(c, frozen_period=period)
        hits = counted = 0
        for t, x in enumerate(stream):
            if sel.phase is Phase.FROZEN:
                if t >= sel.frozen_until:
                    sel.on_timer(t)
                else:
                    counted += 1
                    if x in sel.resident:
                        hits += 1
                    continue
            if sel.on_request(x, t) is SelResult.MISS_AND_FETCH:
                sel.on_data(x)
        return hits / counted if counted else 0.0
    raise ValueError(f"unknown policy {policy!r}")
