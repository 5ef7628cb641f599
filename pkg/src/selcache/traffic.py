"""Workload synthesis: Zipf popularity, Poisson content requests, CBR packets."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from selcache.model import ContentId, PacketId


@dataclass(frozen=True)
class TrafficProfile:
    """Demand for one catalog (one producer's contents), per consumer group.

    ``catalog`` holds global content ids; popularity is Zipf(alpha) over
    their rank inside the catalog.
    """

    alpha: float
    catalog: range
    content_rate: float
    mean_size: float = 100.0
    cbr_rate: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.content_rate <= 0:
            raise ValueError("content_rate must be positive")
        if self.mean_size < 1:
            raise ValueError("mean_size must be >= 1")
        if self.cbr_rate <= 0:
            raise ValueError("cbr_rate must be positive")
        if len(self.catalog) == 0 or self.catalog.start < 1 or self.catalog.step != 1:
            raise ValueError("catalog must be a non-empty contiguous range of ids >= 1")

    def popularity(self) -> np.ndarray:
        from selcache.irm import zipf_popularity

        return zipf_popularity(self.alpha, len(self.catalog))


@dataclass(frozen=True)
class WorkloadEvent:
    time: float
    group: int
    packet: PacketId


def sample_contents(q: Sequence[float], size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws of 1-based content ids."""
    cdf = np.cumsum(np.asarray(q, dtype=float))
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right") + 1


def sample_content(q: Sequence[float], rng: np.random.Generator) -> ContentId:
    return int(sample_contents(q, 1, rng)[0])


def sample_content_size(mean_size: float, rng: np.random.Generator, size=None):
    """Geometric packet count on {1, 2, ...} with mean ``mean_size``."""
    if mean_size < 1:
        raise ValueError("mean_size must be >= 1")
    return rng.geometric(1.0 / mean_size, size)


def sample_catalog_sizes(profiles: Sequence[TrafficProfile], seed: int) -> np.ndarray:
    """One fixed size per content id; entry ``k`` is content ``k + 1``."""
    n = max(p.catalog.stop - 1 for p in profiles)
    sizes = np.zeros(n, dtype=np.int64)
    for k, p in enumerate(profiles):
        rng = np.random.default_rng([seed, 7, k])
        sizes[p.catalog.start - 1:p.catalog.stop - 1] = sample_content_size(p.mean_size, rng, len(p.catalog))
    if np.any(sizes < 1):
        raise ValueError("profiles leave gaps in the content id space")
    return sizes


class Workload:
    """Time-sorted packet-request stream held as parallel arrays."""

    def __init__(self, time, group, content, index, n_content_requests: int = 0):
        self.time = np.asarray(time, dtype=float)
        self.group = np.asarray(group, dtype=np.int64)
        self.content = np.asarray(content, dtype=np.int64)
        self.index = np.asarray(index, dtype=np.int64)
        self.n_content_requests = n_content_requests

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[WorkloadEvent]:
        for t, g, c, i in zip(self.time.tolist(), self.group.tolist(),
                              self.content.tolist(), self.index.tolist()):
            yield WorkloadEvent(t, g, PacketId(c, i))

    @classmethod
    def merge(cls, parts: Sequence["Workload"]) -> "Workload":
        if not parts:
            return cls([], [], [], [])
        t = np.concatenate([p.time for p in parts])
        g = np.concatenate([p.group for p in parts])
        c = np.concatenate([p.content for p in parts])
        i = np.concatenate([p.index for p in parts])
        order = np.lexsort((i, c, g, t))
        return cls(t[order], g[order], c[order], i[order],
                   sum(p.n_content_requests for p in parts))

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# time group content index\n")
            for t, g, c, i in zip(self.time.tolist(), self.group.tolist(),
                                  self.content.tolist(), self.index.tolist()):
                fh.write(f"{t!r} {g} {c} {i}\n")

    @classmethod
    def read_trace(cls, path) -> "Workload":
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t, g, c, i = line.split()
            rows.append((float(t), int(g), int(c), int(i)))
        if not rows:
            return cls([], [], [], [])
        t, g, c, i = zip(*rows)
        return cls(t, g, c, i)


def generate_workload(profile: TrafficProfile, groups: Sequence[int], duration: float,
                      sizes: Sequence[int] | None = None, *, stream: int = 0) -> Workload:
    """Packet requests of every group for one catalog over ``[0, duration)``.

    Each group issues content requests as a Poisson process; a request for
    a content of ``S`` packets emits packets 1..S spaced ``1/cbr_rate``
    apart from the request epoch. Packets falling at or after ``duration``
    are dropped. ``sizes[k]`` is the size of content ``k + 1``.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if sizes is None:
        sizes = sample_catalog_sizes([profile], profile.seed)
    sizes = np.asarray(sizes, dtype=np.int64)
    q = profile.popularity()
    parts = []
    n_req = 0
    for gi, g in enumerate(groups):
        rng = np.random.default_rng([profile.seed, stream, gi])
        count = rng.poisson(profile.content_rate * duration)
        epochs = np.sort(rng.uniform(0.0, duration, count))
        contents = profile.catalog.start - 1 + sample_contents(q, count, rng)
        n_req += int(count)
        s = sizes[contents - 1]
        rep_t = np.repeat(epochs, s)
        rep_c = np.repeat(contents, s)
        starts = np.repeat(np.cumsum(s) - s, s)
        idx = np.arange(len(rep_t)) - starts + 1
        t = rep_t + (idx - 1) / profile.cbr_rate
        keep = t < duration
        parts.append(Workload(t[keep], np.full(int(keep.sum()), g), rep_c[keep], idx[keep], int(count)))
    return Workload.merge(parts)
