"""Event-driven simulation of the contact process on ``Omega_N^n``.

Events are proposed at the dominating rate
``|I| (delta + (1 - 1/N) sum_{k<=n} alpha_k)``: a uniformly chosen infected
source either recovers or fires an infection arrow at a uniformly chosen
site at a distance drawn proportionally to ``alpha_k``.  An arrow hitting an
infected site does nothing.  Because every site has exactly
``N^(k-1)(N-1)`` partners at distance ``k``, this reproduces the pair rates
``alpha_k N^-k`` exactly.

Randomness: each trajectory owns a ``random.Random`` (Mersenne Twister)
seeded from ``numpy.random.SeedSequence(seed, spawn_key=(replica,))``, so
replica streams do not depend on the order in which replicas run.
"""
from __future__ import annotations

import bisect
import csv
import json
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import accumulate

import numpy as np

from .lattice import RateModel, index_hdist

__all__ = [
    "SparseConfig",
    "SimResult",
    "origin_config",
    "make_rng",
    "run_trajectory",
    "estimate_survival",
    "first_jump_distribution",
    "sample_first_jump",
    "first_jump_counts",
    "coupled_delta_paths",
    "write_trajectory_csv",
    "write_jsonl",
]


@dataclass
class SparseConfig:
    """Finite configuration on ``Omega_N^n`` stored by its infected flat indices."""

    n: int
    N: int = 2
    infected: set = field(default_factory=set)

    def __post_init__(self):
        self.infected = set(int(i) for i in self.infected)
        size = self.N ** self.n
        if any(i < 0 or i >= size for i in self.infected):
            raise ValueError(f"site index outside Omega^{self.n} (size {size})")

    @property
    def count(self) -> int:
        return len(self.infected)

    @property
    def size(self) -> int:
        return self.N ** self.n

    def to_bits(self) -> int:
        out = 0
        for i in self.infected:
            out |= 1 << i
        return out

    @classmethod
    def from_bits(cls, bits: int, n: int, N: int = 2) -> "SparseConfig":
        return cls(n, N, {i for i in range(N ** n) if (bits >> i) & 1})

    def to_json(self) -> dict:
        return {"n": self.n, "N": self.N, "infected": sorted(self.infected)}


def origin_config(n: int, N: int = 2) -> SparseConfig:
    return SparseConfig(n, N, {0})


@dataclass
class SimResult:
    survived_to_t: bool
    extinction_time: float | None
    final_infected_count: int
    event_count: int
    seed: int
    wall_time: float
    replica: int | None = None
    t_max: float = 0.0
    final_sites: tuple = ()
    events: list | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("events")
        return d


def make_rng(seed: int, replica: int | None = None) -> random.Random:
    ss = np.random.SeedSequence(seed) if replica is None else np.random.SeedSequence(seed, spawn_key=(replica,))
    return random.Random(int.from_bytes(ss.generate_state(4, dtype=np.uint32).tobytes(), "little"))


class _Sampler:
    """Per-model constants for the thinning sampler."""

    def __init__(self, model: RateModel, n: int):
        self.N, self.n, self.delta = model.N, n, model.delta
        alphas = [model.alpha.value(k) for k in range(1, n + 1)]
        self.cum = list(accumulate(alphas))
        self.alpha_sum = self.cum[-1] if alphas else 0.0
        self.inf_rate = (1.0 - 1.0 / self.N) * self.alpha_sum
        self.per_site = self.delta + self.inf_rate
        self.p_recover = self.delta / self.per_site if self.per_site > 0 else 1.0

    def distance(self, rng) -> int:
        u = rng.random() * self.alpha_sum
        k = bisect.bisect_right(self.cum, u) + 1
        return min(k, self.n)

    def target(self, src: int, k: int, rng) -> int:
        """Uniform site at hierarchical distance exactly ``k`` from ``src``."""
        N = self.N
        if N == 2:
            low = rng.getrandbits(k - 1) if k > 1 else 0
            return src ^ (low | (1 << (k - 1)))
        out, rest, p = 0, src, 1
        for level in range(self.n):
            d = rest % N
            rest //= N
            if level < k - 1:
                d = (d + rng.randrange(N)) % N
            elif level == k - 1:
                d = (d + 1 + rng.randrange(N - 1)) % N
            out += d * p
            p *= N
        return out


class _InfectedSet:
    """Infected sites as a list plus position map: O(1) add, remove, uniform pick."""

    __slots__ = ("items", "pos")

    def __init__(self, sites=()):
        self.items = []
        self.pos = {}
        for s in sites:
            self.add(s)

    def __len__(self):
        return len(self.items)

    def __contains__(self, s):
        return s in self.pos

    def add(self, s):
        if s not in self.pos:
            self.pos[s] = len(self.items)
            self.items.append(s)

    def remove(self, s):
        i = self.pos.pop(s)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def pick(self, rng):
        return self.items[int(rng.random() * len(self.items))]


def _check_init(model: RateModel, n: int, init: SparseConfig):
    if init.N != model.N or init.n != n:
        raise ValueError(f"initial configuration lives on Omega_{init.N}^{init.n}, "
                         f"model needs Omega_{model.N}^{n}")


def run_trajectory(model: RateModel, n: int, init: SparseConfig, t_max: float, seed: int,
                   replica: int | None = None, record: bool = False) -> SimResult:
    """Simulate one path up to ``t_max`` or extinction.

    With ``record=True`` the effective events are kept as tuples
    ``(t, event_type, site_index, infected_count)``.
    """
    if not t_max >= 0:
        raise ValueError("t_max must be >= 0")
    _check_init(model, n, init)
    start = time.perf_counter()
    rng = make_rng(seed, replica)
    smp = _Sampler(model, n)
    inf = _InfectedSet(sorted(init.infected))
    events = [] if record else None
    if not len(inf):
        return SimResult(False, 0.0, 0, 0, seed, time.perf_counter() - start, replica, t_max, (), events)
    t, count = 0.0, 0
    while True:
        t += rng.expovariate(len(inf) * smp.per_site)
        if t > t_max:
            return SimResult(True, None, len(inf), count, seed, time.perf_counter() - start,
                             replica, t_max, tuple(sorted(inf.items)), events)
        src = inf.pick(rng)
        if rng.random() < smp.p_recover:
            inf.remove(src)
            count += 1
            if record:
                events.append((t, "recover", src, len(inf)))
            if not len(inf):
                return SimResult(False, t, 0, count, seed, time.perf_counter() - start,
                                 replica, t_max, (), events)
        else:
            tgt = smp.target(src, smp.distance(rng), rng)
            if tgt not in inf:
                inf.add(tgt)
                count += 1
                if record:
                    events.append((t, "infect", tgt, len(inf)))


def _survival_chunk(args):
    model, n, init, t, seed, lo, hi = args
    return [run_trajectory(model, n, init, t, seed, r).survived_to_t for r in range(lo, hi)]


def estimate_survival(model: RateModel, n: int, init: SparseConfig, t: float, replicas: int,
                      seed: int, workers: int = 1) -> dict:
    """Fraction of replicas with a nonempty configuration at time ``t`` and its
    binomial standard error.  Replica ``r`` always uses stream ``(seed, r)``."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if workers > 1:
        step = math.ceil(replicas / workers)
        chunks = [(model, n, init, t, seed, lo, min(lo + step, replicas)) for lo in range(0, replicas, step)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            flags = [s for part in ex.map(_survival_chunk, chunks) for s in part]
    else:
        flags = _survival_chunk((model, n, init, t, seed, 0, replicas))
    k = sum(flags)
    p = k / replicas
    return {"p_hat": p, "stderr": math.sqrt(p * (1.0 - p) / replicas), "survivors": k,
            "replicas": replicas, "t": t, "n": n, "seed": seed}


def first_jump_distribution(model: RateModel, n: int, config: SparseConfig) -> dict:
    """Exact rate of every transition out of ``config``, by a double loop over
    sites.  Keys are ``("recover", i)`` and ``("infect", i)``."""
    _check_init(model, n, config)
    size = model.N ** n
    if size > 4096:
        raise ValueError("exact enumeration limited to 4096 sites")
    table = {}
    for i in sorted(config.infected):
        table[("recover", i)] = model.delta
    for i in range(size):
        if i in config.infected:
            continue
        rate = 0.0
        for j in config.infected:
            k = index_hdist(i, j, model.N)
            rate += model.alpha.value(k) * model.N ** (-k)
        if rate > 0:
            table[("infect", i)] = rate
    return table


def sample_first_jump(model: RateModel, n: int, config: SparseConfig, rng,
                      smp: _Sampler | None = None, inf: _InfectedSet | None = None):
    """First effective transition produced by the thinning sampler."""
    smp = smp or _Sampler(model, n)
    inf = inf or _InfectedSet(sorted(config.infected))
    if not len(inf):
        return None
    while True:
        src = inf.pick(rng)
        if rng.random() < smp.p_recover:
            return ("recover", src)
        tgt = smp.target(src, smp.distance(rng), rng)
        if tgt not in inf:
            return ("infect", tgt)


def first_jump_counts(model: RateModel, n: int, config: SparseConfig, draws: int, seed: int) -> dict:
    rng = make_rng(seed)
    smp = _Sampler(model, n)
    inf = _InfectedSet(sorted(config.infected))
    counts: dict = {}
    for _ in range(draws):
        ev = sample_first_jump(model, n, config, rng, smp, inf)
        counts[ev] = counts.get(ev, 0) + 1
    return counts


def coupled_delta_paths(model: RateModel, deltas, n: int, init: SparseConfig, max_events: int,
                        seed: int) -> list[list[frozenset]]:
    """Graphical construction shared by several recovery rates.

    Recovery marks arrive at rate ``max(deltas)`` per site and carry a
    uniform label ``u``; the copy with rate ``d`` obeys a mark iff
    ``u * max(deltas) < d``.  Infection arrows are common to all copies.
    Events are proposed from sites infected in at least one copy.  Returns,
    for every copy, the infected set after each proposed event.
    """
    _check_init(model, n, init)
    deltas = [float(d) for d in deltas]
    dmax = max(deltas)
    smp = _Sampler(RateModel(model.N, dmax, model.alpha), n)
    rng = make_rng(seed)
    copies = [set(init.infected) for _ in deltas]
    union = _InfectedSet(sorted(init.infected))
    paths = [[frozenset(c)] for c in copies]
    for _ in range(max_events):
        if not len(union):
            break
        src = union.pick(rng)
        if rng.random() < smp.p_recover:
            u = rng.random() * dmax
            for d, c in zip(deltas, copies):
                if u < d:
                    c.discard(src)
        else:
            tgt = smp.target(src, smp.distance(rng), rng)
            for c in copies:
                if src in c:
                    c.add(tgt)
        new_union = set().union(*copies)
        for s in list(union.items):
            if s not in new_union:
                union.remove(s)
        for s in new_union:
            union.add(s)
        for p, c in zip(paths, copies):
            p.append(frozenset(c))
    return paths


def write_trajectory_csv(path, events) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "event_type", "site_index", "infected_count"])
        for row in events:
            w.writerow([repr(row[0]), row[1], row[2], row[3]])


def write_jsonl(fh, records) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
