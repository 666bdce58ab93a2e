"""Semi-Markov path simulation, entirely-random censoring, dataset I/O.

Next-jump times are sampled by thinning: candidate epochs arrive at the
state's total intensity bound and are accepted with probability equal to
the ratio of the actual total intensity at the candidate (time, duration)
to the bound; the destination is then drawn among the exit channels in
proportion to their intensities.  Each path owns an independent RNG
stream derived from the master seed and the path id, so path ``i`` is
reproducible regardless of how many other paths are drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Hazard",
    "HazardSet",
    "StatePath",
    "CensoredObservation",
    "simulate_path",
    "simulate_paths",
    "censor",
    "draw_censoring_times",
    "write_dataset",
    "read_dataset",
    "path_rng",
]


@dataclass(frozen=True)
class Hazard:
    """Intensity ``rate(t, u)`` of time and duration-in-state, with a finite bound."""

    rate: object
    bound: float

    def __post_init__(self):
        if not (math.isfinite(self.bound) and self.bound >= 0.0):
            raise ValueError("hazard bound must be finite and nonnegative")


class HazardSet:
    """Mapping from ordered state pairs ``(j, k)`` to transition hazards."""

    def __init__(self, rates: dict):
        self.rates = dict(rates)
        self._exits = {}
        for (j, k), hz in self.rates.items():
            if not isinstance(hz, Hazard):
                raise TypeError("hazard entries must be Hazard instances")
            self._exits.setdefault(j, []).append((k, hz))

    def exits(self, j):
        return self._exits.get(j, [])

    def total_bound(self, j) -> float:
        return sum(hz.bound for _, hz in self.exits(j))

    def pairs(self):
        return list(self.rates.keys())


@dataclass
class StatePath:
    """Jump trajectory: visited states (starting at the initial one) and jump times."""

    times: np.ndarray
    states: list
    absorption_time: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.states) != self.times.size + 1:
            raise ValueError("states must have one more entry than jump times")
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise ValueError("jump times must be strictly increasing")

    def state_at(self, t: float):
        """State occupied at time ``t`` (cadlag)."""
        idx = int(np.searchsorted(self.times, t, side="right"))
        return self.states[idx]


@dataclass
class CensoredObservation:
    """Path truncated at the censoring time ``R``, which is always recorded.

    ``absorbed`` flags whether absorption happened at or before ``R``; it is
    ``None`` for observations read back from disk without a model.
    """

    times: np.ndarray
    froms: list
    tos: list
    censor_time: float
    state_at_censor: object
    absorbed: bool | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if not self.censor_time > 0:
            raise ValueError("censoring time must be positive")
        if self.times.size and self.times[-1] > self.censor_time:
            raise ValueError("observation has a jump after its censoring time")

    @property
    def n_jumps(self) -> int:
        return int(self.times.size)

    def initial_state(self):
        return self.froms[0] if self.froms else self.state_at_censor

    def state_at(self, t: float):
        idx = int(np.searchsorted(self.times, t, side="right"))
        if idx == 0:
            return self.initial_state()
        return self.tos[idx - 1]

    def exercise(self, post_states) -> tuple | None:
        """First jump into the post-exercise block, as ``(time, from, to)``."""
        for t, j, k in zip(self.times, self.froms, self.tos):
            if k in post_states and j not in post_states:
                return float(t), j, k
        return None


def path_rng(master_seed: int, path_id: int) -> np.random.Generator:
    """Independent per-path generator derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(path_id,)))


def simulate_path(hazards: HazardSet, z0, horizon: float, rng) -> StatePath:
    """Sample one trajectory on ``[0, horizon]`` by thinning.

    ``rng`` is either a Generator or an integer seed.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    times = []
    states = [z0]
    state = z0
    t = 0.0
    entered = 0.0
    absorption = math.inf
    while True:
        exits = hazards.exits(state)
        if not exits:
            absorption = entered
            break
        bound = sum(hz.bound for _, hz in exits)
        if bound <= 0.0:
            break
        accepted = False
        while t < horizon:
            t += rng.exponential(1.0 / bound)
            if t >= horizon:
                break
            u = t - entered
            rates = [hz.rate(t, u) for _, hz in exits]
            total = sum(rates)
            if total > bound * (1.0 + 1e-12):
                raise ValueError("hazard exceeds its declared bound")
            if total > 0.0 and rng.uniform() * bound <= total:
                pick = rng.uniform() * total
                acc = 0.0
                for (dest, _), r in zip(exits, rates):
                    acc += r
                    if pick <= acc:
                        state = dest
                        break
                times.append(t)
                states.append(state)
                entered = t
                accepted = True
                break
        if not accepted:
            break
    return StatePath(np.array(times), states, absorption)


def simulate_paths(hazards: HazardSet, z0, horizon: float, n: int, master_seed: int):
    """Simulate ``n`` independent paths with per-path derived seeds."""
    return [
        simulate_path(hazards, z0, horizon, path_rng(master_seed, i)) for i in range(n)
    ]


def censor(path: StatePath, R: float) -> CensoredObservation:
    """Truncate a path at ``R``; a jump at exactly ``R`` is kept (jump-first rule)."""
    keep = path.times <= R
    times = path.times[keep]
    froms = [path.states[i] for i in range(len(path.times)) if keep[i]]
    tos = [path.states[i + 1] for i in range(len(path.times)) if keep[i]]
    state_at_R = tos[-1] if tos else path.states[0]
    return CensoredObservation(
        times=times,
        froms=froms,
        tos=tos,
        censor_time=float(R),
        state_at_censor=state_at_R,
        absorbed=bool(path.absorption_time <= R),
    )


def draw_censoring_times(n: int, spec: str, master_seed: int) -> np.ndarray:
    """Censoring times for ``n`` individuals: ``unif:a,b`` or ``none``.

    Drawn from a stream independent of the path streams.
    """
    if spec == "none":
        return np.full(n, math.inf)
    if spec.startswith("unif:"):
        a, b = (float(x) for x in spec[5:].split(","))
        rng = np.random.default_rng(
            np.random.SeedSequence(master_seed, spawn_key=(0xC0FFEE,))
        )
        return rng.uniform(a, b, size=n)
    raise ValueError(f"unknown censoring spec: {spec}")


_CENSOR_TOKEN = "CENSOR"


def write_dataset(observations, path) -> None:
    """Line-oriented dataset: ``id,event_time,from_state,to_state`` records.

    Each individual contributes one row per observed jump plus a terminal
    row carrying the censoring time with ``to_state = CENSOR``.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,event_time,from_state,to_state\n")
        for i, obs in enumerate(observations):
            for t, j, k in zip(obs.times, obs.froms, obs.tos):
                fh.write(f"{i},{t!r},{j},{k}\n")
            fh.write(f"{i},{obs.censor_time!r},{obs.state_at_censor},{_CENSOR_TOKEN}\n")


def _coerce_label(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def read_dataset(path, state_space=None):
    """Read observations written by :func:`write_dataset`.

    If ``state_space`` is given, the ``absorbed`` flag is reconstructed
    from its absorbing set; otherwise it stays ``None``.
    """
    per_id: dict[int, dict] = {}
    order: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "id,event_time,from_state,to_state":
            raise ValueError("malformed dataset header at line 1")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"malformed dataset line {lineno}: {line!r}")
            try:
                ident = int(parts[0])
                t = float(parts[1])
            except ValueError as exc:
                raise ValueError(f"malformed dataset line {lineno}: {line!r}") from exc
            if ident not in per_id:
                per_id[ident] = {"times": [], "froms": [], "tos": [], "censor": None}
                order.append(ident)
            rec = per_id[ident]
            if parts[3] == _CENSOR_TOKEN:
                rec["censor"] = (t, _coerce_label(parts[2]))
            else:
                rec["times"].append(t)
                rec["froms"].append(_coerce_label(parts[2]))
                rec["tos"].append(_coerce_label(parts[3]))
    observations = []
    for ident in order:
        rec = per_id[ident]
        if rec["censor"] is None:
            raise ValueError(f"individual {ident} has no terminal record")
        R, state_at_R = rec["censor"]
        absorbed = None
        if state_space is not None:
            absorbed = state_at_R in state_space.absorbing
        observations.append(
            CensoredObservation(
                times=np.array(rec["times"]),
                froms=rec["froms"],
                tos=rec["tos"],
                censor_time=R,
                state_at_censor=state_at_R,
                absorbed=absorbed,
            )
        )
    return observations
