"""Model configuration: state space, payments, scaling, and the technical basis.

A model couples four ingredients: a finite state space split into pre-
and post-exercise blocks, transition hazards for simulation, a scaled
payment stream, and the first-order (technical) basis from which the
surrender values and the post-exercise scaling factor derive.  Models
are declared in a single YAML file (see ``configs/freepolicy6.yaml``)
or taken from the built-in preset of the six-state free-policy example.

Sign conventions.  Payment streams are benefits-less-premiums, so the
annual premium enters sojourn rates negatively.  The inception lump of
the example stream is ``+100000`` (as displayed with the contract), while
actuarial equivalence on the technical basis is the statement that the
prospective reserve at time 0 equals the initial premium, i.e. the
inception lump signed as a premium plus ``V*(0)`` vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import simulate as _sim

__all__ = [
    "StateSpace",
    "SojournPayment",
    "PaymentSpec",
    "TechnicalBasis",
    "ModelConfig",
    "load_model",
    "freepolicy6",
    "CEMETERY",
]

LN10 = math.log(10.0)

#: Label of the artificial cemetery state used by the change-of-measure comparator.
CEMETERY = "nabla"


class StateSpace:
    """Finite label set with a pre/post-exercise partition.

    The post-exercise block is absorbing as a set: transitions from it
    back into the pre-exercise block are structurally forbidden.
    """

    def __init__(self, states, pre_states, post_states, initial, absorbing=()):
        self.states = tuple(states)
        self.pre = frozenset(pre_states)
        self.post = frozenset(post_states)
        self.initial = initial
        self.absorbing = frozenset(absorbing)
        if self.pre | self.post != set(self.states) or (self.pre & self.post):
            raise ValueError("pre/post blocks must partition the state set")
        if initial not in self.pre:
            raise ValueError("initial state must be pre-exercise")
        if not self.absorbing <= set(self.states):
            raise ValueError("absorbing states must belong to the state set")
        self.index = {s: i for i, s in enumerate(self.states)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    def is_post(self, label) -> bool:
        return label in self.post

    def post_indices(self) -> np.ndarray:
        return np.array(sorted(self.index[s] for s in self.post), dtype=np.int64)

    def pre_indices(self) -> np.ndarray:
        return np.array(sorted(self.index[s] for s in self.pre), dtype=np.int64)

    def allows(self, j, k) -> bool:
        """Whether a j -> k transition respects the absorbing structure."""
        if j in self.absorbing:
            return False
        return not (j in self.post and k in self.pre)

    def with_cemetery(self) -> "StateSpace":
        """State space extended by the cemetery state (post-exercise, absorbing)."""
        return StateSpace(
            self.states + (CEMETERY,),
            self.pre,
            self.post | {CEMETERY},
            self.initial,
            self.absorbing | {CEMETERY},
        )


@dataclass(frozen=True)
class SojournPayment:
    """Signed sojourn measure: piecewise-constant rate segments plus lump sums.

    ``segments`` is a sequence of ``(start, end, rate)`` with disjoint
    intervals; ``lumps`` a sequence of ``(time, amount)``.
    """

    segments: tuple = ()
    lumps: tuple = ()

    def mass(self, a: float, b: float) -> float:
        """Measure of the half-open interval ``(a, b]`` (exact, no quadrature)."""
        if b <= a:
            return 0.0
        total = 0.0
        for (s, e, r) in self.segments:
            lo, hi = max(a, s), min(b, e)
            if hi > lo:
                total += r * (hi - lo)
        for (t, amount) in self.lumps:
            if a < t <= b:
                total += amount
        return total

    def masses(self, knots: np.ndarray) -> np.ndarray:
        """Masses of consecutive cells ``(knots[m-1], knots[m]]``; index 0 is 0."""
        out = np.zeros(len(knots))
        for (s, e, r) in self.segments:
            clipped = np.clip(knots, s, e)
            out[1:] += r * np.diff(clipped)
        for (t, amount) in self.lumps:
            m = int(np.searchsorted(knots, t, side="left"))
            if 1 <= m < len(knots):
                out[m] += amount
        return out


def _zero_payment(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@dataclass
class PaymentSpec:
    """Scaled payment stream: inception lump, sojourn measures, transition
    payments and the scaling factor applied after option exercise.

    ``transition`` maps ordered label pairs to vectorized payment functions,
    ``scaling`` is the deterministic factor ``rho(t, j, k)`` locked in at the
    exercise time; it must be nonnegative and bounded on the horizon.
    """

    b0: float = 0.0
    sojourn: dict = field(default_factory=dict)
    transition: dict = field(default_factory=dict)
    scaling: object = None
    scaling_bound: float = 1.0

    def __post_init__(self):
        if self.scaling is None:
            self.scaling = lambda t, j, k: np.ones_like(np.asarray(t, dtype=float))
            self.scaling_bound = 1.0
        if not (np.isfinite(self.scaling_bound) and self.scaling_bound >= 0):
            raise ValueError("scaling factor must be bounded on the horizon")

    def rho(self, t, j, k):
        out = np.asarray(self.scaling(t, j, k), dtype=float)
        if np.any(out < 0.0):
            raise ValueError("scaling factor must be nonnegative")
        return out

    def sojourn_payment(self, j) -> SojournPayment:
        return self.sojourn.get(j, SojournPayment())

    def transition_payment(self, j, k):
        return self.transition.get((j, k), _zero_payment)


class TechnicalBasis:
    """Survival-model first-order basis: Makeham mortality, constant interest.

    Mortality is ``mu(t) = a + 10**(b + c * (t + age_offset))`` in policy
    time ``t``.  All reserve integrals use the cached cumulative trapezoid
    of the discounted survival function on a uniform grid of step
    ``quadrature_step`` (default 1/512 year) up to the terminal time.
    """

    def __init__(
        self,
        mortality_a: float = 0.0005,
        mortality_b: float = 5.728 - 10.0,
        mortality_c: float = 0.038,
        age_offset: float = 40.0,
        interest: float = 0.0,
        premium_rate: float = 10000.0,
        initial_premium: float = 100000.0,
        retirement: float = 25.0,
        terminal: float = 70.0,
        quadrature_step: float = 1.0 / 512.0,
    ):
        self.mortality_a = float(mortality_a)
        self.mortality_b = float(mortality_b)
        self.mortality_c = float(mortality_c)
        self.age_offset = float(age_offset)
        self.interest = float(interest)
        self.premium_rate = float(premium_rate)
        self.initial_premium = float(initial_premium)
        self.retirement = float(retirement)
        self.terminal = float(terminal)
        self.quadrature_step = float(quadrature_step)
        if self.mortality_a < 0:
            raise ValueError("mortality must be nonnegative")
        self._grid = None
        self._G = None

    def mu(self, t):
        """Technical mortality rate at policy time ``t``."""
        t = np.asarray(t, dtype=float)
        return self.mortality_a + 10.0 ** (
            self.mortality_b + self.mortality_c * (t + self.age_offset)
        )

    def cumulative_hazard(self, t):
        """Closed-form integral of ``mu`` over ``[0, t]``."""
        t = np.asarray(t, dtype=float)
        c = self.mortality_c
        gomp = 10.0 ** (self.mortality_b + c * self.age_offset)
        return self.mortality_a * t + gomp * (10.0 ** (c * t) - 1.0) / (c * LN10)

    def discounted_survival(self, t):
        """``exp(-interest * t) * P(survive to t)``."""
        t = np.asarray(t, dtype=float)
        return np.exp(-self.cumulative_hazard(t) - self.interest * t)

    def _ensure_quadrature(self, step=None):
        h = self.quadrature_step if step is None else step
        if self._grid is not None and self._grid[1] == h:
            return
        n = int(round(self.terminal / h))
        grid = np.linspace(0.0, n * h, n + 1)
        d = self.discounted_survival(grid)
        G = np.concatenate([[0.0], np.cumsum((d[1:] + d[:-1]) * 0.5 * h)])
        self._grid = (grid, h)
        self._G = G

    def annuity(self, t0, t1, step=None):
        """Integral of the discounted survival over ``[t0, t1]`` (trapezoid)."""
        self._ensure_quadrature(step)
        grid, _ = self._grid
        g0 = np.interp(np.clip(t0, 0.0, self.terminal), grid, self._G)
        g1 = np.interp(np.clip(t1, 0.0, self.terminal), grid, self._G)
        return g1 - g0

    def technical_reserves(self, benefit_rate: float, t):
        """Prospective reserves ``(V*, V*+)`` at policy time ``t``.

        ``V*+`` is the reserve of benefits solely (life annuity of
        ``benefit_rate`` from retirement to the terminal time); ``V*``
        nets out the remaining premiums.  Standard actuarial sign:
        both are expected present values of future amounts, benefits
        positive.
        """
        if benefit_rate < 0:
            raise ValueError("benefit rate must be nonnegative")
        t = np.asarray(t, dtype=float)
        disc = self.discounted_survival(t)
        ben = benefit_rate * self.annuity(np.maximum(t, self.retirement), self.terminal)
        prem = self.premium_rate * self.annuity(np.minimum(t, self.retirement), self.retirement)
        v_plus = ben / disc
        v_star = v_plus - prem / disc
        return v_star, v_plus

    def solve_equivalence_benefit(self, tol: float = 1e-6, max_iter: int = 200) -> float:
        """Benefit rate making expected premiums equal expected benefits at 0.

        Equivalence at inception: ``V*(0)`` equals the initial premium.
        Bisection to relative tolerance ``tol``; raises if the initial
        bracket shows no sign change.
        """

        def f(beta):
            v_star, _ = self.technical_reserves(beta, 0.0)
            return float(v_star) - self.initial_premium

        lo, hi = 0.0, max(self.initial_premium, self.premium_rate, 1.0)
        for _ in range(80):
            if f(hi) > 0:
                break
            hi *= 2.0
        else:
            raise ValueError("no sign change in equivalence bracket")
        if f(lo) > 0:
            raise ValueError("no sign change in equivalence bracket")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if f(mid) <= 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * max(1.0, abs(lo)):
                break
        return 0.5 * (lo + hi)

    def free_policy_factor(self, benefit_rate: float, t):
        """Ratio ``V*(t) / V*+(t)`` of full to benefits-only reserve."""
        v_star, v_plus = self.technical_reserves(benefit_rate, t)
        if np.any(v_plus == 0.0):
            raise ZeroDivisionError("benefits-only reserve vanishes; factor undefined")
        return v_star / v_plus


@dataclass
class ModelConfig:
    """Bound model: state space, hazards, payments, scaling and basis."""

    name: str
    state_space: StateSpace
    hazards: "_sim.HazardSet"
    payments: PaymentSpec
    horizon: float
    basis: TechnicalBasis | None = None
    benefit_rate: float | None = None

    def rho_of_exercise(self, t, j, k):
        """Scaling factor locked at an exercise jump ``j -> k`` at time ``t``."""
        return self.payments.rho(t, j, k)


def _hazard_from_config(entry: dict, basis: TechnicalBasis | None, horizon: float):
    kind = entry["kind"]
    if kind == "constant_window":
        rate = float(entry["rate"])
        t0 = float(entry.get("t_start", 0.0))
        t1 = float(entry.get("t_end", math.inf))
        return _sim.Hazard(
            lambda t, u, r=rate, a=t0, b=t1: r if a <= t < b else 0.0,
            bound=rate,
        )
    if kind == "duration_bump":
        base = float(entry["base"])
        bump = float(entry["bump"])
        u0, u1 = float(entry["u_start"]), float(entry["u_end"])
        t0 = float(entry.get("t_start", 0.0))
        t1 = float(entry.get("t_end", math.inf))
        return _sim.Hazard(
            lambda t, u, b_=base, m=bump, x0=u0, x1=u1, a=t0, b=t1: (
                (b_ + (m if x0 <= u < x1 else 0.0)) if a <= t < b else 0.0
            ),
            bound=base + bump,
        )
    if kind == "technical_mortality":
        if basis is None:
            raise ValueError("technical_mortality hazard needs a technical basis")
        a, be, c, off = (
            basis.mortality_a,
            basis.mortality_b,
            basis.mortality_c,
            basis.age_offset,
        )
        return _sim.Hazard(
            lambda t, u: a + 10.0 ** (be + c * (t + off)),
            bound=a + 10.0 ** (be + c * (horizon + off)),
        )
    if kind == "zero":
        return _sim.Hazard(lambda t, u: 0.0, bound=0.0)
    raise ValueError(f"unknown hazard kind: {kind}")


def _parse_pair(key: str):
    j, k = key.split("->")
    return _coerce_label(j.strip()), _coerce_label(k.strip())


def _coerce_label(s):
    try:
        return int(s)
    except (TypeError, ValueError):
        return s


def _build_from_dict(cfg: dict) -> ModelConfig:
    states = [_coerce_label(s) for s in cfg["states"]]
    space = StateSpace(
        states,
        [_coerce_label(s) for s in cfg["pre_exercise"]],
        [_coerce_label(s) for s in cfg["post_exercise"]],
        _coerce_label(cfg["initial"]),
        [_coerce_label(s) for s in cfg.get("absorbing", [])],
    )
    horizon = float(cfg["horizon"])

    basis = None
    benefit = None
    if "technical_basis" in cfg:
        tb = cfg["technical_basis"]
        mort = tb.get("mortality", {})
        basis = TechnicalBasis(
            mortality_a=mort.get("a", 0.0005),
            mortality_b=mort.get("b", 5.728 - 10.0),
            mortality_c=mort.get("c", 0.038),
            age_offset=mort.get("age_offset", 40.0),
            interest=tb.get("interest", 0.0),
            premium_rate=tb.get("premium_rate", 10000.0),
            initial_premium=tb.get("initial_premium", 100000.0),
            retirement=tb.get("retirement", 25.0),
            terminal=tb.get("terminal", 70.0),
            quadrature_step=tb.get("quadrature_step", 1.0 / 512.0),
        )
        benefit = tb.get("benefit_rate", "equivalence")
        if benefit == "equivalence":
            benefit = basis.solve_equivalence_benefit()
        else:
            benefit = float(benefit)

    hazards = {}
    for entry in cfg.get("hazards", []):
        j = _coerce_label(entry["from"])
        k = _coerce_label(entry["to"])
        if not space.allows(j, k):
            raise ValueError(f"hazard {j}->{k} violates the absorbing structure")
        hazards[(j, k)] = _hazard_from_config(entry, basis, horizon)
    hazard_set = _sim.HazardSet(hazards)

    pay_cfg = cfg.get("payments", {})
    sojourn = {}
    for state_key, segs in pay_cfg.get("sojourn", {}).items():
        label = _coerce_label(state_key)
        segments = []
        lumps = []
        for seg in segs:
            if "lump" in seg:
                lumps.append((float(seg["time"]), float(seg["lump"])))
                continue
            rate = seg["rate"]
            if rate == "equivalence_benefit":
                if benefit is None:
                    raise ValueError("equivalence_benefit used without technical basis")
                rate = benefit
            segments.append(
                (float(seg.get("start", 0.0)), float(seg.get("end", math.inf)), float(rate))
            )
        sojourn[label] = SojournPayment(tuple(segments), tuple(lumps))

    transition = {}
    for key, spec in pay_cfg.get("transition", {}).items():
        pair = _parse_pair(key)
        kind = spec["kind"] if isinstance(spec, dict) else "constant"
        if kind == "technical_reserve":
            transition[pair] = lambda t, b=basis, r=benefit: b.technical_reserves(r, t)[0]
        elif kind == "technical_reserve_benefits":
            transition[pair] = lambda t, b=basis, r=benefit: b.technical_reserves(r, t)[1]
        elif kind == "constant":
            value = float(spec["value"] if isinstance(spec, dict) else spec)
            transition[pair] = lambda t, v=value: np.full_like(
                np.asarray(t, dtype=float), v
            )
        else:
            raise ValueError(f"unknown transition payment kind: {kind}")

    scaling_cfg = cfg.get("scaling", {})
    scale_map = {}
    bound = 1.0
    for key, spec in scaling_cfg.items():
        pair = _parse_pair(key)
        kind = spec["kind"] if isinstance(spec, dict) else spec
        if kind == "free_policy_factor":
            scale_map[pair] = lambda t, b=basis, r=benefit: b.free_policy_factor(r, t)
        elif kind == "constant":
            value = float(spec["value"])
            scale_map[pair] = lambda t, v=value: np.full_like(np.asarray(t, dtype=float), v)
            bound = max(bound, value)
        else:
            raise ValueError(f"unknown scaling kind: {kind}")

    def rho(t, j, k, _m=scale_map):
        fn = _m.get((j, k))
        if fn is None:
            return np.ones_like(np.asarray(t, dtype=float))
        return np.asarray(fn(t), dtype=float)

    payments = PaymentSpec(
        b0=float(pay_cfg.get("lump_at_inception", 0.0)),
        sojourn=sojourn,
        transition=transition,
        scaling=rho,
        scaling_bound=bound,
    )
    return ModelConfig(
        name=cfg.get("name", "model"),
        state_space=space,
        hazards=hazard_set,
        payments=payments,
        horizon=horizon,
        basis=basis,
        benefit_rate=benefit,
    )


FREEPOLICY6_CONFIG = {
    "name": "freepolicy6",
    "states": [1, 2, 3, 4, 5, 6],
    "initial": 1,
    "pre_exercise": [1, 3, 4],
    "post_exercise": [2, 5, 6],
    "absorbing": [3, 4, 5, 6],
    "horizon": 40.0,
    "technical_basis": {
        "mortality": {"a": 0.0005, "b": 5.728 - 10.0, "c": 0.038, "age_offset": 40.0},
        "interest": 0.0,
        "premium_rate": 10000.0,
        "initial_premium": 100000.0,
        "retirement": 25.0,
        "terminal": 70.0,
        "benefit_rate": "equivalence",
    },
    "hazards": [
        {"from": 1, "to": 2, "kind": "constant_window", "rate": 0.1, "t_end": 25.0},
        {"from": 1, "to": 3, "kind": "constant_window", "rate": 0.05, "t_end": 25.0},
        {"from": 1, "to": 4, "kind": "technical_mortality"},
        {
            "from": 2,
            "to": 5,
            "kind": "duration_bump",
            "base": 0.05,
            "bump": 0.2,
            "u_start": 0.5,
            "u_end": 2.5,
            "t_end": 25.0,
        },
        {"from": 2, "to": 6, "kind": "technical_mortality"},
    ],
    "payments": {
        "lump_at_inception": 100000.0,
        "sojourn": {
            "1": [
                {"rate": -10000.0, "start": 0.0, "end": 25.0},
                {"rate": "equivalence_benefit", "start": 25.0},
            ],
            "2": [{"rate": "equivalence_benefit", "start": 25.0}],
        },
        "transition": {
            "1->3": {"kind": "technical_reserve"},
            "2->5": {"kind": "technical_reserve_benefits"},
        },
    },
    "scaling": {"1->2": {"kind": "free_policy_factor"}},
}


def freepolicy6() -> ModelConfig:
    """Built-in six-state free-policy model with surrender options."""
    return _build_from_dict(FREEPOLICY6_CONFIG)


def load_model(path_or_name: str) -> ModelConfig:
    """Load a model from a YAML file, or a built-in preset by name."""
    if path_or_name == "freepolicy6":
        return freepolicy6()
    with open(path_or_name, "r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    return _build_from_dict(cfg)
