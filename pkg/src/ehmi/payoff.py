"""Deterministic payoffs of the 2x2 left-turn game.

Player A turns left (A1 turn, A2 yield); player B goes straight (B1 drive on,
B2 yield). Every payoff is affine in the player's own acceleration, and the
outcomes where the opponent proceeds also carry the collision-avoidance bound.
Error terms are never sampled here; the game module treats them through the
logit comparison probabilities.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np

from .kinematics import Encounter, collision_bounds


class Outcome(str, enum.Enum):
    O11 = "o11"
    O12 = "o12"
    O21 = "o21"
    O22 = "o22"

    @property
    def a_strategy(self) -> int:
        return int(self.value[1])

    @property
    def b_strategy(self) -> int:
        return int(self.value[2])

    @property
    def index(self) -> int:
        return OUTCOMES.index(self)

    @classmethod
    def from_strategies(cls, a: int, b: int) -> "Outcome":
        return cls(f"o{a}{b}")

    @classmethod
    def parse(cls, text: Union[str, "Outcome", int]) -> "Outcome":
        if isinstance(text, Outcome):
            return text
        if isinstance(text, (int, np.integer)):
            return OUTCOMES[int(text)]
        t = str(text).strip().lower()
        if t in {"a1b1", "a1b2", "a2b1", "a2b2"}:
            t = f"o{t[1]}{t[3]}"
        return cls(t)

    def __str__(self) -> str:
        return self.value


OUTCOMES = (Outcome.O11, Outcome.O12, Outcome.O21, Outcome.O22)

# coefficient names in table order; the collision term only exists where the opponent proceeds
PARAM_NAMES = (
    "alpha.11.0", "alpha.11.1", "alpha.11.2",
    "alpha.12.0", "alpha.12.1",
    "alpha.21.0", "alpha.21.1", "alpha.21.2",
    "alpha.22.0", "alpha.22.1",
    "beta.11.0", "beta.11.1", "beta.11.2",
    "beta.12.0", "beta.12.1", "beta.12.2",
    "beta.21.0", "beta.21.1",
    "beta.22.0", "beta.22.1",
)
N_PARAMS = len(PARAM_NAMES)
_INDEX = {name: i for i, name in enumerate(PARAM_NAMES)}

# outcomes whose payoff includes a_c for each player
A_BOUND_OUTCOMES = frozenset({Outcome.O11, Outcome.O21})
B_BOUND_OUTCOMES = frozenset({Outcome.O11, Outcome.O12})


class MissingAccelBound(ValueError):
    pass


class SpuriousAccelBound(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PayoffParams:
    """The 20 payoff coefficients, stored as a flat vector in ``PARAM_NAMES`` order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} coefficients, got {v.shape[0]}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return isinstance(other, PayoffParams) and np.array_equal(self.values, other.values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[_INDEX[name]])

    def __mul__(self, factor: float) -> "PayoffParams":
        return PayoffParams(self.values * factor)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls) -> "PayoffParams":
        return cls(np.zeros(N_PARAMS))

    @classmethod
    def from_mapping(cls, mapping: Dict[str, float]) -> "PayoffParams":
        missing = set(PARAM_NAMES) - set(mapping)
        extra = set(mapping) - set(PARAM_NAMES)
        if missing or extra:
            raise KeyError(f"bad parameter keys: missing={sorted(missing)} extra={sorted(extra)}")
        return cls(np.array([mapping[k] for k in PARAM_NAMES], dtype=float))

    def to_mapping(self) -> Dict[str, float]:
        return {k: float(v) for k, v in zip(PARAM_NAMES, self.values)}

    @classmethod
    def default(cls) -> "PayoffParams":
        """Published calibration for the straight-first game."""
        text = resources.files("ehmi.data").joinpath("published.params").read_text()
        return cls.loads(text)

    # flat ``key = value`` text; repr() keeps floats bit-exact
    def dumps(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in self.to_mapping().items())

    @classmethod
    def loads(cls, text: str) -> "PayoffParams":
        mapping = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key in mapping:
                raise ValueError(f"line {lineno}: duplicate key {key}")
            mapping[key] = float(val)
        return cls.from_mapping(mapping)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PayoffParams":
        return cls.loads(Path(path).read_text())


def _coef(params: PayoffParams, player: str, outcome: Outcome, k: int) -> float:
    return params[f"{player}.{outcome.value[1:]}.{k}"]


def payoff_a(outcome, a_A: float, a_c_A: Optional[float], params: PayoffParams) -> float:
    """Deterministic payoff of the left-turning vehicle for ``outcome``."""
    outcome = Outcome.parse(outcome)
    value = _coef(params, "alpha", outcome, 0) + _coef(params, "alpha", outcome, 1) * a_A
    if outcome in A_BOUND_OUTCOMES:
        if a_c_A is None:
            raise MissingAccelBound(f"{outcome} needs the collision-avoidance bound of A")
        value += _coef(params, "alpha", outcome, 2) * a_c_A
    elif a_c_A is not None:
        raise SpuriousAccelBound(f"{outcome} has no collision-avoidance term for A")
    return value


def payoff_b(outcome, a_B: float, a_c_B: Optional[float], params: PayoffParams) -> float:
    """Deterministic payoff of the straight-going vehicle for ``outcome``."""
    outcome = Outcome.parse(outcome)
    value = _coef(params, "beta", outcome, 0) + _coef(params, "beta", outcome, 1) * a_B
    if outcome in B_BOUND_OUTCOMES:
        if a_c_B is None:
            raise MissingAccelBound(f"{outcome} needs the collision-avoidance bound of B")
        value += _coef(params, "beta", outcome, 2) * a_c_B
    elif a_c_B is not None:
        raise SpuriousAccelBound(f"{outcome} has no collision-avoidance term for B")
    return value


def payoff_features(encounter: Encounter, *, literal_subscripts: bool = False) -> np.ndarray:
    """``[a_A, a_B, a_c^A, a_c^B]`` for an encounter."""
    ac_a, ac_b = collision_bounds(encounter, literal_subscripts=literal_subscripts)
    return np.array([encounter.a_state.acceleration, encounter.b_state.acceleration, ac_a, ac_b])


def _design(features: np.ndarray) -> np.ndarray:
    """Map features ``(..., 4)`` to a design tensor ``(..., 8, 20)``.

    Rows are the utilities ``[A11, A12, A21, A22, B11, B12, B21, B22]``.
    """
    f = np.asarray(features, dtype=float)
    a_A, a_B, ac_A, ac_B = (f[..., i] for i in range(4))
    one = np.ones_like(a_A)
    X = np.zeros(f.shape[:-1] + (8, N_PARAMS))
    rows = [
        (0, ("alpha.11.0", one), ("alpha.11.1", a_A), ("alpha.11.2", ac_A)),
        (1, ("alpha.12.0", one), ("alpha.12.1", a_A)),
        (2, ("alpha.21.0", one), ("alpha.21.1", a_A), ("alpha.21.2", ac_A)),
        (3, ("alpha.22.0", one), ("alpha.22.1", a_A)),
        (4, ("beta.11.0", one), ("beta.11.1", a_B), ("beta.11.2", ac_B)),
        (5, ("beta.12.0", one), ("beta.12.1", a_B), ("beta.12.2", ac_B)),
        (6, ("beta.21.0", one), ("beta.21.1", a_B)),
        (7, ("beta.22.0", one), ("beta.22.1", a_B)),
    ]
    for r, *terms in rows:
        for name, col in terms:
            X[..., r, _INDEX[name]] = col
    return X


def design_matrix(features: np.ndarray) -> np.ndarray:
    return _design(features)


def utilities(features: np.ndarray, params: Union[PayoffParams, np.ndarray]) -> np.ndarray:
    """All eight deterministic utilities for one or many encounters' features."""
    theta = params.values if isinstance(params, PayoffParams) else np.asarray(params, dtype=float)
    return _design(features) @ theta


def encounter_utilities(encounter: Encounter, params: PayoffParams, *, literal_subscripts: bool = False) -> np.ndarray:
    return utilities(payoff_features(encounter, literal_subscripts=literal_subscripts), params)


def total_payoff(encounter: Encounter, outcome, params: PayoffParams) -> float:
    """Sum of both players' deterministic payoffs under ``outcome``."""
    outcome = Outcome.parse(outcome)
    a_A = encounter.a_state.acceleration
    a_B = encounter.b_state.acceleration
    need_a = outcome in A_BOUND_OUTCOMES
    need_b = outcome in B_BOUND_OUTCOMES
    ac_a = ac_b = None
    if need_a or need_b:
        bounds = collision_bounds(encounter)
        ac_a = bounds[0] if need_a else None
        ac_b = bounds[1] if need_b else None
    return payoff_a(outcome, a_A, ac_a, params) + payoff_b(outcome, a_B, ac_b, params)


def player_payoffs(utils: np.ndarray, outcome) -> tuple:
    """``(U^A, U^B)`` picked out of an 8-utility vector."""
    i = Outcome.parse(outcome).index
    return float(utils[i]), float(utils[4 + i])


def as_params(params: Union[PayoffParams, Iterable[float]]) -> PayoffParams:
    return params if isinstance(params, PayoffParams) else PayoffParams(np.asarray(list(params), dtype=float))
