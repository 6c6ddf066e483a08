"""Stochastic matrices and their supermaps.

Every quantum routine in :mod:`channels`, :mod:`supermaps` and :mod:`lat` is
generic over a :class:`~higherorder.channels.Theory`; this module supplies
the classical entry points (``theory=CLASSICAL``) plus the matrix-level
helpers that only make sense for nonnegative matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# several names are imported only to re-export the classical ports
from .channels import (  # noqa: F401
    CLASSICAL,
    Channel,
    ChannelError,
    ChannelSetSpec,
    ControlPair,
    SignalingRelation,
    check_signaling,
    control_channel,
    insert_control,
    random_channel,
    stochastic_channel,
)
from .lat import check_convex_linearity, check_local_applicability, embed, extract  # noqa: F401
from .supermaps import comb_to_supermap, identity_supermap, random_comb
from .tensor_core import SystemType

STOCH_TOL = 1e-10


def is_nonneg(m, tol: float = STOCH_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.all(np.abs(np.imag(m)) <= tol) and np.all(np.real(m) >= -tol))


def is_stochastic(m, tol: float = STOCH_TOL) -> bool:
    """Nonnegative with every column summing to one."""
    m = np.asarray(m)
    return m.ndim == 2 and is_nonneg(m, tol) and bool(np.all(np.abs(m.real.sum(axis=0) - 1) <= tol))


@dataclass(frozen=True, eq=False)
class NonnegMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or not is_nonneg(m):
            raise ChannelError("expected a nonnegative matrix")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class StochasticMatrix(NonnegMatrix):
    def __post_init__(self):
        super().__post_init__()
        if not is_stochastic(self.entries):
            raise ChannelError("columns must sum to one")

    def channel(self, in_type: SystemType | None = None, out_type: SystemType | None = None) -> Channel:
        return stochastic_channel(self.entries, in_type, out_type)


def kron(a, b, *more) -> np.ndarray:
    out = np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    for m in more:
        out = np.kron(out, np.asarray(m, dtype=float))
    return out


def compose(second, first) -> np.ndarray:
    """``second o first`` for matrices acting on column vectors."""
    second, first = np.asarray(second, dtype=float), np.asarray(first, dtype=float)
    if second.shape[1] != first.shape[0]:
        raise ChannelError(f"cannot compose {second.shape} after {first.shape}")
    return second @ first


def random_stochastic(rows: int, cols: int, seed=None) -> np.ndarray:
    """Columns drawn from a flat Dirichlet distribution."""
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(rows), size=cols).T


def effect_completion(sigma) -> tuple[float, np.ndarray]:
    """``(lam, rest)`` with ``lam * sigma + rest`` equal to the all-ones row and
    ``rest >= 0``; ``lam = 1 / max(sigma)``."""
    sigma = np.asarray(sigma, dtype=float)
    if not is_nonneg(sigma) or not np.any(sigma > 0):
        raise ChannelError("effect must be nonnegative and nonzero")
    lam = 1.0 / float(sigma.max())
    rest = np.clip(np.ones_like(sigma) - lam * sigma, 0.0, None)
    return lam, rest


def classical_control(phi0: Channel, phi1: Channel, label: str = "ctl") -> Channel:
    """Control by the basis vectors ``e0, e1`` read out by the matching effects."""
    return control_channel(phi0, phi1, ControlPair.computational(2, CLASSICAL), label)


def identity_stochastic_supermap(a: SystemType, a_out: SystemType):
    return identity_supermap(a, a_out, CLASSICAL)


def random_classical_comb(a, a_out, b, b_out, env_dim: int = 2, seed=None):
    return random_comb(a, a_out, b, b_out, env_dim, seed, CLASSICAL)


def classical_roundtrip(trials: int = 25, seed=0, dims=(2, 2, 2, 2), env_dim: int = 2) -> float:
    """Largest distance between a random classical comb's supermap and its
    extraction after embedding."""
    a, ap, b, bp = (SystemType.of(l, d) for l, d in zip(("a", "a'", "b", "b'"), dims))
    worst = 0.0
    for k in range(trials):
        s = comb_to_supermap(random_classical_comb(a, ap, b, bp, env_dim, [int(seed), k]))
        worst = max(worst, extract(embed(s)).distance(s))
    return worst


def random_stochastic_channel(in_type: SystemType, out_type: SystemType, seed=None) -> Channel:
    return random_channel(in_type, out_type, 1, seed, CLASSICAL)


def all_stochastic(base_in: SystemType, base_out: SystemType) -> ChannelSetSpec:
    return ChannelSetSpec.all(base_in, base_out, CLASSICAL)
