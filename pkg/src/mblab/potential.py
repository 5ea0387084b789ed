"""
Closed-form periodic potentials ``F(x, u)`` and their ``u``-derivatives.

Every registered family is 1-periodic in ``x`` and in ``u``, nonnegative, and
vanishes exactly on the integers (up to the additive ``offset``).  Only
``x_1`` enters; the transverse coordinates are accepted and ignored.

Families
--------
``pendulum_modulated``
    ``(1 + eps cos 2 pi x1) sin^2(pi u)``, ``eps in [0, 0.9]``, default 0.3.
``pendulum``
    The autonomous case ``eps = 0``.
``twowell_periodized``
    ``(1 + eps cos 2 pi x1) q(t)`` with ``t = u - round(u)`` and
    ``q(t) = 16 t^2 (1 - |t|)^2``.  On ``[0, 1]`` this is the quartic double
    well ``16 s^2 (1 - s)^2``; its periodic extension is C^2 (``q'' = 32`` on
    both sides of each integer) but not C^3.
``flat``
    ``F = 0``; the degenerate control where every constant is minimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = ["Potential", "make_potential", "FAMILIES", "eval_F", "eval_Fu"]

TWO_PI = 2.0 * np.pi


def _amplitude(x1, eps):
    return 1.0 + eps * np.cos(TWO_PI * np.asarray(x1, dtype=float))


def _pendulum(x1, u, eps):
    s = np.sin(np.pi * u)
    return _amplitude(x1, eps) * s * s


def _pendulum_u(x1, u, eps):
    return _amplitude(x1, eps) * np.pi * np.sin(TWO_PI * u)


def _pendulum_uu(x1, u, eps):
    return _amplitude(x1, eps) * TWO_PI * np.pi * np.cos(TWO_PI * u)


def _centered(u):
    u = np.asarray(u, dtype=float)
    return u - np.rint(u)


def _twowell(x1, u, eps):
    t = _centered(u)
    a = np.abs(t)
    return _amplitude(x1, eps) * 16.0 * t * t * (1.0 - a) ** 2


def _twowell_u(x1, u, eps):
    t = _centered(u)
    a = np.abs(t)
    return _amplitude(x1, eps) * 32.0 * t * (1.0 - a) * (1.0 - 2.0 * a)


def _twowell_uu(x1, u, eps):
    t = _centered(u)
    a = np.abs(t)
    return _amplitude(x1, eps) * 32.0 * (1.0 - 6.0 * a + 6.0 * t * t)


def _zero(x1, u, eps):
    return np.zeros(np.broadcast(np.asarray(x1), np.asarray(u)).shape)


FAMILIES = {
    "pendulum_modulated": (_pendulum, _pendulum_u, _pendulum_uu, 0.3),
    "pendulum": (_pendulum, _pendulum_u, _pendulum_uu, 0.0),
    "twowell_periodized": (_twowell, _twowell_u, _twowell_uu, 0.0),
    "flat": (_zero, _zero, _zero, 0.0),
}


@dataclass(frozen=True)
class Potential:
    """A registered potential family with its parameters.

    ``offset`` adds a constant to ``F``; it shifts ``c0`` and nothing else.
    """

    family: str
    epsilon: float = 0.0
    offset: float = 0.0
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown potential family {self.family!r}")
        if self.family == "pendulum" and self.epsilon != 0.0:
            raise ConfigurationError("pendulum is the eps=0 family; use pendulum_modulated")
        if not 0.0 <= self.epsilon <= 0.9:
            raise ConfigurationError(f"epsilon={self.epsilon} outside [0, 0.9]")

    def F(self, x1, u):
        return FAMILIES[self.family][0](x1, u, self.epsilon) + self.offset

    def Fu(self, x1, u):
        return FAMILIES[self.family][1](x1, u, self.epsilon)

    def Fuu(self, x1, u):
        return FAMILIES[self.family][2](x1, u, self.epsilon)

    def to_dict(self) -> dict:
        return {"family": self.family, "epsilon": self.epsilon, "offset": self.offset}


def make_potential(family: str, epsilon: float | None = None, offset: float = 0.0) -> Potential:
    """Build a potential, filling in the family's default ``epsilon``."""
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown potential family {family!r}")
    if epsilon is None:
        epsilon = FAMILIES[family][3]
    return Potential(family, float(epsilon), float(offset))


def _x1_of(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return x[0]


def eval_F(pot: Potential, x, u) -> float:
    """``F(x, u)`` at a single point ``x = (x_1, ..., x_n)``."""
    return float(pot.F(_x1_of(x), u))


def eval_Fu(pot: Potential, x, u) -> float:
    """``dF/du`` at a single point."""
    return float(pot.Fu(_x1_of(x), u))
