"""Dual energy ``J(P) = int Psi(x, P) - 1/2 int (-Lap)^{-1} P . P`` and its Nehari machinery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field_core import (
    VectorField,
    divergence,
    helmholtz_project,
    inv_laplacian,
    l2_inner,
)
from .material import MAX_DOUBLINGS, BracketError, NonlinearityModel, psi_apply

# relative divergence accepted by j_grad, measured as |div P|_2 / |P|_2
DIV_TOL = 1e-10
# relative bracket width at which the fibering bisection stops
T_RTOL = 1e-12


class DivergenceError(ValueError):
    """Input field is not divergence-free."""


class DegenerateDirectionError(ValueError):
    """``quad(P) = 0``: the fibering map has no critical point."""


@dataclass(frozen=True)
class EnergyBreakdown:
    j1: float
    quad: float
    j: float


@dataclass(frozen=True)
class FiberingResult:
    t_star: float
    gamma_at: float
    gamma_prime_residual: float
    bracket: float


def div_residual(P: VectorField) -> float:
    norm = P.norm()
    if norm == 0.0:
        return 0.0
    return float(np.sqrt(P.grid.cell_volume * np.sum(divergence(P) ** 2)) / norm)


def j1(P: VectorField, m: NonlinearityModel) -> float:
    g = m.gamma_on(P.grid)
    return float(P.grid.cell_volume * np.sum(m.Psi(g, P.magnitude())))


def quad_form(P: VectorField) -> float:
    return l2_inner(inv_laplacian(P), P)


def j_energy(P: VectorField, m: NonlinearityModel) -> EnergyBreakdown:
    a = j1(P, m)
    b = quad_form(P)
    return EnergyBreakdown(j1=a, quad=b, j=a - 0.5 * b)


def j_grad(P: VectorField, m: NonlinearityModel) -> VectorField:
    """L2 representative of ``J'(P)`` on divergence-free fields: ``Pi psi(x, P) - (-Lap)^{-1} P``."""
    res = div_residual(P)
    if res > DIV_TOL:
        raise DivergenceError(f"j_grad needs a divergence-free field; relative divergence {res:.3e}")
    return helmholtz_project(psi_apply(P, m)) - inv_laplacian(P)


class _Fiber:
    """Fibering map ``gamma(t) = J(tP)`` with the field-dependent pieces cached."""

    def __init__(self, P: VectorField, m: NonlinearityModel, b: float | None = None):
        self.m = m
        self.dv = P.grid.cell_volume
        self.g = m.gamma_on(P.grid)
        self.mag = P.magnitude()
        self.b = quad_form(P) if b is None else b

    def gamma(self, t: float) -> float:
        return float(self.dv * np.sum(self.m.Psi(self.g, t * self.mag))) - 0.5 * t * t * self.b

    def slope(self, t: float) -> float:
        """``gamma'(t) = int psi0(x, t|P|) |P| - t quad(P)``."""
        return float(self.dv * np.sum(self.m.psi0(self.g, t * self.mag) * self.mag)) - t * self.b

    def scaled_slope(self, t: float) -> float:
        """``gamma'(t) / t``, strictly decreasing in ``t``."""
        return float(self.dv * np.sum(self.m.psi0(self.g, t * self.mag) * self.mag)) / t - self.b


def fibering_gamma(P: VectorField, m: NonlinearityModel, t: float) -> tuple[float, float]:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    fib = _Fiber(P, m)
    return fib.gamma(t), fib.slope(t)


def nehari_scale(P: VectorField, m: NonlinearityModel) -> FiberingResult:
    """Unique ``t > 0`` with ``gamma'(t) = 0``, by bracketing and bisection of ``gamma'(t)/t``."""
    fib = _Fiber(P, m)
    if not fib.b > 0.0:
        raise DegenerateDirectionError(f"quad(P) = {fib.b:.3e}; no Nehari scaling exists")
    lo = hi = 1.0
    phi = fib.scaled_slope(1.0)
    for _ in range(MAX_DOUBLINGS):
        if phi > 0:
            lo, hi = hi, 2.0 * hi
            phi = fib.scaled_slope(hi)
            if phi <= 0:
                break
        else:
            lo, hi = 0.5 * lo, lo
            phi = fib.scaled_slope(lo)
            if phi > 0:
                break
    else:
        raise BracketError("could not bracket the Nehari scaling within 200 doublings")
    while hi - lo > T_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fib.scaled_slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return FiberingResult(
        t_star=t,
        gamma_at=fib.gamma(t),
        gamma_prime_residual=abs(fib.slope(t)),
        bracket=hi - lo,
    )


def nehari_residual(P: VectorField, m: NonlinearityModel) -> float:
    """``|J'(P)[P]| / max(1, quad(P))``; zero exactly on the Nehari manifold."""
    fib = _Fiber(P, m)
    return abs(fib.slope(1.0)) / max(1.0, fib.b)


def nehari_project(P: VectorField, m: NonlinearityModel) -> VectorField:
    return nehari_scale(P, m).t_star * P


def reduced_j(P: VectorField, m: NonlinearityModel) -> float:
    """``max_t J(tP)``, evaluated as ``J`` at the Nehari projection."""
    return j_energy(nehari_project(P, m), m).j


def energy_increment(P: VectorField, Q: VectorField, m: NonlinearityModel) -> float:
    """``J(Q) - J(P)`` without cancelling two nearly equal totals.

    The quadratic part uses ``quad(Q) - quad(P) = <(-Lap)^{-1}(Q - P), Q + P>``.
    The ``Psi`` part is differenced pointwise; for ``pure_power`` the pointwise
    difference is written with ``expm1``/``log1p`` so it keeps full relative
    accuracy however close ``|Q|`` is to ``|P|``.
    """
    d = (Q - P).data
    z1 = P.magnitude()
    g = m.gamma_on(P.grid)
    if m.kind == "pure_power":
        pc = m.p_conj
        dz2 = np.sum(d * (Q.data + P.data), axis=0)  # |Q|^2 - |P|^2
        nz = z1 > 0
        safe = np.where(nz, z1, 1.0)
        ratio = np.where(nz, dz2 / safe**2, 0.0)
        # |Q|^2/|P|^2 = 1 + ratio >= 0; clip the rounding below -1
        ratio = np.maximum(ratio, -1.0)
        inc = np.where(
            nz,
            g ** (1.0 - pc) / pc * safe**pc * np.expm1(0.5 * pc * np.log1p(ratio)),
            m.Psi(g, Q.magnitude()),
        )
    else:
        inc = m.Psi(g, Q.magnitude()) - m.Psi(g, z1)
    dj1 = float(P.grid.cell_volume * np.sum(inc))
    dquad = l2_inner(inv_laplacian(Q - P), Q + P)
    return dj1 - 0.5 * dquad


def power_fiber_constants(P: VectorField, m: NonlinearityModel) -> tuple[float, float]:
    """``(a, b)`` with ``gamma(t) = t^{p'} a / p' - t^2 b / 2`` for the pure power family."""
    if m.kind != "pure_power":
        raise ValueError("closed-form fibering constants exist only for pure_power")
    g = m.gamma_on(P.grid)
    pc = m.p_conj
    a = float(P.grid.cell_volume * np.sum(g ** (1.0 - pc) * P.magnitude() ** pc))
    return a, quad_form(P)
