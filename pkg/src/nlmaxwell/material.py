"""Weight Gamma, the radial nonlinearity f0 with primitive F, and its inverse psi0 with primitive Psi.

All scalar laws depend on the position only through ``g = Gamma(x)``:
``f0(x, s) = g * h(s)`` with a profile ``h`` per family,

* ``pure_power``:      ``h(s) = s^(p-1)``
* ``double_power``:    ``h(s) = min(s^(p-1), s^(q-1))``  (``q >= p``)
* ``custom_monotone``: ``h`` tabulated on nodes ``s_i`` and interpolated
  linearly in log-log coordinates, so every segment is an exact power law.
  Below the table ``h`` continues with exponent ``q - 1``, above it with
  ``p - 1``.

The vectorized methods of :class:`NonlinearityModel` act on numpy arrays of
``g`` and ``s`` (or ``z``) and are what the field operations use.  The
``*_eval`` functions are the pointwise API taking a position ``x`` measured
from the box center; for the custom family ``F_eval`` and ``Psi_eval``
integrate numerically, which makes them an independent check of the
vectorized primitives.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .field_core import GridSpec, VectorField

KINDS = ("pure_power", "double_power", "custom_monotone")

MAX_DOUBLINGS = 200
# Gauss-Legendre rule on [-1, 1] and the number of extra halvings below the
# first table node used by the quadrature oracle
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_QUAD_HALVINGS = 80


class BracketError(RuntimeError):
    """A monotone root could not be bracketed."""


@dataclass(frozen=True)
class WeightSpec:
    """``Gamma(x) = scale * (1 + |x|)^(-alpha)`` with ``|x|`` measured from the box center."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 3.0:
            raise ValueError(f"weight exponent alpha must satisfy 0 < alpha < 3, got {self.alpha}")
        if not self.scale > 0.0:
            raise ValueError(f"weight scale must be positive, got {self.scale}")

    def __call__(self, r):
        return self.scale * (1.0 + np.asarray(r, dtype=float)) ** (-self.alpha)

    @property
    def constants(self) -> tuple[float, float]:
        """``(c, C)`` with ``c <= Gamma(x) (1+|x|)^alpha <= C``."""
        return (self.scale, self.scale)

    def boundary_ratio(self, grid: GridSpec) -> float:
        """``Gamma(l/2) / Gamma(0)``, small when the box truncation is harmless."""
        return float(self(0.5 * grid.l) / self(0.0))


def gamma_eval(x, w: WeightSpec) -> float:
    return float(w(np.linalg.norm(np.asarray(x, dtype=float))))


@dataclass(frozen=True, eq=False)
class NonlinearityModel:
    kind: str
    p: float
    weight: WeightSpec
    q: float | None = None
    table_s: tuple[float, ...] | None = None
    table_f: tuple[float, ...] | None = None
    _table: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        q = self.p if self.q is None else self.q
        object.__setattr__(self, "q", float(q))
        object.__setattr__(self, "p", float(self.p))
        if not 2.0 < self.p < 6.0:
            raise ValueError(f"exponent p must satisfy 2 < p < 6 (growth assumption on f), got {self.p}")
        if self.kind == "pure_power" and self.q != self.p:
            raise ValueError("pure_power uses a single exponent; q must equal p")
        if self.q < self.p:
            raise ValueError(f"exponent q must satisfy q >= p, got q={self.q} < p={self.p}")
        if self.q <= max(2.0, 6.0 - 2.0 * self.weight.alpha):
            warnings.warn(
                f"q = {self.q} violates q > max(2, 6 - 2 alpha) = "
                f"{max(2.0, 6.0 - 2.0 * self.weight.alpha)} required by the growth assumption on f",
                stacklevel=3,
            )
        if self.kind == "custom_monotone":
            object.__setattr__(self, "_table", _build_table(self.table_s, self.table_f, self.p, self.q))

    # -- exponents and constants ------------------------------------------

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    def sandwich_constants(self) -> tuple[float, float]:
        """Constants ``(c1, c2)`` with ``f0 s/2 - F >= c1 Gamma min(s^p, s^q) >= c2 f0 s``."""
        if self.kind == "custom_monotone":
            raise NotImplementedError("sandwich constants are only known for the power families")
        c1 = 0.5 - 1.0 / self.p
        # Gamma min(s^p, s^q) equals f0 s exactly for both power families
        return (c1, c1)

    def gamma_on(self, grid: GridSpec) -> np.ndarray:
        return self.weight(grid.radius)

    # -- vectorized scalar laws ---------------------------------------------

    def f0(self, g, s):
        g, s = np.asarray(g, dtype=float), np.asarray(s, dtype=float)
        if self.kind == "pure_power":
            return g * s ** (self.p - 1.0)
        if self.kind == "double_power":
            return g * np.where(s <= 1.0, s ** (self.q - 1.0), s ** (self.p - 1.0))
        return g * _table_value(self._table["fwd"], s)

    def F(self, g, s):
        g, s = np.asarray(g, dtype=float), np.asarray(s, dtype=float)
        p, q = self.p, self.q
        if self.kind == "pure_power":
            return g * s**p / p
        if self.kind == "double_power":
            return g * np.where(s <= 1.0, s**q / q, 1.0 / q + (s**p - 1.0) / p)
        return g * _table_primitive(self._table["fwd"], s)

    def psi0(self, g, z):
        g, z = np.asarray(g, dtype=float), np.asarray(z, dtype=float)
        w = z / g
        if self.kind == "pure_power":
            return w ** (1.0 / (self.p - 1.0))
        if self.kind == "double_power":
            return np.where(w <= 1.0, w ** (1.0 / (self.q - 1.0)), w ** (1.0 / (self.p - 1.0)))
        return _bisect_inverse(self, g, z)

    def Psi(self, g, z):
        g, z = np.asarray(g, dtype=float), np.asarray(z, dtype=float)
        w = z / g
        pc, qc = self.p_conj, self.q_conj
        if self.kind == "pure_power":
            return g * w**pc / pc
        if self.kind == "double_power":
            return g * np.where(w <= 1.0, w**qc / qc, 1.0 / qc + (w**pc - 1.0) / pc)
        return g * _table_primitive(self._table["inv"], w)

    def psi0_elasticity(self, g, z):
        """``z psi0'(z) / psi0(z)``, the local exponent of ``psi0`` (piecewise constant)."""
        g, z = np.asarray(g, dtype=float), np.asarray(z, dtype=float)
        w = z / g
        if self.kind == "pure_power":
            return np.full(w.shape, 1.0 / (self.p - 1.0))
        if self.kind == "double_power":
            return np.where(w <= 1.0, 1.0 / (self.q - 1.0), 1.0 / (self.p - 1.0))
        inv = self._table["inv"]
        return inv["exps"][_piece(inv, w)]


# -- tabulated profile ----------------------------------------------------------

def _build_table(table_s, table_f, p, q) -> dict:
    if table_s is None or table_f is None:
        raise ValueError("custom_monotone needs table_s and table_f")
    s = np.asarray(table_s, dtype=float)
    f = np.asarray(table_f, dtype=float)
    if s.ndim != 1 or s.shape != f.shape or s.size < 2:
        raise ValueError("table_s and table_f must be 1-D of equal length >= 2")
    if np.any(s <= 0) or np.any(f <= 0) or not np.all(np.isfinite(s)) or not np.all(np.isfinite(f)):
        raise ValueError("table entries must be positive and finite")
    if np.any(np.diff(s) <= 0):
        raise ValueError("table_s must be strictly increasing")
    slopes = np.diff(np.log(f)) / np.diff(np.log(s))
    # h(s)/s increasing <=> every log-log slope exceeds 1
    if np.any(slopes <= 1.0):
        raise ValueError("tabulated f0 violates the growth assumption: s -> f0(s)/s must increase")
    return {"fwd": _segments(s, f, q - 1.0, p - 1.0), "inv": _segments(f, s, 1.0 / (q - 1.0), 1.0 / (p - 1.0))}


def _segments(x, y, low_exp, high_exp) -> dict:
    """Piecewise power law through ``(x_i, y_i)`` with power-law tails."""
    lx, ly = np.log(x), np.log(y)
    exps = np.concatenate(([low_exp], np.diff(ly) / np.diff(lx), [high_exp]))
    # left node of each piece: piece 0 is (0, x_0], anchored at x_0
    anchors_x = np.concatenate(([x[0]], x))
    anchors_y = np.concatenate(([y[0]], y))
    # primitive at the left end of each piece
    seg_int = anchors_y[1:-1] * anchors_x[1:-1] / (exps[1:-1] + 1.0) * (
        (x[1:] / x[:-1]) ** (exps[1:-1] + 1.0) - 1.0
    )
    head = y[0] * x[0] / (low_exp + 1.0)
    base = np.concatenate(([0.0], head + np.concatenate(([0.0], np.cumsum(seg_int)))))
    return {"x": x, "exps": exps, "ax": anchors_x, "ay": anchors_y, "base": base}


def _piece(tab, s):
    return np.searchsorted(tab["x"], s, side="left")


def _table_value(tab, s):
    s = np.asarray(s, dtype=float)
    i = _piece(tab, s)
    e, ax, ay = tab["exps"][i], tab["ax"][i], tab["ay"][i]
    safe = np.where(s > 0, s, 1.0)
    return np.where(s > 0, ay * (safe / ax) ** e, 0.0)


def _table_primitive(tab, s):
    s = np.asarray(s, dtype=float)
    i = _piece(tab, s)
    e, ax, ay = tab["exps"][i], tab["ax"][i], tab["ay"][i]
    safe = np.where(s > 0, s, 1.0)
    start = np.where(i == 0, 0.0, ax)
    part = ay * ax / (e + 1.0) * ((safe / ax) ** (e + 1.0) - (start / ax) ** (e + 1.0))
    return np.where(s > 0, tab["base"][i] + part, 0.0)


def _bisect_inverse(m: NonlinearityModel, g, z):
    """Solve ``f0(g, s) = z`` for ``s`` elementwise by bracketing and bisection."""
    g, z = np.broadcast_arrays(np.asarray(g, dtype=float), np.asarray(z, dtype=float))
    if np.any(z < 0):
        raise ValueError("psi0 is defined for z >= 0 only")
    # relative target; stricter than 1e-12 * max(1, z) and keeps tiny z accurate
    tol = 1e-12 * z
    lo = np.zeros(z.shape)
    hi = np.ones(z.shape)
    for _ in range(MAX_DOUBLINGS):
        short = m.f0(g, hi) < z
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise BracketError("could not bracket f0(x, s) = z within 200 doublings; f0 must be unbounded")
    active = z > 0
    s = np.where(active, 0.5 * (lo + hi), 0.0)
    while active.any():
        fs = m.f0(g, s)
        active &= np.abs(fs - z) > tol
        below = fs < z
        lo = np.where(active & below, s, lo)
        hi = np.where(active & ~below, s, hi)
        mid = 0.5 * (lo + hi)
        active &= (mid != lo) & (mid != hi)
        s = np.where(active, mid, s)
    return s if s.ndim else float(s)


# -- pointwise API ------------------------------------------------------------

def _nonneg(v, name):
    if v < 0:
        raise ValueError(f"{name} must be nonnegative, got {v}")
    return float(v)


def _piecewise_quad(fun, upper, nodes) -> float:
    """Integral of ``fun`` over ``(0, upper)`` for integrands that are powers between ``nodes``.

    The interval is cut at the nodes and at dyadic points ``upper / 2^k``,
    which keeps every piece within a factor of two, so a power with noninteger
    exponent is smooth on it and a Gauss-Legendre rule is accurate to rounding.
    ``fun`` is evaluated once on all quadrature points.
    """
    first = nodes[0] if nodes else upper
    levels = int(np.ceil(np.log2(upper / first))) + _QUAD_HALVINGS
    cuts = np.union1d(upper * 2.0 ** -np.arange(levels, -1, -1), nodes)
    a, b = cuts[:-1], cuts[1:]
    half = 0.5 * (b - a)[:, None]
    t = (0.5 * (a + b))[:, None] + half * _GL_X
    return float(np.sum(half * _GL_W * fun(t.ravel()).reshape(t.shape)))


def f0_eval(x, s, m: NonlinearityModel) -> float:
    s = _nonneg(s, "s")
    return float(m.f0(gamma_eval(x, m.weight), s))


def F_eval(x, s, m: NonlinearityModel) -> float:
    s = _nonneg(s, "s")
    g = gamma_eval(x, m.weight)
    if m.kind != "custom_monotone":
        return float(m.F(g, s))
    if s == 0.0:
        return 0.0
    nodes = [t for t in m._table["fwd"]["x"] if 0.0 < t < s]
    return _piecewise_quad(lambda t: m.f0(g, t), s, nodes)


def psi0_eval(x, z, m: NonlinearityModel) -> float:
    z = _nonneg(z, "z")
    return float(m.psi0(gamma_eval(x, m.weight), z))


def Psi_eval(x, z, m: NonlinearityModel) -> float:
    z = _nonneg(z, "z")
    g = gamma_eval(x, m.weight)
    if m.kind != "custom_monotone":
        return float(m.Psi(g, z))
    if z == 0.0:
        return 0.0
    nodes = [g * t for t in m._table["inv"]["x"] if 0.0 < g * t < z]
    return _piecewise_quad(lambda t: m.psi0(g, t), z, nodes)


def fenchel_defect(x, s, m: NonlinearityModel) -> float:
    """Mismatch of ``Psi(z) - psi0(z) z / 2 = f0(s) s / 2 - F(s)`` at ``z = f0(x, s)``."""
    s = _nonneg(s, "s")
    z = f0_eval(x, s, m)
    lhs = Psi_eval(x, z, m) - 0.5 * psi0_eval(x, z, m) * z
    rhs = 0.5 * z * s - F_eval(x, s, m)
    return abs(lhs - rhs)


# -- radial maps on fields ------------------------------------------------------

def _radial(field_: VectorField, law, m: NonlinearityModel) -> VectorField:
    g = m.gamma_on(field_.grid)
    mag = field_.magnitude()
    nz = mag > 0
    ratio = np.zeros_like(mag)
    ratio[nz] = law(g[nz], mag[nz]) / mag[nz]
    return VectorField(field_.grid, field_.data * ratio)


def psi_apply(P: VectorField, m: NonlinearityModel) -> VectorField:
    """``psi(x, P) = psi0(x, |P|) P / |P|``, zero where ``P = 0``."""
    return _radial(P, m.psi0, m)


def f_apply(E: VectorField, m: NonlinearityModel) -> VectorField:
    """``f(x, E) = f0(x, |E|) E / |E|``, zero where ``E = 0``."""
    return _radial(E, m.f0, m)
