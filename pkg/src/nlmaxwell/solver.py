"""Ground states by Nehari-projected descent on the reduced dual functional.

Each iterate ``P`` is divergence-free and sits on the Nehari manifold.  A step
moves against a descent direction ``D``, rescales the trial field back onto
the manifold with :func:`nehari_project` and accepts it under an Armijo test
on ``J~``.  The primal field is recovered as ``E = psi(x, P)``.

Two metrics define ``D`` from the gradient ``G``:

``l2``
    ``D = G``, plain gradient descent with the test
    ``J~(Q) <= J~(P) - armijo * step * |G|^2``.
``j1_hessian`` (default)
    ``D`` solves ``A D = G`` on divergence-free fields, where
    ``A = Pi Dpsi(x, P) Pi`` is the Hessian of the convex part ``J1``.  The
    solve is preconditioned conjugate gradients with the pointwise inverse
    ``Pi Dpsi^{-1} Pi`` and stops at a relative residual of ``inner_tol``.
    The Armijo test uses the slope ``<G, D>``.

``psi`` is very stiff where ``|P|`` is small (``Dpsi ~ |P|^{-(p-2)/(p-1)}``),
which is most of the box once the ground state concentrates, and plain
gradient steps there have to be tiny.  The ``J1`` metric removes that
stiffness; the remaining coupling through ``(-Lap)^{-1}`` is mild.

The energy trace is accumulated from :func:`energy_increment`, which is free
of the cancellation in ``J~(Q) - J~(P)``, so it is nonincreasing by
construction and agrees with direct evaluation to rounding.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fieldio
from .dual_energy import (
    DegenerateDirectionError,
    div_residual,
    energy_increment,
    j_energy,
    j_grad,
    nehari_project,
    nehari_residual,
)
from .field_core import (
    GridSpec,
    VectorField,
    curl,
    curl_curl,
    helmholtz_project,
    inv_laplacian,
    l2_inner,
    weighted_norm_Z,
)
from .material import NonlinearityModel, f_apply, psi_apply

log = logging.getLogger(__name__)

INIT_KINDS = ("gaussian", "single_mode", "from_file")
METRICS = ("j1_hessian", "l2")
MIN_STEP = 1e-14


class StepCollapseError(RuntimeError):
    """Line search found no decrease although the gradient is not small."""


class InitializationError(ValueError):
    """The seed field has no divergence-free part."""


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    tol: float = 1e-6
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    seed: int = 0
    init: str = "gaussian"
    init_file: str | None = None
    metric: str = "j1_hessian"
    inner_tol: float = 1e-2
    inner_max_iters: int = 500
    noise: float = 1e-3
    normalize_init: bool = False
    stall_window: int = 0

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        for name in ("tol", "step0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("backtrack", "armijo"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not 0.0 < self.inner_tol < 1.0:
            raise ValueError(f"inner_tol must lie in (0, 1), got {self.inner_tol}")
        if int(self.inner_max_iters) != self.inner_max_iters or self.inner_max_iters < 1:
            raise ValueError(f"inner_max_iters must be a positive integer, got {self.inner_max_iters}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if int(self.stall_window) != self.stall_window or self.stall_window < 0:
            raise ValueError(f"stall_window must be a nonnegative integer, got {self.stall_window}")
        if self.noise < 0:
            raise ValueError(f"noise must be nonnegative, got {self.noise}")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        if self.init == "from_file" and not self.init_file:
            raise ValueError("init = from_file needs init_file")


@dataclass
class SolverReport:
    converged: bool
    c_level: float
    primal_energy: float
    duality_gap: float
    dual_residual: float
    primal_residual: float
    div_residual: float
    nehari_residual: float
    iterations: int
    energy_trace: list[float]
    residual_trace: list[float]
    nehari_norms: tuple[float, float]
    transfer_constant: float
    min_nehari_norm: float
    symmetry_defect: float
    primal_trivial: bool = False
    message: str = ""
    workers: int = 1
    extra: dict = field(default_factory=dict)


# -- initialization -------------------------------------------------------------

def _on_manifold(P: VectorField, m: NonlinearityModel, normalize: bool) -> VectorField:
    Q = helmholtz_project(P)
    if Q.norm() <= 1e-12 * max(P.norm(), 1e-300):
        raise InitializationError("seed field has no divergence-free part (pure gradient?)")
    if normalize:
        # proof normalization int (-Lap)^{-1} P . P = 1; the Nehari scaling makes it cosmetic
        Q = Q / math.sqrt(l2_inner(inv_laplacian(Q), Q))
    try:
        return nehari_project(Q, m)
    except DegenerateDirectionError as exc:
        raise InitializationError(str(exc)) from exc


def init_field(grid: GridSpec, cfg: SolverConfig, m: NonlinearityModel) -> VectorField:
    if cfg.init == "gaussian":
        r2 = grid.radius**2
        data = np.zeros((3,) + grid.shape)
        data[0] = np.exp(-r2)
        if cfg.noise > 0:
            # noise under a wider envelope: it breaks symmetries of the seed
            # without planting structure in the far field, where psi is stiff
            rng = np.random.default_rng(cfg.seed)
            data += cfg.noise * np.exp(-0.5 * r2) * rng.standard_normal(data.shape)
        seed = VectorField(grid, data)
    elif cfg.init == "single_mode":
        y = grid.coords[None, :, None]
        data = np.zeros((3,) + grid.shape)
        data[0] = np.broadcast_to(np.sin(2.0 * np.pi * y / grid.l), grid.shape)
        seed = VectorField(grid, data)
    else:
        seed = fieldio.read_field(cfg.init_file)
        if seed.grid != grid:
            raise InitializationError(
                f"init file grid (n={seed.grid.n}, l={seed.grid.l}) does not match (n={grid.n}, l={grid.l})"
            )
    return _on_manifold(seed, m, cfg.normalize_init)


# -- descent ----------------------------------------------------------------------

class J1Metric:
    """``A = Pi Dpsi(x, P) Pi`` and its pointwise approximate inverse at a fixed ``P``.

    ``Dpsi = (psi0/z) [(I - n n^T) + sigma n n^T]`` with ``z = |P|``,
    ``n = P/|P|`` and ``sigma = z psi0'(z) / psi0(z)``.
    """

    def __init__(self, P: VectorField, m: NonlinearityModel):
        self.grid = P.grid
        z = P.magnitude()
        g = m.gamma_on(P.grid)
        nz = z > 0
        safe = np.where(nz, z, 1.0)
        self.n = np.where(nz, P.data / safe, 0.0)
        a = np.where(nz, m.psi0(g, safe) / safe, 0.0)
        # psi is not differentiable where P vanishes; use the largest finite modulus there
        if not nz.all():
            a[~nz] = a[nz].max() if nz.any() else 1.0
        self.a = a
        self.inv_a = 1.0 / a
        self.sigma = m.psi0_elasticity(g, safe)

    def _along(self, X: np.ndarray) -> np.ndarray:
        return np.sum(self.n * X, axis=0) * self.n

    def apply(self, X: VectorField) -> VectorField:
        d = X.data
        return helmholtz_project(VectorField(self.grid, self.a * (d + (self.sigma - 1.0) * self._along(d))))

    def precondition(self, X: VectorField) -> VectorField:
        d = X.data
        return helmholtz_project(
            VectorField(self.grid, self.inv_a * (d + (1.0 / self.sigma - 1.0) * self._along(d)))
        )


def pcg(op, prec, b: VectorField, tol: float, max_iters: int) -> tuple[VectorField, int]:
    """Preconditioned conjugate gradients for ``op x = b`` from ``x = 0``.

    Stops when ``|r| <= tol |b|`` or after ``max_iters`` iterations; every
    iterate is a descent direction for a positive definite ``op``.
    """
    x = VectorField.zeros(b.grid)
    r = b
    nb = b.norm()
    if nb == 0.0:
        return x, 0
    zr = prec(r)
    d = zr
    rz = l2_inner(r, zr)
    for k in range(1, max_iters + 1):
        Ad = op(d)
        curv = l2_inner(d, Ad)
        if not curv > 0:
            break
        alpha = rz / curv
        x = x + alpha * d
        r = r - alpha * Ad
        if r.norm() <= tol * nb:
            return x, k
        zr = prec(r)
        rz_new = l2_inner(r, zr)
        d = zr + (rz_new / rz) * d
        rz = rz_new
    return (x if x.norm() > 0 else prec(b)), max_iters


def descent_direction(P: VectorField, G: VectorField, m: NonlinearityModel, cfg: SolverConfig) -> tuple[VectorField, int]:
    """Direction ``D`` for the configured metric and the inner iteration count."""
    if cfg.metric == "l2":
        return G, 0
    A = J1Metric(P, m)
    return pcg(A.apply, A.precondition, G, cfg.inner_tol, cfg.inner_max_iters)


def _relative_residual(G: VectorField, P: VectorField) -> float:
    ref = inv_laplacian(P).norm()
    return G.norm() / ref if ref > 0 else math.inf


def descend_step(
    P: VectorField,
    m: NonlinearityModel,
    cfg: SolverConfig,
    step: float,
    G: VectorField | None = None,
    D: VectorField | None = None,
) -> tuple[VectorField, float, float]:
    """One Armijo-backtracked step.

    Returns ``(Q, accepted step, J~(Q) - J~(P))``.  ``D`` defaults to the
    direction of the configured metric.
    """
    if G is None:
        G = j_grad(P, m)
    if D is None:
        D, _ = descent_direction(P, G, m, cfg)
    slope = l2_inner(G, D)
    while step >= MIN_STEP:
        try:
            Q = nehari_project(P - step * D, m)
        except (DegenerateDirectionError, ValueError):
            step *= cfg.backtrack
            continue
        dj = energy_increment(P, Q, m)
        if dj <= -cfg.armijo * step * slope and dj < 0.0:
            return Q, step, dj
        step *= cfg.backtrack
    if _relative_residual(G, P) <= cfg.tol:
        return P, 0.0, 0.0
    raise StepCollapseError(
        f"no sufficient decrease for step >= {MIN_STEP:g}; relative gradient {_relative_residual(G, P):.3e}"
    )


# -- diagnostics ------------------------------------------------------------------

def reconstruct_primal(P: VectorField, m: NonlinearityModel) -> VectorField:
    return psi_apply(P, m)


def primal_energy(E: VectorField, m: NonlinearityModel) -> float:
    """``I(E) = 1/2 |curl E|_2^2 - int F(x, E)``."""
    c = curl(E)
    g = m.gamma_on(E.grid)
    return 0.5 * l2_inner(c, c) - float(E.grid.cell_volume * np.sum(m.F(g, E.magnitude())))


def primal_residual_info(E: VectorField, m: NonlinearityModel) -> tuple[float, bool]:
    """``(|curl curl E - f(x,E)|_2 / |f(x,E)|_2, trivial)``; ``trivial`` flags a vanishing right side."""
    fE = f_apply(E, m)
    num = (curl_curl(E) - fE).norm()
    den = fE.norm()
    if den <= 1e-30:
        return (0.0, True) if num <= 1e-30 else (math.inf, True)
    return num / den, False


def primal_residual(E: VectorField, m: NonlinearityModel) -> float:
    return primal_residual_info(E, m)[0]


def _rotate_z(data: np.ndarray) -> np.ndarray:
    # R (x, y, z) = (-y, x, z); rotated field R P(R^{-1} x) with R^{-1}(x, y, z) = (y, -x, z)
    n = data.shape[1]
    idx = (-np.arange(n)) % n
    src = data[:, :, idx, :].transpose(0, 2, 1, 3)
    return np.stack((-src[1], src[0], src[2]))


def symmetry_defect(P: VectorField) -> float:
    """Largest relative change of ``P`` under a quarter turn about each box axis."""
    norm = np.sqrt(np.sum(P.data**2))
    if norm == 0:
        return 0.0
    worst = 0.0
    for perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        # cycle the axes so that the rotation axis becomes z
        d = P.data[list(perm)].transpose((0,) + tuple(1 + np.array(perm)))
        rot = _rotate_z(d)
        worst = max(worst, float(np.sqrt(np.sum((rot - d) ** 2)) / norm))
    return worst


# -- driver -----------------------------------------------------------------------

def solve_ground_state(
    grid: GridSpec,
    m: NonlinearityModel,
    cfg: SolverConfig,
    P0: VectorField | None = None,
    time_limit: float | None = None,
) -> tuple[VectorField, SolverReport]:
    """Descend from the configured seed (or ``P0``) until the dual residual meets ``tol``.

    The run also ends, unconverged, at ``max_iters``, on a step collapse, when
    ``cfg.stall_window > 0`` and the median residual of the last
    ``stall_window`` iterations is not below the median of the
    ``stall_window`` iterations before them, or once
    ``time_limit`` seconds of wall time have passed.  Only the last of these
    makes the outcome depend on the machine.
    """
    ratio = m.weight.boundary_ratio(grid)
    if ratio > 1e-2:
        log.warning("Gamma(l/2)/Gamma(0) = %.3e > 1e-2; the box may be too small for the weight decay", ratio)
    P = init_field(grid, cfg, m) if P0 is None else _on_manifold(P0, m, False)
    energy = j_energy(P, m).j
    trace = [energy]
    residuals = []
    inner_total = 0
    min_norm = math.inf
    step = cfg.step0
    converged = False
    message = "max_iters reached before the dual residual met tol"
    it = 0
    t0 = time.perf_counter()
    while True:
        G = j_grad(P, m)
        res = _relative_residual(G, P)
        residuals.append(res)
        min_norm = min(min_norm, sum(weighted_norm_Z(P, m)))
        if res <= cfg.tol:
            converged = True
            message = "converged"
            break
        if it >= cfg.max_iters:
            break
        w = cfg.stall_window
        # the residual oscillates from step to step, so compare window medians
        if w and len(residuals) >= 2 * w and (
            np.median(residuals[-w:]) >= np.median(residuals[-2 * w:-w])
        ):
            message = f"stalled: median residual did not decrease over {w} iterations"
            break
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            message = f"time limit of {time_limit:g} s reached"
            break
        D, inner = descent_direction(P, G, m, cfg)
        inner_total += inner
        try:
            P, accepted, dj = descend_step(P, m, cfg, step, G=G, D=D)
        except StepCollapseError as exc:
            message = f"step collapse: {exc}"
            break
        it += 1
        energy += dj
        trace.append(energy)
        step = min(accepted / cfg.backtrack, cfg.step0)
        if it % 25 == 0:
            log.info("iter %d  J~ = %.15e  residual = %.3e  step = %.3g  inner = %d", it, energy, res, accepted, inner)
    log.info("solve finished after %d iterations in %.1f s: %s", it, time.perf_counter() - t0, message)
    rep = assemble_report(P, m, converged, it, trace, residuals, min_norm, message)
    rep.extra.update(tol=cfg.tol, metric=cfg.metric, inner_iterations=inner_total)
    return P, rep


def assemble_report(P, m, converged, iterations, trace, residuals, min_norm, message) -> SolverReport:
    E = reconstruct_primal(P, m)
    c_level = j_energy(P, m).j
    ie = primal_energy(E, m)
    dual_res = residuals[-1] if residuals else _relative_residual(j_grad(P, m), P)
    prim_res, trivial = primal_residual_info(E, m)
    return SolverReport(
        converged=converged,
        c_level=c_level,
        primal_energy=ie,
        duality_gap=abs(c_level - ie) / max(1.0, abs(c_level)),
        dual_residual=dual_res,
        primal_residual=prim_res,
        div_residual=div_residual(P),
        nehari_residual=nehari_residual(P, m),
        iterations=iterations,
        energy_trace=list(trace),
        residual_trace=list(residuals),
        nehari_norms=weighted_norm_Z(P, m),
        transfer_constant=prim_res / dual_res if dual_res > 0 else 0.0,
        min_nehari_norm=min_norm,
        symmetry_defect=symmetry_defect(P),
        primal_trivial=trivial,
        message=message,
    )


def solve_multi_seed(
    grid: GridSpec,
    m: NonlinearityModel,
    cfg: SolverConfig,
    seeds,
    workers: int = 1,
) -> tuple[VectorField, SolverReport, list[SolverReport]]:
    """Independent solves from several seeds; returns the lowest converged level.

    Reports are kept in seed order regardless of completion order.
    """
    seeds = list(seeds)
    cfgs = [replace(cfg, seed=s) for s in seeds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: solve_ground_state(grid, m, c), cfgs))
    else:
        results = [solve_ground_state(grid, m, c) for c in cfgs]
    pool_ = [r for r in results if r[1].converged] or results
    best = min(pool_, key=lambda r: r[1].c_level)
    return best[0], best[1], [r[1] for r in results]
