"""Invariant suites run by ``nlmaxwell check``.

``quick`` runs every suite on n = 8 grids.  ``full`` runs them on n = 16 and
adds one end-to-end solve at n = 24.  Each check yields a :class:`CheckResult`
carrying the measured value and the threshold it was held to.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fieldio
from .dual_energy import (
    fibering_gamma,
    j_energy,
    j_grad,
    nehari_project,
    nehari_residual,
    nehari_scale,
    power_fiber_constants,
)
from .field_core import (
    GridSpec,
    VectorField,
    curl,
    curl_curl,
    divergence,
    helmholtz_project,
    inv_laplacian,
    l2_inner,
    neg_laplacian,
    to_physical,
    to_spectral,
)
from .material import (
    NonlinearityModel,
    WeightSpec,
    f0_eval,
    fenchel_defect,
    psi0_eval,
)
from .solver import SolverConfig, solve_ground_state

LEVELS = {"quick": 8, "full": 16}


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.suite}: {self.name}  {self.value:.3e} <= {self.threshold:.1e}"


def random_field(grid: GridSpec, rng) -> VectorField:
    return VectorField(grid, rng.standard_normal((3,) + grid.shape))


def remove_kernel(f: VectorField) -> VectorField:
    """Drop the Fourier modes with zero discrete wavevector (mean and Nyquist checkerboards)."""
    fh = np.fft.fftn(f.data, axes=(1, 2, 3))
    fh[:, f.grid.k2 == 0] = 0.0
    return VectorField(f.grid, np.fft.ifftn(fh, axes=(1, 2, 3)).real)


def default_models() -> dict[str, NonlinearityModel]:
    w = WeightSpec(2.0)
    s = np.geomspace(1e-3, 1e3, 13)
    return {
        "pure_power": NonlinearityModel("pure_power", 4.0, w),
        "double_power": NonlinearityModel("double_power", 3.0, w, q=5.0),
        "custom_monotone": NonlinearityModel(
            "custom_monotone", 3.5, w, q=4.5, table_s=tuple(s), table_f=tuple(s**3 + s**4)
        ),
    }


def operator_suite(n: int, rng, samples: int = 10) -> list[CheckResult]:
    grid = GridSpec(n, 2.0 * np.pi)
    worst = dict.fromkeys(
        ("dft round trip", "projector idempotence", "div of projection", "curl of gradient part",
         "curl_curl = -Lap on solenoidal part", "curl_curl of gradient part",
         "curl_curl = curl o curl", "inverse Laplacian round trip"),
        0.0,
    )
    for _ in range(samples):
        f = random_field(grid, rng)
        nf = f.norm()
        pf = helmholtz_project(f)
        rest = f - pf
        back = to_physical(to_spectral(f))
        worst["dft round trip"] = max(worst["dft round trip"],
                                      np.max(np.abs(back.data - f.data)) / np.max(np.abs(f.data)))
        vals = {
            "projector idempotence": (helmholtz_project(pf) - pf).norm() / nf,
            "div of projection": np.sqrt(grid.cell_volume * np.sum(divergence(pf) ** 2)) / nf,
            "curl of gradient part": curl(rest).norm() / nf,
            "curl_curl = -Lap on solenoidal part": (curl_curl(pf) - neg_laplacian(pf)).norm() / nf,
            "curl_curl of gradient part": curl_curl(rest).norm() / nf,
            "curl_curl = curl o curl": (curl_curl(f) - curl(curl(f))).norm() / max(curl_curl(f).norm(), 1e-300),
        }
        g = remove_kernel(f)
        vals["inverse Laplacian round trip"] = (neg_laplacian(inv_laplacian(g)) - g).norm() / g.norm()
        for k, v in vals.items():
            worst[k] = max(worst[k], float(v))
    thresholds = {"dft round trip": 1e-13, "projector idempotence": 1e-12}
    return [CheckResult("field_core", k, v, thresholds.get(k, 1e-11)) for k, v in worst.items()]


def material_suite(rng, samples: int = 100) -> list[CheckResult]:
    out = []
    ladder = 2.0 ** np.arange(-10, 11)
    for name, m in default_models().items():
        inv_res = fy = 0.0
        mono = 0
        for _ in range(samples):
            x = rng.uniform(-4, 4, 3)
            s = float(np.exp(rng.uniform(-3, 3)))
            z = f0_eval(x, s, m)
            inv_res = max(inv_res, abs(psi0_eval(x, z, m) - s) / s, abs(f0_eval(x, psi0_eval(x, s, m), m) - s) / s)
            fy = max(fy, fenchel_defect(x, s, m) / max(1.0, 0.5 * z * s))
            g = m.weight(np.linalg.norm(x))
            mono += int(np.any(np.diff(m.f0(g, ladder) / ladder) <= 0))
            ratio = m.psi0(g, ladder) / ladder
            mono += int(np.any(np.diff(m.psi0(g, ladder)) < 0) or np.any(np.diff(ratio) > 0))
        out += [
            CheckResult("material", f"{name} inverse pair", inv_res, 1e-10),
            CheckResult("material", f"{name} Fenchel-Young defect", fy, 1e-9),
            CheckResult("material", f"{name} monotonicity ladder violations", float(mono), 0.0),
        ]
    return out


def _solenoidal(grid, rng) -> VectorField:
    return helmholtz_project(random_field(grid, rng))


def dual_suite(n: int, rng, samples: int = 5) -> list[CheckResult]:
    grid = GridSpec(n, 8.0)
    m = default_models()["pure_power"]
    grad_err = t_err = hom_err = neh = fd_err = 0.0
    for _ in range(samples):
        P = _solenoidal(grid, rng)
        V = _solenoidal(grid, rng)
        G = j_grad(P, m)
        exact = l2_inner(G, V)
        best = np.inf
        for h in (1e-3, 1e-4, 1e-5, 1e-6):
            fd = (j_energy(P + h * V, m).j - j_energy(P - h * V, m).j) / (2 * h)
            best = min(best, abs(fd - exact) / max(abs(exact), 1e-300))
        grad_err = max(grad_err, best)
        a, b = power_fiber_constants(P, m)
        t_closed = (a / b) ** (1.0 / (2.0 - m.p_conj))
        t = nehari_scale(P, m).t_star
        t_err = max(t_err, abs(t - t_closed) / t_closed)
        for c in (0.5, 2.0, 10.0):
            hom_err = max(hom_err, abs(nehari_scale(c * P, m).t_star * c - t) / t)
        neh = max(neh, nehari_residual(nehari_project(P, m), m))
        h = 1e-4 * t
        gp = fibering_gamma(P, m, t)[1]
        fd = (fibering_gamma(P, m, t + h)[0] - fibering_gamma(P, m, t - h)[0]) / (2 * h)
        fd_err = max(fd_err, abs(fd - gp) / max(1.0, abs(fibering_gamma(P, m, t)[0])))
    return [
        CheckResult("dual_energy", "gradient vs central differences", grad_err, 1e-5),
        CheckResult("dual_energy", "Nehari scale vs closed form", t_err, 1e-10),
        CheckResult("dual_energy", "Nehari scale homogeneity", hom_err, 1e-10),
        CheckResult("dual_energy", "Nehari residual after projection", neh, 1e-9),
        CheckResult("dual_energy", "fibering slope vs central differences", fd_err, 1e-7),
    ]


def io_suite(rng) -> list[CheckResult]:
    mismatches = 0
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "f.nmx"
        for n in (4, 8):
            f = random_field(GridSpec(n, 3.0), rng)
            fieldio.write_field(f, fieldio.KIND_GENERIC, path)
            g = fieldio.read_field(path)
            mismatches += int(g.data.tobytes() != f.data.tobytes())
            mismatches += int(path.stat().st_size != 24 + 24 * n**3)
    return [CheckResult("io", "field file round trip mismatches", float(mismatches), 0.0)]


def solve_suite(n: int = 24) -> list[CheckResult]:
    grid = GridSpec(n, 16.0)
    m = default_models()["pure_power"]
    # a run that stops improving is reported as a failure instead of using up max_iters
    cfg = SolverConfig(stall_window=100)
    _, rep = solve_ground_state(grid, m, cfg)
    return [
        CheckResult("solver", f"dual residual at n = {n}", rep.dual_residual, cfg.tol),
        CheckResult("solver", "divergence residual", rep.div_residual, 1e-10),
        CheckResult("solver", "duality gap", rep.duality_gap, max(10 * cfg.tol, 1e-8)),
        CheckResult("solver", "primal residual", rep.primal_residual, 100 * cfg.tol),
        CheckResult("solver", "energy trace increases", float(np.sum(np.diff(rep.energy_trace) > 0)), 0.0),
        CheckResult("solver", "nonpositive c_level", float(rep.c_level <= 0.0), 0.0),
    ]


def run_checks(level: str = "quick", seed: int = 0) -> list[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"check level must be one of {tuple(LEVELS)}, got {level!r}")
    rng = np.random.default_rng(seed)
    n = LEVELS[level]
    results = operator_suite(n, rng) + material_suite(rng) + dual_suite(n, rng) + io_suite(rng)
    if level == "full":
        results += solve_suite(24)
    return results
