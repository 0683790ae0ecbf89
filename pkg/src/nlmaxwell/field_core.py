"""Periodic grid, FFTs and Fourier-multiplier operators on 3-component fields.

The box is ``[-l/2, l/2)^3`` with periodic boundary conditions and the box
center at the coordinate origin.  Fields are stored as arrays of shape
``(3, n, n, n)`` indexed ``[component, ix, iy, iz]``.

Every multiplier uses one wavevector array in which the unpaired Nyquist
frequency is set to zero.  A mode that carries the Nyquist frequency along
any axis therefore has no consistent second derivative: a Laplacian built
from the zeroed wavevector underrates its curvature and ``(-Lap)^{-1}``
overrates its energy, which lets grid-scale sheets undercut smooth fields.
These modes and the mean form the kernel: every operator below annihilates
them.  With this choice curl, div, curl-curl, the Helmholtz projector and the
inverse Laplacian satisfy the continuum algebra (``curl_curl = curl o curl``,
``div o Pi = 0``, ``curl_curl Pi = -Lap Pi``) exactly on the torus.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

# relative imaginary residue allowed in an inverse transform before it is
# treated as a broken (non conjugate-symmetric) spectrum
IMAG_ERROR_TOL = 1e-9


class SpectralSymmetryError(ValueError):
    """Inverse transform produced a field with a large imaginary part."""


class NonFiniteFieldError(ValueError):
    """A field contains NaN or Inf entries."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    l: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"grid.n must be an even integer >= 4, got {self.n}")
        if not (np.isfinite(self.l) and self.l > 0):
            raise ValueError(f"grid.l must be positive, got {self.l}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "l", float(self.l))

    @property
    def h(self) -> float:
        return self.l / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def coords(self) -> np.ndarray:
        """1-D node coordinates ``-l/2 + j h``; node ``n/2`` is the box center."""
        return -0.5 * self.l + self.h * np.arange(self.n)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Integer frequencies in FFT order, ``-n/2`` included once."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """``2 pi m / l`` in FFT order with the Nyquist entry set to zero."""
        k = 2.0 * np.pi * self.frequencies / self.l
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.wavenumbers
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def resolved(self) -> np.ndarray:
        """True on modes without a Nyquist index along any axis."""
        ok = self.frequencies != -(self.n // 2)
        return ok[:, None, None] & ok[None, :, None] & ok[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        """``|k|^2``, zero on the kernel modes (the mean and every Nyquist mode)."""
        kx, ky, kz = self.kvec
        return np.where(self.resolved, kx**2 + ky**2 + kz**2, 0.0)

    @cached_property
    def inv_k2(self) -> np.ndarray:
        """``1/|k|^2`` with zero on the kernel modes."""
        k2 = self.k2
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0)
        return out

    @cached_property
    def half_kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavevector on the real-FFT half spectrum (last axis ``0..n/2``)."""
        k = self.wavenumbers
        kz = k[: self.n // 2 + 1].copy()
        kz[-1] = 0.0
        return (k[:, None, None], k[None, :, None], kz[None, None, :])

    @cached_property
    def half_resolved(self) -> np.ndarray:
        return self.resolved[:, :, : self.n // 2 + 1]

    @cached_property
    def half_k2(self) -> np.ndarray:
        kx, ky, kz = self.half_kvec
        return np.where(self.half_resolved, kx**2 + ky**2 + kz**2, 0.0)

    @cached_property
    def half_inv_k2(self) -> np.ndarray:
        k2 = self.half_k2
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0)
        return out

    @cached_property
    def radius(self) -> np.ndarray:
        """Distance of every node to the box center, shape ``(n, n, n)``."""
        x = self.coords
        return np.sqrt(x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.coords, self.coords, self.coords, indexing="ij"))


def _check_finite(data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteFieldError("field contains non-finite entries")


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        n = self.grid.n
        if data.shape != (3, n, n, n):
            raise ValueError(f"expected data of shape (3, {n}, {n}, {n}), got {data.shape}")
        _check_finite(data)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.shape))

    @classmethod
    def from_components(cls, grid: GridSpec, c1, c2, c3) -> "VectorField":
        data = np.empty((3,) + grid.shape)
        for i, c in enumerate((c1, c2, c3)):
            data[i] = c
        return cls(grid, data)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.data**2, axis=0))

    def norm(self) -> float:
        """Discrete L2 norm ``sqrt(l2_inner(f, f))``."""
        return float(np.sqrt(l2_inner(self, self)))

    def _other(self, other):
        if isinstance(other, VectorField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.data
        return other

    def __add__(self, other):
        return VectorField(self.grid, self.data + self._other(other))

    def __sub__(self, other):
        return VectorField(self.grid, self.data - self._other(other))

    def __mul__(self, c):
        return VectorField(self.grid, self.data * c)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.data)

    def __truediv__(self, c):
        return VectorField(self.grid, self.data / c)


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    grid: GridSpec
    data: np.ndarray


_AXES = (1, 2, 3)


def to_spectral(f: VectorField) -> SpectralVectorField:
    """Componentwise unnormalized forward DFT."""
    return SpectralVectorField(f.grid, np.fft.fftn(f.data, axes=_AXES))


def _real_part(grid: GridSpec, data: np.ndarray) -> np.ndarray:
    out = np.fft.ifftn(data, axes=_AXES)
    scale = float(np.max(np.abs(out)))
    if scale > 0 and np.max(np.abs(out.imag)) > IMAG_ERROR_TOL * scale:
        raise SpectralSymmetryError(
            "inverse transform has a relative imaginary residue of "
            f"{np.max(np.abs(out.imag)) / scale:.3e}; spectrum is not conjugate-symmetric"
        )
    real = np.ascontiguousarray(out.real)
    _check_finite(real)
    return real


def to_physical(g: SpectralVectorField) -> VectorField:
    """Inverse of :func:`to_spectral`; a small imaginary residue is discarded.

    Raises :class:`SpectralSymmetryError` when the spectrum is far from
    conjugate-symmetric, since the real part would then misrepresent it.
    """
    return VectorField(g.grid, _real_part(g.grid, g.data))


# -- multipliers on real-FFT half spectra of shape (3, n, n, n/2 + 1) --------
#
# Real input transformed with rfftn gives a Hermitian spectrum; every
# multiplier below maps Hermitian spectra to Hermitian spectra, so irfftn
# returns the exact real result without an imaginary residue to inspect.

def _fwd(grid: GridSpec, data: np.ndarray) -> np.ndarray:
    """Half spectrum with the Nyquist modes removed."""
    return sfft.rfftn(data, axes=(-3, -2, -1)) * grid.half_resolved


def _inv(grid: GridSpec, data: np.ndarray) -> np.ndarray:
    out = sfft.irfftn(data, s=grid.shape, axes=(-3, -2, -1))
    _check_finite(out)
    return out


def _curl_hat(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.half_kvec
    return 1j * np.stack(
        (ky * fh[2] - kz * fh[1], kz * fh[0] - kx * fh[2], kx * fh[1] - ky * fh[0])
    )


def _kdot(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.half_kvec
    return kx * fh[0] + ky * fh[1] + kz * fh[2]


def _project_hat(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.half_kvec
    s = _kdot(grid, fh) * grid.half_inv_k2
    out = np.stack((fh[0] - s * kx, fh[1] - s * ky, fh[2] - s * kz))
    out[:, grid.half_k2 == 0] = 0.0
    return out


def _curl_curl_hat(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.half_kvec
    k2 = grid.half_k2
    d = _kdot(grid, fh)
    return np.stack((k2 * fh[0] - d * kx, k2 * fh[1] - d * ky, k2 * fh[2] - d * kz))


def _apply(f: VectorField, op) -> VectorField:
    return VectorField(f.grid, _inv(f.grid, op(f.grid, _fwd(f.grid, f.data))))


# -- public operators ---------------------------------------------------------

def curl(f: VectorField) -> VectorField:
    return _apply(f, _curl_hat)


def divergence(f: VectorField) -> np.ndarray:
    return _inv(f.grid, 1j * _kdot(f.grid, _fwd(f.grid, f.data)))


def gradient(phi: np.ndarray, grid: GridSpec) -> VectorField:
    """Spectral gradient of a scalar field of shape ``(n, n, n)``."""
    ph = _fwd(grid, np.asarray(phi, dtype=np.float64))
    kx, ky, kz = grid.half_kvec
    return VectorField(grid, _inv(grid, 1j * np.stack((kx * ph, ky * ph, kz * ph))))


def curl_curl(f: VectorField) -> VectorField:
    """``curl curl f`` as the single multiplier ``|k|^2 f - (k.f) k``."""
    return _apply(f, _curl_curl_hat)


def helmholtz_project(f: VectorField) -> VectorField:
    """Divergence-free part ``Pi f``; kernel modes are set to zero."""
    return _apply(f, _project_hat)


def inv_laplacian(f: VectorField) -> VectorField:
    """``(-Lap)^{-1}`` via the multiplier ``1/|k|^2``; kernel modes are set to zero."""
    return _apply(f, lambda g, fh: fh * g.half_inv_k2)


def neg_laplacian(f: VectorField) -> VectorField:
    return _apply(f, lambda g, fh: fh * g.half_k2)


def l2_inner(f: VectorField, g: VectorField) -> float:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    # np.sum reduces pairwise in a fixed order
    return float(f.grid.cell_volume * np.sum(f.data * g.data))


def lr_norm(values: np.ndarray, r: float, grid: GridSpec) -> float:
    """``(h^3 sum |values|^r)^(1/r)`` for a nonnegative scalar array."""
    return float((grid.cell_volume * np.sum(np.abs(values) ** r)) ** (1.0 / r))


def weighted_norm_Z(f: VectorField, model) -> tuple[float, float]:
    """The two terms of the Z-norm, ``(|Gamma^{-1/p} f|_{p'}, |Gamma^{-1/q} f|_{q'})``.

    ``model`` must provide ``p``, ``q`` and ``gamma_on(grid)``.
    """
    gamma = model.gamma_on(f.grid)
    mag = f.magnitude()
    p, q = model.p, model.q
    return (
        lr_norm(gamma ** (-1.0 / p) * mag, p / (p - 1.0), f.grid),
        lr_norm(gamma ** (-1.0 / q) * mag, q / (q - 1.0), f.grid),
    )
