"""Weyl symbols and their Fourier transforms on a discretized position grid.

Conventions (ħ = 1):

* operators are matrices in the grid basis ``|j> = sqrt(dx)|x_j>``, so the
  position kernel is ``<x|A|x'> = A_jl / dx``;
* the Weyl symbol is ``A(x, p) = ∫dy <x+y/2|A|x-y/2> e^{-ipy}``, which gives
  ``Tr[AB] = (1/2π)^n ∫ A·B dξ``;
* the chi function is ``f~(η) = (1/2π)^n ∫ f(ξ) e^{-iξ·η} dξ`` with
  ``ξ·η = xκ + pω``.  The trace rule then reads
  ``Tr[AB] = (1/2π)^n ∫ A~(η) B~(-η) dη``.

On the grid, separations ``y = d·dx`` with odd ``d`` have their midpoints on
the half-lattice; those diagonals are moved onto the lattice by a
band-limited half-sample shift.  The separation-n/2 diagonal wraps onto
itself on the periodic grid and is re-encoded (see ``_fold_nyquist``).  The
discrete transform is then exactly invertible, and the trace rule and the
reality of Hermitian symbols hold to rounding error for every grid operator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .operator_core import LabeledOperator, operator_norm

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Periodic position grid ``x_j = x_min + j·dx`` and its Fourier-dual axes."""

    x_min: float = -8.0
    x_max: float = 8.0
    n_points: int = 64

    def __post_init__(self):
        n = self.n_points
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        offset = -self.x_min / self.dx
        if abs(offset - round(offset)) > 1e-9 or not 0 <= round(offset) < n:
            raise ValueError("the origin must be a grid point")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dp(self) -> float:
        return TWO_PI / self.length

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def p(self) -> np.ndarray:
        return self.dp * (np.arange(self.n_points) - self.n_points // 2)

    # Fourier-dual axes: κ is dual to x, ω to p.
    @property
    def dkappa(self) -> float:
        return self.dp

    @property
    def domega(self) -> float:
        return self.dx

    @property
    def kappa(self) -> np.ndarray:
        return self.p

    @property
    def omega(self) -> np.ndarray:
        return self.dx * (np.arange(self.n_points) - self.n_points // 2)

    @property
    def origin_index(self) -> int:
        return int(round(-self.x_min / self.dx))

    @property
    def zero_index(self) -> int:
        """Index of 0 on the centered axes (p, κ, ω)."""
        return self.n_points // 2

    @property
    def cell_xi(self) -> float:
        """Phase-space cell ``dx·dp`` (equals 2π/n)."""
        return self.dx * self.dp

    @property
    def cell_eta(self) -> float:
        return self.dkappa * self.domega


def _grids_for(grids, n_modes) -> tuple:
    if isinstance(grids, PhaseSpaceGrid):
        return (grids,) * n_modes
    grids = tuple(grids)
    if len(grids) != n_modes:
        raise ValueError(f"need {n_modes} grids, got {len(grids)}")
    return grids


@dataclass
class WignerGrid:
    """Weyl symbol sampled on ``(x_1, p_1, x_2, p_2, ...)``."""

    grids: tuple
    values: np.ndarray
    mode_labels: tuple = field(default=())

    def __post_init__(self):
        self.grids = tuple(self.grids)
        if not self.mode_labels:
            self.mode_labels = tuple(f"m{i}" for i in range(len(self.grids)))
        shape = tuple(s for g in self.grids for s in (g.n_points, g.n_points))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {shape}")

    @property
    def n_modes(self) -> int:
        return len(self.grids)

    def cell(self) -> float:
        return float(np.prod([g.cell_xi for g in self.grids]))

    def integral(self) -> complex:
        """``(1/2π)^n Σ values dξ`` (the trace of the underlying operator)."""
        return complex(self.values.sum() * self.cell() / TWO_PI**self.n_modes)

    def axes(self):
        return [a for g in self.grids for a in (g.x, g.p)]

    def axis_names(self):
        return [f"{k}_{m}" for m in self.mode_labels for k in ("x", "p")]


@dataclass
class ChiGrid:
    """Chi function sampled on ``(κ_1, ω_1, κ_2, ω_2, ...)``."""

    grids: tuple
    values: np.ndarray
    mode_labels: tuple = field(default=())

    def __post_init__(self):
        self.grids = tuple(self.grids)
        if not self.mode_labels:
            self.mode_labels = tuple(f"m{i}" for i in range(len(self.grids)))
        shape = tuple(s for g in self.grids for s in (g.n_points, g.n_points))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {shape}")

    @property
    def n_modes(self) -> int:
        return len(self.grids)

    def cell(self) -> float:
        return float(np.prod([g.cell_eta for g in self.grids]))

    def axes(self):
        return [a for g in self.grids for a in (g.kappa, g.omega)]

    def axis_names(self):
        return [f"{k}_{m}" for m in self.mode_labels for k in ("kappa", "omega")]

    def reflected(self) -> np.ndarray:
        """Values at ``-η`` on the same grid."""
        out = self.values
        for ax in range(out.ndim):
            out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
        return out

    def hermiticity_error(self) -> float:
        """``max |f(-η) - conj f(η)|``; zero for Hermitian operators."""
        return float(np.max(np.abs(self.reflected() - self.values.conj())))


# -- single-mode kernels -------------------------------------------------------

@lru_cache(maxsize=16)
def _center_difference_indices(n: int):
    """Row/col index of the kernel entry for (center c, separation d).

    ``d`` runs over FFT order (0, 1, ..., n/2-1, -n/2, ..., -1).  For odd ``d``
    the entry's midpoint is ``c + 1/2``.
    """
    d = np.fft.fftfreq(n, 1.0 / n).astype(int)
    c = np.arange(n)[:, None]
    even = (d % 2) == 0
    hi = np.where(even, d // 2, (d + 1) // 2)
    lo = np.where(even, d // 2, (d - 1) // 2)
    rows = (c + hi[None, :]) % n
    cols = (c - lo[None, :]) % n
    return rows, cols


@lru_cache(maxsize=16)
def _half_shift_phase(n: int) -> np.ndarray:
    """FFT-domain factor moving odd-separation diagonals from c+1/2 to c.

    Shape (n, n): frequency along the center axis × separation (FFT order).
    The Nyquist frequency gets phase 1 so the shift stays odd-symmetric,
    which keeps the trace pairing exact and Hermitian symbols real.
    """
    k = np.fft.fftfreq(n, 1.0 / n)
    phase = np.exp(-1j * np.pi * k / n)
    phase[n // 2] = 1.0
    d = np.fft.fftfreq(n, 1.0 / n).astype(int)
    odd = (d % 2) != 0
    return np.where(odd[None, :], phase[:, None], 1.0)


def _fold_nyquist(k: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Re-encode the separation-n/2 diagonal.

    Entry (c, n/2) is the transpose partner of (c + n/2, n/2), so the diagonal
    is stored as ``S + iF`` with ``S``/``F`` its parts that are even/odd under
    a half-period shift of the center.  This keeps the pairing exact.
    """
    n = k.shape[-1]
    e = k[..., :, n // 2]
    rolled = np.roll(e, -(n // 2), axis=-1)
    if inverse:
        s, f = 0.5 * (e + rolled), -0.5j * (e - rolled)
    else:
        s, f = 0.5 * (e + rolled), 0.5j * (e - rolled)
    k[..., :, n // 2] = s + f
    return k


def _weyl_last2(a: np.ndarray) -> np.ndarray:
    """Transform the trailing (row, col) axes into (x, p)."""
    n = a.shape[-1]
    rows, cols = _center_difference_indices(n)
    k = a[..., rows, cols]  # (..., c, d)
    k = np.fft.ifft(np.fft.fft(k, axis=-2) * _half_shift_phase(n), axis=-2)
    k = _fold_nyquist(k)
    return np.fft.fftshift(np.fft.fft(k, axis=-1), axes=-1)


def _inverse_weyl_last2(w: np.ndarray) -> np.ndarray:
    n = w.shape[-1]
    rows, cols = _center_difference_indices(n)
    k = np.fft.ifft(np.fft.ifftshift(w, axes=-1), axis=-1)
    k = _fold_nyquist(k, inverse=True)
    k = np.fft.ifft(np.fft.fft(k, axis=-2) / _half_shift_phase(n), axis=-2)
    out = np.empty_like(k)
    out[..., rows, cols] = k
    return out


def _apply_per_mode(t: np.ndarray, n_modes: int, func) -> np.ndarray:
    """Apply ``func`` to each consecutive axis pair (2m, 2m+1)."""
    for m in range(n_modes):
        t = np.moveaxis(t, (2 * m, 2 * m + 1), (-2, -1))
        t = func(t, m)
        t = np.moveaxis(t, (-2, -1), (2 * m, 2 * m + 1))
    return t


def _interleave_rows_cols(data: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    k = len(dims)
    t = data.reshape(tuple(dims) * 2)
    order = [i for m in range(k) for i in (m, k + m)]
    return t.transpose(order)


def _deinterleave(t: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    k = len(dims)
    order = [2 * m for m in range(k)] + [2 * m + 1 for m in range(k)]
    d = int(np.prod(dims))
    return t.transpose(order).reshape(d, d)


# -- public transforms -------------------------------------------------------

def weyl_symbol(op: LabeledOperator, grids) -> WignerGrid:
    """Weyl symbol of a grid operator, one phase-space plane per subsystem."""
    grids = _grids_for(grids, len(op.labels))
    for s, g in zip(op.labels, grids):
        if s.dim != g.n_points:
            raise ValueError(f"subsystem {s.name} has dim {s.dim}, grid has {g.n_points} points")
    t = _interleave_rows_cols(op.data, op.dims)
    t = _apply_per_mode(t, len(grids), lambda a, m: _weyl_last2(a))
    return WignerGrid(grids, t, op.names)


def inverse_weyl(wg: WignerGrid) -> LabeledOperator:
    t = _apply_per_mode(wg.values.astype(complex), wg.n_modes, lambda a, m: _inverse_weyl_last2(a))
    dims = [g.n_points for g in wg.grids]
    labels = [(name, g.n_points) for name, g in zip(wg.mode_labels, wg.grids)]
    return LabeledOperator(labels, _deinterleave(t, dims))


def chi_transform(wg: WignerGrid) -> ChiGrid:
    def fwd(a, m):
        g = wg.grids[m]
        a = np.fft.fftshift(np.fft.fft(a, axis=-2), axes=-2)
        a = a * np.exp(-1j * g.x_min * g.kappa)[:, None]
        a = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(a, axes=-1), axis=-1), axes=-1)
        return a / g.n_points

    return ChiGrid(wg.grids, _apply_per_mode(wg.values.astype(complex), wg.n_modes, fwd), wg.mode_labels)


def inverse_chi(cg: ChiGrid) -> WignerGrid:
    def inv(a, m):
        g = cg.grids[m]
        a = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(a, axes=-1), axis=-1), axes=-1)
        a = a * np.exp(1j * g.x_min * g.kappa)[:, None]
        a = np.fft.ifft(np.fft.ifftshift(a, axes=-2), axis=-2)
        return a * g.n_points

    return WignerGrid(cg.grids, _apply_per_mode(cg.values.astype(complex), cg.n_modes, inv), cg.mode_labels)


@lru_cache(maxsize=16)
def _chi_phase(n: int) -> np.ndarray:
    """Half-shift and Nyquist re-encoding, both diagonal in center frequency."""
    ph = _half_shift_phase(n).copy()
    k = np.arange(n)
    ph[:, n // 2] *= np.where(k % 2 == 0, 1.0, 1j)
    return ph


@lru_cache(maxsize=16)
def _omega_from_separation(n: int) -> np.ndarray:
    """Separation column (FFT order) feeding each centered ω index: ω = -y."""
    b = np.arange(n) - n // 2
    return (-b) % n


def _op_chi_last2(a: np.ndarray, g: PhaseSpaceGrid) -> np.ndarray:
    n = g.n_points
    rows, cols = _center_difference_indices(n)
    k = np.fft.fft(a[..., rows, cols], axis=-2)
    k *= _chi_phase(n)
    k = np.fft.fftshift(k, axes=-2)
    k *= np.exp(-1j * g.x_min * g.kappa)[:, None]
    return k[..., _omega_from_separation(n)]


def _chi_op_last2(c: np.ndarray, g: PhaseSpaceGrid) -> np.ndarray:
    n = g.n_points
    rows, cols = _center_difference_indices(n)
    k = np.empty_like(c)
    k[..., _omega_from_separation(n)] = c
    k *= np.exp(1j * g.x_min * g.kappa)[:, None]
    k = np.fft.ifftshift(k, axes=-2)
    k /= _chi_phase(n)
    k = np.fft.ifft(k, axis=-2)
    out = np.empty_like(k)
    out[..., rows, cols] = k
    return out


def operator_chi(op: LabeledOperator, grids) -> ChiGrid:
    """``chi_transform(weyl_symbol(op))`` without the intermediate symbol.

    The momentum transform of the Weyl symbol and the ω transform of the chi
    function cancel, leaving a reflection of the separation axis.
    """
    grids = _grids_for(grids, len(op.labels))
    for s, g in zip(op.labels, grids):
        if s.dim != g.n_points:
            raise ValueError(f"subsystem {s.name} has dim {s.dim}, grid has {g.n_points} points")
    t = _interleave_rows_cols(op.data, op.dims)
    t = _apply_per_mode(t, len(grids), lambda a, m: _op_chi_last2(a, grids[m]))
    return ChiGrid(grids, t, op.names)


def chi_operator(cg: ChiGrid) -> LabeledOperator:
    """Inverse of :func:`operator_chi`."""
    t = _apply_per_mode(cg.values.astype(complex), cg.n_modes, lambda a, m: _chi_op_last2(a, cg.grids[m]))
    labels = [(name, g.n_points) for name, g in zip(cg.mode_labels, cg.grids)]
    return LabeledOperator(labels, _deinterleave(t, [g.n_points for g in cg.grids]))


def tensor_chi(*parts: ChiGrid) -> ChiGrid:
    """Chi function of a tensor product: the outer product of the factors."""
    vals = parts[0].values
    grids, labels = list(parts[0].grids), list(parts[0].mode_labels)
    for p in parts[1:]:
        vals = np.multiply.outer(vals, p.values)
        grids += list(p.grids)
        labels += list(p.mode_labels)
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate mode labels {labels}")
    return ChiGrid(tuple(grids), vals, tuple(labels))


def reorder_modes(cg: ChiGrid, labels: Sequence[str]) -> ChiGrid:
    labels = tuple(labels)
    if sorted(labels) != sorted(cg.mode_labels):
        raise ValueError(f"cannot reorder {cg.mode_labels} into {labels}")
    perm = [cg.mode_labels.index(l) for l in labels]
    axes = [a for m in perm for a in (2 * m, 2 * m + 1)]
    return ChiGrid(tuple(cg.grids[m] for m in perm), np.transpose(cg.values, axes), labels)


def trace_pairing(a: WignerGrid, b: WignerGrid) -> complex:
    """``(1/2π)^n Σ A_W B_W dξ``, equal to ``Tr[AB]``."""
    return complex(np.sum(a.values * b.values) * a.cell() / TWO_PI**a.n_modes)


def chi_pairing(a: ChiGrid, b: ChiGrid) -> complex:
    """``(1/2π)^n Σ A~(η) B~(-η) dη``, equal to ``Tr[AB]``."""
    return complex(np.sum(a.values * b.reflected()) * a.cell() / TWO_PI**a.n_modes)


def discrete_delta(grid: PhaseSpaceGrid) -> float:
    """Height of a unit-weight delta at one point of the (κ, ω) plane."""
    return 1.0 / grid.cell_eta


# -- grid operators ------------------------------------------------------------

def gaussian_ket(grid: PhaseSpaceGrid, x0=0.0, p0=0.0, sigma=1.0) -> np.ndarray:
    """Grid-basis ket of ``exp(-(x-x0)²/2σ² + i p0 x)``, normalized on the grid."""
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (2 * sigma**2) + 1j * p0 * x)
    return psi / np.linalg.norm(psi)


def gaussian_state(grid: PhaseSpaceGrid, x0=0.0, p0=0.0, sigma=1.0, name="m0") -> LabeledOperator:
    v = gaussian_ket(grid, x0, p0, sigma)
    return LabeledOperator([(name, grid.n_points)], np.outer(v, v.conj()))


def position_projector(grid: PhaseSpaceGrid, lo=-np.inf, hi=np.inf, name="m0") -> LabeledOperator:
    """Projector on the grid points with ``lo <= x < hi``."""
    x = grid.x
    return LabeledOperator([(name, grid.n_points)], np.diag(((x >= lo) & (x < hi)).astype(float)))


def identity_channel_cj(grid: PhaseSpaceGrid, in_name="in", out_name="out") -> LabeledOperator:
    """CJ operator ``|Φ+><Φ+|`` of the identity channel (never normalized)."""
    n = grid.n_points
    v = np.eye(n).reshape(-1)
    return LabeledOperator([(in_name, n), (out_name, n)], np.outer(v, v))


def measure_reprepare_cj(grid_in: PhaseSpaceGrid, grid_out: PhaseSpaceGrid, edges, phi=None,
                         in_name="in", out_name="out", bins=None) -> LabeledOperator:
    """Sum over position bins of ``P_bin^T ⊗ |φ><φ|``.

    ``edges`` delimit consecutive bins; ``bins`` selects a subset of bin
    indices (all by default, which makes the map trace preserving when the
    outer edges are infinite).
    """
    if phi is None:
        phi = gaussian_ket(grid_out)
    phi = np.asarray(phi, dtype=complex)
    rho = np.outer(phi, phi.conj())
    edges = list(edges)
    idx = range(len(edges) - 1) if bins is None else bins
    proj = np.zeros(grid_in.n_points)
    for i in idx:
        proj += np.diag(position_projector(grid_in, edges[i], edges[i + 1]).data).real
    data = np.kron(np.diag(proj), rho)
    return LabeledOperator([(in_name, grid_in.n_points), (out_name, grid_out.n_points)], data)


def gaussian_chi(grid: PhaseSpaceGrid, x0=0.0, p0=0.0, sigma=1.0) -> ChiGrid:
    return operator_chi(gaussian_state(grid, x0, p0, sigma), grid)


# -- checks ----------------------------------------------------------------------

@dataclass
class CPTPChiReport:
    """Outcome of the Fourier-domain trace-preservation check.

    ``deviation`` is the probability missing for the probe state
    (``|1 - (1/2π)∫ ρ~(-η1) M~(η1, 0) dη1|``); ``delta_deviation`` is the
    largest distance of the ``η2 = 0`` slice from ``2π δ(η1)`` relative to
    the delta height; ``closure_deviation`` is the operator norm of
    ``Tr_out M - 1`` reconstructed from that slice.
    """

    deviation: float
    delta_deviation: float
    closure_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.deviation, self.delta_deviation, self.closure_deviation) <= self.tol


def check_cptp_chi(m: ChiGrid, tol: float = 1e-4, probe: ChiGrid | None = None) -> CPTPChiReport:
    if m.n_modes != 2:
        raise ValueError("expected a channel chi function over (input, output)")
    g_in, g_out = m.grids
    z = g_out.zero_index
    slice_ = m.values[:, :, z, z]
    ideal = np.zeros_like(slice_)
    height = TWO_PI * discrete_delta(g_in)
    ideal[g_in.zero_index, g_in.zero_index] = height
    delta_dev = float(np.max(np.abs(slice_ - ideal)) / height)

    if probe is None:
        probe = gaussian_chi(g_in)
    prob = np.sum(probe.reflected() * slice_) * g_in.cell_eta / TWO_PI
    dev = float(abs(1.0 - prob))

    # The η2 = 0 slice is the chi function of Tr_out M.
    reduced = chi_operator(ChiGrid((g_in,), slice_, m.mode_labels[:1]))
    closure = operator_norm(reduced.data - np.eye(g_in.n_points))
    return CPTPChiReport(dev, delta_dev, closure, tol)


def characteristic_bounds(alpha1: float, alpha2: float) -> tuple:
    """Rectangle ``[-1/2α1, 1/2α1] × [-1/2α2, 1/2α2]`` in the (κ, ω) plane."""
    return (-0.5 / alpha1, 0.5 / alpha1, -0.5 / alpha2, 0.5 / alpha2)


def make_characteristic_test_map(grid_in: PhaseSpaceGrid, grid_out: PhaseSpaceGrid, r_bounds=None,
                                 labels=("in", "out")) -> ChiGrid:
    """Chi function ``2π δ(η_in) χ_R(η_out)`` of the rectangle test map.

    ``r_bounds = (κ_lo, κ_hi, ω_lo, ω_hi)``; ``None`` means the whole grid.
    """
    ko, wo = grid_out.kappa, grid_out.omega
    if r_bounds is None:
        inside = np.ones((grid_out.n_points,) * 2, dtype=bool)
    else:
        k_lo, k_hi, w_lo, w_hi = r_bounds
        eps = 1e-12
        if (k_lo < ko[0] - eps or k_hi > ko[-1] + eps or w_lo < wo[0] - eps or w_hi > wo[-1] + eps):
            raise ValueError("rectangle extends beyond the η grid")
        inside = ((ko >= k_lo - eps) & (ko <= k_hi + eps))[:, None] & ((wo >= w_lo - eps) & (wo <= w_hi + eps))[None, :]
    vals = np.zeros((grid_in.n_points,) * 2 + (grid_out.n_points,) * 2, dtype=complex)
    zi = grid_in.zero_index
    vals[zi, zi] = TWO_PI * discrete_delta(grid_in) * inside
    return ChiGrid((grid_in, grid_out), vals, tuple(labels))


def _slice_at(values: np.ndarray, axes_zero: dict) -> np.ndarray:
    idx = [slice(None)] * values.ndim
    for ax, i in axes_zero.items():
        idx[ax] = i
    return values[tuple(idx)]


def _off_mass(absval: np.ndarray, axes_zero: dict) -> float:
    """Fraction of ``Σ|f|`` lying off the hyperplane where the listed axes sit at
    the given indices (``absval`` already holds ``|f|``)."""
    total = float(absval.sum())
    if total == 0.0:
        return 0.0
    on = float(_slice_at(absval, axes_zero).sum())
    return max(0.0, total - on) / total


@dataclass
class OnePartyW:
    """The profile ``w(η1)`` of a one-party process ``W~ = 2π w(η1) δ(η2)``."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def chi(self) -> ChiGrid:
        return ChiGrid((self.grid,), self.values)

    def state(self) -> LabeledOperator:
        return chi_operator(self.chi())


@dataclass
class OnePartyReport:
    off_column_mass: float
    w0: complex
    tol: float
    profile: OnePartyW | None

    @property
    def passed(self) -> bool:
        return self.profile is not None


def check_one_party_structure(w: ChiGrid, tol: float = 1e-6) -> OnePartyReport:
    """Test for support on ``η2 = 0`` and ``w(0) = 1``."""
    if w.n_modes != 2:
        raise ValueError("expected a one-party process over (input, output)")
    g_in, g_out = w.grids
    z = g_out.zero_index
    off = _off_mass(np.abs(w.values), {2: z, 3: z})
    profile = w.values[:, :, z, z] / (TWO_PI * discrete_delta(g_out))
    w0 = complex(profile[g_in.zero_index, g_in.zero_index])
    ok = off <= tol and abs(w0 - 1.0) <= tol and np.sum(np.abs(w.values)) > 0
    return OnePartyReport(off, w0, tol, OnePartyW(g_in, profile) if ok else None)


@dataclass
class TwoPartyReport:
    classification: str
    a2_mass: float
    b2_mass: float
    a_input_mass: float
    b_input_mass: float
    tol: float

    @property
    def valid(self) -> bool:
        return self.classification != "invalid"


def check_two_party_structure(w: ChiGrid, tol: float = 1e-6) -> TwoPartyReport:
    """Classify a bipartite chi function over modes (A1, A2, B1, B2).

    ``a2_mass``/``b2_mass`` are the fractions of ``|W~|`` away from
    ``η_A2 = 0``/``η_B2 = 0``.  ``a_input_mass`` is the fraction of the
    ``η_A1 = η_A2 = 0`` slice away from ``η_B2 = 0``, and ``b_input_mass`` the
    fraction of the ``η_B1 = η_B2 = 0`` slice away from ``η_A2 = 0``.
    """
    if w.n_modes != 4:
        raise ValueError("expected a chi function over (A1, A2, B1, B2)")
    v = np.abs(w.values)
    z = [g.zero_index for g in w.grids]
    a2 = _off_mass(v, {2: z[1], 3: z[1]})
    b2 = _off_mass(v, {6: z[3], 7: z[3]})
    a_input = _off_mass(v[z[0], z[0], z[1], z[1]], {2: z[3], 3: z[3]})
    b_input = _off_mass(v[:, :, :, :, z[2], z[2], z[3], z[3]], {2: z[1], 3: z[1]})
    if not np.any(v) or a_input > tol or b_input > tol:
        cls = "invalid"
    elif a2 <= tol and b2 <= tol:
        cls = "no-signaling"
    elif b2 <= tol:
        cls = "A<B"
    elif a2 <= tol:
        cls = "B<A"
    else:
        cls = "invalid"
    return TwoPartyReport(cls, a2, b2, a_input, b_input, tol)


def probability_chi(w: ChiGrid, m_a: ChiGrid, m_b: ChiGrid | None = None) -> float:
    """``(1/2π)^n Σ W~(η) M~_A(-η_A) M~_B(-η_B) dη``.

    With the ``e^{-iξ·η}`` transform the trace rule pairs ``η`` with ``-η``,
    so the instrument side is reflected.
    """
    expected = m_a.n_modes + (m_b.n_modes if m_b is not None else 0)
    if w.n_modes != expected:
        raise ValueError(f"process has {w.n_modes} modes, instruments cover {expected}")
    for gw, gm in zip(w.grids, m_a.grids + (m_b.grids if m_b is not None else ())):
        if gw != gm:
            raise ValueError("grid mismatch between process and instrument")
    na = 2 * m_a.n_modes
    ra = m_a.reflected()
    t = np.tensordot(w.values, ra, axes=(list(range(na)), list(range(na))))
    if m_b is not None:
        t = np.tensordot(t, m_b.reflected(), axes=t.ndim)
    total = complex(np.sum(t)) * w.cell() / TWO_PI**w.n_modes
    return float(total.real)


# -- CSV ---------------------------------------------------------------------

def write_grid_csv(path, grid_obj, names=None):
    """One row per grid point: coordinates, then ``re``, ``im``."""
    axes = grid_obj.axes()
    names = names or grid_obj.axis_names()
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = grid_obj.values
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(names) + ["re", "im"])
        flat = [m.ravel() for m in mesh]
        vr, vi = vals.real.ravel(), vals.imag.ravel()
        for i in range(vr.size):
            wr.writerow([repr(float(f[i])) for f in flat] + [repr(float(vr[i])), repr(float(vi[i]))])


def read_grid_csv(path):
    """Return (header, float array) from a file written by :func:`write_grid_csv`."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [[float(v) for v in r] for r in rd]
    return header, np.array(rows)
