"""Quantum switch with a continuous-variable carrier.

A particle prepared in ``psi_I`` travels along a fiber and visits two
laboratories in an order controlled by a path qubit in ``|+>``.  Each lab
measures the position in one of its bins and reprepares a fixed Gaussian; a
third lab ``C`` measures the position at the end together with the path qubit
in the ``±`` basis.

Variables of the joint integrand (1D positions):

* ``rA1``, ``rB1``, ``rC1``: positions measured at A, B and C (binned);
* ``rI``, ``rA2``, ``rB2``: input and repreparation positions, ket side;
* the same with a trailing ``_`` on the bra side.

For outcome ``(i, j, k, ±)`` the probability is
``p = (p_abc + p_bac)/2 ± Re p_int`` where ``p_abc``, ``p_bac`` are half the
ordered-branch probabilities and ``p_int`` is half the cross term of the
A-first ket against the B-first bra.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .propagation import (
    EPS_REG, FREE, HARMONIC, GaussianState, OracleGrid, QuadraticForm,
    apply_delta, box_integral, green_kernel, qf_integrate_out, spectral_interval_integrals, split_step,
)

ABC = "A<B<C"
BAC = "B<A<C"
BINNED = ("rA1", "rB1", "rC1")
KET_INNER = ("rI", "rA2", "rB2")
BRA = {v: v + "_" for v in KET_INNER}

PRESENT = 1e-2
ABSENT = 1e-4
REL_FLOOR = 1e-12


class ConfigError(ValueError):
    """Malformed or inconsistent switch configuration."""


def _bins_from_edges(edges: Sequence[float]) -> tuple:
    edges = [float(e) for e in edges]
    return tuple(zip(edges[:-1], edges[1:]))


def _check_bins(bins, lab: str) -> tuple:
    out = tuple((float(lo), float(hi)) for lo, hi in bins)
    if not out:
        raise ConfigError(f"lab {lab} needs at least one bin")
    for lo, hi in out:
        if not hi > lo:
            raise ConfigError(f"lab {lab}: empty or reversed bin ({lo}, {hi})")
    for (_, h0), (l1, _) in zip(out, out[1:]):
        if l1 < h0:
            raise ConfigError(f"lab {lab}: bins overlap or are out of order")
    return out


def covers_line(bins) -> bool:
    if bins[0][0] != -np.inf or bins[-1][1] != np.inf:
        return False
    return all(h0 == l1 for (_, h0), (l1, _) in zip(bins, bins[1:]))


@dataclass(frozen=True)
class SwitchConfig:
    t_I: float = 0.0
    t_1: float = 1.0
    t_2: float = 2.0
    t_O: float = 3.0
    hamiltonian: str = FREE
    mass: float = 1.0
    omega: float = 1.0
    psi_I: GaussianState = GaussianState(0.0, 0.0, 1.0)
    phi_A: GaussianState = GaussianState(0.5, 0.0, 1.0)
    phi_B: GaussianState = GaussianState(-0.5, 0.0, 1.0)
    bins_A: tuple = _bins_from_edges([-np.inf, -1, 0, 1, np.inf])
    bins_B: tuple = _bins_from_edges([-np.inf, -1, 0, 1, np.inf])
    bins_C: tuple = _bins_from_edges([-np.inf, -1, 0, 1, np.inf])
    engine: str = "analytic"
    coherent: bool = True
    eps_reg: float = EPS_REG
    oracle_grid: OracleGrid = OracleGrid()
    oracle_steps: int = 256

    def __post_init__(self):
        if not self.t_I < self.t_1 < self.t_2 < self.t_O:
            raise ConfigError("times must satisfy t_I < t_1 < t_2 < t_O")
        if self.hamiltonian not in (FREE, HARMONIC):
            raise ConfigError(f"unknown hamiltonian {self.hamiltonian!r}")
        if self.engine not in ("analytic", "oracle"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        for lab in "ABC":
            object.__setattr__(self, f"bins_{lab}", _check_bins(getattr(self, f"bins_{lab}"), lab))

    @property
    def legs(self) -> tuple:
        return (self.t_1 - self.t_I, self.t_2 - self.t_1, self.t_O - self.t_2)

    @property
    def equal_spacing(self) -> bool:
        a, b, c = self.legs
        return math.isclose(a, b, rel_tol=1e-12) and math.isclose(b, c, rel_tol=1e-12)

    @property
    def shape(self) -> tuple:
        return (len(self.bins_A), len(self.bins_B), len(self.bins_C))

    def kernels(self) -> tuple:
        return tuple(green_kernel(self.hamiltonian, dt, self.mass, self.omega) for dt in self.legs)

    def replace(self, **changes) -> "SwitchConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        return config_to_text(self)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


# -- branches ------------------------------------------------------------------

@dataclass(frozen=True)
class BranchAmplitude:
    """Product of the three leg propagators for one visiting order.

    ``form`` holds the Gaussian legs; ``deltas`` lists caustic legs as
    ``(kernel, out_var, in_var)``.
    """

    order: str
    form: QuadraticForm
    deltas: tuple
    legs: tuple

    def value(self, coords) -> complex:
        if self.deltas:
            raise ValueError("amplitude contains delta kernels")
        return self.form.value(coords)

    def with_states(self, psi_I: GaussianState, phi_A: GaussianState, phi_B: GaussianState,
                    eps_reg: float = 0.0) -> QuadraticForm:
        """Amplitude over ``(rA1, rB1, rC1)`` after integrating in the states."""
        q = self.joint(psi_I, phi_A, phi_B)
        q = qf_integrate_out(q, [v for v in KET_INNER if v in q.names], eps_reg=eps_reg)
        return _ordered(q, BINNED)

    def joint(self, psi_I, phi_A, phi_B) -> QuadraticForm:
        q = self.form * psi_I.form("rI") * phi_A.form("rA2") * phi_B.form("rB2")
        for k, out_var, in_var in self.deltas:
            q = apply_delta(q, k, out_var, in_var)
        return q


def _ordered(q: QuadraticForm, names) -> QuadraticForm:
    idx = [q.index(v) for v in names]
    return QuadraticForm(names, q.A[np.ix_(idx, idx)], q.b[idx], q.c)


def build_branches(cfg: SwitchConfig) -> tuple:
    """Amplitudes for the A-first and B-first orders.

    A-first: ``G1(rA1, rI) G2(rB1, rA2) G3(rC1, rB2)``; B-first swaps the
    roles of A and B.
    """
    k1, k2, k3 = cfg.kernels()
    wiring = {
        ABC: ((k1, "rA1", "rI"), (k2, "rB1", "rA2"), (k3, "rC1", "rB2")),
        BAC: ((k1, "rB1", "rI"), (k2, "rA1", "rB2"), (k3, "rC1", "rA2")),
    }
    out = []
    for order, legs in wiring.items():
        q = QuadraticForm.constant()
        deltas = []
        for k, o, i in legs:
            if k.is_delta:
                deltas.append((k, o, i))
            else:
                q = q * k.form(o, i)
        out.append(BranchAmplitude(order, q, tuple(deltas), legs))
    return tuple(out)


# -- instruments -------------------------------------------------------------------

@dataclass(frozen=True)
class LocalInstrument:
    """Measure the position bin, then reprepare ``phi``."""

    bins: tuple
    phi: GaussianState | None

    @property
    def trace_preserving(self) -> bool:
        return covers_line(self.bins)

    def outcome_probabilities(self, state: GaussianState) -> np.ndarray:
        """Bin probabilities for a Gaussian input state."""
        q = state.form("x")
        q = q * q.conj()
        return np.array([box_integral(q, {"x": b}).real for b in self.bins])


def local_instrument(bins, phi: GaussianState | None) -> LocalInstrument:
    return LocalInstrument(_check_bins(bins, "local"), phi)


@dataclass(frozen=True)
class PathInstrument:
    """Position bins at C together with the path qubit in the ``±`` basis."""

    bins: tuple

    def outcome_probabilities(self, path_state, spatial_overlaps) -> np.ndarray:
        """``p(k, ±)`` for a path state ``(c0, c1)`` and branch spatial overlaps.

        ``spatial_overlaps[k]`` is the 2x2 matrix ``∫_{R_k} ψ_a ψ_b*`` of the
        two branch wavefunctions.
        """
        c = np.asarray(path_state, dtype=complex)
        plus = np.array([1, 1]) / math.sqrt(2)
        minus = np.array([1, -1]) / math.sqrt(2)
        out = np.zeros((len(self.bins), 2))
        for k, S in enumerate(spatial_overlaps):
            S = np.asarray(S, dtype=complex)
            for s, v in enumerate((plus, minus)):
                amp = v.conj() * c
                out[k, s] = float(np.real(amp @ S @ amp.conj()))
        return out


def c_instrument(bins) -> PathInstrument:
    return PathInstrument(_check_bins(bins, "C"))


# -- outcome table -----------------------------------------------------------------

@dataclass
class OutcomeTable:
    """``p_total[i, j, k, s]`` with ``s = 0`` for ``+`` and ``s = 1`` for ``-``."""

    p_abc: np.ndarray
    p_bac: np.ndarray
    p_int: np.ndarray
    coherent: bool = True
    config_hash: str = ""

    @property
    def p_total(self) -> np.ndarray:
        mix = 0.5 * (self.p_abc + self.p_bac)
        inter = self.p_int.real if self.coherent else np.zeros_like(self.p_abc)
        return np.stack([mix + inter, mix - inter], axis=-1)

    @property
    def shape(self) -> tuple:
        return self.p_abc.shape

    def detection_probability(self) -> float:
        return float(self.p_total.sum())

    def mixture(self) -> np.ndarray:
        """Equal-weight mixture of the two ordered processes per ``(i, j, k)``."""
        return self.p_abc + self.p_bac

    def per_c(self) -> np.ndarray:
        """``p(k, ±)`` summed over A and B outcomes."""
        return self.p_total.sum(axis=(0, 1))

    def visibility(self) -> float:
        pc = self.per_c()
        tot = pc.sum(axis=1)
        ok = tot > 0
        if not np.any(ok):
            return 0.0
        return float(np.max(np.abs(pc[ok, 0] - pc[ok, 1]) / tot[ok]))

    def consistency(self) -> float:
        """Largest ``|p_total - (p_abc + p_bac)/2 ∓ Re p_int|``."""
        inter = self.p_int.real if self.coherent else 0.0
        mix = 0.5 * (self.p_abc + self.p_bac)
        pt = self.p_total
        return float(max(np.max(np.abs(pt[..., 0] - mix - inter)), np.max(np.abs(pt[..., 1] - mix + inter))))

    def rows(self):
        pt = self.p_total
        pi = self.p_int if self.coherent else np.zeros_like(self.p_int)
        ni, nj, nk = self.shape
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    for s, sign in enumerate("+-"):
                        yield (i, j, k, sign, pt[i, j, k, s], self.p_abc[i, j, k], self.p_bac[i, j, k],
                               pi[i, j, k].real, pi[i, j, k].imag)

    def to_csv(self, path_or_buf=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["i", "j", "k", "sign", "p_total", "p_abc", "p_bac", "p_int_re", "p_int_im"])
        for r in self.rows():
            wr.writerow(list(r[:4]) + [_fmt(v) for v in r[4:]])
        text = buf.getvalue()
        if path_or_buf is not None:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v) -> str:
    v = float(v)
    return "0.0" if v == 0.0 else repr(v)


def max_relative_difference(a: np.ndarray, b: np.ndarray, floor: float = REL_FLOOR) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))


# -- engines -------------------------------------------------------------------------

def _pair_form(ket: BranchAmplitude, bra: BranchAmplitude, cfg: SwitchConfig) -> QuadraticForm:
    """Joint integrand ``ket × conj(bra)`` with states, before any integration."""
    k = ket.joint(cfg.psi_I, cfg.phi_A, cfg.phi_B)
    b = bra.joint(cfg.psi_I, cfg.phi_A, cfg.phi_B).rename(BRA).conj()
    return k * b


def _binned_table(q: QuadraticForm, cfg: SwitchConfig, eps_reg: float) -> np.ndarray:
    unbinned = [v for v in q.names if v not in BINNED]
    q = _ordered(qf_integrate_out(q, unbinned, eps_reg=eps_reg), BINNED)
    bins = (cfg.bins_A, cfg.bins_B, cfg.bins_C)
    if q.is_separable():
        # exact product of one-variable interval integrals
        factors = []
        for v, bl in enumerate(bins):
            single = QuadraticForm([BINNED[v]], [[q.A[v, v]]], [q.b[v]], 0.0)
            factors.append(np.array([box_integral(single, {BINNED[v]: b}) for b in bl]))
        return np.exp(q.c) * np.einsum("i,j,k->ijk", *factors)
    out = np.empty(cfg.shape, dtype=complex)
    for i, bi in enumerate(bins[0]):
        for j, bj in enumerate(bins[1]):
            for k, bk in enumerate(bins[2]):
                out[i, j, k] = box_integral(q, {"rA1": bi, "rB1": bj, "rC1": bk})
    return out


def _analytic_components(cfg: SwitchConfig, eps_reg: float) -> tuple:
    abc, bac = build_branches(cfg)
    p_abc = 0.5 * _binned_table(_pair_form(abc, abc, cfg), cfg, eps_reg).real
    p_bac = 0.5 * _binned_table(_pair_form(bac, bac, cfg), cfg, eps_reg).real
    p_int = 0.5 * _binned_table(_pair_form(abc, bac, cfg), cfg, eps_reg)
    return p_abc, p_bac, p_int


def _oracle_components(cfg: SwitchConfig) -> tuple:
    g = cfg.oracle_grid
    x = g.x
    l1, l2, l3 = cfg.legs

    def evolve(state, dt):
        return split_step(state(x), g, cfg.hamiltonian, dt, cfg.mass, cfg.omega, cfg.oracle_steps)

    f = evolve(cfg.psi_I, l1)
    gA, gB = evolve(cfg.phi_A, l2), evolve(cfg.phi_B, l3)  # A first
    hB, hA = evolve(cfg.phi_B, l2), evolve(cfg.phi_A, l3)  # B first

    def bins(u, v, bl):
        return np.array([spectral_interval_integrals(u, v, g, b)[0] for b in bl])

    A, B, C = cfg.bins_A, cfg.bins_B, cfg.bins_C
    outer = lambda a, b, c: np.einsum("i,j,k->ijk", a, b, c)
    p_abc = 0.5 * outer(bins(f, f, A), bins(gA, gA, B), bins(gB, gB, C)).real
    p_bac = 0.5 * outer(bins(hB, hB, A), bins(f, f, B), bins(hA, hA, C)).real
    p_int = 0.5 * outer(bins(f, hB, A), bins(gA, f, B), bins(gB, hA, C))
    return p_abc, p_bac, p_int


def compute_outcomes(cfg: SwitchConfig, engine: str | None = None, eps_reg: float | None = None) -> OutcomeTable:
    engine = engine or cfg.engine
    if engine == "analytic":
        comps = _analytic_components(cfg, cfg.eps_reg if eps_reg is None else eps_reg)
    elif engine == "oracle":
        comps = _oracle_components(cfg)
    else:
        raise ConfigError(f"unknown engine {engine!r}")
    p_abc, p_bac, p_int = comps
    return OutcomeTable(p_abc, p_bac, p_int, cfg.coherent, cfg.digest())


def regularization_stability(cfg: SwitchConfig) -> float:
    """Largest relative change of any cell component when ``eps_reg`` shrinks tenfold."""
    a = compute_outcomes(cfg, "analytic", cfg.eps_reg)
    b = compute_outcomes(cfg, "analytic", cfg.eps_reg / 10)
    return max(max_relative_difference(a.p_total, b.p_total),
               max_relative_difference(a.p_abc, b.p_abc),
               max_relative_difference(a.p_bac, b.p_bac),
               max_relative_difference(a.p_int, b.p_int))


def compare_engines(cfg: SwitchConfig) -> float:
    """Largest relative difference of ``p_total`` between the two engines."""
    a = compute_outcomes(cfg, "analytic")
    b = compute_outcomes(cfg, "oracle")
    return max_relative_difference(a.p_total, b.p_total)


# -- signaling -------------------------------------------------------------------------

def setting_sweep(state: GaussianState, n: int = 5) -> list:
    """``n`` repreparation states with centres spread over one width."""
    offsets = np.linspace(-0.5, 0.5, n) * state.sigma
    return [state.with_(x0=state.x0 + float(o)) for o in offsets]


def _tv(dists) -> float:
    """Largest total-variation distance between any two entries of ``dists``."""
    best = 0.0
    for a in range(len(dists)):
        for b in range(a + 1, len(dists)):
            best = max(best, 0.5 * float(np.sum(np.abs(dists[a] - dists[b]))))
    return best


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CAUSALW_THREADS", "1")))
    except ValueError:
        return 1


def _tables(cfgs) -> list:
    n = _threads()
    if n == 1:
        return [compute_outcomes(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(compute_outcomes, cfgs))


DIRECTIONS = ("A->B", "A->C", "B->A", "B->C", "C->A", "C->B")


@dataclass
class SignalingReport:
    """Dependence magnitudes per component and direction.

    ``magnitudes[component][X->Y]`` is the largest total-variation change in
    Y's outcome statistics as X's repreparation state is swept.  C has no
    setting, so ``C->*`` entries are zero.
    """

    magnitudes: dict
    detection_probability: float
    present: float = PRESENT
    absent: float = ABSENT
    warnings: list = field(default_factory=list)

    def verdict(self, component: str, direction: str) -> str:
        m = self.magnitudes[component][direction]
        if m > self.present:
            return "present"
        if m < self.absent:
            return "absent"
        return "inconclusive"

    def verdicts(self) -> dict:
        return {c: {d: self.verdict(c, d) for d in DIRECTIONS} for c in self.magnitudes}

    def expected_pattern(self) -> dict:
        """Signaling structure expected from each component."""
        return {
            "abc": {"A->B": "present", "B->C": "present", "B->A": "absent", "C->A": "absent", "C->B": "absent"},
            "bac": {"B->A": "present", "A->C": "present", "A->B": "absent", "C->A": "absent", "C->B": "absent"},
            "int": {"A->C": "present", "B->C": "present", "A->B": "present", "B->A": "present"},
        }

    def pattern_mismatches(self) -> list:
        out = []
        for comp, want in self.expected_pattern().items():
            for d, v in want.items():
                got = self.verdict(comp, d)
                if got != v:
                    out.append(f"{comp} {d}: expected {v}, got {got} ({self.magnitudes[comp][d]:.3g})")
        return out

    def two_way(self) -> bool:
        return self.verdict("int", "A->B") == "present" and self.verdict("int", "B->A") == "present"

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["component", "direction", "magnitude", "verdict"])
        for comp in ("abc", "bac", "int"):
            for d in DIRECTIONS:
                wr.writerow([comp, d, _fmt(self.magnitudes[comp][d]), self.verdict(comp, d)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _component_views(t: OutcomeTable) -> dict:
    """Outcome statistics per component, as arrays over (i, j, k[, ±])."""
    inter = t.p_int.real if t.coherent else np.zeros_like(t.p_abc)
    return {
        "abc": 2.0 * t.p_abc,
        "bac": 2.0 * t.p_bac,
        "int": np.stack([inter, -inter], axis=-1),
    }


def _marginal(arr: np.ndarray, keep: str) -> np.ndarray:
    """Keep the named labs (subset of 'ABC'); the ± axis stays with C."""
    drop = tuple(ax for ax, lab in enumerate("ABC") if lab not in keep)
    if arr.ndim == 4 and "C" not in keep:
        drop = drop + (3,)
    return arr.sum(axis=drop) if drop else arr


def signaling_analysis(cfg: SwitchConfig, n_settings: int = 5) -> SignalingReport:
    sweep_a = [cfg.replace(phi_A=s) for s in setting_sweep(cfg.phi_A, n_settings)]
    sweep_b = [cfg.replace(phi_B=s) for s in setting_sweep(cfg.phi_B, n_settings)]
    tabs = _tables(sweep_a + sweep_b)
    ta, tb = tabs[:n_settings], tabs[n_settings:]
    va = [_component_views(t) for t in ta]
    vb = [_component_views(t) for t in tb]

    mags = {}
    for comp in ("abc", "bac", "int"):
        if comp == "int":
            # ± sums of the interference term vanish, so look at joints with C
            keep = {"A->B": "BC", "B->A": "AC", "A->C": "C", "B->C": "C"}
        else:
            keep = {"A->B": "B", "B->A": "A", "A->C": "C", "B->C": "C"}
        m = {}
        for d, labs in keep.items():
            views = va if d[0] == "A" else vb
            m[d] = _tv([_marginal(v[comp], labs) for v in views])
        m["C->A"] = 0.0
        m["C->B"] = 0.0
        mags[comp] = {d: m[d] for d in DIRECTIONS}

    det = compute_outcomes(cfg).detection_probability()
    rep = SignalingReport(mags, det)
    if det < 0.99:
        rep.warnings.append(f"detection probability {det:.4f} < 0.99; thresholds scaled")
        rep.present *= det
        rep.absent /= det
    if not cfg.equal_spacing:
        rep.warnings.append("unequal leg durations; expected pattern derived for equal spacing")
    return rep


@dataclass
class NonseparabilityReport:
    pure: bool
    two_way_signaling: bool
    visibility: float
    detection_probability: float

    @property
    def evidence(self) -> bool:
        return self.pure and self.two_way_signaling

    def lines(self) -> list:
        return [
            "argument: a pure process with two-way signaling cannot be a causal mixture (sufficiency argument, not a proof)",
            f"pure process: {'yes' if self.pure else 'no'}",
            f"two-way signaling in interference term: {'yes' if self.two_way_signaling else 'no'}",
            f"visibility: {self.visibility:.6f}",
            f"detection probability: {self.detection_probability:.6f}",
            f"nonseparability evidence: {'yes' if self.evidence else 'no'}",
        ]


def nonseparability_report(cfg: SwitchConfig, signaling: SignalingReport | None = None) -> NonseparabilityReport:
    """Combine purity, two-way signaling and fringe visibility.

    The switch process is rank one by construction when the path stays
    coherent; dropping the interference term leaves the equal mixture of the
    two ordered processes.
    """
    signaling = signaling or signaling_analysis(cfg)
    t = compute_outcomes(cfg)
    return NonseparabilityReport(cfg.coherent, signaling.two_way(), t.visibility(), t.detection_probability())


# -- scans ----------------------------------------------------------------------------

SCAN_PARAMS = ("psi_I.x0", "psi_I.p0", "psi_I.sigma", "phi_A.x0", "phi_A.p0", "phi_A.sigma",
               "phi_B.x0", "phi_B.p0", "phi_B.sigma", "bins_C.shift", "omega", "mass")


def scan_config(cfg: SwitchConfig, param: str, value: float) -> SwitchConfig:
    if param not in SCAN_PARAMS:
        raise ConfigError(f"unknown scan parameter {param!r}; choose from {', '.join(SCAN_PARAMS)}")
    if param == "bins_C.shift":
        return cfg.replace(bins_C=tuple((lo + value, hi + value) for lo, hi in cfg.bins_C))
    if "." in param:
        who, attr = param.split(".")
        return cfg.replace(**{who: getattr(cfg, who).with_(**{attr: value})})
    return cfg.replace(**{param: value})


def run_scan(cfg: SwitchConfig, param: str, values: Sequence[float]) -> str:
    """Fringe data ``p(k, ±)`` and visibility for each scan value, as CSV text."""
    cfgs = [scan_config(cfg, param, v) for v in values]
    tabs = _tables(cfgs)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([param, "k", "bin_lo", "bin_hi", "p_plus", "p_minus", "visibility"])
    for v, c, t in zip(values, cfgs, tabs):
        pc = t.per_c()
        vis = t.visibility()
        for k, (lo, hi) in enumerate(c.bins_C):
            wr.writerow([_fmt(v), k, _fmt(lo), _fmt(hi), _fmt(pc[k, 0]), _fmt(pc[k, 1]), _fmt(vis)])
    return buf.getvalue()


# -- config text --------------------------------------------------------------------

_STATE_KEYS = ("x0", "p0", "sigma", "phase")
_SCHEMA = {
    "times": ("t_I", "t_1", "t_2", "t_O"),
    "hamiltonian": ("kind", "mass", "omega"),
    "psi_I": _STATE_KEYS,
    "phi_A": _STATE_KEYS,
    "phi_B": _STATE_KEYS,
    "bins": ("A", "B", "C"),
    "engine": ("name", "coherent", "eps_reg", "oracle_x_min", "oracle_x_max", "oracle_points", "oracle_steps"),
    "scan": ("param", "values"),
}


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: not a number: {text!r}") from None


def parse_bins(text: str, where: str = "bins") -> tuple:
    """Either edges ``-inf, -1, 0, 1, inf`` or intervals ``-3:-1; 0:2``."""
    text = text.strip()
    if ":" in text:
        out = []
        for part in text.split(";"):
            if not part.strip():
                continue
            lo, _, hi = part.partition(":")
            out.append((_float(lo, where), _float(hi, where)))
        return tuple(out)
    edges = [_float(e, where) for e in text.split(",") if e.strip()]
    if len(edges) < 2:
        raise ConfigError(f"{where}: need at least two edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError(f"{where}: edges must increase")
    return _bins_from_edges(edges)


def parse_config(text: str) -> tuple:
    """Parse ``key = value`` sections into ``(SwitchConfig, scan)``.

    ``scan`` is ``None`` or ``(param, [values])``.  Unknown sections or keys
    raise :class:`ConfigError`.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
    kw = {}
    if cp.has_section("times"):
        for key, val in cp["times"].items():
            kw[key] = _float(val, f"times.{key}")
    if cp.has_section("hamiltonian"):
        h = cp["hamiltonian"]
        if "kind" in h:
            kw["hamiltonian"] = h["kind"].strip()
        for key in ("mass", "omega"):
            if key in h:
                kw[key] = _float(h[key], f"hamiltonian.{key}")
    base = SwitchConfig()
    for name in ("psi_I", "phi_A", "phi_B"):
        if cp.has_section(name):
            vals = {k: _float(v, f"{name}.{k}") for k, v in cp[name].items()}
            try:
                kw[name] = getattr(base, name).with_(**vals)
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None
    if cp.has_section("bins"):
        for lab in "ABC":
            if lab in cp["bins"]:
                kw[f"bins_{lab}"] = parse_bins(cp["bins"][lab], f"bins.{lab}")
    if cp.has_section("engine"):
        e = cp["engine"]
        if "name" in e:
            kw["engine"] = e["name"].strip()
        if "coherent" in e:
            try:
                kw["coherent"] = e.getboolean("coherent")
            except ValueError:
                raise ConfigError("engine.coherent must be true or false") from None
        if "eps_reg" in e:
            kw["eps_reg"] = _float(e["eps_reg"], "engine.eps_reg")
        og = base.oracle_grid
        if any(k in e for k in ("oracle_x_min", "oracle_x_max", "oracle_points")):
            kw["oracle_grid"] = OracleGrid(
                _float(e.get("oracle_x_min", str(og.x_min)), "engine.oracle_x_min"),
                _float(e.get("oracle_x_max", str(og.x_max)), "engine.oracle_x_max"),
                int(_float(e.get("oracle_points", str(og.n_points)), "engine.oracle_points")),
            )
        if "oracle_steps" in e:
            kw["oracle_steps"] = int(_float(e["oracle_steps"], "engine.oracle_steps"))
    scan = None
    if cp.has_section("scan"):
        s = cp["scan"]
        if "param" not in s:
            raise ConfigError("[scan] needs a param key")
        values = [_float(v, "scan.values") for v in s.get("values", "").split(",") if v.strip()]
        scan = (s["param"].strip(), values)
    try:
        cfg = SwitchConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, scan


def load_config(path) -> tuple:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def _edges_text(bins) -> str:
    if covers_line(bins) or all(h0 == l1 for (_, h0), (l1, _) in zip(bins, bins[1:])):
        edges = [bins[0][0]] + [hi for _, hi in bins]
        return ", ".join(repr(float(e)) for e in edges)
    return "; ".join(f"{lo!r}:{hi!r}" for lo, hi in bins)


def config_to_text(cfg: SwitchConfig) -> str:
    """Canonical text form; ``parse_config`` reads it back unchanged."""
    lines = ["[times]"]
    lines += [f"{k} = {getattr(cfg, k)!r}" for k in ("t_I", "t_1", "t_2", "t_O")]
    lines += ["", "[hamiltonian]", f"kind = {cfg.hamiltonian}", f"mass = {cfg.mass!r}", f"omega = {cfg.omega!r}"]
    for name in ("psi_I", "phi_A", "phi_B"):
        s = getattr(cfg, name)
        lines += ["", f"[{name}]"] + [f"{k} = {float(getattr(s, k))!r}" for k in _STATE_KEYS]
    lines += ["", "[bins]"] + [f"{lab} = {_edges_text(getattr(cfg, f'bins_{lab}'))}" for lab in "ABC"]
    og = cfg.oracle_grid
    lines += ["", "[engine]", f"name = {cfg.engine}", f"coherent = {'true' if cfg.coherent else 'false'}",
              f"eps_reg = {cfg.eps_reg!r}", f"oracle_x_min = {og.x_min!r}", f"oracle_x_max = {og.x_max!r}",
              f"oracle_points = {og.n_points}", f"oracle_steps = {cfg.oracle_steps}"]
    return "\n".join(lines) + "\n"


def default_config() -> SwitchConfig:
    return SwitchConfig()


def identical_branch_config() -> SwitchConfig:
    """Oscillator legs of one full period each and identical packets.

    Every leg maps a packet back onto itself, so the two orders produce the
    same spatial wavefunction.
    """
    s = GaussianState(0.0, 0.0, 1.0)
    return SwitchConfig(t_I=0.0, t_1=1.0, t_2=2.0, t_O=3.0, hamiltonian=HARMONIC, omega=2 * math.pi,
                        psi_I=s, phi_A=s, phi_B=s)


def decohered(cfg: SwitchConfig) -> SwitchConfig:
    return cfg.replace(coherent=False)
