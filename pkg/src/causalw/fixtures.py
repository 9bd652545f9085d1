"""JSON fixtures for process matrices and named grid fixtures for the phase-space checks."""

from __future__ import annotations

import json

import numpy as np

from .finite_process import (
    A_BEFORE_B, B_BEFORE_A, CausalDecomposition, ProcessMatrix, channel_process,
    grandfather_loop, state_process,
)
from .operator_core import DEFAULT_TOL, LabeledOperator, identity
from .phase_space import (
    ChiGrid, PhaseSpaceGrid, gaussian_ket, gaussian_state, identity_channel_cj, measure_reprepare_cj, operator_chi,
    reorder_modes, tensor_chi,
)


class FixtureError(ValueError):
    """A fixture file is missing fields or has inconsistent shapes."""


# -- operators as JSON ---------------------------------------------------------

def operator_to_dict(op: LabeledOperator) -> dict:
    return {
        "labels": [[s.name, s.dim] for s in op.labels],
        "re": op.data.real.tolist(),
        "im": op.data.imag.tolist(),
    }


def operator_from_dict(d: dict) -> LabeledOperator:
    try:
        labels = [(str(n), int(k)) for n, k in d["labels"]]
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError(f"bad operator entry: {exc}") from None
    if re.shape != im.shape or re.ndim != 2:
        raise FixtureError("re/im must be matching square matrices")
    try:
        return LabeledOperator(labels, re + 1j * im)
    except ValueError as exc:
        raise FixtureError(str(exc)) from None


def process_to_dict(w: ProcessMatrix, **extra) -> dict:
    d = {"kind": "process", "tol": w.tolerance}
    d.update(operator_to_dict(w.op))
    d.update(extra)
    return d


def load_process_fixture(path) -> dict:
    """Read a fixture: ``{"kind": "process", labels, re, im, tol?, order?, decomposition?}``.

    Returns a dict with ``w`` (ProcessMatrix), ``order`` (or None) and
    ``decomposition`` (CausalDecomposition or None).
    """
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"cannot read {path}: {exc}") from None
    if not isinstance(d, dict) or d.get("kind") != "process":
        raise FixtureError("fixture must be a JSON object with kind = 'process'")
    allowed = {"kind", "labels", "re", "im", "tol", "order", "decomposition", "name"}
    unknown = set(d) - allowed
    if unknown:
        raise FixtureError(f"unknown fixture keys {sorted(unknown)}")
    tol = float(d.get("tol", DEFAULT_TOL))
    try:
        w = ProcessMatrix(operator_from_dict(d), tol)
    except ValueError as exc:
        raise FixtureError(str(exc)) from None
    dec = None
    if "decomposition" in d:
        dd = d["decomposition"]
        try:
            dec = CausalDecomposition(
                float(dd["lambda"]),
                ProcessMatrix(operator_from_dict(dd["w_ab"]), tol),
                ProcessMatrix(operator_from_dict(dd["w_ba"]), tol),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FixtureError(f"bad decomposition: {exc}") from None
    order = d.get("order")
    if order not in (None, "A<B", "B<A", "no-signaling"):
        raise FixtureError(f"unknown order {order!r}")
    return {"w": w, "order": order, "decomposition": dec, "name": d.get("name", "")}


def write_process_fixture(path, w: ProcessMatrix, **extra):
    with open(path, "w") as fh:
        json.dump(process_to_dict(w, **extra), fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- deterministic finite fixtures --------------------------------------------

def _ket(*amps):
    v = np.asarray(amps, dtype=complex)
    return v / np.linalg.norm(v)


def hadamard():
    return np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def phase_gate(theta):
    return np.diag([1.0, np.exp(1j * theta)])


def finite_fixtures() -> dict:
    """Named valid and invalid qubit process matrices."""
    bell = _ket(1, 0, 0, 1)
    prod = np.kron(_ket(1, 1j), _ket(2, 1))
    fx = {
        "shared-bell": state_process(bell, 2, 2, 2, 2),
        "shared-product": state_process(prod, 2, 2, 2, 2),
        "a-to-b-identity": channel_process(_ket(1, 0), [np.eye(2)], 2, A_BEFORE_B),
        "a-to-b-hadamard": channel_process(_ket(1, 2j), [hadamard()], 2, A_BEFORE_B),
        "a-to-b-dephasing": channel_process(_ket(1, 1), [np.diag([1, 0]), np.diag([0, 1])], 2, A_BEFORE_B),
        "b-to-a-identity": channel_process(_ket(0, 1), [np.eye(2)], 2, B_BEFORE_A),
        "b-to-a-phase": channel_process(_ket(1, 1), [phase_gate(0.7)], 2, B_BEFORE_A),
    }
    return fx


def both_outputs_process(strength: float = 0.2) -> ProcessMatrix:
    """Positive, unit-normalized operator correlating A2 with B2 (not a process)."""
    z = np.diag([1.0, -1.0])
    labels = [("A1", 2), ("A2", 2), ("B1", 2), ("B2", 2)]
    data = np.eye(16) / 4 + strength * np.kron(np.kron(np.eye(2), z), np.kron(np.eye(2), z))
    return ProcessMatrix(LabeledOperator(labels, data))


def zero_process() -> ProcessMatrix:
    return ProcessMatrix(LabeledOperator([("A1", 2), ("A2", 2), ("B1", 2), ("B2", 2)], np.zeros((16, 16))))


def invalid_fixtures() -> dict:
    return {
        "grandfather-loop": grandfather_loop(2),
        "zero": zero_process(),
        "both-outputs": both_outputs_process(),
    }


# -- grid fixtures --------------------------------------------------------------

WIGNER_KINDS = ("identity-channel", "measure-reprepare", "lossy-bin", "state-identity", "state-state",
                "entangled", "shared-state", "a-to-b", "b-to-a", "both-outputs")


def _transposed(op: LabeledOperator) -> LabeledOperator:
    return op.transpose()


def two_mode_gaussian(grid: PhaseSpaceGrid, names=("A1", "B1"), corr: float = 0.6) -> LabeledOperator:
    """Pure correlated Gaussian ``ψ(x, y) ∝ exp(-(x² + y² - 2 corr·x·y)/2)`` on the grid."""
    x = grid.x
    X, Y = np.meshgrid(x, x, indexing="ij")
    psi = np.exp(-0.5 * (X**2 + Y**2 - 2 * corr * X * Y))
    psi = psi.ravel() / np.linalg.norm(psi)
    return LabeledOperator([(names[0], grid.n_points), (names[1], grid.n_points)], np.outer(psi, psi.conj()))


def wigner_fixture(kind: str, grid: PhaseSpaceGrid, edges=None, x0=0.0, p0=0.0, sigma=1.0) -> ChiGrid:
    """Chi function of a named object.

    Channels and one-party processes are two-mode (input, output); two-party
    processes are four-mode (A1, A2, B1, B2) and built as tensor products so
    that a coarse grid suffices.
    """
    n = grid.n_points
    if kind == "identity-channel":
        return operator_chi(identity_channel_cj(grid, "in", "out"), grid)
    if kind in ("measure-reprepare", "lossy-bin"):
        if edges is None:
            edges = [-np.inf, -1.125, 0.125, 1.125, np.inf] if kind == "measure-reprepare" else [-1.125, 0.125]
        m = measure_reprepare_cj(grid, grid, edges, phi=gaussian_ket(grid, x0, p0, sigma))
        return operator_chi(m, grid)
    if kind == "state-identity":
        rho = operator_chi(_transposed(gaussian_state(grid, x0, p0, sigma, "in")), grid)
        return tensor_chi(rho, operator_chi(identity([("out", n)]), grid))
    if kind == "state-state":
        rho = operator_chi(_transposed(gaussian_state(grid, x0, p0, sigma, "in")), grid)
        return tensor_chi(rho, operator_chi(gaussian_state(grid, -x0, 0.0, sigma, "out"), grid))
    if kind == "entangled":
        return operator_chi(two_mode_gaussian(grid, ("in", "out")), grid)
    one = lambda name: operator_chi(identity([(name, n)]), grid)
    rho = lambda name, c=x0: operator_chi(_transposed(gaussian_state(grid, c, p0, sigma, name)), grid)
    order = ("A1", "A2", "B1", "B2")
    if kind == "shared-state":
        st = operator_chi(_transposed(two_mode_gaussian(grid, ("A1", "B1"))), grid)
        return reorder_modes(tensor_chi(st, one("A2"), one("B2")), order)
    if kind == "a-to-b":
        ch = operator_chi(identity_channel_cj(grid, "A2", "B1"), grid)
        return reorder_modes(tensor_chi(rho("A1"), ch, one("B2")), order)
    if kind == "b-to-a":
        ch = operator_chi(identity_channel_cj(grid, "B2", "A1"), grid)
        return reorder_modes(tensor_chi(rho("B1"), ch, one("A2")), order)
    if kind == "both-outputs":
        s = lambda name, c: operator_chi(gaussian_state(grid, c, 0.0, sigma, name), grid)
        return reorder_modes(tensor_chi(rho("A1"), rho("B1", -x0), s("A2", 0.5), s("B2", -0.5)), order)
    raise FixtureError(f"unknown wigner object {kind!r}; choose from {', '.join(WIGNER_KINDS)}")
