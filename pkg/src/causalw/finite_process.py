"""Finite-dimensional process matrices.

CJ operators follow ``M = (1 ⊗ M)|Φ+><Φ+|`` with the non-normalized
``|Φ+> = Σ_i |ii>`` on input ⊗ output.  With that convention the probability
rule ``p = Tr[W (M_A ⊗ M_B)]`` reproduces ordinary quantum mechanics when the
process matrix holds the *transposed* state and channel CJ operators; the
``*_process`` builders below take care of that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .operator_core import (
    DEFAULT_TOL,
    LabelError,
    LabeledOperator,
    Subsystem,
    depolarize_to_identity,
    embed,
    identity,
    ket_to_operator,
    min_eigenvalue,
    operator_norm,
    partial_trace,
    tensor,
)

PARTY_LABELS = ("A1", "A2", "B1", "B2")

A_BEFORE_B = "A<B"
B_BEFORE_A = "B<A"
NO_SIGNALING = "no-signaling"
DIRECTIONS = (A_BEFORE_B, B_BEFORE_A, NO_SIGNALING)


class InvalidProcessError(ValueError):
    pass


def cj_from_kraus(kraus, input_dim: int, output_dim: int, input_name="X1", output_name="X2") -> LabeledOperator:
    """CJ operator of the CP map with the given Kraus operators."""
    kraus = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
    data = np.zeros((input_dim * output_dim,) * 2, dtype=complex)
    for k in kraus:
        if k.shape != (output_dim, input_dim):
            raise ValueError(f"Kraus operator of shape {k.shape}, expected {(output_dim, input_dim)}")
        # (1 ⊗ K)|Φ+> = Σ_i |i> ⊗ K|i>, i.e. entry (i, o) = K[o, i].
        v = k.T.reshape(-1)
        data += np.outer(v, v.conj())
    return LabeledOperator([(input_name, input_dim), (output_name, output_dim)], data)


def measure_reprepare_element(input_dim: int, outcome: int, state, input_name="X1", output_name="X2"):
    """CJ operator of ``rho -> <outcome|rho|outcome> * state``."""
    proj = np.zeros((input_dim, input_dim))
    proj[outcome, outcome] = 1.0
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        state = np.outer(state, state.conj())
    return tensor(
        LabeledOperator([(input_name, input_dim)], proj),
        LabeledOperator([(output_name, state.shape[0])], state),
    )


@dataclass(frozen=True)
class Instrument:
    party: str
    input_label: Subsystem
    output_label: Subsystem
    elements: tuple

    def __post_init__(self):
        names = (self.input_label.name, self.output_label.name)
        fixed = tuple(el.reorder(names) for el in self.elements)
        object.__setattr__(self, "elements", fixed)

    @classmethod
    def from_kraus(cls, party: str, kraus_sets, input_dim: int, output_dim: int):
        """One element per entry of ``kraus_sets`` (each a list of Kraus operators)."""
        i_name, o_name = f"{party}1", f"{party}2"
        elements = tuple(cj_from_kraus(ks, input_dim, output_dim, i_name, o_name) for ks in kraus_sets)
        return cls(party, Subsystem(i_name, input_dim), Subsystem(o_name, output_dim), elements)

    @classmethod
    def measure_and_reprepare(cls, party: str, input_dim: int, state):
        """Computational-basis measurement followed by preparation of ``state``."""
        state = np.asarray(state, dtype=complex)
        out_dim = state.shape[0]
        i_name, o_name = f"{party}1", f"{party}2"
        elements = tuple(
            measure_reprepare_element(input_dim, i, state, i_name, o_name) for i in range(input_dim)
        )
        return cls(party, Subsystem(i_name, input_dim), Subsystem(o_name, out_dim), elements)

    def __len__(self):
        return len(self.elements)

    def total(self) -> LabeledOperator:
        out = self.elements[0]
        for el in self.elements[1:]:
            out = out + el
        return out


@dataclass
class InstrumentReport:
    positive: list
    closure_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return all(self.positive) and self.closure_deviation <= self.tol


def check_instrument(inst: Instrument, tol: float = DEFAULT_TOL) -> InstrumentReport:
    """Per-element positivity and ``||Σ_i Tr_out M_i - 1_in||``."""
    positive = []
    for el in inst.elements:
        try:
            positive.append(min_eigenvalue(el, tol) >= -tol)
        except ValueError:
            positive.append(False)
    reduced = partial_trace(inst.total(), [inst.output_label.name])
    dev = operator_norm(reduced.data - np.eye(reduced.dim))
    return InstrumentReport(positive, dev, tol)


class ProcessMatrix:
    """Bipartite process matrix on ``A1 ⊗ A2 ⊗ B1 ⊗ B2``.

    A one-party process is represented with one-dimensional B spaces.
    """

    def __init__(self, op: LabeledOperator, tolerance: float = DEFAULT_TOL):
        if sorted(op.names) != sorted(PARTY_LABELS):
            raise LabelError(f"process matrix needs labels {PARTY_LABELS}, got {op.names}")
        self.op = op.reorder(PARTY_LABELS)
        self.tolerance = tolerance

    def __repr__(self):
        return f"ProcessMatrix(dims={self.op.dims})"

    def dim_of(self, name):
        return self.op.dim_of(name)

    @property
    def labels(self):
        return self.op.labels

    def __add__(self, other):
        return ProcessMatrix(self.op + other.op, self.tolerance)

    def __mul__(self, scalar):
        return ProcessMatrix(self.op * scalar, self.tolerance)

    __rmul__ = __mul__


def _dep(w: ProcessMatrix, names) -> LabeledOperator:
    return depolarize_to_identity(w.op, names)


def probability(w: ProcessMatrix, a_element: LabeledOperator, b_element: LabeledOperator | None = None) -> float:
    """``Tr[W (M_A ⊗ M_B)]``; ``b_element`` may be omitted when B is trivial."""
    if b_element is None:
        b_element = identity([w.labels[2], w.labels[3]])
    for el, names in ((a_element, ("A1", "A2")), (b_element, ("B1", "B2"))):
        if sorted(el.names) != sorted(names):
            raise LabelError(f"instrument element labels {el.names} do not match {names}")
        for n in names:
            if el.dim_of(n) != w.dim_of(n):
                raise LabelError(f"dimension mismatch on {n}: {el.dim_of(n)} vs {w.dim_of(n)}")
    m = tensor(a_element.reorder(("A1", "A2")), b_element.reorder(("B1", "B2")))
    # Tr[W M] = Σ_ij W_ij M_ji
    return float(np.real(np.sum(w.op.data * m.data.T)))


@dataclass
class Condition:
    name: str
    deviation: float
    passed: bool


@dataclass
class ValidityReport:
    conditions: list
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self):
        return [c.name for c in self.conditions if not c.passed]

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self):
        for c in self.conditions:
            yield f"{c.name:<28s} deviation={c.deviation:.3e} {'PASS' if c.passed else 'FAIL'}"


def validate_w(w: ProcessMatrix, tol: float | None = None) -> ValidityReport:
    """Check the five characterizing conditions of a bipartite process matrix.

    Deviations are spectral norms, except positivity (negated smallest
    eigenvalue, clipped at 0) and the trace (absolute difference).
    """
    tol = w.tolerance if tol is None else tol
    W = w.op
    conds = []
    herm_dev = operator_norm(W.data - W.data.conj().T)
    if herm_dev > tol:
        conds.append(Condition("positivity", herm_dev, False))
    else:
        neg = max(0.0, -min_eigenvalue(W, max(tol, herm_dev)))
        conds.append(Condition("positivity", neg, neg <= tol))
    d_out = w.dim_of("A2") * w.dim_of("B2")
    tr_dev = abs(W.trace() - d_out)
    conds.append(Condition("trace", tr_dev, tr_dev <= tol * max(1.0, d_out)))
    for name, lhs, rhs in (
        ("B1B2 = A2B1B2", ("B1", "B2"), ("A2", "B1", "B2")),
        ("A1A2 = B2A1A2", ("A1", "A2"), ("B2", "A1", "A2")),
    ):
        dev = operator_norm((_dep(w, lhs) - _dep(w, rhs)).data)
        conds.append(Condition(name, dev, dev <= tol))
    rest = _dep(w, ["A2"]) + _dep(w, ["B2"]) - _dep(w, ["A2", "B2"])
    dev = operator_norm((W - rest).data)
    conds.append(Condition("W = A2 + B2 - A2B2", dev, dev <= tol))
    return ValidityReport(conds, tol)


@dataclass
class OrderReport:
    direction: str
    deviations: dict
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.deviations.values())


def check_order(w: ProcessMatrix, direction: str, tol: float | None = None) -> OrderReport:
    """Test compatibility with a fixed causal order.

    ``A<B`` requires ``W = _B2 W``, ``B<A`` requires ``W = _A2 W``;
    ``no-signaling`` requires both and ``W = _A2B2 W``.
    """
    tol = w.tolerance if tol is None else tol
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    report = validate_w(w, tol)
    if not report.passed:
        raise InvalidProcessError(f"not a valid process matrix: failed {report.failed()}")
    W = w.op
    dev_ab = operator_norm((W - _dep(w, ["B2"])).data)
    dev_ba = operator_norm((W - _dep(w, ["A2"])).data)
    if direction == A_BEFORE_B:
        devs = {"W - _B2 W": dev_ab}
    elif direction == B_BEFORE_A:
        devs = {"W - _A2 W": dev_ba}
    else:
        devs = {
            "W - _B2 W": dev_ab,
            "W - _A2 W": dev_ba,
            "W - _A2B2 W": operator_norm((W - _dep(w, ["A2", "B2"])).data),
        }
    return OrderReport(direction, devs, tol)


@dataclass
class CausalDecomposition:
    lam: float
    w_ab: ProcessMatrix
    w_ba: ProcessMatrix

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"mixing weight must lie in [0, 1], got {self.lam}")

    def mixture(self) -> ProcessMatrix:
        return self.lam * self.w_ab + (1.0 - self.lam) * self.w_ba


def check_decomposition(w: ProcessMatrix, d: CausalDecomposition, tol: float | None = None) -> bool:
    tol = w.tolerance if tol is None else tol
    for comp, direction in ((d.w_ab, A_BEFORE_B), (d.w_ba, B_BEFORE_A)):
        rep = check_order(comp, direction, tol)
        if not rep.passed:
            raise InvalidProcessError(f"decomposition component is not {direction}-ordered: {rep.deviations}")
    return operator_norm((w.op - d.mixture().op).data) <= tol


def default_settings(party: str, input_dim: int, output_dim: int) -> list:
    """Deterministic setting family: basis measurement plus a fixed list of
    repreparation states (basis states, uniform superposition, and a
    complex-phase superposition)."""
    states = [np.eye(output_dim)[k] for k in range(output_dim)]
    if output_dim > 1:
        states.append(np.ones(output_dim) / np.sqrt(output_dim))
        v = np.zeros(output_dim, dtype=complex)
        v[0], v[1] = 1 / np.sqrt(2), 1j / np.sqrt(2)
        states.append(v)
    return [Instrument.measure_and_reprepare(party, input_dim, s) for s in states]


def _tv(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


@dataclass
class SignalingTable:
    joint: np.ndarray  # [setting_a, setting_b, outcome_a, outcome_b]
    a_to_b: float = field(default=0.0)
    b_to_a: float = field(default=0.0)

    @property
    def a_marginals(self):
        return self.joint.sum(axis=3)

    @property
    def b_marginals(self):
        return self.joint.sum(axis=2)


def signaling_matrix(w: ProcessMatrix, settings_a=None, settings_b=None) -> SignalingTable:
    """Outcome marginals of each party as the other party's setting varies.

    ``a_to_b`` is the largest total-variation distance between B-marginals
    obtained with different A settings (B's setting held fixed); ``b_to_a``
    likewise for A.
    """
    if settings_a is None:
        settings_a = default_settings("A", w.dim_of("A1"), w.dim_of("A2"))
    if settings_b is None:
        settings_b = default_settings("B", w.dim_of("B1"), w.dim_of("B2"))
    na = max(len(s) for s in settings_a)
    nb = max(len(s) for s in settings_b)
    joint = np.zeros((len(settings_a), len(settings_b), na, nb))
    for a, ia in enumerate(settings_a):
        for b, ib in enumerate(settings_b):
            for i, ea in enumerate(ia.elements):
                for j, eb in enumerate(ib.elements):
                    joint[a, b, i, j] = probability(w, ea, eb)
    table = SignalingTable(joint)
    pa, pb = table.a_marginals, table.b_marginals
    b_to_a = max(
        (_tv(pa[a, b], pa[a, b2]) for a in range(len(settings_a))
         for b in range(len(settings_b)) for b2 in range(b + 1, len(settings_b))),
        default=0.0,
    )
    a_to_b = max(
        (_tv(pb[a, b], pb[a2, b]) for b in range(len(settings_b))
         for a in range(len(settings_a)) for a2 in range(a + 1, len(settings_a))),
        default=0.0,
    )
    table.a_to_b, table.b_to_a = a_to_b, b_to_a
    return table


# -- builders ----------------------------------------------------------------

def _density(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj()) if state.ndim == 1 else state


def state_process(rho_a1b1, dim_a1: int, dim_b1: int, dim_a2: int = 1, dim_b2: int = 1, tol=DEFAULT_TOL):
    """``W = rho^T ⊗ 1_{A2 B2}``: a shared state, no signaling."""
    rho = _density(rho_a1b1)
    st = LabeledOperator([("A1", dim_a1), ("B1", dim_b1)], rho.T)
    return ProcessMatrix(embed(st, [("A1", dim_a1), ("A2", dim_a2), ("B1", dim_b1), ("B2", dim_b2)]), tol)


def one_party_process(rho, dim_out: int, tol=DEFAULT_TOL):
    """``W = rho^T ⊗ 1`` for a single party (B spaces one-dimensional)."""
    rho = _density(rho)
    return state_process(rho, rho.shape[0], 1, dim_out, 1, tol)


def channel_process(rho_first, kraus, dim_second_out: int, direction: str = A_BEFORE_B, tol=DEFAULT_TOL):
    """First party receives ``rho_first``; its output goes through the channel
    ``kraus`` to the second party's input; the second party's output is
    discarded.  ``direction`` selects which party is first."""
    rho = _density(rho_first)
    kraus = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
    d_out, d_in = kraus[0].shape
    first, second = ("A", "B") if direction == A_BEFORE_B else ("B", "A")
    cj = cj_from_kraus(kraus, d_in, d_out, f"{first}2", f"{second}1").transpose()
    st = LabeledOperator([(f"{first}1", rho.shape[0])], rho.T)
    op = tensor(st, cj, identity([(f"{second}2", dim_second_out)]))
    return ProcessMatrix(op, tol)


def grandfather_loop(dim: int = 2, tol=DEFAULT_TOL) -> ProcessMatrix:
    """Identity channel from the party's output back to its own input."""
    cj = cj_from_kraus([np.eye(dim)], dim, dim, "A2", "A1").transpose()
    return ProcessMatrix(embed(cj, [("A1", dim), ("A2", dim), ("B1", 1), ("B2", 1)]), tol)


def bit_flip_instrument(dim: int = 2) -> Instrument:
    flip = np.roll(np.eye(dim), 1, axis=0)
    return Instrument.from_kraus("A", [[flip]], dim, dim)


def finite_switch(psi, dim: int | None = None) -> LabeledOperator:
    """Pure switch process ``|w><w|`` on ``A1 A2 B1 B2 C1 Cp`` with identity
    channels between parties; ``Cp`` is the path qubit and C's output is
    one-dimensional."""
    psi = np.asarray(psi, dtype=complex).ravel()
    d = psi.shape[0] if dim is None else dim
    phi = np.eye(d).reshape(-1)  # Σ_i |ii>
    psi_t = psi.conj()  # transposed state convention
    e = np.eye(2)
    # Index order A1 A2 B1 B2 C1 Cp.
    t_ab = np.einsum("a,bc,de,p->abcdep", psi_t, phi.reshape(d, d), phi.reshape(d, d), e[0])
    # B first: psi -> B1, B2 -> A1, A2 -> C1.
    t_ba = np.einsum("c,da,be,p->abcdep", psi_t, phi.reshape(d, d), phi.reshape(d, d), e[1])
    w = ((t_ab + t_ba) / np.sqrt(2)).reshape(-1)
    labels = [("A1", d), ("A2", d), ("B1", d), ("B2", d), ("C1", d), ("Cp", 2)]
    return ket_to_operator(labels, w)


def reduce_switch(switch_op: LabeledOperator, tol=DEFAULT_TOL) -> ProcessMatrix:
    """Bipartite process seen by A and B when C applies its full (trace) operation."""
    return ProcessMatrix(partial_trace(switch_op, ["C1", "Cp"]), tol)
