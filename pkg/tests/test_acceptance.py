"""Acceptance criteria 1-10.

Each test prints (and records for the terminal summary) one line of the form
``criterion N: PASS|FAIL <details>``.  Tolerances and runtime budgets are
the stated ones; nothing is relaxed to make a criterion pass.
"""

from __future__ import annotations

import filecmp
import math
import time

import numpy as np
import pytest
from scipy.special import erf, ndtr

from causalw import cli, fixtures, phase_space as ps, propagation as pr, switch
from causalw.finite_process import CausalDecomposition, Instrument, check_decomposition, probability, validate_w
from causalw.operator_core import LabeledOperator

pytestmark = pytest.mark.acceptance


def _record(log, n, ok, detail, elapsed, budget):
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    line = f"criterion {n}: {status} {detail}; runtime {elapsed:.2f} s (budget {budget:g} s)"
    print(line)
    log.append(line)
    assert ok, line
    assert within, line


def _max_dev(rep):
    return max(c.deviation for c in rep.conditions)


# -- 1 ---------------------------------------------------------------------------------

def _mixtures(count, seed=1):
    rng = np.random.default_rng(seed)
    ab = list(v for k, v in fixtures.finite_fixtures().items() if k.startswith("a-to-b"))
    ba = list(v for k, v in fixtures.finite_fixtures().items() if k.startswith("b-to-a"))
    out = []
    for lam in rng.uniform(0.0, 1.0, count):
        w_ab, w_ba = ab[rng.integers(len(ab))], ba[rng.integers(len(ba))]
        out.append(CausalDecomposition(float(lam), w_ab, w_ba))
    return out


def test_criterion_1_validity_suite(acceptance_log):
    t0 = time.perf_counter()
    decs = _mixtures(10)
    passing = dict(fixtures.finite_fixtures())
    for i, d in enumerate(decs):
        passing[f"mixture-{i}"] = d.mixture()
    worst_pass = 0.0
    ok = True
    for name, w in passing.items():
        rep = validate_w(w)
        worst_pass = max(worst_pass, _max_dev(rep))
        ok &= rep.passed and _max_dev(rep) < 1e-9
    for d in decs:
        ok &= check_decomposition(d.mixture(), d)
    least_fail = math.inf
    for name, w in fixtures.invalid_fixtures().items():
        rep = validate_w(w)
        dev = max(rep[c].deviation for c in rep.failed()) if rep.failed() else 0.0
        least_fail = min(least_fail, dev)
        ok &= (not rep.passed) and dev > 1e-3
    elapsed = time.perf_counter() - t0
    detail = (f"{len(passing)} valid processes (worst deviation {worst_pass:.1e}), "
              f"3 invalid (smallest failing deviation {least_fail:.3g})")
    _record(acceptance_log, 1, ok, detail, elapsed, 1.0)


# -- 2 ---------------------------------------------------------------------------------

def _random_instrument(party, rng, outcomes=2, dim=2):
    """Random instrument from a random isometry ``C^dim -> C^outcomes ⊗ C^dim``."""
    g = rng.normal(size=(outcomes * dim, dim)) + 1j * rng.normal(size=(outcomes * dim, dim))
    v, _ = np.linalg.qr(g)
    kraus = [[v[o * dim:(o + 1) * dim, :]] for o in range(outcomes)]
    return Instrument.from_kraus(party, kraus, dim, dim)


def _instrument_pairs(rng):
    plus = np.array([1, 1]) / math.sqrt(2)
    tilted = np.array([math.cos(0.3), 1j * math.sin(0.3)])
    return [
        (Instrument.measure_and_reprepare("A", 2, plus), Instrument.measure_and_reprepare("B", 2, tilted)),
        (_random_instrument("A", rng), _random_instrument("B", rng, outcomes=3)),
    ]


def test_criterion_2_probability_normalization(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    ws = list(fixtures.finite_fixtures().values()) + [d.mixture() for d in _mixtures(3, seed=22)]
    worst = 0.0
    combos = 0
    for w in ws:
        for ia, ib in _instrument_pairs(rng):
            total = sum(probability(w, ea, eb) for ea in ia.elements for eb in ib.elements)
            worst = max(worst, abs(total - 1.0))
            combos += 1
    elapsed = time.perf_counter() - t0
    ok = combos == 20 and worst < 1e-8
    _record(acceptance_log, 2, ok, f"{combos} combinations, max |sum p - 1| = {worst:.1e}", elapsed, 1.0)


# -- 3 ---------------------------------------------------------------------------------

def _grid_operators(grid):
    rng = np.random.default_rng(3)
    n = grid.n_points
    herm = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    herm = herm + herm.conj().T
    rough = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    cat = ps.gaussian_ket(grid, -1.5) + ps.gaussian_ket(grid, 1.5, 0.7)
    cat /= np.linalg.norm(cat)
    op = lambda m: LabeledOperator([("m0", n)], m)
    return {
        "gauss": ps.gaussian_state(grid),
        "shifted": ps.gaussian_state(grid, 1.2, -0.8, 0.7),
        "squeezed": ps.gaussian_state(grid, -0.4, 0.3, 1.9),
        "boosted": ps.gaussian_state(grid, 0.0, 2.0, 1.0),
        "projector": ps.position_projector(grid, -1.0, 0.5),
        "half-line": ps.position_projector(grid, 0.0),
        "cat": op(np.outer(cat, cat.conj())),
        "identity": op(np.eye(n, dtype=complex)),
        "hermitian": op(herm),
        "general": op(rough),
    }


TRACE_PAIRS = [
    ("gauss", "shifted"), ("gauss", "projector"), ("projector", "half-line"), ("boosted", "identity"),
    ("hermitian", "squeezed"), ("general", "hermitian"), ("cat", "projector"), ("squeezed", "shifted"),
    ("general", "cat"), ("identity", "half-line"),
]


def test_criterion_3_weyl_consistency(acceptance_log):
    t0 = time.perf_counter()
    grid = ps.PhaseSpaceGrid(-8.0, 8.0, 64)
    ops = _grid_operators(grid)
    symbols = {k: ps.weyl_symbol(v, grid) for k, v in ops.items()}
    pair_err = 0.0
    for a, b in TRACE_PAIRS:
        exact = np.trace(ops[a].data @ ops[b].data)
        pair_err = max(pair_err, abs(exact - ps.trace_pairing(symbols[a], symbols[b])))
    round_err = max(
        float(np.max(np.abs(ps.inverse_weyl(symbols[k]).data - ops[k].data))) for k in ops
    )
    elapsed = time.perf_counter() - t0
    ok = pair_err < 1e-6 and round_err < 1e-8
    detail = f"10 pairs at n=64, max pairing error {pair_err:.1e}, roundtrip error {round_err:.1e}"
    _record(acceptance_log, 3, ok, detail, elapsed, 5.0)


# -- 4 ---------------------------------------------------------------------------------

def test_criterion_4_cptp_chi(acceptance_log):
    t0 = time.perf_counter()
    grid = ps.PhaseSpaceGrid(-8.0, 8.0, 64)
    ident = ps.check_cptp_chi(fixtures.wigner_fixture("identity-channel", grid))
    full = ps.check_cptp_chi(fixtures.wigner_fixture("measure-reprepare", grid))
    lossy = ps.check_cptp_chi(fixtures.wigner_fixture("lossy-bin", grid))
    # Probe |ψ|² ∝ exp(-x²); the bin keeps the grid cells [-1.125, 0.125).
    missing = 1.0 - 0.5 * (erf(0.125) - erf(-1.125))
    rel = abs(lossy.deviation - missing) / missing
    elapsed = time.perf_counter() - t0
    ok = (ident.passed and full.passed and ident.deviation < 1e-4 and full.deviation < 1e-4
          and not lossy.passed and rel < 0.05)
    detail = (f"identity {ident.deviation:.1e}, full-bin {full.deviation:.1e}, lossy {lossy.deviation:.4f} "
              f"vs analytic {missing:.4f} ({100 * rel:.2f}% off)")
    _record(acceptance_log, 4, ok, detail, elapsed, 10.0)


# -- 5 ---------------------------------------------------------------------------------

def test_criterion_5_party_structure(acceptance_log):
    t0 = time.perf_counter()
    g1 = ps.PhaseSpaceGrid(-8.0, 8.0, 64)
    accept = ps.check_one_party_structure(fixtures.wigner_fixture("state-identity", g1))
    reject = ps.check_one_party_structure(fixtures.wigner_fixture("state-state", g1))
    g2 = ps.PhaseSpaceGrid(-4.0, 4.0, 8)
    classes = {kind: ps.check_two_party_structure(fixtures.wigner_fixture(kind, g2)).classification
               for kind in ("shared-state", "a-to-b", "b-to-a")}
    want = {"shared-state": "no-signaling", "a-to-b": "A<B", "b-to-a": "B<A"}
    elapsed = time.perf_counter() - t0
    ok = (accept.passed and accept.off_column_mass < 1e-6 and not reject.passed
          and reject.off_column_mass > 1e-2 and classes == want)
    detail = (f"rho x 1 mass {accept.off_column_mass:.1e}, rho x sigma mass {reject.off_column_mass:.3f}, "
              f"classes {classes}")
    _record(acceptance_log, 5, ok, detail, elapsed, 10.0)


# -- 6 ---------------------------------------------------------------------------------

def test_criterion_6_interference_limit(acceptance_log):
    t0 = time.perf_counter()
    t = switch.compute_outcomes(switch.identical_branch_config())
    p_minus = float(t.per_c()[:, 1].max())
    vis = t.visibility()
    elapsed = time.perf_counter() - t0
    ok = p_minus < 1e-6 and abs(vis - 1.0) < 1e-6
    _record(acceptance_log, 6, ok, f"max_k p(k,-) = {p_minus:.1e}, V = {vis:.9f}", elapsed, 30.0)


# -- 7 ---------------------------------------------------------------------------------

def test_criterion_7_engine_equivalence(acceptance_log):
    t0 = time.perf_counter()
    cfg = switch.default_config()
    assert cfg.shape == (4, 4, 4) and cfg.hamiltonian == pr.FREE
    a = switch.compute_outcomes(cfg, "analytic")
    b = switch.compute_outcomes(cfg, "oracle")
    engines = max(switch.max_relative_difference(x, y) for x, y in
                  ((a.p_total, b.p_total), (a.p_abc, b.p_abc), (a.p_bac, b.p_bac), (a.p_int, b.p_int)))
    stability = switch.regularization_stability(cfg)
    elapsed = time.perf_counter() - t0
    ok = engines < 1e-4 and stability < 1e-4
    detail = f"4x4x4 free config, engine difference {engines:.1e}, eps_reg stability {stability:.1e} (relative)"
    _record(acceptance_log, 7, ok, detail, elapsed, 300.0)


# -- 8 ---------------------------------------------------------------------------------

def test_criterion_8_signaling_pattern(acceptance_log):
    t0 = time.perf_counter()
    rep = switch.signaling_analysis(switch.default_config())
    mism = rep.pattern_mismatches()
    # bac must mirror abc
    mirror = {"A->B": "B->A", "B->A": "A->B", "A->C": "B->C", "B->C": "A->C"}
    mirrored = all(math.isclose(rep.magnitudes["abc"][d], rep.magnitudes["bac"][m], rel_tol=1e-6, abs_tol=1e-8)
                   for d, m in mirror.items())
    elapsed = time.perf_counter() - t0
    ok = not mism and mirrored and rep.two_way()
    m = rep.magnitudes
    detail = (f"abc A->B {m['abc']['A->B']:.3f} B->C {m['abc']['B->C']:.3f} B->A {m['abc']['B->A']:.1e}; "
              f"int A->B {m['int']['A->B']:.3f} B->A {m['int']['B->A']:.3f} A->C {m['int']['A->C']:.3f} "
              f"B->C {m['int']['B->C']:.3f}; mismatches {len(mism)}")
    _record(acceptance_log, 8, ok, detail, elapsed, 300.0)


# -- 9 ---------------------------------------------------------------------------------

def _ordered_probabilities(cfg):
    """Both ordered processes from closed-form propagated packets and normal CDFs."""
    k1, k2, k3 = cfg.kernels()

    def probs(state, k, bins):
        g = pr.propagate_gaussian(state, k)
        m, s = g.mean_x, g.width / math.sqrt(2)
        return np.array([ndtr((hi - m) / s) - ndtr((lo - m) / s) for lo, hi in bins]) * g.norm**2

    p_abc = np.einsum("i,j,k->ijk", probs(cfg.psi_I, k1, cfg.bins_A), probs(cfg.phi_A, k2, cfg.bins_B),
                      probs(cfg.phi_B, k3, cfg.bins_C))
    p_bac = np.einsum("j,i,k->ijk", probs(cfg.psi_I, k1, cfg.bins_B), probs(cfg.phi_B, k2, cfg.bins_A),
                      probs(cfg.phi_A, k3, cfg.bins_C))
    return p_abc, p_bac


def _mixture_configs():
    base = switch.default_config()
    return [
        base,
        base.replace(hamiltonian=pr.HARMONIC, omega=0.7),
        base.replace(psi_I=pr.GaussianState(0.3, 0.4, 0.8), phi_A=pr.GaussianState(1.0, -0.5, 1.3),
                     phi_B=pr.GaussianState(-0.2, 0.9, 0.6)),
        base.replace(t_1=0.5, t_2=1.7, t_O=2.2, mass=1.5),
    ]


def test_criterion_9_causal_mixture(acceptance_log):
    t0 = time.perf_counter()
    worst_identity = 0.0
    worst_closed = 0.0
    for cfg in _mixture_configs():
        t = switch.compute_outcomes(cfg)
        summed = t.p_total.sum(axis=-1)
        worst_identity = max(worst_identity, float(np.max(np.abs(summed - t.mixture()))))
        p_abc, p_bac = _ordered_probabilities(cfg)
        worst_closed = max(worst_closed, float(np.max(np.abs(summed - 0.5 * (p_abc + p_bac)))))
    elapsed = time.perf_counter() - t0
    ok = worst_identity < 1e-8 and worst_closed < 1e-8
    detail = (f"4 configs, |p+ + p- - (p_abc + p_bac)| <= {worst_identity:.1e}, "
              f"vs closed-form ordered processes <= {worst_closed:.1e}")
    _record(acceptance_log, 9, ok, detail, elapsed, 60.0)


# -- 10 --------------------------------------------------------------------------------

CLI_RUNS = [
    ["validate", "fixtures/shared_bell.json"],
    ["validate", "fixtures/causal_mixture.json"],
    ["validate", "fixtures/grandfather_loop.json"],
    ["wigner", "configs/identity_channel.cfg", "--check", "cptp"],
    ["wigner", "configs/lossy_bin.cfg", "--check", "cptp"],
    ["wigner", "configs/state_identity.cfg", "--check", "one-party"],
    ["wigner", "configs/two_party_a_to_b.cfg", "--check", "two-party"],
    ["switch", "configs/switch_default.cfg"],
    ["switch", "configs/switch_identical.cfg"],
]


def _run_all(data_dir, out_root):
    files = []
    for i, argv in enumerate(CLI_RUNS):
        out = out_root / f"run{i}"
        code = cli.main([argv[0], str(data_dir / argv[1]), *argv[2:], "--out", str(out)])
        assert code in (0, 1), argv
        files += sorted(out.iterdir())
    return files


def test_criterion_10_determinism(acceptance_log, data_dir, tmp_path):
    t0 = time.perf_counter()
    first = _run_all(data_dir, tmp_path / "first")
    second = _run_all(data_dir, tmp_path / "second")
    names = [p.relative_to(tmp_path / "first") for p in first]
    same = names == [p.relative_to(tmp_path / "second") for p in second] and all(
        filecmp.cmp(a, b, shallow=False) for a, b in zip(first, second))
    csvs = sum(1 for p in first if p.suffix == ".csv")
    elapsed = time.perf_counter() - t0
    _record(acceptance_log, 10, same and csvs >= 9, f"{csvs} CSV files (+ summaries) byte-identical across two runs",
            elapsed, math.inf)
