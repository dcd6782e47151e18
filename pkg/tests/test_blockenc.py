"""Tests for the selection-weight block-encoding and the iteration operator."""
import numpy as np
import pytest

from qrowiter.arith import PhaseFunctionSpec, effective_matrix, second_half_phase_ops, u_eq_circuit
from qrowiter.blockenc import (
    BlockEncoding,
    build_uk,
    build_uk_projector_shortcut,
    build_weight_block,
    c_block,
    g_amplitudes,
    iteration_matrix_dense,
    naive_iteration_matrix,
    one_row_operator_dense,
    select_dense,
    select_paper_dense,
    uniform_plan,
    v_tilde_dense,
    verify_block_encoding,
)
from qrowiter.linalg import LinearSystem, gen_gaussian_system
from qrowiter.qtree import WeightTree, build_tree, g_state
from qrowiter.rng import stream
from qrowiter.simulator import (
    CircuitOp,
    RegisterLayout,
    StateVector,
    apply_all,
    basis_state,
    postselect,
    register_value_probability,
)


def random_tau_omega(rng, m):
    q = int(rng.integers(1, m + 1))
    tau = tuple(sorted(rng.choice(m, size=q, replace=False)))
    raw = rng.uniform(0.05, 1.0, size=q)
    # selecting every row leaves no redundancy slot, so the mass must be 1
    total = 1.0 if q == m else float(rng.uniform(0.2, 1.0))
    scale = total / raw.sum()
    return tau, {int(i): float(w * scale) for i, w in zip(tau, raw)}


def test_c_block_difference_identity():
    # (C_1 - C_-1)/2 is the i-th diagonal projector; same-sign difference is 0
    for m in (2, 3, 4, 8):
        for i in range(m):
            proj = 0.5 * (c_block(m, i, 1) - c_block(m, i, -1))
            expect = np.zeros((m, m))
            expect[i, i] = 1.0
            assert np.allclose(proj, expect)
            assert np.allclose(0.5 * (c_block(m, i, 1) - c_block(m, i, 1)), 0.0)


def test_c_blocks_are_unitary():
    for m in (2, 3, 5):
        for i in range(m):
            for h in (1, -1):
                c = c_block(m, i, h)
                assert np.allclose(c @ c.T, np.eye(m))


@pytest.mark.parametrize("m,tau", [(2, (0,)), (2, (1,)), (4, (1, 3))])
def test_select_circuit_matches_paper_blocks(m, tau):
    # the comparator/adder circuit equals the C-block assembly on every
    # basis state (exhaustive, through the permutation propagator)
    spec = PhaseFunctionSpec(m=m, tau=tau)
    lay, ops = u_eq_circuit(spec)
    minus = frozenset({lay.qubit("c4", 0)})
    got = effective_matrix(ops, lay, ("l", "j"), minus)
    assert np.abs(got - select_paper_dense(m, tau)).max() < 1e-12
    with_z = effective_matrix(ops + second_half_phase_ops(spec, lay), lay, ("l", "j"), minus)
    assert np.abs(with_z - select_dense(m, tau)).max() < 1e-12


def test_g_amplitudes_layout():
    g = g_amplitudes(4, (1, 2), {1: 0.3, 2: 0.3})
    assert abs(g @ g - 1.0) < 1e-12
    assert abs(g[1] - np.sqrt(0.15)) < 1e-15 and abs(g[5] - np.sqrt(0.15)) < 1e-15
    r = (1.0 - 0.6) / (2 * 2)
    assert abs(g[0] - np.sqrt(r)) < 1e-15 and abs(g[4] - np.sqrt(r)) < 1e-15


def test_uniform_plan_probability_bookkeeping():
    plan = uniform_plan(4, (0, 3), {0: 0.2, 3: 0.5})
    assert abs(plan.total_probability() - 1.0) < 1e-12
    full = uniform_plan(2, (0, 1), {0: 0.5, 1: 0.5})
    assert full.r == {}
    with pytest.raises(ValueError):
        uniform_plan(2, (0, 1), {0: 0.5, 1: 0.2})
    with pytest.raises(ValueError):
        uniform_plan(2, (0,), {0: 1.4})


def test_weight_block_single_row():
    res = build_weight_block(2, (0,), {0: 0.6})
    assert np.abs(res.block - np.diag([0.6, 0.0])).max() < 1e-10
    assert abs(res.t_k - 0.6) < 1e-12
    assert res.repetitions == 2
    assert verify_block_encoding(res.encoding) <= 1e-10


def test_weight_block_empty_tau_is_zero():
    res = build_weight_block(3, (), {})
    assert np.abs(res.block).max() < 1e-10
    assert res.t_k == 0.0


def test_weight_block_two_rows_of_four():
    res = build_weight_block(4, (1, 3), {1: 0.25, 3: 0.25})
    assert np.abs(res.block - np.diag([0.0, 0.25, 0.0, 0.25])).max() < 1e-10
    assert abs(res.t_k - 0.5) < 1e-12


@pytest.mark.parametrize("m", [2, 4, 8])
def test_weight_block_random_property(m):
    rng = stream(6, m)
    for trial in range(8):
        tau, omega = random_tau_omega(rng, m)
        res = build_weight_block(m, tau, omega)
        target = np.zeros((m, m))
        for i in tau:
            target[i, i] = omega[i]
        assert np.abs(res.block - target).max() <= 1e-10
        assert abs(res.t_k - sum(omega.values())) <= 1e-10
        u = res.encoding.unitary
        assert np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() < 1e-10


def test_weight_block_without_phase_layer_fails():
    # the all-positive-coefficient reading leaves the redundancy uncancelled
    res = build_weight_block(2, (0,), {0: 0.6}, z_layer=False)
    assert verify_block_encoding(res.encoding) > 0.01


def test_selection_state_mass_is_t_k():
    # prepared selection state carries weight t_k on the selected
    # addresses, and the j-diagonal select cannot move it
    m, tau, omega = 2, (0,), {0: 0.6}
    g = g_amplitudes(m, tau, omega)
    wt = WeightTree(tree=build_tree(g))
    lay = RegisterLayout.of(("j", 2))
    state = apply_all(StateVector.zero(lay), g_state(wt))
    mass = sum(register_value_probability(state, "j", v) for v in (0, 2))
    assert abs(mass - 0.6) < 1e-12


def test_weight_block_gate_level_statevector():
    # run G, select, G on the actual circuit registers and postselect j=0
    m, tau, omega = 2, (0,), {0: 0.6}
    spec = PhaseFunctionSpec(m=m, tau=tau)
    lay, sel_ops = u_eq_circuit(spec)
    sel_ops = sel_ops + second_half_phase_ops(spec, lay)
    g = g_amplitudes(m, tau, omega)
    from qrowiter.qtree import reflection_to

    g_op = CircuitOp(name="g", targets=lay.qubits("j"), matrix=reflection_to(g))
    c4 = lay.qubit("c4", 0)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    x = np.array([[0, 1], [1, 0]])
    minus_prep = [CircuitOp(name="x", targets=(c4,), matrix=x), CircuitOp(name="h", targets=(c4,), matrix=h)]
    st = basis_state(lay, l=0)
    st = apply_all(st, minus_prep + [g_op] + sel_ops + [g_op])
    sel, prob = postselect(st, "j", 0)
    # block action on |0> is 0.6|0>, so the success probability is 0.36
    assert abs(prob - 0.36) < 1e-10
    assert register_value_probability(sel, "l", 0) > 1.0 - 1e-10


def test_verify_block_encoding_identity_and_corruption():
    be = BlockEncoding(unitary=np.eye(4), anc_dim=1, alpha=1.0, epsilon=0.0, target=np.eye(4))
    assert verify_block_encoding(be) <= 1e-14
    bad = BlockEncoding(unitary=np.diag([1.0, 1.0, 1.0, -1.0]), anc_dim=1, alpha=1.0, epsilon=0.0, target=np.eye(4))
    assert verify_block_encoding(bad) > 0.5


def contrast_system():
    rows = np.array([[1.0, 0.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    return LinearSystem(a=rows, b=np.zeros(2))


def test_naive_operator_is_not_unitary():
    sys = contrast_system()
    t = naive_iteration_matrix(sys, (0, 1), np.ones(2), 2)
    assert np.abs(t @ t.T - np.eye(4)).max() >= 0.01


def test_uk_unitary_while_naive_fails():
    sys = contrast_system()
    be = build_uk(sys, (0, 1), {0: 0.5, 1: 0.5})
    u = be.unitary
    assert np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() <= 1e-10


def test_uk_block_matches_direct_matrix():
    sys, _ = gen_gaussian_system(4, 2, seed=31)
    weights = {0: 0.8, 2: 0.3}
    be = build_uk(sys, (0, 2), weights)
    assert verify_block_encoding(be) <= 1e-10
    assert np.abs(be.block() - iteration_matrix_dense(sys, weights)).max() <= 1e-10


def test_uk_symmetric_real_case():
    sys, _ = gen_gaussian_system(4, 2, seed=32)
    be = build_uk(sys, (1, 3), {1: 0.6, 3: 0.2})
    assert np.abs(be.unitary - be.unitary.T).max() <= 1e-10
    assert np.abs(v_tilde_dense(sys) - v_tilde_dense(sys).T).max() <= 1e-10


def test_uk_q1_reduces_to_one_row_operator():
    sys, _ = gen_gaussian_system(4, 2, seed=33)
    i = 2
    be = build_uk(sys, (i,), {i: 1.0})
    block = be.block()
    pad_n = 2
    pad_m = 4
    # restrict the index register to |i>: rows/cols (t * pad_m + i) * pad_n + w
    idx = [(t * pad_m + i) * pad_n + w for t in range(2) for w in range(pad_n)]
    sub = block[np.ix_(idx, idx)]
    expect = one_row_operator_dense(sys.a[i] / np.linalg.norm(sys.a[i]))
    assert np.abs(sub - expect).max() <= 1e-10


def test_uk_projector_shortcut_agrees():
    sys, _ = gen_gaussian_system(4, 2, seed=34)
    be = build_uk(sys, (0, 1), {0: 1.0, 1: 1.0})
    sc = build_uk_projector_shortcut(sys, (0, 1))
    assert np.abs(sc.unitary - be.block()).max() <= 1e-10
    assert verify_block_encoding(sc) <= 1e-10
    assert np.abs(sc.unitary - sc.unitary.T).max() <= 1e-10


def test_uk_rejects_branch_weight_above_one():
    sys, _ = gen_gaussian_system(4, 2, seed=35)
    with pytest.raises(ValueError, match="outside"):
        build_uk(sys, (0,), {0: 1.3})


def test_uk_unit_weights_is_involution():
    # with every branch weight one the weighted projector is a projector,
    # so the iteration matrix squares to the identity
    sys, _ = gen_gaussian_system(4, 2, seed=36)
    block = build_uk(sys, (0, 3), {0: 1.0, 3: 1.0}).block()
    assert np.abs(block @ block - np.eye(block.shape[0])).max() <= 1e-10
