"""Block-encodings of the weighted row-selection operator and the
iteration operator.

Weight block: sandwiching the select unitary between a symmetric
selection-state preparation G and its adjoint leaves
sum_{i in tau} w_i |i><i| in the postselected block. The select carries
the paper's reflection-shift blocks C_h plus a phase of -1 on the whole
second half of the address space; with true adjoints the sandwich
coefficients are |amplitude|^2, so the minus signs the linear combination
needs (the square roots of negative weights in the selection state) must
live in the select, not in G. The second-half phase plus the diagonal
phase flip of the select yield exactly -C_{-1} on selected branches and
-C_1 on redundant ones, making the redundancy cancel and the weighted
diagonal emerge.

Iteration operator: U_k = I - (I2 - X) (x) Sigma_tau with
Sigma_tau = sum w~_i |i><i| (x) |A_i><A_i| is applied through one flag
qubit: in the Hadamard frame of the top qubit, a reflection-like core
I - 2 Sigma_tau is dilated exactly by per-index symmetric rotations
(angle set by 1 - 2 w~_i) conjugated with the row-preparation operator.
Everything stays real and symmetric, which the tests assert.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np

from .linalg import LinearSystem, singular_values
from .qtree import AddressTree, build_tree, reflection_to

BLOCK_TOL = 1e-10


def _pow2_at_least(n: int) -> int:
    size = 2
    while size < n:
        size *= 2
    return size


@dataclass(frozen=True)
class BlockEncoding:
    """Unitary whose top-left block (ancilla postselected to 0) encodes a target.

    anc_dim is the ancilla space dimension (first tensor factor, slow
    index); alpha the subnormalization; epsilon the declared error bound.
    """

    unitary: np.ndarray
    anc_dim: int
    alpha: float
    epsilon: float
    target: np.ndarray

    @property
    def ancilla_qubits(self) -> int:
        return int(np.log2(self.anc_dim))

    def block(self) -> np.ndarray:
        dim = self.unitary.shape[0] // self.anc_dim
        resh = self.unitary.reshape(self.anc_dim, dim, self.anc_dim, dim)
        return resh[0, :, 0, :]


def verify_block_encoding(be: BlockEncoding, target: np.ndarray | None = None) -> float:
    """Measured epsilon: || target - alpha <0|U|0> ||_2 (spectral norm)."""
    if target is None:
        target = be.target
    diff = np.asarray(target, dtype=complex) - be.alpha * be.block()
    stacked = np.block([[diff.real, -diff.imag], [diff.imag, diff.real]])
    return float(singular_values(stacked)[0])


@dataclass(frozen=True)
class RedundancyPlan:
    """Amplitudes r_i padding the selection state up to unit norm.

    t_k (the selected weight mass) plus twice the total redundancy
    accounts for probability one in the selection state.
    """

    m: int
    tau: tuple[int, ...]
    t_k: float
    r: dict[int, float]

    def total_probability(self) -> float:
        return self.t_k + 2.0 * sum(self.r.values())


def uniform_plan(m: int, tau, omega_k: dict[int, float]) -> RedundancyPlan:
    """Spread the leftover probability uniformly over non-selected indices."""
    tau = tuple(sorted(set(int(i) for i in tau)))
    t_k = float(sum(omega_k.values()))
    if t_k > 1.0 + 1e-12:
        raise ValueError(f"selected weights sum to {t_k} > 1; not encodable")
    rest = [i for i in range(m) if i not in tau]
    if not rest:
        if abs(t_k - 1.0) > 1e-12:
            raise ValueError("all rows selected but weights do not sum to 1")
        return RedundancyPlan(m=m, tau=tau, t_k=t_k, r={})
    r_val = max(0.0, (1.0 - t_k) / (2 * len(rest)))
    return RedundancyPlan(m=m, tau=tau, t_k=t_k, r={i: r_val for i in rest})


def g_amplitudes(m: int, tau, omega_k: dict[int, float], plan: RedundancyPlan | None = None) -> np.ndarray:
    """Selection-state amplitudes over 2m addresses.

    sqrt(w_i / 2) on both halves for selected i, sqrt(r_i) on both halves
    otherwise; all real and nonnegative (the subtraction signs live in the
    select unitary).
    """
    tau = tuple(sorted(set(int(i) for i in tau)))
    if plan is None:
        plan = uniform_plan(m, tau, omega_k)
    g = np.zeros(2 * m)
    for i in range(m):
        amp = sqrt(omega_k[i] / 2.0) if i in tau else sqrt(plan.r.get(i, 0.0))
        g[i] = amp
        g[i + m] = amp
    total = float(g @ g)
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"selection amplitudes have squared sum {total}, need 1")
    return g


def c_block(m: int, j: int, h: int) -> np.ndarray:
    """C_h^{(j,j)}: the shift l -> (2j - l) mod m with the j-th diagonal
    element weighted by h in {1, -1}."""
    if h not in (1, -1):
        raise ValueError("h must be +1 or -1")
    shift = np.zeros((m, m))
    for l in range(m):
        shift[(2 * j - l) % m, l] = 1.0
    diag = np.eye(m)
    diag[j, j] = h
    return shift @ diag


def select_paper_dense(m: int, tau) -> np.ndarray:
    """The bare select unitary: C_1 blocks everywhere except C_-1 on
    second-half selected branches (the comparator circuit's action)."""
    tau = set(int(i) for i in tau)
    dim = 2 * m * m
    out = np.zeros((dim, dim))
    for j in range(2 * m):
        i = j % m
        h = -1 if (j >= m and i in tau) else 1
        out[j * m : (j + 1) * m, j * m : (j + 1) * m] = c_block(m, i, h)
    return out


def select_dense(m: int, tau, z_layer: bool = True) -> np.ndarray:
    """Select with the second-half phase layer that the sandwich needs.

    z_layer=False reproduces the literal all-positive-coefficient reading
    and is kept as a negative-test fixture: without it the redundant
    branches fail to cancel and the block is not the weighted diagonal.
    """
    sel = select_paper_dense(m, tau)
    if z_layer:
        sign = np.ones(2 * m)
        sign[m:] = -1.0
        sel = np.kron(np.diag(sign), np.eye(m)) @ sel
    return sel


@dataclass(frozen=True)
class WeightBlockResult:
    encoding: BlockEncoding
    g: np.ndarray
    t_k: float
    repetitions: int

    @property
    def block(self) -> np.ndarray:
        return self.encoding.block()


def build_weight_block(
    m: int,
    tau,
    omega_k: dict[int, float],
    plan: RedundancyPlan | None = None,
    z_layer: bool = True,
) -> WeightBlockResult:
    """Assemble (G (x) I) S (G^dagger (x) I) and read off the weighted diagonal.

    The postselection success weight is t_k, the selection-state mass on
    the selected addresses; the amplitude-amplification repetition
    estimate ceil(1 / sqrt(t_k)) is reported alongside.
    """
    tau = tuple(sorted(set(int(i) for i in tau)))
    g = g_amplitudes(m, tau, omega_k, plan)
    g_mat = reflection_to(g)
    sel = select_dense(m, tau, z_layer=z_layer)
    sandwich = np.kron(g_mat, np.eye(m)) @ sel @ np.kron(g_mat.conj().T, np.eye(m))
    target = np.zeros((m, m))
    for i in tau:
        target[i, i] = omega_k[i]
    t_k = float(sum(g[i] ** 2 + g[i + m] ** 2 for i in tau))
    encoding = BlockEncoding(unitary=sandwich, anc_dim=2 * m, alpha=1.0, epsilon=BLOCK_TOL, target=target)
    reps = ceil(1.0 / sqrt(t_k)) if t_k > 0 else 0
    return WeightBlockResult(encoding=encoding, g=g, t_k=t_k, repetitions=reps)


def naive_iteration_matrix(sys: LinearSystem, tau, omega: np.ndarray, q: int) -> np.ndarray:
    """The direct multi-row analogue of the one-row operator, without the
    index register: [[I - B, B], [B, I - B]] with
    B = (1/q) sum_{i in tau} w_i |A_i><A_i|. Not unitary once rows overlap
    or weights differ from one; kept for the non-unitarity contrast."""
    n = sys.n
    b = np.zeros((n, n))
    norms = sys.row_norms()
    for i in tau:
        row = sys.a[i] / norms[i]
        b += (omega[i] / q) * np.outer(row, row)
    eye = np.eye(n)
    return np.block([[eye - b, b], [b, eye - b]])


def row_projectors(sys: LinearSystem, pad_n: int | None = None) -> tuple[np.ndarray, int, int]:
    """Padded row unit vectors stacked as a (m, pad_n) array."""
    norms = sys.row_norms()
    rows = sys.a / norms[:, None]
    pad = pad_n or _pow2_at_least(sys.n)
    out = np.zeros((sys.m, pad))
    out[:, : sys.n] = rows
    return out, _pow2_at_least(sys.m), pad


def sigma_tau_dense(sys: LinearSystem, branch_weights: dict[int, float]) -> np.ndarray:
    """Sigma_tau = sum_i w~_i |i><i| (x) |A_i><A_i| on index (x) work."""
    rows, pad_m, pad_n = row_projectors(sys)
    out = np.zeros((pad_m * pad_n, pad_m * pad_n))
    for i, w in branch_weights.items():
        proj = np.zeros((pad_m, pad_m))
        proj[i, i] = 1.0
        out += w * np.kron(proj, np.outer(rows[i], rows[i]))
    return out


def iteration_matrix_dense(sys: LinearSystem, branch_weights: dict[int, float]) -> np.ndarray:
    """The two-block iteration matrix I - (I2 - X) (x) Sigma_tau."""
    sig = sigma_tau_dense(sys, branch_weights)
    i2 = np.eye(2)
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    return np.eye(2 * sig.shape[0]) - np.kron(i2 - x, sig)


def v_tilde_dense(sys: LinearSystem) -> np.ndarray:
    """Block-diagonal controlled row preparation on index (x) work."""
    rows, pad_m, pad_n = row_projectors(sys)
    out = np.zeros((pad_m * pad_n, pad_m * pad_n))
    for i in range(pad_m):
        blockmat = reflection_to(rows[i]) if i < sys.m else np.eye(pad_n)
        out[i * pad_n : (i + 1) * pad_n, i * pad_n : (i + 1) * pad_n] = blockmat
    return out


def build_uk(
    sys: LinearSystem,
    tau,
    branch_weights: dict[int, float],
    epsilon: float = BLOCK_TOL,
) -> BlockEncoding:
    """Exact one-ancilla block-encoding of the iteration matrix.

    Ordering (slow to fast): top, flag, index, work. In the Hadamard frame
    of the top qubit the controlled core applies
    R = V~ (I - 2 Pi) V~^dagger, and Pi is dilated by symmetric rotations
    with cos(theta_i) = 1 - 2 w~_i, so each branch weight must lie in
    [0, 1]. Postselecting the flag on 0 leaves exactly the iteration
    matrix; for weights equal to one it is unitary on its own.
    """
    tau = tuple(sorted(set(int(i) for i in tau)))
    for i, w in branch_weights.items():
        if not -1e-12 <= w <= 1.0 + 1e-12:
            raise ValueError(f"branch weight {w} for row {i} outside [0, 1]; not encodable")
    rows, pad_m, pad_n = row_projectors(sys)
    d = pad_m * pad_n
    vt = v_tilde_dense(sys)
    core = np.eye(2 * d)
    for i in tau:
        w = min(max(branch_weights[i], 0.0), 1.0)
        c = 1.0 - 2.0 * w
        s = 2.0 * sqrt(w * (1.0 - w))
        pos = i * pad_n  # index i, work 0
        core[pos, pos] = c
        core[pos, d + pos] = s
        core[d + pos, pos] = s
        core[d + pos, d + pos] = -c
    vt2 = np.kron(np.eye(2), vt)
    r_hat = vt2 @ core @ vt2.T
    ctrl = np.eye(4 * d)
    ctrl[2 * d :, 2 * d :] = r_hat  # top = 1 branch (top slow, flag next)
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / sqrt(2.0)
    w_full = np.kron(h, np.eye(2 * d)) @ ctrl @ np.kron(h, np.eye(2 * d))
    # reorder (top, flag, rest) -> (flag, top, rest) so the ancilla is slow
    resh = w_full.reshape(2, 2, d, 2, 2, d).transpose(1, 0, 2, 4, 3, 5).reshape(4 * d, 4 * d)
    target = iteration_matrix_dense(sys, {i: branch_weights[i] for i in tau})
    return BlockEncoding(unitary=resh, anc_dim=2, alpha=1.0, epsilon=epsilon, target=target)


def build_uk_projector_shortcut(sys: LinearSystem, tau) -> BlockEncoding:
    """Unit-weight special case via a single multi-controlled flip.

    When every selected branch weight is one, Sigma_tau is a projector and
    the iteration matrix itself is unitary: conjugating a top-qubit flip
    controlled on (index in tau, work = 0) by the row preparation gives it
    with no ancilla at all.
    """
    tau = tuple(sorted(set(int(i) for i in tau)))
    rows, pad_m, pad_n = row_projectors(sys)
    d = pad_m * pad_n
    vt = v_tilde_dense(sys)
    proj = np.zeros((d, d))
    for i in tau:
        proj[i * pad_n, i * pad_n] = 1.0
    i2 = np.eye(2)
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    mcx = np.kron(i2, np.eye(d) - proj) + np.kron(x, proj)
    u = np.kron(i2, vt) @ mcx @ np.kron(i2, vt).T
    target = iteration_matrix_dense(sys, {i: 1.0 for i in tau})
    return BlockEncoding(unitary=u, anc_dim=1, alpha=1.0, epsilon=BLOCK_TOL, target=target)


def one_row_operator_dense(row: np.ndarray) -> np.ndarray:
    """The one-row iteration operator for a unit row (the q = 1 picture)."""
    row = np.asarray(row, dtype=float)
    proj = np.outer(row, row)
    eye = np.eye(len(row))
    return np.block([[eye - proj, proj], [proj, eye - proj]])


def address_tree_for(sys: LinearSystem) -> AddressTree:
    """Data trees for every (padded) row of the system."""
    rows, pad_m, pad_n = row_projectors(sys)
    trees = []
    for i in range(sys.m):
        trees.append(build_tree(rows[i]))
    return AddressTree(trees=tuple(trees))
