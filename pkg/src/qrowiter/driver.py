"""The multi-row iteration pipeline, end to end.

Per step: encode the current iterate and the selected rows behind one
flag qubit, apply the iteration operator, exchange the index support
toward the next step's rows, aggregate the index register with the
adding operator, postselect the clean branch, and read the new iterate
out of the work register. The norm ledger (v_k, beta_k, gamma_k,i)
carries the scalar that converts unit quantum states back into
unnormalized iterates.

Two interchangeable backends: the gate backend runs the actual circuit
on the statevector simulator; the matrix backend runs the identical
arithmetic on dense vectors (the route used for the 100 x 4 experiment,
far beyond any simulable register). Both reproduce the classical
multi-row trajectory step for step on a shared schedule; that equality
is the central correctness property of the package.

Weight bookkeeping: the per-branch weights inside the iteration operator
are q' * (count_i * w_i / q) for q' distinct selected indices. The
uniform index superposition contributes a factor 1/q' when the adding
operator collapses it, so this is exactly what lands the aggregated
update back on the classical protocol. The gate backend additionally
needs every branch weight at most 1 (rotation-angle encodability), which
uniform unit weights always satisfy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .arith import elementary_count
from .classical import IterationSchedule, SamplingWeights
from .linalg import IterationError, LinearSystem, least_squares_solve
from .qtree import reflection_to
from .simulator import CircuitOp, RegisterLayout, StateVector, apply_all, extract_real_vector, postselect

ROW_NORM_TOL = 1e-10


class QubitBudgetError(ValueError):
    """Gate backend cannot fit the registers; use the matrix backend."""


@dataclass
class LedgerStep:
    """Normalization scalars of one step."""

    k: int
    v_k: float
    beta: float
    gamma: dict[int, float]
    v_next: float
    success_prob: float = 1.0


@dataclass
class NormLedger:
    """v_k recursion v_{k+1} = v_k / beta_k plus the side quantities the
    resource analysis quotes (cumulative product, naive bound)."""

    steps: list[LedgerStep] = field(default_factory=list)
    v_product: float = 1.0

    def record(self, entry: LedgerStep) -> None:
        self.steps.append(entry)
        self.v_product /= entry.beta

    def appendix_v_bound(self, sys: LinearSystem, schedule: IterationSchedule, k_steps: int) -> float:
        """sqrt(1 + sum_k sum_{i in tau_k} b_i) as printed; reported next
        to the recursion value, which is the ground truth."""
        total = 0.0
        for k in range(k_steps):
            for i in set(schedule.step(k)):
                total += sys.b[i]
        return sqrt(max(1.0 + total, 0.0))


def ledger_scalars(v_k: float, b_sel: dict[int, float]) -> tuple[float, dict[int, float], float]:
    """beta, gamma_i, v_next from the current norm and selected b values."""
    denom_sq = v_k**2 + sum(b * b for b in b_sel.values())
    if denom_sq <= 0.0:
        raise ValueError("v_k^2 + sum b_i^2 vanishes; nothing to encode")
    denom = sqrt(denom_sq)
    beta = v_k / denom
    gamma = {i: b / denom for i, b in b_sel.items()}
    return beta, gamma, denom


def branch_weights(agg: dict[int, float]) -> dict[int, float]:
    """Per-branch operator weights: q' times the aggregated step weights."""
    q_distinct = len(agg)
    return {i: q_distinct * w for i, w in agg.items()}


def hadamard_repetitions(pad_m: int, q_distinct: int) -> int:
    """Amplitude-amplification rounds the Hadamard adding path would need:
    its index-collapse amplitude is sqrt(q'/pad_m) against the exact
    operator's 1."""
    return ceil(sqrt(pad_m / q_distinct))


@dataclass
class GateTally:
    """Per-step resource counts, split the way the analysis splits them:
    elementary gates (register-width driven) versus oracle-style queries
    to the state-preparation operators."""

    elementary: int = 0
    queries_g: int = 0
    queries_v: int = 0
    queries_data: int = 0
    queries_p: int = 0
    queries_uadd: int = 0

    def add(self, other: "GateTally") -> None:
        self.elementary += other.elementary
        self.queries_g += other.queries_g
        self.queries_v += other.queries_v
        self.queries_data += other.queries_data
        self.queries_p += other.queries_p
        self.queries_uadd += other.queries_uadd


@dataclass
class StepRecord:
    k: int
    x: np.ndarray
    err_sq: float
    success_prob: float
    tally: GateTally | None = None


@dataclass
class RunResult:
    backend: str
    records: list[StepRecord]
    ledger: NormLedger
    tally: GateTally

    def trajectory(self) -> list[np.ndarray]:
        return [r.x for r in self.records]

    def errors(self) -> list[float]:
        return [r.err_sq for r in self.records]


def _require_unit_rows(sys: LinearSystem) -> None:
    if np.abs(sys.row_norms() - 1.0).max() > ROW_NORM_TOL:
        raise ValueError("driver requires unit-norm rows; run normalize_rows first")


def _padded(vec: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: len(vec)] = vec
    return out


def _uniform_support(indices, size: int) -> np.ndarray:
    vec = np.zeros(size)
    amp = 1.0 / sqrt(len(indices))
    for i in indices:
        vec[i] = amp
    return vec


# ---------------------------------------------------------------------------
# matrix backend


def matrix_step(
    x_vec: np.ndarray, sys: LinearSystem, agg: dict[int, float]
) -> tuple[np.ndarray, LedgerStep, dict[int, float]]:
    """One step of the dense-arithmetic backend.

    Returns the new iterate, the ledger entry (with the clean-branch
    probability), and the per-branch amplitudes after the step (the
    s'-weights the exchange operator sees).
    """
    q_distinct = len(agg)
    v_k = float(np.linalg.norm(x_vec))
    b_sel = {i: float(sys.b[i]) for i in agg}
    beta, gamma, v_next = ledger_scalars(v_k, b_sel)
    w_branch = branch_weights(agg)
    s = 1.0 / sqrt(q_distinct)
    ys = {}
    for i in agg:
        row = sys.a[i]
        ys[i] = x_vec + w_branch[i] * (sys.b[i] - row @ x_vec) * row
    x_next = sum(ys.values()) / q_distinct
    prob = (np.linalg.norm(x_next) / v_next) ** 2 if v_next > 0 else 0.0
    s_prime = {i: s * np.linalg.norm(ys[i]) for i in agg}
    norm = sqrt(sum(val**2 for val in s_prime.values()))
    if norm > 0:
        s_prime = {i: val / norm for i, val in s_prime.items()}
    entry = LedgerStep(k=-1, v_k=v_k, beta=beta, gamma=gamma, v_next=v_next, success_prob=float(prob))
    return np.asarray(x_next), entry, s_prime


# ---------------------------------------------------------------------------
# gate backend


def gate_layout(m: int, n: int, cap: int = 24) -> RegisterLayout:
    w_m = max((m - 1).bit_length(), 1)
    pad_n = 1
    while 2**pad_n < n:
        pad_n += 1
    total = 3 + w_m + pad_n
    if total > cap:
        raise QubitBudgetError(f"{total} qubits needed for m={m}, n={n}; use the matrix backend")
    return RegisterLayout.of(("flag", 1), ("garb", 1), ("index", w_m), ("work", pad_n), ("f", 1), cap=cap)


def _sym_rot(c: float) -> np.ndarray:
    s = sqrt(max(0.0, 1.0 - c * c))
    return np.array([[c, s], [s, -c]])


@dataclass
class GateStepOps:
    """Ops and resource tally for one step of the gate backend."""

    ops: list[CircuitOp]
    tally: GateTally


def prep_y_ops(
    sys: LinearSystem,
    agg: dict[int, float],
    x_hat: np.ndarray,
    beta: float,
    gamma: dict[int, float],
    layout: RegisterLayout,
) -> GateStepOps:
    """Rotation and controlled loads producing the pre-iteration state.

    flag=0 branch: uniform index support with the iterate in the work
    register; flag=1 branch: gamma-weighted index support with the rows
    loaded, plus a garbage component parking the amplitude the uniform
    index split cannot carry.
    """
    tally = GateTally()
    w_m = layout.width("index")
    pad_m = 2**w_m
    pad_n = 2 ** layout.width("work")
    q_distinct = len(agg)
    flag = layout.qubit("flag", 0)
    garb = layout.qubit("garb", 0)
    ops: list[CircuitOp] = []

    g_amp = sqrt(max(0.0, 1.0 - beta * beta))
    ops.append(CircuitOp(name="rot_beta", targets=(flag,), matrix=_sym_rot(beta)))
    tally.elementary += 1

    s_vec = _uniform_support(sorted(agg), pad_m)
    ops.append(
        CircuitOp(name="prep_s", targets=layout.qubits("index"), matrix=reflection_to(s_vec), controls=(flag,), control_values=(0,))
    )
    tally.queries_g += 1

    x_target = _padded(x_hat, pad_n) if np.linalg.norm(x_hat) > 0 else _padded(np.eye(len(x_hat))[0], pad_n)
    ops.append(
        CircuitOp(name="prep_x", targets=layout.qubits("work"), matrix=reflection_to(x_target), controls=(flag,), control_values=(0,))
    )
    tally.queries_data += 1

    if g_amp > 1e-14:
        # phi over garb (slow bit) x index: gamma s / ||gamma|| on garb=0,
        # leftover on garb=1
        phi = np.zeros(2 * pad_m)
        s = 1.0 / sqrt(q_distinct)
        for i, g in gamma.items():
            phi[i] = g * s / g_amp
        leftover = 1.0 - float(phi @ phi)
        phi[pad_m] = sqrt(max(0.0, leftover))
        ops.append(
            CircuitOp(
                name="prep_phi",
                targets=layout.qubits("index") + (garb,),
                matrix=reflection_to(phi),
                controls=(flag,),
                control_values=(1,),
            )
        )
        tally.queries_g += 1

    ops.extend(_v_tilde_ops(sys, layout, controls=(flag, garb), control_values=(1, 0)))
    tally.queries_v += 1
    return GateStepOps(ops=ops, tally=tally)


def _v_tilde_ops(
    sys: LinearSystem, layout: RegisterLayout, controls: tuple[int, ...] = (), control_values: tuple[int, ...] = (), dagger: bool = False
) -> list[CircuitOp]:
    """Controlled row loads |i>|0> -> |i>|A_i> (one query to the row store)."""
    pad_n = 2 ** layout.width("work")
    idx_qubits = layout.qubits("index")
    ops = []
    for i in range(sys.m):
        row = _padded(sys.a[i], pad_n)
        mat = reflection_to(row)
        pattern = tuple((i >> b) & 1 for b in range(len(idx_qubits)))
        ops.append(
            CircuitOp(
                name=f"vrow{i}" + ("+" if dagger else ""),
                targets=layout.qubits("work"),
                matrix=mat.T if dagger else mat,
                controls=controls + idx_qubits,
                control_values=control_values + pattern,
            )
        )
    return ops


def uk_ops(sys: LinearSystem, agg: dict[int, float], layout: RegisterLayout) -> GateStepOps:
    """The iteration operator: Hadamard frame on the flag, row-basis
    rotation multiplexer on the f ancilla inside."""
    tally = GateTally()
    w_branch = branch_weights(agg)
    for i, w in w_branch.items():
        if w > 1.0 + 1e-12:
            raise ValueError(
                f"branch weight {w:.4f} on row {i} exceeds 1; this schedule is not gate-encodable"
            )
    flag = layout.qubit("flag", 0)
    garb = layout.qubit("garb", 0)
    fq = layout.qubit("f", 0)
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / sqrt(2.0)
    idx_qubits = layout.qubits("index")
    work_qubits = layout.qubits("work")
    ops: list[CircuitOp] = [CircuitOp(name="h", targets=(flag,), matrix=h)]
    tally.elementary += 1
    ops.extend(_v_tilde_ops(sys, layout, controls=(flag,), control_values=(1,), dagger=True))
    tally.queries_v += 1
    for i in sorted(agg):
        w = min(w_branch[i], 1.0)
        pattern = tuple((i >> b) & 1 for b in range(len(idx_qubits)))
        op = CircuitOp(
            name=f"rot_w{i}",
            targets=(fq,),
            matrix=_sym_rot(1.0 - 2.0 * w),
            controls=(flag, garb) + idx_qubits + work_qubits,
            control_values=(1, 0) + pattern + (0,) * len(work_qubits),
        )
        ops.append(op)
        tally.elementary += elementary_count(op)
    ops.extend(_v_tilde_ops(sys, layout, controls=(flag,), control_values=(1,)))
    tally.queries_v += 1
    ops.append(CircuitOp(name="h", targets=(flag,), matrix=h))
    tally.elementary += 1
    return GateStepOps(ops=ops, tally=tally)


def exchange_ops(s_from: np.ndarray, s_to: np.ndarray, layout: RegisterLayout) -> list[CircuitOp]:
    """Index-register exchange: a reflection mapping one support vector to
    the other (and back); identity when they already coincide."""
    if np.abs(s_from - s_to).max() < 1e-14:
        return []
    diff = s_from - s_to
    u = diff / np.linalg.norm(diff)
    mat = np.eye(len(s_from)) - 2.0 * np.outer(u, u)
    return [CircuitOp(name="exchange", targets=layout.qubits("index"), matrix=mat)]


def uadd_ops(s_vec: np.ndarray, layout: RegisterLayout, hadamard: bool = False) -> list[CircuitOp]:
    """The adding operator: exact adjoint of the support preparation, or
    the Hadamard alternative (cheaper, smaller success probability)."""
    if hadamard:
        h = np.array([[1.0, 1.0], [1.0, -1.0]]) / sqrt(2.0)
        return [CircuitOp(name="uadd_h", targets=(q,), matrix=h) for q in layout.qubits("index")]
    return [CircuitOp(name="uadd", targets=layout.qubits("index"), matrix=reflection_to(s_vec))]


def gate_step(
    x_vec: np.ndarray,
    sys: LinearSystem,
    agg: dict[int, float],
    agg_next: dict[int, float] | None,
    layout: RegisterLayout,
    hadamard_add: bool = False,
    prob_floor: float = 0.0,
) -> tuple[np.ndarray, LedgerStep, GateTally]:
    """Run one full circuit step and read the next iterate out."""
    pad_m = 2 ** layout.width("index")
    q_distinct = len(agg)
    v_k = float(np.linalg.norm(x_vec))
    b_sel = {i: float(sys.b[i]) for i in agg}
    beta, gamma, v_next = ledger_scalars(v_k, b_sel)
    x_hat = x_vec / v_k if v_k > 0 else x_vec

    prep = prep_y_ops(sys, agg, x_hat, beta, gamma, layout)
    uk = uk_ops(sys, agg, layout)
    tally = GateTally()
    tally.add(prep.tally)
    tally.add(uk.tally)
    ops = prep.ops + uk.ops

    s_vec = _uniform_support(sorted(agg), pad_m)
    if hadamard_add:
        ops += uadd_ops(s_vec, layout, hadamard=True)
        tally.queries_uadd += 1
    else:
        if agg_next is not None:
            t_vec = _uniform_support(sorted(agg_next), pad_m)
            px = exchange_ops(s_vec, t_vec, layout)
            ops += px
            if px:
                tally.queries_p += 1
            ops += uadd_ops(t_vec, layout)
        else:
            ops += uadd_ops(s_vec, layout)
        tally.queries_uadd += 1

    state = apply_all(StateVector.zero(layout), ops)
    prob = 1.0
    for reg in ("flag", "f", "garb", "index"):
        state, p = postselect(state, reg, 0)
        prob *= p
    if prob < prob_floor:
        raise ValueError(
            f"clean-branch probability {prob:.3e} is below the configured floor "
            f"{prob_floor:.3e}; budget more post-selection repetitions (about "
            f"{ceil(1.0 / sqrt(max(prob, 1e-300)))} amplification rounds)"
        )
    vec = extract_real_vector(state, "work")
    scale = v_next * sqrt(prob)
    if hadamard_add:
        scale *= sqrt(pad_m / q_distinct)
    x_next = scale * vec[: sys.n]
    entry = LedgerStep(k=-1, v_k=v_k, beta=beta, gamma=gamma, v_next=v_next, success_prob=float(prob))
    return x_next, entry, tally


# ---------------------------------------------------------------------------
# the spec-level pipeline stages (gate backend), usable one at a time


@dataclass
class IterationState:
    """Gate-backend pipeline state between stages."""

    sys: LinearSystem
    weights: SamplingWeights
    schedule: IterationSchedule
    layout: RegisterLayout
    k: int
    x_vec: np.ndarray
    state: StateVector | None
    ledger: NormLedger
    hadamard_add: bool = False
    _stage: str = "idle"
    _beta: float = 0.0
    _gamma: dict[int, float] = field(default_factory=dict)
    _v_next: float = 0.0

    @property
    def agg(self) -> dict[int, float]:
        return self.schedule.aggregated(self.k, self.weights)


def init_state(
    sys: LinearSystem,
    weights: SamplingWeights,
    schedule: IterationSchedule,
    x1: np.ndarray,
    hadamard_add: bool = False,
    cap: int = 24,
) -> IterationState:
    """Validate inputs and set up the register layout; v_1 = ||x1|| = 1."""
    _require_unit_rows(sys)
    x1 = np.asarray(x1, dtype=float)
    if abs(np.linalg.norm(x1) - 1.0) > 1e-10:
        raise ValueError("initial iterate must be a unit vector")
    if not schedule.tau or not schedule.tau[0]:
        raise ValueError("schedule has no first index set")
    layout = gate_layout(sys.m, sys.n, cap=cap)
    return IterationState(
        sys=sys,
        weights=weights,
        schedule=schedule,
        layout=layout,
        k=0,
        x_vec=x1.copy(),
        state=None,
        ledger=NormLedger(),
        hadamard_add=hadamard_add,
    )


def encoded_x1(st: IterationState) -> StateVector:
    """The bare initial encoding: uniform index support times the iterate."""
    pad_m = 2 ** st.layout.width("index")
    pad_n = 2 ** st.layout.width("work")
    ops = [
        CircuitOp(name="prep_s", targets=st.layout.qubits("index"), matrix=reflection_to(_uniform_support(sorted(st.agg), pad_m))),
        CircuitOp(name="prep_x", targets=st.layout.qubits("work"), matrix=reflection_to(_padded(st.x_vec, pad_n))),
    ]
    return apply_all(StateVector.zero(st.layout), ops)


def rotation_prep(st: IterationState) -> IterationState:
    """Build the pre-iteration state for the current step."""
    agg = st.agg
    v_k = float(np.linalg.norm(st.x_vec))
    beta, gamma, v_next = ledger_scalars(v_k, {i: float(st.sys.b[i]) for i in agg})
    x_hat = st.x_vec / v_k if v_k > 0 else st.x_vec
    prep = prep_y_ops(st.sys, agg, x_hat, beta, gamma, st.layout)
    st.state = apply_all(StateVector.zero(st.layout), prep.ops)
    st._stage = "y"
    st._beta, st._gamma, st._v_next = beta, gamma, v_next
    return st


def apply_iteration(st: IterationState) -> IterationState:
    """Apply the iteration operator to the prepared state."""
    if st._stage != "y":
        raise RuntimeError("apply_iteration needs the rotation-prepared state")
    uk = uk_ops(st.sys, st.agg, st.layout)
    st.state = apply_all(st.state, uk.ops)
    st._stage = "z"
    return st


def exchange_indices(st: IterationState) -> IterationState:
    """Move the index support toward the next step's selection."""
    if st._stage != "z":
        raise RuntimeError("exchange_indices follows apply_iteration")
    pad_m = 2 ** st.layout.width("index")
    s_vec = _uniform_support(sorted(st.agg), pad_m)
    if st.k + 1 < len(st.schedule):
        t_vec = _uniform_support(sorted(st.schedule.aggregated(st.k + 1, st.weights)), pad_m)
    else:
        t_vec = s_vec
    st.state = apply_all(st.state, exchange_ops(s_vec, t_vec, st.layout))
    st._stage = "exchanged"
    st._t_vec = t_vec
    return st


def u_add_and_extract(st: IterationState) -> tuple[np.ndarray, float]:
    """Aggregate the index register, postselect, and read the iterate."""
    if st._stage not in ("z", "exchanged"):
        raise RuntimeError("u_add_and_extract follows apply_iteration")
    pad_m = 2 ** st.layout.width("index")
    if st._stage == "z":
        t_vec = _uniform_support(sorted(st.agg), pad_m)
    else:
        t_vec = st._t_vec
    st.state = apply_all(st.state, uadd_ops(t_vec, st.layout, hadamard=st.hadamard_add))
    prob = 1.0
    state = st.state
    for reg in ("flag", "f", "garb", "index"):
        state, p = postselect(state, reg, 0)
        prob *= p
    vec = extract_real_vector(state, "work")
    scale = st._v_next * sqrt(prob)
    if st.hadamard_add:
        scale *= sqrt(pad_m / len(st.agg))
    x_next = scale * vec[: st.sys.n]
    entry = LedgerStep(k=st.k, v_k=float(np.linalg.norm(st.x_vec)), beta=st._beta, gamma=st._gamma, v_next=st._v_next, success_prob=float(prob))
    st.ledger.record(entry)
    st.x_vec = x_next
    st.k += 1
    st._stage = "idle"
    st.state = None
    return x_next, float(prob)


# ---------------------------------------------------------------------------
# full runs


def run_quantum(
    sys: LinearSystem,
    weights: SamplingWeights,
    schedule: IterationSchedule,
    x1: np.ndarray,
    k_steps: int,
    backend: str = "matrix",
    x_star: np.ndarray | None = None,
    hadamard_add: bool = False,
    cap: int = 24,
    prob_floor: float = 0.0,
) -> RunResult:
    """Run K steps on either backend, recording iterates, errors, success
    probabilities, and (gate backend) resource tallies."""
    if backend not in ("matrix", "gate"):
        raise ValueError("backend must be 'matrix' or 'gate'")
    _require_unit_rows(sys)
    if len(schedule) < k_steps:
        raise ValueError(f"schedule has {len(schedule)} steps, need {k_steps}")
    if x_star is None:
        x_star = least_squares_solve(sys)
    x = np.asarray(x1, dtype=float).copy()
    ledger = NormLedger()
    total = GateTally()
    records = [StepRecord(k=0, x=x.copy(), err_sq=IterationError.of(x, x_star).err_sq, success_prob=1.0)]

    layout = gate_layout(sys.m, sys.n, cap=cap) if backend == "gate" else None
    for k in range(k_steps):
        agg = schedule.aggregated(k, weights)
        if backend == "matrix":
            x, entry, _ = matrix_step(x, sys, agg)
            tally = None
        else:
            agg_next = schedule.aggregated(k + 1, weights) if k + 1 < len(schedule) else None
            x, entry, tally = gate_step(x, sys, agg, agg_next, layout, hadamard_add=hadamard_add, prob_floor=prob_floor)
            total.add(tally)
        entry.k = k
        ledger.record(entry)
        records.append(StepRecord(k=k + 1, x=x.copy(), err_sq=IterationError.of(x, x_star).err_sq, success_prob=entry.success_prob, tally=tally))
    return RunResult(backend=backend, records=records, ledger=ledger, tally=total)


def per_step_gate_counts(m: int, n: int, q: int, seed: int = 0) -> GateTally:
    """Elementary-gate and query tally for one step at the given sizes.

    Uses a fixed duplicate-free schedule so the count is a pure function
    of the register widths (the scaling law the resource analysis quotes
    is checked against these numbers).
    """
    from .linalg import gen_gaussian_system

    sys, _ = gen_gaussian_system(m, n, seed=seed, consistent=True)
    weights = SamplingWeights.uniform(m, q=q, alpha=1.0)
    tau = tuple(range(q))
    schedule = IterationSchedule(tau=(tau, tau))
    x1 = np.zeros(n)
    x1[0] = 1.0
    result = run_quantum(sys, weights, schedule, x1, 1, backend="gate")
    return result.tally
