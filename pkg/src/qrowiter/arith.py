"""Reversible arithmetic circuits for the selection unitary.

Comparator: a Cuccaro-style majority chain computing the carry of a + ~b,
which flips the output qubit exactly when a > b; one carry ancilla, all
operands and ancillas restored by reversal.

Modular map: the in-place update |j>|l> -> |j>|(2j - l) mod m>. For m a
power of two this is complement + increment + j-controlled power-of-two
adds (all ripple circuits). For other m the per-value permutation is
emitted as j-controlled table ops, with every out-of-range basis state an
exact fixed point.

Phase function: a phase of -1 exactly on the basis states with
m <= j <= 2m-1, l = j mod m, and (j mod m) in the classically known index
set. Three comparator calls feed one multi-controlled flip onto an
ancilla the caller prepared in |->; equality of l with j mod m is read as
"neither operand is greater".
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import CircuitOp, RegisterLayout

X_MAT = np.array([[0.0, 1.0], [1.0, 0.0]])
Z_MAT = np.array([[1.0, 0.0], [0.0, -1.0]])


def _x(layout: RegisterLayout, qubit: int) -> CircuitOp:
    return CircuitOp(name="x", targets=(qubit,), matrix=X_MAT)


def _cx(control: int, target: int) -> CircuitOp:
    return CircuitOp(name="cx", targets=(target,), matrix=X_MAT, controls=(control,))


def _ccx(c1: int, c2: int, target: int) -> CircuitOp:
    return CircuitOp(name="ccx", targets=(target,), matrix=X_MAT, controls=(c1, c2))


def _mcx(controls: tuple[int, ...], values: tuple[int, ...], target: int) -> CircuitOp:
    if not controls:
        return CircuitOp(name="x", targets=(target,), matrix=X_MAT)
    name = {1: "cx", 2: "ccx"}.get(len(controls), "mcx")
    return CircuitOp(name=name, targets=(target,), matrix=X_MAT, controls=controls, control_values=values)


def elementary_count(op: CircuitOp) -> int:
    """Elementary-gate cost: {1q, 2q, Toffoli} are 1; a c-controlled
    single-qubit op with c >= 3 is a standard ladder of 2(c-2) Toffolis
    plus one controlled op."""
    c = len(op.controls)
    if c <= 2:
        return 1
    return 2 * (c - 2) + 1


@dataclass(frozen=True)
class ComparatorSpec:
    """Operand width and register names for a standalone comparator."""

    width: int
    a: str = "a"
    b: str = "b"
    out: str = "c"
    carry: str = "z"

    def layout(self) -> RegisterLayout:
        return RegisterLayout.of((self.a, self.width), (self.b, self.width), (self.out, 1), (self.carry, 1))


def _maj(c: int, b: int, a: int) -> list[CircuitOp]:
    # after this, a holds MAJ(a, b, c); b and c hold a^b, a^c
    return [_cx(a, b), _cx(a, c), _ccx(b, c, a)]


def comparator_ops(
    layout: RegisterLayout, a: str, b: str, out_qubit: int, carry_qubit: int
) -> list[CircuitOp]:
    """out ^= (a > b) for equal-width registers; everything else restored."""
    aq = layout.qubits(a)
    bq = layout.qubits(b)
    if len(aq) != len(bq):
        raise ValueError("comparator operands must have equal width")
    w = len(aq)
    ops: list[CircuitOp] = [_x(layout, q) for q in bq]
    chain: list[CircuitOp] = []
    carry = carry_qubit
    for i in range(w):
        chain.extend(_maj(carry, bq[i], aq[i]))
        carry = aq[i]
    ops.extend(chain)
    ops.append(_cx(aq[w - 1], out_qubit))
    ops.extend(op.dagger() for op in reversed(chain))
    ops.extend(_x(layout, q) for q in bq)
    return ops


def comparator_circuit(spec: ComparatorSpec) -> tuple[RegisterLayout, list[CircuitOp]]:
    lay = spec.layout()
    return lay, comparator_ops(lay, spec.a, spec.b, lay.qubit(spec.out, 0), lay.qubit(spec.carry, 0))


def _add_power_mod2w(
    lq: tuple[int, ...], power: int, controls: tuple[int, ...] = (), values: tuple[int, ...] = ()
) -> list[CircuitOp]:
    """l += 2^power (mod 2^w): carry ripple from the top down."""
    w = len(lq)
    ops = []
    for i in range(w - 1, power, -1):
        ctr = controls + tuple(lq[power:i])
        ops.append(_mcx(ctr, values + (1,) * (i - power), lq[i]))
    ops.append(_mcx(controls, values, lq[power]))
    return ops


def mod_adder_ops(layout: RegisterLayout, j: str, l: str, m: int) -> list[CircuitOp]:
    """In-place |j>|l> -> |j>|(2j - l) mod m> on the l register.

    Basis states with l >= m (only possible when m is not a power of two)
    are fixed points, as are j values at or above 2m.
    """
    if m < 2:
        raise ValueError("modulus must be >= 2")
    jq = layout.qubits(j)
    lq = layout.qubits(l)
    w_l = len(lq)
    if 2**w_l < m:
        raise ValueError("l register too narrow for the modulus")
    if 2 ** len(jq) < 2 * m:
        raise ValueError("j register too narrow for 2m")
    if m == 2**w_l:
        # (2j - l) mod 2^w = 2j + ~l + 1
        ops = [_x(layout, q) for q in lq]
        ops.extend(_add_power_mod2w(lq, 0))
        for b in range(len(jq)):
            if b + 1 <= w_l - 1:
                ops.extend(_add_power_mod2w(lq, b + 1, controls=(jq[b],), values=(1,)))
        return ops
    # general modulus: per-address permutation table on the l register
    dim = 2**w_l
    ops = []
    for v in range(2 * m):
        perm = np.zeros((dim, dim))
        for lv in range(dim):
            target = (2 * v - lv) % m if lv < m else lv
            perm[target, lv] = 1.0
        if np.array_equal(perm, np.eye(dim)):
            continue
        pattern = tuple((v >> bit) & 1 for bit in range(len(jq)))
        ops.append(CircuitOp(name=f"submod{v}", targets=lq, matrix=perm, controls=jq, control_values=pattern))
    return ops


def mod_adder_circuit(m: int) -> tuple[RegisterLayout, list[CircuitOp]]:
    w_l = max((m - 1).bit_length(), 1)
    w_j = max((2 * m - 1).bit_length(), 1)
    lay = RegisterLayout.of(("j", w_j), ("l", w_l))
    return lay, mod_adder_ops(lay, "j", "l", m)


@dataclass(frozen=True)
class PhaseFunctionSpec:
    """Row count m and the classically chosen index set tau."""

    m: int
    tau: tuple[int, ...]

    def __post_init__(self):
        tau = tuple(sorted(set(int(i) for i in self.tau)))
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if any(not 0 <= i < self.m for i in tau):
            raise ValueError("tau must be a subset of [m]")
        object.__setattr__(self, "tau", tau)

    @property
    def w_l(self) -> int:
        return max((self.m - 1).bit_length(), 1)

    @property
    def w_j(self) -> int:
        return max((2 * self.m - 1).bit_length(), 1)

    def f(self, j: int, l: int) -> int:
        """The classical phase function the circuit must realize."""
        return int(self.m <= j <= 2 * self.m - 1 and l == j % self.m and (j % self.m) in self.tau)

    def layout(self) -> RegisterLayout:
        return RegisterLayout.of(
            ("j", self.w_j),
            ("l", self.w_l),
            ("b1", self.w_j),
            ("b3", self.w_l),
            ("c1", 1),
            ("c2", 1),
            ("c3", 1),
            ("tq", 1),
            ("c4", 1),
            ("z", 1),
        )


def _write_constant(layout: RegisterLayout, register: str, value: int) -> list[CircuitOp]:
    return [_x(layout, layout.qubit(register, bit)) for bit in range(layout.width(register)) if (value >> bit) & 1]


def _low_bits_prep(spec: PhaseFunctionSpec, layout: RegisterLayout) -> list[CircuitOp]:
    """Load b3 <- (j mod m) and tq <- [(j mod m) in tau]."""
    jq = layout.qubits("j")
    b3q = layout.qubits("b3")
    tq = layout.qubit("tq", 0)
    ops: list[CircuitOp] = []
    if spec.m == 2**spec.w_l:
        # j mod m is a bit slice
        for bit in range(spec.w_l):
            ops.append(_cx(jq[bit], b3q[bit]))
        low = jq[: spec.w_l]
        for i in spec.tau:
            pattern = tuple((i >> bit) & 1 for bit in range(spec.w_l))
            ops.append(_mcx(tuple(low), pattern, tq))
        return ops
    for v in range(2 * spec.m):
        pattern = tuple((v >> bit) & 1 for bit in range(spec.w_j))
        residue = v % spec.m
        for bit in range(spec.w_l):
            if (residue >> bit) & 1:
                ops.append(_mcx(tuple(jq), pattern, b3q[bit]))
        if residue in spec.tau:
            ops.append(_mcx(tuple(jq), pattern, tq))
    return ops


def phase_flip_uf(spec: PhaseFunctionSpec, layout: RegisterLayout | None = None) -> tuple[RegisterLayout, list[CircuitOp]]:
    """Ops applying phase (-1)^f(j, l), with the c4 ancilla in |-> from the caller.

    Three comparator calls: c1 = (j > m-1) marks the second half,
    c2 = (b3 > l) and c3 = (l > b3) bracket equality with j mod m, and the
    flip onto c4 fires on c1=1, c2=0, c3=0, tq=1. All working registers
    are uncomputed.
    """
    if layout is None:
        layout = spec.layout()
    zq = layout.qubit("z", 0)
    prep: list[CircuitOp] = []
    prep += _write_constant(layout, "b1", spec.m - 1)
    prep += _low_bits_prep(spec, layout)
    prep += comparator_ops(layout, "j", "b1", layout.qubit("c1", 0), zq)
    prep += comparator_ops(layout, "b3", "l", layout.qubit("c2", 0), zq)
    prep += comparator_ops(layout, "l", "b3", layout.qubit("c3", 0), zq)
    flip = _mcx(
        (layout.qubit("c1", 0), layout.qubit("c2", 0), layout.qubit("c3", 0), layout.qubit("tq", 0)),
        (1, 0, 0, 1),
        layout.qubit("c4", 0),
    )
    return layout, prep + [flip] + [op.dagger() for op in reversed(prep)]


def u_eq_circuit(spec: PhaseFunctionSpec) -> tuple[RegisterLayout, list[CircuitOp]]:
    """Select unitary on basis states: phase flip then the modular map."""
    layout, phase_ops = phase_flip_uf(spec)
    adder_ops = mod_adder_ops(layout, "j", "l", spec.m)
    return layout, phase_ops + adder_ops


def second_half_phase_ops(spec: PhaseFunctionSpec, layout: RegisterLayout) -> list[CircuitOp]:
    """Phase -1 on every j in the second half [m, 2m).

    For power-of-two m this is a Z on the top j qubit; otherwise a
    comparator marks j > m-1 on c1 and a Z on c1 applies the phase.
    """
    jq = layout.qubits("j")
    if spec.m == 2**spec.w_l:
        return [CircuitOp(name="z", targets=(jq[-1],), matrix=Z_MAT)]
    zq = layout.qubit("z", 0)
    mark = _write_constant(layout, "b1", spec.m - 1) + comparator_ops(layout, "j", "b1", layout.qubit("c1", 0), zq)
    return mark + [CircuitOp(name="z", targets=(layout.qubit("c1", 0),), matrix=Z_MAT)] + [
        op.dagger() for op in reversed(mark)
    ]


def propagate_basis(
    ops: list[CircuitOp],
    layout: RegisterLayout,
    bits_in: int,
    minus_qubits: frozenset[int] = frozenset(),
) -> tuple[int, complex]:
    """Track a basis state (with phase) through generalized-permutation ops.

    Qubits listed in minus_qubits are held in |->: an X-type flip on one
    of them contributes a factor -1 and leaves the tracked bits alone.
    Raises on any op that is not a generalized permutation.
    """
    bits = bits_in
    phase: complex = 1.0
    for op in ops:
        if any(((bits >> c) & 1) != v for c, v in zip(op.controls, op.control_values)):
            continue
        if set(op.targets) & minus_qubits:
            if len(op.targets) != 1 or not np.array_equal(op.matrix, X_MAT):
                raise ValueError("only plain X flips are supported on |-> qubits")
            phase = -phase
            continue
        col = 0
        for pos, q in enumerate(op.targets):
            col |= ((bits >> q) & 1) << pos
        column = op.matrix[:, col]
        nz = np.nonzero(np.abs(column) > 1e-12)[0]
        if len(nz) != 1 or abs(abs(column[nz[0]]) - 1.0) > 1e-12:
            raise ValueError(f"op {op.name!r} is not a generalized permutation")
        row = int(nz[0])
        phase *= column[row]
        for pos, q in enumerate(op.targets):
            bit = (row >> pos) & 1
            bits = (bits & ~(1 << q)) | (bit << q)
    return bits, phase


def effective_matrix(
    ops: list[CircuitOp],
    layout: RegisterLayout,
    registers: tuple[str, ...],
    minus_qubits: frozenset[int] = frozenset(),
) -> np.ndarray:
    """Joint-register matrix of a permutation-with-phase circuit.

    Every other (ancilla) register starts at 0 and must return to 0 for
    each basis input; an input that leaves garbage raises.
    """
    widths = [layout.width(r) for r in registers]
    dims = [2**w for w in widths]
    total = int(np.prod(dims))
    mat = np.zeros((total, total), dtype=complex)
    reg_qubits = [layout.qubits(r) for r in registers]
    flat_qubits = [q for qs in reg_qubits for q in qs]
    other = [q for q in range(layout.total_qubits) if q not in flat_qubits and q not in minus_qubits]
    for col in range(total):
        bits = 0
        rem = col
        for qs, dim in zip(reg_qubits, dims):
            val = rem % dim
            rem //= dim
            for pos, q in enumerate(qs):
                bits |= ((val >> pos) & 1) << q
        out_bits, phase = propagate_basis(ops, layout, bits, minus_qubits)
        if any((out_bits >> q) & 1 for q in other):
            raise AssertionError(f"input {col} left ancilla garbage")
        row = 0
        mult = 1
        for qs, dim in zip(reg_qubits, dims):
            val = 0
            for pos, q in enumerate(qs):
                val |= ((out_bits >> q) & 1) << pos
            row += val * mult
            mult *= dim
        mat[row, col] = phase
    return mat
