"""Dense complex statevector simulation over named registers.

Conventions (circuit wiring in the arithmetic and block-encoding modules
depends on these):

* Registers occupy global qubits in declaration order; the first declared
  register sits on the lowest qubit indices.
* Qubits are little-endian within a register: qubit j of a register holds
  bit j (weight 2^j) of the register's value.
* The amplitude of basis state |x> lives at flat index
  x = sum_g bit_g * 2^g over global qubits g.

The simulator is deliberately small: arbitrary k-qubit unitaries with
optional control qubits/values, postselection, and full-circuit unitary
assembly for verification at modest qubit counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_QUBIT_CAP = 24
UNITARY_TOL = 1e-12
NORM_TOL = 1e-10


class EntangledRegisterError(ValueError):
    """Register asked to factor out is entangled with the rest."""


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers with qubit counts."""

    registers: tuple[tuple[str, int], ...]
    cap: int = DEFAULT_QUBIT_CAP

    def __post_init__(self):
        regs = tuple((str(name), int(width)) for name, width in self.registers)
        names = [name for name, _ in regs]
        if len(set(names)) != len(names):
            raise ValueError("register names must be unique")
        if any(width < 1 for _, width in regs):
            raise ValueError("register widths must be >= 1")
        object.__setattr__(self, "registers", regs)
        if self.total_qubits > self.cap:
            raise ValueError(f"layout needs {self.total_qubits} qubits, cap is {self.cap}")

    @classmethod
    def of(cls, *regs: tuple[str, int], cap: int = DEFAULT_QUBIT_CAP) -> "RegisterLayout":
        return cls(registers=tuple(regs), cap=cap)

    @property
    def total_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    def width(self, name: str) -> int:
        for reg, w in self.registers:
            if reg == name:
                return w
        raise KeyError(f"no register named {name!r}")

    def qubits(self, name: str) -> tuple[int, ...]:
        """Global qubit indices of a register, LSB first."""
        offset = 0
        for reg, w in self.registers:
            if reg == name:
                return tuple(range(offset, offset + w))
            offset += w
        raise KeyError(f"no register named {name!r}")

    def qubit(self, name: str, bit: int) -> int:
        qs = self.qubits(name)
        if not 0 <= bit < len(qs):
            raise IndexError(f"register {name!r} has no bit {bit}")
        return qs[bit]


@dataclass(frozen=True)
class CircuitOp:
    """A unitary on a target qubit subset, optionally controlled.

    targets are global qubit indices, LSB of the matrix index first; the
    matrix has shape (2^t, 2^t). controls fire when each control qubit
    matches its control value.
    """

    name: str
    targets: tuple[int, ...]
    matrix: np.ndarray
    controls: tuple[int, ...] = ()
    control_values: tuple[int, ...] = ()

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        controls = tuple(int(c) for c in self.controls)
        values = tuple(int(v) for v in self.control_values)
        if not values and controls:
            values = (1,) * len(controls)
        if len(values) != len(controls):
            raise ValueError("control_values must pair with controls")
        if any(v not in (0, 1) for v in values):
            raise ValueError("control values are bits")
        mat = np.asarray(self.matrix, dtype=complex)
        dim = 2 ** len(targets)
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not fit {len(targets)} targets")
        if np.abs(mat @ mat.conj().T - np.eye(dim)).max() > UNITARY_TOL:
            raise ValueError(f"op {self.name!r}: matrix is not unitary")
        if len(set(targets) | set(controls)) != len(targets) + len(controls):
            raise ValueError("targets and controls must be disjoint")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "control_values", values)
        object.__setattr__(self, "matrix", mat)

    def dagger(self) -> "CircuitOp":
        return CircuitOp(
            name=self.name + "+",
            targets=self.targets,
            matrix=self.matrix.conj().T,
            controls=self.controls,
            control_values=self.control_values,
        )

    def dump_line(self) -> str:
        """Golden-file format: name, targets, controls with values."""
        ctr = ",".join(f"{c}={v}" for c, v in zip(self.controls, self.control_values))
        return f"{self.name} t={','.join(map(str, self.targets))}" + (f" c={ctr}" if ctr else "")


def dump_circuit(ops: list[CircuitOp]) -> str:
    return "\n".join(op.dump_line() for op in ops) + "\n"


@dataclass
class StateVector:
    """Complex amplitudes over a register layout."""

    layout: RegisterLayout
    amplitudes: np.ndarray = None
    normalized: bool = True  # unnormalized only inside postselection flows

    def __post_init__(self):
        q = self.layout.total_qubits
        if self.amplitudes is None:
            amp = np.zeros(2**q, dtype=complex)
            amp[0] = 1.0
            self.amplitudes = amp
        else:
            self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
            if self.amplitudes.shape[0] != 2**q:
                raise ValueError("amplitude length does not match layout")
        if self.normalized:
            norm = np.linalg.norm(self.amplitudes)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {norm} is not 1")

    @classmethod
    def zero(cls, layout: RegisterLayout) -> "StateVector":
        return cls(layout=layout)

    def copy(self) -> "StateVector":
        return StateVector(layout=self.layout, amplitudes=self.amplitudes.copy(), normalized=self.normalized)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _as_axes(state: np.ndarray, q: int) -> np.ndarray:
    # axis k of the reshaped array corresponds to qubit q-1-k (C order)
    return state.reshape((2,) * q)


def _apply_to_tensor(tensor: np.ndarray, op: CircuitOp, q: int) -> np.ndarray:
    """Apply op to a (2,)*q (+ optional trailing batch axis) tensor."""
    batch = tensor.ndim == q + 1
    axes_of = lambda qubit: q - 1 - qubit
    sel: list = [slice(None)] * tensor.ndim
    for c, v in zip(op.controls, op.control_values):
        sel[axes_of(c)] = v
    sub = tensor[tuple(sel)]
    # move target axes (matrix LSB first -> last tensor axis is qubit 0 of the op)
    t = len(op.targets)
    tgt_axes = [axes_of(op.targets[t - 1 - j]) for j in range(t)]
    # axes removed by control selection shift positions of later axes
    removed = sorted(axes_of(c) for c in op.controls)
    shifted = []
    for ax in tgt_axes:
        shift = sum(1 for r in removed if r < ax)
        shifted.append(ax - shift)
    sub_moved = np.moveaxis(sub, shifted, range(t))
    head = sub_moved.shape[t:]
    mat = op.matrix.reshape((2,) * (2 * t))
    # contract matrix row-index axes with the state axes
    out = np.tensordot(mat, sub_moved, axes=(list(range(t, 2 * t)), list(range(t))))
    out = np.moveaxis(out, range(t), shifted)
    result = tensor.copy()
    result[tuple(sel)] = out
    return result


def apply(state: StateVector, op: CircuitOp) -> StateVector:
    """Apply one op; acts as identity on non-target qubits, preserves norm."""
    q = state.layout.total_qubits
    touched = set(op.targets) | set(op.controls)
    if any(not 0 <= g < q for g in touched):
        raise IndexError(f"op {op.name!r} touches qubits outside the layout")
    tensor = _as_axes(state.amplitudes, q)
    out = _apply_to_tensor(tensor, op, q).reshape(-1)
    return StateVector(layout=state.layout, amplitudes=out, normalized=state.normalized)


def apply_all(state: StateVector, ops: list[CircuitOp]) -> StateVector:
    for op in ops:
        state = apply(state, op)
    return state


def circuit_unitary(ops: list[CircuitOp], layout: RegisterLayout) -> np.ndarray:
    """Full 2^Q x 2^Q matrix of the op sequence (Q <= 12)."""
    q = layout.total_qubits
    if q > 12:
        raise ValueError(f"circuit_unitary capped at 12 qubits, layout has {q}")
    dim = 2**q
    u = np.eye(dim, dtype=complex)
    tensor = u.reshape((2,) * q + (dim,))
    for op in ops:
        tensor = _apply_to_tensor(tensor, op, q)
    return tensor.reshape(dim, dim)


def basis_index(layout: RegisterLayout, **values: int) -> int:
    """Flat index of the basis state with the given register values."""
    idx = 0
    for name, value in values.items():
        width = layout.width(name)
        if not 0 <= value < 2**width:
            raise ValueError(f"value {value} does not fit register {name!r}")
        for bit in range(width):
            if (value >> bit) & 1:
                idx |= 1 << layout.qubit(name, bit)
    return idx


def basis_state(layout: RegisterLayout, **values: int) -> StateVector:
    amp = np.zeros(2**layout.total_qubits, dtype=complex)
    amp[basis_index(layout, **values)] = 1.0
    return StateVector(layout=layout, amplitudes=amp)


def register_value_probability(state: StateVector, register: str, value: int) -> float:
    q = state.layout.total_qubits
    tensor = _as_axes(state.amplitudes, q)
    sel: list = [slice(None)] * q
    for bit, g in enumerate(state.layout.qubits(register)):
        sel[q - 1 - g] = (value >> bit) & 1
    return float(np.sum(np.abs(tensor[tuple(sel)]) ** 2))


def postselect(state: StateVector, register: str, value: int) -> tuple[StateVector, float]:
    """Condition a register on a value: renormalized state and probability."""
    q = state.layout.total_qubits
    width = state.layout.width(register)
    if not 0 <= value < 2**width:
        raise ValueError(f"value {value} does not fit register {register!r}")
    prob = register_value_probability(state, register, value)
    if prob <= 0.0:
        raise ValueError(f"postselecting {register!r}={value} has zero probability")
    tensor = _as_axes(state.amplitudes, q).copy()
    for bit, g in enumerate(state.layout.qubits(register)):
        keep = (value >> bit) & 1
        sel: list = [slice(None)] * q
        sel[q - 1 - g] = 1 - keep
        tensor[tuple(sel)] = 0.0
    amp = tensor.reshape(-1) / np.sqrt(prob)
    return StateVector(layout=state.layout, amplitudes=amp), prob


def extract_real_vector(state: StateVector, register: str, imag_tol: float = 1e-8) -> np.ndarray:
    """Real amplitude vector of one register, requiring it to factor out.

    The state must be (numerically) a product of the register's state with
    the rest: Schmidt rank 1 within 1e-8. Raises EntangledRegisterError
    with the offending second singular value otherwise.
    """
    q = state.layout.total_qubits
    regs = state.layout.qubits(register)
    width = len(regs)
    tensor = _as_axes(state.amplitudes, q)
    # order register axes MSB..LSB so the reshaped column index is the value
    reg_axes = [q - 1 - g for g in reversed(regs)]
    rest_axes = [ax for ax in range(q) if ax not in reg_axes]
    moved = np.transpose(tensor, rest_axes + reg_axes)
    mat = moved.reshape(-1, 2**width)
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals[0] <= 0:
        raise EntangledRegisterError("state has zero norm")
    if len(svals) > 1 and svals[1] > imag_tol * svals[0]:
        raise EntangledRegisterError(
            f"register {register!r} is entangled with the rest (second Schmidt coefficient {svals[1]:.3e})"
        )
    # dominant row carries the register state; pick the largest for stability
    row = mat[int(np.argmax((np.abs(mat) ** 2).sum(axis=1)))]
    vec = row / np.linalg.norm(row)
    if np.abs(vec.imag).max() > imag_tol:
        # rotate a complex global phase away; real states keep their signs
        pivot = vec[int(np.argmax(np.abs(vec)))]
        vec = vec * (pivot.conjugate() / abs(pivot))
        if np.abs(vec.imag).max() > imag_tol:
            import warnings

            warnings.warn(f"imaginary residue {np.abs(vec.imag).max():.3e} in register {register!r}")
    return vec.real


__all__ = [
    "CircuitOp",
    "EntangledRegisterError",
    "RegisterLayout",
    "StateVector",
    "apply",
    "apply_all",
    "basis_index",
    "basis_state",
    "circuit_unitary",
    "dump_circuit",
    "extract_real_vector",
    "postselect",
    "register_value_probability",
]
