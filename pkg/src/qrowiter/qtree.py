"""Binary-tree amplitude storage and symmetric state preparation.

A data tree stores a real vector in its leaves (signs included) and the
root-ward square-root-of-sum-of-squares norms in its internal nodes; an
address tree routes a row index to that row's data tree; the weight tree
is a data tree over the 2m-entry selection-weight vector. Node-touch
counts are tracked so the poly-log access claims can be checked as counts
rather than wall-clock times.

State preparation uses the symmetric reflection convention: the 2x2 block
[[a1, a2], [a2, -a1]] and its n-dimensional generalization (a Householder
reflection with the target vector as first column). Symmetry is what makes
the bra-side and ket-side uses of the operator interchangeable in the
block-encoding sandwich, and it is asserted by tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import CircuitOp

TREE_TOL = 1e-12


def _pad_pow2(vec: np.ndarray) -> np.ndarray:
    n = len(vec)
    size = 1
    while size < n:
        size *= 2
    if size == n:
        return np.asarray(vec, dtype=float)
    out = np.zeros(size)
    out[:n] = vec
    return out


@dataclass(frozen=True)
class DataTree:
    """Heap-stored binary tree: heap[1] is the root, leaves at heap[2^d + j].

    Internal nodes are nonnegative norms; leaves carry the signed values.
    touches records how many nodes the operation that produced this tree
    recomputed.
    """

    heap: np.ndarray
    depth: int
    length: int  # original (unpadded) vector length
    touches: int

    @property
    def n_leaves(self) -> int:
        return 2**self.depth

    @property
    def leaves(self) -> np.ndarray:
        return self.heap[self.n_leaves : 2 * self.n_leaves]

    @property
    def root(self) -> float:
        return float(self.heap[1])

    def node(self, level: int, position: int) -> float:
        """Value at a level (0 = root) and position within the level."""
        return float(self.heap[2**level + position])

    def check_invariant(self) -> None:
        for idx in range(1, self.n_leaves):
            expect = np.sqrt(self.heap[2 * idx] ** 2 + self.heap[2 * idx + 1] ** 2)
            if abs(self.heap[idx] - expect) > TREE_TOL * max(1.0, expect):
                raise AssertionError(f"node {idx} violates parent^2 = left^2 + right^2")
            if self.heap[idx] < 0:
                raise AssertionError(f"internal node {idx} is negative")

    def dump(self) -> str:
        """Level-order text listing, one level per line."""
        lines = []
        for level in range(self.depth + 1):
            start = 2**level
            lines.append(" ".join(f"{v:.12g}" for v in self.heap[start : 2 * start]))
        return "\n".join(lines) + "\n"


def build_tree(vector) -> DataTree:
    """Build a data tree over the (power-of-two padded) vector."""
    vec = np.asarray(vector, dtype=float).reshape(-1)
    if len(vec) < 1:
        raise ValueError("vector must be nonempty")
    if not np.any(vec != 0.0):
        raise ValueError("all-zero vector has no normalizable tree")
    padded = _pad_pow2(vec)
    size = len(padded)
    depth = size.bit_length() - 1
    heap = np.zeros(2 * size)
    heap[size : 2 * size] = padded
    touches = size
    for idx in range(size - 1, 0, -1):
        heap[idx] = np.sqrt(heap[2 * idx] ** 2 + heap[2 * idx + 1] ** 2)
        touches += 1
    return DataTree(heap=heap, depth=depth, length=len(vec), touches=touches)


def update_leaf(tree: DataTree, index: int, value: float) -> DataTree:
    """Write one leaf and recompute only the leaf-to-root path."""
    if not 0 <= index < tree.n_leaves:
        raise IndexError(f"leaf index {index} out of range")
    heap = tree.heap.copy()
    idx = tree.n_leaves + index
    heap[idx] = value
    touches = 1
    idx //= 2
    while idx >= 1:
        heap[idx] = np.sqrt(heap[2 * idx] ** 2 + heap[2 * idx + 1] ** 2)
        touches += 1
        idx //= 2
    return DataTree(heap=heap, depth=tree.depth, length=tree.length, touches=touches)


@dataclass(frozen=True)
class AddressTree:
    """Complete binary routing over ceil(log2 m) bits to m data trees."""

    trees: tuple[DataTree, ...]

    def __post_init__(self):
        if not self.trees:
            raise ValueError("address tree needs at least one leaf")
        object.__setattr__(self, "trees", tuple(self.trees))

    @property
    def m(self) -> int:
        return len(self.trees)

    @property
    def depth(self) -> int:
        return max((self.m - 1).bit_length(), 1)

    def read_row(self, i: int) -> tuple[DataTree, int]:
        """Fetch row i's tree; returns (tree, nodes touched on the path).

        The count is the address-routing depth plus the data tree depth,
        the quantity the poly-log access claim is checked against.
        """
        if not 0 <= i < self.m:
            raise IndexError(f"address {i} out of range")
        tree = self.trees[i]
        return tree, self.depth + tree.depth


@dataclass(frozen=True)
class WeightTree:
    """Data tree over the 2m selection-weight amplitudes; root must be 1."""

    tree: DataTree

    def __post_init__(self):
        if abs(self.tree.root - 1.0) > 1e-10:
            raise ValueError(f"weight amplitudes have squared sum {self.tree.root**2}, need 1")


def reflection_to(target: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal matrix with the unit vector target as first column.

    The 2-dimensional case is [[a1, a2], [a2, -a1]]; in general this is the
    Householder reflection through (e0 - target), which satisfies V = V^T,
    V e0 = target, and V target = e0.
    """
    x = np.asarray(target, dtype=float).reshape(-1)
    norm = np.sqrt(x @ x)
    if norm <= 0:
        raise ValueError("cannot build a reflection onto the zero vector")
    x = x / norm
    d = len(x)
    u = -x.copy()
    u[0] += 1.0
    unorm_sq = float(u @ u)  # = 2 (1 - x0)
    if unorm_sq < 1e-26:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(u, u) / unorm_sq


def tree_vector(tree: DataTree) -> np.ndarray:
    """Normalized padded leaf vector (the state the tree prepares)."""
    if tree.root <= 0:
        raise ValueError("tree has zero norm")
    return tree.leaves / tree.root


def prep_unitary(tree: DataTree, qubits: tuple[int, ...] | None = None, name: str = "prep") -> list[CircuitOp]:
    """Ops preparing the tree's normalized leaf vector from |0...0>.

    A single symmetric reflection covers the whole register, so the
    assembled matrix equals its own transpose (and its own inverse).
    """
    vec = tree_vector(tree)
    if len(vec) == 1:
        vec = np.array([vec[0], 0.0])
    width = len(vec).bit_length() - 1
    if qubits is None:
        qubits = tuple(range(width))
    if len(qubits) != width:
        raise ValueError(f"need {width} qubits for {len(vec)} amplitudes")
    return [CircuitOp(name=name, targets=tuple(qubits), matrix=reflection_to(vec))]


def v_tilde(
    address: AddressTree,
    index_qubits: tuple[int, ...],
    work_qubits: tuple[int, ...],
    name: str = "vrow",
) -> list[CircuitOp]:
    """Controlled multi-row readout: |i>|0> -> |i>|A_i> for every address i.

    One controlled reflection per data tree, controlled on the index
    register holding i (both control polarities, so every address basis
    state routes to exactly one prep).
    """
    ops: list[CircuitOp] = []
    for i, tree in enumerate(address.trees):
        vec = tree_vector(tree)
        if len(vec) == 1:
            vec = np.array([vec[0], 0.0])
        if len(vec) != 2 ** len(work_qubits):
            raise ValueError(f"row {i}: tree size {len(vec)} does not fit work register")
        values = tuple((i >> b) & 1 for b in range(len(index_qubits)))
        ops.append(
            CircuitOp(
                name=f"{name}{i}",
                targets=tuple(work_qubits),
                matrix=reflection_to(vec),
                controls=tuple(index_qubits),
                control_values=values,
            )
        )
    return ops


def g_state(weights: WeightTree, qubits: tuple[int, ...] | None = None) -> list[CircuitOp]:
    """Ops preparing the selection-weight state from |0...0>."""
    return prep_unitary(weights.tree, qubits=qubits, name="gprep")
