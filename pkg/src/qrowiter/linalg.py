"""Dense real linear algebra for row-iteration solvers.

Holds the problem-instance types (matrix, right-hand side, reference
solution/residual pair), the Gaussian instance generator used by the
convergence experiments, and the in-repo factorization oracles (Householder
QR least squares, Jacobi symmetric eigensolver) that every other module
treats as ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import stream

_GEN_RETRIES = 16


class RankDeficientError(ValueError):
    """Matrix does not have full column rank where the operation needs it."""


class DegenerateDrawError(RuntimeError):
    """Random instance generation kept producing unusable draws."""


@dataclass(frozen=True)
class LinearSystem:
    """A dense real system A x = b with A of shape (m, n)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("matrix must be m x n with m, n >= 1")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"rhs length {b.shape[0]} != row count {a.shape[0]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def row_norms(self) -> np.ndarray:
        return np.sqrt((self.a * self.a).sum(axis=1))


@dataclass(frozen=True)
class SolutionBundle:
    """Reference least-squares solution x* and residual r* = b - A x*."""

    x_star: np.ndarray
    r_star: np.ndarray


@dataclass(frozen=True)
class IterationError:
    """Error vector e_k = x_k - x* and its squared norm."""

    e_k: np.ndarray
    err_sq: float

    @classmethod
    def of(cls, x: np.ndarray, x_star: np.ndarray) -> "IterationError":
        e = np.asarray(x, dtype=float) - np.asarray(x_star, dtype=float)
        return cls(e_k=e, err_sq=float(e @ e))


def residual(sys: LinearSystem, x: np.ndarray) -> np.ndarray:
    """r = b - A x."""
    return sys.b - sys.a @ np.asarray(x, dtype=float)


def householder_qr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder QR of an m x n matrix (m >= n): returns (Q, R), Q m x m.

    This is the in-repo orthogonal-factorization oracle; nothing numerical
    in the package falls back to a library solver.
    """
    a = np.asarray(a, dtype=float)
    m, n = a.shape
    r = a.copy()
    q = np.eye(m)
    for j in range(min(m, n)):
        x = r[j:, j]
        norm_x = np.sqrt(x @ x)
        if norm_x == 0.0:
            continue
        v = x.copy()
        # sign chosen to avoid cancellation
        v[0] += np.copysign(norm_x, x[0] if x[0] != 0.0 else 1.0)
        v /= np.sqrt(v @ v)
        r[j:, :] -= 2.0 * np.outer(v, v @ r[j:, :])
        q[:, j:] -= 2.0 * np.outer(q[:, j:] @ v, v)
    return q, r


def least_squares_solve(sys: LinearSystem) -> np.ndarray:
    """argmin 0.5 ||b - A x||^2 via Householder QR and back substitution.

    Raises RankDeficientError when A lacks full column rank; there is no
    pseudoinverse fallback.
    """
    m, n = sys.m, sys.n
    if m < n:
        raise RankDeficientError("least squares oracle requires m >= n")
    q, r = householder_qr(sys.a)
    diag = np.abs(np.diag(r[:n, :n]))
    scale = max(np.abs(r).max(), 1.0)
    if diag.min() <= 1e-12 * scale:
        raise RankDeficientError("matrix is rank deficient (tiny pivot in R)")
    y = q.T @ sys.b
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - r[i, i + 1 :] @ x[i + 1 :]) / r[i, i]
    return x


def range_basis(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of range(A) (columns), from the QR oracle."""
    a = np.asarray(a, dtype=float)
    q, r = householder_qr(a)
    n = a.shape[1]
    keep = [j for j in range(min(a.shape)) if abs(r[j, j]) > 1e-12 * max(np.abs(r).max(), 1.0)]
    return q[:, keep] if keep else q[:, :0]


def jacobi_eigh(s: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues/vectors of a symmetric matrix by cyclic Jacobi rotations.

    Returns (w, V) with S V = V diag(w), w ascending. Dimensions here stay
    small (n <= ~16), so the quadratic sweep cost is irrelevant.
    """
    s = np.asarray(s, dtype=float)
    if s.shape[0] != s.shape[1] or np.abs(s - s.T).max() > 1e-10 * max(1.0, np.abs(s).max()):
        raise ValueError("jacobi_eigh expects a symmetric matrix")
    n = s.shape[0]
    a = s.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(1.0, np.abs(np.diag(a)).max()):
            break
        for p in range(n - 1):
            for q_ in range(p + 1, n):
                if abs(a[p, q_]) <= 1e-300:
                    continue
                theta = (a[q_, q_] - a[p, p]) / (2.0 * a[p, q_])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s_ = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q_, q_] = c
                rot[p, q_] = s_
                rot[q_, p] = -s_
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))
    return np.diag(a)[order], v[:, order]


def sym_max_abs_eig(s: np.ndarray) -> float:
    """Largest singular value of a symmetric matrix (max |eigenvalue|)."""
    w, _ = jacobi_eigh(s)
    return float(np.abs(w).max())


def singular_values(a: np.ndarray) -> np.ndarray:
    """Singular values of A (descending), via Jacobi on A^T A."""
    a = np.asarray(a, dtype=float)
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    w, _ = jacobi_eigh(gram)
    return np.sqrt(np.maximum(w[::-1], 0.0))


def frobenius_and_kappa(sys: LinearSystem) -> tuple[float, float | None]:
    """Frobenius norm of A and the scaled condition number ||A||_F / sigma_min.

    kappa is None (explicit "undefined") when A is singular or non-square.
    """
    frob = float(np.sqrt((sys.a * sys.a).sum()))
    if sys.m != sys.n:
        return frob, None
    smin = singular_values(sys.a)[-1]
    if smin <= 1e-12 * max(frob, 1.0):
        return frob, None
    return frob, frob / float(smin)


def normalize_rows(sys: LinearSystem) -> LinearSystem:
    """Scale every row of A to unit norm, dividing b_i by the old ||A_i||.

    The solution set of A x = b is unchanged. Zero rows are an error.
    """
    norms = sys.row_norms()
    bad = np.nonzero(norms <= 0.0)[0]
    if bad.size:
        raise ValueError(f"row {bad[0]} has zero norm; cannot normalize")
    return LinearSystem(a=sys.a / norms[:, None], b=sys.b / norms)


def gen_gaussian_system(m: int, n: int, seed: int, consistent: bool = False) -> tuple[LinearSystem, SolutionBundle]:
    """Random unit-row Gaussian instance with a known least-squares pair.

    A has i.i.d. Gaussian rows normalized to unit norm; x* is a normalized
    Gaussian n-vector; r* is a Gaussian m-vector projected onto the null
    space of A^T and normalized (so x* is exactly the least-squares
    solution); b = r* + A x*. With consistent=True, or when m == n leaves
    no null space, r* is zero and the system is exactly solvable.
    """
    if not (m >= n >= 1):
        raise ValueError("need m >= n >= 1")
    rng = stream(seed, m, n)
    a = np.empty((m, n))
    for i in range(m):
        for _ in range(_GEN_RETRIES):
            row = rng.standard_normal(n)
            norm = np.sqrt(row @ row)
            if norm > 1e-8:
                a[i] = row / norm
                break
        else:
            raise DegenerateDrawError(f"row {i}: repeated zero-norm draws")

    x_star = rng.standard_normal(n)
    x_star /= np.sqrt(x_star @ x_star)

    if consistent or m == n:
        r_star = np.zeros(m)
    else:
        basis = range_basis(a)
        for _ in range(_GEN_RETRIES):
            v = rng.standard_normal(m)
            r = v - basis @ (basis.T @ v)
            norm = np.sqrt(r @ r)
            if norm > 1e-8:
                r_star = r / norm
                break
        else:
            raise DegenerateDrawError("residual draw kept collapsing onto range(A)")

    b = r_star + a @ x_star
    return LinearSystem(a=a, b=b), SolutionBundle(x_star=x_star, r_star=r_star)


def load_matrix(path: str) -> np.ndarray:
    """Read the text matrix format: first line "m n", then m rows."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'm n' header")
    m, n = int(tokens[0]), int(tokens[1])
    values = [float(t) for t in tokens[2:]]
    if len(values) != m * n:
        raise ValueError(f"{path}: expected {m * n} entries, found {len(values)}")
    return np.array(values).reshape(m, n)


def load_vector(path: str) -> np.ndarray:
    """Read a vector stored one value per line."""
    with open(path) as fh:
        return np.array([float(line) for line in fh.read().split()])


def save_matrix(path: str, a: np.ndarray) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def save_vector(path: str, v: np.ndarray) -> None:
    with open(path, "w") as fh:
        for x in np.asarray(v, dtype=float).reshape(-1):
            fh.write(f"{x:.17g}\n")
