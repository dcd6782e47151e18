"""Classical randomized row iteration.

One-row Kaczmarz projection, the weighted multi-row protocol (q rows
sampled with replacement per step), the D/P/W normalization machinery with
the convergence-rate bound, the mini-batch SGD reading of the same update,
and Monte-Carlo checks of the sampling-matrix expectation identities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import IterationError, LinearSystem, least_squares_solve, sym_max_abs_eig
from .rng import stream

CONDITION_TOL = 1e-12


@dataclass(frozen=True)
class SamplingWeights:
    """Row-sampling probabilities p, iteration weights w, relaxation alpha.

    q is the number of rows drawn (with replacement) per step. In quantum
    mode the weights feed a normalized amplitude encoding, which adds the
    constraints alpha <= 1 and w_i <= 1.
    """

    p: np.ndarray
    w: np.ndarray
    alpha: float
    q: int
    quantum: bool = False

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if p.shape != w.shape:
            raise ValueError("p and w must have equal length")
        if abs(p.sum() - 1.0) > CONDITION_TOL or (p <= 0).any():
            raise ValueError("p must be a positive probability vector")
        if (w <= 0).any():
            raise ValueError("weights must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.quantum:
            if self.alpha > 1.0 + CONDITION_TOL:
                raise ValueError("quantum mode requires alpha <= 1 (weight normalization)")
            if (w > 1.0 + CONDITION_TOL).any():
                raise ValueError("quantum mode requires w_i <= 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "w", w)

    @property
    def m(self) -> int:
        return self.p.shape[0]

    @classmethod
    def uniform(cls, m: int, q: int, alpha: float = 1.0, quantum: bool = False) -> "SamplingWeights":
        """Uniform sampling with equal weights w_i = alpha (unit-row setup)."""
        return cls(p=np.full(m, 1.0 / m), w=np.full(m, alpha), alpha=alpha, q=q, quantum=quantum)


@dataclass(frozen=True)
class IterationSchedule:
    """Everything random about one run: the index multiset tau_k per step."""

    tau: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(tuple(int(i) for i in step) for step in self.tau))

    def __len__(self) -> int:
        return len(self.tau)

    def step(self, k: int) -> tuple[int, ...]:
        return self.tau[k]

    def aggregated(self, k: int, weights: SamplingWeights) -> dict[int, float]:
        """Per-distinct-index weights for step k: count_i * w_i / q.

        Duplicates from sampling with replacement fold into the weight of
        the one basis state the quantum index register can hold.
        """
        tau_k = self.tau[k]
        q = weights.q
        if len(tau_k) != q:
            raise ValueError(f"step {k} has {len(tau_k)} indices, expected q={q}")
        agg: dict[int, float] = {}
        for i in tau_k:
            agg[i] = agg.get(i, 0.0) + weights.w[i] / q
        return agg

    def save(self, path: str) -> None:
        """One line per step: q space-separated row indices."""
        with open(path, "w") as fh:
            for step in self.tau:
                fh.write(" ".join(str(i) for i in step) + "\n")

    @classmethod
    def load(cls, path: str) -> "IterationSchedule":
        with open(path) as fh:
            rows = [tuple(int(t) for t in line.split()) for line in fh if line.strip()]
        return cls(tau=tuple(rows))


def draw_schedule(weights: SamplingWeights, steps: int, rng: np.random.Generator) -> IterationSchedule:
    """Sample tau_k for each step: q indices with replacement from p."""
    m = weights.m
    picks = rng.choice(m, size=(steps, weights.q), replace=True, p=weights.p)
    return IterationSchedule(tau=tuple(tuple(row) for row in picks))


def one_row_step(x: np.ndarray, sys: LinearSystem, i: int) -> np.ndarray:
    """Project x orthogonally onto the hyperplane A_i x = b_i."""
    x = np.asarray(x, dtype=float)
    row = sys.a[i]
    nsq = float(row @ row)
    if nsq <= 0.0:
        raise ValueError(f"row {i} has zero norm")
    return x + ((sys.b[i] - row @ x) / nsq) * row


def multi_row_step(x: np.ndarray, sys: LinearSystem, tau_k, weights: SamplingWeights) -> np.ndarray:
    """Weighted average of row projections over the multiset tau_k.

    x + (1/q) * sum_{i in tau_k} w_i (b_i - A_i x) / ||A_i||^2 A_i^T, with
    duplicate indices contributing once per occurrence.
    """
    tau_k = tuple(tau_k)
    if not tau_k:
        raise ValueError("tau_k is empty")
    x = np.asarray(x, dtype=float)
    update = np.zeros_like(x)
    for i in tau_k:
        row = sys.a[i]
        nsq = float(row @ row)
        if nsq <= 0.0:
            raise ValueError(f"row {i} has zero norm")
        update += weights.w[i] * ((sys.b[i] - row @ x) / nsq) * row
    return x + update / weights.q


def sgd_step(x: np.ndarray, sys: LinearSystem, tau_k, weights: SamplingWeights) -> np.ndarray:
    """Mini-batch SGD step on F(x) = sum_i 0.5 (a_i x - b_i)^2.

    x - (1/q) sum_{i in tau_k} (w_i / ||a_i||^2) grad f_i(x). Algebraically
    identical to multi_row_step; kept as the gradient-descent reading.
    """
    tau_k = tuple(tau_k)
    if not tau_k:
        raise ValueError("tau_k is empty")
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in tau_k:
        row = sys.a[i]
        nsq = float(row @ row)
        if nsq <= 0.0:
            raise ValueError(f"row {i} has zero norm")
        g += (weights.w[i] / nsq) * loss_gradient(sys, i, x)
    return x - g / weights.q


def loss_value(sys: LinearSystem, i: int, x: np.ndarray) -> float:
    """f_i(x) = 0.5 (a_i x - b_i)^2."""
    return 0.5 * float(sys.a[i] @ x - sys.b[i]) ** 2


def loss_gradient(sys: LinearSystem, i: int, x: np.ndarray) -> np.ndarray:
    """grad f_i(x) = (a_i x - b_i) a_i^T."""
    return float(sys.a[i] @ x - sys.b[i]) * sys.a[i]


def run_classical(
    sys: LinearSystem,
    weights: SamplingWeights,
    schedule: IterationSchedule,
    x0: np.ndarray,
    k_steps: int,
    x_star: np.ndarray | None = None,
) -> list[tuple[np.ndarray, float]]:
    """Run K multi-row steps on a fixed schedule.

    Returns [(x_0, err_sq_0), ..., (x_K, err_sq_K)]; errors are measured
    against x_star, defaulting to the least-squares oracle solution.
    """
    if len(schedule) < k_steps:
        raise ValueError(f"schedule has {len(schedule)} steps, need {k_steps}")
    if x_star is None:
        x_star = least_squares_solve(sys)
    x = np.asarray(x0, dtype=float).copy()
    out = [(x.copy(), IterationError.of(x, x_star).err_sq)]
    for k in range(k_steps):
        x = multi_row_step(x, sys, schedule.step(k), weights)
        out.append((x.copy(), IterationError.of(x, x_star).err_sq))
    return out


def expected_update(x: np.ndarray, sys: LinearSystem, weights: SamplingWeights) -> np.ndarray:
    """Closed-form expectation of one multi-row step at x.

    E[x'] = x + sum_i p_i w_i (b_i - A_i x)/||A_i||^2 A_i^T, independent
    of q. The least-squares solution is a fixed point when the P W D^-2
    proportionality condition holds.
    """
    x = np.asarray(x, dtype=float)
    norms_sq = (sys.a * sys.a).sum(axis=1)
    coeff = weights.p * weights.w * (sys.b - sys.a @ x) / norms_sq
    return x + sys.a.T @ coeff


def check_condition(sys: LinearSystem, weights: SamplingWeights) -> tuple[bool, float]:
    """Does P W D^-2 equal (alpha / ||A||_F^2) I for some alpha?

    Returns (holds, alpha_implied) with alpha_implied read off as
    ||A||_F^2 * mean_i(p_i w_i / ||A_i||^2); holds is true when every row
    matches that best-fit constant to 1e-12.
    """
    norms_sq = (sys.a * sys.a).sum(axis=1)
    ratios = weights.p * weights.w / norms_sq
    frob_sq = float((sys.a * sys.a).sum())
    alpha_implied = frob_sq * float(ratios.mean())
    holds = bool(np.abs(ratios - alpha_implied / frob_sq).max() <= CONDITION_TOL)
    return holds, alpha_implied


@dataclass(frozen=True)
class BoundReport:
    """Convergence-rate factor and inconsistency-horizon coefficient."""

    rho: float
    horizon_coeff: float
    condition_holds: bool
    alpha: float
    advisory: bool = False


def bound_evaluate(sys: LinearSystem, weights: SamplingWeights) -> BoundReport:
    """Rate bound for the multi-row iteration under the P W D^-2 condition.

    rho = sigma_max((I - alpha S)^2 - (alpha^2/q) S^2) with
    S = A^T A / ||A||_F^2; the expected squared error contracts by rho per
    step up to the horizon term horizon_coeff * ||r*||_W^2 with
    horizon_coeff = alpha / (q ||A||_F^2). When the condition fails the
    report is flagged advisory. Quantum mode rejects alpha > 1.
    """
    if weights.alpha <= 0:
        raise ValueError("alpha must be positive")
    if weights.quantum and weights.alpha > 1.0 + CONDITION_TOL:
        raise ValueError("quantum weight normalization requires alpha <= 1")
    holds, alpha_implied = check_condition(sys, weights)
    alpha = alpha_implied if holds else weights.alpha
    frob_sq = float((sys.a * sys.a).sum())
    s = sys.a.T @ sys.a / frob_sq
    eye = np.eye(sys.n)
    mat = (eye - alpha * s) @ (eye - alpha * s) - (alpha**2 / weights.q) * (s @ s)
    rho = sym_max_abs_eig(mat)
    horizon = alpha / (weights.q * frob_sq)
    return BoundReport(rho=rho, horizon_coeff=horizon, condition_holds=holds, alpha=alpha, advisory=not holds)


def w_norm_sq(r: np.ndarray, weights: SamplingWeights) -> float:
    """||r||_W^2 = r^T W r, the weighted quadratic form."""
    r = np.asarray(r, dtype=float)
    return float(r @ (weights.w * r))


def sampling_matrix(sys: LinearSystem, tau_k, weights: SamplingWeights) -> np.ndarray:
    """M_k = sum_{i in tau_k} (w_i / q) I_i^T I_i / ||A_i||^2 (diagonal)."""
    norms_sq = (sys.a * sys.a).sum(axis=1)
    diag = np.zeros(sys.m)
    for i in tau_k:
        diag[i] += weights.w[i] / weights.q / norms_sq[i]
    return np.diag(diag)


@dataclass(frozen=True)
class ExpectationReport:
    """Monte-Carlo vs closed-form check of E[M_k] and E[M_k^T A A^T M_k].

    Deviations are judged entrywise against 3 standard errors of the
    sampled mean (with a tiny absolute floor for entries that are exactly
    deterministic); max_z_* is the worst deviation in sigma units.
    """

    mean_m: np.ndarray
    expected_m: np.ndarray
    mean_quad: np.ndarray
    expected_quad: np.ndarray
    max_dev_m: float
    max_dev_quad: float
    max_z_m: float
    max_z_quad: float
    samples: int

    @property
    def within_3_sigma(self) -> bool:
        return self.max_z_m <= 3.0 and self.max_z_quad <= 3.0


def expectation_check(sys: LinearSystem, weights: SamplingWeights, samples: int, seed: int) -> ExpectationReport:
    """Sample M_k and compare its first and second moments to closed forms.

    E[M_k] = P W D^-2 and
    E[M_k^T A A^T M_k] = (1/q) P W^2 D^-2 + (1 - 1/q) P W D^-2 A A^T P W D^-2.
    Deviations are reported entrywise against a 3-sigma tolerance built
    from the empirical spread of the sampled entries.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples for a meaningful check")
    rng = stream(seed, 90, 1)
    m = sys.m
    norms_sq = (sys.a * sys.a).sum(axis=1)
    pwd2 = np.diag(weights.p * weights.w / norms_sq)
    pw2d2 = np.diag(weights.p * weights.w**2 / norms_sq)
    aat = sys.a @ sys.a.T
    expected_m = pwd2
    expected_quad = pw2d2 / weights.q + (1.0 - 1.0 / weights.q) * pwd2 @ aat @ pwd2

    sum_m = np.zeros((m, m))
    sum_m2 = np.zeros((m, m))
    sum_q = np.zeros((m, m))
    sum_q2 = np.zeros((m, m))
    for _ in range(samples):
        tau = rng.choice(m, size=weights.q, replace=True, p=weights.p)
        mk = sampling_matrix(sys, tau, weights)
        quad = mk.T @ aat @ mk
        sum_m += mk
        sum_m2 += mk * mk
        sum_q += quad
        sum_q2 += quad * quad
    mean_m = sum_m / samples
    mean_q = sum_q / samples
    var_m = np.maximum(sum_m2 / samples - mean_m**2, 0.0)
    var_q = np.maximum(sum_q2 / samples - mean_q**2, 0.0)
    # floor keeps deterministic (zero-variance) entries at exact-match duty
    sem_m = np.maximum(np.sqrt(var_m / samples), 1e-13)
    sem_q = np.maximum(np.sqrt(var_q / samples), 1e-13)
    dev_m = np.abs(mean_m - expected_m)
    dev_q = np.abs(mean_q - expected_quad)
    return ExpectationReport(
        mean_m=mean_m,
        expected_m=expected_m,
        mean_quad=mean_q,
        expected_quad=expected_quad,
        max_dev_m=float(dev_m.max()),
        max_dev_quad=float(dev_q.max()),
        max_z_m=float((dev_m / sem_m).max()),
        max_z_quad=float((dev_q / sem_q).max()),
        samples=samples,
    )
