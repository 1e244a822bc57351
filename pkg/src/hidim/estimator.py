"""Finite-size instances and convex M-estimation solvers.

The generic solver minimises ``sum_mu rho(y_mu - x_mu . s) + sum_i sigma(s_i)``
with the Chambolle-Pock primal-dual iteration. It touches ``rho`` and
``sigma`` only through scalar proximal maps: the dual step uses the prox of
the conjugate of ``u -> sum rho(y - u)``, obtained from the prox of ``rho``
by Moreau decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg

from .convex import TabulatedConvexFunction
from .distributions import ScalarDistribution
from .errors import ConvergenceError, DegenerateError, DomainError, NumericalError

TEST_ROWS = 2000


@dataclass(frozen=True)
class ProblemInstance:
    X: np.ndarray
    s0: np.ndarray
    eps: np.ndarray
    y: np.ndarray
    X_test: Optional[np.ndarray] = None
    y_test: Optional[np.ndarray] = None

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def P(self):
        return self.X.shape[1]


def trial_seed(base_seed, trial_index):
    """Independent, reproducible stream for one trial."""
    return np.random.SeedSequence([int(base_seed), int(trial_index)])


def instance_sizes(alpha, sqrt_NP):
    P = int(round(sqrt_NP / np.sqrt(alpha)))
    N = int(round(alpha * P))
    return N, P


def generate_instance(alpha, sqrt_NP, noise: Optional[ScalarDistribution],
                      signal: ScalarDistribution, seed, test_rows=TEST_ROWS):
    """Draw ``X`` (entries ``N(0, 1/P)``), ``s0``, ``eps`` and a test set.

    ``P = round(sqrt_NP / sqrt(alpha))`` and ``N = round(alpha P)``. A
    ``noise`` of ``None`` gives noiseless measurements.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if sqrt_NP < 10:
        raise DomainError("sqrt_NP must be at least 10")
    N, P = instance_sizes(alpha, sqrt_NP)
    if N < 2 or P < 2:
        raise DomainError(f"instance too small (N={N}, P={P})")
    rng = np.random.default_rng(seed if isinstance(seed, np.random.SeedSequence)
                                else np.random.SeedSequence(seed))
    scale = 1.0 / np.sqrt(P)
    X = rng.normal(0.0, scale, (N, P))
    s0 = signal.sample(rng, P)
    eps = np.zeros(N) if noise is None else noise.sample(rng, N)
    y = X @ s0 + eps
    X_test = y_test = None
    if test_rows:
        X_test = rng.normal(0.0, scale, (int(test_rows), P))
        e_test = np.zeros(int(test_rows)) if noise is None else noise.sample(rng, int(test_rows))
        y_test = X_test @ s0 + e_test
    return ProblemInstance(X, s0, eps, y, X_test, y_test)


# ------------------------------------------------------------------ metrics
@dataclass
class EstimateMetrics:
    q_s_emp: float
    q_eps_emp: float
    e_train_emp: float
    e_gen_emp: Optional[float]
    solver_iterations: int = 0
    solver_residual: float = 0.0
    flags: List[str] = field(default_factory=list)

    def as_dict(self):
        return {"q_s": self.q_s_emp, "q_eps": self.q_eps_emp,
                "e_train": self.e_train_emp, "e_gen": self.e_gen_emp}


def evaluate_estimate(inst: ProblemInstance, s_hat, iterations=0, residual=0.0):
    s_hat = np.asarray(s_hat, dtype=float)
    if s_hat.shape != inst.s0.shape:
        raise DomainError("estimate has the wrong shape")
    eps_hat = inst.y - inst.X @ s_hat
    flags = []
    if inst.X_test is None:
        e_gen = None
        flags.append("no test set")
    else:
        e_gen = float(np.mean((inst.y_test - inst.X_test @ s_hat) ** 2))
    return EstimateMetrics(
        q_s_emp=float(np.mean((s_hat - inst.s0) ** 2)),
        q_eps_emp=float(np.mean((eps_hat - inst.eps) ** 2)),
        e_train_emp=float(np.mean(eps_hat ** 2)),
        e_gen_emp=e_gen, solver_iterations=int(iterations),
        solver_residual=float(residual), flags=flags)


# ---------------------------------------------------------- closed forms
def ridge_analytic(inst: ProblemInstance, gamma):
    """``(X^T X + gamma I)^{-1} X^T y`` by Cholesky."""
    if not gamma > 0:
        raise DomainError("ridge weight must be positive")
    A = inst.X.T @ inst.X
    A[np.diag_indices_from(A)] += gamma
    try:
        c = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise NumericalError("ridge factorization failed", {"gamma": gamma}) from exc
    return linalg.cho_solve(c, inst.X.T @ inst.y)


def least_squares(inst: ProblemInstance):
    s, *_ = linalg.lstsq(inst.X, inst.y)
    return s


# ---------------------------------------------------------- generic solver
@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 100_000
    power_iterations: int = 50
    safety: float = 1.05
    certificate_tol: float = 1e-5
    spot_check: bool = False
    #: "auto" uses closed forms for quadratic/quadratic and quadratic/zero.
    method: str = "auto"
    record_objective: bool = True
    adaptive: bool = True
    seed: int = 0


@dataclass
class SolveResult:
    s_hat: np.ndarray
    dual: Optional[np.ndarray]
    iterations: int
    residual: float
    objective: List[float] = field(default_factory=list)
    converged: bool = True
    method: str = "pdhg"


def operator_norm(X, iterations=50, seed=0):
    """Power-iteration estimate of the largest singular value of ``X``."""
    v = np.random.default_rng(seed).standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iterations):
        w = X.T @ (X @ v)
        s = np.linalg.norm(w)
        if s == 0:
            return 0.0
        v = w / s
    return float(np.sqrt(s))


def objective(inst, rho, sigma, s):
    return float(np.sum(rho.value(inst.y - inst.X @ s)) + np.sum(sigma.value(s)))


def certificate(inst, rho, sigma, s, v, atol=1e-6):
    """Infinity-norm distance of ``0`` from the subdifferential of the objective.

    The multiplier ``u`` is the dual iterate projected onto ``d rho`` at the
    residuals; the certificate is the distance of ``X^T u`` from
    ``d sigma(s)``. Kinks within ``atol`` (relative) count as active.
    """
    r = inst.y - inst.X @ s
    lo, hi = rho.subdifferential(r, atol * (1.0 + np.abs(r)))
    u = np.clip(-v, lo, hi) if v is not None else 0.5 * (lo + hi)
    g = inst.X.T @ u
    slo, shi = sigma.subdifferential(s, atol * (1.0 + np.abs(s)))
    return float(np.max(np.maximum(slo - g, 0.0) + np.maximum(g - shi, 0.0)))


class _PDHGState:
    """Iterate, step sizes and running averages of a restarted PDHG run."""

    def __init__(self, inst, rho, sigma, s, v, steps):
        self.inst, self.rho, self.sigma = inst, rho, sigma
        self.s, self.v = s, v
        self.Xs = inst.X @ s
        self.tau, self.eta = steps

    def step(self, s, v, Xs, Xs_bar):
        X, y, tau, eta = self.inst.X, self.inst.y, self.tau, self.eta
        # dual update: prox of tau F*, F(u) = sum rho(y - u), by Moreau decomposition
        w = v + tau * Xs_bar
        v_new = w - tau * (y - self.rho.prox(1.0 / tau, y - w / tau))
        s_new = self.sigma.prox(eta, s - eta * (X.T @ v_new))
        return s_new, v_new, X @ s_new

    def fixed_point_residual(self, s, v, Xs, s_new, v_new, Xs_new):
        ds, dv = s_new - s, v_new - v
        # PDHG is a proximal point method in the metric M; this is ||z - T z||_M
        p = np.dot(ds, ds) / self.eta + np.dot(dv, dv) / self.tau \
            - 2.0 * np.dot(dv, Xs_new - Xs)
        return float(np.sqrt(max(p, 0.0)))


def _pdhg(inst, rho, sigma, opts, s=None, v=None, steps=None, n_iter=None):
    """Restarted, averaged Chambolle-Pock iteration.

    Every ``check`` iterations the current iterate and the running average
    since the last restart are compared by their fixed-point residual; the
    better one becomes a restart point when the residual has dropped enough
    since the previous restart. At restarts the primal weight (ratio of the
    dual to the primal step) is moved towards the observed ratio of dual to
    primal movement.
    """
    X = inst.X
    N, P = X.shape
    L = operator_norm(X, opts.power_iterations, opts.seed) * opts.safety
    if L == 0:
        raise DegenerateError("design matrix is zero")
    omega = 1.0 if steps is None else steps
    st = _PDHGState(inst, rho, sigma, np.zeros(P) if s is None else s.copy(),
                    np.zeros(N) if v is None else v.copy(), (omega / L, 1.0 / (omega * L)))
    s, v, Xs = st.s, st.v, st.Xs
    Xs_bar = Xs
    history = []
    n_iter = opts.max_iter if n_iter is None else n_iter
    check = 64
    s_sum, v_sum, n_avg = np.zeros(P), np.zeros(N), 0
    s_last, v_last, r_last, r_prev = s.copy(), v.copy(), None, np.inf
    since, it = 0, 0
    converged = False
    for it in range(1, n_iter + 1):
        s_new, v_new, Xs_new = st.step(s, v, Xs, Xs_bar)
        if opts.record_objective:
            history.append(float(np.sum(rho.value(inst.y - Xs_new)) + np.sum(sigma.value(s_new))))
        rel_s = np.linalg.norm(s_new - s) / max(np.linalg.norm(s_new), 1e-30)
        rel_v = np.linalg.norm(v_new - v) / max(np.linalg.norm(v_new), 1e-30)
        s_sum += s_new
        v_sum += v_new
        n_avg += 1
        since += 1
        done = rel_s < opts.tol and rel_v < opts.tol
        if opts.adaptive and not done and it % check == 0:
            r_cur = st.fixed_point_residual(s, v, Xs, s_new, v_new, Xs_new)
            sa, va = s_sum / n_avg, v_sum / n_avg
            Xsa = X @ sa
            sa2, va2, Xsa2 = st.step(sa, va, Xsa, Xsa)
            r_avg = st.fixed_point_residual(sa, va, Xsa, sa2, va2, Xsa2)
            use_avg = r_avg < r_cur
            r_c = min(r_avg, r_cur)
            if r_last is None:
                r_last = r_c
            restart = (r_c <= 0.2 * r_last or (r_c <= 0.8 * r_last and r_c > r_prev)
                       or since >= 0.36 * it)
            r_prev = r_c
            if restart:
                if use_avg:
                    s_new, v_new, Xs_new = sa, va, Xsa
                ds = np.linalg.norm(s_new - s_last)
                dv = np.linalg.norm(v_new - v_last)
                if ds > 1e-10 and dv > 1e-10:
                    omega = float(np.exp(0.5 * np.log(dv / ds) + 0.5 * np.log(omega)))
                    st.tau, st.eta = omega / L, 1.0 / (omega * L)
                s_last, v_last, r_last, r_prev = s_new.copy(), v_new.copy(), r_c, np.inf
                s_sum[:] = 0.0
                v_sum[:] = 0.0
                n_avg, since = 0, 0
                s, v, Xs = s_new, v_new, Xs_new
                Xs_bar = Xs
                continue
        Xs_bar = 2.0 * Xs_new - Xs
        s, v, Xs = s_new, v_new, Xs_new
        if done:
            converged = True
            break
    return s, v, it, history, converged, omega


def solve_m_estimation(inst: ProblemInstance, rho: TabulatedConvexFunction,
                       sigma: TabulatedConvexFunction, opts: Optional[SolverOptions] = None):
    """Minimise the M-estimation objective.

    Returns
    -------
    s_hat : ndarray
    metrics : EstimateMetrics
    result : SolveResult
        Solver diagnostics, including the recorded objective sequence.

    Raises
    ------
    ConvergenceError
        If the iteration cap is reached with an optimality certificate above
        ``opts.certificate_tol * (1 + |X^T y|_inf)``.
    """
    opts = opts or SolverOptions()
    qr = rho.tag is not None and rho.tag.kind == "quadratic"
    qs = sigma.tag is not None and sigma.tag.kind in ("quadratic", "zero")
    if opts.method == "auto" and qr and qs:
        gamma = 0.0 if sigma.tag.kind == "zero" else sigma.tag.weight / rho.tag.weight
        s = ridge_analytic(inst, gamma) if gamma > 0 else least_squares(inst)
        res = SolveResult(s, None, 0, 0.0, [], True, "closed-form")
        return s, evaluate_estimate(inst, s), res
    scale = 1.0 + float(np.max(np.abs(inst.X.T @ inst.y)))
    s, v, it, hist, conv, steps = _pdhg(inst, rho, sigma, opts)
    cert = certificate(inst, rho, sigma, s, v)
    if not conv and cert > opts.certificate_tol * scale:
        raise ConvergenceError("primal-dual iteration hit the iteration cap",
                               trace=hist[-1000:],
                               diagnostics={"certificate": cert, "iterations": it})
    if opts.spot_check:
        obj = objective(inst, rho, sigma, s)
        s2, v2, _, _, _, _ = _pdhg(inst, rho, sigma, opts, s, v, steps, n_iter=it)
        obj2 = objective(inst, rho, sigma, s2)
        if abs(obj - obj2) > 1e-6 * max(abs(obj2), 1.0):
            raise NumericalError("objective moved on continued iteration",
                                 {"objective": obj, "continued": obj2})
    res = SolveResult(s, v, it, cert, hist, conv, "pdhg")
    return s, evaluate_estimate(inst, s, it, cert), res


# ------------------------------------------------------------ noiseless
def solve_noiseless_constrained(inst: ProblemInstance, sigma: TabulatedConvexFunction,
                                tol=1e-10, max_iter=100_000, penalty=None):
    """Minimise ``sum sigma(s_i)`` subject to ``X s = y``.

    ADMM between the prox of ``sigma`` and the Euclidean projection onto the
    affine solution set, the projection using a Cholesky factor of
    ``X X^T``. The returned point is the projected iterate, so the
    constraints hold to roundoff.
    """
    X, y = inst.X, inst.y
    N, P = X.shape
    if N >= P:
        raise DomainError("constrained recovery needs N < P")
    try:
        c = linalg.cho_factor(X @ X.T)
    except linalg.LinAlgError as exc:
        raise DegenerateError("X X^T is singular") from exc
    if np.min(np.abs(np.diag(c[0]))) < 1e-10 * np.max(np.abs(np.diag(c[0]))):
        raise DegenerateError("X X^T is numerically rank deficient")

    def project(w):
        return w - X.T @ linalg.cho_solve(c, X @ w - y)

    if sigma.tag is not None and sigma.tag.kind == "quadratic":
        s = project(np.zeros(P))
        return s, evaluate_estimate(inst, s), SolveResult(s, None, 0, 0.0, [], True, "min-norm")
    lam = float(np.sqrt(np.mean(y ** 2) * P / N)) if penalty is None else float(penalty)
    lam = max(lam, 1e-12)
    z = np.zeros(P)
    u = np.zeros(P)
    s = project(z)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s = project(z - u)
        z_new = sigma.prox(lam, s + u)
        u = u + s - z_new
        r = np.linalg.norm(s - z_new)
        d = np.linalg.norm(z_new - z) / lam
        z = z_new
        scale = max(np.linalg.norm(s), np.linalg.norm(z), 1e-30)
        if r < tol * scale and d * lam < tol * scale:
            converged = True
            break
        if it % 20 == 0:
            if r > 10.0 * d * lam:
                lam /= 2.0
                u *= 2.0
            elif d * lam > 10.0 * r:
                lam *= 2.0
                u /= 2.0
    if not converged:
        raise ConvergenceError("noiseless ADMM hit the iteration cap",
                               diagnostics={"primal": r, "dual": d})
    viol = float(np.max(np.abs(X @ s - y)))
    if viol > 1e-8 * max(1.0, float(np.max(np.abs(y)))):
        s = project(s)
    return s, evaluate_estimate(inst, s, it, viol), SolveResult(s, None, it, viol, [], True, "admm")
