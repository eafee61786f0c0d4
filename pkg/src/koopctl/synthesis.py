"""Stabilizing-gain synthesis via determinant maximization under an LMI.

The certificate is the 4x4 block matrix

    [[-theta Q, 0,      y,        Q A^T],
     [0,        -eps Q, 0,        Q B^T],
     [y^T,      0,      -1/eps,   0    ],
     [A Q,      B Q,    0,        -Q   ]]  <= 0,

whose feasibility makes V(z) = z^T Q^{-1} z a control Lyapunov function for
z+ = A z + u B z with u = k^T z, k = Q^{-1} y, on the ellipsoid
E = {z : z^T Q^{-1} z <= 1}: the quadratic-form expansion with w = [z; u B z]
gives V(z+) <= theta V(z) + eps u^2 (z^T Q^{-1} z - 1) <= theta V(z) on E.

Structure of the raw program.  Feasibility at any y implies feasibility at
y = 0 with the same Q (congruence by diag(I, I, -1, I) plus averaging), and
at y = 0 the constraint is invariant under Q -> c Q, so max log det Q is
unbounded whenever it is feasible at all; a pure maximizer also drives y
toward zero, which returns a useless gain.  Two documented extensions make
the solver productive while every returned point still satisfies the
verbatim matrix inequality above:

* an optional trust region Q <= q_cap I (default 10 I) bounds the
  objective; with q_cap=None the raw behaviour is kept and feasible
  instances are reported `unbounded` via an explicit scaling-ray check;
* after the determinant maximization, y is moved from zero to the boundary
  of its exact feasible ellipsoid {y : eps y^T F^{-1} y <= 1} along a
  configurable direction (control authority or a target gain), then backed
  off by bisection until the assembled matrix clears the strict margin.

The inner solver is a log-barrier interior-point method: Newton iterations
on  -t log det Q - log det(-S - margin I) - log det(q_cap I - Q)  with t
grown geometrically.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SynthesisError

DEFAULT_EPS_GRID = tuple(float(e) for e in np.logspace(-3.0, 1.0, 13))


@dataclass(frozen=True)
class BarrierParameters:
    t_init: float = 1.0
    growth: float = 8.0
    newton_tol: float = 1e-10
    gap_tol: float = 1e-5


@dataclass(frozen=True)
class SynthesisConfig:
    theta: float = 0.5
    epsilon_grid: tuple = DEFAULT_EPS_GRID
    lmi_tolerance: float = 1e-7
    max_iterations: int = 120
    barrier: BarrierParameters = field(default_factory=BarrierParameters)
    # extensions (see module docstring)
    q_cap: Optional[float] = 10.0
    feasibility_margin: float = 1e-9
    gain_mode: str = "authority"  # "authority" | "target" | "none"
    gain_target: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must be in (0, 1), got {self.theta}")
        if len(self.epsilon_grid) == 0 or min(self.epsilon_grid) <= 0:
            raise ValueError("epsilon_grid must hold positive values")
        if self.gain_mode not in ("authority", "target", "none"):
            raise ValueError(f"unknown gain_mode {self.gain_mode!r}")


@dataclass(frozen=True)
class SynthesisResult:
    Q: Optional[np.ndarray]
    y: Optional[np.ndarray]
    k: Optional[np.ndarray]
    epsilon: Optional[float]
    theta: float
    objective: float
    lmi_max_eigenvalue: float
    status: str  # optimal | feasible | infeasible | unbounded
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self):
        def finite(v):
            return float(v) if v is not None and math.isfinite(v) else None

        return {
            "Q": None if self.Q is None else self.Q.tolist(),
            "y": None if self.y is None else self.y.tolist(),
            "k": None if self.k is None else self.k.tolist(),
            "epsilon": self.epsilon,
            "theta": self.theta,
            "objective": finite(self.objective),
            "lmi_max_eigenvalue": finite(self.lmi_max_eigenvalue),
            "status": self.status,
        }


@dataclass(frozen=True)
class EllipsoidCertificate:
    """CLF matrix P = Q^{-1}; the certified region is {z : z^T P z <= 1}."""

    Q_inverse: np.ndarray


def ellipsoid_certificate(result):
    """Certificate of a feasible/optimal result: P = Q^{-1} (symmetrized)."""
    if result.status not in ("optimal", "feasible"):
        raise SynthesisError(
            f"no ellipsoid certificate for status {result.status!r}"
        )
    P = np.linalg.inv(result.Q)
    return EllipsoidCertificate(Q_inverse=0.5 * (P + P.T))


def build_stabilization_lmi(A, B, Q, y, epsilon, theta):
    """Assemble the (3n+1) x (3n+1) certificate block matrix verbatim."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n) or Q.shape != (n, n) or y.shape != (n,):
        raise ValueError("A, B, Q must be n x n and y length n")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    S = np.zeros((3 * n + 1, 3 * n + 1))
    i1 = slice(0, n)
    i2 = slice(n, 2 * n)
    i3 = 2 * n
    i4 = slice(2 * n + 1, 3 * n + 1)
    QAt = Q @ A.T
    QBt = Q @ B.T
    S[i1, i1] = -theta * Q
    S[i2, i2] = -epsilon * Q
    S[i3, i3] = -1.0 / epsilon
    S[i4, i4] = -Q
    S[i1, i4] = QAt
    S[i4, i1] = QAt.T
    S[i2, i4] = QBt
    S[i4, i2] = QBt.T
    S[i1, i3] = y
    S[i3, i1] = y
    return S


def lmi_max_eigenvalue(A, B, Q, y, epsilon, theta):
    """Largest eigenvalue of the assembled certificate matrix."""
    return float(
        np.linalg.eigvalsh(build_stabilization_lmi(A, B, Q, y, epsilon, theta))[-1]
    )


# ---------------------------------------------------------------------------
# affine matrix machinery for the barrier solver
# ---------------------------------------------------------------------------


def _sym_basis(n):
    basis = []
    for a in range(n):
        for b in range(a, n):
            E = np.zeros((n, n))
            if a == b:
                E[a, a] = 1.0
            else:
                E[a, b] = 1.0
                E[b, a] = 1.0
            basis.append(E)
    return basis


def _pack(Q, y):
    n = Q.shape[0]
    parts = [Q[a, a:] for a in range(n)]
    return np.concatenate(parts + [np.asarray(y, dtype=np.float64)])


def _unpack(x, n):
    Q = np.zeros((n, n))
    pos = 0
    for a in range(n):
        row = x[pos : pos + (n - a)]
        Q[a, a:] = row
        Q[a:, a] = row
        pos += n - a
    return Q, x[pos:]


class _Affine:
    """M(x) = M0 + sum_k x_k basis[k]."""

    def __init__(self, M0, basis):
        self.M0 = np.asarray(M0)
        self.basis = np.asarray(basis)

    def value(self, x):
        M = self.M0 + np.tensordot(x, self.basis, axes=1)
        return 0.5 * (M + M.T)


def _logdet_psd(M):
    L = np.linalg.cholesky(M)
    return 2.0 * np.log(np.diag(L)).sum()


def _barrier_terms(term, x):
    """(value, gradient, Hessian) of -log det M(x)."""
    M = term.value(x)
    val = -_logdet_psd(M)
    psi = np.linalg.solve(M, term.basis)
    grad = -np.trace(psi, axis1=1, axis2=2)
    m, p, _ = term.basis.shape
    F1 = psi.reshape(m, p * p)
    F2 = psi.transpose(0, 2, 1).reshape(m, p * p)
    H = F1 @ F2.T
    return val, grad, 0.5 * (H + H.T)


def _in_domain(terms, x):
    for term in terms:
        try:
            np.linalg.cholesky(term.value(x))
        except np.linalg.LinAlgError:
            return False
    return True


def _f_value(terms, weights, c_lin, x):
    f = float(c_lin @ x)
    for term, w in zip(terms, weights):
        try:
            f -= w * _logdet_psd(term.value(x))
        except np.linalg.LinAlgError:
            return np.inf
    return f


def _newton_minimize(terms, weights, c_lin, x0, tol, max_iter):
    """Damped Newton on sum_j w_j (-log det M_j(x)) + c^T x."""
    x = x0.copy()
    if not _in_domain(terms, x):
        raise SynthesisError("barrier solver started outside the domain")
    for it in range(max_iter):
        f = float(c_lin @ x)
        g = c_lin.copy()
        H = np.zeros((x.size, x.size))
        for term, w in zip(terms, weights):
            val, grad, hess = _barrier_terms(term, x)
            f += w * val
            g += w * grad
            H += w * hess
        reg = 1e-12 * max(1.0, float(np.trace(H)) / H.shape[0])
        try:
            dx = np.linalg.solve(H + reg * np.eye(H.shape[0]), -g)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(H, -g, rcond=None)[0]
        decrement2 = float(-g @ dx)
        if decrement2 <= 2.0 * tol:
            return x, True, it + 1
        alpha = 1.0
        while alpha > 1e-14 and not _in_domain(terms, x + alpha * dx):
            alpha *= 0.5
        if alpha <= 1e-14:
            return x, False, it + 1
        slope = float(g @ dx)
        for _ in range(60):
            if _f_value(terms, weights, c_lin, x + alpha * dx) <= f + 0.25 * alpha * slope:
                break
            alpha *= 0.5
        x = x + alpha * dx
    return x, False, max_iter


# ---------------------------------------------------------------------------
# per-epsilon subproblem
# ---------------------------------------------------------------------------


class _Subproblem:
    """Shared affine structures for one (A, B, epsilon, theta)."""

    def __init__(self, A, B, epsilon, theta):
        self.A = A
        self.B = B
        self.epsilon = float(epsilon)
        self.theta = float(theta)
        n = A.shape[0]
        self.n = n
        self.m = n * (n + 1) // 2 + n
        self.p = 3 * n + 1
        zero_y = np.zeros(n)
        self.S_const = build_stabilization_lmi(
            A, B, np.zeros((n, n)), zero_y, epsilon, theta
        )
        basis = np.zeros((self.m, self.p, self.p))
        k = 0
        for E in _sym_basis(n):
            basis[k] = (
                build_stabilization_lmi(A, B, E, zero_y, epsilon, theta)
                - self.S_const
            )
            k += 1
        for a in range(n):
            y = np.zeros(n)
            y[a] = 1.0
            basis[k] = (
                build_stabilization_lmi(A, B, np.zeros((n, n)), y, epsilon, theta)
                - self.S_const
            )
            k += 1
        self.S_basis = basis
        q_basis = np.zeros((self.m, n, n))
        k = 0
        for E in _sym_basis(n):
            q_basis[k] = E
            k += 1
        self.Q_basis = q_basis

    def top_eig(self, Q, y):
        return lmi_max_eigenvalue(self.A, self.B, Q, y, self.epsilon, self.theta)


def _phase1(sub, cfg):
    """Find strictly feasible (Q, y) or certify that none exists.

    Newton on min t*s with barriers sI - S(Q, y) > 0, Q + sI > 0 and
    cap I - Q > 0 over (vech Q, y, s).  Early exit once the assembled
    matrix is safely below the strict margin.
    """
    n, m, p = sub.n, sub.m, sub.p
    cap = cfg.q_cap if cfg.q_cap is not None else 10.0
    margin = cfg.feasibility_margin
    accept = -4.0 * margin

    mm = m + 1
    slack_basis = np.zeros((mm, p, p))
    slack_basis[:m] = -sub.S_basis
    slack_basis[m] = np.eye(p)
    term_slack = _Affine(-sub.S_const, slack_basis)

    qpos_basis = np.zeros((mm, n, n))
    qpos_basis[:m] = sub.Q_basis
    qpos_basis[m] = np.eye(n)
    term_qpos = _Affine(np.zeros((n, n)), qpos_basis)

    cap_basis = np.zeros((mm, n, n))
    cap_basis[:m] = -sub.Q_basis
    term_cap = _Affine(cap * np.eye(n), cap_basis)

    terms = [term_slack, term_qpos, term_cap]
    weights = [1.0, 1.0, 1.0]
    gap_budget = p + 2 * n

    Q0 = 0.25 * cap * np.eye(n)
    y0 = np.zeros(n)
    s0 = max(sub.top_eig(Q0, y0), 0.0) + 1.0
    x = np.concatenate([_pack(Q0, y0), [s0]])
    c_lin = np.zeros(mm)
    c_lin[m] = 1.0

    t = 1.0
    for _ in range(48):
        x, _, _ = _newton_minimize(
            terms, weights, t * c_lin, x, cfg.barrier.newton_tol, cfg.max_iterations
        )
        Q, rest = _unpack(x[:m], n)
        y = rest
        top = sub.top_eig(Q, y)
        if top <= accept and float(np.linalg.eigvalsh(Q)[0]) > 0.0:
            return Q, y
        gap = gap_budget / t
        if x[m] - gap > accept:
            # certified: min_s > accept, no strictly feasible point
            return None
        t *= cfg.barrier.growth
    return None


def _maxdet(sub, cfg, Q0, y0):
    """Barrier maximization of log det Q under the margined LMI and cap."""
    n, m, p = sub.n, sub.m, sub.p
    margin = cfg.feasibility_margin
    cap = cfg.q_cap

    term_S = _Affine(-sub.S_const - margin * np.eye(p), -sub.S_basis)
    term_Q = _Affine(np.zeros((n, n)), sub.Q_basis)
    terms = [term_S, term_Q]
    gap_budget = p
    if cap is not None:
        terms.append(_Affine(cap * np.eye(n), -sub.Q_basis))
        gap_budget += n

    x = _pack(Q0, y0)
    if not _in_domain(terms, x):
        for lam in (0.999, 0.99, 0.9, 0.5):
            x = _pack(lam * Q0, lam * np.asarray(y0))
            if _in_domain(terms, x):
                break
        else:
            raise SynthesisError("phase-1 point is not strictly inside the domain")

    c_lin = np.zeros(m)
    t = cfg.barrier.t_init
    converged = False
    for _ in range(64):
        weights = [1.0, t] + ([1.0] if cap is not None else [])
        x, ok, _ = _newton_minimize(
            terms, weights, c_lin, x, cfg.barrier.newton_tol, cfg.max_iterations
        )
        if gap_budget / t <= cfg.barrier.gap_tol:
            converged = ok
            break
        t *= cfg.barrier.growth
    Q, y = _unpack(x, n)
    return Q, y, converged


def _y_feasible_ellipsoid(A, B, Q, epsilon, theta):
    """F with exact y-feasibility set {y : eps y^T F^{-1} y <= 1} at fixed Q.

    Schur complements: eliminating the scalar -1/eps block adds eps y y^T to
    the (1,1) block; eliminating the remaining blocks leaves
    eps y y^T <= F.  Returns None when the reduction is not positive
    definite (no strictly feasible y at this Q).
    """
    n = Q.shape[0]
    Nrr = np.zeros((2 * n, 2 * n))
    Nrr[:n, :n] = -epsilon * Q
    Nrr[:n, n:] = Q @ B.T
    Nrr[n:, :n] = B @ Q
    Nrr[n:, n:] = -Q
    if np.linalg.eigvalsh(Nrr)[-1] >= 0:
        return None
    N1r = np.hstack([np.zeros((n, n)), Q @ A.T])
    F = theta * Q + N1r @ np.linalg.solve(Nrr, N1r.T)
    F = 0.5 * (F + F.T)
    if np.linalg.eigvalsh(F)[0] <= 0:
        return None
    return F


def _boost_gain(A, B, Q, epsilon, theta, cfg):
    """y on the boundary of its feasible ellipsoid along a useful direction.

    Direction: top direction of y^T Q^{-1} y (control authority) or
    alignment with cfg.gain_target.  Backed off by bisection until the
    assembled matrix clears the strict margin.
    """
    n = Q.shape[0]
    F = _y_feasible_ellipsoid(A, B, Q, epsilon, theta)
    if F is None:
        return np.zeros(n)
    P = np.linalg.inv(Q)
    P = 0.5 * (P + P.T)
    if cfg.gain_mode == "target" and cfg.gain_target is not None:
        c = P @ np.asarray(cfg.gain_target, dtype=np.float64)
        Fc = F @ c
        denom = math.sqrt(max(epsilon * float(c @ Fc), 1e-300))
        y_star = Fc / denom
    else:
        L = np.linalg.cholesky(F)
        Mq = L.T @ P @ L
        vals, vecs = np.linalg.eigh(0.5 * (Mq + Mq.T))
        y_star = (L @ vecs[:, -1]) / math.sqrt(epsilon)
    margin = cfg.feasibility_margin
    if lmi_max_eigenvalue(A, B, Q, y_star, epsilon, theta) <= -margin:
        return y_star
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if lmi_max_eigenvalue(A, B, Q, mid * y_star, epsilon, theta) <= -margin:
            lo = mid
        else:
            hi = mid
    return lo * y_star


def _ray_is_unbounded(A, B, Q, epsilon, theta, margin):
    """Direct check that (c Q, y=0) stays feasible for c in {1, 10, 100}."""
    zero = np.zeros(Q.shape[0])
    return all(
        lmi_max_eigenvalue(A, B, c * Q, zero, epsilon, theta) <= -margin
        for c in (1.0, 10.0, 100.0)
    )


def _spectral_radius(M):
    return float(np.abs(np.linalg.eigvals(M)).max())


def solve_detmax(A, B, config=None):
    """Grid over epsilon, barrier maxdet at each, return the grid best.

    Statuses: `optimal` (trust-region solve converged), `feasible`
    (certificate holds but the inner solve stopped early), `infeasible`
    (no epsilon admits a strictly feasible point), `unbounded` (q_cap is
    None and the scaling ray certifies an unbounded objective; a zero gain
    already satisfies the certificate).
    """
    cfg = config or SynthesisConfig()
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != A.shape:
        raise ValueError("A and B must be square matrices of equal size")

    # necessary conditions from principal submatrices: A^T P A <= theta P
    # forces rho(A)^2 <= theta, and B^T P B <= eps P forces rho(B)^2 <= eps
    rho_a2 = _spectral_radius(A) ** 2
    if rho_a2 > cfg.theta:
        return SynthesisResult(
            Q=None,
            y=None,
            k=None,
            epsilon=None,
            theta=cfg.theta,
            objective=-math.inf,
            lmi_max_eigenvalue=math.inf,
            status="infeasible",
            diagnostics={
                "reason": "spectral bound: rho(A)^2 = "
                f"{rho_a2:.6g} > theta = {cfg.theta:.6g}",
            },
        )
    rho_b2 = _spectral_radius(B) ** 2

    per_eps = []
    best = None
    for epsilon in cfg.epsilon_grid:
        epsilon = float(epsilon)
        if rho_b2 > epsilon:
            per_eps.append(
                {"epsilon": epsilon, "status": "infeasible",
                 "reason": "spectral bound: rho(B)^2 > epsilon"}
            )
            continue
        sub = _Subproblem(A, B, epsilon, cfg.theta)
        found = _phase1(sub, cfg)
        if found is None:
            per_eps.append({"epsilon": epsilon, "status": "infeasible"})
            continue
        Q1, y1 = found
        if cfg.q_cap is None:
            if _ray_is_unbounded(A, B, Q1, epsilon, cfg.theta, cfg.feasibility_margin):
                top = lmi_max_eigenvalue(A, B, Q1, np.zeros(n), epsilon, cfg.theta)
                return SynthesisResult(
                    Q=Q1,
                    y=np.zeros(n),
                    k=np.zeros(n),
                    epsilon=epsilon,
                    theta=cfg.theta,
                    objective=math.inf,
                    lmi_max_eigenvalue=top,
                    status="unbounded",
                    diagnostics={
                        "message": "objective unbounded along the Q-scaling "
                        "ray; a zero gain already satisfies the certificate",
                        "per_epsilon": per_eps,
                    },
                )
            per_eps.append({"epsilon": epsilon, "status": "ray-check-failed"})
            continue
        try:
            Q, y, converged = _maxdet(sub, cfg, Q1, y1)
        except SynthesisError as exc:
            per_eps.append(
                {"epsilon": epsilon, "status": "solver-failure", "error": str(exc)}
            )
            continue
        if cfg.gain_mode != "none":
            y = _boost_gain(A, B, Q, epsilon, cfg.theta, cfg)
        top = lmi_max_eigenvalue(A, B, Q, y, epsilon, cfg.theta)
        if top > cfg.lmi_tolerance:
            per_eps.append(
                {"epsilon": epsilon, "status": "certificate-failed", "top": top}
            )
            continue
        sign, logdet = np.linalg.slogdet(Q)
        objective = logdet if sign > 0 else -math.inf
        status = "optimal" if converged else "feasible"
        per_eps.append(
            {
                "epsilon": epsilon,
                "status": status,
                "objective": objective,
                "lmi_max_eigenvalue": top,
            }
        )
        if best is None or objective > best[0] + 1e-12:
            best = (objective, status, Q, y, epsilon, top)

    if best is None:
        return SynthesisResult(
            Q=None,
            y=None,
            k=None,
            epsilon=None,
            theta=cfg.theta,
            objective=-math.inf,
            lmi_max_eigenvalue=math.inf,
            status="infeasible",
            diagnostics={"per_epsilon": per_eps},
        )
    objective, status, Q, y, epsilon, top = best
    k = extract_gain_from(Q, y)
    return SynthesisResult(
        Q=Q,
        y=y,
        k=k,
        epsilon=epsilon,
        theta=cfg.theta,
        objective=objective,
        lmi_max_eigenvalue=top,
        status=status,
        diagnostics={
            "per_epsilon": per_eps,
            "uncapped_unbounded": _ray_is_unbounded(
                A, B, Q, epsilon, cfg.theta, cfg.feasibility_margin
            ),
            "q_cap": cfg.q_cap,
            "gain_mode": cfg.gain_mode,
        },
    )


def extract_gain_from(Q, y):
    """k solving Q k = y through a Cholesky factorization."""
    L = np.linalg.cholesky(np.asarray(Q, dtype=np.float64))
    z = np.linalg.solve(L, np.asarray(y, dtype=np.float64))
    return np.linalg.solve(L.T, z)


def extract_gain(result):
    """Gain of a feasible/optimal synthesis result; rejects other statuses."""
    if result.status not in ("optimal", "feasible"):
        raise SynthesisError(f"no gain available for status {result.status!r}")
    return extract_gain_from(result.Q, result.y)


@dataclass(frozen=True)
class ClfReport:
    max_delta_v: float
    fraction_negative: float
    max_violation: float  # max over samples of dV + (1 - theta) V(z)
    passed: bool
    num_samples: int


def sample_ellipsoid(Q, num_samples, seed):
    """Uniform samples over {z : z^T Q^{-1} z <= 1}; origin excluded a.s."""
    n = Q.shape[0]
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(np.asarray(Q, dtype=np.float64))
    w = rng.normal(size=(num_samples, n))
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.uniform(size=(num_samples, 1)) ** (1.0 / n)
    return (w / norms * radii) @ L.T


def verify_clf(A, B, Q, k, num_samples, seed, theta, tolerance=1e-9):
    """Sampled check of the contraction V(z+) <= theta V(z) on the ellipsoid.

    z+ = A z + (k^T z) B z, V(z) = z^T Q^{-1} z.  Passes iff every sample
    satisfies dV <= -(1 - theta) V(z) + tolerance.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    P = np.linalg.inv(Q)
    P = 0.5 * (P + P.T)
    Z = sample_ellipsoid(Q, num_samples, seed)
    U = Z @ k
    Znext = Z @ A.T + U[:, None] * (Z @ B.T)
    V = np.einsum("ij,jk,ik->i", Z, P, Z)
    Vn = np.einsum("ij,jk,ik->i", Znext, P, Znext)
    dV = Vn - V
    violation = dV + (1.0 - theta) * V
    return ClfReport(
        max_delta_v=float(dV.max()),
        fraction_negative=float((dV < 0).mean()),
        max_violation=float(violation.max()),
        passed=bool((violation <= tolerance).all()),
        num_samples=num_samples,
    )


def petersen_check(G, M, N, P, eps_grid=None):
    """Scalar-multiplier feasibility search for the robust inequality.

    Scans a logarithmic grid of eps for negative definiteness of
    [[G, M, N], [M^T, -eps P, 0], [N^T, 0, -(1/eps) I]]; returns
    (feasible, witness_eps) with the first witness found.
    """
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    N = np.asarray(N, dtype=np.float64)
    if N.ndim == 1:
        N = N[:, None]
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    n = G.shape[0]
    q = M.shape[1]
    r = N.shape[1]
    if eps_grid is None:
        eps_grid = np.logspace(-6, 6, 61)
    for eps in eps_grid:
        block = np.zeros((n + q + r, n + q + r))
        block[:n, :n] = G
        block[:n, n : n + q] = M
        block[n : n + q, :n] = M.T
        block[:n, n + q :] = N
        block[n + q :, :n] = N.T
        block[n : n + q, n : n + q] = -eps * P
        block[n + q :, n + q :] = -(1.0 / eps) * np.eye(r)
        if np.linalg.eigvalsh(block)[-1] < 0.0:
            return True, float(eps)
    return False, None
