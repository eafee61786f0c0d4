"""EDMD fitting and assembly of the real lifted bilinear model.

Pipeline: snapshot pairs -> Gram matrices -> K = G^+ A -> eigen data with
conjugate pairs adjacent -> real eigen-coordinate transform W -> block
diagonal A, input matrix B and projection C, packaged as a
LiftedBilinearModel for the synthesis and simulation stages.

Conventions.  Lifted vectors are columns, Phi(y) ~ K^T Phi(x), and the real
eigen-coordinates are z = W Phi(x).  The one-step advance in z-coordinates
is then z+ = A z with A = W K^T W^{-1}, which equals the block-diagonal
matrix formed from the eigenvalues.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dictionary as dictionary_mod
from .errors import FitError

# Singular values below PINV_RCUT * sigma_max are treated as zero.
PINV_RCUT = 1e-10
# |Im(lam)| <= REAL_EIG_TOL * (1 + |lam|) classifies an eigenvalue as real.
REAL_EIG_TOL = 1e-10
# Eigenvector / transform matrices with condition above this are rejected.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class SnapshotData:
    """Paired snapshots of the unforced system: Y rows succeed X rows."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if X.ndim != 2 or X.shape != Y.shape or X.shape[0] < 1:
            raise ValueError(
                f"X and Y must be matching (M, d) with M >= 1, "
                f"got {X.shape} and {Y.shape}"
            )
        if not np.isfinite(X).all() or not np.isfinite(Y).all():
            raise ValueError("snapshot data contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def state_dim(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class KoopmanApproximation:
    """Finite-dimensional Koopman matrix with attached eigen data."""

    K: np.ndarray
    eigenvalues: np.ndarray  # complex, conjugate pairs adjacent
    V: np.ndarray  # complex right eigenvectors, columns
    dictionary: dictionary_mod.Dictionary
    gram_G: np.ndarray
    gram_A: np.ndarray


@dataclass(frozen=True)
class LiftedBilinearModel:
    """Real lifted model z+ = A z + u B z with x ~ C z and z = W Phi(x)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    dictionary: dictionary_mod.Dictionary
    eigenvalues: np.ndarray = field(default=None)

    @property
    def lifted_dim(self):
        return self.A.shape[0]

    def lift(self, x):
        return self.W @ dictionary_mod.evaluate(self.dictionary, x)

    def lift_batch(self, X):
        return dictionary_mod.evaluate_batch(self.dictionary, X) @ self.W.T

    def step(self, z, u):
        return self.A @ z + u * (self.B @ z)

    def project(self, z):
        return self.C @ z


def _lift_checked(data_X, dic, what):
    lifted = dictionary_mod.evaluate_batch(dic, data_X)
    bad = ~np.isfinite(lifted).all(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise FitError(
            f"non-finite lifted value at {what} row {row}; "
            "state is outside the evaluation range of the dictionary"
        )
    return lifted


def build_gram_matrices(data, dic):
    """Gram matrices G = (1/M) sum Phi(x)Phi(x)^T, A = (1/M) sum Phi(x)Phi(y)^T."""
    if dic.state_dim != data.state_dim:
        raise ValueError(
            f"dictionary is on R^{dic.state_dim}, data on R^{data.state_dim}"
        )
    px = _lift_checked(data.X, dic, "X")
    py = _lift_checked(data.Y, dic, "Y")
    m = data.n_samples
    G = px.T @ px / m
    G = 0.5 * (G + G.T)
    A_mat = px.T @ py / m
    return G, A_mat


def _pair_blocks(eigvals, V):
    """Split eigen data into real and conjugate-pair blocks, deterministic order."""
    n = eigvals.shape[0]
    blocks = []
    used = np.zeros(n, dtype=bool)
    i = 0
    while i < n:
        lam = eigvals[i]
        if abs(lam.imag) <= REAL_EIG_TOL * (1.0 + abs(lam)):
            blocks.append(("real", lam.real, i))
            used[i] = True
            i += 1
            continue
        # LAPACK returns conjugate pairs adjacently for real input; verify.
        if i + 1 >= n or abs(eigvals[i + 1] - np.conj(lam)) > 1e-8 * (1.0 + abs(lam)):
            raise FitError(
                f"eigenvalue {lam} has no adjacent conjugate partner; "
                "cannot order the spectrum into real blocks"
            )
        blocks.append(("pair", lam, i))
        used[i] = used[i + 1] = True
        i += 2
    blocks.sort(
        key=lambda b: (
            -abs(b[1]),
            -np.real(b[1]),
            abs(np.imag(b[1])),
        )
    )
    return blocks


def _pin_phase(v):
    """Rotate an eigenvector so its largest-magnitude entry is positive real."""
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if abs(pivot) == 0.0:
        return v
    return v * (np.conj(pivot) / abs(pivot))


def fit_koopman(data, dic):
    """Least-squares Koopman matrix K = G^+ A with eigen data attached.

    The pseudoinverse uses an SVD with relative cutoff 1e-10, so duplicated
    snapshots and n > M rank deficiency yield the minimum-norm solution.
    """
    G, A_mat = build_gram_matrices(data, dic)
    K = np.linalg.pinv(G, rcond=PINV_RCUT) @ A_mat
    try:
        eigvals, V = np.linalg.eig(K)
    except np.linalg.LinAlgError as exc:
        raise FitError(
            f"eigensolver failed on K (cond(G) = {np.linalg.cond(G):.3e})"
        ) from exc
    cond_v = np.linalg.cond(V)
    if not np.isfinite(cond_v) or cond_v > COND_LIMIT:
        raise FitError(
            f"K appears defective: eigenvector condition {cond_v:.3e} "
            f"exceeds {COND_LIMIT:.0e}"
        )

    blocks = _pair_blocks(eigvals, V)
    order_vals = []
    order_vecs = []
    for kind, lam, i in blocks:
        if kind == "real":
            v = V[:, i]
            # real eigenvalue of a real matrix: remove any complex phase
            v = _pin_phase(v)
            if np.abs(v.imag).max() > 1e-8:
                raise FitError(
                    f"eigenvector for real eigenvalue {lam} is not realizable"
                )
            order_vals.append(complex(lam))
            order_vecs.append(v.real.astype(complex))
        else:
            if lam.imag < 0:
                lam = np.conj(lam)
                v = np.conj(V[:, i])
            else:
                v = V[:, i]
            v = _pin_phase(v)
            order_vals.extend([lam, np.conj(lam)])
            order_vecs.extend([v, np.conj(v)])
    eigenvalues = np.array(order_vals, dtype=complex)
    V_ordered = np.column_stack(order_vecs)
    return KoopmanApproximation(
        K=K,
        eigenvalues=eigenvalues,
        V=V_ordered,
        dictionary=dic,
        gram_G=G,
        gram_A=A_mat,
    )


def _is_real_eig(lam):
    return abs(lam.imag) <= REAL_EIG_TOL * (1.0 + abs(lam))


def real_block_A(eigenvalues):
    """Block-diagonal real matrix from conjugate-adjacent eigenvalues.

    Real eigenvalue -> 1x1 block [lam]; conjugate pair -> 2x2 block
    |lam| [[cos t, sin t], [-sin t, cos t]] with t = angle(lam).
    """
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    n = eigenvalues.shape[0]
    A = np.zeros((n, n))
    i = 0
    while i < n:
        lam = eigenvalues[i]
        if _is_real_eig(lam):
            A[i, i] = lam.real
            i += 1
            continue
        if i + 1 >= n or abs(eigenvalues[i + 1] - np.conj(lam)) > 1e-8 * (1.0 + abs(lam)):
            raise ValueError(
                f"complex eigenvalue {lam} has no adjacent conjugate partner"
            )
        r = abs(lam)
        ang = np.angle(lam)
        c, s = np.cos(ang), np.sin(ang)
        A[i : i + 2, i : i + 2] = r * np.array([[c, s], [-s, c]])
        i += 2
    return A


def real_eigen_transform(koopman):
    """Real transform W: rows Re(v^T) for real modes, 2Re / -2Im for pairs.

    z = W Phi(x) are the real eigenfunction coordinates.  Rejects W with
    condition number above 1e12.
    """
    vals = koopman.eigenvalues
    V = koopman.V
    n = vals.shape[0]
    W = np.zeros((n, n))
    i = 0
    while i < n:
        lam = vals[i]
        if _is_real_eig(lam):
            W[i, :] = V[:, i].real
            i += 1
            continue
        W[i, :] = 2.0 * V[:, i].real
        W[i + 1, :] = -2.0 * V[:, i].imag
        i += 2
    cond_w = np.linalg.cond(W)
    if not np.isfinite(cond_w) or cond_w > COND_LIMIT:
        raise FitError(
            f"eigen-coordinate transform is near-singular "
            f"(cond = {cond_w:.3e} > {COND_LIMIT:.0e})"
        )
    return W


def fit_projection_C(data, dic, W):
    """Least-squares C with x_m ~ C (W Phi(x_m)) over all snapshots."""
    px = _lift_checked(data.X, dic, "X")
    Z = px @ W.T
    C_t, *_ = np.linalg.lstsq(Z, data.X, rcond=PINV_RCUT)
    return C_t.T


def fit_lifted_B(data, dic, W, g_samples):
    """Least-squares input matrix in eigen-coordinates.

    Solves W J_Phi(x_m) g(x_m) ~ B (W Phi(x_m)) over the snapshot set and
    warns when the relative residual exceeds 0.1 (the bilinear-lift
    assumption is then badly violated).
    """
    g_samples = np.asarray(g_samples, dtype=np.float64)
    if g_samples.shape != data.X.shape:
        raise ValueError(
            f"g_samples has shape {g_samples.shape}, expected {data.X.shape}"
        )
    px = _lift_checked(data.X, dic, "X")
    Z = px @ W.T
    m = data.n_samples
    targets = np.empty_like(Z)
    for r in range(m):
        jac = dictionary_mod.jacobian(dic, data.X[r])
        targets[r] = W @ (jac @ g_samples[r])
    B_t, *_ = np.linalg.lstsq(Z, targets, rcond=PINV_RCUT)
    B = B_t.T
    target_norm = np.linalg.norm(targets)
    if target_norm > 0:
        rel = np.linalg.norm(Z @ B.T - targets) / target_norm
        if rel > 0.1:
            warnings.warn(
                f"bilinear input fit has relative residual {rel:.3f} > 0.1; "
                "the dictionary does not span dPhi/dx g",
                stacklevel=2,
            )
    return B


def _constant_direction(koopman, W, data):
    """Index of the eigen-direction carrying the constant observable."""
    px = dictionary_mod.evaluate_batch(koopman.dictionary, data.X)
    H = px @ W.T  # (M, n) eigenfunction values
    candidates = []
    for i, lam in enumerate(koopman.eigenvalues):
        if abs(lam - 1.0) <= 1e-6 and H[:, i].std() <= 1e-8 * max(
            1.0, np.abs(H[:, i]).max()
        ):
            candidates.append(i)
    if not candidates:
        raise FitError(
            "include_constant dictionary but no eigen-direction with "
            "|lambda - 1| <= 1e-6 and constant eigenfunction was found"
        )
    if len(candidates) > 1:
        raise FitError(
            f"constant-direction detection is ambiguous: candidates {candidates}"
        )
    return candidates[0]


def assemble_model(koopman, W, C, B, dic, data=None, remove_constant=True):
    """Package the real lifted model, dropping the constant direction if any.

    When the dictionary includes the constant observable and
    remove_constant is set, the eigen-direction whose eigenfunction is
    numerically constant (eigenvalue within 1e-6 of one, standard deviation
    below 1e-8 over the training inputs) is removed from A, B, C and W.
    Detection requires the training data.
    """
    A = real_block_A(koopman.eigenvalues)
    eigenvalues = koopman.eigenvalues
    if dic.include_constant and remove_constant:
        if data is None:
            raise ValueError(
                "constant-direction removal requires the training data"
            )
        r = _constant_direction(koopman, W, data)
        if not _is_real_eig(eigenvalues[r]):
            raise FitError(
                f"constant-direction candidate {r} has complex eigenvalue "
                f"{eigenvalues[r]}"
            )
        keep = [i for i in range(len(eigenvalues)) if i != r]
        A = A[np.ix_(keep, keep)]
        B = B[np.ix_(keep, keep)]
        C = C[:, keep]
        W = W[keep, :]
        eigenvalues = eigenvalues[keep]
    return LiftedBilinearModel(
        A=A, B=B, C=C, W=W, dictionary=dic, eigenvalues=eigenvalues
    )


def fit_lifted_model(data, dic, g_samples, remove_constant=True):
    """End-to-end fit: Koopman matrix, W, C, B, assembled real model."""
    koopman = fit_koopman(data, dic)
    W = real_eigen_transform(koopman)
    C = fit_projection_C(data, dic, W)
    B = fit_lifted_B(data, dic, W, g_samples)
    model = assemble_model(
        koopman, W, C, B, dic, data=data, remove_constant=remove_constant
    )
    return model, koopman
