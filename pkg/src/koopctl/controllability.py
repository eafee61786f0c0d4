"""Sampled controllability certificate for the lifted bilinear system.

Builds the iterated-commutator chain B, [B,A], [[B,A],A], ... (truncated at
n+1 entries by Cayley-Hamilton) and evaluates the column space spanned by
chain[k] z at sampled lifted states.  Full rank at a sample certifies local
controllability there; the report aggregates samples into a sampled
certificate for the bilinear form, which transfers to the original
control-affine system through the injectivity of the lift.

The lifted system has no additive input channel, so the additive-channel
columns of the general accessibility array vanish identically and only the
state-dependent columns remain.
"""

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-8


@dataclass(frozen=True)
class BracketChain:
    """matrices[0] = B, matrices[k+1] = matrices[k] A - A matrices[k]."""

    matrices: tuple

    def __len__(self):
        return len(self.matrices)


@dataclass(frozen=True)
class AccessibilityReport:
    """Sampled ranks of the accessibility matrix and the resulting verdict."""

    sample_points: np.ndarray  # (num_samples, n)
    ranks: np.ndarray  # (num_samples,)
    rank_tolerance: float
    certified: bool
    n: int

    def to_json_dict(self):
        return {
            "n": self.n,
            "certified": bool(self.certified),
            "rank_tolerance": self.rank_tolerance,
            "samples": [
                {"z": z.tolist(), "rank": int(r)}
                for z, r in zip(self.sample_points, self.ranks)
            ],
        }


def bracket_chain(A, B):
    """Commutator chain of B against A, truncated at n + 1 entries."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise ValueError(f"A and B must be square with equal shape, got {A.shape} and {B.shape}")
    n = A.shape[0]
    mats = [B]
    for _ in range(n):
        prev = mats[-1]
        mats.append(prev @ A - A @ prev)
    return BracketChain(matrices=tuple(mats))


def accessibility_matrix(chain, z):
    """Columns chain[k] z for all k; shape (n, len(chain))."""
    z = np.asarray(z, dtype=np.float64)
    n = chain.matrices[0].shape[0]
    if z.shape != (n,):
        raise ValueError(f"z has shape {z.shape}, expected ({n},)")
    return np.column_stack([m @ z for m in chain.matrices])


def matrix_rank_at(chain, z, tol=RANK_TOL):
    q = accessibility_matrix(chain, z)
    s = np.linalg.svd(q, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s > tol * s[0]).sum())


def controllability_report(model, num_samples, seed, radius=1.0):
    """Sampled-rank certificate on spheres of the given radius.

    Samples are uniform on the sphere (the origin is excluded by
    construction: every column of the accessibility matrix vanishes there).
    certified is true iff the rank equals the lifted dimension at every
    sample.  Deterministic for fixed (model, num_samples, seed, radius).
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    n = model.lifted_dim
    chain = bracket_chain(model.A, model.B)
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(num_samples, n))
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    # resample any degenerate draw (vanishing norm has probability ~0)
    bad = norms[:, 0] == 0.0
    while bad.any():
        points[bad] = rng.normal(size=(int(bad.sum()), n))
        norms = np.linalg.norm(points, axis=1, keepdims=True)
        bad = norms[:, 0] == 0.0
    points = radius * points / norms
    ranks = np.array([matrix_rank_at(chain, z) for z in points], dtype=np.int64)
    return AccessibilityReport(
        sample_points=points,
        ranks=ranks,
        rank_tolerance=RANK_TOL,
        certified=bool((ranks == n).all()),
        n=n,
    )
