"""Monomial observable dictionaries: construction, evaluation, Jacobian.

A dictionary is the ordered family of monomials x^e with total degree
<= max_degree (optionally including the constant monomial).  Ordering is
graded: ascending total degree, and within one degree descending
lexicographic on the exponent tuple, so for two variables degree one reads
(x1, x2), degree two reads (x1^2, x1*x2, x2^2), and so on.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import lift_batch


def _exponent_tuples(d, degree):
    """All exponent tuples of the given total degree, descending lex."""
    if d == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _exponent_tuples(d - 1, degree - first):
            out.append((first,) + rest)
    return out


@dataclass(frozen=True)
class Dictionary:
    """Ordered monomial basis on R^state_dim.

    exponents has shape (n, state_dim); row i holds the multi-index of
    monomial i.  Rows are pairwise distinct and graded-lex ordered.
    """

    state_dim: int
    max_degree: int
    include_constant: bool
    exponents: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.exponents.shape[0]

    def __len__(self):
        return self.size

    def to_json_dict(self):
        return {
            "state_dim": self.state_dim,
            "max_degree": self.max_degree,
            "include_constant": self.include_constant,
            "indices": self.exponents.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj):
        exps = np.asarray(obj["indices"], dtype=np.int64)
        return cls(
            state_dim=int(obj["state_dim"]),
            max_degree=int(obj["max_degree"]),
            include_constant=bool(obj["include_constant"]),
            exponents=exps,
        )


def dictionary_size(state_dim, max_degree, include_constant):
    """Number of monomials of total degree <= max_degree in state_dim vars."""
    n = math.comb(state_dim + max_degree, state_dim)
    return n if include_constant else n - 1


def build_dictionary(state_dim, max_degree, include_constant=False):
    """Construct the graded-lex monomial dictionary.

    Raises ValueError unless state_dim >= 1 and max_degree >= 1.
    """
    if state_dim < 1:
        raise ValueError(f"state_dim must be >= 1, got {state_dim}")
    if max_degree < 1:
        raise ValueError(f"max_degree must be >= 1, got {max_degree}")
    rows = []
    start = 0 if include_constant else 1
    for degree in range(start, max_degree + 1):
        rows.extend(_exponent_tuples(state_dim, degree))
    exps = np.asarray(rows, dtype=np.int64)
    exps.setflags(write=False)
    return Dictionary(
        state_dim=int(state_dim),
        max_degree=int(max_degree),
        include_constant=bool(include_constant),
        exponents=exps,
    )


def evaluate(dictionary, x):
    """Evaluate all monomials at the state x; returns a length-n vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dictionary.state_dim,):
        raise ValueError(
            f"state has shape {x.shape}, expected ({dictionary.state_dim},)"
        )
    return np.prod(x[None, :] ** dictionary.exponents, axis=1)


def evaluate_batch(dictionary, X):
    """Evaluate all monomials at each row of X; returns (M, n)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != dictionary.state_dim:
        raise ValueError(
            f"states have shape {X.shape}, expected (M, {dictionary.state_dim})"
        )
    return lift_batch(X, dictionary.exponents)


def jacobian(dictionary, x):
    """Analytic Jacobian of the lift: entry (i, j) = d monomial_i / d x_j."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dictionary.state_dim,):
        raise ValueError(
            f"state has shape {x.shape}, expected ({dictionary.state_dim},)"
        )
    exps = dictionary.exponents
    n, d = exps.shape
    jac = np.empty((n, d))
    powers = x[None, :] ** exps  # (n, d) of x_l^{e_il}
    for j in range(d):
        ej = exps[:, j]
        lowered = x[j] ** np.maximum(ej - 1, 0)
        col = ej * lowered
        for l in range(d):
            if l != j:
                col = col * powers[:, l]
        jac[:, j] = np.where(ej > 0, col, 0.0)
    return jac
