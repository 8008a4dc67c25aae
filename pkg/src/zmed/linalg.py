"""Dense linear algebra over the reference genotype panel.

Scaling convention (owned here, used everywhere else)
-----------------------------------------------------
``EigenLD`` stores the thin SVD of the *scaled* standardized genotype
matrix::

    X / sqrt(n) = U @ diag(D) @ V.T

so the LD matrix is ``R = V @ diag(D**2) @ V.T`` and equals ``X.T @ X / n``
exactly under the population-sd standardization used by :func:`standardize`
(every column satisfies ``x.T @ x == n``).  Any routine that refers to the
unscaled ``X`` folds the ``sqrt(n)`` factor back in via
:func:`panel_scale`; no other module introduces its own ``sqrt(n)``.

Note on the eigen rotation: the whitening used throughout is
``eta = (V.T @ z) / D``, which satisfies ``eta ~ N(D V.T theta, I)`` when
``z ~ N(R theta, R)``.  Writing the rotation with ``V`` instead of ``V.T``
does not have this property; the transposed form is the one implemented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantColumn,
    IndexOutOfRange,
    NumericalFailure,
    ShapeMismatch,
)

# Relative cutoff below which singular values are treated as numerical zeros.
DEFAULT_RANK_TOL = 1e-8

# Dense LD matrices above this SNP count require an explicit opt-in.
DENSE_LD_LIMIT = 2000


def panel_scale(n: int) -> float:
    """The single owner of the ``n**-0.5`` factor relating X to U D V'."""
    return 1.0 / np.sqrt(float(n))


@dataclass(frozen=True, eq=False)
class GenotypePanel:
    """Column-standardized reference genotypes with LD block annotations.

    values : (n, p) array, each column mean 0 and population sd 1
    block_bounds : half-open ``(start, end)`` index ranges partitioning [0, p)
    snp_ids : one identifier per column
    """

    values: np.ndarray
    n: int
    p: int
    block_bounds: tuple = ()
    snp_ids: tuple = ()

    def __post_init__(self):
        if self.values.shape != (self.n, self.p):
            raise ShapeMismatch(
                f"panel values shape {self.values.shape} != ({self.n}, {self.p})")
        _check_blocks(self.block_bounds, self.p)
        if len(self.snp_ids) != self.p:
            raise ShapeMismatch("snp_ids length must equal p")

    def block_slice(self, block_index: int) -> "GenotypePanel":
        """Sub-panel restricted to one LD block (columns stay standardized)."""
        start, end = self.block_bounds[block_index]
        return GenotypePanel(
            values=self.values[:, start:end],
            n=self.n,
            p=end - start,
            block_bounds=((0, end - start),),
            snp_ids=tuple(self.snp_ids[start:end]),
        )

    def drop_block(self, block_index: int) -> "GenotypePanel":
        """Sub-panel with one block removed; remaining blocks are re-indexed."""
        keep = [b for i, b in enumerate(self.block_bounds) if i != block_index]
        cols = np.concatenate([np.arange(s, e) for s, e in keep])
        bounds = []
        offset = 0
        for s, e in keep:
            bounds.append((offset, offset + (e - s)))
            offset += e - s
        return GenotypePanel(
            values=self.values[:, cols],
            n=self.n,
            p=len(cols),
            block_bounds=tuple(bounds),
            snp_ids=tuple(self.snp_ids[c] for c in cols),
        )


@dataclass(frozen=True, eq=False)
class EigenLD:
    """Thin SVD of ``X / sqrt(n)``; carrier of U, D, V and the implied R.

    U : (n, r) orthonormal columns
    D : (r,) positive singular values, descending
    V : (p, r) orthonormal columns
    """

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    rank: int
    n_ref: int

    @property
    def p(self) -> int:
        return self.V.shape[0]


def _check_blocks(bounds, p):
    if not bounds:
        raise ShapeMismatch("block_bounds must not be empty")
    prev_end = 0
    for start, end in bounds:
        if start != prev_end or end <= start:
            raise ShapeMismatch(f"block_bounds must be sorted, disjoint and cover [0, {p})")
        prev_end = end
    if prev_end != p:
        raise ShapeMismatch(f"block_bounds must cover [0, {p}) exactly")


def standardize(raw, block_bounds=None, snp_ids=None) -> GenotypePanel:
    """Column-standardize a raw dosage matrix into a :class:`GenotypePanel`.

    Uses the population convention (divide by n) so that ``x.T @ x == n``
    for every standardized column, which keeps the downstream summary
    statistic identities exact.

    Raises
    ------
    ConstantColumn
        if any column has zero variance (monomorphic SNP).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise ShapeMismatch("raw panel must be a 2-d matrix with n >= 2 rows")
    n, p = raw.shape
    mean = raw.mean(axis=0)
    centered = raw - mean
    var = np.mean(centered ** 2, axis=0)
    bad = np.where(var <= 1e-24)[0]
    if bad.size:
        raise ConstantColumn(bad[0])
    values = centered / np.sqrt(var)
    if block_bounds is None:
        block_bounds = ((0, p),)
    else:
        block_bounds = tuple((int(s), int(e)) for s, e in block_bounds)
    if snp_ids is None:
        snp_ids = tuple(f"snp{j}" for j in range(p))
    else:
        snp_ids = tuple(str(s) for s in snp_ids)
    return GenotypePanel(values=values, n=n, p=p,
                         block_bounds=block_bounds, snp_ids=snp_ids)


def svd_panel(panel: GenotypePanel, tol: float = DEFAULT_RANK_TOL) -> EigenLD:
    """Thin SVD of ``X / sqrt(n)``, dropping singular values <= tol * d_max.

    The retained rank is the panel's numerical rank at the given relative
    tolerance; reference panels with n < p are always rank-deficient.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    scaled = panel.values * panel_scale(panel.n)
    try:
        U, s, Vt = np.linalg.svd(scaled, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    keep = s > tol * s[0]
    r = int(np.count_nonzero(keep))
    if r == 0:
        raise NumericalFailure("panel has numerical rank zero")
    return EigenLD(U=np.ascontiguousarray(U[:, :r]),
                   D=s[:r].copy(),
                   V=np.ascontiguousarray(Vt[:r].T),
                   rank=r,
                   n_ref=panel.n)


def ld_entry(eig: EigenLD, i: int, j: int) -> float:
    """Single LD matrix entry ``R[i, j] = sum_k V[i,k] D[k]^2 V[j,k]``."""
    p = eig.p
    if not (0 <= i < p and 0 <= j < p):
        raise IndexOutOfRange(f"SNP index out of range: ({i}, {j}) with p={p}")
    return float(np.sum(eig.V[i] * (eig.D ** 2) * eig.V[j]))


def ld_matvec(eig: EigenLD, w) -> np.ndarray:
    """Matrix-vector product ``R @ w`` without materializing R."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != eig.p:
        raise ShapeMismatch(f"vector length {w.shape[0]} != p={eig.p}")
    return eig.V @ ((eig.D ** 2) * (eig.V.T @ w))


def ld_dense(eig: EigenLD, force: bool = False) -> np.ndarray:
    """Dense LD matrix; refused for p > DENSE_LD_LIMIT unless forced."""
    if eig.p > DENSE_LD_LIMIT and not force:
        raise ShapeMismatch(
            f"refusing to materialize a {eig.p} x {eig.p} LD matrix; pass force=True")
    return (eig.V * eig.D ** 2) @ eig.V.T


def apply_pseudo_inverse_transpose(eig: EigenLD, Z) -> np.ndarray:
    """Apply the pseudo-inverse of ``X.T`` to a (p, q) matrix or p-vector.

    With ``X = sqrt(n) U D V'`` this is ``pinv(X.T) = n**-0.5 U D^-1 V'``,
    the identity on vectors of the form ``X.T w`` with w in span(U), and the
    annihilator of anything orthogonal to V's column space.
    """
    Z = np.asarray(Z, dtype=np.float64)
    vec = Z.ndim == 1
    if vec:
        Z = Z[:, None]
    if Z.shape[0] != eig.p:
        raise ShapeMismatch(f"Z has {Z.shape[0]} rows, expected p={eig.p}")
    out = panel_scale(eig.n_ref) * (eig.U @ ((eig.V.T @ Z) / eig.D[:, None]))
    return out[:, 0] if vec else out


def rotate_to_eigen(eig: EigenLD, z) -> np.ndarray:
    """Whitening rotation ``eta = (V.T @ z) / D``.

    Under ``z ~ N(R theta, R)`` the result satisfies
    ``eta ~ N(D V.T theta, I_r)``.  Accepts a raw p-vector or anything with
    a ``.z`` attribute (a summary vector).
    """
    z = np.asarray(getattr(z, "z", z), dtype=np.float64)
    if z.shape[0] != eig.p:
        raise ShapeMismatch(f"z has length {z.shape[0]}, expected p={eig.p}")
    return (eig.V.T @ z) / eig.D


def rotate_columns(eig: EigenLD, Z) -> np.ndarray:
    """:func:`rotate_to_eigen` applied to every column of a (p, q) matrix."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[0] != eig.p:
        raise ShapeMismatch(f"Z has {Z.shape[0]} rows, expected p={eig.p}")
    return (eig.V.T @ Z) / eig.D[:, None]


def summary_projection(eig: EigenLD, c) -> np.ndarray:
    """Map an individual-space vector to z-score scale: ``n**-0.5 X.T c``.

    Equals ``V @ (D * (U.T @ c))`` under the stored decomposition; this is
    how factor covariates become unmediated z-score columns.
    """
    c = np.asarray(c, dtype=np.float64)
    vec = c.ndim == 1
    if vec:
        c = c[:, None]
    if c.shape[0] != eig.U.shape[0]:
        raise ShapeMismatch(f"c has {c.shape[0]} rows, expected n={eig.U.shape[0]}")
    out = eig.V @ (eig.D[:, None] * (eig.U.T @ c))
    return out[:, 0] if vec else out


def sample_correlated_z(eig: EigenLD, theta, rng, sigma: float = 1.0) -> np.ndarray:
    """Draw ``z ~ N(R theta, sigma^2 R)`` using ``R^(1/2) = V diag(D)``."""
    theta = np.asarray(theta, dtype=np.float64)
    mean = ld_matvec(eig, theta) if theta.any() else np.zeros(eig.p)
    eps = rng.standard_normal(eig.rank)
    return mean + sigma * (eig.V @ (eig.D * eps))
