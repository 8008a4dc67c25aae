"""Univariate summary statistics and the combined multi-trait z matrix.

z-scores are the canonical currency downstream; effect sizes and standard
errors are kept for file round-trips and for the on-demand sampling
covariance diagonal (``s_diag``), never consumed by the estimators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegression, OrderMismatch, ShapeMismatch
from .linalg import GenotypePanel

# Perfect fits would produce se = 0; flooring keeps noiseless sanity cases
# flowing through pipelines instead of erroring.
SE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class SummaryVector:
    """Per-SNP effect sizes, standard errors, and z-scores for one trait."""

    effect: np.ndarray
    se: np.ndarray
    z: np.ndarray
    n_samples: int
    trait_id: str
    snp_ids: tuple = ()

    def __post_init__(self):
        if not (self.effect.shape == self.se.shape == self.z.shape):
            raise ShapeMismatch("effect, se, z must share shape")
        if np.any(self.se <= 0):
            raise ShapeMismatch("all standard errors must be positive")
        if self.snp_ids and len(self.snp_ids) != self.p:
            raise ShapeMismatch("snp_ids length must equal p")

    @property
    def p(self) -> int:
        return self.effect.shape[0]

    def s_diag(self) -> np.ndarray:
        """On-demand sampling variance diagonal ``se^2 + effect^2 / n``."""
        return self.se ** 2 + self.effect ** 2 / self.n_samples


@dataclass(frozen=True, eq=False)
class CombinedZ:
    """One GWAS summary vector plus K eQTL summary vectors, GWAS first."""

    gwas: SummaryVector
    eqtls: tuple

    @property
    def p(self) -> int:
        return self.gwas.p

    @property
    def n_eqtl(self) -> int:
        return len(self.eqtls)

    @property
    def traits(self) -> tuple:
        return (self.gwas,) + tuple(self.eqtls)

    def z_matrix(self) -> np.ndarray:
        """The p x (K+1) z-score matrix with the GWAS trait in column 0."""
        return np.column_stack([sv.z for sv in self.traits])


def from_z(z, n_samples, trait_id, se=None, snp_ids=()) -> SummaryVector:
    """Wrap a bare z vector as a SummaryVector (unit se unless given)."""
    z = np.asarray(z, dtype=np.float64)
    se = np.ones_like(z) if se is None else np.asarray(se, dtype=np.float64)
    return SummaryVector(effect=z * se, se=se, z=z,
                         n_samples=n_samples, trait_id=trait_id,
                         snp_ids=tuple(snp_ids))


def univariate_stats(x_col, y, n: int):
    """Simple-regression effect and standard error for one standardized SNP.

    effect = x'y / x'x and se^2 = rss / (n * x'x); se is floored at
    ``SE_FLOOR`` so that exact fits pass through instead of erroring.
    """
    x = np.asarray(x_col, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch("x and y must share length")
    xtx = float(x @ x)
    if xtx <= 0.0:
        raise DegenerateRegression("x'x = 0: SNP carries no variation")
    effect = float(x @ y) / xtx
    resid = y - x * effect
    se2 = float(resid @ resid) / (n * xtx)
    se = max(np.sqrt(max(se2, 0.0)), SE_FLOOR)
    return effect, se


def summarize_trait(panel: GenotypePanel, y, trait_id: str) -> SummaryVector:
    """Column-wise univariate statistics of y against every SNP in the panel.

    With the panel standardization (x'x = n exactly) the per-SNP residual
    sum of squares simplifies to ``y'y - n * effect^2``, which lets the
    whole scan run as two matrix products.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != panel.n:
        raise ShapeMismatch(f"y has length {y.shape[0]}, expected n={panel.n}")
    yty = float(y @ y)
    if yty <= 0.0:
        raise DegenerateRegression("outcome has zero variance")
    n = panel.n
    effect = (panel.values.T @ y) / n
    rss = np.maximum(yty - n * effect ** 2, 0.0)
    se = np.maximum(np.sqrt(rss) / n, SE_FLOOR)
    return SummaryVector(effect=effect, se=se, z=effect / se,
                         n_samples=n, trait_id=trait_id,
                         snp_ids=panel.snp_ids)


def combine(gwas: SummaryVector, eqtls) -> CombinedZ:
    """Assemble the combined z matrix, GWAS in column 0.

    Raises ShapeMismatch on differing p and OrderMismatch when SNP
    identifier lists are present but disagree.
    """
    eqtls = tuple(eqtls)
    for sv in eqtls:
        if sv.p != gwas.p:
            raise ShapeMismatch(
                f"trait {sv.trait_id} has p={sv.p}, GWAS has p={gwas.p}")
        if sv.snp_ids and gwas.snp_ids and sv.snp_ids != gwas.snp_ids:
            raise OrderMismatch(
                f"trait {sv.trait_id} SNP ordering differs from GWAS")
    return CombinedZ(gwas=gwas, eqtls=eqtls)
