"""Reference gene-level tests: sTWAS, IVW, MR-Egger, observed-expression TWAS.

The summary-based baselines work on the whitened vectors
``eta = (V' z) / D`` of one eQTL trait and the GWAS trait; the
observed-expression baseline correlates raw measurements.  All statistics
are deterministic and carry an explicit sign for the sign-aware scoring
rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesign, ZeroInstrument, ZeroVariance

_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class BaselineScore:
    gene_id: str
    statistic: float
    sign: int
    method: str


def _sign(x: float) -> int:
    return -1 if x < 0 else 1


def stwas(eta_eqtl, eta_gwas, gene_id: str = "") -> BaselineScore:
    """Summary TWAS: ``T = eta_e' eta_g / ||eta_e||``.

    Invariant to positive rescaling of the instrument vector.
    """
    e = np.asarray(eta_eqtl, dtype=np.float64)
    g = np.asarray(eta_gwas, dtype=np.float64)
    norm = np.linalg.norm(e)
    if norm < _NORM_FLOOR:
        raise ZeroInstrument("eQTL eta vector has zero norm")
    num = float(e @ g)
    return BaselineScore(gene_id=gene_id, statistic=num / norm,
                         sign=_sign(num), method="stwas")


def ivw(eta_eqtl, eta_gwas, gene_id: str = "") -> BaselineScore:
    """Inverse-variance weighting via the no-intercept MLE in eta space.

    ``T = beta_hat * max(sigma_hat, 1) / se(beta_hat)`` with sigma_hat^2
    the mean squared residual; the max guard stops near-perfect fits from
    deflating the error model below the whitened noise floor.
    """
    e = np.asarray(eta_eqtl, dtype=np.float64)
    g = np.asarray(eta_gwas, dtype=np.float64)
    ete = float(e @ e)
    if ete < _NORM_FLOOR ** 2:
        raise ZeroInstrument("eQTL eta vector has zero norm")
    beta = float(e @ g) / ete
    resid = g - e * beta
    sigma = max(np.sqrt(float(resid @ resid) / len(g)), _NORM_FLOOR)
    se = sigma / np.sqrt(ete)
    stat = beta * max(sigma, 1.0) / se
    return BaselineScore(gene_id=gene_id, statistic=stat,
                         sign=_sign(beta), method="ivw")


def egger(eta_eqtl, eta_gwas, gene_id: str = "") -> BaselineScore:
    """MR-Egger: slope t-statistic of the intercept-augmented regression.

    The intercept absorbs a directional (constant) component of the GWAS
    signal; the same max(sigma_hat, 1) convention as :func:`ivw` applies.
    """
    e = np.asarray(eta_eqtl, dtype=np.float64)
    g = np.asarray(eta_gwas, dtype=np.float64)
    r = len(e)
    if r < 3:
        raise DegenerateDesign(f"Egger regression needs r >= 3, got {r}")
    if np.linalg.norm(e) < _NORM_FLOOR:
        raise ZeroInstrument("eQTL eta vector has zero norm")
    ec = e - e.mean()
    sxx = float(ec @ ec)
    if sxx < _NORM_FLOOR ** 2:
        raise DegenerateDesign("instrument is constant; slope not identifiable")
    slope = float(ec @ g) / sxx
    intercept = float(g.mean() - slope * e.mean())
    resid = g - intercept - slope * e
    sigma = max(np.sqrt(float(resid @ resid) / r), _NORM_FLOOR)
    se = sigma / np.sqrt(sxx)
    stat = slope * max(sigma, 1.0) / se
    return BaselineScore(gene_id=gene_id, statistic=stat,
                         sign=_sign(slope), method="egger")


def otwas(m_k, y, gene_id: str = "") -> BaselineScore:
    """Observed-expression TWAS: correlation on the t-statistic scale,
    ``corr * sqrt((n - 2) / (1 - corr^2))``."""
    m = np.asarray(m_k, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    n = len(m)
    mc = m - m.mean()
    yc = yv - yv.mean()
    denom = np.linalg.norm(mc) * np.linalg.norm(yc)
    if denom < _NORM_FLOOR:
        raise ZeroVariance("expression or phenotype is constant")
    corr = float(mc @ yc) / denom
    corr2 = min(corr ** 2, 1.0 - 1e-12)
    stat = corr * np.sqrt((n - 2) / (1.0 - corr2))
    return BaselineScore(gene_id=gene_id, statistic=stat,
                         sign=_sign(corr), method="otwas")
