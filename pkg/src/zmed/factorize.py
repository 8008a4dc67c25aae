"""Sparse factorization of the combined z matrix and the null-block projection.

The bilinear model lives in whitened eigen coordinates: with
``Ytil = D^-1 V' Ztil`` the expected structure is ``Ytil = F Omega'`` where
the individual-space covariates are ``C = U F``.  Factors carry a standard
normal prior; loadings carry a spike-slab prior so the factor-exclusion
rule can read posterior inclusion probabilities per trait.  The fit is a
deterministic coordinate-ascent variational scheme (random initialisation
jitter only), the whitened residual variance is pinned at 1.

The projection variant first maps the combined matrix onto a disjoint LD
block through the pseudo-inverse, which annihilates the genetic mean
structure and leaves only non-genetic (confounding) components for the
factorization to find.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlockOverlap, Diverged, RankDeficient, ShapeMismatch
from .linalg import (
    EigenLD,
    GenotypePanel,
    apply_pseudo_inverse_transpose,
    panel_scale,
    rotate_columns,
    summary_projection,
)
from .sumstats import CombinedZ, SummaryVector, combine, from_z
from .ssvi import _sigmoid, logit

# Loading-side spike-slab defaults.  The exclusion rule reads loading PIPs
# against a 1/2 threshold, so the prior sets its sensitivity: with prior
# inclusion 1/T (one active trait expected per factor) a loading needs a
# Bayes factor of about T to count as active, which keeps weak LD tagging
# below threshold while genuinely loaded traits saturate.
OMEGA_SLAB_VAR = 1.0
PRUNE_REL_VAR = 1e-4


@dataclass
class FactorOptions:
    max_sweeps: int = 200
    tol: float = 1e-8
    prior_logit: float | None = None   # default: logit(1 / n_traits)
    slab_var: float = OMEGA_SLAB_VAR
    init_jitter: float = 0.01

    def loading_logit(self, n_traits: int) -> float:
        if self.prior_logit is not None:
            return self.prior_logit
        return float(logit(1.0 / max(n_traits, 2)))


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Fitted bilinear factor model of a combined z matrix.

    C : (n, L) individual-space covariates, ordered by explained variance
    Omega : (K+1, L) posterior-mean loadings (pip * slab mean), GWAS row 0
    omega_pip : (K+1, L) loading inclusion probabilities
    mapping_eig : decomposition used to convert covariates to z-score scale
    """

    C: np.ndarray
    Omega: np.ndarray
    omega_pip: np.ndarray
    L: int
    mapping_eig: EigenLD
    explained_var: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def unmediated_z(self, factor_index: int) -> np.ndarray:
        """z-score-scale covariate ``n**-0.5 X' c_l`` for one factor."""
        return summary_projection(self.mapping_eig, self.C[:, factor_index])

    def gwas_component(self) -> np.ndarray:
        """Reconstructed GWAS-specific component ``n**-0.5 X' C omega_gwas``."""
        if self.L == 0:
            return np.zeros(self.mapping_eig.p)
        return summary_projection(self.mapping_eig, self.C @ self.Omega[0])


@dataclass(frozen=True, eq=False)
class UnmediatedCovariates:
    """Factor covariates that passed the exclusion rule, on z-score scale."""

    z_unmed: np.ndarray
    selected: tuple
    rejected: tuple
    model: FactorModel

    @property
    def count(self) -> int:
        return self.z_unmed.shape[1] if self.z_unmed.size else 0


def _fit_bilinear(Y: np.ndarray, L: int, opts: FactorOptions, rng):
    """Coordinate-ascent VB for Y ~ F Omega' with unit whitened noise.

    Returns posterior means M (r x L) of F, loading means/pips (T x L).
    """
    r, T = Y.shape
    v0 = opts.slab_var
    pi0_logit = opts.loading_logit(T)

    # SVD warm start: factor columns at the prior scale (norm ~ sqrt(r)),
    # loadings absorbing the singular values; jitter breaks symmetry.
    Uy, sy, Vyt = np.linalg.svd(Y, full_matrices=False)
    Lw = min(L, len(sy))
    M = np.zeros((r, L))
    W = np.zeros((T, L))
    M[:, :Lw] = Uy[:, :Lw] * np.sqrt(float(r))
    W[:, :Lw] = Vyt[:Lw].T * (sy[:Lw] / np.sqrt(float(r)))
    M = M + opts.init_jitter * rng.standard_normal((r, L))

    pip = np.full((T, L), 0.5)
    mu = W.copy()
    s2 = np.full((T, L), v0)
    Sigma_F = np.eye(L)

    for sweep in range(opts.max_sweeps):
        W_old = pip * mu
        # q(F): rows share the covariance (I + E[Omega' Omega])^-1
        Wm = pip * mu
        var_w = pip * (mu ** 2 + s2) - Wm ** 2
        M_omega = Wm.T @ Wm + np.diag(var_w.sum(axis=0))
        prec = np.eye(L) + M_omega
        Sigma_F = np.linalg.inv(prec)
        M = Y @ Wm @ Sigma_F
        G = M.T @ M + r * Sigma_F

        # q(Omega): coordinate update of each loading column
        YtM = Y.T @ M
        for l in range(L):
            Wm = pip * mu
            t = YtM[:, l] - (Wm @ G[:, l] - Wm[:, l] * G[l, l])
            s2_l = 1.0 / (G[l, l] + 1.0 / v0)
            mu_l = t * s2_l
            log_odds = pi0_logit + 0.5 * np.log(s2_l / v0) + mu_l ** 2 / (2.0 * s2_l)
            pip[:, l] = _sigmoid(np.clip(log_odds, -500, 500))
            mu[:, l] = mu_l
            s2[:, l] = s2_l

        if not np.isfinite(M).all() or not np.isfinite(mu).all():
            raise Diverged(f"factorization produced non-finite values at sweep {sweep}")
        if np.max(np.abs(pip * mu - W_old)) < opts.tol:
            break

    return M, pip * mu, pip


def _prune_and_order(M, W, pip, total_sq: float):
    """Drop factors below the relative explained-variance floor, order rest."""
    ev = np.sum(M ** 2, axis=0) * np.sum(W ** 2, axis=0)
    keep = ev > max(PRUNE_REL_VAR * total_sq, 1e-12)
    order = np.argsort(-ev[keep])
    idx = np.where(keep)[0][order]
    return M[:, idx], W[:, idx], pip[:, idx], ev[idx]


def factorize_z(combined: CombinedZ, eig: EigenLD, L_max: int = 10,
                opts: FactorOptions | None = None, rng=None) -> FactorModel:
    """Sparse factorization of the combined z matrix in eigen coordinates.

    Factors with negligible explained variance (< 1e-4 of the whitened
    total) are pruned; the survivors are ordered by explained variance.
    Deterministic per seed.
    """
    if L_max < 1:
        raise ShapeMismatch("L_max >= 1")
    if eig.rank < 1:
        raise RankDeficient("decomposition has rank zero")
    rng = np.random.default_rng(rng)
    opts = opts or FactorOptions()
    Y = rotate_columns(eig, combined.z_matrix())
    M, W, pip, ev = _prune_and_order(
        *_fit_bilinear(Y, L_max, opts, rng), float(np.sum(Y ** 2)))
    C = eig.U @ M
    return FactorModel(C=C, Omega=W, omega_pip=pip, L=C.shape[1],
                       mapping_eig=eig, explained_var=ev)


def select_unmediated(model: FactorModel,
                      pip_threshold: float = 0.5) -> UnmediatedCovariates:
    """Apply the factor-exclusion rule and convert survivors to z scale.

    A factor is rejected when its loading is active (pip > threshold) on
    the GWAS row AND on at least one eQTL row: such shared factors look
    like genuine mediation and must not be partialled out.  Everything
    else, including GWAS-only directions, becomes an unmediated covariate.
    """
    if not (0.0 < pip_threshold < 1.0):
        raise ShapeMismatch("pip_threshold in (0, 1)")
    selected, rejected, cols = [], [], []
    for l in range(model.L):
        gwas_active = model.omega_pip[0, l] > pip_threshold
        eqtl_active = bool(np.any(model.omega_pip[1:, l] > pip_threshold))
        if gwas_active and eqtl_active:
            rejected.append((l, "active on both GWAS and eQTL loadings"))
        else:
            selected.append(l)
            cols.append(model.unmediated_z(l))
    z = np.column_stack(cols) if cols else np.zeros((model.mapping_eig.p, 0))
    return UnmediatedCovariates(z_unmed=z, selected=tuple(selected),
                                rejected=tuple(rejected), model=model)


def project_to_null_block(combined: CombinedZ, eig: EigenLD,
                          null_panel: GenotypePanel,
                          max_cross_corr: float | None = None) -> CombinedZ:
    """Project the combined z matrix onto a disjoint LD block.

    Computes ``Z0 = X0' (pinv(X') Ztil)``.  Because the null block is
    independent of the analysis block, the genetic mean component is
    annihilated in expectation and only non-genetic structure survives.
    The returned traits carry unit standard errors (the projected values
    are pseudo z-scores, not marginal regression output).

    ``max_cross_corr``, when given, turns on an empirical independence
    check between the two blocks (costly at genome scale, cheap at desk
    scale).
    """
    analysis_ids = None
    if combined.gwas.snp_ids:
        analysis_ids = set(combined.gwas.snp_ids)
        shared = analysis_ids & set(null_panel.snp_ids)
        if shared:
            raise BlockOverlap(f"panels share {len(shared)} SNP id(s)")
    if combined.p != eig.p:
        raise ShapeMismatch("combined z and decomposition disagree on p")
    if max_cross_corr is not None:
        # sample cross-correlation X0'X / n with X = sqrt(n) U D V'
        cross = np.abs((null_panel.values.T @ eig.U)
                       @ (eig.D[:, None] * eig.V.T)) * panel_scale(eig.n_ref)
        worst = float(cross.max()) if cross.size else 0.0
        if worst > max_cross_corr:
            raise BlockOverlap(
                f"max |cross-correlation| {worst:.3f} exceeds bound {max_cross_corr}")
    proj = null_panel.values.T @ apply_pseudo_inverse_transpose(
        eig, combined.z_matrix())
    traits = combined.traits
    projected = [from_z(proj[:, t], traits[t].n_samples, traits[t].trait_id,
                        snp_ids=null_panel.snp_ids)
                 for t in range(len(traits))]
    return combine(projected[0], projected[1:])


def factorize_projected(projected: CombinedZ, null_eig: EigenLD,
                        analysis_eig: EigenLD, L_max: int = 10,
                        opts: FactorOptions | None = None,
                        rng=None) -> UnmediatedCovariates:
    """Factorize a null-block projection and map covariates back.

    The covariates ``C = U0 F`` live in individual space, so the analysis
    block converts them to z scale with its own decomposition.  The
    exclusion rule is applied for reporting, but note that for the
    projection route the full-model GWAS reconstruction
    (:meth:`FactorModel.gwas_component`) is the adjustment of record.
    """
    rng = np.random.default_rng(rng)
    opts = opts or FactorOptions()
    if null_eig.rank < 1 or analysis_eig.rank < 1:
        raise RankDeficient("decomposition has rank zero")
    Y = rotate_columns(null_eig, projected.z_matrix())
    M, W, pip, ev = _prune_and_order(
        *_fit_bilinear(Y, L_max, opts, rng), float(np.sum(Y ** 2)))
    C = null_eig.U @ M
    model = FactorModel(C=C, Omega=W, omega_pip=pip, L=C.shape[1],
                        mapping_eig=analysis_eig, explained_var=ev)
    return select_unmediated(model)
