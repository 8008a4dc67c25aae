"""Joint mediation estimators on summary statistics.

All three variants fit the same whitened spike-slab regression of the GWAS
z vector on the eQTL z vectors; they differ in how the unmediated
(direct / confounded) signal is handled:

* ``fit_naive``   - model it head-on with a dense coefficient per eigen
  direction of the LD matrix (spike-slab on all of them).
* ``fit_fact``    - factorize the combined z matrix, keep factors that are
  not shared between GWAS and eQTL loadings, and add their z-scale
  covariates to the regression.
* ``fit_proj``    - project the combined matrix onto a disjoint LD block
  (killing genetic structure), factorize what survives, subtract the
  reconstructed non-genetic GWAS component, and fit mediation terms only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .factorize import (
    FactorOptions,
    factorize_projected,
    factorize_z,
    project_to_null_block,
    select_unmediated,
)
from .linalg import EigenLD, GenotypePanel, panel_scale, rotate_columns, rotate_to_eigen, svd_panel
from .ssvi import (
    EigenRegressionProblem,
    SpikeSlabPrior,
    SviOptions,
    fit as ssvi_fit,
)
from .sumstats import CombinedZ


@dataclass(frozen=True)
class GeneEffect:
    gene_id: str
    beta_mean: float
    beta_pip: float
    beta_sign: int


@dataclass(frozen=True)
class CovariateEffect:
    covariate_id: str
    gamma_mean: float
    gamma_pip: float


@dataclass(frozen=True, eq=False)
class MediationResult:
    """Per-gene mediation posteriors plus unmediated-covariate diagnostics."""

    genes: tuple
    covariates: tuple
    method_tag: str
    diagnostics: dict

    def ranking_scores(self) -> np.ndarray:
        """Ranking key per gene: PIP with a negligible |mean| tie-break."""
        return np.array([g.beta_pip + 1e-9 * np.tanh(abs(g.beta_mean))
                         for g in self.genes])


def _spike_slab_regression(y_white, design, ids, eig, opts, rng, prior=None):
    problem = EigenRegressionProblem(y_tilde=y_white, design=design,
                                     d2=eig.D ** 2, predictor_ids=tuple(ids))
    prior = prior or SpikeSlabPrior.default_for(problem.q)
    return ssvi_fit(problem, prior, opts, rng), problem


def _pack(posterior, gene_ids, cov_ids, method, extra_diag):
    K = len(gene_ids)
    coef = posterior.coefficient_mean()
    genes = tuple(
        GeneEffect(gene_id=gene_ids[k],
                   beta_mean=float(coef[k]),
                   beta_pip=float(posterior.pip[k]),
                   beta_sign=int(np.sign(coef[k])) if coef[k] != 0 else 0)
        for k in range(K))
    covs = tuple(
        CovariateEffect(covariate_id=cov_ids[j],
                        gamma_mean=float(coef[K + j]),
                        gamma_pip=float(posterior.pip[K + j]))
        for j in range(len(cov_ids)))
    diag = {"elbo": posterior.elbo_trace[-1] if posterior.elbo_trace else float("nan"),
            "residual_var": posterior.residual_var,
            "n_covariates": len(cov_ids)}
    diag.update(extra_diag)
    return MediationResult(genes=genes, covariates=covs, method_tag=method,
                           diagnostics=diag)


def _check_combined(combined: CombinedZ, eig: EigenLD):
    if combined.n_eqtl < 1:
        raise ShapeMismatch("at least one eQTL trait is required")
    if combined.p != eig.p:
        raise ShapeMismatch("combined z and decomposition disagree on p")


def fit_naive(combined: CombinedZ, eig: EigenLD,
              opts: SviOptions | None = None, rng=None,
              include_direct: bool = True) -> MediationResult:
    """Single-step joint fit with a dense unmediated term.

    The p-dimensional direct-effect vector is represented by one
    coefficient per eigen direction (an equivalent likelihood with far
    better conditioning), so the design is the K whitened eQTL columns
    followed by ``n**-0.5 diag(D)``.  ``include_direct=False`` drops the
    dense block, leaving the mediation-only regression the other variants
    build on.
    """
    _check_combined(combined, eig)
    t0 = time.perf_counter()
    opts = opts or SviOptions()
    rng = np.random.default_rng(opts.seed if rng is None else rng)
    y_white = rotate_to_eigen(eig, combined.gwas.z)
    H = rotate_columns(eig, np.column_stack([sv.z for sv in combined.eqtls]))
    gene_ids = [sv.trait_id for sv in combined.eqtls]
    cov_ids = []
    design = H
    if include_direct:
        direct = panel_scale(eig.n_ref) * np.diag(eig.D)
        design = np.hstack([H, direct])
        cov_ids = [f"direct_eigen_{i}" for i in range(eig.rank)]
    posterior, _ = _spike_slab_regression(y_white, design,
                                          gene_ids + cov_ids, eig, opts, rng)
    return _pack(posterior, gene_ids, cov_ids, "naive",
                 {"runtime_s": time.perf_counter() - t0})


def fit_fact(combined: CombinedZ, eig: EigenLD, L_max: int = 10,
             opts: SviOptions | None = None, rng=None,
             factor_opts: FactorOptions | None = None) -> MediationResult:
    """Two-step fit: factor covariates first, then the joint regression.

    Step 1 factorizes the combined z matrix and keeps factors whose
    loadings are not shared between the GWAS and eQTL sides (shared ones
    look like genuine mediation).  Step 2 regresses the GWAS z vector on
    the eQTL z vectors plus the surviving covariates, spike-slab on both.
    """
    _check_combined(combined, eig)
    t0 = time.perf_counter()
    opts = opts or SviOptions()
    rng = np.random.default_rng(opts.seed if rng is None else rng)
    model = factorize_z(combined, eig, L_max, factor_opts, rng)
    unmed = select_unmediated(model)
    y_white = rotate_to_eigen(eig, combined.gwas.z)
    H = rotate_columns(eig, np.column_stack([sv.z for sv in combined.eqtls]))
    gene_ids = [sv.trait_id for sv in combined.eqtls]
    cov_ids = [f"factor_{l}" for l in unmed.selected]
    design = H if unmed.count == 0 else np.hstack(
        [H, rotate_columns(eig, unmed.z_unmed)])
    posterior, _ = _spike_slab_regression(y_white, design,
                                          gene_ids + cov_ids, eig, opts, rng)
    return _pack(posterior, gene_ids, cov_ids, "fact",
                 {"runtime_s": time.perf_counter() - t0,
                  "rejected_factors": len(unmed.rejected)})


def fit_proj(combined: CombinedZ, eig: EigenLD, null_panel: GenotypePanel,
             L_max: int = 10, opts: SviOptions | None = None, rng=None,
             factor_opts: FactorOptions | None = None,
             max_cross_corr: float | None = None) -> MediationResult:
    """Two-step fit through the null-block projection.

    Step 1 projects the combined matrix onto a disjoint LD block and
    factorizes the projection; the factors can only carry non-genetic
    structure.  Step 2 subtracts the reconstructed non-genetic GWAS
    component from the GWAS z vector and fits the mediation terms alone.
    """
    _check_combined(combined, eig)
    t0 = time.perf_counter()
    opts = opts or SviOptions()
    rng = np.random.default_rng(opts.seed if rng is None else rng)
    null_eig = svd_panel(null_panel)
    projected = project_to_null_block(combined, eig, null_panel,
                                      max_cross_corr=max_cross_corr)
    unmed = factorize_projected(projected, null_eig, eig, L_max,
                                factor_opts, rng)
    z_adj = combined.gwas.z - unmed.model.gwas_component()
    y_white = rotate_to_eigen(eig, z_adj)
    H = rotate_columns(eig, np.column_stack([sv.z for sv in combined.eqtls]))
    gene_ids = [sv.trait_id for sv in combined.eqtls]
    posterior, _ = _spike_slab_regression(y_white, H, gene_ids, eig, opts, rng)
    result = _pack(posterior, gene_ids, [], "proj",
                   {"runtime_s": time.perf_counter() - t0,
                    "n_projected_factors": unmed.model.L})
    # report the subtracted factors' GWAS loadings for inspection
    covs = tuple(CovariateEffect(covariate_id=f"projected_factor_{l}",
                                 gamma_mean=float(unmed.model.Omega[0, l]),
                                 gamma_pip=float(unmed.model.omega_pip[0, l]))
                 for l in range(unmed.model.L))
    return MediationResult(genes=result.genes, covariates=covs,
                           method_tag="proj", diagnostics=result.diagnostics)
