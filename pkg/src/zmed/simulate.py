"""Ground-truth scenario generation for benchmarking.

A scenario draws sparse eQTL architectures per gene, mediation effects for
a causal subset, a shared random effect (genetic polygenic bias or a
non-genetic confounder), missing-gene corruption, and observation noise,
then emits summary statistics.  Estimators never see the latent genetic
components, only the z-scores (and, for the observed-expression baseline,
the noisy expression and phenotype vectors).

Every variance-carrying component is rescaled exactly to its configured
share, so the unit variance budget of expression and phenotype holds
sharply rather than only in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigInvalid, NumericalFailure
from .linalg import GenotypePanel, standardize
from .sumstats import CombinedZ, combine, summarize_trait


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream: replicate ``index`` of experiment ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True)
class DirectionalPleiotropy:
    """Polygenic bias scheme: u = X gamma with gamma_j ~ +-magnitude + N(0, noise_sd^2)."""

    magnitude: float = 1.0
    noise_sd: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of the generative model; see :func:`simulate_scenario`."""

    K: int
    n_causal: int
    d: int = 3
    g_g2: float = 0.3
    h_m2: float = 0.3
    g_u2: float = 0.0
    h_u2: float = 0.0
    missing_frac: float = 0.0
    variance_model: str = "symmetric"
    pleiotropy: DirectionalPleiotropy | None = None
    gene_windows: tuple | None = None
    window_mode: str = "tiled"
    seed: int = 0

    def validate(self):
        checks = [
            (self.K >= 1, "K >= 1"),
            (0 <= self.n_causal <= self.K, "n_causal <= K"),
            (self.d >= 1, "d >= 1"),
            (0.0 < self.g_g2 < 1.0, "g_g2 in (0, 1)"),
            (0.0 <= self.h_m2 < 1.0, "h_m2 in [0, 1)"),
            (0.0 <= self.g_u2 < 1.0, "g_u2 in [0, 1)"),
            (0.0 <= self.h_u2 < 1.0, "h_u2 in [0, 1)"),
            (0.0 <= self.missing_frac < 1.0, "missing_frac in [0, 1)"),
            (self.g_g2 + self.g_u2 < 1.0, "g_g2 + g_u2 < 1"),
            (self.h_m2 + self.h_u2 < 1.0, "h_m2 + h_u2 < 1"),
            (self.variance_model in ("symmetric", "asymmetric"),
             "variance_model in {symmetric, asymmetric}"),
            (not (self.h_m2 > 0 and self.n_causal == 0),
             "n_causal >= 1 when h_m2 > 0"),
        ]
        for ok, name in checks:
            if not ok:
                raise ConfigInvalid(f"constraint violated: {name}")


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    """All latent quantities of one simulated scenario.

    ``xi`` holds the effective random-effect loadings after exact rescaling
    (phenotype loading first, then one per gene), so that the u-components
    reproduce as ``u * xi`` exactly.  ``alpha`` keeps the original genetic
    architecture even for missing genes; ``missing_set`` marks the genes
    whose observed expression had its genetic component replaced.
    """

    alpha: np.ndarray
    beta: np.ndarray
    causal_set: frozenset
    gamma: np.ndarray | None
    u: np.ndarray
    xi: np.ndarray
    missing_set: frozenset
    tau0_2: float
    sigma0_2: float
    gene_windows: tuple


@dataclass(frozen=True, eq=False)
class ScenarioData:
    """Simulated observables: summary statistics plus (for the
    observed-expression baseline only) individual-level measurements."""

    combined: CombinedZ
    observed_expression: np.ndarray
    observed_phenotype: np.ndarray
    truth: ScenarioTruth


def synthetic_panel(n: int, p: int, n_blocks: int = 5, rho: float = 0.5,
                    rng=None, id_prefix: str = "snp") -> GenotypePanel:
    """Per-block AR(1)-correlated standard normal panel, then standardized.

    Stands in for an external reference panel at desk scale: within a block
    corr(x_i, x_j) = rho^|i-j|, across blocks exactly independent draws.
    """
    rng = np.random.default_rng(rng)
    if not (0.0 <= rho < 1.0):
        raise ConfigInvalid("rho in [0, 1)")
    edges = np.linspace(0, p, n_blocks + 1).astype(int)
    bounds = tuple((int(edges[b]), int(edges[b + 1])) for b in range(n_blocks))
    raw = np.empty((n, p))
    carry = np.sqrt(1.0 - rho ** 2)
    for start, end in bounds:
        e = rng.standard_normal((n, end - start))
        raw[:, start] = e[:, 0]
        for j in range(1, end - start):
            raw[:, start + j] = rho * raw[:, start + j - 1] + carry * e[:, j]
    ids = tuple(f"{id_prefix}{j}" for j in range(p))
    return standardize(raw, block_bounds=bounds, snp_ids=ids)


def assign_gene_windows(panel: GenotypePanel, K: int,
                        mode: str = "tiled") -> tuple:
    """Contiguous SNP windows within blocks, one per gene.

    ``tiled`` allocates genes to blocks proportionally to block size and
    splits each block's span evenly (disjoint windows).  ``block`` gives
    every gene the full span of its (round-robin assigned) block, the
    desk-scale proxy for overlapping cis-windows: genes in one block then
    draw causal SNPs from a shared span and become genetically dependent
    through LD.
    """
    if mode == "block":
        return tuple(panel.block_bounds[k % len(panel.block_bounds)]
                     for k in range(K))
    if mode != "tiled":
        raise ConfigInvalid("window mode in {tiled, block}")
    sizes = np.array([e - s for s, e in panel.block_bounds], dtype=float)
    share = sizes / sizes.sum() * K
    counts = np.floor(share).astype(int)
    rest = K - counts.sum()
    order = np.argsort(-(share - counts))
    for b in order[:rest]:
        counts[b] += 1
    windows = []
    for (start, end), c in zip(panel.block_bounds, counts):
        if c == 0:
            continue
        width = (end - start) // c
        if width < 1:
            raise ConfigInvalid(
                f"block [{start},{end}) too small for {c} gene windows")
        for i in range(c):
            windows.append((start + i * width, start + (i + 1) * width))
    return tuple(windows)


def _rescale(v: np.ndarray, target_var: float) -> tuple[np.ndarray, float]:
    """Scale v so its population variance equals target_var exactly."""
    if target_var == 0.0:
        return np.zeros_like(v), 0.0
    var = float(np.mean((v - v.mean()) ** 2))
    if var <= 0.0:
        raise NumericalFailure("cannot rescale a constant vector to positive variance")
    factor = np.sqrt(target_var / var)
    return v * factor, factor


def simulate_polygenic_bias(panel: GenotypePanel, magnitude: float,
                            noise_sd: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Directional polygenic bias ``u = X gamma``.

    The direction is sampled once per scenario: gamma_j ~ gbar + N(0,
    noise_sd^2) with gbar = +-magnitude.  Returns (u, gamma).
    """
    if noise_sd < 0:
        raise ConfigInvalid("noise_sd >= 0")
    gbar = float(magnitude) * (1.0 if rng.random() < 0.5 else -1.0)
    gamma = gbar + noise_sd * rng.standard_normal(panel.p)
    return panel.values @ gamma, gamma


def simulate_scenario(panel: GenotypePanel, cfg: ScenarioConfig,
                      rng=None) -> ScenarioData:
    """Run the full generative scheme and emit summary statistics.

    Order of operations: sparse eQTL effects and exact-variance genetic
    expression components; mediation effects propagated to the phenotype's
    genetic component (under the asymmetric variance model the expression
    noise delta is propagated along with it); shared random-effect
    components on genes and phenotype, each rescaled exactly; genetic
    components of missing genes replaced by i.i.d. noise of matching
    per-entry variance (after propagation, so a missing causal gene still
    drives the phenotype); observation noise closing both unit variance
    budgets; summary statistics of everything.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    n, p, K = panel.n, panel.p, cfg.K
    windows = cfg.gene_windows or assign_gene_windows(panel, K, cfg.window_mode)
    if len(windows) != K:
        raise ConfigInvalid("gene_windows length must equal K")
    for start, end in windows:
        if end - start < cfg.d:
            raise ConfigInvalid(f"gene window [{start},{end}) narrower than d={cfg.d}")

    tau0_2 = 1.0 - cfg.g_g2 - cfg.g_u2
    sigma0_2 = 1.0 - cfg.h_m2 - cfg.h_u2

    # 1. heritable expression components with exact variance g_g2
    alpha = np.zeros((p, K))
    for k, (start, end) in enumerate(windows):
        snps = rng.choice(np.arange(start, end), size=cfg.d, replace=False)
        alpha[snps, k] = rng.normal(0.0, np.sqrt(cfg.g_g2 / cfg.d), size=cfg.d)
    m_gen = panel.values @ alpha
    for k in range(K):
        m_gen[:, k], factor = _rescale(m_gen[:, k], cfg.g_g2)
        alpha[:, k] *= factor

    # 2. mediation effects and the phenotype's genetic component
    beta = np.zeros(K)
    causal = frozenset()
    if cfg.h_m2 > 0 and cfg.n_causal > 0:
        picked = rng.choice(K, size=cfg.n_causal, replace=False)
        beta[picked] = rng.normal(0.0, np.sqrt(cfg.h_m2 / cfg.n_causal),
                                  size=cfg.n_causal)
        causal = frozenset(int(k) for k in picked)

    delta = rng.normal(0.0, np.sqrt(tau0_2), size=(n, K)) if tau0_2 > 0 \
        else np.zeros((n, K))
    mediator = m_gen + delta if cfg.variance_model == "asymmetric" else m_gen
    y_gen = mediator @ beta
    if cfg.h_m2 > 0 and causal:
        y_gen, factor = _rescale(y_gen, cfg.h_m2)
        beta *= factor
    else:
        y_gen = np.zeros(n)

    # 3-4. shared random effect on genes and phenotype, exact variances
    if cfg.pleiotropy is not None:
        u, gamma = simulate_polygenic_bias(
            panel, cfg.pleiotropy.magnitude, cfg.pleiotropy.noise_sd, rng)
    else:
        u, gamma = rng.standard_normal(n), None
    xi = np.zeros(K + 1)
    m_conf = np.zeros((n, K))
    if cfg.g_u2 > 0:
        xi_genes = rng.standard_normal(K)
        for k in range(K):
            m_conf[:, k], f = _rescale(u * xi_genes[k], cfg.g_u2)
            xi[1 + k] = xi_genes[k] * f
    y_conf = np.zeros(n)
    if cfg.h_u2 > 0:
        xi0 = rng.standard_normal()
        y_conf, f = _rescale(u * xi0, cfg.h_u2)
        xi[0] = xi0 * f

    # 5. missing genes: genetic component replaced by matching noise
    n_missing = int(round(cfg.missing_frac * K))
    missing = frozenset()
    if n_missing > 0:
        missing = frozenset(int(k) for k in rng.choice(K, size=n_missing,
                                                       replace=False))
        for k in missing:
            m_gen[:, k] = rng.normal(0.0, np.sqrt(cfg.g_g2), size=n)

    # 6-7. observation noise and the observed variables
    expression = m_gen + m_conf + delta
    noise = rng.normal(0.0, np.sqrt(sigma0_2), size=n) if sigma0_2 > 0 \
        else np.zeros(n)
    phenotype = y_gen + y_conf + noise

    gwas = summarize_trait(panel, phenotype, "gwas")
    eqtls = [summarize_trait(panel, expression[:, k], f"gene_{k}")
             for k in range(K)]
    truth = ScenarioTruth(alpha=alpha, beta=beta, causal_set=causal,
                          gamma=gamma, u=u, xi=xi, missing_set=missing,
                          tau0_2=tau0_2, sigma0_2=sigma0_2,
                          gene_windows=tuple(windows))
    return ScenarioData(combined=combine(gwas, eqtls),
                        observed_expression=expression,
                        observed_phenotype=phenotype,
                        truth=truth)


def polygenic_config(**overrides) -> ScenarioConfig:
    """Strong directional polygenic bias with half the genes missing."""
    base = dict(K=150, n_causal=3, d=3, g_g2=0.3, h_m2=0.3, g_u2=0.0,
                h_u2=0.3, missing_frac=0.5, variance_model="symmetric",
                pleiotropy=DirectionalPleiotropy(), window_mode="block",
                seed=0)
    base.update(overrides)
    return ScenarioConfig(**base)


def confounded_config(g_u2: float = 0.3, h_u2: float = 0.3,
                      **overrides) -> ScenarioConfig:
    """Genes and phenotype share a non-genetic confounder; genes fully
    observed, a single causal gene out of 100."""
    base = dict(K=100, n_causal=1, d=3, g_g2=0.3, h_m2=0.3, g_u2=g_u2,
                h_u2=h_u2, missing_frac=0.0, variance_model="symmetric",
                pleiotropy=None, window_mode="block", seed=0)
    base.update(overrides)
    return ScenarioConfig(**base)


def scenario_polygenic(panel: GenotypePanel, cfg: ScenarioConfig | None = None,
                       rng=None, **overrides) -> ScenarioData:
    cfg = cfg or polygenic_config(**overrides)
    if cfg.pleiotropy is None:
        cfg = replace(cfg, pleiotropy=DirectionalPleiotropy())
    return simulate_scenario(panel, cfg, rng)


def scenario_confounded(panel: GenotypePanel, cfg: ScenarioConfig | None = None,
                        rng=None, **overrides) -> ScenarioData:
    cfg = cfg or confounded_config(**overrides)
    if cfg.pleiotropy is not None:
        cfg = replace(cfg, pleiotropy=None)
    return simulate_scenario(panel, cfg, rng)


def single_locus_trails(n: int, alpha: float, beta: float, gamma: float,
                        tau: float, sigma: float, variance_model: str,
                        rng, reps: int = 5000) -> dict:
    """Monte-Carlo draws of the mediated and direct single-SNP estimates.

    Each replicate draws an independent phenotype for each trail so the two
    sampling distributions can be compared.  Under the symmetric model the
    expression noise never reaches the phenotype and both estimates follow
    N(alpha*beta + gamma, sigma^2/n).  Under the asymmetric model the noise
    is transmitted: through the mediation coefficient for the mediated
    trail (variance (beta^2 tau^2 + sigma^2)/n) and with unit loading for
    the direct trail (variance (tau^2 + sigma^2)/n).
    """
    if variance_model not in ("symmetric", "asymmetric"):
        raise ConfigInvalid("variance_model in {symmetric, asymmetric}")
    x = rng.standard_normal((reps, n))
    x = x - x.mean(axis=1, keepdims=True)
    x = x / np.sqrt(np.mean(x ** 2, axis=1, keepdims=True))

    eps_m = sigma * rng.standard_normal((reps, n))
    eps_d = sigma * rng.standard_normal((reps, n))
    if variance_model == "symmetric":
        y_med = x * (alpha * beta + gamma) + eps_m
        y_dir = x * (alpha * beta + gamma) + eps_d
    else:
        delta_m = tau * rng.standard_normal((reps, n))
        delta_d = tau * rng.standard_normal((reps, n))
        y_med = (x * alpha + delta_m) * beta + x * gamma + eps_m
        y_dir = x * (alpha * beta + gamma) + delta_d + eps_d

    # mediated trail: regress y on the noiseless eQTL prediction mu = x*alpha,
    # then multiply back by alpha; direct trail: marginal SNP effect.
    mediated = alpha * np.sum(x * alpha * y_med, axis=1) / (n * alpha ** 2)
    direct = np.sum(x * y_dir, axis=1) / n
    return {"mediated": mediated, "direct": direct}
