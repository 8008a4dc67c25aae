"""Summary-statistics causal mediation analysis.

Simulates GWAS/eQTL summary data under a controlled generative model, fits
sparse Bayesian mediation models in the eigen space of the LD matrix, and
benchmarks the estimators against standard gene-level tests with a
sign-aware precision-recall score.
"""

__version__ = "0.1.0"

from . import baselines, bench, errors, factorize, io, linalg, mediate, simulate, ssvi, sumstats
from .bench import ExperimentSpec, auprc_signed, run_experiment
from .factorize import factorize_z, project_to_null_block, select_unmediated
from .linalg import EigenLD, GenotypePanel, rotate_to_eigen, standardize, svd_panel
from .mediate import MediationResult, fit_fact, fit_naive, fit_proj
from .simulate import ScenarioConfig, simulate_scenario, synthetic_panel
from .ssvi import SpikeSlabPrior, SviOptions, build_problem
from .sumstats import CombinedZ, SummaryVector, combine, summarize_trait

__all__ = [
    "__version__",
    "CombinedZ", "EigenLD", "ExperimentSpec", "GenotypePanel",
    "MediationResult", "ScenarioConfig", "SpikeSlabPrior", "SummaryVector",
    "SviOptions", "auprc_signed", "build_problem", "combine",
    "factorize_z", "fit_fact", "fit_naive", "fit_proj",
    "project_to_null_block", "rotate_to_eigen", "run_experiment",
    "select_unmediated", "simulate_scenario", "standardize",
    "summarize_trait", "svd_panel", "synthetic_panel",
]
