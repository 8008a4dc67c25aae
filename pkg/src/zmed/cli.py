"""Command-line surface: simulate, fit, benchmark, report.

JSON configures, TSV carries data; every run is deterministic given its
seed.  Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, io
from .baselines import egger, ivw, otwas, stwas
from .bench import ALL_METHODS, ExperimentSpec, run_experiment
from .errors import DataError, NumericalError, UsageError, ZmedError
from .linalg import rotate_to_eigen, svd_panel
from .mediate import fit_fact, fit_naive, fit_proj
from .simulate import confounded_config, polygenic_config, simulate_scenario, synthetic_panel
from .ssvi import SviOptions
from .sumstats import combine

FIT_METHODS = ("naive", "fact", "proj", "stwas", "ivw", "egger", "otwas")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code scheme."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="zmed", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"zmed {__version__}")
    sub = parser.add_subparsers(dest="subcommand")

    sim = sub.add_parser("simulate", help="generate a scenario and write its files")
    sim.add_argument("--config", required=True, help="scenario config JSON")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--panel", default=None,
                     help="existing panel TSV (otherwise synthesized)")
    sim.add_argument("--write-observed", action="store_true",
                     help="also write expression.tsv and phenotype.tsv")

    fit = sub.add_parser("fit", help="run one estimator on summary files")
    fit.add_argument("--method", required=True, choices=FIT_METHODS)
    fit.add_argument("--panel", required=True)
    fit.add_argument("--gwas", required=True)
    fit.add_argument("--eqtl", required=True, nargs="+")
    fit.add_argument("--out", required=True)
    fit.add_argument("--null-panel", default=None)
    fit.add_argument("--expression", default=None,
                     help="observed expression TSV (otwas only)")
    fit.add_argument("--phenotype", default=None,
                     help="observed phenotype TSV (otwas only)")
    fit.add_argument("--svi-config", default=None)
    fit.add_argument("--l-max", type=int, default=10)
    fit.add_argument("--seed", type=int, default=None)

    ben = sub.add_parser("benchmark", help="simulate + fit + score replicates")
    ben.add_argument("--scenario", required=True,
                     choices=("polygenic", "confounded", "custom"))
    ben.add_argument("--config", default=None, help="scenario config JSON")
    ben.add_argument("--replicates", type=int, default=None)
    ben.add_argument("--seed", type=int, default=None)
    ben.add_argument("--out", required=True)
    ben.add_argument("--methods", nargs="+", default=None,
                     choices=list(ALL_METHODS))
    ben.add_argument("--threads", type=int, default=1)

    rep = sub.add_parser("report", help="mean +- sd table from a report TSV")
    rep.add_argument("--in", dest="infile", required=True)
    return parser


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from exc


def _require_seed(flag_seed, cfg_value):
    # flags win over config; one of the two must provide the seed
    if flag_seed is not None:
        return int(flag_seed)
    if cfg_value is not None:
        return int(cfg_value)
    raise UsageError("missing required flag: --seed")


def _cmd_simulate(args) -> int:
    raw = _load_json(args.config)
    panel_spec = raw.pop("panel", {})
    seed = _require_seed(args.seed, raw.get("seed"))
    raw["seed"] = seed
    cfg = io.config_from_dict(raw)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.panel:
        panel = io.load_panel(args.panel)
        synthetic = False
    else:
        panel = synthetic_panel(
            n=int(panel_spec.get("n", 300)),
            p=int(panel_spec.get("p", 500)),
            n_blocks=int(panel_spec.get("blocks", 5)),
            rho=float(panel_spec.get("rho", 0.5)),
            rng=np.random.default_rng(np.random.SeedSequence([seed, 2 ** 30])))
        synthetic = True

    data = simulate_scenario(panel, cfg)
    io.write_summary(data.combined.gwas, out / "gwas.tsv")
    for k, sv in enumerate(data.combined.eqtls):
        io.write_summary(sv, out / f"eqtl_{k}.tsv")
    io.write_truth(data.truth, cfg, out / "truth.json")
    if synthetic:
        io.write_panel(panel, out / "panel.tsv")
    if args.write_observed:
        ids = [sv.trait_id for sv in data.combined.eqtls]
        io.write_matrix(range(panel.n),
                        {ids[k]: data.observed_expression[:, k]
                         for k in range(len(ids))},
                        out / "expression.tsv")
        io.write_matrix(range(panel.n),
                        {"phenotype": data.observed_phenotype},
                        out / "phenotype.tsv")
    print(f"wrote scenario with K={cfg.K} genes to {out}")
    return 0


def _load_observed_matrix(path):
    with Path(path).open() as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t")[1:] for line in fh]
    return header[1:], np.asarray(rows, dtype=np.float64)


def _cmd_fit(args) -> int:
    panel = io.load_panel(args.panel)
    gwas = io.load_summary(args.gwas)
    eqtls = [io.load_summary(p) for p in args.eqtl]
    combined = combine(gwas, eqtls)
    eig = svd_panel(panel)
    svi = SviOptions.from_dict(_load_json(args.svi_config)) if args.svi_config \
        else SviOptions()
    if args.seed is not None:
        svi = replace(svi, seed=int(args.seed))

    method = args.method
    if method in ("naive", "fact", "proj"):
        if method == "naive":
            result = fit_naive(combined, eig, svi)
        elif method == "fact":
            result = fit_fact(combined, eig, args.l_max, svi)
        else:
            if not args.null_panel:
                raise UsageError("missing required flag: --null-panel")
            null_panel = io.load_panel(args.null_panel)
            result = fit_proj(combined, eig, null_panel, args.l_max, svi)
        io.write_result(result, args.out)
    else:
        rows = []
        if method == "otwas":
            if not (args.expression and args.phenotype):
                raise UsageError(
                    "missing required flag: --expression/--phenotype")
            ids, expr = _load_observed_matrix(args.expression)
            _, pheno = _load_observed_matrix(args.phenotype)
            pheno = pheno[:, 0]
            for k, sv in enumerate(eqtls):
                col = ids.index(sv.trait_id) if sv.trait_id in ids else k
                rows.append(otwas(expr[:, col], pheno, gene_id=sv.trait_id))
        else:
            fn = {"stwas": stwas, "ivw": ivw, "egger": egger}[method]
            eta_g = rotate_to_eigen(eig, gwas.z)
            for sv in eqtls:
                rows.append(fn(rotate_to_eigen(eig, sv.z), gene_id=sv.trait_id,
                               eta_gwas=eta_g))
        with Path(args.out).open("w") as fh:
            fh.write("gene_id\tbeta_mean\tbeta_pip\tsign\n")
            for s in rows:
                fh.write(f"{s.gene_id}\t{io._fmt(s.statistic)}\t"
                         f"{io._fmt(abs(s.statistic))}\t{s.sign}\n")
    print(f"wrote {method} results to {args.out}")
    return 0


def _cmd_benchmark(args) -> int:
    raw = _load_json(args.config) if args.config else {}
    seed = _require_seed(args.seed, raw.get("seed"))
    panel_spec = raw.pop("panel", {})
    replicates = args.replicates if args.replicates is not None \
        else int(raw.pop("replicates", 20))
    methods = tuple(args.methods) if args.methods else ALL_METHODS

    scenario_fields = {k: v for k, v in raw.items() if k != "seed"}
    if args.scenario == "polygenic":
        cfg = polygenic_config(**scenario_fields, seed=seed)
    elif args.scenario == "confounded":
        cfg = confounded_config(**scenario_fields, seed=seed)
    else:
        scenario_fields["seed"] = seed
        cfg = io.config_from_dict(scenario_fields)

    spec = ExperimentSpec(
        scenario=args.scenario, config=cfg, methods=methods,
        replicates=replicates, seed=seed,
        panel_n=int(panel_spec.get("n", 300)),
        panel_p=int(panel_spec.get("p", 500)),
        panel_blocks=int(panel_spec.get("blocks", 5)),
        panel_rho=float(panel_spec.get("rho", 0.5)),
        null_p=int(panel_spec.get("null_p", 300)),
        threads=args.threads)
    report = run_experiment(spec)
    io.write_report(report, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return 0


def _cmd_report(args) -> int:
    rows = io.read_report_rows(args.infile)
    groups: dict = {}
    for scenario, method, _, auprc in rows:
        groups.setdefault((scenario, method), []).append(auprc)
    print(f"{'scenario':<12} {'method':<8} {'mean':>8} {'sd':>8} {'n':>4}")
    for (scenario, method), vals in sorted(groups.items()):
        arr = np.array(vals)
        ok = arr[np.isfinite(arr)]
        mean = np.mean(ok) if ok.size else float("nan")
        sd = np.std(ok, ddof=1) if ok.size > 1 else 0.0
        print(f"{scenario:<12} {method:<8} {mean:>8.4f} {sd:>8.4f} {ok.size:>4}")
    return 0


def parse_and_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            raise UsageError(parser.format_usage())
        handler = {"simulate": _cmd_simulate, "fit": _cmd_fit,
                   "benchmark": _cmd_benchmark, "report": _cmd_report}
        return handler[args.subcommand](args)
    except UsageError as exc:
        print(f"zmed.errors.UsageError: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"zmed.errors.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"zmed.errors.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"zmed.errors.DataError: {exc}", file=sys.stderr)
        return 2
    except ZmedError as exc:  # anything uncategorized
        print(f"zmed.errors.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
