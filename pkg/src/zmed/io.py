"""File formats: TSV for matrices and tables, JSON sidecars for metadata.

Panel files hold one row per individual and one column per SNP under a
header of SNP identifiers, with LD blocks in ``<stem>.blocks.json``.
Summary files hold ``snp_id, effect, se, z`` columns with trait metadata in
``<stem>.meta.json``.  Floats are written with 17 significant digits so a
write-read round trip is exact.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError
from .linalg import GenotypePanel, standardize
from .simulate import DirectionalPleiotropy, ScenarioConfig, ScenarioTruth
from .sumstats import SummaryVector


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _sidecar(path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + suffix)


def write_panel(panel: GenotypePanel, path) -> None:
    """Write panel values (already standardized dosages) plus blocks sidecar."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("\t".join(panel.snp_ids) + "\n")
        for row in panel.values:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    blocks = {"blocks": [[int(s), int(e)] for s, e in panel.block_bounds]}
    _sidecar(path, ".blocks.json").write_text(json.dumps(blocks))


def load_panel(path) -> GenotypePanel:
    """Read a panel TSV (raw dosages); standardization happens here."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().rstrip("\n")
        if not header:
            raise ParseError("empty panel file", line=1)
        snp_ids = header.split("\t")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(snp_ids):
                raise ParseError(
                    f"expected {len(snp_ids)} columns, found {len(parts)}",
                    line=lineno)
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    raw = np.asarray(rows, dtype=np.float64)
    sidecar = _sidecar(path, ".blocks.json")
    blocks = None
    if sidecar.exists():
        blocks = [tuple(b) for b in json.loads(sidecar.read_text())["blocks"]]
    return standardize(raw, block_bounds=blocks, snp_ids=snp_ids)


SUMMARY_COLUMNS = ("snp_id", "effect", "se", "z")


def write_summary(sv: SummaryVector, path) -> None:
    path = Path(path)
    ids = sv.snp_ids or tuple(f"snp{j}" for j in range(sv.p))
    with path.open("w") as fh:
        fh.write("\t".join(SUMMARY_COLUMNS) + "\n")
        for j in range(sv.p):
            fh.write("\t".join([ids[j], _fmt(sv.effect[j]), _fmt(sv.se[j]),
                                _fmt(sv.z[j])]) + "\n")
    meta = {"trait_id": sv.trait_id, "n": int(sv.n_samples)}
    _sidecar(path, ".meta.json").write_text(json.dumps(meta))


def load_summary(path) -> SummaryVector:
    """Read a summary TSV; NaN or non-finite statistics are parse errors."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().rstrip("\n").split("\t")
        missing = [c for c in SUMMARY_COLUMNS if c not in header]
        if missing:
            raise SchemaError(missing)
        idx = {c: header.index(c) for c in SUMMARY_COLUMNS}
        ids, effect, se, z = [], [], [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(header):
                raise ParseError(
                    f"expected {len(header)} columns, found {len(parts)}",
                    line=lineno)
            try:
                e, s, zz = (float(parts[idx["effect"]]),
                            float(parts[idx["se"]]),
                            float(parts[idx["z"]]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if not (np.isfinite(e) and np.isfinite(s) and np.isfinite(zz)):
                raise ParseError("non-finite statistic", line=lineno)
            ids.append(parts[idx["snp_id"]])
            effect.append(e)
            se.append(s)
            z.append(zz)
    meta_path = _sidecar(path, ".meta.json")
    trait_id, n = path.stem, 0
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        trait_id = meta.get("trait_id", trait_id)
        n = int(meta.get("n", 0))
    return SummaryVector(effect=np.array(effect), se=np.array(se),
                         z=np.array(z), n_samples=n, trait_id=trait_id,
                         snp_ids=tuple(ids))


def write_truth(truth: ScenarioTruth, cfg: ScenarioConfig, path) -> None:
    """Ground truth and config echo for scoring simulated scenarios."""
    payload = {
        "causal": {str(k): int(np.sign(truth.beta[k]))
                   for k in sorted(truth.causal_set)},
        "missing": sorted(truth.missing_set),
        "beta": [float(b) for b in truth.beta],
        "tau0_2": truth.tau0_2,
        "sigma0_2": truth.sigma0_2,
        "gene_windows": [[int(s), int(e)] for s, e in truth.gene_windows],
        "config": _config_dict(cfg),
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def _config_dict(cfg: ScenarioConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if cfg.pleiotropy is not None:
        d["pleiotropy"] = dataclasses.asdict(cfg.pleiotropy)
    if cfg.gene_windows is not None:
        d["gene_windows"] = [[int(s), int(e)] for s, e in cfg.gene_windows]
    return d


def config_from_dict(d: dict) -> ScenarioConfig:
    d = dict(d)
    pl = d.get("pleiotropy")
    if isinstance(pl, dict):
        if pl.get("kind") == "none":
            d["pleiotropy"] = None
        else:
            d["pleiotropy"] = DirectionalPleiotropy(
                magnitude=float(pl.get("magnitude", 1.0)),
                noise_sd=float(pl.get("noise_sd", 10.0)))
    if d.get("gene_windows") is not None:
        d["gene_windows"] = tuple((int(s), int(e)) for s, e in d["gene_windows"])
    known = set(ScenarioConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise SchemaError(sorted(unknown))
    return ScenarioConfig(**d)


def write_matrix(ids, columns: dict, path) -> None:
    """Generic TSV: a label column followed by named float columns."""
    path = Path(path)
    names = list(columns)
    with path.open("w") as fh:
        fh.write("\t".join(["id"] + names) + "\n")
        for i, label in enumerate(ids):
            vals = [_fmt(columns[c][i]) for c in names]
            fh.write("\t".join([str(label)] + vals) + "\n")


def write_result(result, path) -> None:
    """Mediation / baseline result table: gene_id, beta_mean, beta_pip, sign."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("gene_id\tbeta_mean\tbeta_pip\tsign\n")
        for g in result.genes:
            fh.write(f"{g.gene_id}\t{_fmt(g.beta_mean)}\t{_fmt(g.beta_pip)}\t"
                     f"{g.beta_sign}\n")


def write_report(report, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("scenario\tmethod\treplicate\tauprc\n")
        for scenario, method, rep, auprc in report.rows:
            fh.write(f"{scenario}\t{method}\t{rep}\t{_fmt(auprc)}\n")


def read_report_rows(path):
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().rstrip("\n").split("\t")
        expected = ["scenario", "method", "replicate", "auprc"]
        missing = [c for c in expected if c not in header]
        if missing:
            raise SchemaError(missing)
        idx = {c: header.index(c) for c in expected}
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            try:
                rows.append((parts[idx["scenario"]], parts[idx["method"]],
                             int(parts[idx["replicate"]]),
                             float(parts[idx["auprc"]])))
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return rows
