"""Command-line entry point.

Every command reads one JSON run configuration, recomputes whatever upstream
stages it needs (data, ranks, graph) from that configuration, writes its
artifacts to the output directory and finishes with ``manifest.json``.  The
manifest embeds the fully resolved configuration, so

    rmdgraph <command> --config out/manifest.json --out again/

reproduces the artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
import zlib
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .dataset import (
    DataSet,
    MixtureSpec,
    fig2_mixture,
    fig5_mixture,
    gen_gaussian_mixture,
    gen_two_moons_gaussian,
    load_csv,
    load_json,
    save_csv,
    save_json,
    subsample_unbalanced,
)
from .errors import ConfigError, DataError, GraphError, NumericalError
from .graphs import GraphFamilyParams, build_baseline, build_knn, build_rmd, mean_knn_distance
from .limits import AnalyticDensity, sqrt_rule, verify_cut_limit, verify_rank_convergence
from .metrics import clustering_error, cut_position_sweep, objective_value, partition_cut_position, write_cut_sweeps
from .modelsel import delta_sweep, flat_spots, reference_graph, report_json, select, sweep
from .rank import compute_ranks
from .spectral import spectral_cluster
from .ssl import grf_solve, one_hot, predict, sample_labeled_mask

log = logging.getLogger("rmdgraph")

SCHEMA_VERSION = 1
OUT_ENV = "RMDGRAPH_OUT"
DEFAULT_OUT = "rmdgraph-out"
COMMANDS = ("gen-data", "rank", "build-graph", "cluster", "ssl", "select", "sweep-delta", "cut-sweep", "verify-limits")
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3


# ---------------------------------------------------------------------------
# Configuration schema
# ---------------------------------------------------------------------------

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataConfig(_Section):
    source: Literal["mixture", "two-moons", "csv", "json"] = Field(
        "mixture", description="where points come from: a Gaussian mixture, the two-moons set, or a file")
    preset: Optional[Literal["fig2", "fig5"]] = Field(
        "fig2", description="named mixture (fig2: .85/.15 pair, fig5: 2:8:1 triple); ignored if `mixture` is set")
    mixture: Optional[dict] = Field(None, description="explicit mixture {weights, means, covs}")
    n: int = Field(1000, ge=2, description="sample size for generated data")
    proportions: tuple[float, float, float] = Field((0.45, 0.45, 0.10), description="two-moons part proportions")
    noise: float = Field(0.1, ge=0, description="two-moons Gaussian noise scale")
    path: Optional[str] = Field(None, description="input file for source csv/json")
    label_column: Optional[str] = Field(None, description="CSV column holding class labels")
    class_counts: Optional[dict[str, int]] = Field(None, description="optional per-class subsample sizes")


class RankConfig(_Section):
    l: int = Field(30, ge=1, description="neighbour window of the rank statistic")
    B: int = Field(5, ge=1, description="number of random half splits")
    weighted: bool = Field(False, description="use the weighted G statistic")


class GraphConfig(_Section):
    kind: Literal["rmd", "knn", "epsilon", "full_rbf", "full_arbf"] = Field("rmd", description="graph construction")
    k: int = Field(30, ge=1, description="average degree k (rmd, knn) or scale neighbour (full_arbf)")
    lam: float = Field(0.5, gt=0, le=1, description="RMD minimum-degree fraction lambda")
    weighting: Literal["binary", "rbf", "adaptive-rbf"] = Field("binary", description="edge weights")
    sigma: Optional[float] = Field(None, gt=0, description="RBF width; default 2**sigma_exp times the mean k-NN distance")
    sigma_exp: int = Field(0, description="exponent j in sigma = 2**j * mean k-NN distance")
    eps: Optional[float] = Field(None, gt=0, description="epsilon-graph radius; default the mean k-NN distance")


class FamilyConfig(_Section):
    lambdas: tuple[float, ...] = Field((0.2, 0.4, 0.6, 0.8, 1.0), description="lambda grid")
    ks: tuple[int, ...] = Field(tuple(range(10, 101, 10)), description="k grid")
    sigma_exponents: tuple[int, ...] = Field(tuple(range(-3, 4)), description="sigma = 2**j * mean k-NN distance, j in this grid")
    weighting: Literal["binary", "rbf", "adaptive-rbf"] = Field("rbf", description="edge weights of the family")


class ClusterConfig(_Section):
    K: int = Field(2, ge=2, description="number of clusters")
    objective: Literal["rcut", "ncut"] = Field("ncut", description="spectral relaxation")


class SSLConfig(_Section):
    n_labeled: int = Field(20, ge=1, description="labelled points drawn when the data carry no mask")


class SelectConfig(_Section):
    learner: Literal["sc-rcut", "sc-ncut"] = Field("sc-ncut", description="learner run on every family member")
    delta: float = Field(0.05, gt=0, lt=1, description="smallest admissible cluster fraction")
    k0: int = Field(30, ge=1, description="degree of the reference k-NN graph scoring cut0")
    reference_weighting: Optional[Literal["binary", "rbf"]] = Field(
        None, description="reference graph weights; default binary for a binary family, else rbf")
    delta_grid: tuple[float, ...] = Field((0.30, 0.25, 0.20, 0.15, 0.10, 0.05), description="descending thresholds for sweep-delta")
    rel_tol: float = Field(0.01, gt=0, description="relative cut0 change tolerated inside a flat spot")


class CutSweepConfig(_Section):
    axis: int = Field(0, ge=0, description="coordinate swept by the hyperplane")
    start: Optional[float] = Field(None, description="first position; default the 1st percentile")
    stop: Optional[float] = Field(None, description="last position; default the 99th percentile")
    step: float = Field(0.05, gt=0, description="position spacing")
    k: int = Field(30, ge=1, description="k of both graphs")
    lam: float = Field(0.4, gt=0, le=1, description="lambda of the RMD graph")
    weighting: Literal["binary", "rbf"] = Field("binary", description="edge weights of both graphs")


class Thm1Config(_Section):
    density: str = Field("normal", description="density preset (normal, fig2, fig2-marginal, fig5) or `mixture`")
    mixture: Optional[dict] = Field(None, description="explicit mixture when density is `mixture`")
    sizes: tuple[int, ...] = Field((500, 1000, 2000, 4000), description="increasing sample sizes")
    l_rule: str = Field("sqrt", description="l as a function of n: sqrt, pow:<e>, or an integer")
    B: int = Field(5, ge=1, description="half splits per rank estimate")
    n_probes: int = Field(50, ge=1, description="fixed probe points")
    replicates: int = Field(5, ge=1, description="data sets per size")


class Thm2Config(_Section):
    density: str = Field("fig2-marginal", description="density preset or `mixture`")
    mixture: Optional[dict] = Field(None, description="explicit mixture when density is `mixture`")
    lambdas: tuple[float, ...] = Field((0.4, 1.0), description="lambda values checked")
    sizes: tuple[int, ...] = Field((1000, 2000, 4000, 8000), description="increasing sample sizes")
    k_rule: str = Field("pow:0.6", description="k as a function of n: sqrt, pow:<e>, log2, or an integer")
    objective: Literal["rcut", "ncut"] = Field("rcut", description="scaled objective")
    offset: Optional[float] = Field(None, description="plane position; default the density valley between the first two means")
    axis: int = Field(0, ge=0, description="plane normal axis")
    replicates: int = Field(8, ge=1, description="data sets per size")


class LimitsConfig(_Section):
    thm1: Thm1Config = Field(default_factory=Thm1Config)
    thm2: Thm2Config = Field(default_factory=Thm2Config)


class RunConfig(_Section):
    schema_version: Literal[1] = Field(SCHEMA_VERSION, description="configuration schema version")
    seed: int = Field(0, ge=0, description="root seed; every stage derives its own seed from it")
    workers: int = Field(1, ge=1, description="threads used by grid sweeps")
    data: DataConfig = Field(default_factory=DataConfig)
    rank: RankConfig = Field(default_factory=RankConfig)
    graph: GraphConfig = Field(default_factory=GraphConfig)
    family: FamilyConfig = Field(default_factory=FamilyConfig)
    cluster: ClusterConfig = Field(default_factory=ClusterConfig)
    ssl: SSLConfig = Field(default_factory=SSLConfig)
    select: SelectConfig = Field(default_factory=SelectConfig)
    cut_sweep: CutSweepConfig = Field(default_factory=CutSweepConfig)
    limits: LimitsConfig = Field(default_factory=LimitsConfig)


def config_keys(model: type[BaseModel] = RunConfig, prefix: str = "") -> list[tuple[str, str, str]]:
    """(dotted key, default, description) for every leaf of the schema."""
    rows = []
    for name, f in model.model_fields.items():
        ann = f.annotation
        if isinstance(ann, type) and issubclass(ann, BaseModel):
            rows.extend(config_keys(ann, f"{prefix}{name}."))
        else:
            default = f.default_factory() if f.default_factory is not None else f.default
            rows.append((prefix + name, json.dumps(default), f.description or ""))
    return rows


def load_config(path: str | None) -> tuple[RunConfig, dict]:
    """Parse a config or a previous run manifest; returns the config and the raw manifest (if any)."""
    if path is None:
        return RunConfig(), {}
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    manifest = {}
    if isinstance(obj, dict) and "config" in obj and "command" in obj:
        manifest, obj = obj, obj["config"]
    try:
        return RunConfig.model_validate(obj), manifest
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def stage_seed(root: int, stage: str) -> int:
    return int(np.random.SeedSequence([root, zlib.crc32(stage.encode())]).generate_state(1)[0])


def parse_rule(rule: str, kind: str):
    """Turn ``sqrt``, ``pow:<e>``, ``log2`` or an integer into a size rule."""
    if rule == "sqrt":
        return sqrt_rule
    if rule == "log2":
        return lambda n: int(math.ceil(math.log(n) ** 2))
    if rule.startswith("pow:"):
        try:
            e = float(rule[4:])
        except ValueError as exc:
            raise ConfigError(f"bad {kind} rule {rule!r}") from exc
        return lambda n: int(math.ceil(n ** e))
    try:
        v = int(rule)
    except ValueError as exc:
        raise ConfigError(f"bad {kind} rule {rule!r}; use sqrt, pow:<e>, log2 or an integer") from exc
    return lambda n: v


def _mixture(preset: str | None, explicit: dict | None) -> MixtureSpec:
    if explicit is not None:
        return MixtureSpec.from_json_dict(explicit)
    if preset == "fig2":
        return fig2_mixture()
    if preset == "fig5":
        return fig5_mixture()
    raise ConfigError(f"unknown mixture preset {preset!r}")


def density_from(name: str, explicit: dict | None) -> AnalyticDensity:
    if name == "normal":
        return AnalyticDensity(MixtureSpec([1.0], [[0.0]], [[[1.0]]]))
    if name == "mixture":
        if explicit is None:
            raise ConfigError("density `mixture` needs an explicit mixture")
        return AnalyticDensity(MixtureSpec.from_json_dict(explicit))
    if name.endswith("-marginal"):
        return AnalyticDensity(_mixture(name[: -len("-marginal")], None)).marginal(0)
    return AnalyticDensity(_mixture(name, None))


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


class Run:
    """Per-invocation state: config, output directory, seeds, inputs, stage tracking."""

    def __init__(self, command: str, cfg: RunConfig, out: Path, argument: str | None):
        self.command, self.cfg, self.out, self.argument = command, cfg, out, argument
        self.stage = "setup"
        self.seeds: dict[str, int] = {}
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def seed(self, stage: str) -> int:
        s = self.seeds.setdefault(stage, stage_seed(self.cfg.seed, stage))
        return s

    @contextlib.contextmanager
    def in_stage(self, name: str):
        self.stage = name
        log.info("stage %s", name)
        yield

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def manifest(self, wall: float) -> dict:
        import scipy
        import sklearn
        import pydantic
        return {
            "tool": "rmdgraph",
            "command": self.command,
            "argument": self.argument,
            "config": self.cfg.model_dump(mode="json"),
            "inputs": self.inputs,
            "seeds": self.seeds,
            "outputs": {name: sha256(self.out / name) for name in self.outputs},
            "versions": {"rmdgraph": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "scikit-learn": sklearn.__version__,
                         "pydantic": pydantic.__version__},
            "wall_time_s": wall,
        }


# ---------------------------------------------------------------------------
# Stages shared by commands
# ---------------------------------------------------------------------------

def get_data(run: Run) -> DataSet:
    dc = run.cfg.data
    with run.in_stage("data"):
        if dc.source in ("csv", "json"):
            if dc.path is None:
                raise ConfigError(f"data.source={dc.source} needs data.path")
            p = Path(dc.path)
            if not p.exists():
                raise DataError(f"input file not found: {p}")
            run.inputs[str(p)] = sha256(p)
            data = load_csv(p, dc.label_column) if dc.source == "csv" else load_json(p)
        elif dc.source == "two-moons":
            data = gen_two_moons_gaussian(dc.n, dc.proportions, dc.noise, run.seed("data"))
        else:
            data = gen_gaussian_mixture(_mixture(dc.preset, dc.mixture), dc.n, run.seed("data"))
        if dc.class_counts:
            data = subsample_unbalanced(data, dc.class_counts, run.seed("subsample"))
    return data


def get_ranks(run: Run, data: DataSet):
    rc = run.cfg.rank
    with run.in_stage("rank"):
        return compute_ranks(data, rc.l, rc.B, run.seed("rank"), rc.weighted)


def get_graph(run: Run, data: DataSet):
    gc = run.cfg.graph
    ranks = get_ranks(run, data) if gc.kind == "rmd" else None
    with run.in_stage("graph"):
        n = data.n
        k = min(gc.k, n - 1)
        sigma = gc.sigma
        if gc.weighting == "rbf" and sigma is None:
            sigma = mean_knn_distance(data, k) * 2.0 ** gc.sigma_exp
        if gc.kind == "rmd":
            return build_rmd(data, ranks, k, gc.lam, gc.weighting, sigma)
        if gc.kind == "knn":
            return build_knn(data, k, gc.weighting, sigma)
        if gc.kind == "epsilon":
            eps = gc.eps if gc.eps is not None else mean_knn_distance(data, k)
            return build_baseline(data, "epsilon", eps=eps, weighting=gc.weighting, sigma=sigma)
        if gc.kind == "full_rbf":
            return build_baseline(data, "full_rbf", sigma=sigma or mean_knn_distance(data, k) * 2.0 ** gc.sigma_exp)
        return build_baseline(data, "full_arbf", k=k)


def _family(cfg: RunConfig) -> GraphFamilyParams:
    f = cfg.family
    try:
        return GraphFamilyParams(f.lambdas, f.ks, f.sigma_exponents, f.weighting)
    except GraphError as exc:
        raise ConfigError(str(exc)) from exc


def _candidates(run: Run, data: DataSet):
    fam = _family(run.cfg)
    sc = run.cfg.select
    K = run.cfg.cluster.K
    if not sc.delta < 1.0 / K:
        raise ConfigError(f"select.delta must be below 1/K = {1.0 / K}")
    ranks = get_ranks(run, data)
    with run.in_stage("reference"):
        w = sc.reference_weighting or ("binary" if fam.weighting == "binary" else "rbf")
        ref = reference_graph(data, min(sc.k0, data.n - 1), w)
    with run.in_stage("family-sweep"):
        cands = sweep(data, ranks, fam, K, sc.learner, run.seed("select"), sc.delta, ref, sc.k0, run.cfg.workers)
    return cands, ref


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_data(run: Run) -> None:
    data = get_data(run)
    with run.in_stage("write"):
        save_json(data, run.path("data.json"))
        save_csv(data, run.path("data.csv"))


def cmd_rank(run: Run) -> None:
    ranks = get_ranks(run, get_data(run))
    with run.in_stage("write"):
        ranks.to_csv(run.path("ranks.csv"))


def cmd_build_graph(run: Run) -> None:
    g = get_graph(run, get_data(run))
    with run.in_stage("write"):
        g.save(run.path("graph.csv"))
        run.outputs.append("graph.csv.json")


def _with_truth(summary: dict, data: DataSet, part) -> dict:
    if data.labels is not None:
        summary["clustering_error"] = clustering_error(part, data.labels)
    return summary


def cmd_cluster(run: Run) -> None:
    data = get_data(run)
    g = get_graph(run, data)
    cc = run.cfg.cluster
    with run.in_stage("cluster"):
        part = spectral_cluster(g, cc.K, cc.objective, run.seed("cluster"))
    with run.in_stage("write"):
        part.save(run.path("partition.csv"))
        run.outputs.append("partition.csv.json")
        summary = {"sizes": part.sizes().tolist(), "rcut": objective_value(g, part, "rcut"),
                   "method": part.provenance.get("method")}
        try:
            summary["ncut"] = objective_value(g, part, "ncut")
        except GraphError:
            summary["ncut"] = None
        write_json(run.path("cluster_summary.json"), _with_truth(summary, data, part))


def cmd_ssl(run: Run) -> None:
    data = get_data(run)
    if data.labels is None:
        raise DataError("ssl needs labelled data")
    g = get_graph(run, data)
    with run.in_stage("ssl"):
        mask = data.labeled_mask
        if mask is None:
            mask = sample_labeled_mask(data.labels, run.cfg.ssl.n_labeled, run.seed("ssl"))
        Y, classes = one_hot(data.labels, mask)
        soft = grf_solve(g, Y, mask, classes)
        pred = predict(soft)
    with run.in_stage("write"):
        soft.to_csv(run.path("soft_labels.csv"))
        predicted = np.asarray(classes, dtype=object)[pred.assignment]
        truth = np.asarray(data.labels, dtype=object)
        unl = ~np.asarray(mask)
        err = float(np.mean(predicted[unl] != truth[unl])) if unl.any() else 0.0
        write_json(run.path("ssl_summary.json"), {"n_labeled": int(np.sum(mask)), "error_unlabeled": err,
                                                  "labeled_nodes": np.flatnonzero(mask).tolist()})


def cmd_select(run: Run) -> None:
    data = get_data(run)
    cands, ref = _candidates(run, data)
    with run.in_stage("select"):
        rep = select(cands, ref, run.cfg.select.delta, run.cfg.cluster.K)
    with run.in_stage("write"):
        run.path("report.json").write_text(report_json(rep))
        if rep.winning is not None:
            rep.winning.partition.save(run.path("partition.csv"))
            run.outputs.append("partition.csv.json")
        else:
            log.warning("no candidate satisfies delta=%s", run.cfg.select.delta)


def cmd_sweep_delta(run: Run) -> None:
    data = get_data(run)
    cands, ref = _candidates(run, data)
    sc = run.cfg.select
    with run.in_stage("delta-sweep"):
        try:
            curve = delta_sweep(cands, ref, sc.delta_grid)
        except GraphError as exc:
            raise ConfigError(str(exc)) from exc
        spots = flat_spots(curve, sc.rel_tol)
    with run.in_stage("write"):
        write_json(run.path("delta_curve.json"), curve.to_json_dict())
        curve.to_csv(run.path("delta_curve.csv"))
        axis = run.cfg.cut_sweep.axis
        rows = []
        for s in spots:
            part = cands[s.winner].partition
            rows.append({"delta_high": s.delta_high, "delta_low": s.delta_low, "digest": s.digest, "cut0": s.cut0,
                         "params": cands[s.winner].params,
                         "cut_position": partition_cut_position(data.points, part, axis) if part.K == 2 else None})
        write_json(run.path("flat_spots.json"), {"flat_spots": rows})


def cmd_cut_sweep(run: Run) -> None:
    data = get_data(run)
    cs = run.cfg.cut_sweep
    if cs.axis >= data.d:
        raise ConfigError(f"cut_sweep.axis={cs.axis} but data has {data.d} dimensions")
    ranks = get_ranks(run, data)
    with run.in_stage("graphs"):
        k = min(cs.k, data.n - 1)
        sigma = mean_knn_distance(data, k) if cs.weighting == "rbf" else None
        graphs = {"knn": build_knn(data, k, cs.weighting, sigma),
                  "rmd": build_rmd(data, ranks, k, cs.lam, cs.weighting, sigma)}
    with run.in_stage("sweep"):
        x = data.points[:, cs.axis]
        start = cs.start if cs.start is not None else float(np.quantile(x, 0.01))
        stop = cs.stop if cs.stop is not None else float(np.quantile(x, 0.99))
        if stop < start:
            raise ConfigError("cut_sweep.stop lies below cut_sweep.start")
        positions = start + cs.step * np.arange(int(math.floor((stop - start) / cs.step + 1e-9)) + 1)
        sweeps = {name: cut_position_sweep(data.points, g, positions, cs.axis) for name, g in graphs.items()}
    with run.in_stage("write"):
        write_cut_sweeps(run.path("cut_sweep.csv"), sweeps)
        summary = {name: {"argmin_rcut": float(s.positions[np.argmin(s.rcut)]),
                          "argmin_ncut": float(s.positions[np.argmin(s.ncut)])} for name, s in sweeps.items()}
        write_json(run.path("cut_sweep_summary.json"), summary)


def cmd_verify_limits(run: Run) -> None:
    which = run.argument or "all"
    if which not in ("thm1", "thm2", "all"):
        raise ConfigError(f"verify-limits takes thm1, thm2 or nothing, got {which!r}")
    lc = run.cfg.limits
    if which in ("thm1", "all"):
        t = lc.thm1
        with run.in_stage("thm1"):
            rep = verify_rank_convergence(density_from(t.density, t.mixture), t.sizes, parse_rule(t.l_rule, "l"),
                                          t.B, run.seed("thm1"), t.n_probes, t.replicates)
            rep.save(run.path("thm1.json"), run.path("thm1.csv"))
    if which in ("thm2", "all"):
        t = lc.thm2
        with run.in_stage("thm2"):
            dens = density_from(t.density, t.mixture)
            if t.axis >= dens.dim:
                raise ConfigError(f"limits.thm2.axis={t.axis} but the density has {dens.dim} dimensions")
            offset = t.offset
            if offset is None:
                m = dens.spec.means
                if len(m) < 2:
                    raise ConfigError("limits.thm2.offset is required for a single-component density")
                offset = float(dens.valley(m[0], m[1])[t.axis])
            for lam in t.lambdas:
                rep = verify_cut_limit(dens, offset, lam, t.sizes, parse_rule(t.k_rule, "k"), run.seed(f"thm2-{lam}"),
                                       t.axis, t.replicates, t.objective)
                rep.save(run.path(f"thm2_lambda{lam:g}.json"), run.path(f"thm2_lambda{lam:g}.csv"))


HANDLERS = {
    "gen-data": cmd_gen_data,
    "rank": cmd_rank,
    "build-graph": cmd_build_graph,
    "cluster": cmd_cluster,
    "ssl": cmd_ssl,
    "select": cmd_select,
    "sweep-delta": cmd_sweep_delta,
    "cut-sweep": cmd_cut_sweep,
    "verify-limits": cmd_verify_limits,
}


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:<34} default {d}\n      {desc}" for k, d, desc in config_keys())
    epilog = (
        "commands:\n"
        "  gen-data       write the configured data set (data.json, data.csv)\n"
        "  rank           rank statistic per point (ranks.csv)\n"
        "  build-graph    one graph from the `graph` section (graph.csv + header)\n"
        "  cluster        spectral clustering of that graph (partition.csv, cluster_summary.json)\n"
        "  ssl            harmonic label propagation (soft_labels.csv, ssl_summary.json)\n"
        "  select         RMD family sweep + min-cut0 selection (report.json, partition.csv)\n"
        "  sweep-delta    winning cut0 over select.delta_grid (delta_curve.*, flat_spots.json)\n"
        "  cut-sweep      Cut/RCut/NCut of axis-aligned planes on k-NN and RMD graphs (cut_sweep.csv)\n"
        "  verify-limits  Monte-Carlo checks of the rank and cut limits [thm1|thm2] (thm*.json/csv)\n\n"
        f"config keys (JSON, nested by section):\n{keys}\n\n"
        f"The output directory defaults to ${OUT_ENV}, else ./{DEFAULT_OUT}.\n"
        "Exit codes: 1 configuration error, 2 data or graph error, 3 numerical failure."
    )
    p = argparse.ArgumentParser(prog="rmdgraph", description="Rank-modulated-degree graph learning.",
                                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("argument", nargs="?", help="verify-limits only: thm1 or thm2 (default both)")
    p.add_argument("--config", help="JSON config, or the manifest.json of an earlier run")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override the root seed")
    p.add_argument("--workers", type=int, help="override the worker count of grid sweeps")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    run = None
    try:
        cfg, manifest = load_config(args.config)
        if manifest and manifest.get("command") != args.command:
            raise ConfigError(f"manifest was written by `{manifest.get('command')}`, not `{args.command}`")
        argument = args.argument if args.argument is not None else manifest.get("argument")
        if args.argument is not None and args.command != "verify-limits":
            raise ConfigError(f"`{args.command}` takes no positional argument")
        updates = {}
        if args.seed is not None:
            updates["seed"] = args.seed
        if args.workers is not None:
            updates["workers"] = args.workers
        if updates:
            try:
                cfg = RunConfig.model_validate({**cfg.model_dump(), **updates})
            except ValidationError as exc:
                raise ConfigError(str(exc)) from exc
        out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        out.mkdir(parents=True, exist_ok=True)
        run = Run(args.command, cfg, out, argument)
        t0 = time.perf_counter()
        HANDLERS[args.command](run)
        write_json(out / "manifest.json", run.manifest(time.perf_counter() - t0))
        return 0
    except ConfigError as exc:
        return _fail(run, exc, EXIT_CONFIG)
    except NumericalError as exc:
        return _fail(run, exc, EXIT_NUMERICAL)
    except (DataError, GraphError, OSError) as exc:
        return _fail(run, exc, EXIT_DATA)


def _fail(run: Run | None, exc: Exception, code: int) -> int:
    stage = "config" if run is None else run.stage
    print(f"rmdgraph: error in stage '{stage}': {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
