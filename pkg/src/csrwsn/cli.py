"""Command-line pipeline: topo -> simulate -> train-basis -> recover -> evaluate -> report.

Every stage reads its inputs from ``--out`` and writes its artifacts there,
together with ``manifest.json`` (config snapshot, seeds, artifact paths and
tool version).  ``--manifest`` replays a previous run's configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as aio
from .basis import learn_basis
from .config import config_from_dict, parse_config
from .errors import ConfigError, CsrError, StageDependencyError
from .evaluation import (
    CycleResult,
    Deployment,
    RecoveryReport,
    approximation_error,
    build_fields,
    build_topology,
    collect_test_cycle,
    derive_seed,
    make_bases,
    run_cdg_baseline,
    run_csr_experiment,
    sparsification_csv,
    sparsification_study,
    training_collection,
    _TOMO,
)
from .routing_sim import Scheme
from .tomography import PathRecoveryModel, recover_paths

log = logging.getLogger("csrwsn")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3

STAGES = ("topo", "simulate", "train-basis", "recover", "evaluate", "report")

# artifact file names, relative to --out
ART = {
    "topology": "topology.json",
    "fields": "fields.json",
    "cycles": "cycles.json",
    "wavelets": "wavelets.json",
    "psi": "psi.csv",
    "laplacian_cg": "laplacian_cg.csv",
    "reconstructions": "reconstructions.json",
    "report_csv": "report.csv",
    "summary": "summary.json",
    "sparsification": "sparsification.csv",
    "error_vs_cycle": "plots/error_vs_cycle.csv",
    "error_vs_M": "plots/error_vs_M.csv",
    "transmissions_vs_M": "plots/transmissions_vs_M.csv",
    "sparsification_vs_k": "plots/sparsification_vs_k.csv",
}

# which stage produces each artifact
PRODUCER = {
    "topology": "topo",
    "fields": "simulate",
    "cycles": "simulate",
    "wavelets": "train-basis",
    "psi": "train-basis",
    "laplacian_cg": "train-basis",
    "reconstructions": "recover",
    "report_csv": "evaluate",
    "summary": "evaluate",
    "sparsification": "evaluate",
}


class Run:
    """Resolved configuration plus the output directory of one invocation."""

    def __init__(self, config, out):
        self.config = config
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written = []

    def path(self, key):
        return self.out / ART[key]

    def need(self, key):
        p = self.path(key)
        if not p.exists():
            raise StageDependencyError(PRODUCER[key], str(p))
        return p

    def write_text(self, key, text):
        p = self.path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        self.written.append(key)

    def write_json(self, key, obj):
        self.write_text(key, aio.dumps(obj))

    def manifest(self):
        mp = self.out / "manifest.json"
        old = aio.read_json(mp) if mp.exists() else {}
        arts = dict(old.get("artifacts", {})) if old.get("config") == self.config.to_dict() else {}
        for key in self.written:
            arts[key] = ART[key]
        c = self.config
        doc = {
            "tool": "csrwsn",
            "version": __version__,
            "config": c.to_dict(),
            "seeds": {
                "topology": c.topology.seed,
                "field": c.field.seed,
                "experiment": c.experiment.seed,
            },
            "artifacts": dict(sorted(arts.items())),
        }
        aio.write_json(mp, doc)
        return doc


# --------------------------------------------------------------------------
# loading upstream artifacts


def _graph(run):
    return aio.topology_from_dict(aio.read_json(run.need("topology")))


def _fields(run):
    return aio.fields_from_dict(aio.read_json(run.need("fields")))


def _deployment(run):
    cfg = run.config
    graph = _graph(run)
    fields = _fields(run)
    learned = None
    if "learned" in cfg.basis.kinds:
        learned = aio.basis_from_dict(aio.read_json(run.need("wavelets")))
    dep = Deployment(config=cfg, graph=graph, fields=fields)
    dep.bases = make_bases(cfg, graph.N, learned)
    return dep


# --------------------------------------------------------------------------
# stages


def stage_topo(run):
    g = build_topology(run.config)
    run.write_json("topology", aio.topology_to_dict(g))
    log.info("topology: n=%d sink=%d edges=%d", g.n, g.sink_id, len(g.edges))


def stage_simulate(run):
    cfg = run.config
    g = _graph(run)
    fields = build_fields(cfg, g)
    run.write_json("fields", aio.fields_to_dict(fields))
    cycles, kept = _simulated_cycles(cfg, g, fields)
    run.write_json("cycles", aio.cycles_to_dict(cycles, kept))
    log.info("simulate: %d fields, %d cycles", len(fields), len(cycles))


def _simulated_cycles(cfg, g, fields):
    """Training cycles (M = N) and test cycles at the configured M."""
    train, _ = training_collection(cfg, g, fields)
    model = PathRecoveryModel(cfg.tomography.recovery_prob)
    kept = []
    for c, cyc in enumerate(train):
        _, k = recover_paths(cyc, model, derive_seed(cfg.experiment.seed, _TOMO, c, g.N))
        kept.append(k)
    cycles = list(train)
    M = cfg.experiment.M
    for c in range(cfg.experiment.train_count, len(fields)):
        cyc = collect_test_cycle(cfg, g, fields[c], c, M)
        _, k = recover_paths(cyc, model, derive_seed(cfg.experiment.seed, _TOMO, c, M))
        cycles.append(cyc)
        kept.append(k)
    return cycles, kept


def stage_train_basis(run):
    cfg = run.config
    g = _graph(run)
    fields = _fields(run)
    cycles, kept = aio.cycles_from_dict(aio.read_json(run.need("cycles")))
    P = cfg.experiment.train_count
    train = [c for c in cycles if c.cycle_id < P]
    train.sort(key=lambda c: c.cycle_id)
    if len(train) != P:
        raise StageDependencyError("simulate", str(run.path("cycles")))
    by_id = {c.cycle_id: k for c, k in zip(cycles, kept)}
    recovered = [[c.paths[i] for i in by_id[c.cycle_id]] for c in train]
    b = cfg.basis
    art = learn_basis(train, [fields[c].values for c in range(P)], g.N, recovered=recovered,
                      epsilon=b.epsilon, step=b.step, iters=b.iters)
    run.write_json("wavelets", aio.wavelets_to_dict(art.basis))
    run.write_text("psi", aio.matrix_to_csv(art.basis.psi))
    run.write_text("laplacian_cg", aio.matrix_to_csv(art.laplacian_cg))
    log.info("train-basis: N=%d levels=%d", g.N, art.basis.wavelets.partition.l_max)


def _M_values(cfg):
    return sorted(set(cfg.experiment.M_list) | {cfg.experiment.M})


def stage_recover(run):
    cfg = run.config
    dep = _deployment(run)
    rows = []
    for M in _M_values(cfg):
        rep = run_csr_experiment(cfg, dep, M=M, keep_x=True, path_recording=True)
        rep.extend(run_cdg_baseline(cfg, dep, M=M, keep_x=True))
        rows.extend(rep.sorted_rows())
        log.info("recover: M=%d done", M)
    out = []
    for r in rows:
        d = {c: getattr(r, c) for c in _ROW_KEYS}
        d["x_hat"] = None if r.x_hat is None else r.x_hat.tolist()
        out.append(d)
    run.write_json("reconstructions", {"rows": out})


_ROW_KEYS = ("cycle_id", "scheme", "basis", "solver", "M", "M_effective", "flag",
             "transmissions", "overhead_bytes", "max_hops")


def score_reconstructions(recs, fields):
    """Rebuild a RecoveryReport by scoring stored reconstructions against the fields."""
    report = RecoveryReport()
    for d in recs["rows"]:
        flag = d["flag"]
        if d["x_hat"] is None or flag in ("all_dropped", "overhead_only"):
            err = 100.0 if flag == "all_dropped" else float("nan")
        else:
            x = fields[d["cycle_id"]].values
            if np.any(x):
                err, flag = approximation_error(np.asarray(d["x_hat"]), x), ""
            else:
                err, flag = float("nan"), "zero_reference"
        report.rows.append(CycleResult(error_percent=err, **{**{k: d[k] for k in _ROW_KEYS},
                                                               "flag": flag}))
    return report


def stage_evaluate(run):
    cfg = run.config
    dep = _deployment(run)
    recs = aio.read_json(run.need("reconstructions"))
    report = score_reconstructions(recs, dep.fields)
    run.write_text("report_csv", report.to_csv())
    run.write_text("summary", report.summary_json())
    test = [dep.fields[c] for c in dep.test_ids]
    table = sparsification_study(dep.bases, test, cfg.experiment.k_values)
    run.write_text("sparsification", sparsification_csv(table))
    log.info("evaluate: %d rows", len(report.rows))


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if isinstance(v, float) and math.isnan(v) else
                    (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def stage_report(run):
    cfg = run.config
    report = RecoveryReport.from_csv(run.need("report_csv").read_text())
    M0 = cfg.experiment.M
    scored = [r for r in report.sorted_rows() if r.scheme != Scheme.PATH_RECORDING.value]
    run.write_text("error_vs_cycle", _csv(
        ["scheme", "basis", "solver", "cycle_id", "error_percent"],
        [(r.scheme, r.basis, r.solver, r.cycle_id, r.error_percent)
         for r in scored if r.M == M0]))
    run.write_text("error_vs_M", _csv(
        ["scheme", "basis", "solver", "M", "mean_error_percent", "modeled"],
        [(a["scheme"], a["basis"], a["solver"], a["M"], a["mean_error_percent"], a["modeled"])
         for a in report.aggregates() if a["scheme"] != Scheme.PATH_RECORDING.value]))
    per = {}
    for r in report.sorted_rows():
        per.setdefault((r.scheme, r.M), {})[r.cycle_id] = (r.transmissions, r.overhead_bytes)
    trows = []
    for (scheme, M), cyc in sorted(per.items()):
        vals = [cyc[c] for c in sorted(cyc)]
        trows.append((scheme, M, math.fsum(v[0] for v in vals) / len(vals),
                      math.fsum(v[1] for v in vals) / len(vals)))
    run.write_text("transmissions_vs_M", _csv(
        ["scheme", "M", "mean_transmissions", "mean_overhead_bytes"], trows))
    run.write_text("sparsification_vs_k", run.need("sparsification").read_text())


STAGE_FUNCS = {
    "topo": stage_topo,
    "simulate": stage_simulate,
    "train-basis": stage_train_basis,
    "recover": stage_recover,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


# --------------------------------------------------------------------------
# entry point


def resolve_config(args):
    """Config source: --manifest, else --config, else the manifest in --out, else defaults."""
    out_manifest = Path(args.out) / "manifest.json"
    if args.manifest:
        cfg = config_from_dict(aio.read_json(args.manifest)["config"])
    elif args.config:
        cfg = parse_config(args.config)
    elif out_manifest.exists():
        cfg = config_from_dict(aio.read_json(out_manifest)["config"])
    else:
        cfg = parse_config(None)
    d = cfg.to_dict()
    if args.seed is not None:
        d["experiment"]["seed"] = args.seed
    if args.threads is not None:
        d["experiment"]["threads"] = args.threads
    return config_from_dict(d)


def build_parser():
    p = argparse.ArgumentParser(prog="csrwsn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"csrwsn {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config file")
    common.add_argument("--manifest", metavar="PATH", help="replay the config of a manifest")
    common.add_argument("--seed", type=int, help="override experiment.seed")
    common.add_argument("--out", metavar="DIR", default="csrwsn_out", help="artifact directory")
    common.add_argument("--threads", type=int, help="worker threads for per-cycle evaluation")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run-all",):
        sub.add_parser(name, parents=[common])
    return p


def run_command(command, args):
    run = Run(resolve_config(args), args.out)
    stages = STAGES if command == "run-all" else (command,)
    try:
        for st in stages:
            STAGE_FUNCS[st](run)
    finally:
        run.manifest()
    return run


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        run_command(args.command, args)
    except (ConfigError, StageDependencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CsrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
