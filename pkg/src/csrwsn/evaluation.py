"""Experiment harness: training, sparsification study, CSR recovery and the CDG baseline."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import RepresentationBasis, baseline_basis, k_term_approx, learn_basis
from .config import ExperimentConfig
from .errors import ZeroReferenceError
from .graph_core import SensorField, WsnGraph, random_geometric_topology, synth_field_series
from .routing_sim import (
    CollectionCycle,
    Scheme,
    build_cycle_routing,
    collect_cycle,
    transmission_stats,
)
from .solvers import Sl0Params, solve
from .tomography import PathRecoveryModel, build_measurement_matrix, recover_paths

# seed-stream tags
_ROUTE, _COLLECT, _TOMO, _CDG = 1, 2, 3, 4


def derive_seed(base, *keys):
    """Independent 63-bit seed for ``(base, *keys)``."""
    ss = np.random.SeedSequence([int(base)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def approximation_error(x_hat, x):
    """Root-mean-square error relative to the RMS of ``x``, in percent."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x_hat.shape != x.shape:
        raise ValueError("x_hat and x must have equal length")
    den = math.sqrt(float(np.sum(x * x)) / x.size)
    if den == 0.0:
        raise ZeroReferenceError("zero reference signal")
    num = math.sqrt(float(np.sum((x_hat - x) ** 2)) / x.size)
    return num / den * 100.0


# --------------------------------------------------------------------------
# deployment and training


@dataclass
class Deployment:
    """Topology, field series and trained bases shared by every experiment."""

    config: ExperimentConfig
    graph: WsnGraph
    fields: list
    bases: dict = field(default_factory=dict)
    training_cycles: list = field(default_factory=list)
    learned: object = None

    @property
    def N(self):
        return self.graph.N

    @property
    def train_ids(self):
        return range(self.config.experiment.train_count)

    @property
    def test_ids(self):
        e = self.config.experiment
        return range(e.train_count, len(self.fields))


def build_topology(config: ExperimentConfig) -> WsnGraph:
    t = config.topology
    return random_geometric_topology(t.n_sensors + 1, t.radius, t.seed, sink_id=t.sink_id)


def build_fields(config: ExperimentConfig, graph) -> list:
    f = config.field
    return synth_field_series(graph, f.mean, f.variance, f.length_scale, f.ar_coeff,
                              config.experiment.cycles, f.seed)


def cycle_routing(config, graph, cycle_id):
    r = config.routing
    seed = derive_seed(config.experiment.seed, _ROUTE, cycle_id)
    return build_cycle_routing(graph, r.link_failure_prob, r.rand_pool, seed, cycle_id=cycle_id)


def training_collection(config, graph, fields):
    """Training cycles: every sensor reports, and the sink runs path recovery.

    Returns ``(cycles, recovered_paths_per_cycle)``.
    """
    model = PathRecoveryModel(config.tomography.recovery_prob)
    cycles, recovered = [], []
    for c in range(config.experiment.train_count):
        routing = cycle_routing(config, graph, c)
        cyc = collect_cycle(routing, fields[c], graph.N,
                            derive_seed(config.experiment.seed, _COLLECT, c, graph.N))
        paths, _ = recover_paths(cyc, model, derive_seed(config.experiment.seed, _TOMO, c, graph.N))
        cycles.append(cyc)
        recovered.append(paths)
    return cycles, recovered


def train_learned_basis(config, graph, fields):
    cycles, recovered = training_collection(config, graph, fields)
    b = config.basis
    train = [fields[c].values for c in range(config.experiment.train_count)]
    art = learn_basis(cycles, train, graph.N, recovered=recovered,
                      epsilon=b.epsilon, step=b.step, iters=b.iters)
    return art, cycles


def make_bases(config, N, learned=None):
    out = {}
    for kind in config.basis.kinds:
        if kind == "learned":
            if learned is None:
                raise ValueError("learned basis requested but not trained")
            out[kind] = learned
        else:
            out[kind] = baseline_basis(kind, N)
    return out


def prepare(config: ExperimentConfig, graph=None, fields=None, learned=None) -> Deployment:
    """Generate (or reuse) the deployment and fit the learned basis on training cycles only."""
    graph = graph if graph is not None else build_topology(config)
    fields = fields if fields is not None else build_fields(config, graph)
    dep = Deployment(config=config, graph=graph, fields=list(fields))
    if learned is None and "learned" in config.basis.kinds:
        art, cycles = train_learned_basis(config, graph, dep.fields)
        dep.learned = art
        dep.training_cycles = cycles
        learned = art.basis
    dep.bases = make_bases(config, graph.N, learned)
    return dep


# --------------------------------------------------------------------------
# reports


@dataclass
class CycleResult:
    cycle_id: int
    scheme: str
    basis: str
    solver: str
    M: int
    M_effective: int
    error_percent: float
    flag: str
    transmissions: int
    overhead_bytes: int
    max_hops: int
    x_hat: np.ndarray = field(default=None, repr=False, compare=False)

    def sort_key(self):
        return (self.M, self.scheme, self.basis, self.solver, self.cycle_id)


CSV_COLUMNS = ("cycle_id", "scheme", "basis", "solver", "M", "M_effective", "error_percent",
               "flag", "transmissions", "overhead_bytes", "max_hops")


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class RecoveryReport:
    rows: list = field(default_factory=list)

    def extend(self, other):
        self.rows.extend(other.rows)
        return self

    def sorted_rows(self):
        return sorted(self.rows, key=CycleResult.sort_key)

    def groups(self):
        out = {}
        for r in self.sorted_rows():
            out.setdefault((r.scheme, r.basis, r.solver, r.M), []).append(r)
        return out

    def aggregates(self):
        """Mean and max error per ``(scheme, basis, solver, M)``, plus transmissions."""
        agg = []
        for (scheme, basis, solver, M), rows in sorted(self.groups().items()):
            errs = sorted(r.error_percent for r in rows if not math.isnan(r.error_percent))
            agg.append({
                "scheme": scheme,
                "basis": basis,
                "solver": solver,
                "M": M,
                "cycles": len(rows),
                "scored_cycles": len(errs),
                "mean_error_percent": math.fsum(errs) / len(errs) if errs else float("nan"),
                "max_error_percent": errs[-1] if errs else float("nan"),
                "total_transmissions": sum(r.transmissions for r in rows),
                "total_overhead_bytes": sum(r.overhead_bytes for r in rows),
                "modeled": scheme == Scheme.PATH_RECORDING.value or basis == "diff",
            })
        return agg

    def mean_error(self, scheme, basis, solver, M):
        for a in self.aggregates():
            if (a["scheme"], a["basis"], a["solver"], a["M"]) == (scheme, basis, solver, M):
                return a["mean_error_percent"]
        raise KeyError((scheme, basis, solver, M))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.sorted_rows():
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_json(self):
        aggs = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in a.items()}
                for a in self.aggregates()]
        return json.dumps({"aggregates": aggs}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, text):
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(CycleResult(
                cycle_id=int(rec["cycle_id"]), scheme=rec["scheme"], basis=rec["basis"],
                solver=rec["solver"], M=int(rec["M"]), M_effective=int(rec["M_effective"]),
                error_percent=float(rec["error_percent"]) if rec["error_percent"] else float("nan"),
                flag=rec["flag"], transmissions=int(rec["transmissions"]),
                overhead_bytes=int(rec["overhead_bytes"]), max_hops=int(rec["max_hops"]),
            ))
        return cls(rows)


def _score(x_hat, x):
    try:
        return approximation_error(x_hat, x), ""
    except ZeroReferenceError:
        return float("nan"), "zero_reference"


# --------------------------------------------------------------------------
# sparsification


def sparsification_study(bases, test_fields, k_values):
    """Mean k-term approximation error per ``(basis, k)``.

    Returns a list of dicts with keys ``basis``, ``k``, ``mean_error_percent``
    and ``fields`` (number of scored fields).
    """
    out = []
    for name, basis in bases.items():
        X = np.column_stack([np.asarray(getattr(f, "values", f), dtype=np.float64)
                             for f in test_fields])
        if X.shape[0] != basis.N:
            raise ValueError(f"basis {name} has size {basis.N}, fields have {X.shape[0]}")
        S = basis.forward(X)
        for k in k_values:
            errs = []
            for j in range(X.shape[1]):
                x_hat = basis.synthesize(k_term_approx(S[:, j], k))
                e, flag = _score(x_hat, X[:, j])
                if not flag:
                    errs.append(e)
            out.append({"basis": name, "k": int(k), "fields": len(errs),
                        "mean_error_percent": math.fsum(errs) / len(errs) if errs else float("nan")})
    return out


def sparsification_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["basis", "k", "fields", "mean_error_percent"])
    for r in sorted(table, key=lambda r: (r["basis"], r["k"])):
        w.writerow([r["basis"], r["k"], r["fields"], _fmt(r["mean_error_percent"])])
    return buf.getvalue()


# --------------------------------------------------------------------------
# recovery experiments


def _solver_kwargs(config):
    s = config.solver
    return dict(
        sl0_params=Sl0Params(s.sl0_sigma_decrease, s.sl0_mu, s.sl0_inner_iters,
                             s.sl0_sigma_min_ratio),
        tol=s.l1_tol,
        max_iters=s.l1_max_iters,
    )


def _reconstruct(Phi, y, basis, solver, kw):
    A = Phi @ basis.psi
    sol = solve(solver, A, y, **kw)
    return basis.synthesize(sol.s)


def collect_test_cycle(config, graph, field_, cycle_id, M) -> CollectionCycle:
    routing = cycle_routing(config, graph, cycle_id)
    return collect_cycle(routing, field_, M, derive_seed(config.experiment.seed, _COLLECT, cycle_id, M))


def csr_cycle(config, graph, field_, cycle_id, M, bases, solvers, keep_x=False):
    """CSR on one test cycle: route, recover paths, build Phi, solve per basis and solver."""
    cyc = collect_test_cycle(config, graph, field_, cycle_id, M)
    model = PathRecoveryModel(config.tomography.recovery_prob)
    paths, kept = recover_paths(cyc, model, derive_seed(config.experiment.seed, _TOMO, cycle_id, M))
    stats = transmission_stats(cyc, Scheme.CSR, graph.N)
    kw = _solver_kwargs(config)
    x = field_.values
    rows = []
    mm = None
    if paths:
        mm = build_measurement_matrix(paths, cyc.measurements[kept], graph.N, sink=cyc.sink_id)
    for bname, basis in bases.items():
        for solver in solvers:
            if mm is None:
                x_hat = np.zeros(graph.N)
                err, flag = 100.0, "all_dropped"
                if not np.any(x):
                    err, flag = float("nan"), "zero_reference"
            else:
                x_hat = _reconstruct(mm.rows, mm.y_kept, basis, solver, kw)
                err, flag = _score(x_hat, x)
            rows.append(CycleResult(
                cycle_id=cycle_id, scheme=Scheme.CSR.value, basis=bname, solver=solver, M=M,
                M_effective=len(kept), error_percent=err, flag=flag,
                transmissions=stats.transmissions, overhead_bytes=stats.overhead_bytes,
                max_hops=stats.max_hops, x_hat=x_hat if keep_x else None,
            ))
    rec = transmission_stats(cyc, Scheme.PATH_RECORDING, graph.N)
    return rows, rec


def dense_projection(N, M, seed):
    """``M x N`` matrix of i.i.d. +-1 entries."""
    rng = np.random.default_rng(seed)
    return np.where(rng.random((M, N)) < 0.5, -1.0, 1.0)


def cdg_cycle(config, graph, field_, cycle_id, M, bases, solvers, keep_x=False):
    Phi = dense_projection(graph.N, M, derive_seed(config.experiment.seed, _CDG, cycle_id, M))
    x = field_.values
    y = Phi @ x
    kw = _solver_kwargs(config)
    rows = []
    for bname, basis in bases.items():
        for solver in solvers:
            x_hat = _reconstruct(Phi, y, basis, solver, kw)
            err, flag = _score(x_hat, x)
            rows.append(CycleResult(
                cycle_id=cycle_id, scheme=Scheme.CDG.value, basis=bname, solver=solver, M=M,
                M_effective=M, error_percent=err, flag=flag, transmissions=graph.N * M,
                overhead_bytes=0, max_hops=0, x_hat=x_hat if keep_x else None,
            ))
    return rows


def _map_cycles(fn, cycle_ids, threads):
    if threads <= 1:
        return [fn(c) for c in cycle_ids]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, cycle_ids))


def _resolve(config, deployment):
    return deployment if deployment is not None else prepare(config)


def run_csr_experiment(config, deployment=None, M=None, fields=None, keep_x=False,
                       path_recording=False) -> RecoveryReport:
    """CSR over every test cycle.

    ``fields`` overrides the deployment's field series for the test cycles
    (index = cycle id); the bases stay those trained on the training cycles.
    With ``path_recording`` the report also carries the overhead a
    path-recording scheme would need on the same packets (``diff`` basis rows
    stand in for path-recording CS; both are labelled modeled in aggregates).
    """
    dep = _resolve(config, deployment)
    M = config.experiment.M if M is None else M
    fields = dep.fields if fields is None else fields
    solvers = config.solver.names

    def one(c):
        return csr_cycle(config, dep.graph, fields[c], c, M, dep.bases, solvers, keep_x)

    report = RecoveryReport()
    for rows, rec in _map_cycles(one, list(dep.test_ids), config.experiment.threads):
        report.rows.extend(rows)
        if path_recording:
            report.rows.append(CycleResult(
                cycle_id=rows[0].cycle_id, scheme=Scheme.PATH_RECORDING.value, basis="-",
                solver="-", M=M, M_effective=rows[0].M_effective, error_percent=float("nan"),
                flag="overhead_only", transmissions=rec.transmissions,
                overhead_bytes=rec.overhead_bytes, max_hops=rec.max_hops,
            ))
    return report


def run_cdg_baseline(config, deployment=None, M=None, fields=None, keep_x=False) -> RecoveryReport:
    dep = _resolve(config, deployment)
    M = config.experiment.M if M is None else M
    fields = dep.fields if fields is None else fields
    solvers = config.solver.names

    def one(c):
        return cdg_cycle(config, dep.graph, fields[c], c, M, dep.bases, solvers, keep_x)

    report = RecoveryReport()
    for rows in _map_cycles(one, list(dep.test_ids), config.experiment.threads):
        report.rows.extend(rows)
    return report


def sweep_M(config, M_list=None, deployment=None, fields=None, schemes=("CSR", "CDG")):
    dep = _resolve(config, deployment)
    M_list = list(config.experiment.M_list if M_list is None else M_list)
    if not M_list:
        raise ValueError("M_list must be non-empty")
    report = RecoveryReport()
    for M in M_list:
        if M > dep.N:
            raise ValueError(f"M={M} exceeds N={dep.N}")
        if "CSR" in schemes:
            report.extend(run_csr_experiment(config, dep, M=M, fields=fields))
        if "CDG" in schemes:
            report.extend(run_cdg_baseline(config, dep, M=M, fields=fields))
    return report


def sparse_fields_in_basis(basis: RepresentationBasis, k, count, seed, first_id=0, scale=10.0):
    """Fields that are exactly ``k``-sparse in ``basis`` (Gaussian amplitudes)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        s = np.zeros(basis.N)
        sup = rng.choice(basis.N, size=k, replace=False)
        s[sup] = scale * rng.standard_normal(k)
        out.append(SensorField(first_id + i, basis.synthesize(s)))
    return out


def report_rows_dicts(report):
    return [{k: v for k, v in asdict(r).items() if k != "x_hat"} for r in report.sorted_rows()]
