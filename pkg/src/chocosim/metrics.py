"""Traffic accounting and run records.

Communication is counted analytically on the send side: a node pays the
bit cost of its message once per neighbor (pairwise mode, the default) or
once in total (broadcast mode). The centralized baseline is the exception:
its coordinator is a hub whose line carries every upload, so the uploads
are also charged to the coordinator and it is normally the busiest node.

Per-iteration run metrics go to CSV with the fixed header
``t,f_avg,grad_sq,consensus,psi,bits_busiest,wall_ms``; run-level metadata
(config echo, run id, timing, divergence) goes to a JSON summary next to
it. CSV content is a pure function of (config, seed): the wall_ms column is
therefore a deterministic 0 placeholder, and real elapsed time is reported
only in the summary.
"""

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = "t,f_avg,grad_sq,consensus,psi,bits_busiest,wall_ms"


class TrafficLedger:
    """Cumulative per-node and per-edge bit counts."""

    def __init__(self, n_nodes):
        if n_nodes < 1:
            raise ValueError("need at least one node")
        self.n_nodes = int(n_nodes)
        self.per_node = np.zeros(self.n_nodes, dtype=np.int64)
        self.per_edge = {}

    def add_message(self, src, dst, bits):
        """One point-to-point payload; charged to the sender."""
        self._check(src, dst, bits)
        self.per_node[src] += int(bits)
        key = (int(src), int(dst))
        self.per_edge[key] = self.per_edge.get(key, 0) + int(bits)

    def add_broadcast(self, src, bits):
        """One payload transmitted once, regardless of neighbor count."""
        self._check(src, src, bits)
        self.per_node[src] += int(bits)

    def add_upload(self, src, hub, bits):
        """Hub upload: charged to the sender and to the hub's line."""
        self._check(src, hub, bits)
        self.per_node[src] += int(bits)
        if hub != src:
            self.per_node[hub] += int(bits)
        key = (int(src), int(hub))
        self.per_edge[key] = self.per_edge.get(key, 0) + int(bits)

    def _check(self, src, dst, bits):
        if not (0 <= src < self.n_nodes and 0 <= dst < self.n_nodes):
            raise ValueError("node index out of range")
        if bits < 0:
            raise ValueError("bits must be >= 0")

    def busiest(self):
        """Largest cumulative per-node bit count."""
        return int(self.per_node.max())

    def total(self):
        return int(self.per_node.sum())


@dataclass
class RunRecord:
    """Logged trajectory of one run plus end-of-run diagnostics."""

    t: list = field(default_factory=list)
    f_avg: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)
    consensus: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    bits_busiest: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    diverged: bool = False
    diverged_at: int = None
    max_grad_norm: float = 0.0
    elapsed_s: float = 0.0
    final_x_mean: np.ndarray = None
    seed: int = 0
    gamma: float = None
    eta: float = None
    ledger: TrafficLedger = None
    workers: object = None
    iterates: list = None

    def add_row(self, t, f_avg, grad_sq, consensus, psi, bits_busiest):
        self.t.append(int(t))
        self.f_avg.append(float(f_avg))
        self.grad_sq.append(float(grad_sq))
        self.consensus.append(float(consensus))
        self.psi.append(float(psi))
        self.bits_busiest.append(int(bits_busiest))
        self.wall_ms.append(0)

    def rows(self):
        return len(self.t)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value):
    # repr of a Python float is the shortest round-trip form: deterministic
    return repr(float(value))


def write_csv(record, path):
    """Write the per-iteration rows; atomic so partial files never appear."""
    lines = [CSV_HEADER]
    for k in range(record.rows()):
        lines.append(
            f"{record.t[k]},{_fmt(record.f_avg[k])},{_fmt(record.grad_sq[k])},"
            f"{_fmt(record.consensus[k])},{_fmt(record.psi[k])},"
            f"{record.bits_busiest[k]},{record.wall_ms[k]}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def run_id(config_dict, seed):
    """Short content id of (config, seed), stable across processes.

    The output directory only says where files go, never what is in them,
    so it is excluded: rerunning a config into a different directory keeps
    the same id (and byte-identical content).
    """
    identity = {k: v for k, v in config_dict.items() if k != "out"}
    blob = json.dumps({"config": identity, "seed": int(seed)}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def write_summary(records, config_dict, path, extra=None):
    """JSON summary for one or more seeds of the same configuration."""
    seeds = [r.seed for r in records]
    payload = {
        "run_ids": {str(r.seed): run_id(config_dict, r.seed) for r in records},
        "config": config_dict,
        "seeds": seeds,
        "diverged": {str(r.seed): r.diverged for r in records},
        "diverged_at": {str(r.seed): r.diverged_at for r in records},
        "elapsed_s": {str(r.seed): round(r.elapsed_s, 3) for r in records},
        "summary": {str(r.seed): summarize(r) for r in records},
    }
    if extra:
        payload.update(extra)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def summarize(record, bit_budget=None, target_f=None):
    """Headline numbers of a run: final/best objective, traffic, budgets."""
    out = {
        "rows": record.rows(),
        "diverged": record.diverged,
        "max_grad_norm": record.max_grad_norm,
    }
    if record.rows():
        out.update(
            final_t=record.t[-1],
            final_f=record.f_avg[-1],
            best_f=min(record.f_avg),
            final_grad_sq=record.grad_sq[-1],
            final_consensus=record.consensus[-1],
            final_psi=record.psi[-1],
            bits_busiest=record.bits_busiest[-1],
        )
    if bit_budget is not None and record.rows():
        within = [k for k in range(record.rows()) if record.bits_busiest[k] <= bit_budget]
        out["best_f_within_bits"] = min(record.f_avg[k] for k in within) if within else None
    if target_f is not None and record.rows():
        hits = [k for k in range(record.rows()) if record.f_avg[k] <= target_f]
        if hits:
            out["bits_to_target"] = record.bits_busiest[hits[0]]
            out["iters_to_target"] = record.t[hits[0]]
        else:
            out["bits_to_target"] = None
            out["iters_to_target"] = None
    return out


def aggregate(records):
    """Per-row mean/std across seeds; rows are aligned by position.

    Divergent runs may be shorter; the aggregate stops at the shortest
    record so every reported row averages all seeds.
    """
    if not records:
        raise ValueError("nothing to aggregate")
    rows = min(r.rows() for r in records)
    fields = ("f_avg", "grad_sq", "consensus", "psi", "bits_busiest")
    table = {"t": list(records[0].t[:rows])}
    for name in fields:
        data = np.array([getattr(r, name)[:rows] for r in records], dtype=float)
        table[f"{name}_mean"] = data.mean(axis=0)
        table[f"{name}_std"] = data.std(axis=0)
    return table


def write_aggregate_csv(records, path):
    table = aggregate(records)
    names = list(table.keys())
    lines = [",".join(names)]
    for k in range(len(table["t"])):
        cells = []
        for name in names:
            value = table[name][k]
            cells.append(str(int(value)) if name == "t" else _fmt(value))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")
