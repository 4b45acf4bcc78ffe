"""Random-interaction sampling, the primed transform, and ensemble runs.

Couplings are drawn from a counter-based generator (Philox keyed by
(master_seed, realization id)) mapped through a fixed rational approximation
of the inverse normal CDF, so any realization is reproducible in isolation
and across platforms.  Runs stream JSON-Lines: one manifest line, one record
per realization in id order, one footer line.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .combinatorics import SystemShape
from .fock import enumerate_sector
from .operators import HamiltonianFamily, InteractionParams
from .solver import (JBASIS_DENSE_LIMIT, GroundSolution, SolverError,
                     j_subspace_basis, project_onto_j, solve_ground)

__all__ = [
    "EnsembleConfig",
    "PrimedCoefficients",
    "sample_interaction",
    "primed_transform",
    "run_ensemble",
    "read_records",
    "FORMAT_NAME",
]

FORMAT_NAME = "randboson-ensemble-v1"


@dataclass(frozen=True)
class EnsembleConfig:
    ell: int
    n_list: tuple
    realizations: int
    master_seed: int
    primed: bool = False
    store_vectors: bool = False
    vector_js: tuple | None = None  # restrict stored components to these J
    dense_threshold: int = 600
    track_gap: bool = True  # False: single eigenpair, no degeneracy detection

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if not self.n_list or any(n < 2 for n in self.n_list):
            raise ValueError("n_list must be non-empty with every N >= 2")

    def hash(self) -> str:
        payload = json.dumps({
            "format": FORMAT_NAME,
            "ell": self.ell,
            "n_list": list(self.n_list),
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "primed": self.primed,
            "store_vectors": self.store_vectors,
            "vector_js": None if self.vector_js is None else list(self.vector_js),
            "track_gap": self.track_gap,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PrimedCoefficients:
    m_term: float
    f_term: float
    alpha: float
    gamma: float


# --- deterministic normal draws ---------------------------------------------

# Wichura's PPND16 rational approximation of the inverse normal CDF
# (Algorithm AS 241), accurate to ~1e-16; fixed coefficients keep the draw
# stream identical everywhere.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4, 5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1,
      1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2,
      1.24266094738807843860e-3, 2.71155556874348757815e-5,
      2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4,
      1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coeffs, r):
    out = np.full_like(r, coeffs[-1])
    for c in reversed(coeffs[:-1]):
        out = out * r + c
    return out


def inverse_normal_cdf(p):
    """PPND16 quantile of the standard normal, vectorized, for p in (0, 1)."""
    p = np.asarray(p, dtype=float)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] * q[central]
        out[central] = q[central] * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if np.any(tail):
        pt = p[tail]
        r = np.where(q[tail] < 0.0, pt, 1.0 - pt)
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        val[near] = _poly(_C, r[near] - 1.6) / _poly(_D, r[near] - 1.6)
        val[~near] = _poly(_E, r[~near] - 5.0) / _poly(_F, r[~near] - 5.0)
        out[tail] = np.where(q[tail] < 0.0, -val, val)
    return out if out.ndim else float(out)


def _raw_uniforms(master_seed: int, realization_id: int, count: int) -> np.ndarray:
    bitgen = np.random.Philox(counter=[0, 0, 0, realization_id],
                              key=[master_seed, 0])
    raw = bitgen.random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def sample_interaction(master_seed: int, realization_id: int, ell: int) -> InteractionParams:
    """ell+1 independent standard-normal couplings for one realization."""
    u = _raw_uniforms(master_seed, realization_id, ell + 1)
    return InteractionParams(ell=ell, v=tuple(inverse_normal_cdf(u)))


# --- primed transform --------------------------------------------------------

def primed_transform(params: InteractionParams):
    """Remove the monopole and J^2-proportional pieces of a coupling set.

    Least-squares over all two-particle states (weight 2L+1):
    V'_L = V_L - alpha - gamma * (L(L+1) - 2 l(l+1)).
    """
    ell = params.ell
    ls = np.arange(0, 2 * ell + 1, 2, dtype=float)
    w = 2.0 * ls + 1.0
    g = ls * (ls + 1.0) - 2.0 * ell * (ell + 1.0)
    v = params.as_array()
    m_term = float(np.dot(w, v) / w.sum())
    f_term = float(np.dot(w * g, v) / np.dot(w, g))
    gamma = 3.0 * (f_term - m_term) / ((2 * ell + 3) * (ell + 2) * (2 * ell - 1))
    alpha = m_term - gamma * ell
    primed = InteractionParams(ell=ell, v=tuple(v - alpha - gamma * g))
    return primed, PrimedCoefficients(m_term=m_term, f_term=f_term,
                                      alpha=alpha, gamma=gamma)


# --- JSONL serialization -----------------------------------------------------

def _fmt(x: float) -> str:
    if np.isnan(x):
        return "NaN"
    if np.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def _record_line(rec: dict) -> str:
    parts = [f'"id": {rec["id"]}', f'"seed": {rec["seed"]}',
             f'"v": {_fmt_list(rec["v"])}',
             f'"v_primed": {_fmt_list(rec["v_primed"])}',
             f'"alpha": {_fmt(rec["alpha"])}', f'"gamma": {_fmt(rec["gamma"])}']
    res_parts = []
    for n in sorted(rec["results"]):
        entry = rec["results"][n]
        if "failed" in entry:
            body = f'"failed": {json.dumps(entry["failed"])}'
        else:
            body = (f'"e0": {_fmt(entry["e0"])}, "j": {entry["j"]}, '
                    f'"gap": {_fmt(entry["gap"])}, '
                    f'"degenerate": {"true" if entry["degenerate"] else "false"}')
            if "components" in entry:
                body += f', "components": {_fmt_list(entry["components"])}'
        res_parts.append(f'"{n}": {{{body}}}')
    parts.append('"results": {' + ", ".join(res_parts) + "}")
    return "{" + ", ".join(parts) + "}"


def read_records(path):
    """Load a JSONL run: (manifest, records, footer)."""
    manifest, footer, records = None, None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "manifest" in obj:
                manifest = obj["manifest"]
            elif "footer" in obj:
                footer = obj["footer"]
            else:
                obj["results"] = {int(k): v for k, v in obj["results"].items()}
                records.append(obj)
    if manifest is None:
        raise ValueError(f"{path} has no manifest line")
    return manifest, records, footer


# --- the run loop ------------------------------------------------------------

class _SectorContext:
    """Per-N machinery reused across realizations."""

    def __init__(self, ell: int, n: int, store: bool, vector_js,
                 dense_threshold: int, track_gap: bool = True):
        self.shape = SystemShape(ell=ell, n=n)
        self.basis = enumerate_sector(self.shape, 0)
        self.family = HamiltonianFamily(self.basis)
        self.j2 = self.family.j_squared()
        self.store = store
        self.vector_js = vector_js
        self.dense_threshold = dense_threshold
        self.track_gap = track_gap
        if store and self.basis.dim > JBASIS_DENSE_LIMIT:
            raise MemoryError(
                f"cannot store J-projected vectors at dim {self.basis.dim} "
                f"(> {JBASIS_DENSE_LIMIT}); drop --store-vectors for N={n}")

    def solve(self, params: InteractionParams) -> dict:
        try:
            sol = solve_ground(self.family.hamiltonian(params), self.j2,
                               dense_threshold=self.dense_threshold,
                               track_gap=self.track_gap)
        except SolverError as exc:
            return {"failed": str(exc)}
        entry = {"e0": sol.energy, "j": sol.spin, "gap": sol.gap,
                 "degenerate": sol.degenerate}
        if self.store and sol.spin >= 0 and not sol.degenerate:
            if self.vector_js is None or sol.spin in self.vector_js:
                jb = j_subspace_basis(self.shape, sol.spin)
                entry["components"] = list(project_onto_j(sol.vector, jb))
        return entry


def _compute_record(config: EnsembleConfig, contexts: dict, rid: int) -> dict:
    drawn = sample_interaction(config.master_seed, rid, config.ell)
    primed, coeffs = primed_transform(drawn)
    used = primed if config.primed else drawn
    results = {n: contexts[n].solve(used) for n in config.n_list}
    return {"id": rid, "seed": config.master_seed, "v": list(drawn.v),
            "v_primed": list(primed.v), "alpha": coeffs.alpha,
            "gamma": coeffs.gamma, "results": results}


def run_ensemble(config: EnsembleConfig, out_path, start_id: int = 0,
                 threads: int = 1, progress=None) -> dict:
    """Draw couplings, solve every N, and stream records to out_path."""
    contexts = {n: _SectorContext(config.ell, n, config.store_vectors,
                                  config.vector_js, config.dense_threshold,
                                  config.track_gap)
                for n in config.n_list}
    ids = range(start_id, start_id + config.realizations)
    manifest = {
        "format": FORMAT_NAME, "ell": config.ell, "n_list": list(config.n_list),
        "realizations": config.realizations, "start_id": start_id,
        "master_seed": config.master_seed, "primed": config.primed,
        "store_vectors": config.store_vectors,
        "dense_threshold": config.dense_threshold,
        "track_gap": config.track_gap,
        "config_hash": config.hash(),
    }
    n_degenerate = n_failed = 0
    with open(out_path, "w") as fh:
        fh.write(json.dumps({"manifest": manifest}, sort_keys=True) + "\n")
        if threads > 1:
            pool = ThreadPoolExecutor(max_workers=threads)
            stream = pool.map(lambda i: _compute_record(config, contexts, i),
                              ids, chunksize=8)
        else:
            pool = None
            stream = (_compute_record(config, contexts, i) for i in ids)
        try:
            for done, rec in enumerate(stream, 1):
                for entry in rec["results"].values():
                    if "failed" in entry:
                        n_failed += 1
                    elif entry["degenerate"]:
                        n_degenerate += 1
                fh.write(_record_line(rec) + "\n")
                if progress and done % progress == 0:
                    print(f"  {done}/{config.realizations} realizations", flush=True)
        finally:
            if pool is not None:
                pool.shutdown()
        footer = {"config_hash": config.hash(), "records": config.realizations,
                  "degenerate_entries": n_degenerate, "failed_entries": n_failed}
        fh.write(json.dumps({"footer": footer}, sort_keys=True) + "\n")
    return footer
