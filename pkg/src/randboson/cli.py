"""Command-line pipeline: generate ensembles once, analyze them many ways.

Subcommands: dims, run, stats, gumbel, qmatrix, clusters, venn, atlas,
dboson.  Analysis stages read the JSONL written by `run` and emit CSV whose
first line is a manifest comment.  Exit codes: 0 success, 1 usage error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import __version__, analysis, dboson
from .combinatorics import SystemShape, hilbert_dim, spin_distribution
from .ensemble import EnsembleConfig, read_records, run_ensemble
from .operators import pair_state, triplet_state


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _int_list(text: str):
    return tuple(int(tok) for tok in text.split(",") if tok)


def _build_parser() -> _Parser:
    parser = _Parser(prog="randboson",
                     description="Random two-body ensembles of identical bosons")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dims", parents=[_config_parent()],
                       help="exact spin-multiplet table for one system")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    fmt.add_argument("--csv", action="store_true", help="emit CSV (default)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("run", parents=[_config_parent()],
                       help="draw realizations and solve ground states")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--n", type=_int_list, required=True,
                   help="comma-separated particle numbers, e.g. 4,8,12")
    p.add_argument("--realizations", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--primed", action="store_true",
                   help="remove monopole and J^2 components from each draw")
    p.add_argument("--store-vectors", action="store_true",
                   help="store J-projected ground-state components")
    p.add_argument("--vector-js", type=_int_list, default=None,
                   help="restrict stored components to these J values")
    p.add_argument("--no-gap", action="store_true",
                   help="skip the second eigenpair (faster, no degeneracy flag)")
    p.add_argument("--start-id", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dense-threshold", type=int, default=600)
    p.add_argument("--progress", type=int, default=0,
                   help="print a line every this many realizations")
    p.add_argument("--out", required=True)

    for name, extra in [
        ("stats", ["n"]),
        ("gumbel", ["n", "j"]),
        ("qmatrix", ["n", "j"]),
        ("clusters", ["hi", "lo"]),
        ("venn", ["nset"]),
        ("atlas", ["n", "j"]),
    ]:
        p = sub.add_parser(name, parents=[_config_parent()])
        p.add_argument("--records", required=True, help="JSONL file from `run`")
        p.add_argument("--ell", type=int, default=None,
                       help="required to match the records manifest if given")
        p.add_argument("--out", default=None, help="CSV output (default stdout)")
        if "n" in extra:
            p.add_argument("--n", type=int, required=True)
        if "j" in extra:
            p.add_argument("--j", type=int, required=True)
        if "hi" in extra:
            p.add_argument("--n-hi", type=int, required=True)
            p.add_argument("--n-lo", type=int, required=True)
            p.add_argument("--quartet", action="store_true",
                           help="per-realization cluster from the N=k ground state")
            p.add_argument("--cut", type=float, default=0.8,
                           help="cluster-number cut separating cluster-free states")
        if "nset" in extra:
            p.add_argument("--n-set", type=_int_list, required=True)
        if name == "atlas":
            p.add_argument("--points", type=int, default=360)

    p = sub.add_parser("dboson", parents=[_config_parent()],
                       help="closed-form spin-2 boson results")
    p.add_argument("--mode", required=True,
                   choices=["levels", "ground", "asymptotics", "quadrant"])
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--v0", type=float, default=1.0)
    p.add_argument("--v2", type=float, default=0.0)
    p.add_argument("--v4", type=float, default=0.0)
    p.add_argument("--residue", type=int, default=0)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default=None)
    return parser


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", default=None,
                        help="key=value file; command-line flags override")
    return parent


def _expand_config(argv):
    """Splice --config file entries in front of the user flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise _UsageError("--config needs a file argument")
    path = argv[i + 1]
    extra = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _UsageError(f"bad config line: {line!r}")
            key, value = (tok.strip() for tok in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() == "true":
                extra.append(flag)
            elif value.lower() == "false":
                continue
            else:
                extra.extend([flag, value])
    # insert after the subcommand so user flags, parsed later, win
    head = argv[:1]
    return head + extra + argv[1:]


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _write_csv(path, manifest: dict, header, rows):
    fh = _open_out(path)
    try:
        fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _load_records(args):
    manifest, records, footer = read_records(args.records)
    if args.ell is not None and manifest["ell"] != args.ell:
        raise RuntimeError(
            f"--ell {args.ell} does not match records manifest ell={manifest['ell']}")
    return manifest, records, footer


def _cmd_dims(args) -> int:
    shape = SystemShape(ell=args.ell, n=args.n)
    dist = spin_distribution(shape)
    manifest = {"command": "dims", "ell": args.ell, "n": args.n,
                "total": dist.total, "hilbert_dim": hilbert_dim(shape)}
    if args.json:
        payload = {"ell": args.ell, "n": args.n,
                   "counts": {str(j): c for j, c in dist.counts.items()},
                   "total": dist.total, "hilbert_dim": hilbert_dim(shape),
                   "beta_fit": dist.beta_fit}
        fh = _open_out(args.out)
        try:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
        finally:
            if fh is not sys.stdout:
                fh.close()
    else:
        rows = [(j, dist.counts.get(j, 0)) for j in range(0, shape.j_max + 1)]
        _write_csv(args.out, manifest, ["J", "multiplets"], rows)
    print(f"dims: ell={args.ell} N={args.n} total={dist.total} "
          f"hilbert={hilbert_dim(shape)}")
    return 0


def _cmd_run(args) -> int:
    config = EnsembleConfig(
        ell=args.ell, n_list=tuple(args.n), realizations=args.realizations,
        master_seed=args.seed, primed=args.primed,
        store_vectors=args.store_vectors, vector_js=args.vector_js,
        dense_threshold=args.dense_threshold, track_gap=not args.no_gap)
    footer = run_ensemble(config, args.out, start_id=args.start_id,
                          threads=args.threads, progress=args.progress or None)
    print(f"run: wrote {footer['records']} records to {args.out} "
          f"(degenerate={footer['degenerate_entries']}, "
          f"failed={footer['failed_entries']})")
    return 0


def _cmd_stats(args) -> int:
    manifest, records, _ = _load_records(args)
    probs = analysis.spin_probabilities(records, args.n)
    rows = [(j, f"{p:.6f}", f"{sig:.6f}") for j, (p, sig) in probs.items()]
    out_manifest = {"command": "stats", "records": args.records,
                    "ell": manifest["ell"], "n": args.n,
                    "config_hash": manifest["config_hash"]}
    _write_csv(args.out, out_manifest, ["J", "probability", "sigma"], rows)
    top = max(probs.items(), key=lambda kv: kv[1][0])
    print(f"stats: N={args.n}, {len(probs)} spins, "
          f"max P({top[0]})={top[1][0]:.3f}")
    return 0


def _cmd_gumbel(args) -> int:
    manifest, records, _ = _load_records(args)
    energies = analysis.ground_energies(records, args.n, args.j)
    fit = analysis.fit_gumbel(energies)
    sigma_max = args.n * (args.n - 1) / 2.0
    try:
        inv = analysis.invert_gumbel(fit.a, fit.b, sigma_max)
        d_eff, var_e, ratio = inv.d_eff, inv.var_e, inv.ratio
    except ValueError:
        # fit location outside the minima model (e.g. unprimed monopole shift)
        d_eff = var_e = ratio = float("nan")
    ks = analysis.ks_statistic(energies, fit.a, fit.b)
    out_manifest = {"command": "gumbel", "records": args.records,
                    "ell": manifest["ell"], "n": args.n, "j": args.j,
                    "samples": int(energies.size),
                    "config_hash": manifest["config_hash"]}
    rows = [(f"{fit.a:.8g}", f"{fit.b:.8g}", f"{d_eff:.6g}",
             f"{var_e:.8g}", f"{ratio:.6g}", f"{ks:.6g}")]
    _write_csv(args.out, out_manifest,
               ["a", "b", "d_eff", "var_e", "ratio_sigma_max", "ks"], rows)
    print(f"gumbel: N={args.n} J={args.j} a={fit.a:.4f} b={fit.b:.4f} "
          f"D={d_eff:.2f} ratio={ratio:.3f} KS={ks:.4f}")
    return 0


def _cmd_qmatrix(args) -> int:
    manifest, records, _ = _load_records(args)
    comps = analysis.components_for(records, args.n, args.j)
    if not comps:
        raise RuntimeError("records carry no stored components for this (N, J); "
                           "rerun with --store-vectors")
    qa = analysis.q_analysis(comps)
    out_manifest = {"command": "qmatrix", "records": args.records,
                    "ell": manifest["ell"], "n": args.n, "j": args.j,
                    "count": qa.count, "entropy": round(qa.entropy, 12),
                    "d_gs": round(qa.d_gs, 12),
                    "config_hash": manifest["config_hash"]}
    rows = [(i + 1, f"{q:.8g}") for i, q in enumerate(qa.q)]
    _write_csv(args.out, out_manifest, ["rank", "eigenvalue"], rows)
    lead = ", ".join(f"{q:.3f}" for q in qa.q[:3])
    print(f"qmatrix: N={args.n} J={args.j} W={qa.count} q=({lead}...) "
          f"D_gs={qa.d_gs:.2f}")
    return 0


def _cmd_clusters(args) -> int:
    manifest, records, _ = _load_records(args)
    ell = manifest["ell"]
    k = args.n_hi - args.n_lo
    if args.quartet:
        cluster = None
    elif k == 2:
        cluster = pair_state(ell)
    elif k == 3:
        cluster = triplet_state(ell)
    else:
        raise RuntimeError(f"no fixed cluster of size {k}; use --quartet")
    report = analysis.cluster_report(records, ell, args.n_hi, args.n_lo,
                                     cluster=cluster)
    rows = [(r.rid, f"{r.removal_overlap:.10g}", f"{r.removal_norm:.10g}",
             f"{r.addition_overlap:.10g}", f"{r.addition_norm:.10g}")
            for r in report.rows]
    out_manifest = {"command": "clusters", "records": args.records, "ell": ell,
                    "n_hi": args.n_hi, "n_lo": args.n_lo,
                    "quartet": bool(args.quartet),
                    "number_grid": [round(g, 10) for g in report.number_grid],
                    "config_hash": manifest["config_hash"]}
    _write_csv(args.out, out_manifest,
               ["id", "removal_overlap_sq", "removal_norm",
                "addition_overlap_sq", "addition_norm"], rows)
    numbers = [r.removal_norm for r in report.rows]
    if numbers:
        frac = sum(1 for x in numbers if x < args.cut) / len(numbers)
        print(f"clusters: {len(rows)} qualifying realizations, "
              f"cluster-free fraction (<{args.cut}) = {frac:.3f}")
    else:
        print("clusters: no qualifying realizations")
    return 0


def _cmd_venn(args) -> int:
    manifest, records, _ = _load_records(args)
    result = analysis.venn_fractions(records, args.n_set)
    rows = []
    for pattern, frac in result.fractions.items():
        label = "+".join(str(n) for n in pattern) if pattern else "none"
        rows.append((label, f"{frac:.6f}"))
    out_manifest = {"command": "venn", "records": args.records,
                    "ell": manifest["ell"], "n_set": list(result.n_set),
                    "total": result.total, "excluded": result.excluded,
                    "config_hash": manifest["config_hash"]}
    _write_csv(args.out, out_manifest, ["zero_spin_in", "fraction"], rows)
    full = result.fractions.get(result.n_set, 0.0)
    print(f"venn: n_set={result.n_set} total={result.total} "
          f"all-J0 fraction={full:.3f} (excluded {result.excluded})")
    return 0


def _cmd_atlas(args) -> int:
    manifest, records, _ = _load_records(args)
    comps = analysis.components_for(records, args.n, args.j)
    if len(comps) < 2:
        raise RuntimeError("need stored components to orient the atlas")
    qa = analysis.q_analysis(comps)
    if qa.q.size < 3:
        raise RuntimeError("fewer than three basis states; no sphere to draw")
    shape = SystemShape(ell=manifest["ell"], n=args.n)
    result = analysis.atlas_curve(shape, qa.vectors, n_theta=args.points,
                                  target_j=args.j)
    rows = [(p.label, f"{p.theta:.8g}", *(f"{o:.8g}" for o in p.overlaps))
            for p in list(result.points) + list(result.specials)]
    out_manifest = {"command": "atlas", "records": args.records,
                    "ell": manifest["ell"], "n": args.n, "j": args.j,
                    "points": args.points, "config_hash": manifest["config_hash"]}
    _write_csv(args.out, out_manifest,
               ["label", "theta", "overlap1", "overlap2", "overlap3"], rows)
    print(f"atlas: {len(result.points)} curve points, "
          f"{len(result.specials)} marked Hamiltonians")
    return 0


def _cmd_dboson(args) -> int:
    params = dboson.DBosonParams(v0=args.v0, v2=args.v2, v4=args.v4)
    manifest = {"command": "dboson", "mode": args.mode}
    if args.mode == "levels":
        levels = dboson.dboson_levels(args.n, params)
        rows = [(lv.nu, lv.f, lv.j, f"{lv.e_rel:.10g}") for lv in levels]
        _write_csv(args.out, manifest, ["nu", "f", "J", "e_rel"], rows)
        print(f"dboson levels: N={args.n}, {len(levels)} levels "
              f"(beta={params.beta:.4f}, gamma={params.gamma:.4f})")
    elif args.mode == "ground":
        g = dboson.dboson_ground(args.n, params)
        _write_csv(args.out, manifest, ["J", "nu", "e_rel", "tie"],
                   [(g.j, g.nu, f"{g.e_rel:.10g}", g.tie)])
        print(f"dboson ground: N={args.n} J={g.j} nu={g.nu}")
    elif args.mode == "asymptotics":
        p0, p2, pmax = dboson.dboson_asymptotics(args.residue, args.samples,
                                                 seed=args.seed)
        _write_csv(args.out, {**manifest, "residue": args.residue,
                              "samples": args.samples},
                   ["P0", "P2", "Pmax"],
                   [(f"{p0:.6f}", f"{p2:.6f}", f"{pmax:.6f}")])
        print(f"dboson asymptotics: residue {args.residue} -> "
              f"P(0)={p0:.3f} P(2)={p2:.3f} P(Jmax)={pmax:.3f}")
    else:
        value = dboson.quadrant_probability()
        print(f"{value:.4f}")
    return 0


_COMMANDS = {
    "dims": _cmd_dims,
    "run": _cmd_run,
    "stats": _cmd_stats,
    "gumbel": _cmd_gumbel,
    "qmatrix": _cmd_qmatrix,
    "clusters": _cmd_clusters,
    "venn": _cmd_venn,
    "atlas": _cmd_atlas,
    "dboson": _cmd_dboson,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _expand_config(argv)
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
