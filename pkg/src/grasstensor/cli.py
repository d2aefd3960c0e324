"""Command-line interface: ``grasstensor {approx,entangle,cluster,select,bench,check}``.

Option precedence is command-line flag, then the ``--config`` JSON file, then
built-in defaults.  Exit status: 0 when the solver converged, 2 when it
stopped without converging (iteration limit or stalled line search), 1 on
any error.  Result files are written atomically; on error nothing is left
in the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import applications as ap
from . import checks
from . import grassmann as gm
from . import io as gio
from . import solvers as sv
from . import tensor as tc

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

DEFAULTS: dict[str, Any] = {
    "method": "newton",
    "eps": None,
    "max_iter": 200,
    "seed": 0,
    "warm_hooi": 20,
    "multi_start": None,
    "out": "out",
    "format": "json",
    "timing": False,
    "ranks": None,
    "codims": None,
    "init": "pda",
    "size": 10,
}


COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "select": {"method": "rcg", "max_iter": 100},
}


def bundled(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(str(resources.files("grasstensor") / "data" / name))


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _common(p: argparse.ArgumentParser, methods=("newton", "rcg", "hooi")):
    p.add_argument("--input", help="input file (a bundled sample is used when omitted)")
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--method", choices=methods, default=None)
    p.add_argument("--eps", type=float, default=None, help="relative gradient tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--warm-hooi", dest="warm_hooi", type=int, default=None,
                   help="HOOI sweeps before the solver (tensor problems)")
    p.add_argument("--multi-start", dest="multi_start", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="summary file format")
    p.add_argument("--timing", action="store_true", default=None,
                   help="fill the millis column of traces (outputs are then not reproducible)")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; status 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grasstensor",
                                     description="Rayleigh-quotient optimization on products of Grassmannians")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx", help="best multilinear-rank approximation of a tensor")
    _common(p)
    p.add_argument("--ranks", type=_int_list, default=None)

    p = sub.add_parser("entangle", help="geometric entanglement of a unit state")
    _common(p, methods=("newton",))

    p = sub.add_parser("cluster", help="subspace clustering of points (CSV rows)")
    _common(p, methods=("newton", "rcg"))
    p.add_argument("--codims", type=_int_list, default=None, help="projector ranks (1 for hyperplanes)")
    p.add_argument("--init", choices=("pda", "random"), default=None)
    p.add_argument("--truth", help="ground truth: CSV of hyperplane normals or JSON {'projectors': [...]}")

    p = sub.add_parser("select", help="row/column selection maximizing the block sum")
    _common(p, methods=("newton", "rcg"))
    p.add_argument("--ranks", type=_int_list, default=None, help="m1 (columns), m2 (rows)")

    p = sub.add_parser("bench", help="compare newton, rcg and hooi on seeded random tensors")
    _common(p)
    p.add_argument("--size", type=int, default=None, help="mode size n of the n x n x n tensor")
    p.add_argument("--ranks", type=_int_list, default=None)

    p = sub.add_parser("check", help="run the self-check battery")
    p.add_argument("--tol-scale", dest="tol_scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def resolve_options(args: argparse.Namespace) -> dict[str, Any]:
    """Merge flags over the config file over defaults."""
    opts = dict(DEFAULTS)
    # the relaxed selection problem is badly conditioned for Newton
    opts.update(COMMAND_DEFAULTS.get(args.command, {}))
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise gio.MalformedInputError(f"{config_path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise gio.MalformedInputError(f"{config_path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(config, dict):
            raise gio.MalformedInputError(f"{config_path}: expected a JSON object")
        for key, value in config.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS and key not in ("input", "truth"):
                raise gio.MalformedInputError(f"{config_path}: unknown option {key!r}")
            opts[key] = value
    for key, value in vars(args).items():
        if value is not None and key != "config":
            opts[key] = value
    for key in ("ranks", "codims"):
        if isinstance(opts.get(key), str):
            opts[key] = _int_list(opts[key])
    return opts


def _solver_config(opts, eps_default: float, **extra) -> sv.SolverConfig:
    eps = opts["eps"] if opts.get("eps") is not None else eps_default
    return sv.SolverConfig(epsilon=float(eps), max_iter=int(opts["max_iter"]),
                           warm_hooi_iters=int(opts["warm_hooi"]), seed=int(opts["seed"]), **extra)


def _exit_code(status: str) -> int:
    return EXIT_OK if status == "converged" else EXIT_NOT_CONVERGED


def _write_outputs(opts, summary: dict, traces: dict[str, list]) -> None:
    out = Path(opts["out"])
    # render everything first so a failure cannot leave a partial set of files
    files: dict[str, str] = {}
    for name, trace in traces.items():
        files[f"{name}.csv"] = gio.trace_to_csv(trace, timing=bool(opts["timing"]))
    if opts["format"] == "json":
        files["result.json"] = gio.dumps(summary)
    else:
        rows = [(k, v) for k, v in summary.items() if not isinstance(v, (list, dict))]
        files["result.csv"] = "key,value\n" + "".join(f"{k},{_csv_value(v)}\n" for k, v in rows)
    for name, text in files.items():
        gio.atomic_write_text(out / name, text)


def _csv_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _complex_list(M: np.ndarray):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        return np.stack([M.real, M.imag], axis=-1).tolist()
    return M.tolist()


def cmd_approx(opts) -> int:
    path = Path(opts["input"]) if opts.get("input") else bundled("sample_2x2x2.json")
    T = gio.read_tensor(path)
    ranks = opts["ranks"] or [1] * T.ndim
    if len(ranks) != T.ndim or any(not 1 <= m <= n for m, n in zip(ranks, T.shape)):
        raise ValueError(f"ranks {ranks} are invalid for tensor shape {T.shape}")
    cfg = _solver_config(opts, 1e-13)
    res = ap.best_rank_approx(T, ranks, cfg, method=opts["method"])
    summary = {
        "command": "approx",
        "input": str(path),
        "shape": list(T.shape),
        "ranks": list(ranks),
        "method": opts["method"],
        "status": res.status,
        "iterations": res.result.iterations,
        "rho": res.value,
        "rel_residual": res.rel_residual,
        "stage_values": res.stage_values,
        "seed": cfg.seed,
        "factors": [_complex_list(U) for U in res.factors],
        "point": gio.point_to_json(res.point),
    }
    _write_outputs(opts, summary, {"trace": res.trace})
    return _exit_code(res.status)


def cmd_entangle(opts) -> int:
    path = Path(opts["input"]) if opts.get("input") else bundled("bell_2x2.json")
    T = gio.read_tensor(path)
    cfg = _solver_config(opts, 1e-13)
    res = ap.entanglement_measure(T.reshape(-1), T.shape, cfg)
    summary = {
        "command": "entangle",
        "input": str(path),
        "dims": list(T.shape),
        "status": res.result.status,
        "iterations": res.result.iterations,
        "rho": res.rho,
        "delta": res.delta,
        "factors": [_complex_list(u) for u in res.factors],
        "seed": cfg.seed,
    }
    _write_outputs(opts, summary, {"trace": res.result.trace})
    return _exit_code(res.result.status)


def _read_truth(path: Path, n: int) -> list[np.ndarray]:
    if path.suffix.lower() == ".json":
        data = gio._load_json(path)
        mats = [np.asarray(P, dtype=float) for P in data.get("projectors", [])]
    else:
        normals = gio.read_csv_matrix(path)
        mats = [np.outer(b, b) / np.dot(b, b) for b in normals]
    for P in mats:
        if P.shape != (n, n):
            raise gio.MalformedInputError(f"{path}: ground truth of shape {P.shape} does not match n = {n}")
    return mats


def cmd_cluster(opts) -> int:
    if opts.get("input"):
        path = Path(opts["input"])
        truth_path = Path(opts["truth"]) if opts.get("truth") else None
    else:
        path = bundled("two_planes.csv")
        truth_path = Path(opts["truth"]) if opts.get("truth") else bundled("two_planes_normals.csv")
    X = gio.read_csv_matrix(path)
    codims = opts["codims"] or [1, 1]
    truth = _read_truth(truth_path, X.shape[1]) if truth_path else None
    if truth is not None and len(truth) != len(codims):
        raise ValueError(f"{len(truth)} ground-truth subspaces for {len(codims)} codimensions")
    prob = ap.ClusterProblem(X, tuple(codims), truth)
    cfg = _solver_config(opts, 1e-10)
    res = ap.cluster_subspaces(prob, cfg, init=opts["init"], method=opts["method"],
                               multi_start=int(opts["multi_start"] or 5), seed=int(opts["seed"]))
    summary = {
        "command": "cluster",
        "input": str(path),
        "codims": list(codims),
        "init": opts["init"],
        "status": res.result.status,
        "iterations": res.result.iterations,
        "rho": res.value,
        "err": res.err,
        "mean_principal_angle": res.mean_angle,
        "init_err": res.init_err,
        "assignments": res.assignments.tolist(),
        "projectors": [P.tolist() for P in res.projectors],
        "seed": int(opts["seed"]),
    }
    _write_outputs(opts, summary, {"trace": res.result.trace})
    return _exit_code(res.result.status)


def cmd_select(opts) -> int:
    path = Path(opts["input"]) if opts.get("input") else bundled("select_2x2.csv")
    Lam = gio.read_csv_matrix(path)
    ranks = opts["ranks"] or [1, 1]
    if len(ranks) != 2:
        raise ValueError("select needs two ranks: m1 (columns), m2 (rows)")
    prob = ap.SelectionProblem(Lam, ranks[0], ranks[1])
    cfg = _solver_config(opts, 1e-2)
    res = ap.combinatorial_select(prob, cfg, method=opts["method"],
                                  multi_start=int(opts["multi_start"] or 8), seed=int(opts["seed"]))
    summary = {
        "command": "select",
        "input": str(path),
        "ranks": list(ranks),
        "rows": res.rows,
        "cols": res.cols,
        "value": res.value,
        "relaxed_value": res.relaxed_value,
        "status": res.result.status,
        "seed": int(opts["seed"]),
    }
    _write_outputs(opts, summary, {"trace": res.result.trace})
    return _exit_code(res.result.status)


def cmd_bench(opts) -> int:
    n = int(opts["size"])
    ranks = opts["ranks"] or [2, 2, 2]
    if any(not 1 <= m <= n for m in ranks):
        raise ValueError(f"ranks {ranks} invalid for mode size {n}")
    rng = np.random.default_rng(int(opts["seed"]))
    T = rng.standard_normal((n,) * len(ranks))
    cfg = _solver_config(opts, 1e-10)
    A = ap.RankOne(T)
    _, factors = tc.hosvd_truncate(T, ranks)
    start = ap._point_from_factors(factors, "real")
    start = sv.hooi(A, start, cfg.warm_hooi_iters)
    summary: dict[str, Any] = {"command": "bench", "size": n, "ranks": list(ranks),
                               "seed": int(opts["seed"]), "epsilon": cfg.epsilon, "methods": {}}
    traces = {}
    code = EXIT_OK
    for method in ("newton", "rcg", "hooi"):
        mcfg = cfg if method != "hooi" else cfg.with_(max_iter=max(cfg.max_iter, 5000))
        res = sv.solve(A, start, method, mcfg)
        traces[f"trace_{method}"] = res.trace
        entry = {"status": res.status, "iterations": res.iterations, "rho": res.value,
                 "relgrad": res.relgrad}
        if opts["timing"]:
            entry["millis"] = res.trace[-1].millis
        summary["methods"][method] = entry
        if res.status != "converged":
            code = EXIT_NOT_CONVERGED
    _write_outputs(opts, summary, traces)
    return code


def cmd_check(args) -> int:
    ok = checks.run_checks(tol_scale=args.tol_scale)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {
    "approx": cmd_approx,
    "entangle": cmd_entangle,
    "cluster": cmd_cluster,
    "select": cmd_select,
    "bench": cmd_bench,
}

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "check":
        return cmd_check(args)
    try:
        opts = resolve_options(args)
        return COMMANDS[args.command](opts)
    except (ValueError, OSError, KeyError) as exc:
        print(f"grasstensor {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
