"""Batch command-line front end.

Subcommands expose sampling, counting, rate evaluation, the exact L = 1
law, tail estimation, and the replicated experiments, all seeded and
reproducible.  Scalar results go to stdout as JSON, tables to CSV files
(RFC 4180, UTF-8, header row), and every run emits a manifest with the
command, parameters, seed, tool version and timestamps: a sidecar
`<out>.manifest.json` for file outputs, an embedded "manifest" object for
stdout outputs.  Numeric output carries 17 significant digits.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 numeric reliability,
5 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, exact_l1, experiments, gaf, rates, zeros

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_RESOURCE = 5


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _serialize(obj, indent: int = 0) -> str:
    # Bespoke JSON writer: the stdlib encoder pins float repr, and the
    # output contract is 17 significant digits (plus "inf"-as-string).
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad_in}{json.dumps(str(k))}: {_serialize(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad_in}{_serialize(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x) or math.isnan(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _dump_json(obj, fp=None) -> str:
    text = _serialize(obj)
    if fp is not None:
        fp.write(text + "\n")
    return text


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _manifest(command: str, params: dict, seed) -> dict:
    return {
        "command": command,
        "params": params,
        "seed": seed,
        "tool_version": __version__,
        "started": _now(),
        "finished": None,
    }


def _finish_manifest(manifest: dict, out_path: str | None, extra: dict | None = None) -> dict:
    manifest["finished"] = _now()
    if extra:
        manifest.update(extra)
    if out_path is not None:
        side = out_path + ".manifest.json"
        with open(side, "w", encoding="utf-8") as fp:
            _dump_json(manifest, fp)
    return manifest


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


class UsageError(Exception):
    pass


def _positive_seed(value: str) -> int:
    seed = int(value)
    if seed < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return seed


def _radius(value: str) -> float:
    r = float(value)
    if not (0.0 < r < 1.0):
        raise argparse.ArgumentTypeError(f"radius must lie in (0, 1), got {value}")
    return r


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="hypgaf",
        description="Zero statistics of hyperbolic Gaussian analytic functions.",
    )
    top.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("HYPGAF_THREADS", "1")),
        help="worker parallelism inside experiments (env HYPGAF_THREADS)",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a truncated realization to CSV (n, re, im)")
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--r", type=_radius, required=True)
    p.add_argument("--eps-tail", type=float, default=1e-10)
    p.add_argument("--seed", type=_positive_seed, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("count", help="count zeros in |z| <= r (winding, roots or both)")
    p.add_argument("--in", dest="infile", help="coefficient CSV from `sample`")
    p.add_argument("--L", type=float)
    p.add_argument("--gen-r", type=_radius, help="generation radius (default (1+r)/2)")
    p.add_argument("--eps-tail", type=float, default=1e-10)
    p.add_argument("--seed", type=_positive_seed, default=0)
    p.add_argument("--r", type=_radius, required=True)
    p.add_argument("--method", choices=["winding", "roots", "both"], default="both")

    p = sub.add_parser("rate", help="rate function / deviation constant evaluation")
    p.add_argument("--alpha", type=float, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--x", type=float)
    group.add_argument("--t", type=float)
    p.add_argument("--numeric-check", action="store_true")

    p = sub.add_parser("dist", help="exact pmf of the L=1 count to CSV (k, prob)")
    p.add_argument("--r", type=_radius, required=True)
    p.add_argument("--eps-tv", type=float, default=1e-12)
    p.add_argument("--out", required=True)

    p = sub.add_parser("tail", help="tail probability P[count >= V]")
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--r", type=_radius, required=True)
    p.add_argument("--V", type=int, required=True)
    p.add_argument("--method", choices=["exact", "mc", "tilted"], required=True)
    p.add_argument("--trials", type=int, default=10**4)
    p.add_argument("--seed", type=_positive_seed, default=0)
    p.add_argument("--eps-tv", type=float, default=1e-12)

    p = sub.add_parser("experiment", help="replicated experiment tables to CSV")
    p.add_argument(
        "--name", choices=["moments", "deviation", "overcrowding", "certificate"], required=True
    )
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--r", type=_radius, default=0.9)
    p.add_argument("--trials", type=int, default=10**4)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--j-min", type=int, default=4)
    p.add_argument("--j-max", type=int, default=8)
    p.add_argument("--eps-tv", type=float, default=1e-12)
    p.add_argument("--rule-constant", type=float, default=2.0)
    p.add_argument("--m", type=int, default=800)
    p.add_argument("--seed", type=_positive_seed, default=0)
    p.add_argument("--out", required=True)
    return top


def _cmd_sample(args) -> int:
    params = gaf.GafParams(L=args.L, r=args.r, epsilon_tail=args.eps_tail)
    manifest = _manifest(
        "sample", {"L": args.L, "r": args.r, "eps_tail": args.eps_tail}, args.seed
    )
    sample = gaf.sample_gaf(params, args.seed)
    rows = [
        (n, float(c.real), float(c.imag)) for n, c in enumerate(sample.coeffs)
    ]
    _write_csv(args.out, ["n", "re", "im"], rows)
    _finish_manifest(
        manifest,
        args.out,
        {
            "derived": {
                "truncation_degree": sample.truncation_degree,
                "tail_sigma2": sample.tail_sigma2,
            }
        },
    )
    return EXIT_OK


def _load_sample_csv(path: str) -> gaf.GafSample:
    with open(path, encoding="utf-8", newline="") as fp:
        reader = csv.DictReader(fp)
        coeffs = [complex(float(row["re"]), float(row["im"])) for row in reader]
    if not coeffs:
        raise UsageError(f"no coefficient rows in {path}")
    side = path + ".manifest.json"
    L, r_gen, tail, seed = 1.0, None, 0.0, 0
    if os.path.exists(side):
        with open(side, encoding="utf-8") as fp:
            meta = json.load(fp)
        L = float(meta["params"]["L"])
        r_gen = float(meta["params"]["r"])
        tail = float(meta.get("derived", {}).get("tail_sigma2", 0.0))
        seed = int(meta.get("seed", 0))
    if r_gen is None:
        r_gen = 1.0 - 1e-9  # bare polynomial: treat the tail as exactly zero
    arr = np.asarray(coeffs, dtype=np.complex128)
    return gaf.GafSample(
        coeffs=arr,
        truncation_degree=len(arr) - 1,
        seed=seed,
        tail_sigma2=tail,
        params=gaf.GafParams(L=L, r=r_gen),
    )


def _cmd_count(args) -> int:
    if args.infile:
        sample = _load_sample_csv(args.infile)
        source = {"in": args.infile}
    else:
        if args.L is None:
            raise UsageError("count needs --in or sampling flags (--L ...)")
        gen_r = args.gen_r if args.gen_r is not None else 0.5 * (1.0 + args.r)
        params = gaf.GafParams(L=args.L, r=gen_r, epsilon_tail=args.eps_tail)
        sample = gaf.sample_gaf(params, args.seed)
        source = {"L": args.L, "gen_r": gen_r, "eps_tail": args.eps_tail}
    if args.r >= sample.params.r:
        raise UsageError(
            f"count radius {args.r} must be strictly inside the sample radius {sample.params.r}"
        )
    cfg = zeros.CountConfig(r=args.r)
    manifest = _manifest("count", {**source, "r": args.r, "method": args.method}, args.seed)
    out: dict = {}
    if args.method in ("winding", "both"):
        res = zeros.count_winding(sample, cfg)
        out["winding"] = {
            "count": res.count,
            "nodes_used": res.nodes_used,
            "contour_min_modulus": res.contour_min_modulus,
        }
        out["count"] = res.count
        out["method"] = "winding"
    if args.method in ("roots", "both"):
        res = zeros.count_roots(sample, cfg)
        out["roots"] = {
            "count": res.count,
            "sweeps": res.nodes_used,
            "boundary_distance": res.contour_min_modulus,
        }
        out["count"] = res.count
        out["method"] = args.method
    if args.method == "both":
        out["agreement"] = out["winding"]["count"] == out["roots"]["count"]
    out["manifest"] = _finish_manifest(manifest, None)
    _dump_json(out, sys.stdout)
    return EXIT_OK


def _cmd_rate(args) -> int:
    if args.alpha <= 0.5:
        raise UsageError("--alpha must exceed 0.5")
    manifest = _manifest(
        "rate",
        {"alpha": args.alpha, "x": args.x, "t": args.t, "numeric_check": args.numeric_check},
        None,
    )
    if args.t is not None:
        value = rates.c_of_t(args.alpha, args.t)
        out = {"value": value, "kind": "deviation-constant", "t": args.t}
        query_x = args.t
    else:
        res = rates.rate_function(args.alpha, args.x)
        value = res.value
        out = {
            "value": value,
            "kind": "rate-function",
            "x": args.x,
            "regime": res.regime.value,
            "branch": res.branch.value,
        }
        query_x = args.x
    if args.numeric_check:
        oracle = rates.legendre_numeric(args.alpha, query_x)
        out["numeric_oracle"] = oracle
        if math.isinf(value) and math.isinf(oracle):
            out["abs_diff"] = 0.0
        else:
            out["abs_diff"] = abs(value - oracle)
    out["manifest"] = _finish_manifest(manifest, None)
    _dump_json(out, sys.stdout)
    return EXIT_OK


def _cmd_dist(args) -> int:
    manifest = _manifest("dist", {"r": args.r, "eps_tv": args.eps_tv}, None)
    model = exact_l1.build_model(args.r, args.eps_tv)
    pm = exact_l1.pmf(model)
    rows = [(k, float(p)) for k, p in enumerate(pm.values)]
    _write_csv(args.out, ["k", "prob"], rows)
    _finish_manifest(
        manifest,
        args.out,
        {
            "moments": {
                "mean": model.mean,
                "variance": model.variance,
                "K": model.K,
                "tv_bound": model.tv_bound,
            }
        },
    )
    return EXIT_OK


def _cmd_tail(args) -> int:
    if args.method in ("exact", "tilted") and args.L != 1.0:
        raise UsageError(f"--method {args.method} is only valid with --L 1")
    manifest = _manifest(
        "tail",
        {"L": args.L, "r": args.r, "V": args.V, "method": args.method, "trials": args.trials},
        args.seed,
    )
    if args.method == "exact":
        est = experiments.tail_exact_estimate(args.r, args.V, args.eps_tv)
    elif args.method == "tilted":
        model = exact_l1.build_model(args.r, args.eps_tv)
        est = experiments.tail_tilted_l1(model, args.V, args.trials, args.seed)
    else:
        est = experiments.tail_plain_mc(
            args.L, args.r, args.V, args.trials, args.seed, threads=args.threads
        )
    out = {
        "p_hat": est.p_hat,
        "log_p": est.log_p,
        "stderr": est.stderr,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "replicates": est.replicates,
        "method": est.method.value,
        "flag": est.flag,
        "manifest": _finish_manifest(manifest, None),
    }
    _dump_json(out, sys.stdout)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    manifest = _manifest(
        "experiment",
        {
            "name": args.name,
            "L": args.L,
            "r": args.r,
            "trials": args.trials,
            "alpha": args.alpha,
            "t": args.t,
            "j_min": args.j_min,
            "j_max": args.j_max,
            "eps_tv": args.eps_tv,
            "rule_constant": args.rule_constant,
            "m": args.m,
        },
        args.seed,
    )
    if args.name == "moments":
        res = experiments.empirical_moments(
            args.L, args.r, args.trials, args.seed, threads=args.threads
        )
        header = ["L", "r", "trials", "mean", "variance", "stderr_mean", "resampled"]
        rows = [(args.L, args.r, res.trials, res.mean, res.variance, res.stderr_mean, res.resampled)]
    elif args.name == "deviation":
        table = experiments.deviation_scaling_l1(
            args.alpha, args.t, range(args.j_min, args.j_max + 1), args.eps_tv
        )
        header = ["j", "r", "v1", "threshold_low", "threshold_high", "log_p", "ratio"]
        rows = [
            (row.j, row.r, row.v1, row.threshold_low, row.threshold_high, row.log_p, row.ratio)
            for row in table
        ]
    elif args.name == "overcrowding":
        grid = [1.0 - 2.0**-j for j in range(args.j_min, args.j_max + 1)]
        c = args.rule_constant

        def rule(r: float) -> float:
            return c / (1.0 - r) * math.log(1.0 / (1.0 - r))

        table = experiments.overcrowding_scaling_l1(
            grid, rule, rule_constant=c, epsilon_tv=args.eps_tv
        )
        header = ["r", "V", "neg_log_p", "normalized"]
        rows = [(row.r, row.V, row.neg_log_p, row.normalized) for row in table]
    else:
        rep = experiments.build_certificate(args.L, args.r, args.m, args.seed)
        header = ["L", "r", "m", "rouche_margin", "verified_count"]
        rows = [(args.L, args.r, rep.m, rep.rouche_margin, rep.verified_count)]
    _write_csv(args.out, header, rows)
    _finish_manifest(manifest, args.out)
    return EXIT_OK


_DISPATCH = {
    "sample": _cmd_sample,
    "count": _cmd_count,
    "rate": _cmd_rate,
    "dist": _cmd_dist,
    "tail": _cmd_tail,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, experiments.TiltInfeasible) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (zeros.UnreliableContour, zeros.NonConvergent, zeros.BoundaryAmbiguous) as exc:
        _dump_json({"error": type(exc).__name__, "detail": str(exc)}, sys.stderr)
        return EXIT_NUMERIC
    except experiments.CertificateFailed as exc:
        _dump_json({"error": "CertificateFailed", "detail": str(exc)}, sys.stderr)
        return EXIT_NUMERIC
    except (gaf.ResourceLimitError, exact_l1.ResourceLimitError) as exc:
        _dump_json({"error": "ResourceLimit", "detail": str(exc)}, sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
