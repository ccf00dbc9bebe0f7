"""Command-line front end: ``qverify list|verify|sweep|limit|certify``.

Exit status: 0 pass, 1 verification failure, 2 usage or configuration
error, 3 numerical failure (divergence, exhausted escalation).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import mpmath

from . import identities, limits, proofs
from .errors import DomainError, NumericalFailure, QVerifyError, RejectedPointError
from .mpreal import MIN_BITS, PrecisionPolicy

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
ENV_BITS = "QVERIFY_PRECISION_BITS"
FORMATS = ("text", "json", "csv")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    ids: list = field(default_factory=lambda: ["all"])
    samples: int = 25
    seed: int = 0
    precision_bits: int = 192
    tolerance: str | None = None
    format: str = "text"
    output: str | None = None
    workers: int = 1

    def validate(self):
        if self.samples < 1:
            raise UsageError("samples must be at least 1")
        if self.precision_bits < MIN_BITS:
            raise UsageError(f"precision bits must be at least {MIN_BITS}")
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {', '.join(FORMATS)}")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")
        if self.tolerance is not None:
            try:
                tol = float(self.tolerance)
            except ValueError:
                raise UsageError(f"tolerance {self.tolerance!r} is not a number") from None
            if not 0 < tol < 1:
                raise UsageError("tolerance must lie in (0, 1)")
        return self

    @property
    def tolerance_value(self):
        return None if self.tolerance is None else float(self.tolerance)

    @property
    def policy(self) -> PrecisionPolicy:
        return PrecisionPolicy(self.precision_bits)


def _default_bits() -> int:
    raw = os.environ.get(ENV_BITS)
    if raw is None:
        return 192
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{ENV_BITS}={raw!r} is not an integer") from None


def build_config(args) -> RunConfig:
    """Defaults, then the environment, then ``--config``, then explicit flags."""
    values = {"precision_bits": _default_bits()}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(loaded)
    for name in RunConfig.__dataclass_fields__:
        flag = getattr(args, name, None)
        if flag is not None and flag != []:
            values[name] = flag
    if "tolerance" in values and values["tolerance"] is not None:
        values["tolerance"] = str(values["tolerance"])
    return RunConfig(**values).validate()


@contextmanager
def _mapper(workers: int):
    if workers == 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield lambda fn, items: pool.map(fn, items, chunksize=1)


def _num(value, digits=30) -> str:
    return mpmath.nstr(value, digits, min_fixed=-5, max_fixed=5, strip_zeros=False)


@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


# --- list --------------------------------------------------------------------------------


def cmd_list(args) -> int:
    ids = args.ids or [r.id for r in identities.RECORDS]
    records = []
    for i in ids:
        try:
            records.append(identities.get(i))
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    if args.format == "json":
        print(json.dumps([r.describe() for r in records], indent=2, sort_keys=True))
        return EXIT_PASS
    for r in records:
        tag = "  [EXPERIMENTAL]" if r.experimental else ""
        print(f"{r.id:<4} {r.citation}{tag}")
        print(f"     params: {', '.join(r.param_names) or '(none)'}")
        for name, src in r.derived:
            print(f"     {name} = {src}")
        for c in r.constraints:
            print(f"     requires {c}")
    return EXIT_PASS


# --- verify ------------------------------------------------------------------------------


def _resolve_ids(ids):
    if not ids or ids == ["all"]:
        return [r.id for r in identities.RECORDS]
    for i in ids:
        if i not in identities.REGISTRY:
            raise UsageError(f"unknown identity {i!r}")
    return list(ids)


def _verify_job(job):
    identity_id, point, bits, tolerance = job
    try:
        return identities.evaluate(identity_id, point, PrecisionPolicy(bits), tolerance)
    except NumericalFailure as exc:
        return f"{type(exc).__name__}: {exc}"


def run_verify(config: RunConfig) -> dict:
    ids = _resolve_ids(config.ids)
    jobs, owners = [], []
    for i in ids:
        for point in identities.sample_points(i, config.samples, config.seed):
            jobs.append((i, point, config.precision_bits, config.tolerance_value))
            owners.append(i)
    with _mapper(config.workers) as mapper:
        outcomes = list(mapper(_verify_job, jobs))
    results = []
    for i in ids:
        record = identities.get(i)
        rows = [o for o, owner in zip(outcomes, owners) if owner == i]
        points, errors = [], []
        for job, row in zip([j for j, o in zip(jobs, owners) if o == i], rows):
            if isinstance(row, str):
                errors.append(row)
                points.append({"params": {k: str(v) for k, v in job[1].items()}, "error": row,
                               "pass": False})
            else:
                points.append(row.as_strings())
        reports = [r for r in rows if not isinstance(r, str)]
        max_err = max((r.rel_error for r in reports), default=None)
        passed = not errors and all(r.passed for r in reports)
        results.append({
            "id": i,
            "citation": record.citation,
            "experimental": record.experimental,
            "tolerance": repr(config.tolerance_value or record.tolerance),
            "max_rel_error": None if max_err is None else _num(max_err, 6),
            "pass": passed,
            "numerical_failure": bool(errors),
            "points": points,
        })
    gated = [r for r in results if not r["experimental"]]
    if any(r["numerical_failure"] for r in gated):
        status = EXIT_NUMERIC
    elif all(r["pass"] for r in gated):
        status = EXIT_PASS
    else:
        status = EXIT_FAIL
    run_config = asdict(config)
    run_config["ids"] = ids
    run_config.pop("output", None)
    return {
        "run_config": run_config,
        "results": results,
        "summary": {
            "identities": len(results),
            "passed": sum(r["pass"] for r in gated),
            "failed": sum(not r["pass"] for r in gated),
            "experimental": [r["id"] for r in results if r["experimental"]],
            "exit_status": status,
        },
    }


def render_verify(report: dict, fmt: str, out):
    if fmt == "json":
        out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["id", "params", "lhs", "rhs", "rel_error", "terms_lhs", "terms_rhs",
                         "bits", "pass", "experimental"])
        for r in report["results"]:
            for p in r["points"]:
                params = ";".join(f"{k}={v}" for k, v in sorted(p["params"].items()))
                writer.writerow([r["id"], params, p.get("lhs", ""), p.get("rhs", ""),
                                 p.get("rel_error", p.get("error", "")), p.get("terms_lhs", ""),
                                 p.get("terms_rhs", ""), p.get("bits", ""), p["pass"],
                                 r["experimental"]])
        return
    for r in report["results"]:
        verdict = "PASS" if r["pass"] else ("ERROR" if r["numerical_failure"] else "FAIL")
        tag = " EXPERIMENTAL (not gating)" if r["experimental"] else ""
        print(f"{r['id']:<4} {verdict:<5} max rel err {r['max_rel_error']}  "
              f"tol {r['tolerance']}  points {len(r['points'])}{tag}", file=out)
    s = report["summary"]
    print(f"{s['passed']} passed, {s['failed']} failed", file=out)


def cmd_verify(args) -> int:
    config = build_config(args)
    report = run_verify(config)
    with _sink(config.output) as out:
        render_verify(report, config.format, out)
    return report["summary"]["exit_status"]


# --- sweep ------------------------------------------------------------------------------------


def parse_grid(specs) -> dict:
    """``name=lo:hi:step`` (inclusive) or ``name=value`` into value lists."""
    grid = {}
    for spec in specs:
        name, sep, rng = spec.partition("=")
        if not sep or not name:
            raise UsageError(f"malformed grid spec {spec!r}")
        parts = rng.split(":")
        try:
            nums = [Fraction(p) for p in parts]
        except ValueError:
            raise UsageError(f"malformed grid spec {spec!r}") from None
        if len(nums) == 1:
            grid[name] = nums
        elif len(nums) == 3 and nums[2] > 0 and nums[1] >= nums[0]:
            lo, hi, step = nums
            count = int((hi - lo) / step) + 1
            grid[name] = [lo + k * step for k in range(count)]
        else:
            raise UsageError(f"malformed grid spec {spec!r}")
    return grid


def _sweep_job(job):
    identity_id, point, bits, tolerance = job
    record = identities.get(identity_id)
    failed = record.violated(point)
    if failed:
        return ("skip", failed)
    try:
        return ("ok", identities.evaluate(identity_id, point, PrecisionPolicy(bits), tolerance))
    except (NumericalFailure, RejectedPointError, DomainError, ZeroDivisionError) as exc:
        return ("error", str(exc))


def cmd_sweep(args) -> int:
    config = build_config(args)
    if args.id not in identities.REGISTRY:
        raise UsageError(f"unknown identity {args.id!r}")
    record = identities.get(args.id)
    grid = parse_grid(args.param or [])
    if set(grid) != set(record.param_names):
        raise UsageError(f"{record.id} needs a grid for exactly {', '.join(record.param_names)}")
    names = record.param_names
    cells = [{}]
    for name in names:
        cells = [dict(c, **{name: v}) for c in cells for v in grid[name]]
    tolerance = config.tolerance_value or record.tolerance
    jobs = [(record.id, c, config.precision_bits, tolerance) for c in cells]
    with _mapper(config.workers) as mapper:
        outcomes = list(mapper(_sweep_job, jobs))
    rows, worst = [], None
    for cell, (kind, payload) in zip(cells, outcomes):
        row = {k: str(v) for k, v in cell.items()}
        if kind == "ok":
            row["rel_error"] = _num(payload.rel_error, 6)
            worst = payload.rel_error if worst is None else max(worst, payload.rel_error)
        else:
            row["rel_error"] = kind
            row["note"] = payload
        rows.append(row)
    errors = any(kind == "error" for kind, _ in outcomes)
    passed = worst is not None and worst <= tolerance and not errors
    footer = "PASS" if passed else "FAIL"
    with _sink(config.output) as out:
        if config.format == "json":
            doc = {"id": record.id, "tolerance": repr(tolerance), "cells": rows,
                   "max_rel_error": None if worst is None else _num(worst, 6), "result": footer}
            out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        elif config.format == "csv":
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(names + ["rel_error"])
            for row in rows:
                writer.writerow([row[n] for n in names] + [row["rel_error"]])
        else:
            print("  ".join(f"{n:>10}" for n in names) + "   rel_error", file=out)
            for row in rows:
                print("  ".join(f"{row[n]:>10}" for n in names) + f"   {row['rel_error']}", file=out)
            worst_txt = "n/a" if worst is None else _num(worst, 6)
            print(f"{len(rows)} cells, max rel err {worst_txt}: {footer}", file=out)
    if errors:
        return EXIT_NUMERIC
    return EXIT_PASS if passed else EXIT_FAIL


# --- limit ------------------------------------------------------------------------------------


def _limit_job(job):
    pair_id, point = job
    return limits.check_limit_pair(pair_id, point)


def cmd_limit(args, extra) -> int:
    config = build_config(args)
    try:
        pair = limits.get(args.pair)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    given = _parse_extra(extra)
    names = [p.name for p in pair.params]
    if set(given) - set(names):
        raise UsageError(f"{pair.id} takes parameters {', '.join(names) or '(none)'}")
    if given and set(given) != set(names):
        raise UsageError(f"give all of {', '.join(names)} or none")
    if given or not names:
        points = [given]
    else:
        points = [limits.sample_point(pair.id, config.seed, i) for i in range(config.samples)]
    with _mapper(config.workers) as mapper:
        if len(points) == 1:
            # one point: spread its q-ladder over the workers instead
            reports = [limits.check_limit_pair(pair.id, points[0], mapper=mapper)]
        else:
            reports = list(mapper(_limit_job, [(pair.id, p) for p in points]))
    docs = [_limit_doc(r) for r in reports]
    with _sink(config.output) as out:
        if config.format == "json":
            out.write(json.dumps(docs, indent=2, sort_keys=True) + "\n")
        else:
            for d in docs:
                params = ", ".join(f"{k}={v}" for k, v in d["point"].items()) or "no parameters"
                print(f"{d['id']} at {params}", file=out)
                for s in d["sides"]:
                    if d["kind"] == "ratio":
                        print(f"  {s['label']}: limit {s['limit']} ± {s['error']}, "
                              f"classical {s['classical']}, ratio {s['ratio']}", file=out)
                    else:
                        print(f"  {s['label']}: limit {s['limit']} ± {s['error']}, "
                              f"classical {s['classical']}, |diff| {s['deviation']}", file=out)
                if d["kind"] == "ratio":
                    state = "stable" if d["pass"] else "NOT stable"
                    print(f"  ratio spread {d['ratio_spread']} ({state})", file=out)
                else:
                    print(f"  {'PASS' if d['pass'] else 'FAIL'}", file=out)
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


def _parse_extra(extra) -> dict:
    values, it = {}, iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise UsageError(f"unexpected argument {token!r}")
        name, sep, value = token[2:].partition("=")
        if not sep:
            try:
                value = next(it)
            except StopIteration:
                raise UsageError(f"missing value for {token}") from None
        try:
            values[name] = Fraction(value)
        except ValueError:
            raise UsageError(f"{token} needs a number, got {value!r}") from None
    return values


def _limit_doc(r: limits.LimitReport) -> dict:
    sides = []
    for s in r.sides:
        side = {"label": s.label, "limit": _num(s.limit, 20), "error": _num(s.error, 3),
                "classical": _num(s.classical, 20)}
        if r.kind == "ratio":
            side["ratio"] = _num(s.deviation, 12)
        else:
            side["deviation"] = _num(s.deviation, 3)
        sides.append(side)
    doc = {"id": r.id, "kind": r.kind, "point": {k: str(v) for k, v in r.point.items()},
           "sides": sides, "pass": r.passed}
    if r.ratio_spread is not None:
        doc["ratio_spread"] = _num(r.ratio_spread, 3)
    return doc


# --- certify ----------------------------------------------------------------------------------


def cmd_certify(args) -> int:
    config = build_config(args)
    try:
        proof = proofs.get(args.proof)
    except KeyError as exc:
        raise UsageError(f"{exc}; known: {', '.join(p.id for p in proofs.PROOFS)}") from None
    tolerance = config.tolerance_value or 1e-25
    with _mapper(config.workers) as mapper:
        results = proofs.certify_samples(proof.id, config.samples, config.seed, config.policy,
                                         tolerance, mapper=mapper)
    docs = []
    for point, rep in results:
        doc = {"params": {k: str(v) for k, v in point.items()}, "lhs": _num(rep.lhs),
               "rhs": _num(rep.rhs), "claimed": _num(rep.claimed),
               "deviations": {k: _num(v, 3) for k, v in rep.deviations.items()},
               "bits": rep.bits, "pass": rep.passed}
        if args.verbose and rep.details:
            doc["details"] = {k: str(v) if isinstance(v, Fraction) else _num(v)
                              for k, v in rep.details.items()}
        docs.append(doc)
    with _sink(config.output) as out:
        if config.format == "json":
            out.write(json.dumps({"id": proof.id, "points": docs}, indent=2, sort_keys=True) + "\n")
        else:
            for d in docs:
                params = ", ".join(f"{k}={v}" for k, v in d["params"].items())
                worst = max(d["deviations"].values(), key=float)
                print(f"{proof.id} at {params}: {'PASS' if d['pass'] else 'FAIL'} "
                      f"(max deviation {worst})", file=out)
                if args.verbose:
                    print(f"  lemma lhs {d['lhs']}\n  lemma rhs {d['rhs']}\n  claimed   {d['claimed']}",
                          file=out)
                    for k, v in d.get("details", {}).items():
                        print(f"  {k} = {v}", file=out)
    return EXIT_PASS if all(d["pass"] for d in docs) else EXIT_FAIL


# --- argument parsing ----------------------------------------------------------------------------


def _common(p, samples_default=None):
    p.add_argument("--samples", type=int, default=samples_default)
    p.add_argument("--seed", type=int)
    p.add_argument("--precision-bits", dest="precision_bits", type=int,
                   help=f"working precision (default ${ENV_BITS} or 192)")
    p.add_argument("--tolerance", help="relative tolerance, e.g. 1e-30")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--workers", type=int)
    p.add_argument("--config", help="JSON file with run configuration")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qverify", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list registry identities")
    p.add_argument("ids", nargs="*")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("verify", help="verify identities at sampled points")
    p.add_argument("ids", nargs="*", help="identity ids or 'all'")
    _common(p)

    p = sub.add_parser("sweep", help="relative error over a parameter grid")
    p.add_argument("id")
    p.add_argument("--param", action="append", help="name=lo:hi:step or name=value")
    _common(p)

    p = sub.add_parser("limit", help="q -> 1 limit check (extra --name value pairs set the point)")
    p.add_argument("pair", help="e.g. G2:G1")
    _common(p, samples_default=1)

    p = sub.add_parser("certify", help="three-way summation-by-parts check")
    p.add_argument("proof", help=f"one of {', '.join(p.id for p in proofs.PROOFS)}")
    p.add_argument("--verbose", action="store_true")
    _common(p, samples_default=10)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, extra = ap.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        if extra and args.command != "limit":
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
        if args.command == "list":
            return cmd_list(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "limit":
            return cmd_limit(args, extra)
        return cmd_certify(args)
    except UsageError as exc:
        print(f"qverify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, QVerifyError) as exc:
        print(f"qverify: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
