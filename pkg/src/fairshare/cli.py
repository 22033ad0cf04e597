"""``fairshare`` command line: gen, shares, solve, verify, bench.

Exit codes: 0 ok/pass, 1 guarantee failed, 2 invalid input, 3 oracle size limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from fairshare.errors import CapabilityError, FairshareError, InvariantError
from fairshare.generate import ASYMMETRIC, FAMILIES, FIXTURES, random_instance
from fairshare.model import (
    Allocation,
    Instance,
    as_fraction,
    parse_allocation,
    parse_instance,
    write_allocation,
    write_instance,
)
from fairshare.shares import OracleLimits, compute_shares, verify, with_targets
from fairshare.splc_mms import solve_half_mms
from fairshare.sub_aps import third_aps_search

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_LIMIT = 0, 1, 2, 3

CSV_HEADER = ["id", "seed", "family", "n", "size", "algo", "worst_ratio", "runtime_ms"]
ALGOS = ("splc-mms", "sub-aps")


class UsageError(FairshareError, ValueError):
    pass


def _rational(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (TypeError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational like 1/20, got {text!r}") from None


def _limits(args) -> OracleLimits:
    return OracleLimits(
        mms_agents=args.limit_mms_agents,
        mms_goods=args.limit_mms_goods,
        aps_goods=args.limit_aps_goods,
        extension_goods=args.limit_extension_goods,
    )


def _read_instance(path) -> Instance:
    return parse_instance(Path(path).read_bytes())


def _emit(data: bytes, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_bytes(data)


def _dump(doc) -> bytes:
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


# --- gen -------------------------------------------------------------------

def _fixture(name: str, args) -> Instance:
    if name == "splc-mms-high":
        return FIXTURES[name](args.agents)
    return FIXTURES[name](args.delta)


def cmd_gen(args) -> int:
    out = Path(args.out)
    fixdir = out / "fixtures"
    fixdir.mkdir(parents=True, exist_ok=True)
    if args.fixture:
        path = fixdir / f"{args.fixture}.json"
        path.write_bytes(write_instance(_fixture(args.fixture, args)))
        print(path)
        return EXIT_OK
    (fixdir / "splc-mms-high.json").write_bytes(write_instance(FIXTURES["splc-mms-high"](3)))
    (fixdir / "greedy-counter.json").write_bytes(write_instance(FIXTURES["greedy-counter"]()))
    ents = None
    if args.asymmetric:
        if args.agents not in ASYMMETRIC:
            raise UsageError(f"no asymmetric profile for {args.agents} agents")
        ents = ASYMMETRIC[args.agents]
    rng = random.Random(args.seed)
    for k in range(args.count):
        inst = random_instance(
            args.family,
            args.agents,
            rng,
            m=args.goods,
            t=args.types,
            max_copies=args.max_copies,
            max_total=args.max_total,
            max_value=args.max_value,
            entitlements=ents,
        )
        path = out / f"{args.family}-n{args.agents}-s{args.seed}-{k:03d}.json"
        path.write_bytes(write_instance(inst))
        print(path)
    return EXIT_OK


# --- shares ----------------------------------------------------------------

def cmd_shares(args) -> int:
    inst = _read_instance(args.instance)
    which = ("mms", "aps", "mu") if args.which == "all" else (args.which,)
    if "mms" in which and not inst.is_symmetric:
        print("note: MMS is only defined here for equal entitlements; skipped", file=sys.stderr)
    report = compute_shares(inst, which, _limits(args))
    doc = {"agents": []}
    for a in report.agents:
        row = a.to_dict()
        for key in ("achieved", "passed", "ratio"):
            row.pop(key, None)
        doc["agents"].append(row)
    _emit(_dump(doc), args.out)
    return EXIT_OK


# --- solve -----------------------------------------------------------------

def _solve(inst: Instance, algo: str, epsilon: Fraction):
    """(allocation, trace document)."""
    if algo == "splc-mms":
        if not inst.is_splc:
            raise UsageError("splc-mms needs SPLC valuations")
        if not inst.is_symmetric:
            raise UsageError("splc-mms needs equal entitlements")
        alloc, trace = solve_half_mms(inst)
        return alloc, trace.to_dict()
    if algo == "sub-aps":
        search = third_aps_search(inst, epsilon, keep_states=True)
        doc = {
            "betas": [str(b) for b in search.betas],
            "runs": search.runs,
            "reductions": list(search.reductions),
            "greedy": [s.to_dict() for s in search.states],
        }
        return search.allocation, doc
    raise UsageError(f"unknown algorithm {algo!r}")


def cmd_solve(args) -> int:
    inst = _read_instance(args.instance)
    alloc, trace = _solve(inst, args.algo, args.epsilon)
    _emit(write_allocation(alloc), args.out)
    if args.trace:
        _emit(_dump(trace), args.trace)
    return EXIT_OK


# --- verify ----------------------------------------------------------------

def _targets(inst: Instance, target: str, limits: OracleLimits):
    if target in ("mms", "aps", "mu"):
        shares = compute_shares(inst, (target,), limits)
        vals = [getattr(a, target) for a in shares.agents]
        if any(v is None for v in vals):
            raise UsageError(f"{target} is not available for this instance")
        return vals, shares
    doc = json.loads(Path(target).read_bytes())
    vals = doc.get("targets") if isinstance(doc, dict) else doc
    if not isinstance(vals, list) or len(vals) != inst.n:
        raise UsageError(f"target file must list {inst.n} values")
    return [as_fraction(v) for v in vals], None


def cmd_verify(args) -> int:
    inst = _read_instance(args.instance)
    alloc = parse_allocation(Path(args.allocation).read_bytes(), inst)
    inst.validate_allocation(alloc)
    targets, shares = _targets(inst, args.target, _limits(args))
    report = verify(inst, alloc, targets, args.factor)
    if shares is not None:
        report = with_targets(report, shares)
    _emit(_dump(report.to_dict()), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


# --- bench -----------------------------------------------------------------

def _size_label(inst: Instance) -> str:
    if inst.is_splc:
        return "t=%d;copies=%s" % (len(inst.copies), "+".join(map(str, inst.copies)))
    return f"m={inst.m}"


def _worst_ratio(inst: Instance, alloc: Allocation, targets) -> Fraction:
    """min achieved/target; agents with target 0 pass and are skipped."""
    ratios = [
        inst.bundle_value(i, alloc.bundles[i]) / t for i, t in enumerate(targets) if t > 0
    ]
    return min(ratios) if ratios else Fraction(1)


def bench_rows(config: dict, limits: OracleLimits) -> list[list[str]]:
    rows = []
    for r, run in enumerate(config.get("runs", [])):
        family = run["family"]
        n = int(run.get("n", 2))
        seed = int(run.get("seed", 0))
        algo = run.get("algo", "splc-mms" if family == "splc" else "sub-aps")
        if algo not in ALGOS:
            raise UsageError(f"run {r}: unknown algorithm {algo!r}")
        eps = as_fraction(run.get("epsilon", "1/20"))
        ents = ASYMMETRIC.get(n) if run.get("entitlements") == "asymmetric" else None
        rng = random.Random(seed)
        for k in range(int(run.get("count", 1))):
            inst = random_instance(family, n, rng, entitlements=ents, **run.get("size", {}))
            start = time.perf_counter()
            alloc, _ = _solve(inst, algo, eps)
            ms = (time.perf_counter() - start) * 1000
            which = "mms" if algo == "splc-mms" else "aps"
            try:
                shares = compute_shares(inst, (which,), limits)
                worst = str(_worst_ratio(inst, alloc, [getattr(a, which) for a in shares.agents]))
            except CapabilityError as exc:
                worst = f"over-limit:{exc.limit}"
            rows.append([f"r{r:03d}-{k:05d}", str(seed), family, str(n), _size_label(inst), algo, worst, f"{ms:.3f}"])
    rows.sort(key=lambda row: row[0])
    return rows


def cmd_bench(args) -> int:
    config = json.loads(Path(args.config).read_bytes()) if args.config else {"runs": []}
    if not isinstance(config, dict):
        raise UsageError("bench config must be a JSON object with a 'runs' list")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(bench_rows(config, _limits(args)))
    _emit(buf.getvalue().encode("utf-8"), args.out)
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairshare", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def limit_flags(sp):
        d = OracleLimits()
        sp.add_argument("--limit-mms-agents", type=int, default=d.mms_agents)
        sp.add_argument("--limit-mms-goods", type=int, default=d.mms_goods,
                        help="max useful goods/copies for the MMS oracle")
        sp.add_argument("--limit-aps-goods", type=int, default=d.aps_goods)
        sp.add_argument("--limit-extension-goods", type=int, default=d.extension_goods)

    g = sub.add_parser("gen", help="write seeded random instances and the fixtures")
    g.add_argument("--family", choices=FAMILIES, default="splc")
    g.add_argument("--agents", "-n", type=int, default=2)
    g.add_argument("--goods", "-m", type=int, default=4, help="goods (non-SPLC families)")
    g.add_argument("--types", "-t", type=int, default=2)
    g.add_argument("--max-copies", type=int, default=2)
    g.add_argument("--max-total", type=int, default=8)
    g.add_argument("--max-value", type=int, default=10)
    g.add_argument("--asymmetric", action="store_true")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--fixture", choices=sorted(FIXTURES))
    g.add_argument("--delta", type=_rational, default=Fraction(1, 32))
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("shares", help="exact MMS / APS / concave-closure bound per agent")
    s.add_argument("--instance", required=True)
    s.add_argument("--which", choices=("mms", "aps", "mu", "all"), default="all")
    s.add_argument("--out")
    limit_flags(s)
    s.set_defaults(func=cmd_shares)

    so = sub.add_parser("solve", help="compute an allocation")
    so.add_argument("--instance", required=True)
    so.add_argument("--algo", choices=ALGOS, required=True)
    so.add_argument("--epsilon", type=_rational, default=Fraction(1, 20))
    so.add_argument("--out")
    so.add_argument("--trace", help="write the pipeline trace / greedy log as JSON")
    so.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check v_i(A_i) >= factor * target_i exactly")
    v.add_argument("--instance", required=True)
    v.add_argument("--allocation", required=True)
    v.add_argument("--factor", type=_rational, default=Fraction(1))
    v.add_argument("--target", default="mms", help="mms, aps, mu, or a JSON file of targets")
    v.add_argument("--out")
    limit_flags(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run a benchmark config and write CSV")
    b.add_argument("--config")
    b.add_argument("--out")
    limit_flags(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except InvariantError:
        raise
    except (FairshareError, ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
