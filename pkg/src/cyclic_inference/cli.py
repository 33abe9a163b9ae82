"""Command-line driver for the seeded validation suites.

Usage: cyclic-inference <suite> [options].  Every suite writes report.json
plus its data tables as CSV into the output directory and prints one line
per check.  Exit status: 0 when every check passes, 1 when a check fails,
2 for a malformed invocation.  Reports carry no timestamps or paths, so
identical configurations produce byte-identical output; the random stream
is counter-based (the report names the algorithm) and keyed by --seed.

Tolerance overrides use dotted flags, e.g. --tol.rk4=1e-7; the override
must name a tolerance declared by the selected suite.  The environment
variable CYCLIC_INFERENCE_OUT, when set, overrides --out.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__, experiments, serialize
from .errors import CyclicInferenceError

TOL_PREFIX = "--tol."


class BadInvocation(Exception):
    pass


def _split_tolerance_flags(argv):
    """Pull --tol.name=value flags out of argv before argparse sees them."""
    rest, overrides = [], {}
    for token in argv:
        if not token.startswith(TOL_PREFIX):
            rest.append(token)
            continue
        body = token[len(TOL_PREFIX):]
        name, sep, raw = body.partition("=")
        if not sep or not name:
            raise BadInvocation(
                f"tolerance overrides look like {TOL_PREFIX}<name>=<value>, "
                f"got {token!r}")
        try:
            overrides[name] = float(raw)
        except ValueError:
            raise BadInvocation(
                f"tolerance {name!r} needs a numeric value, got {raw!r}"
            ) from None
    return rest, overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclic-inference",
        description="seeded validation suites with CSV and JSON reports",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", metavar="JSON",
                        help="optional explicit model payload")
    common.add_argument("--seed", type=int, default=0,
                        help="64-bit stream key (default 0)")
    common.add_argument("--out", default="reports",
                        help="output directory (default ./reports)")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker processes for instance sweeps")
    common.add_argument("--plots", action="store_true",
                        help="also render diagnostic figures next to the CSVs")

    sub = parser.add_subparsers(dest="suite", required=True, metavar="suite")
    for name, spec in experiments.EXPERIMENTS.items():
        p = sub.add_parser(name, parents=[common], help=spec.description)
        for flag, kind, default, helptext in spec.params:
            p.add_argument(f"--{flag}", type=kind, default=default,
                           help=f"{helptext} (default {default})")
    sub.add_parser("all", parents=[common],
                   help="every suite in sequence; fails only at the end")
    return parser


def _resolve(ns, overrides):
    if not 0 <= ns.seed < 2**64:
        raise BadInvocation("--seed must fit an unsigned 64-bit integer")
    if ns.jobs < 1:
        raise BadInvocation("--jobs must be at least 1")
    names = list(experiments.ALL_NAMES) if ns.suite == "all" else [ns.suite]

    known = set()
    for name in names:
        known.update(experiments.EXPERIMENTS[name].tolerances)
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise BadInvocation(
            f"unknown tolerance name(s) {', '.join(unknown)}; "
            f"declared: {', '.join(sorted(known))}")

    payload = None
    if ns.input is not None:
        try:
            payload = serialize.read_json(ns.input)
        except ValueError as exc:
            raise BadInvocation(str(exc)) from None
        if not isinstance(payload, dict):
            raise BadInvocation("--input must hold a JSON object")

    out = os.environ.get("CYCLIC_INFERENCE_OUT") or ns.out
    return names, payload, out


def _params_for(name, ns, payload):
    spec = experiments.EXPERIMENTS[name]
    params = {flag: getattr(ns, flag) for flag, _, _, _ in spec.params
              if hasattr(ns, flag)}
    if payload is not None:
        params["payload"] = payload
    return params


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        argv, overrides = _split_tolerance_flags(argv)
    except BadInvocation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ns = build_parser().parse_args(argv)

    try:
        names, payload, out = _resolve(ns, overrides)
    except BadInvocation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(out, exist_ok=True)
    results, aborted = [], {}
    for name in names:
        try:
            results.append(experiments.run_experiment(
                name, ns.seed, overrides, _params_for(name, ns, payload),
                jobs=ns.jobs))
        except (ValueError, KeyError) as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            return 2
        except CyclicInferenceError as exc:
            # a suite that cannot finish counts as failed, but the remaining
            # suites still run and the report is still written in full
            aborted[name] = f"{type(exc).__name__}: {exc}"
            results.append(experiments.ExperimentResult(
                name=name,
                checks=[experiments.Check("completed", 0.0, None, None,
                                          False, aborted[name])],
            ))

    report = {
        "config": {
            "suite": ns.suite,
            "seed": ns.seed,
            "tolerance_overrides": overrides,
            "payload": payload,
        },
        "rng": experiments.RNG_ALGORITHM,
        "version": __version__,
        "experiments": [],
        "passed": all(r.passed for r in results),
    }

    for res in results:
        table_files = {}
        for table_name, (columns, rows) in sorted(res.tables.items()):
            fname = f"{res.name}__{table_name}.csv"
            serialize.write_table(os.path.join(out, fname), columns, rows)
            table_files[table_name] = fname
        report["experiments"].append({
            "name": res.name,
            "passed": res.passed,
            "checks": [c.as_dict() for c in res.checks],
            "summary": res.summary,
            "tables": table_files,
        })

    if ns.plots:
        from . import figures

        rendered = []
        for res in results:
            rendered.extend(figures.render(res, out))
        report["figures"] = sorted(rendered)

    serialize.write_report(os.path.join(out, "report.json"), report)

    for res in results:
        for c in res.checks:
            status = "PASS" if c.passed else "FAIL"
            bounds = "" if c.bound_low is None else f" >= {c.bound_low:g}"
            if c.bound_high is not None:
                bounds += f" <= {c.bound_high:g}"
            print(f"{status} {res.name}:{c.name} value={c.value:.6e}{bounds}")
        if res.name in aborted:
            print(f"FAIL {res.name}: aborted ({aborted[res.name]})")
    print(f"report: {os.path.join(out, 'report.json')}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
