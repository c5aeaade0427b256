"""``hybridos`` command line: membench, forward, bugcorpus, conformance.

Every subcommand prints ``key value`` lines and, when ``HYBRIDOS_REPORT_DIR``
is set, writes the same lines to ``<dir>/<subcommand>.report``. Lines whose
key starts with ``timing.`` depend on the wall clock; everything else is
determined by the arguments. The exit status is 0 exactly when every checked
property of the run held.
"""
from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from pathlib import Path

from . import bugcorpus, conformance, forwarder
from . import mem as memory
from .errors import HybridOSError

REPORT_ENV = "HYBRIDOS_REPORT_DIR"


def membench(iters: int, pages: int):
    """Map, write, remap and unmap ``pages`` pages ``iters`` times."""
    if iters < 1 or pages < 1:
        raise ValueError("iterations and pages must be at least 1")
    ms = memory.MemorySystem(pages, pages)
    initial = ms.free_state()
    data = bytes(range(256)) * (memory.PAGE_SIZE // 256)
    times = {"map": [], "remap": [], "unmap": []}
    clock = time.perf_counter_ns
    for _ in range(iters):
        p, f = ms.pages.allocate(pages), ms.frames.allocate(pages)
        t0 = clock()
        mapped = ms.map(p, f, memory.MapFlags.READ_WRITE)
        t1 = clock()
        mapped.write(0, data)
        t2 = clock()
        mapped.remap(memory.MapFlags.READ_ONLY)
        t3 = clock()
        mapped.drop()
        t4 = clock()
        times["map"].append(t1 - t0)
        times["remap"].append(t3 - t2)
        times["unmap"].append(t4 - t3)
    reclaimed = ms.free_state() == initial and len(ms.table) == 0
    lines = [f"iterations {iters}", f"pages {pages}", f"reclaimed {str(reclaimed).lower()}"]
    for op, samples in times.items():
        us = [t / 1000 for t in samples]
        sd = statistics.stdev(us) if len(us) > 1 else 0.0
        lines.append(f"timing.{op}.mean_us {statistics.fmean(us):.3f}")
        lines.append(f"timing.{op}.stdev_us {sd:.3f}")
    return lines, reclaimed


def run_forward(scenario: str, restricted: bool, seed: int):
    sc = forwarder.Scenario.load(scenario)
    if restricted:
        sc.restricted = True
    result = forwarder.forward(sc, seed)
    lines = [f"restricted {str(sc.restricted).lower()}", f"seed {seed}", *result.report()]
    return lines, result.ok


def run_bugcorpus():
    lines, ok = [], True
    results = bugcorpus.run_corpus()
    for r in results:
        key = r.case.key
        observed = ",".join(str(k) for k in r.observed) or "none"
        lines += [
            f"bug.{key}.source {r.case.source.replace(' ', '_')}",
            f"bug.{key}.expected {r.case.expected}",
            f"bug.{key}.observed {observed}",
            f"bug.{key}.oracle {'PASS' if r.oracle_ok else 'FAIL'}",
            f"bug.{key}.hal {'PASS' if r.hal_ok else 'FAIL'}",
        ]
        ok = ok and r.ok
    legal = bugcorpus.legal_init_violations()
    lines.append(f"legal_init.violations {len(legal)}")
    passed = sum(r.ok for r in results)
    lines.append(f"cases {passed}/{len(bugcorpus.CORPUS)}")
    return lines, ok and not legal


def run_conformance(manifest: str | None, mutation: str | None, collect_only: bool):
    if collect_only:
        text = conformance.render(conformance.collect())
        return text.splitlines(), True
    path = Path(manifest) if manifest else conformance.SHIPPED_MANIFEST
    if mutation:
        report = conformance.run_mutation(mutation, path)
    else:
        report = conformance.check(path)
    failed = len(report.failures)
    lines = [*report.lines(), f"assertions {len(report.results)}", f"failed {failed}"]
    if mutation:
        lines.insert(0, f"mutation {mutation}")
    return lines, report.ok


def _emit(name: str, lines):
    text = "".join(line + "\n" for line in lines)
    sys.stdout.write(text)
    target = os.environ.get(REPORT_ENV)
    if target:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.report").write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("membench", help="map/remap/unmap microbenchmark")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--pages", type=int, default=1)

    p = sub.add_parser("forward", help="two-port forwarding simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--restricted", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    sub.add_parser("bugcorpus", help="replay known driver bugs against the HAL and the device oracle")

    p = sub.add_parser("conformance", help="check the conformance manifest")
    p.add_argument("--manifest")
    p.add_argument("--mutation", choices=sorted(conformance.MUTATIONS))
    p.add_argument("--collect", action="store_true", help="print the inline assertions as a manifest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "membench":
            lines, ok = membench(args.iters, args.pages)
        elif args.command == "forward":
            lines, ok = run_forward(args.scenario, args.restricted, args.seed)
        elif args.command == "bugcorpus":
            lines, ok = run_bugcorpus()
        else:
            lines, ok = run_conformance(args.manifest, args.mutation, args.collect)
    except (HybridOSError, ValueError, OSError) as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    _emit(args.command, lines)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
