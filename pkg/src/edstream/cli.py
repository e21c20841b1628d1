"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or infeasible parameters,
3 an internal assertion (a theoretical guarantee did not hold).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import formats
from .bscw import ContractViolation, HybridBsca, ParameterError
from .decompose import (
    TheoryViolation,
    agm_slot_words,
    decompose_stream,
    derive_params,
    params_with_phi,
    red_offline,
)
from .graph import GraphError, MultiGraph, SizeError
from .lowerbound import (
    ExactRedOracle,
    HardParams,
    HardParamsError,
    SingletonStrawman,
    gen_hard,
    instance_text,
    recover_sim,
)
from .randomness import rng
from .sketch import AgmSketch, StreamError, StreamUpdate, live_graph
from .sparsifier import Mode, check_cluster_sparsifier, check_global
from .verify import verify_bld, verify_ed, verify_red

OK, CHECK_FAILED, USAGE, INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(fields: dict, out: str | None = None) -> None:
    text = formats.format_report(fields)
    if out:
        formats.write_text(out, text)
    sys.stdout.write(text)


def _load_graph(path: str) -> MultiGraph:
    g = formats.parse_graph(formats.read_text(path))
    assert isinstance(g, MultiGraph)
    return g


def _load_stream(path: str) -> tuple[int, list[StreamUpdate]]:
    n, ups = formats.parse_stream(formats.read_text(path))
    return formats.stream_vertex_count(n, ups), ups


def random_stream(n: int, p: float, churn: float, seed: int) -> list[StreamUpdate]:
    """``G(n, p)`` inserted in random order, with a ``churn`` fraction of extra edges inserted then deleted."""
    gen = rng(seed, "gen-stream", n, p, churn)
    iu, iv = np.triu_indices(n, 1)
    keep = gen.random(iu.size) < p
    live = list(zip(iu[keep].tolist(), iv[keep].tolist()))
    absent = list(zip(iu[~keep].tolist(), iv[~keep].tolist()))
    extra_n = min(len(absent), int(round(churn * len(live))))
    extra = [absent[i] for i in gen.choice(len(absent), size=extra_n, replace=False)] if extra_n else []
    events = [("+", e) for e in live] + [("+", e) for e in extra]
    order = gen.permutation(len(events))
    events = [events[i] for i in order]
    # each churned edge is deleted at a random point after its insertion
    out: list[StreamUpdate] = []
    for op, e in events:
        out.append(StreamUpdate(op, *e))
    for e in extra:
        pos = [i for i, x in enumerate(out) if x.op == "+" and (x.u, x.v) == e][0]
        at = int(gen.integers(pos + 1, len(out) + 1))
        out.insert(at, StreamUpdate("-", *e))
    return out


def cmd_gen(a: argparse.Namespace) -> int:
    if a.kind == "hard":
        inst = gen_hard(HardParams(a.n, a.d, a.m, a.seed, a.t_seed))
        text = instance_text(inst)
    elif a.kind == "random":
        ups = random_stream(a.n, a.p, 0.0, a.seed)
        text = formats.format_graph(live_graph(a.n, ups))
    else:
        text = formats.format_stream(random_stream(a.n, a.p, a.churn, a.seed), a.n)
    if a.out:
        formats.write_text(a.out, text)
    else:
        sys.stdout.write(text)
    return OK


def _params(a: argparse.Namespace, n: int):
    if a.phi is not None:
        return params_with_phi(n, a.b, a.phi, eps=a.eps)
    if a.eps is None:
        raise UsageError("either --eps or --phi is required")
    return derive_params(n, a.b, a.eps)


def cmd_sketch(a: argparse.Namespace) -> int:
    n, ups = _load_stream(a.stream)
    params = _params(a, n)
    fields: dict[str, object] = {"mode": a.mode, "n": n, "updates": len(ups)}
    fields.update({f"param_{k}": v for k, v in params.fields().items()})
    if a.mode == "agm":
        delta = a.delta if a.delta is not None else params.delta
        sk = AgmSketch(n, delta, a.seed, a.C)
        sk.update_many(ups)
        blob = sk.to_bytes()
        per_slot = sk.words
        per_t = sum(agm_slot_words(n, params.delta_j(j), a.C) for j in range(1, params.k + 2))
        fields.update(
            {
                "slot_words": per_slot,
                "slot_blob_bytes": len(blob),
                "provisioned_words": (params.depth_budget + 1) * (per_slot + params.inner_budget * per_t),
                "slot_budget": params.slot_budget,
            }
        )
        if a.out:
            Path(a.out).write_bytes(blob)
    else:
        g = live_graph(n, ups)
        fields.update({"edges": g.num_edges(), "slot_words": 0})
        if a.out:
            formats.write_text(a.out, formats.format_graph(g))
    _emit(fields)
    return OK


def cmd_decompose(a: argparse.Namespace) -> int:
    n, ups = _load_stream(a.stream)
    params = _params(a, n)
    res = decompose_stream(ups, n, params, Mode(a.mode), a.seed, a.C, bsca=HybridBsca())
    g = live_graph(n, ups)
    summary = dict(res.fields())
    crossing = res.partition.crossing_edges(g)
    summary.update(
        {
            "crossing_edges": crossing,
            "effective_eps": crossing / g.num_edges() if g.num_edges() else 0.0,
            "crossing_bound": params.crossing_bound(g.total_volume()),
            "b": params.b,
            "phi": params.phi,
            "gamma": params.gamma,
            "phi_certified": params.phi_j(params.k + 1),
        }
    )
    text = formats.format_partition(res.partition, summary)
    if a.out:
        formats.write_text(a.out, text)
    else:
        sys.stdout.write(text)
    if a.trace:
        formats.write_text(a.trace, "\n".join(res.trace.lines()) + "\n")
    bad = res.trace.violations(params)
    if bad:
        raise TheoryViolation("; ".join(bad))
    return OK


def cmd_red(a: argparse.Namespace) -> int:
    g = _load_graph(a.graph)
    res = red_offline(g, a.eps, a.phi, a.levels, a.b)
    text = formats.format_partitions(res.partitions)
    if a.out:
        formats.write_text(a.out, text)
    else:
        sys.stdout.write(text)
    _emit({f"level{i}_crossing": c for i, c in enumerate(res.crossing, 1)})
    return OK


def cmd_verify(a: argparse.Namespace) -> int:
    g = _load_graph(a.graph)
    text = formats.read_text(a.partition)
    if a.kind == "red":
        rep = verify_red(g, formats.parse_partitions(text, g.n), a.eps, a.phi, a.cap)
    else:
        part = formats.parse_partition(text, g.n)
        if a.kind == "ed":
            rep = verify_ed(g, part, a.eps, a.phi, a.cap)
        else:
            if a.b is None or a.gamma is None:
                raise UsageError("verify bld needs --b and --gamma")
            rep = verify_bld(g, part, a.b, a.eps, a.phi, a.gamma, a.cap)
    _emit(rep.fields())
    return OK if rep.passed else CHECK_FAILED


def cmd_recover(a: argparse.Namespace) -> int:
    inst = gen_hard(HardParams(a.n, a.d, a.m, a.seed, a.t_seed))
    if a.alg == "singleton":
        out = recover_sim(SingletonStrawman, inst, a.eps)
    else:
        out = recover_sim(lambda n: ExactRedOracle(n, a.eps, a.phi), inst, a.eps)
    _emit(out.fields())
    return OK


def cmd_check_spars(a: argparse.Namespace) -> int:
    g = _load_graph(a.graph)
    ups = [StreamUpdate("+", u, v) for u, v in g.edge_list()]
    sk = AgmSketch(g.n, a.delta, a.seed, a.C)
    sk.update_many(ups)
    H = sk.decode()
    gen = rng(a.seed, "check-spars-clusters")
    clusters = []
    for _ in range(a.clusters):
        size = int(gen.integers(2, min(a.max_size, g.n) + 1))
        clusters.append(sorted(gen.choice(g.n, size=size, replace=False).tolist()))
    gc = check_global(g, H, a.delta, a.seed)
    with ThreadPoolExecutor(max_workers=a.threads) as pool:
        reps = list(pool.map(lambda U: check_cluster_sparsifier(g, H, U, a.delta, a.seed, global_check=gc), clusters))
    passed = sum(r.passed for r in reps)
    fields = {
        "clusters": len(reps),
        "passed": passed,
        "pass_rate": passed / len(reps) if reps else 1.0,
        "worst_local_ratio": max((r.worst_local_ratio for r in reps), default=0.0),
        "worst_global_ratio": gc.worst_ratio,
        "global_probabilistic": gc.probabilistic,
        "global_cuts": gc.cuts,
        "sparsifier_edges": len(H.edges),
    }
    fields.update(dict(x.split("=", 1) for x in sk.report.lines()))
    _emit(fields)
    return OK if passed == len(reps) else CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edstream", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="cmd", required=True)
    _add = sub.add_parser

    def add_parser(name: str, **kw) -> argparse.ArgumentParser:
        return _add(name, parents=[common], **kw)


    g = add_parser("gen", help="generate graphs, streams or hard instances")
    g.add_argument("kind", choices=["random", "hard", "stream"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, default=0.3)
    g.add_argument("--churn", type=float, default=0.3)
    g.add_argument("--d", type=int, default=4)
    g.add_argument("--m", type=int, default=24)
    g.add_argument("--t-seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    def bld_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--b", type=float, required=True)
        p.add_argument("--eps", type=float)
        p.add_argument("--phi", type=float)
        p.add_argument("--C", type=float, default=1.0, help="sketch constant for AGM slots")

    s = add_parser("sketch", help="sketch a stream and report space")
    s.add_argument("--stream", required=True)
    s.add_argument("--mode", choices=["exact", "agm"], default="agm")
    s.add_argument("--delta", type=float)
    s.add_argument("--out")
    bld_args(s)
    s.set_defaults(func=cmd_sketch)

    d = add_parser("decompose", help="boundary-linked decomposition of a stream")
    d.add_argument("--stream", required=True)
    d.add_argument("--mode", choices=["exact", "agm"], default="exact")
    d.add_argument("--out")
    d.add_argument("--trace")
    bld_args(d)
    d.set_defaults(func=cmd_decompose)

    r = add_parser("red", help="offline removal-based decomposition sequence")
    r.add_argument("--graph", required=True)
    r.add_argument("--levels", type=int, required=True)
    r.add_argument("--eps", type=float, required=True)
    r.add_argument("--phi", type=float, required=True)
    r.add_argument("--b", type=float)
    r.add_argument("--out")
    r.set_defaults(func=cmd_red)

    v = add_parser("verify", help="check a decomposition against its definition")
    v.add_argument("kind", choices=["ed", "bld", "red"])
    v.add_argument("--graph", required=True)
    v.add_argument("--partition", required=True)
    v.add_argument("--eps", type=float, required=True)
    v.add_argument("--phi", type=float, required=True)
    v.add_argument("--b", type=float)
    v.add_argument("--gamma", type=float)
    v.add_argument("--cap", type=int, default=20)
    v.set_defaults(func=cmd_verify)

    rc = add_parser("recover-sim", help="play the recovery game on a hard instance")
    rc.add_argument("--n", type=int, required=True)
    rc.add_argument("--d", type=int, required=True)
    rc.add_argument("--m", type=int, required=True)
    rc.add_argument("--eps", type=float, required=True)
    rc.add_argument("--phi", type=float, default=0.1)
    rc.add_argument("--alg", choices=["singleton", "exact"], default="exact")
    rc.add_argument("--t-seed", type=int, default=0)
    rc.set_defaults(func=cmd_recover)

    c = add_parser("check-spars", help="cluster-sparsifier pass rate of one AGM sketch")
    c.add_argument("--graph", required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--clusters", type=int, required=True)
    c.add_argument("--max-size", type=int, default=12)
    c.add_argument("--C", type=float, default=1.0)
    c.set_defaults(func=cmd_check_spars)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if a.threads < 1:
        sys.stderr.write("error: --threads must be at least 1\n")
        return USAGE
    try:
        return a.func(a)
    except (TheoryViolation, ContractViolation, AssertionError) as exc:
        sys.stderr.write(f"internal assertion: {exc}\n")
        return INTERNAL
    except (
        UsageError,
        ParameterError,
        HardParamsError,
        formats.FormatError,
        StreamError,
        GraphError,
        SizeError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return USAGE


if __name__ == "__main__":
    raise SystemExit(main())
