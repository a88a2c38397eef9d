"""Command-line front end: ingest measures/sets, run analyses, emit reports.

Exit codes: 0 success, 2 validation error (malformed JSON, bad flags),
3 estimate-violated runs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .cover import (CoverConfig, classify_ball, covering_lemma, default_theta,
                    main_packing)
from .curves import (SnowflakeSpec, no_power_gain_matrix, no_power_gain_witness,
                     npg_reference_points, polyline_length, row_normalized_det,
                     snowflake, RademacherVector, euclidean_normal,
                     linear_graph_samples)
from .measures import PointMeasure, dini_profile
from .report import emit_report, profile_csv
from .spaces import NormedSpace

__all__ = ["main", "run", "RunConfig"]


@dataclass
class RunConfig:
    """Resolved per-invocation configuration for the analysis commands."""

    command: str
    input_path: str | None
    output_path: str | None
    space: NormedSpace | None
    k: int
    alpha: float | str
    chi: float
    delta: float | None
    theta: float | None
    max_depth: int
    seed: int
    fmt: str

    def __post_init__(self):
        if not (0 < self.chi < 1):
            raise _ValidationError(f"chi must lie in (0, 1), got {self.chi}")
        if self.alpha != "auto":
            try:
                self.alpha = float(self.alpha)
            except (TypeError, ValueError):
                raise _ValidationError(f"alpha must be 'auto' or a number, got {self.alpha!r}")

    def cover_config(self) -> "CoverConfig":
        return CoverConfig(chi=self.chi, delta=self.delta, alpha=self.alpha,
                           theta=self.theta, max_depth=self.max_depth,
                           seed=self.seed)


def _parse_space(text: str) -> NormedSpace:
    return NormedSpace.from_descriptor(json.loads(text))


def _load_measure(path: str):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise _ValidationError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}")
    try:
        return PointMeasure.from_json(doc)
    except (KeyError, ValueError) as e:
        raise _ValidationError(f"{path}: {e}")


class _ValidationError(Exception):
    pass


def _write(out_path, data: bytes):
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)


def _add_common(sp):
    sp.add_argument("--space", help="space descriptor JSON (overrides the measure's)")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--alpha", default="auto")
    sp.add_argument("--chi", type=float, default=0.1)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--max-depth", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=("json", "csv"), default="json")


def _build_parser():
    ap = argparse.ArgumentParser(prog="betareif",
                                 description="beta-numbers and Reifenberg coverings in l^p spaces")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("beta", help="per-atom Dini profiles (CSV)")
    b.add_argument("input")
    b.add_argument("--atom", type=int, default=None, help="profile a single atom index")
    b.add_argument("--r-lo", type=float, default=1 / 16)
    b.add_argument("--r-hi", type=float, default=2.0)
    _add_common(b)

    c = sub.add_parser("cover", help="run the covering lemma (JSON report)")
    c.add_argument("input")
    _add_common(c)

    p = sub.add_parser("pack", help="run the packing driver (JSON report)")
    p.add_argument("input")
    p.add_argument("--M", type=float, default=0.01)
    p.add_argument("--budget", type=int, default=4)
    _add_common(p)

    s = sub.add_parser("snowflake", help="generate snowflakes and lengths")
    s.add_argument("--p", default="2")
    s.add_argument("--mode", choices=("rademacher", "plane"), default="rademacher")
    s.add_argument("--eta", default="const:0.05",
                   help="const:v | geom:q (v*q^i) | invsqrt")
    s.add_argument("--depth", type=int, default=7)
    s.add_argument("--out", default=None)
    s.add_argument("--format", choices=("json", "csv"), default="json")

    m = sub.add_parser("smoothness", help="empirical vs analytic modulus sweep (CSV)")
    m.add_argument("--p-list", default="1,1.5,2,3,4,inf")
    m.add_argument("--t-list", default="0.05,0.1,0.3")
    m.add_argument("--dim", type=int, default=3)
    m.add_argument("--samples", type=int, default=10000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default=None)
    m.add_argument("--format", choices=("json", "csv"), default="csv")

    n = sub.add_parser("nopowergain", help="det certificate + witness scan (JSON)")
    n.add_argument("--eps", type=float, default=0.02)
    n.add_argument("--grid-step", type=float, default=0.05)
    n.add_argument("--out", default=None)
    n.add_argument("--format", choices=("json", "csv"), default="json")

    g = sub.add_parser("goodball", help="classify one ball (JSON)")
    g.add_argument("input")
    g.add_argument("--center", default=None, help="JSON list, default origin")
    g.add_argument("--r", type=float, default=1.0)
    _add_common(g)
    return ap


def _parse_eta(spec_text: str, depth: int):
    kind, _, val = spec_text.partition(":")
    if kind == "const":
        return tuple([float(val)] * max(depth - 1, 1))
    if kind == "geom":
        q = float(val)
        return tuple(0.1 * q ** (i + 1) for i in range(max(depth - 1, 1)))
    if kind == "invsqrt":
        return tuple(0.1 / math.sqrt(i + 1) for i in range(max(depth - 1, 1)))
    raise _ValidationError(f"unknown eta spec {spec_text!r}")


def _space_from_args(args, default_space):
    if getattr(args, "space", None):
        try:
            return _parse_space(args.space)
        except (json.JSONDecodeError, ValueError, KeyError) as e:
            raise _ValidationError(f"--space: {e}")
    return default_space


def run(argv) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return _dispatch(args)
    except _ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "beta":
        space0, mu, _rs = _load_measure(args.input)
        space = _space_from_args(args, space0)
        alpha = space.smoothness_power() if args.alpha == "auto" else float(args.alpha)
        if args.atom is not None:
            prof = dini_profile(space, mu, mu.points[args.atom], args.r_lo,
                                args.r_hi, args.k, alpha, args.chi, seed=args.seed)
            _write(args.out, emit_report(prof, args.format) if args.format == "json"
                   else profile_csv(prof).encode())
            return 0
        lines = ["atom,scale,beta,beta_alpha,cumulative"]
        for i in range(len(mu)):
            prof = dini_profile(space, mu, mu.points[i], args.r_lo, args.r_hi,
                                args.k, alpha, args.chi, seed=args.seed)
            for r, bval, ba, cum in prof.rows():
                lines.append(f"{i}," + ",".join(f"{v:.12g}" for v in (r, bval, ba, cum)))
        _write(args.out, ("\n".join(lines) + "\n").encode())
        return 0

    if cmd in ("cover", "pack"):
        space0, mu, rs = _load_measure(args.input)
        space = _space_from_args(args, space0)
        rc = RunConfig(cmd, args.input, args.out, space, args.k, args.alpha,
                       args.chi, args.delta, args.theta, args.max_depth,
                       args.seed, args.format)
        cfg = rc.cover_config()
        if cmd == "cover":
            res = covering_lemma(space, mu, np.arange(len(mu)), rs, args.k, cfg)
            _write(args.out, emit_report(res, "json"))
            return 3 if res.estimate_violated else 0
        res = main_packing(space, mu, np.arange(len(mu)), rs, args.k,
                           M=args.M, cfg=cfg, budget=args.budget)
        _write(args.out, emit_report(res, "json"))
        return 3 if not res.valid else 0

    if cmd == "snowflake":
        p = math.inf if args.p == "inf" else float(args.p)
        etas = _parse_eta(args.eta, args.depth)
        mode = "rademacher" if args.mode == "rademacher" else "plane_bump"
        try:
            spec = SnowflakeSpec(mode, p, etas, args.depth)
        except ValueError as e:
            raise _ValidationError(str(e))
        verts = snowflake(spec)
        lengths = []
        for d in range(2, args.depth + 1):
            sub = SnowflakeSpec(mode, p, etas, d)
            lengths.append({"depth": d, "length": polyline_length(snowflake(sub), p)})
        if isinstance(verts[0], RademacherVector):
            A = verts.matrix if hasattr(verts, "matrix") else \
                np.stack([v.coefficients for v in verts])
            vout = A.tolist()
            diffs = np.diff(A, axis=0)
            dts = np.diff(A[:, 0])
            from .curves import rademacher_norm
            speeds = [rademacher_norm(dv, p) / dt for dv, dt in zip(diffs, dts)]
        else:
            A = np.stack([np.asarray(v, dtype=float) for v in verts])
            vout = A.tolist()
            seg = NormedSpace(2, p).norms(np.diff(A, axis=0))
            speeds = seg.tolist()     # per-segment lengths in plane mode
        doc = {"mode": mode, "p": "inf" if p == math.inf else p, "depth": args.depth,
               "etas": list(etas[: args.depth - 1]), "vertices": vout,
               "speeds": speeds,
               "length": polyline_length(verts, p), "lengths_per_depth": lengths}
        if args.format == "csv":
            lines = ["depth,length"] + [f"{row['depth']},{row['length']:.12g}" for row in lengths]
            _write(args.out, ("\n".join(lines) + "\n").encode())
        else:
            _write(args.out, emit_report(doc, "json"))
        return 0

    if cmd == "smoothness":
        ps = [math.inf if s.strip() == "inf" else float(s) for s in args.p_list.split(",")]
        ts = [float(s) for s in args.t_list.split(",")]
        lines = ["p,t,empirical,bound"]
        for p in ps:
            sp = NormedSpace(args.dim, p)
            for t in ts:
                emp = sp.modulus_smoothness_empirical(t, args.samples, args.seed)
                bnd = sp.modulus_smoothness_bound(t)
                ptag = "inf" if p == math.inf else f"{p:g}"
                lines.append(f"{ptag},{t:.12g},{emp:.12g},{bnd:.12g}")
        _write(args.out, ("\n".join(lines) + "\n").encode())
        return 0

    if cmd == "nopowergain":
        det, M = no_power_gain_matrix(npg_reference_points())
        fs = linear_graph_samples([1.0, 0.0, 0.0], euclidean_normal(), args.eps,
                                  step=args.grid_step)
        pair, bound = no_power_gain_witness(fs, args.eps)
        doc = {"det": det, "row_normalized_det": row_normalized_det(M),
               "witness_bound": bound, "witness_pair": [list(pair[0]), list(pair[1])],
               "eps": args.eps, "measured_c": args.eps / bound if bound > 0 else None}
        _write(args.out, emit_report(doc, "json"))
        return 0

    if cmd == "goodball":
        space0, mu, _rs = _load_measure(args.input)
        space = _space_from_args(args, space0)
        center = json.loads(args.center) if args.center else [0.0] * space.dim
        lab = classify_ball(space, mu, center, args.r, args.k, args.chi, args.theta)
        doc = lab.to_dict()
        doc["config"] = {"k": args.k, "chi": args.chi,
                         "theta": args.theta if args.theta is not None else default_theta(args.k)}
        _write(args.out, emit_report(doc, "json"))
        return 0

    raise _ValidationError(f"unknown command {cmd}")


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
