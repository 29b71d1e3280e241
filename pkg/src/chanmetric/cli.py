"""Command-line interface.

Exit status: 0 on success, 1 when a computation fails (or the reproduction
does not match), 2 for usage errors and unreadable or invalid inputs.
With ``--output json`` results go to stdout as one JSON document and
failures to stderr as ``{"error": {...}}``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys
from typing import Any

import numpy as np

from . import __version__
from . import channels as ch
from . import discrimination as disc
from . import fisher, oracles, sdp
from .documents import (
    FORMAT_VERSION,
    RunConfig,
    channel_from_doc,
    decode_complex,
    load_channel,
    load_document,
    load_matrix,
    load_povm,
    load_vector_or_matrix,
    matrix_from_doc,
    to_json,
)
from .fidelity import diamond_bounds, fidelity
from .matlin import NumericalError, ValidationError
from .reproduce import format_table, reproduce_paper
from .unitary_geometry import c_of_u, theta_qc_unitary

log = logging.getLogger("chanmetric")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _wants_json(argv: list[str]) -> bool:
    return "--output=json" in argv or any(a == "--output" and b == "json" for a, b in zip(argv, argv[1:]))


class _Parser(argparse.ArgumentParser):
    argv: list[str] = []  # set by main so usage errors can honour --output json

    def error(self, message):  # keep argparse's exit code 2
        if _wants_json(_Parser.argv):
            sys.stderr.write(to_json({"error": {"type": "UsageError", "message": message, "exit_code": 2}}) + "\n")
            raise SystemExit(EXIT_USAGE)
        super().error(message)


def _config_args(p: argparse.ArgumentParser) -> None:
    d = RunConfig()
    g = p.add_argument_group("run configuration")
    g.add_argument("--sdp-tol", type=float, default=d.sdp_tol, help="SDP / fidelity tolerance (default %(default)g)")
    g.add_argument("--ortho-threshold", type=float, default=d.ortho_threshold, help="fidelity treated as zero")
    g.add_argument("--fd-step", type=float, default=d.fd_step, help="finite-difference step for qfi")
    g.add_argument("--grid", type=int, default=d.grid, help="initial quadrature grid for path lengths")
    g.add_argument("--max-n", type=int, default=d.max_n, help="largest N tried by direct search and path bound")
    g.add_argument("--seed", type=int, default=d.seed, help="seed for oracle restarts")
    g.add_argument("--output", choices=("text", "json"), default=d.output)
    g.add_argument("--dump-sdp", metavar="FILE", help="append every SDP solved to FILE as a triplet listing")
    g.add_argument("-v", "--verbose", action="count", default=0)


def _family_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", required=True, choices=fisher.BUILTIN_FAMILIES)
    p.add_argument(
        "--params",
        nargs="*",
        default=[],
        metavar="KEY=VALUE",
        help="family parameters; VALUE is JSON, or a path to a channel/matrix document",
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _config_args(common)
    p = _Parser(prog="chanmetric", description="Fidelity, distances and Fisher information for quantum channels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("cu", parents=[common], help="capped rotation angle C(U) of a unitary")
    s.add_argument("file")
    for name in ("fidelity", "angle", "bures"):
        s = sub.add_parser(name, parents=[common], help=f"channel {name} of two channel documents")
        s.add_argument("a")
        s.add_argument("b")
        if name == "angle":
            s.add_argument("--unitary", action="store_true", help="A and B are unitaries; use the eigen-angle formula")
    s = sub.add_parser("diamond-bounds", parents=[common], help="fidelity bracket on the diamond norm")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--oracle", action="store_true", help="also compute the diamond norm directly")

    s = sub.add_parser("qfi", parents=[common], help="channel Fisher information of a family")
    _family_args(s)
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--n", type=int, default=1, help="number of parallel copies")
    s.add_argument("--no-richardson", action="store_true")

    s = sub.add_parser("path-length", parents=[common], help="half the integrated sqrt Fisher information")
    _family_args(s)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--variant", choices=("exact", "scaled"), default="exact")

    s = sub.add_parser("discriminate", parents=[common], help="lower bounds on uses for perfect discrimination")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--path", choices=("mixture", "none"), default="mixture")
    s.add_argument("--variant", choices=("exact", "scaled"), default="exact")

    sub.add_parser("reproduce-paper", parents=[common], help="rotation vs dephasing example ladder")

    s = sub.add_parser("oracle", help="independent reference computations")
    osub = s.add_subparsers(dest="oracle", required=True, parser_class=_Parser)
    o = osub.add_parser("state-fidelity", parents=[common])
    o.add_argument("r1")
    o.add_argument("r2")
    o = osub.add_parser("min-output-fidelity", parents=[common])
    o.add_argument("a")
    o.add_argument("b")
    o.add_argument("--restarts", type=int, default=64)
    o.add_argument("--ancilla-dim", type=int)
    o = osub.add_parser("min-overlap", parents=[common])
    o.add_argument("file")
    o.add_argument("--restarts", type=int, default=32)
    o = osub.add_parser("diamond", parents=[common])
    o.add_argument("a")
    o.add_argument("b")
    o = osub.add_parser("classical-fisher", parents=[common])
    _family_args(o)
    o.add_argument("--x", type=float, required=True)
    o.add_argument("--povm", required=True, help="POVM document")
    o.add_argument("--probe", help="state vector or density matrix document (default: maximally entangled)")
    return p


def _param_value(key: str, raw: str):
    if raw.endswith(".json"):
        doc = load_document(raw)
        if isinstance(doc, dict) and "kraus" in doc and key in ("a", "b"):
            return channel_from_doc(doc)
        return matrix_from_doc(doc)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        return raw
    if key == "generator":
        return decode_complex(value, 2, "generator")
    return value


def _family(args) -> fisher.ChannelFamily:
    params: dict[str, Any] = {}
    for item in args.params:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"family parameter {item!r} is not KEY=VALUE")
        params[key] = _param_value(key, raw)
    return fisher.builtin_family(args.family, **params)


def _variant(v: str) -> str:
    return "single-copy-scaled" if v == "scaled" else v


def _fidelity_doc(res) -> dict:
    return {
        "fidelity": res.fidelity,
        "angle": res.angle,
        "bures": res.bures,
        "gap": res.gap,
        "raw_value": res.raw_value,
        "perfectly_distinguishable": res.perfectly_distinguishable,
    }


def _pair(args) -> ch.ChannelPair:
    return ch.ChannelPair(load_channel(args.a), load_channel(args.b))


def run(args, config: RunConfig) -> tuple[dict, str, int]:
    """Execute one command: (JSON result, text rendering, exit status)."""
    cmd = args.command
    tol = config.sdp_tol
    if cmd == "cu":
        u = load_matrix(args.file)
        v = c_of_u(u)
        return {"c_u": v}, f"{v!r}", EXIT_OK
    if cmd == "angle" and args.unitary:
        v = theta_qc_unitary(load_matrix(args.a), load_matrix(args.b))
        return {"angle": v, "fidelity": math.cos(v)}, f"{v!r}", EXIT_OK
    if cmd in ("fidelity", "angle", "bures"):
        res = fidelity(_pair(args), tol)
        doc = _fidelity_doc(res)
        if res.fidelity <= config.ortho_threshold:
            doc["angle"] = 0.5 * math.pi
        return doc, f"{doc[cmd]!r}", EXIT_OK
    if cmd == "diamond-bounds":
        pair = _pair(args)
        lo, hi = diamond_bounds(pair, tol)
        doc = {"lower": lo, "upper": hi}
        text = f"[{lo!r}, {hi!r}]"
        if args.oracle:
            doc["oracle"] = oracles.diamond_norm(pair)
            doc["inside"] = bool(lo - 1e-6 <= doc["oracle"] <= hi + 1e-6)
            text += f"\noracle {doc['oracle']!r} ({'inside' if doc['inside'] else 'OUTSIDE'})"
        return doc, text, EXIT_OK
    if cmd == "qfi":
        est = fisher.qfi(_family(args), args.x, config.fd_step, richardson=not args.no_richardson, n_copies=args.n)
        doc = {"value": est.value, "step": est.step, "method": est.method, "error_budget": est.error_budget}
        return doc, f"{est.value!r} (budget {est.error_budget:.2e}, {est.method}, h={est.step:g})", EXIT_OK
    if cmd == "path-length":
        res = fisher.path_length_trace(_family(args), args.n, config.grid, _variant(args.variant))
        doc = {
            "value": res.value,
            "variant": res.variant,
            "n_copies": res.n_copies,
            "grid": res.grid,
            "converged": res.converged,
            "history": [list(h) for h in res.history],
        }
        return doc, f"{res.value!r} (grid {res.grid}{'' if res.converged else ', not converged'})", EXIT_OK
    if cmd == "discriminate":
        rep = disc.report(
            _pair(args),
            path=args.path == "mixture",
            variant=_variant(args.variant),
            max_n=config.max_n,
            grid=config.grid,
            tol=tol,
            ortho=config.ortho_threshold,
        )
        doc = {
            "theta": rep.theta,
            "fidelity": rep.fidelity,
            "bounds": rep.bounds(),
            "max_n": rep.max_n,
            "details": rep.details,
            "errors": rep.errors,
            "violations": rep.violations,
        }
        lines = [f"angle {rep.theta!r}  fidelity {rep.fidelity!r}"]
        for k, v in rep.bounds().items():
            note = rep.errors.get(k, "")
            lines.append(f"{k:<22}{'-' if v is None else v:>6}  {note}")
        lines += [f"ordering violated: {v}" for v in rep.violations]
        return doc, "\n".join(lines), EXIT_FAILURE if rep.violations else EXIT_OK
    if cmd == "reproduce-paper":
        rep = reproduce_paper(config)
        return rep.as_dict(), format_table(rep), EXIT_OK if rep.passed else EXIT_FAILURE
    if cmd == "oracle":
        return _run_oracle(args, config)
    raise ValidationError(f"unknown command {cmd!r}")


def _run_oracle(args, config: RunConfig) -> tuple[dict, str, int]:
    name = args.oracle
    if name == "state-fidelity":
        v = oracles.state_fidelity(load_matrix(args.r1), load_matrix(args.r2))
        return {"value": v}, f"{v!r}", EXIT_OK
    if name == "min-output-fidelity":
        res = oracles.min_output_fidelity(_pair(args), args.restarts, ancilla_dim=args.ancilla_dim, seed=config.seed)
        doc = {"value": res.value, "restarts": res.restarts, "best_start": res.best_start, "probe": res.probe}
        return doc, f"{res.value!r}", EXIT_OK
    if name == "min-overlap":
        res = oracles.min_overlap_unitary(load_matrix(args.file), args.restarts, seed=config.seed)
        return {"value": res.value, "restarts": res.restarts, "probe": res.probe}, f"{res.value!r}", EXIT_OK
    if name == "diamond":
        v = oracles.diamond_norm(_pair(args))
        return {"value": v}, f"{v!r}", EXIT_OK
    if name == "classical-fisher":
        probe = load_vector_or_matrix(args.probe) if args.probe else None
        v = oracles.classical_fisher_check(_family(args), args.x, load_povm(args.povm), probe=probe, h=config.fd_step)
        return {"value": v}, f"{v!r}", EXIT_OK
    raise ValidationError(f"unknown oracle {name!r}")


def _config(args) -> RunConfig:
    return RunConfig(
        sdp_tol=args.sdp_tol,
        ortho_threshold=args.ortho_threshold,
        fd_step=args.fd_step,
        grid=args.grid,
        max_n=args.max_n,
        seed=args.seed,
        output=args.output,
    )


def _fail(args, exc: BaseException, code: int) -> int:
    kind = type(exc).__name__
    if getattr(args, "output", "text") == "json":
        sys.stderr.write(to_json({"error": {"type": kind, "message": str(exc), "exit_code": code}}) + "\n")
    else:
        sys.stderr.write(f"chanmetric: {kind}: {exc}\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _Parser.argv = argv
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        config = _config(args)
        with contextlib.ExitStack() as stack:
            if args.dump_sdp:
                stream = stack.enter_context(open(args.dump_sdp, "a", encoding="utf-8"))
                stack.enter_context(sdp.dump_to(stream))
            result, text, code = run(args, config)
    except ValidationError as exc:
        return _fail(args, exc, EXIT_USAGE)
    except (sdp.SdpError, NumericalError, ch.ResourceLimitError, np.linalg.LinAlgError) as exc:
        return _fail(args, exc, EXIT_FAILURE)
    if config.output == "json":
        command = args.command if args.command != "oracle" else f"oracle {args.oracle}"
        doc = {"command": command, "format_version": FORMAT_VERSION, "config": config.as_dict(), "result": result}
        sys.stdout.write(to_json(doc) + "\n")
    else:
        sys.stdout.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
