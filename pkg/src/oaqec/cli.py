"""Command-line front end.

Each sub-command reads JSON inputs (see :mod:`oaqec.jsonio`), runs one
analysis and prints a text or JSON report. A whole invocation can also be
described by a manifest file::

    {"command": "correct",
     "inputs": {"channel": "E.json", "generators": ["g1.json"], "projector": "P.json"},
     "options": {"tol": 1e-8, "format": "json"}}

Relative paths in a manifest are resolved against the manifest's directory.

Stochastic matrices use the column convention: entry ``[i][j]`` is the
probability of the transition j -> i, so every column sums to one.

Exit codes: 0 on success, 2 when the tested condition fails (the report is
still written), 1 on input errors.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import applications, correction
from .channels import ChannelError
from .jsonio import (
    InputError,
    channel_to_json,
    dumps,
    load_json,
    matrix_to_json,
    parse_channel_file,
    parse_matrix_file,
    parse_observables_file,
    write_channel_file,
)
from .opspace import DecompositionError, StarAlgebra, generate_algebra, structure_decomposition

EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 1, 2

COMMANDS = ("decompose", "conserve", "correct", "max-correctable", "recover", "verify", "classical", "teleport", "flow")

# input name -> (loader, is_list)
_LOADERS = {
    "generators": (parse_matrix_file, True),
    "projector": (parse_matrix_file, False),
    "channel": (parse_channel_file, False),
    "recovery": (parse_channel_file, False),
    "stochastic": (parse_matrix_file, False),
    "observables": (parse_observables_file, False),
    "unitaries": (parse_matrix_file, True),
    "unitary": (parse_matrix_file, False),
    "rho_a": (parse_matrix_file, False),
}

_REQUIRED = {
    "decompose": ("generators",),
    "conserve": ("channel", "generators"),
    "correct": ("channel", "generators"),
    "max-correctable": ("channel",),
    "recover": ("channel",),
    "verify": ("recovery", "channel", "generators"),
    "classical": ("stochastic", "observables"),
    "teleport": ("unitaries",),
    "flow": ("unitary", "rho_a"),
}


@dataclass
class Manifest:
    command: str
    inputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "Manifest":
        obj = load_json(path)
        if not isinstance(obj, dict) or "command" not in obj:
            raise InputError(f"{path}: manifest must be an object with a 'command' field")
        base = Path(path).parent
        inputs = {}
        for name, value in (obj.get("inputs") or {}).items():
            if isinstance(value, list):
                inputs[name] = [str(base / v) for v in value]
            else:
                inputs[name] = str(base / value)
        options = dict(obj.get("options") or {})
        for key in ("recovery_out", "out"):
            if key in options:
                options[key] = str(base / options[key])
        return cls(obj["command"], inputs, options)


@dataclass
class Result:
    code: int
    report: dict
    text: list = field(default_factory=list)


def _sci(x: float) -> str:
    return f"{x:.2e}"


def _load_inputs(manifest: Manifest) -> dict:
    if manifest.command not in COMMANDS:
        raise InputError(f"unknown command {manifest.command!r}; expected one of {', '.join(COMMANDS)}")
    for name in _REQUIRED[manifest.command]:
        if not manifest.inputs.get(name):
            raise InputError(f"command {manifest.command!r} needs input {name!r}")
    loaded = {}
    for name, value in manifest.inputs.items():
        if name not in _LOADERS:
            raise InputError(f"unknown input {name!r}")
        loader, many = _LOADERS[name]
        if many:
            values = value if isinstance(value, list) else [value]
            loaded[name] = [loader(v) for v in values]
        else:
            loaded[name] = loader(value)
    return loaded


def _algebra(inputs: dict, dim: int) -> StarAlgebra:
    p = inputs.get("projector")
    if p is not None and p.shape != (dim, dim):
        raise InputError(f"projector has shape {p.shape}, expected {(dim, dim)}")
    for i, g in enumerate(inputs.get("generators", [])):
        if g.shape != (dim, dim):
            raise InputError(f"generator {i} has shape {g.shape}, expected {(dim, dim)}")
    return generate_algebra(inputs.get("generators", []), p, dim_h=dim)


def _report_json(rep: correction.CorrectionReport) -> dict:
    out = {"passed": rep.passed, "worst_residual": rep.worst_residual, "tol": rep.tol, "witness": None}
    if rep.witness is not None:
        idx, mat = rep.witness
        out["witness"] = {"indices": list(idx), "matrix": matrix_to_json(mat)}
    for key, value in rep.details.items():
        out[key] = value
    return out


def _blocks_json(bs) -> dict:
    return {"blocks": [list(b) for b in bs.blocks], "dim_c": bs.dim_c, "residual": bs.residual}


def _decompose(inputs, opts) -> Result:
    dim = inputs["generators"][0].shape[0]
    alg = _algebra(inputs, dim)
    report = {"algebra_dim": alg.dim, "compressed": alg.compressed}
    try:
        bs = structure_decomposition(alg, seed=opts["seed"])
    except DecompositionError as exc:
        worst = exc.worst_residual if np.isfinite(exc.worst_residual) else None
        report.update({"error": str(exc), "worst_residual": worst})
        return Result(EXIT_FAILED, report, [f"decomposition failed: {exc}"])
    report.update(_blocks_json(bs))
    report["intertwiner"] = matrix_to_json(bs.intertwiner)
    text = [f"algebra dimension {alg.dim}",
            "blocks (d, m): " + ", ".join(f"({d}, {m})" for d, m in bs.blocks),
            f"dim C: {bs.dim_c}",
            f"intertwiner residual {_sci(bs.residual)}"]
    return Result(EXIT_OK, report, text)


def _theorem(inputs, opts, which: int) -> Result:
    ch = inputs["channel"]
    alg = _algebra(inputs, ch.dim_in)
    p = inputs.get("projector")
    try:
        rep = (correction.is_conserved if which == 1 else correction.is_correctable)(ch, alg, p, opts["tol"])
    except correction.SupportError as exc:
        raise InputError(str(exc)) from exc
    report = {"theorem": which, "algebra_dim": alg.dim, "compressed": alg.compressed, **_report_json(rep)}
    verdict = "satisfied" if rep.passed else "violated"
    text = [f"Theorem {which} {verdict}, worst residual {_sci(rep.worst_residual)} (tol {_sci(rep.tol)})",
            f"algebra closure dimension {alg.dim}"]
    if which == 1:
        text.append(f"direct check residual {_sci(rep.details['direct_residual'])}, "
                    f"tests agree: {rep.details['tests_agree']}")
    if rep.witness is not None:
        idx, mat = rep.witness
        text.append(f"witness indices {idx}, commutator norm {_sci(float(np.linalg.norm(mat, 2)))}")
    code = EXIT_OK if rep.passed else EXIT_FAILED
    if which == 1 and not rep.details["tests_agree"]:
        text.append("WARNING: commutator test and direct test disagree")
        code = EXIT_FAILED
    return Result(code, report, text)


def _max_correctable(inputs, opts) -> Result:
    ch = inputs["channel"]
    alg = correction.max_correctable_algebra(ch, inputs.get("projector"))
    bs = structure_decomposition(alg, seed=opts["seed"])
    report = {"algebra_dim": alg.dim, **_blocks_json(bs), "basis": [matrix_to_json(x) for x in alg.basis]}
    text = [f"maximal correctable algebra dimension {alg.dim}",
            "blocks (d, m): " + ", ".join(f"({d}, {m})" for d, m in bs.blocks),
            f"dim C: {bs.dim_c}"]
    text += [f"basis[{i}]:\n{np.array2string(x, precision=4, suppress_small=True)}" for i, x in enumerate(alg.basis)]
    return Result(EXIT_OK, report, text)


def _recover(inputs, opts) -> Result:
    ch = inputs["channel"]
    p = inputs.get("projector")
    if inputs.get("generators"):
        alg = _algebra(inputs, ch.dim_in)
    else:
        alg = correction.max_correctable_algebra(ch, p)
    r = correction.petz_recovery(ch, p)
    rep = correction.verify_correction(r, ch, alg, p, opts["tol"])
    report = {"algebra_dim": alg.dim, "verification": _report_json(rep)}
    if opts.get("recovery_out"):
        write_channel_file(opts["recovery_out"], r)
        report["recovery_file"] = str(opts["recovery_out"])
    else:
        report["recovery"] = channel_to_json(r)
    text = [f"Petz recovery with {len(r)} Kraus elements",
            f"verification on algebra of dimension {alg.dim}: "
            f"{'passed' if rep.passed else 'FAILED'}, residual {_sci(rep.worst_residual)}"]
    if opts.get("recovery_out"):
        text.append(f"recovery channel written to {opts['recovery_out']}")
    return Result(EXIT_OK if rep.passed else EXIT_FAILED, report, text)


def _verify(inputs, opts) -> Result:
    ch, r = inputs["channel"], inputs["recovery"]
    alg = _algebra(inputs, ch.dim_in)
    try:
        rep = correction.verify_correction(r, ch, alg, inputs.get("projector"), opts["tol"])
    except ChannelError as exc:
        raise InputError(str(exc)) from exc
    report = {"algebra_dim": alg.dim, **_report_json(rep)}
    text = [f"correction {'verified' if rep.passed else 'FAILED'}, residual {_sci(rep.worst_residual)}",
            f"algebra closure dimension {alg.dim}"]
    return Result(EXIT_OK if rep.passed else EXIT_FAILED, report, text)


def _classical(inputs, opts) -> Result:
    p = inputs["stochastic"]
    if np.any(np.abs(p.imag) > 0):
        raise InputError("stochastic matrix must be real")
    p = p.real
    try:
        part = applications.confusability_classes(p)
    except ChannelError as exc:
        raise InputError(str(exc)) from exc
    verdicts = []
    for i, alpha in enumerate(inputs["observables"]):
        if alpha.size != p.shape[1]:
            raise InputError(f"observable {i} has {alpha.size} entries, expected {p.shape[1]}")
        verdicts.append(bool(applications.classical_correctable(p, alpha)))
    report = {"classes": [list(c) for c in part.classes], "correctable": verdicts}
    text = ["confusability classes: " + " ".join("{" + ",".join(map(str, c)) + "}" for c in part.classes)]
    text += [f"observable {i}: {'correctable' if v else 'not correctable'}" for i, v in enumerate(verdicts)]
    return Result(EXIT_OK if all(verdicts) else EXIT_FAILED, report, text)


def _teleport(inputs, opts) -> Result:
    us = inputs["unitaries"]
    p = inputs.get("stochastic")
    p = np.eye(len(us)) if p is None else p.real
    try:
        alg = applications.correctable_after_noisy_teleport(us, p)
    except ChannelError as exc:
        raise InputError(str(exc)) from exc
    bs = structure_decomposition(alg, seed=opts["seed"])
    part = applications.confusability_classes(p)
    report = {"classes": [list(c) for c in part.classes], "algebra_dim": alg.dim, **_blocks_json(bs),
              "basis": [matrix_to_json(x) for x in alg.basis]}
    text = ["indistinguishable flag classes: " + " ".join("{" + ",".join(map(str, c)) + "}" for c in part.classes),
            f"correctable algebra dimension {alg.dim}",
            "blocks (d, m): " + ", ".join(f"({d}, {m})" for d, m in bs.blocks)]
    return Result(EXIT_OK, report, text)


def _flow(inputs, opts) -> Result:
    dims = opts.get("dims")
    if dims is None:
        d_a = inputs["rho_a"].shape[0]
        side = inputs["unitary"].shape[0]
        if side % d_a:
            raise InputError(f"unitary side {side} is not a multiple of dim_A = {d_a}")
        dims = (side // d_a, d_a)
    dims = tuple(int(d) for d in dims)
    try:
        fr = applications.information_flow(inputs["unitary"], dims, inputs["rho_a"])
    except ChannelError as exc:
        raise InputError(str(exc)) from exc
    report = {
        "dims": list(dims),
        "a_ss_dim": fr.a_ss.dim,
        "a_sa_dim": fr.a_sa.dim,
        "pointer_dim": fr.pointer.dim,
        "pointer_commutative": fr.pointer_commutative,
        "pointer_commutator_residual": fr.commutator_residual,
        "a_sa_correctable_for_e_sa": _report_json(fr.sa_check),
        "pointer_basis": [matrix_to_json(x) for x in fr.pointer.basis],
    }
    text = [f"retained in S (A_SS): dimension {fr.a_ss.dim}",
            f"transferred to A (A_SA): dimension {fr.a_sa.dim}",
            f"pointer algebra: dimension {fr.pointer.dim}, "
            f"{'commutative' if fr.pointer_commutative else 'NOT commutative'}",
            f"A_SA correctable for E_SA: {fr.sa_check.passed} (residual {_sci(fr.sa_check.worst_residual)})"]
    ok = fr.pointer_commutative and fr.sa_check.passed
    return Result(EXIT_OK if ok else EXIT_FAILED, report, text)


def run(manifest: Manifest) -> Result:
    """Load every input, then dispatch. Input problems raise :class:`InputError`."""
    opts = {"tol": correction.DEFAULT_ATOL, "seed": 0, "format": "text", **manifest.options}
    inputs = _load_inputs(manifest)
    handlers = {
        "decompose": _decompose,
        "conserve": lambda i, o: _theorem(i, o, 1),
        "correct": lambda i, o: _theorem(i, o, 2),
        "max-correctable": _max_correctable,
        "recover": _recover,
        "verify": _verify,
        "classical": _classical,
        "teleport": _teleport,
        "flow": _flow,
    }
    try:
        result = handlers[manifest.command](inputs, opts)
    except (ChannelError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from exc
    result.report = {"command": manifest.command, "exit_code": result.code, **result.report}
    return result


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="pass/fail tolerance on residual norms (default 1e-8)")
    common.add_argument("--seed", type=int, help="seed for randomized steps (default 0)")
    common.add_argument("--format", choices=("text", "json"), help="report format (default text)")
    common.add_argument("--out", help="write the report to this path instead of stdout")

    parser = argparse.ArgumentParser(prog="oaqec", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    def gens(p, required):
        p.add_argument("--gen", dest="generators", nargs="+", required=required, metavar="FILE",
                       help="algebra generator matrix files")
        p.add_argument("--projector", metavar="FILE", help="code-space projector (default identity)")

    p = add("decompose", "block structure of the generated algebra")
    gens(p, True)
    for name, label in (("conserve", "Theorem 1: is the algebra conserved?"),
                        ("correct", "Theorem 2: is the algebra correctable?")):
        p = add(name, label)
        p.add_argument("--channel", required=True, metavar="FILE")
        gens(p, True)
    p = add("max-correctable", "maximal correctable algebra of a channel")
    p.add_argument("--channel", required=True, metavar="FILE")
    p.add_argument("--projector", metavar="FILE")
    p = add("recover", "build and verify the Petz recovery channel")
    p.add_argument("--channel", required=True, metavar="FILE")
    gens(p, False)
    p.add_argument("--recovery-out", dest="recovery_out", metavar="FILE", help="write the recovery channel here")
    p = add("verify", "check P (R o E)^dag(X) P = P X P on an algebra")
    p.add_argument("--recovery", required=True, metavar="FILE")
    p.add_argument("--channel", required=True, metavar="FILE")
    gens(p, True)
    p = add("classical", "confusability classes and correctable classical observables")
    p.add_argument("--stochastic", required=True, metavar="FILE", help="column-stochastic matrix, p[i][j] = P(j -> i)")
    p.add_argument("--observables", required=True, metavar="FILE", help="JSON list of diagonal observables")
    p = add("teleport", "correctable algebra after (noisy) teleportation")
    p.add_argument("--unitary", dest="unitaries", nargs="+", required=True, metavar="FILE")
    p.add_argument("--stochastic", metavar="FILE", help="noise on the classical flags (default noiseless)")
    p = add("flow", "information flow for a system-apparatus interaction")
    p.add_argument("--unitary", required=True, metavar="FILE", help="interaction on S (x) A, system first")
    p.add_argument("--rho-a", dest="rho_a", required=True, metavar="FILE")
    p.add_argument("--dims", nargs=2, type=int, metavar=("DIM_S", "DIM_A"))
    p = add("run", "execute a JSON manifest")
    p.add_argument("manifest")
    return parser


def _manifest_from_args(args) -> Manifest:
    if args.command == "run":
        manifest = Manifest.from_file(args.manifest)
    else:
        inputs = {}
        for name in _LOADERS:
            value = getattr(args, name, None)
            if value:
                inputs[name] = value
        options = {}
        for name in ("recovery_out", "dims"):
            value = getattr(args, name, None)
            if value is not None:
                options[name] = value
        manifest = Manifest(args.command, inputs, options)
    for name in ("tol", "seed", "format", "out"):
        value = getattr(args, name, None)
        if value is not None:
            manifest.options[name] = value
    return manifest


def main(argv: Optional[list] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        manifest = _manifest_from_args(args)
        result = run(manifest)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    fmt = manifest.options.get("format", "text")
    text = dumps(result.report) if fmt == "json" else "\n".join(result.text) + "\n"
    out = manifest.options.get("out")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
