"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 non-convergence (or a
``--strict`` PES row above chemical accuracy), 4 missing fixture.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import compiler, dmsmap, vqe
from .fermion import load_fcidump_file, validate_word, word_matrix

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_FIXTURE = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    return [int(v) for v in _float_list(text)]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes (default: logical cores)")
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.add_argument("--config", default=None, help="flat JSON file of option defaults; flags override it")
    p.add_argument("--data-dir", default=None, help="fixture directory (default: the repository data/ tree)")


def _pipeline_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--molecule", choices=["h2", "h4"], default="h2")
    p.add_argument("--mapping", choices=["snap", "ecd_lcu", "pauli", "dms"], default="snap")
    p.add_argument("--ansatz", choices=list(vqe.ANSATZ_KINDS), default="SnapDisp")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--partition", type=_int_list, default=None)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--library", default=None, help="SNAP parameter library JSON")
    p.add_argument("--group-cache", default=None, help="ECD-LCU group decomposition JSON")
    p.add_argument("--no-compile", action="store_true", help="fail instead of compiling missing words")
    p.add_argument("--constraint", choices=["number", "spin"], default=None)
    p.add_argument("--constraint-weight", type=float, default=vqe.DEFAULT_PENALTY)


def build_parser() -> tuple[argparse.ArgumentParser, dict[tuple[str, ...], argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="qumodechem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    leaves: dict[tuple[str, ...], argparse.ArgumentParser] = {}

    p = sub.add_parser("fci", help="exact ground-state energy of a fixture")
    p.add_argument("--molecule", choices=["h2", "h4"], default="h2")
    p.add_argument("--R", type=float, required=True, help="bond length in Angstrom")
    _common(p)
    leaves[("fci",)] = p

    p = sub.add_parser("compile", help="compile one Pauli word into a library-format file")
    p.add_argument("word")
    p.add_argument("--method", choices=["snap", "ecd_lcu"], default="snap")
    p.add_argument("--depth", type=int, default=None, help="N_d (default 16 for snap, 10 for ecd_lcu)")
    p.add_argument("--n-terms", type=int, default=15)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--threshold", type=float, default=compiler.DEFAULT_THRESHOLD)
    _common(p)
    leaves[("compile",)] = p

    lib = sub.add_parser("library", help="build or verify a Pauli parameter library")
    lsub = lib.add_subparsers(dest="action", required=True)
    p = lsub.add_parser("build")
    p.add_argument("--max-qubits", type=int, default=4)
    p.add_argument("--words", default=None, help="comma-separated words (default: all words up to --max-qubits)")
    p.add_argument("--method", choices=["snap", "ecd_lcu"], default="snap")
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--n-terms", type=int, default=15)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--threshold", type=float, default=compiler.DEFAULT_THRESHOLD)
    p.add_argument("--resume", action="store_true", help="extend an existing --out library")
    _common(p)
    leaves[("library", "build")] = p
    p = lsub.add_parser("verify")
    p.add_argument("path")
    p.add_argument("--sample", type=int, default=0, help="words to recompute (0 = all)")
    _common(p)
    leaves[("library", "verify")] = p

    p = sub.add_parser("vqe", help="one VQE run at one geometry")
    p.add_argument("--R", type=float, required=True)
    _pipeline_opts(p)
    _common(p)
    leaves[("vqe",)] = p

    p = sub.add_parser("pes", help="potential energy scan against FCI")
    p.add_argument("--geometries", type=_float_list, default=None, help="comma-separated bond lengths (Angstrom)")
    p.add_argument("--strict", action="store_true", help="exit 3 if any row misses chemical accuracy")
    _pipeline_opts(p)
    _common(p)
    leaves[("pes",)] = p

    dms = sub.add_parser("dms", help="DMS bosonic Hamiltonian tools")
    dsub = dms.add_subparsers(dest="action", required=True)
    p = dsub.add_parser("export")
    p.add_argument("--R", type=float, required=True)
    _common(p)
    leaves[("dms", "export")] = p
    return parser, leaves


def _leaf_key(args) -> tuple[str, ...]:
    return (args.command,) + ((args.action,) if getattr(args, "action", None) else ())


def _load_config(argv: list[str]) -> dict | None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return None
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold one flat JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse(argv: list[str]) -> argparse.Namespace:
    """Parse ``argv``; a ``--config`` file supplies defaults that flags override."""
    parser, leaves = build_parser()
    cfg = _load_config(argv)
    if cfg is not None:
        key = tuple(argv[:2]) if argv[:1] in (["library"], ["dms"]) else tuple(argv[:1])
        leaf = leaves.get(key)
        if leaf is None:
            parser.parse_args(argv)  # reports the usage error
            raise UsageError("--config needs a subcommand")
        unknown = sorted(set(cfg) - {a.dest for a in leaf._actions})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for action in leaf._actions:
            if action.dest in cfg:
                action.required = False
        leaf.set_defaults(**cfg)
    return parser.parse_args(argv)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def cmd_fci(args) -> int:
    e = vqe.fci_energy(args.molecule, args.R, args.data_dir)
    _emit(_dump({"molecule": args.molecule, "R_angstrom": args.R, "E_fci_hartree": e}), args.out)
    return EXIT_OK


def cmd_compile(args) -> int:
    try:
        word = validate_word(args.word)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if len(word) > 4:
        raise UsageError("words longer than 4 qubits exceed the L = 16 cutoff")
    depth = args.depth if args.depth is not None else (16 if args.method == "snap" else 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", compiler.NotConvergedWarning)
        res = compiler.compile_target(word_matrix(word), args.method, depth, args.n_terms, args.restarts,
                                      args.max_iter, args.seed, args.threshold)
    lib = compiler.ParamLibrary(args.method, depth, args.threshold, n_terms=args.n_terms if args.method == "ecd_lcu" else None)
    lib.add(word, res)
    _emit(lib.to_json() + "\n", args.out)
    print(f"{word} loss={res.final_loss:.3e} converged={res.converged}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_library_build(args) -> int:
    if not args.out:
        raise UsageError("library build needs --out")
    words = [validate_word(w) for w in args.words.split(",")] if args.words else None
    existing = compiler.load_library(args.out, verify_sample=0) if args.resume and Path(args.out).exists() else None

    def progress(word, res):
        print(f"{word} loss={res.final_loss:.3e}", flush=True)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", compiler.NotConvergedWarning)
        lib = compiler.build_pauli_library(args.max_qubits, args.method, args.depth, args.threshold, words,
                                           args.restarts, None, args.seed, args.n_terms, args.threads, existing, progress)
    compiler.save_library(lib, args.out)
    bad = [w for w, e in lib.entries.items() if e["loss"] > lib.threshold]
    print(f"{len(lib.entries)} words, {len(bad)} above threshold")
    return EXIT_NOT_CONVERGED if bad else EXIT_OK


def cmd_library_verify(args) -> int:
    try:
        lib = compiler.load_library(args.path, verify_sample=0)
    except compiler.LibraryError as exc:
        print(f"library rejected: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    words = sorted(lib.entries)
    if args.sample:
        words = sorted(np.random.default_rng(args.seed).choice(words, min(args.sample, len(words)), replace=False))
    report = {}
    bad = 0
    for w in words:
        loss = compiler.verify_entry(lib, w)
        ok = abs(loss - lib.entries[w]["loss"]) <= 1e-12 and loss <= lib.threshold
        bad += not ok
        report[w] = {"recomputed": loss, "stored": lib.entries[w]["loss"], "ok": ok}
    _emit(_dump({"metadata": lib.metadata(), "words": report}), args.out)
    return EXIT_OK if bad == 0 else EXIT_NOT_CONVERGED


def _config(args) -> vqe.PipelineConfig:
    return vqe.PipelineConfig(
        molecule=args.molecule, mapping=args.mapping, ansatz=args.ansatz, depth=args.depth,
        partition=tuple(args.partition) if args.partition else None, restarts=args.restarts,
        max_iter=args.max_iter, seed=args.seed, data_dir=args.data_dir, library=args.library,
        group_cache=args.group_cache, compile_missing=not args.no_compile, constraint=args.constraint,
        constraint_weight=args.constraint_weight,
    )


def _row_json(row: vqe.PesRow) -> dict:
    d = json.loads(row.result.to_json())
    d.update({"R_angstrom": row.R, "E_fci_hartree": row.e_fci, "abs_error_hartree": row.abs_error,
              "E_exact_pauli_hartree": row.e_exact})
    return d


def cmd_vqe(args) -> int:
    row = vqe.Pipeline(_config(args)).solve(args.R)
    _emit(_dump(_row_json(row)), args.out)
    return EXIT_OK if row.result.converged else EXIT_NOT_CONVERGED


def cmd_pes(args) -> int:
    geoms = args.geometries
    if geoms is None:
        geoms = [0.3, 0.5, 0.7, 0.7414, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9, 2.1] if args.molecule == "h2" else [1.0, 2.0]
    cfg = _config(args)
    for R in geoms:  # fail before any work when a fixture is absent
        vqe.fixture_path(cfg.molecule, R, cfg.data_dir)
    rows = vqe.pes_scan(geoms, cfg, progress=lambda r: print(f"R={r.R:.4f} |dE|={r.abs_error:.2e}", file=sys.stderr))
    _emit(vqe.pes_to_csv(rows), args.out)
    if args.strict and any(not r.abs_error <= vqe.CHEMICAL_ACCURACY for r in rows):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_dms_export(args) -> int:
    ints = load_fcidump_file(vqe.fixture_path("h2", args.R, args.data_dir))
    payload = dmsmap.export_physical_block(dmsmap.build_h2_bosonic_hamiltonian(ints))
    payload["R_angstrom"] = args.R
    _emit(_dump(payload), args.out)
    return EXIT_OK


COMMANDS = {
    ("fci",): cmd_fci,
    ("compile",): cmd_compile,
    ("library", "build"): cmd_library_build,
    ("library", "verify"): cmd_library_verify,
    ("vqe",): cmd_vqe,
    ("pes",): cmd_pes,
    ("dms", "export"): cmd_dms_export,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[_leaf_key(args)](args)
    except SystemExit as exc:  # argparse errors
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except vqe.FixtureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIXTURE
    except (vqe.LibraryMissError, compiler.LibraryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
