"""Command-line scenario runner.

`usc-qed run config.toml` executes the scenarios declared in a TOML file;
`usc-qed reproduce <figure-id>` runs the built-in parameter bundles for the
reference figures.  Both emit CSV tables plus a manifest.json listing every
file with its content hash, the scenario hash, and the code version.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .scenarios import FIGURE_IDS, Scenario, Table, figS6_analytic_tables, figure_scenarios

_SCENARIO_FIELDS = {f.name for f in dataclasses.fields(Scenario)}
_LIST_FIELDS = {"outputs", "eta_values"}


def _parse_config(path: Path) -> list[Scenario]:
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    defaults = raw.get("defaults", {})
    scenarios = []
    for i, entry in enumerate(raw.get("scenario", [])):
        merged = {**defaults, **entry}
        name = merged.get("name", f"scenario{i}")
        unknown = set(merged) - _SCENARIO_FIELDS
        if unknown:
            raise ConfigError(f"{path}: scenario {name!r}: unknown keys {sorted(unknown)}")
        for key in _LIST_FIELDS & set(merged):
            merged[key] = tuple(merged[key])
        try:
            scn = Scenario(**{**merged, "name": name})
            scn.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: scenario {name!r}: {exc}") from exc
        scenarios.append(scn)
    return scenarios


class ConfigError(Exception):
    pass


def _limit_blas_threads():
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def _execute(scenario: Scenario) -> list[Table]:
    return scenario.run()


def _write_csv(path: Path, table: Table) -> str:
    labels = [table.independent[0]] + [label for label, _ in table.series]
    cols = [table.independent[1]] + [vals for _, vals in table.series]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError(f"table {table.name}: ragged columns")
    lines = [",".join(labels)]
    for r in range(n):
        lines.append(",".join(f"{float(c[r]):.17g}" for c in cols))
    data = ("\n".join(lines) + "\n").encode()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def _emit(out_dir: Path, produced: list[tuple[Scenario | None, list[Table]]],
          extra_meta: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"code_version": __version__, **extra_meta, "files": []}
    for scenario, tables in produced:
        for table in tables:
            fname = f"{table.name}.csv"
            digest = _write_csv(out_dir / fname, table)
            manifest["files"].append({
                "name": fname,
                "sha256": digest,
                "scenario": scenario.name if scenario else table.name,
                "scenario_hash": scenario.scenario_hash() if scenario else "builtin",
            })
    manifest["files"].sort(key=lambda e: e["name"])
    mpath = out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def _run_scenarios(scenarios: list[Scenario], threads: int
                   ) -> list[tuple[Scenario, list[Table]]]:
    if threads <= 1 or len(scenarios) <= 1:
        return [(s, _execute(s)) for s in scenarios]
    with cf.ProcessPoolExecutor(max_workers=threads,
                                initializer=_limit_blas_threads) as pool:
        results = list(pool.map(_execute, scenarios))
    return list(zip(scenarios, results))


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", default=None, help="output directory "
                   "(default: $USC_QED_OUT or ./usc_qed_out)")
    p.add_argument("--n-fock", type=int, default=None, help="override photon truncation")
    p.add_argument("--n-keep", type=int, default=None, help="override dressed-state truncation")
    p.add_argument("--threads", type=int, default=min(4, os.cpu_count() or 1),
                   help="parallel scenarios (within-scenario stays sequential)")
    p.add_argument("--seed", type=int, default=None,
                   help="reserved; recorded in the manifest (no stochastic paths exist)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="usc-qed",
        description="gauge-invariant dissipative cavity-QED scenarios")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run scenarios from a TOML config")
    p_run.add_argument("config", type=Path)
    _add_common(p_run)
    p_rep = sub.add_parser("reproduce", help="run a built-in figure bundle")
    p_rep.add_argument("figure_id")
    _add_common(p_rep)
    args = parser.parse_args(argv)

    out_dir = Path(args.out or os.environ.get("USC_QED_OUT", "usc_qed_out"))
    meta = {"command": args.command}
    if args.seed is not None:
        meta["seed"] = args.seed

    try:
        if args.command == "run":
            scenarios = _parse_config(args.config)
            meta["config"] = str(args.config)
        else:
            try:
                scenarios = figure_scenarios(args.figure_id)
            except KeyError:
                print(f"unknown figure id {args.figure_id!r}; available: "
                      f"{', '.join(FIGURE_IDS)}", file=sys.stderr)
                return 2
            meta["figure"] = args.figure_id
        for field, key in (("n_fock", "n_fock"), ("n_keep", "n_keep")):
            override = getattr(args, field)
            if override is not None:
                scenarios = [dataclasses.replace(s, **{key: override}) for s in scenarios]
        for s in scenarios:
            s.validate()
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        produced: list[tuple[Scenario | None, list[Table]]] = list(
            _run_scenarios(scenarios, args.threads))
        if args.command == "reproduce" and args.figure_id == "figS6":
            produced.append((None, figS6_analytic_tables()))
        mpath = _emit(out_dir, produced, meta)
    except Exception as exc:  # invariant violations et al.: diagnostic + nonzero
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    n_files = sum(len(tables) for _, tables in produced)
    print(f"wrote {n_files} file(s) + manifest to {out_dir} ({mpath.name})")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
