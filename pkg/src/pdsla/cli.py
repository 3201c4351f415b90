"""Command-line interface: ``pdsla {simulate,lagselect,test,network,montecarlo}``.

Settings resolve as: command-line flag, then ``PDSLA_THREADS`` (threads
only), then the TOML file given by ``--config``, then built-in defaults. The
TOML file may hold top-level keys and per-subcommand tables, e.g.::

    threads = 2
    [test]
    d = 1
    variant = "wald"

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from pdsla import __version__
from pdsla.data_io import NA_POLICIES, apply_tcodes, load_csv
from pdsla.errors import EXIT_CODES, PdslaError, UsageError
from pdsla.lags import LagConfig
from pdsla.lagselect import DEFAULT_P_MAX, select_lag
from pdsla.lasso import C_LADDER
from pdsla.montecarlo import (
    McExperiment,
    format_lag_frequencies,
    run_lag_frequencies,
    run_size_power,
    table1_grid,
)
from pdsla.network import FORMATS, export_edges, holm_adjust, network_from, network_to
from pdsla.pds import VARIANTS, pds_la_test
from pdsla.simulate import DgpSpec, simulate_levels

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
THREADS_ENV = "PDSLA_THREADS"
logger = logging.getLogger("pdsla")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CODES["usage"], f"{self.prog}: error: {message}\n")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _lag_order(text):
    if str(text).lower() == "auto":
        return "auto"
    try:
        p = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    if p < 1:
        raise argparse.ArgumentTypeError("lag order must be >= 1")
    return p


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _c_ladder(text):
    ladder = _float_list(text)
    if not ladder or any(not 0.0 < c < 1.0 for c in ladder):
        raise argparse.ArgumentTypeError(f"c ladder values must lie in (0, 1), got {text!r}")
    return ladder


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _formats(text):
    items = text if isinstance(text, (list, tuple)) else [v.strip() for v in str(text).split(",") if v.strip()]
    bad = [v for v in items if v not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {FORMATS}, got {text!r}")
    return list(items)


def _common(parser: argparse.ArgumentParser, report_flag: str = "--format") -> None:
    parser.add_argument("--config", type=Path, help="TOML file with default settings")
    parser.add_argument("--threads", type=int, help=f"worker cap (env {THREADS_ENV}; default: all cores)")
    parser.add_argument(report_flag, dest="report_format", choices=("text", "json"), default="text",
                        help="report format on stdout")
    parser.add_argument("--verbose", "-v", action="store_true")


def _data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=Path, help="CSV panel (one column per variable)")
    parser.add_argument("--fredmd", type=_bool, default=False, metavar="BOOL",
                        help="file is in FRED-MD layout (transform-code row below the header)")
    parser.add_argument("--transform", type=_bool, default=False, metavar="BOOL",
                        help="apply the file's FRED-MD transform codes before testing")
    parser.add_argument("--date-column", help="column holding dates (default: none, or sasdate in FRED-MD mode)")
    parser.add_argument("--na-policy", choices=NA_POLICIES, default="truncate_to_complete_span",
                        help="missing-data handling; the default keeps the longest complete block and shortens T")
    parser.add_argument("--columns", help="comma-separated subset of variables to load")


def _test_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=_lag_order, default="auto", metavar="INT|auto",
                        help="lag order; 'auto' uses BIC* lag selection")
    parser.add_argument("--pmax", type=int, default=DEFAULT_P_MAX, help="largest lag considered by --p auto")
    parser.add_argument("--d", type=int, choices=(0, 1, 2), default=2, help="number of augmentation lags")
    parser.add_argument("--variant", choices=VARIANTS, default="lm-f")
    parser.add_argument("--intercept", type=_bool, default=True, metavar="BOOL")
    parser.add_argument("--c-ladder", type=_c_ladder, default=list(C_LADDER),
                        help="selection-bound constants tried in order (comma-separated)")
    parser.add_argument("--extra-lag", choices=("auto", "on", "off"), default="auto",
                        help="add x lag p+1 to first-stage regressions (auto: when p <= d)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdsla", description="Lag-augmented post-double-selection Granger causality tests.")
    parser.add_argument("--version", action="version", version=f"pdsla {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a panel from a Monte Carlo design")
    p.add_argument("--dgp", type=int, choices=(1, 2), default=1)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--t", type=int, default=200)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--power", type=_bool, default=False, metavar="BOOL",
                   help="power design (variable 1 drives variable 2)")
    p.add_argument("--power-coef", type=float, default=0.2)
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lagselect", help="choose the lag order by AIC*/BIC*")
    _data_options(p)
    p.add_argument("--pmax", type=int, default=DEFAULT_P_MAX)
    p.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    p.add_argument("--intercept", type=_bool, default=True, metavar="BOOL")
    _common(p)
    p.set_defaults(func=cmd_lagselect)

    p = sub.add_parser("test", help="test one Granger causal relation")
    _data_options(p)
    p.add_argument("--caused", help="Granger-caused variable")
    p.add_argument("--causing", help="Granger-causing variable")
    _test_options(p)
    p.add_argument("--alpha", type=float, default=0.05)
    _common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("network", help="test every variable against one node and export the edges")
    _data_options(p)
    p.add_argument("--node", help="central variable")
    p.add_argument("--direction", choices=("to", "from", "both"), default="both")
    _test_options(p)
    p.add_argument("--alpha", type=float, default=0.05, help="significance level for DOT output")
    p.add_argument("--holm", type=_bool, default=False, metavar="BOOL", help="Holm-adjust p-values")
    p.add_argument("--format", dest="edge_formats", type=_formats, default=list(FORMATS),
                   help="edge file formats, comma-separated from csv,json,dot")
    p.add_argument("--sectors", type=Path, help="CSV with columns name,sector added to the CSV edges")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    _common(p, report_flag="--report-format")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("montecarlo", help="size/power tables and lag-selection frequencies")
    p.add_argument("--table1", action="store_true", help="the full 80-cell size/power grid")
    p.add_argument("--dgp", type=_int_list, default=[1], help="comma-separated DGP kinds")
    p.add_argument("--rho", type=_float_list, default=[0.0])
    p.add_argument("--k", type=_int_list, default=[10])
    p.add_argument("--t", type=_int_list, default=[500])
    p.add_argument("--designs", default="size,power", help="size, power or both")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--d", type=int, choices=(0, 1, 2), default=2)
    p.add_argument("--variant", choices=VARIANTS, default="lm-f")
    p.add_argument("--c-ladder", type=_c_ladder, default=list(C_LADDER))
    p.add_argument("--lagfreq", action="store_true", help="lag-selection frequencies instead of size/power")
    p.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    p.add_argument("--pmax", type=int, default=DEFAULT_P_MAX)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    _common(p)
    p.set_defaults(func=cmd_montecarlo)
    return parser


def _load_config(path: Path, command: str) -> dict:
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    merged = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    merged.update(raw.get(command, {}))
    return {k.replace("-", "_"): v for k, v in merged.items()}


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Parse, then re-parse with the config file's values installed as defaults."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    values = _load_config(args.config, args.command)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    converted = {}
    for key, value in values.items():
        if key in ("config", "command", "func") or key not in actions:
            raise UsageError(f"unknown setting {key!r} in {args.config} for '{args.command}'")
        action = actions[key]
        if action.type is not None and not isinstance(value, bool):
            value = action.type(value if isinstance(value, (list, tuple)) else str(value))
        elif action.type is _bool:
            value = _bool(value)
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"invalid value {value!r} for {key!r} in {args.config}")
        converted[key] = value
    subparser.set_defaults(**converted)
    return parser.parse_args(argv)


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    elif os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def resolved_config(args) -> dict:
    skip = {"func", "config", "verbose", "report_format"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, payload: dict, text: str) -> None:
    if args.report_format == "json":
        doc = {"schema": SCHEMA_VERSION, "command": args.command, "config": resolved_config(args)}
        doc.update(payload)
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    else:
        sys.stdout.write(text)


def _read_panel(args):
    if args.data is None:
        raise UsageError("--data is required")
    columns = None if args.columns is None else [c.strip() for c in args.columns.split(",") if c.strip()]
    panel = load_csv(args.data, args.date_column, args.fredmd, args.na_policy, columns)
    if args.transform:
        panel = apply_tcodes(panel)
    return panel


def _resolve_p(args, panel):
    if args.p != "auto":
        return args.p, None
    sel = select_lag(panel, args.pmax, "bic", args.intercept)
    return sel.p_chosen, sel


def _extra_lag(args) -> Optional[bool]:
    return {"auto": None, "on": True, "off": False}[args.extra_lag]


def _lag_config(p: int, d: int, intercept: bool) -> LagConfig:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = LagConfig(p, d, intercept=intercept)
    for w in caught:
        logger.warning("%s", w.message)
    return cfg


def cmd_simulate(args) -> int:
    maker = DgpSpec.power_design if args.power else DgpSpec.size_design
    kw = {"coef": args.power_coef} if args.power else {}
    spec = maker(args.dgp, args.k, args.t, args.rho, burn_in=args.burn_in, seed=args.seed, **kw)
    panel = simulate_levels(spec)
    if args.out is None:
        import csv

        writer = csv.writer(sys.stdout)
        writer.writerow(panel.names)
        for row in panel.values:
            writer.writerow([repr(float(v)) for v in row])
        return 0
    panel.to_csv(args.out)
    _emit(args, {"result": {"path": str(args.out), "T": panel.T, "K": panel.K}},
          f"wrote {panel.T} x {panel.K} panel to {args.out}\n")
    return 0


def cmd_lagselect(args) -> int:
    panel = _read_panel(args)
    sel = select_lag(panel, args.pmax, args.criterion, args.intercept)
    result = {
        "p_chosen": sel.p_chosen,
        "criterion": sel.criterion,
        "n_obs": sel.n_obs,
        "scores": [float(s) for s in sel.scores],
    }
    lines = [f"{sel.criterion.upper()}* lag selection on {panel.K} series, n = {sel.n_obs}"]
    for p, s in enumerate(sel.scores, start=1):
        lines.append(f"  p = {p:>2}  {s: .6f}{'  <-' if p == sel.p_chosen else ''}")
    lines.append(f"chosen p = {sel.p_chosen}")
    _emit(args, {"result": result}, "\n".join(lines) + "\n")
    return 0


def _format_test(res, alpha: float, sel) -> str:
    df = f"({res.df1}, {res.df2})" if res.df2 is not None else f"({res.df1})"
    lines = [
        f"{res.method}: {res.causing} -> {res.caused}",
        f"  statistic   {res.statistic:.6g}  [{res.kind}{df}]",
        f"  p-value     {res.p_value:.6g}  ({'reject' if res.reject(alpha) else 'do not reject'} at {alpha})",
        f"  p, d        {res.p}, {res.d}" + ("  (p from BIC*)" if sel is not None else ""),
        f"  c           {res.c}",
        f"  T_eff       {res.t_eff}",
        f"  selected    {res.selected.union_size}: {', '.join(f'{n}.L{l}' for n, l in res.selected_labels) or '-'}",
    ]
    if res.dropped:
        lines.append(f"  dropped     {', '.join(f'{n}.L{l}' for n, l in res.dropped)}")
    return "\n".join(lines) + "\n"


def cmd_test(args) -> int:
    if args.caused is None or args.causing is None:
        raise UsageError("--caused and --causing are required")
    panel = _read_panel(args)
    p, sel = _resolve_p(args, panel)
    cfg = _lag_config(p, args.d, args.intercept)
    res = pds_la_test(panel, args.caused, args.causing, cfg, args.variant,
                      c_ladder=tuple(args.c_ladder), extra_lag=_extra_lag(args))
    result = res.to_dict()
    result["alpha"] = args.alpha
    result["reject"] = bool(res.reject(args.alpha))
    result["p_source"] = "bic" if sel is not None else "flag"
    _emit(args, {"result": result}, _format_test(res, args.alpha, sel))
    return 0


def _read_sectors(path: Optional[Path]) -> Optional[dict]:
    if path is None:
        return None
    import pandas as pd

    frame = pd.read_csv(path, dtype=str)
    if not {"name", "sector"} <= set(frame.columns):
        raise UsageError("sector file needs columns 'name' and 'sector'")
    return dict(zip(frame["name"], frame["sector"]))


def cmd_network(args) -> int:
    if args.node is None:
        raise UsageError("--node is required")
    panel = _read_panel(args)
    p, sel = _resolve_p(args, panel)
    cfg = _lag_config(p, args.d, args.intercept)
    workers = _threads(args)
    kw = {"c_ladder": tuple(args.c_ladder), "extra_lag": _extra_lag(args)}
    directions = ("to", "from") if args.direction == "both" else (args.direction,)
    sectors = _read_sectors(args.sectors)
    args.out.mkdir(parents=True, exist_ok=True)
    node = panel.names[panel.index(args.node)]
    summary, lines = {}, []
    for direction in directions:
        fn = network_to if direction == "to" else network_from
        edges = fn(panel, node, cfg, args.variant, workers=workers, **kw)
        if args.holm:
            edges = holm_adjust(edges)
        files = []
        for fmt in args.edge_formats:
            path = args.out / f"network_{direction}_{node}.{fmt}"
            export_edges(edges, path, fmt, args.alpha, sectors)
            files.append(str(path))
        significant = [e for e in edges if (e.p_adjusted if e.p_adjusted is not None else e.p_value) is not None
                       and (e.p_adjusted if e.p_adjusted is not None else e.p_value) <= args.alpha]
        failed = [e for e in edges if e.error is not None]
        summary[direction] = {"edges": len(edges), "significant": len(significant),
                              "failed": len(failed), "files": files}
        arrow = f"* -> {node}" if direction == "to" else f"{node} -> *"
        lines.append(f"{arrow}: {len(significant)} of {len(edges)} edges with p <= {args.alpha}"
                     + (f", {len(failed)} failed" if failed else ""))
        lines.extend(f"  wrote {f}" for f in files)
    result = {"p": p, "p_source": "bic" if sel is not None else "flag", "d": args.d, "directions": summary}
    _emit(args, {"result": result}, "\n".join(lines) + "\n")
    return 0


def cmd_montecarlo(args) -> int:
    workers = _threads(args)
    designs = tuple(d.strip() for d in args.designs.split(",") if d.strip())
    if not designs or any(d not in ("size", "power") for d in designs):
        raise UsageError("--designs must be drawn from size,power")
    if args.table1:
        grid = table1_grid(designs=designs)
    else:
        grid = table1_grid(dgps=args.dgp, rhos=args.rho, Ks=args.k, Ts=args.t, designs=designs)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.lagfreq:
        # the lag-selection study uses the size designs only
        specs = list(dict.fromkeys(s for s in grid if s.power_coef in (None, 0.0)))
        freqs = run_lag_frequencies(specs, args.criterion, args.reps, args.pmax, args.seed, workers)
        path = args.out / f"lagfreq_{args.criterion}.csv"
        with path.open("w") as fh:
            fh.write("dgp,rho,K,T,criterion,failures," + ",".join(f"p{p}" for p in range(1, args.pmax + 1)) + "\n")
            for f in freqs:
                vals = ",".join(repr(float(v)) for v in f.frequencies())
                fh.write(f"{f.spec.kind},{f.spec.rho!r},{f.spec.K},{f.spec.T},{f.criterion},{f.failures},{vals}\n")
        text = format_lag_frequencies(freqs)
        (args.out / f"lagfreq_{args.criterion}.txt").write_text(text)
        result = {"files": [str(path)], "cells": [
            {"dgp": f.spec.kind, "rho": f.spec.rho, "K": f.spec.K, "T": f.spec.T,
             "frequencies": [float(v) for v in f.frequencies()], "failures": f.failures} for f in freqs]}
        _emit(args, {"result": result}, text)
        return 0
    experiment = McExperiment(grid, args.reps, args.alpha, args.p, args.d, args.variant,
                              tuple(args.c_ladder), args.seed)

    def progress(cell):
        logger.info("%s dgp=%d rho=%s K=%d T=%d: %.3f (%.1fs)", cell.design, cell.spec.kind,
                    cell.spec.rho, cell.spec.K, cell.spec.T, cell.frequency, cell.wall_time)

    res = run_size_power(experiment, workers=workers, progress=progress)
    csv_path = args.out / "table1.csv"
    txt_path = args.out / "table1.txt"
    res.to_csv(csv_path)
    text = res.to_text()
    txt_path.write_text(text)
    result = {"files": [str(csv_path), str(txt_path)], "cells": [c.row() for c in res.cells]}
    _emit(args, {"result": result}, text)
    return 0


def _report_error(args, exc: BaseException, category: str) -> int:
    message = str(exc)
    fmt = getattr(args, "report_format", "text") if args is not None else "text"
    if fmt == "json":
        doc = {"schema": SCHEMA_VERSION, "error": {"category": category, "type": type(exc).__name__,
                                                   "message": message}}
        sys.stderr.write(json.dumps(doc) + "\n")
    else:
        sys.stderr.write(f"pdsla: {category} error ({type(exc).__name__}): {message}\n")
    return EXIT_CODES[category]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = None
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except PdslaError as exc:
        return _report_error(args, exc, exc.category)
    except argparse.ArgumentTypeError as exc:
        return _report_error(args, exc, "usage")
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _report_error(args, exc, "data")


if __name__ == "__main__":
    sys.exit(main())
