from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import harness
from .core import default_catalog
from .harness import ExperimentSpec, SpecError

_SCENARIO_FLAGS = (
    ("--tx-rate", "tx_rate", float, "per-device packet rate [1/s]"),
    ("--channels", "channels", int, "physical channels per hopping grid"),
    ("--grids", "grids", int, "number of hopping grids"),
    ("--tx-power-dbm", "tx_power_dbm", float, "transmit power [dBm]"),
    ("--header-toa", "header_toa_s", float, "header time on air [s]"),
    ("--fragment-toa", "fragment_toa_s", float, "fragment time on air [s]"),
    ("--duration", "sim_duration_s", float, "simulated horizon [s]"),
)


def _int_list(text: str) -> list[int]:
    """Parse ``20000,40000`` or a range ``20000:200000:20000`` (inclusive)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi, *rest = (int(x) for x in part.split(":"))
            step = rest[0] if rest else 1
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(int(part))
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--devices", type=_int_list, default=None,
                   help="device counts, e.g. 20000,40000 or 20000:200000:20000")
    p.add_argument("--payload", type=_int_list, default=None, help="payload sizes [bytes]")
    for flag, dest, typ, hlp in _SCENARIO_FLAGS:
        p.add_argument(flag, dest=dest, type=typ, default=None, help=hlp)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")


def _add_sim(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seeds", type=_int_list, default=None, help="simulation seeds (default 1:10)")
    p.add_argument("--allow-repeats", action="store_true",
                   help="let consecutive hops reuse a channel")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lrfhss-alloc",
        description="Model, simulate and optimize probabilistic LR-FHSS setup allocation.",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("analytic", help="closed-form metrics for fixed distributions")
    _add_common(s)
    s.add_argument("--policy", action="append", default=None,
                   help="DR8, DR9, S<k>, 'k:w+k:w', opt-<objective>, q<b>-<objective> (repeatable)")

    s = sub.add_parser("simulate", help="closed-form plus seeded simulation")
    _add_common(s)
    _add_sim(s)
    s.add_argument("--policy", action="append", default=None)

    s = sub.add_parser("optimize", help="exhaustive grid search for the best distribution")
    _add_common(s)
    s.add_argument("--objective", action="append", default=None,
                   choices=("goodput", "energy_efficiency"))
    s.add_argument("--step", default="1/20", help="grid step 1/L (default 1/20)")
    s.add_argument("--verify", type=int, default=0, metavar="N",
                   help="re-score the top N grid points by simulation (printed to stderr)")
    s.add_argument("--seeds", type=_int_list, default=None)
    s.add_argument("--table", action="store_true", help="print the weight table instead of rows")

    s = sub.add_parser("quantize", help="b-bit S1/S6 search and downlink octets")
    _add_common(s)
    s.add_argument("--objective", action="append", default=None,
                   choices=("goodput", "energy_efficiency"))
    s.add_argument("--bits", type=_int_list, default=None, help="bit widths (default 1,2,3,4)")
    s.add_argument("--downlink", action="store_true",
                   help="emit chosen codes and downlink octets as JSON instead of rows")

    s = sub.add_parser("reproduce", help="regenerate a named table or figure data set")
    s.add_argument("target", choices=sorted(harness.SUITES))
    _add_common(s)
    s.add_argument("--simulate", action="store_true", help="add seeded simulation columns")
    _add_sim(s)

    s = sub.add_parser("run", help="run an experiment config file (JSON)")
    s.add_argument("config")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out", default=None)
    return p


def _scenario(args) -> dict:
    return {dest: getattr(args, dest) for _, dest, _, _ in _SCENARIO_FLAGS if getattr(args, dest) is not None}


def _grid_kwargs(args) -> dict:
    kw = {}
    if args.devices:
        kw["device_grid"] = tuple(args.devices)
    if args.payload:
        kw["payload_grid"] = tuple(args.payload)
    return kw


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _run(args) -> None:
    if args.cmd == "run":
        spec = harness.load_spec(args.config)
        _write(harness.emit(harness.run_experiment(spec), args.format), args.out)
        return

    common = dict(scenario=_scenario(args), jobs=args.jobs, **_grid_kwargs(args))

    if args.cmd in ("analytic", "simulate"):
        extra = {}
        if args.cmd == "simulate":
            extra["allow_repeats"] = args.allow_repeats
            if args.seeds:
                extra["seeds"] = tuple(args.seeds)
        spec = ExperimentSpec(mode=args.cmd, policies=tuple(args.policy or ()), **common, **extra)
        rows = harness.run_experiment(spec)
        _write(harness.emit(rows, args.format), args.out)

    elif args.cmd == "optimize":
        try:
            step = Fraction(args.step)
        except (ValueError, ZeroDivisionError):
            raise SpecError("step", f"not a number: {args.step!r}") from None
        objectives = tuple(args.objective or ("goodput",))
        spec = ExperimentSpec(mode="optimize", objectives=objectives, step=step, **common)
        rows = harness.run_experiment(spec)
        if args.table:
            text = "".join(
                f"# opt-{o}\n" + harness.delta_table(rows, len(default_catalog()), f"opt-{o}")
                for o in objectives
            )
            _write(text, args.out)
        else:
            _write(harness.emit(rows, args.format), args.out)
        if args.verify:
            _verify(spec, args, objectives)

    elif args.cmd == "quantize":
        objectives = tuple(args.objective or ("goodput",))
        bits = tuple(args.bits or (1, 2, 3, 4))
        spec = ExperimentSpec(mode="quantize-sweep", objectives=objectives, bits=bits, **common)
        if args.downlink:
            _write(json.dumps(harness.quantized_downlinks(spec), indent=2) + "\n", args.out)
        else:
            _write(harness.emit(harness.run_experiment(spec), args.format), args.out)

    elif args.cmd == "reproduce":
        overrides = dict(common)
        overrides["allow_repeats"] = args.allow_repeats
        if args.seeds:
            overrides["seeds"] = tuple(args.seeds)
        spec = harness.suite_spec(args.target, simulate=args.simulate, **overrides)
        rows = harness.run_experiment(spec)
        if args.target.startswith("table"):
            mode = spec.resolved_policies()[0]
            sys.stderr.write(harness.delta_table(rows, len(default_catalog()), mode))
        _write(harness.emit(rows, args.format), args.out)


def _verify(spec: ExperimentSpec, args, objectives) -> None:
    from .optimizer import verify_by_simulation

    cat = default_catalog()
    seeds = tuple(args.seeds or harness.DEFAULT_SEEDS)
    for l in spec.payload_grid:
        for M in spec.device_grid:
            cfg = spec.base_config().replace(devices=M, payload_bytes=l)
            for o in objectives:
                for item in verify_by_simulation(cfg, cat, o, spec.step, args.verify, seeds):
                    sys.stderr.write(
                        f"verify M={M} l={l} {o} delta={item['delta'].format()} "
                        f"analytic={item['analytic']:.6g} simulated={item['simulated']:.6g}\n"
                    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except SpecError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except (ValueError, TypeError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
