import argparse
import logging
import os
import sys

import config
from core.batch_runner import batch, repeat_seeds
from core.exceptions import ConfigError, SteeringSimError
from core.kinematic_controller import PROP, PROP_S
from core.metrics import METRIC_NAMES, aggregate_traces, report, summarize_run
from core.path_geometry import build_path
from core.scenario import CONTROLLERS, default_scenario, load_scenario
from core.simulation import run
from core.studies import FIGURES, SCENARIO_FIGURES
from utils.drawing import bar_chart, figure_chart, trace_chart
from utils.io import RunManifest, sha256_file, write_json, write_table_csv, write_text_csv, write_trace_csv

logger = logging.getLogger(__name__)


def _apply_overrides(scenario, args):
    if getattr(args, "preset", None):
        scenario = scenario.with_weather(args.preset)
    if getattr(args, "seed", None) is not None:
        scenario = scenario.with_overrides(seed=args.seed)
    return scenario


def cmd_simulate(args) -> int:
    """One run: trace CSV, summary JSON, reference polyline and a lateral-error chart."""
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    if args.controller:
        scenario = scenario.with_overrides(controller=args.controller[0])
    manifest = RunManifest("simulate", [args.scenario], args.out,
                           {"controller": scenario.controller, "preset": scenario.weather}, [scenario.seed])
    digest = manifest.digest()

    trace = run(scenario)
    trace_path = write_trace_csv(trace, os.path.join(args.out, "trace.csv"), digest)
    write_table_csv(os.path.join(args.out, "reference.csv"), ("s", "x", "y", "theta", "kappa"),
                    build_path(scenario.segments).polyline(), digest)
    summary = {
        "manifest": vars(manifest),
        "meta": trace.meta,
        "trace_sha256": sha256_file(trace_path),
        "summary": summarize_run(trace, smooth=args.smooth),
    }
    write_json(os.path.join(args.out, "summary.json"), summary, digest)
    trace_chart(trace, os.path.join(args.out, "lateral_error.svg"))
    print(f"✅ Run complete: final y_e = {trace.final('y_e'):+.4f} m, outputs in {args.out}")
    return 0


def cmd_compare(args) -> int:
    """Batches per controller and weather preset, joined into a per-segment comparison."""
    controllers = args.controller or ["B", PROP, PROP_S]
    if len(controllers) < 2:
        logger.warning("[Compare] Only one controller listed, the table has no comparison columns")
    presets = args.preset_list or ["clear"]
    base = load_scenario(args.scenario)
    if args.seed is not None:
        base = base.with_overrides(seed=args.seed)
    manifest = RunManifest("compare", [args.scenario], args.out,
                           {"controllers": controllers, "presets": presets, "smooth": args.smooth},
                           list(range(base.seed, base.seed + args.seeds)))
    digest = manifest.digest()

    tables = {}
    failures = {}
    for preset in presets:
        for ctl in controllers:
            label = ctl if len(presets) == 1 else f"{ctl}/{preset}"
            scenario = base.with_weather(preset).with_overrides(controller=ctl, name=f"{base.name}-{ctl}-{preset}")
            result = batch(repeat_seeds(scenario, args.seeds), args.workers)
            failures[label] = [vars(f) for f in result.failures]
            traces = [tr for tr in result.traces if tr is not None]
            if not traces:
                logger.error(f"[Compare] 🔴 ERROR: every run of {label} failed, column dropped")
                continue
            tables[label] = aggregate_traces(traces, smooth=args.smooth)
    if not tables:
        raise SteeringSimError("no configuration produced a successful run")

    comparison = report(tables)
    write_text_csv(os.path.join(args.out, "comparison.csv"), comparison.csv_rows(), digest)
    text = comparison.to_text()
    with open(os.path.join(args.out, "comparison.txt"), "w", encoding="utf-8") as f:
        f.write(text + "\n")
    print(text)

    segments = list(next(iter(tables.values())))
    for name in METRIC_NAMES:
        groups = {label: [getattr(table[s], name)[0] for s in segments] for label, table in tables.items()}
        errors = {label: [getattr(table[s], name)[1] for s in segments] for label, table in tables.items()}
        bar_chart(os.path.join(args.out, f"{name}.svg"), segments, groups, name, name, errors)
    bar_chart(os.path.join(args.out, "pct_converged.svg"), segments,
              {label: [table[s].pct_converged for s in segments] for label, table in tables.items()}, "%C", "%")
    write_json(os.path.join(args.out, "summary.json"), {
        "manifest": vars(manifest),
        "columns": comparison.columns,
        "rows": comparison.rows,
        "failures": failures,
    }, digest)
    return 0


def cmd_figures(args) -> int:
    names = list(FIGURES) if "all" in args.figure else args.figure
    manifest = RunManifest("figures", [args.scenario] if args.scenario else [], args.out, {"figures": names})
    digest = manifest.digest()
    for name in names:
        if name in SCENARIO_FIGURES:
            scenario = load_scenario(args.scenario) if args.scenario else default_scenario(duration=10.0)
            data = FIGURES[name](_apply_overrides(scenario, args))
        elif name == "constant_c":
            data = FIGURES[name](workers=args.workers)
        else:
            data = FIGURES[name]()
        write_table_csv(os.path.join(args.out, f"{name}.csv"), data.columns, data.rows, digest)
        write_json(os.path.join(args.out, f"{name}.json"), {"figure": name, "meta": data.meta}, digest)
        figure_chart(data, os.path.join(args.out, f"{name}.svg"))
        print(f"✅ {name}: {data.rows.shape[0]} rows")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Lateral steering control simulation toolkit")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--controller", nargs=1, choices=CONTROLLERS)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--preset", choices=list(config.WEATHER_PRESETS))
    sim.add_argument("--smooth", action="store_true", help="Savitzky-Golay smoothing of lateral acceleration")
    sim.set_defaults(handler=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="batch comparison of controllers")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--controller", nargs="+", choices=CONTROLLERS)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--seeds", type=int, default=config.BATCH_SEEDS)
    cmp_.add_argument("--preset", dest="preset_list", nargs="+", choices=list(config.WEATHER_PRESETS))
    cmp_.add_argument("--workers", type=int, default=config.BATCH_WORKERS)
    cmp_.add_argument("--smooth", action="store_true")
    cmp_.set_defaults(handler=cmd_compare)

    fig = sub.add_parser("figures", help="regenerate analysis figure data")
    fig.add_argument("--figure", nargs="+", required=True, choices=list(FIGURES) + ["all"])
    fig.add_argument("--out", required=True)
    fig.add_argument("--scenario")
    fig.add_argument("--seed", type=int)
    fig.add_argument("--preset", choices=list(config.WEATHER_PRESETS))
    fig.add_argument("--workers", type=int, default=config.BATCH_WORKERS)
    fig.set_defaults(handler=cmd_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    os.makedirs(args.out, exist_ok=True)
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"🔴 Configuration error: {e}", file=sys.stderr)
        return 2
    except SteeringSimError as e:
        print(f"🔴 Run aborted: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
