import json
import logging
import math
import os
import sys
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import IO, Any, Callable, Dict, Iterator, List, Optional, Sequence

import click
from click_shell import shell
from prettytable import PrettyTable

from moqa import exceptions
from moqa.config import Settings, load_config, normalize_key, settings_from_config
from moqa.ensemble import (
    EnsembleConfig,
    bin_by_ratio,
    sample_problem,
    split_seed,
    sweep_sizes,
    write_bins_csv,
    write_rows_csv,
)
from moqa.poly import to_ising
from moqa.problem import (
    NORMALIZATIONS,
    SHIFT_MODES,
    Instance,
    MultiObjective,
    build_hp,
    objective_values,
)
from moqa.spectra import (
    landscape_rows,
    recommended_p,
    save_spectrum_binary,
    spectrum_from_values,
    verify_theorem,
    write_landscape_csv,
)
from moqa.utils import format_float
from moqa.version import version as __version__

click.disable_unicode_literals_warning = True
log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CAP = 2
EXIT_NUMERIC = 3

DEFAULT_BINS = [round(0.025 * k, 6) for k in range(21)] + [math.inf]
# used by `bin` when neither --p nor a --p-min/--p-max range is given
DEFAULT_BIN_P = [3, 5, 8]

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "gen": {"n": 6, "gamma": 120.0, "seed": 0, "index": None, "eta": 1.0, "out": None},
    "transform": {"instance": None, "eta": None, "shift_mode": "exact", "out": None},
    "build": {
        "instance": None,
        "p": None,
        "eta": None,
        "norm": "sum",
        "ising": False,
        "format": "json",
        "out": None,
    },
    "spectrum": {
        "instance": None,
        "p": None,
        "p_min": 1,
        "p_max": 8,
        "eta": None,
        "norm": "sum",
        "format": "csv",
        "out": None,
    },
    "verify": {"instance": None, "p": None, "eta": None, "symbolic": False, "format": "json", "out": None},
    "sweep": {
        "n": [6],
        "workers": None,
        "gamma": 120.0,
        "instances": 1000,
        "p": None,
        "p_min": 1,
        "p_max": 8,
        "seed": 0,
        "eta": 1.0,
        "norm": "sum",
        "format": "csv",
        "out": None,
    },
    "bin": {
        "n": 12,
        "workers": None,
        "gamma": 6.0,
        "instances": 2000,
        "p": None,
        "p_min": None,
        "p_max": None,
        "seed": 0,
        "eta": 1.0,
        "norm": "sum",
        "bins": DEFAULT_BINS,
        "format": "csv",
        "out": None,
    },
}


def exit_code_for(exc: BaseException) -> int:
    """Map library errors to the documented exit codes"""
    if isinstance(exc, exceptions.InstanceError):
        return exit_code_for(exc.cause)
    if isinstance(exc, (exceptions.EnumerationCapExceeded, exceptions.SymbolicBudgetExceeded)):
        return EXIT_CAP
    if isinstance(
        exc,
        (exceptions.UndefinedGapRatio, exceptions.DegenerateDenominator, exceptions.NonFiniteValue),
    ):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def report_error(exc: BaseException) -> int:
    code = exit_code_for(exc)
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    click.echo(json.dumps(payload), err=True)
    return code


@contextmanager
def open_output(out: Optional[str]) -> Iterator[IO[str]]:
    if out is None or out == "-":
        yield sys.stdout
    else:
        with open(out, "w", newline="") as f:
            yield f


def write_manifest(cmd: str, config: Dict[str, Any]) -> Optional[str]:
    """Write ``<out>.manifest.json`` next to a file output"""
    out = config.get("out")
    if out is None or out == "-":
        return None
    manifest = {
        "cmd": cmd,
        "config": config,
        "version": __version__,
        "seed": config.get("seed"),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = "%s.manifest.json" % out
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    log.info("wrote manifest %s", path)
    return path


def resolve_config(cmd: str, file_config: Dict[str, Any], flags: Dict[str, Any]) -> Dict[str, Any]:
    """Command defaults, overridden by the config file, overridden by explicit flags"""
    config = dict(DEFAULTS[cmd])
    for key, value in file_config.items():
        if key in config:
            config[key] = value
    for key, value in flags.items():
        if value is None or value == ():
            continue
        config[normalize_key(key)] = list(value) if isinstance(value, tuple) else value
    return config


def parse_bins(value: Any) -> List[float]:
    if isinstance(value, str):
        try:
            return [float(v) for v in value.split(",") if v.strip()]
        except ValueError as exc:
            raise exceptions.ConfigurationError("bins must be comma separated numbers") from exc
    return [float(v) for v in value]


def p_list(config: Dict[str, Any]) -> List[int]:
    if config.get("p"):
        values = config["p"]
        return [int(v) for v in (values if isinstance(values, list) else [values])]
    if config.get("p_min") is None or config.get("p_max") is None:
        raise exceptions.ConfigurationError("give --p or both --p-min and --p-max")
    return list(range(int(config["p_min"]), int(config["p_max"]) + 1))


def load_objectives(
    path: Optional[str], eta: Optional[float], settings: Settings, shift_mode: str = "exact"
) -> MultiObjective:
    """Read an instance JSON (transformed and shifted here) or a multi-objective JSON"""
    if path is None:
        raise exceptions.ConfigurationError("an instance file is required")
    try:
        with open(path, "r") as f:
            payload = json.load(f)
    except (IOError, json.JSONDecodeError) as exc:
        raise exceptions.ConfigurationError("Unable to read %s: %s" % (path, exc)) from exc
    try:
        if "objectives" in payload:
            return MultiObjective.from_json(payload, settings)
        return Instance.from_json(payload, settings).to_objectives(shift_mode, eta, settings)
    except (KeyError, TypeError) as exc:
        raise exceptions.ConfigurationError("malformed file %s: %s" % (path, exc)) from exc


def dump_json(payload: Any, stream: IO[str]) -> None:
    json.dump(payload, stream, indent=2)
    stream.write("\n")


def ensemble_config(config: Dict[str, Any], n: int, bins: Optional[List[float]] = None) -> EnsembleConfig:
    return EnsembleConfig(
        n=int(n),
        gamma=float(config["gamma"]),
        num_instances=int(config["instances"]),
        p_values=tuple(p_list(config)),
        master_seed=int(config["seed"]),
        shift_eta=float(config["eta"]),
        normalization=config["norm"],
        bins=tuple(bins) if bins is not None else None,
    )


def workers_from(config: Dict[str, Any]) -> int:
    workers = config.get("workers")
    if workers is None:
        return os.cpu_count() or 1
    return max(1, int(workers))


def run_gen(config: Dict[str, Any], settings: Settings) -> None:
    seed = int(config["seed"])
    stream_seed = split_seed(seed, int(config["index"])) if config.get("index") is not None else seed
    instance = sample_problem(
        int(config["n"]), float(config["gamma"]), stream_seed, float(config["eta"]), settings
    )
    with open_output(config["out"]) as f:
        dump_json(instance.to_json(), f)


def run_transform(config: Dict[str, Any], settings: Settings) -> None:
    mo = load_objectives(config["instance"], config["eta"], settings, config["shift_mode"])
    log.info("transformed into M=%d objectives, shift %r", mo.M, mo.shift)
    with open_output(config["out"]) as f:
        dump_json(mo.to_json(), f)


def run_build(config: Dict[str, Any], settings: Settings) -> None:
    if config.get("p") is None:
        raise exceptions.ConfigurationError("build needs --p")
    p = p_list(config)[0]
    mo = load_objectives(config["instance"], config["eta"], settings)
    hp = build_hp(mo, p, config["norm"], symbolic=True, settings=settings).symbolic_or_raise()
    poly = to_ising(hp, settings) if config["ising"] else hp
    log.info("h_(p) at p=%d: degree %d, %d terms", p, poly.degree(), poly.term_count())
    with open_output(config["out"]) as f:
        if config["format"] == "table":
            t = PrettyTable(["vars", "coef"])
            t.align = "l"
            for vars_, coef in poly.decompose():
                t.add_row([" ".join(str(i) for i in vars_) or "const", format_float(coef)])
            f.write(t.get_string() + "\n")
        else:
            dump_json(poly.to_json(), f)


def run_spectrum(config: Dict[str, Any], settings: Settings) -> None:
    mo = load_objectives(config["instance"], config["eta"], settings)
    if config["format"] == "npy":
        if config["out"] in (None, "-"):
            raise exceptions.ConfigurationError("--format npy needs --out")
        spectrum = spectrum_from_values(objective_values(mo, settings).max(axis=0), mo.n, settings)
        save_spectrum_binary(spectrum, config["out"])
        return
    rows = landscape_rows(mo, p_list(config), config["norm"], settings)
    with open_output(config["out"]) as f:
        if config["format"] == "json":
            dump_json(rows, f)
        elif config["format"] == "table":
            t = PrettyTable(list(rows[0].keys()))
            t.align = "l"
            for row in rows:
                t.add_row([format_float(v) if isinstance(v, float) else v for v in row.values()])
            f.write(t.get_string() + "\n")
        else:
            write_landscape_csv(rows, f)


def run_verify(config: Dict[str, Any], settings: Settings) -> None:
    mo = load_objectives(config["instance"], config["eta"], settings)
    p = p_list(config)[0] if config.get("p") else recommended_p(mo, settings)
    report = verify_theorem(mo, p, symbolic=bool(config["symbolic"]), settings=settings)
    for problem in report.violations():
        log.error("guarantee failed: %s", problem)
    with open_output(config["out"]) as f:
        if config["format"] == "table":
            t = PrettyTable(["Key", "Value"])
            t.align = "l"
            for key, value in report.to_json().items():
                t.add_row([key, value])
            f.write(t.get_string() + "\n")
        else:
            dump_json(report.to_json(), f)


def run_sweep(config: Dict[str, Any], settings: Settings) -> None:
    sizes = config["n"] if isinstance(config["n"], list) else [config["n"]]
    base = ensemble_config(config, sizes[0])
    rows = sweep_sizes(base, [int(n) for n in sizes], workers_from(config), settings)
    with open_output(config["out"]) as f:
        if config["format"] == "json":
            dump_json([row.__dict__ for row in rows], f)
        elif config["format"] == "table":
            t = PrettyTable(["n", "p", "epsilon", "delta", "violation_rate", "mean_r", "count"])
            t.align = "l"
            for row in rows:
                t.add_row(row.as_csv())
            f.write(t.get_string() + "\n")
        else:
            write_rows_csv(rows, f)


def run_bin(config: Dict[str, Any], settings: Settings) -> None:
    if not config.get("p") and config.get("p_min") is None and config.get("p_max") is None:
        config = {**config, "p": DEFAULT_BIN_P}
    n = config["n"][0] if isinstance(config["n"], list) else config["n"]
    ens = ensemble_config(config, n, parse_bins(config["bins"]))
    rows = bin_by_ratio(ens, workers_from(config), settings)
    with open_output(config["out"]) as f:
        if config["format"] == "json":
            dump_json([row.__dict__ for row in rows], f)
        elif config["format"] == "table":
            t = PrettyTable(["bin_lo", "bin_hi", "p", "epsilon", "count", "r_star"])
            t.align = "l"
            for row in rows:
                t.add_row(row.as_csv())
            f.write(t.get_string() + "\n")
        else:
            write_bins_csv(rows, f)


RUNNERS: Dict[str, Callable[[Dict[str, Any], Settings], None]] = {
    "gen": run_gen,
    "transform": run_transform,
    "build": run_build,
    "spectrum": run_spectrum,
    "verify": run_verify,
    "sweep": run_sweep,
    "bin": run_bin,
}


def execute(cmd: str, config: Dict[str, Any], settings: Settings) -> None:
    """Run one subcommand from its resolved config and write its manifest"""
    log.debug("%s: %s", cmd, config)
    RUNNERS[cmd](config, settings)
    write_manifest(cmd, {**config, "settings": settings.as_dict()})


def _invoke(ctx: click.Context, cmd: str, flags: Dict[str, Any]) -> None:
    obj = ctx.ensure_object(dict)
    file_config = obj.get("config", {})
    config = resolve_config(cmd, file_config, flags)
    settings = settings_from_config({**file_config, "eta": config.get("eta")})
    execute(cmd, config, settings)


def _instance_argument(f: Callable) -> Callable:
    return click.argument("instance", type=click.Path(exists=True, dir_okay=False), required=False)(f)


def _p_option(f: Callable) -> Callable:
    return click.option("--p", "p", type=int, multiple=True, help="Approximation level (repeatable)")(f)


def _eta_option(f: Callable) -> Callable:
    return click.option("--eta", type=float, help="Margin of the joint nonnegativity shift")(f)


def _out_option(f: Callable) -> Callable:
    return click.option("--out", type=click.Path(dir_okay=False), help="Output file (default stdout)")(f)


def _ensemble_options(f: Callable) -> Callable:
    for option in reversed(
        [
            click.option("--gamma", type=float, help="Regularization strength"),
            click.option("--instances", type=int, help="Number of random instances"),
            click.option("--p-min", type=int, help="Smallest p of the range"),
            click.option("--p-max", type=int, help="Largest p of the range"),
            click.option("--seed", type=int, help="Master seed"),
            click.option("--norm", type=click.Choice(NORMALIZATIONS), help="h_(p) normalization"),
            click.option("--workers", type=int, help="Worker processes (default: all cores)"),
        ]
    ):
        f = option(f)
    return f


@shell(
    prompt="moqa> ",
    intro="Starting moqa... (use help to list all commands)",
)
@click.option("--verbose", "-v", default=2, help="Verbosity")
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False),
    help="JSON config file; flags override its values",
)
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx, verbose, config_file):
    """Multi-objective approximations of constrained binary optimization problems"""
    # Logging
    pkg_log = logging.getLogger("moqa")
    verbosity = ["critical", "error", "warn", "info", "debug"][int(min(max(verbose, 0), 4))]
    pkg_log.setLevel(getattr(logging, verbosity.upper()))
    if not pkg_log.handlers:
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        ch = logging.StreamHandler()
        ch.setFormatter(formatter)
        pkg_log.addHandler(ch)
    for handler in pkg_log.handlers:
        handler.setLevel(getattr(logging, verbosity.upper()))
    obj = ctx.ensure_object(dict)
    obj["config"] = load_config(config_file) if config_file else {}


@cli.command()
@click.option("--n", type=int, help="Number of binary variables")
@click.option("--gamma", type=float, help="Regularization strength")
@click.option("--seed", type=int, help="Seed")
@click.option("--index", type=int, help="Draw instance INDEX of a sweep run with master seed --seed")
@_eta_option
@_out_option
@click.pass_context
def gen(ctx, **flags):
    """Sample a random QUBO with one linear inequality (instance JSON)"""
    _invoke(ctx, "gen", flags)


@cli.command()
@_instance_argument
@_eta_option
@click.option("--shift-mode", type=click.Choice(SHIFT_MODES), help="exact enumeration or coefficient bound")
@_out_option
@click.pass_context
def transform(ctx, **flags):
    """Apply the equality/inequality transforms and the joint shift"""
    _invoke(ctx, "transform", flags)


@cli.command()
@_instance_argument
@_p_option
@_eta_option
@click.option("--norm", type=click.Choice(NORMALIZATIONS), help="h_(p) normalization")
@click.option("--ising", is_flag=True, default=None, help="Emit the Ising (Pauli-Z) term list")
@click.option("--format", "format", type=click.Choice(["json", "table"]), help="Output format")
@_out_option
@click.pass_context
def build(ctx, **flags):
    """Expand h_(p) symbolically (fails with exit 2 over the term budget)"""
    _invoke(ctx, "build", flags)


@cli.command()
@_instance_argument
@_p_option
@click.option("--p-min", type=int, help="Smallest p of the range")
@click.option("--p-max", type=int, help="Largest p of the range")
@_eta_option
@click.option("--norm", type=click.Choice(NORMALIZATIONS), help="h_(p) normalization")
@click.option("--format", "format", type=click.Choice(["csv", "json", "table", "npy"]), help="Output format")
@_out_option
@click.pass_context
def spectrum(ctx, **flags):
    """Landscape of h_max and the p-th roots of h_(p) over all assignments"""
    _invoke(ctx, "spectrum", flags)


@cli.command()
@_instance_argument
@_p_option
@_eta_option
@click.option("--symbolic", is_flag=True, default=None, help="Evaluate h_(p) from its expansion")
@click.option("--format", "format", type=click.Choice(["json", "table"]), help="Output format")
@_out_option
@click.pass_context
def verify(ctx, **flags):
    """Check the sandwich bounds and ground-space recovery on one instance

    Without --p the smallest level with guaranteed gap growth is used.
    """
    _invoke(ctx, "verify", flags)


@cli.command()
@click.option("--n", "n", type=int, multiple=True, help="Problem size (repeatable)")
@_ensemble_options
@_p_option
@_eta_option
@click.option("--format", "format", type=click.Choice(["csv", "json", "table"]), help="Output format")
@_out_option
@click.pass_context
def sweep(ctx, **flags):
    """eps / delta / violation rate over a random ensemble, per p"""
    _invoke(ctx, "sweep", flags)


@cli.command(name="bin")
@click.option("--n", "n", type=int, help="Problem size")
@_ensemble_options
@_p_option
@_eta_option
@click.option("--bins", type=str, help="Comma separated gap-ratio bin edges")
@click.option("--format", "format", type=click.Choice(["csv", "json", "table"]), help="Output format")
@_out_option
@click.pass_context
def bin_(ctx, **flags):
    """eps per spectral-gap-ratio bin and p, with the threshold r*(p)"""
    _invoke(ctx, "bin", flags)


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write here instead of the recorded output")
def replay(manifest, out):
    """Re-run the command recorded in a manifest"""
    with open(manifest, "r") as f:
        recorded = json.load(f)
    cmd = recorded.get("cmd")
    if cmd not in RUNNERS:
        raise exceptions.ConfigurationError("manifest records unknown command %r" % cmd)
    if recorded.get("version") != __version__:
        log.warning("manifest was written by moqa %s, this is %s", recorded.get("version"), __version__)
    config = dict(recorded["config"])
    settings = settings_from_config(config.pop("settings", None) or config)
    if out is not None:
        config["out"] = out
    execute(cmd, config, settings)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the process exit code instead of exiting"""
    args = list(argv) if argv is not None else sys.argv[1:]
    try:
        cli.main(args=args, prog_name="moqa", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        return report_error(exc)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


__all__ = ["cli", "run", "main", "exit_code_for"]
