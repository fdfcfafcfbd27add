"""Batch front-end: INI-like run configs in, CSV artifacts out.

Config grammar: lines of ``key = value`` grouped under ``[run]``,
``[model]``, ``[scheme]`` and ``[study]`` sections; ``#`` starts a comment;
keys are lower_snake_case; booleans are ``true``/``false``; list-valued
keys take comma-separated entries and ``levels`` also accepts the range
form ``3..9``.  Unknown sections or keys are rejected.

Exit codes: 0 success, 1 configuration error, 2 blow-up during simulation.
"""

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from . import brownian, harness, models, scheme


class ConfigError(ValueError):
    pass


_COMMANDS = ("simulate", "study", "chaos", "moments", "audit")
_KINDS = {
    "tamed_euler": scheme.SchemeKind.TAMED_EULER,
    "tamed_milstein": scheme.SchemeKind.TAMED_MILSTEIN,
    "untamed_euler": scheme.SchemeKind.UNTAMED_EULER,
}
_MODEL_PARAM_KEYS = {
    "three_halves": {"lam", "mu_param", "xi", "x0"},
    "double_well": {"sigma", "x0"},
    "double_well_common": {"sigma", "x0"},
    "measure_coupled": {"c", "x0"},
}


@dataclass
class RunConfig:
    command: str
    model_id: str = "double_well"
    model_params: dict = field(default_factory=dict)
    kind: scheme.SchemeKind = scheme.SchemeKind.TAMED_EULER
    n: int = 256
    horizon: float = 1.0
    di_mode: object = field(default_factory=lambda: brownian.CLOSED_FORM)
    include_measure_corrections: bool = False
    levels: list = field(default_factory=lambda: list(range(3, 10)))
    particles: int = 1000
    p_values: list = field(default_factory=lambda: [2, 4, 6])
    outer: int = 1
    samples: int = 1000
    radius: float = 10.0
    particles_list: list = field(default_factory=lambda: [32, 128, 512])
    reference: int = 4096
    trend_seeds: int = 20
    seed: int = 42
    out: str = ""
    threads: int = 1


def _parse_int(key, value, minimum=None):
    try:
        parsed = int(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {value!r}") from None
    if minimum is not None and parsed < minimum:
        raise ConfigError(f"key {key!r}: must be >= {minimum}, got {parsed}")
    return parsed


def _parse_float(key, value, positive=False):
    try:
        parsed = float(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None
    if positive and parsed <= 0:
        raise ConfigError(f"key {key!r}: must be positive, got {parsed}")
    return parsed


def _parse_bool(key, value):
    if value == "true":
        return True
    if value == "false":
        return False
    raise ConfigError(f"key {key!r}: expected true or false, got {value!r}")


def _parse_int_list(key, value, minimum=None):
    return [_parse_int(key, part.strip(), minimum) for part in value.split(",")]


def _parse_levels(key, value):
    if ".." in value:
        lo_s, _, hi_s = value.partition("..")
        lo = _parse_int(key, lo_s.strip(), 1)
        hi = _parse_int(key, hi_s.strip(), 1)
        if hi < lo:
            raise ConfigError(f"key {key!r}: empty level range {value!r}")
        return list(range(lo, hi + 1))
    return _parse_int_list(key, value, minimum=1)


def _split_sections(text):
    sections = {"run": {}, "model": {}, "scheme": {}, "study": {}}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in sections:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            current = name
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key = key.strip()
        value = value.strip()
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}]")
        sections[current][key] = value
    return sections


def parse_config(text):
    """Parse and validate a run configuration; defaults fill absent keys."""
    sections = _split_sections(text)

    run_sec = sections["run"]
    if "command" not in run_sec:
        raise ConfigError("key 'command' is required in [run]")
    command = run_sec.pop("command")
    if command not in _COMMANDS:
        raise ConfigError(
            f"key 'command': unknown command {command!r} "
            f"(one of {', '.join(_COMMANDS)})"
        )
    config = RunConfig(command=command)
    for key, value in run_sec.items():
        if key == "seed":
            config.seed = _parse_int(key, value, 0)
            if config.seed >= 1 << 64:
                raise ConfigError("key 'seed': must fit in 64 bits")
        elif key == "out":
            config.out = value
        elif key == "threads":
            config.threads = _parse_int(key, value, 0)
        else:
            raise ConfigError(f"unknown key {key!r} in [run]")

    model_sec = dict(sections["model"])
    config.model_id = model_sec.pop("model", config.model_id)
    if config.model_id not in _MODEL_PARAM_KEYS:
        known = ", ".join(sorted(_MODEL_PARAM_KEYS))
        raise ConfigError(f"key 'model': unknown model {config.model_id!r} "
                          f"(one of {known})")
    allowed = _MODEL_PARAM_KEYS[config.model_id]
    for key, value in model_sec.items():
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} in [model] for model {config.model_id!r}"
            )
        if key == "xi":
            entries = [_parse_float(key, part.strip()) for part in value.split(",")]
            if len(entries) != 4:
                raise ConfigError("key 'xi': expected 4 comma-separated entries")
            config.model_params[key] = np.array(entries).reshape(2, 2)
        elif key == "x0" and config.model_id == "three_halves":
            entries = [_parse_float(key, part.strip()) for part in value.split(",")]
            if len(entries) != 2:
                raise ConfigError("key 'x0': expected 2 comma-separated entries")
            config.model_params[key] = entries
        else:
            config.model_params[key] = _parse_float(key, value)

    scheme_sec = sections["scheme"]
    substeps = 16
    di_mode_name = "closed_form"
    for key, value in scheme_sec.items():
        if key == "kind":
            if value not in _KINDS:
                raise ConfigError(f"key 'kind': unknown scheme {value!r}")
            config.kind = _KINDS[value]
        elif key == "n":
            config.n = _parse_int(key, value, 1)
        elif key == "t":
            config.horizon = _parse_float(key, value, positive=True)
        elif key == "di_mode":
            if value not in ("closed_form", "substep"):
                raise ConfigError(f"key 'di_mode': expected closed_form or substep")
            di_mode_name = value
        elif key == "substeps":
            substeps = _parse_int(key, value, 2)
        elif key == "include_measure_corrections":
            config.include_measure_corrections = _parse_bool(key, value)
        else:
            raise ConfigError(f"unknown key {key!r} in [scheme]")
    if di_mode_name == "substep":
        config.di_mode = brownian.SubstepApprox(substeps)

    study_sec = sections["study"]
    for key, value in study_sec.items():
        if key == "levels":
            config.levels = _parse_levels(key, value)
        elif key == "particles":
            config.particles = _parse_int(key, value, 1)
        elif key == "p_values":
            config.p_values = _parse_int_list(key, value, 2)
            if any(p % 2 for p in config.p_values):
                raise ConfigError("key 'p_values': entries must be even")
        elif key == "outer":
            config.outer = _parse_int(key, value, 1)
        elif key == "samples":
            config.samples = _parse_int(key, value, 1)
        elif key == "radius":
            config.radius = _parse_float(key, value, positive=True)
        elif key == "particles_list":
            config.particles_list = _parse_int_list(key, value, 1)
        elif key == "reference":
            config.reference = _parse_int(key, value, 1)
        elif key == "trend_seeds":
            config.trend_seeds = _parse_int(key, value, 1)
        else:
            raise ConfigError(f"unknown key {key!r} in [study]")
    return config


def _write_csv(path, rows):
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(rows) + "\n")


def _build_model(config):
    return models.make_builtin(config.model_id, **config.model_params)


def run(config):
    """Execute one parsed configuration; returns the process exit code."""
    model = _build_model(config)
    out = config.out or f"{config.command}.csv"

    if config.command == "study":
        try:
            report = harness.convergence_study(
                model, config.kind, config.levels, config.particles,
                config.p_values, config.outer, config.seed,
                horizon=config.horizon, di_mode=config.di_mode,
                include_measure_corrections=config.include_measure_corrections,
                workers=config.threads,
            )
        except scheme.BlowUpError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        _write_csv(out, report.csv_rows())
        for line in report.slope_summary():
            print(line)
        return 0

    if config.command == "moments":
        report = harness.moment_trace(model, config.kind, config.particles,
                                      config.n, config.p_values, config.seed,
                                      horizon=config.horizon)
        _write_csv(out, report.csv_rows())
        if report.blow_up is not None:
            step, particle = report.blow_up
            print(f"blow-up at step {step}, particle {particle}", file=sys.stderr)
            return 2
        return 0

    if config.command == "chaos":
        try:
            trend = harness.chaos_trend(
                model, config.kind, config.particles_list, config.n,
                config.reference, config.seed, num_seeds=config.trend_seeds,
                horizon=config.horizon,
            )
        except scheme.BlowUpError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        rows = ["N,w2"] + [f"{count},{w2:.17g}" for count, w2 in trend]
        _write_csv(out, rows)
        return 0

    if config.command == "simulate":
        bundle = brownian.generate(config.seed, config.particles, model.m,
                                   model.m0, config.n, config.horizon)
        cfg = scheme.SchemeConfig(
            kind=config.kind, n=config.n, T=config.horizon,
            di_mode=config.di_mode,
            include_measure_corrections=config.include_measure_corrections,
        )
        try:
            final = scheme.simulate(model, cfg, bundle)
        except scheme.BlowUpError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        rows = ["particle,component,value"]
        for i in range(final.num_particles):
            for j in range(final.dim):
                rows.append(f"{i},{j},{final.states[i, j]:.17g}")
        _write_csv(out, rows)
        return 0

    if config.command == "audit":
        report = models.audit_assumptions(model, config.samples, config.radius,
                                          seed=config.seed)
        rows = ["assumption,max_ratio,flagged"]
        for name in sorted(report.max_ratios):
            rows.append(f"{name},{report.max_ratios[name]:.17g},"
                        f"{'true' if report.flagged[name] else 'false'}")
        _write_csv(out, rows)
        return 0

    raise ConfigError(f"unknown command {config.command!r}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mvsde",
        description="Simulate mean-field particle systems and measure "
                    "strong convergence rates.",
    )
    parser.add_argument("--config", required=True, help="path to a run config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed (unsigned 64-bit)")
    parser.add_argument("--out", default=None, help="override the output path")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for outer realisations (0 = auto)")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as handle:
            text = handle.read()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text)
        if args.seed is not None:
            if not 0 <= args.seed < 1 << 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            config.seed = args.seed
        if args.out is not None:
            config.out = args.out
        if args.threads is not None:
            if args.threads < 0:
                raise ConfigError("--threads must be >= 0")
            config.threads = args.threads
        return run(config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
