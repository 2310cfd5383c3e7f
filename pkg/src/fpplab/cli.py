"""Batch experiment runner: ``fpplab COMMAND --spec FILE [--seed N] [--threads N] [--out DIR] [--exact]``."""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexWindow
from .lattice import InvalidInput, LatticeBox, dump_configuration, parse_law, sample_configuration
from .ldest import (RATE_CSV_COLUMNS, TIME_CONSTANT_COLUMNS, BudgetExceeded, CrossingEvent, LDEvent,
                    elementary_rate_sequence, estimate_probability, exact_probability, subadditive_assembly_check,
                    time_constant)
from .metric import GradientField, MetricInvariantError, seminorm_from_text, set_audit
from .passage import continuous_geodesic, crossing_times, geodesic_csv, growing_ball, ball_box, points_csv
from .rates import bound_model, crossing_rate, excess_model, integral_rate, point_point_curve, rate_curve_csv

EXIT_OK, EXIT_SPEC, EXIT_BUDGET, EXIT_INVARIANT = 0, 2, 3, 4


class SpecError(Exception):
    def __init__(self, message, line=None, key=None):
        where = f"line {line}: " if line else ""
        where += f"[{key}] " if key else ""
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _tilt(text):
    return "auto" if text.strip() == "auto" else float(text)


def _model(text):
    parts = text.split()
    if parts[0] == "bound" and len(parts) == 1:
        return ("bound",)
    if parts[0] == "excess" and len(parts) == 2:
        return ("excess", float(parts[1]))
    raise ValueError("model must be 'bound' or 'excess M'")


COMMON = {"law": (parse_law, None), "seed": (int, "0")}

SCHEMAS = {
    "simulate": {"d": (int, None), "n": (int, None), "stream": (int, "0")},
    "geodesic": {"d": (int, None), "n": (int, None), "x": (_floats, None), "y": (_floats, None), "stream": (int, "0")},
    "crossing": {"d": (int, None), "n": (int, None), "replicas": (int, "1")},
    "ball": {"d": (int, None), "n": (int, None), "mesh": (float, None), "stream": (int, "0")},
    "rate-estimate": {"event": (str, None), "d": (int, None), "n": (int, None), "g": (seminorm_from_text, "l1 1 2"),
                      "eps": (float, "0.1"), "flavor": (str, "lower"), "k": (int, "0"),
                      "thresholds": (str, ""), "trials": (int, "1000"), "tilt": (float, "0"),
                      "exact": (_bool, "false")},
    "elementary-rate": {"g": (seminorm_from_text, None), "eps": (float, None), "n_list": (_ints, None),
                        "trials": (int, "1000"), "tilt": (_tilt, "auto"), "flavor": (str, "lower"),
                        "exact": (_bool, "false")},
    "assembly-check": {"g": (seminorm_from_text, None), "eps": (float, None), "delta": (float, None),
                       "n": (int, None), "k": (int, None), "trials": (int, "10"), "tilt": (_tilt, "auto"),
                       "rate_trials": (int, "0")},
    "functional": {"model": (_model, "bound"), "d": (int, None), "field": (str, ""), "zetas": (str, ""),
                   "k": (int, "8")},
    "point-point": {"model": (_model, "bound"), "x": (_floats, None), "zetas": (_floats, None),
                    "k": (int, "4"), "per_tile": (int, "4"), "levels": (int, "5"), "budget": (int, "400")},
    "time-constant": {"x": (_floats, None), "n_list": (_ints, None), "replicas": (int, "10")},
}


@dataclass
class ExperimentSpec:
    command: str
    params: dict
    raw: bytes
    path: str
    base_dir: str = "."
    extra: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.params["seed"]

    def digest(self):
        return hashlib.sha256(self.raw).hexdigest()


def _line_of(text, section, key):
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and "=" in s and s.split("=", 1)[0].strip() == key:
            return no
    return None


def load_spec(path: str, command: str) -> ExperimentSpec:
    """Parse and validate a spec file; every field is checked before anything runs."""
    if command not in SCHEMAS:
        raise SpecError(f"unknown command {command!r}")
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise SpecError(f"cannot read spec file: {exc}") from exc
    text = raw.decode("utf-8")
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise SpecError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc
    sections = cp.sections()
    extra = [s for s in sections if s != command]
    if extra:
        raise SpecError(f"unknown section [{extra[0]}]; expected [{command}]", _line_of_section(text, extra[0]))
    if command not in sections:
        raise SpecError(f"missing section [{command}]")
    schema = {**COMMON, **SCHEMAS[command]}
    params = {}
    for key in cp[command]:
        if key not in schema:
            raise SpecError(f"unknown key {key!r}", _line_of(text, command, key), key)
    for key, (conv, default) in schema.items():
        if key in cp[command]:
            value_text = cp[command][key]
        elif default is not None:
            value_text = default
        else:
            raise SpecError(f"missing required key {key!r}", None, key)
        try:
            params[key] = conv(value_text)
        except (ValueError, InvalidInput, IndexError) as exc:
            raise SpecError(f"invalid value {value_text!r}: {exc}", _line_of(text, command, key), key) from exc
    _validate(command, params, text)
    return ExperimentSpec(command, params, raw, path, os.path.dirname(os.path.abspath(path)))


def _line_of_section(text, section):
    for no, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return no
    return None


def _validate(command, p, text):
    def need(cond, key, msg):
        if not cond:
            raise SpecError(msg, _line_of(text, command, key), key)

    if "d" in p:
        need(1 <= p["d"] <= 3, "d", "d must be 1, 2 or 3")
    for key in ("n", "trials", "replicas"):
        if key in p:
            need(p[key] >= 1, key, f"{key} must be positive")
    if "k" in p:
        need(p["k"] >= (0 if command == "rate-estimate" else 1), "k", "k must be positive")
    if "eps" in p:
        need(p["eps"] > 0, "eps", "eps must be positive")
    if "n_list" in p:
        need(len(p["n_list"]) > 0 and all(n >= 1 for n in p["n_list"]), "n_list", "n_list must hold positive integers")
    if command in ("geodesic",):
        need(len(p["x"]) == p["d"] and len(p["y"]) == p["d"], "x", "points must have d coordinates")
    if command == "rate-estimate":
        need(p["event"] in ("crossing", "ld"), "event", "event must be 'crossing' or 'ld'")
        need(p["flavor"] in ("lower", "two-sided"), "flavor", "flavor must be 'lower' or 'two-sided'")
    if command == "elementary-rate":
        need(p["flavor"] in ("lower", "two-sided"), "flavor", "flavor must be 'lower' or 'two-sided'")
    if command == "assembly-check":
        need(0 < p["delta"] <= 1, "delta", "delta must lie in (0, 1]")
    if command == "functional":
        need(bool(p["field"]) != bool(p["zetas"]), "field", "give exactly one of 'field' and 'zetas'")
    if command == "ball":
        need(p["mesh"] > 0, "mesh", "mesh must be positive")


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _csv(columns, rows, note):
    lines = [f"# schema: {','.join(columns)} ; {note}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _model_of(p, d):
    law = p["law"]
    if p["model"][0] == "bound":
        return bound_model(law, d)
    return excess_model(p["model"][1], law.a, law.b, d)


def run_simulate(p, opts):
    box = LatticeBox.cube(p["n"], p["d"])
    cfg = sample_configuration(box, p["law"], p["seed"], p["stream"])
    base, axis, _, _ = box.edges()
    rows = [list(map(int, b)) + [int(a), float(w)] for b, a, w in zip(base, axis, cfg.weights)]
    cols = [f"x{i + 1}" for i in range(p["d"])] + ["axis", "weight"]
    return {"configuration.csv": _csv(cols, rows, "lower edge endpoint (lattice units), axis index, weight (time units)"),
            "configuration.txt": dump_configuration(cfg)}


def run_geodesic(p, opts):
    box = LatticeBox.cube(p["n"], p["d"])
    cfg = sample_configuration(box, p["law"], p["seed"], p["stream"])
    path = continuous_geodesic(cfg, p["x"], p["y"])
    return {"geodesic.csv": geodesic_csv(path)}


def run_crossing(p, opts):
    box = LatticeBox.cube(p["n"], p["d"])
    rows = []
    for r in range(p["replicas"]):
        cfg = sample_configuration(box, p["law"], p["seed"], r)
        rows.append([r] + list(crossing_times(cfg, p["n"]).times))
    cols = ["replica"] + [f"t{i + 1}" for i in range(p["d"])]
    return {"crossing.csv": _csv(cols, rows, "rescaled face-to-face passage times (time per unit length)")}


def run_ball(p, opts):
    law = p["law"]
    cfg = sample_configuration(ball_box(p["n"], law.a, p["d"]), law, p["seed"], p["stream"])
    pts = growing_ball(cfg, p["n"], p["mesh"])
    return {"ball.csv": points_csv(pts, schema_note="rescaled positions x with T(0, n x) <= n")}


def _rate_outputs(name, estimates):
    rows = [e.csv_row() for e in estimates]
    return {f"{name}.csv": _csv(RATE_CSV_COLUMNS, rows, "p_hat and ci are probabilities; rate = -log(p_hat)/n^d"),
            f"{name}.json": json.dumps([e.summary() for e in estimates], indent=2, sort_keys=True) + "\n"}


def run_rate_estimate(p, opts):
    d, n = p["d"], p["n"]
    if p["event"] == "crossing":
        th = [None if t.strip() in ("", "-") else float(t) for t in p["thresholds"].split(",")] if p["thresholds"] else []
        if len(th) > d:
            raise InvalidInput("more thresholds than dimensions")
        event = CrossingEvent(n, d, tuple(th))
    else:
        event = LDEvent(ConvexWindow.cube(d), n, p["g"], p["eps"], p["flavor"], p["k"] or None)
    if p["exact"] or opts.exact:
        est = exact_probability(event, p["law"])
    else:
        est = estimate_probability(p["law"], event, p["trials"], p["tilt"], p["seed"], opts.threads)
    return _rate_outputs("rate", [est])


def run_elementary_rate(p, opts):
    ests = elementary_rate_sequence(p["g"], p["eps"], p["n_list"], p["law"], p["trials"], p["tilt"], p["seed"],
                                    exact=p["exact"] or opts.exact, flavor=p["flavor"], threads=opts.threads)
    return _rate_outputs("elementary_rate", ests)


def run_assembly_check(p, opts):
    rep = subadditive_assembly_check(p["g"], p["eps"], p["delta"], p["n"], p["k"], p["law"], p["trials"], p["seed"],
                                     p["tilt"], p["rate_trials"] or None)
    cols = ["sample", "lower_dev", "upper_dev", "ld_ok", "corridor_ok", "corridor_bound_ok"]
    rows = [[s[c] for c in cols] for s in rep["samples"]]
    summary = {k: v for k, v in rep.items() if k != "samples"}
    return {"assembly.csv": _csv(cols, rows, "deviations of the scale-m rescaled metric from g (time units)"),
            "assembly.json": json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n"}


def run_functional(p, opts, base_dir):
    d = p["d"]
    model = _model_of(p, d)
    if p["field"]:
        path = p["field"] if os.path.isabs(p["field"]) else os.path.join(base_dir, p["field"])
        try:
            fld = GradientField.from_text(open(path, encoding="utf-8").read())
        except OSError as exc:
            raise InvalidInput(f"cannot read field file: {exc}") from exc
        res = integral_rate(fld, model, p["k"])
        rows = [["value", res.value], ["lower", res.lower], ["upper", res.upper]]
        return {"functional.csv": _csv(["quantity", "value"], rows, "integral rate (rate units)")}
    rows = []
    for chunk in p["zetas"].split(";"):
        zeta = _floats(chunk)
        if len(zeta) != d:
            raise InvalidInput(f"crossing vector {chunk!r} needs {d} entries")
        rows.append(zeta + [crossing_rate(zeta, model)])
    cols = [f"zeta{i + 1}" for i in range(d)] + ["crossing_rate"]
    return {"functional.csv": _csv(cols, rows, "crossing vector (time per unit length), rate (rate units)")}


def run_point_point(p, opts):
    x = p["x"]
    model = _model_of(p, len(x))
    curve = point_point_curve(x, p["zetas"], model, k=p["k"], per_tile=p["per_tile"], levels=p["levels"],
                              budget=p["budget"], seed=p["seed"])
    return {"point_point.csv": rate_curve_csv(curve),
            "witness.txt": curve[-1][1].witness.to_text()}


def run_time_constant(p, opts):
    est = time_constant(p["law"], p["x"], p["n_list"], p["replicas"], p["seed"], threads=opts.threads)
    return {"time_constant.csv": _csv(TIME_CONSTANT_COLUMNS, est.rows(), "mu_hat = mean of T(0, n x)/n (time units)")}


RUNNERS = {
    "simulate": run_simulate, "geodesic": run_geodesic, "crossing": run_crossing, "ball": run_ball,
    "rate-estimate": run_rate_estimate, "elementary-rate": run_elementary_rate,
    "assembly-check": run_assembly_check, "point-point": run_point_point, "time-constant": run_time_constant,
}


def run(spec: ExperimentSpec, opts) -> dict:
    if spec.command == "functional":
        return run_functional(spec.params, opts, spec.base_dir)
    return RUNNERS[spec.command](spec.params, opts)


def _versions():
    import scipy

    try:
        from importlib.metadata import version
        pkg = version("artifact")
    except Exception:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "package": pkg}


def build_parser():
    ap = argparse.ArgumentParser(prog="fpplab", description="First-passage percolation large-deviation experiments.")
    ap.add_argument("command", choices=sorted(SCHEMAS))
    ap.add_argument("--spec", required=True, help="experiment spec file (INI, one section named after the command)")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides the spec)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads; affects speed only")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--exact", action="store_true", help="use exact enumeration where the budget allows")
    return ap


def main(argv=None) -> int:
    opts = build_parser().parse_args(argv)
    if opts.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_SPEC
    start = time.time()
    set_audit(True)
    try:
        spec = load_spec(opts.spec, opts.command)
        if opts.seed is not None:
            spec.params["seed"] = opts.seed
        outputs = run(spec, opts)
    except SpecError as exc:
        print(f"invalid spec {opts.spec}: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except InvalidInput as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except MetricInvariantError as exc:
        print(f"metric invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for name, text in outputs.items():
        write_atomic(os.path.join(opts.out, name), text)
    manifest = {
        "command": spec.command,
        "spec": os.path.abspath(spec.path),
        "spec_sha256": spec.digest(),
        "seed": spec.seed,
        "threads": opts.threads,
        "exact": opts.exact,
        "versions": _versions(),
        "outputs": sorted(outputs),
        "wall_time_s": round(time.time() - start, 3),
    }
    write_atomic(os.path.join(opts.out, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
