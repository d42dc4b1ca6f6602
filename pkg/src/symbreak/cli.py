"""Command-line front end: ``symbreak <subcommand> [options]``.

Subcommands: validate, find-re, decompose, reduce, census, verify, sweep.
Exit status is 0 on success, 1 for input errors (bad flags, unreadable
files, failed hypotheses) and 2 for numerical failures.  Reports are JSON
with stable field names; tabular data is CSV.  With ``--output-dir`` the
files are written there, otherwise the main document goes to stdout.

Options may also come from a TOML file given with ``--config``; flags on
the command line take precedence.  ``SYMBREAK_THREADS`` sets the number of
worker threads for candidate refinement (``--deterministic`` forces one).
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .census import REFINE_TOL, locate_critical_points, report
from .dynverify import IntegrationError, verify_re
from .model import SubtorusInclusion, validate
from .modelzoo import BUILTINS, ModelConfigError, builtin, parse_model
from .modelzoo.expr import ExpressionError
from .numkernel import DomainError
from .reduction import (ChartEscapeError, HypothesisError, ReductionError, build_chart,
                        sample_reduced)
from .releq import ConvergenceError, RelativeEquilibrium, find_re, velocity_in_subalgebra
from .wittartin import (MomentumDegeneracyError, NonFreeError, NotCriticalError, decompose,
                        check_nondegenerate, nondegeneracy_space, poisson_space)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
SCHEMA_VERSION = 1


class InputError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _floats(text, what):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]
        except ValueError as err:
            raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from err
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what}: values must be finite")
    return vals


def _param_value(text):
    try:
        return float(text)
    except ValueError:
        return text


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with default options")
    common.add_argument("--model", help=f"builtin model ({', '.join(BUILTINS)})")
    common.add_argument("--model-file", help="TOML model description")
    common.add_argument("--param", action="append", default=None, metavar="KEY=VALUE",
                        help="override a builtin model parameter")
    common.add_argument("--subtorus", help="integer columns of the inclusion, e.g. '1,1' or "
                        "'1,0;0,1'; 'none' for full breaking")
    common.add_argument("--eps", help="perturbation parameter (a list for sweep)")
    common.add_argument("--mode", choices=("symplectic", "poisson"))
    common.add_argument("--resolution", type=int, help="grid points per torus dimension")
    common.add_argument("--continuation", type=int,
                        help="number of equal eps steps used to reach eps")
    common.add_argument("--refine-tol", type=float, help="gradient tolerance for refinement")
    common.add_argument("--seed-x", help="seed phase point for the base relative equilibrium")
    common.add_argument("--seed-xi", help="seed velocity for the base relative equilibrium")
    common.add_argument("--mu", help="momentum of the base relative equilibrium")
    common.add_argument("--output-dir", help="write reports into this directory")
    common.add_argument("--deterministic", action="store_true", default=None,
                        help="serial sweep order and reproducible output")

    p = argparse.ArgumentParser(prog="symbreak", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"symbreak {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="run the model consistency checks")
    fr = sub.add_parser("find-re", parents=[common], help="Newton search for a relative equilibrium")
    fr.add_argument("--group", default="full", choices=("full", "subtorus"))
    sub.add_parser("decompose", parents=[common],
                   help="Witt-Artin decomposition and nondegeneracy report")
    sub.add_parser("reduce", parents=[common], help="sample the reduced function (CSV)")
    sub.add_parser("census", parents=[common], help="critical points and bound checks")
    ve = sub.add_parser("verify", parents=[common], help="integrate the flow from a census report")
    ve.add_argument("--report", required=True, help="census JSON written by 'census'")
    ve.add_argument("--horizon", type=float, default=50.0)
    sub.add_parser("sweep", parents=[common], help="census across a list of eps values")
    return p


_DEFAULTS = dict(model=None, model_file=None, param=None, subtorus=None, eps=None, mode=None,
                 resolution=None, continuation=None, refine_tol=None, seed_x=None,
                 seed_xi=None, mu=None, output_dir=None, deterministic=None)


def _merge_config(args) -> dict:
    cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"config file {path} does not exist")
        try:
            cfg = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as err:
            raise InputError(f"invalid config file {path}: {err}") from err
        unknown = set(cfg) - set(_DEFAULTS) - {"params"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        if "model_file" in cfg and not Path(cfg["model_file"]).is_absolute():
            cfg["model_file"] = str(path.parent / cfg["model_file"])
    opts = dict(_DEFAULTS)
    opts["params"] = dict(cfg.pop("params", {}))
    for key in _DEFAULTS:
        if key in cfg:
            opts[key] = cfg[key]
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    for item in opts.pop("param") or []:
        if "=" not in item:
            raise InputError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        opts["params"][k.strip()] = _param_value(v.strip())
    opts["mode"] = opts["mode"] or "symplectic"
    opts["deterministic"] = bool(opts["deterministic"])
    if opts["resolution"] is not None and int(opts["resolution"]) < 8:
        raise InputError("resolution must be at least 8")
    return opts


# ---------------------------------------------------------------------------
# problem setup


class Problem:
    """Model, subtorus and base relative-equilibrium data resolved from options."""

    def __init__(self, opts: dict):
        self.opts = opts
        if bool(opts["model"]) == bool(opts["model_file"]):
            raise InputError("give exactly one of --model or --model-file")
        if opts["model"]:
            try:
                setup = builtin(opts["model"], **opts["params"])
            except KeyError as err:
                raise InputError(str(err.args[0])) from err
            except TypeError as err:
                raise InputError(f"bad model parameter: {err}") from err
            self.model = setup.model
            self.sub = setup.sub
            self.seed_x, self.seed_xi, self.mu = setup.seed_x, setup.seed_xi, setup.mu_target
            self.default_eps = setup.eps
            self.spec = dict(builtin=opts["model"], params=dict(opts["params"]))
        else:
            path = Path(opts["model_file"])
            if not path.is_file():
                raise InputError(f"model file {path} does not exist")
            source = path.read_text()
            if opts["params"]:
                raise InputError("--param applies to builtin models only; edit [params] instead")
            self.model = parse_model(source)
            self.sub = SubtorusInclusion.trivial(self.model.n)
            self.seed_x = self.seed_xi = self.mu = None
            self.default_eps = None
            self.spec = dict(source=source)
        n = self.model.n
        if opts["subtorus"] is not None:
            text = str(opts["subtorus"]).strip()
            self.sub = (SubtorusInclusion.trivial(n) if text.lower() in ("none", "")
                        else SubtorusInclusion.parse(text, n))
        if opts["seed_x"] is not None:
            self.seed_x = np.array(_floats(opts["seed_x"], "--seed-x"))
        if opts["seed_xi"] is not None:
            self.seed_xi = np.array(_floats(opts["seed_xi"], "--seed-xi"))
        if opts["mu"] is not None:
            self.mu = np.array(_floats(opts["mu"], "--mu"))
        if self.seed_x is None:
            raise InputError("custom models need --seed-x")
        if self.seed_x.shape != (self.model.dim,):
            raise InputError(f"--seed-x needs {self.model.dim} components")
        self.spec["subtorus"] = self.sub.matrix.T.tolist()

    def eps_values(self) -> list:
        vals = _floats(self.opts["eps"], "--eps")
        if vals is None:
            if self.default_eps is None:
                raise InputError("--eps is required")
            vals = [self.default_eps]
        return vals

    def base_re(self) -> RelativeEquilibrium:
        return find_re(self.model, 0.0, "full", self.seed_x, self.seed_xi, self.mu)

    def chart(self, base=None):
        base = base if base is not None else self.base_re()
        wa = decompose(self.model, base.x)
        return build_chart(self.model, base, wa, self.sub, mode=self.opts["mode"])


def _threads(opts) -> int:
    if opts["deterministic"]:
        return 1
    try:
        return max(1, int(os.environ.get("SYMBREAK_THREADS", "1")))
    except ValueError as err:
        raise InputError("SYMBREAK_THREADS must be an integer") from err


# ---------------------------------------------------------------------------
# output


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class Output:
    def __init__(self, opts, out=None):
        self.dir = Path(opts["output_dir"]) if opts["output_dir"] else None
        self.out = out or sys.stdout
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def main(self, name: str, text: str) -> None:
        if self.dir is None:
            self.out.write(text)
        else:
            (self.dir / name).write_text(text)

    def extra(self, name: str, text: str) -> None:
        if self.dir is not None:
            (self.dir / name).write_text(text)


def _csv(writer) -> str:
    buf = io.StringIO()
    writer(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_validate(prob: Problem, out: Output, args) -> int:
    rep = validate(prob.model, prob.sub)
    doc = dict(schema=SCHEMA_VERSION, command="validate", model=prob.model.name, ok=rep.ok,
               checks=[dict(name=c.name, passed=c.passed, worst=c.worst, tol=c.tol,
                            expected_failure=c.expected_failure, note=c.note)
                       for c in rep.checks])
    out.main("validate.json", _dump(doc))
    return EXIT_OK if rep.ok else EXIT_INPUT


def cmd_find_re(prob: Problem, out: Output, args) -> int:
    eps = prob.eps_values()[0] if prob.opts["eps"] is not None else 0.0
    group = "full" if args.group == "full" else prob.sub
    seed_xi, mu = prob.seed_xi, prob.mu
    n, r = prob.model.n, prob.sub.r
    if group != "full" and r != n:
        if seed_xi is not None and len(seed_xi) == n:
            seed_xi = velocity_in_subalgebra(seed_xi, prob.sub)[0]
        if mu is not None and len(mu) == n:
            mu = prob.sub.restrict(mu)
    re = find_re(prob.model, eps, group, prob.seed_x, seed_xi, mu)
    doc = dict(schema=SCHEMA_VERSION, command="find-re", model=prob.model.name,
               group=args.group, relative_equilibrium=re.to_dict(), iterations=re.iters)
    out.main("find_re.json", _dump(doc))
    return EXIT_OK


def cmd_decompose(prob: Problem, out: Output, args) -> int:
    base = prob.base_re()
    wa = decompose(prob.model, base.x)
    space = (nondegeneracy_space(wa, prob.sub) if prob.opts["mode"] == "symplectic"
             else poisson_space(wa))
    rep = check_nondegenerate(prob.model, 0.0, base.x, base.xi, space)
    doc = dict(schema=SCHEMA_VERSION, command="decompose", model=prob.model.name,
               mode=prob.opts["mode"], base=base.to_dict(),
               dims=dict(v_m=wa.v_m.dim, orbit=wa.orbit.dim, w=wa.w.dim, n_alpha=space.dim),
               v_m=wa.v_m.columns, orbit=wa.orbit.columns, w=wa.w.columns,
               nondegeneracy=rep.to_dict())
    out.main("decompose.json", _dump(doc))
    return EXIT_OK if rep.nondegenerate else EXIT_INPUT


def cmd_reduce(prob: Problem, out: Output, args) -> int:
    chart = prob.chart()
    eps = prob.eps_values()[0]
    res = prob.opts["resolution"] or (64 if chart.torus_dim <= 2 else 16)
    rf = sample_reduced(chart, eps, res if chart.torus_dim else 8, prob.opts["continuation"])
    out.main("reduced.csv", _csv(rf.to_csv))
    return EXIT_OK


def _census(prob: Problem, chart, eps, previous=None):
    res = prob.opts["resolution"] or (64 if chart.torus_dim <= 2 else 16)
    rf = sample_reduced(chart, eps, res if chart.torus_dim else 8, prob.opts["continuation"],
                        previous=previous)
    tol = prob.opts["refine_tol"] or REFINE_TOL
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pts = locate_critical_points(rf, chart, tol, workers=_threads(prob.opts))
        rep = report(pts, chart, eps, model_spec=prob.spec)
    rep.notes.extend(str(w.message) for w in caught)
    return rep, rf


def cmd_census(prob: Problem, out: Output, args) -> int:
    chart = prob.chart()
    eps = prob.eps_values()[0]
    rep, rf = _census(prob, chart, eps)
    doc = dict(schema=SCHEMA_VERSION, command="census", model_name=prob.model.name,
               **rep.to_dict(), chart=dict(radius=chart.radius, torus_dim=chart.torus_dim,
                                           complement=chart.complement.c_matrix.T.tolist(),
                                           base=chart.base.to_dict()))
    out.main("census.json", _dump(doc))
    out.extra("census_points.csv", _csv(rep.to_csv))
    out.extra("reduced.csv", _csv(rf.to_csv))
    return EXIT_OK


def _load_report(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"report {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise InputError(f"report {path} is not valid JSON: {err}") from err
    if doc.get("command") != "census" or "model" not in doc:
        raise InputError(f"{path} is not a census report")
    return doc


def cmd_verify(prob_opts: dict, out: Output, args) -> int:
    doc = _load_report(args.report)
    spec = doc["model"]
    if "builtin" in spec:
        model = builtin(spec["builtin"], **spec.get("params", {})).model
    else:
        model = parse_model(spec["source"])
    cols = spec["subtorus"]
    sub = (SubtorusInclusion(np.array(cols, dtype=int).T) if cols
           else SubtorusInclusion.trivial(model.n))
    eps = float(doc["eps"])
    results = []
    for m in doc["mapped"]:
        re = RelativeEquilibrium.from_dict(m)
        results.append(verify_re(model, eps, re, sub, horizon=args.horizon).to_dict())
    ok = all(r["passed"] for r in results)
    out.main("verify.json", _dump(dict(schema=SCHEMA_VERSION, command="verify", eps=eps,
                                       horizon=args.horizon, passed=ok, results=results)))
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_sweep(prob: Problem, out: Output, args) -> int:
    eps_list = prob.eps_values()
    chart = prob.chart()
    rows, previous, reached = [], None, 0.0
    failure = None
    for eps in eps_list:
        try:
            rep, previous = _census(prob, chart, eps, previous)
        except (ReductionError, ChartEscapeError) as err:
            failure = f"eps={eps}: {err}"
            break
        reached = eps
        rows.append(dict(eps=eps, count=rep.count, ls_satisfied=rep.ls_satisfied,
                         morse_satisfied=rep.morse_satisfied, euler_sum=rep.euler_sum,
                         all_nondegenerate=rep.all_nondegenerate,
                         points=[p.to_dict() for p in rep.points]))
    doc = dict(schema=SCHEMA_VERSION, command="sweep", model_name=prob.model.name,
               mode=prob.opts["mode"], largest_eps_reached=reached, failure=failure,
               steps=rows)
    out.main("sweep.json", _dump(doc))
    buf = io.StringIO()
    buf.write("eps,count,ls_satisfied,morse_satisfied,euler_sum\n")
    for r in rows:
        buf.write(f"{r['eps']!r},{r['count']},{r['ls_satisfied']},{r['morse_satisfied']},"
                  f"{r['euler_sum']}\n")
    out.extra("sweep.csv", buf.getvalue())
    return EXIT_OK if failure is None else EXIT_NUMERIC


COMMANDS = {"validate": cmd_validate, "find-re": cmd_find_re, "decompose": cmd_decompose,
            "reduce": cmd_reduce, "census": cmd_census, "sweep": cmd_sweep}

INPUT_ERRORS = (InputError, ModelConfigError, ExpressionError, HypothesisError, NonFreeError,
                MomentumDegeneracyError, FileNotFoundError, KeyError)
NUMERIC_ERRORS = (ConvergenceError, ReductionError, ChartEscapeError, IntegrationError,
                  NotCriticalError, DomainError, np.linalg.LinAlgError, NumericalFailure)


def run(argv=None, stdout=None, stderr=None) -> int:
    stderr = stderr or sys.stderr
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        opts = _merge_config(args)
        out = Output(opts, stdout)
        if args.command == "verify":
            return cmd_verify(opts, out, args)
        prob = Problem(opts)
        return COMMANDS[args.command](prob, out, args)
    except NUMERIC_ERRORS as err:
        print(f"symbreak {args.command}: numerical failure: {err}", file=stderr)
        return EXIT_NUMERIC
    except INPUT_ERRORS as err:
        print(f"symbreak {args.command}: input error: {err}", file=stderr)
        return EXIT_INPUT
    except ValueError as err:
        print(f"symbreak {args.command}: input error: {err}", file=stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
